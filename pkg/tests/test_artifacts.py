"""Tests for run-directory artifacts."""

import json

import numpy as np
import pytest

from dyadic_cubes.artifacts import (
    load_build,
    load_estimate,
    load_report,
    read_artifact,
    read_manifest,
    save_build,
    save_estimate,
    save_report,
    space_from_dict,
    space_to_dict,
    write_artifact,
    write_manifest,
)
from dyadic_cubes.certify import relaxed_bundle
from dyadic_cubes.core.errors import CorruptArtifact
from dyadic_cubes.core.session import Run
from dyadic_cubes.cubes import build_cubes
from dyadic_cubes.energy import ArcEstimate
from dyadic_cubes.nets import build_hierarchy
from dyadic_cubes.parent import assign_parents
from dyadic_cubes.space import generate_space, load_distance_matrix
from dyadic_cubes.testing.verifier import build_report, make_check


def _interval_cubes():
    space = generate_space("interval:17")
    h = build_hierarchy(space, 0.25, 0.5, 1.0, -1, 2, nested=True)
    pm = assign_parents(h, relaxed_bundle(0.5, 1.0, 2.0, 2, 0.25), workers=1)
    return build_cubes(pm)


def _run(tmp_path):
    run = Run(base_dir=tmp_path / "run")
    run.start()
    return run


def test_build_round_trip(tmp_path):
    run = _run(tmp_path)
    cs = _interval_cubes()
    paths = save_build(run, cs)
    assert [p.name for p in paths] == ["space.json", "hierarchy.json", "bundle.json",
                                       "parents.json", "cubes.json"]
    back = load_build(run)
    assert back.hierarchy.levels == cs.hierarchy.levels
    assert back.pm.parent == cs.pm.parent
    assert back.pm.bundle == cs.pm.bundle
    for k in cs.hierarchy.window:
        assert (back.Q[k] == cs.Q[k]).all()


def test_identical_builds_give_identical_bytes(tmp_path):
    a = Run(base_dir=tmp_path / "a")
    b = Run(base_dir=tmp_path / "b")
    save_build(a, _interval_cubes())
    save_build(b, _interval_cubes())
    for name in ("space", "hierarchy", "bundle", "parents", "cubes"):
        assert a.artifact_path(name).read_bytes() == b.artifact_path(name).read_bytes()


def test_space_dict_matrix():
    space = load_distance_matrix([[0, 1, 2], [1, 0, 1], [2, 1, 0]], name="m")
    back = space_from_dict(space_to_dict(space))
    assert back.name == "m"
    assert np.array_equal(back.matrix, space.matrix)


def test_read_artifact_errors(tmp_path):
    path = tmp_path / "x.json"
    with pytest.raises(CorruptArtifact, match="missing"):
        read_artifact(path, "cubes")

    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(CorruptArtifact, match="not valid JSON"):
        read_artifact(path, "cubes")

    path.write_text(json.dumps({"schema": 99, "kind": "cubes", "data": {}}), encoding="utf-8")
    with pytest.raises(CorruptArtifact, match="schema"):
        read_artifact(path, "cubes")

    write_artifact(path, "parents", {})
    with pytest.raises(CorruptArtifact, match="kind"):
        read_artifact(path, "cubes")


def test_missing_parent_is_corrupt(tmp_path):
    run = _run(tmp_path)
    save_build(run, _interval_cubes())
    path = run.artifact_path("parents")
    data = read_artifact(path, "parents")
    data["levels"]["2"].pop()
    write_artifact(path, "parents", data)
    with pytest.raises(CorruptArtifact, match=r"no parent for \(2, 17\)"):
        load_build(run)


def test_bad_hierarchy_is_corrupt(tmp_path):
    run = _run(tmp_path)
    save_build(run, _interval_cubes())
    path = run.artifact_path("hierarchy")
    data = read_artifact(path, "hierarchy")
    data["levels"]["0"][1][1] = 99
    write_artifact(path, "hierarchy", data)
    with pytest.raises(CorruptArtifact) as exc:
        load_build(run)
    assert exc.value.path.endswith("hierarchy.json")


def test_report_round_trip(tmp_path):
    run = _run(tmp_path)
    report = build_report("T", [make_check("T4", [{"k": 0, "nodes": [1, 2]}], "ok", "bad")],
                          certificates={"mode": "relaxed"})
    save_report(run, report)
    assert load_report(run, "T") == report


def test_manifest_history(tmp_path):
    run = _run(tmp_path)
    save_build(run, _interval_cubes())
    write_manifest(run, "build", {"seed": 3}, {"cubes": 0.1}, {"OS": "test"})
    write_manifest(run, "verify", {"seed": 3}, {"verify_D": 0.2}, {"OS": "test"})
    manifest = read_manifest(run)
    assert manifest["run_id"] == "run"
    assert manifest["seed"] == 3
    assert [c["command"] for c in manifest["commands"]] == ["build", "verify"]
    assert "cubes.json" in manifest["files"]
    assert "manifest.json" not in manifest["files"]


def test_estimate_round_trip(tmp_path):
    run = _run(tmp_path)
    estimate = ArcEstimate(p_low=2.0, p_high=2.5, slopes={2.0: 0.1, 2.5: -0.4},
                           verdicts={2.0: "flat", 2.5: "decaying"}, M=2)
    save_estimate(run, estimate)
    loaded = load_estimate(run)
    assert loaded["summary"] == "in [2, 2.5]"
    assert loaded["verdicts"] == [[2.0, "flat"], [2.5, "decaying"]]
    assert loaded == json.loads(json.dumps(estimate.to_dict()))


def test_failed_build_marks_run_incomplete(tmp_path):
    run = _run(tmp_path)
    save_build(run, _interval_cubes())
    write_manifest(run, "build", {"seed": 0}, {}, {"OS": "test"}, status="failed")
    write_manifest(run, "verify", {"seed": 0}, {}, {"OS": "test"})
    manifest = read_manifest(run)
    assert manifest["complete"] is False
    assert [c["status"] for c in manifest["commands"]] == ["failed", "ok"]
    with pytest.raises(CorruptArtifact, match="did not finish"):
        load_build(run)

    write_manifest(run, "build", {"seed": 0}, {}, {"OS": "test"})
    assert read_manifest(run)["complete"] is True
    assert load_build(run).hierarchy.space.n == 17
