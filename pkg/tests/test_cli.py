"""Tests for the command-line interface."""

import json

from click.testing import CliRunner

from dyadic_cubes import __version__
from dyadic_cubes.cli import main


def _last_json(output):
    return json.loads(output.strip().splitlines()[-1])


def _build(tmp_path, *extra):
    out = tmp_path / "run"
    runner = CliRunner()
    result = runner.invoke(main, [
        "build", "--space", "interval:17", "--gamma", "2", "--N", "2",
        "--k-min", "-1", "--k-max", "2", "--nested-nets", "--workers", "1", "--quiet",
        "--out", str(out), *extra,
    ])
    return out, result


def test_version():
    result = CliRunner().invoke(main, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_build(tmp_path):
    out, result = _build(tmp_path)
    assert result.exit_code == 0, result.output
    data = _last_json(result.output)
    assert data["points"] == 17
    assert data["mode"] == "relaxed"
    assert data["r"] == 0.25
    assert data["window"] == [-1, 2]
    assert data["nodes"] == 1 + 3 + 9 + 17
    for name in ("space", "hierarchy", "bundle", "parents", "cubes", "manifest"):
        assert (out / f"{name}.json").is_file()
    stages = [json.loads(l)["stage"] for l in (out / "run.log").read_text(encoding="utf-8").splitlines()]
    assert stages == ["space", "bundle", "hierarchy", "parents", "cubes", "save"]
    hierarchy = [json.loads(l) for l in (out / "run.log").read_text(encoding="utf-8").splitlines()][2]
    assert any("below resolution" in w for w in hierarchy["result"]["warnings"])
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))["data"]
    assert manifest["complete"] is True
    assert manifest["run_id"] == "run"


def test_build_defaults_to_independent_nets(tmp_path):
    out = tmp_path / "run"
    result = CliRunner().invoke(main, [
        "build", "--space", "interval:17", "--gamma", "2", "--N", "2",
        "--k-min", "-1", "--k-max", "2", "--workers", "1", "--quiet", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    hierarchy = json.loads((out / "hierarchy.json").read_text(encoding="utf-8"))["data"]
    assert hierarchy["nested"] is False
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))["data"]
    assert manifest["config"]["nested_nets"] is False


def test_build_missing_input_leaves_no_run(tmp_path):
    out = tmp_path / "run"
    result = CliRunner().invoke(main, ["build", "--space", str(tmp_path / "none.txt"),
                                       "--out", str(out), "--quiet"])
    assert result.exit_code == 1
    assert "FileNotFoundError" in result.output
    assert not out.exists()


def test_build_strict_ratio_too_large(tmp_path):
    out, result = _build(tmp_path, "--mode", "strict", "--r", "0.25")
    assert result.exit_code == 1
    assert "StrictRatioError" in result.output
    assert "TAIL" in result.output
    record = json.loads((out / "error.json").read_text(encoding="utf-8"))
    assert record["error"] == "StrictRatioError"
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))["data"]
    assert manifest["complete"] is False
    assert manifest["commands"][-1]["status"] == "failed"

    again = CliRunner().invoke(main, ["verify", str(out), "--quiet"])
    assert again.exit_code == 1
    assert "did not finish" in again.output


def test_verify(tmp_path):
    out, _ = _build(tmp_path)
    result = CliRunner().invoke(main, ["verify", str(out), "--quiet"])
    assert result.exit_code in (0, 2), result.output
    data = _last_json(result.output)
    assert set(data["families"]) == {"net", "T", "D", "B"}
    assert data["families"]["net"] is True
    assert data["families"]["D"] is True
    for family in ("net", "T", "D", "B"):
        assert (out / "reports" / f"{family}.json").is_file()
    summary = (out / "reports" / "summary.md").read_text(encoding="utf-8")
    assert "## D: PASS" in summary
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert [c["command"] for c in manifest["data"]["commands"]] == ["build", "verify"]


def test_verify_without_build(tmp_path):
    result = CliRunner().invoke(main, ["verify", str(tmp_path / "nothing"), "--quiet"])
    assert result.exit_code == 1
    assert "CorruptArtifact" in result.output


def test_estimate(tmp_path):
    out = tmp_path / "run"
    runner = CliRunner()
    built = runner.invoke(main, [
        "build", "--space", "interval:129", "--C-star", "0.6", "--gamma", "2", "--N", "2",
        "--workers", "1", "--quiet", "--out", str(out),
    ])
    assert built.exit_code == 0, built.output
    result = runner.invoke(main, [
        "estimate", str(out), "--M", "1", "--p-min", "1.05", "--p-max", "3", "--steps", "1",
        "--w-budget", "4", "--workers", "1", "--quiet",
    ])
    assert result.exit_code == 0, result.output
    data = _last_json(result.output)
    assert data["M"] == 1
    assert data["p_low"] <= data["p_high"]
    assert (out / "estimate.json").is_file()
    assert (out / "reports" / "energy.md").read_text(encoding="utf-8").startswith(
        "# Conformal dimension estimate"
    )


def test_estimate_needs_three_depths(tmp_path):
    out, _ = _build(tmp_path)
    result = CliRunner().invoke(main, ["estimate", str(out), "--M", "1", "--workers", "1", "--quiet"])
    assert result.exit_code == 1
    assert "InsufficientDepth" in result.output
    assert (out / "error.json").is_file()


def test_export_graph(tmp_path):
    out, _ = _build(tmp_path)
    result = CliRunner().invoke(main, ["export-graph", str(out), "--level", "0"])
    assert result.exit_code == 0, result.output
    graphs = _last_json(result.output)["graphs"]
    assert graphs[0]["nodes"] == 3
    assert graphs[0]["edges"] == 3
    lines = (out / "graphs" / "level-+0.edgelist").read_text(encoding="utf-8").splitlines()
    assert "0:1 0:2" in lines


def test_export_graph_bad_level(tmp_path):
    out, _ = _build(tmp_path)
    result = CliRunner().invoke(main, ["export-graph", str(out), "--level", "9"])
    assert result.exit_code == 1
    assert "InvalidInput" in result.output
