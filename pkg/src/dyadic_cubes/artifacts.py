"""Schema-versioned JSON artifacts of a run directory.

Every file is ``{"schema": SCHEMA_VERSION, "kind": <name>, "data": {...}}``,
written with sorted keys so identical builds give identical bytes.
"""

from __future__ import annotations

import json
import pathlib
import time
from typing import Any

import numpy as np

from dyadic_cubes import __version__
from dyadic_cubes.certify import ConstantBundle
from dyadic_cubes.constants import SCHEMA_VERSION
from dyadic_cubes.core.errors import CorruptArtifact, DyadicCubesError
from dyadic_cubes.core.session import Run
from dyadic_cubes.cubes import CubeSystem
from dyadic_cubes.energy import ArcEstimate
from dyadic_cubes.nets import NetHierarchy
from dyadic_cubes.parent import ParentMap
from dyadic_cubes.space import MetricSpace, load_distance_matrix
from dyadic_cubes.testing.verifier import Report

BUILD_KINDS = ("space", "hierarchy", "bundle", "parents", "cubes")


def _default(obj: Any) -> Any:
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def dumps(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, default=_default) + "\n"


def write_artifact(path: pathlib.Path, kind: str, data: dict[str, Any]) -> pathlib.Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps({"schema": SCHEMA_VERSION, "kind": kind, "data": data}), encoding="utf-8")
    return path


def read_artifact(path: pathlib.Path, kind: str) -> dict[str, Any]:
    if not path.is_file():
        raise CorruptArtifact(str(path), "missing")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CorruptArtifact(str(path), f"not valid JSON ({e})") from None
    if not isinstance(raw, dict) or "data" not in raw:
        raise CorruptArtifact(str(path), "no data section")
    if raw.get("schema") != SCHEMA_VERSION:
        raise CorruptArtifact(str(path), f"schema {raw.get('schema')!r}, expected {SCHEMA_VERSION}")
    if raw.get("kind") != kind:
        raise CorruptArtifact(str(path), f"kind {raw.get('kind')!r}, expected {kind!r}")
    return raw["data"]


# ── Space ────────────────────────────────────────────────────────


def space_to_dict(space: MetricSpace) -> dict[str, Any]:
    if space.matrix is not None:
        return {"name": space.name, "matrix": space.matrix.tolist()}
    return {"name": space.name, "coords": space.coords.tolist()}


def space_from_dict(raw: dict[str, Any]) -> MetricSpace:
    if "matrix" in raw:
        return load_distance_matrix(raw["matrix"], name=raw.get("name", "matrix"))
    return MetricSpace(coords=np.array(raw["coords"], dtype=float), name=raw.get("name", ""))


# ── Build bundle ─────────────────────────────────────────────────


def save_build(run: Run, cs: CubeSystem) -> list[pathlib.Path]:
    pm = cs.pm
    h = pm.hierarchy
    return [
        write_artifact(run.artifact_path("space"), "space", space_to_dict(h.space)),
        write_artifact(run.artifact_path("hierarchy"), "hierarchy", h.to_dict()),
        write_artifact(run.artifact_path("bundle"), "bundle", pm.bundle.to_dict()),
        write_artifact(run.artifact_path("parents"), "parents", pm.to_dict()),
        write_artifact(run.artifact_path("cubes"), "cubes", cs.to_dict()),
    ]


def load_build(run: Run) -> CubeSystem:
    """Rebuild the cube system of a run; any inconsistency is a CorruptArtifact."""
    manifest = run.manifest_path()
    if manifest.is_file() and read_artifact(manifest, "manifest").get("complete") is False:
        raise CorruptArtifact(str(manifest), "the build of this run did not finish")
    data = {kind: read_artifact(run.artifact_path(kind), kind) for kind in BUILD_KINDS}
    current = "space"
    try:
        space = space_from_dict(data["space"])
        current = "hierarchy"
        h = NetHierarchy.from_dict(data["hierarchy"], space)
        current = "bundle"
        bundle = ConstantBundle.from_dict(data["bundle"])
        current = "parents"
        pm = ParentMap.from_dict(data["parents"], h, bundle)
        missing = [node for node in h.all_nodes() if node.k > h.k_min and node not in pm.parent]
        if missing:
            raise CorruptArtifact(str(run.artifact_path("parents")), f"no parent for {tuple(missing[0])}")
        current = "cubes"
        return CubeSystem.from_dict(data["cubes"], pm)
    except CorruptArtifact:
        raise
    except (DyadicCubesError, KeyError, TypeError, ValueError, IndexError) as e:
        raise CorruptArtifact(str(run.artifact_path(current)), f"{type(e).__name__}: {e}") from None


# ── Reports and estimates ────────────────────────────────────────


def save_report(run: Run, report: Report) -> pathlib.Path:
    return write_artifact(run.report_path(report.family), "report", report.to_dict())


def load_report(run: Run, family: str) -> Report:
    path = run.report_path(family)
    raw = read_artifact(path, "report")
    try:
        return Report.from_dict(raw)
    except (KeyError, TypeError) as e:
        raise CorruptArtifact(str(path), f"{type(e).__name__}: {e}") from None


def save_estimate(run: Run, estimate: ArcEstimate) -> pathlib.Path:
    return write_artifact(run.artifact_path("estimate"), "estimate", estimate.to_dict())


def load_estimate(run: Run) -> dict[str, Any]:
    return read_artifact(run.artifact_path("estimate"), "estimate")


# ── Manifest ─────────────────────────────────────────────────────


def write_manifest(
    run: Run,
    command: str,
    config: dict[str, Any],
    timings: dict[str, float],
    environment: dict[str, Any],
    status: str = "ok",
) -> pathlib.Path:
    """Index of the run directory; the only file carrying timestamps.

    A build with a status other than "ok" marks the run incomplete; later commands keep the flag.
    """
    path = run.manifest_path()
    previous: dict[str, Any] = {}
    if path.is_file():
        try:
            previous = read_artifact(path, "manifest")
        except CorruptArtifact:
            previous = {}
    history = previous.get("commands", [])
    history.append({"command": command, "status": status, "finished_at": time.time(), "timings": timings})
    complete = status == "ok" if command == "build" else previous.get("complete", True)
    files = sorted(
        str(p.relative_to(run.base_dir)).replace("\\", "/")
        for p in run.base_dir.rglob("*")
        if p.is_file() and p.name not in ("manifest.json", "run.log")
    )
    data = {
        "run_id": run.run_id,
        "version": __version__,
        "seed": config.get("seed"),
        "config": config,
        "environment": environment,
        "commands": history,
        "complete": complete,
        "files": files,
    }
    return write_artifact(path, "manifest", data)


def read_manifest(run: Run) -> dict[str, Any]:
    return read_artifact(run.manifest_path(), "manifest")
