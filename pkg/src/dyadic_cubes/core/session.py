"""Run directory lifecycle."""

from __future__ import annotations

import pathlib
import time
import uuid
from dataclasses import dataclass, field

from dyadic_cubes.constants import RUN_DIR


@dataclass
class Run:
    """One build/verify/estimate invocation = one run directory."""

    run_id: str = ""
    started_at: float = field(default_factory=time.time)
    base_dir: pathlib.Path | None = None
    step_count: int = 0

    def __post_init__(self):
        # The directory name is the run id, for new and reopened runs alike.
        if self.base_dir is None:
            self.run_id = self.run_id or uuid.uuid4().hex[:12]
            self.base_dir = pathlib.Path(RUN_DIR) / self.run_id
        self.base_dir = pathlib.Path(self.base_dir)
        self.run_id = self.base_dir.name

    @property
    def reports_dir(self) -> pathlib.Path:
        return self.base_dir / "reports"

    @property
    def graphs_dir(self) -> pathlib.Path:
        return self.base_dir / "graphs"

    def start(self) -> None:
        self.base_dir.mkdir(parents=True, exist_ok=True)
        self.reports_dir.mkdir(exist_ok=True)

    def next_step(self) -> int:
        self.step_count += 1
        return self.step_count

    def artifact_path(self, name: str) -> pathlib.Path:
        return self.base_dir / f"{name}.json"

    def report_path(self, family: str) -> pathlib.Path:
        return self.reports_dir / f"{family}.json"

    def graph_path(self, level: int) -> pathlib.Path:
        return self.graphs_dir / f"level-{level:+d}.edgelist"

    def log_path(self) -> pathlib.Path:
        return self.base_dir / "run.log"

    def manifest_path(self) -> pathlib.Path:
        return self.base_dir / "manifest.json"

    def error_path(self) -> pathlib.Path:
        return self.base_dir / "error.json"

    @property
    def elapsed_s(self) -> float:
        return time.time() - self.started_at

    @classmethod
    def existing(cls, path: str | pathlib.Path) -> Run:
        """Run bound to an existing directory; the directory name is the run id."""
        return cls(base_dir=pathlib.Path(path))
