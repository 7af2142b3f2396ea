"""Structured per-stage logging for runs."""

from __future__ import annotations

import json
import time
from typing import IO, Any

import click

from dyadic_cubes.core.session import Run


class StageLogger:
    """Append-only JSONL log for a run; one entry per pipeline stage."""

    def __init__(self, run: Run, echo: bool = True):
        self.run = run
        self.echo = echo
        self._path = run.log_path()
        self._out: IO[str] | None = None

    def open(self) -> None:
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._out = self._path.open("a", encoding="utf-8")

    def close(self) -> None:
        if self._out is not None:
            self._out.close()
        self._out = None

    def __enter__(self) -> StageLogger:
        self.open()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def log_stage(
        self,
        step: int,
        stage: str,
        args: dict[str, Any],
        result: dict[str, Any] | None = None,
        error: str | None = None,
        elapsed_s: float | None = None,
    ) -> None:
        record = {
            "run": self.run.run_id,
            "step": step,
            "timestamp": time.time(),
            "stage": stage,
            "args": args,
            "result": result,
            "error": error,
            "elapsed_s": elapsed_s,
        }
        text = json.dumps(record, ensure_ascii=False, default=str)
        if self._out is not None:
            print(text, file=self._out, flush=True)
        if self.echo:
            click.echo(text, err=True)

    def read_last_n(self, n: int | None = 20) -> list[dict[str, Any]]:
        if not self._path.is_file():
            return []
        with self._path.open(encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
        return records if n is None else records[-n:]

    def stages(self, name: str) -> list[dict[str, Any]]:
        """Every logged entry for one stage, oldest first."""
        return [r for r in self.read_last_n(None) if r["stage"] == name]
