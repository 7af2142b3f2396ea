"""Tests for runner logging."""

from dyadic_cubes.core.session import Run
from dyadic_cubes.runner.logging import StageLogger


def test_stage_logger(tmp_path):
    run = Run(base_dir=tmp_path / "run")
    run.start()

    logger = StageLogger(run, echo=False)
    logger.open()
    logger.log_stage(1, "hierarchy", {"window": [-1, 2]}, result={"levels": 4}, elapsed_s=0.1)
    logger.log_stage(2, "parents", {}, error="PairingOverflow: too many pairs")
    logger.close()

    entries = logger.read_last_n(10)
    assert len(entries) == 2
    assert entries[0]["stage"] == "hierarchy"
    assert entries[0]["result"] == {"levels": 4}
    assert entries[1]["error"].startswith("PairingOverflow")


def test_stage_logger_echo(tmp_path, capsys):
    run = Run(base_dir=tmp_path / "run")
    with StageLogger(run) as logger:
        logger.log_stage(1, "space", {"input": "interval:5"})
    assert '"stage": "space"' in capsys.readouterr().err


def test_read_without_log(tmp_path):
    run = Run(base_dir=tmp_path / "empty")
    assert StageLogger(run, echo=False).read_last_n() == []


def test_stages_filter_and_run_id(tmp_path):
    run = Run(run_id="r1", base_dir=tmp_path / "r1")
    with StageLogger(run, echo=False) as logger:
        logger.log_stage(1, "space", {})
        logger.log_stage(2, "parents", {"workers": 1})
        logger.log_stage(3, "parents", {"workers": 2})
    parents = logger.stages("parents")
    assert [e["args"]["workers"] for e in parents] == [1, 2]
    assert {e["run"] for e in logger.read_last_n(None)} == {"r1"}
