"""Tests for run directory management."""

from dyadic_cubes.core.session import Run


def test_run_creates_dirs(tmp_path):
    run = Run(base_dir=tmp_path / "run")
    run.start()
    assert run.base_dir.exists()
    assert run.reports_dir.exists()


def test_run_step_counter():
    run = Run()
    assert run.step_count == 0
    assert run.next_step() == 1
    assert run.next_step() == 2
    assert run.step_count == 2


def test_run_paths(tmp_path):
    run = Run(base_dir=tmp_path)
    assert run.artifact_path("cubes").name == "cubes.json"
    assert run.report_path("D") == tmp_path / "reports" / "D.json"
    assert run.graph_path(-1).name == "level--1.edgelist"
    assert run.graph_path(2).name == "level-+2.edgelist"
    assert run.log_path().name == "run.log"
    assert run.manifest_path().name == "manifest.json"


def test_existing_uses_directory_name(tmp_path):
    run = Run.existing(tmp_path / "abc123")
    assert run.run_id == "abc123"
    assert run.base_dir == tmp_path / "abc123"


def test_new_and_reopened_run_share_id(tmp_path):
    created = Run(base_dir=tmp_path / "run-7")
    reopened = Run.existing(tmp_path / "run-7")
    assert created.run_id == reopened.run_id == "run-7"


def test_default_run_id_names_directory():
    run = Run()
    assert len(run.run_id) == 12
    assert run.base_dir.name == run.run_id
