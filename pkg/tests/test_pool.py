"""Tests for the worker pool."""

import pytest

from dyadic_cubes.core.errors import InvalidInput
from dyadic_cubes.pool import map_ordered, worker_count


def test_worker_count_explicit():
    assert worker_count(3) == 3


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("DYADIC_CUBES_WORKERS", "2")
    assert worker_count() == 2


def test_worker_count_bad_env(monkeypatch):
    monkeypatch.setenv("DYADIC_CUBES_WORKERS", "many")
    with pytest.raises(InvalidInput):
        worker_count()


def test_worker_count_rejects_zero():
    with pytest.raises(InvalidInput):
        worker_count(0)


def test_map_ordered_keeps_order():
    assert map_ordered(lambda x: x * x, range(20), workers=4) == [x * x for x in range(20)]
    assert map_ordered(str, [], workers=4) == []
