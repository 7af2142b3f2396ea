"""Tests for net hierarchies."""

import warnings

import pytest

from dyadic_cubes.core.errors import InvalidInput, SeedsTooClose, WindowEmpty
from dyadic_cubes.nets import (
    NetHierarchy,
    NodeId,
    build_hierarchy,
    build_net,
    default_window,
    verify_net,
)
from dyadic_cubes.space import generate_space


def _interval_hierarchy(nested=True):
    space = generate_space("interval:17")
    return build_hierarchy(space, 0.25, 0.5, 1.0, -1, 2, nested=nested)


def test_default_window():
    assert default_window(generate_space("interval:17"), 0.25, 0.5) == (-1, 2)


def test_nested_levels():
    h = _interval_hierarchy()
    assert h.levels[-1] == [0]
    assert h.levels[0] == [0, 8, 16]
    assert h.levels[1] == [0, 8, 16, 2, 4, 6, 10, 12, 14]
    assert h.levels[2][:9] == h.levels[1]
    assert h.levels[2][9:] == list(range(1, 17, 2))
    assert h.point(NodeId(1, 5)) == 4
    assert h.scale(1) == 0.25


def test_verify_net_passes():
    report = verify_net(_interval_hierarchy())
    assert report.passed
    assert report.certificates["level_sizes"] == {"-1": 1, "0": 3, "1": 9, "2": 17}


def test_independent_levels_still_valid():
    h = _interval_hierarchy(nested=False)
    assert verify_net(h).passed
    assert all(h.levels[k][0] == 0 for k in h.window)


def test_verify_net_reports_separation():
    h = _interval_hierarchy()
    bad = NetHierarchy(
        space=h.space, r=h.r, c_star=h.c_star, C_star=h.C_star, k_min=0, k_max=0,
        base=0, levels={0: [0, 1, 8, 16]},
    )
    report = verify_net(bad)
    assert not report.passed
    sep = next(c for c in report.checks if c.name == "separation")
    assert sep.details["witnesses"][0]["points"] == [0, 1]


def test_verify_net_reports_covering():
    h = _interval_hierarchy()
    bad = NetHierarchy(
        space=h.space, r=h.r, c_star=h.c_star, C_star=h.C_star, k_min=1, k_max=1,
        base=0, levels={1: [0, 8, 16]},
    )
    names = {c.name for c in verify_net(bad).failed}
    assert names == {"covering"}


def test_seeds_too_close():
    space = generate_space("interval:17")
    with pytest.raises(SeedsTooClose) as exc:
        build_net(space, [0, 1], 0.5, 1.0)
    assert (exc.value.a, exc.value.b) == (0, 1)


def test_build_net_rejects_covering_below_separation():
    with pytest.raises(InvalidInput):
        build_net(generate_space("interval:5"), [0], 0.5, 0.25)


def test_empty_window():
    with pytest.raises(WindowEmpty):
        build_hierarchy(generate_space("interval:5"), 0.25, 0.5, 1.0, 2, 1)


def test_coarse_window_warns_about_missing_points():
    space = generate_space("interval:17")
    with pytest.warns(UserWarning, match="finest level"):
        build_hierarchy(space, 0.25, 0.5, 1.0, -1, 1, nested=True)


def test_dict_round_trip_and_validation():
    h = _interval_hierarchy()
    raw = h.to_dict()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        back = NetHierarchy.from_dict(raw, h.space)
    assert back.levels == h.levels
    assert back.nested is True

    raw["levels"]["1"][0][0] = 5
    with pytest.raises(InvalidInput, match="ordinals"):
        NetHierarchy.from_dict(raw, h.space)
