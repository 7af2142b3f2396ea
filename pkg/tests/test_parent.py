"""Tests for the parent map and T1-T5."""

import warnings

import pytest

from dyadic_cubes.certify import beta_closed_form, derive_constants, relaxed_bundle
from dyadic_cubes.core.errors import EmptyAnnulus, InvalidInput, PairingOverflow
from dyadic_cubes.nets import NodeId, build_hierarchy
from dyadic_cubes.parent import (
    NodeClass,
    ParentMap,
    assign_parents,
    classify_level,
    find_annulus_point,
    verify_T,
)
from dyadic_cubes.space import from_points, generate_space, packing_number


def _interval_parents():
    space = generate_space("interval:17")
    h = build_hierarchy(space, 0.25, 0.5, 1.0, -1, 2, nested=True)
    b = relaxed_bundle(0.5, 1.0, 2.0, 2, 0.25)
    return assign_parents(h, b, workers=1)


def _strict_hierarchy(N):
    b = derive_constants(0.5, 1.0, 2.0, N)
    h = build_hierarchy(generate_space("interval:65"), b.r, 0.5, 1.0, -1, 1, nested=True)
    return h, b


def _strict_block_hierarchy(b):
    eps = 0.6 * b.r
    space = from_points([0.0, eps, 1.0, 1.0 + eps, 0.3, 0.306, 0.3075], name="block")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_hierarchy(space, b.r, 0.5, 1.0, -1, 1)


def test_classify_level():
    pm = _interval_parents()
    cls = classify_level(pm.hierarchy, pm.bundle, 0)
    tags = [c.tag for c in cls.classes]
    assert tags == ["A", "A", "A", "A", "C", "A", "A", "C", "A"]
    assert cls.f_list == []
    assert cls.a_parent[4] == 1
    assert cls.a_parent[9] == 3


def test_parents_interval():
    pm = _interval_parents()
    assert pm.parent[NodeId(1, 5)] == NodeId(0, 1)
    assert pm.parent[NodeId(1, 8)] == NodeId(0, 1)
    assert pm.parent[NodeId(1, 6)] == NodeId(0, 2)
    # odd points at level 2 are ordinals 10..17
    odd = [pm.parent[NodeId(2, m)].n for m in range(10, 18)]
    assert odd == [1, 1, 2, 2, 2, 2, 3, 3]
    assert pm.children(NodeId(0, 3)) == [NodeId(1, 3), NodeId(1, 9)]
    assert pm.ancestor(NodeId(2, 17), 5) == NodeId(-1, 1)
    assert pm.flags == {}


def test_verify_T_interval():
    report = verify_T(_interval_parents())
    results = {c.name: c.passed for c in report.checks}
    assert results["T1"] and results["T2"] and results["T3"]
    assert report.certificates["mode"] == "relaxed"
    assert report.certificates["max_fan_in"]["0"] == 4


def test_find_annulus_point():
    space = generate_space("interval:17")
    assert find_annulus_point(space, 0, 0.2, 0.3) == 4
    assert find_annulus_point(space, 5, 0.0, 0.1) == 5
    with pytest.raises(EmptyAnnulus) as exc:
        find_annulus_point(space, 0, 0.07, 0.12)
    assert exc.value.below == 1
    assert exc.value.above == 2
    with pytest.raises(InvalidInput):
        find_annulus_point(space, 0, 0.3, 0.2)


def test_strict_pairing_overflow():
    h, b = _strict_hierarchy(2)
    with pytest.raises(PairingOverflow) as exc:
        assign_parents(h, b, workers=1)
    assert (exc.value.k, exc.value.block, exc.value.pairs, exc.value.limit) == (0, 1, 3, 1)


def test_strict_empty_annulus():
    h, b = _strict_hierarchy(3)
    with pytest.raises(EmptyAnnulus):
        assign_parents(h, b, workers=1)


def test_relaxed_annulus_fallback():
    space = generate_space("interval:65")
    h = build_hierarchy(space, 0.25, 0.5, 1.0, 0, 2, nested=True)
    b = relaxed_bundle(0.5, 1.0, 2.0, 33, 0.25, alpha6=0.2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pm = assign_parents(h, b, workers=1)
    assert pm.f_list[1] == [5, 8]
    assert pm.classes[NodeId(1, 5)] == NodeClass("B", 1)
    assert "annulus fallback" in pm.flags[NodeId(1, 5)]
    results = {c.name: c.passed for c in verify_T(pm).checks}
    assert results["T1"] and results["T2"] and results["T3"]


def test_mismatched_ratio():
    space = generate_space("interval:17")
    h = build_hierarchy(space, 0.25, 0.5, 1.0, -1, 2, nested=True)
    with pytest.raises(InvalidInput):
        assign_parents(h, relaxed_bundle(0.5, 1.0, 2.0, 2, 0.2))


def test_dict_round_trip():
    pm = _interval_parents()
    back = ParentMap.from_dict(pm.to_dict(), pm.hierarchy, pm.bundle)
    assert back.parent == pm.parent
    assert back.classes == pm.classes


def test_parents_match_brute_force_rule():
    pm = _interval_parents()
    h, b = pm.hierarchy, pm.bundle
    space = h.space
    for k in range(h.k_min, h.k_max):
        s = h.scale(k)
        coarse = h.centers(k).tolist()
        for m, child in enumerate(h.centers(k + 1).tolist(), start=1):
            dists = [space.d(child, c) for c in coarse]
            close = [n for n, d in enumerate(dists, start=1) if d < b.alpha2 * s]
            if close:
                expected = min(close, key=lambda n: dists[n - 1])
            else:
                expected = min(n for n, d in enumerate(dists, start=1) if d < h.C_star * s)
            assert pm.parent[NodeId(k + 1, m)] == NodeId(k, expected), (k, m)


def test_fan_in_within_packing_number():
    pm = _interval_parents()
    h, b = pm.hierarchy, pm.bundle
    for k in range(h.k_min, h.k_max):
        for node in h.nodes(k):
            center = int(h.centers(k)[node.n - 1])
            bound = packing_number(h.space, center, b.alpha1 * h.scale(k), h.c_star * h.scale(k + 1))
            assert len(pm.children(node)) <= bound, node


def test_strict_block_pairing():
    b = derive_constants(0.5, 1.0, 2.0, 2)
    h = _strict_block_hierarchy(b)
    pm = assign_parents(h, b, workers=1)
    assert pm.f_list[1] == [5]
    assert pm.pairs[(1, 1)] == [(1, 2)]
    assert pm.designated == {(1, 1, 1): 6, (1, 1, 2): 7}
    assert pm.parent[NodeId(1, 6)] == NodeId(0, 1)
    assert pm.parent[NodeId(1, 7)] == NodeId(0, 2)
    assert pm.parent[NodeId(1, 5)] == NodeId(0, 1)
    assert pm.flags == {}


def test_designated_children_lie_between_betas():
    b = derive_constants(0.5, 1.0, 2.0, 2)
    h = _strict_block_hierarchy(b)
    pm = assign_parents(h, b, workers=1)
    assert pm.designated
    for (k1, i, p), m in pm.designated.items():
        j = (p + 1) // 2
        x_f = int(h.centers(k1)[pm.f_list[k1][i - 1] - 1])
        d = h.space.d(x_f, int(h.centers(k1)[m - 1]))
        lo = beta_closed_form(b.C_star, b.gamma, j - 1) * h.scale(k1)
        hi = beta_closed_form(b.C_star, b.gamma, j) * h.scale(k1)
        assert lo < d < hi, (k1, i, p)


def test_verify_T_catches_far_parent():
    space = generate_space("interval:17")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        h = build_hierarchy(space, 0.25, 0.5, 1.0, -1, 3, nested=True)
    pm = assign_parents(h, relaxed_bundle(0.5, 1.0, 2.0, 2, 0.25), workers=1)
    assert verify_T(pm).check("T2").passed

    m = h.centers(3).tolist().index(16) + 1
    pm.parent[NodeId(3, m)] = NodeId(2, 1)  # point 0, a whole diameter away
    check = verify_T(pm).check("T2")
    assert not check.passed
    assert check.details["witnesses"][0] == {"k": 2, "child": m, "parent": 1, "distance": 1.0}
