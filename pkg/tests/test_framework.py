"""Tests for the reference tree, scale sections and delta_M."""

import math

import numpy as np
import pytest

from dyadic_cubes.certify import relaxed_bundle
from dyadic_cubes.core.errors import InvalidInput, NoSingletonRoot
from dyadic_cubes.cubes import build_cubes
from dyadic_cubes.framework import (
    adapted_M,
    breakpoints,
    delta_M,
    delta_matrix,
    diam_g,
    level_graph,
    scale_section,
    to_tree,
    tree_distance_b,
    verify_basic_framework,
)
from dyadic_cubes.nets import NodeId, build_hierarchy
from dyadic_cubes.parent import assign_parents
from dyadic_cubes.space import generate_space


def _interval_cubes(k_min=-1):
    space = generate_space("interval:17")
    h = build_hierarchy(space, 0.25, 0.5, 1.0, k_min, 2, nested=True)
    pm = assign_parents(h, relaxed_bundle(0.5, 1.0, 2.0, 2, 0.25), workers=1)
    return build_cubes(pm)


def _tree():
    cs = _interval_cubes()
    return to_tree(cs), cs


def test_tree_shape():
    tree, _ = _tree()
    assert tree.phi == NodeId(-1, 1)
    assert tree.depth == 3
    assert tree.periodic_points() == {tree.phi}
    assert tree.level(NodeId(2, 5)) == 3
    assert len(tree.children(NodeId(1, 2))) == 5


def test_no_singleton_root():
    with pytest.raises(NoSingletonRoot) as exc:
        to_tree(_interval_cubes(k_min=0))
    assert exc.value.count == 3


def test_diameters_and_breakpoints():
    tree, _ = _tree()
    assert tree.g(tree.phi) == pytest.approx(1.0)
    assert tree.g(NodeId(0, 1)) == pytest.approx(0.75)
    assert tree.g(NodeId(0, 2)) == pytest.approx(0.375)
    assert tree.g(NodeId(1, 3)) == pytest.approx(0.1875)
    assert not tree.eligible(NodeId(1, 4))
    assert breakpoints(tree) == pytest.approx([0.1875, 0.375, 0.75, 1.0])


def test_diam_g_is_cube_diameter():
    tree, cs = _tree()
    assert diam_g(cs, NodeId(0, 3)) == pytest.approx(0.1875)
    assert diam_g(cs, NodeId(1, 6)) == 0.0
    assert diam_g(cs, NodeId(-1, 1)) == pytest.approx(1.0)
    assert diam_g(cs, NodeId(0, 2)) == pytest.approx(tree.g(NodeId(0, 2)))


def test_scale_sections():
    tree, cs = _tree()
    assert scale_section(tree, cs, 0.75).nodes == [NodeId(0, 1), NodeId(0, 2), NodeId(0, 3)]
    assert scale_section(tree, cs, 1.0).nodes == [tree.phi]
    assert scale_section(tree, cs, 2.0).nodes == []
    assert scale_section(tree, cs, 0.1875).nodes == [NodeId(0, 3), NodeId(1, 1)]
    section = scale_section(tree, cs, 0.375)
    assert section.nodes == [NodeId(0, 2), NodeId(0, 3), NodeId(1, 1)]
    assert set(section.edges) == {(NodeId(0, 2), NodeId(0, 3)), (NodeId(0, 2), NodeId(1, 1))}
    assert section.max_degree() == 2
    with pytest.raises(InvalidInput):
        scale_section(tree, cs, 0.0)


def test_delta_M():
    tree, cs = _tree()
    assert delta_M(tree, cs, 0, 16, 1) == pytest.approx(0.75)
    assert delta_M(tree, cs, 0, 16, 2) == pytest.approx(0.375)
    assert delta_M(tree, cs, 5, 5, 1) == 0.0
    assert delta_M(tree, cs, 0, 1, 1) == pytest.approx(0.1875)


def test_delta_matrix_is_symmetric():
    tree, cs = _tree()
    pts = np.arange(17)
    delta = delta_matrix(tree, cs, pts, 2)
    assert np.allclose(delta, delta.T)
    assert (np.diag(delta) == 0).all()
    assert np.isfinite(delta).all()
    with pytest.raises(InvalidInput):
        delta_matrix(tree, cs, pts, 0)


def test_delta_matrix_nonincreasing_in_M():
    tree, cs = _tree()
    pts = np.arange(17)
    d1, d2, d3 = (delta_matrix(tree, cs, pts, M) for M in (1, 2, 3))
    assert (d2 <= d1).all()
    assert (d3 <= d2).all()
    assert (d2 < d1).any()


def test_level_graph():
    tree, cs = _tree()
    graph = level_graph(tree, cs, 1)
    assert graph.nodes == [NodeId(0, 1), NodeId(0, 2), NodeId(0, 3)]
    assert graph.hops_from(NodeId(0, 1)).tolist() == [0, 1, 1]
    nxg = graph.to_networkx(g={w: tree.g(w) for w in graph.nodes})
    assert nxg.number_of_edges() == 3
    assert nxg.nodes[NodeId(0, 2)]["g"] == pytest.approx(0.375)
    with pytest.raises(InvalidInput):
        level_graph(tree, cs, 7)


def test_tree_distance_b():
    tree, _ = _tree()
    assert tree_distance_b(tree, NodeId(1, 4), NodeId(1, 1)) == (1, 1)
    assert tree_distance_b(tree, NodeId(2, 1), NodeId(0, 1)) == (2, 0)
    assert tree_distance_b(tree, NodeId(0, 2), NodeId(0, 2)) == (0, 0)


def test_adapted_M():
    tree, cs = _tree()
    M, eta1 = adapted_M(tree, cs)
    assert M == 1
    assert math.isfinite(eta1)


def test_verify_basic_framework():
    tree, cs = _tree()
    report = verify_basic_framework(tree, cs, M=2)
    assert report.family == "B"
    assert report.check("B1").passed
    assert report.certificates["M"] == 2
    assert report.certificates["max_fan_in"] == 5
    assert report.certificates["sections"] == 4
    assert report.certificates["eta3"] >= 1.0
