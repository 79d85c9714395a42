"""Base graph catalog, structural reports, and serialization."""

import networkx as nx
import pytest

from cfikit.basegraph import (
    INFINITY,
    BaseGraph,
    GenerationFailed,
    catalog,
    catalog_graph,
    catalog_or_generate,
    connectivity,
    distant_vertex,
    girth,
    properties,
)

# [PAPER]-grade known invariants of the named graphs, cross-checkable in any
# standard reference: (name, n, degree, girth, connectivity).
KNOWN = [
    ("K4", 4, 3, 3, 3),
    ("K5", 5, 4, 3, 4),
    ("3-prism", 6, 3, 3, 3),
    ("K6", 6, 5, 3, 5),
    ("Q3", 8, 3, 4, 3),
    ("circulant-8-1,3", 8, 4, 4, 4),
    ("petersen", 10, 3, 5, 3),
    ("circulant-12-1,5", 12, 4, 4, 4),
    ("heawood", 14, 3, 6, 3),
    ("Q4", 16, 4, 4, 4),
    ("mcgee", 24, 3, 7, 3),
    ("tutte-coxeter", 30, 3, 8, 3),
    ("Q5", 32, 5, 4, 5),
]


@pytest.mark.parametrize("name,n,degree,g,conn", KNOWN, ids=[row[0] for row in KNOWN])
def test_catalog_invariants(name, n, degree, g, conn):
    graph = catalog_graph(name)
    report = properties(graph)
    assert graph.n == n
    assert report.is_regular and report.degree == degree
    assert report.girth == g
    assert report.connectivity == conn


def test_catalog_listing_complete():
    assert sorted(g.name for g in catalog()) == sorted(row[0] for row in KNOWN)


def test_catalog_unknown_name():
    with pytest.raises(Exception):
        catalog_graph("no-such-graph")


def test_girth_agrees_with_networkx():
    # Dual route: in-package BFS girth vs networkx cycle machinery.
    for graph in catalog():
        nxg = graph.to_nx()
        assert girth(graph) == nx.girth(nxg)
        assert connectivity(graph) == nx.node_connectivity(nxg)


def test_girth_of_forest_is_infinite():
    path = BaseGraph(4, ((0, 1), (1, 2), (2, 3)), name="path4")
    assert girth(path) == INFINITY


def test_distant_vertex():
    g = catalog_graph("heawood")
    # [DERIVED] eccentricity of vertex 0 in the Heawood graph is 3, so a
    # vertex strictly beyond distance 2 exists but none beyond distance 3.
    v = distant_vertex(g, [0], 2)
    assert v is not None and g.distance(0, v) > 2
    assert distant_vertex(g, [0], 3) is None
    # Blocking every vertex leaves no candidate.
    assert distant_vertex(g, range(g.n), 0) is None


def test_text_roundtrip():
    for graph in (catalog_graph("K4"), catalog_graph("petersen")):
        text = graph.to_text()
        back = BaseGraph.from_text(text)
        assert back.n == graph.n
        assert back.edges == graph.edges
        assert back.to_text() == text


def test_json_roundtrip():
    graph = catalog_graph("3-prism")
    blob = graph.to_json()
    back = BaseGraph.from_json(blob)
    assert back.n == graph.n and back.edges == graph.edges
    assert back.to_json() == blob


def test_generation_deterministic_and_valid():
    a = catalog_or_generate(3, 5, 3, seed=11)
    b = catalog_or_generate(3, 5, 3, seed=11)
    assert a.edges == b.edges
    report = properties(a)
    assert report.is_regular and report.degree == 3
    assert report.girth >= 5 and report.connectivity >= 3


def test_generation_prefers_catalog():
    g = catalog_or_generate(3, 6, 3, seed=0)
    assert g.name == "heawood"


def test_generation_failure():
    # No 3-regular graph has girth 60 at any size the budget allows.
    with pytest.raises(GenerationFailed):
        catalog_or_generate(3, 60, 3, seed=0, budget=3)
