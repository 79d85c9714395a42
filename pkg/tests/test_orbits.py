"""Pebbled automorphism orbits of tuples and their type descriptors."""

import itertools
import random

import pytest

from cfikit.basegraph import catalog_graph
from cfikit.cfi import TwistFunction, build_cfi, verify_isomorphism
from cfikit.orbits import (
    OrbitPartition,
    aut_generators,
    component_split,
    decode_tuple,
    encode_tuple,
    fix_vertex_orbit,
    orbit_partition,
    recombine,
    same_orbit,
    tuple_type,
    type_bijection,
)


def _structure(name, q, twists=()):
    base = catalog_graph(name)
    tw = TwistFunction.zero(base, q)
    for u, v, c in twists:
        tw = tw.with_edge(u, v, c)
    return build_cfi(base, q, tw)


def _orbit_closure(s, pebbles, k):
    """Independent oracle: explicit group action on all k-tuples."""
    maps = aut_generators(s, pebbles).elements()
    perms = [[m.apply_vertex(s, i) for i in range(s.size)] for m in maps]
    labels = {}
    for u in itertools.product(range(s.size), repeat=k):
        if u in labels:
            continue
        orbit = {tuple(p[i] for i in u) for p in perms}
        for v in orbit:
            labels[v] = u
    return labels


@pytest.mark.parametrize(
    "q,k,pebbles",
    [(1, 1, ()), (1, 2, ()), (2, 1, ()), (1, 2, (0,)), (2, 1, (5,))],
)
def test_same_orbit_matches_group_action(q, k, pebbles):
    s = _structure("K4", q, [(0, 1, 1)])
    labels = _orbit_closure(s, list(pebbles), k)
    part = orbit_partition(s, list(pebbles), k)
    tuples = list(itertools.product(range(s.size), repeat=k))
    rng = random.Random(1)
    pairs = [(rng.choice(tuples), rng.choice(tuples)) for _ in range(400)]
    # Plus every pair inside a few explicit orbits, to exercise positives.
    for u, v in pairs:
        expected = labels[u] == labels[v]
        assert same_orbit(s, list(pebbles), u, v) == expected
        assert (part.block_of[encode_tuple(u, s.size)]
                == part.block_of[encode_tuple(v, s.size)]) == expected


def test_same_orbit_exhaustive_pairs_q1_k1():
    s = _structure("K4", 1)
    labels = _orbit_closure(s, [], 1)
    for u in range(s.size):
        for v in range(s.size):
            assert same_orbit(s, [], (u,), (v,)) == (labels[(u,)] == labels[(v,)])


def test_automorphism_group_order():
    # The pebble-free automorphism group has order (2^q)^(|E|-|V|+1).
    for name, q in (("K4", 1), ("K4", 2), ("3-prism", 2)):
        base = catalog_graph(name)
        s = _structure(name, q)
        cycles = len(base.edges) - base.n + 1
        assert aut_generators(s, []).group_order() == (1 << q) ** cycles


def test_generators_are_automorphisms():
    s = _structure("3-prism", 2, [(0, 2, 3)])
    for m in aut_generators(s, []).generators():
        assert verify_isomorphism(m, s, s)
    # Pebbling fixes the pebbled vertices.
    pebbles = [0, 17]
    for m in aut_generators(s, pebbles).generators():
        assert verify_isomorphism(m, s, s)
        for p in pebbles:
            assert m.apply_vertex(s, p) == p


def test_tuple_type_equality_iff_same_orbit():
    s = _structure("K4", 2, [(1, 2, 2)])
    rng = random.Random(9)
    pebbles = [3]
    tuples = [
        tuple(rng.randrange(s.size) for _ in range(2)) for _ in range(60)
    ]
    for u, v in itertools.combinations(tuples, 2):
        same = same_orbit(s, pebbles, u, v)
        assert (tuple_type(s, pebbles, u) == tuple_type(s, pebbles, v)) == same


def test_orbit_partition_blocks_cover_universe():
    s = _structure("K4", 1)
    part = orbit_partition(s, [], 2)
    sizes = [len(part.block_tuples(b)) for b in range(len(part.blocks))]
    assert sum(sizes) == s.size ** 2
    for b in range(len(part.blocks)):
        block = part.block_tuples(b)
        assert all(part.block_index(u) == b for u in block[:5])


def test_type_bijection_identity_and_twisted():
    a = _structure("K4", 2)
    b = _structure("K4", 2, [(0, 1, 1)])
    pa = orbit_partition(a, [], 1)
    pb = orbit_partition(b, [], 1)
    f = type_bijection(pa, pb)
    assert sorted(f) == list(range(len(pa.blocks)))
    assert sorted(f.values()) == list(range(len(pb.blocks)))
    # Matched blocks have equal cardinality.
    for i, j in f.items():
        assert len(pa.block_tuples(i)) == len(pb.block_tuples(j))


def test_fix_vertex_orbit_refines():
    s = _structure("K4", 2)
    part = orbit_partition(s, [], 2)
    u = (0, s.gadget_ids(1).start)
    block = part.block_tuples(part.block_index(u))
    # Pinning position 0 projects away that coordinate; the remainder is an
    # orbit of the structure with the pinned vertex pebbled.
    sub = fix_vertex_orbit(s, block, [0], [u[0]])
    assert (u[1],) in sub
    for v in sub:
        assert (u[0],) + v in block
        assert same_orbit(s, [u[0]], (u[1],), v)
    expected = {
        t[1:] for t in block if t[0] == u[0]
    }
    assert set(sub) == expected


def test_component_split_recombine_roundtrip():
    # In the 3-prism, vertices 0 and 1 are non-adjacent, so a 2-orbit with
    # one coordinate in each gadget factors over the two components.
    s = _structure("3-prism", 2)
    part = orbit_partition(s, [0], 2)
    u = (0, s.gadget_ids(1).start)
    block = part.block_tuples(part.block_index(u))
    origins = [s.vertex(i).origin for i in u]
    left, right = component_split(s, block, [0], [1])
    back = recombine(s, left, right, origins, [0])
    assert back == sorted(block)
    assert len(block) == len(left) * len(right)


def test_encode_decode_tuple():
    assert decode_tuple(encode_tuple((3, 1, 2), 5), 5, 3) == (3, 1, 2)
    rng = random.Random(0)
    for _ in range(50):
        size = rng.randrange(2, 40)
        k = rng.randrange(1, 4)
        u = tuple(rng.randrange(size) for _ in range(k))
        assert decode_tuple(encode_tuple(u, size), size, k) == u


def test_orbit_partition_json():
    s = _structure("K4", 1)
    part = orbit_partition(s, [], 1)
    blob = part.to_json()
    assert blob.endswith("\n")
    import json

    doc = json.loads(blob)
    assert doc["k"] == 1
    assert len(doc["blocks"]) == len(part.blocks)
