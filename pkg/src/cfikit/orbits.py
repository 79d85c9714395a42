"""Automorphisms of pebbled CFI structures as circulation spaces; k-orbits.

An automorphism is a family of gadget translations d_x whose values form a
circulation on the base graph: antisymmetric edge values with flow
conservation at every vertex, pinned to zero on edges incident to pebbled
origins. The group is the free Z_{2^q}-module spanned by the fundamental
cycles of the unpebbled subgraph; orbits of k-tuples are computed either by
union-find closure under the basis generators or, pointwise, by solving the
circulation system that maps one tuple onto the other.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import zring
from ._accel import orbit_labels
from .basegraph import BaseGraph
from .cfi import CfiStructure, PartialMap

TUPLE_GUARD = 1 << 24


class OrbitError(ValueError):
    """Invalid orbit computation input."""


class ResourceError(RuntimeError):
    """Requested enumeration exceeds the desk-scale guard."""


@dataclass(frozen=True)
class TypeDescriptor:
    """Translation-invariant pairwise data of a pebbled tuple.

    origins: base vertex per entry (pebbles first, then the tuple);
    diffs: for co-located entry pairs, the difference vector;
    edge_values: for adjacent-origin entry pairs, the connecting value
    relative to the twist. Equal descriptors characterize isomorphic
    pebbled induced substructures: the entrywise differences assemble into
    a translation family exactly when all pairwise data agree.
    """

    origins: tuple
    diffs: tuple
    edge_values: tuple


def tuple_type(s: CfiStructure, pebbles: Sequence[int], u: Sequence[int]) -> TypeDescriptor:
    """Canonical type of u in the structure pebbled at `pebbles`."""
    combined = tuple(pebbles) + tuple(u)
    origins = tuple(int(s.origins[i]) for i in combined)
    diffs = []
    edge_values = []
    for i in range(len(combined)):
        for j in range(i + 1, len(combined)):
            x, y = origins[i], origins[j]
            if x == y:
                a = s.universe[combined[i]].values
                b = s.universe[combined[j]].values
                delta = tuple((bb - aa) % s.mod for aa, bb in zip(a, b))
                diffs.append((i, j, delta))
            elif s.base.has_edge(x, y):
                edge_values.append((i, j, s.edge_c(combined[i], combined[j])))
    return TypeDescriptor(origins, tuple(diffs), tuple(edge_values))


class CirculationBasis:
    """Canonical basis of the circulations vanishing at blocked vertices."""

    def __init__(self, base: BaseGraph, q: int, blocked: Iterable[int]):
        self.base = base
        self.q = q
        self.mod = 1 << q
        self.blocked = frozenset(blocked)
        self.edge_index = {e: i for i, e in enumerate(base.edges)}
        raw = self._fundamental_cycles()
        self.vectors = [tuple(v) for v in zring.howell_form(raw, q)]
        self.rank = len(self.vectors)

    def _fundamental_cycles(self) -> List[List[int]]:
        live = [x for x in range(self.base.n) if x not in self.blocked]
        live_set = set(live)
        parent: Dict[int, Optional[int]] = {}
        order = []
        for root in live:
            if root in parent:
                continue
            parent[root] = None
            stack = [root]
            while stack:
                x = stack.pop()
                order.append(x)
                for y in self.base.neighbors(x):
                    if y in live_set and y not in parent:
                        parent[y] = x
                        stack.append(y)
        tree_edges = {
            (min(x, p), max(x, p)) for x, p in parent.items() if p is not None
        }
        cycles = []
        for x, y in self.base.edges:
            if x not in live_set or y not in live_set:
                continue
            if (x, y) in tree_edges:
                continue
            # unit flow around the cycle closed by the non-tree edge
            vec = [0] * len(self.base.edges)
            vec[self.edge_index[(x, y)]] = 1  # oriented x -> y
            for node, sign in ((y, 1), (x, -1)):
                # push the flow along the tree path back to the root
                cur = node
                while parent[cur] is not None:
                    p = parent[cur]
                    e = (min(cur, p), max(cur, p))
                    orient = 1 if cur < p else -1
                    vec[self.edge_index[e]] = (
                        vec[self.edge_index[e]] + sign * orient
                    ) % self.mod
                    cur = p
            cycles.append(vec)
        # the two root paths overlap above the least common ancestor and
        # cancel there, leaving exactly the fundamental cycle
        return cycles

    def value(self, vec: Sequence[int], x: int, y: int) -> int:
        """Oriented value of the circulation on x -> y."""
        e = (min(x, y), max(x, y))
        t = vec[self.edge_index[e]]
        return t % self.mod if x < y else (-t) % self.mod

    def as_partial_map(self, vec: Sequence[int]) -> PartialMap:
        translations = {}
        for x in range(self.base.n):
            d = [self.value(vec, x, y) for y in self.base.neighbors(x)]
            if any(d):
                translations[x] = d
        return PartialMap(self.base, self.q, translations)

    def generators(self) -> List[PartialMap]:
        return [self.as_partial_map(v) for v in self.vectors]

    def group_order(self) -> int:
        return self.mod ** self.rank

    def elements(self, limit: int = 1 << 20) -> List[PartialMap]:
        """Every group element, as a translation family (guarded)."""
        if self.group_order() > limit:
            raise ResourceError(f"group order {self.group_order()} exceeds limit")
        out = []
        for coeffs in itertools.product(range(self.mod), repeat=self.rank):
            vec = [0] * len(self.base.edges)
            for c, bvec in zip(coeffs, self.vectors):
                if c:
                    vec = [(a + c * b) % self.mod for a, b in zip(vec, bvec)]
            out.append(self.as_partial_map(vec))
        return out


def aut_generators(s: CfiStructure, pebbles: Sequence[int]) -> CirculationBasis:
    """Basis of the automorphism group of the structure pebbled at `pebbles`."""
    blocked = {int(s.origins[p]) for p in pebbles}
    return CirculationBasis(s.base, s.q, blocked)


# -- k-orbit partitions ---------------------------------------------------


def encode_tuple(u: Sequence[int], size: int) -> int:
    code = 0
    for v in u:
        code = code * size + int(v)
    return code


def decode_tuple(code: int, size: int, k: int) -> tuple:
    out = []
    for _ in range(k):
        out.append(code % size)
        code //= size
    return tuple(reversed(out))


def _tuple_permutation(vperm: np.ndarray, size: int, k: int) -> np.ndarray:
    n = size ** k
    out = np.zeros(n, dtype=np.int64)
    codes = np.arange(n, dtype=np.int64)
    weight = 1
    for _ in range(k):
        digits = (codes // weight) % size
        out += vperm[digits] * weight
        weight *= size
    return out


class OrbitPartition:
    """The k-orbits of a pebbled structure, as sorted encoded blocks."""

    def __init__(self, s: CfiStructure, pebbles: Sequence[int], k: int,
                 basis: CirculationBasis, labels: np.ndarray):
        self.structure = s
        self.pebbles = tuple(pebbles)
        self.k = k
        self.basis = basis
        roots, inverse = np.unique(labels, return_inverse=True)
        self.block_of = inverse.astype(np.int64)
        self.blocks: List[np.ndarray] = [
            np.flatnonzero(inverse == b).astype(np.int64) for b in range(len(roots))
        ]
        self.descriptors = [
            tuple_type(s, pebbles, decode_tuple(int(block[0]), s.size, k))
            for block in self.blocks
        ]

    def __len__(self) -> int:
        return len(self.blocks)

    def block_index(self, u: Sequence[int]) -> int:
        return int(self.block_of[encode_tuple(u, self.structure.size)])

    def block_tuples(self, b: int) -> List[tuple]:
        size, k = self.structure.size, self.k
        return [decode_tuple(int(c), size, k) for c in self.blocks[b]]

    def to_json(self) -> str:
        doc = {
            "k": self.k,
            "pebbles": list(self.pebbles),
            "blocks": [
                {
                    "tuples": [list(t) for t in self.block_tuples(b)],
                    "type": {
                        "origins": list(self.descriptors[b].origins),
                        "diffs": [
                            [i, j, list(d)] for i, j, d in self.descriptors[b].diffs
                        ],
                        "edge_values": [
                            list(t) for t in self.descriptors[b].edge_values
                        ],
                    },
                }
                for b in range(len(self.blocks))
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def orbit_partition(s: CfiStructure, pebbles: Sequence[int], k: int) -> OrbitPartition:
    """Union-find closure of all k-tuples under the automorphism basis."""
    if k < 1:
        raise OrbitError("k must be at least 1")
    n = s.size ** k
    if n > TUPLE_GUARD:
        raise ResourceError(
            f"{s.size}^{k} tuples exceed the enumeration guard; "
            "use same_orbit or tuple_type instead"
        )
    basis = aut_generators(s, pebbles)
    perms = [
        _tuple_permutation(g.as_permutation(s), s.size, k)
        for g in basis.generators()
    ]
    if perms:
        labels = orbit_labels(np.stack(perms), n)
    else:
        labels = np.arange(n, dtype=np.int64)
    return OrbitPartition(s, pebbles, k, basis, labels)


def same_orbit(s: CfiStructure, pebbles: Sequence[int], u: Sequence[int],
               v: Sequence[int]) -> bool:
    """Whether some automorphism of the pebbled structure maps u to v.

    Decided by solvability of the circulation system over Z_{2^q}: one
    variable per base edge, flow conservation per vertex, pinned edges at
    pebbled origins, and prescribed translations at the tuple origins.
    """
    if len(u) != len(v):
        raise OrbitError("tuples must have equal length")
    full_u = tuple(pebbles) + tuple(u)
    full_v = tuple(pebbles) + tuple(v)
    origins_u = [int(s.origins[i]) for i in full_u]
    origins_v = [int(s.origins[i]) for i in full_v]
    if origins_u != origins_v:
        return False
    base, mod, q = s.base, s.mod, s.q
    edge_index = {e: i for i, e in enumerate(base.edges)}
    n_e = len(base.edges)
    rows, rhs = [], []

    def oriented_row(x: int, y: int) -> List[int]:
        row = [0] * n_e
        e = (min(x, y), max(x, y))
        row[edge_index[e]] = 1 if x < y else mod - 1
        return row

    for x in range(base.n):
        row = [0] * n_e
        for y in base.neighbors(x):
            e = (min(x, y), max(x, y))
            row[edge_index[e]] = (row[edge_index[e]] + (1 if x < y else -1)) % mod
        rows.append(row)
        rhs.append(0)
    for idx, (i, j) in enumerate(zip(full_u, full_v)):
        x = origins_u[idx]
        a = s.universe[i].values
        b = s.universe[j].values
        for p, y in enumerate(base.neighbors(x)):
            rows.append(oriented_row(x, y))
            rhs.append((b[p] - a[p]) % mod)
    return zring.solve(rows, rhs, q) is not None


# -- orbit surgery --------------------------------------------------------


def fix_vertex_orbit(s: CfiStructure, block: Sequence[tuple], positions: Sequence[int],
                     values: Sequence[int]) -> List[tuple]:
    """Residual orbit after pinning the entries at `positions` to `values`.

    All pinned positions must share one origin; the result is an orbit of
    the structure with the pinned vertices appended as pebbles, or empty.
    """
    block = [tuple(t) for t in block]
    positions = list(positions)
    values = list(values)
    if len(positions) != len(values):
        raise OrbitError("need one value per pinned position")
    if positions:
        origins = {int(s.origins[block[0][p]]) for p in positions}
        if len(origins) != 1:
            raise OrbitError("pinned positions must share a single origin")
    keep = [p for p in range(len(block[0]))] if block else []
    keep = [p for p in keep if p not in positions]
    out = []
    for t in block:
        if all(t[p] == v for p, v in zip(positions, values)):
            out.append(tuple(t[p] for p in keep))
    return sorted(set(out))


def component_split(s: CfiStructure, block: Sequence[tuple], m_side: Iterable[int],
                    n_side: Iterable[int]) -> Tuple[List[tuple], List[tuple]]:
    """Split an orbit along a component bipartition of its origin graph."""
    block = [tuple(t) for t in block]
    if not block:
        return [], []
    m_side, n_side = set(m_side), set(n_side)
    origins = [int(s.origins[i]) for i in block[0]]
    occupied = set(origins)
    if (m_side | n_side) != occupied or (m_side & n_side):
        raise OrbitError("sides must partition the occupied origins")
    comps = _components(s.base, occupied)
    for comp in comps:
        if not (comp <= m_side or comp <= n_side):
            raise OrbitError("sides must respect connected components")
    pos_m = [p for p, x in enumerate(origins) if x in m_side]
    pos_n = [p for p, x in enumerate(origins) if x in n_side]
    left = sorted({tuple(t[p] for p in pos_m) for t in block})
    right = sorted({tuple(t[p] for p in pos_n) for t in block})
    return left, right


def recombine(s: CfiStructure, left: Sequence[tuple], right: Sequence[tuple],
              origins: Sequence[int], m_side: Iterable[int]) -> List[tuple]:
    """Position-preserving product of two component restrictions."""
    m_side = set(m_side)
    pos_m = [p for p, x in enumerate(origins) if x in m_side]
    pos_n = [p for p, x in enumerate(origins) if x not in m_side]
    out = []
    for a in left:
        for b in right:
            t = [0] * len(origins)
            for p, v in zip(pos_m, a):
                t[p] = v
            for p, v in zip(pos_n, b):
                t[p] = v
            out.append(tuple(t))
    return sorted(out)


def _components(base: BaseGraph, vertices: set) -> List[set]:
    remaining = set(vertices)
    comps = []
    while remaining:
        root = min(remaining)
        comp = {root}
        stack = [root]
        while stack:
            x = stack.pop()
            for y in base.neighbors(x):
                if y in remaining and y not in comp:
                    comp.add(y)
                    stack.append(y)
        comps.append(comp)
        remaining -= comp
    return comps


def type_bijection(parts_a: OrbitPartition, parts_b: OrbitPartition) -> Dict[int, int]:
    """Match blocks of two partitions by equal type descriptors."""
    if len(parts_a) != len(parts_b):
        raise OrbitError("partitions have different block counts")
    by_type: Dict[TypeDescriptor, int] = {}
    for b, desc in enumerate(parts_b.descriptors):
        if desc in by_type:
            raise OrbitError("ambiguous type: two blocks share a descriptor")
        by_type[desc] = b
    mapping = {}
    for a, desc in enumerate(parts_a.descriptors):
        if desc not in by_type:
            raise OrbitError("unmatched type descriptor")
        mapping[a] = by_type[desc]
    if len(set(mapping.values())) != len(mapping):
        raise OrbitError("type matching is not a bijection")
    return mapping


__all__ = [
    "TUPLE_GUARD",
    "OrbitError",
    "ResourceError",
    "TypeDescriptor",
    "CirculationBasis",
    "OrbitPartition",
    "aut_generators",
    "orbit_partition",
    "same_orbit",
    "tuple_type",
    "fix_vertex_orbit",
    "component_split",
    "recombine",
    "type_bijection",
    "encode_tuple",
    "decode_tuple",
    "type_bijection",
]
