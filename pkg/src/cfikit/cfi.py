"""CFI structures over Z_{2^q}: gadgets, twisted edge relations, isomorphisms.

Each base vertex x carries a gadget of zero-sum vectors over its neighbors.
Gadgets of adjacent vertices are linked by the binary relations RE_c, whose
connecting value is shifted by the twist assigned to the base edge. Within a
gadget, pairs of vertices are classified by which coordinates agree (RI) and
which differ by exactly one (RC); the arity-4 relations compare those label
sets under a fixed total order. The vertex preorder PRE groups the universe
into gadgets ordered by base vertex.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .basegraph import BaseGraph, GraphError


class CfiError(ValueError):
    """Invalid CFI construction input."""


class DecodeError(CfiError):
    """Relational data does not describe a well-formed CFI structure."""


@dataclass(frozen=True)
class RingValue:
    """An element of Z_{2^q}; arithmetic requires matching moduli."""

    q: int
    v: int

    def __post_init__(self):
        if self.q < 1:
            raise CfiError("modulus exponent must be >= 1")
        object.__setattr__(self, "v", self.v % (1 << self.q))

    def _check(self, other: "RingValue"):
        if self.q != other.q:
            raise CfiError(f"mixed moduli 2^{self.q} and 2^{other.q}")

    def __add__(self, other: "RingValue") -> "RingValue":
        self._check(other)
        return RingValue(self.q, self.v + other.v)

    def __sub__(self, other: "RingValue") -> "RingValue":
        self._check(other)
        return RingValue(self.q, self.v - other.v)

    def __neg__(self) -> "RingValue":
        return RingValue(self.q, -self.v)

    def __int__(self) -> int:
        return self.v


@dataclass(frozen=True)
class TwistFunction:
    """Edge-indexed values in Z_{2^q}, aligned with base.edges order."""

    base: BaseGraph
    q: int
    values: tuple

    def __post_init__(self):
        if self.q < 1:
            raise CfiError("modulus exponent must be >= 1")
        if len(self.values) != len(self.base.edges):
            raise CfiError("twist must assign a value to every edge")
        mod = 1 << self.q
        object.__setattr__(self, "values", tuple(int(v) % mod for v in self.values))

    @classmethod
    def zero(cls, base: BaseGraph, q: int) -> "TwistFunction":
        return cls(base, q, (0,) * len(base.edges))

    @classmethod
    def from_dict(cls, base: BaseGraph, q: int, mapping: dict) -> "TwistFunction":
        values = [0] * len(base.edges)
        index = {e: i for i, e in enumerate(base.edges)}
        for (u, v), val in mapping.items():
            e = (min(u, v), max(u, v))
            if e not in index:
                raise CfiError(f"{e} is not a base edge")
            values[index[e]] = val
        return cls(base, q, tuple(values))

    def value(self, u: int, v: int) -> int:
        e = (min(u, v), max(u, v))
        try:
            return self.values[self.base.edges.index(e)]
        except ValueError:
            raise CfiError(f"{e} is not a base edge") from None

    def with_edge(self, u: int, v: int, val: int) -> "TwistFunction":
        e = (min(u, v), max(u, v))
        if e not in self.base.edge_set:
            raise CfiError(f"{e} is not a base edge")
        values = list(self.values)
        values[self.base.edges.index(e)] = val
        return TwistFunction(self.base, self.q, tuple(values))

    def add(self, other: "TwistFunction") -> "TwistFunction":
        if other.base is not self.base and other.base != self.base:
            raise CfiError("twists live on different base graphs")
        if other.q != self.q:
            raise CfiError("twists have different moduli")
        return TwistFunction(
            self.base, self.q, tuple(a + b for a, b in zip(self.values, other.values))
        )

    def to_jsonable(self) -> list:
        return [[u, v, val] for (u, v), val in zip(self.base.edges, self.values)]

    @classmethod
    def from_jsonable(cls, base: BaseGraph, q: int, doc: list) -> "TwistFunction":
        mapping = {(u, v): val for u, v, val in doc}
        if len(mapping) != len(doc):
            raise CfiError("duplicate edge in twist document")
        return cls.from_dict(base, q, mapping)


def total_twist(g: TwistFunction) -> RingValue:
    """Sum of all edge twist values mod 2^q."""
    return RingValue(g.q, sum(g.values))


@dataclass(frozen=True)
class GadgetVertex:
    """A zero-sum vector over the neighbors (in ascending order) of origin."""

    origin: int
    values: tuple

    def value(self, base: BaseGraph, y: int) -> int:
        return self.values[base.neighbors(self.origin).index(y)]


class CfiStructure:
    """A CFI structure with its relation views and fast index arrays."""

    def __init__(self, base: BaseGraph, q: int, twist: TwistFunction):
        if q < 1:
            raise CfiError("modulus exponent must be >= 1")
        if twist.base != base or twist.q != q:
            raise CfiError("twist does not match base graph and modulus")
        self.base = base
        self.q = q
        self.twist = twist
        self.mod = 1 << q

        self.gadget_start: List[int] = []
        universe: List[GadgetVertex] = []
        for x in range(base.n):
            self.gadget_start.append(len(universe))
            deg = base.degree(x)
            for prefix in itertools.product(range(self.mod), repeat=max(deg - 1, 0)):
                if deg == 0:
                    vec = ()
                else:
                    vec = prefix + ((-sum(prefix)) % self.mod,)
                universe.append(GadgetVertex(x, vec))
        self.gadget_start.append(len(universe))
        self.universe = universe
        self.size = len(universe)

        max_deg = max((base.degree(x) for x in range(base.n)), default=0)
        self.origins = np.empty(self.size, dtype=np.int64)
        self.values = np.zeros((self.size, max_deg), dtype=np.int64)
        for i, gv in enumerate(universe):
            self.origins[i] = gv.origin
            self.values[i, : len(gv.values)] = gv.values
        # position of neighbor y within x's sorted neighbor list
        self.pos = {
            x: {y: p for p, y in enumerate(base.neighbors(x))} for x in range(base.n)
        }
        # mixed-radix weights ranking the free prefix of a gadget vector
        self._weights = {}
        for x in range(base.n):
            deg = base.degree(x)
            self._weights[x] = np.array(
                [self.mod ** (deg - 2 - i) for i in range(deg - 1)], dtype=np.int64
            )
        self._ri_cache = None
        self._rc_cache = None

    # -- indexing ---------------------------------------------------------

    def gadget_ids(self, x: int) -> range:
        return range(self.gadget_start[x], self.gadget_start[x + 1])

    def gadget_size(self, x: int) -> int:
        return self.gadget_start[x + 1] - self.gadget_start[x]

    def vertex_id(self, x: int, values: Sequence[int]) -> int:
        deg = self.base.degree(x)
        if len(values) != deg:
            raise CfiError("vector length does not match degree")
        if sum(values) % self.mod:
            raise CfiError("gadget vector must sum to zero")
        prefix = np.asarray([v % self.mod for v in values[: deg - 1]], dtype=np.int64)
        return self.gadget_start[x] + int(prefix @ self._weights[x])

    def vertex(self, i: int) -> GadgetVertex:
        return self.universe[i]

    def edge_c(self, u: int, v: int) -> int:
        """Connecting value of a cross-gadget pair relative to the twist."""
        x, y = int(self.origins[u]), int(self.origins[v])
        if not self.base.has_edge(x, y):
            raise CfiError(f"origins {x},{y} are not adjacent")
        a_y = int(self.values[u, self.pos[x][y]])
        b_x = int(self.values[v, self.pos[y][x]])
        return (a_y + b_x - self.twist.value(x, y)) % self.mod

    # -- relation views ---------------------------------------------------

    def pre_classes(self) -> List[List[int]]:
        return [list(self.gadget_ids(x)) for x in range(self.base.n)]

    def re_pairs(self, c: int) -> List[Tuple[int, int]]:
        """Unordered cross-gadget pairs {u,v} with connecting value c."""
        pairs = []
        for (x, y), g_e in zip(self.base.edges, self.twist.values):
            sx, sy = self.gadget_start[x], self.gadget_start[y]
            col = self.values[self.gadget_ids(x), self.pos[x][y]]
            row = self.values[self.gadget_ids(y), self.pos[y][x]]
            want = (c + g_e) % self.mod
            hits = np.argwhere((col[:, None] + row[None, :]) % self.mod == want)
            pairs.extend((sx + int(i), sy + int(j)) for i, j in hits)
        return sorted(pairs)

    def _pair_classes(self, shift: int) -> Dict[tuple, List[Tuple[int, int]]]:
        """Ordered same-gadget pairs grouped by their label set.

        shift 0 classifies equal coordinates (RI); shift 1 classifies
        coordinates differing by exactly one (RC). Empty-label classes are
        omitted; every unlisted pair has the minimal (empty) label set.
        """
        classes: Dict[tuple, List[Tuple[int, int]]] = {}
        for x in range(self.base.n):
            nbrs = self.base.neighbors(x)
            ids = list(self.gadget_ids(x))
            vals = [self.universe[i].values for i in ids]
            for ai, a in zip(ids, vals):
                for bi, b in zip(ids, vals):
                    label = tuple(
                        (x, y)
                        for p, y in enumerate(nbrs)
                        if (a[p] + shift) % self.mod == b[p]
                    )
                    if label:
                        classes.setdefault(label, []).append((ai, bi))
        return classes

    def ri_classes(self) -> Dict[tuple, List[Tuple[int, int]]]:
        if self._ri_cache is None:
            self._ri_cache = self._pair_classes(0)
        return self._ri_cache

    def rc_classes(self) -> Dict[tuple, List[Tuple[int, int]]]:
        if self._rc_cache is None:
            self._rc_cache = self._pair_classes(1)
        return self._rc_cache

    def expand_quaternary(self, classes: Dict[tuple, List[Tuple[int, int]]],
                          limit: int = 2_000_000) -> List[tuple]:
        """Materialized arity-4 relation: pairs ordered by label set.

        Only listed (nonempty-label) pairs are expanded; all omitted pairs
        share the minimal label set and precede every listed pair.
        """
        items = sorted(classes.items())
        n_pairs = sum(len(p) for p in classes.values())
        if n_pairs * n_pairs > limit:
            raise CfiError("arity-4 expansion too large; use the class view")
        out = []
        for i, (_, lo) in enumerate(items):
            for _, hi in items[i:]:
                out.extend((a, b, c, d) for a, b in lo for c, d in hi)
        return out

    # -- serialization ----------------------------------------------------

    def to_json(self, stripped: bool = False) -> str:
        relations = {
            "PRE": self.pre_classes(),
            "RI": _classes_jsonable(self.ri_classes()),
            "RC": _classes_jsonable(self.rc_classes()),
        }
        for c in range(self.mod):
            relations[f"RE{c}"] = [list(p) for p in self.re_pairs(c)]
        doc = {
            "kind": "cfi",
            "base": json.loads(self.base.to_json()),
            "q": self.q,
            "universe": [[gv.origin, list(gv.values)] for gv in self.universe],
            "relations": relations,
        }
        if not stripped:
            doc["twist"] = self.twist.to_jsonable()
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CfiStructure":
        try:
            doc = json.loads(text)
            base = BaseGraph.from_json(json.dumps(doc["base"]))
            q = doc["q"]
        except (KeyError, ValueError, GraphError) as exc:
            raise DecodeError(f"malformed CFI document: {exc}") from exc
        if "twist" not in doc:
            raise DecodeError("stripped document has no twist; use cfi_query_solve")
        twist = TwistFunction.from_jsonable(base, q, doc["twist"])
        s = cls(base, q, twist)
        want = [[gv.origin, list(gv.values)] for gv in s.universe]
        if doc.get("universe", want) != want:
            raise DecodeError("universe table does not match construction order")
        return s


def _classes_jsonable(classes: Dict[tuple, List[Tuple[int, int]]]) -> list:
    return [
        {"labels": [list(l) for l in label], "pairs": [list(p) for p in sorted(pairs)]}
        for label, pairs in sorted(classes.items())
    ]


def build_cfi(base: BaseGraph, q: int, g: Optional[TwistFunction] = None) -> CfiStructure:
    """Construct the CFI structure of base twisted by g (zero if omitted)."""
    if g is None:
        g = TwistFunction.zero(base, q)
    return CfiStructure(base, q, g)


# -- partial maps and isomorphisms ---------------------------------------


class PartialMap:
    """A per-gadget translation family; composition adds translations."""

    def __init__(self, base: BaseGraph, q: int, translations: Optional[dict] = None):
        self.base = base
        self.q = q
        self.mod = 1 << q
        clean = {}
        for x, d in (translations or {}).items():
            d = tuple(int(v) % self.mod for v in d)
            if len(d) != base.degree(x):
                raise CfiError(f"translation at {x} has wrong length")
            if sum(d) % self.mod:
                raise CfiError(f"translation at {x} must sum to zero")
            if any(d):
                clean[x] = d
        self.translations = clean

    @classmethod
    def identity(cls, base: BaseGraph, q: int) -> "PartialMap":
        return cls(base, q, {})

    def _check(self, other: "PartialMap"):
        if other.base != self.base or other.q != self.q:
            raise CfiError("maps live on different structures")

    def compose(self, other: "PartialMap") -> "PartialMap":
        """self after other; translations add pointwise."""
        self._check(other)
        merged = dict(other.translations)
        for x, d in self.translations.items():
            if x in merged:
                merged[x] = tuple(a + b for a, b in zip(merged[x], d))
            else:
                merged[x] = d
        return PartialMap(self.base, self.q, merged)

    def inverse(self) -> "PartialMap":
        return PartialMap(
            self.base, self.q,
            {x: tuple(-v for v in d) for x, d in self.translations.items()},
        )

    def translation_at(self, x: int) -> tuple:
        return self.translations.get(x, (0,) * self.base.degree(x))

    def apply_vertex(self, s: CfiStructure, i: int) -> int:
        gv = s.universe[i]
        d = self.translations.get(gv.origin)
        if d is None:
            return i
        vec = [(a + b) % self.mod for a, b in zip(gv.values, d)]
        return s.vertex_id(gv.origin, vec)

    def as_permutation(self, s: CfiStructure) -> np.ndarray:
        if s.base != self.base or s.q != self.q:
            raise CfiError("map does not fit the structure")
        perm = np.arange(s.size, dtype=np.int64)
        for x, d in self.translations.items():
            ids = np.arange(s.gadget_start[x], s.gadget_start[x + 1])
            deg = s.base.degree(x)
            shifted = (s.values[ids, : deg - 1] + np.asarray(d[: deg - 1])) % s.mod
            perm[ids] = s.gadget_start[x] + shifted @ s._weights[x]
        return perm


def path_isomorphism(base: BaseGraph, q: int, c: int, path: Sequence[int]) -> PartialMap:
    """Translate interior path vertices by c backward and -c forward."""
    path = list(path)
    if len(path) < 2:
        raise CfiError("path must have at least two vertices")
    if len(set(path)) != len(path):
        raise CfiError("path must be simple")
    for u, v in zip(path, path[1:]):
        if not base.has_edge(u, v):
            raise CfiError(f"({u},{v}) is not a base edge")
    translations = {}
    for idx in range(1, len(path) - 1):
        x = path[idx]
        d = [0] * base.degree(x)
        d[base.neighbors(x).index(path[idx - 1])] = c
        d[base.neighbors(x).index(path[idx + 1])] = -c
        translations[x] = d
    return PartialMap(base, q, translations)


def star_isomorphism(base: BaseGraph, q: int, cs: Sequence[int],
                     paths: Sequence[Sequence[int]]) -> PartialMap:
    """Combine path translations on arms meeting at a shared center.

    Every path ends at the same center z, the arms are disjoint apart
    from z, and the c values sum to zero; the center is translated toward
    each arm by that arm's c value.
    """
    mod = 1 << q
    if len(cs) != len(paths) or not paths:
        raise CfiError("need one c value per path")
    if sum(cs) % mod:
        raise CfiError("star c values must sum to zero")
    z = paths[0][-1]
    seen = set()
    for p in paths:
        if len(p) < 2 or p[-1] != z:
            raise CfiError("every path must end at the shared center")
        if len(set(p)) != len(p):
            raise CfiError("paths must be simple")
        body = set(p[:-1])
        if z in body or body & seen:
            raise CfiError("paths may only share the center")
        seen |= body
    combined = PartialMap.identity(base, q)
    for c, p in zip(cs, paths):
        combined = combined.compose(path_isomorphism(base, q, c, p))
    center = [0] * base.degree(z)
    for c, p in zip(cs, paths):
        center[base.neighbors(z).index(p[-2])] = c
    return combined.compose(PartialMap(base, q, {z: center}))


def verify_isomorphism(m: PartialMap, a: CfiStructure, b: CfiStructure) -> bool:
    """Exhaustive relation check: the oracle other modules lean on."""
    if a.base != b.base or a.q != b.q:
        return False
    perm = m.as_permutation(a)
    if len(np.unique(perm)) != a.size:
        return False
    # origin preservation settles the gadget preorder
    if not np.array_equal(a.origins, b.origins[perm]):
        return False
    mod = a.mod
    for x in range(a.base.n):
        ids = np.arange(a.gadget_start[x], a.gadget_start[x + 1])
        deg = a.base.degree(x)
        va = a.values[ids, :deg]
        vb = b.values[perm[ids], :deg]
        # agreeing-coordinate label sets (RI classes)
        eq_a = va[:, None, :] == va[None, :, :]
        eq_b = vb[:, None, :] == vb[None, :, :]
        if not np.array_equal(eq_a, eq_b):
            return False
        # offset-by-one label sets (RC classes)
        cyc_a = (va[:, None, :] + 1) % mod == va[None, :, :]
        cyc_b = (vb[:, None, :] + 1) % mod == vb[None, :, :]
        if not np.array_equal(cyc_a, cyc_b):
            return False
    for (x, y), ga_e, gb_e in zip(a.base.edges, a.twist.values, b.twist.values):
        ids_x = np.arange(a.gadget_start[x], a.gadget_start[x + 1])
        ids_y = np.arange(a.gadget_start[y], a.gadget_start[y + 1])
        col_a = a.values[ids_x, a.pos[x][y]]
        row_a = a.values[ids_y, a.pos[y][x]]
        col_b = b.values[perm[ids_x], b.pos[x][y]]
        row_b = b.values[perm[ids_y], b.pos[y][x]]
        ca = (col_a[:, None] + row_a[None, :] - ga_e) % mod
        cb = (col_b[:, None] + row_b[None, :] - gb_e) % mod
        if not np.array_equal(ca, cb):
            return False
    return True


def _simple_path_through_edges(base: BaseGraph, first: Tuple[int, int],
                               last: Tuple[int, int]) -> Optional[List[int]]:
    """A simple path whose first edge is `first` and last edge is `last`."""
    lu, lv = last
    for x1, x2 in ((first[0], first[1]), (first[1], first[0])):
        stack = [[x1, x2]]
        while stack:
            path = stack.pop()
            tail = path[-1]
            prev = path[-2]
            if {prev, tail} == {lu, lv} and len(path) >= 2:
                return path
            for y in base.neighbors(tail):
                if y not in path:
                    stack.append(path + [y])
    return None


def find_isomorphism(a: CfiStructure, b: CfiStructure) -> Optional[PartialMap]:
    """A certified isomorphism between a and b, or None if totals differ.

    Per-edge twist differences are swept into a sink edge with path
    isomorphisms; equal totals leave the sink untouched.
    """
    if a.base != b.base or a.q != b.q:
        return None
    if total_twist(a.twist).v != total_twist(b.twist).v:
        return None
    mod = a.mod
    sink = a.base.edges[-1]
    combined = PartialMap.identity(a.base, a.q)
    current = a.twist
    for e in a.base.edges:
        if e == sink:
            continue
        c = (b.twist.values[a.base.edges.index(e)] - current.values[a.base.edges.index(e)]) % mod
        if c == 0:
            continue
        path = _simple_path_through_edges(a.base, e, sink)
        if path is None:
            return None
        step = path_isomorphism(a.base, a.q, c, path)
        combined = step.compose(combined)
        current = current.with_edge(*e, (current.value(*e) + c) % mod)
        current = current.with_edge(*sink, (current.value(*sink) - c) % mod)
    if current.values != b.twist.values:
        return None
    if not verify_isomorphism(combined, a, b):
        raise AssertionError("constructed map failed verification")
    return combined


# -- solving the twist total from relational data ------------------------


def cfi_query_solve(doc, reference_pick=None) -> RingValue:
    """Total twist of a CFI structure given only its relational data.

    Recovers gadgets from the PRE classes, fixes one reference vertex per
    gadget, reads each base edge's connecting value at the references, and
    returns the negated sum. The answer is independent of the reference
    choice. `reference_pick` maps base vertex to an index within its PRE
    class (used by tests to vary references).
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        base = BaseGraph.from_json(json.dumps(doc["base"]))
        relations = doc["relations"]
        classes = relations["PRE"]
        q = doc["q"]
    except (KeyError, ValueError, GraphError) as exc:
        raise DecodeError(f"malformed structure document: {exc}") from exc
    mod = 1 << q
    re_names = [f"RE{c}" for c in range(mod)]
    if any(name not in relations for name in re_names):
        raise DecodeError("missing RE relations for the declared modulus")
    if len(classes) != base.n:
        raise DecodeError("PRE class count does not match base vertex count")
    for x, cls_ in enumerate(classes):
        want = mod ** (base.degree(x) - 1)
        if len(cls_) != want:
            raise DecodeError(
                f"gadget {x} has {len(cls_)} vertices, expected {want}"
            )
    refs = {}
    for x, cls_ in enumerate(classes):
        idx = 0 if reference_pick is None else reference_pick.get(x, 0)
        refs[x] = cls_[idx]
    lookup = {}
    for c in range(mod):
        for u, v in relations[f"RE{c}"]:
            key = (min(u, v), max(u, v))
            if key in lookup and lookup[key] != c:
                raise DecodeError(f"pair {key} appears in several RE relations")
            lookup[key] = c
    acc = 0
    for x, y in base.edges:
        key = (min(refs[x], refs[y]), max(refs[x], refs[y]))
        if key not in lookup:
            raise DecodeError(f"no RE entry links the references of edge ({x},{y})")
        acc += lookup[key]
    return RingValue(q, -acc)


__all__ = [
    "CfiError",
    "DecodeError",
    "RingValue",
    "TwistFunction",
    "GadgetVertex",
    "CfiStructure",
    "PartialMap",
    "total_twist",
    "build_cfi",
    "path_isomorphism",
    "star_isomorphism",
    "verify_isomorphism",
    "find_isomorphism",
    "cfi_query_solve",
]
