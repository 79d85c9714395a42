"""Twist-blurring similarity matrices over F2 and their supporting maps.

Builds the matrices that hide a single-edge twist between two CFI
structures from rank-style distinguishers. The arity-1 builder spreads a
twist at one gadget over its incident edges using a blurer family. The
arity-k builder distributes the twist over a star of arms around a
distant center vertex: tuple components are classified against the star,
the tip-fixing map repairs tuple types across the twist, the
star-spreading map moves blurer values onto the arm tips, and orbits
whose origin touches the center are handled by recursive per-arm factor
matrices. The module also certifies that a matrix acts as the identity
outside a claimed base-vertex set, and checks the factorization and
partial-sum identities that products of such matrices with disjoint
certified regions satisfy.

Every builder runs a hypothesis audit first and attaches the resulting
machine-readable report to its output; failed audits raise unless the
caller explicitly overrides, in which case the output is labeled
unaudited.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .basegraph import BaseGraph, connectivity, girth
from .blurer import Blurer, BlurerError, blurer_for, verify_blurer
from .cfi import (
    CfiStructure,
    CfiError,
    PartialMap,
    TwistFunction,
    build_cfi,
    path_isomorphism,
    star_isomorphism,
)
from .gf2 import BlockMatrix, Gf2Error
from .orbits import (
    OrbitError,
    OrbitPartition,
    ResourceError,
    _components,
    decode_tuple,
    encode_tuple,
    orbit_partition,
    type_bijection,
)


class SimilarityError(ValueError):
    """Invalid similarity-matrix construction input."""


class AuditError(SimilarityError):
    """A builder hypothesis audit failed and no override was requested."""

    def __init__(self, report: "AuditReport"):
        names = ", ".join(c.name for c in report.failures)
        super().__init__(f"hypothesis audit failed: {names}")
        self.report = report


# -- recursive size bounds --------------------------------------------------


def star_radius(k: int) -> int:
    """Arm radius needed for arity k; arms have this many interior edges."""
    if k < 1:
        raise SimilarityError("arity must be at least 1")
    r = 1
    for j in range(2, k + 1):
        r = max(4 * r + 2, 2 * j + 2)
    return r


def twist_exponent(k: int) -> int:
    """2-adic depth a twist must have to be blurable at arity k."""
    if k < 1:
        raise SimilarityError("arity must be at least 1")
    theta = 0
    for j in range(1, k + 1):
        i = 1
        while (1 << i) - 1 < j:
            i += 1
        theta += i if j > 1 else 1
    return theta


def modulus_exponent(k: int) -> int:
    """Smallest modulus exponent q supporting an arity-k blur."""
    return 1 + twist_exponent(k)


def degree_bound(k: int, m: int) -> int:
    """Minimum base-graph degree for arity k with m pebbles."""
    if k < 1:
        raise SimilarityError("arity must be at least 1")
    if k == 1:
        return 3 + m
    i = 1
    while (1 << i) - 1 < k:
        i += 1
    return max((1 << (i + 1)) + m - 1, degree_bound(k - 1, m + 1))


@dataclass(frozen=True)
class BoundParams:
    """The audited size thresholds for an arity-k build with m pebbles."""

    k: int
    m: int
    radius: int
    twist_exp: int
    modulus_exp: int
    degree: int

    @classmethod
    def for_arity(cls, k: int, m: int) -> "BoundParams":
        return cls(
            k=k,
            m=m,
            radius=star_radius(k),
            twist_exp=twist_exponent(k),
            modulus_exp=modulus_exponent(k),
            degree=degree_bound(k, m),
        )


# -- audit reports ----------------------------------------------------------


@dataclass(frozen=True)
class AuditCheck:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class AuditReport:
    """Machine-readable hypothesis audit attached to every built matrix."""

    builder: str
    checks: List[AuditCheck] = field(default_factory=list)
    overridden: bool = False

    def add(self, name: str, ok: bool, detail: str = ""):
        self.checks.append(AuditCheck(name, bool(ok), detail))

    def merge(self, prefix: str, other: "AuditReport"):
        for c in other.checks:
            self.checks.append(AuditCheck(f"{prefix}.{c.name}", c.ok, c.detail))

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def failures(self) -> List[AuditCheck]:
        return [c for c in self.checks if not c.ok]

    @property
    def audited(self) -> bool:
        """True when every hypothesis held; overridden builds are unaudited."""
        return self.ok

    def to_jsonable(self) -> dict:
        return {
            "builder": self.builder,
            "audited": self.audited,
            "overridden": self.overridden,
            "checks": [
                {"name": c.name, "ok": c.ok, "detail": c.detail}
                for c in self.checks
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable(), sort_keys=True, indent=1) + "\n"

    def finish(self, override: bool) -> "AuditReport":
        """Raise on failure unless overridden; record the override."""
        self.overridden = bool(override) and not self.ok
        if not self.ok and not override:
            raise AuditError(self)
        return self


@dataclass
class BlurBuild:
    """A built similarity matrix with its audit and block type map."""

    matrix: BlockMatrix
    audit: AuditReport
    type_map: Dict[int, int]

    @property
    def row_parts(self) -> OrbitPartition:
        return self.matrix.row_parts

    @property
    def col_parts(self) -> OrbitPartition:
        return self.matrix.col_parts


# -- star layouts and component classification ------------------------------


@dataclass(frozen=True)
class StarLayout:
    """A center with vertex-disjoint equal-length arms ending in edge tips.

    Arm i is a simple path (center, ..., tip_i, outer_tip_i); the first
    arm ends in the twisted edge. Arms share only the center.
    """

    base: BaseGraph
    arity: int
    arms: tuple

    def __post_init__(self):
        if not self.arms:
            raise SimilarityError("layout needs at least one arm")
        arms = tuple(tuple(int(x) for x in arm) for arm in self.arms)
        object.__setattr__(self, "arms", arms)
        z = arms[0][0]
        lengths = {len(arm) for arm in arms}
        if len(lengths) != 1 or min(lengths) < 3:
            raise SimilarityError("arms must share one length of >= 3 vertices")
        seen: set = set()
        for arm in arms:
            if arm[0] != z:
                raise SimilarityError("every arm must start at the center")
            if len(set(arm)) != len(arm):
                raise SimilarityError("arms must be simple paths")
            for x, y in zip(arm, arm[1:]):
                if not self.base.has_edge(x, y):
                    raise SimilarityError(f"({x},{y}) is not a base edge")
            body = set(arm[1:])
            if body & seen:
                raise SimilarityError("arms may only share the center")
            seen |= body

    @property
    def center(self) -> int:
        return self.arms[0][0]

    @property
    def d(self) -> int:
        return len(self.arms)

    def tip(self, i: int) -> int:
        """Inner tip of arm i (0-based); arm 0's tip hosts the twist."""
        return self.arms[i][-2]

    def outer_tip(self, i: int) -> int:
        return self.arms[i][-1]

    def tip_edge(self, i: int) -> Tuple[int, int]:
        u, v = self.tip(i), self.outer_tip(i)
        return (min(u, v), max(u, v))

    def arm_vertices(self, i: int) -> frozenset:
        return frozenset(self.arms[i])

    def radius_ok(self) -> bool:
        want = star_radius(self.arity) + 1
        return all(len(arm) - 2 == want for arm in self.arms)

    @classmethod
    def from_paths(cls, base: BaseGraph, arity: int,
                   paths: Sequence[Sequence[int]]) -> "StarLayout":
        return cls(base, arity, tuple(tuple(p) for p in paths))

    @classmethod
    def choose(cls, base: BaseGraph, arity: int, t: int, t_prime: int,
               n_arms: int, blocked: Iterable[int] = ()) -> "StarLayout":
        """Deterministic layout search: center far from the twist edge and
        the blocked vertices, arms found by lexicographic backtracking."""
        blocked = set(blocked)
        if not base.has_edge(t, t_prime):
            raise SimilarityError("twist tips must be adjacent")
        target = star_radius(arity) + 1
        dist_t = base.bfs_distances([t])
        candidates = [
            x for x in range(base.n)
            if x not in blocked and x not in (t, t_prime) and dist_t[x] >= 1
        ]
        exact = sorted(x for x in candidates if dist_t[x] == target)
        rest = sorted(
            (x for x in candidates if dist_t[x] != target),
            key=lambda x: (-dist_t[x], x),
        )
        for z in exact + rest:
            arms = _search_arms(base, z, t, t_prime, n_arms, blocked)
            if arms is not None:
                return cls(base, arity, arms)
        raise SimilarityError(
            f"no {n_arms}-arm star layout for edge ({t},{t_prime}) exists"
        )


def _search_arms(base: BaseGraph, z: int, t: int, t_prime: int,
                 n_arms: int, blocked: set) -> Optional[tuple]:
    """Lexicographically least family of disjoint equal-length arms from z,
    the first ending in the twisted edge, found by backtracking."""
    dist = base.bfs_distances([z])
    length = dist[t]
    if length < 1 or z in (t, t_prime):
        return None
    used = set(blocked) | {z}
    arms: List[tuple] = []

    def extend(index: int) -> bool:
        if index == n_arms:
            return True

        def dfs(path: List[int]) -> bool:
            if len(path) == length + 1:
                e = path[-1]
                if index == 0:
                    outs = [t_prime] if e == t else []
                elif e in (t, t_prime):
                    outs = []
                else:
                    outs = [
                        y for y in base.neighbors(e)
                        if y not in used and y not in path
                        and y not in (t, t_prime)
                    ]
                for out in outs:
                    arm = tuple(path) + (out,)
                    arms.append(arm)
                    used.update(arm)
                    if extend(index + 1):
                        return True
                    used.difference_update(set(arm) - {z})
                    arms.pop()
                return False
            for y in base.neighbors(path[-1]):
                if y in used or y in path or y == t_prime:
                    continue
                if index > 0 and y == t:
                    continue
                path.append(y)
                if dfs(path):
                    return True
                path.pop()
            return False

        return dfs([z])

    if extend(0):
        return tuple(arms)
    return None


@dataclass(frozen=True)
class ComponentClass:
    """Classification of a connected origin set against a star layout."""

    kind: str  # "tip", "star", "star-center", or "sky"
    arm: Optional[int] = None  # 1-based arm number for tip and star

    @property
    def is_tip(self) -> bool:
        return self.kind == "tip"

    @property
    def is_star(self) -> bool:
        """Whether the star-spreading map acts on this component."""
        return self.kind in ("star", "star-center")

    @property
    def label(self) -> str:
        if self.kind in ("tip", "star"):
            return f"{self.arm}-{self.kind}"
        return self.kind


def classify_component(layout: StarLayout, comp: Iterable[int]) -> ComponentClass:
    """Unique label of a connected base-vertex set: a tip component holds
    some arm's full tip edge; a star component touches the arms without
    holding any outer tip (single-arm contact vs. center variant); all
    other components are sky."""
    comp = set(int(x) for x in comp)
    if not comp:
        raise SimilarityError("component must be nonempty")
    if len(_components(layout.base, comp)) != 1:
        raise SimilarityError("component must be connected")
    tips = [
        i for i in range(layout.d)
        if layout.tip(i) in comp and layout.outer_tip(i) in comp
    ]
    if len(tips) > 1:
        raise SimilarityError("component holds tip edges of several arms")
    if tips:
        return ComponentClass("tip", tips[0] + 1)
    if any(layout.outer_tip(i) in comp for i in range(layout.d)):
        return ComponentClass("sky")
    touched = [i for i in range(layout.d) if comp & layout.arm_vertices(i)]
    if not touched:
        return ComponentClass("sky")
    if len(touched) == 1 and layout.center not in comp:
        return ComponentClass("star", touched[0] + 1)
    return ComponentClass("star-center")


# -- component-wise tuple maps ----------------------------------------------


def _tip_fix_map(layout: StarLayout, i: int, value: int, q: int) -> PartialMap:
    """Isomorphism adding `value` to the twist at arm i's tip edge by
    translating the arm gadgets, center side compensating."""
    return path_isomorphism(
        layout.base, q, value, tuple(reversed(layout.arms[i]))
    )


def _star_spread_map(layout: StarLayout, xi: Sequence[int], q: int) -> PartialMap:
    """Isomorphism adding xi[i] to the twist at every tip edge at once;
    the values must sum to zero."""
    return star_isomorphism(
        layout.base, q, list(xi),
        [tuple(reversed(arm)) for arm in layout.arms],
    )


def _tuple_components(s: CfiStructure, u: Sequence[int]) -> List[set]:
    return _components(s.base, {int(s.origins[i]) for i in u})


def tau_map(s: CfiStructure, layout: StarLayout, shifts: Sequence[int],
            u: Sequence[int]) -> tuple:
    """Type-repairing map: applies arm i's tip-fix isomorphism exactly to
    the entries whose component holds arm i's tip edge."""
    if len(shifts) != layout.d:
        raise SimilarityError("need one shift per arm")
    comps = _tuple_components(s, u)
    classes = [classify_component(layout, c) for c in comps]
    maps: Dict[int, PartialMap] = {}
    out = list(int(x) for x in u)
    for pos, i in enumerate(out):
        x = int(s.origins[i])
        cls = next(c for comp, c in zip(comps, classes) if x in comp)
        if cls.is_tip and shifts[cls.arm - 1] % s.mod:
            arm = cls.arm - 1
            if arm not in maps:
                maps[arm] = _tip_fix_map(layout, arm, shifts[arm], s.q)
            out[pos] = maps[arm].apply_vertex(s, i)
    return tuple(out)


def psi_xi(s: CfiStructure, layout: StarLayout, xi: Sequence[int],
           u: Sequence[int]) -> tuple:
    """Twist-spreading map: applies the star isomorphism for xi exactly to
    the entries whose component is a star component (center included)."""
    if len(xi) != layout.d:
        raise SimilarityError("need one value per arm")
    if sum(xi) % s.mod:
        raise SimilarityError("arm values must sum to zero")
    comps = _tuple_components(s, u)
    classes = [classify_component(layout, c) for c in comps]
    spread = None
    out = list(int(x) for x in u)
    for pos, i in enumerate(out):
        x = int(s.origins[i])
        cls = next(c for comp, c in zip(comps, classes) if x in comp)
        if cls.is_star:
            if spread is None:
                spread = _star_spread_map(layout, xi, s.q)
            out[pos] = spread.apply_vertex(s, i)
    return tuple(out)


# -- arity-1 builder ---------------------------------------------------------


def _twist_difference(a: CfiStructure, b: CfiStructure) -> Dict[tuple, int]:
    """Edges where the two structures' twist functions differ."""
    out = {}
    for e, va, vb in zip(a.base.edges, a.twist.values, b.twist.values):
        if (vb - va) % a.mod:
            out[e] = (vb - va) % a.mod
    return out


def _require_twins(a: CfiStructure, b: CfiStructure):
    if a.base != b.base or a.q != b.q:
        raise SimilarityError("structures must share base graph and modulus")


def build_S_1ary(a: CfiStructure, b: CfiStructure, pebbles: Sequence[int],
                 t: int, t_prime: int, blurer: Blurer,
                 override_audit: bool = False) -> BlurBuild:
    """Similarity matrix hiding a single even twist at edge (t, t_prime):
    the identity off gadget t; inside it, a 1 wherever some blurer tuple,
    laid over t's neighbors with the twist partner first and the rest
    ascending, translates the row vertex to the column vertex."""
    _require_twins(a, b)
    base, q, mod = a.base, a.q, a.mod
    if not base.has_edge(t, t_prime):
        raise SimilarityError("twist tips must be adjacent")
    pebbles = tuple(int(p) for p in pebbles)

    diff = _twist_difference(a, b)
    edge = (min(t, t_prime), max(t, t_prime))
    theta = diff.get(edge, 0)
    deg = base.degree(t)
    dist = base.bfs_distances([t])
    pdist = min((dist[int(a.origins[p])] for p in pebbles), default=base.n)

    audit = AuditReport("1ary")
    audit.add("modulus-exponent", q >= 2, f"q={q}")
    audit.add("single-edge-twist", set(diff) <= {edge},
              f"twisted edges: {sorted(diff)}")
    audit.add("twist-even-nonzero", theta % 2 == 0 and theta != 0,
              f"twist={theta}")
    audit.add("blurer-arity", blurer.k == 1, f"blurer k={blurer.k}")
    audit.add("blurer-modulus", blurer.q == q, f"blurer q={blurer.q}")
    audit.add("blurer-width", blurer.d == deg,
              f"blurer d={blurer.d}, deg(t)={deg}")
    audit.add("blurer-twist-match", blurer.a == theta,
              f"blurer a={blurer.a}, twist={theta}")
    audit.add("blurer-verifies", verify_blurer(blurer)[0])
    audit.add("hub-degree", deg >= 3, f"deg(t)={deg}")
    audit.add("pebble-distance", pdist >= 3,
              f"min dist(t, pebble origins)={pdist}")
    audit.add("connectivity", connectivity(base) >= len(pebbles) + 3)
    audit.finish(override_audit)

    row_parts = orbit_partition(a, pebbles, 1)
    col_parts = orbit_partition(b, pebbles, 1)
    s = BlockMatrix.identity(row_parts, col_parts)

    nbrs = base.neighbors(t)
    order = (t_prime,) + tuple(y for y in nbrs if y != t_prime)
    start = a.gadget_start[t]
    g_ids = np.arange(start, a.gadget_start[t + 1])
    img = np.zeros((len(g_ids), len(g_ids)), dtype=np.uint8)
    for xi in blurer.xi:
        d_vec = [0] * deg
        for j, y in enumerate(order):
            d_vec[nbrs.index(y)] = xi[j]
        perm = PartialMap(base, q, {t: d_vec}).as_permutation(a)
        img[np.arange(len(g_ids)), perm[g_ids] - start] ^= 1

    row_blocks = sorted({int(x) for x in row_parts.block_of[g_ids]})
    col_blocks = sorted({int(x) for x in col_parts.block_of[g_ids]})
    for rb in row_blocks:
        for key in [kk for kk in s.blocks if kk[0] == rb]:
            del s.blocks[key]
        rows = row_parts.blocks[rb] - start
        for cb in col_blocks:
            cols = col_parts.blocks[cb] - start
            s.set_block_dense(rb, cb, img[np.ix_(rows, cols)])

    return BlurBuild(s, audit, type_bijection(row_parts, col_parts))


# -- active-region certification ---------------------------------------------


def active_region_check(s: BlockMatrix, claimed: Iterable[int]) -> bool:
    """Certify that s acts as the identity on components outside `claimed`:
    every component on which some same-type block pair disagrees with a 1
    entry lies inside the claimed set, and entries depend only on the
    claimed-side component values once the remaining entries agree."""
    claimed = frozenset(int(x) for x in claimed)
    rp, cp = s.row_parts, s.col_parts
    struct = rp.structure
    base, size, k = struct.base, struct.size, rp.k
    type_map = type_bijection(rp, cp)
    table: Dict[tuple, int] = {}
    for rb, cb in sorted(type_map.items()):
        rcodes = rp.blocks[rb]
        ccodes = cp.blocks[cb]
        u0 = decode_tuple(int(rcodes[0]), size, k)
        origins = [int(struct.origins[i]) for i in u0]
        comps = _components(base, set(origins))
        inside = sorted(c for c in comps if c <= claimed)
        in_set = set().union(*inside) if inside else set()
        in_pos = [p for p in range(k) if origins[p] in in_set]
        out_pos = [p for p in range(k) if p not in in_pos]
        dense = s.dense_block(rb, cb)
        rows = np.array([decode_tuple(int(c), size, k) for c in rcodes])
        cols = np.array([decode_tuple(int(c), size, k) for c in ccodes])
        if out_pos:
            agree = (
                rows[:, None, out_pos] == cols[None, :, out_pos]
            ).all(axis=2)
        else:
            agree = np.ones((len(rcodes), len(ccodes)), dtype=bool)
        if (dense.astype(bool) & ~agree).any():
            # a 1 entry differing on a component outside the claimed set
            return False
        shape = tuple(tuple(sorted(c)) for c in inside)
        for i, j in np.argwhere(agree):
            key = (
                shape,
                tuple(int(rows[i, p]) for p in in_pos),
                tuple(int(cols[j, p]) for p in in_pos),
            )
            val = int(dense[i, j])
            if table.setdefault(key, val) != val:
                return False
    return True


# -- product identities for disjoint certified regions -----------------------


def _positions_in(struct: CfiStructure, u: Sequence[int],
                  side: Iterable[int]) -> List[int]:
    side = set(side)
    return [p for p, i in enumerate(u) if int(struct.origins[i]) in side]


def _mix(u: Sequence[int], w: Sequence[int], from_w: Sequence[int]) -> tuple:
    take = set(from_w)
    return tuple(w[p] if p in take else u[p] for p in range(len(u)))


def _entry(m: BlockMatrix, u: Sequence[int], v: Sequence[int]) -> int:
    size = m.row_parts.structure.size
    return m.entry(encode_tuple(u, size), encode_tuple(v, size))


def _side_parts(parts: OrbitPartition, u: Sequence[int],
                positions: Sequence[int]) -> List[tuple]:
    """Distinct restrictions of u's orbit to the given positions."""
    block = parts.block_tuples(parts.block_index(u))
    return sorted({tuple(t[p] for p in positions) for t in block})


def _same_type(m: BlockMatrix, type_map: Dict[int, int],
               u: Sequence[int], w: Sequence[int]) -> bool:
    """Whether w's orbit is the type match of u's; the identities are
    only asserted for same-type row and column orbits."""
    size = m.row_parts.structure.size
    rb = int(m.row_parts.block_of[encode_tuple(u, size)])
    cb = int(m.col_parts.block_of[encode_tuple(w, size)])
    return type_map.get(rb) == cb


def product_split_check(s: BlockMatrix, t: BlockMatrix,
                        m_side: Iterable[int], n_side: Iterable[int],
                        pairs: Iterable[Tuple[tuple, tuple]]) -> bool:
    """For matrices with disjoint certified regions split by the component
    bipartition (m_side, n_side): each product entry factors as the
    s-entry against the column's m-part joined with the row's n-part,
    times the t-entry from that hybrid to the column."""
    st = s.multiply(t)
    struct = s.row_parts.structure
    type_map = type_bijection(st.row_parts, st.col_parts)
    m_side = set(m_side)
    for u, w in pairs:
        if not _same_type(st, type_map, u, w):
            continue
        mpos = _positions_in(struct, u, m_side)
        hybrid = _mix(u, w, mpos)
        lhs = _entry(st, u, w)
        rhs = _entry(s, u, hybrid) & _entry(t, hybrid, w)
        if lhs != rhs:
            return False
    return True


def product_left_sum_check(s: BlockMatrix, t: BlockMatrix,
                           m_side: Iterable[int],
                           pairs: Iterable[Tuple[tuple, tuple]]) -> bool:
    """Summing a product's rows over the full m-side restriction of the
    row orbit cancels the s factor, leaving the t-entry from the hybrid
    (column m-part, row n-part) to the column."""
    st = s.multiply(t)
    struct = s.row_parts.structure
    type_map = type_bijection(st.row_parts, st.col_parts)
    m_side = set(m_side)
    for u, w in pairs:
        if not _same_type(st, type_map, u, w):
            continue
        mpos = _positions_in(struct, u, m_side)
        total = 0
        for part in _side_parts(s.row_parts, u, mpos):
            u2 = list(u)
            for p, v in zip(mpos, part):
                u2[p] = v
            total ^= _entry(st, tuple(u2), w)
        if total != _entry(t, _mix(u, w, mpos), w):
            return False
    return True


def product_middle_sum_check(s1: BlockMatrix, s2: BlockMatrix,
                             s3: BlockMatrix, mid_side: Iterable[int],
                             pairs: Iterable[Tuple[tuple, tuple]]) -> bool:
    """Summing a three-factor product over the middle region's restriction
    drops the middle factor: the sum equals the outer two factors' product
    evaluated with the middle part taken from the column tuple."""
    p123 = s1.multiply(s2).multiply(s3)
    p13 = s1.multiply(s3)
    struct = s1.row_parts.structure
    type_map = type_bijection(p123.row_parts, p123.col_parts)
    mid_side = set(mid_side)
    for u, w in pairs:
        if not _same_type(p123, type_map, u, w):
            continue
        mpos = _positions_in(struct, u, mid_side)
        total = 0
        for part in _side_parts(s1.row_parts, u, mpos):
            u2 = list(u)
            for p, v in zip(mpos, part):
                u2[p] = v
            total ^= _entry(p123, tuple(u2), w)
        if total != _entry(p13, _mix(u, w, mpos), w):
            return False
    return True


# -- per-blurer-element recursive factors ------------------------------------


def build_S_xi(a: CfiStructure, b_xi: CfiStructure, pebbles: Sequence[int],
               layout: StarLayout, k: int,
               override_audit: bool = False) -> BlurBuild:
    """Similarity matrix for one blurer element: the two structures differ
    only at the arm tip edges, and the differences are removed one arm at
    a time through a chain of interpolating structures, each step a
    lower-arity blur at that arm's tip. Equal twists yield the identity."""
    _require_twins(a, b_xi)
    if k != 2:
        raise ResourceError(
            "per-element factors are implemented for arity 2 only"
        )
    base, q = a.base, a.q
    pebbles = tuple(int(p) for p in pebbles)

    diff = _twist_difference(a, b_xi)
    tip_edges = [layout.tip_edge(i) for i in range(layout.d)]
    deltas = [diff.get(e, 0) for e in tip_edges]
    sub_radius = star_radius(k - 1)
    tip_dists = [
        base.bfs_distances([layout.tip(i)]) for i in range(layout.d)
    ]
    min_gap = min(
        (tip_dists[i][layout.tip(j)]
         for i in range(layout.d) for j in range(i + 1, layout.d)),
        default=base.n,
    )

    audit = AuditReport("per-element")
    audit.add("tip-edges-only", set(diff) <= set(tip_edges),
              f"twisted edges: {sorted(diff)}")
    audit.add("even-arm-twists", all(d % 2 == 0 for d in deltas),
              f"arm twists: {deltas}")
    audit.add("disjoint-arm-regions", min_gap > 2 * sub_radius,
              f"min tip distance {min_gap}, need > {2 * sub_radius}")
    audit.finish(override_audit)

    chain = a.twist
    factors: List[BlurBuild] = []
    for i, delta in enumerate(deltas):
        if delta == 0:
            continue
        e = tip_edges[i]
        nxt = chain.with_edge(e[0], e[1], (chain.value(*e) + delta) % a.mod)
        left = build_cfi(base, q, chain)
        right = build_cfi(base, q, nxt)
        sub_blurer = blurer_for(1, q, delta, base.degree(layout.tip(i)))
        built = build_S_1ary(
            left, right, pebbles, layout.tip(i), layout.outer_tip(i),
            sub_blurer, override_audit=override_audit,
        )
        audit.merge(f"arm{i + 1}", built.audit)
        factors.append(built)
        chain = nxt

    if not factors:
        row_parts = orbit_partition(a, pebbles, k - 1)
        col_parts = orbit_partition(b_xi, pebbles, k - 1)
        matrix = BlockMatrix.identity(row_parts, col_parts)
        return BlurBuild(matrix, audit,
                         type_bijection(row_parts, col_parts))

    matrix = factors[0].matrix
    for built in factors[1:]:
        matrix = matrix.multiply(built.matrix)
    # reattach the end partitions: the chain's inner partitions agree
    # blockwise, so the product is indexed by the outermost ones
    matrix.row_parts = factors[0].matrix.row_parts
    matrix.col_parts = factors[-1].matrix.col_parts
    return BlurBuild(
        matrix, audit,
        type_bijection(matrix.row_parts, matrix.col_parts),
    )


# -- arity-k builder ----------------------------------------------------------


def _derive_blurer(k: int, q: int, theta: int, d: int) -> Blurer:
    return blurer_for(k, q, theta, d)


def build_S_kary(a: CfiStructure, b: CfiStructure, pebbles: Sequence[int],
                 t: int, t_prime: int, k: int,
                 blurer: Optional[Blurer] = None,
                 layout: Optional[StarLayout] = None,
                 override_audit: bool = False) -> BlurBuild:
    """Similarity matrix hiding a deep-enough twist at (t, t_prime) from
    arity-k distinguishers. Arity 1 delegates to the single-gadget
    builder. At arity 2 the twist is spread over a star layout: blocks
    whose origins avoid the center count blurer elements whose spread,
    repaired by the tip-fixing map, sends row to column; blocks touching
    the center split off their first center entry and weigh the matching
    per-element factor matrices, pinned at the least center vertex."""
    _require_twins(a, b)
    base, q, mod = a.base, a.q, a.mod
    pebbles = tuple(int(p) for p in pebbles)
    m = len(pebbles)

    diff = _twist_difference(a, b)
    edge = (min(t, t_prime), max(t, t_prime))
    theta = diff.get(edge, 0)

    if k == 1:
        sub = blurer if blurer is not None else _derive_blurer(
            1, q, theta, base.degree(t))
        return build_S_1ary(a, b, pebbles, t, t_prime, sub,
                            override_audit=override_audit)
    if k != 2:
        raise ResourceError("arity above 2 exceeds the desk-scale guard")

    if blurer is None:
        blurer = _derive_blurer(k, q, theta, base.degree(t))
    if layout is None:
        layout = StarLayout.choose(
            base, k, t, t_prime, blurer.d,
            blocked={int(a.origins[p]) for p in pebbles},
        )

    params = BoundParams.for_arity(k, m)
    dist_t = base.bfs_distances([t])
    pdist = min((dist_t[int(a.origins[p])] for p in pebbles), default=base.n)
    graph_girth = girth(base)
    min_degree = min(base.degree(x) for x in range(base.n))

    audit = AuditReport("kary")
    audit.add("modulus-exponent", q >= params.modulus_exp,
              f"q={q}, need >= {params.modulus_exp}")
    audit.add("degree", min_degree >= params.degree,
              f"min degree {min_degree}, need >= {params.degree}")
    audit.add("girth", graph_girth >= 2 * star_radius(k + 1),
              f"girth {graph_girth}, need >= {2 * star_radius(k + 1)}")
    audit.add("connectivity", connectivity(base) >= m + 2 * k + 1,
              f"need >= {m + 2 * k + 1}")
    audit.add("pebble-distance", pdist > star_radius(k + 1),
              f"min dist(t, pebble origins)={pdist}")
    audit.add("single-edge-twist", set(diff) <= {edge},
              f"twisted edges: {sorted(diff)}")
    audit.add("twist-depth",
              theta != 0 and theta % (1 << params.twist_exp) == 0,
              f"twist={theta}, need a multiple of 2^{params.twist_exp}")
    audit.add("blurer-parameters",
              blurer.k == k and blurer.q == q and blurer.a == theta,
              f"blurer ({blurer.k},{blurer.q},{blurer.a},{blurer.d})")
    audit.add("blurer-verifies", verify_blurer(blurer)[0])
    audit.add("layout-arms", layout.d == blurer.d,
              f"{layout.d} arms, blurer width {blurer.d}")
    audit.add("layout-first-arm",
              layout.tip(0) == t and layout.outer_tip(0) == t_prime)
    audit.add("layout-radius", layout.radius_ok(),
              f"arm radius {len(layout.arms[0]) - 2}, "
              f"need {star_radius(k) + 1}")
    audit.finish(override_audit)

    matrix = _assemble_2ary(a, b, pebbles, layout, blurer, audit,
                            override_audit)
    return BlurBuild(
        matrix, audit,
        type_bijection(matrix.row_parts, matrix.col_parts),
    )


def _assemble_2ary(a: CfiStructure, b: CfiStructure, pebbles: tuple,
                   layout: StarLayout, blurer: Blurer, audit: AuditReport,
                   override_audit: bool) -> BlockMatrix:
    base, q, mod, size = a.base, a.q, a.mod, a.size
    z = layout.center
    xi_fix = blurer.xi_fix

    row_parts = orbit_partition(a, pebbles, 2)
    col_parts = orbit_partition(b, pebbles, 2)
    s = BlockMatrix(row_parts, col_parts)

    # vertex permutations of the component-wise maps
    spread_perm = {
        xi: _star_spread_map(layout, xi, q).as_permutation(a)
        for xi in blurer.xi
    }
    fix_perm = {
        i: _tip_fix_map(layout, i, xi_fix[i], q).as_permutation(a)
        for i in range(layout.d) if xi_fix[i] % mod
    }
    idperm = np.arange(size, dtype=np.int64)

    # the pinned center vertex for the recursive factors
    p_z = a.gadget_start[z]
    rec_pebbles = pebbles + (p_z,)
    factor_cache: Dict[tuple, np.ndarray] = {}
    tip_edges = [layout.tip_edge(i) for i in range(layout.d)]

    def factor_dense(xi: tuple) -> np.ndarray:
        deltas = tuple((xi_fix[i] - xi[i]) % mod for i in range(layout.d))
        if deltas not in factor_cache:
            twist = b.twist
            for e, d in zip(tip_edges, xi):
                twist = twist.with_edge(e[0], e[1],
                                        (twist.value(*e) - d) % mod)
            built = build_S_xi(a, build_cfi(base, q, twist), rec_pebbles,
                               layout, 2, override_audit=override_audit)
            audit.merge(f"factor{deltas}", built.audit)
            factor_cache[deltas] = built.matrix.to_dense()
        return factor_cache[deltas]

    for rb, rcodes in enumerate(row_parts.blocks):
        u0 = decode_tuple(int(rcodes[0]), size, 2)
        origins = [int(a.origins[i]) for i in u0]
        comps = _components(base, set(origins))
        classes = {
            frozenset(c): classify_component(layout, c) for c in comps
        }
        cls_of = [
            next(cl for c, cl in classes.items() if origins[p] in c)
            for p in range(2)
        ]
        u1 = rcodes // size
        u2 = rcodes % size

        if z not in origins:
            # count blurer elements whose spread-then-fix action maps the
            # row tuple to the column tuple
            v0 = tau_map(a, layout, xi_fix,
                         psi_xi(a, layout, blurer.xi[0], u0))
            cb = int(col_parts.block_of[encode_tuple(v0, size)])
            ccodes = col_parts.blocks[cb]
            dense = np.zeros((len(rcodes), len(ccodes)), dtype=np.uint8)
            for xi in blurer.xi:
                perms = []
                for p in range(2):
                    perm = spread_perm[xi] if cls_of[p].is_star else idperm
                    if cls_of[p].is_tip:
                        arm = cls_of[p].arm - 1
                        if arm in fix_perm:
                            perm = fix_perm[arm][perm]
                    perms.append(perm)
                vcodes = perms[0][u1] * size + perms[1][u2]
                j = np.searchsorted(ccodes, vcodes)
                if not np.array_equal(ccodes[j], vcodes):
                    raise SimilarityError(
                        "spread image left the type-matched block")
                dense[np.arange(len(rcodes)), j] ^= 1
            s.set_block_dense(rb, cb, dense)
        else:
            # center blocks: condition on the first center entry's spread
            # image and weigh the per-element factor on the remainder
            pz_pos = 0 if origins[0] == z else 1
            op = 1 - pz_pos
            u_z = u1 if pz_pos == 0 else u2
            u_rem = u2 if pz_pos == 0 else u1
            cb = int(col_parts.block_of[
                encode_tuple(tau_map(a, layout, xi_fix, u0), size)])
            ccodes = col_parts.blocks[cb]
            c1 = ccodes // size
            c2 = ccodes % size
            v_z = c1 if pz_pos == 0 else c2
            v_rem = c2 if pz_pos == 0 else c1
            rem_cls = classify_component(layout, {origins[op]})
            acc = np.zeros((len(rcodes), len(ccodes)), dtype=np.uint8)
            for xi in blurer.xi:
                sub = factor_dense(xi)
                xr = spread_perm[xi][u_rem] if rem_cls.is_star else u_rem
                gate = spread_perm[xi][u_z][:, None] == v_z[None, :]
                acc ^= sub[np.ix_(xr, v_rem)] & gate
            s.set_block_dense(rb, cb, acc)
    return s


__all__ = [
    "SimilarityError",
    "AuditError",
    "AuditCheck",
    "AuditReport",
    "BlurBuild",
    "BoundParams",
    "star_radius",
    "twist_exponent",
    "modulus_exponent",
    "degree_bound",
    "StarLayout",
    "ComponentClass",
    "classify_component",
    "tau_map",
    "psi_xi",
    "build_S_1ary",
    "build_S_xi",
    "build_S_kary",
    "active_region_check",
    "product_split_check",
    "product_left_sum_check",
    "product_middle_sum_check",
]
