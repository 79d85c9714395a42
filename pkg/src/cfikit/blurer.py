"""Blurer families: zero-sum tuple sets whose k-index projections look
like a single twist of value a at index 1 and no twist elsewhere.

A (k,q,a,d)-blurer is a set of zero-sum vectors in Z_{2^q}^d such that for
every index set N of size k, the parity count of restrictions hits exactly
the restriction of (a,0,...,0) once (if 1 is in N) or the zero vector once
(if not), and nothing else. Constructors follow a verification-first
policy: every recipe output is re-verified against the definition before
it is returned, because the transformations have parameter edge
cases that only the definition settles.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .zring import inv_unit, val2


class BlurerError(ValueError):
    """Invalid or unverifiable blurer construction."""

    def __init__(self, message: str, violation: Optional[tuple] = None):
        super().__init__(message)
        self.violation = violation


@dataclass(frozen=True)
class Blurer:
    k: int
    q: int
    a: int
    d: int
    xi: tuple  # sorted tuple of distinct value tuples
    provenance: tuple = ()

    def __post_init__(self):
        mod = 1 << self.q
        clean = tuple(sorted(tuple(v % mod for v in t) for t in self.xi))
        if len(set(clean)) != len(clean):
            raise BlurerError("duplicate tuples in family")
        if any(len(t) != self.d for t in clean):
            raise BlurerError("tuple length does not match d")
        object.__setattr__(self, "xi", clean)
        object.__setattr__(self, "a", self.a % mod)
        object.__setattr__(self, "provenance", tuple(self.provenance))

    @property
    def xi_fix(self) -> tuple:
        """The phantom tuple (a,0,...,0) the family sums to, projectionwise."""
        return (self.a,) + (0,) * (self.d - 1)

    def to_json(self) -> str:
        doc = {
            "k": self.k,
            "q": self.q,
            "a": self.a,
            "d": self.d,
            "tuples": [list(t) for t in self.xi],
            "provenance": list(self.provenance),
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Blurer":
        doc = json.loads(text)
        return cls(
            k=doc["k"], q=doc["q"], a=doc["a"], d=doc["d"],
            xi=tuple(tuple(t) for t in doc["tuples"]),
            provenance=tuple(doc.get("provenance", [])),
        )


def binomial_parity(n: int, m: int) -> int:
    """Parity of the binomial coefficient C(n, m), by digit domination:
    odd exactly when every base-2 digit of m is at most n's digit."""
    if m < 0 or m > n:
        return 0
    return 1 if (m & (n - m)) == 0 else 0


def count_vects(xi: Iterable[tuple], n_set: Sequence[int], b: Sequence[int]) -> int:
    """Parity of tuples whose restriction to the 1-based index set is b."""
    n_set = tuple(n_set)
    b = tuple(b)
    if len(n_set) != len(b):
        raise BlurerError("index set and target vector differ in length")
    hits = sum(1 for t in xi if tuple(t[j - 1] for j in n_set) == b)
    return hits % 2


def verify_blurer(b: Blurer) -> Tuple[bool, Optional[tuple]]:
    """Exhaustive definition check; returns (ok, first violation).

    A violation is (condition, n_set, vector): condition 1 is a nonzero
    tuple sum, 2/3 a missing required projection, 4 a stray odd count.
    """
    mod = 1 << b.q
    if b.d < b.k or b.k < 1:
        return False, (0, None, None)
    for t in b.xi:
        if sum(t) % mod:
            return False, (1, None, t)
    for n_set in itertools.combinations(range(1, b.d + 1), b.k):
        counts: Dict[tuple, int] = {}
        for t in b.xi:
            key = tuple(t[j - 1] for j in n_set)
            counts[key] = counts.get(key, 0) ^ 1
        counts = {key: v for key, v in counts.items() if v}
        want = tuple(b.xi_fix[j - 1] for j in n_set)
        if counts.get(want, 0) != 1:
            condition = 2 if 1 in n_set else 3
            return False, (condition, n_set, want)
        extra = [key for key in counts if key != want]
        if extra:
            return False, (4, n_set, min(extra))
    return True, None


def _checked(b: Blurer) -> Blurer:
    ok, violation = verify_blurer(b)
    if not ok:
        raise BlurerError(
            f"construction does not verify as a ({b.k},{b.q},{b.a},{b.d})-blurer",
            violation,
        )
    return b


def basic_blurer(mode: str, *, q: Optional[int] = None, d: Optional[int] = None,
                 i: Optional[int] = None) -> Blurer:
    """The two literal base families: arity1(q,d) and kary(i)."""
    if mode == "arity1":
        if q is None or d is None or q < 2 or d < 3:
            raise BlurerError("arity1 needs q >= 2 and d >= 3")
        scale = 1 << (q - 2)
        seeds = [(3, 0, 1), (3, 1, 0), (2, 1, 1)]
        xi = tuple(
            tuple(scale * v for v in t) + (0,) * (d - 3) for t in seeds
        )
        return _checked(Blurer(1, q, 1 << (q - 1), d, xi, (f"arity1({q},{d})",)))
    if mode == "kary":
        if i is None or i < 2:
            raise BlurerError("kary needs i >= 2")
        half = 1 << (i - 1)
        d_out = (1 << i) - 1
        xi = []
        for first, tail_sum in ((half, half), (half + 1, half - 1)):
            for ones in itertools.combinations(range(d_out - 1), tail_sum):
                tail = [0] * (d_out - 1)
                for p in ones:
                    tail[p] = 1
                xi.append((first,) + tuple(tail))
        return _checked(Blurer(half - 1, i, half, d_out, tuple(xi), (f"kary({i})",)))
    raise BlurerError(f"unknown basic blurer mode {mode!r}")


def transform(b: Blurer, variant: str, **params) -> Blurer:
    """Apply one transformation rule; the output is always re-verified."""
    mod = 1 << b.q
    if variant == "pad":
        d_new = params["d"]
        if d_new < b.d:
            raise BlurerError("pad cannot shrink d")
        xi = tuple(t + (0,) * (d_new - b.d) for t in b.xi)
        out = Blurer(b.k, b.q, b.a, d_new, xi, b.provenance + (f"pad({d_new})",))
    elif variant == "restrict_k":
        k_new = params["k"]
        if not 1 <= k_new <= b.k:
            raise BlurerError("restrict_k needs 1 <= k' <= k")
        out = Blurer(k_new, b.q, b.a, b.d, b.xi,
                     b.provenance + (f"restrict_k({k_new})",))
    elif variant == "scale":
        c = params["c"] % mod
        xi = tuple(tuple(c * v % mod for v in t) for t in b.xi)
        out = Blurer(b.k, b.q, c * b.a % mod, b.d, xi,
                     b.provenance + (f"scale({c})",))
    elif variant == "embed":
        ell = params["ell"]
        if ell < 0:
            raise BlurerError("embed needs ell >= 0")
        shift = 1 << ell
        xi = tuple(tuple(shift * v for v in t) for t in b.xi)
        out = Blurer(b.k, b.q + ell, shift * b.a, b.d, xi,
                     b.provenance + (f"embed({ell})",))
    elif variant == "larger_field":
        return _larger_field(b, params["ell"], params.get("c"))
    else:
        raise BlurerError(f"unknown transform {variant!r}")
    return _checked(out)


def _larger_field(b: Blurer, ell: int, c: Optional[int] = None) -> Blurer:
    """Lift to Z_{2^{q+ell}} without scaling a, via an odd multiplier c.

    The stated constant 2^(ell-q+1)-1 is even (or ill-formed) for small
    ell, so candidates are tried in order — the given c, that constant
    when odd, -1, then all other odd residues — and the first verifying
    family wins.
    """
    if ell < 0:
        raise BlurerError("larger_field needs ell >= 0")
    q_new = b.q + ell
    mod_new = 1 << q_new
    candidates: List[int] = []
    if c is not None:
        candidates.append(c % mod_new)
    stated = ((1 << (ell - b.q + 1)) - 1) % mod_new if ell - b.q + 1 >= 0 else 0
    for cand in (stated, (-1) % mod_new):
        if cand % 2 == 1 and cand not in candidates:
            candidates.append(cand)
    for cand in range(1, mod_new, 2):
        if cand not in candidates:
            candidates.append(cand)
    last_violation = None
    for cand in candidates:
        xi = []
        for t in b.xi:
            tail = [cand * v % mod_new for v in t[1:]]
            xi.append(((-sum(tail)) % mod_new,) + tuple(tail))
        try:
            return _checked(
                Blurer(b.k, q_new, b.a, b.d, tuple(xi),
                       b.provenance + (f"larger_field({ell},c={cand})",))
            )
        except BlurerError as exc:
            last_violation = exc.violation
            if c is not None:
                raise
    raise BlurerError("no odd multiplier yields a verifying lift", last_violation)


def blurer_for(k: int, q: int, a: int, d: int,
               search_budget: int = 20000, seed: int = 0) -> Blurer:
    """A verified (k,q,a,d)-blurer via the recipe routes, else search."""
    mod = 1 << q
    a %= mod
    errors = []
    for route in ("embed", "larger_field"):
        try:
            return _recipe(k, q, a, d, route)
        except BlurerError as exc:
            errors.append(str(exc))
    result = search_blurer(k, q, a, d, budget=search_budget, seed=seed)
    if result.blurer is not None:
        return result.blurer
    raise BlurerError(
        "no verified ({},{},{},{})-blurer found: {}".format(
            k, q, a, d, "; ".join(errors)
        )
    )


def _recipe(k: int, q: int, a: int, d: int, route: str) -> Blurer:
    """basic family -> ring lift -> restrict_k -> pad -> scale, verified."""
    i = 2
    while (1 << (i - 1)) - 1 < k:
        i += 1
    if q < i:
        raise BlurerError(f"q={q} below the base family's ring exponent {i}")
    b = basic_blurer("kary", i=i)
    if q > i:
        b = transform(b, route, ell=q - i)
    if k < b.k:
        b = transform(b, "restrict_k", k=k)
    if d < b.d:
        raise BlurerError(f"d={d} below the base family's width {b.d}")
    if d > b.d:
        b = transform(b, "pad", d=d)
    if a != b.a:
        v_have, v_want = val2(b.a, q), val2(a, q)
        if v_want < v_have:
            raise BlurerError(f"target a={a} is not a multiple of {b.a}")
        c = (a >> v_have) * inv_unit(b.a >> v_have, q) % (1 << q)
        b = transform(b, "scale", c=c)
    if (b.k, b.q, b.a, b.d) != (k, q, a, d):
        raise BlurerError("recipe produced mismatched parameters")
    return b


def blurer_sum_check(b: Blurer, k_set: Sequence[int], table: Dict[tuple, int]) -> bool:
    """Whether the table sums over the family to its value at (a,0,...,0)."""
    k_set = tuple(k_set)
    if len(k_set) != b.k:
        raise BlurerError("index set size must equal k")
    total = 0
    for t in b.xi:
        total ^= table[tuple(t[j - 1] for j in k_set)] & 1
    want = table[tuple(b.xi_fix[j - 1] for j in k_set)] & 1
    return total == want


@dataclass
class SearchResult:
    blurer: Optional[Blurer]
    exhaustive: bool  # absence is proven, not just unobserved
    tried: int


EXACT_SOLVE_GUARD = 1 << 15


def search_blurer(k: int, q: int, a: int, d: int, budget: int = 20000,
                  seed: int = 0) -> SearchResult:
    """Search for a (k,q,a,d)-blurer.

    The definition is linear over F2 in the indicator vector of the family
    on zero-sum vectors, so small spaces are decided exactly by Gaussian
    elimination; larger ones fall back to random subsets within budget.
    """
    mod = 1 << q
    a %= mod
    if d < k or k < 1:
        return SearchResult(None, True, 0)
    n_vectors = mod ** (d - 1)
    if n_vectors <= EXACT_SOLVE_GUARD:
        return _exact_search(k, q, a, d)
    rng = random.Random(seed)
    vectors = None
    for trial in range(budget):
        size = rng.randrange(1, 2 * d * mod, 2)  # odd sizes only
        if vectors is None:
            vectors = _zero_sum_vectors(q, d, limit=1 << 22)
        cand = Blurer(k, q, a, d, tuple(rng.sample(vectors, min(size, len(vectors)))),
                      (f"random(seed={seed})",))
        ok, _ = verify_blurer(cand)
        if ok:
            return SearchResult(cand, False, trial + 1)
    return SearchResult(None, False, budget)


def _zero_sum_vectors(q: int, d: int, limit: int) -> List[tuple]:
    mod = 1 << q
    if mod ** (d - 1) > limit:
        raise BlurerError("zero-sum space too large to enumerate")
    out = []
    for prefix in itertools.product(range(mod), repeat=d - 1):
        out.append(prefix + ((-sum(prefix)) % mod,))
    return out


def _exact_search(k: int, q: int, a: int, d: int) -> SearchResult:
    """Decide existence exactly: the conditions are F2-linear constraints."""
    mod = 1 << q
    vectors = _zero_sum_vectors(q, d, EXACT_SOLVE_GUARD)
    index = {v: p for p, v in enumerate(vectors)}
    n = len(vectors)
    xi_fix = (a,) + (0,) * (d - 1)
    rows: List[int] = []  # bitmask over variables, bit n is the rhs
    rhs_bit = 1 << n
    for n_set in itertools.combinations(range(1, d + 1), k):
        want = tuple(xi_fix[j - 1] for j in n_set)
        buckets: Dict[tuple, int] = {}
        for v, p in index.items():
            key = tuple(v[j - 1] for j in n_set)
            buckets[key] = buckets.get(key, 0) | (1 << p)
        for key in itertools.product(range(mod), repeat=k):
            mask = buckets.get(key, 0)
            target = 1 if key == want else 0
            if mask == 0:
                if target:
                    return SearchResult(None, True, 0)
                continue
            rows.append(mask | (rhs_bit if target else 0))
    # Gaussian elimination over F2 on big-integer bitmasks
    pivots: Dict[int, int] = {}
    for row in rows:
        cur = row
        while True:
            body = cur & (rhs_bit - 1)
            if body == 0:
                if cur & rhs_bit:
                    return SearchResult(None, True, 0)
                break
            lead = body.bit_length() - 1
            if lead in pivots:
                cur ^= pivots[lead]
            else:
                pivots[lead] = cur
                break
    # substitute in ascending pivot order: every bit below a row's lead is
    # either free (zero) or an already-solved pivot
    solution = 0
    for lead in sorted(pivots):
        row = pivots[lead]
        val = 1 if row & rhs_bit else 0
        body = row & (rhs_bit - 1) & ~(1 << lead)
        val ^= bin(body & solution).count("1") & 1
        if val:
            solution |= 1 << lead
    xi = tuple(vectors[p] for p in range(n) if solution & (1 << p))
    cand = Blurer(k, q, a, d, xi, (f"exact_solve({k},{q},{a},{d})",))
    ok, violation = verify_blurer(cand)
    if not ok:
        raise AssertionError(f"exact solver produced a non-blurer: {violation}")
    return SearchResult(cand, True, 1)


__all__ = [
    "BlurerError",
    "Blurer",
    "binomial_parity",
    "count_vects",
    "verify_blurer",
    "basic_blurer",
    "transform",
    "blurer_for",
    "blurer_sum_check",
    "SearchResult",
    "search_blurer",
]
