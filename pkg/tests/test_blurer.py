"""Blurring families: construction, transformation, verification, parity."""

import itertools
import math
import random

import pytest

from cfikit.blurer import (
    Blurer,
    BlurerError,
    basic_blurer,
    binomial_parity,
    blurer_for,
    blurer_sum_check,
    count_vects,
    search_blurer,
    transform,
    verify_blurer,
)

BASE_FAMILY = {(3, 0, 1), (3, 1, 0), (2, 1, 1)}


def test_count_vects_examples():
    # Positions are 1-based.
    assert count_vects(BASE_FAMILY, [1], (2,)) == 1
    assert count_vects(BASE_FAMILY, [1], (3,)) == 0  # two hits, even
    assert count_vects(BASE_FAMILY, [2], (0,)) == 1


def test_count_vects_matches_direct_count():
    rng = random.Random(12)
    xi = [tuple(rng.randrange(8) for _ in range(4)) for _ in range(9)]
    for n_set in ([1], [2, 4], [1, 2, 3]):
        for b in itertools.product(range(8), repeat=len(n_set)):
            direct = sum(
                1 for t in xi if all(t[p - 1] == v for p, v in zip(n_set, b))
            )
            assert count_vects(xi, n_set, b) == direct % 2


def test_arity1_families_verify():
    for q in (2, 3, 4):
        for d in (3, 4, 5, 6):
            b = basic_blurer("arity1", q=q, d=d)
            assert b.k == 1 and b.q == q and b.d == d
            ok, violation = verify_blurer(b)
            assert ok, violation
            assert len(b.xi) % 2 == 1


def test_arity1_base_family_literal():
    b = basic_blurer("arity1", q=2, d=3)
    assert set(b.xi) == BASE_FAMILY
    assert b.a == 2
    assert b.xi_fix == (2, 0, 0)


def test_arity1_dropping_a_tuple_breaks_verification():
    b = basic_blurer("arity1", q=2, d=3)
    for drop in b.xi:
        broken = Blurer(b.k, b.q, b.a, b.d, tuple(t for t in b.xi if t != drop), ())
        ok, violation = verify_blurer(broken)
        assert not ok and violation is not None


def test_kary_families_verify():
    b2 = basic_blurer("kary", i=2)
    assert set(b2.xi) == BASE_FAMILY  # coincides with arity1(2,3)
    assert len(b2.xi) == 3
    b3 = basic_blurer("kary", i=3)
    assert (b3.k, b3.q, b3.a, b3.d) == (3, 3, 4, 7)
    assert len(b3.xi) == 35
    for b in (b2, b3):
        ok, violation = verify_blurer(b)
        assert ok, violation
        assert len(b.xi) % 2 == 1


def test_basic_blurer_parameter_errors():
    with pytest.raises(BlurerError):
        basic_blurer("arity1", q=1, d=3)
    with pytest.raises(BlurerError):
        basic_blurer("arity1", q=2, d=2)
    with pytest.raises(BlurerError):
        basic_blurer("kary", i=1)


def test_transform_pad():
    b = transform(basic_blurer("arity1", q=2, d=3), "pad", d=4)
    assert set(b.xi) == {(3, 0, 1, 0), (3, 1, 0, 0), (2, 1, 1, 0)}
    assert verify_blurer(b)[0]


def test_transform_restrict_k():
    b = transform(basic_blurer("kary", i=3), "restrict_k", k=2)
    assert b.k == 2 and set(b.xi) == set(basic_blurer("kary", i=3).xi)
    assert verify_blurer(b)[0]


def test_transform_scale():
    b = transform(basic_blurer("arity1", q=2, d=3), "scale", c=3)
    # 3*2 = 2 mod 4, so the fixing value is unchanged.
    assert b.a == 2
    assert verify_blurer(b)[0]


def test_transform_embed():
    b = transform(basic_blurer("arity1", q=2, d=3), "embed", ell=1)
    assert (b.k, b.q, b.a, b.d) == (1, 3, 4, 3)
    assert set(b.xi) == {(6, 0, 2), (6, 2, 0), (4, 2, 2)}
    assert verify_blurer(b)[0]


def test_transform_larger_field():
    b = transform(basic_blurer("kary", i=2), "larger_field", ell=2)
    assert verify_blurer(b)[0]


def test_blurer_for_named_targets():
    b = blurer_for(1, 2, 2, 3)
    assert set(b.xi) == BASE_FAMILY
    b2 = blurer_for(1, 3, 4, 3)
    assert set(b2.xi) == {(6, 0, 2), (6, 2, 0), (4, 2, 2)}
    b3 = blurer_for(2, 4, 8, 7)
    assert (b3.k, b3.q, b3.a, b3.d) == (2, 4, 8, 7)
    assert verify_blurer(b3)[0]


def test_blurer_sum_check_random_tables():
    rng = random.Random(88)
    for b in (
        basic_blurer("arity1", q=2, d=3),
        basic_blurer("arity1", q=3, d=4),
        basic_blurer("kary", i=2),
        basic_blurer("kary", i=3),
    ):
        k_sets = list(itertools.combinations(range(1, b.d + 1), b.k))
        for _ in range(1000):
            k_set = rng.choice(k_sets)
            restrictions = {tuple(t[p - 1] for p in k_set) for t in b.xi}
            table = {r: rng.randrange(2) for r in restrictions}
            assert blurer_sum_check(b, k_set, table)


def test_blurer_sum_check_constant_table():
    b = basic_blurer("kary", i=3)  # a k=3 family
    table_keys = {t[:3] for t in b.xi} | {b.xi_fix[:3]}
    assert blurer_sum_check(b, [1, 2, 3], {r: 1 for r in table_keys})
    with pytest.raises(BlurerError):
        blurer_sum_check(b, [1, 2], {})


def test_search_blurer_finds_and_refutes():
    found = search_blurer(1, 2, 2, 3, budget=20000, seed=0)
    assert found.blurer is not None
    assert verify_blurer(found.blurer)[0]
    # No blurring family exists over Z_2.
    nothing = search_blurer(1, 1, 1, 3, budget=20000, seed=0)
    assert nothing.blurer is None


def test_blurer_json_roundtrip():
    b = basic_blurer("kary", i=2)
    blob = b.to_json()
    back = Blurer.from_json(blob)
    assert back.to_json() == blob
    assert set(back.xi) == set(b.xi)


def test_lucas_parity_matches_exact_binomials():
    for n in range(11):
        top = 1 << n
        for m in range(top + 1):
            assert binomial_parity(top, m) == math.comb(top, m) % 2
            if 0 < m < top:
                assert binomial_parity(top, m) == 0
        for m in range(top):
            assert binomial_parity(top - 1, m) == math.comb(top - 1, m) % 2 == 1


def test_lucas_parity_general_agreement():
    for n in range(130):
        for m in range(n + 1):
            assert binomial_parity(n, m) == math.comb(n, m) % 2
    assert binomial_parity(5, -1) == 0
    assert binomial_parity(5, 6) == 0
