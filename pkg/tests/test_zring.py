"""Linear algebra over the ring of integers mod 2**q."""

import itertools
import random

import pytest

from cfikit.zring import howell_form, inv_unit, solve, span_contains, val2


def test_val2_basics():
    # [TRIVIAL] 2-adic valuation of small residues.
    assert val2(0, 3) == 3
    assert val2(1, 3) == 0
    assert val2(2, 3) == 1
    assert val2(4, 3) == 2
    assert val2(6, 3) == 1
    assert val2(8, 3) == 3  # reduced to 0 mod 8


def test_inv_unit_is_inverse():
    for q in (1, 2, 3, 5):
        mod = 1 << q
        for u in range(1, mod, 2):
            assert (inv_unit(u, q) * u) % mod == 1


def test_inv_unit_rejects_even():
    with pytest.raises(Exception):
        inv_unit(2, 3)


def _brute_solvable(matrix, rhs, q):
    # [DERIVED] exhaustive search over all assignments (tiny systems only).
    mod = 1 << q
    cols = len(matrix[0]) if matrix else 0
    for vec in itertools.product(range(mod), repeat=cols):
        if all(
            sum(a * x for a, x in zip(row, vec)) % mod == b % mod
            for row, b in zip(matrix, rhs)
        ):
            return True
    return False


def test_solve_matches_brute_force():
    rng = random.Random(20240823)
    for q in (1, 2, 3):
        mod = 1 << q
        for _ in range(60):
            rows = rng.randrange(1, 4)
            cols = rng.randrange(1, 4)
            matrix = [[rng.randrange(mod) for _ in range(cols)] for _ in range(rows)]
            rhs = [rng.randrange(mod) for _ in range(rows)]
            sol = solve(matrix, rhs, q)
            expected = _brute_solvable(matrix, rhs, q)
            assert (sol is not None) == expected
            if sol is not None:
                for row, b in zip(matrix, rhs):
                    assert sum(a * x for a, x in zip(row, sol)) % mod == b % mod


def test_solve_zero_divisor_system():
    # 2x = 2 has a solution mod 4; 2x = 1 does not.
    assert solve([[2]], [2], 2) is not None
    assert solve([[2]], [1], 2) is None


def test_span_contains_consistency():
    rng = random.Random(7)
    q = 3
    mod = 1 << q
    for _ in range(40):
        rows = [[rng.randrange(mod) for _ in range(3)] for _ in range(rng.randrange(1, 4))]
        # A random combination of the rows is always in the span.
        coeffs = [rng.randrange(mod) for _ in rows]
        combo = [
            sum(c * row[j] for c, row in zip(coeffs, rows)) % mod for j in range(3)
        ]
        assert span_contains(rows, combo, q)
        # Membership must agree with transposed solvability.
        target = [rng.randrange(mod) for _ in range(3)]
        transposed = [[row[j] for row in rows] for j in range(3)]
        assert span_contains(rows, target, q) == (solve(transposed, target, q) is not None)


def test_howell_form_canonical_for_equal_spans():
    rng = random.Random(99)
    q = 3
    mod = 1 << q
    for _ in range(25):
        rows = [[rng.randrange(mod) for _ in range(3)] for _ in range(3)]
        base = howell_form(rows, q)
        # Row-scrambled and unit-scaled generating sets give the same form.
        scrambled = [row[:] for row in rows]
        rng.shuffle(scrambled)
        unit = rng.choice([1, 3, 5, 7])
        scrambled[0] = [(unit * v) % mod for v in scrambled[0]]
        scrambled.append(
            [
                (scrambled[0][j] + scrambled[-1][j]) % mod
                for j in range(3)
            ]
        )
        assert howell_form(scrambled, q) == base


def test_howell_form_spans_input_rows():
    rng = random.Random(5)
    q = 2
    mod = 1 << q
    for _ in range(25):
        rows = [[rng.randrange(mod) for _ in range(3)] for _ in range(2)]
        form = howell_form(rows, q)
        for row in rows:
            assert span_contains(form, row, q)
        for row in form:
            assert span_contains(rows, row, q)
