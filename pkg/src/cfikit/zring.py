"""Linear algebra over Z_{2^q}: valuation-pivoted elimination and Howell form.

Z_{2^q} is not a field, so elimination pivots on the entry of minimal 2-adic
valuation in the remaining submatrix (full pivoting). That guarantees every
entry to the right of a pivot has valuation at least the pivot's, which makes
greedy back-substitution complete: a system is solvable iff the greedy pass
succeeds.
"""

from __future__ import annotations

from typing import List, Optional, Sequence


def val2(c: int, q: int) -> int:
    """2-adic valuation of c mod 2^q (q for zero)."""
    c %= 1 << q
    if c == 0:
        return q
    v = 0
    while c % 2 == 0:
        c //= 2
        v += 1
    return v


def inv_unit(u: int, q: int) -> int:
    """Inverse of an odd residue mod 2^q."""
    mod = 1 << q
    u %= mod
    if u % 2 == 0:
        raise ValueError(f"{u} is not a unit mod 2^{q}")
    return pow(u, -1, mod)


def solve(matrix: Sequence[Sequence[int]], rhs: Sequence[int], q: int) -> Optional[List[int]]:
    """One solution of A x = b over Z_{2^q}, or None if none exists."""
    mod = 1 << q
    n_rows = len(matrix)
    if n_rows == 0:
        return []
    n_cols = len(matrix[0])
    a = [[int(c) % mod for c in row] for row in matrix]
    b = [int(c) % mod for c in rhs]

    free = list(range(n_cols))
    pivots = []  # (row, col, valuation), in elimination order
    r = 0
    while r < n_rows and free:
        best = None
        best_v = q
        for i in range(r, n_rows):
            for col in free:
                v = val2(a[i][col], q)
                if v < best_v:
                    best, best_v = (i, col), v
                    if v == 0:
                        break
            if best_v == 0:
                break
        if best is None:
            break
        i, col = best
        a[r], a[i] = a[i], a[r]
        b[r], b[i] = b[i], b[r]
        uinv = inv_unit(a[r][col] >> best_v, q)
        a[r] = [(x * uinv) % mod for x in a[r]]
        b[r] = (b[r] * uinv) % mod
        for i in range(r + 1, n_rows):
            c = a[i][col]
            if c == 0:
                continue
            factor = (c >> best_v) % mod
            a[i] = [(x - factor * y) % mod for x, y in zip(a[i], a[r])]
            b[i] = (b[i] - factor * b[r]) % mod
        pivots.append((r, col, best_v))
        free.remove(col)
        r += 1

    for i in range(r, n_rows):
        if b[i] % mod:
            return None

    x = [0] * n_cols
    for row, col, v in reversed(pivots):
        resid = b[row]
        for j in range(n_cols):
            if j != col and x[j]:
                resid = (resid - a[row][j] * x[j]) % mod
        if val2(resid, q) < v:
            return None
        x[col] = (resid >> v) % mod

    for row, target in zip(matrix, rhs):
        acc = 0
        for c, xi in zip(row, x):
            acc += int(c) * xi
        if (acc - int(target)) % mod:
            raise AssertionError("solver produced a non-solution")
    return x


def span_contains(rows: Sequence[Sequence[int]], target: Sequence[int], q: int) -> bool:
    """Whether target lies in the Z_{2^q}-span of rows (membership test)."""
    rows = [list(r) for r in rows]
    t = [int(c) for c in target]
    if not rows:
        return not any(c % (1 << q) for c in t)
    # coefficients lam with lam . rows = target <=> transpose system
    transposed = [[rows[i][j] for i in range(len(rows))] for j in range(len(rows[0]))]
    return solve(transposed, t, q) is not None


def howell_form(rows: Sequence[Sequence[int]], q: int) -> List[List[int]]:
    """Canonical generating set of the row span over Z_{2^q}.

    Triangularize with unit-normalized minimal-valuation pivots per column,
    add annihilator multiples of non-unit pivot rows, and reduce entries
    above each pivot modulo the pivot value.
    """
    mod = 1 << q
    work = [[int(c) % mod for c in row] for row in rows]
    work = [row for row in work if any(row)]
    if not work:
        return []
    n_cols = len(work[0])

    queue = list(work)
    basis = {}  # pivot col -> row
    while queue:
        row = queue.pop()
        while True:
            lead = next((j for j, c in enumerate(row) if c), None)
            if lead is None:
                break
            v = val2(row[lead], q)
            if lead not in basis:
                uinv = inv_unit(row[lead] >> v, q)
                row = [(x * uinv) % mod for x in row]
                basis[lead] = row
                if v > 0:
                    ann = [(x << (q - v)) % mod for x in row]
                    if any(ann):
                        queue.append(ann)
                break
            other = basis[lead]
            ov = val2(other[lead], q)
            if v < ov:
                # swap in the lower-valuation row
                uinv = inv_unit(row[lead] >> v, q)
                row = [(x * uinv) % mod for x in row]
                basis[lead] = row
                if v > 0:
                    ann = [(x << (q - v)) % mod for x in row]
                    if any(ann):
                        queue.append(ann)
                queue.append(other)
                break
            factor = (row[lead] >> ov) % mod
            row = [(x - factor * y) % mod for x, y in zip(row, other)]

    cols = sorted(basis)
    result = [basis[c] for c in cols]
    # Reduce above-pivot entries modulo the pivot value, sweeping pivots
    # left to right: subtracting pivot row idx only touches columns at or
    # after cols[idx], so later passes clean up anything reintroduced.
    for idx in range(len(cols)):
        col = cols[idx]
        pval = 1 << val2(result[idx][col], q)
        for i in range(idx):
            factor = result[i][col] // pval
            if factor:
                result[i] = [
                    (x - factor * y) % mod for x, y in zip(result[i], result[idx])
                ]
    return result


__all__ = ["val2", "inv_unit", "solve", "span_contains", "howell_form"]
