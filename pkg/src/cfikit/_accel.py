"""Hot kernels: bit-packed GF(2) algebra and union-find orbit closure.

Each kernel has a numba @njit implementation and a pure-numpy fallback.
Set CFIKIT_NO_NUMBA=1 to force the fallback path (used by the benchmark
and as a safety hatch on platforms without numba).
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("CFIKIT_NO_NUMBA", "") != "1"
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:
        USE_NUMBA = False

WORD = 64


def n_words(n_cols: int) -> int:
    return (n_cols + WORD - 1) // WORD


def pack_rows(dense: np.ndarray) -> np.ndarray:
    """Pack a 0/1 matrix into uint64 words, little-endian within rows."""
    dense = np.asarray(dense, dtype=np.uint8)
    m, n = dense.shape
    w = n_words(n)
    padded = np.zeros((m, w * WORD), dtype=np.uint8)
    padded[:, :n] = dense
    bits = padded.reshape(m, w, 8, 8)
    bytes_ = np.packbits(bits, axis=-1, bitorder="little").reshape(m, w * 8)
    return bytes_.view(np.uint64).reshape(m, w)


def unpack_rows(packed: np.ndarray, n_cols: int) -> np.ndarray:
    """Inverse of pack_rows."""
    m, w = packed.shape
    bytes_ = packed.reshape(m, w, 1).view(np.uint8).reshape(m, w * 8)
    bits = np.unpackbits(bytes_, axis=-1, bitorder="little")
    return bits[:, :n_cols].astype(np.uint8)


def _gf2_mul_py(a: np.ndarray, n_inner: int, b: np.ndarray) -> np.ndarray:
    m = a.shape[0]
    out = np.zeros((m, b.shape[1]), dtype=np.uint64)
    for i in range(m):
        row = a[i]
        for w in range(a.shape[1]):
            word = int(row[w])
            while word:
                bit = word & -word
                j = w * WORD + bit.bit_length() - 1
                if j < n_inner:
                    out[i] ^= b[j]
                word ^= bit
    return out


def _gf2_rank_py(rows: np.ndarray, n_cols: int) -> int:
    work = rows.copy()
    m = work.shape[0]
    rank = 0
    for col in range(n_cols):
        w, bit = col // WORD, np.uint64(1 << (col % WORD))
        pivot = -1
        for r in range(rank, m):
            if work[r, w] & bit:
                pivot = r
                break
        if pivot < 0:
            continue
        work[[rank, pivot]] = work[[pivot, rank]]
        hits = (work[:, w] & bit).astype(bool)
        hits[rank] = False
        work[hits] ^= work[rank]
        rank += 1
        if rank == m:
            break
    return rank


def _orbit_labels_py(perms: np.ndarray, n: int) -> np.ndarray:
    # min-label propagation; converges in orbit-diameter iterations
    labels = np.arange(n, dtype=np.int64)
    while True:
        changed = False
        for p in perms:
            np.minimum.at(labels, p, labels)
            nxt = labels[p]
            if (nxt < labels).any():
                labels = np.minimum(labels, nxt)
                changed = True
        # propagate within discovered classes
        stable = labels[labels]
        if (stable < labels).any():
            labels = stable
            changed = True
        if not changed:
            break
    # normalize to root labels
    while True:
        nxt = labels[labels]
        if (nxt == labels).all():
            break
        labels = nxt
    return labels


if USE_NUMBA:

    @njit(cache=True)
    def _gf2_mul_nb(a, n_inner, b):  # pragma: no cover - compiled
        m = a.shape[0]
        wb = b.shape[1]
        out = np.zeros((m, wb), dtype=np.uint64)
        one = np.uint64(1)
        for i in range(m):
            for w in range(a.shape[1]):
                word = a[i, w]
                if word == np.uint64(0):
                    continue
                base = w * 64
                for bit in range(64):
                    if (word >> np.uint64(bit)) & one:
                        j = base + bit
                        if j < n_inner:
                            for c in range(wb):
                                out[i, c] ^= b[j, c]
        return out

    @njit(cache=True)
    def _gf2_rank_nb(rows, n_cols):  # pragma: no cover - compiled
        work = rows.copy()
        m, w_total = work.shape
        rank = 0
        for col in range(n_cols):
            w = col // 64
            bit = np.uint64(1) << np.uint64(col % 64)
            pivot = -1
            for r in range(rank, m):
                if work[r, w] & bit:
                    pivot = r
                    break
            if pivot < 0:
                continue
            for c in range(w_total):
                tmp = work[rank, c]
                work[rank, c] = work[pivot, c]
                work[pivot, c] = tmp
            for r in range(m):
                if r != rank and (work[r, w] & bit):
                    for c in range(w_total):
                        work[r, c] ^= work[rank, c]
            rank += 1
            if rank == m:
                break
        return rank

    @njit(cache=True)
    def _orbit_labels_nb(perms, n):  # pragma: no cover - compiled
        parent = np.arange(n, dtype=np.int64)
        for g in range(perms.shape[0]):
            for i in range(n):
                a = i
                while parent[a] != a:
                    parent[a] = parent[parent[a]]
                    a = parent[a]
                b = perms[g, i]
                while parent[b] != b:
                    parent[b] = parent[parent[b]]
                    b = parent[b]
                if a != b:
                    if a < b:
                        parent[b] = a
                    else:
                        parent[a] = b
        for i in range(n):
            a = i
            while parent[a] != a:
                a = parent[a]
            parent[i] = a
        return parent

    def gf2_mul(a, n_inner, b):
        return _gf2_mul_nb(np.ascontiguousarray(a), n_inner, np.ascontiguousarray(b))

    def gf2_rank(rows, n_cols):
        if rows.shape[0] == 0 or n_cols == 0:
            return 0
        return int(_gf2_rank_nb(np.ascontiguousarray(rows), n_cols))

    def orbit_labels(perms, n):
        if len(perms) == 0:
            return np.arange(n, dtype=np.int64)
        return _orbit_labels_nb(np.ascontiguousarray(perms, dtype=np.int64), n)

else:

    def gf2_mul(a, n_inner, b):
        return _gf2_mul_py(a, n_inner, b)

    def gf2_rank(rows, n_cols):
        if rows.shape[0] == 0 or n_cols == 0:
            return 0
        return _gf2_rank_py(rows, n_cols)

    def orbit_labels(perms, n):
        if len(perms) == 0:
            return np.arange(n, dtype=np.int64)
        return _orbit_labels_py(np.asarray(perms, dtype=np.int64), n)


__all__ = [
    "USE_NUMBA",
    "WORD",
    "n_words",
    "pack_rows",
    "unpack_rows",
    "gf2_mul",
    "gf2_rank",
    "orbit_labels",
]
