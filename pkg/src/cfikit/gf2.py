"""Bit-packed F2 matrices indexed by k-tuples and blocked by orbits.

A BlockMatrix stores only its nonzero orbit-pair blocks as packed 64-bit
rows. The three combinatorial predicates — orbit-diagonal (nonzero blocks
sit exactly on same-type orbit pairs), orbit-invariant (every automorphism
generator fixes each block), and odd-filled (every global row has odd
weight) — jointly force invertibility, and all three survive matrix
products. verify_blur checks the commutation of S with the characteristic
matrices of all same-type 2k-orbit pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._accel import gf2_mul, gf2_rank, n_words, pack_rows, unpack_rows
from .orbits import OrbitPartition, OrbitError, type_bijection, _tuple_permutation

DENSE_GUARD = 1 << 16


class Gf2Error(ValueError):
    """Invalid matrix operation."""


def split_code(code: int, size: int, k: int) -> Tuple[int, int]:
    """Split an encoded 2k-tuple into its two k-tuple halves."""
    return divmod(code, size ** k)


class BlockMatrix:
    """An A^k x B^k matrix over F2, stored per orbit-pair block."""

    def __init__(self, row_parts: OrbitPartition, col_parts: OrbitPartition):
        if row_parts.k != col_parts.k:
            raise Gf2Error("row and column partitions have different arity")
        self.row_parts = row_parts
        self.col_parts = col_parts
        self.k = row_parts.k
        self.n_rows = row_parts.structure.size ** self.k
        self.n_cols = col_parts.structure.size ** self.k
        self.blocks: Dict[Tuple[int, int], np.ndarray] = {}

    # -- construction -----------------------------------------------------

    @classmethod
    def zeros(cls, row_parts, col_parts) -> "BlockMatrix":
        return cls(row_parts, col_parts)

    @classmethod
    def identity(cls, row_parts, col_parts) -> "BlockMatrix":
        m = cls(row_parts, col_parts)
        for rb, codes in enumerate(row_parts.blocks):
            cbs = col_parts.block_of[codes]
            for cb in np.unique(cbs):
                ccodes = col_parts.blocks[cb]
                dense = np.zeros((len(codes), len(ccodes)), dtype=np.uint8)
                sel = np.flatnonzero(cbs == cb)
                dense[sel, np.searchsorted(ccodes, codes[sel])] = 1
                m.blocks[(rb, int(cb))] = pack_rows(dense)
        return m

    def set_block_dense(self, rb: int, cb: int, dense: np.ndarray):
        want = (len(self.row_parts.blocks[rb]), len(self.col_parts.blocks[cb]))
        if dense.shape != want:
            raise Gf2Error(f"block shape {dense.shape} does not match {want}")
        if dense.any():
            self.blocks[(rb, cb)] = pack_rows(dense)
        else:
            self.blocks.pop((rb, cb), None)

    def dense_block(self, rb: int, cb: int) -> np.ndarray:
        n = len(self.col_parts.blocks[cb])
        if (rb, cb) in self.blocks:
            return unpack_rows(self.blocks[(rb, cb)], n)
        return np.zeros((len(self.row_parts.blocks[rb]), n), dtype=np.uint8)

    def entry(self, u_code: int, v_code: int) -> int:
        rb = int(self.row_parts.block_of[u_code])
        cb = int(self.col_parts.block_of[v_code])
        if (rb, cb) not in self.blocks:
            return 0
        i = int(np.searchsorted(self.row_parts.blocks[rb], u_code))
        j = int(np.searchsorted(self.col_parts.blocks[cb], v_code))
        word = self.blocks[(rb, cb)][i, j // 64]
        return int((word >> np.uint64(j % 64)) & np.uint64(1))

    def prune(self):
        for key in [k for k, v in self.blocks.items() if not v.any()]:
            del self.blocks[key]

    # -- algebra ----------------------------------------------------------

    def multiply(self, other: "BlockMatrix") -> "BlockMatrix":
        if not np.array_equal(self.col_parts.block_of, other.row_parts.block_of):
            raise Gf2Error("inner index partitions do not match")
        out = BlockMatrix(self.row_parts, other.col_parts)
        by_inner: Dict[int, List[Tuple[int, np.ndarray]]] = {}
        for (ib, cb), blk in other.blocks.items():
            by_inner.setdefault(ib, []).append((cb, blk))
        for (rb, ib), left in self.blocks.items():
            for cb, right in by_inner.get(ib, []):
                inner = len(self.col_parts.blocks[ib])
                prod = gf2_mul(left, inner, right)
                key = (rb, cb)
                if key in out.blocks:
                    out.blocks[key] = out.blocks[key] ^ prod
                else:
                    out.blocks[key] = prod
        out.prune()
        return out

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BlockMatrix)
            and self.first_mismatch(other) is None
        )

    def first_mismatch(self, other: "BlockMatrix") -> Optional[Tuple[int, int]]:
        """Lexicographically first (row code, col code) where entries differ."""
        keys = sorted(set(self.blocks) | set(other.blocks))
        best = None
        for rb, cb in keys:
            a = self.dense_block(rb, cb)
            b = other.dense_block(rb, cb)
            diff = np.argwhere(a != b)
            if len(diff) == 0:
                continue
            rcodes = self.row_parts.blocks[rb]
            ccodes = self.col_parts.blocks[cb]
            cand = min((int(rcodes[i]), int(ccodes[j])) for i, j in diff)
            if best is None or cand < best:
                best = cand
        return best

    def to_dense(self, guard: int = DENSE_GUARD) -> np.ndarray:
        if self.n_rows > guard or self.n_cols > guard:
            raise Gf2Error("matrix too large for dense assembly")
        dense = np.zeros((self.n_rows, self.n_cols), dtype=np.uint8)
        for (rb, cb), _ in self.blocks.items():
            block = self.dense_block(rb, cb)
            rows = self.row_parts.blocks[rb]
            cols = self.col_parts.blocks[cb]
            dense[np.ix_(rows, cols)] = block
        return dense

    def rank(self, guard: int = DENSE_GUARD) -> int:
        dense = self.to_dense(guard)
        return gf2_rank(pack_rows(dense), self.n_cols)

    def is_invertible(self, guard: int = DENSE_GUARD) -> bool:
        if self.n_rows != self.n_cols:
            return False
        if self.n_rows <= guard:
            return self.rank(guard) == self.n_rows
        # block-diagonal route for matrices too large to assemble
        row_seen, col_seen = set(), set()
        for rb, cb in self.blocks:
            if rb in row_seen or cb in col_seen:
                raise Gf2Error("matrix too large and not block-diagonal")
            row_seen.add(rb)
            col_seen.add(cb)
        if len(row_seen) != len(self.row_parts.blocks):
            return False
        for (rb, cb), blk in self.blocks.items():
            nc = len(self.col_parts.blocks[cb])
            if len(self.row_parts.blocks[rb]) != nc:
                return False
            if gf2_rank(blk, nc) != nc:
                return False
        return True

    def row_weights(self) -> np.ndarray:
        weights = np.zeros(self.n_rows, dtype=np.int64)
        for (rb, cb), blk in self.blocks.items():
            rows = self.row_parts.blocks[rb]
            counts = self.dense_block(rb, cb).sum(axis=1, dtype=np.int64)
            weights[rows] += counts
        return weights

    def col_weights(self) -> np.ndarray:
        weights = np.zeros(self.n_cols, dtype=np.int64)
        for (rb, cb), blk in self.blocks.items():
            cols = self.col_parts.blocks[cb]
            weights[cols] += self.dense_block(rb, cb).sum(axis=0, dtype=np.int64)
        return weights

    # -- exchange format --------------------------------------------------

    def to_text(self) -> str:
        lines = [
            f"cfikit-matrix k={self.k} rows={self.n_rows} cols={self.n_cols}"
        ]
        for rb, cb in sorted(self.blocks):
            rcodes = self.row_parts.blocks[rb]
            ccodes = self.col_parts.blocks[cb]
            lines.append(f"block {rb} {cb}")
            lines.append("rowindex " + " ".join(str(int(c)) for c in rcodes))
            lines.append("colindex " + " ".join(str(int(c)) for c in ccodes))
            dense = self.dense_block(rb, cb)
            width = (len(ccodes) + 3) // 4
            for row in dense:
                bits = int("".join(str(b) for b in row[::-1]), 2) if len(row) else 0
                lines.append(format(bits, f"0{max(width, 1)}x"))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, row_parts: OrbitPartition,
                  col_parts: OrbitPartition) -> "BlockMatrix":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("cfikit-matrix"):
            raise Gf2Error("not a matrix document")
        header = dict(tok.split("=") for tok in lines[0].split()[1:])
        m = cls(row_parts, col_parts)
        if int(header["rows"]) != m.n_rows or int(header["cols"]) != m.n_cols:
            raise Gf2Error("matrix dimensions do not match the partitions")
        i = 1
        while i < len(lines):
            if not lines[i].startswith("block "):
                raise Gf2Error(f"expected block header, got {lines[i]!r}")
            _, rb, cb = lines[i].split()
            rb, cb = int(rb), int(cb)
            rcodes = [int(t) for t in lines[i + 1].split()[1:]]
            ccodes = [int(t) for t in lines[i + 2].split()[1:]]
            if rcodes != [int(c) for c in row_parts.blocks[rb]]:
                raise Gf2Error(f"row index of block {rb} does not match")
            if ccodes != [int(c) for c in col_parts.blocks[cb]]:
                raise Gf2Error(f"column index of block {cb} does not match")
            i += 3
            dense = np.zeros((len(rcodes), len(ccodes)), dtype=np.uint8)
            for r in range(len(rcodes)):
                bits = int(lines[i + r], 16)
                for c in range(len(ccodes)):
                    dense[r, c] = (bits >> c) & 1
            i += len(rcodes)
            m.set_block_dense(rb, cb, dense)
        return m


def char_matrix(parts_k_row: OrbitPartition, parts_k_col: OrbitPartition,
                pair_codes: Sequence[int]) -> BlockMatrix:
    """Characteristic matrix of a set of 2k-tuples, split into k-tuple pairs."""
    size = parts_k_row.structure.size
    k = parts_k_row.k
    m = BlockMatrix(parts_k_row, parts_k_col)
    grouped: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
    for code in pair_codes:
        u, v = split_code(int(code), size, k)
        rb = int(parts_k_row.block_of[u])
        cb = int(parts_k_col.block_of[v])
        grouped.setdefault((rb, cb), []).append((u, v))
    for (rb, cb), pairs in grouped.items():
        rcodes = parts_k_row.blocks[rb]
        ccodes = parts_k_col.blocks[cb]
        dense = np.zeros((len(rcodes), len(ccodes)), dtype=np.uint8)
        for u, v in pairs:
            dense[np.searchsorted(rcodes, u), np.searchsorted(ccodes, v)] = 1
        m.set_block_dense(rb, cb, dense)
    return m


@dataclass
class PredicateReport:
    orbit_diagonal: bool
    orbit_invariant: bool
    odd_filled: bool
    details: dict

    @property
    def all_hold(self) -> bool:
        return self.orbit_diagonal and self.orbit_invariant and self.odd_filled


def matrix_predicates(s: BlockMatrix) -> PredicateReport:
    """Exhaustively check the three invertibility predicates."""
    details: dict = {}
    row_parts, col_parts = s.row_parts, s.col_parts

    try:
        type_map = type_bijection(row_parts, col_parts)
    except OrbitError as exc:
        return PredicateReport(False, False, False, {"type_map": str(exc)})

    diagonal = True
    for (rb, cb) in s.blocks:
        if type_map[rb] != cb:
            diagonal = False
            details["off_diagonal_block"] = (rb, cb)
            break
    if diagonal:
        missing = [rb for rb in type_map if (rb, type_map[rb]) not in s.blocks]
        if missing:
            diagonal = False
            details["zero_diagonal_block"] = missing[0]

    invariant = True
    size = row_parts.structure.size
    gens = row_parts.basis.generators()
    tperms = [
        _tuple_permutation(g.as_permutation(row_parts.structure), size, s.k)
        for g in gens
    ]
    for (rb, cb), _ in sorted(s.blocks.items()):
        rcodes = row_parts.blocks[rb]
        ccodes = col_parts.blocks[cb]
        dense = s.dense_block(rb, cb)
        for gi, tperm in enumerate(tperms):
            ri = np.searchsorted(rcodes, tperm[rcodes])
            ci = np.searchsorted(ccodes, tperm[ccodes])
            if not np.array_equal(dense[np.ix_(ri, ci)], dense):
                invariant = False
                details["variant_block"] = (rb, cb, gi)
                break
        if not invariant:
            break

    weights = s.row_weights()
    odd = bool((weights % 2 == 1).all())
    if not odd:
        details["even_row"] = int(np.flatnonzero(weights % 2 == 0)[0])

    return PredicateReport(diagonal, invariant, odd, details)


@dataclass
class BlurReport:
    ok: bool
    invertible: bool
    witness: Optional[tuple]  # (orbit pair index, row code, col code)

    def __bool__(self) -> bool:
        return self.ok


def verify_blur(s: BlockMatrix, parts_2k_a: OrbitPartition,
                parts_2k_b: OrbitPartition, type_map: Optional[dict] = None,
                check_invertible: bool = True) -> BlurReport:
    """Whether s k-blurs the twist for the given 2k-orbit partitions."""
    if parts_2k_a.k != 2 * s.k or parts_2k_b.k != 2 * s.k:
        raise Gf2Error("need 2k-orbit partitions")
    if type_map is None:
        type_map = type_bijection(parts_2k_a, parts_2k_b)
    invertible = s.is_invertible() if check_invertible else True
    if check_invertible and not invertible:
        return BlurReport(False, False, None)
    for p_idx in range(len(parts_2k_a)):
        q_idx = type_map[p_idx]
        chi_p = char_matrix(s.row_parts, s.row_parts, parts_2k_a.blocks[p_idx])
        chi_q = char_matrix(s.col_parts, s.col_parts, parts_2k_b.blocks[q_idx])
        left = chi_p.multiply(s)
        right = s.multiply(chi_q)
        witness = left.first_mismatch(right)
        if witness is not None:
            return BlurReport(False, invertible, (p_idx,) + witness)
    return BlurReport(True, invertible, None)


__all__ = [
    "DENSE_GUARD",
    "Gf2Error",
    "BlockMatrix",
    "char_matrix",
    "PredicateReport",
    "matrix_predicates",
    "BlurReport",
    "verify_blur",
    "split_code",
]
