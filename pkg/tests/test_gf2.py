"""Block matrices over GF(2) and the invertibility predicates."""

import random

import numpy as np
import pytest

from cfikit.basegraph import catalog_graph
from cfikit.cfi import TwistFunction, build_cfi
from cfikit.gf2 import BlockMatrix, Gf2Error, char_matrix, matrix_predicates, split_code
from cfikit.orbits import orbit_partition, type_bijection


def _structure(name, q):
    base = catalog_graph(name)
    return build_cfi(base, q, TwistFunction.zero(base, q))


def _pair_classes(s, parts2, block_codes):
    """Label each (u, v) pair inside a 1-orbit block by its 2-orbit."""
    size = s.size
    u = np.repeat(block_codes, len(block_codes))
    v = np.tile(block_codes, len(block_codes))
    labels = parts2.block_of[u * size + v]
    return labels.reshape(len(block_codes), len(block_codes))


def _random_invariant_matrix(s, parts1, parts2, rng):
    """A random matrix satisfying all three predicates.

    Each diagonal block is a union of simultaneous-action pair orbits; the
    diagonal pair orbit is toggled to force odd row weight.
    """
    bm = BlockMatrix.zeros(parts1, parts1)
    for b in range(len(parts1.blocks)):
        codes = parts1.blocks[b]
        labels = _pair_classes(s, parts2, codes)
        classes = sorted(set(labels.ravel().tolist()))
        chosen = {c for c in classes if rng.random() < 0.5}
        dense = np.isin(labels, sorted(chosen)).astype(np.uint8)
        if int(dense[0].sum()) % 2 == 0:
            diag_class = int(labels[0, 0])
            chosen ^= {diag_class}
            dense = np.isin(labels, sorted(chosen)).astype(np.uint8)
        bm.set_block_dense(b, b, dense)
    return bm


@pytest.mark.parametrize("name,q,count", [("K4", 2, 150), ("Q4", 2, 50)])
def test_predicate_matrices_are_invertible(name, q, count):
    s = _structure(name, q)
    parts1 = orbit_partition(s, [], 1)
    parts2 = orbit_partition(s, [], 2)
    rng = random.Random(f"inv-{name}-{q}")
    for i in range(count):
        bm = _random_invariant_matrix(s, parts1, parts2, rng)
        report = matrix_predicates(bm)
        assert report.all_hold, report.details
        assert bm.is_invertible(guard=1 << 22)


@pytest.mark.parametrize("name,q,count", [("K4", 2, 150), ("Q4", 2, 50)])
def test_even_row_perturbations_are_singular(name, q, count):
    s = _structure(name, q)
    parts1 = orbit_partition(s, [], 1)
    parts2 = orbit_partition(s, [], 2)
    rng = random.Random(f"even-{name}-{q}")
    for i in range(count):
        bm = _random_invariant_matrix(s, parts1, parts2, rng)
        # Toggle the diagonal pair orbit of one block: row weights turn
        # even there, so the all-ones vector drops into the kernel.
        b = rng.randrange(len(parts1.blocks))
        codes = parts1.blocks[b]
        labels = _pair_classes(s, parts2, codes)
        dense = bm.dense_block(b, b).copy()
        dense ^= (labels == labels[0, 0]).astype(np.uint8)
        bm.set_block_dense(b, b, dense)
        report = matrix_predicates(bm)
        assert not report.odd_filled
        assert not bm.is_invertible(guard=1 << 22)


def test_identity_matrix_properties():
    s = _structure("K4", 1)
    parts1 = orbit_partition(s, [], 1)
    ident = BlockMatrix.identity(parts1, parts1)
    assert matrix_predicates(ident).all_hold
    assert ident.is_invertible()
    assert ident.rank() == s.size
    assert ident.entry(3, 3) == 1 and ident.entry(3, 4) == 0


def test_multiply_matches_dense():
    s = _structure("K4", 2)
    parts1 = orbit_partition(s, [], 1)
    parts2 = orbit_partition(s, [], 2)
    rng = random.Random(77)
    a = _random_invariant_matrix(s, parts1, parts2, rng)
    b = _random_invariant_matrix(s, parts1, parts2, rng)
    prod = a.multiply(b)
    expected = (a.to_dense().astype(int) @ b.to_dense().astype(int)) % 2
    assert np.array_equal(prod.to_dense(), expected.astype(np.uint8))
    assert prod.first_mismatch(prod) is None
    assert a.first_mismatch(b) is not None


def test_rank_matches_numpy_gaussian():
    s = _structure("K4", 1)
    parts1 = orbit_partition(s, [], 1)
    rng = random.Random(5)
    for _ in range(10):
        bm = BlockMatrix.zeros(parts1, parts1)
        for b in range(len(parts1.blocks)):
            n = len(parts1.blocks[b])
            dense = np.array(
                [[rng.randrange(2) for _ in range(n)] for _ in range(n)],
                dtype=np.uint8,
            )
            bm.set_block_dense(b, b, dense)
        full = bm.to_dense().astype(np.uint8)
        # Plain GF(2) elimination as the independent route.
        m = full.copy()
        rank = 0
        for col in range(m.shape[1]):
            pivot = next((r for r in range(rank, m.shape[0]) if m[r, col]), None)
            if pivot is None:
                continue
            m[[rank, pivot]] = m[[pivot, rank]]
            for r in range(m.shape[0]):
                if r != rank and m[r, col]:
                    m[r] ^= m[rank]
            rank += 1
        assert bm.rank() == rank
        assert bm.is_invertible() == (rank == s.size)


def test_row_and_col_weights():
    s = _structure("K4", 1)
    parts1 = orbit_partition(s, [], 1)
    ident = BlockMatrix.identity(parts1, parts1)
    assert np.array_equal(ident.row_weights(), np.ones(s.size, dtype=np.int64))
    assert np.array_equal(ident.col_weights(), np.ones(s.size, dtype=np.int64))


def test_text_roundtrip():
    s = _structure("K4", 2)
    parts1 = orbit_partition(s, [], 1)
    parts2 = orbit_partition(s, [], 2)
    bm = _random_invariant_matrix(s, parts1, parts2, random.Random(1))
    text = bm.to_text()
    assert text.startswith("cfikit-matrix")
    back = BlockMatrix.from_text(text, parts1, parts1)
    assert back.first_mismatch(bm) is None
    assert back.to_text() == text


def test_from_text_rejects_garbage():
    s = _structure("K4", 1)
    parts1 = orbit_partition(s, [], 1)
    with pytest.raises(Gf2Error):
        BlockMatrix.from_text("not a matrix header\n", parts1, parts1)


def test_char_matrix_partition_indicators():
    s = _structure("K4", 1)
    parts1 = orbit_partition(s, [], 1)
    parts2 = orbit_partition(s, [], 2)
    pair_codes = [u * s.size + v for u in range(4) for v in range(4, 8)]
    chi = char_matrix(parts1, parts1, pair_codes)
    dense = chi.to_dense()
    expected = np.zeros((s.size, s.size), dtype=np.uint8)
    for code in pair_codes:
        u, v = split_code(code, s.size, 1)
        expected[u, v] = 1
    assert np.array_equal(dense, expected)


def test_split_code():
    assert split_code(3 * 7 + 5, 7, 1) == (3, 5)
    assert split_code(2 * 49 + 11, 7, 2) == (2, 11)
