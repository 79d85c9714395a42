"""The executable similarity game with automated Duplicator and referee."""

import dataclasses

import pytest

from cfikit.basegraph import catalog_graph
from cfikit.blurer import BlurerError
from cfikit.cfi import TwistFunction, build_cfi
from cfikit.game import (
    GameError,
    duplicator_round,
    new_game,
    partial_isomorphism,
    play,
    spoiler_move,
    transcript_json,
    verify_round,
)
from cfikit.gf2 import BlockMatrix
from cfikit.orbits import orbit_partition


def _pair(q=2, theta=2, name="K4", edge=(0, 1)):
    base = catalog_graph(name)
    a = build_cfi(base, q, TwistFunction.zero(base, q))
    b = build_cfi(base, q, TwistFunction.zero(base, q).with_edge(*edge, theta))
    return a, b


def test_new_game_validation():
    a, b = _pair()
    with pytest.raises(GameError):
        new_game(a, b, 1, 1)  # m must be at least 2k
    state = new_game(a, b, 1, 2)
    assert state.round_no == 0 and state.outcome is None


def test_size_mismatch_is_immediate_spoiler_win():
    a, _ = _pair(q=2)
    c, _ = _pair(q=2, name="3-prism", edge=(0, 2))
    state = new_game(a, c, 1, 2)
    assert state.outcome == "spoiler-won-at-round-0"


def test_partial_isomorphism_positive_and_negative():
    a, b = _pair()
    assert partial_isomorphism(a, a, [(0, 0), (20, 20)])
    assert partial_isomorphism(a, a, [])
    # Mapping two distinct vertices onto one breaks bijectivity.
    assert not partial_isomorphism(a, a, [(0, 5), (1, 5)])
    # Changing the edge value between two mapped adjacent vertices fails.
    u0 = a.gadget_ids(0).start
    u1 = a.gadget_ids(1).start  # zero vector: edge value 0 towards u0
    v1 = a.vertex_id(1, (1, 0, a.mod - 1))  # edge value 1 towards u0
    assert a.edge_c(u0, u1) != a.edge_c(u0, v1)
    assert not partial_isomorphism(a, a, [(u0, u0), (u1, v1)])


def test_duplicator_round_passes_referee():
    a, b = _pair()
    state = new_game(a, b, 1, 2)
    proposal = duplicator_round(state)
    assert proposal.situation[0] == "twisted"
    ok, reason = verify_round(state, proposal)
    assert ok, reason


def test_referee_rejects_identity_matrix():
    # Between a genuinely twisted pair the identity is not a valid blur.
    a, b = _pair()
    state = new_game(a, b, 1, 2)
    proposal = duplicator_round(state)
    ident = BlockMatrix.identity(
        orbit_partition(a, (), 1), orbit_partition(b, (), 1)
    )
    tampered = dataclasses.replace(proposal, matrix=ident)
    ok, reason = verify_round(state, tampered)
    assert not ok and reason


def test_referee_rejects_wrong_block_map():
    a, b = _pair()
    state = new_game(a, b, 1, 2)
    proposal = duplicator_round(state)
    swapped = dict(proposal.block_map)
    keys = sorted(swapped)[:2]
    swapped[keys[0]], swapped[keys[1]] = swapped[keys[1]], swapped[keys[0]]
    tampered = dataclasses.replace(proposal, block_map=swapped)
    ok, reason = verify_round(state, tampered)
    assert not ok and reason


def test_spoiler_move_round_trip():
    a, b = _pair()
    state = new_game(a, b, 1, 2)
    proposal = duplicator_round(state)
    block = sorted(proposal.block_map)[0]
    u = int(proposal.parts_a.blocks[block][0])
    image = proposal.block_map[block]
    v = int(proposal.parts_b.blocks[image][0])
    new_state, verdict = spoiler_move(state, proposal, block, u, v)
    assert new_state.round_no == 1
    assert len(new_state.placed) <= state.m
    with pytest.raises(GameError):
        spoiler_move(state, proposal, block, u + 10 ** 9, v)


def test_random_spoiler_survival():
    a, b = _pair()
    for seed in (7, 11):
        state = new_game(a, b, 1, 2)
        result = play(state, "random", 20, seed=seed)
        assert result["outcome"] == "duplicator-survived-20"
        assert all(r["referee"] for r in result["rounds"])


def test_random_spoiler_requires_seed_stability():
    a, b = _pair()
    r1 = play(new_game(a, b, 1, 2), "random", 5, seed=3)
    r2 = play(new_game(a, b, 1, 2), "random", 5, seed=3)
    assert transcript_json(r1) == transcript_json(r2)


def test_exhaustive_spoiler_depth_one():
    a, b = _pair()
    state = new_game(a, b, 1, 2)
    result = play(state, "exhaustive", 1, depth=1)
    assert result["outcome"] == "duplicator-survived-1"


def test_isomorphic_pair_alignment():
    base = catalog_graph("K4")
    q = 2
    a = build_cfi(base, q, TwistFunction.zero(base, q))
    # Twist sum 0 mod 4: isomorphic, Duplicator plays an exact alignment.
    tw = TwistFunction.zero(base, q).with_edge(0, 1, 1).with_edge(2, 3, 3)
    b = build_cfi(base, q, tw)
    state = new_game(a, b, 1, 2)
    proposal = duplicator_round(state)
    assert proposal.situation == ("isomorphic",)
    ok, reason = verify_round(state, proposal)
    assert ok, reason
    result = play(new_game(a, b, 1, 2), "random", 10, seed=1)
    assert result["outcome"] == "duplicator-survived-10"


def test_char_matrix_ranks_agree_per_block():
    # Similar matrices have equal rank; spot-check the similarity pairs.
    from cfikit.gf2 import char_matrix

    a, b = _pair()
    state = new_game(a, b, 1, 2)
    proposal = duplicator_round(state)
    for block in sorted(proposal.block_map)[:5]:
        chi_p = char_matrix(
            proposal.matrix.row_parts,
            proposal.matrix.row_parts,
            proposal.parts_a.blocks[block],
        )
        chi_q = char_matrix(
            proposal.matrix.col_parts,
            proposal.matrix.col_parts,
            proposal.parts_b.blocks[proposal.block_map[block]],
        )
        assert chi_p.rank() == chi_q.rank()


def test_no_blurer_means_no_duplicator_strategy():
    # Over Z_2 no blurring family exists; the Duplicator cannot move.
    a, b = _pair(q=1, theta=1)
    state = new_game(a, b, 1, 2)
    with pytest.raises((BlurerError, GameError)):
        duplicator_round(state)


def test_scripted_policy_replays_moves():
    a, b = _pair()
    state = new_game(a, b, 1, 2)
    proposal = duplicator_round(state)
    block = sorted(proposal.block_map)[0]
    u = int(proposal.parts_a.blocks[block][0])
    v = int(proposal.parts_b.blocks[proposal.block_map[block]][0])
    result = play(new_game(a, b, 1, 2), "scripted", 1, script=[(block, u, v)])
    assert result["rounds"][0]["move"] == {"block": block, "u": u, "v": v}
