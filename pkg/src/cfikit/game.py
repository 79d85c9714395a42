"""Executable two-player similarity game over F2 with an automated defender.

The game is played on two CFI structures with m paired pebbles. Each
round the attacker (Spoiler) lifts 2k pebble pairs; the defender
(Duplicator) proposes equal-sized partitions of both structures'
k-tuple-pair spaces together with an invertible F2 matrix that
simultaneously conjugates every block's characteristic matrix onto its
partner's; the attacker then picks a block, one tuple pair per side, and
places the pebbles. The attacker wins as soon as the pebbled
correspondence is not a partial isomorphism or the defender has no valid
proposal; the defender wins a bounded game by surviving every round.

The automated defender plays the twist-hiding strategy: it aligns the
remaining pebbles with a structure automorphism, relocates the twist
along a path to a center far from the pebbles, proposes the pebbled
orbit partitions of both sides, and answers with the matching blur
matrix pulled back through the relocation isomorphism. An independent
referee replays every round from the proposal alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import zring
from .basegraph import BaseGraph
from .blurer import blurer_for
from .cfi import (
    CfiStructure,
    PartialMap,
    build_cfi,
    find_isomorphism,
    path_isomorphism,
    verify_isomorphism,
)
from .gf2 import BlockMatrix, char_matrix
from .orbits import (
    OrbitPartition,
    _tuple_permutation,
    decode_tuple,
    encode_tuple,
    orbit_partition,
    type_bijection,
)
from .similarity import (
    AuditError,
    AuditReport,
    build_S_1ary,
    build_S_kary,
    star_radius,
)


class GameError(ValueError):
    """Invalid game construction or an illegal move."""


@dataclass
class GameState:
    a: CfiStructure
    b: CfiStructure
    k: int
    m: int
    slots: List[Optional[Tuple[int, int]]] = field(default_factory=list)
    round_no: int = 0
    transcript: List[dict] = field(default_factory=list)
    outcome: Optional[str] = None

    @property
    def placed(self) -> List[Tuple[int, int]]:
        return [p for p in self.slots if p is not None]

    def to_jsonable(self) -> dict:
        return {
            "k": self.k,
            "m": self.m,
            "round": self.round_no,
            "slots": [list(p) if p else None for p in self.slots],
            "outcome": self.outcome,
            "rounds": self.transcript,
        }


@dataclass
class RoundProposal:
    """Duplicator's answer for one round: partitions, bijection, matrix."""

    parts_a: OrbitPartition
    parts_b: OrbitPartition
    block_map: Dict[int, int]
    matrix: BlockMatrix
    audit: AuditReport
    situation: tuple = ()

    def summary(self) -> dict:
        return {
            "blocks": len(self.parts_a.blocks),
            "audited": self.audit.audited,
            "situation": list(self.situation),
        }


def new_game(a: CfiStructure, b: CfiStructure, k: int, m: int,
             pebbles: Sequence[Tuple[int, int]] = ()) -> GameState:
    if k < 1:
        raise GameError("arity must be at least 1")
    if m < 2 * k:
        raise GameError("need at least 2k pebbles")
    pebbles = [tuple(int(x) for x in p) for p in pebbles]
    if len(pebbles) > m:
        raise GameError("more initial pebbles than slots")
    slots: List[Optional[Tuple[int, int]]] = list(pebbles)
    slots += [None] * (m - len(pebbles))
    state = GameState(a, b, k, m, slots)
    if a.size != b.size:
        state.outcome = "spoiler-won-at-round-0"
        state.transcript.append(
            {"round": 0, "event": "universe sizes differ"})
    return state


# -- partial-isomorphism verdict ----------------------------------------------


def _pair_label(s: CfiStructure, i: int, j: int, shift: int) -> tuple:
    """Label of an ordered vertex pair: the incident base edges on which
    the second vertex's values equal the first's shifted by `shift`;
    pairs from different gadgets carry the minimal (empty) label."""
    x = int(s.origins[i])
    if int(s.origins[j]) != x:
        return ()
    a = s.universe[i].values
    b = s.universe[j].values
    return tuple(
        (x, y) for p, y in enumerate(s.base.neighbors(x))
        if (a[p] + shift) % s.mod == b[p]
    )


def partial_isomorphism(a: CfiStructure, b: CfiStructure,
                        pairs: Sequence[Tuple[int, int]]) -> bool:
    """Whether the pebbled correspondence preserves every relation: the
    gadget preorder, both families of label-ordered pair relations, and
    the twist-relative connecting values."""
    mapping: Dict[int, int] = {}
    for i, j in pairs:
        if mapping.setdefault(int(i), int(j)) != int(j):
            return False
    if len(set(mapping.values())) != len(mapping):
        return False
    items = sorted(mapping.items())
    oa = [int(a.origins[i]) for i, _ in items]
    ob = [int(b.origins[j]) for _, j in items]
    n = len(items)
    for p in range(n):
        for r in range(n):
            if (oa[p] <= oa[r]) != (ob[p] <= ob[r]):
                return False
    for shift in (0, 1):
        la = {}
        lb = {}
        for p, (i1, j1) in enumerate(items):
            for r, (i2, j2) in enumerate(items):
                la[p, r] = _pair_label(a, i1, i2, shift)
                lb[p, r] = _pair_label(b, j1, j2, shift)
        for key1 in la:
            for key2 in la:
                if (la[key1] <= la[key2]) != (lb[key1] <= lb[key2]):
                    return False
    for p, (i1, j1) in enumerate(items):
        for r, (i2, j2) in enumerate(items):
            adj_a = a.base.has_edge(oa[p], oa[r]) if oa[p] != oa[r] else False
            adj_b = b.base.has_edge(ob[p], ob[r]) if ob[p] != ob[r] else False
            if adj_a != adj_b:
                return False
            if adj_a and a.edge_c(i1, i2) != b.edge_c(j1, j2):
                return False
    return True


# -- referee -------------------------------------------------------------------


def verify_round(state: GameState, proposal: RoundProposal
                 ) -> Tuple[bool, Optional[str]]:
    """Independent re-check of a proposal: both partitions cover their
    pair spaces with equally many blocks, the bijection is total, the
    matrix is invertible, and it conjugates every block's characteristic
    matrix onto its partner's."""
    pa, pb, s = proposal.parts_a, proposal.parts_b, proposal.matrix
    k2 = 2 * state.k
    if pa.k != k2 or pb.k != k2:
        return False, "partitions are not over tuple pairs"
    if len(pa.blocks) != len(pb.blocks):
        return False, "partition sizes differ"
    full = state.a.size ** k2
    if sum(len(c) for c in pa.blocks) != full:
        return False, "left partition does not cover the pair space"
    if sum(len(c) for c in pb.blocks) != full:
        return False, "right partition does not cover the pair space"
    f = proposal.block_map
    if sorted(f) != list(range(len(pa.blocks))):
        return False, "block bijection is not total"
    if sorted(f.values()) != list(range(len(pb.blocks))):
        return False, "block bijection is not onto"
    if not s.is_invertible():
        return False, "matrix is not invertible"
    for p in range(len(pa.blocks)):
        chi_p = char_matrix(s.row_parts, s.row_parts, pa.blocks[p])
        chi_q = char_matrix(s.col_parts, s.col_parts, pb.blocks[f[p]])
        witness = chi_p.multiply(s).first_mismatch(s.multiply(chi_q))
        if witness is not None:
            return False, f"similarity fails at block {p} entry {witness}"
    return True, None


# -- the automated Duplicator ---------------------------------------------------


def _automorphism_witness(s: CfiStructure,
                          pairs: Sequence[Tuple[int, int]]
                          ) -> Optional[PartialMap]:
    """An automorphism of s mapping each pair's first vertex to its
    second, as a circulation solution; None if the system is infeasible."""
    base, mod, q = s.base, s.mod, s.q
    edge_index = {e: i for i, e in enumerate(base.edges)}
    n_e = len(base.edges)
    rows: List[List[int]] = []
    rhs: List[int] = []

    def oriented_row(x: int, y: int) -> List[int]:
        row = [0] * n_e
        e = (min(x, y), max(x, y))
        row[edge_index[e]] = 1 if x < y else mod - 1
        return row

    for x in range(base.n):
        row = [0] * n_e
        for y in base.neighbors(x):
            e = (min(x, y), max(x, y))
            row[edge_index[e]] = (row[edge_index[e]] + (1 if x < y else -1)) % mod
        rows.append(row)
        rhs.append(0)
    for i, j in pairs:
        x = int(s.origins[i])
        if int(s.origins[j]) != x:
            return None
        va = s.universe[i].values
        vb = s.universe[j].values
        for p, y in enumerate(base.neighbors(x)):
            rows.append(oriented_row(x, y))
            rhs.append((vb[p] - va[p]) % mod)
    rho = zring.solve(rows, rhs, q)
    if rho is None:
        return None
    translations = {}
    for x in range(base.n):
        d = []
        for y in base.neighbors(x):
            e = (min(x, y), max(x, y))
            val = rho[edge_index[e]]
            d.append(val % mod if x < y else (-val) % mod)
        translations[x] = tuple(d)
    return PartialMap(base, q, translations)


def _twist_difference(a: CfiStructure, b: CfiStructure) -> Dict[tuple, int]:
    out = {}
    for e, va, vb in zip(a.base.edges, a.twist.values, b.twist.values):
        if (vb - va) % a.mod:
            out[e] = (vb - va) % a.mod
    return out


def _relocation_path(base: BaseGraph, e: tuple,
                     pebbled: set) -> Optional[List[int]]:
    """A simple path starting with the twisted edge and ending at a center
    far from the pebbled origins, with no pebbled interior vertex; the
    possibly-pebbled endpoint of the edge is placed first (untranslated)."""
    x, y = e
    if x in pebbled and y in pebbled:
        return None
    if y in pebbled:
        x, y = y, x
    # BFS from y avoiding x and pebbled origins
    if pebbled:
        dist_peb = base.bfs_distances(sorted(pebbled))
    else:
        dist_peb = np.full(base.n, base.n, dtype=np.int64)
    parent = {y: x}
    frontier = [y]
    reach: List[int] = []
    while frontier:
        nxt = []
        for v in frontier:
            for w in base.neighbors(v):
                if w in parent or w == x or w in pebbled:
                    continue
                parent[w] = v
                nxt.append(w)
                reach.append(w)
        frontier = nxt
    if not reach:
        return None
    z = max(reach, key=lambda v: (int(dist_peb[v]), -v))
    path = [z]
    while path[-1] != x:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def _pullback_columns(s: BlockMatrix, sigma: np.ndarray,
                      new_cols: OrbitPartition) -> BlockMatrix:
    """Reindex a matrix's columns through the inverse of the relocation
    permutation, onto the original structure's orbit partition."""
    size, k = new_cols.structure.size, new_cols.k
    sigma_inv = np.argsort(sigma)
    tup_inv = _tuple_permutation(sigma_inv, size, k)
    out = BlockMatrix(s.row_parts, new_cols)
    for (rb, cb_old), _ in sorted(s.blocks.items()):
        old_codes = s.col_parts.blocks[cb_old]
        new_codes = tup_inv[old_codes]
        cb = int(new_cols.block_of[new_codes[0]])
        target = new_cols.blocks[cb]
        j = np.searchsorted(target, new_codes)
        if not np.array_equal(target[j], new_codes):
            raise GameError("relocation permutation breaks the orbit blocks")
        dense = np.zeros((s.dense_block(rb, cb_old).shape[0], len(target)),
                         dtype=np.uint8)
        dense[:, j] = s.dense_block(rb, cb_old)
        out.set_block_dense(rb, cb, dense)
    return out


def duplicator_round(state: GameState,
                     override_audit: bool = False) -> RoundProposal:
    """The Duplicator strategy for one round, on the current (post-pickup)
    pebbles: align, relocate the twist to a distant center, answer with
    the pebbled orbit partitions and the pulled-back blur matrix."""
    a, b, k = state.a, state.b, state.k
    if a.base != b.base or a.q != b.q:
        raise GameError("structures are not CFI twins over one base")
    base, q, mod, size = a.base, a.q, a.mod, a.size
    placed = state.placed
    u_peb = tuple(i for i, _ in placed)
    v_peb = tuple(j for _, j in placed)

    audit = AuditReport("duplicator")
    diff = _twist_difference(a, b)
    total = sum(diff.values()) % mod

    if total == 0:
        phi = find_isomorphism(a, b)
        audit.add("isomorphism-found", phi is not None)
        combined = phi
        if placed and phi is not None:
            perm0 = phi.as_permutation(a)
            align = _automorphism_witness(
                b, [(int(perm0[i]), j) for i, j in placed])
            audit.add("pebble-alignment", align is not None)
            if align is not None:
                combined = phi.compose(align)
        audit.finish(override_audit)
        sigma = combined.as_permutation(a)
        audit.add("pebbles-aligned",
                  all(int(sigma[i]) == j for i, j in placed))
        audit.add("isomorphism-verified", verify_isomorphism(combined, a, b))
        audit.finish(override_audit)
        rows = orbit_partition(a, u_peb, k)
        cols = orbit_partition(b, v_peb, k)
        s = BlockMatrix(rows, cols)
        tup_perm = _tuple_permutation(sigma, size, k)
        for rb, rcodes in enumerate(rows.blocks):
            vcodes = tup_perm[rcodes]
            cb = int(cols.block_of[vcodes[0]])
            target = cols.blocks[cb]
            dense = np.zeros((len(rcodes), len(target)), dtype=np.uint8)
            dense[np.arange(len(rcodes)), np.searchsorted(target, vcodes)] = 1
            s.set_block_dense(rb, cb, dense)
        parts_a = orbit_partition(a, u_peb, 2 * k)
        parts_b = orbit_partition(b, v_peb, 2 * k)
        tup_perm2 = _tuple_permutation(sigma, size, 2 * k)
        block_map = {
            p: int(parts_b.block_of[tup_perm2[codes[0]]])
            for p, codes in enumerate(parts_a.blocks)
        }
        return RoundProposal(parts_a, parts_b, block_map, s, audit,
                             situation=("isomorphic",))

    audit.add("single-edge-twist", len(diff) == 1,
              f"twisted edges: {sorted(diff)}")
    audit.finish(override_audit)
    (e, theta), = diff.items()
    pebbled_origins = {int(a.origins[i]) for i in u_peb}
    audit.add("twist-edge-unpebbled",
              not set(e) <= pebbled_origins,
              f"edge {e}, pebbled origins {sorted(pebbled_origins)}")
    align = PartialMap(base, q)
    if placed:
        align = _automorphism_witness(b, [(j, i) for i, j in placed])
        audit.add("pebble-alignment", align is not None)
    audit.finish(override_audit)

    path = _relocation_path(base, e, pebbled_origins)
    audit.add("relocation-path", path is not None)
    audit.finish(override_audit)
    if path is None:
        raise GameError("no relocation path exists around the pebbles")
    z = path[-1]
    if pebbled_origins:
        peb_dist = min(
            int(base.bfs_distances([z])[x]) for x in pebbled_origins)
        audit.add("distant-center", peb_dist > 2 * star_radius(k + 1),
                  f"dist(pebbles, center)={peb_dist}")
    else:
        audit.add("distant-center", True, "no pebbles remain")

    psi = path_isomorphism(base, q, theta, path)
    first = (min(path[0], path[1]), max(path[0], path[1]))
    last = (min(path[-2], path[-1]), max(path[-2], path[-1]))
    g_prime = b.twist.with_edge(
        *first, (b.twist.value(*first) + theta) % mod)
    g_prime = g_prime.with_edge(
        *last, (g_prime.value(*last) - theta) % mod)
    b_prime = build_cfi(base, q, g_prime)
    combined = align.compose(psi)
    audit.add("relocation-verified",
              verify_isomorphism(combined, b, b_prime))
    sigma = combined.as_permutation(b)
    audit.add("pebbles-aligned",
              all(int(sigma[j]) == i for i, j in placed))
    audit.finish(override_audit)

    if k == 1:
        built = build_S_1ary(
            a, b_prime, u_peb, z, path[-2],
            blurer_for(1, q, theta % mod, base.degree(z)),
            override_audit=override_audit,
        )
    else:
        built = build_S_kary(a, b_prime, u_peb, z, path[-2], k,
                             override_audit=override_audit)
    audit.merge("blur", built.audit)

    cols = orbit_partition(b, v_peb, k)
    s = _pullback_columns(built.matrix, sigma, cols)
    parts_a = orbit_partition(a, u_peb, 2 * k)
    parts_b = orbit_partition(b, v_peb, 2 * k)
    block_map = type_bijection(parts_a, parts_b)
    situation = ("twisted", last,
                 tuple(sorted((int(a.origins[i]), int(b.origins[j]))
                              for i, j in placed)))
    return RoundProposal(parts_a, parts_b, block_map, s, audit, situation)


# -- moves and play loops --------------------------------------------------------


def spoiler_move(state: GameState, proposal: RoundProposal, block: int,
                 u_code: int, v_code: int) -> Tuple[GameState, bool]:
    """Place one tuple pair from a proposed block and judge the position."""
    pa, pb = proposal.parts_a, proposal.parts_b
    if not 0 <= block < len(pa.blocks):
        raise GameError("no such block")
    if u_code not in pa.blocks[block]:
        raise GameError("left tuple is not in the chosen block")
    if v_code not in pb.blocks[proposal.block_map[block]]:
        raise GameError("right tuple is not in the partner block")
    size, k2 = state.a.size, 2 * state.k
    u = decode_tuple(int(u_code), size, k2)
    v = decode_tuple(int(v_code), size, k2)
    free = [idx for idx, slot in enumerate(state.slots) if slot is None]
    if len(free) < k2:
        raise GameError("not enough free pebble slots")
    for idx, i, j in zip(free, u, v):
        state.slots[idx] = (int(i), int(j))
    state.round_no += 1
    verdict = partial_isomorphism(state.a, state.b, state.placed)
    if not verdict:
        state.outcome = f"spoiler-won-at-round-{state.round_no}"
    return state, verdict


def _pickup(state: GameState, rng: Optional[np.random.Generator]) -> List[int]:
    placed_idx = [i for i, slot in enumerate(state.slots) if slot is not None]
    need = 2 * state.k
    if state.m == need:
        chosen = placed_idx
    elif rng is None:
        chosen = placed_idx[:need]
    else:
        chosen = sorted(
            rng.choice(placed_idx, size=min(need, len(placed_idx)),
                       replace=False).tolist()
        ) if placed_idx else []
    for i in chosen:
        state.slots[i] = None
    return chosen


def play(state: GameState, spoiler_policy: str, rounds: int,
         seed: Optional[int] = None, depth: Optional[int] = None,
         script: Optional[Sequence[Tuple[int, int, int]]] = None,
         override_audit: bool = False) -> dict:
    """Run the bounded game with the automated defender.

    Policies: "random" (needs a seed), "exhaustive" (judges every
    placement each round, recursing once per round since all successors
    of a full pickup coincide; needs a depth), and "scripted" (replays
    the given (block, left code, right code) moves).
    """
    if spoiler_policy == "random":
        if seed is None:
            raise GameError("the random policy needs a seed")
        rng = np.random.default_rng(seed)
    elif spoiler_policy == "exhaustive":
        if depth is None:
            raise GameError("the exhaustive policy needs a depth")
        rounds = depth
        rng = None
    elif spoiler_policy == "scripted":
        if script is None:
            raise GameError("the scripted policy needs moves")
        rounds = min(rounds, len(script))
        rng = None
    else:
        raise GameError(f"unknown policy {spoiler_policy!r}")

    prev_situation = None
    for r in range(rounds):
        if state.outcome is not None:
            break
        picked = _pickup(state, rng)
        try:
            proposal = duplicator_round(state, override_audit=override_audit)
        except AuditError as exc:
            state.outcome = f"spoiler-won-at-round-{state.round_no + 1}"
            state.transcript.append({
                "round": state.round_no + 1,
                "event": "duplicator audit failure",
                "failures": [c.name for c in exc.report.failures],
            })
            break
        ok, reason = verify_round(state, proposal)
        entry = {
            "round": state.round_no + 1,
            "picked_up": picked,
            "proposal": proposal.summary(),
            "referee": ok,
            "stationary": proposal.situation == prev_situation,
        }
        prev_situation = proposal.situation
        if not ok:
            entry["referee_reason"] = reason
            state.outcome = f"spoiler-won-at-round-{state.round_no + 1}"
            state.transcript.append(entry)
            break

        if spoiler_policy == "random":
            block = int(rng.integers(len(proposal.parts_a.blocks)))
            u_code = int(rng.choice(proposal.parts_a.blocks[block]))
            v_code = int(rng.choice(
                proposal.parts_b.blocks[proposal.block_map[block]]))
            _, verdict = spoiler_move(state, proposal, block, u_code, v_code)
            entry["move"] = {"block": block, "u": u_code, "v": v_code}
            entry["verdict"] = verdict
        elif spoiler_policy == "exhaustive":
            baseline = state.placed
            bad = None
            size, k2 = state.a.size, 2 * state.k
            for p, codes in enumerate(proposal.parts_a.blocks):
                partner = proposal.parts_b.blocks[proposal.block_map[p]]
                for u_code in codes:
                    u = decode_tuple(int(u_code), size, k2)
                    for v_code in partner:
                        v = decode_tuple(int(v_code), size, k2)
                        pairs = baseline + list(zip(u, v))
                        if not partial_isomorphism(state.a, state.b, pairs):
                            bad = (p, int(u_code), int(v_code))
                            break
                    if bad:
                        break
                if bad:
                    break
            entry["placements_checked"] = sum(
                len(c) * len(proposal.parts_b.blocks[proposal.block_map[p]])
                for p, c in enumerate(proposal.parts_a.blocks))
            if bad:
                _, verdict = spoiler_move(state, proposal, *bad)
                entry["move"] = {"block": bad[0], "u": bad[1], "v": bad[2]}
                entry["verdict"] = verdict
            else:
                block = 0
                u_code = int(proposal.parts_a.blocks[0][0])
                v_code = int(
                    proposal.parts_b.blocks[proposal.block_map[0]][0])
                _, verdict = spoiler_move(
                    state, proposal, block, u_code, v_code)
                entry["move"] = {"block": block, "u": u_code, "v": v_code}
                entry["verdict"] = verdict
        else:
            block, u_code, v_code = script[r]
            _, verdict = spoiler_move(state, proposal, block, u_code, v_code)
            entry["move"] = {"block": block, "u": u_code, "v": v_code}
            entry["verdict"] = verdict
        state.transcript.append(entry)

    if state.outcome is None:
        state.outcome = f"duplicator-survived-{state.round_no}"
    return {
        "outcome": state.outcome,
        "rounds": state.transcript,
        "k": state.k,
        "m": state.m,
    }


def transcript_json(result: dict) -> str:
    return json.dumps(result, sort_keys=True, indent=1) + "\n"


__all__ = [
    "GameError",
    "GameState",
    "RoundProposal",
    "new_game",
    "partial_isomorphism",
    "verify_round",
    "duplicator_round",
    "spoiler_move",
    "play",
    "transcript_json",
]
