"""Command-line surface and scenario runner binding the toolkit together.

Subcommands: graph, cfi, orbits, blurer, blur, game, solve-query,
scenario. Every command reads and writes the documented text/JSON
formats, takes an explicit --seed wherever randomness is involved, and
reports through stable exit codes:

    0  all requested verdicts passed
    1  a verdict failed (with a witness in the report)
    2  a hypothesis audit failed and no override was requested
    3  a resource limit was exceeded
    4  malformed or unresolvable input

A scenario is a single JSON document that fixes a base graph, modulus,
twist, arity, pebbles, blurer choice, the list of verifications to run,
and any seeds and resource limits; `run_scenario` executes the pipeline
(build, orbits, blurer, similarity matrix, verifications, game) and
emits one machine-readable report carrying every audit and verdict.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Dict, Optional, Tuple

from .basegraph import (
    BaseGraph,
    GenerationFailed,
    GraphError,
    catalog,
    catalog_graph,
    catalog_or_generate,
    properties,
)
from .blurer import Blurer, BlurerError, basic_blurer, blurer_for, search_blurer, verify_blurer
from .cfi import (
    CfiError,
    CfiStructure,
    DecodeError,
    TwistFunction,
    build_cfi,
    cfi_query_solve,
)
from .game import GameError, new_game, play, transcript_json
from .gf2 import BlockMatrix, Gf2Error, matrix_predicates, verify_blur
from .orbits import OrbitError, ResourceError, orbit_partition
from .similarity import (
    AuditError,
    active_region_check,
    build_S_1ary,
    build_S_kary,
)

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_AUDIT = 2
EXIT_RESOURCE = 3
EXIT_INPUT = 4

_INPUT_ERRORS = (
    GraphError,
    CfiError,
    BlurerError,
    Gf2Error,
    OrbitError,
    GameError,
    DecodeError,
    KeyError,
    ValueError,
    OSError,
    json.JSONDecodeError,
)


class ScenarioError(ValueError):
    """Malformed scenario document."""


# -- document helpers ---------------------------------------------------------


def _emit(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_graph_spec(spec) -> BaseGraph:
    if isinstance(spec, str):
        return catalog_graph(spec)
    if "name" in spec and len(spec) == 1:
        return catalog_graph(spec["name"])
    if "file" in spec:
        return _read_graph_file(spec["file"])
    if "edges" in spec:
        return BaseGraph.from_json(json.dumps(spec))
    raise ScenarioError("graph spec needs a catalog name, file, or edge list")


def _read_graph_file(path: str) -> BaseGraph:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return BaseGraph.from_json(text)
    return BaseGraph.from_text(text, name=Path(path).stem)


def _twist_from_entries(base: BaseGraph, q: int, entries) -> TwistFunction:
    t = TwistFunction.zero(base, q)
    for u, v, val in entries or ():
        t = t.with_edge(int(u), int(v), int(val))
    return t


def _parse_twist_args(values) -> list:
    out = []
    for item in values or ():
        parts = [int(x) for x in item.split(",")]
        if len(parts) != 3:
            raise ScenarioError("twist entries are 'u,v,value'")
        out.append(parts)
    return out


def _parse_pebbles(text: Optional[str]) -> tuple:
    if not text:
        return ()
    return tuple(int(x) for x in text.split(","))


# -- scenarios ----------------------------------------------------------------


def bundled_scenarios() -> Dict[str, dict]:
    out = {}
    root = resources.files("cfikit").joinpath("scenarios")
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            doc = json.loads(entry.read_text())
            out[doc["name"]] = doc
    return out


def _scenario_doc(path_or_name) -> dict:
    if isinstance(path_or_name, dict):
        return path_or_name
    p = Path(str(path_or_name))
    if p.exists():
        return json.loads(p.read_text())
    named = bundled_scenarios()
    if str(path_or_name) in named:
        return named[str(path_or_name)]
    raise ScenarioError(f"no scenario file or bundled name {path_or_name!r}")


def _scenario_blurer(doc: dict, q: int, theta: int, degree: int) -> Blurer:
    spec = doc.get("blurer", {"mode": "derive"})
    mode = spec.get("mode", "explicit")
    if mode == "derive":
        return blurer_for(doc["k"], q, theta, degree)
    if mode == "basic":
        kind = spec["kind"]
        if kind == "arity1":
            return basic_blurer("arity1", q=spec.get("q", q),
                               d=spec.get("d", degree))
        return basic_blurer("kary", i=spec["i"])
    if mode == "explicit":
        return Blurer(
            k=spec["k"], q=spec["q"], a=spec["a"], d=spec["d"],
            xi=tuple(tuple(t) for t in spec["tuples"]),
            provenance=("scenario",),
        )
    raise ScenarioError(f"unknown blurer mode {mode!r}")


def run_scenario(path_or_name) -> Tuple[dict, int]:
    """Execute one scenario document; returns (report, exit code)."""
    report: dict = {"verdicts": {}, "audits": {}}
    try:
        doc = _scenario_doc(path_or_name)
        report["name"] = doc.get("name", "?")
        base = _load_graph_spec(doc["graph"])
        q = int(doc["q"])
        k = int(doc.get("k", 1))
        t, t_prime = (int(x) for x in doc["twist_edge"])
        theta = int(doc.get("theta", 1 << (q - 1)))
        pebbles = tuple(int(x) for x in doc.get("pebbles", ()))
        override = bool(doc.get("override_audit", False))
        verify_steps = list(doc.get("verify", []))
    except _INPUT_ERRORS + (ScenarioError,) as exc:
        report["error"] = f"input: {exc}"
        return report, EXIT_INPUT

    limits = doc.get("limits", {})
    mod = 1 << q
    universe = sum(mod ** (base.degree(x) - 1) for x in range(base.n))
    report["universe"] = universe
    if universe > limits.get("max_universe", 1 << 20):
        report["error"] = f"resource: universe size {universe} over limit"
        return report, EXIT_RESOURCE

    try:
        f = _twist_from_entries(base, q, doc.get("base_twist"))
        g = f.with_edge(t, t_prime, (f.value(t, t_prime) + theta) % mod)
        a = build_cfi(base, q, f)
        b = build_cfi(base, q, g)
        blurer = _scenario_blurer(doc, q, theta, base.degree(t))
        report["blurer"] = json.loads(blurer.to_json())
    except ResourceError as exc:
        report["error"] = f"resource: {exc}"
        return report, EXIT_RESOURCE
    except _INPUT_ERRORS + (ScenarioError,) as exc:
        report["error"] = f"input: {exc}"
        return report, EXIT_INPUT

    code = EXIT_OK
    built = None
    if doc.get("build_matrix", True):
        try:
            if k == 1:
                built = build_S_1ary(a, b, pebbles, t, t_prime, blurer,
                                     override_audit=override)
            else:
                built = build_S_kary(a, b, pebbles, t, t_prime, k,
                                     blurer=blurer, override_audit=override)
        except AuditError as exc:
            report["audits"]["build"] = exc.report.to_jsonable()
            report["error"] = "audit: matrix build hypotheses failed"
            return report, EXIT_AUDIT
        except ResourceError as exc:
            report["error"] = f"resource: {exc}"
            return report, EXIT_RESOURCE
        report["audits"]["build"] = built.audit.to_jsonable()

        s = built.matrix
        if doc.get("inject") == "identity":
            s = BlockMatrix.identity(s.row_parts, s.col_parts)
            report["injected"] = "identity"

        for step in verify_steps:
            if step == "predicates":
                pr = matrix_predicates(s)
                ok = pr.orbit_diagonal and pr.orbit_invariant and pr.odd_filled
                report["verdicts"]["predicates"] = {
                    "ok": ok,
                    "orbit_diagonal": pr.orbit_diagonal,
                    "orbit_invariant": pr.orbit_invariant,
                    "odd_filled": pr.odd_filled,
                }
            elif step == "blur":
                parts_a = orbit_partition(a, pebbles, 2 * k)
                parts_b = orbit_partition(b, pebbles, 2 * k)
                br = verify_blur(s, parts_a, parts_b)
                ok = br.ok and br.invertible
                report["verdicts"]["blur"] = {
                    "ok": ok,
                    "invertible": br.invertible,
                    "witness": list(br.witness) if br.witness else None,
                }
            elif step == "active-region":
                ok = active_region_check(s, {t})
                report["verdicts"]["active-region"] = {"ok": ok}
            else:
                report["error"] = f"input: unknown verification {step!r}"
                return report, EXIT_INPUT
            if not ok:
                code = EXIT_VERDICT

    if "game" in doc:
        spec = doc["game"]
        try:
            state = new_game(a, b, k, int(spec["m"]))
            result = play(
                state,
                spec["policy"],
                int(spec.get("rounds", 0)),
                seed=spec.get("seed"),
                depth=spec.get("depth"),
                override_audit=override,
            )
        except AuditError as exc:
            report["audits"]["game"] = exc.report.to_jsonable()
            report["error"] = "audit: game strategy hypotheses failed"
            return report, EXIT_AUDIT
        except _INPUT_ERRORS + (ScenarioError,) as exc:
            report["error"] = f"input: {exc}"
            return report, EXIT_INPUT
        survived = result["outcome"].startswith("duplicator-survived")
        report["verdicts"]["game"] = {
            "ok": survived,
            "outcome": result["outcome"],
        }
        if not survived:
            code = EXIT_VERDICT

    report["exit"] = code
    return report, code


# -- byte-exact round-trips ---------------------------------------------------


def _canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def roundtrip(path) -> bool:
    """Decode a supported document, re-encode it, and decode once more;
    true when the bytes are identical and the values equal."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("cfikit-matrix"):
        raise DecodeError("matrix documents round-trip with their partitions")
    if stripped.startswith("{"):
        doc = json.loads(text)
        if doc.get("kind") == "cfi":
            if "twist" not in doc:
                cfi_query_solve(doc)
                return _canonical_json(doc) == text
            s = CfiStructure.from_json(text)
            once = s.to_json()
            return once == text and CfiStructure.from_json(once).to_json() == once
        if "tuples" in doc and "a" in doc:
            b = Blurer.from_json(text)
            once = b.to_json()
            return once == text and Blurer.from_json(once) == b
        if "edges" in doc and "n" in doc:
            g = BaseGraph.from_json(text)
            once = g.to_json()
            return once == text and BaseGraph.from_json(once) == g
        if "graph" in doc and "twist_edge" in doc:
            _scenario_doc(doc)
            return _canonical_json(doc) == text
        if "blocks" in doc and "k" in doc:
            return _canonical_json(doc) == text
        raise DecodeError("unrecognized JSON document")
    g = BaseGraph.from_text(text)
    once = g.to_text()
    return once == text and BaseGraph.from_text(once) == g


# -- CLI ----------------------------------------------------------------------


def _build_structures(args):
    base = catalog_graph(args.graph) if args.graph else _read_graph_file(
        args.graph_file)
    q = args.q
    t, t_prime, theta = (int(x) for x in args.twist_edge.split(","))
    f = TwistFunction.zero(base, q)
    g = f.with_edge(t, t_prime, theta % (1 << q))
    return base, build_cfi(base, q, f), build_cfi(base, q, g), t, t_prime, theta


def _cmd_graph(args) -> int:
    if args.action == "show":
        g = catalog_graph(args.name)
        _emit(g.to_json() if args.format == "json" else g.to_text(), args.out)
        return EXIT_OK
    if args.action == "report":
        g = catalog_graph(args.name) if args.name else _read_graph_file(args.file)
        rep = properties(g)
        _emit(_canonical_json({
            "name": g.name, "n": g.n, "m": len(g.edges),
            "regular": rep.is_regular, "degree": rep.degree,
            "girth": None if rep.girth is None else int(rep.girth),
            "connectivity": rep.connectivity,
        }), args.out)
        return EXIT_OK
    try:
        g = catalog_or_generate(args.degree, args.min_girth,
                                args.min_connectivity, seed=args.seed)
    except GenerationFailed as e:
        sys.stderr.write(f"{e}\n")
        return EXIT_RESOURCE
    _emit(g.to_json() if args.format == "json" else g.to_text(), args.out)
    return EXIT_OK


def _cmd_cfi(args) -> int:
    base = catalog_graph(args.graph) if args.graph else _read_graph_file(
        args.graph_file)
    twist = _twist_from_entries(base, args.q, _parse_twist_args(args.twist))
    s = build_cfi(base, args.q, twist)
    _emit(s.to_json(stripped=args.stripped), args.out)
    return EXIT_OK


def _cmd_orbits(args) -> int:
    if args.structure:
        s = CfiStructure.from_json(Path(args.structure).read_text())
    else:
        base = catalog_graph(args.graph)
        twist = _twist_from_entries(base, args.q, _parse_twist_args(args.twist))
        s = build_cfi(base, args.q, twist)
    parts = orbit_partition(s, _parse_pebbles(args.pebbles), args.k)
    _emit(parts.to_json(), args.out)
    return EXIT_OK


def _cmd_blurer(args) -> int:
    if args.action == "verify":
        b = Blurer.from_json(Path(args.file).read_text())
        ok, violation = verify_blurer(b)
        _emit(_canonical_json({"ok": ok, "violation": violation}), args.out)
        return EXIT_OK if ok else EXIT_VERDICT
    if args.action == "make":
        b = blurer_for(args.k, args.q, args.a, args.d)
        _emit(b.to_json(), args.out)
        return EXIT_OK
    result = search_blurer(args.k, args.q, args.a, args.d,
                           budget=args.budget, seed=args.seed)
    if result.blurer is None:
        sys.stderr.write("no blurer found within budget\n")
        return EXIT_VERDICT
    _emit(result.blurer.to_json(), args.out)
    return EXIT_OK


def _cmd_blur(args) -> int:
    base, a, b, t, t_prime, theta = _build_structures(args)
    pebbles = _parse_pebbles(args.pebbles)
    try:
        if args.k == 1:
            blurer = blurer_for(1, args.q, theta, base.degree(t))
            built = build_S_1ary(a, b, pebbles, t, t_prime, blurer,
                                 override_audit=args.override_audit)
        else:
            built = build_S_kary(a, b, pebbles, t, t_prime, args.k,
                                 override_audit=args.override_audit)
    except AuditError as exc:
        _emit(exc.report.to_json(), args.out_audit)
        return EXIT_AUDIT
    except ResourceError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_RESOURCE
    _emit(built.audit.to_json(), args.out_audit)
    if args.action == "build":
        _emit(built.matrix.to_text(), args.out_matrix)
        return EXIT_OK
    # verify: replay against an emitted matrix file, or the fresh build
    s = built.matrix
    if args.matrix:
        s = BlockMatrix.from_text(Path(args.matrix).read_text(),
                                  built.matrix.row_parts,
                                  built.matrix.col_parts)
    parts_a = orbit_partition(a, pebbles, 2 * args.k)
    parts_b = orbit_partition(b, pebbles, 2 * args.k)
    br = verify_blur(s, parts_a, parts_b)
    _emit(_canonical_json({
        "ok": br.ok and br.invertible,
        "invertible": br.invertible,
        "witness": list(br.witness) if br.witness else None,
    }), args.out)
    return EXIT_OK if br.ok and br.invertible else EXIT_VERDICT


def _cmd_game(args) -> int:
    _, a, b, _, _, _ = _build_structures(args)
    if args.policy == "random" and args.seed is None:
        sys.stderr.write("--seed is required for the random policy\n")
        return EXIT_INPUT
    try:
        state = new_game(a, b, args.k, args.m)
        result = play(state, args.policy, args.rounds,
                      seed=args.seed, depth=args.depth)
    except AuditError:
        return EXIT_AUDIT
    _emit(transcript_json(result), args.out)
    return EXIT_OK if result["outcome"].startswith(
        "duplicator-survived") else EXIT_VERDICT


def _cmd_solve_query(args) -> int:
    total = cfi_query_solve(Path(args.file).read_text())
    _emit(_canonical_json({"total_twist": int(total), "q": total.q}), args.out)
    return EXIT_OK


def _cmd_scenario(args) -> int:
    if args.action == "list":
        names = sorted(bundled_scenarios())
        _emit("\n".join(names) + "\n", args.out)
        return EXIT_OK
    report, code = run_scenario(args.target)
    _emit(_canonical_json(report), args.out)
    return code


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cfikit",
        description="CFI structures, twist-blurring matrices, and the "
                    "similarity pebble game",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("graph", help="catalog, report, or generate base graphs")
    g.add_argument("action", choices=["show", "report", "generate"])
    g.add_argument("--name")
    g.add_argument("--file")
    g.add_argument("--degree", type=int, default=3)
    g.add_argument("--min-girth", type=int, default=3)
    g.add_argument("--min-connectivity", type=int, default=3)
    g.add_argument("--seed", type=int)
    g.add_argument("--format", choices=["text", "json"], default="text")
    g.add_argument("--out")

    c = sub.add_parser("cfi", help="build a CFI structure document")
    c.add_argument("--graph")
    c.add_argument("--graph-file")
    c.add_argument("--q", type=int, required=True)
    c.add_argument("--twist", action="append", metavar="u,v,value")
    c.add_argument("--stripped", action="store_true")
    c.add_argument("--out")

    o = sub.add_parser("orbits", help="pebbled k-orbit partition")
    o.add_argument("--structure")
    o.add_argument("--graph")
    o.add_argument("--q", type=int)
    o.add_argument("--twist", action="append", metavar="u,v,value")
    o.add_argument("--k", type=int, required=True)
    o.add_argument("--pebbles")
    o.add_argument("--out")

    bl = sub.add_parser("blurer", help="verify, make, or search blurers")
    bl.add_argument("action", choices=["verify", "make", "search"])
    bl.add_argument("--file")
    bl.add_argument("--k", type=int)
    bl.add_argument("--q", type=int)
    bl.add_argument("--a", type=int)
    bl.add_argument("--d", type=int)
    bl.add_argument("--budget", type=int, default=20000)
    bl.add_argument("--seed", type=int, default=0)
    bl.add_argument("--out")

    b = sub.add_parser("blur", help="build or verify a twist-hiding matrix")
    b.add_argument("action", choices=["build", "verify"])
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--graph")
    b.add_argument("--graph-file")
    b.add_argument("--q", type=int, required=True)
    b.add_argument("--twist-edge", required=True, metavar="t,t',theta")
    b.add_argument("--pebbles")
    b.add_argument("--override-audit", action="store_true")
    b.add_argument("--matrix")
    b.add_argument("--out-matrix")
    b.add_argument("--out-audit")
    b.add_argument("--out")

    ga = sub.add_parser("game", help="play the bounded similarity game")
    ga.add_argument("action", choices=["play"])
    ga.add_argument("--graph")
    ga.add_argument("--graph-file")
    ga.add_argument("--q", type=int, required=True)
    ga.add_argument("--twist-edge", required=True, metavar="t,t',theta")
    ga.add_argument("--k", type=int, required=True)
    ga.add_argument("--m", type=int, required=True)
    ga.add_argument("--rounds", type=int, default=10)
    ga.add_argument("--policy", choices=["random", "exhaustive", "scripted"],
                    default="random")
    ga.add_argument("--seed", type=int)
    ga.add_argument("--depth", type=int)
    ga.add_argument("--out")

    sq = sub.add_parser("solve-query",
                        help="total twist from relational data alone")
    sq.add_argument("file")
    sq.add_argument("--out")

    sc = sub.add_parser("scenario", help="run or list scenario documents")
    sc.add_argument("action", choices=["run", "list"])
    sc.add_argument("target", nargs="?")
    sc.add_argument("--out")
    return p


_HANDLERS = {
    "graph": _cmd_graph,
    "cfi": _cmd_cfi,
    "orbits": _cmd_orbits,
    "blurer": _cmd_blurer,
    "blur": _cmd_blur,
    "game": _cmd_game,
    "solve-query": _cmd_solve_query,
    "scenario": _cmd_scenario,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ResourceError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_RESOURCE
    except AuditError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_AUDIT
    except _INPUT_ERRORS + (ScenarioError,) as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
