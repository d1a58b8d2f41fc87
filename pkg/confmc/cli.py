"""Command-line interface.

Usage examples
--------------
    # Toy model + query, then one MSMT step
    confmc gen table1 -o table1.json --query-out table1.query.json
    confmc step --model table1.json --query table1.query.json --semantics msmt

    # Subset-sum instance, exact target probability after one MSCT step
    confmc gen subsetsum --set 1,2,3 --target 3 -o ss.json --query-out ss.query.json
    confmc explore --model ss.json --query ss.query.json --semantics msct --depth 1

    # CSMT reachability by backward antichain iteration
    confmc check-csmt --model table1.json --query table1.query.json --K 3 --seed 0

    # MSCT threshold reachability by certificate synthesis (needs z3 or similar)
    confmc check-msct --model casino.json --query casino.query.json --degree 2

Exit codes: 0 = verdict produced (including unknown / stabilized),
2 = invalid input, 3 = LP backend or solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

from confmc import __version__
from confmc.antichain import PullbackConfig, backward_reach
from confmc.benchmarks import (
    casino_query,
    exam_query,
    gen_casino,
    gen_exam,
    subsetsum,
    table1,
    table1_query,
)
from confmc.core import Configuration, MdpModel, uniform_scheduler
from confmc.errors import ConfmcError, InvalidInput
from confmc.explorer import estimate_reach, explore, reach_curve, reach_prob_bounded, simulate, write_dot
from confmc.modelfile import (
    Query,
    ResultRecord,
    load_model,
    load_query,
    parse_rational,
    serialize_model,
    serialize_query,
)
from confmc.semantics import SemanticsId, config_step
from confmc.synthesis import SynthesisConfig, check_msct


# ---------------------------------------------------------------------------
# Commands (shared with the batch runner and the server)
# ---------------------------------------------------------------------------

def _scheduler(m: MdpModel, q: Query):
    return q.scheduler if q.scheduler is not None else uniform_scheduler(m)


def _need_target(q: Query, command: str):
    if q.target is None:
        raise InvalidInput(f"{command} needs a target in the query")
    return q.target


def _record(command: str, verdict: str, start: float, **kwargs) -> ResultRecord:
    return ResultRecord(
        command=command,
        verdict=verdict,
        runtime_s=time.perf_counter() - start,
        version=__version__,
        **kwargs,
    )


def run_step(
    m: MdpModel,
    q: Query,
    semantics: Optional[SemanticsId] = None,
    method: str = "compositional",
) -> ResultRecord:
    start = time.perf_counter()
    s = semantics or q.semantics
    succ = config_step(m, _scheduler(m, q), s, [q.initial], method=method).successors
    return _record(
        "step", "ok", start,
        semantics=s.value,
        probabilities={repr(cfg): str(p) for cfg, p in succ.items()},
        details={"successors": [{"config": cfg.as_strings(), "prob": str(p)} for cfg, p in succ.items()]},
    )


def run_reach(
    m: MdpModel,
    q: Query,
    depth: Optional[int] = None,
    semantics: Optional[SemanticsId] = None,
) -> ResultRecord:
    start = time.perf_counter()
    s = semantics or q.semantics
    k = q.options.depth if depth is None else depth
    H = _need_target(q, "reach")
    lower, settled = reach_prob_bounded(m, _scheduler(m, q), s, q.initial, H, k)
    verdict = "bounded"
    if q.threshold is not None:
        verdict = "above_threshold" if lower >= q.threshold else ("below_threshold" if settled else "undecided")
    return _record(
        "reach", verdict, start,
        semantics=s.value,
        probabilities={"reach": str(lower)},
        details={"depth": k, "settled": settled},
        options={"depth": k},
    )


def run_explore(
    m: MdpModel,
    q: Query,
    depth: Optional[int] = None,
    semantics: Optional[SemanticsId] = None,
    dot: Optional[str] = None,
    plot: Optional[str] = None,
) -> ResultRecord:
    start = time.perf_counter()
    s = semantics or q.semantics
    k = q.options.depth if depth is None else depth
    sigma = _scheduler(m, q)
    graph = explore(m, sigma, s, q.initial, k, target=q.target)
    if dot:
        write_dot(graph, dot)
    details = {
        "depth": k,
        "nodes": len(graph.nodes),
        "edges": len(graph.edges),
        "keyed_by": graph.keyed_by,
        "target_nodes": [n.config.as_strings() for n in graph.nodes if n.in_target],
    }
    probabilities = {}
    if q.target is not None:
        lower, settled = reach_prob_bounded(m, sigma, s, q.initial, q.target, k)
        probabilities["reach"] = str(lower)
        details["settled"] = settled
        if plot:
            from confmc.report import plot_reach_curve

            curve = reach_curve(m, sigma, s, q.initial, q.target, k)
            plot_reach_curve(curve, plot, title=f"{s.value.upper()} reach probability", threshold=q.threshold)
    return _record("explore", "explored", start, semantics=s.value,
                   probabilities=probabilities, details=details, options={"depth": k})


def run_simulate(
    m: MdpModel,
    q: Query,
    runs: Optional[int] = None,
    steps: Optional[int] = None,
    seed: Optional[int] = None,
    semantics: Optional[SemanticsId] = None,
) -> ResultRecord:
    start = time.perf_counter()
    s = semantics or q.semantics
    n_runs = q.options.runs if runs is None else runs
    cap = q.options.step_cap if steps is None else steps
    rng_seed = q.options.seed if seed is None else seed
    sigma = _scheduler(m, q)
    opts = {"runs": n_runs, "step_cap": cap}
    if q.target is None:
        path = simulate(m, sigma, s, q.initial, cap, rng_seed=rng_seed)
        return _record("simulate", "path", start, semantics=s.value, seed=rng_seed, options=opts,
                       details={"path": [c.as_strings() for c in path]})
    est = estimate_reach(m, sigma, s, q.initial, q.target, n_runs, cap, rng_seed=rng_seed)
    return _record(
        "simulate", "estimated", start,
        semantics=s.value,
        seed=rng_seed,
        options=opts,
        details={
            "runs": est.runs,
            "hits": est.hits,
            "capped": est.capped,
            "frequency": est.frequency,
            "stderr": est.stderr,
        },
    )


def run_check_csmt(
    m: MdpModel,
    q: Query,
    cfg: Optional[PullbackConfig] = None,
    verbose: bool = False,
) -> ResultRecord:
    start = time.perf_counter()
    cfg = cfg or PullbackConfig(k=q.options.k, l=q.options.l, loop_limit=q.options.loop_limit, seed=q.options.seed)
    H = _need_target(q, "check-csmt")
    outcome = backward_reach(m, q.initial, H, verbose=verbose, **cfg.as_kwargs())
    return _record(
        "check-csmt", outcome.tag, start,
        semantics=SemanticsId.CSMT.value,
        witness=outcome.witness_names(m) if outcome.reachable else None,
        seed=cfg.seed,
        options={"K": cfg.k, "L": cfg.l, "loop_limit": cfg.loop_limit, "backend": cfg.backend},
        details={
            "iterations": outcome.iterations,
            "antichain_size": len(outcome.antichain) if outcome.antichain is not None else 0,
        },
    )


def run_check_msct(
    m: MdpModel,
    q: Query,
    cfg: Optional[SynthesisConfig] = None,
    threshold: Optional[Fraction] = None,
    verbose: bool = False,
) -> ResultRecord:
    start = time.perf_counter()
    cfg = cfg or SynthesisConfig(
        gamma=parse_rational(q.options.gamma), degree=q.options.degree, seed=q.options.seed,
    )
    H = _need_target(q, "check-msct")
    xi = threshold if threshold is not None else q.threshold
    if xi is None:
        raise InvalidInput("check-msct needs a threshold (query 'threshold' or --threshold)")
    outcome = check_msct(m, q.initial, H, xi, verbose=verbose, **cfg.as_kwargs())
    details = {"reason": outcome.reason, "timings": outcome.timings}
    if outcome.report is not None:
        details["verification"] = outcome.report.summary()
    return _record(
        "check-msct", outcome.tag, start,
        semantics=SemanticsId.MSCT.value,
        certificate=outcome.certificate.to_dict(m) if outcome.certified else None,
        probabilities={"threshold": str(xi)},
        seed=cfg.seed,
        options={"gamma": str(cfg.gamma), "degree": cfg.degree, "samples": cfg.samples},
        details=details,
    )


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _print_text(rec: ResultRecord) -> None:
    print(f"{rec.command}: {rec.verdict}")
    if rec.semantics:
        print(f"  semantics : {rec.semantics}")
    if rec.witness is not None:
        print(f"  witness   : {' '.join(rec.witness) or '<empty>'}")
    for key, value in rec.probabilities.items():
        print(f"  {key} : {value}")
    for key, value in rec.details.items():
        if key == "successors":
            for succ in value:
                print(f"  ({', '.join(succ['config'])}) : {succ['prob']}")
        elif key == "path":
            for i, cfg in enumerate(value):
                print(f"  [{i}] ({', '.join(cfg)})")
        else:
            print(f"  {key} : {value}")
    if rec.certificate is not None:
        print(f"  certificate : {json.dumps(rec.certificate)}")
    print(f"  runtime   : {rec.runtime_s:.3f} s")


def _emit(rec: ResultRecord, fmt: str) -> None:
    if fmt == "json":
        print(rec.model_dump_json(indent=2))
    else:
        _print_text(rec)


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidInput(f"expected comma-separated integers, got '{text}'") from None


def run_gen(args) -> None:
    if args.generator == "table1":
        m = table1()
        q = table1_query(m)
    elif args.generator == "subsetsum":
        if args.set is None or args.target is None:
            raise InvalidInput("gen subsetsum needs --set and --target")
        m, q = subsetsum(_int_list(args.set), args.target)
    elif args.generator == "casino":
        m = gen_casino(args.games, args.rewards, return_to_play=not args.absorbing, rng_seed=args.seed)
        q = casino_query(m)
    else:
        m = gen_exam(args.sets, args.grades, decay=parse_rational(args.decay), rng_seed=args.seed)
        q = exam_query(m)

    text = serialize_model(m)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"  [gen] model written to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    if args.query_out:
        Path(args.query_out).write_text(serialize_query(q, m), encoding="utf-8")
        print(f"  [gen] query written to {args.query_out}", file=sys.stderr)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_io(p: argparse.ArgumentParser, semantics: bool = True) -> None:
    p.add_argument("--model", "-m", required=True, metavar="FILE", help="Model file (JSON).")
    p.add_argument("--query", "-q", required=True, metavar="FILE", help="Query file (JSON).")
    p.add_argument(
        "--initial", default=None, metavar="P,P,...",
        help="Override the query's initial configuration (comma-separated number strings).",
    )
    if semantics:
        p.add_argument(
            "--semantics", "-s", default=None, choices=[s.value for s in SemanticsId],
            help="Override the query's semantics.",
        )
    p.add_argument(
        "--format", default="text", choices=["text", "json"],
        help="Output format (default: text). json prints one ResultRecord on stdout.",
    )
    p.add_argument("--verbose", "-v", action="store_true", default=False,
                   help="Progress output on stderr.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confmc",
        description="Chance/mass semantics of MDPs: exploration, CSMT and MSCT reachability.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("step", help="One exact step of the config MC.")
    _add_io(p)
    p.add_argument(
        "--method", default="compositional", choices=["compositional", "closed", "both"],
        help="Successor computation (default: compositional; 'both' cross-checks).",
    )

    p = sub.add_parser("explore", help="Bounded exact exploration and reach probability.")
    _add_io(p)
    p.add_argument("--depth", "-k", type=int, default=None, metavar="K",
                   help="Exploration depth (default: query option 'depth').")
    p.add_argument("--dot", default=None, metavar="OUT", help="Write the config graph as DOT.")
    p.add_argument("--plot", default=None, metavar="OUT",
                   help="Save the bounded reach curve as a PNG (needs a target).")

    p = sub.add_parser("simulate", help="Monte-Carlo simulation of the config MC.")
    _add_io(p)
    p.add_argument("--runs", type=int, default=None, metavar="N",
                   help="Number of runs (default: query option 'runs').")
    p.add_argument("--steps", type=int, default=None, metavar="N",
                   help="Step cap per run (default: query option 'step_cap').")
    p.add_argument("--seed", type=int, default=None, metavar="SEED")

    p = sub.add_parser("check-csmt", help="CSMT reachability by backward antichain iteration.")
    _add_io(p, semantics=False)
    p.add_argument("--K", type=int, default=None, dest="k", metavar="K",
                   help="Pullback samples per (action, element) (default: query option, 3).")
    p.add_argument("--L", type=int, default=None, dest="l", metavar="L",
                   help="Retries per sample on infeasibility (default: query option, 1).")
    p.add_argument("--loop-limit", type=int, default=None, metavar="N",
                   help="Maximum iterations (default: query option, 100).")
    p.add_argument("--seed", type=int, default=None, metavar="SEED")
    p.add_argument("--lp-backend", default=None, choices=["scipy", "exact"],
                   help="LP backend (default: $CONFMC_LP_BACKEND or scipy).")
    p.add_argument("--workers", "-j", type=int, default=1, metavar="N",
                   help="Parallel pullback workers (default: 1).")

    p = sub.add_parser("check-msct", help="MSCT threshold reachability by certificate synthesis.")
    _add_io(p, semantics=False)
    p.add_argument("--threshold", default=None, metavar="XI",
                   help="Override the query threshold.")
    p.add_argument("--gamma", default=None, metavar="G",
                   help="Submartingale scaling in (0,1) (default: query option, 99999/100000).")
    p.add_argument("--degree", type=int, default=None, metavar="D",
                   help="Handelman degree bound (default: query option, 4).")
    p.add_argument("--solver-cmd", default=None, metavar="CMD",
                   help="SMT solver command (default: $CONFMC_SOLVER_CMD or 'z3 -in -smt2').")
    p.add_argument("--timeout", type=float, default=None, metavar="SEC",
                   help="Solver timeout in seconds (default: $CONFMC_SOLVER_TIMEOUT or 120).")
    p.add_argument("--samples", type=int, default=10_000, metavar="N",
                   help="Sampled configurations in certificate verification (default: 10000).")
    p.add_argument("--seed", type=int, default=None, metavar="SEED")

    p = sub.add_parser("gen", help="Write a benchmark model (and optionally a query).")
    p.add_argument("generator", choices=["table1", "subsetsum", "casino", "exam"])
    p.add_argument("--out", "-o", default=None, metavar="FILE", help="Model output (default: stdout).")
    p.add_argument("--query-out", default=None, metavar="FILE", help="Also write a matching query.")
    p.add_argument("--set", default=None, metavar="A,B,...", help="subsetsum: the integer set.")
    p.add_argument("--target", type=int, default=None, metavar="T", help="subsetsum: the target sum.")
    p.add_argument("--games", type=int, default=5, metavar="N", help="casino: betting actions (default: 5).")
    p.add_argument("--rewards", type=int, default=2, metavar="M", help="casino: reward states (default: 2).")
    p.add_argument("--absorbing", action="store_true", default=False,
                   help="casino: reward states are absorbing instead of returning to P.")
    p.add_argument("--sets", type=int, default=2, metavar="N", help="exam: problem sets (default: 2).")
    p.add_argument("--grades", type=int, default=2, metavar="G", help="exam: grades (default: 2).")
    p.add_argument("--decay", default="1/2", metavar="P", help="exam: decay in (0,1) (default: 1/2).")
    p.add_argument("--seed", type=int, default=0, metavar="SEED")

    sub.add_parser("version", help="Print the version.")
    return parser


def _load(args):
    m = load_model(args.model)
    q = load_query(args.query, m)
    if args.initial:
        q.initial = Configuration(tuple(parse_rational(v) for v in args.initial.split(",")))
        if len(q.initial) != m.n_states:
            raise InvalidInput(f"--initial has {len(q.initial)} entries for {m.n_states} states")
    return m, q


def _dispatch(args) -> Optional[ResultRecord]:
    if args.command == "version":
        print(f"confmc {__version__}")
        return None
    if args.command == "gen":
        run_gen(args)
        return None

    m, q = _load(args)
    semantics = SemanticsId.parse(args.semantics) if getattr(args, "semantics", None) else None
    if args.command == "step":
        return run_step(m, q, semantics, method=args.method)
    if args.command == "explore":
        return run_explore(m, q, args.depth, semantics, dot=args.dot, plot=args.plot)
    if args.command == "simulate":
        return run_simulate(m, q, args.runs, args.steps, args.seed, semantics)
    if args.command == "check-csmt":
        o = q.options
        cfg = PullbackConfig(
            k=args.k if args.k is not None else o.k,
            l=args.l if args.l is not None else o.l,
            loop_limit=args.loop_limit if args.loop_limit is not None else o.loop_limit,
            backend=args.lp_backend,
            seed=args.seed if args.seed is not None else o.seed,
            workers=args.workers,
        )
        return run_check_csmt(m, q, cfg, verbose=args.verbose)
    o = q.options
    cfg = SynthesisConfig(
        gamma=parse_rational(args.gamma if args.gamma is not None else o.gamma),
        degree=args.degree if args.degree is not None else o.degree,
        solver_cmd=args.solver_cmd,
        timeout=args.timeout,
        samples=args.samples,
        seed=args.seed if args.seed is not None else o.seed,
    )
    threshold = parse_rational(args.threshold) if args.threshold is not None else None
    return run_check_msct(m, q, cfg, threshold=threshold, verbose=args.verbose)


def cli_main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        rec = _dispatch(args)
    except ConfmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return InvalidInput.exit_code
    if rec is not None:
        _emit(rec, getattr(args, "format", "text"))
    return 0


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
