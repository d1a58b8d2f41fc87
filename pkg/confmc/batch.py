"""Batch benchmark runner.

Reads a CSV or Parquet file whose rows each describe one benchmark, runs
every benchmark for the requested number of trials and writes one JSON
ResultRecord per trial plus aggregated CSV summaries.

Required columns in the input file
------------------------------------
- ``name``     : benchmark label, used in output file names and summaries
- ``command``  : one of ``check-csmt``, ``check-msct``, ``reach``
- ``model``    : model file (relative paths are resolved against the input file)
- ``query``    : query file (same resolution rule)

Optional columns (used when present)
--------------------------------------
- ``trials``   : repetitions of the benchmark (default: 1)
- ``seed``     : base seed; trial *t* runs with ``seed + t`` (default: the query's seed)
- ``status``   : group label, records are placed in a sub-directory of that name

Output structure
-----------------
    <output_dir>/<status>/<name>_t<trial>.json
    <output_dir>/batch_summary.csv
    <output_dir>/runtime_summary.csv
    <output_dir>/runtime.png                 (with --plot)
    <output_dir>/failed_jobs.txt             (only when something failed)

Usage examples
--------------
    confmc-batch bench.csv --output-dir out/
    confmc-batch bench.csv -o out/ -j 4 --plot
    confmc-batch bench.csv -o out/ --lp-backend exact --fail-fast
"""

from __future__ import annotations

import argparse
import concurrent.futures
import sys
import traceback
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import pandas as pd

from confmc.antichain import PullbackConfig
from confmc.cli import run_check_csmt, run_check_msct, run_reach
from confmc.modelfile import ResultRecord, load_model, load_query, parse_rational
from confmc.synthesis import SynthesisConfig


COMMANDS = ("check-csmt", "check-msct", "reach")


# ---------------------------------------------------------------------------
# Jobs
# ---------------------------------------------------------------------------

@dataclass
class BenchJob:
    """One (benchmark, trial) pair."""
    name: str
    command: str
    model_path: Path
    query_path: Path
    trial: int = 0
    seed: Optional[int] = None
    status: Optional[str] = None

    @property
    def label(self) -> str:
        return f"{self.name}_t{self.trial}"


class BatchAborted(RuntimeError):
    """Raised under fail_fast; carries the results gathered so far."""

    def __init__(self, message: str, results: List["JobResult"]):
        super().__init__(message)
        self.results = results


@dataclass
class JobResult:
    job: BenchJob
    success: bool
    record: Optional[ResultRecord] = None
    output_path: Optional[Path] = None
    error: str = ""


# ---------------------------------------------------------------------------
# Input loading
# ---------------------------------------------------------------------------

REQUIRED_COLUMNS = {"name", "command", "model", "query"}


def load_input(path: str) -> pd.DataFrame:
    """Load a CSV or Parquet file and validate required columns."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Input file not found: {p}")

    if p.suffix.lower() in (".parquet", ".pq"):
        df = pd.read_parquet(p)
    else:
        df = pd.read_csv(p)

    missing = REQUIRED_COLUMNS - set(df.columns)
    if missing:
        raise ValueError(
            f"Input file is missing required columns: {missing}\n"
            f"Found columns: {list(df.columns)}"
        )
    unknown = sorted(set(df["command"]) - set(COMMANDS))
    if unknown:
        raise ValueError(f"Unknown command(s) {unknown}; expected one of {list(COMMANDS)}")
    return df


def df_to_jobs(df: pd.DataFrame, base_dir: Path) -> List[BenchJob]:
    """Expand every row into ``trials`` jobs."""

    def _resolve(value) -> Path:
        p = Path(str(value))
        return p if p.is_absolute() else base_dir / p

    jobs: List[BenchJob] = []
    for _, r in df.iterrows():
        trials = 1
        if "trials" in df.columns and pd.notna(r.get("trials")):
            trials = max(1, int(r["trials"]))

        seed: Optional[int] = None
        if "seed" in df.columns and pd.notna(r.get("seed")):
            seed = int(r["seed"])

        status: Optional[str] = None
        if "status" in df.columns:
            raw_status = r.get("status")
            if pd.notna(raw_status) and str(raw_status).strip():
                status = str(raw_status).strip()

        for t in range(trials):
            jobs.append(BenchJob(
                name=str(r["name"]),
                command=str(r["command"]),
                model_path=_resolve(r["model"]),
                query_path=_resolve(r["query"]),
                trial=t,
                seed=seed + t if seed is not None else None,
                status=status,
            ))
    return jobs


# ---------------------------------------------------------------------------
# Single job
# ---------------------------------------------------------------------------

@dataclass
class BatchConfig:
    input_path: str
    output_dir: Path
    workers: int = 1
    fail_fast: bool = False
    plot: bool = False
    lp_backend: Optional[str] = None
    solver_cmd: Optional[str] = None
    timeout: Optional[float] = None
    samples: int = 10_000
    verbose: bool = False


def run_job(job: BenchJob, cfg: BatchConfig) -> ResultRecord:
    m = load_model(job.model_path)
    q = load_query(job.query_path, m)
    o = q.options
    seed = job.seed if job.seed is not None else o.seed + job.trial

    if job.command == "check-csmt":
        pcfg = PullbackConfig(k=o.k, l=o.l, loop_limit=o.loop_limit, backend=cfg.lp_backend, seed=seed)
        return run_check_csmt(m, q, pcfg, verbose=cfg.verbose)
    if job.command == "check-msct":
        scfg = SynthesisConfig(
            gamma=parse_rational(o.gamma),
            degree=o.degree,
            solver_cmd=cfg.solver_cmd,
            timeout=cfg.timeout,
            samples=cfg.samples,
            seed=seed,
        )
        return run_check_msct(m, q, scfg, verbose=cfg.verbose)
    return run_reach(m, q)


def _status_dir(output_root: Path, status: Optional[str], has_status_column: bool) -> Path:
    if not has_status_column:
        return output_root
    return output_root / (status if status else "unknown")


# ---------------------------------------------------------------------------
# Batch runner
# ---------------------------------------------------------------------------

def run_batch(cfg: BatchConfig) -> List[JobResult]:
    """Main batch pipeline. Returns list of per-job results."""
    print(f"Loading input: {cfg.input_path}")
    df = load_input(cfg.input_path)
    has_status_column = "status" in df.columns
    jobs = df_to_jobs(df, Path(cfg.input_path).resolve().parent)
    print(f"  {len(df)} rows → {len(jobs)} job(s) to run.")
    if has_status_column:
        counts = df["status"].fillna("unknown").value_counts().to_dict()
        print(f"  Status groups: {counts}")

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    results: List[JobResult] = []

    def _process(job: BenchJob) -> JobResult:
        try:
            record = run_job(job, cfg)
            out_dir = _status_dir(cfg.output_dir, job.status, has_status_column)
            out_dir.mkdir(parents=True, exist_ok=True)
            out_path = out_dir / f"{job.label}.json"
            out_path.write_text(record.model_dump_json(indent=2) + "\n", encoding="utf-8")
            return JobResult(job=job, success=True, record=record, output_path=out_path)
        except Exception as e:
            tb = traceback.format_exc()
            print(f"  ERROR [{job.label}]: {e}\n{tb}", file=sys.stderr)
            return JobResult(job=job, success=False, error=str(e))

    if cfg.workers <= 1:
        for job in jobs:
            print(f"\n--- [{job.command}] {job.label} ---")
            result = _process(job)
            results.append(result)
            if result.success:
                print(f"  verdict={result.record.verdict}  runtime={result.record.runtime_s:.3f}s")
            elif cfg.fail_fast:
                raise BatchAborted(result.error, results)
    else:
        print(f"\nProcessing {len(jobs)} job(s) with {cfg.workers} workers...")
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {pool.submit(_process, job): job for job in jobs}
            for future in concurrent.futures.as_completed(futures):
                result = future.result()
                results.append(result)
                status = "OK" if result.success else "FAIL"
                print(
                    f"  [{status}] {result.job.label}"
                    + (f" → {result.record.verdict}" if result.success else f": {result.error}")
                )
                if not result.success and cfg.fail_fast:
                    pool.shutdown(wait=False, cancel_futures=True)
                    raise BatchAborted(result.error, results)

    return results


# ---------------------------------------------------------------------------
# Summary report
# ---------------------------------------------------------------------------

def results_frame(results: List[JobResult]) -> pd.DataFrame:
    return pd.DataFrame([
        {
            "name": r.job.name,
            "command": r.job.command,
            "trial": r.job.trial,
            "seed": r.record.seed if r.record is not None else r.job.seed,
            "status": r.job.status,
            "success": r.success,
            "verdict": r.record.verdict if r.record is not None else "error",
            "runtime_s": r.record.runtime_s if r.record is not None else float("nan"),
            "output_path": str(r.output_path) if r.output_path else "",
            "error": r.error,
        }
        for r in results
    ])


def print_summary(results: List[JobResult], output_dir: Path, plot: bool = False) -> None:
    ok = [r for r in results if r.success]
    fail = [r for r in results if not r.success]

    print(f"\n{'='*60}")
    print(f"  Batch complete: {len(ok)} succeeded / {len(fail)} failed")
    print(f"  Output directory: {output_dir.resolve()}")
    print(f"{'='*60}")

    if fail:
        print(f"\nFailed jobs ({len(fail)}):")
        failed_path = output_dir / "failed_jobs.txt"
        with open(failed_path, "w") as fh:
            for r in fail:
                entry = f"{r.job.label} [{r.job.command}]: {r.error}"
                print(f"  {entry}")
                fh.write(entry + "\n")
        print(f"\n  Failed jobs list: {failed_path}")

    if not results:
        return
    df = results_frame(results)
    summary_path = output_dir / "batch_summary.csv"
    df.to_csv(summary_path, index=False)
    print(f"  Summary CSV: {summary_path}")

    from confmc.report import plot_runtime, runtime_summary

    done = df[df["success"]]
    if done.empty:
        return
    runtimes = runtime_summary(done)
    runtime_path = output_dir / "runtime_summary.csv"
    runtimes.to_csv(runtime_path, index=False)
    print(f"  Runtime CSV: {runtime_path}")
    if plot:
        plot_runtime(runtimes, output_dir / "runtime.png")


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def parse_args(argv: Optional[List[str]] = None):
    parser = argparse.ArgumentParser(
        description=(
            "Batch benchmark runner.\n"
            "Reads a CSV/Parquet with columns [name, command, model, query] "
            "and writes one JSON record per trial plus CSV summaries."
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument(
        "input",
        help="CSV or Parquet file with columns: name, command, model, query.",
    )
    parser.add_argument(
        "--output-dir", "-o",
        default="batch_output",
        metavar="DIR",
        help="Root directory for result records (default: ./batch_output/).",
    )
    parser.add_argument(
        "--workers", "-j",
        type=int,
        default=1,
        metavar="N",
        help="Number of parallel jobs (default: 1).",
    )
    parser.add_argument(
        "--fail-fast",
        action="store_true",
        default=False,
        help="Abort the batch on the first error instead of continuing.",
    )
    parser.add_argument(
        "--plot",
        action="store_true",
        default=False,
        help="Also save runtime.png (mean runtime per benchmark).",
    )
    parser.add_argument(
        "--lp-backend",
        default=None,
        choices=["scipy", "exact"],
        help="LP backend for check-csmt (default: $CONFMC_LP_BACKEND or scipy).",
    )
    parser.add_argument(
        "--solver-cmd",
        default=None,
        metavar="CMD",
        help="SMT solver command for check-msct (default: $CONFMC_SOLVER_CMD or 'z3 -in -smt2').",
    )
    parser.add_argument(
        "--timeout",
        type=float,
        default=None,
        metavar="SEC",
        help="Solver timeout per job in seconds (default: $CONFMC_SOLVER_TIMEOUT or 120).",
    )
    parser.add_argument(
        "--samples",
        type=int,
        default=10_000,
        metavar="N",
        help="Sampled configurations in certificate verification (default: 10000).",
    )
    parser.add_argument(
        "--verbose", "-v",
        action="store_true",
        default=False,
        help="Per-job progress output on stderr.",
    )
    return parser.parse_args(argv)


def main(argv: Optional[List[str]] = None):
    args = parse_args(argv)

    cfg = BatchConfig(
        input_path=args.input,
        output_dir=Path(args.output_dir),
        workers=args.workers,
        fail_fast=args.fail_fast,
        plot=args.plot,
        lp_backend=args.lp_backend,
        solver_cmd=args.solver_cmd,
        timeout=args.timeout,
        samples=args.samples,
        verbose=args.verbose,
    )

    try:
        results = run_batch(cfg)
    except BatchAborted as exc:
        print(f"\n  Aborted (--fail-fast): {exc}", file=sys.stderr)
        results = exc.results
    print_summary(results, cfg.output_dir, plot=cfg.plot)

    n_fail = sum(1 for r in results if not r.success)
    sys.exit(1 if n_fail > 0 else 0)


if __name__ == "__main__":
    main()
