from __future__ import annotations

from pathlib import Path

import pandas as pd
import pytest

from confmc.batch import BatchAborted, BatchConfig, df_to_jobs, load_input, main, print_summary, run_batch
from confmc.benchmarks import table1, table1_query
from confmc.modelfile import serialize_model, serialize_query


@pytest.fixture
def bench_dir(tmp_path) -> Path:
    m = table1()
    (tmp_path / "models").mkdir()
    (tmp_path / "models" / "table1.json").write_text(serialize_model(m))
    (tmp_path / "models" / "table1.query.json").write_text(serialize_query(table1_query(m), m))
    return tmp_path


def _write_csv(path: Path, rows) -> Path:
    pd.DataFrame(rows).to_csv(path, index=False)
    return path


def test_load_input_requires_columns(tmp_path):
    csv = _write_csv(tmp_path / "bench.csv", [{"name": "x", "command": "reach"}])
    with pytest.raises(ValueError, match="missing required columns"):
        load_input(str(csv))


def test_load_input_rejects_unknown_command(tmp_path):
    csv = _write_csv(tmp_path / "bench.csv", [{"name": "x", "command": "solve", "model": "m", "query": "q"}])
    with pytest.raises(ValueError, match="Unknown command"):
        load_input(str(csv))


def test_load_input_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_input(str(tmp_path / "none.csv"))


def test_df_to_jobs_expands_trials(tmp_path):
    df = pd.DataFrame([
        {"name": "t1", "command": "check-csmt", "model": "m.json", "query": "/abs/q.json", "trials": 3, "seed": 10},
        {"name": "t2", "command": "reach", "model": "m.json", "query": "q.json", "trials": None, "seed": None},
    ])
    jobs = df_to_jobs(df, tmp_path)
    assert [j.label for j in jobs] == ["t1_t0", "t1_t1", "t1_t2", "t2_t0"]
    assert [j.seed for j in jobs] == [10, 11, 12, None]
    assert jobs[0].model_path == tmp_path / "m.json"
    assert jobs[0].query_path == Path("/abs/q.json")


def test_run_batch_writes_records(bench_dir):
    csv = _write_csv(bench_dir / "bench.csv", [
        {"name": "t1_reach", "command": "reach", "model": "models/table1.json",
         "query": "models/table1.query.json", "trials": 1, "status": "toy"},
        {"name": "t1_csmt", "command": "check-csmt", "model": "models/table1.json",
         "query": "models/table1.query.json", "trials": 2, "status": "toy"},
    ])
    out = bench_dir / "out"
    results = run_batch(BatchConfig(input_path=str(csv), output_dir=out, lp_backend="exact"))
    assert all(r.success for r in results)
    assert len(results) == 3
    assert (out / "toy" / "t1_csmt_t1.json").exists()
    verdicts = {r.job.label: r.record.verdict for r in results}
    assert verdicts["t1_csmt_t0"] == "reachable"
    # only the b branch (weight 3/5) lands in the target; both successors are absorbing
    reach = next(r.record for r in results if r.job.name == "t1_reach")
    assert reach.probabilities["reach"] == "3/5"
    assert verdicts["t1_reach_t0"] == "below_threshold"

    print_summary(results, out)
    summary = pd.read_csv(out / "batch_summary.csv")
    assert len(summary) == 3
    runtimes = pd.read_csv(out / "runtime_summary.csv")
    assert set(runtimes["name"]) == {"t1_reach", "t1_csmt"}
    assert runtimes.set_index("name").loc["t1_csmt", "trials"] == 2
    assert not (out / "failed_jobs.txt").exists()


def test_failures_reported_and_exit_code(bench_dir):
    csv = _write_csv(bench_dir / "bench.csv", [
        {"name": "ok", "command": "reach", "model": "models/table1.json", "query": "models/table1.query.json"},
        {"name": "broken", "command": "reach", "model": "models/missing.json", "query": "models/table1.query.json"},
    ])
    out = bench_dir / "out"
    with pytest.raises(SystemExit) as exc:
        main([str(csv), "-o", str(out), "--plot"])
    assert exc.value.code == 1
    assert "broken_t0" in (out / "failed_jobs.txt").read_text()
    assert (out / "ok_t0.json").exists()
    assert (out / "runtime.png").exists()


def test_parallel_workers(bench_dir):
    csv = _write_csv(bench_dir / "bench.csv", [
        {"name": "csmt", "command": "check-csmt", "model": "models/table1.json",
         "query": "models/table1.query.json", "trials": 3},
    ])
    results = run_batch(BatchConfig(input_path=str(csv), output_dir=bench_dir / "out", workers=3))
    assert sorted(r.job.label for r in results) == ["csmt_t0", "csmt_t1", "csmt_t2"]
    assert {r.record.verdict for r in results} == {"reachable"}


def test_fail_fast(bench_dir):
    csv = _write_csv(bench_dir / "bench.csv", [
        {"name": "broken", "command": "reach", "model": "nope.json", "query": "nope.json"},
        {"name": "ok", "command": "reach", "model": "models/table1.json", "query": "models/table1.query.json"},
    ])
    with pytest.raises(BatchAborted) as exc:
        run_batch(BatchConfig(input_path=str(csv), output_dir=bench_dir / "out", fail_fast=True))
    assert isinstance(exc.value, RuntimeError)
    assert [r.job.name for r in exc.value.results] == ["broken"]


def test_fail_fast_still_writes_summary(bench_dir):
    csv = _write_csv(bench_dir / "bench.csv", [
        {"name": "ok", "command": "reach", "model": "models/table1.json", "query": "models/table1.query.json"},
        {"name": "broken", "command": "reach", "model": "nope.json", "query": "nope.json"},
        {"name": "later", "command": "reach", "model": "models/table1.json", "query": "models/table1.query.json"},
    ])
    out = bench_dir / "out"
    with pytest.raises(SystemExit) as exc:
        main([str(csv), "-o", str(out), "--fail-fast"])
    assert exc.value.code == 1
    summary = pd.read_csv(out / "batch_summary.csv")
    assert list(summary["name"]) == ["ok", "broken"]
    assert "broken_t0" in (out / "failed_jobs.txt").read_text()
    assert not (out / "later_t0.json").exists()
