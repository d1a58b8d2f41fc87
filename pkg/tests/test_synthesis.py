from __future__ import annotations

from fractions import Fraction as F

import pytest

from confmc.benchmarks import casino_query, gen_casino
from confmc.core import ActionWord, Configuration, Dist
from confmc.errors import DimensionMismatch, SolverSpawnFailure
from confmc.explorer import ExplicitConfigs, UpwardGenerators, estimate_reach, reach_prob_bounded
from confmc.semantics import SemanticsId
from confmc.synthesis import (
    CERTIFIED,
    UNKNOWN,
    Certificate,
    SynthesisConfig,
    check_msct,
    verify_certificate,
)

GAMMA = F(99999, 100000)
S0 = Configuration.dirac(0, 2)
HALF_UP = UpwardGenerators(((0, F(1, 2)),))


def _chain_cert(r=(F(1, 2), 0, F(1, 2)), xi=F(1, 2)) -> Certificate:
    # single action always chosen; R(d) = r0 + r1 d(s0) + r2 d(s1)
    return Certificate(theta=((1, 0, 0),), s=(1, 0, 0), r=r, gamma=GAMMA, xi=xi)


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

def test_hand_certificate_verifies(chain):
    report = verify_certificate(_chain_cert(), chain, S0, HALF_UP, samples=500)
    assert report.ok, report.summary()
    assert report.vertices_checked == 2
    assert 0 < report.samples_checked <= 500


def test_certificate_values(chain):
    cert = _chain_cert()
    assert cert.value((1, 0)) == F(1, 2)
    assert cert.value((0, 1)) == 1
    # R(M^T d) = 1 everywhere
    assert cert.inductive_margin(chain, (F(1, 2), F(1, 2))) == GAMMA - F(3, 4)
    assert cert.scheduler().evaluate([S0]) == Dist.dirac(0)


def test_threshold_violation(chain):
    report = verify_certificate(_chain_cert(xi=F(3, 4)), chain, S0, HALF_UP, samples=50)
    assert [v.check for v in report.violations] == ["reachable"]


def test_bound_violation(chain):
    report = verify_certificate(_chain_cert(r=(0, 0, 2)), chain, S0, HALF_UP, samples=50)
    assert "bound" in {v.check for v in report.violations}


def test_inductive_violation(chain):
    # R = d(s0) drops to 0 after one step
    report = verify_certificate(_chain_cert(r=(0, 1, 0)), chain, S0, HALF_UP, samples=50, stop_after=1)
    checks = [v.check for v in report.violations]
    assert checks == ["inductive"]
    assert report.violations[0].config == (1, 0)
    assert not report.ok


def test_scheduler_violation(chain):
    cert = Certificate(theta=((1, 0, 0),), s=(2, 0, 0), r=(F(1, 2), 0, F(1, 2)), gamma=GAMMA, xi=F(1, 2))
    report = verify_certificate(cert, chain, S0, HALF_UP, samples=10)
    assert "schedule_sum" in {v.check for v in report.violations}


def test_dimension_mismatch(t1, chain):
    with pytest.raises(DimensionMismatch):
        verify_certificate(_chain_cert(), t1, Configuration.dirac(0, 3), UpwardGenerators(((0, 0, 1),)))


def test_trivial_certificate_shape(t1):
    cert = Certificate.trivial(t1, GAMMA, F(1, 2))
    assert cert.s[0] == t1.n_actions
    assert cert.value((F(1, 3), F(1, 3), F(1, 3))) == 1
    assert cert.to_dict(t1)["theta"]["b"] == ["1", "0", "0", "0"]


def test_from_model_defaults_missing_to_zero(chain):
    from confmc.constraints import TemplateVars

    tv = TemplateVars.create(chain)
    cert = Certificate.from_model(tv, {"theta_0_0": F(1), "s_0": F(1), "r_0": F(1, 2), "r_2": F(1, 2)}, GAMMA, F(1, 2))
    assert cert == _chain_cert()


# ---------------------------------------------------------------------------
# check_msct
# ---------------------------------------------------------------------------

def test_whole_simplex_target_needs_no_solver(t1):
    out = check_msct(
        t1, Configuration.dirac(0, 3), UpwardGenerators(((0, 0, 0),)), F(1, 2),
        solver_cmd="confmc-no-such-solver-binary",
    )
    assert out.tag == CERTIFIED
    assert out.certified
    assert out.report.ok


def test_missing_solver_raises(chain):
    with pytest.raises(SolverSpawnFailure):
        check_msct(chain, S0, HALF_UP, F(1, 2), solver_cmd="confmc-no-such-solver-binary", timeout=10)


def test_zero_timeout_is_unknown(chain):
    out = check_msct(chain, S0, HALF_UP, F(1, 2), timeout=0)
    assert out.tag == UNKNOWN
    assert out.reason == "timeout"
    assert "solve" in out.timings


def test_config_kwargs():
    kw = SynthesisConfig(degree=2, seed=3).as_kwargs()
    assert kw["degree"] == 2
    assert kw["rng_seed"] == 3
    assert kw["gamma"] == GAMMA


def test_explicit_target_rejected(chain):
    from confmc.errors import InvalidInput

    with pytest.raises(InvalidInput):
        check_msct(chain, S0, ExplicitConfigs((Configuration.dirac(1, 2),)), F(1, 2))


@pytest.mark.solver
def test_chain_certified_with_solver(chain):
    xi = F(9, 10)
    out = check_msct(chain, S0, HALF_UP, xi, degree=2, timeout=120, samples=10_000)
    assert out.tag == CERTIFIED, out.reason
    assert out.certificate.value(S0) >= xi
    assert verify_certificate(out.certificate, chain, S0, HALF_UP, samples=10_000).ok
    est = estimate_reach(chain, out.certificate.scheduler(), SemanticsId.MSCT, S0, HALF_UP, 10_000, 50, rng_seed=0)
    assert est.frequency >= float(xi) - 3 * est.stderr


@pytest.mark.solver
def test_casino_certified_with_solver():
    m = gen_casino(5, 2, rng_seed=7)
    q = casino_query(m)
    best = max(range(1, m.n_actions), key=lambda a: m.matrices[a][0][1])
    lower, _ = reach_prob_bounded(m, ActionWord((), best), SemanticsId.MSCT, q.initial, q.target, 3)
    assert lower > 0
    out = check_msct(m, q.initial, q.target, q.threshold, degree=2, timeout=120, samples=2000)
    assert out.tag == CERTIFIED, out.reason


@pytest.mark.solver
def test_table1_msct_is_not_certified(t1):
    H = UpwardGenerators(((0, 0, F(7, 10)),))
    out = check_msct(t1, Configuration.dirac(0, 3), H, F(9, 10), timeout=60, samples=1000)
    assert out.tag == UNKNOWN
