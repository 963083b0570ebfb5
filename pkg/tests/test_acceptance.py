"""Acceptance criteria at desk scale; each test prints one verdict line."""

import math

import numpy as np
import pytest

from tomosel import NoiseModel, RiskSetup, default_noise_family
from tomosel.estimator import CoefficientDesign, IndexSets
from tomosel.phantoms import theta_quadrature
from tomosel.properties import (
    check_eta_covariance,
    check_eta_projection,
    check_fourier_tail,
    check_orthogonality,
    check_parseval,
    check_penalty_bound,
    check_radon_lipschitz,
    check_sigma_decay,
    check_U_bound,
)
from tomosel.riskharness import oracle_report, simulate, oracle_factor

SEED = 20240
MOMENT_REPS = 10_000
RISK_REPS = 500
LAWS = default_noise_family().models


@pytest.fixture
def verdict(capsys):
    def emit(number, passed, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}  {detail}")
        assert passed, detail

    return emit


def test_1_orthogonality(design, verdict):
    r = check_orthogonality(design)
    verdict(1, r.passed, r.detail)


def test_2_eta_covariance(design, verdict):
    r = check_eta_covariance(design, NoiseModel("gaussian", 0.05), MOMENT_REPS, SEED)
    verdict(2, r.passed, f"gaussian, {r.detail}: {r.statistic:.2f} <= 3")


def test_3_eta_projection(design, verdict):
    rs = [check_eta_projection(design, nz, MOMENT_REPS, SEED) for nz in LAWS]
    detail = ", ".join(f"{nz.kind} max {r.statistic:.3f} <= {r.bound:.2f}" for nz, r in zip(LAWS, rs))
    verdict(3, all(r.passed for r in rs), detail)


def test_4_U_bound(design, verdict):
    rs = [check_U_bound(design, nz, MOMENT_REPS, SEED) for nz in LAWS]
    detail = ", ".join(f"{nz.kind} max {r.statistic:.3f} <= {r.bound:.2f}" for nz, r in zip(LAWS, rs))
    verdict(4, all(r.passed for r in rs), detail)


def test_5_radon_lipschitz(phantom, verdict):
    r = check_radon_lipschitz(phantom, 1000, SEED)
    verdict(5, r.passed, f"{r.detail} = {r.statistic:.3e} <= 1e-9")


def test_6_fourier_tail(phantom, verdict):
    r = check_fourier_tail(phantom, (4, 8, 16))
    verdict(6, r.passed, r.detail)


def test_7_penalty_bound(desk, verdict):
    rs = [check_penalty_bound(desk, nz, RISK_REPS, SEED) for nz in LAWS]
    detail = ", ".join(f"{nz.kind} {r.statistic:.4f} <= 0" for nz, r in zip(LAWS, rs))
    verdict(7, all(r.passed for r in rs), f"max P - (mean Er + 3 SE): {detail}")


def test_8_sigma_decay(phantom, verdict):
    r = check_sigma_decay(phantom, NoiseModel("gaussian", 0.05), (4, 8, 16), q_star=2.0, replications=200, seed=SEED)
    verdict(8, r.passed, f"median |sigma_hat - sigma|: {r.detail}")


@pytest.fixture(scope="module")
def reports(phantom):
    fam = default_noise_family()
    return {q: oracle_report(RiskSetup(phantom, 8, q, delta=0.1), fam, RISK_REPS, SEED) for q in (34, 68)}


def _slack_se(nr, q, delta):
    se_oracle = min(row[3] for row in nr["per_lambda"] if row[2] == nr["oracle_risk"])
    return q * delta * math.hypot(nr["selected"]["se"], oracle_factor(delta) * se_oracle)


def test_9a_noiseless_oracle(desk, verdict):
    reps = simulate(desk, NoiseModel("gaussian", 0.0), RISK_REPS, SEED)
    exact = bool(np.all(reps.er_selected == reps.er.min(axis=1)))
    rep = oracle_report(desk, [NoiseModel("gaussian", 0.0)], RISK_REPS, SEED)
    nr = rep.per_noise["gaussian"]
    ok = exact and nr["selected"]["mean"] == nr["oracle_risk"] and nr["slack"] <= 0
    verdict("9a", ok, f"selected {nr['selected']['mean']:.6g} == oracle {nr['oracle_risk']:.6g}")


def test_9b_oracle_inequality(reports, verdict):
    ok, parts = True, []
    for law in LAWS:
        a, b = reports[34].per_noise[law.kind], reports[68].per_noise[law.kind]
        tol = 3 * math.hypot(_slack_se(a, 34, 0.1), _slack_se(b, 68, 0.1))
        ok &= b["slack_q_delta"] <= a["slack_q_delta"] + tol
        ok &= reports[34].factor == 2.0
        parts.append(
            f"{law.kind} ratio {a['oracle_ratio']:.3f}/{b['oracle_ratio']:.3f} slack*q*delta {a['slack_q_delta']:.3f}->{b['slack_q_delta']:.3f}"
        )
    verdict("9b", ok, "; ".join(parts))


def test_9c_robust(reports, verdict):
    a, b = reports[34].robust, reports[68].robust
    tol = 3 * 0.1 * math.hypot(34 * a["sup_selected_se"], 68 * b["sup_selected_se"])
    ok = b["slack_q_delta"] <= a["slack_q_delta"] + tol
    verdict(
        "9c",
        ok,
        f"sup over laws ({a['sup_kind']}/{b['sup_kind']}): ratio {a['oracle_ratio']:.3f}/{b['oracle_ratio']:.3f}, "
        f"slack*q*delta {a['slack_q_delta']:.3f}->{b['slack_q_delta']:.3f}",
    )


def test_10_coefficient_accuracy(phantom, verdict):
    q = 256
    sets = IndexSets(4, 2)
    design = CoefficientDesign(sets, q)
    est = design.noiseless(phantom)
    ref = theta_quadrature(phantom, sets.S)
    err = np.abs(est - ref)
    tol = np.maximum(1e-3, 5 / q * np.abs(ref))
    worst = int(np.argmax(err / tol))
    mod = float(np.max(np.abs(np.abs(est) - np.abs(ref))))
    verdict(
        10,
        bool(np.all(err <= tol)),
        f"max |err|/tol = {err[worst] / tol[worst]:.2f} at j={tuple(int(v) for v in sets.S[worst])} "
        f"(|err| {err[worst]:.2e}, tol {tol[worst]:.2e}); {int(np.sum(err > tol))}/{sets.r_n} exceed; "
        f"moduli agree to {mod:.1e}",
    )


def test_11_parseval(desk, verdict):
    r = check_parseval(desk, NoiseModel("gaussian", 0.05), SEED, 128)
    verdict(11, r.passed, f"{r.detail}, relative gap {r.statistic:.2e} <= 0.01")
