import json
import math

import numpy as np
import pytest

from tomosel import NoiseModel, RiskSetup
from tomosel.estimator import ConfigurationError, bias_book
from tomosel.riskharness import (
    RiskEstimate,
    empirical_error,
    mc_risk,
    oracle_report,
    robust_risk,
    simulate,
    oracle_factor,
)
from tomosel.phantoms import cube_quadrature, evaluate
from tomosel.selector import WeightVector

SEED = 20240


def test_oracle_factor():
    assert oracle_factor(0.1) == pytest.approx(2.0, rel=1e-15)


def test_zero_weights_give_image_energy(desk):
    er = float(desk.empirical_error(WeightVector.constant(desk.sets, 0.0), desk.a))
    pts, wts = cube_quadrature(1.0, 2, nodes=64, panels=8)
    norm2 = float(wts @ evaluate(desk.phantom, pts) ** 2)
    assert er <= norm2
    assert norm2 - er <= desk.tail_residual_bound


def test_noiseless_full_box_error(phantom, desk):
    bb = bias_book(phantom, desk.design, desk.theta)
    er = float(desk.empirical_error(WeightVector.constant(desk.sets, 1.0), desk.a))
    assert er == pytest.approx(desk.tail_energy + float(np.sum(np.abs(bb.b) ** 2)), rel=1e-12)


def test_empirical_error_shapes(desk):
    W = desk.W
    th = np.stack([desk.a, desk.a])
    assert empirical_error(W, th, desk.theta).shape == (2, W.shape[0])
    with pytest.raises(ValueError):
        empirical_error(W, desk.a[:-1], desk.theta)


def test_zero_phantom_zero_risk(zero_phantom):
    s = RiskSetup(zero_phantom, 8, 34)
    r = mc_risk(s, NoiseModel("gaussian", 0.05), 100, SEED, weights=WeightVector.constant(s.sets, 0.0))
    assert (r.mean, r.se) == (0.0, 0.0)


def test_replication_floor(desk, gaussian):
    with pytest.raises(ValueError):
        mc_risk(desk, gaussian, 50)


def test_risk_decreases_with_q(phantom, gaussian):
    risks = []
    for q in (34, 68):
        s = RiskSetup(phantom, 8, q)
        risks.append(mc_risk(s, gaussian, 500, SEED, weights=WeightVector.constant(s.sets, 1.0)))
    gap = risks[0].mean - risks[1].mean
    assert gap > 3 * math.hypot(risks[0].se, risks[1].se)


def test_selector_not_below_oracle(desk, gaussian):
    reps = simulate(desk, gaussian, 500, SEED)
    sel = RiskEstimate.of(reps.er_selected)
    oracle = reps.er.mean(axis=0).min()
    assert sel.mean >= oracle - 3 * sel.se


def test_simulate_is_schedule_independent(desk, gaussian):
    a = simulate(desk, gaussian, 600, SEED)
    b = simulate(desk, gaussian, 600, SEED, n_jobs=2)
    assert np.array_equal(a.er, b.er) and np.array_equal(a.selected, b.selected)
    # a prefix of the run reproduces the first replications
    c = simulate(desk, gaussian, 300, SEED)
    assert np.array_equal(a.er[:300], c.er)


def test_robust_singleton_equals_mc(desk, gaussian):
    rb = robust_risk(desk, [gaussian], 200, SEED)
    assert rb["sup_selected"] == mc_risk(desk, gaussian, 200, SEED).mean
    assert rb["sup_kind"] == "gaussian"


def test_robust_sup_named_and_monotone(desk):
    two = [NoiseModel("gaussian", 0.05), NoiseModel("rademacher", 0.05)]
    rb2 = robust_risk(desk, two, 200, SEED)
    rb3 = robust_risk(desk, two + [NoiseModel("laplace", 0.05)], 200, SEED)
    assert rb2["sup_kind"] in {"gaussian", "rademacher"}
    assert rb2["sup_selected"] == max(v["mean"] for v in rb2["selected"].values())
    assert rb3["sup_selected"] >= rb2["sup_selected"]
    with pytest.raises(ValueError):
        robust_risk(desk, [], 200, SEED)


def test_noiseless_selection_is_oracle(desk):
    rep = oracle_report(desk, [NoiseModel("gaussian", 0.0)], 100, SEED)
    nr = rep.per_noise["gaussian"]
    reps = simulate(desk, NoiseModel("gaussian", 0.0), 100, SEED)
    assert np.all(reps.er_selected == reps.er.min(axis=1))
    assert nr["selected"]["mean"] == nr["oracle_risk"]
    assert nr["slack"] <= 0


def test_report_contents_and_determinism(desk, tmp_path):
    fam = [NoiseModel("gaussian", 0.05), NoiseModel("laplace", 0.05)]
    a = oracle_report(desk, fam, 200, SEED)
    b = oracle_report(desk, fam, 200, SEED)
    assert a.to_json() == b.to_json()
    d = json.loads(a.to_json())
    assert d["factor"] == 2.0 and d["replications"] == 200 and d["seed"] == SEED
    g = d["per_noise"]["gaussian"]
    means = [row[2] for row in g["per_lambda"]]
    assert g["oracle_risk"] == min(means)
    assert all(math.isfinite(row[3]) for row in g["per_lambda"])
    assert g["oracle_risk"] <= g["selected"]["mean"] + 3 * g["selected"]["se"]
    assert g["psi_p"] == pytest.approx((1 + 0.05 + 20) * 3 * 0.05**2 * 256)
    a.per_lambda_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "noise,beta,ell,mean,se" and len(lines) == 1 + 2 * 256


def test_estimated_sigma_measures_error(phantom, gaussian):
    s = RiskSetup(phantom, 8, 64, sigma_mode="estimated")
    rep = oracle_report(s, [gaussian], 100, SEED)
    assert 0 < rep.per_noise["gaussian"]["mean_abs_sigma_error"] < 0.05


def test_report_preconditions(phantom):
    with pytest.raises(ConfigurationError):
        RiskSetup(phantom, 8, 20)
    s = RiskSetup(phantom, 8, 20, check=False)
    with pytest.raises(ConfigurationError):
        oracle_report(s, [NoiseModel()], 100)
    with pytest.raises(ConfigurationError):
        RiskSetup(phantom, 8, 34, delta=0.2)
