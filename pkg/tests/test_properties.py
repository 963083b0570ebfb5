import numpy as np
import pytest

from tomosel import NoiseModel, RiskSetup
from tomosel.estimator import CoefficientDesign, IndexSets
from tomosel.properties import (
    DEFAULT_PANEL,
    check_eta_covariance,
    check_eta_projection,
    check_orthogonality,
    check_se_batches,
    check_U_bound,
    colinear_pairs,
    property_suite,
    write_checks_csv,
)

SEED = 20240


def test_panel_has_cross_direction_pairs(design):
    cross = [(a, b) for a, b in DEFAULT_PANEL if design.key_of[design.sets.position(a)] != design.key_of[design.sets.position(b)]]
    assert len(DEFAULT_PANEL) >= 10 and len(cross) >= 3


def test_colinear_pairs_cover_axes(design):
    pairs = colinear_pairs(design)
    pos = design.sets.position
    assert (pos((1, 0)), pos((2, 0))) in pairs or (pos((2, 0)), pos((1, 0))) in pairs


def test_global_sharing_mutation_fails(design, gaussian):
    ok = check_eta_covariance(design, gaussian, 2000, SEED)
    bad = check_eta_covariance(design, gaussian, 2000, SEED, sharing="global")
    assert ok.passed and not bad.passed


def test_convention_swap_keeps_modulus_checks(phantom, gaussian):
    sets = IndexSets(8, 2)
    a = CoefficientDesign(sets, 34, sign=-1)
    b = CoefficientDesign(sets, 34, sign=+1)
    assert check_orthogonality(a).passed and check_orthogonality(b).passed
    for check in (check_eta_projection, check_U_bound):
        ra, rb = check(a, gaussian, 1000, SEED), check(b, gaussian, 1000, SEED)
        assert ra.passed == rb.passed
    ca = check_eta_covariance(a, gaussian, 1000, SEED).extra["rows"]
    cb = check_eta_covariance(b, gaussian, 1000, SEED).extra["rows"]
    assert np.allclose([r["re"] for r in ca], [r["re"] for r in cb], rtol=1e-12, atol=1e-15)


def test_se_batches(desk, gaussian):
    r = check_se_batches(desk, gaussian, 2000, SEED, batches=40)
    assert r.statistic >= 0


def test_suite_default_all_required_pass(tmp_path, phantom, desk):
    noises = [NoiseModel(k, 0.05) for k in ("gaussian", "laplace", "rademacher")]
    results = property_suite(phantom, desk, noises, moment_replications=10_000, risk_replications=500, seed=SEED)
    failed = [r.name for r in results if r.required and not r.passed]
    assert failed == []
    write_checks_csv(tmp_path / "c.csv", results)
    rows = (tmp_path / "c.csv").read_text().splitlines()
    assert rows[0] == "check,verdict,statistic,bound,required,detail" and len(rows) == len(results) + 1
    names = {r.name for r in results}
    assert {"orthogonality", "fourier_tail", "radon_lipschitz", "parseval", "determinism"} <= names
