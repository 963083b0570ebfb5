"""Monte Carlo measurement of empirical error, quadratic risk and robust risk.

Every replication draws its noise from its own child of one root
``SeedSequence``, so results do not depend on chunking or ``n_jobs``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .estimator import CoefficientDesign, ConfigurationError, IndexSets, bias_book, sigma_hat
from .obsmodel import NoiseFamily, NoiseModel
from .phantoms import Phantom, gradient_energy, theta_oracle
from .selector import GridPoint, WeightFamily, WeightVector, build_family, check_delta, cost_matrix, default_grid

_CHUNK = 250


def oracle_factor(delta: float) -> float:
    """Leading constant ``(1 + 2 delta) / (1 - 4 delta)`` of the oracle inequality."""
    return (1 + 2 * delta) / (1 - 4 * delta)


def box_indices(M: int, d: int) -> np.ndarray:
    return IndexSets(M, d).S


class RiskSetup:
    """Fixed ingredients of a risk experiment: image, design, family and truth.

    Parameters
    ----------
    phantom : Phantom
    m, q : int
        Truncation radius and points per direction.
    delta : float
        Penalty coefficient in ``(0, 1/8)``.
    sigma_mode : {"known", "estimated"}
    sigma_hi : float
        Upper variance bound of the noise family; enters the Pinsker weights.
    k_star, epsilon : optional
        Grid overrides; defaults follow ``default_grid`` with ``n = q * K``.
    tail_factor : int
        True coefficients are tabulated on ``{-tail_factor*m..tail_factor*m}^d``;
        energy beyond is bounded, not included.
    """

    def __init__(
        self,
        phantom: Phantom,
        m: int,
        q: int,
        delta: float = 0.1,
        sigma_mode: str = "known",
        sigma_hi: float = 0.1,
        k_star: int | None = None,
        epsilon: float | None = None,
        k0: float = 1.0,
        cap_plateau: bool = True,
        tail_factor: int = 2,
        check: bool = True,
    ):
        check_delta(delta)
        if sigma_mode not in ("known", "estimated"):
            raise ConfigurationError(f"sigma_mode must be 'known' or 'estimated', got {sigma_mode!r}")
        self.phantom = phantom
        self.delta = float(delta)
        self.sigma_mode = sigma_mode
        self.sigma_hi = float(sigma_hi)
        d = phantom.dimension
        self.sets = IndexSets(m, d)
        self.design = CoefficientDesign(self.sets, q, phantom.x_star)
        if check:
            self.design.check_preconditions()
        if sigma_mode == "estimated" and m < 4:
            raise ConfigurationError(f"estimated variance needs m >= 4, got m = {m}")
        dk, de = default_grid(self.design.n_total, k0)
        self.k_star = int(k_star) if k_star is not None else dk
        self.epsilon = float(epsilon) if epsilon is not None else de
        self.family: WeightFamily = build_family(
            self.sets, self.k_star, self.epsilon, self.sigma_hi, self.design.varpi, cap_plateau
        )
        self.W, self.member_row = self.family.distinct()
        self.theta = theta_oracle(phantom, self.sets.S)
        big = box_indices(tail_factor * m, d)
        outside = np.any(np.abs(big) > m, axis=1)
        self.tail_cutoff = tail_factor * m
        self.tail_energy = float(np.sum(np.abs(theta_oracle(phantom, big[outside])) ** 2))
        # |theta_j|^2 <= x*^2 |<d_l S, Phi_j>|^2 / (pi j_l)^2 summed over coordinates
        self.tail_residual_bound = (
            phantom.x_star**2 * gradient_energy(phantom) / (math.pi * (self.tail_cutoff + 1)) ** 2
        )
        self.radon = self.design.radon(phantom)
        self.a = self.design.theta_hat(self.radon)

    @property
    def q(self) -> int:
        return self.design.q

    @property
    def m(self) -> int:
        return self.sets.m

    def empirical_error(self, weights, theta_hat) -> np.ndarray:
        return empirical_error(weights, theta_hat, self.theta, self.tail_energy)

    def describe(self) -> dict:
        return {
            "m": self.m,
            "q": self.q,
            "d": self.sets.d,
            "x_star": self.phantom.x_star,
            "delta": self.delta,
            "sigma_mode": self.sigma_mode,
            "n_directions": self.design.n_directions,
            "n_total": self.design.n_total,
            "varpi_star": self.design.varpi_star,
            "tail_cutoff": self.tail_cutoff,
            "tail_energy": self.tail_energy,
            "tail_residual_bound": self.tail_residual_bound,
            "family": self.family.summary(),
        }


def empirical_error(weights, theta_hat, theta, tail_energy: float = 0.0) -> np.ndarray:
    """``sum_S |lambda_j theta_hat_j - theta_j|^2 + tail_energy``.

    ``weights`` is ``(r_n,)`` or ``(U, r_n)``; ``theta_hat`` may have leading
    replication axes. The result has shape ``theta_hat.shape[:-1] + weights.shape[:-1]``.
    """
    W = weights.values if isinstance(weights, WeightVector) else np.asarray(weights, dtype=float)
    theta = np.asarray(theta)
    if theta.shape[-1] != W.shape[-1] or np.shape(theta_hat)[-1] != W.shape[-1]:
        raise ValueError("weights, estimates and true coefficients must share the index axis")
    a2 = np.abs(theta_hat) ** 2
    cross = np.real(np.asarray(theta_hat) * np.conj(theta))
    return a2 @ (W**2).T - 2 * cross @ W.T + float(np.sum(np.abs(theta) ** 2)) + tail_energy


@dataclass
class Replications:
    """Per-replication outputs of one Monte Carlo run."""

    er: np.ndarray  # (R, U) error of every distinct weight
    selected: np.ndarray  # (R,) row of the chosen distinct weight
    er_selected: np.ndarray  # (R,)
    sigma_used: np.ndarray  # (R,)
    sigma_hat: np.ndarray | None  # (R,) when estimated
    noise: NoiseModel
    seed: int

    @property
    def n(self) -> int:
        return self.er_selected.shape[0]


def _chunk(setup: RiskSetup, noise: NoiseModel, seeds: Sequence[np.random.SeedSequence]):
    K, q = setup.radon.shape
    xi = np.stack([noise.sample((K, q), np.random.default_rng(s)) for s in seeds])
    th = setup.a + setup.design.prefactor * setup.design.weighted_sums(xi)
    if setup.sigma_mode == "known":
        sig_hat = None
        sig = np.full(len(seeds), noise.sigma)
    else:
        sig_hat = sigma_hat(th, setup.design)
        sig = sig_hat
    er = setup.empirical_error(setup.W, th)
    J = cost_matrix(setup.W, th, sig, setup.design.coef_varpi, setup.q, setup.delta)
    sel = np.argmin(J, axis=1)
    return er, sel, sig, sig_hat


def simulate(
    setup: RiskSetup, noise: NoiseModel, replications: int, seed: int = 0, n_jobs: int = 1
) -> Replications:
    if replications < 1:
        raise ValueError("need at least one replication")
    children = np.random.SeedSequence(seed).spawn(replications)
    chunks = [children[i : i + _CHUNK] for i in range(0, replications, _CHUNK)]
    if n_jobs == 1:
        parts = [_chunk(setup, noise, c) for c in chunks]
    else:
        parts = Parallel(n_jobs=n_jobs)(delayed(_chunk)(setup, noise, c) for c in chunks)
    er = np.concatenate([p[0] for p in parts])
    sel = np.concatenate([p[1] for p in parts])
    sig = np.concatenate([p[2] for p in parts])
    sig_hat = None if parts[0][3] is None else np.concatenate([p[3] for p in parts])
    er_sel = er[np.arange(er.shape[0]), sel]
    return Replications(er, sel, er_sel, sig, sig_hat, noise, seed)


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    se: float
    n: int

    @classmethod
    def of(cls, values) -> "RiskEstimate":
        v = np.ascontiguousarray(values, dtype=float)
        se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        return cls(float(np.mean(v)), se, int(v.size))


def mc_risk(
    setup: RiskSetup,
    noise: NoiseModel,
    replications: int,
    seed: int = 0,
    weights: WeightVector | None = None,
    n_jobs: int = 1,
) -> RiskEstimate:
    """Risk of a fixed weight, or of the data-driven selection when ``weights`` is None."""
    if replications < 100:
        raise ValueError(f"risk estimates need >= 100 replications, got {replications}")
    if weights is None:
        return RiskEstimate.of(simulate(setup, noise, replications, seed, n_jobs).er_selected)
    children = np.random.SeedSequence(seed).spawn(replications)
    K, q = setup.radon.shape
    out = []
    for i in range(0, replications, _CHUNK):
        xi = np.stack([noise.sample((K, q), np.random.default_rng(s)) for s in children[i : i + _CHUNK]])
        th = setup.a + setup.design.prefactor * setup.design.weighted_sums(xi)
        out.append(setup.empirical_error(weights, th))
    return RiskEstimate.of(np.concatenate(out))


@dataclass
class NoiseRisk:
    """Risk summary of one noise law."""

    kind: str
    sigma: float
    fourth_moment: float
    per_lambda: list  # [(beta, ell, mean, se)] in grid order
    selected: RiskEstimate
    oracle_risk: float
    oracle_point: tuple
    oracle_ratio: float
    slack: float
    slack_q_delta: float
    psi_p: float
    mean_abs_sigma_error: float | None
    selection_counts: dict


@dataclass
class RiskReport:
    setup: dict
    factor: float
    b_tilde: float
    lambda_star: float
    iota: int
    per_noise: dict
    robust: dict
    replications: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable)

    def per_lambda_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["noise", "beta", "ell", "mean", "se"])
            for kind, nr in self.per_noise.items():
                for beta, ell, mean, se in nr["per_lambda"]:
                    w.writerow([kind, beta, repr(ell), repr(mean), repr(se)])


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def psi_p(noise: NoiseModel, iota: int) -> float:
    """``(1 + sigma + 1/sigma) E xi^4 iota``; infinite for noiseless laws."""
    if noise.sigma == 0:
        return math.inf
    return (1 + noise.sigma + 1 / noise.sigma) * noise.fourth_moment * iota


def summarize(setup: RiskSetup, reps: Replications) -> NoiseRisk:
    # same reduction as the selected risk, so ties compare exactly
    cols = [RiskEstimate.of(reps.er[:, u]) for u in range(reps.er.shape[1])]
    means = np.array([c.mean for c in cols])
    ses = np.array([c.se for c in cols])
    per_lambda = []
    for w, row in zip(setup.family.weights, setup.member_row):
        gp = w.source
        per_lambda.append((gp.beta, gp.ell, float(means[row]), float(ses[row])))
    best = int(np.argmin(means))
    first_member = int(np.flatnonzero(setup.member_row == best)[0])
    gp = setup.family.weights[first_member].source
    sel = RiskEstimate.of(reps.er_selected)
    oracle = float(means[best])
    factor = oracle_factor(setup.delta)
    slack = sel.mean - factor * oracle
    counts = {}
    for row, c in zip(*np.unique(reps.selected, return_counts=True)):
        member = int(np.flatnonzero(setup.member_row == row)[0])
        counts[setup.family.weights[member].source.label()] = int(c)
    sig_err = None
    if reps.sigma_hat is not None:
        sig_err = float(np.mean(np.abs(reps.sigma_hat - reps.noise.sigma)))
    return NoiseRisk(
        reps.noise.kind,
        reps.noise.sigma,
        reps.noise.fourth_moment,
        per_lambda,
        sel,
        oracle,
        (gp.beta, gp.ell),
        sel.mean / oracle if oracle > 0 else (1.0 if sel.mean == 0 else math.inf),
        slack,
        slack * setup.q * setup.delta,
        psi_p(reps.noise, setup.family.iota),
        sig_err,
        counts,
    )


def robust_risk(
    setup: RiskSetup, family: NoiseFamily | Sequence[NoiseModel], replications: int, seed: int = 0, n_jobs: int = 1
) -> dict:
    """Selected and oracle risks under every law plus their suprema over the family."""
    models = family.models if isinstance(family, NoiseFamily) else tuple(family)
    if not models:
        raise ValueError("noise family is empty")
    runs = {m.kind: simulate(setup, m, replications, seed, n_jobs) for m in models}
    return _robust_from_runs(setup, runs)


def _robust_from_runs(setup: RiskSetup, runs: dict) -> dict:
    sel = {k: RiskEstimate.of(r.er_selected) for k, r in runs.items()}
    worst = max(sel, key=lambda k: sel[k].mean)
    per_lambda = np.array([[RiskEstimate.of(r.er[:, u]).mean for u in range(r.er.shape[1])] for r in runs.values()])
    sup_per_lambda = per_lambda.max(axis=0)
    best = int(np.argmin(sup_per_lambda))
    oracle = float(sup_per_lambda[best])
    factor = oracle_factor(setup.delta)
    slack = sel[worst].mean - factor * oracle
    return {
        "selected": {k: asdict(v) for k, v in sel.items()},
        "sup_kind": worst,
        "sup_selected": sel[worst].mean,
        "sup_selected_se": sel[worst].se,
        "oracle_sup_risk": oracle,
        "oracle_ratio": sel[worst].mean / oracle if oracle > 0 else math.inf,
        "slack": slack,
        "slack_q_delta": slack * setup.q * setup.delta,
    }


def oracle_report(
    setup: RiskSetup,
    family: NoiseFamily | Sequence[NoiseModel],
    replications: int = 500,
    seed: int = 0,
    n_jobs: int = 1,
) -> RiskReport:
    """Per-weight risks, selected risk and oracle-inequality slack for every law."""
    models = family.models if isinstance(family, NoiseFamily) else tuple(family)
    if setup.q < 2 * setup.sets.d * setup.m + 2:
        raise ConfigurationError("oracle report needs q >= 2 d m + 2")
    runs = {m.kind: simulate(setup, m, replications, seed, n_jobs) for m in models}
    per_noise = {k: asdict(summarize(setup, r)) for k, r in runs.items()}
    bb = bias_book(setup.phantom, setup.design, setup.theta)
    return RiskReport(
        setup.describe(),
        oracle_factor(setup.delta),
        bb.b_tilde,
        setup.family.lambda_star,
        setup.family.iota,
        per_noise,
        _robust_from_runs(setup, runs),
        replications,
        seed,
    )
