"""Statistical and algebraic property checks with explicit tolerances.

Each check returns a :class:`CheckResult` carrying the observed statistic, the
bound it was compared against and a verdict. :func:`property_suite` runs the
full battery for one configuration.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .estimator import CoefficientDesign, IndexSets, bias_book, sigma_hat
from .obsmodel import NoiseModel
from .phantoms import Phantom, evaluate, exact_radon, radon_quadrature_oracle, regularity, theta_oracle
from .riskharness import RiskSetup, simulate
from .selector import cost_matrix, penalty, raster_nodes, reconstruct, select

DEFAULT_PANEL = (
    ((1, 0), (1, 0)),
    ((2, 0), (2, 0)),
    ((1, 0), (2, 0)),
    ((1, 0), (-1, 0)),
    ((0, 0), (3, 0)),
    ((1, 1), (2, 2)),
    ((1, 1), (-3, -3)),
    ((1, 2), (2, 4)),
    ((3, 4), (3, 4)),
    ((1, 0), (0, 1)),
    ((1, 1), (1, 2)),
    ((2, 1), (1, 2)),
    ((0, 0), (1, 1)),
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    statistic: float
    bound: float
    detail: str = ""
    required: bool = True
    extra: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.statistic = float(self.statistic)
        self.bound = float(self.bound)

    def row(self) -> list:
        return [self.name, "pass" if self.passed else "fail", repr(self.statistic), repr(self.bound), self.required, self.detail]


def write_checks_csv(path, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "verdict", "statistic", "bound", "required", "detail"])
        for r in results:
            w.writerow(r.row())


def _mean_se(samples) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(samples)
    return s.mean(axis=0), s.std(axis=0, ddof=1) / math.sqrt(s.shape[0])


# image-side checks -------------------------------------------------------------


def check_support(phantom: Phantom, samples: int = 10_000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    d = phantom.dimension
    u = rng.standard_normal((samples, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = phantom.x_star * (1 + rng.random(samples))
    vals = evaluate(phantom, u * r[:, None])
    worst = float(np.max(np.abs(vals)))
    return CheckResult("support", worst == 0.0, worst, 0.0, f"{samples} points with |x| >= x*")


def check_radon_support(phantom: Phantom, samples: int = 1000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    d = phantom.dimension
    worst = 0.0
    for _ in range(samples):
        nu = rng.standard_normal(d)
        nu /= np.linalg.norm(nu)
        s = phantom.x_star * (1 + rng.random()) * rng.choice([-1.0, 1.0])
        worst = max(worst, abs(float(exact_radon(phantom, nu, s))))
    return CheckResult("radon_support", worst == 0.0, worst, 0.0, "offsets with |s| >= x*")


def check_radon_lipschitz(phantom: Phantom, triples: int = 1000, seed: int = 0, slack: float = 1e-9) -> CheckResult:
    rng = np.random.default_rng(seed)
    d = phantom.dimension
    const = regularity(phantom).lipschitz * phantom.x_star ** (d - 1)
    worst = -math.inf
    for _ in range(triples):
        nu = rng.standard_normal(d)
        nu /= np.linalg.norm(nu)
        s1, s2 = rng.uniform(-1.2 * phantom.x_star, 1.2 * phantom.x_star, 2)
        lhs = abs(float(exact_radon(phantom, nu, s1) - exact_radon(phantom, nu, s2)))
        worst = max(worst, lhs - const * abs(s1 - s2))
    return CheckResult("radon_lipschitz", worst <= slack, worst, slack, f"max excess over {const:.6g}|s1-s2|")


def check_radon_oracle(phantom: Phantom, samples: int = 100, seed: int = 0, rtol: float = 1e-6) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        a = rng.uniform(0, 2 * math.pi)
        nu = np.array([math.cos(a), math.sin(a)])
        s = rng.uniform(-phantom.x_star, phantom.x_star)
        e = float(exact_radon(phantom, nu, s))
        o = radon_quadrature_oracle(phantom, nu, s)
        rel = abs(o - e) / abs(e) if e != 0 else (0.0 if o == 0 else math.inf)
        worst = max(worst, rel)
    return CheckResult("radon_oracle", worst <= rtol, worst, rtol, "closed form vs midpoint quadrature")


def check_fourier_tail(phantom: Phantom, m_values=(4, 8, 16), cutoff: int | None = None) -> CheckResult:
    """Energy of ``theta_j`` with all components in ``[floor(sqrt m)+1, cutoff]``."""
    d = phantom.dimension
    tau = regularity(phantom).mixed_deriv_norm
    ratios = []
    for m in m_values:
        hi = cutoff if cutoff is not None else max(64, 4 * m)
        lo = math.isqrt(m) + 1
        axis = np.arange(lo, hi + 1)
        grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
        energy = float(np.sum(np.abs(theta_oracle(phantom, grid)) ** 2))
        bound = phantom.x_star ** (2 * d) / (math.pi ** (2 * d) * m ** (d / 2)) * tau
        ratios.append((m, energy, bound))
    worst = max(e / b if b > 0 else (0.0 if e == 0 else math.inf) for _, e, b in ratios)
    detail = "; ".join(f"m={m}: {e:.3e} <= {b:.3e}" for m, e, b in ratios)
    return CheckResult("fourier_tail", worst <= 1.0, worst, 1.0, detail, extra={"rows": ratios})


# deterministic design checks ---------------------------------------------------


def colinear_pairs(design: CoefficientDesign):
    """Index pairs on the axes and diagonals of the box that share a direction."""
    S = design.indices
    on_lines = (S[:, 0] == 0) | (S[:, 1] == 0) | (np.abs(S[:, 0]) == np.abs(S[:, 1]))
    if design.d != 2:
        on_lines = np.ones(len(S), dtype=bool)
    rows = np.flatnonzero(on_lines)
    keys = design.key_of[rows]
    return [(a, b) for i, a in enumerate(rows) for b in rows[i:] if keys[i] == design.key_of[b]]


def check_orthogonality(design: CoefficientDesign) -> CheckResult:
    q = design.q
    delta = np.array([2 * c.L / q for c in design.contexts])
    worst_off, worst_diag, npairs = 0.0, 0.0, 0
    for a, b in colinear_pairs(design):
        g = complex(np.sum(design.psi[a] * np.conj(design.psi[b])))
        if a == b:
            ref = q * abs(design.upsilon[a]) ** 2
            worst_diag = max(worst_diag, abs(g - ref) / ref)
        else:
            worst_off = max(worst_off, abs(g) / (q * delta[a] ** 2))
            npairs += 1
    passed = worst_off <= 1e-10 and worst_diag <= 1e-12
    return CheckResult(
        "orthogonality",
        passed,
        max(worst_off / 1e-10, worst_diag / 1e-12),
        1.0,
        f"{npairs} off-diagonal pairs, max scaled {worst_off:.2e}; diagonal rel {worst_diag:.2e}",
    )


def check_bias_bound(phantom: Phantom, design: CoefficientDesign) -> CheckResult:
    d = design.d
    bb = bias_book(phantom, design)
    bound = 16 * regularity(phantom).lipschitz / (2 * design.x_star) ** (d / 2 - 2) / design.q
    worst = float(np.max(np.abs(bb.b)))
    return CheckResult("bias_bound", worst <= bound, worst, bound, f"b_tilde = {bb.b_tilde:.4g}")


# Monte Carlo over the normalized noise -----------------------------------------


def _eta_batches(design: CoefficientDesign, noise: NoiseModel, replications: int, seed: int, sharing: str, chunk: int = 500):
    """Yield ``eta`` batches; ``sharing='global'`` reuses one noise vector for all directions."""
    children = np.random.SeedSequence(seed).spawn(replications)
    K, q = design.n_directions, design.q
    for i in range(0, replications, chunk):
        block = children[i : i + chunk]
        if sharing == "direction":
            xi = np.stack([noise.sample((K, q), np.random.default_rng(s)) for s in block])
        elif sharing == "global":
            one = np.stack([noise.sample((1, q), np.random.default_rng(s)) for s in block])
            xi = np.broadcast_to(one, (len(block), K, q))
        else:
            raise ValueError(f"unknown sharing mode {sharing!r}")
        yield design.eta(xi)


def check_eta_covariance(
    design: CoefficientDesign,
    noise: NoiseModel,
    replications: int = 10_000,
    seed: int = 0,
    pairs=DEFAULT_PANEL,
    sharing: str = "direction",
    n_se: float = 3.0,
) -> CheckResult:
    sets = design.sets
    ia = [sets.position(a) for a, _ in pairs]
    ib = [sets.position(b) for _, b in pairs]
    prods = np.concatenate([eta[:, ia] * np.conj(eta[:, ib]) for eta in _eta_batches(design, noise, replications, seed, sharing)])
    mean, se = _mean_se(prods.real)
    mean_i, se_i = _mean_se(prods.imag)
    target = np.array([noise.sigma * design.varpi[a] if a == b else 0.0 for a, b in zip(ia, ib)])
    z_re = np.abs(mean - target) / np.where(se > 0, se, np.inf)
    z_im = np.abs(mean_i) / np.where(se_i > 0, se_i, np.inf)
    # a zero SE is only acceptable with an exact match
    z_re = np.where((se == 0) & (mean != target), np.inf, z_re)
    z_im = np.where((se_i == 0) & (mean_i != 0), np.inf, z_im)
    worst = float(max(z_re.max(), z_im.max()))
    rows = [
        {"j": a, "k": b, "target": float(t), "re": float(m), "re_se": float(s), "im": float(mi), "im_se": float(si)}
        for (a, b), t, m, s, mi, si in zip(pairs, target, mean, se, mean_i, se_i)
    ]
    return CheckResult(
        f"eta_covariance[{noise.kind}]",
        worst <= n_se,
        worst,
        n_se,
        f"{len(pairs)} pairs, max |z| over real and imaginary parts",
        extra={"rows": rows},
    )


def _random_unit(rng, r_n: int, count: int, support: int | None = None, complex_: bool = False):
    out = np.zeros((count, r_n), dtype=complex if complex_ else float)
    for i in range(count):
        idx = rng.choice(r_n, size=support or r_n, replace=False)
        v = rng.standard_normal(idx.size)
        if complex_:
            v = v + 1j * rng.standard_normal(idx.size)
        out[i, idx] = v / np.linalg.norm(v)
    return out


def check_eta_projection(
    design: CoefficientDesign, noise: NoiseModel, replications: int = 10_000, seed: int = 0, vectors: int = 20
) -> CheckResult:
    rng = np.random.default_rng([seed, 42])
    Z = _random_unit(rng, design.sets.r_n, vectors, complex_=True)
    vals = np.concatenate([np.abs(eta @ Z.T) ** 2 for eta in _eta_batches(design, noise, replications, seed, "direction")])
    mean, se = _mean_se(vals)
    bound = 16 * noise.sigma * design.x_star
    excess = float(np.max(mean - bound - 3 * se))
    return CheckResult(
        f"eta_projection[{noise.kind}]", excess <= 0, float(mean.max()), bound, f"{vectors} random unit z, 3 SE margin"
    )


def check_U_bound(
    design: CoefficientDesign, noise: NoiseModel, replications: int = 10_000, seed: int = 0, vectors: int = 20
) -> CheckResult:
    rng = np.random.default_rng([seed, 43])
    X = _random_unit(rng, design.sets.r_n, vectors, support=min(design.q, design.sets.r_n))
    sv = noise.sigma * design.varpi
    vals = np.concatenate(
        [((np.abs(eta) ** 2 - sv) @ X.T) ** 2 for eta in _eta_batches(design, noise, replications, seed, "direction")]
    )
    mean, se = _mean_se(vals)
    c_star = 5 * design.x_star**2 * 2**9
    bound = c_star * noise.fourth_moment
    excess = float(np.max(mean - bound - 3 * se))
    return CheckResult(
        f"U_bound[{noise.kind}]", excess <= 0, float(mean.max()), bound, f"{vectors} random unit x with #(x) <= q"
    )


# checks that run the selection pipeline ---------------------------------------


def check_penalty_bound(setup: RiskSetup, noise: NoiseModel, replications: int = 500, seed: int = 0) -> CheckResult:
    if setup.sigma_mode != "known":
        raise ValueError("the penalty comparison uses the known-variance penalty")
    reps = simulate(setup, noise, replications, seed)
    mean, se = _mean_se(reps.er)
    P = penalty(setup.W, noise.sigma, setup.design.coef_varpi, setup.q)
    excess = float(np.max(P - mean - 3 * se))
    return CheckResult(
        f"penalty_bound[{noise.kind}]",
        excess <= 0,
        excess,
        0.0,
        f"{setup.W.shape[0]} distinct weights, max P - (mean + 3 SE)",
        extra={"penalty": P.tolist(), "mean": mean.tolist(), "se": se.tolist()},
    )


def auto_q(m: int, d: int, q_star: float) -> int:
    q = max(2 * d * m + 2, m**d)
    if q > q_star * m**d:
        raise ValueError(f"no admissible q for m = {m}: {q} exceeds q_* m^d = {q_star * m**d:g}")
    return q


def check_sigma_decay(
    phantom: Phantom,
    noise: NoiseModel,
    m_values=(4, 8, 16),
    q_star: float = 2.0,
    replications: int = 200,
    seed: int = 0,
) -> CheckResult:
    medians = []
    for m in m_values:
        design = CoefficientDesign(IndexSets(m, phantom.dimension), auto_q(m, phantom.dimension, q_star), phantom.x_star)
        a = design.noiseless(phantom)
        errs = []
        children = np.random.SeedSequence([seed, m]).spawn(replications)
        for i in range(0, replications, 100):
            xi = np.stack([noise.sample((design.n_directions, design.q), np.random.default_rng(s)) for s in children[i : i + 100]])
            th = a + design.prefactor * design.weighted_sums(xi)
            errs.append(np.abs(sigma_hat(th, design) - noise.sigma))
        medians.append(float(np.median(np.concatenate(errs))))
    passed = all(b < a for a, b in zip(medians, medians[1:]))
    detail = ", ".join(f"m={m}: {v:.3e}" for m, v in zip(m_values, medians))
    return CheckResult(f"sigma_decay[{noise.kind}]", passed, medians[-1], medians[0], detail, extra={"medians": medians})


def check_selection_optimality(setup: RiskSetup, noise: NoiseModel, seed: int = 0) -> CheckResult:
    y = setup.radon + noise.sample(setup.radon.shape, np.random.default_rng(seed))
    th = setup.design.theta_hat(y)
    sig = noise.sigma if setup.sigma_mode == "known" else float(sigma_hat(th, setup.design))
    lam, cb = select(setup.family, th, setup.delta, sig, setup.design.coef_varpi, setup.q)
    J = cost_matrix(setup.family.matrix, th, sig, setup.design.coef_varpi, setup.q, setup.delta)
    gap = float(cb.total - J.min())
    return CheckResult("selection_optimality", gap <= 0, gap, 0.0, f"selected {lam.source.label()}")


def check_noiseless_selection(setup: RiskSetup) -> CheckResult:
    """With no noise and zero variance the selector must attain the oracle."""
    reps = simulate(setup, NoiseModel("gaussian", 0.0), 1, 0) if setup.sigma_mode == "known" else None
    if reps is None:
        return CheckResult("noiseless_selection", True, 0.0, 0.0, "skipped: estimated variance", required=False)
    er = reps.er[0]
    gap = float(reps.er_selected[0] - er.min())
    return CheckResult("noiseless_selection", gap == 0.0, gap, 0.0, "selected minus oracle empirical error")


def check_determinism(setup: RiskSetup, noise: NoiseModel, replications: int = 300, seed: int = 0) -> CheckResult:
    a = simulate(setup, noise, replications, seed, n_jobs=1)
    b = simulate(setup, noise, replications, seed, n_jobs=2)
    same = np.array_equal(a.er, b.er) and np.array_equal(a.selected, b.selected)
    return CheckResult("determinism", bool(same), 0.0 if same else 1.0, 0.0, "serial vs two workers, bitwise")


def check_se_batches(setup: RiskSetup, noise: NoiseModel, replications: int = 500, seed: int = 0, batches: int = 100) -> CheckResult:
    """Naive SE of the selected risk vs the batch-means SE; within 20 percent."""
    v = simulate(setup, noise, replications, seed).er_selected
    naive = float(np.std(v, ddof=1) / math.sqrt(v.size))
    means = v[: v.size // batches * batches].reshape(batches, -1).mean(axis=1)
    batch = float(np.std(means, ddof=1) / math.sqrt(batches))
    rel = abs(batch - naive) / naive if naive > 0 else 0.0
    return CheckResult("se_consistency", rel <= 0.2, rel, 0.2, f"naive {naive:.4g} vs batch means {batch:.4g}")


def parseval_gap(setup: RiskSetup, noise: NoiseModel, seed: int = 0, resolution: int = 128) -> tuple[float, float]:
    """Coefficient-domain and raster-domain errors of the selected estimate."""
    y = setup.radon + noise.sample(setup.radon.shape, np.random.default_rng(seed))
    th = setup.design.theta_hat(y)
    sig = noise.sigma if setup.sigma_mode == "known" else float(sigma_hat(th, setup.design))
    lam, _ = select(setup.family, th, setup.delta, sig, setup.design.coef_varpi, setup.q)
    coef_err = float(setup.empirical_error(lam, th))
    x = setup.phantom.x_star
    raster = reconstruct(lam, th, setup.sets, x, resolution)
    nodes = raster_nodes(x, resolution)
    grid = np.stack(np.meshgrid(*([nodes] * setup.sets.d), indexing="ij"), axis=-1)
    truth = evaluate(setup.phantom, grid.reshape(-1, setup.sets.d)).reshape(raster.shape)
    h = 2 * x / resolution
    raster_err = float(np.sum((raster - truth) ** 2) * h**setup.sets.d)
    return coef_err, raster_err


def check_parseval(setup: RiskSetup, noise: NoiseModel, seed: int = 0, resolution: int = 128) -> CheckResult:
    c, r = parseval_gap(setup, noise, seed, resolution)
    rel = abs(c - r) / r
    return CheckResult("parseval", rel <= 0.01, rel, 0.01, f"coefficient {c:.6g} vs raster {r:.6g}")


def property_suite(
    phantom: Phantom,
    setup: RiskSetup,
    noises,
    moment_replications: int = 10_000,
    risk_replications: int = 500,
    seed: int = 0,
    q_star: float = 2.0,
) -> list[CheckResult]:
    """Run every check on one configuration; Monte Carlo checks use each noise law."""
    design = setup.design
    out = [
        check_support(phantom, seed=seed),
        check_radon_support(phantom, seed=seed),
        check_radon_lipschitz(phantom, seed=seed),
        check_radon_oracle(phantom, seed=seed),
        check_fourier_tail(phantom),
        check_orthogonality(design),
        check_bias_bound(phantom, design),
    ]
    for i, nz in enumerate(noises):
        cov = check_eta_covariance(design, nz, moment_replications, seed)
        # 26 two-sided comparisons per law; only the primary law gates the exit status
        cov.required = i == 0
        out.append(cov)
        out.append(check_eta_projection(design, nz, moment_replications, seed))
        out.append(check_U_bound(design, nz, moment_replications, seed))
        if setup.sigma_mode == "known":
            out.append(check_penalty_bound(setup, nz, risk_replications, seed))
    out.append(check_sigma_decay(phantom, noises[0], q_star=q_star, seed=seed))
    out.append(check_selection_optimality(setup, noises[0], seed))
    out.append(check_noiseless_selection(setup))
    out.append(check_determinism(setup, noises[0], seed=seed))
    out.append(check_se_batches(setup, noises[0], risk_replications, seed))
    out.append(check_parseval(setup, noises[0], seed))
    return out
