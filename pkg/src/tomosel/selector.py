"""Pinsker weight family, penalized cost and model selection."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .estimator import ConfigurationError, IndexSets


@dataclass(frozen=True, order=True)
class GridPoint:
    """Regularity index ``beta`` and radius ``ell`` of one Pinsker weight."""

    beta: int
    ell: float

    def label(self) -> str:
        return f"beta={self.beta},ell={self.ell:.6g}"


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Shrinkage weights over the truncation box, aligned with ``IndexSets.S``."""

    values: np.ndarray
    source: GridPoint | str = "custom"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("weights must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, sets: IndexSets, value: float) -> "WeightVector":
        return cls(np.full(sets.r_n, float(value)), "custom")

    def L(self, varpi) -> float:
        """``sum_j lambda(j) varpi_j``."""
        return float(self.values @ varpi)

    def L1(self) -> int:
        return int(np.count_nonzero(self.values))


def d_beta(beta: int) -> float:
    return (beta + 1) * (2 * beta + 1) / (math.pi ** (2 * beta) * beta)


def pinsker_parameters(m: int, sigma_hi: float) -> tuple[float, int]:
    """``upsilon_n = m / sigma_hi`` and the plateau end ``t_* = 1 + floor(ln upsilon_n)``."""
    ups = m / sigma_hi
    return ups, 1 + math.floor(math.log(ups))


def pinsker_profile(t, beta: int, omega: float, t_star: int, cap_plateau: bool = True):
    """One-dimensional Pinsker profile at nonnegative integers ``t``.

    Equals 1 on ``1 <= t < t_star`` and ``1 - (t/omega)^beta`` on
    ``t_star <= t <= omega``, zero beyond; ``t = 0`` maps to 1. With
    ``cap_plateau`` the plateau is also cut at ``omega``, which only matters
    when ``omega < t_star``.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    plateau = (t >= 1) & (t < t_star)
    if cap_plateau:
        plateau &= t <= omega
    out[plateau] = 1.0
    taper = (t >= t_star) & (t >= 1) & (t <= omega)
    out[taper] = 1.0 - (t[taper] / omega) ** beta
    out[t == 0] = 1.0
    return np.clip(out, 0.0, 1.0)


def pinsker_weight(
    gp: GridPoint, sets: IndexSets, sigma_hi: float, cap_plateau: bool = True
) -> WeightVector:
    """Tensor-product Pinsker weight ``prod_l profile(|j_l|)`` for grid point ``gp``."""
    if sigma_hi <= 0:
        raise ValueError("sigma_hi must be positive")
    ups, t_star = pinsker_parameters(sets.m, sigma_hi)
    omega = (d_beta(gp.beta) * gp.ell * ups) ** (1.0 / (2 * gp.beta + sets.d))
    prof = pinsker_profile(np.arange(sets.m + 1), gp.beta, omega, t_star, cap_plateau)
    vals = np.prod(prof[np.abs(sets.S)], axis=1)
    return WeightVector(vals, gp)


def default_grid(n_total: int, k0: float = 1.0) -> tuple[int, float]:
    """``k* = round(k0 + sqrt(ln n))`` (at least 1) and ``epsilon = 1 / ln n``."""
    ln = math.log(n_total)
    return max(1, int(round(k0 + math.sqrt(ln)))), 1.0 / ln


def grid_points(k_star: int, epsilon: float) -> list[GridPoint]:
    if k_star < 1:
        raise ConfigurationError(f"k_star must be >= 1, got {k_star}")
    if not 0 < epsilon < 1:
        raise ConfigurationError(f"epsilon must lie in (0, 1), got {epsilon}")
    n_ell = math.floor(1.0 / epsilon**2 + 1e-9)
    return [GridPoint(b, k * epsilon) for b in range(1, k_star + 1) for k in range(1, n_ell + 1)]


@dataclass
class WeightFamily:
    """The finite candidate set, in lexicographic grid order."""

    weights: list[WeightVector]
    varpi: np.ndarray
    bound: float = math.nan
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = sorted(self.weights, key=_order_key)
        self.matrix = np.stack([w.values for w in self.weights]) if self.weights else np.zeros((0, 0))

    @property
    def iota(self) -> int:
        return len(self.weights)

    @property
    def L_values(self) -> np.ndarray:
        return self.matrix @ self.varpi

    @property
    def L1_values(self) -> np.ndarray:
        return np.count_nonzero(self.matrix, axis=1)

    @property
    def lambda_star(self) -> float:
        return float(np.max(self.L_values + self.L1_values))

    def distinct(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique weight rows (first occurrence order) and each member's row."""
        _, first, inverse = np.unique(self.matrix, axis=0, return_index=True, return_inverse=True)
        order = np.argsort(first)
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        return self.matrix[first[order]], rank[inverse.ravel()]

    @property
    def n_distinct(self) -> int:
        return self.distinct()[0].shape[0]

    def grid(self) -> list:
        return [w.source for w in self.weights]

    def summary(self) -> dict:
        return {
            "iota": self.iota,
            "n_distinct": self.n_distinct,
            "lambda_star": self.lambda_star,
            "lambda_star_bound": self.bound,
            "lambda_star_within_bound": bool(self.lambda_star <= self.bound),
            **self.meta,
        }


def _order_key(w: WeightVector):
    s = w.source
    return (0, s.beta, s.ell) if isinstance(s, GridPoint) else (1, 0, 0.0)


def build_family(
    sets: IndexSets,
    k_star: int,
    epsilon: float,
    sigma_hi: float,
    varpi,
    cap_plateau: bool = True,
) -> WeightFamily:
    """Pinsker weights for every point of the grid ``{1..k*} x {eps, .., floor(eps^-2) eps}``."""
    pts = grid_points(k_star, epsilon)
    weights = [pinsker_weight(gp, sets, sigma_hi, cap_plateau) for gp in pts]
    ups, t_star = pinsker_parameters(sets.m, sigma_hi)
    bound = (ups / epsilon) ** (sets.d / (2 + sets.d))
    meta = {"k_star": k_star, "epsilon": epsilon, "upsilon": ups, "t_star": t_star}
    return WeightFamily(weights, np.asarray(varpi, dtype=float), bound, meta)


def theta_tilde(theta_hat, sigma_est, coef_varpi, q: int) -> np.ndarray:
    """Unbiased proxy ``|theta_hat_j|^2 - sigma_est coef_varpi_j / q`` for ``|theta_j|^2``."""
    sig = np.asarray(sigma_est, dtype=float)[..., None]
    return np.abs(theta_hat) ** 2 - sig * np.asarray(coef_varpi) / q


def penalty(weights, sigma_est: float, coef_varpi, q: int):
    """``sigma_est / q * sum_j lambda(j)^2 coef_varpi_j``; ``weights`` may be ``(iota, r_n)``."""
    if sigma_est < 0:
        raise ValueError("variance estimate must be nonnegative")
    w = weights.values if isinstance(weights, WeightVector) else np.asarray(weights, dtype=float)
    return sigma_est / q * (w**2 @ np.asarray(coef_varpi))


def check_delta(delta: float) -> None:
    if not 0 < delta < 1 / 8:
        raise ConfigurationError(f"delta = {delta} must lie in the open interval (0, 1/8)")


@dataclass(frozen=True)
class CostBreakdown:
    quad: float
    cross: float
    penalty: float
    total: float
    theta_tilde: np.ndarray = field(repr=False)


def cost(lam, theta_hat, theta_tilde_values, delta, sigma_est, coef_varpi, q) -> CostBreakdown:
    check_delta(delta)
    w = lam.values if isinstance(lam, WeightVector) else np.asarray(lam, dtype=float)
    quad = float(w**2 @ np.abs(theta_hat) ** 2)
    cross = float(2 * w @ theta_tilde_values)
    pen = float(delta * penalty(w, sigma_est, coef_varpi, q))
    return CostBreakdown(quad, cross, pen, quad - cross + pen, theta_tilde_values)


def cost_matrix(W, theta_hat, sigma_est, coef_varpi, q, delta) -> np.ndarray:
    """Cost of every row of ``W`` for every replication; shape ``(..., iota)``.

    ``theta_hat`` may carry leading batch axes, matched by ``sigma_est``.
    """
    check_delta(delta)
    W = np.asarray(W)
    sig = np.asarray(sigma_est, dtype=float)[..., None]
    tt = theta_tilde(theta_hat, sigma_est, coef_varpi, q)
    a2 = np.abs(theta_hat) ** 2
    return a2 @ (W**2).T - 2 * tt @ W.T + delta * sig / q * ((W**2) @ coef_varpi)


def select(
    family: WeightFamily, theta_hat, delta, sigma_est, coef_varpi, q
) -> tuple[WeightVector, CostBreakdown]:
    """Minimizer of the cost over the family; ties go to the first grid point."""
    if family.iota == 0:
        raise ValueError("weight family is empty")
    J = cost_matrix(family.matrix, theta_hat, sigma_est, coef_varpi, q, delta)
    best = int(np.argmin(J))
    tt = theta_tilde(theta_hat, sigma_est, coef_varpi, q)
    lam = family.weights[best]
    return lam, cost(lam, theta_hat, tt, delta, sigma_est, coef_varpi, q)


def expansion_at(coef, sets: IndexSets, x_star: float, points) -> np.ndarray:
    """``sum_j coef_j Phi_j(x)`` at ``points`` of shape ``(N, d)``; complex."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    phase = np.exp(1j * np.pi * (pts @ sets.S.T) / x_star)
    return (2 * x_star) ** (-sets.d / 2) * phase @ np.asarray(coef)


def raster_nodes(x_star: float, resolution: int) -> np.ndarray:
    h = 2 * x_star / resolution
    return -x_star + h * (np.arange(resolution) + 0.5)


def reconstruct(lam, theta_hat, sets: IndexSets, x_star: float, grid_resolution: int = 64) -> np.ndarray:
    """Weighted estimate on the cell-centered raster of the cube.

    Axis ``k`` of the output runs along coordinate ``x_{k+1}``.
    """
    if grid_resolution < 8:
        raise ValueError(f"grid_resolution must be >= 8, got {grid_resolution}")
    w = lam.values if isinstance(lam, WeightVector) else np.asarray(lam, dtype=float)
    m, d = sets.m, sets.d
    coef = (w * np.asarray(theta_hat)).reshape((2 * m + 1,) * d)
    x = raster_nodes(x_star, grid_resolution)
    E = np.exp(1j * np.pi * np.outer(x, np.arange(-m, m + 1)) / x_star)
    out = coef
    for axis in range(d):
        out = np.tensordot(E, out, axes=([1], [axis]))
        out = np.moveaxis(out, 0, axis)
    out = out * (2 * x_star) ** (-d / 2)
    scale = 1.0 + float(np.max(np.abs(out.real))) if out.size else 1.0
    if np.max(np.abs(out.imag), initial=0.0) > 1e-9 * scale:
        raise ValueError("weights or coefficients lack conjugate symmetry; image is not real")
    return out.real


def write_cost_table(path, family: WeightFamily, theta_hat, delta, sigma_est, coef_varpi, q) -> None:
    tt = theta_tilde(theta_hat, sigma_est, coef_varpi, q)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "ell", "L", "L1", "quad", "cross", "penalty", "J"])
        for lam, Lv, L1 in zip(family.weights, family.L_values, family.L1_values):
            c = cost(lam, theta_hat, tt, delta, sigma_est, coef_varpi, q)
            src = lam.source
            beta, ell = (src.beta, src.ell) if isinstance(src, GridPoint) else ("", "")
            w.writerow([beta, ell, repr(float(Lv)), int(L1), repr(c.quad), repr(c.cross), repr(c.penalty), repr(c.total)])

