"""Line-integral estimates of the trigonometric expansion coefficients.

Convention: ``theta_j = int S(x) conj(Phi_j(x)) dx`` with
``Phi_j(x) = (2 x*)^{-d/2} exp(i pi j.x / x*)``, so that
``S = sum_j theta_j Phi_j`` holds in L2 of the cube and reconstructions of a
real image are real. By the projection-slice identity

    theta_j = (2 x*)^{-d/2} int R(S)(nu_j, t) exp(-i omega_j t) dt,

and the estimate replaces the integral by ``sum_l y_{j,l} psi_{j,l}`` where
``psi_{j,l}`` integrates the exponential exactly over the cell ending at
``s_{j,l}``.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .obsmodel import DirectionTable, IndexContext, direction_table, index_context, radon_table
from .phantoms import Phantom, theta_oracle


class ConfigurationError(ValueError):
    """Raised when parameters violate a precondition of the procedure."""


@dataclass(frozen=True)
class IndexSets:
    """Truncation box ``{-m..m}^d`` and the high-frequency block used by sigma_hat."""

    m: int
    d: int = 2

    def __post_init__(self):
        if self.m < 1:
            raise ConfigurationError(f"truncation radius m must be >= 1, got {self.m}")

    @property
    def S(self) -> np.ndarray:
        return np.array(list(itertools.product(range(-self.m, self.m + 1), repeat=self.d)))

    @property
    def r_n(self) -> int:
        return (2 * self.m + 1) ** self.d

    @property
    def T_mask(self) -> np.ndarray:
        lo = math.isqrt(self.m) + 1
        S = self.S
        return np.all((S >= lo) & (S <= self.m), axis=1)

    @property
    def T(self) -> np.ndarray:
        return self.S[self.T_mask]

    def position(self, j) -> int:
        """Row of ``j`` in :attr:`S` (lexicographic order)."""
        pos = 0
        for v in j:
            if abs(v) > self.m:
                raise KeyError(f"{tuple(j)} is outside the truncation box")
            pos = pos * (2 * self.m + 1) + (int(v) + self.m)
        return pos


def upsilon(ctx: IndexContext, q: int, sign: int = -1) -> complex:
    """``int_0^Delta exp(-sign i omega x) dx`` with ``Delta = 2 L / q``."""
    delta = 2 * ctx.L / q
    half = ctx.omega * delta / 2
    return delta * np.exp(-sign * 1j * half) * np.sinc(half / np.pi)


def psi_weights(ctx: IndexContext, q: int, sign: int = -1) -> np.ndarray:
    """All ``psi_{j,l} = int_{s_{l-1}}^{s_l} exp(sign i omega t) dt``, ``l = 1..q``.

    Each equals ``exp(sign i omega s_l) * upsilon``, so ``|psi_{j,l}|`` does not
    depend on ``l``.
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be -1 or +1")
    s = -ctx.L + 2 * ctx.L * np.arange(1, q + 1) / q
    return np.exp(sign * 1j * ctx.omega * s) * upsilon(ctx, q, sign)


def psi_weight(ctx: IndexContext, q: int, l: int, sign: int = -1) -> complex:
    if not 1 <= l <= q:
        raise ValueError(f"cell index must satisfy 1 <= l <= q, got {l}")
    return psi_weights(ctx, q, sign)[l - 1]


def varpi(ctx: IndexContext, q: int) -> float:
    """Second-moment weight ``4 L^2 sin^2(b) / b^2`` with ``b = beta L / q``."""
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    b = ctx.beta * ctx.L / q
    return 4 * ctx.L**2 * float(np.sinc(b / np.pi)) ** 2


class CoefficientDesign:
    """Everything about the coefficient estimates that does not depend on data.

    Parameters
    ----------
    sets : IndexSets
    q : int
        Points per direction.
    x_star : float
    sign : {-1, +1}
        Sign of the exponent in the quadrature weights. ``-1`` matches the
        ``conj(Phi_j)`` convention; ``+1`` yields conjugated estimates.
    """

    def __init__(self, sets: IndexSets, q: int, x_star: float = 1.0, sign: int = -1):
        if q < 2:
            raise ConfigurationError(f"q must be >= 2, got {q}")
        self.sets = sets
        self.q = int(q)
        self.x_star = float(x_star)
        self.sign = sign
        self.indices = sets.S
        self.contexts = [index_context(j, x_star) for j in self.indices]
        self.table: DirectionTable = direction_table(self.indices, x_star)
        self.key_of = self.table.key_of
        self.psi = np.stack([psi_weights(c, q, sign) for c in self.contexts])
        self.upsilon = np.array([upsilon(c, q, sign) for c in self.contexts])
        self.varpi = np.array([varpi(c, q) for c in self.contexts])
        self.beta_check = np.array([c.beta * c.L / q for c in self.contexts])
        d = sets.d
        self.prefactor = (2 * self.x_star) ** (-d / 2)
        # Var(theta_hat_j) = sigma * coef_varpi_j / q
        self.coef_varpi = self.prefactor**2 * self.varpi

    @property
    def d(self) -> int:
        return self.sets.d

    @property
    def n_directions(self) -> int:
        return self.table.n_directions

    @property
    def n_total(self) -> int:
        return self.q * self.n_directions

    @property
    def varpi_star(self) -> float:
        return float(self.varpi.min())

    def check_preconditions(self) -> None:
        """Fail unless ``q >= 2 d m + 2`` and every ``beta_check < pi``."""
        need = 2 * self.d * self.sets.m + 2
        if self.q < need:
            raise ConfigurationError(f"q = {self.q} violates q >= 2 d m + 2 = {need}")
        if np.any(self.beta_check >= np.pi):
            raise ConfigurationError("some varpi_j vanish (beta_check >= pi); increase q")

    def offsets(self) -> np.ndarray:
        return self.table.offsets(self.q)

    def sampling_design(self) -> np.ndarray:
        """Rows ``(nu_1..nu_d, s)`` for every observation, direction-major."""
        nu = self.table.directions()
        s = self.offsets()
        K, q = s.shape
        return np.concatenate([np.repeat(nu, q, axis=0), s.reshape(-1, 1)], axis=1)

    def radon(self, phantom: Phantom) -> np.ndarray:
        return radon_table(phantom, self.table, self.q)[0]

    def weighted_sums(self, values) -> np.ndarray:
        """``sum_l values[..., key(j), l] * psi_{j,l}`` for every ``j``; shape ``(..., r_n)``."""
        values = np.asarray(values)
        return np.einsum("...jl,jl->...j", values[..., self.key_of, :], self.psi)

    def theta_hat(self, y) -> np.ndarray:
        """Coefficient estimates from observations ``y`` of shape ``(..., K, q)``."""
        return self.prefactor * self.weighted_sums(y)

    def eta(self, noise) -> np.ndarray:
        """Normalized noise ``sqrt(q) sum_l xi_{j,l} psi_{j,l}``."""
        return math.sqrt(self.q) * self.weighted_sums(noise)

    def noiseless(self, phantom: Phantom) -> np.ndarray:
        """The quadrature approximations ``a_j`` (noise-free estimates)."""
        return self.theta_hat(self.radon(phantom))

    def estimates(self, y) -> "CoeffEstimates":
        return CoeffEstimates(self.theta_hat(y), self)


@dataclass(frozen=True)
class CoeffEstimates:
    theta_hat: np.ndarray
    design: CoefficientDesign

    @property
    def varpi(self) -> np.ndarray:
        return self.design.varpi

    @property
    def q(self) -> int:
        return self.design.q

    def to_csv(self, path) -> None:
        d = self.design.d
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"j{i + 1}" for i in range(d)] + ["re_theta_hat", "im_theta_hat", "varpi"])
            for j, t, v in zip(self.design.indices, self.theta_hat, self.design.varpi):
                w.writerow([int(x) for x in j] + [repr(float(t.real)), repr(float(t.imag)), repr(float(v))])


def sigma_hat(theta_hat, design: CoefficientDesign) -> np.ndarray:
    """Noise-variance estimate from the high-frequency block ``T_n``.

    ``sum_T |theta_hat_j|^2 / q_tilde`` with ``q_tilde = sum_T coef_varpi_j / q``.
    Broadcasts over leading axes of ``theta_hat``.
    """
    mask = design.sets.T_mask
    if not mask.any():
        raise ConfigurationError(f"high-frequency block is empty for m = {design.sets.m}")
    q_tilde = design.coef_varpi[mask].sum() / design.q
    return np.sum(np.abs(np.asarray(theta_hat)[..., mask]) ** 2, axis=-1) / q_tilde


@dataclass(frozen=True)
class BiasBook:
    b: np.ndarray
    b_star: float
    b_tilde: float


def bias_book(phantom: Phantom, design: CoefficientDesign, theta=None) -> BiasBook:
    """Deterministic quadrature error ``b_j = a_j - theta_j`` over the box."""
    if theta is None:
        theta = theta_oracle(phantom, design.indices)
    b = design.noiseless(phantom) - theta
    b_star = float(np.max(np.abs(b)) ** 2) if b.size else 0.0
    return BiasBook(b, b_star, design.q**2 * b_star)
