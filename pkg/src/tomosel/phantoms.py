"""Compactly supported test images built from radial polynomial bumps.

Every bump ``a * (1 - |x - c|^2 / r^2)^p`` on its ball has a closed-form
Radon transform and a closed-form Fourier transform (a Bessel function), so
phantoms double as exact oracles for the estimation pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class Bump:
    """Radial polynomial bump ``amplitude * (1 - |x - center|^2 / radius^2)^exponent``."""

    center: tuple[float, ...]
    radius: float
    amplitude: float = 1.0
    exponent: int = 2

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise ValueError(f"bump radius must be positive, got {self.radius}")
        if int(self.exponent) != self.exponent or self.exponent < 2:
            raise ValueError(f"bump exponent must be an integer >= 2, got {self.exponent}")
        object.__setattr__(self, "exponent", int(self.exponent))

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "radius": self.radius,
            "amplitude": self.amplitude,
            "exponent": self.exponent,
        }


@dataclass(frozen=True)
class Phantom:
    """A sum of bumps supported inside the ball of radius ``x_star``.

    Parameters
    ----------
    bumps : sequence of Bump
        May be empty (the zero image).
    x_star : float
        Support half-width. Every bump satisfies ``|center| + radius <= x_star``,
        so the image vanishes outside the ball and hence outside the cube
        ``[-x_star, x_star]^d`` used for all L2 norms.
    dimension : int
        Ambient dimension ``d >= 2``.
    """

    bumps: tuple[Bump, ...] = ()
    x_star: float = 1.0
    dimension: int = 2

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(self.bumps))
        if self.dimension < 2:
            raise ValueError(f"dimension must be >= 2, got {self.dimension}")
        if not self.x_star > 0:
            raise ValueError(f"x_star must be positive, got {self.x_star}")
        for b in self.bumps:
            if len(b.center) != self.dimension:
                raise ValueError(
                    f"bump center {b.center} does not have dimension {self.dimension}"
                )
            if math.hypot(*b.center) + b.radius > self.x_star * (1 + 1e-12):
                raise ValueError(
                    f"bump centered at {b.center} with radius {b.radius} "
                    f"leaves the support ball of radius {self.x_star}"
                )

    def __call__(self, x):
        return evaluate(self, x)

    @classmethod
    def from_dicts(cls, bumps: Sequence[dict], x_star: float = 1.0, dimension: int = 2):
        return cls(tuple(Bump(**b) for b in bumps), x_star=x_star, dimension=dimension)

    def to_dicts(self) -> list[dict]:
        return [b.to_dict() for b in self.bumps]

    def scaled(self, factor: float) -> "Phantom":
        bumps = tuple(
            Bump(b.center, b.radius, b.amplitude * factor, b.exponent) for b in self.bumps
        )
        return Phantom(bumps, self.x_star, self.dimension)


def default_phantom() -> Phantom:
    """Asymmetric two-bump image in the plane with both signs."""
    return Phantom(
        (
            Bump((0.2, 0.1), 0.5, 1.0, 3),
            Bump((-0.4, -0.2), 0.3, -0.6, 3),
        ),
        x_star=1.0,
        dimension=2,
    )


@dataclass(frozen=True)
class RegularityConstants:
    lipschitz: float
    mixed_deriv_norm: float
    notes: dict = field(default_factory=dict, compare=False)


def evaluate(phantom: Phantom, x) -> np.ndarray:
    """Pointwise value of the image; ``x`` has shape ``(..., d)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != phantom.dimension:
        raise ValueError(f"points must have last axis {phantom.dimension}, got {x.shape}")
    out = np.zeros(x.shape[:-1])
    for b in phantom.bumps:
        u = np.sum((x - np.asarray(b.center)) ** 2, axis=-1) / b.radius**2
        inside = u < 1.0
        out[inside] += b.amplitude * (1.0 - u[inside]) ** b.exponent
    return out


def ball_moment(p: float, k: int) -> float:
    """``int_{|u| <= 1, u in R^k} (1 - |u|^2)^p du``; equals 1 when ``k = 0``."""
    return math.pi ** (k / 2) * math.gamma(p + 1) / math.gamma(p + 1 + k / 2)


def _check_direction(direction, d):
    nu = np.asarray(direction, dtype=float)
    if nu.shape != (d,):
        raise ValueError(f"direction must have shape ({d},), got {nu.shape}")
    if abs(np.linalg.norm(nu) - 1.0) > _UNIT_TOL:
        raise ValueError(f"direction must be a unit vector, |nu| = {np.linalg.norm(nu)!r}")
    return nu


def exact_radon(phantom: Phantom, direction, offset) -> np.ndarray:
    """Closed-form Radon transform ``R(S)(nu, s)``; vectorized over ``offset``.

    For one bump, the hyperplane at signed distance ``t = s - nu.c`` from its
    center cuts a (d-1)-ball of radius ``rho = sqrt(r^2 - t^2)`` on which the
    profile is ``(1 - t^2/r^2)^p (1 - |y|^2/rho^2)^p``.
    """
    d = phantom.dimension
    nu = _check_direction(direction, d)
    s = np.asarray(offset, dtype=float)
    out = np.zeros(s.shape)
    for b in phantom.bumps:
        c = ball_moment(b.exponent, d - 1)
        t = (s - nu @ np.asarray(b.center)) / b.radius
        inside = np.abs(t) < 1.0
        out[inside] += (
            b.amplitude
            * c
            * b.radius ** (d - 1)
            * (1.0 - t[inside] ** 2) ** (b.exponent + (d - 1) / 2)
        )
    return out


def radon_quadrature_oracle(phantom: Phantom, direction, offset: float, cells: int = 4096) -> float:
    """Brute-force line integral of :func:`evaluate` by composite midpoints.

    The chord through the support ball is split at every bump boundary so
    each piece sees a smooth integrand; cells are shared out by length.
    """
    if phantom.dimension != 2:
        raise NotImplementedError("quadrature oracle is only available for d = 2")
    if cells < 16:
        raise ValueError(f"cells must be >= 16, got {cells}")
    nu = _check_direction(direction, 2)
    s = float(offset)
    half = phantom.x_star**2 - s**2
    if half <= 0:
        return 0.0
    half = math.sqrt(half)
    perp = np.array([-nu[1], nu[0]])
    breaks = {-half, half}
    for b in phantom.bumps:
        c = np.asarray(b.center)
        t0 = s - nu @ c
        h = b.radius**2 - t0**2
        if h > 0:
            mid = perp @ c
            for e in (mid - math.sqrt(h), mid + math.sqrt(h)):
                breaks.add(min(max(e, -half), half))
    breaks = np.array(sorted(breaks))
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        n = max(16, int(math.ceil(cells * (hi - lo) / (2 * half))))
        h = (hi - lo) / n
        u = lo + h * (np.arange(n) + 0.5)
        pts = s * nu + u[:, None] * perp
        total += h * float(np.sum(evaluate(phantom, pts)))
    return total


def _bump_lipschitz(b: Bump) -> float:
    # sup over 0 <= v <= 1 of 2 v (1 - v^2)^(p-1) sits at v^2 = 1/(2p-1)
    p = b.exponent
    v = 1.0 / math.sqrt(2 * p - 1)
    return abs(b.amplitude) * p / b.radius * 2 * v * (1 - v * v) ** (p - 1)


def mixed_partial(phantom: Phantom, x) -> np.ndarray:
    """Analytic ``d^d S / dx_1 ... dx_d`` at points ``x`` of shape ``(..., d)``."""
    x = np.asarray(x, dtype=float)
    d = phantom.dimension
    out = np.zeros(x.shape[:-1])
    for b in phantom.bumps:
        p = b.exponent
        if p < d:
            raise ValueError(f"mixed partial needs exponent >= d, got {p} < {d}")
        y = x - np.asarray(b.center)
        u = np.sum(y**2, axis=-1) / b.radius**2
        inside = u < 1.0
        coef = b.amplitude * math.perm(p, d) * (-1.0 / b.radius**2) ** d * 2**d
        out[inside] += coef * (1 - u[inside]) ** (p - d) * np.prod(y[inside], axis=-1)
    return out


def _gradient(phantom: Phantom, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    for b in phantom.bumps:
        y = x - np.asarray(b.center)
        u = np.sum(y**2, axis=-1) / b.radius**2
        inside = u < 1.0
        g = -b.amplitude * b.exponent * (1 - u[inside]) ** (b.exponent - 1) * 2 / b.radius**2
        out[inside] += g[:, None] * y[inside]
    return out


def cube_quadrature(x_star: float, d: int, nodes: int = 64, panels: int = 4):
    """Composite tensor Gauss-Legendre rule on ``[-x_star, x_star]^d``.

    Returns points ``(N, d)`` and weights ``(N,)``.
    """
    g, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(-x_star, x_star, panels + 1)
    half = (edges[1] - edges[0]) / 2
    x1 = (((edges[:-1] + edges[1:]) / 2)[:, None] + half * g[None, :]).ravel()
    w1 = np.tile(w * half, panels)
    grids = np.meshgrid(*([x1] * d), indexing="ij")
    pts = np.stack([gr.ravel() for gr in grids], axis=-1)
    wts = np.ones(pts.shape[0])
    for ww in np.meshgrid(*([w1] * d), indexing="ij"):
        wts *= ww.ravel()
    return pts, wts


def regularity(phantom: Phantom, nodes: int = 64, panels: int = 4) -> RegularityConstants:
    """Lipschitz bound and squared L2 norm of the mixed partial derivative.

    The Lipschitz value is the sum over bumps of each bump's exact maximal
    gradient norm, an upper bound for the sum. The mixed-derivative norm is a
    tensor Gauss-Legendre estimate over the cube.
    """
    if not phantom.bumps:
        return RegularityConstants(0.0, 0.0)
    lip = sum(_bump_lipschitz(b) for b in phantom.bumps)
    pts, wts = cube_quadrature(phantom.x_star, phantom.dimension, nodes, panels)
    tau = float(wts @ mixed_partial(phantom, pts) ** 2)
    return RegularityConstants(lip, tau, {"nodes": nodes, "panels": panels})


def gradient_energy(phantom: Phantom, nodes: int = 64, panels: int = 4) -> float:
    """Quadrature estimate of ``||grad S||^2`` over the cube."""
    if not phantom.bumps:
        return 0.0
    pts, wts = cube_quadrature(phantom.x_star, phantom.dimension, nodes, panels)
    return float(wts @ np.sum(_gradient(phantom, pts) ** 2, axis=-1))


def fourier_transform(phantom: Phantom, freqs) -> np.ndarray:
    """``int S(x) exp(-i xi . x) dx`` at frequencies ``freqs`` of shape ``(..., d)``.

    Uses ``int (1 - |u|^2)_+^p e^{-i xi.u} du
    = 2^p Gamma(p+1) (2 pi)^{d/2} |xi|^{-(d/2+p)} J_{d/2+p}(|xi|)``.
    """
    xi = np.asarray(freqs, dtype=float)
    d = phantom.dimension
    out = np.zeros(xi.shape[:-1], dtype=complex)
    for b in phantom.bumps:
        p = b.exponent
        order = d / 2 + p
        z = b.radius * np.linalg.norm(xi, axis=-1)
        radial = np.empty(z.shape)
        small = z < 1e-8
        radial[small] = ball_moment(p, d)
        zz = z[~small]
        radial[~small] = (
            2**p * math.gamma(p + 1) * (2 * math.pi) ** (d / 2) * zz**-order * special.jv(order, zz)
        )
        phase = np.exp(-1j * (xi @ np.asarray(b.center)))
        out += b.amplitude * b.radius**d * radial * phase
    return out


def theta_oracle(phantom: Phantom, indices) -> np.ndarray:
    """Exact expansion coefficients ``int S conj(Phi_j)`` for integer ``indices`` ``(N, d)``."""
    j = np.asarray(indices, dtype=float)
    xs = phantom.x_star
    return (2 * xs) ** (-phantom.dimension / 2) * fourier_transform(phantom, np.pi * j / xs)


def theta_quadrature(phantom: Phantom, indices, nodes: int = 256) -> np.ndarray:
    """Tensor Gauss-Legendre approximation of the expansion coefficients.

    Independent of :func:`theta_oracle`; only :func:`evaluate` is used.
    """
    if phantom.dimension != 2:
        raise NotImplementedError("coefficient quadrature is only available for d = 2")
    xs = phantom.x_star
    g, w = np.polynomial.legendre.leggauss(nodes)
    x1, w1 = xs * g, xs * w
    X, Y = np.meshgrid(x1, x1, indexing="ij")
    vals = evaluate(phantom, np.stack([X, Y], axis=-1)) * np.outer(w1, w1)
    j = np.atleast_2d(np.asarray(indices))
    ex = np.exp(-1j * np.pi * np.outer(j[:, 0], x1) / xs)
    ey = np.exp(-1j * np.pi * np.outer(j[:, 1], x1) / xs)
    out = np.einsum("ka,ab,kb->k", ex, vals, ey)
    return out / (2 * xs)
