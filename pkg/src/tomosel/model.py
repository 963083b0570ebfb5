"""Estimator interface: fit on sinogram samples, predict image values."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_observations, check_points
from .estimator import CoefficientDesign, ConfigurationError, IndexSets, sigma_hat
from .selector import build_family, check_delta, default_grid, expansion_at, reconstruct, select


class RadonModelSelection(BaseEstimator):
    """Adaptive weighted trigonometric estimator of an image from line integrals.

    Parameters
    ----------
    x_star : float, default=1.0
        Half-width of the cube containing the image support.
    dimension : int, default=2
    m : int, default=8
        Truncation radius of the frequency box ``{-m..m}^d``.
    q : int, default=34
        Samples per projection direction; must be at least ``2 d m + 2``.
    delta : float, default=0.1
        Penalty coefficient in ``(0, 1/8)``.
    sigma : float or None, default=None
        Known noise variance. ``None`` estimates it from high frequencies.
    sigma_hi : float, default=0.1
        Upper variance bound used to shape the candidate weights.
    k_star, epsilon : optional
        Grid of candidate weights; defaults depend on the sample count.
    cap_plateau : bool, default=True
    sign : {-1, 1}, default=-1
        Exponent sign of the quadrature weights.

    Attributes
    ----------
    theta_hat_ : ndarray of complex, shape (r_n,)
    sigma_hat_ : float
        Variance used by the penalty (the known value when ``sigma`` is set).
    family_ : WeightFamily
    weights_ : WeightVector
        Selected weight; ``selected_`` is its grid point.
    cost_ : CostBreakdown
    coef_ : ndarray of complex
        ``weights_ * theta_hat_``.
    """

    def __init__(
        self,
        x_star=1.0,
        dimension=2,
        m=8,
        q=34,
        delta=0.1,
        sigma=None,
        sigma_hi=0.1,
        k_star=None,
        epsilon=None,
        cap_plateau=True,
        sign=-1,
    ):
        self.x_star = x_star
        self.dimension = dimension
        self.m = m
        self.q = q
        self.delta = delta
        self.sigma = sigma
        self.sigma_hi = sigma_hi
        self.k_star = k_star
        self.epsilon = epsilon
        self.cap_plateau = cap_plateau
        self.sign = sign

    def _design(self) -> CoefficientDesign:
        design = CoefficientDesign(IndexSets(self.m, self.dimension), self.q, self.x_star, self.sign)
        design.check_preconditions()
        return design

    def sampling_design(self) -> np.ndarray:
        """Rows ``(nu_1..nu_d, s)`` at which observations must be supplied."""
        return self._design().sampling_design()

    def fit(self, X, y):
        check_delta(self.delta)
        if self.sigma is not None and self.sigma < 0:
            raise ConfigurationError(f"sigma must be nonnegative, got {self.sigma}")
        design = self._design()
        _, Y = check_observations(X, y, design)
        th = design.theta_hat(Y)
        sig = float(self.sigma) if self.sigma is not None else float(sigma_hat(th, design))
        k, e = default_grid(design.n_total)
        family = build_family(
            design.sets,
            self.k_star if self.k_star is not None else k,
            self.epsilon if self.epsilon is not None else e,
            self.sigma_hi,
            design.varpi,
            self.cap_plateau,
        )
        lam, cb = select(family, th, self.delta, sig, design.coef_varpi, design.q)
        self.design_ = design
        self.theta_hat_ = th
        self.sigma_hat_ = sig
        self.family_ = family
        self.weights_ = lam
        self.selected_ = lam.source
        self.cost_ = cb
        self.coef_ = lam.values * th
        return self

    def predict(self, X) -> np.ndarray:
        """Estimated image values at points of shape ``(n, d)``."""
        check_is_fitted(self, "coef_")
        pts = check_points(X, self.dimension)
        return expansion_at(self.coef_, self.design_.sets, self.x_star, pts).real

    def reconstruct(self, resolution: int = 64) -> np.ndarray:
        check_is_fitted(self, "coef_")
        return reconstruct(self.weights_, self.theta_hat_, self.design_.sets, self.x_star, resolution)
