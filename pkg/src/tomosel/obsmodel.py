"""Noisy Radon observations sampled along per-index projection directions.

Index ``j`` is observed along the direction of its primitive integer vector
(the *direction key*). Colinear indices, including ``j`` and ``-j``, share the
direction, the offset grid, and therefore the noise realization.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .phantoms import Phantom, exact_radon

NOISE_KINDS = ("gaussian", "laplace", "rademacher")


def direction_key(j: Sequence[int]) -> tuple[int, ...]:
    """Primitive integer vector along ``j`` whose first nonzero entry is positive.

    The zero index is assigned the first canonical basis vector.
    """
    j = tuple(int(v) for v in j)
    if not any(j):
        return (1,) + (0,) * (len(j) - 1)
    g = reduce(math.gcd, (abs(v) for v in j))
    k = [v // g for v in j]
    if next(v for v in k if v) < 0:
        k = [-v for v in k]
    return tuple(k)


@dataclass(frozen=True)
class IndexContext:
    """Projection geometry attached to one frequency index ``j``.

    ``omega`` is the signed frequency with ``j . x = omega * x_star / pi * (nu . x)``,
    i.e. ``omega = +/- beta`` depending on whether ``j`` points along ``nu`` or
    against it.
    """

    j: tuple[int, ...]
    norm: float
    nu: tuple[float, ...]
    nu_star: float
    L: float
    beta: float
    omega: float
    direction_key: tuple[int, ...]
    x_star: float

    @property
    def spacing_factor(self) -> float:
        """``(1 + floor(1/nu*)) nu* |j|``, an integer multiple of the key's smallest entry."""
        return self.L * self.norm / self.x_star


def index_context(j: Sequence[int], x_star: float) -> IndexContext:
    j = tuple(int(v) for v in j)
    key = direction_key(j)
    n2_key = sum(v * v for v in key)
    key_norm = math.sqrt(n2_key)
    nu = tuple(v / key_norm for v in key)
    a = min(abs(v) for v in key if v)
    # floor(1/nu*) = floor(|key| / a) in exact integer arithmetic
    inv_floor = math.isqrt(n2_key // (a * a))
    nu_star = a / key_norm
    L = (1 + inv_floor) * nu_star * x_star
    norm = math.sqrt(sum(v * v for v in j))
    beta = norm * math.pi / x_star
    if norm == 0:
        sign = 0.0
    else:
        sign = 1.0 if sum(jv * kv for jv, kv in zip(j, key)) > 0 else -1.0
    return IndexContext(j, norm, nu, nu_star, L, beta, sign * beta, key, float(x_star))


def partition(ctx: IndexContext, q: int) -> np.ndarray:
    """Uniform grid ``s_l = -L + 2 L l / q`` for ``l = 0..q``."""
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    return -ctx.L + 2 * ctx.L * np.arange(q + 1) / q


@dataclass(frozen=True)
class NoiseModel:
    """Centered noise law with variance ``sigma`` (not its square root)."""

    kind: str = "gaussian"
    sigma: float = 0.05

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if self.sigma < 0:
            raise ValueError(f"noise variance must be nonnegative, got {self.sigma}")

    @property
    def fourth_moment(self) -> float:
        factor = {"gaussian": 3.0, "laplace": 6.0, "rademacher": 1.0}[self.kind]
        return factor * self.sigma**2

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return math.sqrt(self.sigma) * rng.standard_normal(size)
        if self.kind == "laplace":
            return rng.laplace(0.0, math.sqrt(self.sigma / 2), size)
        return math.sqrt(self.sigma) * (2.0 * rng.integers(0, 2, size) - 1.0)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma}


@dataclass(frozen=True)
class NoiseFamily:
    """Admissible noise laws with variance in ``[sigma_lo, sigma_hi]`` and
    fourth moment at most ``fourth_hi``."""

    models: tuple[NoiseModel, ...]
    sigma_lo: float
    sigma_hi: float
    fourth_hi: float

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        if not (0 <= self.sigma_lo <= self.sigma_hi and self.sigma_hi > 0):
            raise ValueError("need 0 <= sigma_lo <= sigma_hi with sigma_hi > 0")
        for m in self.models:
            if not self.sigma_lo <= m.sigma <= self.sigma_hi:
                raise ValueError(
                    f"{m.kind} noise variance {m.sigma} outside [{self.sigma_lo}, {self.sigma_hi}]"
                )
            if m.fourth_moment > self.fourth_hi:
                raise ValueError(
                    f"{m.kind} noise fourth moment {m.fourth_moment:g} exceeds {self.fourth_hi}"
                )

    def to_dict(self) -> dict:
        return {
            "models": [m.to_dict() for m in self.models],
            "sigma_lo": self.sigma_lo,
            "sigma_hi": self.sigma_hi,
            "fourth_hi": self.fourth_hi,
        }


def default_noise_family() -> NoiseFamily:
    return NoiseFamily(
        tuple(NoiseModel(k, 0.05) for k in NOISE_KINDS),
        sigma_lo=0.02,
        sigma_hi=0.1,
        fourth_hi=0.02,
    )


def sample_noise(model: NoiseModel, count: int, seed=None) -> np.ndarray:
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return model.sample(count, np.random.default_rng(seed))


@dataclass(frozen=True)
class DirectionTable:
    """The distinct projection directions needed by a set of indices."""

    keys: tuple[tuple[int, ...], ...]
    contexts: tuple[IndexContext, ...]  # one representative per key (its primitive vector)
    key_of: np.ndarray  # row into ``keys`` for every index in the originating list

    @property
    def n_directions(self) -> int:
        return len(self.keys)

    def offsets(self, q: int) -> np.ndarray:
        """Sampling offsets ``s_l``, ``l = 1..q``, shape ``(K, q)``."""
        return np.stack([partition(c, q)[1:] for c in self.contexts])

    def directions(self) -> np.ndarray:
        return np.array([c.nu for c in self.contexts])


def direction_table(indices: Iterable[Sequence[int]], x_star: float) -> DirectionTable:
    keys: dict[tuple[int, ...], int] = {}
    key_of = []
    for j in indices:
        k = direction_key(j)
        key_of.append(keys.setdefault(k, len(keys)))
    ordered = tuple(keys)
    return DirectionTable(
        ordered,
        tuple(index_context(k, x_star) for k in ordered),
        np.asarray(key_of, dtype=int),
    )


@dataclass(frozen=True)
class SampleSet:
    """One realization of the sinogram on the acquisition grid.

    Arrays are indexed ``[direction, l - 1]``; ``indices[i]`` reads row
    ``table.key_of[i]``.
    """

    q: int
    indices: np.ndarray
    table: DirectionTable
    offsets: np.ndarray
    radon: np.ndarray
    noise: np.ndarray
    y: np.ndarray
    seed: object = field(default=None, compare=False)

    @property
    def n_total(self) -> int:
        return self.q * self.table.n_directions

    def observations_for(self, j: Sequence[int]) -> np.ndarray:
        k = self.table.keys.index(direction_key(j))
        return self.y[k]

    def noise_for(self, j: Sequence[int]) -> np.ndarray:
        k = self.table.keys.index(direction_key(j))
        return self.noise[k]

    def to_csv(self, path) -> None:
        d = self.indices.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"j{i + 1}" for i in range(d)] + ["l", "s", "radon_value", "noise", "y"])
            for j, k in zip(self.indices, self.table.key_of):
                for l in range(self.q):
                    w.writerow(
                        [int(v) for v in j]
                        + [
                            l + 1,
                            repr(float(self.offsets[k, l])),
                            repr(float(self.radon[k, l])),
                            repr(float(self.noise[k, l])),
                            repr(float(self.y[k, l])),
                        ]
                    )


def radon_table(phantom: Phantom, table: DirectionTable, q: int) -> np.ndarray:
    offsets = table.offsets(q)
    return np.stack(
        [exact_radon(phantom, c.nu, s) for c, s in zip(table.contexts, offsets)]
    ), offsets


def draw_samples(
    phantom: Phantom, index_set, q: int, noise: NoiseModel, seed=None
) -> SampleSet:
    """Exact Radon values plus one noise draw per (direction, offset)."""
    indices = np.atleast_2d(np.asarray(index_set, dtype=int))
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    table = direction_table(indices, phantom.x_star)
    radon, offsets = radon_table(phantom, table, q)
    xi = noise.sample((table.n_directions, q), np.random.default_rng(seed))
    return SampleSet(q, indices, table, offsets, radon, xi, radon + xi, seed)
