"""Units, constants, Matsubara frequencies and the shared run configuration.

Lengths are in micrometres and energies/frequencies in electronvolts, with
frequencies quoted as ``hbar * xi``. Wavenumbers are in inverse micrometres.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

#: Boltzmann constant in eV/K.
K_B = 8.6173332e-5
#: hbar * c in eV * um.
HBAR_C = 0.19732697

DEFAULT_TEMPERATURE = 300.0
DEFAULT_REL_TOL = 1e-9


class ConfigurationError(ValueError):
    """Invalid or inconsistent input parameters."""


class ConvergenceError(RuntimeError):
    """A sum, series or quadrature failed to reach its tolerance."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class EvaluationError(ArithmeticError):
    """A term evaluated to a non-finite value."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def xi_to_kappa(xi):
    """Wavenumber in 1/um for a frequency ``hbar * xi`` in eV."""
    return xi / HBAR_C


def kappa_to_xi(kappa):
    return kappa * HBAR_C


class MatsubaraTerm(NamedTuple):
    xi: float
    kappa: float
    weight: float


def matsubara_term(n: int, T: float) -> MatsubaraTerm:
    """Frequency, wavenumber and primed-sum weight of the ``n``-th Matsubara term."""
    if n < 0:
        raise ConfigurationError(f"Matsubara index must be non-negative, got {n}")
    if not T > 0:
        raise ConfigurationError(f"temperature must be positive, got {T}")
    xi = 2.0 * math.pi * n * K_B * T
    return MatsubaraTerm(xi, xi_to_kappa(xi), 0.5 if n == 0 else 1.0)


def thermal_wavelength(T: float) -> float:
    """``hbar c / (2 pi k_B T)`` in um, the inverse of the first Matsubara wavenumber."""
    return HBAR_C / (2.0 * math.pi * K_B * T)


@dataclass(frozen=True)
class PrimedSumResult:
    """Outcome of :func:`primed_sum`.

    ``value`` has the shape of the terms (scalar or array). ``reason`` is
    ``"converged"`` or ``"n_max"``; ``tail`` is a geometric bound on the
    neglected remainder.
    """

    value: object
    n_terms: int
    reason: str
    tail: float


def _magnitude(v) -> float:
    return float(np.max(np.abs(v)))


def primed_sum(
    term_fn: Callable[[int], object],
    rel_tol: float = DEFAULT_REL_TOL,
    n_max: int = 100000,
    workers: int = 1,
) -> PrimedSumResult:
    """Matsubara sum with the ``n = 0`` term weighted by 1/2.

    Summation stops once two consecutive terms are each smaller than
    ``rel_tol`` times the running total, or after ``n_max``. Terms may be
    scalars or arrays; for arrays the largest component decides.

    With ``workers > 1`` terms are evaluated concurrently in blocks, but
    they are always accumulated in index order, so the result does not
    depend on the worker count.
    """
    if not rel_tol > 0:
        raise ConfigurationError("rel_tol must be positive")

    def checked(n):
        t = term_fn(n)
        if not np.all(np.isfinite(t)):
            raise EvaluationError(f"non-finite Matsubara term at n={n}", n=n)
        return t

    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    total = None
    small_run = 0
    prev_mag = None
    n = 0
    try:
        while n <= n_max:
            block = range(n, min(n + max(workers, 1), n_max + 1))
            terms = list(pool.map(checked, block)) if pool else [checked(i) for i in block]
            for i, t in zip(block, terms):
                w = 0.5 if i == 0 else 1.0
                total = w * np.asarray(t, dtype=float) if total is None else total + t
                mag = _magnitude(t)
                if i > 0 and mag <= rel_tol * _magnitude(total):
                    small_run += 1
                else:
                    small_run = 0
                if small_run >= 2:
                    q = mag / prev_mag if prev_mag else 0.0
                    tail = mag * q / (1.0 - q) if q < 1.0 else math.inf
                    return PrimedSumResult(_unwrap(total), i + 1, "converged", tail)
                prev_mag = mag
            n = block.stop
    finally:
        if pool:
            pool.shutdown()
    return PrimedSumResult(_unwrap(total), n_max + 1, "n_max", prev_mag or 0.0)


def _unwrap(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


GEOMETRIES = ("sphere", "cylinder")


@dataclass(frozen=True)
class Configuration:
    """Geometry, material and numerical controls for one energy evaluation.

    The exterior medium is vacuum. ``material`` is a built-in name or a
    :class:`cpmse.materials.Material`. ``alpha`` is the static scalar
    polarizability of the particle in arbitrary units; energies are linear
    in it.
    """

    geometry: str = "sphere"
    radius: float = 30.0
    distance: float = 3.0
    material: object = "si"
    mu: float = 1.0
    alpha: float = 1.0
    temperature: float = DEFAULT_TEMPERATURE
    gauge: object = "C1"
    orders: tuple = (0, 1, 2, 3, 4)
    rel_tol: float = DEFAULT_REL_TOL
    n_max: int = 20000
    multipole_tol: float = 1e-10
    quad_tol: float = 1e-8
    workers: int = 1
    allow_fallback: bool = False
    extras: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ConfigurationError(f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}")
        for name in ("radius", "distance", "temperature", "mu", "rel_tol", "multipole_tol", "quad_tol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigurationError(f"{name} must be a positive finite number, got {v!r}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ConfigurationError("alpha must be finite and non-negative")
        orders = tuple(int(k) for k in self.orders)
        if any(k < 0 for k in orders) or list(orders) != sorted(set(orders)):
            raise ConfigurationError("orders must be distinct non-negative integers in ascending order")
        object.__setattr__(self, "orders", orders)
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")

    @property
    def a(self) -> float:
        """Distance of the particle from the body's centre or axis."""
        return self.radius + self.distance

    @property
    def d_over_r(self) -> float:
        return self.distance / self.radius

    def with_distance(self, distance: float) -> "Configuration":
        return replace(self, distance=distance)

    def with_d_over_r(self, ratio: float) -> "Configuration":
        return replace(self, distance=ratio * self.radius)

    def replace(self, **changes) -> "Configuration":
        return replace(self, **changes)


def validate_ratios(values: Sequence[float]) -> list[float]:
    out = [float(v) for v in values]
    if not out:
        raise ConfigurationError("at least one distance is required")
    if any(not (math.isfinite(v) and v > 0) for v in out):
        raise ConfigurationError("distances must be positive and finite")
    return out


@dataclass(frozen=True)
class EnergyResult:
    """An energy (or per-order energies) with its truncation record."""

    energy: object
    n_matsubara: int
    multipole_max: int
    flags: tuple = ()


def adaptive_truncation(contributions, start: int, tol: float, cap: int = 1 << 16):
    """Sum per-order contributions with a doubling cutoff.

    ``contributions(L)`` returns an array whose last axis runs over
    ``L`` partial-wave orders. The cutoff doubles until going from ``L/2``
    to ``L`` orders changes the total by less than ``tol`` relative. For
    multi-row results (leading axes) the largest relative change decides.

    Returns ``(sum over the last axis, L)``.
    """
    L = max(2 * int(start), 4)
    while True:
        c = np.asarray(contributions(L))
        full = c.sum(axis=-1)
        half = c[..., : L // 2].sum(axis=-1)
        scale = np.maximum(np.abs(full), np.finfo(float).tiny)
        change = float(np.max(np.abs(full - half) / scale))
        if change < tol or not np.any(full):
            return full, L
        if 2 * L > cap:
            raise ConvergenceError(
                f"partial-wave sum not converged at order {L}",
                order=L,
                last_change=change,
            )
        L *= 2
