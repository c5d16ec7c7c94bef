"""Exact Casimir-Polder energy of a particle outside a sphere.

Mie amplitudes are carried in a reduced form ``tau`` that stays O(1):

    T_l = tau_l * I_l(kR) / K_l(kR)

with ``I_l``, ``K_l`` the Riccati-Bessel functions, ``K_l`` normalised as
``x sqrt(2/(pi x)) K_{l+1/2}(x)``. For TM waves, with ``rho = x F'/F``,

    tau_EE = (rho_I(n kR)/eps - rho_I(kR)) / (rho_K(kR) - rho_I(n kR)/eps)

and ``tau_HH`` is the same expression with ``mu`` in place of ``eps``;
``n = sqrt(eps mu)``. The energy is assembled from ``tau`` and logarithms of
the Bessel functions, so no exponentially large factor is ever formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .materials import body_of, permittivity
from .quantities import (
    K_B,
    ConfigurationError,
    EnergyResult,
    adaptive_truncation,
    matsubara_term,
    primed_sum,
)
from .specfun import sph_riccati_table

# log of the factor converting K_l from the A&S normalisation used by
# specfun (Wronskian -pi/2) to the one in the energy formula (Wronskian -1)
LOG_TWO_OVER_PI = math.log(2.0 / math.pi)


@dataclass(frozen=True)
class MieBlock:
    l: int
    T_EE: float
    T_HH: float
    T_EH: float = 0.0
    T_HE: float = 0.0


@dataclass(frozen=True)
class MieStatic:
    """Leading small-``kR`` coefficients: ``T_l ~ c_l (kR)^(2l+1)``."""

    l: int
    c_EE: float
    c_HH: float


def start_order(radius: float, distance: float) -> int:
    return 10 + math.ceil(5.0 * math.sqrt(radius / distance))


def _tau_pair(rho_i0, rho_k0, rho_is, eps, mu):
    if math.isinf(eps):
        return -rho_i0 / rho_k0, -np.ones_like(rho_i0)
    u = rho_is / eps
    v = rho_is / mu
    return (u - rho_i0) / (rho_k0 - u), (v - rho_i0) / (rho_k0 - v)


def mie_taus(lmax: int, y: float, eps: float, mu: float = 1.0):
    """Reduced amplitudes ``(tau_EE, tau_HH)`` for ``l = 1..lmax`` at ``y = kR > 0``."""
    _, _, ri0, rk0 = sph_riccati_table(lmax, [y])
    if math.isinf(eps):
        ris = ri0
    else:
        _, _, ris, _ = sph_riccati_table(lmax, [math.sqrt(eps * mu) * y])
    return _tau_pair(ri0[0, 1:], rk0[0, 1:], ris[0, 1:], eps, mu)


def static_taus(lmax: int, eps: float, mu: float = 1.0):
    """``kR -> 0`` limit of :func:`mie_taus` for ``l = 1..lmax``."""
    l = np.arange(1, lmax + 1, dtype=float)
    if math.isinf(eps):
        return (l + 1) / l, -np.ones_like(l)
    tee = (l + 1) * (eps - 1) / (l * eps + l + 1)
    thh = (l + 1) * (mu - 1) / (l * mu + l + 1)
    return tee, thh


def _double_factorial_log(l):
    # log((2l-1)!! (2l+1)!!) using Gamma functions
    log_odd = math.lgamma(2 * l + 1) - math.lgamma(l + 1) - l * math.log(2.0)
    return 2 * log_odd + math.log(2 * l + 1)


def mie_block(l: int, kappa: float, eps: float, mu: float, R: float) -> MieBlock:
    """Mie amplitudes ``T_EE`` (TM) and ``T_HH`` (TE) at imaginary frequency."""
    if l < 1:
        raise ConfigurationError("multipole order must be at least 1")
    if not kappa > 0:
        raise ConfigurationError("kappa must be positive; use mie_block_static for kappa = 0")
    if not (eps >= 1 or math.isinf(eps)) or not mu > 0:
        raise ConfigurationError(f"invalid response eps={eps}, mu={mu}")
    y = kappa * R
    tee, thh = mie_taus(l, y, eps, mu)
    li, lk, _, _ = sph_riccati_table(l, [y])
    ratio = math.exp(li[0, l] - lk[0, l] - LOG_TWO_OVER_PI)
    T_EE, T_HH = tee[-1] * ratio, thh[-1] * ratio
    if not (math.isfinite(T_EE) and math.isfinite(T_HH)):
        raise ArithmeticError(f"non-finite Mie amplitude at l={l}, kR={y}, eps={eps}")
    return MieBlock(l, float(T_EE), float(T_HH))


def mie_block_static(l: int, eps: float, R: float = 1.0, mu: float = 1.0) -> MieStatic:
    """Coefficients ``c_l`` with ``T_l = c_l (kR)^(2l+1) (1 + O((kR)^2))``.

    ``R`` only fixes the scale in which ``kR`` is measured and does not
    enter the coefficients.
    """
    if l < 1:
        raise ConfigurationError("multipole order must be at least 1")
    tee, thh = static_taus(l, eps, mu)
    scale = math.exp(-_double_factorial_log(l))
    return MieStatic(l, float(tee[-1] * scale), float(thh[-1] * scale))


# ---------------------------------------------------------------------------
# energy assembly


def sphere_weights(lmax: int, kappa: float, R: float, a: float):
    """Per-``l`` weights ``(w_EE, w_HH)`` of a Matsubara term with ``kappa > 0``.

    The term equals ``alpha * sum_l (w_EE tau_EE + w_HH tau_HH)``.
    """
    y, x = kappa * R, kappa * a
    li, lk, _, _ = sph_riccati_table(lmax, [y, x])
    _, _, _, rkx = sph_riccati_table(lmax, [x])
    l = np.arange(1, lmax + 1, dtype=float)
    logG = li[0, 1:] + 2 * (lk[1, 1:] + LOG_TWO_OVER_PI) - (lk[0, 1:] + LOG_TWO_OVER_PI)
    common = kappa / a**2 * (2 * l + 1) * np.exp(logG)
    rho = rkx[0, 1:]
    return -common * (rho * rho + l * (l + 1)) / x**2, common


def sphere_static_weights(lmax: int, R: float, a: float):
    """Per-``l`` weights of the ``kappa = 0`` term (only TM waves contribute)."""
    l = np.arange(1, lmax + 1, dtype=float)
    return -l * (2 * l + 1) * np.exp((2 * l + 1) * math.log(R / a)) / a**3


def sphere_matsubara_sum(cfg, channel_terms, rows: int = 1):
    """Primed Matsubara sum of ``k_B T * alpha * sum_l w . tau``.

    ``channel_terms(n, kappa, eps, mu, lmax)`` returns ``(tau_EE, tau_HH)``
    with shapes ``(rows, lmax)``; for ``kappa = 0`` only ``tau_EE`` is used.
    Returns an :class:`EnergyResult` whose energy has shape ``(rows,)``.
    """
    mat, mu = body_of(cfg)
    R, a = cfg.radius, cfg.a
    L0 = start_order(R, cfg.distance)
    lmax_used = [0]
    flags: list[str] = []

    def term(n):
        xi, kappa, _ = matsubara_term(n, cfg.temperature)
        eps = permittivity(mat, xi)

        def contributions(L):
            tee, thh = channel_terms(n, kappa, eps, mu, L)
            if n == 0:
                return np.atleast_2d(tee) * sphere_static_weights(L, R, a)
            wee, whh = sphere_weights(L, kappa, R, a)
            return np.atleast_2d(tee) * wee + np.atleast_2d(thh) * whh

        total, L = adaptive_truncation(contributions, L0, cfg.multipole_tol)
        lmax_used[0] = max(lmax_used[0], L)
        return total.reshape(rows)

    res = primed_sum(term, cfg.rel_tol, cfg.n_max, cfg.workers)
    if res.reason != "converged":
        flags.append("matsubara_nmax")
    energy = K_B * cfg.temperature * cfg.alpha * np.asarray(res.value).reshape(rows)
    return EnergyResult(energy, res.n_terms, lmax_used[0], tuple(flags))


def sphere_exact_details(cfg) -> EnergyResult:
    """Exact energy with truncation diagnostics."""
    if cfg.geometry != "sphere":
        raise ConfigurationError("configuration is not a sphere")
    R = cfg.radius

    def taus(n, kappa, eps, mu, L):
        if n == 0:
            return static_taus(L, eps, mu)
        return mie_taus(L, kappa * R, eps, mu)

    res = sphere_matsubara_sum(cfg, taus)
    return EnergyResult(float(res.energy[0]), res.n_matsubara, res.multipole_max, res.flags)


def cp_energy_sphere_exact(cfg) -> float:
    """Exact Casimir-Polder energy (eV) of a particle outside a sphere."""
    return sphere_exact_details(cfg).energy
