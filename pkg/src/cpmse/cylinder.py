"""Exact Casimir-Polder energy of a particle outside an infinite cylinder.

Amplitudes are written in reduced form ``T = tau * I_m(p0 R) / K_m(p0 R)``
with ``p0 = sqrt(kappa^2 + k_z^2)``. The mixing amplitude obeys
``T_HE = -T_EH``. Lengths are scaled by ``R`` internally: ``s = kappa R``,
``beta = k_z R``, ``P0 = p0 R`` and ``P = sqrt(eps mu s^2 + beta^2)``.

The particle sees a finite total energy even though the cylinder is
infinitely long; ``docs/derivation.md`` relates its normalisation to the
sphere formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .materials import body_of, permittivity
from .quantities import (
    K_B,
    ConfigurationError,
    ConvergenceError,
    EnergyResult,
    adaptive_truncation,
    matsubara_term,
    primed_sum,
)
from .specfun import cyl_bessel_table

#: Integrand cut-off: the k_z range extends until exp(-2 (p0 - kappa) d)
#: has dropped to about exp(-2 * TAIL_DECAY).
TAIL_DECAY = 22.0
#: Smallest k_z * a sampled in the zero-frequency integral.
STATIC_K_FLOOR = 1e-12
START_NODES = 32
MAX_NODES = 4096


@dataclass(frozen=True)
class CylTBlock:
    m: int
    k_z: float
    T_EE: float
    T_HH: float
    T_EH: float
    T_HE: float
    upsilon: float
    deltas: tuple
    p: float
    p0: float


def _deltas(rho_Ip, rho_K0, rho_I0, P, P0, eps, mu):
    a = rho_Ip / (P * P)
    inv_e = 0.0 if math.isinf(eps) else 1.0 / eps
    b = rho_K0 / (P0 * P0)
    c = rho_I0 / (P0 * P0)
    return a - inv_e * b, a - b / mu, a - inv_e * c, a - c / mu


def cyl_taus(M: int, beta, s: float, eps: float, mu: float = 1.0):
    """Reduced amplitudes for ``m = 0..M`` at every ``beta`` (= k_z R).

    Returns ``(tau_EE, tau_HH, tau_EH)`` of shape ``(len(beta), M + 1)``.
    ``s = 0`` gives the zero-frequency limit.
    """
    beta = np.abs(np.atleast_1d(np.asarray(beta, float)))
    m = np.arange(M + 1, dtype=float)
    P0 = np.hypot(s, beta)
    lI0, lK0, rI0, rK0 = cyl_bessel_table(M, P0)
    if math.isinf(eps):
        # perfect conductor; at zero frequency only the electric response diverges
        tee = -np.ones_like(rI0)
        if s == 0.0:
            thh = -(1 - 1 / mu) * rI0 / (rI0 - rK0 / mu)
        else:
            thh = -rI0 / rK0
        return tee, thh, np.zeros_like(rI0)
    if s == 0.0:
        rIp, P = rI0, P0
        ups = np.zeros_like(rI0)
    elif eps * mu == 1.0:
        # same argument inside and out; reuse it so the contrast cancels exactly
        P, rIp = P0, rI0
        ups = np.zeros_like(rI0)
    else:
        P = np.sqrt(eps * mu * s * s + beta * beta)
        _, _, rIp, _ = cyl_bessel_table(M, P)
        n = math.sqrt(eps * mu)
        ups = (m[None, :] * beta[:, None] * (1.0 - eps * mu) * s / (n * (P * P * P0 * P0))[:, None])
    P_, P0_ = P[:, None], P0[:, None]
    d1, d2, d3, d4 = _deltas(rIp, rK0, rI0, P_, P0_, eps, mu)
    den = d1 * d2 + ups * ups
    tee = -(d2 * d3 + ups * ups) / den
    thh = -(d1 * d4 + ups * ups) / den
    # T_HE = ups / (n P0^2 K^2 den)  =>  tau_HE = ups / (n P0^2 I K den)
    if s == 0.0:
        the = np.zeros_like(tee)
    else:
        the = ups / (math.sqrt(eps * mu) * P0_ * P0_ * np.exp(lI0 + lK0) * den)
    return tee, thh, -the


def cyl_t_block(m: int, k_z: float, kappa: float, eps: float, mu: float, R: float) -> CylTBlock:
    """Exact cylinder amplitudes for azimuthal order ``m`` and axial wavenumber ``k_z``."""
    if kappa < 0 or R <= 0:
        raise ConfigurationError("need kappa >= 0 and R > 0")
    if kappa == 0 and k_z == 0:
        raise ConfigurationError("(kappa, k_z) = (0, 0) is excluded")
    if not (eps >= 1 or math.isinf(eps)) or not mu > 0:
        raise ConfigurationError(f"invalid response eps={eps}, mu={mu}")
    am = abs(int(m))
    s, beta = kappa * R, k_z * R
    tee, thh, teh = cyl_taus(am, [beta], s, eps, mu)
    P0 = math.hypot(s, beta)
    lI, lK, rI0, rK0 = cyl_bessel_table(am, [P0])
    ratio = math.exp(lI[0, am] - lK[0, am])
    # the mixing amplitude is odd in m and in k_z
    sign = (1 if m >= 0 else -1) * (1 if k_z >= 0 else -1)
    TEH = sign * teh[0, am] * ratio
    if math.isinf(eps) or s == 0.0:
        ups, deltas, P = 0.0, (math.nan,) * 4, P0
    else:
        P = math.sqrt(eps * mu * s * s + beta * beta)
        _, _, rIp, _ = cyl_bessel_table(am, [P])
        ups = sign * am * abs(beta) * (1 - eps * mu) * s / (math.sqrt(eps * mu) * P * P * P0 * P0)
        deltas = tuple(float(v) for v in _deltas(rIp[0, am], rK0[0, am], rI0[0, am], P, P0, eps, mu))
    return CylTBlock(
        int(m), float(k_z), float(tee[0, am] * ratio), float(thh[0, am] * ratio),
        float(TEH), float(-TEH), float(ups), deltas, P / R, P0 / R,
    )


# ---------------------------------------------------------------------------
# energy assembly


def start_order(radius: float, distance: float) -> int:
    return 10 + math.ceil(5.0 * math.sqrt(radius / distance))


def cylinder_weights(M: int, k, kappa: float, R: float, a: float):
    """Per-channel weights ``(w_EE, w_HH, w_EH)`` of shape ``(len(k), M + 1)``.

    A Matsubara term is ``alpha/pi * int dk sum_m (w . tau)``. At
    ``kappa = 0`` only ``w_EE`` is non-zero.
    """
    k = np.atleast_1d(np.asarray(k, float))
    p0 = np.hypot(kappa, k)
    x = p0 * a
    lI0, lK0, _, _ = cyl_bessel_table(M, p0 * R)
    _, lKx, _, rho = cyl_bessel_table(M, x)
    G = np.exp(lI0 - lK0 + 2 * lKx)
    m = np.arange(M + 1, dtype=float)[None, :]
    x_ = x[:, None]
    r2 = (rho * rho + m * m) / (x_ * x_)
    if kappa == 0.0:
        return G * (rho * rho + m * m + x_ * x_) / a**2, None, None
    k_, p0_ = k[:, None], p0[:, None]
    wee = G * (k_ * k_ * r2 + p0_ * p0_)
    whh = -kappa * kappa * G * r2
    weh = G * 4.0 * m * k_ * kappa * rho / (p0_ * a * x_)
    return wee, whh, weh


def folded_channels(taus, k, wk, kappa: float, R: float, a: float, rows: int = 1):
    """Per-``|m|`` contributions ``int dk_z sum_{+-m} w . tau`` over the whole real line.

    ``taus = (tau_EE, tau_HH, tau_EH)`` hold the values at ``k_z = k >= 0``
    and ``m >= 0`` with shape ``(rows, len(k), M + 1)``; ``wk`` are the
    quadrature weights on ``k >= 0``. Negative ``k_z`` and ``m`` are added
    by symmetry: ``tau_EE``, ``tau_HH`` are even in both, while ``tau_EH``
    and its weight are each odd in both, so every product is even.
    Returns shape ``(rows, M + 1)``.
    """
    tee, thh, teh = taus
    tee = np.asarray(tee)
    M = tee.shape[-1] - 1
    if kappa == 0.0:
        integrand = tee * cylinder_weights(M, k, 0.0, R, a)[0]
    else:
        wee, whh, weh = cylinder_weights(M, k, kappa, R, a)
        integrand = tee * wee + thh * whh + teh * weh
    mult = np.full(M + 1, 2.0)
    mult[0] = 1.0
    return 2.0 * np.einsum("rkm,k,m->rm", integrand.reshape(rows, len(k), M + 1), wk, mult)


def _nodes(n_nodes: int, lo: float, hi: float):
    t, w = leggauss(n_nodes)
    half = 0.5 * (hi - lo)
    return lo + half * (t + 1.0), half * w


def k_grid(n_nodes: int, kappa: float, d: float, a: float):
    """Quadrature nodes ``k`` and weights (including the Jacobian) on ``(0, k_max)``."""
    if kappa > 0:
        k_hi = math.sqrt((kappa + TAIL_DECAY / d) ** 2 - kappa**2)
        t, w = _nodes(n_nodes, 0.0, math.asinh(k_hi / kappa))
        return kappa * np.sinh(t), w * kappa * np.cosh(t)
    # zero frequency: logarithmic map resolves the k -> 0 end
    u, w = _nodes(n_nodes, math.log(STATIC_K_FLOOR / a), math.log(TAIL_DECAY / d))
    k = np.exp(u)
    return k, w * k


def cylinder_matsubara_sum(cfg, channel_terms, rows: int = 1):
    """Primed Matsubara sum of the cylinder energy.

    ``channel_terms(n, kappa, eps, mu, beta, M)`` returns
    ``(tau_EE, tau_HH, tau_EH)``, each of shape ``(rows, len(beta), M + 1)``
    (``tau_HH``, ``tau_EH`` may be ``None`` at ``kappa = 0``).
    """
    mat, mu = body_of(cfg)
    R, a, d = cfg.radius, cfg.a, cfg.distance
    M0 = start_order(R, d)
    record = {"M": 0, "nodes": 0}

    def term(n):
        xi, kappa, _ = matsubara_term(n, cfg.temperature)
        eps = permittivity(mat, xi)
        prev = None
        n_nodes = START_NODES
        M_start = M0
        while True:
            k, wk = k_grid(n_nodes, kappa, d, a)
            beta = k * R

            def contributions(L):
                M = L - 1
                taus = channel_terms(n, kappa, eps, mu, beta, M)
                return folded_channels(taus, k, wk, kappa, R, a, rows)

            total, L = adaptive_truncation(contributions, M_start, cfg.multipole_tol)
            M_start = L // 2
            if prev is not None:
                scale = np.maximum(np.abs(total), np.finfo(float).tiny)
                if np.max(np.abs(total - prev) / scale) < cfg.quad_tol:
                    break
            if 2 * n_nodes > MAX_NODES:
                raise ConvergenceError(
                    f"k_z quadrature not converged at n={n}",
                    nodes=n_nodes,
                    change=float(np.max(np.abs(total - prev))),
                )
            prev = total
            n_nodes *= 2
        record["M"] = max(record["M"], L - 1)
        record["nodes"] = max(record["nodes"], n_nodes)
        return total / math.pi

    res = primed_sum(term, cfg.rel_tol, cfg.n_max, cfg.workers)
    flags = () if res.reason == "converged" else ("matsubara_nmax",)
    energy = K_B * cfg.temperature * cfg.alpha * np.asarray(res.value).reshape(rows)
    return EnergyResult(energy, res.n_terms, record["M"], flags)


def cylinder_exact_details(cfg) -> EnergyResult:
    if cfg.geometry != "cylinder":
        raise ConfigurationError("configuration is not a cylinder")
    R = cfg.radius

    def taus(n, kappa, eps, mu, beta, M):
        tee, thh, teh = cyl_taus(M, beta, kappa * R, eps, mu)
        return tee[None], thh[None], teh[None]

    res = cylinder_matsubara_sum(cfg, taus)
    return EnergyResult(float(res.energy[0]), res.n_matsubara, res.multipole_max, res.flags)


def cp_energy_cylinder_exact(cfg) -> float:
    """Exact Casimir-Polder energy (eV) of a particle outside an infinite cylinder."""
    return cylinder_exact_details(cfg).energy
