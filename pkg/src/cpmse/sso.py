"""Surface scattering operator in partial-wave channels.

A single sphere or cylinder centred at the origin is diagonal in partial
waves, so the surface scattering operator reduces to one small real block
per channel: ``l`` for the sphere, ``(m, k_z)`` for the cylinder. Each block
acts on the tangential traces of the surface fields, ordered as

* sphere: ``(E.Y1, H.Y2 | E.Y2, H.Y1)``, i.e. the TM pair then the TE pair;
* cylinder: ``(E_par, E_perp, H_par, H_perp)`` with ``par`` along
  ``(k_z, m/R)`` and ``perp`` orthogonal to it in the surface.

In trace coordinates the exterior and interior Calderon projectors onto
outgoing waves, ``P0`` and ``Ps``, are built from the traces of regular and
outgoing partial waves. For diagonal coefficient matrices ``Ci`` and ``Ce``

    K = 2 (Ci + Ce)^-1 (Ce P0 - Ci Ps) + (Ci + Ce)^-1 (Ci - Ce),
    B = 2 (Ci + Ce)^-1 Ce g0,

where ``g0`` is the trace of the incident regular wave, and the detector
``A`` extracts the outgoing-wave amplitude from a trace. The reduced
scattering amplitude of the channel is ``tau = A (1 - K)^-1 B``, and the
order-``k`` estimate keeps ``sum_{j<=k} K^j``. The derivation is written
out in ``docs/derivation.md``.

TM-type sectors are stored after scaling the electric trace by ``eps``.
The interior traces then do not depend on ``eps`` explicitly and the
static perfect-conductor limit ``eps -> inf`` is a regular point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .quantities import ConfigurationError
from .specfun import cyl_bessel_table, sph_riccati_table

#: Channels whose spectral radius reaches this value are not expanded.
GUARD_THRESHOLD = 1.0 - 1e-6


class SpectralGuardError(RuntimeError):
    """A channel operator has spectral radius too close to or above one."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class SingularChannelError(ArithmeticError):
    """``1 - K`` is numerically singular in some channel."""


# ---------------------------------------------------------------------------
# coefficient gauges


@dataclass(frozen=True)
class Gauge:
    """Diagonal coefficient pair ``Ci = diag(ci_E, ci_H)``, ``Ce = diag(ce_E, ce_H)``.

    ``C1`` uses the body's own response, ``Ci = diag(eps, mu)`` and
    ``Ce = 1``. ``C2`` is the material-independent ``Ci = diag(1, 0)``,
    ``Ce = diag(0, 1)``. Any other fixed pair with non-zero sums is a
    custom gauge.
    """

    tag: str
    ci: tuple = (1.0, 1.0)
    ce: tuple = (1.0, 1.0)

    def __post_init__(self):
        if self.tag not in ("C1", "C2", "custom"):
            raise ConfigurationError(f"unknown gauge {self.tag!r}")
        if self.tag == "custom":
            ci = tuple(float(v) for v in self.ci)
            ce = tuple(float(v) for v in self.ce)
            if len(ci) != 2 or len(ce) != 2 or not all(map(math.isfinite, ci + ce)):
                raise ConfigurationError("custom gauge needs two finite coefficients each")
            if ci[0] + ce[0] == 0 or ci[1] + ce[1] == 0:
                raise ConfigurationError("Ci + Ce must be invertible")
            object.__setattr__(self, "ci", ci)
            object.__setattr__(self, "ce", ce)

    def weights(self, eps: float, mu: float):
        """Return ``(wi, we)`` pairs ``Ci (Ci+Ce)^-1`` and ``Ce (Ci+Ce)^-1``.

        Each is a tuple ``(E, H)``. Handles ``eps = inf`` for C1.
        """
        if self.tag == "C1":
            if math.isinf(eps):
                wiE, weE = 1.0, 0.0
            else:
                wiE, weE = eps / (eps + 1.0), 1.0 / (eps + 1.0)
            return (wiE, mu / (mu + 1.0)), (weE, 1.0 / (mu + 1.0))
        if self.tag == "C2":
            return (1.0, 0.0), (0.0, 1.0)
        (ciE, ciH), (ceE, ceH) = self.ci, self.ce
        return (ciE / (ciE + ceE), ciH / (ciH + ceH)), (ceE / (ciE + ceE), ceH / (ciH + ceH))

    def scaled_exterior_weight(self, eps: float) -> float:
        """``eps * ce_E / (ci_E + ce_E)``, the exterior E weight in scaled coordinates."""
        if self.tag == "C1":
            return 1.0 if math.isinf(eps) else eps / (eps + 1.0)
        if self.tag == "C2":
            return 0.0
        ciE, ceE = self.ci[0], self.ce[0]
        if ceE == 0.0:
            return 0.0
        if math.isinf(eps):
            raise ConfigurationError("this custom gauge has no perfect-conductor limit")
        return eps * ceE / (ciE + ceE)

    def __str__(self):
        return self.tag


C1 = Gauge("C1")
C2 = Gauge("C2")
#: Alias matching the terminology of the coefficient matrices.
CoefficientChoice = Gauge


def get_gauge(which) -> Gauge:
    if isinstance(which, Gauge):
        return which
    key = str(which).strip().upper()
    if key == "C1":
        return C1
    if key == "C2":
        return C2
    raise ConfigurationError(f"unknown gauge {which!r}; use C1, C2 or a Gauge instance")


def custom_gauge(ci_e, ci_h, ce_e, ce_h) -> Gauge:
    return Gauge("custom", (ci_e, ci_h), (ce_e, ce_h))


# ---------------------------------------------------------------------------
# channel blocks


class Channels(NamedTuple):
    """Stacked channel operators.

    ``M`` equals ``1 - K`` but is assembled as ``2 (We Q0 + Wi Ps)`` with
    ``Q0 = 1 - P0`` built directly, so eigenvalues of ``K`` close to one
    are resolved without cancellation.
    """

    K: np.ndarray
    A: np.ndarray
    B: np.ndarray
    M: np.ndarray


@dataclass(frozen=True)
class SsoBlock:
    """Channel block of the surface scattering operator.

    ``K`` is the 4x4 operator, ``A`` the 2x4 detector (rows: outgoing TM and
    TE amplitudes) and ``B`` the 4x2 source (columns: incident TM and TE
    waves). ``A (1-K)^-1 B`` is the reduced 2x2 scattering amplitude.
    """

    geometry: str
    channel: tuple
    K: np.ndarray
    A: np.ndarray
    B: np.ndarray
    gauge: Gauge
    kappa: float = 0.0
    M: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def spectral_radius(self) -> float:
        return spectral_radius(self)

    def one_minus_K(self) -> np.ndarray:
        return np.eye(4) - self.K if self.M is None else self.M

    def resummed(self) -> np.ndarray:
        return self.A @ np.linalg.solve(self.one_minus_K(), self.B)

    def partial_sum(self, k: int) -> np.ndarray:
        out = np.zeros((2, 2))
        v = self.B.copy()
        for _ in range(k + 1):
            out = out + self.A @ v
            v = self.K @ v
        return out


def spectral_radius(block) -> float:
    """Largest eigenvalue modulus of the channel operator."""
    if isinstance(block, SsoBlock):
        if not np.any(block.K):
            return 0.0
        # eigenvalues of K near one are resolved better through 1 - K
        return float(np.max(np.abs(1.0 - np.linalg.eigvals(block.one_minus_K()))))
    K = np.asarray(block)
    if not np.any(K):
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(K))))


def _proj_out2(o, g):
    """Projector onto span(o) along span(g) for stacks of 2-vectors."""
    det = o[..., 0] * g[..., 1] - o[..., 1] * g[..., 0]
    row = np.stack([g[..., 1], -g[..., 0]], axis=-1) / det[..., None]
    return o[..., :, None] * row[..., None, :], row


def _scaled_sector(o0, g0, os_, gs, eps, wi, we, wt):
    """TM-type 2x2 sector with the electric trace scaled by ``eps``.

    ``o0, g0``: exterior outgoing/regular traces in plain coordinates.
    ``os_, gs``: interior traces in scaled coordinates.
    ``wi, we``: (E, H) gauge weights; ``wt``: scaled exterior E weight.
    """
    eta = 0.0 if math.isinf(eps) else 1.0 / eps
    P0, An = _proj_out2(o0, g0)
    Q0, _ = _proj_out2(g0, o0)
    Ps, _ = _proj_out2(os_, gs)

    def exterior(X):
        out = np.empty(X.shape)
        out[..., 0, 0] = 2 * eta * wt * X[..., 0, 0]
        out[..., 0, 1] = 2 * wt * X[..., 0, 1]
        out[..., 1, 0] = 2 * eta * we[1] * X[..., 1, 0]
        out[..., 1, 1] = 2 * we[1] * X[..., 1, 1]
        return out

    wi_ = np.array(wi)[:, None]
    K = exterior(P0) - 2 * wi_ * Ps + np.diag(np.array(wi) - np.array(we))
    M = exterior(Q0) + 2 * wi_ * Ps
    B = np.stack([2 * wt * g0[..., 0], 2 * we[1] * g0[..., 1]], axis=-1)
    A = np.stack([eta * An[..., 0], An[..., 1]], axis=-1)
    return Channels(K, A, B, M)


def _plain_sector(o0, g0, os_, gs, wi, we):
    """2x2 sector in unscaled coordinates."""
    P0, An = _proj_out2(o0, g0)
    Q0, _ = _proj_out2(g0, o0)
    Ps, _ = _proj_out2(os_, gs)
    wi_ = np.array(wi)[:, None]
    we_ = np.array(we)[:, None]
    K = 2 * (we_ * P0 - wi_ * Ps) + np.diag(np.array(wi) - np.array(we))
    M = 2 * (we_ * Q0 + wi_ * Ps)
    B = 2 * np.array(we) * g0
    return Channels(K, An, B, M)


def _pair(x, y):
    return np.stack([np.asarray(x, float), np.broadcast_to(np.asarray(y, float), np.shape(x))], axis=-1)


def sphere_sectors(lmax: int, kappa: float, R: float, eps: float, mu: float, gauge):
    """TM and TE sectors for ``l = 1..lmax``.

    Returns two :class:`Channels` (TM, TE) with ``K`` of shape
    ``(lmax, 2, 2)`` and ``A``, ``B`` of shape ``(lmax, 2)``.
    """
    gauge = get_gauge(gauge)
    wi, we = gauge.weights(eps, mu)
    wt = gauge.scaled_exterior_weight(eps)
    l = np.arange(1, lmax + 1, dtype=float)
    if kappa == 0.0:
        ri0, rk0 = l + 1.0, -l
        ris, rks = ri0, rk0
    else:
        if math.isinf(eps):
            raise ConfigurationError("the perfect-conductor limit is only available at zero frequency")
        y = kappa * R
        _, _, ri, rk = sph_riccati_table(lmax, [y, math.sqrt(eps * mu) * y])
        ri0, rk0, ris, rks = ri[0, 1:], rk[0, 1:], ri[1, 1:], rk[1, 1:]
    tm = _scaled_sector(_pair(rk0, 1.0), _pair(ri0, 1.0), _pair(rks, 1.0), _pair(ris, 1.0), eps, wi, we, wt)
    one = np.ones_like(l)
    te = _plain_sector(
        np.stack([one, -rk0], -1), np.stack([one, -ri0], -1),
        np.stack([one, -rks / mu], -1), np.stack([one, -ris / mu], -1), wi, we,
    )
    return tm, te


def sso_block_sphere(l: int, kappa: float, eps: float, mu: float, R: float, gauge) -> SsoBlock:
    """4x4 channel block for multipole ``l`` (independent of the azimuthal index)."""
    if l < 1:
        raise ConfigurationError("multipole order must be at least 1")
    if kappa < 0 or R <= 0:
        raise ConfigurationError("need kappa >= 0 and R > 0")
    gauge = get_gauge(gauge)
    tm, te = sphere_sectors(l, kappa, R, eps, mu, gauge)
    K, A, B, M = _assemble(tm, te, [0, 1], [2, 3], (-1,))
    return SsoBlock("sphere", (l,), K, A, B, gauge, kappa, M)


def _assemble(tm, te, itm, ite, pick):
    """Embed two 2x2 sectors into a 4x4 block."""
    K = np.zeros((4, 4))
    M = np.zeros((4, 4))
    A = np.zeros((2, 4))
    B = np.zeros((4, 2))
    for sec, idx, p in ((tm, itm, 0), (te, ite, 1)):
        K[np.ix_(idx, idx)] = sec.K[pick]
        M[np.ix_(idx, idx)] = sec.M[pick]
        A[p, idx] = sec.A[pick]
        B[idx, p] = sec.B[pick]
    return K, A, B, M


# ---------------------------------------------------------------------------
# series and resummation over stacks of channels


def channel_series(ch: Channels, orders, guard=True):
    """Order-by-order and resummed reduced amplitudes for a stack of channels.

    ``ch.K`` has shape ``(..., D, D)``; ``A`` ``(..., P, D)`` and ``B``
    ``(..., D, P)``, or ``(..., D)`` for single-polarisation sectors.
    Returns ``(taus, radius)``: ``taus`` stacks the partial sums for each
    requested order followed by the resummed value; ``radius`` is the
    per-channel spectral radius (or ``None`` when ``guard`` is false).
    """
    K, A, B, M = ch
    vec = A.ndim == K.ndim - 1
    if vec:
        A = A[..., None, :]
        B = B[..., :, None]
    kmax = max(orders) if orders else -1
    out = []
    acc = np.zeros(A.shape[:-1] + B.shape[-1:])
    v = B
    for k in range(kmax + 1):
        acc = acc + A @ v
        if k in orders:
            out.append(acc)
        if k < kmax:
            v = K @ v
    try:
        X = np.linalg.solve(M, B)
    except np.linalg.LinAlgError as exc:
        raise SingularChannelError("1 - K is singular in a retained channel") from exc
    out.append(A @ X)
    taus = np.stack(out)
    if vec:
        taus = taus[..., 0, 0]
    radius = np.max(np.abs(1.0 - np.linalg.eigvals(M)), axis=-1) if guard else None
    return taus, radius


def _cyl_vectors(m, beta, s, eps, mu, P, rho):
    """Trace vectors of TM and TE cylinder waves, scaled by ``P^2 (beta^2 + m^2)``.

    Coordinates ``(E_par, E_perp/s, H_par, H_perp/s)``; returns two arrays
    of shape ``(..., 4)``.
    """
    em = eps * mu
    # at m = 0 every entry carries a factor beta; dropping it keeps k_z = 0 regular
    beta = np.where(m == 0, 1.0, beta)
    tm = np.stack([beta * (P * P + m * m), -m * em * s + 0 * rho, m * eps * s * rho, beta * eps * rho], -1)
    te = np.stack([-m * mu * s * rho, -beta * mu * rho, beta * (P * P + m * m) + 0 * rho, -m * em * s + 0 * rho], -1)
    return tm, te


def _proj_out4(V):
    """Projectors onto the first two columns of ``V`` along the last two, and back."""
    V = V / np.linalg.norm(V, axis=-2, keepdims=True)
    scale = 1.0 / np.linalg.norm(V, axis=-1, keepdims=True)
    Vt = scale * V
    Vi = np.linalg.inv(Vt)
    unscale = lambda X: X / scale * np.swapaxes(scale, -1, -2)
    return unscale(Vt[..., :, :2] @ Vi[..., :2, :]), unscale(Vt[..., :, 2:] @ Vi[..., 2:, :])


def cylinder_blocks(M: int, beta, s: float, eps: float, mu: float, gauge, m=None):
    """Full 4x4 blocks at ``kappa R = s > 0`` for ``m = 0..M`` and every ``beta``.

    Returns :class:`Channels` with ``K`` of shape ``(len(beta), M+1, 4, 4)``,
    ``A`` ``(..., 2, 4)`` and ``B`` ``(..., 4, 2)``. ``m`` may override the
    (signed) orders.
    """
    if not s > 0:
        raise ConfigurationError("use cylinder_static_sectors at zero frequency")
    if math.isinf(eps):
        raise ConfigurationError("the perfect-conductor limit is only available at zero frequency")
    gauge = get_gauge(gauge)
    wi, we = gauge.weights(eps, mu)
    beta = np.atleast_1d(np.asarray(beta, float))
    ms = np.arange(M + 1, dtype=float) if m is None else np.atleast_1d(np.asarray(m, float))
    mm = np.abs(ms).astype(int)
    P0 = np.hypot(s, beta)
    P = P0 if eps * mu == 1.0 else np.sqrt(eps * mu * s * s + beta * beta)
    _, _, rI0, rK0 = cyl_bessel_table(int(mm.max()), P0)
    _, _, rIs, rKs = cyl_bessel_table(int(mm.max()), P)
    rI0, rK0, rIs, rKs = (r[:, mm] for r in (rI0, rK0, rIs, rKs))
    b, mg = beta[:, None], ms[None, :]
    P0_, P_ = P0[:, None], P[:, None]

    def basis(e, u, PP, rK, rI):
        tmK, teK = _cyl_vectors(mg, b, s, e, u, PP, rK)
        tmI, teI = _cyl_vectors(mg, b, s, e, u, PP, rI)
        return np.stack([tmK, teK, tmI, teI], -1)

    V0 = basis(1.0, 1.0, P0_, rK0, rI0)
    # a common positive factor per polarisation leaves amplitudes unchanged
    c = np.linalg.norm(V0[..., 2:], axis=-2)
    V0 = V0 / np.concatenate([c, c], -1)[..., None, :]
    # without contrast both sides share one basis, so C1 gives K = 0 exactly
    Vs = V0 if eps == 1.0 and mu == 1.0 else basis(eps, mu, P_, rKs, rIs)
    (P0p, Q0p), (Psp, _) = _proj_out4(V0), _proj_out4(Vs)
    wi4 = np.array([wi[0], wi[0], wi[1], wi[1]])[:, None]
    we4 = np.array([we[0], we[0], we[1], we[1]])[:, None]
    K = 2 * (we4 * P0p - wi4 * Psp) + np.diag((wi4 - we4)[:, 0])
    M = 2 * (we4 * Q0p + wi4 * Psp)
    B = 2 * we4 * V0[..., 2:]
    A = np.linalg.inv(V0)[..., :2, :]
    return Channels(K, A, B, M)


def cylinder_static_sectors(M: int, beta, eps: float, mu: float, gauge):
    """Zero-frequency sectors for ``m = 0..M``.

    The TM-type sector couples ``(E_par, H_perp)`` and the TE-type sector
    ``(E_perp, H_par)``; shapes as in :func:`sphere_sectors` with leading
    axes ``(len(beta), M + 1)``.
    """
    gauge = get_gauge(gauge)
    wi, we = gauge.weights(eps, mu)
    wt = gauge.scaled_exterior_weight(eps)
    beta = np.abs(np.atleast_1d(np.asarray(beta, float)))
    _, _, rI, rK = cyl_bessel_table(M, beta)
    N = beta[:, None] ** 2 + np.arange(M + 1, dtype=float)[None, :] ** 2
    o, g = rK / N, rI / N
    one = np.ones_like(o)
    tm = _scaled_sector(np.stack([one, o], -1), np.stack([one, g], -1),
                        np.stack([one, o], -1), np.stack([one, g], -1), eps, wi, we, wt)
    te = _plain_sector(np.stack([-o, one], -1), np.stack([-g, one], -1),
                       np.stack([-mu * o, one], -1), np.stack([-mu * g, one], -1), wi, we)
    return tm, te


def sso_block_cylinder(m: int, k_z: float, kappa: float, eps: float, mu: float, R: float, gauge) -> SsoBlock:
    """4x4 channel block for azimuthal order ``m`` and axial wavenumber ``k_z``."""
    if kappa < 0 or R <= 0:
        raise ConfigurationError("need kappa >= 0 and R > 0")
    if kappa == 0 and k_z == 0:
        raise ConfigurationError("(kappa, k_z) = (0, 0) is excluded")
    gauge = get_gauge(gauge)
    beta = k_z * R
    if kappa > 0:
        ch = cylinder_blocks(abs(m), [beta], kappa * R, eps, mu, gauge, m=[m])
        K, A, B, M = (x[0, 0] for x in ch)
        return SsoBlock("cylinder", (m, k_z), K, A, B, gauge, kappa, M)
    tm, te = cylinder_static_sectors(abs(m), [beta], eps, mu, gauge)
    K, A, B, M = _assemble(tm, te, [0, 3], [1, 2], (0, -1))
    return SsoBlock("cylinder", (m, k_z), K, A, B, gauge, 0.0, M)


# ---------------------------------------------------------------------------
# energies


@dataclass(frozen=True)
class MseResult:
    """Order-by-order estimates from one pass.

    ``per_order[i]`` is the estimate keeping powers of ``K`` up to
    ``orders[i]``; ``resummed`` is the direct solve on the same channels.
    """

    orders: tuple
    per_order: np.ndarray
    resummed: float
    n_matsubara: int
    multipole_max: int
    flags: tuple = ()

    @property
    def energy(self) -> float:
        return float(self.per_order[-1])

    def ratios(self, reference: float | None = None) -> np.ndarray:
        ref = self.resummed if reference is None else reference
        return self.per_order / ref


def _guarded(taus, radius, where, allow_fallback, flags):
    if radius is None:
        return taus
    bad = radius >= GUARD_THRESHOLD
    if not np.any(bad):
        return taus
    worst = float(radius.max())
    if not allow_fallback:
        idx = tuple(int(i) for i in np.unravel_index(int(np.argmax(radius)), radius.shape))
        raise SpectralGuardError(
            f"spectral radius {worst:.9f} >= {GUARD_THRESHOLD} in {where} channel {idx}; "
            "the series does not converge there, use the resummed energy",
            where=where, channel=idx, radius=worst,
        )
    flags.add(f"guard_direct_solve:{where}")
    taus = taus.copy()
    taus[:, bad] = taus[-1][bad]
    return taus


def _sphere_pass(cfg, orders, guard):
    gauge = get_gauge(cfg.gauge)
    R = cfg.radius
    flags: set[str] = set()
    rows = len(orders) + 1
    from .sphere import sphere_matsubara_sum

    def terms(n, kappa, eps, mu, L):
        tm, te = sphere_sectors(L, kappa, R, eps, mu, gauge)
        tee, rad = channel_series(tm, orders, guard)
        tee = _guarded(tee, rad, f"n={n} TM", cfg.allow_fallback, flags)
        if n == 0:
            return tee, None
        thh, rad = channel_series(te, orders, guard)
        thh = _guarded(thh, rad, f"n={n} TE", cfg.allow_fallback, flags)
        return tee, thh

    res = sphere_matsubara_sum(cfg, terms, rows)
    return res, flags


def _cylinder_pass(cfg, orders, guard):
    gauge = get_gauge(cfg.gauge)
    R = cfg.radius
    flags: set[str] = set()
    rows = len(orders) + 1
    from .cylinder import cylinder_matsubara_sum

    def terms(n, kappa, eps, mu, beta, M):
        if eps * mu == 1.0:
            # no contrast: every order vanishes identically
            zero = np.zeros((rows, len(beta), M + 1))
            return zero, zero, zero
        if kappa == 0.0:
            tm, _ = cylinder_static_sectors(M, beta, eps, mu, gauge)
            tee, rad = channel_series(tm, orders, guard)
            if guard and math.isinf(eps):
                if not cfg.allow_fallback:
                    raise SpectralGuardError(
                        "the zero-frequency term of a metallic cylinder has no convergent "
                        "expansion; use the resummed energy",
                        where="n=0", radius=float(rad.max()),
                    )
                flags.add("guard_direct_solve:n=0 metallic cylinder")
                tee = np.broadcast_to(tee[-1], tee.shape).copy()
            else:
                tee = _guarded(tee, rad, f"n={n} static", cfg.allow_fallback, flags)
            return tee, None, None
        ch = cylinder_blocks(M, beta, kappa * R, eps, mu, gauge)
        taus, rad = channel_series(ch, orders, guard)
        taus = _guarded(taus, rad, f"n={n}", cfg.allow_fallback, flags)
        return taus[..., 0, 0], taus[..., 1, 1], taus[..., 0, 1]

    res = cylinder_matsubara_sum(cfg, terms, rows)
    return res, flags


def _pass(cfg, orders, guard):
    if cfg.geometry == "sphere":
        return _sphere_pass(cfg, orders, guard)
    return _cylinder_pass(cfg, orders, guard)


def mse_energy(cfg, k: int | None = None) -> MseResult:
    """Multiple-scattering estimates of the energy.

    With ``k`` given, orders ``0..k`` are reported; otherwise ``cfg.orders``.
    Channels whose spectral radius reaches :data:`GUARD_THRESHOLD` raise
    :class:`SpectralGuardError` unless ``cfg.allow_fallback`` is set, in
    which case they are solved directly and flagged. The zero-frequency
    term of a metallic cylinder is always treated this way.
    """
    orders = tuple(range(k + 1)) if k is not None else tuple(cfg.orders)
    if not orders or min(orders) < 0:
        raise ConfigurationError("need at least one non-negative order")
    res, flags = _pass(cfg, orders, True)
    e = np.asarray(res.energy)
    return MseResult(orders, e[:-1].copy(), float(e[-1]), res.n_matsubara, res.multipole_max,
                     tuple(sorted(flags)) + tuple(res.flags))


def resummed_energy_details(cfg):
    res, _ = _pass(cfg, (), False)
    return res


def resummed_energy(cfg) -> float:
    """Energy from a direct solve of ``(1 - K) x = B`` in every channel."""
    return float(resummed_energy_details(cfg).energy[0])


# ---------------------------------------------------------------------------
# couplings and diagnostics


def _radius(ch: Channels) -> np.ndarray:
    return np.max(np.abs(1.0 - np.linalg.eigvals(ch.M)), axis=-1)


def channel_couplings(channel, kappa: float, a: float, geometry: str, gauge, *,
                      R: float, eps: float, mu: float = 1.0):
    """Detector row and source column of one channel with the energy weights folded in.

    Returns ``(A', B')`` of shapes ``(2, 4)`` and ``(4, 2)`` such that the
    order-``k`` contribution of the channel is ``trace(A' sum_{j<=k} K^j B')``
    with ``K`` from :func:`sso_block_sphere` or :func:`sso_block_cylinder`.
    Neither factor contains the polarizability. A sphere Matsubara term is
    ``alpha`` times the sum over ``l``; a cylinder term is ``alpha / pi``
    times the integral over ``k_z`` and sum over ``m``.

    The weight matrix ``W`` (rows: detected polarisation) is split as
    ``S2 S1`` with ``S1 = diag(sqrt|W_ii|)``, giving ``A' = S1 A`` and
    ``B' = B S2``; both then carry one factor of the propagation from the
    surface to the particle.
    """
    if not a > R:
        raise ConfigurationError(f"the particle must lie outside the body (a={a} <= R={R})")
    if geometry == "sphere":
        from .sphere import sphere_static_weights, sphere_weights

        l = int(channel)
        block = sso_block_sphere(l, kappa, eps, mu, R, gauge)
        if kappa == 0.0:
            W = np.diag([sphere_static_weights(l, R, a)[-1], 0.0])
        else:
            wee, whh = sphere_weights(l, kappa, R, a)
            W = np.diag([wee[-1], whh[-1]])
    elif geometry == "cylinder":
        from .cylinder import cylinder_weights

        m, k_z = channel
        block = sso_block_cylinder(int(m), float(k_z), kappa, eps, mu, R, gauge)
        am = abs(int(m))
        wee, whh, weh = cylinder_weights(am, [abs(k_z)], kappa, R, a)
        if kappa == 0.0:
            W = np.diag([wee[0, am], 0.0])
        else:
            sign = np.sign(m) * np.sign(k_z)
            W = np.array([[wee[0, am], 0.0], [sign * weh[0, am], whh[0, am]]])
    else:
        raise ConfigurationError(f"unknown geometry {geometry!r}")
    root = np.sqrt(np.abs(np.diag(W)))
    inv = np.divide(1.0, root, out=np.zeros_like(root), where=root > 0)
    return root[:, None] * block.A, block.B @ (W * inv[None, :])


def channel_spectrum(geometry: str, eps_of_kappa, kappas, orders, *, R: float,
                     gauge="C1", mu: float = 1.0, k_z=(0.0,)):
    """Spectral radii of the channel operators over a grid of wavenumbers.

    ``eps_of_kappa`` maps a wavenumber to the permittivity (for example a
    material evaluated at the matching frequency). For the sphere the result
    has shape ``(len(kappas), len(orders))`` over multipole orders ``l``;
    for the cylinder ``(len(kappas), len(orders), len(k_z))`` over signed
    ``m`` and axial wavenumbers. Zero-frequency cylinder channels with
    ``k_z = 0`` are undefined and reported as NaN.
    """
    gauge = get_gauge(gauge)
    orders = np.atleast_1d(np.asarray(orders, int))
    kappas = np.atleast_1d(np.asarray(kappas, float))
    if geometry == "sphere":
        if orders.min() < 1:
            raise ConfigurationError("sphere channels start at l = 1")
        out = np.empty((len(kappas), len(orders)))
        for i, kap in enumerate(kappas):
            tm, te = sphere_sectors(int(orders.max()), kap, R, eps_of_kappa(kap), mu, gauge)
            out[i] = np.maximum(_radius(tm), _radius(te))[orders - 1]
        return out
    if geometry != "cylinder":
        raise ConfigurationError(f"unknown geometry {geometry!r}")
    kz = np.atleast_1d(np.asarray(k_z, float))
    out = np.full((len(kappas), len(orders), len(kz)), np.nan)
    M = int(np.abs(orders).max())
    for i, kap in enumerate(kappas):
        eps = eps_of_kappa(kap)
        if kap > 0:
            ch = cylinder_blocks(M, kz * R, kap * R, eps, mu, gauge, m=orders)
            out[i] = _radius(ch).T
            continue
        ok = kz != 0
        if np.any(ok):
            tm, te = cylinder_static_sectors(M, np.abs(kz[ok]) * R, eps, mu, gauge)
            rad = np.maximum(_radius(tm), _radius(te))
            out[i][:, ok] = rad[:, np.abs(orders)].T
    return out
