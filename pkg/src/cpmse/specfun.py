"""Modified spherical and cylindrical Bessel functions of real positive argument.

Values are carried in logarithmic form together with the logarithmic
derivative ``rho = x f'(x) / f(x)``. Physics code only ever needs ratios
and products such as ``I K`` in which the large exponents cancel, so this
representation never overflows. Unscaled values are available on the
returned records when they fit in a double.

Spherical functions use the Riccati forms ``I_l(x) = x i_l(x)`` and
``K_l(x) = x k_l(x)`` with ``k_l(x) = sqrt(pi / (2x)) K_{l+1/2}(x)``, so
``I_0 = sinh x``, ``K_0 = (pi/2) e^{-x}`` and the Wronskian
``I_l K_l' - I_l' K_l`` equals ``-pi/2``.

The recurrences run in a compiled extension when it is importable and in
NumPy otherwise; ``BACKEND`` names the one in use. Setting the environment
variable ``CPMSE_PURE_PYTHON=1`` forces the NumPy path.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels_py

if os.environ.get("CPMSE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _kernels_py
        BACKEND = "python"

_LOG_MAX = math.log(np.finfo(float).max)


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _check_args(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        x = x.ravel()
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise DomainError("Bessel arguments must be finite and positive")
    return x


def sph_riccati_table(lmax: int, x):
    """Riccati-Bessel data for orders ``0..lmax`` at every argument in ``x``.

    Returns
    -------
    log_i, log_k, rho_i, rho_k : ndarray, shape (len(x), lmax + 1)
        ``log`` of ``I_l(x)`` and ``K_l(x)`` and their logarithmic derivatives.
    """
    if lmax < 0:
        raise DomainError("order must be non-negative")
    return _impl.sph_log_riccati(int(lmax), _check_args(x))


def cyl_bessel_table(mmax: int, x):
    """``I_m`` and ``K_m`` data for orders ``0..mmax`` at every argument in ``x``.

    Same layout as :func:`sph_riccati_table`.
    """
    if mmax < 0:
        raise DomainError("order must be non-negative")
    return _impl.cyl_log_bessel(int(mmax), _check_args(x))


def _unscaled(logv):
    if logv > _LOG_MAX:
        return math.inf, True
    return math.exp(logv), False


@dataclass(frozen=True)
class _LogPair:
    order: int
    x: float
    log_first: float
    log_second: float
    rho_first: float
    rho_second: float

    @property
    def overflow(self) -> bool:
        """True when an unscaled value does not fit in a double."""
        return self.log_first > _LOG_MAX or self.log_second > _LOG_MAX

    @property
    def scaled_first(self) -> float:
        return math.exp(self.log_first - self.x)

    @property
    def scaled_second(self) -> float:
        return math.exp(self.log_second + self.x)

    @property
    def log_product(self) -> float:
        return self.log_first + self.log_second

    def _wronskian_scaled(self) -> float:
        # f g' - f' g = f g (rho_g - rho_f) / x
        return math.exp(self.log_product) * (self.rho_second - self.rho_first) / self.x


class RiccatiPair(_LogPair):
    """Riccati-Bessel values ``I_l(x)``, ``K_l(x)`` and their derivatives."""

    @property
    def l(self) -> int:
        return self.order

    @property
    def I(self) -> float:
        return _unscaled(self.log_first)[0]

    @property
    def K(self) -> float:
        return _unscaled(self.log_second)[0]

    @property
    def dI(self) -> float:
        return self.I * self.rho_first / self.x

    @property
    def dK(self) -> float:
        return self.K * self.rho_second / self.x

    @property
    def scaled_I(self) -> float:
        """``exp(-x) I_l(x)``."""
        return self.scaled_first

    @property
    def scaled_K(self) -> float:
        """``exp(x) K_l(x)``."""
        return self.scaled_second

    def wronskian(self) -> float:
        return self._wronskian_scaled()


class CylBesselPair(_LogPair):
    """Modified cylinder Bessel values ``I_m(x)``, ``K_m(x)`` and derivatives."""

    @property
    def m(self) -> int:
        return self.order

    @property
    def I(self) -> float:
        return _unscaled(self.log_first)[0]

    @property
    def K(self) -> float:
        return _unscaled(self.log_second)[0]

    @property
    def dI(self) -> float:
        return self.I * self.rho_first / self.x

    @property
    def dK(self) -> float:
        return self.K * self.rho_second / self.x

    @property
    def scaled_I(self) -> float:
        return self.scaled_first

    @property
    def scaled_K(self) -> float:
        return self.scaled_second

    def wronskian(self) -> float:
        return self._wronskian_scaled()


def riccati_ik(l: int, x: float) -> RiccatiPair:
    """Riccati-Bessel pair of order ``l`` at ``x > 0``."""
    if l < 0:
        raise DomainError("order must be non-negative")
    li, lk, ri, rk = sph_riccati_table(l, [x])
    return RiccatiPair(l, float(x), li[0, l], lk[0, l], ri[0, l], rk[0, l])


def cyl_ik(m: int, x: float) -> CylBesselPair:
    """``I_m``/``K_m`` pair at ``x > 0``; negative orders map to ``|m|``."""
    m = abs(int(m))
    lI, lK, rI, rK = cyl_bessel_table(m, [x])
    return CylBesselPair(m, float(x), lI[0, m], lK[0, m], rI[0, m], rK[0, m])
