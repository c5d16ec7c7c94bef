"""Distance sweeps comparing multiple-scattering estimates with exact energies.

Each distance gets one exact evaluation through the closed-form amplitudes
and one multiple-scattering pass that yields every requested order together
with the fully resummed energy. The resummed value is compared against the
exact one and rows that disagree are flagged.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .cylinder import cylinder_exact_details
from .materials import get_material
from .quantities import (
    Configuration,
    ConfigurationError,
    ConvergenceError,
    EvaluationError,
    validate_ratios,
)
from .specfun import BACKEND
from .sphere import sphere_exact_details
from .sso import SingularChannelError, SpectralGuardError, mse_energy

#: 12 log-spaced points covering 0.03 <= d/R <= 1.
DEFAULT_DISTANCES = tuple(float(v) for v in np.geomspace(0.03, 1.0, 12))

#: Largest accepted |resummed / exact - 1| before a row is flagged.
DUAL_ROUTE_TOL = {"sphere": 1e-6, "cylinder": 1e-5}

# fields that affect numbers; thread counts do not
_HASHED = ("geometry", "radius", "material", "mu", "alpha", "temperature", "gauge",
           "orders", "rel_tol", "n_max", "multipole_tol", "quad_tol", "allow_fallback")


@dataclass(frozen=True)
class SweepRow:
    d_over_r: float
    order: int
    e_mse: float
    e_exact: float
    ratio: float
    lmax_or_mmax: int
    n_matsubara: int
    flags: tuple = ()


@dataclass
class SweepResult:
    """Rows ordered by distance then order, plus provenance metadata.

    ``errors`` lists ``(d_over_r, exception)`` for distances that failed;
    their rows carry NaN energies and an ``error:`` flag.
    """

    rows: list
    metadata: dict
    errors: list = field(default_factory=list)

    def ratios(self, order: int) -> np.ndarray:
        return np.array([r.ratio for r in self.rows if r.order == order])

    def distances(self) -> list:
        return sorted({r.d_over_r for r in self.rows})

    def max_error(self, order: int) -> float:
        return float(np.nanmax(np.abs(self.ratios(order) - 1.0)))


def _describe(value):
    if hasattr(value, "name") and hasattr(value, "model"):
        return {"name": value.name, "model": value.model, "params": list(value.params),
                "oscillators": list(value.oscillators), "mu": value.mu}
    if hasattr(value, "tag") and hasattr(value, "ci"):
        return {"tag": value.tag, "ci": list(value.ci), "ce": list(value.ce)}
    return value


def config_hash(cfg: Configuration, distances=(), orders=()) -> str:
    """Short SHA-256 over every setting that changes the numbers."""
    payload = {k: _describe(getattr(cfg, k)) for k in _HASHED}
    payload["distances"] = [float(v).hex() for v in distances]
    payload["orders"] = list(orders) or list(cfg.orders)
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _exact(cfg):
    return sphere_exact_details(cfg) if cfg.geometry == "sphere" else cylinder_exact_details(cfg)


def _one_distance(cfg: Configuration, ratio: float, orders: tuple):
    # energies are linear in alpha; ratios come from alpha = 1 so they do
    # not depend on it at all
    unit = cfg.replace(alpha=1.0).with_d_over_r(ratio)
    ex = _exact(unit)
    mse = mse_energy(unit.replace(orders=orders))
    flags = set(ex.flags) | set(mse.flags)
    mismatch = abs(mse.resummed / ex.energy - 1.0)
    if not mismatch <= DUAL_ROUTE_TOL[cfg.geometry]:
        flags.add(f"dual_route_mismatch:{mismatch:.2e}")
    L = max(ex.multipole_max, mse.multipole_max)
    N = max(ex.n_matsubara, mse.n_matsubara)
    rows = []
    for k, e in zip(orders, mse.per_order):
        rows.append(SweepRow(ratio, k, cfg.alpha * float(e), cfg.alpha * ex.energy,
                             float(e) / ex.energy, L, N, tuple(sorted(flags))))
    return rows


def _failed(ratio, orders, exc):
    tag = f"error:{type(exc).__name__}"
    return [SweepRow(ratio, k, math.nan, math.nan, math.nan, 0, 0, (tag,)) for k in orders]


def run_sweep(cfg: Configuration, distances=None, orders=None, *, threads: int = 1,
              deterministic: bool = True) -> SweepResult:
    """Sweep ``d/R`` and tabulate ``E_MSE_k / E_exact`` for each order ``k``.

    Parameters
    ----------
    cfg : Configuration
        Template; its distance is replaced by each entry of ``distances``.
    distances : sequence of float, optional
        Values of ``d/R``. Defaults to :data:`DEFAULT_DISTANCES`.
    orders : sequence of int, optional
        Ascending expansion orders. Defaults to ``cfg.orders``.
    threads : int
        Distances evaluated concurrently; rows are merged in input order.
    deterministic : bool
        Leave wall-clock data out of the metadata so repeated runs produce
        identical output.

    Returns
    -------
    SweepResult
        A failure at one distance is recorded in ``errors`` and does not
        stop the others.
    """
    ratios = validate_ratios(DEFAULT_DISTANCES if distances is None else distances)
    orders = tuple(cfg.orders if orders is None else (int(k) for k in orders))
    if not orders or list(orders) != sorted(set(orders)) or orders[0] < 0:
        raise ConfigurationError("orders must be distinct, ascending and non-negative")
    if threads < 1:
        raise ConfigurationError("threads must be at least 1")

    def job(r):
        try:
            return _one_distance(cfg, r, orders), None
        except (ConvergenceError, EvaluationError, SpectralGuardError, SingularChannelError) as exc:
            return _failed(r, orders, exc), exc

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(job, ratios))
    else:
        results = [job(r) for r in ratios]

    rows, errors = [], []
    for r, (part, exc) in zip(ratios, results):
        rows.extend(part)
        if exc is not None:
            errors.append((r, exc))
    return SweepResult(rows, sweep_metadata(cfg, ratios, orders, deterministic), errors)


def sweep_metadata(cfg: Configuration, distances, orders, deterministic=True) -> dict:
    mat = get_material(cfg.material)
    meta = {
        "code_version": __version__,
        "backend": BACKEND,
        "config_hash": config_hash(cfg, distances, orders),
        "geometry": cfg.geometry,
        "material": mat.name,
        "gauge": str(cfg.gauge),
        "temperature_K": cfg.temperature,
        "radius_um": cfg.radius,
        "alpha": cfg.alpha,
        "rel_tol": cfg.rel_tol,
        "multipole_tol": cfg.multipole_tol,
        "quad_tol": cfg.quad_tol,
        "n_max": cfg.n_max,
        "dual_route_tol": DUAL_ROUTE_TOL[cfg.geometry],
        "deterministic": bool(deterministic),
    }
    if not deterministic:
        from datetime import datetime, timezone

        meta["created"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return meta


def row_dict(row: SweepRow) -> dict:
    d = asdict(row)
    d["flags"] = list(row.flags)
    return d
