"""Casimir-Polder energies of a particle near a sphere or a cylinder.

Two independent routes are provided: closed-form scattering amplitudes
(:mod:`cpmse.sphere`, :mod:`cpmse.cylinder`) and the surface scattering
operator with its multiple-scattering expansion (:mod:`cpmse.sso`).
Distance sweeps comparing the two live in :mod:`cpmse.pipeline`.
"""

from .cylinder import cp_energy_cylinder_exact, cyl_t_block
from .materials import Material, get_material, permittivity
from .quantities import (
    ConfigurationError,
    Configuration,
    ConvergenceError,
    EvaluationError,
    primed_sum,
)
from .specfun import BACKEND, cyl_ik, riccati_ik
from .sphere import cp_energy_sphere_exact, mie_block, mie_block_static
from .sso import (
    C1,
    C2,
    Gauge,
    SpectralGuardError,
    SsoBlock,
    channel_couplings,
    channel_spectrum,
    mse_energy,
    resummed_energy,
    spectral_radius,
    sso_block_cylinder,
    sso_block_sphere,
)

__version__ = "0.1.0"


def exact_energy(cfg: Configuration) -> float:
    """Exact energy (eV) for the geometry named in ``cfg``."""
    if cfg.geometry == "sphere":
        return cp_energy_sphere_exact(cfg)
    return cp_energy_cylinder_exact(cfg)


__all__ = [
    "BACKEND",
    "C1",
    "C2",
    "Configuration",
    "ConfigurationError",
    "ConvergenceError",
    "EvaluationError",
    "Gauge",
    "Material",
    "SpectralGuardError",
    "SsoBlock",
    "channel_couplings",
    "channel_spectrum",
    "cp_energy_cylinder_exact",
    "cp_energy_sphere_exact",
    "cyl_ik",
    "cyl_t_block",
    "exact_energy",
    "get_material",
    "mie_block",
    "mie_block_static",
    "mse_energy",
    "permittivity",
    "primed_sum",
    "resummed_energy",
    "riccati_ik",
    "spectral_radius",
    "sso_block_cylinder",
    "sso_block_sphere",
]
