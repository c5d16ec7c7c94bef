"""Dielectric functions on the imaginary frequency axis.

Built-in materials are read from ``data/materials.txt``; see that file for
the format. Additional files can be loaded with :func:`load_materials`.

A divergent static permittivity (the Drude term of a metal at ``xi = 0``)
is returned as ``math.inf``. Downstream code treats that value as the
perfect-conductor limit rather than as a large number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .quantities import ConfigurationError

MODELS = ("drude_lorentz", "two_pole_si", "oscillator_sum", "constant", "perfect_conductor_limit")

_REQUIRED = {
    "drude_lorentz": ("plasma_frequency", "damping"),
    "two_pole_si": ("eps_inf", "eps_static", "omega_uv"),
    "oscillator_sum": (),
    "constant": ("value",),
    "perfect_conductor_limit": (),
}

_ALIASES = {"gold": "au", "silicon": "si", "ps": "polystyrene", "pc": "perfect_conductor"}


@dataclass(frozen=True)
class Material:
    """A permittivity model ``eps(i xi)`` with constant permeability ``mu``."""

    name: str
    model: str
    params: tuple = ()
    oscillators: tuple = ()
    mu: float = 1.0
    reference: str = ""

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigurationError(f"unknown permittivity model {self.model!r}")
        given = dict(self.params)
        missing = [k for k in _REQUIRED[self.model] if k not in given]
        if missing:
            raise ConfigurationError(f"material {self.name!r} lacks parameters {missing}")
        extra = set(given) - set(_REQUIRED[self.model])
        if extra:
            raise ConfigurationError(f"material {self.name!r} has unknown parameters {sorted(extra)}")
        if self.oscillators and self.model not in ("drude_lorentz", "oscillator_sum"):
            raise ConfigurationError(f"model {self.model!r} takes no oscillators")

    def param(self, key: str) -> float:
        return dict(self.params)[key]

    @property
    def is_metal(self) -> bool:
        """True when the static permittivity diverges."""
        return self.model in ("drude_lorentz", "perfect_conductor_limit")

    def __call__(self, xi):
        return permittivity(self, xi)


def _oscillator_sum(oscillators, xi):
    total = np.zeros_like(xi)
    for w, f, g in oscillators:
        total = total + f / (w * w + g * xi + xi * xi)
    return total


def permittivity(mat: Material, xi):
    """``eps(i xi)`` for frequency ``hbar * xi`` in eV (scalar or array)."""
    x = np.asarray(xi, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ConfigurationError("frequency must be finite and non-negative")
    m = mat.model
    if m == "constant":
        out = np.full_like(x, mat.param("value"))
    elif m == "perfect_conductor_limit":
        out = np.full_like(x, math.inf)
    elif m == "two_pole_si":
        einf, e0, wuv = (mat.param(k) for k in ("eps_inf", "eps_static", "omega_uv"))
        out = einf + (e0 - einf) / (1.0 + (x / wuv) ** 2)
    else:
        out = 1.0 + _oscillator_sum(mat.oscillators, x)
        if m == "drude_lorentz":
            wp, gamma = mat.param("plasma_frequency"), mat.param("damping")
            with np.errstate(divide="ignore", over="ignore"):
                drude = np.where(x > 0, wp * wp / np.where(x > 0, x * (x + gamma), 1.0), math.inf)
            out = out + drude
    return float(out) if out.ndim == 0 else out


def _number(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"{where}: expected a number, got {text!r}") from None


def parse_materials(text: str, source: str = "<string>") -> dict[str, Material]:
    """Parse the material file format into ``{name: Material}``."""
    out: dict[str, Material] = {}
    current = None

    def flush():
        if current is None:
            return
        name, fields, oscs, line = current
        if "model" not in fields:
            raise ConfigurationError(f"{source}:{line}: section [{name}] has no model")
        model = fields.pop("model")
        ref = fields.pop("reference", "")
        mu = _number(fields.pop("mu", "1"), f"{source}: [{name}] mu")
        params = tuple(sorted((k, _number(v, f"{source}: [{name}] {k}")) for k, v in fields.items()))
        out[name] = Material(name, model, params, tuple(oscs), mu, ref)

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            flush()
            name = line[1:-1].strip().lower()
            if not name or name in out:
                raise ConfigurationError(f"{source}:{lineno}: empty or duplicate section {line}")
            current = (name, {}, [], lineno)
            continue
        if current is None or "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: cannot parse {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "oscillator":
            parts = value.split()
            if len(parts) != 3:
                raise ConfigurationError(f"{source}:{lineno}: oscillator needs 'w f g'")
            current[2].append(tuple(_number(p, f"{source}:{lineno}") for p in parts))
        elif key in current[1]:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        else:
            current[1][key] = value
    flush()
    return out


def load_materials(path) -> dict[str, Material]:
    p = Path(path)
    return parse_materials(p.read_text(), str(p))


@lru_cache(maxsize=1)
def builtin_materials() -> dict[str, Material]:
    text = resources.files("cpmse").joinpath("data/materials.txt").read_text()
    return parse_materials(text, "materials.txt")


def get_material(which) -> Material:
    """Resolve a built-in name (case-insensitive, common aliases allowed) or pass through."""
    if isinstance(which, Material):
        return which
    key = str(which).strip().lower()
    key = _ALIASES.get(key, key)
    table = builtin_materials()
    if key not in table:
        raise ConfigurationError(f"unknown material {which!r}; known: {sorted(table)}")
    return table[key]


def constant_material(value: float, mu: float = 1.0, name: str | None = None) -> Material:
    """Non-dispersive body; ``value = inf`` gives a perfect conductor."""
    if math.isinf(value):
        return Material(name or "perfect_conductor", "perfect_conductor_limit", mu=mu)
    return Material(name or f"eps={value:g}", "constant", (("value", float(value)),), mu=mu)


def body_of(cfg) -> tuple[Material, float]:
    """Material and permeability of the body described by a configuration."""
    mat = get_material(cfg.material)
    mu = cfg.mu if cfg.mu != 1.0 else mat.mu
    return mat, mu
