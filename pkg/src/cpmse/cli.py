"""Command-line front end.

Exit codes: 0 success, 2 invalid configuration, 3 a sum or quadrature did
not converge, 4 the spectral-radius guard tripped and no fallback was
allowed.

Config files hold one ``key = value`` per line; ``#`` starts a comment and
list values are comma separated. Unknown keys are rejected. Precedence is
command-line flag, then the ``MSE_THREADS`` environment variable (threads
only), then the file, then built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .materials import get_material, permittivity
from .pipeline import DEFAULT_DISTANCES, SweepResult, row_dict, run_sweep
from .quantities import (
    Configuration,
    ConfigurationError,
    ConvergenceError,
    EvaluationError,
    matsubara_term,
    validate_ratios,
)
from .sso import SingularChannelError, SpectralGuardError, channel_spectrum, mse_energy

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_GUARD = 0, 2, 3, 4

CSV_COLUMNS = ("d_over_r", "order", "e_mse", "e_exact", "ratio", "lmax_or_mmax", "n_matsubara", "flags")

log = logging.getLogger("cpmse")


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(",", " ").split()]


def _ints(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).replace(",", " ").split()]


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    """Everything a command needs: physics settings plus output handling."""

    geometry: str = "sphere"
    material: str = "si"
    radius_um: float = 30.0
    d_over_r: list = field(default_factory=lambda: list(DEFAULT_DISTANCES))
    gauge: str = "C1"
    temperature_k: float = 300.0
    mu: float = 1.0
    alpha: float = 1.0
    orders: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    rel_tol: float = 1e-9
    multipole_tol: float = 1e-10
    quad_tol: float = 1e-8
    n_max: int = 20000
    allow_fallback: bool = False
    output: str = "-"
    format: str = "csv"
    deterministic: bool = True
    threads: int = 1
    verbosity: int = 0

    def configuration(self, distance_ratio: float | None = None) -> Configuration:
        r = self.d_over_r[0] if distance_ratio is None else distance_ratio
        return Configuration(
            geometry=self.geometry, radius=self.radius_um, distance=r * self.radius_um,
            material=self.material, mu=self.mu, alpha=self.alpha,
            temperature=self.temperature_k, gauge=self.gauge.upper(),
            orders=tuple(self.orders), rel_tol=self.rel_tol, n_max=self.n_max,
            multipole_tol=self.multipole_tol, quad_tol=self.quad_tol,
            allow_fallback=self.allow_fallback,
        )


_CONVERTERS = {
    "geometry": str, "material": str, "radius_um": float, "d_over_r": _floats,
    "gauge": str, "temperature_k": float, "mu": float, "alpha": float,
    "orders": _ints, "rel_tol": float, "multipole_tol": float, "quad_tol": float,
    "n_max": int, "allow_fallback": _bool, "output": str, "format": str,
    "deterministic": _bool, "threads": int, "verbosity": int,
}
assert set(_CONVERTERS) == {f.name for f in fields(RunConfig)}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; unknown or repeated keys are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_").lower()
        if key not in _CONVERTERS:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            out[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigurationError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return out


def _build_run_config(args) -> RunConfig:
    values = {}
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file: {exc}") from None
        values.update(parse_config_text(text, str(path)))
    env = os.environ.get("MSE_THREADS")
    if env is not None:
        try:
            values["threads"] = int(env)
        except ValueError:
            raise ConfigurationError(f"MSE_THREADS must be an integer, got {env!r}") from None
    for key in _CONVERTERS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _CONVERTERS[key](v) if isinstance(v, str) else v
    rc = RunConfig(**values)
    if rc.format not in ("csv", "jsonl"):
        raise ConfigurationError(f"format must be csv or jsonl, got {rc.format!r}")
    if rc.threads < 1:
        raise ConfigurationError("thread budget must be at least 1")
    rc.d_over_r = validate_ratios(rc.d_over_r)
    return rc


# ---------------------------------------------------------------------------
# output


def _g17(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def format_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    for k in sorted(result.metadata):
        buf.write(f"# {k}: {_g17(result.metadata[k])}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in result.rows:
        w.writerow([_g17(r.d_over_r), r.order, _g17(r.e_mse), _g17(r.e_exact), _g17(r.ratio),
                    r.lmax_or_mmax, r.n_matsubara, ";".join(r.flags)])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, list):
        return [_json_safe(x) for x in v]
    return v


def format_jsonl(result: SweepResult) -> str:
    lines = [json.dumps({"metadata": result.metadata}, sort_keys=True)]
    for r in result.rows:
        lines.append(json.dumps({k: _json_safe(v) for k, v in row_dict(r).items()}, sort_keys=True))
    return "\n".join(lines) + "\n"


PLOT_TEMPLATE = '''"""Plot E_MSE_k / E_exact against d/R from a sweep CSV.

Usage: python {name} SWEEP.csv [OUT.png]
"""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1]
with open(path) as fh:
    meta = [line[2:].strip() for line in fh if line.startswith("# ")]
with open(path) as fh:
    rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
series = defaultdict(list)
for r in rows:
    if r["ratio"] not in ("nan", ""):
        series[int(r["order"])].append((float(r["d_over_r"]), float(r["ratio"])))
fig, ax = plt.subplots(figsize=(6, 4))
for k in sorted(series):
    x, y = zip(*sorted(series[k]))
    ax.plot(x, y, marker="o", ms=3, label=f"k = {{k}}")
ax.axhline(1.0, color="0.5", lw=0.8)
ax.set_xscale("log")
ax.set_xlabel("d / R")
ax.set_ylabel("E_MSE_k / E_exact")
ax.set_title(", ".join(m for m in meta if m.split(":")[0] in ("geometry", "material", "gauge")))
ax.legend()
fig.tight_layout()
if len(sys.argv) > 2:
    fig.savefig(sys.argv[2], dpi=150)
else:
    plt.show()
'''


def _write(text: str, target: str):
    if target == "-":
        sys.stdout.write(text)
    else:
        Path(target).write_text(text)


# ---------------------------------------------------------------------------
# commands


def cmd_sweep(rc: RunConfig, args) -> int:
    cfg = rc.configuration()
    result = run_sweep(cfg, rc.d_over_r, rc.orders, threads=rc.threads, deterministic=rc.deterministic)
    _write(format_csv(result) if rc.format == "csv" else format_jsonl(result), rc.output)
    if args.emit_plot_script:
        path = Path(args.emit_plot_script)
        path.write_text(PLOT_TEMPLATE.format(name=path.name))
    code = EXIT_OK
    for r, exc in result.errors:
        print(f"error at d/R={r:.6g}: {exc}", file=sys.stderr)
        code = max(code, EXIT_GUARD if isinstance(exc, SpectralGuardError) else EXIT_CONVERGENCE)
    return code


def cmd_exact(rc: RunConfig, args) -> int:
    from . import exact_energy

    for r in rc.d_over_r:
        e = exact_energy(rc.configuration(r))
        print(f"d/R={_g17(r)}  E_exact={_g17(e)} eV")
    return EXIT_OK


def cmd_mse(rc: RunConfig, args) -> int:
    from . import exact_energy

    k = args.order if args.order is not None else max(rc.orders)
    for r in rc.d_over_r:
        cfg = rc.configuration(r)
        res = mse_energy(cfg, k)
        ex = exact_energy(cfg)
        print(f"d/R={_g17(r)}")
        for kk, e in zip(res.orders, res.per_order):
            print(f"  E_MSE_{kk}={_g17(float(e))} eV  ratio={_g17(float(e) / ex)}")
        print(f"  E_exact={_g17(ex)} eV  E_resummed={_g17(res.resummed)} eV")
        if res.flags:
            print(f"  flags={';'.join(res.flags)}")
    return EXIT_OK


def cmd_spectrum(rc: RunConfig, args) -> int:
    mat = get_material(rc.material)
    if args.kappa:
        kappas = _floats(args.kappa)
    else:
        kappas = [matsubara_term(n, rc.temperature_k).kappa for n in _ints(args.n or "0 1 2")]
    channels = _ints(args.channels) if args.channels else ([0, 1, 2, 3] if rc.geometry == "cylinder" else [1, 2, 3])
    kz = _floats(args.kz) if args.kz else [0.0]
    from .quantities import kappa_to_xi

    rad = channel_spectrum(rc.geometry, lambda k: permittivity(mat, kappa_to_xi(k)), kappas,
                           channels, R=rc.radius_um, gauge=rc.gauge, mu=rc.mu, k_z=kz)
    label = "l" if rc.geometry == "sphere" else "m"
    if rc.geometry == "sphere":
        print(f"kappa_um^-1,{label},spectral_radius")
        for i, kap in enumerate(kappas):
            for j, c in enumerate(channels):
                print(f"{_g17(kap)},{c},{_g17(float(rad[i, j]))}")
    else:
        print(f"kappa_um^-1,{label},k_z_um^-1,spectral_radius")
        for i, kap in enumerate(kappas):
            for j, c in enumerate(channels):
                for q, z in enumerate(kz):
                    print(f"{_g17(kap)},{c},{_g17(z)},{_g17(float(rad[i, j, q]))}")
    return EXIT_OK


def cmd_materials(rc: RunConfig, args) -> int:
    mat = get_material(rc.material)
    ns = _ints(args.n) if args.n else list(range(6))
    print("n,xi_eV,epsilon")
    for n in ns:
        xi = matsubara_term(n, rc.temperature_k).xi
        print(f"{n},{_g17(xi)},{_g17(float(permittivity(mat, xi)))}")
    return EXIT_OK


COMMANDS = {"sweep": cmd_sweep, "exact": cmd_exact, "mse": cmd_mse,
            "spectrum": cmd_spectrum, "materials": cmd_materials}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("configuration")
    g.add_argument("--config", help="plain-text key = value file")
    g.add_argument("--geometry", choices=("sphere", "cylinder"))
    g.add_argument("--material")
    g.add_argument("--radius-um", dest="radius_um", type=float)
    g.add_argument("--d-over-r", dest="d_over_r", help="one value or a comma-separated list")
    g.add_argument("--gauge", type=str.upper, choices=("C1", "C2"))
    g.add_argument("--temperature-k", dest="temperature_k", type=float)
    g.add_argument("--mu", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--orders", help="comma-separated expansion orders")
    g.add_argument("--rel-tol", dest="rel_tol", type=float)
    g.add_argument("--multipole-tol", dest="multipole_tol", type=float)
    g.add_argument("--quad-tol", dest="quad_tol", type=float)
    g.add_argument("--n-max", dest="n_max", type=int)
    g.add_argument("--allow-fallback", dest="allow_fallback", action="store_const", const=True)
    g.add_argument("--threads", type=int)
    g.add_argument("-v", "--verbose", dest="verbosity", action="count")

    p = argparse.ArgumentParser(prog="cpmse", description="Casimir-Polder energies near a sphere or cylinder")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("sweep", parents=[common], help="ratio table over distances")
    s.add_argument("--output", "-o")
    s.add_argument("--format", choices=("csv", "jsonl"))
    s.add_argument("--deterministic", dest="deterministic", action="store_const", const=True)
    s.add_argument("--no-deterministic", dest="deterministic", action="store_const", const=False)
    s.add_argument("--emit-plot-script", dest="emit_plot_script", metavar="PATH")
    sub.add_parser("exact", parents=[common], help="exact energy")
    m = sub.add_parser("mse", parents=[common], help="multiple-scattering estimates up to an order")
    m.add_argument("--order", type=int)
    sp = sub.add_parser("spectrum", parents=[common], help="channel spectral radii")
    sp.add_argument("--kappa", help="wavenumbers in 1/um (default: Matsubara values)")
    sp.add_argument("--n", help="Matsubara indices used when --kappa is absent")
    sp.add_argument("--channels", help="l (sphere) or m (cylinder) values")
    sp.add_argument("--kz", help="axial wavenumbers in 1/um (cylinder)")
    mt = sub.add_parser("materials", parents=[common], help="permittivity at Matsubara frequencies")
    mt.add_argument("--n", help="Matsubara indices")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        rc = _build_run_config(args)
        logging.basicConfig(level=logging.WARNING - 10 * min(rc.verbosity, 2), stream=sys.stderr)
        np.seterr(all="ignore")
        return COMMANDS[args.command](rc, args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SpectralGuardError as exc:
        print(f"spectral guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ConvergenceError, EvaluationError, SingularChannelError) as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
