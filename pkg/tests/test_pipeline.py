import math

import numpy as np
import pytest

from cpmse import pipeline
from cpmse.pipeline import DEFAULT_DISTANCES, config_hash, row_dict, run_sweep
from cpmse.quantities import Configuration, ConfigurationError, ConvergenceError
from cpmse.sphere import cp_energy_sphere_exact
from cpmse.sso import mse_energy

CFG = Configuration(material="si", orders=(0, 1, 3))
DIST = (0.05, 0.3, 1.0)


@pytest.fixture(scope="module")
def sweep():
    return run_sweep(CFG, DIST)


def test_default_grid():
    assert len(DEFAULT_DISTANCES) == 12
    assert DEFAULT_DISTANCES[0] == pytest.approx(0.03) and DEFAULT_DISTANCES[-1] == pytest.approx(1.0)
    assert np.all(np.diff(np.log(DEFAULT_DISTANCES)) == pytest.approx(math.log(1 / 0.03) / 11))


def test_rows_are_ordered_and_consistent(sweep):
    assert [(r.d_over_r, r.order) for r in sweep.rows] == [(d, k) for d in DIST for k in (0, 1, 3)]
    assert not sweep.errors
    for r in sweep.rows:
        assert r.ratio == pytest.approx(r.e_mse / r.e_exact, rel=1e-14)
        assert r.lmax_or_mmax > 0 and r.n_matsubara > 0
        assert not any(f.startswith("dual_route_mismatch") for f in r.flags)
    assert sweep.distances() == list(DIST)


def test_row_values_match_direct_calls(sweep):
    cfg = CFG.with_d_over_r(0.3)
    exact = cp_energy_sphere_exact(cfg)
    mse = mse_energy(cfg)
    rows = [r for r in sweep.rows if r.d_over_r == 0.3]
    for r, e in zip(rows, mse.per_order):
        assert r.e_exact == exact
        assert r.e_mse == e


def test_ratios_do_not_depend_on_alpha(sweep):
    scaled = run_sweep(CFG.replace(alpha=7.3), DIST)
    for a, b in zip(sweep.rows, scaled.rows):
        assert a.ratio == b.ratio
        assert b.e_exact == pytest.approx(7.3 * a.e_exact, rel=1e-15)
    assert scaled.metadata["config_hash"] != sweep.metadata["config_hash"]


def test_threads_do_not_change_results(sweep):
    threaded = run_sweep(CFG, DIST, threads=3)
    assert threaded.rows == sweep.rows
    assert threaded.metadata == sweep.metadata


def test_metadata_and_hash(sweep):
    meta = sweep.metadata
    assert meta["geometry"] == "sphere" and meta["deterministic"] is True
    assert "created" not in meta
    assert "created" in run_sweep(CFG, (1.0,), deterministic=False).metadata
    h = config_hash(CFG, DIST, (0, 1, 3))
    assert h == meta["config_hash"] and len(h) == 16
    assert config_hash(CFG.replace(workers=4), DIST, (0, 1, 3)) == h
    assert config_hash(CFG, DIST[:2], (0, 1, 3)) != h


def test_failed_distance_is_recorded(monkeypatch):
    original = pipeline.mse_energy

    def flaky(cfg, k=None):
        if cfg.d_over_r > 0.5:
            raise ConvergenceError("forced", order=1)
        return original(cfg, k)

    monkeypatch.setattr(pipeline, "mse_energy", flaky)
    res = run_sweep(CFG, (0.1, 0.9))
    assert len(res.errors) == 1 and res.errors[0][0] == 0.9
    bad = [r for r in res.rows if r.d_over_r == 0.9]
    assert all(math.isnan(r.ratio) and r.flags == ("error:ConvergenceError",) for r in bad)
    assert all(math.isfinite(r.ratio) for r in res.rows if r.d_over_r == 0.1)


def test_mismatch_flag(monkeypatch):
    # a negative tolerance rejects every row, including exact agreement
    monkeypatch.setattr(pipeline, "DUAL_ROUTE_TOL", {"sphere": -1.0, "cylinder": -1.0})
    res = run_sweep(CFG, (1.0,))
    for r in res.rows:
        tags = [f for f in r.flags if f.startswith("dual_route_mismatch:")]
        assert len(tags) == 1 and float(tags[0].split(":")[1]) < 1e-6


@pytest.mark.parametrize("kwargs", [{"orders": (1, 0)}, {"orders": ()}, {"threads": 0}])
def test_invalid_sweep_arguments(kwargs):
    with pytest.raises(ConfigurationError):
        run_sweep(CFG, DIST, **kwargs)


@pytest.mark.parametrize("distances", [(), (0.1, -1.0), (math.nan,)])
def test_invalid_distances(distances):
    with pytest.raises(ConfigurationError):
        run_sweep(CFG, distances)


def test_row_dict_round_trip(sweep):
    d = row_dict(sweep.rows[0])
    assert list(d) == ["d_over_r", "order", "e_mse", "e_exact", "ratio", "lmax_or_mmax",
                       "n_matsubara", "flags"]
    assert isinstance(d["flags"], list)
