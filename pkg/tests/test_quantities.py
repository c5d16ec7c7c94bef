import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpmse.quantities import (
    HBAR_C,
    K_B,
    Configuration,
    ConfigurationError,
    ConvergenceError,
    EvaluationError,
    adaptive_truncation,
    kappa_to_xi,
    matsubara_term,
    primed_sum,
    thermal_wavelength,
    xi_to_kappa,
)


def test_first_matsubara_wavenumber():
    t = matsubara_term(1, 300.0)
    assert t.xi == pytest.approx(2 * math.pi * K_B * 300.0, rel=1e-15)
    assert t.kappa == pytest.approx(0.823166, abs=1e-6)
    assert thermal_wavelength(300.0) == pytest.approx(1 / t.kappa, rel=1e-14)
    assert matsubara_term(0, 300.0) == (0.0, 0.0, 0.5)


@given(st.floats(1e-8, 1e4))
def test_unit_round_trip(xi):
    assert kappa_to_xi(xi_to_kappa(xi)) == pytest.approx(xi, rel=1e-15)
    assert xi_to_kappa(HBAR_C) == 1.0


def test_invalid_matsubara_inputs():
    with pytest.raises(ConfigurationError):
        matsubara_term(-1, 300.0)
    with pytest.raises(ConfigurationError):
        matsubara_term(1, 0.0)


def test_primed_sum_geometric():
    q = 0.5
    res = primed_sum(lambda n: q**n, rel_tol=1e-13)
    # half weight on n = 0
    assert res.value == pytest.approx(1 / (1 - q) - 0.5, rel=1e-12)
    assert res.reason == "converged" and res.tail < 1e-12


def test_primed_sum_workers_do_not_change_bits():
    f = lambda n: np.array([math.exp(-0.3 * n) * math.cos(n), 1 / (1 + n) ** 4])
    a = primed_sum(f, 1e-12, workers=1).value
    b = primed_sum(f, 1e-12, workers=4).value
    assert np.array_equal(a, b)


def test_primed_sum_reports_nmax():
    res = primed_sum(lambda n: 1.0 / (n + 1), rel_tol=1e-12, n_max=50)
    assert res.reason == "n_max" and res.n_terms == 51


def test_primed_sum_non_finite_term():
    with pytest.raises(EvaluationError):
        primed_sum(lambda n: math.nan if n == 3 else 1.0 / 2**n)


def test_adaptive_truncation_doubles_until_converged():
    res, L = adaptive_truncation(lambda L: 0.5 ** np.arange(L), start=2, tol=1e-10)
    assert res == pytest.approx(2.0, rel=1e-10)
    assert L >= 34 and (L & (L - 1)) == 0


def test_adaptive_truncation_cap():
    with pytest.raises(ConvergenceError) as info:
        adaptive_truncation(lambda L: 1.0 / (1.0 + np.arange(L)), start=4, tol=1e-12, cap=256)
    assert info.value.diagnostics["order"] == 256


def test_configuration_validation():
    cfg = Configuration(radius=30.0, distance=3.0)
    assert cfg.a == 33.0 and cfg.d_over_r == pytest.approx(0.1)
    assert cfg.with_d_over_r(0.5).distance == 15.0
    for bad in ({"geometry": "cube"}, {"radius": -1.0}, {"distance": 0.0},
                {"orders": (2, 1)}, {"orders": (0, 0)}, {"workers": 0}, {"alpha": math.nan}):
        with pytest.raises(ConfigurationError):
            Configuration(**bad)
