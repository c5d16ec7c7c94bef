import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpmse.materials import (
    builtin_materials,
    constant_material,
    get_material,
    parse_materials,
    permittivity,
)
from cpmse.quantities import ConfigurationError, matsubara_term

AU_OSCILLATORS = [
    (3.05, 7.091, 0.75),
    (4.15, 41.46, 1.85),
    (5.4, 2.7, 1.0),
    (8.5, 154.7, 7.0),
    (13.5, 44.55, 6.0),
    (21.5, 309.6, 9.0),
]
PS_OSCILLATORS = [
    (6.35, 14.6, 0.65),
    (14.0, 96.9, 5.0),
    (11.0, 44.4, 3.5),
    (20.1, 136.9, 11.5),
]


def test_tabulated_parameters_exact():
    au, si, ps = get_material("au"), get_material("si"), get_material("polystyrene")
    assert list(au.oscillators) == AU_OSCILLATORS
    assert list(ps.oscillators) == PS_OSCILLATORS
    assert au.param("plasma_frequency") == 9.0 and au.param("damping") == 0.035
    assert (si.param("eps_inf"), si.param("eps_static"), si.param("omega_uv")) == (1.035, 11.87, 4.34)


def test_polystyrene_static_value():
    # 1 + sum f_j / w_j^2 from the table
    expected = 1 + sum(f / w**2 for w, f, _ in PS_OSCILLATORS)
    assert permittivity(get_material("ps"), 0.0) == pytest.approx(expected, rel=1e-15)
    assert expected == pytest.approx(2.5623, abs=5e-5)


def test_gold_first_matsubara_value():
    xi1 = matsubara_term(1, 300.0).xi
    assert permittivity(get_material("gold"), xi1) == pytest.approx(2532.98, abs=0.01)


def test_gold_static_is_infinite():
    au = get_material("au")
    assert au.is_metal and math.isinf(au(0.0))
    vals = au(np.array([0.0, 0.1]))
    assert math.isinf(vals[0]) and math.isfinite(vals[1])


def test_silicon_limits():
    si = get_material("silicon")
    assert si(0.0) == 11.87
    assert si(1e6) == pytest.approx(1.035, rel=1e-9)


@given(st.floats(0.0, 1e3), st.floats(0.0, 1e3))
def test_dielectrics_decrease_with_frequency(a, b):
    lo, hi = sorted((a, b))
    for name in ("si", "polystyrene", "au"):
        mat = get_material(name)
        assert mat(lo) >= mat(hi) >= 1.0


def test_negative_frequency_rejected():
    with pytest.raises(ConfigurationError):
        permittivity(get_material("si"), -0.1)


def test_constant_and_perfect_conductor():
    assert constant_material(3.0)(0.7) == 3.0
    assert math.isinf(get_material("pc")(1.0))
    assert constant_material(math.inf).model == "perfect_conductor_limit"
    assert get_material("vacuum")(5.0) == 1.0


def test_unknown_material_lists_known():
    with pytest.raises(ConfigurationError, match="known"):
        get_material("unobtainium")


@pytest.mark.parametrize(
    "text",
    [
        "[x]\nmodel = two_pole_si\neps_inf = 1\n",  # missing parameters
        "[x]\nmodel = constant\nvalue = 2\nextra = 1\n",  # unknown parameter
        "[x]\nmodel = oscillator_sum\noscillator = 1 2\n",  # short oscillator
        "[x]\nmodel = constant\nvalue = 1\n[x]\nmodel = constant\nvalue = 1\n",  # duplicate
        "value = 1\n",  # key outside a section
        "[x]\nmodel = nonsense\n",
        "[x]\nmodel = constant\nvalue = abc\n",
    ],
)
def test_parser_rejects_bad_files(text):
    with pytest.raises(ConfigurationError):
        parse_materials(text)


def test_parser_round_trip_of_builtin_file():
    table = builtin_materials()
    assert {"au", "si", "polystyrene", "vacuum", "perfect_conductor"} <= set(table)
    assert all(m.reference for m in (table["au"], table["polystyrene"]))
