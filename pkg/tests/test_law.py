import json
import math

import numpy as np
import pytest
from mpmath import mp

import oracles
from gwalk import law as law_mod
from gwalk.law import (
    LawError,
    dump_law,
    load_law,
    make_constant_bias,
    make_mark_law,
    make_two_point,
    psi_evaluate,
    psi_prime,
    regime_of,
    solve_kappa,
    validate_law,
)

with open("tests/expected/constants.json") as fh:
    EXPECTED = json.load(fh)


def test_two_point_calibration_exact():
    for p in (0.02, 0.05, 0.068, 0.1):
        law = make_two_point(p)
        assert abs(psi_evaluate(law, 1.0)) < 1e-12


def test_two_point_matches_frozen_b():
    law = make_two_point(0.068)
    b = EXPECTED["laws"]["two_point_sub"]["b"]
    assert law.atoms[0][1][0] == -1.0 or any(
        abs(a - b) < 1e-12 for _, marks in law.atoms for a in marks
    )


def test_psi_against_mpmath():
    law = make_two_point(0.068)
    for t in (0.5, 1.0, 1.3, 2.0, 3.7):
        ref = float(oracles.psi_mp(law.atoms, t))
        assert abs(psi_evaluate(law, t) - ref) < 1e-12


def test_psi_prime_against_mpmath():
    law = make_two_point(0.05)
    for t in (0.8, 1.0, 1.5):
        ref = float(oracles.psi_prime_mp(law.atoms, t))
        assert abs(psi_prime(law, t) - ref) < 1e-8


@pytest.mark.parametrize(
    "name,factory",
    [
        ("two_point_sub", lambda: make_two_point(0.068)),
        ("two_point_crit", lambda: make_two_point(0.05)),
        ("two_point_diff", lambda: make_two_point(0.02)),
    ],
)
def test_kappa_against_frozen_and_mpmath(name, factory):
    law = factory()
    k = solve_kappa(law)
    assert abs(k - EXPECTED["laws"][name]["kappa"]) < 1e-9
    assert abs(k - oracles.kappa_mp(law.atoms)) < 1e-8


def test_kappa_infinite_for_constant_bias():
    assert solve_kappa(make_constant_bias(2.0)) == math.inf


def test_regimes():
    assert regime_of(1.5) == "SUBDIFFUSIVE"
    assert regime_of(2.0) == "CRITICAL"
    assert regime_of(3.5) == "DIFFUSIVE"
    assert regime_of(math.inf) == "DIFFUSIVE"


def test_validate_law_report():
    rep = validate_law(make_two_point(0.068))
    assert rep.regime == "SUBDIFFUSIVE"
    assert rep.psi_prime_1 < 0
    assert rep.c0 is None
    rep2 = validate_law(make_two_point(0.02))
    assert rep2.c0 is not None and rep2.c0 > 0


def test_uncalibrated_atoms_rejected():
    # probabilities are fine but psi(1) = log(2 e^{-1/2}) != 0, so the
    # drift normalization check must reject the law
    law = make_mark_law([(1.0, (0.5, 0.5))])
    with pytest.raises(LawError) as err:
        validate_law(law)
    assert err.value.code == "ASSUMPTION_VIOLATION"


def test_positive_drift_rejected():
    # single child with mark 0 keeps psi(1) = 0 but psi'(1) = 0
    with pytest.raises(LawError) as err:
        make_mark_law([(1.0, (0.0,))])
    assert err.value.code in ("ASSUMPTION_VIOLATION", "SUBCRITICAL")


def test_subcritical_rejected():
    # one child per node: no branching
    with pytest.raises(LawError):
        make_mark_law([(1.0, (math.log(2.0),))])


def test_two_point_requires_small_p():
    with pytest.raises(LawError):
        make_two_point(0.25)


def test_load_dump_roundtrip(tmp_path):
    law = make_two_point(0.068)
    path = tmp_path / "law.json"
    dump_law(law, path)
    other = load_law(str(path))
    assert other.atoms == law.atoms


def test_load_family_forms():
    law = load_law({"family": "two_point", "p": 0.068})
    assert law.atoms == make_two_point(0.068).atoms
    cb = load_law({"family": "constant_bias", "lam": 2.0, "n": 3})
    assert cb.atoms == make_constant_bias(2.0, 3).atoms


def test_load_calibrate_flag():
    base = make_two_point(0.068)
    shifted = [
        {"p": p, "marks": [a + 0.1 for a in marks]} for p, marks in base.atoms
    ]
    law = load_law({"atoms": shifted, "calibrate": True})
    assert abs(psi_evaluate(law, 1.0)) < 1e-9


def test_mark_law_properties():
    law = make_two_point(0.068)
    assert math.isclose(law.mean_offspring, 2.0)
    assert law.max_offspring == 2
    assert law.has_negative_mark
    cb = make_constant_bias(2.0)
    assert not cb.has_negative_mark


def test_c0_exact_on_constant_bias():
    # two children with equal conductance e^{-log 2} = 1/2 each:
    # the pair sum and the geometric normalizer give exactly 1
    assert abs(law_mod._c0_finite_sum(make_constant_bias(2.0)) - 1.0) < 1e-12


def test_c0_matches_mpmath_route_diffusive():
    # independent route: pair sum over sibling marks in mpmath, geometric
    # normalizer from the frozen value of psi at 2
    law = make_two_point(0.02)
    num = mp.mpf(0)
    for p, marks in law.atoms:
        s1 = mp.fsum(mp.e ** (-mp.mpf(a)) for a in marks)
        s2 = mp.fsum(mp.e ** (-2 * mp.mpf(a)) for a in marks)
        num += mp.mpf(p) * (s1 * s1 - s2)
    psi_2 = mp.mpf(EXPECTED["laws"]["two_point_diff"]["psi_2"])
    ref = num / (1 - mp.e ** psi_2)
    assert abs(law_mod._c0_finite_sum(law) - float(ref)) < 1e-9
