import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx, mark, raises

from ergodiff.averaging import Interval
from ergodiff.dynamics import DoublingMap, FullShift, Rotation, TrivialAction
from ergodiff.errors import InvalidInputError, PreconditionError, UnsupportedError
from ergodiff.gauge import (InvariantMeasureCatalog, default_battery, gauge_orbit_oracle,
                            gauge_supnorm, gauge_value, herman_check, periodic_orbit_measures,
                            report_json, unique_ergodicity_probe)
from ergodiff.measure import discrete, lebesgue_grid
from ergodiff.observables import Constant, Cylinder, TrigPolynomial

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
bump = TrigPolynomial.cosine(1, 1.0, 1.0)  # 1 + cos(2 pi x), in [0, 2]


# -- grid estimates ----------------------------------------------------------

def test_constant_gauge_is_the_constant():
    est = gauge_supnorm(Rotation(GOLDEN), Interval(), Constant(0.75), 10, 64)
    assert est.value == 0.75 and est.budget == 0.0


def test_rotation_gauge_is_the_mean():
    est = gauge_supnorm(Rotation(GOLDEN), Interval(), bump, 2000, 1024)
    assert est.value == approx(1.0, abs=0.01)


def test_doubling_gauge_reaches_fixed_point():
    est = gauge_supnorm(DoublingMap(), Interval(), bump, 12, 2 ** 14)
    assert est.value == approx(2.0, abs=0.05)
    assert est.witness == [0.0]
    assert est.budget is not None and est.budget > 0


def test_shift_gauge_of_coordinate():
    est = gauge_supnorm(FullShift(2), Interval(), Cylinder.coordinate(2, 0), 16, 8)
    assert est.value == 1.0
    assert all(s == 1 for s in est.witness)


def test_gauge_preconditions():
    with raises(PreconditionError):
        gauge_supnorm(Rotation(GOLDEN), Interval(), TrigPolynomial.cosine(1), 10, 64)
    with raises(PreconditionError):
        gauge_supnorm(Rotation(GOLDEN), Interval(), TrigPolynomial.character(1), 10, 64)
    with raises(PreconditionError):
        gauge_supnorm(Rotation(GOLDEN), Interval(), Constant(-1.0), 10, 64)


def test_gauge_value_handles_signed_observables():
    # the gauge of cos on the doubling map is attained at the fixed point 0
    assert gauge_value(DoublingMap(), TrigPolynomial.cosine(1), k=12, grid=2 ** 14) == \
        approx(1.0, abs=0.05)


def test_estimate_improves_with_k():
    errs = [abs(gauge_supnorm(Rotation(GOLDEN), Interval(), bump, k, 512).value - 1.0)
            for k in (10, 100, 1000)]
    assert errs[2] <= errs[0]
    assert errs[2] < 2e-3


# -- periodic orbit oracle ---------------------------------------------------

def test_oracle_doubling():
    assert gauge_orbit_oracle(DoublingMap(), bump, 10) == approx(2.0, abs=1e-12)


def test_oracle_shift_single_symbol():
    assert gauge_orbit_oracle(FullShift(2), Cylinder.coordinate(2, 0), 1) == 1.0


def test_oracle_prefers_longer_orbits():
    # f = [x_0 != x_1] is 0 on fixed points and 1 on the 2-cycle 0101...
    f = Cylinder([0, 1], [[0.0, 1.0], [1.0, 0.0]])
    assert gauge_orbit_oracle(FullShift(2), f, 1) == 0.0
    assert gauge_orbit_oracle(FullShift(2), f, 2) == 1.0


def test_oracle_constant_and_unsupported():
    assert gauge_orbit_oracle(DoublingMap(), Constant(0.4), 3) == 0.4
    with raises(UnsupportedError):
        gauge_orbit_oracle(Rotation(GOLDEN), bump, 3)


def test_periodic_orbit_counts():
    # necklaces: binary Lyndon words up to length 4 number 2 + 1 + 2 + 3; on the
    # circle the words 0 and 1 give the same fixed point
    assert len(periodic_orbit_measures(FullShift(2), 4)) == 8
    assert len(periodic_orbit_measures(DoublingMap(), 4)) == 7


# -- Herman functions --------------------------------------------------------

def test_constant_is_herman():
    cat = InvariantMeasureCatalog().add("lebesgue", lebesgue_grid(64))
    rep = herman_check(Rotation(GOLDEN), Constant(0.3), cat)
    assert rep.herman and rep.spread == 0


def test_rotation_observable_is_herman():
    cat = InvariantMeasureCatalog.for_system(Rotation(GOLDEN), grid=1024)
    rep = herman_check(Rotation(GOLDEN), TrigPolynomial.cosine(1), cat, tol=0.01, k=2000,
                       grid=1024)
    assert rep.herman
    assert rep.spread < 0.01


def test_shift_coordinate_has_spread_one():
    cat = InvariantMeasureCatalog.for_system(FullShift(2), max_period=2, width=8)
    rep = herman_check(FullShift(2), Cylinder.coordinate(2, 0), cat, k=16, grid=8)
    assert not rep.herman
    assert rep.spread == approx(1.0, abs=1e-12)
    assert rep.m1 == approx(0.0, abs=1e-12) and rep.m2 == approx(1.0, abs=1e-12)


def test_herman_needs_catalog():
    with raises(InvalidInputError):
        herman_check(Rotation(GOLDEN), bump, InvariantMeasureCatalog())


def test_trivial_catalog_is_explicit_only():
    with raises(UnsupportedError):
        InvariantMeasureCatalog.for_system(TrivialAction())


@mark.parametrize("sys", [DoublingMap(), FullShift(2)], ids=lambda s: s.kind)
def test_catalog_measures_are_invariant(sys):
    cat = InvariantMeasureCatalog.for_system(sys, max_period=4, grid=1024, width=8)
    f = bump if sys.space == "torus" else Cylinder([0, 2], [[0.1, 0.5], [0.9, 0.3]])
    for name, defect in cat.invariance_defects(sys, f):
        assert defect <= 1e-12, name


# -- unique ergodicity -------------------------------------------------------

def test_rotation_is_consistent_with_ue():
    rep = unique_ergodicity_probe(Rotation(GOLDEN), default_battery(size=6), lebesgue_grid(1024),
                                  k=2000, grid=1024)
    assert rep.verdict == "consistent-with-UE"
    assert rep.witness is None


def test_doubling_is_not_ue():
    rep = unique_ergodicity_probe(DoublingMap(), [("bump", bump)], lebesgue_grid(4096),
                                  k=12, grid=2 ** 14)
    assert rep.verdict == "not-UE"
    assert rep.witness == "bump"
    assert rep.gap == approx(1.0, abs=0.05)


def test_trivial_two_point_space_is_not_ue():
    # the identity on a two-point space has two ergodic measures
    model = discrete("torus", np.array([0.0]))
    pts = np.array([[0.0], [0.5]])
    f = TrigPolynomial.cosine(1, -1.0, 1.0)  # 0 at x = 0, 2 at x = 1/2
    rep = unique_ergodicity_probe(TrivialAction(), [f], model, k=1, grid=pts)
    assert rep.verdict == "not-UE"
    assert rep.gap == approx(2.0, abs=1e-12)


def test_report_json_sorted():
    rep = unique_ergodicity_probe(DoublingMap(), [bump], lebesgue_grid(256), k=4, grid=256)
    text = report_json(rep)
    data = json.loads(text)
    assert list(data) == sorted(data)
    assert data["verdict"] == "not-UE"


def test_battery_is_nonnegative():
    x = np.linspace(0, 1, 101)[:, None]
    for name, f in default_battery(size=8):
        assert f.is_real and np.min(f.evaluate(x)) >= -1e-15, name


# -- property suites ---------------------------------------------------------

real_trig = st.lists(st.tuples(st.integers(1, 4), st.floats(-1, 1), st.floats(-1, 1)),
                       min_size=1, max_size=3).map(
    lambda t: sum((TrigPolynomial.cosine(n, a) + TrigPolynomial([[n], [-n]],
                                                                [-0.5j * b, 0.5j * b])
                   for n, a, b in t), Constant(0.0)))


def _shifted_up(f):
    return f + f.bound


@mark.property
@settings(max_examples=25)
@given(real_trig)
def test_oracle_below_grid_estimate_plus_budget(g):
    # every period up to 4 divides k = 12, so orbit averages are grid-visible
    f = _shifted_up(g)
    oracle = gauge_orbit_oracle(DoublingMap(), f, 4)
    est = gauge_supnorm(DoublingMap(), Interval(), f, 12, 2 ** 12)
    assert oracle <= est.value + est.budget + 1e-12
    # and the estimate never exceeds sup f
    assert est.value <= f.bound + 1e-12


@mark.property
@settings(max_examples=25)
@given(real_trig, st.floats(0, 5))
def test_gauge_commutes_with_constants(g, c):
    f = _shifted_up(g)
    a = gauge_supnorm(Rotation(GOLDEN), Interval(), f, 200, 256).value
    b = gauge_supnorm(Rotation(GOLDEN), Interval(), f + c, 200, 256).value
    assert b == approx(a + c, abs=1e-12 * (1 + c + f.bound))


@mark.property
@given(st.lists(st.floats(0, 1), min_size=8, max_size=8), st.integers(-6, 6))
def test_gauge_is_shift_covariant(table, h):
    f = Cylinder([0, 1, 2], np.array(table).reshape(2, 2, 2))
    S = FullShift(2)
    assert gauge_orbit_oracle(S, f.shifted(h), 5) == approx(gauge_orbit_oracle(S, f, 5),
                                                            abs=1e-12)


@mark.property
@settings(max_examples=10)
@given(st.lists(st.floats(0, 1), min_size=4, max_size=4), st.floats(-3, 3))
def test_herman_spread_ignores_constants(table, c):
    S = FullShift(2)
    f = Cylinder([0, 1], np.array(table).reshape(2, 2))
    cat = InvariantMeasureCatalog.for_system(S, max_period=3, width=6)
    a = herman_check(S, f, cat, k=12, grid=6)
    b = herman_check(S, f + c, cat, k=12, grid=6)
    assert b.spread == approx(a.spread, abs=1e-12 * (1 + abs(c)))
