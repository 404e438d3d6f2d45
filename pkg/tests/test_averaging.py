from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pytest import approx, mark, raises

from ergodiff.averaging import (UNIT, Box, ConstantTheta, ExplicitList, FolnerSet, FunctionWeight,
                                Interval, MultipleAverageSpec, PolynomialImage, SequenceWeight,
                                avg_field, avg_multiple, avg_temporal, avg_weighted,
                                folner_defect, folner_set, modulus_power)
from ergodiff.dynamics import (DoublingMap, FullShift, Rotation, TorusTranslation, TrivialAction,
                               act)
from ergodiff.errors import InvalidInputError, RangeError, UnsupportedError
from ergodiff.measure import lebesgue_grid
from ergodiff.observables import Constant, Cylinder, TrigPolynomial

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)


# -- schedules ---------------------------------------------------------------

def test_interval_elements():
    F = folner_set(Interval(), 4)
    assert F.as_set() == {0, 1, 2, 3}
    assert F.size == 4
    assert folner_set(Interval(start=-2), 3).as_set() == {-2, -1, 0}


def test_box_elements():
    F = folner_set(Box(2), 3)
    assert len(F) == 9
    assert F.elements[0].tolist() == [0, 0] and F.elements[-1].tolist() == [2, 2]


def test_box_increment_is_the_outer_shell():
    inc = Box(2).increment(3)
    assert len(inc) == 9 - 4
    assert np.all(inc.elements.max(axis=1) == 2)


def test_polynomial_squares():
    assert folner_set(PolynomialImage([0, 0, 1]), 4).as_set() == {1, 4, 9, 16}


def test_polynomial_image_keeps_multiplicity():
    # floor(t / 2) for t = 1..4 gives 0, 1, 1, 2
    F = folner_set(PolynomialImage([0, Fraction(1, 2)]), 4)
    assert F.multiset() == {0: 1, 1: 2, 2: 1}
    assert F.size == 4


def test_polynomial_floor_is_exact():
    # 0.1 is not representable; the floor of 10 * (1/10) must still be 1
    assert PolynomialImage([0, Fraction(1, 10)]).value(10) == 1


def test_explicit_list_and_range():
    sched = ExplicitList([[0], [0, 5, 5]])
    assert folner_set(sched, 2).multiset() == {0: 1, 5: 2}
    with raises(RangeError):
        folner_set(sched, 3)


def test_empty_set_rejected():
    with raises(InvalidInputError):
        FolnerSet.from_list([])
    with raises(InvalidInputError):
        folner_set(Interval(), 0)


@mark.parametrize("sched,g", [(Interval(), 1), (Box(2), (1, 0))], ids=["interval", "box"])
def test_defect_of_unit_shift(sched, g):
    # a unit shift of [0, 10) (or the 10 x 10 box) moves one face out and one in
    assert folner_defect(sched, 10, g) == approx(0.2)


def test_defect_of_identity_is_zero():
    assert folner_defect(Interval(), 7, 0) == 0


# -- single averages ---------------------------------------------------------

def test_quarter_rotation_character_cancels():
    assert abs(avg_temporal(Rotation(0.25), [0, 1, 2, 3], TrigPolynomial.character(1), 0.0)) < 1e-15


def test_trivial_action_average_is_the_value():
    f = TrigPolynomial.cosine(1, 1.0, 0.5)
    assert avg_temporal(TrivialAction(), range(50), f, 0.2) == approx(f(0.2), abs=1e-15)


def test_doubling_fixed_point():
    assert avg_temporal(DoublingMap(), range(30), TrigPolynomial.cosine(1), 0.0) == 1.0


def test_shift_average_of_coordinate():
    # periodic word 0110: the first coordinate visits 0, 1, 1, 0
    from ergodiff.dynamics import SymbolicPoint
    x = SymbolicPoint((0, 1, 1, 0))
    f = Cylinder.coordinate(2, 0)
    assert avg_temporal(FullShift(2), range(8), f, x) == 0.5


def test_multiplicity_counts_in_average():
    R = Rotation(0.25)
    f = TrigPolynomial.cosine(1)
    F = FolnerSet.from_list([0, 0, 0, 1])
    assert avg_temporal(R, F, f, 0.0) == approx(0.75, abs=1e-15)


def test_resonant_theta_recovers_the_character():
    # theta = e(-alpha) cancels the rotation phase of e(x) exactly
    x = 0.37
    w = ConstantTheta(phase=-GOLDEN)
    v = avg_weighted(Rotation(GOLDEN), range(500), TrigPolynomial.character(1), x, w)
    assert v == approx(np.exp(2j * np.pi * x), abs=1e-12)


def test_alternating_sequence_weight():
    # a_j = (-1)^j on the constant function sums to zero over an even window
    w = SequenceWeight(lambda j: (-1.0) ** j)
    assert avg_weighted(Rotation(GOLDEN), range(10), Constant(1.0), 0.3, w) == 0


def test_sequence_weight_out_of_range():
    with raises(RangeError):
        avg_weighted(Rotation(GOLDEN), range(10), Constant(1.0), 0.3, SequenceWeight([1.0] * 5))


def test_sequence_weight_norm():
    w = SequenceWeight(lambda j: np.where(j % 2 == 0, 2.0, 0.0), declared_bound=1.0)
    # F_1 = {0} carries the whole weight 2; odd k >= 3 give 1 + 1/k
    assert w.mf_norm(Interval(), range(1, 20)) == 2.0
    assert w.mf_norm(Interval(), range(2, 20)) == approx(1.0 + 1.0 / 3)
    assert not w.check_bound(Interval(), range(1, 20))


def test_weighted_needs_z_action():
    T = TorusTranslation([[0.1], [0.2]])
    with raises(UnsupportedError):
        avg_field(T, Box(2).folner_set(3), Constant(1.0), [[0.1]], ConstantTheta(1.0))


def test_non_unimodular_weight_function_rejected():
    with raises(InvalidInputError):
        avg_field(Rotation(GOLDEN), range(4), Constant(1.0), [[0.1]],
                  FunctionWeight(Constant(0.5)))


def test_theta_must_be_unimodular():
    with raises(InvalidInputError):
        ConstantTheta(0.5)
    assert ConstantTheta(1.0).phase == 0.0


def test_mismatched_space_rejected():
    with raises(InvalidInputError):
        avg_field(FullShift(2), range(3), TrigPolynomial.character(1), [[0, 1]])


def test_function_weight_matches_theta_when_constant():
    # xi = e(phase) constant in x equals the constant-theta weight
    phase = 0.1234
    xi = TrigPolynomial([[0]], [np.exp(2j * np.pi * phase)])
    P = np.random.default_rng(2).random((16, 1))
    f = TrigPolynomial.cosine(2)
    a = avg_field(Rotation(GOLDEN), range(64), f, P, FunctionWeight(xi))
    b = avg_field(Rotation(GOLDEN), range(64), f, P, ConstantTheta(phase=phase))
    assert np.allclose(a, b, atol=1e-12)


def test_modulus_power():
    delta = lambda eps: eps / (2 * np.pi)
    assert modulus_power(delta, 3)(0.3) == approx(delta(0.3 / 3))
    assert modulus_power(delta, -3)(0.3) == approx(delta(0.1))
    assert modulus_power(delta, 0)(0.3) == 1.0


# -- multiple averages -------------------------------------------------------

def test_multiple_single_map_is_ordinary_average():
    R = Rotation(GOLDEN)
    f = TrigPolynomial.cosine(1)
    spec = MultipleAverageSpec([R], [[0, 1]], Constant(1.0), [f])
    assert avg_multiple(spec, 100, 0.3) == approx(avg_temporal(R, range(100), f, 0.3), abs=1e-14)


def test_multiple_squares_index():
    # n_j = j^2 on a rotation by 1/2: (-1)^{j^2} = (-1)^j
    R = Rotation(0.5)
    spec = MultipleAverageSpec([R], [[0, 0, 1]], Constant(1.0), [TrigPolynomial.character(1)])
    assert avg_multiple(spec, 4, 0.0) == approx(0.0, abs=1e-15)


def test_multiple_constant_observables():
    R = Rotation(GOLDEN)
    spec = MultipleAverageSpec([R, R], [[0, 1], [0, 2]], Constant(1.0),
                               [Constant(1.0), Constant(1.0)])
    assert avg_multiple(spec, 50, 0.1) == 1.0


def test_multiple_spec_validation():
    R = Rotation(GOLDEN)
    with raises(InvalidInputError):
        MultipleAverageSpec([R], [[0, 1], [0, 2]], Constant(1.0), [Constant(1.0)])
    with raises(InvalidInputError):
        MultipleAverageSpec([R], [[0, 1]], Constant(1.0), [Cylinder.coordinate(2, 0)])


# -- property suites ---------------------------------------------------------

trig = st.lists(st.tuples(st.integers(-5, 5), st.floats(-2, 2), st.floats(-2, 2)),
                min_size=1, max_size=4).map(
    lambda t: TrigPolynomial([[n] for n, _, _ in t], [a + 1j * b for _, a, b in t]))
systems = st.sampled_from([Rotation(GOLDEN), Rotation(0.25), DoublingMap(), TrivialAction()])
points = st.lists(unit, min_size=1, max_size=8).map(lambda v: np.array(v)[:, None])


@mark.property
@given(systems, trig, points, st.integers(1, 48))
def test_average_is_contraction(sys, f, P, k):
    avg = avg_field(sys, Interval().folner_set(k), f, P)
    assert np.max(np.abs(avg)) <= f.bound * (1 + 1e-12) + 1e-12


@mark.property
@given(systems, trig, trig, st.floats(-3, 3), st.floats(-3, 3), points, st.integers(1, 40))
def test_average_is_linear(sys, f, g, a, b, P, k):
    F = Interval().folner_set(k)
    lhs = avg_field(sys, F, a * f + b * g, P)
    rhs = a * avg_field(sys, F, f, P) + b * avg_field(sys, F, g, P)
    scale = 1 + abs(a) * f.bound + abs(b) * g.bound
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


@mark.property
@given(trig, unit, st.integers(1, 60), st.integers(-1000, 1000))
def test_shift_compatibility(f, x, k, h):
    # the average along F at T_h x equals the average along F + h at x
    R = Rotation(GOLDEN)
    y = act(R, h, x).coords[0]
    lhs = avg_temporal(R, range(k), f, y)
    rhs = avg_temporal(R, range(h, h + k), f, x)
    assert lhs == approx(rhs, abs=1e-12 * (1 + f.bound))


@mark.property
@given(trig, st.integers(1, 200), st.sampled_from([GOLDEN, 0.25, np.sqrt(2) - 1]))
def test_measure_invariance_rotation(f, k, a):
    # the uniform grid integrates frequencies |n| < 256 exactly
    m = lebesgue_grid(256, local_nodes=None)
    avg = avg_field(Rotation(a), Interval().folner_set(k), f, m.points)
    assert m.mean(avg) == approx(m.integrate(f), abs=1e-12 * (1 + f.bound))


@mark.property
@given(st.sampled_from([Rotation(GOLDEN), DoublingMap()]), trig, points, st.integers(1, 40))
def test_weighted_degeneration_is_bitwise(sys, f, P, k):
    F = Interval().folner_set(k)
    base = avg_field(sys, F, f, P, UNIT)
    for w in (ConstantTheta(1.0), ConstantTheta(phase=0.0), FunctionWeight(Constant(1.0)),
              SequenceWeight(np.ones(k))):
        assert np.array_equal(avg_field(sys, F, f, P, w), base)


@mark.property
@pytest.mark.parametrize("j", [1, 2, 5, -3])
def test_powered_modulus_is_valid(j):
    # xi = e(x): |xi(x) - xi(y)| <= 2 pi d(x, y), so delta(eps) = eps / (2 pi)
    xi = TrigPolynomial.character(1)
    delta = modulus_power(lambda eps: eps / (2 * np.pi), j)
    rng = np.random.default_rng(abs(j))
    for _ in range(500):
        eps = float(rng.uniform(1e-4, 1.0))
        x = float(rng.random())
        y = x + float(rng.uniform(-1, 1)) * delta(eps)
        assert abs(xi(x) ** j - xi(y) ** j) <= eps + 1e-12


@mark.property
@given(st.integers(1, 300), st.sampled_from([1, -1, 5, -5]))
def test_interval_defect_closed_form(k, g):
    assert folner_defect(Interval(), k, g) == approx(min(2 * abs(g), 2 * k) / k)
