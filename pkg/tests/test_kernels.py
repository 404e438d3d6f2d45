"""The compiled kernels and the numpy fallback must agree bitwise."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergodiff import kernels
from ergodiff.averaging import (ConstantTheta, FunctionWeight, Interval, SequenceWeight,
                                avg_field)
from ergodiff.dynamics import DoublingMap, FullShift, Rotation, TorusTranslation
from ergodiff.observables import Cylinder, TrigPolynomial

try:
    kernels.get_backend("cython")
    HAVE_CORE = True
except ImportError:
    HAVE_CORE = False

needs_core = pytest.mark.skipif(not HAVE_CORE, reason="compiled extension not built")
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0

CASES = [
    ("rotation", Rotation(GOLDEN), TrigPolynomial([[1], [-3]], [0.5 + 0.2j, -0.1j]), None),
    ("rotation-theta", Rotation(GOLDEN), TrigPolynomial.character(2), ConstantTheta(phase=0.3)),
    ("rotation-xi", Rotation(GOLDEN), TrigPolynomial.cosine(1),
     FunctionWeight(TrigPolynomial.character(1))),
    ("translation", TorusTranslation([[GOLDEN, np.sqrt(2) - 1]]),
     TrigPolynomial([[1, 2], [0, -1]], [1.0, 0.5j]), None),
    ("doubling", DoublingMap(), TrigPolynomial.cosine(3, 1.0, 0.2), None),
    ("doubling-seq", DoublingMap(), TrigPolynomial.character(1),
     SequenceWeight(lambda j: np.exp(0.7j * j))),
    ("doubling-xi", DoublingMap(), TrigPolynomial.character(1),
     FunctionWeight(TrigPolynomial.character(-2))),
]


def _points(sys, n, seed):
    rng = np.random.default_rng(seed)
    if sys.space == "symbolic":
        return rng.integers(0, 2, (n, 24))
    return rng.random((n, sys.space_dim))


@needs_core
@pytest.mark.parametrize("name,sys,f,w", CASES, ids=[c[0] for c in CASES])
def test_backends_agree_bitwise(name, sys, f, w):
    P = _points(sys, 257, 1)
    k = 40
    F = Interval().folner_set(k)
    args = (w,) if w is not None else ()
    a = avg_field(sys, F, f, P, *args, backend="cython")
    b = avg_field(sys, F, f, P, *args, backend="python")
    assert a.dtype == b.dtype
    assert np.array_equal(a, b)


@needs_core
def test_backends_agree_on_shift():
    S = FullShift(2)
    f = Cylinder([0, 1, 3], np.arange(8, dtype=float).reshape(2, 2, 2) / 7)
    P = _points(S, 300, 2)
    F = Interval(start=-20).folner_set(60)
    assert np.array_equal(avg_field(S, F, f, P, backend="cython"),
                          avg_field(S, F, f, P, backend="python"))


@needs_core
@given(st.lists(st.tuples(st.integers(-6, 6), st.floats(-2, 2), st.floats(-2, 2)),
                min_size=1, max_size=4),
       st.integers(1, 300), st.floats(0, 1, exclude_max=True))
def test_backends_agree_on_random_trig(terms, k, phase):
    f = TrigPolynomial([[n] for n, _, _ in terms], [a + 1j * b for _, a, b in terms])
    P = _points(Rotation(GOLDEN), 33, k)
    F = Interval().folner_set(k)
    w = ConstantTheta(phase=phase)
    assert np.array_equal(avg_field(Rotation(GOLDEN), F, f, P, w, backend="cython"),
                          avg_field(Rotation(GOLDEN), F, f, P, w, backend="python"))


@needs_core
def test_thread_count_does_not_change_results():
    core = kernels.get_backend("cython")
    sys = Rotation(GOLDEN)
    f = TrigPolynomial([[1], [5]], [0.3, 0.7j])
    P = _points(sys, 5000, 3)
    F = Interval().folner_set(500)
    core.set_num_threads(1)
    try:
        one = avg_field(sys, F, f, P, backend="cython")
        core.set_num_threads(4)
        four = avg_field(sys, F, f, P, backend="cython")
    finally:
        core.set_num_threads(1)
    assert np.array_equal(one, four)


def test_fallback_is_always_available():
    assert kernels.get_backend("python").NAME == "python"
    assert kernels.BACKEND in ("cython", "python")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_kahan_state_beats_naive_sum():
    # 10^5 copies of 0.1 plus one large term; compensation keeps the tail
    K = kernels.get_backend("python")
    m = 100_000
    V = np.full((1, m), 0.1)
    V[0, 0] = 1e8
    state = [np.zeros(1) for _ in range(4)]
    one = np.zeros(1)
    K.value_accumulate(V, np.zeros((1, m)), np.ones(m), np.zeros(m), one, one,
                       np.zeros(m, dtype=np.int64), False, False, *state)
    exact = 1e8 + 0.1 * (m - 1)
    assert abs(state[0][0] - exact) <= 1e-7
