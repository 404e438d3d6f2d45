"""Folner schedules and temporal averaging operators.

Averages are accumulated per point in ascending element order with Kahan
compensation by the kernels in :mod:`ergodiff.kernels`.  Orbit evaluation
for translations of the torus uses the character identity
``e(n.(x + s)) = e(n.x) e(n.s)``, so a trigonometric observable never has to
be re-evaluated along the orbit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .dynamics import (DoublingMap, FullShift, TorusTranslation, TrivialAction,
                       as_elements, split_chunks, frac_mul)
from .errors import InvalidInputError, RangeError, UnsupportedError
from .observables import Cylinder, Observable, as_trig, character_phases, unit_phase

MAX_INDEX = 2 ** 40


# ---------------------------------------------------------------------------
# finite sets of group elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FolnerSet:
    """Distinct group elements in lexicographic order, with multiplicities.

    ``size`` (the normalizing ``|F|``) is the total multiplicity.
    """

    elements: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_list(cls, items, dim=1):
        E = as_elements(list(items) if not isinstance(items, np.ndarray) else items, dim)
        if E.shape[0] == 0:
            raise InvalidInputError("Folner sets must be nonempty")
        uniq, counts = np.unique(E, axis=0, return_counts=True)
        return cls(uniq, counts.astype(float))

    @property
    def dim(self):
        return self.elements.shape[1]

    @property
    def size(self):
        return float(self.weights.sum())

    def __len__(self):
        return self.elements.shape[0]

    def as_set(self):
        if self.dim == 1:
            return {int(g) for g in self.elements[:, 0]}
        return {tuple(int(c) for c in g) for g in self.elements}

    def multiset(self):
        """Dict element -> multiplicity."""
        keys = [int(g[0]) if self.dim == 1 else tuple(int(c) for c in g) for g in self.elements]
        return dict(zip(keys, self.weights.astype(int).tolist()))


def as_folner_set(F, dim=1):
    if isinstance(F, FolnerSet):
        if F.dim != dim:
            raise InvalidInputError(f"Folner set of dimension {F.dim} for a Z^{dim} action")
        return F
    return FolnerSet.from_list(F, dim)


class FolnerSchedule:
    """Base class: ``k -> F_k``.  ``nested`` schedules grow by :meth:`increment`."""

    dim = 1
    nested = False
    kind = "abstract"

    def __call__(self, k):
        return self.folner_set(k)

    def folner_set(self, k) -> FolnerSet:
        k = _check_k(k)
        return self._set(k)

    def increment(self, k) -> FolnerSet:
        """Terms of ``F_k`` not in ``F_{k-1}`` (``F_0`` empty), in order of addition."""
        raise UnsupportedError(f"{self.kind} schedules are not nested")

    def describe(self):
        return {"kind": self.kind}


def _check_k(k):
    if int(k) != k or k < 1:
        raise InvalidInputError(f"k must be a positive integer, got {k!r}")
    return int(k)


class Interval(FolnerSchedule):
    """``F_k = {start, ..., start + k - 1}``."""

    kind = "interval"
    nested = True

    def __init__(self, start=0):
        self.start = int(start)

    def _set(self, k):
        if abs(self.start) + k > MAX_INDEX:
            raise RangeError("interval exceeds the supported index range")
        E = np.arange(self.start, self.start + k, dtype=np.int64)[:, None]
        return FolnerSet(E, np.ones(k))

    def increment(self, k):
        k = _check_k(k)
        return FolnerSet(np.array([[self.start + k - 1]], dtype=np.int64), np.ones(1))

    def describe(self):
        return {"kind": self.kind, "start": self.start}


class Box(FolnerSchedule):
    """``F_k = [0, k)^d`` in lexicographic order."""

    kind = "box"
    nested = True

    def __init__(self, dim=2):
        self.dim = int(dim)
        if self.dim < 1:
            raise InvalidInputError("box dimension must be >= 1")

    def _set(self, k):
        grids = np.meshgrid(*[np.arange(k, dtype=np.int64)] * self.dim, indexing="ij")
        E = np.stack([g.ravel() for g in grids], axis=1)
        return FolnerSet(E, np.ones(E.shape[0]))

    def increment(self, k):
        F = self._set(_check_k(k))
        shell = F.elements[F.elements.max(axis=1) == k - 1]
        return FolnerSet(shell, np.ones(shell.shape[0]))

    def describe(self):
        return {"kind": self.kind, "dim": self.dim}


class PolynomialImage(FolnerSchedule):
    """``F_k = {floor(P(1)), ..., floor(P(k))}`` with multiplicity kept.

    ``coeffs[i]`` multiplies ``t**i``; coefficients may be ints or
    :class:`fractions.Fraction` and the floor is computed exactly.
    """

    kind = "polynomial"
    nested = True

    def __init__(self, coeffs):
        self.coeffs = tuple(Fraction(c) if not isinstance(c, Fraction) else c
                            for c in np.atleast_1d(coeffs).tolist())
        if not self.coeffs:
            raise InvalidInputError("polynomial needs at least one coefficient")

    def value(self, t):
        v = sum(c * t ** i for i, c in enumerate(self.coeffs))
        n = math.floor(v)
        if abs(n) > MAX_INDEX:
            raise RangeError(f"floor(P({t})) = {n} is outside the supported index range")
        return n

    def _set(self, k):
        vals = [self.value(t) for t in range(1, k + 1)]
        return FolnerSet.from_list(vals, 1)

    def increment(self, k):
        k = _check_k(k)
        return FolnerSet(np.array([[self.value(k)]], dtype=np.int64), np.ones(1))

    def describe(self):
        return {"kind": self.kind, "coeffs": [str(c) for c in self.coeffs]}


class ExplicitList(FolnerSchedule):
    """``F_k = sets[k - 1]`` for a user-supplied finite list."""

    kind = "explicit"

    def __init__(self, sets, dim=1):
        self.dim = int(dim)
        self.sets = [as_folner_set(s, self.dim) for s in sets]

    def _set(self, k):
        if k > len(self.sets):
            raise RangeError(f"explicit schedule has only {len(self.sets)} sets")
        return self.sets[k - 1]

    def describe(self):
        return {"kind": self.kind, "sets": [sorted(s.multiset().items()) for s in self.sets]}


def folner_set(schedule, k):
    """``F_k`` of a schedule."""
    return schedule.folner_set(k)


def folner_defect(schedule, k, g):
    """``|(g + F_k) symmetric-difference F_k| / |F_k|`` on distinct elements."""
    F = schedule.folner_set(k)
    A = F.as_set()
    if F.dim == 1:
        g = int(np.atleast_1d(g)[0])
        B = {a + g for a in A}
    else:
        g = tuple(int(c) for c in g)
        B = {tuple(a_i + g_i for a_i, g_i in zip(a, g)) for a in A}
    return len(A ^ B) / len(A)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

class WeightSpec:
    kind = "abstract"
    uses_point = False

    def coefficients(self, elements):
        """Per-term complex coefficients (re, im) for a ``(m, 1)`` element array."""
        raise NotImplementedError

    def describe(self):
        return {"kind": self.kind}


class Unit(WeightSpec):
    kind = "unit"

    def coefficients(self, elements):
        m = elements.shape[0]
        return np.ones(m), np.zeros(m)


class ConstantTheta(WeightSpec):
    """``theta^j`` for a unimodular ``theta = exp(2 pi i phase)``.

    Powers are computed from the phase with exact integer reduction, so
    ``theta = 1`` gives coefficients exactly ``1``.
    """

    kind = "theta"

    def __init__(self, theta=None, phase=None):
        if phase is None:
            if theta is None:
                raise InvalidInputError("give theta or its phase")
            z = complex(theta)
            if abs(abs(z) - 1.0) > 1e-12:
                raise InvalidInputError(f"|theta| must be 1, got {abs(z)}")
            phase = 0.0 if z == 1 else math.atan2(z.imag, z.real) / (2 * math.pi)
        self.phase = float(phase) - math.floor(float(phase))
        self._chunks = split_chunks(self.phase)

    @property
    def theta(self):
        return complex(math.cos(2 * math.pi * self.phase), math.sin(2 * math.pi * self.phase))

    def coefficients(self, elements):
        ang = frac_mul(elements[:, 0], self._chunks)
        return unit_phase(ang)

    def describe(self):
        return {"kind": self.kind, "phase": self.phase}


class FunctionWeight(WeightSpec):
    """``xi(x)^j`` with ``xi`` evaluated at the base point of the average.

    Parameters
    ----------
    xi : Observable
        Unimodular continuous function.
    modulus : callable, optional
        ``Delta(eps)``: points closer than ``Delta(eps)`` have ``xi`` values
        within ``eps``.  Any valid modulus is accepted, optimal or not.
    """

    kind = "function"
    uses_point = True

    def __init__(self, xi: Observable, modulus=None):
        self.xi = xi
        self.modulus = modulus

    def base(self, P):
        v = np.asarray(self.xi.evaluate(P), dtype=complex)
        if v.size and np.abs(np.abs(v) - 1.0).max() > 1e-9:
            raise InvalidInputError("weight function must take values on the unit circle")
        return np.ascontiguousarray(v.real), np.ascontiguousarray(v.imag)

    def coefficients(self, elements):
        m = elements.shape[0]
        return np.ones(m), np.zeros(m)

    def describe(self):
        return {"kind": self.kind, "xi": self.xi.describe()}


class SequenceWeight(WeightSpec):
    """Scalar weights ``a_j``; ``declared_bound`` is the claimed M^F norm."""

    kind = "sequence"

    def __init__(self, a, declared_bound=None):
        self.a = a
        self.declared_bound = declared_bound

    def values(self, j):
        j = np.asarray(j, dtype=np.int64)
        if callable(self.a):
            v = np.asarray(self.a(j), dtype=complex)
            return np.broadcast_to(v, j.shape).astype(complex)
        arr = np.asarray(self.a, dtype=complex)
        if j.size and (j.min() < 0 or j.max() >= arr.size):
            raise RangeError("sequence weight is not defined on the requested indices")
        return arr[j]

    def coefficients(self, elements):
        v = self.values(elements[:, 0])
        return np.ascontiguousarray(v.real), np.ascontiguousarray(v.imag)

    def mf_norm(self, schedule, ks):
        """``max_k (1/|F_k|) sum_{j in F_k} |a_j|`` over the given window."""
        out = 0.0
        for k in ks:
            F = schedule.folner_set(k)
            out = max(out, float(np.dot(F.weights, np.abs(self.values(F.elements[:, 0])))) / F.size)
        return out

    def check_bound(self, schedule, ks):
        if self.declared_bound is None:
            return True
        return self.mf_norm(schedule, ks) <= self.declared_bound + 1e-12

    def describe(self):
        d = {"kind": self.kind}
        if self.declared_bound is not None:
            d["declared_bound"] = self.declared_bound
        return d


UNIT = Unit()


def modulus_power(delta, j):
    """Modulus ``eps -> delta(eps / |j|)`` for the powered weight ``xi^j``.

    For ``j = 0`` the power is identically 1 and any constant modulus works;
    the space diameter bound 1 is returned.
    """
    j = int(j)
    if j == 0:
        return lambda eps: 1.0
    aj = abs(j)
    return lambda eps: delta(eps / aj)


# ---------------------------------------------------------------------------
# orbit values and accumulation
# ---------------------------------------------------------------------------

_BLOCK_CELLS = 1 << 22


def _chunks_of(sys):
    if isinstance(sys, TorusTranslation):
        return sys._chunks
    if isinstance(sys, TrivialAction):
        return [[[] for _ in range(sys.space_dim)] for _ in range(sys.group_dim)]
    return None


def orbit_values(sys, f, P, E):
    """``f(T_g x_i)`` for every point ``i`` and element ``g`` (rows of ``E``)."""
    E = sys.check_elements(E)
    n, m = P.shape[0], E.shape[0]
    out = np.empty((n, m), dtype=float if f.is_real else complex)
    if isinstance(sys, (TorusTranslation, TrivialAction)):
        off = sys.offsets(E)
        step = max(1, _BLOCK_CELLS // max(1, n))
        for a in range(0, m, step):
            Y = P[:, None, :] + off[None, a:a + step, :]
            Y -= np.floor(Y)
            out[:, a:a + step] = f.evaluate(Y.reshape(-1, P.shape[1])).reshape(n, -1)
        return out
    if isinstance(sys, FullShift) and isinstance(f, Cylinder):
        for t in range(m):
            out[:, t] = f.shifted(E[t, 0]).evaluate(P)
        return out
    for t in range(m):
        out[:, t] = f.evaluate(sys._orbit(P, E[t]))
    return out


class OrbitAccumulator:
    """Running Kahan sums of weighted orbit terms at a fixed batch of points.

    ``add`` may be called repeatedly with new terms, which is how nested
    schedules are advanced from ``F_{k-1}`` to ``F_k``.
    """

    def __init__(self, sys, f: Observable, points, weight: WeightSpec = UNIT, backend=None):
        if f.space != sys.space:
            raise InvalidInputError(f"observable on {f.space} space used with a {sys.space} system")
        if weight.kind != "unit" and sys.group_dim != 1:
            raise UnsupportedError("weighted averages are implemented for Z-actions only")
        self.sys, self.f, self.weight = sys, f, weight
        self.K = kernels.get_backend(backend)
        self.P = np.ascontiguousarray(sys.as_points(points))
        n = self.P.shape[0]
        self.state = [np.zeros(n) for _ in range(4)]
        self.count = 0.0
        self._real_weights = True
        self._trig = None
        if _chunks_of(sys) is not None and f.space == "torus":
            trig = as_trig(f)
            if trig is not None and trig.dim == sys.space_dim:
                self._trig = trig
                pr, pi = trig.phases(self.P)
                c = trig.coeffs
                self._ar = np.ascontiguousarray(pr * c.real - pi * c.imag)
                self._ai = np.ascontiguousarray(pr * c.imag + pi * c.real)
        if weight.uses_point:
            self._xir, self._xii = weight.base(self.P)
        else:
            self._xir = self._xii = np.zeros(1)

    @property
    def route(self):
        return "character" if self._trig is not None else "values"

    def add(self, F: FolnerSet):
        E = self.sys.check_elements(F.elements)
        tcr, tci = self.weight.coefficients(E)
        tcr = np.ascontiguousarray(tcr * F.weights)
        tci = np.ascontiguousarray(tci * F.weights)
        use_xi = bool(self.weight.uses_point)
        use_coef = use_xi or not (np.all(tcr == 1.0) and np.all(tci == 0.0))
        self._real_weights &= bool(np.all(tci == 0.0)) and (
            not use_xi or bool(np.all(self._xii == 0.0)))
        exps = np.ascontiguousarray(E[:, 0] if use_xi else np.zeros(E.shape[0], dtype=np.int64))
        if self._trig is not None:
            psr, psi = character_phases(self._trig.freqs, _chunks_of(self.sys), E)
            self.K.char_accumulate(self._ar, self._ai, np.ascontiguousarray(psr),
                                   np.ascontiguousarray(psi), tcr, tci, self._xir, self._xii,
                                   exps, use_coef, use_xi, *self.state)
        else:
            n = self.P.shape[0]
            step = max(1, _BLOCK_CELLS // max(1, n))
            for a in range(0, E.shape[0], step):
                V = orbit_values(self.sys, self.f, self.P, E[a:a + step])
                self.K.value_accumulate(
                    np.ascontiguousarray(np.real(V), dtype=float),
                    np.ascontiguousarray(np.imag(V), dtype=float),
                    tcr[a:a + step].copy(), tci[a:a + step].copy(), self._xir, self._xii,
                    exps[a:a + step].copy(), use_coef, use_xi, *self.state)
        self.count += F.size
        return self

    def mean(self):
        """Current averages as a complex array (real when ``f`` and weights are)."""
        if self.count == 0:
            raise InvalidInputError("no terms accumulated")
        Sr, Si = self.state[0], self.state[1]
        if self.f.is_real and self._real_weights:
            return Sr / self.count
        # componentwise: complex / real in numpy goes through complex division
        out = np.empty(Sr.shape, dtype=complex)
        out.real = Sr / self.count
        out.imag = Si / self.count
        return out


def avg_field(sys, F, f, points, w: WeightSpec = UNIT, backend=None):
    """``Avg^w_F f`` evaluated at every point of a batch."""
    F = as_folner_set(F, sys.group_dim)
    return OrbitAccumulator(sys, f, points, w, backend).add(F).mean()


def avg_temporal(sys, F, f, x):
    """``(1/|F|) sum_{g in F} f(T_g x)`` at a single point.

    Examples
    --------
    >>> from ergodiff.dynamics import Rotation
    >>> from ergodiff.observables import TrigPolynomial
    >>> abs(avg_temporal(Rotation(0.25), [0, 1, 2, 3], TrigPolynomial.character(1), 0.0)) < 1e-15
    True
    """
    return avg_field(sys, F, f, _single(sys, x))[0].item()


def avg_weighted(sys, F, f, x, w: WeightSpec):
    """Weighted average at a single point; only Z-actions are supported."""
    if sys.group_dim != 1:
        raise UnsupportedError("weighted averages are implemented for Z-actions only")
    return complex(avg_field(sys, F, f, _single(sys, x), w)[0])


def _single(sys, x):
    P = sys.as_points(x)
    if P.shape[0] != 1:
        raise InvalidInputError("expected a single point")
    return P


# ---------------------------------------------------------------------------
# multiple averages
# ---------------------------------------------------------------------------

class IndexSequence:
    """``j -> n_j`` given by integer polynomial coefficients or a callable."""

    def __init__(self, spec):
        if callable(spec):
            self.func, self.coeffs = spec, None
        else:
            self.coeffs = tuple(int(c) for c in np.atleast_1d(spec))
            self.func = None

    def __call__(self, j):
        j = np.asarray(j, dtype=np.int64)
        if self.func is not None:
            return np.asarray(self.func(j), dtype=np.int64)
        out = np.zeros_like(j)
        for c in reversed(self.coeffs):
            out = out * j + c
        return out

    def describe(self):
        return list(self.coeffs) if self.coeffs is not None else "callable"


@dataclass
class MultipleAverageSpec:
    """Data of ``(1/k) sum_j f_0(x) prod_l f_l(T_l^{n_j^(l)} x)``."""

    maps: list
    indices: list
    f0: Observable
    fs: list

    def __post_init__(self):
        if len(self.maps) < 1 or not (len(self.maps) == len(self.indices) == len(self.fs)):
            raise InvalidInputError("need L >= 1 maps, index sequences and observables")
        self.indices = [s if isinstance(s, IndexSequence) else IndexSequence(s)
                        for s in self.indices]
        spaces = {m.space for m in self.maps} | {self.f0.space} | {f.space for f in self.fs}
        if len(spaces) != 1:
            raise InvalidInputError("all maps and observables must share one space")
        if any(m.group_dim != 1 for m in self.maps):
            raise UnsupportedError("multiple averages use Z-actions")

    @property
    def L(self):
        return len(self.maps)

    @property
    def bound(self):
        return max([1.0, self.f0.bound] + [f.bound for f in self.fs])


def multiple_terms(spec: MultipleAverageSpec, js, P):
    """Term matrix ``f_0(x_i) prod_l f_l(T_l^{n_j} x_i)`` of shape (n, len(js))."""
    js = np.asarray(js, dtype=np.int64)
    V = np.ones((P.shape[0], js.size), dtype=complex)
    for T, seq, f in zip(spec.maps, spec.indices, spec.fs):
        V *= orbit_values(T, f, P, seq(js)[:, None])
    return V * np.asarray(spec.f0.evaluate(P), dtype=complex)[:, None]


def avg_multiple_field(spec: MultipleAverageSpec, k, points, backend=None):
    k = _check_k(k)
    P = np.ascontiguousarray(spec.maps[0].as_points(points))
    K = kernels.get_backend(backend)
    state = [np.zeros(P.shape[0]) for _ in range(4)]
    one = np.zeros(1)
    step = max(1, _BLOCK_CELLS // max(1, P.shape[0]))
    for a in range(0, k, step):
        js = np.arange(a, min(k, a + step))
        V = multiple_terms(spec, js, P)
        m = js.size
        K.value_accumulate(np.ascontiguousarray(V.real), np.ascontiguousarray(V.imag),
                           np.ones(m), np.zeros(m), one, one, np.zeros(m, dtype=np.int64),
                           False, False, *state)
    return (state[0] + 1j * state[1]) / k


def avg_multiple(spec: MultipleAverageSpec, k, x):
    """Multiple ergodic average over ``j = 0..k-1`` at a single point."""
    return complex(avg_multiple_field(spec, k, _single(spec.maps[0], x))[0])
