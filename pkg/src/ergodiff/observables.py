"""Bounded continuous observables with declared size and Holder data.

Each observable knows which kind of space it lives on, a uniform bound
``M >= sup |f|`` and, when available, Holder constants ``(c, beta)`` with
``|f(x) - f(y)| <= c * p(x, y)**beta``.  Evaluation is vectorized over a
batch of points as produced by :mod:`ergodiff.dynamics`.
"""
from __future__ import annotations

import numpy as np

from .dynamics import SymbolicPoint, TorusPoint, frac_mul, split_chunks
from .errors import InvalidInputError

TWO_PI = 2.0 * np.pi


def unit_phase(theta):
    """``exp(2 pi i theta)`` as separate real and imaginary arrays."""
    a = TWO_PI * np.asarray(theta, dtype=float)
    return np.cos(a), np.sin(a)


class Observable:
    """Base class.  Subclasses implement :meth:`_evaluate` on batch arrays."""

    space = "torus"
    bound = 1.0
    holder = None
    is_real = False
    dim = None

    def evaluate(self, P):
        """Values on an array of points; real dtype when ``is_real``."""
        v = self._evaluate(np.asarray(P))
        if self.is_real:
            return np.real(v).astype(float)
        return np.asarray(v, dtype=complex)

    def _evaluate(self, P):
        raise NotImplementedError

    def __call__(self, x):
        if isinstance(x, TorusPoint):
            P = x.as_array()[None, :]
        elif isinstance(x, SymbolicPoint):
            P = x.as_array()[None, :]
        else:
            P = np.atleast_1d(np.asarray(x))
            if self.space == "torus":
                P = P.astype(float).reshape(1, -1)
            else:
                P = P.reshape(1, -1)
        return self.evaluate(P)[0].item()

    def describe(self):
        return {"kind": type(self).__name__}

    # a small algebra: sums with other observables and constants, scalars
    def __add__(self, other):
        if np.isscalar(other):
            if isinstance(self, Constant):
                return Constant(self.value + other, space=self.space)
            other = Constant(other, space=self.space)
        if isinstance(self, Constant) and isinstance(other, Constant):
            return Constant(self.value + other.value, space=self.space)
        return SumObservable(self, other)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, a):
        if not np.isscalar(a):
            return NotImplemented
        if isinstance(self, Constant):
            return Constant(self.value * a, space=self.space)
        return ScaledObservable(self, a)

    __rmul__ = __mul__


class Constant(Observable):
    """``f == value``; exact Holder data ``(0, 1)``."""

    def __init__(self, value, space="torus"):
        self.value = complex(value) if np.iscomplexobj(value) else float(value)
        self.is_real = np.isrealobj(value) or complex(value).imag == 0
        if self.is_real:
            self.value = float(np.real(value))
        self.space = space
        self.bound = abs(self.value)
        self.holder = (0.0, 1.0)

    def _evaluate(self, P):
        return np.full(P.shape[0], self.value)

    def describe(self):
        v = self.value
        return {"kind": "constant", "value": v if self.is_real else [v.real, v.imag]}


class TrigPolynomial(Observable):
    """``f(x) = sum_q c_q exp(2 pi i n_q . x)`` on ``T^D``.

    Parameters
    ----------
    freqs : array_like of int, shape (N, D) or (N,)
        Integer frequency vectors.
    coeffs : array_like of complex, shape (N,)

    Notes
    -----
    ``M = sum |c_q|`` and ``f`` is Lipschitz for the max-of-wraparound
    metric with ``c = 2 pi sum |c_q| |n_q|_1``.
    """

    def __init__(self, freqs, coeffs):
        n = np.asarray(freqs, dtype=np.int64)
        if n.ndim == 1:
            n = n[:, None]
        c = np.asarray(coeffs, dtype=complex).ravel()
        if n.ndim != 2 or n.shape[0] != c.size or c.size == 0:
            raise InvalidInputError("frequencies and coefficients must pair up")
        self.freqs = n
        self.coeffs = c
        self.dim = n.shape[1]
        self.bound = float(np.abs(c).sum())
        self.holder = (float(TWO_PI * (np.abs(c) * np.abs(n).sum(axis=1)).sum()), 1.0)
        self.is_real = self._conjugate_symmetric()

    def _conjugate_symmetric(self):
        table = {}
        for k, v in zip(self.freqs.tolist(), self.coeffs):
            table[tuple(k)] = table.get(tuple(k), 0.0) + v
        for k, v in table.items():
            w = table.get(tuple(-x for x in k), 0.0)
            if abs(v - np.conj(w)) > 1e-15 * max(1.0, abs(v)):
                return False
        return True

    @classmethod
    def character(cls, n, dim=1, coeff=1.0):
        freq = np.zeros(dim, dtype=np.int64)
        freq[:] = n
        return cls(freq[None, :], [coeff])

    @classmethod
    def cosine(cls, n=1, amplitude=1.0, offset=0.0):
        """``amplitude * cos(2 pi n x) + offset`` on the circle."""
        freqs, coeffs = [[n], [-n]], [amplitude / 2, amplitude / 2]
        if offset:
            freqs.append([0])
            coeffs.append(offset)
        return cls(freqs, coeffs)

    def phases(self, P):
        """``exp(2 pi i n_q . x_i)`` for every point and frequency (re, im)."""
        P = np.asarray(P, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        ang = P @ self.freqs.T.astype(float)
        ang = ang - np.floor(ang)
        return unit_phase(ang)

    def _evaluate(self, P):
        cr, ci = self.phases(P)
        return (cr + 1j * ci) @ self.coeffs

    def describe(self):
        return {"kind": "trig", "freqs": self.freqs.tolist(),
                "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs]}


def character_phases(freqs, offsets_chunks, elements):
    """Phases ``exp(2 pi i n_q . (g_t V))`` with exact integer reduction.

    ``offsets_chunks[i][s]`` are the :func:`split_chunks` of generator ``i``'s
    translation in coordinate ``s``; ``elements`` is ``(m, d)``.
    """
    E = np.asarray(elements, dtype=np.int64)
    m, N = E.shape[0], freqs.shape[0]
    ang = np.zeros((m, N))
    for q in range(N):
        acc = np.zeros(m)
        for i, row in enumerate(offsets_chunks):
            for s, chunks in enumerate(row):
                if freqs[q, s]:
                    acc = acc + frac_mul(freqs[q, s] * E[:, i], chunks)
        ang[:, q] = acc - np.floor(acc)
    return unit_phase(ang)


class Cylinder(Observable):
    """Function of finitely many coordinates of a symbolic sequence.

    ``f(x) = table[x_{p_1}, ..., x_{p_r}]`` for positions ``p_1..p_r``.
    Lipschitz for the shift metric with ``c = osc(f) * 2^{max |p|}``.
    """

    space = "symbolic"

    def __init__(self, positions, table, symbols=2):
        self.positions = tuple(int(p) for p in np.atleast_1d(positions))
        self.symbols = int(symbols)
        t = np.asarray(table)
        expected = (self.symbols,) * len(self.positions)
        if t.shape != expected:
            raise InvalidInputError(f"cylinder table must have shape {expected}, got {t.shape}")
        self.is_real = not np.iscomplexobj(t) or bool(np.all(np.imag(t) == 0))
        self.table = np.real(t).astype(float) if self.is_real else t.astype(complex)
        flat = self.table.ravel()
        self.bound = float(np.abs(flat).max())
        osc = float(np.abs(flat[:, None] - flat[None, :]).max())
        self.holder = (osc * 2.0 ** max(abs(p) for p in self.positions), 1.0)

    @classmethod
    def coordinate(cls, symbols=2, position=0):
        """``f(x) = x_position`` (symbol value as a number)."""
        return cls([position], np.arange(symbols, dtype=float), symbols)

    def shifted(self, g):
        """``f o sigma^g``: the same table read at positions moved by ``g``."""
        out = Cylinder.__new__(Cylinder)
        out.__dict__.update(self.__dict__)
        out.positions = tuple(p + int(g) for p in self.positions)
        return out

    def _evaluate(self, P):
        P = np.asarray(P, dtype=np.int64)
        W = P.shape[1]
        idx = tuple(P[:, p % W] for p in self.positions)
        return self.table[idx]

    def describe(self):
        t = self.table
        return {"kind": "cylinder", "positions": list(self.positions), "symbols": self.symbols,
                "table": t.tolist() if self.is_real else [[z.real, z.imag] for z in t.ravel()]}


class FunctionObservable(Observable):
    """Wrap a vectorized callable ``func(P) -> values`` with declared data."""

    def __init__(self, func, bound, holder=None, space="torus", is_real=False, name=None):
        self.func = func
        self.bound = float(bound)
        self.holder = holder
        self.space = space
        self.is_real = is_real
        self.name = name or getattr(func, "__name__", "function")

    def _evaluate(self, P):
        return np.asarray(self.func(P))

    def describe(self):
        return {"kind": "function", "name": self.name}


class SumObservable(Observable):
    def __init__(self, f, g):
        if f.space != g.space:
            raise InvalidInputError("cannot add observables on different spaces")
        self.f, self.g = f, g
        self.space = f.space
        self.dim = f.dim or g.dim
        self.is_real = f.is_real and g.is_real
        self.bound = f.bound + g.bound
        self.holder = _holder_sum(f.holder, g.holder)

    def _evaluate(self, P):
        return self.f._evaluate(P) + self.g._evaluate(P)

    def describe(self):
        return {"kind": "sum", "terms": [self.f.describe(), self.g.describe()]}


class ScaledObservable(Observable):
    def __init__(self, f, a):
        self.f, self.a = f, a
        self.space = f.space
        self.dim = f.dim
        self.is_real = f.is_real and np.isreal(a)
        self.bound = abs(a) * f.bound
        self.holder = None if f.holder is None else (abs(a) * f.holder[0], f.holder[1])

    def _evaluate(self, P):
        return self.a * self.f._evaluate(P)

    def describe(self):
        a = self.a
        return {"kind": "scaled", "factor": [float(np.real(a)), float(np.imag(a))],
                "of": self.f.describe()}


def _holder_sum(h1, h2):
    # (c1, b1) + (c2, b2) is Holder with the smaller exponent on a space of
    # diameter <= 1, since p^b is decreasing in b there
    if h1 is None or h2 is None:
        return None
    return (h1[0] + h2[0], min(h1[1], h2[1]))


def reflect(f):
    """``||f|| - f`` using the declared bound; keeps a real ``f`` nonnegative."""
    if not f.is_real:
        raise InvalidInputError("reflection needs a real observable")
    return Constant(f.bound, space=f.space) - f


def as_trig(f):
    """Return ``f`` as a :class:`TrigPolynomial` when it is one in disguise."""
    if isinstance(f, TrigPolynomial):
        return f
    if isinstance(f, Constant) and f.space == "torus":
        return None
    if isinstance(f, ScaledObservable):
        inner = as_trig(f.f)
        if inner is not None:
            return TrigPolynomial(inner.freqs, f.a * inner.coeffs)
    if isinstance(f, SumObservable):
        parts = []
        for g in (f.f, f.g):
            t = as_trig(g)
            if t is None and isinstance(g, Constant) and g.space == "torus":
                dim = f.dim or 1
                t = TrigPolynomial(np.zeros((1, dim), dtype=np.int64), [g.value])
            if t is None:
                return None
            parts.append(t)
        a, b = parts
        if a.dim != b.dim:
            return None
        return TrigPolynomial(np.vstack([a.freqs, b.freqs]), np.concatenate([a.coeffs, b.coeffs]))
    return None


__all__ = [
    "Observable", "Constant", "TrigPolynomial", "Cylinder", "FunctionObservable",
    "SumObservable", "ScaledObservable", "reflect", "as_trig", "character_phases",
    "unit_phase", "split_chunks",
]
