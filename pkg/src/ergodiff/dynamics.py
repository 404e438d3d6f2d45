"""Concrete compact dynamical systems.

Every system here is an action of ``Z^d`` (counting measure as Haar measure)
on either a torus ``T^D = R^D / Z^D`` or a two-sided symbolic space.  Single
points are :class:`TorusPoint` / :class:`SymbolicPoint`; batches of points are
plain numpy arrays (``(n, D)`` floats on the torus, ``(n, W)`` integer words on
the shift) so the averaging kernels can consume them directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidInputError, RangeError, UnsupportedError

#: largest |coordinate| of a group element accepted by any action
MAX_GROUP_COORD = 2 ** 40


# ---------------------------------------------------------------------------
# points and group elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusPoint:
    """A point of ``T^D``; coordinates are reduced into ``[0, 1)``."""

    coords: tuple

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coords, dtype=float))
        if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
            raise InvalidInputError(f"bad torus coordinates {self.coords!r}")
        object.__setattr__(self, "coords", tuple(float(v) for v in _frac(c)))

    @property
    def dim(self):
        return len(self.coords)

    def as_array(self):
        return np.array(self.coords, dtype=float)


@dataclass(frozen=True)
class SymbolicPoint:
    """A two-sided sequence given by periodic repetition of ``word``.

    ``x_n = word[n mod len(word)]`` for every integer ``n``.
    """

    word: tuple
    symbols: int = 2

    def __post_init__(self):
        w = tuple(int(s) for s in np.atleast_1d(np.asarray(self.word)).ravel())
        if not w:
            raise InvalidInputError("symbolic words must be nonempty")
        if min(w) < 0 or max(w) >= self.symbols:
            raise InvalidInputError(f"word {w} uses symbols outside 0..{self.symbols - 1}")
        object.__setattr__(self, "word", w)

    def __getitem__(self, n):
        return self.word[n % len(self.word)]

    def as_array(self):
        return np.array(self.word, dtype=np.int64)


def _frac(x):
    return x - np.floor(x)


def as_element(g, dim):
    """Normalize a group element to a tuple of ``dim`` Python ints."""
    if isinstance(g, (int, np.integer)):
        coords = (int(g),)
    else:
        coords = tuple(int(c) for c in g)
    if len(coords) != dim:
        raise InvalidInputError(f"group element {g!r} has dimension {len(coords)}, expected {dim}")
    if any(abs(c) > MAX_GROUP_COORD for c in coords):
        raise RangeError(f"group element {g!r} exceeds 2^40")
    return coords


def as_elements(F, dim):
    """Stack a collection of group elements into an ``(m, dim)`` int64 array."""
    arr = np.asarray(F, dtype=np.int64)
    if arr.ndim == 1:
        if dim != 1:
            if arr.size == dim:
                arr = arr.reshape(1, dim)
            else:
                raise InvalidInputError(f"elements of dimension 1 given to a Z^{dim} action")
        else:
            arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise InvalidInputError(f"expected elements of shape (m, {dim}), got {arr.shape}")
    if arr.size and np.abs(arr).max() > MAX_GROUP_COORD:
        raise RangeError("group element exceeds 2^40")
    return arr


# ---------------------------------------------------------------------------
# exact-ish fractional products  frac(j * a)
# ---------------------------------------------------------------------------

def split_chunks(a, bits=12):
    """Split a float into pieces of at most ``bits`` significant bits.

    ``sum(chunks) == a`` exactly, and ``j * chunk`` is exact in double
    precision for ``|j| < 2**(53 - bits)``.
    """
    chunks = []
    r = float(a)
    while r != 0.0:
        m, e = math.frexp(r)
        c = math.ldexp(math.trunc(math.ldexp(m, bits)), e - bits)
        chunks.append(c)
        r -= c
    return chunks


def frac_mul(j, chunks):
    """``frac(j * a)`` for integer ``j`` (scalar or array), ``a = sum(chunks)``.

    Each partial product is exact, so the only rounding is in the final
    sum of at most five fractional parts.
    """
    j = np.asarray(j, dtype=np.int64).astype(np.float64)
    s = np.zeros_like(j)
    for c in chunks:
        p = j * c
        s = s + (p - np.floor(p))
    return s - np.floor(s)


# ---------------------------------------------------------------------------
# Holder profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HolderProfile:
    """Distortion data ``p(T_g x, T_g y) <= L(g) p(x, y)^H(g)``.

    Parametrized as ``L(g) = L0^|g|`` and ``H(g) = H0^|g|`` with ``|g|`` the
    l1 norm, which covers isometries (``L0 = H0 = 1``) and maps whose
    generators are Holder with fixed constants.
    """

    L0: float = 1.0
    H0: float = 1.0

    def __post_init__(self):
        if self.L0 <= 0 or self.H0 <= 0:
            raise InvalidInputError("Holder constants must be positive")

    @property
    def isometric(self):
        return self.L0 == 1.0 and self.H0 == 1.0

    @staticmethod
    def _norm(g):
        g = np.asarray(g, dtype=np.int64)
        return np.abs(g).sum(axis=-1) if g.ndim else np.abs(g)

    def log_L(self, g):
        return self._norm(g) * math.log(self.L0)

    def L(self, g):
        with np.errstate(over="ignore"):
            return np.power(self.L0, self._norm(g).astype(float))

    def H(self, g):
        with np.errstate(over="ignore", under="ignore"):
            return np.power(self.H0, self._norm(g).astype(float))

    def bound(self, g, r):
        """``L(g) * r**H(g)``, vectorized over ``g``; may be ``inf``."""
        r = float(r)
        if r < 0:
            raise RangeError("radius must be nonnegative")
        norm = self._norm(g)
        if r == 0.0:
            return np.zeros(np.shape(norm))
        if self.isometric:
            return np.full(np.shape(norm), r)
        with np.errstate(over="ignore", under="ignore"):
            if self.H0 == 1.0:
                return np.power(self.L0, norm.astype(float)) * r
            logb = norm * math.log(self.L0) + np.power(self.H0, norm.astype(float)) * math.log(r)
            return np.exp(logb)


# ---------------------------------------------------------------------------
# systems
# ---------------------------------------------------------------------------

class DynamicalSystem:
    """Base class for an action of ``Z^group_dim`` on a compact metric space.

    Subclasses fill in :meth:`_orbit` (batch action by one element) and the
    metric.  ``index_range`` is the inclusive range of admissible coordinates
    of group elements.
    """

    kind = "abstract"
    space = "torus"
    group_dim = 1
    space_dim = 1
    holder = HolderProfile()
    index_range = (-MAX_GROUP_COORD, MAX_GROUP_COORD)
    invertible = True
    reference = "lebesgue"

    # -- group elements --------------------------------------------------
    def check_elements(self, elements):
        E = as_elements(elements, self.group_dim)
        lo, hi = self.index_range
        if E.size and (E.min() < lo or E.max() > hi):
            raise RangeError(
                f"{self.kind}: group elements must lie in [{lo}, {hi}], got "
                f"[{int(E.min())}, {int(E.max())}]")
        return E

    # -- points ----------------------------------------------------------
    def as_points(self, points):
        """Coerce a point, list of points or array into a batch array."""
        raise NotImplementedError

    def to_point(self, row):
        raise NotImplementedError

    @property
    def diameter(self):
        raise NotImplementedError

    # -- action ----------------------------------------------------------
    def act(self, g, x):
        """Single-point action ``T_g x``."""
        raise NotImplementedError

    def orbit(self, points, g):
        """Batch action of a single element ``g`` on an array of points."""
        g = self.check_elements([as_element(g, self.group_dim)])[0]
        return self._orbit(self.as_points(points), g)

    def _orbit(self, P, g):
        raise NotImplementedError

    # -- metric ----------------------------------------------------------
    def distance(self, x, y):
        raise NotImplementedError

    def distances(self, points, y):
        """Distances from every point of a batch to a single point ``y``."""
        raise NotImplementedError

    def describe(self):
        return {"kind": self.kind}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.describe().items() if k != "kind")
        return f"{type(self).__name__}({args})"


class _TorusSystem(DynamicalSystem):
    space = "torus"

    @property
    def diameter(self):
        return 0.5

    def as_points(self, points):
        if isinstance(points, TorusPoint):
            P = points.as_array()[None, :]
        elif isinstance(points, (list, tuple)) and points and isinstance(points[0], TorusPoint):
            P = np.array([p.coords for p in points], dtype=float)
        else:
            P = np.asarray(points, dtype=float)
            if P.ndim == 0:
                P = P.reshape(1, 1)
            elif P.ndim == 1:
                P = P.reshape(-1, 1) if self.space_dim == 1 else P.reshape(1, -1)
        if P.ndim != 2 or P.shape[1] != self.space_dim:
            raise InvalidInputError(
                f"expected torus points of dimension {self.space_dim}, got shape {P.shape}")
        return _frac(P)

    def _point(self, x):
        if isinstance(x, SymbolicPoint):
            raise InvalidInputError("symbolic point given to a torus system")
        if not isinstance(x, TorusPoint):
            x = TorusPoint(tuple(np.atleast_1d(np.asarray(x, dtype=float))))
        if x.dim != self.space_dim:
            raise InvalidInputError(f"point of dimension {x.dim} for T^{self.space_dim}")
        return x

    def to_point(self, row):
        return TorusPoint(tuple(np.atleast_1d(row)))

    def distance(self, x, y):
        a, b = self._point(x).as_array(), self._point(y).as_array()
        return float(torus_distance(a, b))

    def distances(self, points, y):
        P = self.as_points(points)
        b = self._point(y).as_array()
        return torus_distance(P, b[None, :])


def torus_distance(a, b):
    """Max over coordinates of the wraparound distance ``min(|d|, 1 - |d|)``."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    d = np.minimum(d, 1.0 - d)
    return d.max(axis=-1)


class TorusTranslation(_TorusSystem):
    """``Z^d`` acting on ``T^D`` by ``x -> x + sum_i g_i v_i (mod 1)``.

    Parameters
    ----------
    vectors : array_like, shape (d, D)
        One translation vector per generator of the acting group.
    """

    kind = "translation"
    holder = HolderProfile()

    def __init__(self, vectors):
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        if V.ndim != 2 or V.size == 0:
            raise InvalidInputError("translation vectors must be a nonempty (d, D) array")
        self.vectors = _frac(V)
        self.group_dim, self.space_dim = self.vectors.shape
        self._chunks = [[split_chunks(v) for v in row] for row in self.vectors]

    def describe(self):
        return {"kind": self.kind, "vectors": self.vectors.tolist()}

    def offsets(self, elements):
        """``frac(g . V)`` for each element: the translation applied by ``T_g``."""
        E = self.check_elements(elements)
        out = np.zeros((E.shape[0], self.space_dim))
        for s in range(self.space_dim):
            acc = np.zeros(E.shape[0])
            for i in range(self.group_dim):
                acc = acc + frac_mul(E[:, i], self._chunks[i][s])
            out[:, s] = _frac(acc)
        return out

    def act(self, g, x):
        g = as_element(g, self.group_dim)
        x = self._point(x)
        out = []
        for s, xs in enumerate(x.coords):
            # exact rational shift, single rounding at the end
            t = sum(Fraction(gi) * Fraction(self.vectors[i, s]) for i, gi in enumerate(g))
            y = (Fraction(xs) + t) % 1
            out.append(float(y))
        return TorusPoint(tuple(out))

    def _orbit(self, P, g):
        off = self.offsets([g])[0]
        return _frac(P + off[None, :])


class Rotation(TorusTranslation):
    """Circle rotation ``x -> x + alpha``; the one-generator case on ``T^1``."""

    kind = "rotation"

    def __init__(self, alpha):
        super().__init__([[float(alpha)]])
        self.alpha = float(self.vectors[0, 0])

    def describe(self):
        return {"kind": self.kind, "alpha": self.alpha}


class DoublingMap(_TorusSystem):
    """``x -> 2x (mod 1)`` on ``T^D``, coordinatewise.

    Non-invertible, so only forward iterates are supported.  Points are
    binary floats, which are eventually fixed under doubling; ``max_index``
    caps orbits at a length where the computed orbit still tracks a generic
    53-bit sample point.
    """

    kind = "doubling"
    invertible = False
    holder = HolderProfile(L0=2.0, H0=1.0)

    def __init__(self, space_dim=1, max_index=48):
        self.space_dim = int(space_dim)
        self.group_dim = 1
        self.max_index = int(max_index)
        self.index_range = (0, self.max_index)

    def describe(self):
        return {"kind": self.kind, "space_dim": self.space_dim, "max_index": self.max_index}

    def act(self, g, x):
        (n,) = as_element(g, 1)
        self.check_elements([[n]])
        x = self._point(x)
        return TorusPoint(tuple(float(_frac(math.ldexp(c, n))) for c in x.coords))

    def _orbit(self, P, g):
        return _frac(np.ldexp(P, int(g[0])))


class TrivialAction(_TorusSystem):
    """Every group element acts as the identity on ``T^D``."""

    kind = "trivial"
    reference = "arbitrary"

    def __init__(self, space_dim=1, group_dim=1):
        self.space_dim = int(space_dim)
        self.group_dim = int(group_dim)

    def describe(self):
        return {"kind": self.kind, "space_dim": self.space_dim, "group_dim": self.group_dim}

    def act(self, g, x):
        as_element(g, self.group_dim)
        return self._point(x)

    def _orbit(self, P, g):
        return P.copy()

    def offsets(self, elements):
        E = self.check_elements(elements)
        return np.zeros((E.shape[0], self.space_dim))


class FullShift(DynamicalSystem):
    """Two-sided full shift ``(sigma^g x)_n = x_{n+g}`` on ``s`` symbols.

    Metric ``2^{-min{|n| : x_n != y_n}}``; ``L(g) = 2^{|g|}``, ``H = 1``.
    """

    kind = "shift"
    space = "symbolic"
    holder = HolderProfile(L0=2.0, H0=1.0)
    reference = "bernoulli"

    def __init__(self, symbols=2):
        if symbols < 2:
            raise InvalidInputError("the full shift needs at least two symbols")
        self.symbols = int(symbols)
        self.group_dim = 1

    @property
    def diameter(self):
        return 1.0

    def describe(self):
        return {"kind": self.kind, "symbols": self.symbols}

    def _point(self, x):
        if isinstance(x, TorusPoint):
            raise InvalidInputError("torus point given to a symbolic system")
        if not isinstance(x, SymbolicPoint):
            x = SymbolicPoint(tuple(np.atleast_1d(x)), self.symbols)
        if x.symbols != self.symbols:
            raise InvalidInputError(f"point on {x.symbols} symbols for a {self.symbols}-shift")
        return x

    def as_points(self, points):
        if isinstance(points, SymbolicPoint):
            W = points.as_array()[None, :]
        elif isinstance(points, (list, tuple)) and points and isinstance(points[0], SymbolicPoint):
            lengths = {len(p.word) for p in points}
            if len(lengths) != 1:
                raise InvalidInputError("a batch of symbolic points needs a common word length")
            W = np.array([p.word for p in points], dtype=np.int64)
        else:
            if isinstance(points, TorusPoint):
                raise InvalidInputError("torus point given to a symbolic system")
            W = np.asarray(points)
            if W.dtype.kind == "f":
                raise InvalidInputError("symbolic words must be integer arrays")
            W = W.astype(np.int64)
            if W.ndim == 1:
                W = W[None, :]
        if W.ndim != 2 or W.shape[1] == 0:
            raise InvalidInputError(f"expected (n, W) symbolic words, got shape {W.shape}")
        if W.min() < 0 or W.max() >= self.symbols:
            raise InvalidInputError("symbol out of range")
        return W

    def to_point(self, row):
        return SymbolicPoint(tuple(int(s) for s in row), self.symbols)

    def act(self, g, x):
        (n,) = as_element(g, 1)
        x = self._point(x)
        W = len(x.word)
        return SymbolicPoint(tuple(x.word[(i + n) % W] for i in range(W)), self.symbols)

    def _orbit(self, P, g):
        return np.roll(P, -int(g[0] % P.shape[1]), axis=1)

    def distance(self, x, y):
        x, y = self._point(x), self._point(y)
        a, b = np.array(x.word), np.array(y.word)
        if len(a) != len(b):
            m = math.lcm(len(a), len(b))
            a, b = np.tile(a, m // len(a)), np.tile(b, m // len(b))
        return float(symbolic_distance(a[None, :], b)[0])

    def distances(self, points, y):
        P = self.as_points(points)
        y = self._point(y)
        b = np.array(y.word)
        if len(b) != P.shape[1]:
            m = math.lcm(len(b), P.shape[1])
            P = np.tile(P, (1, m // P.shape[1]))
            b = np.tile(b, m // len(b))
        return symbolic_distance(P, b)


def symbolic_distance(P, b):
    """Shift metric between periodic words of common length ``W``.

    The least ``|n|`` in the residue class ``r`` mod ``W`` is ``min(r, W - r)``.
    """
    P = np.asarray(P)
    W = P.shape[1]
    r = np.arange(W)
    least = np.minimum(r, W - r).astype(float)
    mismatch = P != np.asarray(b)[None, :]
    first = np.where(mismatch, least[None, :], np.inf).min(axis=1)
    return np.where(np.isinf(first), 0.0, np.exp2(-first))


# ---------------------------------------------------------------------------
# distortion
# ---------------------------------------------------------------------------

def act(sys, g, x):
    """``T_g x`` for a single point."""
    return sys.act(g, x)


def distance(sys, x, y):
    """Metric of ``sys`` between two single points."""
    return sys.distance(x, y)


def distortion_bound(sys, g, r):
    """Holder distortion ``L(g) * r**H(g)`` for a single element (scalar)."""
    g = as_element(g, sys.group_dim)
    return float(sys.holder.bound(np.array(g), r))


def distortion_bounds(sys, elements, r):
    """Vectorized :func:`distortion_bound` over an ``(m, d)`` element array."""
    E = as_elements(elements, sys.group_dim)
    return sys.holder.bound(E, r)


# nested offset set for sampled sups: every radius sees a superset of the
# offsets any smaller radius sees, so the estimate is monotone in r
_OFFSETS = np.unique(np.concatenate(
    [np.exp2(-s) * np.arange(1, 17) / 16.0 for s in range(0, 64)]))


class DistortionProfile:
    """Sampled ``D_{x0}(g, r) = sup{p(T_g x0, T_g x) : p(x0, x) <= r}``.

    The sup is taken over a fixed nested family of perturbations of ``x0``,
    so the estimate is a lower bound for the true value, nondecreasing in
    ``r``, and dominated by the Holder bound.
    """

    def __init__(self, sys, x0):
        self.sys = sys
        self.x0 = x0
        if sys.space == "torus":
            x = sys._point(x0).as_array()
            D = sys.space_dim
            dirs = [np.eye(D)[i] for i in range(D)]
            if D > 1:
                dirs.append(np.ones(D))
            dirs = dirs + [-d for d in dirs]
            cand, rad = [], []
            for d in dirs:
                for o in _OFFSETS[_OFFSETS <= 0.5]:
                    cand.append(x + o * d)
                    rad.append(o)
            self._cand = _frac(np.array(cand))
            self._rad = sys.distances(self._cand, x0)
        else:
            x = sys._point(x0)
            w = np.array(x.word)
            cand = []
            for i in range(len(w)):
                for s in range(sys.symbols):
                    if s != w[i]:
                        y = w.copy()
                        y[i] = s
                        cand.append(y)
            self._cand = np.array(cand, dtype=np.int64).reshape(-1, len(w))
            self._rad = sys.distances(self._cand, x0)

    def __call__(self, g, r):
        if r < 0:
            raise RangeError("radius must be nonnegative")
        sel = self._rad <= r
        if not np.any(sel):
            return 0.0
        base = self.sys.orbit(self.x0 if self.sys.space == "torus" else self.sys._point(self.x0), g)
        imgs = self.sys.orbit(self._cand[sel], g)
        if self.sys.space == "torus":
            d = torus_distance(imgs, base)
        else:
            d = symbolic_distance(imgs, base[0])
        return float(d.max())


def distortion_profile(sys, x0, g, r):
    return DistortionProfile(sys, x0)(g, r)
