"""Weighted-sample models of probability measures, regions and the spatial
functional ``alpha_C(f) = (1/mu(C)) int_C f dmu``.

A :class:`MeasureModel` is a finite list of points with positive weights
summing to one.  Regions are evaluated against the model's samples, except
that balls in a Lebesgue quadrature model on the torus are integrated by a
local midpoint rule with their exact mass ``(2r)^D``; that keeps shrinking
balls of radius far below the grid spacing usable.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (DoublingMap, FullShift, SymbolicPoint, TorusPoint, TorusTranslation,
                       TrivialAction, symbolic_distance, torus_distance)
from .errors import InvalidInputError, RangeError, ZeroMeasureError


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

class MeasureModel:
    """Finite weighted sample representation of a Borel probability measure.

    Parameters
    ----------
    space : {"torus", "symbolic"}
    points : ndarray
        ``(n, D)`` floats in ``[0, 1)`` or ``(n, W)`` integer words.
    weights : ndarray
        Positive, summing to one within 1e-12.
    mode : {"quadrature", "monte-carlo"}
    local_nodes : int or None
        Midpoint nodes per axis for balls (Lebesgue torus models only).
    """

    def __init__(self, space, points, weights, mode="quadrature", seed=None,
                 local_nodes=None, symbols=2, description=""):
        P = np.asarray(points)
        w = np.asarray(weights, dtype=float)
        if P.ndim != 2 or P.shape[0] == 0 or w.shape != (P.shape[0],):
            raise InvalidInputError("points must be (n, D) with one weight per point")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise InvalidInputError("weights must be positive and finite")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise InvalidInputError(f"weights sum to {math.fsum(w)!r}, not 1")
        if space == "torus":
            P = P.astype(float)
            if P.min() < 0 or P.max() >= 1:
                raise InvalidInputError("torus samples must lie in [0, 1)")
        elif space == "symbolic":
            P = P.astype(np.int64)
            if P.min() < 0 or P.max() >= symbols:
                raise InvalidInputError("symbol out of range")
        else:
            raise InvalidInputError(f"unknown space {space!r}")
        if mode not in ("quadrature", "monte-carlo"):
            raise InvalidInputError(f"unknown mode {mode!r}")
        self.space = space
        self.points = np.ascontiguousarray(P)
        self.points.flags.writeable = False
        self.weights = w.copy()
        self.weights.flags.writeable = False
        self.mode = mode
        self.seed = seed
        self.local_nodes = local_nodes
        self.symbols = symbols
        self.description = description

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def mean(self, values):
        """Model integral of a value array aligned with the samples."""
        return _wmean(self.weights, np.asarray(values))

    def integrate(self, f):
        return self.mean(f.evaluate(self.points))

    def describe(self):
        d = {"space": self.space, "n": len(self), "mode": self.mode, "description": self.description}
        if self.seed is not None:
            d["seed"] = self.seed
        return d

    def grid_spacing(self):
        """Spacing of a uniform torus grid, ``None`` for other models."""
        return getattr(self, "_spacing", None)

    def quadrature_tol(self, lipschitz):
        """Error budget ``c * h / 2`` of the grid rule for a Lipschitz-``c`` function."""
        h = self.grid_spacing()
        if h is None:
            return None
        return lipschitz * h / 2.0


def _wmean(w, v):
    """``sum w_i v_i / sum w_i``."""
    return alpha_values(w / _total(w), v)


def lebesgue_grid(n, dim=1, local_nodes=64):
    """Uniform grid ``{i/n}`` per axis (``n**dim`` nodes, equal weights)."""
    n = int(n)
    if n < 1:
        raise InvalidInputError("grid size must be positive")
    axis = np.arange(n) / n
    if dim == 1:
        P = axis[:, None]
    else:
        P = np.stack([g.ravel() for g in np.meshgrid(*[axis] * dim, indexing="ij")], axis=1)
    model = MeasureModel("torus", P, np.full(P.shape[0], 1.0 / P.shape[0]),
                         local_nodes=local_nodes, description=f"lebesgue grid n={n} dim={dim}")
    model._spacing = 1.0 / n
    model.reference = "lebesgue"
    return model


def lebesgue_monte_carlo(n, dim=1, seed=0, local_nodes=64):
    """``n`` independent uniform points from a counter-based generator."""
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    P = rng.random((int(n), dim))
    model = MeasureModel("torus", P, np.full(int(n), 1.0 / int(n)), mode="monte-carlo",
                         seed=int(seed), local_nodes=local_nodes,
                         description=f"lebesgue monte-carlo n={n} dim={dim}")
    model.reference = "lebesgue"
    return model


def _bernoulli_p(p, symbols):
    if p is None:
        return np.full(symbols, 1.0 / symbols)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.size == symbols - 1:
        p = np.append(p, 1.0 - p.sum())
    if p.size != symbols or np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
        raise InvalidInputError(f"bad Bernoulli probabilities {p}")
    return p


def bernoulli_words(w, symbols=2, p=None):
    """All words of length ``w`` with product weights (exact cylinder quadrature)."""
    p = _bernoulli_p(p, symbols)
    P = np.array(list(itertools.product(range(symbols), repeat=int(w))), dtype=np.int64)
    weights = np.prod(p[P], axis=1)
    model = MeasureModel("symbolic", P, weights / math.fsum(weights), symbols=symbols,
                         description=f"bernoulli words w={w}")
    model.reference = "bernoulli"
    return model


def bernoulli_monte_carlo(n, width=16, symbols=2, p=None, seed=0):
    """``n`` random periodic words of period ``width``.

    Each sample is a periodic point, so orbits of samples stay exactly
    representable and cylinder functions are evaluated without truncation.
    """
    p = _bernoulli_p(p, symbols)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    P = rng.choice(symbols, size=(int(n), int(width)), p=p).astype(np.int64)
    model = MeasureModel("symbolic", P, np.full(int(n), 1.0 / int(n)), mode="monte-carlo",
                         seed=int(seed), symbols=symbols,
                         description=f"bernoulli monte-carlo n={n} width={width}")
    model.reference = "bernoulli"
    return model


def discrete(space, points, weights=None, symbols=2, description="discrete"):
    """Finitely supported measure; equal weights by default."""
    P = np.asarray(points)
    if P.ndim == 1:
        P = P[:, None] if space == "torus" else P[None, :]
    if weights is None:
        weights = np.full(P.shape[0], 1.0 / P.shape[0])
    return MeasureModel(space, P, weights, symbols=symbols, description=description)


def save_csv(model, path):
    """Columns ``x0..x{D-1}`` (or ``s0..``) and ``weight``; floats as repr."""
    prefix = "x" if model.space == "torus" else "s"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow([f"{prefix}{i}" for i in range(model.dim)] + ["weight"])
        for row, w in zip(model.points.tolist(), model.weights.tolist()):
            wr.writerow([repr(v) for v in row] + [repr(w)])


def load_csv(path, symbols=2):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    space = "torus" if header[0].startswith("x") else "symbolic"
    conv = float if space == "torus" else int
    P = np.array([[conv(v) for v in r[:-1]] for r in body])
    w = np.array([float(r[-1]) for r in body])
    return MeasureModel(space, P, w, symbols=symbols, description=f"loaded from {path}")


def save_npz(model, path):
    np.savez(path, points=model.points, weights=model.weights, space=model.space,
             mode=model.mode, symbols=model.symbols)


def load_npz(path):
    z = np.load(path)
    return MeasureModel(str(z["space"]), z["points"], z["weights"], mode=str(z["mode"]),
                        symbols=int(z["symbols"]))


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

class Region:
    kind = "abstract"

    def mask(self, model):
        """Boolean membership of the model samples."""
        raise NotImplementedError

    def diam_bound(self, space_diam):
        return space_diam

    def describe(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class WholeSpace(Region):
    kind = "whole"

    def mask(self, model):
        return np.ones(len(model), dtype=bool)

    def contains(self, sys, x):
        return True


@dataclass(frozen=True)
class Ball(Region):
    """Closed ball ``{x : p(center, x) <= radius}``."""

    center: object
    radius: float
    kind = "ball"

    def __post_init__(self):
        if not self.radius >= 0:
            raise RangeError("ball radius must be nonnegative")

    def _center_array(self, space):
        c = self.center
        if isinstance(c, (TorusPoint, SymbolicPoint)):
            return c.as_array()
        return np.atleast_1d(np.asarray(c, dtype=float if space == "torus" else np.int64))

    def distances(self, space, P):
        c = self._center_array(space)
        if space == "torus":
            return torus_distance(P, c[None, :])
        return symbolic_distance(P, np.resize(c, P.shape[1]) if c.size != P.shape[1] else c)

    def mask(self, model):
        if model.space == "symbolic":
            fast = _symbolic_ball_mask(model, self._center_array("symbolic"), self.radius)
            if fast is not None:
                return fast
        return self.distances(model.space, model.points) <= self.radius

    def contains(self, sys, x):
        return sys.distance(self.center, x) <= self.radius

    def diam_bound(self, space_diam):
        return min(2.0 * self.radius, space_diam)

    def describe(self):
        c = self.center
        coords = list(c.coords if isinstance(c, TorusPoint) else
                      c.word if isinstance(c, SymbolicPoint) else np.atleast_1d(c).tolist())
        return {"kind": self.kind, "center": coords, "radius": self.radius}


def _word_codes(model):
    """Pack each sample word into one integer (cached); None if it does not fit."""
    codes = getattr(model, "_codes", None)
    if codes is None:
        bits = max(1, int(math.ceil(math.log2(model.symbols))))
        if model.dim * bits > 62:
            return None
        shifts = (np.arange(model.dim, dtype=np.int64) * bits)
        codes = (model.points.astype(np.int64) << shifts[None, :]).sum(axis=1)
        model._codes = codes
        model._code_bits = bits
    return codes


def _symbolic_ball_mask(model, center, radius):
    # d(x, c) <= r  iff  x agrees with c on every residue whose least
    # representative |n| is below m, where 2^-m <= r < 2^-(m-1)
    W = model.dim
    if center.size != W:
        return None
    codes = _word_codes(model)
    if codes is None:
        return None
    if radius >= 1.0:
        return np.ones(W and len(model), dtype=bool)
    if radius <= 0.0:
        m = W
    else:
        m = int(math.ceil(-math.log2(radius)))
    bits = model._code_bits
    sel = 0
    for i in range(W):
        if min(i, W - i) < m:
            sel |= ((1 << bits) - 1) << (i * bits)
    c = int((center.astype(np.int64) << (np.arange(W, dtype=np.int64) * bits)).sum())
    return ((codes ^ c) & sel) == 0


class LevelSet(Region):
    """``{x : part(g(x)) > t}`` or ``< t``.

    ``g`` is either an observable or an array of values aligned with the
    samples of one particular model (``values=``).
    """

    kind = "level"

    def __init__(self, threshold, direction=">", observable=None, values=None, part="re",
                 inclusive=False):
        if (observable is None) == (values is None):
            raise InvalidInputError("give exactly one of observable / values")
        if direction not in (">", "<"):
            raise InvalidInputError("direction must be '>' or '<'")
        self.threshold = float(threshold)
        self.direction = direction
        self.observable = observable
        self.values = None if values is None else np.asarray(values)
        self.part = part
        self.inclusive = inclusive

    def _part(self, v):
        v = np.asarray(v)
        return {"re": np.real, "im": np.imag, "abs": np.abs}[self.part](v)

    def mask(self, model):
        if self.values is not None:
            if self.values.shape[0] != len(model):
                raise InvalidInputError("level-set values are not aligned with the model")
            v = self._part(self.values)
        else:
            v = self._part(self.observable.evaluate(model.points))
        t = self.threshold
        if self.direction == ">":
            return v >= t if self.inclusive else v > t
        return v <= t if self.inclusive else v < t

    def contains(self, sys, x):
        if self.observable is None:
            raise InvalidInputError("membership of a value-array level set needs a model")
        v = self._part(self.observable.evaluate(sys.as_points(x)))[0]
        return v > self.threshold if self.direction == ">" else v < self.threshold

    def describe(self):
        return {"kind": self.kind, "threshold": self.threshold, "direction": self.direction,
                "part": self.part}


class SampleSet(Region):
    """Explicit subset of the model's sample indices."""

    kind = "samples"

    def __init__(self, indices):
        self.indices = np.unique(np.asarray(indices, dtype=np.int64))

    def mask(self, model):
        m = np.zeros(len(model), dtype=bool)
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= len(model)):
            raise InvalidInputError("sample index out of range")
        m[self.indices] = True
        return m

    def describe(self):
        return {"kind": self.kind, "size": int(self.indices.size)}


# ---------------------------------------------------------------------------
# integration over regions
# ---------------------------------------------------------------------------

def _local_ball(model, region):
    return (region.kind == "ball" and model.space == "torus" and model.local_nodes)


def ball_nodes(center, radius, dim, m):
    """Midpoint nodes of the cube ``[c - r, c + r]^dim`` (wrapped), and its mass."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    half = min(float(radius), 0.5)
    if half == 0.0:
        return np.empty((0, dim)), 0.0
    offs = half * ((2 * np.arange(m) + 1) / m - 1.0)
    if dim == 1:
        P = (c[0] + offs)[:, None]
    else:
        grids = np.meshgrid(*[c[i] + offs for i in range(dim)], indexing="ij")
        P = np.stack([g.ravel() for g in grids], axis=1)
    P = P - np.floor(P)
    return P, (2.0 * half) ** dim


def region_quadrature(model, region):
    """Nodes, normalized weights and mass ``mu(C)`` used to integrate over ``region``."""
    if _local_ball(model, region):
        dim = model.dim
        m = int(model.local_nodes) if dim == 1 else max(2, int(round(4096 ** (1.0 / dim))))
        P, mass = ball_nodes(region._center_array("torus"), region.radius, dim, m)
        if mass == 0.0:
            return P, np.empty(0), 0.0
        return P, np.full(P.shape[0], 1.0 / P.shape[0]), mass
    mask = region.mask(model)
    w = model.weights[mask]
    mass = _total(w)
    if mass == 0.0:
        return model.points[mask], w, 0.0
    return model.points[mask], w / mass, mass


def measure_of(model, region):
    """``mu(C)`` under the model."""
    if region.kind == "whole":
        return 1.0
    return min(1.0, region_quadrature(model, region)[2])


def alpha_values(wn, values):
    """``sum_i wn_i v_i`` clamped into the coordinatewise range of ``v``.

    A mean lies between the extreme values, so clamping only removes
    rounding overshoot; it makes ``alpha`` exact on constants.
    """
    v = np.asarray(values)
    if np.iscomplexobj(v):
        re = min(max(_total(wn * v.real), v.real.min()), v.real.max())
        im = min(max(_total(wn * v.imag), v.imag.min()), v.imag.max())
        return complex(re, im)
    return min(max(_total(wn * v), v.min()), v.max())


def _total(a):
    # numpy's pairwise summation: fixed order for a given array, so results
    # do not depend on threading, and error grows only like log(n)
    return float(np.sum(a))


def alpha(model, region, f, k=None):
    """Spatial average ``(1/mu(C)) int_C f dmu``.

    ``f`` is an observable or a callable mapping a point batch to values.

    Raises
    ------
    ZeroMeasureError
        If the region carries no mass in the model.
    """
    P, wn, mass = region_quadrature(model, region)
    if mass == 0.0:
        raise ZeroMeasureError(f"region {region.describe()} has zero measure", k=k)
    v = f.evaluate(P) if hasattr(f, "evaluate") else f(P)
    return alpha_values(wn, np.asarray(v))


def superlevel_catalog(model, f, K=64):
    """Superlevel sets of ``+-Re f`` and ``+-Im f`` at thresholds ``(k/(k+1)) max``.

    Each family also includes its limiting set, the level set at the max.
    """
    v = np.asarray(f.evaluate(model.points) if hasattr(f, "evaluate") else f)
    parts = [v.real] if not np.iscomplexobj(v) else [v.real, v.imag]
    regions = []
    for part_name, u in zip(("re", "im"), parts):
        for sign in (1.0, -1.0):
            su = sign * u
            top = su.max()
            if top <= 0:
                continue
            vals = v if sign > 0 else -v
            for k in range(1, K + 1):
                regions.append(LevelSet(k / (k + 1) * top, ">", values=vals, part=part_name))
            regions.append(LevelSet(top, ">", values=vals, part=part_name, inclusive=True))
    return regions


def sup_alpha_over_regions(model, f, region_catalog=None, K=64):
    """Max of ``|alpha_C(f)|`` over a catalog of regions (default: superlevel sets)."""
    v = np.asarray(f.evaluate(model.points) if hasattr(f, "evaluate") else f)
    if region_catalog is None:
        region_catalog = superlevel_catalog(model, v, K)
    best = 0.0
    for C in region_catalog:
        mask = C.mask(model)
        w = model.weights[mask]
        if not w.size:
            continue
        best = max(best, abs(alpha_values(w / _total(w), v[mask])))
    return best


# ---------------------------------------------------------------------------
# spatial families and distortion
# ---------------------------------------------------------------------------

class SpatialFamily:
    """``(k, x0) -> C_k(x0)``: balls with a radius schedule, or the whole space.

    Radius schedules: ``power`` ``r0 * k**(-s)``, ``geometric``
    ``r0 * q**(a*k)``, ``constant`` ``r0``, ``list`` explicit radii.
    """

    def __init__(self, schedule="power", r0=1.0, s=1.0, q=0.5, a=1.0, radii=None):
        if schedule not in ("power", "geometric", "constant", "list", "whole"):
            raise InvalidInputError(f"unknown radius schedule {schedule!r}")
        if schedule == "geometric" and not 0 < q < 1:
            raise InvalidInputError("geometric schedules need 0 < q < 1")
        if schedule == "power" and s < 0:
            raise InvalidInputError("power schedules need s >= 0")
        self.schedule = schedule
        self.r0, self.s, self.q, self.a = float(r0), float(s), float(q), float(a)
        self.radii = None if radii is None else [float(r) for r in radii]
        if self.radii is not None and any(b > a_ for a_, b in zip(self.radii, self.radii[1:])):
            raise InvalidInputError("radii must be nonincreasing")

    @classmethod
    def whole(cls):
        return cls("whole")

    def radius(self, k):
        if self.schedule == "power":
            return self.r0 * float(k) ** (-self.s)
        if self.schedule == "geometric":
            return self.r0 * math.exp(self.a * k * math.log(self.q))
        if self.schedule == "constant":
            return self.r0
        if self.schedule == "list":
            return self.radii[min(k, len(self.radii)) - 1]
        return math.inf

    def region(self, k, x0):
        if self.schedule == "whole":
            return WholeSpace()
        return Ball(x0, self.radius(k))

    def __call__(self, k, x0):
        return self.region(k, x0)

    def describe(self):
        d = {"schedule": self.schedule}
        if self.schedule in ("power", "geometric", "constant"):
            d["r0"] = self.r0
        if self.schedule == "power":
            d["s"] = self.s
        if self.schedule == "geometric":
            d.update(q=self.q, a=self.a)
        if self.schedule == "list":
            d["radii"] = self.radii
        return d


@dataclass
class DistortionConstant:
    lam: float
    j: int
    k: int
    ratios: dict = field(default_factory=dict, repr=False)


@dataclass
class DistortionViolation:
    j: int
    k: int
    reason: str


def _image_measure(model, sys, region, j, k=None):
    """``mu(T^j C)`` for a region of a Lebesgue torus or shift model."""
    if isinstance(sys, TrivialAction) or region.kind == "whole":
        return measure_of(model, region)
    if region.kind == "ball" and model.space == "torus" and model.local_nodes:
        r = min(region.radius, 0.5)
        if isinstance(sys, TorusTranslation):
            return (2 * r) ** model.dim
        if isinstance(sys, DoublingMap):
            # an arc of length l maps onto an arc of length min(1, 2^j l)
            return min(1.0, 2.0 ** j * 2 * r) ** model.dim
    if getattr(sys, "invertible", False) and hasattr(region, "contains"):
        pre = sys._orbit(model.points, np.array([-j]))
        if region.kind == "ball":
            mask = region.distances(model.space, pre) <= region.radius
        elif region.kind == "level" and region.observable is not None:
            v = region._part(region.observable.evaluate(pre))
            mask = v > region.threshold if region.direction == ">" else v < region.threshold
        else:
            raise InvalidInputError(f"cannot push {region.kind} regions forward")
        return _total(model.weights[mask])
    raise InvalidInputError(f"no image-measure rule for {type(sys).__name__} and {region.kind}")


def check_distortion(model, sys, family, x0, js, ks):
    """Smallest ``lam`` with ``mu(T^j C_k) <= lam mu(C_k)`` on the window.

    Returns a :class:`DistortionConstant`, or a :class:`DistortionViolation`
    when some image has zero measure.
    """
    best = DistortionConstant(1.0 if isinstance(sys, TrivialAction) else 0.0, 0, 0)
    for k in ks:
        C = family.region(k, x0)
        mu = measure_of(model, C)
        if mu == 0.0:
            raise ZeroMeasureError(f"C_{k} has zero measure", k=k)
        for j in js:
            img = _image_measure(model, sys, C, j, k)
            if img == 0.0:
                return DistortionViolation(int(j), int(k), "forward image has zero measure")
            ratio = img / mu
            best.ratios[(int(j), int(k))] = ratio
            if ratio > best.lam:
                best.lam, best.j, best.k = ratio, int(j), int(k)
    return best
