"""Ergodic optimization: the gauge ``Gamma(f) = sup_nu int f dnu`` over
invariant probability measures.

Two independent routes are provided.  :func:`gauge_supnorm` estimates the
gauge as the grid sup of a long temporal average; :func:`gauge_orbit_oracle`
enumerates periodic orbits and returns the best orbit average, which is a
certified lower bound.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .averaging import Interval, avg_field
from .dynamics import DoublingMap, FullShift, TorusTranslation, TrivialAction
from .errors import InvalidInputError, PreconditionError, UnsupportedError
from .measure import MeasureModel, bernoulli_words, discrete, lebesgue_grid
from .observables import Constant, Observable, TrigPolynomial


@dataclass
class GaugeEstimate:
    """Grid-sup estimate of the gauge with its error budget."""

    value: float
    k: int
    grid: int
    witness: list
    budget: float | None
    F_size: float
    lower_bound: float | None = None

    def to_dict(self):
        return asdict(self)


def _grid_points(sys, grid):
    """Grid points and the covering radius ``h`` (every point is within ``h``)."""
    if isinstance(grid, MeasureModel):
        return grid.points, None
    if isinstance(grid, np.ndarray):
        return sys.as_points(grid), None
    n = int(grid)
    if sys.space == "torus":
        axis = np.arange(n) / n
        D = sys.space_dim
        if D == 1:
            return axis[:, None], 0.5 / n
        P = np.stack([g.ravel() for g in np.meshgrid(*[axis] * D, indexing="ij")], axis=1)
        return P, 0.5 / n
    # symbolic: all periodic words of length n cover the space to 2^{-floor((n+1)/2)}
    words = bernoulli_words(n, sys.symbols).points
    return words, 2.0 ** -((n + 1) // 2)


def gauge_supnorm(sys, schedule, f: Observable, k, grid) -> GaugeEstimate:
    """Max over a grid of ``Avg_{F_k} f``; converges to the gauge of ``f >= 0``.

    Parameters
    ----------
    sys : DynamicalSystem
    schedule : FolnerSchedule
    f : Observable
        Real and nonnegative.
    k : int
    grid : int, ndarray or MeasureModel
        Uniform grid size per axis (word length on the shift) or explicit points.

    Raises
    ------
    PreconditionError
        If ``f`` is complex or takes a negative value on the grid.
    """
    P, h = _grid_points(sys, grid)
    if not f.is_real:
        raise PreconditionError("the gauge is defined here for real observables")
    if isinstance(f, Constant):
        if f.value < 0:
            raise PreconditionError("observable must be nonnegative; shift it by its bound")
        F = schedule.folner_set(k)
        return GaugeEstimate(f.value, int(k), int(P.shape[0]), _witness(sys, P[0]), 0.0, F.size)
    if np.min(f.evaluate(P)) < 0:
        raise PreconditionError("observable must be nonnegative; shift it by its bound")
    F = schedule.folner_set(k)
    vals = np.real(avg_field(sys, F, f, P))
    i = int(np.argmax(vals))
    budget = None
    if h is not None and f.holder is not None:
        c, beta = f.holder
        Lsum = float(np.dot(F.weights, np.power(sys.holder.L(F.elements), beta))) / F.size
        budget = c * h ** beta * Lsum
    return GaugeEstimate(float(vals[i]), int(k), int(P.shape[0]), _witness(sys, P[i]), budget,
                         F.size)


def _witness(sys, row):
    return [float(v) for v in row] if sys.space == "torus" else [int(v) for v in row]


# ---------------------------------------------------------------------------
# periodic orbits
# ---------------------------------------------------------------------------

def periodic_orbit_averages(sys, f, max_period):
    """Yield ``(period, representative, orbit average)`` over all periodic points.

    Doubling map: points ``a / (2^p - 1)`` with integer orbit arithmetic.
    Full shift: all words of length ``p``.  Points with a smaller minimal
    period are revisited at larger ``p``; their averages are unchanged.
    """
    if isinstance(sys, DoublingMap) and sys.space_dim == 1:
        for p in range(1, int(max_period) + 1):
            M = (1 << p) - 1
            A = np.arange(M, dtype=np.int64)
            acc = np.zeros(M)
            for i in range(p):
                acc += np.real(f.evaluate(((A << i) % M / M)[:, None]))
            yield p, A / M, acc / p
    elif isinstance(sys, FullShift):
        for p in range(1, int(max_period) + 1):
            W = bernoulli_words(p, sys.symbols).points
            acc = np.zeros(W.shape[0])
            for i in range(p):
                acc += np.real(f.evaluate(np.roll(W, -i, axis=1)))
            yield p, W, acc / p
    else:
        raise UnsupportedError(f"no periodic-orbit enumeration for {type(sys).__name__}")


def gauge_orbit_oracle(sys, f: Observable, max_period) -> float:
    """Best periodic-orbit average of ``f``: a lower bound for the gauge."""
    if not f.is_real:
        raise PreconditionError("the gauge is defined here for real observables")
    if isinstance(f, Constant):
        # still reject unsupported systems
        next(periodic_orbit_averages(sys, f, 1))
        return f.value
    best = -math.inf
    for _, _, avg in periodic_orbit_averages(sys, f, max_period):
        best = max(best, float(avg.max()))
    return best


def periodic_orbit_measures(sys, max_period):
    """Equidistributed measures on each distinct periodic orbit up to ``max_period``."""
    out = []
    if isinstance(sys, DoublingMap) and sys.space_dim == 1:
        seen = set()
        for p in range(1, int(max_period) + 1):
            M = (1 << p) - 1
            for a in range(M):
                orbit = [(a << i) % M for i in range(p)]
                key = min(_reduced(b, M) for b in orbit)
                if key in seen:
                    continue
                seen.add(key)
                pts = sorted(set(b / M for b in orbit))
                out.append((f"periodic orbit of {a}/{M}", discrete("torus", np.array(pts))))
    elif isinstance(sys, FullShift):
        seen = set()
        for p in range(1, int(max_period) + 1):
            for w in bernoulli_words(p, sys.symbols).points:
                word = tuple(int(s) for s in w)
                if _minimal_period(word) != p:
                    continue
                key = min(word[i:] + word[:i] for i in range(p))
                if key in seen:
                    continue
                seen.add(key)
                orbit = np.array([word[i:] + word[:i] for i in range(p)], dtype=np.int64)
                out.append((f"periodic orbit of {''.join(map(str, word))}",
                            discrete("symbolic", orbit, symbols=sys.symbols)))
    else:
        raise UnsupportedError(f"no periodic orbits enumerated for {type(sys).__name__}")
    return out


def _reduced(b, M):
    g = math.gcd(b, M)
    return (b // g, M // g)


def _minimal_period(word):
    p = len(word)
    for d in range(1, p + 1):
        if p % d == 0 and word == word[d:] + word[:d]:
            return d
    return p


# ---------------------------------------------------------------------------
# catalogs, Herman functions, unique ergodicity
# ---------------------------------------------------------------------------

@dataclass
class InvariantMeasureCatalog:
    """Explicit finite list of invariant measures ``(description, model)``."""

    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def add(self, description, model):
        self.entries.append((description, model))
        return self

    def integrals(self, f):
        return [(d, float(np.real(m.integrate(f)))) for d, m in self.entries]

    def invariance_defects(self, sys, f):
        """``|mean(f o T) - mean(f)|`` for each entry (one generator step)."""
        out = []
        g = np.zeros(sys.group_dim, dtype=np.int64)
        g[0] = 1
        for d, m in self.entries:
            moved = sys._orbit(m.points, g)
            out.append((d, abs(m.mean(f.evaluate(moved)) - m.integrate(f))))
        return out

    @classmethod
    def for_system(cls, sys, max_period=6, grid=4096, bernoulli_ps=(0.2, 0.5, 0.8), width=10):
        """Reference measure plus the natural extra invariant measures of ``sys``."""
        cat = cls()
        if isinstance(sys, (TorusTranslation, DoublingMap)):
            cat.add("lebesgue", lebesgue_grid(grid, sys.space_dim))
        if isinstance(sys, DoublingMap):
            for d, m in periodic_orbit_measures(sys, max_period):
                cat.add(d, m)
        if isinstance(sys, FullShift):
            ps = bernoulli_ps if sys.symbols == 2 else (None,)
            for p in ps:
                probs = None if p is None else [p]
                cat.add(f"bernoulli p={p or 'uniform'}", bernoulli_words(width, sys.symbols, probs))
            for d, m in periodic_orbit_measures(sys, max_period):
                cat.add(d, m)
        if isinstance(sys, TrivialAction):
            raise UnsupportedError("every measure is invariant for the trivial action; "
                                   "build the catalog explicitly")
        return cat


def default_gauge_params(sys):
    """``(k, grid)`` whose discretization error is well inside the defaults."""
    if isinstance(sys, DoublingMap):
        return 12, 2 ** 16
    if isinstance(sys, FullShift):
        return 64, 12
    if isinstance(sys, TrivialAction):
        return 1, 1024
    return 10_000, 4096


def gauge_value(sys, f, k=None, grid=None, schedule=None):
    """Gauge estimate of a real ``f`` of any sign via ``Gamma(f + c) - c``."""
    k0, g0 = default_gauge_params(sys)
    k, grid = k or k0, grid or g0
    schedule = schedule or Interval()
    if isinstance(f, Constant):
        return f.value
    c = f.bound
    return gauge_supnorm(sys, schedule, f + c, k, grid).value - c


@dataclass
class HermanReport:
    herman: bool
    spread: float
    m1: float
    m2: float
    tol: float
    integrals: list

    def to_dict(self):
        return asdict(self)


def herman_check(sys, f: Observable, catalog, tol=1e-3, k=None, grid=None) -> HermanReport:
    """Compare ``int f dnu`` over the catalog with the gauges of ``f`` and ``-f``.

    ``spread = m2 - m1``; ``f`` is declared Herman when ``spread <= tol``.
    """
    if len(catalog) == 0:
        raise InvalidInputError("catalog must be nonempty")
    if not f.is_real:
        raise PreconditionError("Herman checks use real observables")
    vals = [v for _, v in catalog.integrals(f)]
    if isinstance(f, Constant):
        m1 = m2 = f.value
    else:
        m2 = max(vals + [gauge_value(sys, f, k, grid)])
        m1 = min(vals + [-gauge_value(sys, -f, k, grid)])
    spread = m2 - m1
    return HermanReport(bool(spread <= tol), float(spread), float(m1), float(m2), tol,
                        catalog.integrals(f))


def default_battery(dim=1, size=20):
    """``1 + cos(2 pi n x)`` and ``1 + sin(2 pi n x)`` for ``n = 1..size/2``."""
    out = []
    for n in range(1, size // 2 + 1):
        out.append((f"1+cos(2pi {n}x)", TrigPolynomial.cosine(n, 1.0, 1.0)))
        out.append((f"1+sin(2pi {n}x)", TrigPolynomial([[n], [-n], [0]], [-0.5j, 0.5j, 1.0])))
    return out


@dataclass
class UEReport:
    verdict: str
    tol: float
    results: list
    witness: str | None = None
    gap: float | None = None

    def to_dict(self):
        return asdict(self)


def unique_ergodicity_probe(sys, battery, model, tol=0.01, k=None, grid=None,
                            schedule=None) -> UEReport:
    """One-sided test: is ``Gamma(f) = int f dmu`` for every battery member?

    ``model`` represents the candidate unique invariant measure.  The
    verdict ``consistent-with-UE`` cannot prove unique ergodicity; ``not-UE``
    comes with the observable that exhibits the gap.
    """
    k0, g0 = default_gauge_params(sys)
    k, grid = k or k0, grid if grid is not None else g0
    schedule = schedule or Interval()
    results, worst = [], None
    for i, item in enumerate(battery):
        name, f = item if isinstance(item, tuple) else (f"f{i}", item)
        est = gauge_supnorm(sys, schedule, f, k, grid)
        integral = float(np.real(model.integrate(f)))
        gap = est.value - integral
        results.append({"name": name, "gauge": est.value, "integral": integral, "gap": gap})
        if worst is None or gap > worst[1]:
            worst = (name, gap)
    if worst is not None and worst[1] > tol:
        return UEReport("not-UE", tol, results, worst[0], worst[1])
    return UEReport("consistent-with-UE", tol, results, None, None if worst is None else worst[1])


def report_json(report) -> str:
    """Serialize a report dataclass as sorted-key JSON."""
    return json.dumps(report.to_dict(), sort_keys=True, ensure_ascii=False)
