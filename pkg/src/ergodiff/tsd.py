"""Temporo-spatial differentiation: spatial averages ``alpha_{C_k}`` of
temporal averages ``Avg_{F_k} f``, compared with the pointwise averages at
the base point, together with the diameter-decay diagnostics and the
construction of divergent region sequences for non-Herman observables.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .averaging import (UNIT, FunctionWeight, MultipleAverageSpec, OrbitAccumulator,
                        SequenceWeight, avg_field, avg_multiple_field, as_folner_set)
from .dynamics import DistortionProfile, FullShift, distortion_bounds
from .errors import (HypothesisUnmetError, NoCounterexampleError, PreconditionError,
                     UnsupportedError, ZeroMeasureError)
from .gauge import gauge_orbit_oracle, gauge_value
from .measure import (Ball, LevelSet, WholeSpace, alpha_values, measure_of,
                      region_quadrature)
from .observables import reflect

#: columns of the CSV trace, in order
TRACE_COLUMNS = ("k", "F_size", "mu_C", "diam", "pointwise_re", "pointwise_im",
                 "spatial_re", "spatial_im", "gap", "bound")

COLUMN_HELP = {
    "k": "index of the schedule step",
    "F_size": "|F_k| counted with multiplicity",
    "mu_C": "measure of the spatial region C_k in the model",
    "diam": "declared diameter bound of C_k",
    "pointwise_re": "real part of the temporal average at the base point",
    "pointwise_im": "imaginary part of the temporal average at the base point",
    "spatial_re": "real part of alpha_{C_k}(Avg_{F_k} f)",
    "spatial_im": "imaginary part of alpha_{C_k}(Avg_{F_k} f)",
    "gap": "|pointwise - spatial|",
    "bound": "Holder bound on the gap (empty when no Holder data)",
}

# rounding allowance added to the Holder bound when checking dominance
ROUND_TOL = 1e-12


@dataclass
class TsdRow:
    k: int
    F_size: float
    mu_C: float
    diam: float
    pointwise: complex
    spatial: complex
    gap: float
    bound: float | None
    region: dict = field(default_factory=dict)

    def csv_row(self):
        b = "" if self.bound is None else repr(float(self.bound))
        p, s = complex(self.pointwise), complex(self.spatial)
        return [str(self.k), repr(float(self.F_size)), repr(float(self.mu_C)),
                repr(float(self.diam)), repr(p.real), repr(p.imag), repr(s.real),
                repr(s.imag), repr(float(self.gap)), b]


@dataclass
class TsdTrace:
    rows: list = field(default_factory=list)
    status: str = "ok"

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def ks(self):
        return np.array([r.k for r in self.rows])

    @property
    def spatial(self):
        return np.array([complex(r.spatial) for r in self.rows])

    @property
    def pointwise(self):
        return np.array([complex(r.pointwise) for r in self.rows])

    @property
    def gaps(self):
        return np.array([r.gap for r in self.rows])

    def bound_violations(self, tol=ROUND_TOL):
        """Rows whose gap exceeds the Holder bound plus ``tol``."""
        return [r for r in self.rows if r.bound is not None and r.gap > r.bound + tol]

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\r\n")
        wr.writerow(TRACE_COLUMNS)
        for r in self.rows:
            wr.writerow(r.csv_row())
        return buf.getvalue()


# ---------------------------------------------------------------------------
# bounds and decay
# ---------------------------------------------------------------------------

def _log_terms(sys, F, diam, beta):
    """``beta * log(L(g) diam^{H(g)})`` per distinct element of ``F``."""
    E = F.elements
    with np.errstate(divide="ignore"):
        return beta * (sys.holder.log_L(E) + sys.holder.H(E) * math.log(diam))


def quantitative_bound(sys, F, region, f, weight=UNIT):
    """``(c/|F|) sum_{g in F} |a_g| L(g)^beta diam(C)^{beta H(g)}``.

    ``region`` may be a Region or a diameter.  With a function weight
    ``xi`` carrying Holder data ``(c_xi, b_xi)`` the extra term
    ``(M c_xi/|F|) sum |g| diam^{b_xi}`` from ``|xi^g(x) - xi^g(y)| <= |g| |xi(x) - xi(y)|``
    is added.

    Raises
    ------
    UnsupportedError
        If ``f`` (or a function weight) has no Holder data.
    """
    if f.holder is None:
        raise UnsupportedError("observable carries no Holder data")
    F = as_folner_set(F, sys.group_dim)
    diam = float(region) if np.isscalar(region) else region.diam_bound(sys.diameter)
    if diam == 0.0:
        return 0.0
    c, beta = f.holder
    with np.errstate(over="ignore"):
        terms = np.exp(_log_terms(sys, F, diam, beta))
    mult = F.weights.copy()
    if isinstance(weight, SequenceWeight):
        mult = mult * np.abs(weight.values(F.elements[:, 0]))
    total = c * float(np.dot(mult, terms)) / F.size
    if isinstance(weight, FunctionWeight):
        if weight.xi.holder is None:
            raise UnsupportedError("weight function carries no Holder data")
        cx, bx = weight.xi.holder
        js = np.abs(F.elements[:, 0]).astype(float)
        total += f.bound * cx * diam ** bx * float(np.dot(F.weights, js)) / F.size
    return total


@dataclass
class DecayReport:
    ks: list
    deltas: list
    fractions: list          # fractions[i][d] for ks[i], deltas[d]
    threshold: float
    tail_max: list
    passed: bool
    weighted: bool = False

    def to_dict(self):
        return asdict(self)


def decay_fractions(sys, F, diam, deltas, weights=None, x0=None):
    """Per-delta share of ``F`` whose transported diameter exceeds ``delta``."""
    if x0 is None:
        D = distortion_bounds(sys, F.elements, diam)
    else:
        prof = DistortionProfile(sys, x0)
        D = np.array([prof(g, diam) for g in F.elements])
    mult = F.weights.copy()
    if weights is not None:
        mult = mult * np.abs(weights.values(F.elements[:, 0]))
    return [float(np.dot(mult, D > d)) / F.size for d in deltas]


def decay_check(sys, schedule, family, x0, deltas, ks, weights=None, threshold=0.01,
                use_profile=False) -> DecayReport:
    """Fractions ``|{g in F_k : L(g) diam(C_k)^H(g) > delta}| / |F_k|``.

    Passes when, for every delta, the max over the last quarter of the
    window is at most ``threshold``.  ``use_profile`` replaces the Holder
    bound by the sampled distortion profile at ``x0``.
    """
    ks = [int(k) for k in ks]
    if not ks:
        raise PreconditionError("decay window must be nonempty")
    deltas = sorted(float(d) for d in deltas)
    fr = []
    for k in ks:
        F = schedule.folner_set(k)
        diam = family.region(k, x0).diam_bound(sys.diameter)
        fr.append(decay_fractions(sys, F, diam, deltas, weights, x0 if use_profile else None))
    tail = _tail(len(ks))
    arr = np.array(fr)
    tail_max = arr[tail:].max(axis=0).tolist()
    passed = bool(all(t <= threshold for t in tail_max))
    return DecayReport(ks, deltas, fr, threshold, tail_max, passed, weights is not None)


def _tail(n):
    """Start index of the last quarter of a window of length ``n``."""
    return n - max(1, n // 4)


# ---------------------------------------------------------------------------
# TSD runs
# ---------------------------------------------------------------------------

def run_tsd(sys, model, schedule, family, x0, f, w=UNIT, k_max=None, ks=None,
            backend=None) -> TsdTrace:
    """Trace of ``alpha_{C_k(x0)}(Avg^w_{F_k} f)`` against ``Avg^w_{F_k} f(x0)``.

    Runs over ``ks`` (default ``1..k_max``).  Nested schedules are advanced
    incrementally; the spatial average is also incremental while the region
    nodes do not change with ``k`` (whole space, constant balls).

    Raises
    ------
    ZeroMeasureError
        Naming the first ``k`` whose region has zero measure.
    """
    if ks is None:
        ks = range(1, int(k_max) + 1)
    ks = sorted(int(k) for k in ks)
    x0_pts = sys.as_points(x0)
    incremental = schedule.nested
    point_acc = OrbitAccumulator(sys, f, x0_pts, w, backend)
    acc_k = 0
    space_acc, space_key, space_k = None, None, 0
    trace = TsdTrace()
    for k in ks:
        F = schedule.folner_set(k)
        C = family.region(k, x0_pts[0])
        P, wn, mass = region_quadrature(model, C)
        if mass == 0.0:
            raise ZeroMeasureError(f"region C_{k} = {C.describe()} has zero measure", k=k)
        # temporal average at the base point
        if incremental:
            for j in range(acc_k + 1, k + 1):
                point_acc.add(schedule.increment(j))
            acc_k = k
        else:
            point_acc = OrbitAccumulator(sys, f, x0_pts, w, backend).add(F)
        pointwise = complex(point_acc.mean()[0])
        # spatial average of the temporal average
        key = repr(C.describe())
        if incremental and space_acc is not None and key == space_key:
            for j in range(space_k + 1, k + 1):
                space_acc.add(schedule.increment(j))
        else:
            space_acc = OrbitAccumulator(sys, f, P, w, backend).add(F)
            space_key = key
        space_k = k
        spatial = complex(alpha_values(wn, np.asarray(space_acc.mean())))
        diam = C.diam_bound(sys.diameter)
        bound = None
        if f.holder is not None:
            try:
                bound = quantitative_bound(sys, F, diam, f, w)
            except UnsupportedError:
                bound = None
        trace.rows.append(TsdRow(k, F.size, min(1.0, mass), diam, pointwise, spatial,
                                 abs(pointwise - spatial), bound, C.describe()))
    return trace


def random_tsd_experiment(sys, model, schedule, family, f, base_points, w=UNIT, k=1000,
                          eps=0.05, deltas=(0.1, 0.01), decay_window=None, threshold=0.01,
                          limit=None, backend=None):
    """Sampled surrogate of the almost-sure convergence statements.

    For each base point ``x`` the gap ``|Avg f(x) - alpha_{C_k(x)}(Avg f)|`` at
    step ``k`` is compared with ``eps``.  When ``limit`` (e.g. the integral of
    ``f`` for a uniquely ergodic system) is given, the distance of the spatial
    value to it is reported as well.  Nothing is asserted when the decay
    hypothesis fails on the window.
    """
    P = sys.as_points(base_points)
    window = decay_window or list(range(max(1, 3 * k // 4), k + 1))
    report = decay_check(sys, schedule, family, P[0], deltas, window, threshold=threshold)
    summary = {"k": int(k), "eps": eps, "n_points": int(P.shape[0]),
               "decay": {"passed": report.passed, "tail_max": report.tail_max}}
    if not report.passed:
        summary.update(status="hypothesis-unmet", fraction_passing=None)
        return summary
    F = schedule.folner_set(k)
    pointwise = np.asarray(avg_field(sys, F, f, P, w, backend), dtype=complex)
    gaps, limit_err, spatial = [], [], []
    for i in range(P.shape[0]):
        C = family.region(k, P[i])
        Q, wn, mass = region_quadrature(model, C)
        if mass == 0.0:
            raise ZeroMeasureError(f"region around base point {i} has zero measure", k=k)
        s = complex(alpha_values(wn, np.asarray(avg_field(sys, F, f, Q, w, backend))))
        spatial.append(s)
        gaps.append(abs(s - pointwise[i]))
        if limit is not None:
            limit_err.append(abs(s - limit))
    ok = [g <= eps for g in gaps]
    if limit is not None:
        ok = [a and e <= eps for a, e in zip(ok, limit_err)]
    summary.update(status="ok", fraction_passing=float(np.mean(ok)), max_gap=float(max(gaps)),
                   gaps=[float(g) for g in gaps],
                   pointwise=[[float(z.real), float(z.imag)] for z in pointwise])
    if limit is not None:
        summary["max_limit_error"] = float(max(limit_err))
    return summary


# ---------------------------------------------------------------------------
# multiple averages
# ---------------------------------------------------------------------------

def multiple_bound(spec: MultipleAverageSpec, k, diam):
    """``M^L (1/k) sum_j [c_0 d^b0 + sum_l c_l L_l(n_j)^b_l d^{b_l H_l(n_j)}]``."""
    if diam == 0.0:
        return 0.0
    fs = [spec.f0] + list(spec.fs)
    if any(f.holder is None for f in fs):
        return None
    js = np.arange(k)
    c0, b0 = spec.f0.holder
    total = c0 * diam ** b0 * k
    for T, seq, f in zip(spec.maps, spec.indices, spec.fs):
        c, b = f.holder
        n = seq(js)[:, None]
        with np.errstate(over="ignore"):
            total += c * float(np.exp(b * (T.holder.log_L(n) + T.holder.H(n) * math.log(diam))).sum())
    return spec.bound ** spec.L * total / k


def multiple_tsd(spec: MultipleAverageSpec, model, family, x0, ks, deltas=(0.1, 0.01),
                 threshold=0.01, backend=None) -> TsdTrace:
    """Trace of the spatial average of a multiple ergodic average.

    Raises
    ------
    HypothesisUnmetError
        If for some map the share of ``j < k`` with ``diam(T_l^{n_j} C_k) > delta``
        does not decay on the window.
    """
    ks = sorted(int(k) for k in ks)
    T0 = spec.maps[0]
    x0_pts = T0.as_points(x0)
    tail = _tail(len(ks))
    for ell, (T, seq) in enumerate(zip(spec.maps, spec.indices)):
        for k in ks[tail:]:
            diam = family.region(k, x0_pts[0]).diam_bound(T.diameter)
            n = seq(np.arange(k))[:, None]
            D = distortion_bounds(T, n, diam)
            for d in deltas:
                if float(np.mean(D > d)) > threshold:
                    raise HypothesisUnmetError(
                        f"decay fails for map {ell + 1} at k={k}, delta={d}")
    trace = TsdTrace()
    for k in ks:
        C = family.region(k, x0_pts[0])
        P, wn, mass = region_quadrature(model, C)
        if mass == 0.0:
            raise ZeroMeasureError(f"region C_{k} has zero measure", k=k)
        pointwise = complex(avg_multiple_field(spec, k, x0_pts, backend)[0])
        spatial = complex(alpha_values(wn, avg_multiple_field(spec, k, P, backend)))
        diam = C.diam_bound(T0.diameter)
        trace.rows.append(TsdRow(k, float(k), min(1.0, mass), diam, pointwise, spatial,
                                 abs(pointwise - spatial), multiple_bound(spec, k, diam),
                                 C.describe()))
    return trace


# ---------------------------------------------------------------------------
# counterexamples
# ---------------------------------------------------------------------------

@dataclass
class CounterexamplePlan:
    L: float
    M: float
    integral: float
    gauge: float
    K: int
    reflected: bool
    shrink: bool
    kinds: list              # per k: "whole", "V" (superlevel) or "W" (sublevel)
    regions: list
    mu: list
    trace: TsdTrace
    limsup: float
    liminf: float

    @property
    def oscillation(self):
        return self.limsup - self.liminf

    def to_dict(self):
        return {"L": self.L, "M": self.M, "integral": self.integral, "gauge": self.gauge,
                "K": self.K, "reflected": self.reflected, "shrink": self.shrink,
                "limsup": self.limsup, "liminf": self.liminf,
                "oscillation": self.oscillation, "window": [int(self.trace.ks[0]),
                                                            int(self.trace.ks[-1])]}


def _gauge_of(sys, f, gauge_k, gauge_grid, max_period):
    g = gauge_value(sys, f, gauge_k, gauge_grid)
    try:
        g = max(g, gauge_orbit_oracle(sys, f, max_period))
    except UnsupportedError:
        pass
    return g


def build_counterexample(sys, model, schedule, f, grid=None, shrink=False, k_max=200,
                         L=None, M=None, tol=1e-3, gauge_k=None, max_period=10,
                         k_min_shrink_check=1, backend=None) -> CounterexamplePlan:
    """Regions along which the TSD sequence of a non-Herman ``f`` oscillates.

    For ``k >= K`` the region is ``V_k = {Avg_{F_k} f > M}`` at odd ``k`` and
    ``W_k = {Avg_{F_k} f < L}`` at even ``k``; before ``K`` it is the whole
    space.  ``K`` is the first index from which every ``V_k`` in the window
    has positive model measure.  With ``shrink`` each region is replaced by a
    ball around a witness sample, inside the region, whose measure is at
    most ``min(previous, 1/k)``.

    Raises
    ------
    NoCounterexampleError
        If the interval between the integral and the gauge is (numerically)
        empty for ``f`` and for its reflection.
    """
    if not f.is_real:
        raise PreconditionError("counterexamples are built for real observables")
    integral = float(model.integrate(f))
    gauge = _gauge_of(sys, f, gauge_k, grid, max_period)
    reflected = False
    if gauge - integral <= tol:
        g = reflect(f)
        gi = float(model.integrate(g))
        gg = _gauge_of(sys, g, gauge_k, grid, max_period)
        if gg - gi <= tol:
            raise NoCounterexampleError(
                f"observable looks Herman: gauge {gauge:.6g} vs integral {integral:.6g}")
        f, integral, gauge, reflected = g, gi, gg, True
    if L is None:
        L = integral + (gauge - integral) / 3.0
    if M is None:
        M = integral + 2.0 * (gauge - integral) / 3.0
    if not integral < L < M < gauge + tol:
        raise PreconditionError(f"thresholds must satisfy integral < L < M < gauge, "
                                f"got {integral}, {L}, {M}, {gauge}")

    ks = list(range(1, int(k_max) + 1))
    # first pass: which V_k are nonempty, and the unshrunk candidate rows
    cand = {}
    nonempty_V = []
    for k, a in _sample_averages(sys, model, schedule, f, ks, backend):
        masks = {"V": a > M, "W": a < L, "whole": np.ones(a.size, dtype=bool)}
        nonempty_V.append(bool(masks["V"].any()))
        if not shrink:
            row = {}
            for kind, mask in masks.items():
                if mask.any():
                    w = model.weights[mask]
                    mu = float(np.sum(w))
                    vals = a[mask]
                    pick = np.argmin(vals) if kind == "W" else np.argmax(vals)
                    row[kind] = (mu, alpha_values(w / mu, vals), float(vals[pick]))
            cand[k] = row
    K = None
    for i in range(len(ks) - 1, -1, -1):
        if not nonempty_V[i]:
            break
        K = ks[i]
    if K is None:
        raise NoCounterexampleError(f"no sample has Avg f > M={M} at the end of the window")

    def kind_of(k):
        return "whole" if k < K else ("V" if k % 2 == 1 else "W")

    def describe(kind):
        if kind == "whole":
            return WholeSpace().describe()
        t, d = (M, ">") if kind == "V" else (L, "<")
        return {"kind": "level", "threshold": t, "direction": d, "of": "temporal average"}

    trace = TsdTrace()
    kinds, regions, mus = [], [], []
    if not shrink:
        for k in ks:
            kind = kind_of(k)
            if kind not in cand[k]:
                raise NoCounterexampleError(f"region {kind}_{k} is empty in the model")
            mu, spatial, pointwise = cand[k][kind]
            desc = describe(kind)
            kinds.append(kind)
            regions.append(desc)
            mus.append(mu)
            diam = sys.diameter
            trace.rows.append(TsdRow(k, schedule.folner_set(k).size, mu, diam, pointwise,
                                     spatial, abs(pointwise - spatial), None, desc))
    else:
        prev_mu, prev_r = 1.0, sys.diameter
        for k, a in _sample_averages(sys, model, schedule, f, ks, backend):
            kind = kind_of(k)
            region, mu, prev_r, vals, wn, wit = _shrink(sys, model, schedule, f, k, kind, a, M, L,
                                                        min(prev_mu, 1.0 / k), prev_r, backend)
            prev_mu = mu
            spatial = alpha_values(wn, vals)
            pointwise = float(a[wit])
            kinds.append(kind)
            regions.append(region.describe())
            mus.append(mu)
            trace.rows.append(TsdRow(k, schedule.folner_set(k).size, mu,
                                     region.diam_bound(sys.diameter), pointwise, spatial,
                                     abs(pointwise - spatial), None, region.describe()))
    sp = np.real(trace.spatial)
    t0 = _tail(len(sp))
    return CounterexamplePlan(float(L), float(M), integral, float(gauge), int(K), reflected,
                              bool(shrink), kinds, regions, mus, trace,
                              float(sp[t0:].max()), float(sp[t0:].min()))


def _sample_averages(sys, model, schedule, f, ks, backend):
    """Yield ``(k, Avg_{F_k} f at every sample)``, incrementally when nested."""
    if schedule.nested:
        acc = OrbitAccumulator(sys, f, model.points, UNIT, backend)
        done = 0
        for k in ks:
            for j in range(done + 1, k + 1):
                acc.add(schedule.increment(j))
            done = k
            yield k, np.real(acc.mean())
    else:
        for k in ks:
            yield k, np.real(avg_field(sys, schedule.folner_set(k), f, model.points,
                                       backend=backend))


def _resolution(sys, model):
    """Radius below which balls around samples stop shrinking in the model."""
    if model.space == "symbolic":
        return 2.0 ** -(model.dim // 2 + 1)
    return 0.0


def _shrink(sys, model, schedule, f, k, kind, a, M, L, cap, r_start, backend, tries=64):
    """Ball around a witness sample contained in the region, with mass ``<= cap``.

    Candidates are tried from the most extreme average inward; for each the
    radius starts at the previous accepted radius and is halved until the
    ball lies inside the region and is light enough.
    """
    if kind == "W":
        key_vals = a
        inside = lambda v: v < L
    else:
        key_vals = -a
        inside = (lambda v: v > M) if kind == "V" else (lambda v: np.ones(np.shape(v), bool))
    top = min(key_vals.size, 4 * tries)
    head = np.argpartition(key_vals, top - 1)[:top] if top < key_vals.size else np.arange(top)
    order = head[np.lexsort((head, key_vals[head]))]
    F = schedule.folner_set(k)
    seen = set()
    for idx in order[: 4 * tries]:
        key = model.points[idx].tobytes()
        if key in seen:
            continue
        seen.add(key)
        if len(seen) > tries:
            break
        r = r_start
        last = None
        for _ in range(80):
            B = Ball(model.points[idx], r)
            P, wn, mass = region_quadrature(model, B)
            if 0.0 < mass <= cap:
                if model.local_nodes and model.space == "torus":
                    vals = np.real(avg_field(sys, F, f, P, backend=backend))
                else:
                    vals = a[B.mask(model)]
                if np.all(inside(vals)):
                    return B, mass, r, vals, wn, int(idx)
            elif mass == 0.0:
                break
            if last is not None and mass == last and r < _resolution(sys, model):
                # the ball no longer changes as it shrinks
                break
            last = mass
            r = r / 2.0
    raise NoCounterexampleError(f"could not shrink the region at k={k} below mass {cap}")
