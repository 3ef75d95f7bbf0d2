"""Magnetic curvature operators, scalar curvature functions, and scans.

The magnetic curvature operator at energy k combines the Riemannian
curvature with first-order (via the covariant derivative of the Lorentz
operator) and zeroth-order (quadratic in the Lorentz operator) magnetic
terms.  Its quadratic form on unit orthogonal pairs is the k-magnetic
sectional curvature; its trace on the orthogonal complement of a unit
direction is the k-magnetic Ricci curvature.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from . import geom
from .errors import FrameError
from .io import dump_csv, dump_json

POSITIVITY_GUARD = 1e-12
_UNIT_TOL = 1e-8


def _check_frame(sys, x, v, w=None):
    if abs(sys.norm(x, v) - 1.0) > _UNIT_TOL:
        raise FrameError("frame violation: |v|_g != 1")
    if w is not None and abs(sys.inner(x, v, w)) > _UNIT_TOL * max(1.0, sys.norm(x, w)):
        raise FrameError("frame violation: <v,w>_g != 0")


def a_omega(sys, x, v, w):
    """Zeroth-order magnetic operator
    A(v, w) = 3/4 <w, Om v> Om v - 1/4 Om^2 w - 1/4 <Om w, Om v> v."""
    _check_frame(sys, x, v, w)
    g = sys.metric_at(x)
    om = geom.lorentz_matrix(sys, x)
    ov, ow = om @ v, om @ w
    return (0.75 * float(w @ g @ ov) * ov
            - 0.25 * (om @ ow)
            - 0.25 * float(ow @ g @ ov) * np.asarray(v, float))


def r_omega_k(sys, x, v, w, k):
    """First-order magnetic operator
    R_k(v, w) = 2k R(w,v)v - sqrt(2k) [ (D_w Om)(v) - 1/2 (D_v Om)(w)
                + 1/2 <(D_v Om)(w), v> v ]."""
    _check_frame(sys, x, v, w)
    if k <= 0:
        raise ValueError("energy k must be positive")
    g = sys.metric_at(x)
    rw = geom.riemann(sys, x, w, v, v)
    dom = geom.nabla_omega_tensor(sys, x)
    dwv = np.einsum("kji,i,j->k", dom, w, v)
    dvw = np.einsum("kji,i,j->k", dom, v, w)
    v = np.asarray(v, float)
    return (2.0 * k * rw
            - np.sqrt(2.0 * k) * (dwv - 0.5 * dvw + 0.5 * float(dvw @ g @ v) * v))


def m_omega_k(sys, x, v, w, k):
    """Magnetic curvature operator M_k = R_k + A applied to (v, w)."""
    return r_omega_k(sys, x, v, w, k) + a_omega(sys, x, v, w)


def sec_omega_k(sys, x, v, w, k):
    """k-magnetic sectional curvature of the unit orthogonal pair (v, w):

        2k Sec(v,w) - sqrt(2k) <(D_w Om)(v), w> + 3/4 <w, Om v>^2 + 1/4 |Om w|^2
    """
    _check_frame(sys, x, v, w)
    if abs(sys.norm(x, w) - 1.0) > _UNIT_TOL:
        raise FrameError("frame violation: |w|_g != 1")
    if k <= 0:
        raise ValueError("energy k must be positive")
    g = sys.metric_at(x)
    om = geom.lorentz_matrix(sys, x)
    sec = float(geom.riemann(sys, x, w, v, v) @ g @ w)
    dwv = geom.nabla_omega(sys, x, w, v)
    ov, ow = om @ v, om @ w
    return (2.0 * k * sec
            - np.sqrt(2.0 * k) * float(dwv @ g @ w)
            + 0.75 * float(w @ g @ ov) ** 2
            + 0.25 * float(ow @ g @ ow))


def sec_quadratic(sys, x, v, w, k):
    """<M_k(v, w), w> for w orthogonal to unit v, without normalizing w.

    Quadratic in w; for unit w it equals ``sec_omega_k``.  This is the
    removable form used inside the loop-space Hessian where fields may
    vanish at isolated nodes.
    """
    g = sys.metric_at(x)
    return float(m_omega_k_unnormalized(sys, x, v, w, k) @ g @ np.asarray(w, float))


def m_omega_k_unnormalized(sys, x, v, w, k):
    # identical to m_omega_k but skips the unit-w check (w may be any
    # vector orthogonal to v; the result is linear in w)
    _check_frame(sys, x, v, w)
    g = sys.metric_at(x)
    om = geom.lorentz_matrix(sys, x)
    rw = geom.riemann(sys, x, w, v, v)
    dom = geom.nabla_omega_tensor(sys, x)
    dwv = np.einsum("kji,i,j->k", dom, w, v)
    dvw = np.einsum("kji,i,j->k", dom, v, w)
    v = np.asarray(v, float)
    ov, ow = om @ v, om @ w
    r_part = (2.0 * k * rw
              - np.sqrt(2.0 * k) * (dwv - 0.5 * dvw + 0.5 * float(dvw @ g @ v) * v))
    a_part = (0.75 * float(w @ g @ ov) * ov - 0.25 * (om @ ow)
              - 0.25 * float(ow @ g @ ov) * v)
    return r_part + a_part


def ric_omega_k(sys, x, v, k):
    """k-magnetic Ricci curvature: trace of w -> <M_k(v, w), w> over an
    orthonormal basis of the orthogonal complement of unit v."""
    _check_frame(sys, x, v)
    if k <= 0:
        raise ValueError("energy k must be positive")
    frame = geom.orthonormal_completion(sys, x, v)
    g = sys.metric_at(x)
    total = 0.0
    for i in range(1, sys.dim):
        e = frame[:, i]
        total += float(m_omega_k(sys, x, v, e, k) @ g @ e)
    return total


def ric_omega_k_trace(sys, x, v, k):
    """Trace-formula route: 2k Ric(v) - sqrt(2k) trace((D Om)(v)) + trace A(v, .).

    Independent of ``ric_omega_k``'s basis summation; the two must agree.
    """
    _check_frame(sys, x, v)
    dom = geom.nabla_omega_tensor(sys, x)
    v = np.asarray(v, float)
    tr_dom = float(np.einsum("iji,j->", dom, v))
    return (2.0 * k * geom.ricci(sys, x, v)
            - np.sqrt(2.0 * k) * tr_dom
            + trace_a_omega(sys, x, v))


def trace_a_omega(sys, x, v):
    """trace A(v, .) = sum_i <e_i, Om v>^2 + 1/4 sum_ij <Om e_i, e_j>^2
    over an orthonormal completion {v, e_2, ..., e_n}; always >= 0, and
    zero exactly when Om vanishes at x."""
    _check_frame(sys, x, v)
    frame = geom.orthonormal_completion(sys, x, v)
    g = sys.metric_at(x)
    om = geom.lorentz_matrix(sys, x)
    ov = om @ np.asarray(v, float)
    total = 0.0
    for i in range(1, sys.dim):
        total += float(frame[:, i] @ g @ ov) ** 2
    for i in range(1, sys.dim):
        oei = om @ frame[:, i]
        for j in range(1, sys.dim):
            total += 0.25 * float(oei @ g @ frame[:, j]) ** 2
    return total


# ---------------------------------------------------------------------------
# surface specialization


def rotation_operator(metric):
    """J = g^{-1} mu for an oriented surface chart, mu_ij = sqrt(det g) eps_ij.

    J is g-orthogonal with J^2 = -I; the Lorentz operator of sigma = b mu
    is Om = b J.
    """
    g = np.asarray(metric, dtype=float)
    mu = np.sqrt(np.linalg.det(g)) * np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.linalg.solve(g, mu)


def field_strength(sys, x):
    """b(x) with sigma = b * volume form (surface charts only)."""
    if sys.dim != 2:
        raise ValueError("field_strength requires a surface system")
    g = sys.metric_at(x)
    return float(sys.two_form_at(x)[0, 1] / np.sqrt(np.linalg.det(g)))


def field_strength_gradient(sys, x):
    """Coordinate gradient db_i = d_i b via the system's derivative scheme."""
    if sys.dim != 2:
        raise ValueError("field_strength_gradient requires a surface system")
    g = sys.metric_at(x)
    dg = sys.dmetric_at(x)
    dsig = sys.dtwo_form_at(x)
    det = float(np.linalg.det(g))
    ginv = sys.inverse_metric_at(x)
    s12 = float(sys.two_form_at(x)[0, 1])
    out = np.zeros(2)
    for i in range(2):
        ddet = det * float(np.trace(ginv @ dg[:, :, i]))
        out[i] = dsig[0, 1, i] / np.sqrt(det) - 0.5 * s12 * ddet / det ** 1.5
    return out


def gauss_curvature(sys, x):
    """Gaussian curvature of a surface chart."""
    if sys.dim != 2:
        raise ValueError("gauss_curvature requires a surface system")
    frame = geom.coordinate_frame(sys, x)
    return geom.sectional(sys, x, frame[:, 0], frame[:, 1])


def surface_sec_b(K, b, db, v, k, metric=None):
    """Surface formula 2k K - sqrt(2k) db(J v) + b^2 for a unit vector v.

    ``db`` is the coordinate gradient covector of the field strength and
    ``metric`` the 2x2 metric at the point (identity when omitted, i.e.
    components in an oriented orthonormal frame).
    """
    if k <= 0:
        raise ValueError("energy k must be positive")
    v = np.asarray(v, dtype=float)
    if v.shape != (2,):
        raise ValueError("surface formula requires a 2-dimensional vector")
    g = np.eye(2) if metric is None else np.asarray(metric, dtype=float)
    jv = rotation_operator(g) @ v
    return 2.0 * k * float(K) - np.sqrt(2.0 * k) * float(np.asarray(db, float) @ jv) + float(b) ** 2


def surface_sec(sys, x, v, k):
    """Evaluate the surface formula from a charted surface system."""
    return surface_sec_b(gauss_curvature(sys, x),
                         field_strength(sys, x),
                         field_strength_gradient(sys, x),
                         v, k, metric=sys.metric_at(x))


# ---------------------------------------------------------------------------
# sampling and scans


@dataclass(frozen=True)
class CurvatureSample:
    """Curvature values at one unit-sphere-bundle point."""

    x: np.ndarray
    v: np.ndarray
    k: float
    ric: float
    traceA: float
    w: Optional[np.ndarray] = None
    sec: Optional[float] = None


def curvature_sample(sys, x, v, k, w=None):
    sec = sec_omega_k(sys, x, v, w, k) if w is not None else None
    return CurvatureSample(x=np.asarray(x, float), v=np.asarray(v, float), k=float(k),
                           ric=ric_omega_k(sys, x, v, k),
                           traceA=trace_a_omega(sys, x, v),
                           w=None if w is None else np.asarray(w, float), sec=sec)


def _sample_box(sys, box):
    if box is not None:
        return [(float(lo), float(hi)) for lo, hi in box]
    if sys.lattice is not None:
        return [(0.0, float(p)) if p else (-1.0, 1.0) for p in sys.lattice]
    return [(-1.0, 1.0)] * sys.dim


def sample_points_directions(sys, n_samples, seed, box=None, pairs=False):
    """Seeded Halton points in the chart box with g-uniform unit directions.

    Returns a list of (x, v) or (x, v, w) tuples with v (and w) unit and
    mutually g-orthogonal.
    """
    bounds = _sample_box(sys, box)
    halton = qmc.Halton(d=sys.dim, seed=seed)
    pts = halton.random(n_samples)
    rng = np.random.default_rng(seed + 1)
    out = []
    for row in pts:
        x = np.array([lo + (hi - lo) * t for (lo, hi), t in zip(bounds, row)])
        frame = geom.coordinate_frame(sys, x)
        z = rng.standard_normal(sys.dim)
        v = frame @ (z / np.linalg.norm(z))
        if not pairs:
            out.append((x, v))
            continue
        g = sys.metric_at(x)
        for _ in range(50):
            z2 = rng.standard_normal(sys.dim)
            w = frame @ z2
            w = w - float(w @ g @ v) * v
            nw = float(np.sqrt(max(w @ g @ w, 0.0)))
            if nw > 1e-8:
                out.append((x, v, w / nw))
                break
        else:
            raise FrameError("degenerate frame")
    return out


@dataclass
class ScanReport:
    """Sampled minima of Sec_k and Ric_k over a k-grid."""

    k_grid: list
    min_sec: list
    min_ric: list
    argmin_sec: list
    argmin_ric: list
    k0_sec: float
    k0_ric: float
    n_samples: int
    seed: int
    system: str = ""

    def to_json(self, path=None):
        payload = {
            "schema_version": 1,
            "kind": "scan_report",
            "system": self.system,
            "k_grid": [float(k) for k in self.k_grid],
            "min_sec": [float(v) for v in self.min_sec],
            "min_ric": [float(v) for v in self.min_ric],
            "argmin_sec": [[float(c) for c in x] for x in self.argmin_sec],
            "argmin_ric": [[float(c) for c in x] for x in self.argmin_ric],
            "k0_sec": float(self.k0_sec),
            "k0_ric": float(self.k0_ric),
            "n_samples": self.n_samples,
            "seed": self.seed,
        }
        if path:
            dump_json(path, payload)
        return json.dumps(payload, sort_keys=True)

    def to_csv(self, path):
        header = ["k", "min_sec", "min_ric", "argmin_sec", "argmin_ric"]
        rows = []
        for i, k in enumerate(self.k_grid):
            rows.append([k, self.min_sec[i], self.min_ric[i],
                         " ".join(repr(float(c)) for c in self.argmin_sec[i]),
                         " ".join(repr(float(c)) for c in self.argmin_ric[i])])
        dump_csv(path, header, rows)


def _positivity_prefix(k_grid, minima):
    k0 = 0.0
    for k, m in zip(k_grid, minima):
        if m > POSITIVITY_GUARD:
            k0 = float(k)
        else:
            break
    return k0


def positivity_scan(sys, k_grid, sample_budget, seed, box=None):
    """Estimate min Sec_k over sampled unit orthogonal pairs and min Ric_k
    over sampled unit directions, for each k in the grid.

    Reports the largest grid prefix on which each sampled minimum stays
    strictly positive (guarded against roundoff).  The sampled minimum is
    an under-approximation of the true infimum: a positive report is
    evidence, not proof.
    """
    k_grid = [float(k) for k in k_grid]
    if not k_grid:
        raise ValueError("empty k grid")
    if any(b <= a for a, b in zip(k_grid, k_grid[1:])) or k_grid[0] <= 0:
        raise ValueError("k grid must be strictly increasing and positive")
    if sample_budget <= 0:
        raise ValueError("sample budget must be positive")

    pair_samples = sample_points_directions(sys, sample_budget, seed, box, pairs=True)
    dir_samples = sample_points_directions(sys, sample_budget, seed + 10007, box)

    # k-independent pieces: evaluate the k-free data once per sample
    min_sec, min_ric, arg_sec, arg_ric = [], [], [], []
    for k in k_grid:
        best_sec, best_sec_x = np.inf, None
        for x, v, w in pair_samples:
            val = sec_omega_k(sys, x, v, w, k)
            if val < best_sec:
                best_sec, best_sec_x = val, x
        best_ric, best_ric_x = np.inf, None
        for x, v in dir_samples:
            val = ric_omega_k(sys, x, v, k)
            if val < best_ric:
                best_ric, best_ric_x = val, x
        min_sec.append(float(best_sec))
        min_ric.append(float(best_ric))
        arg_sec.append(np.asarray(best_sec_x))
        arg_ric.append(np.asarray(best_ric_x))

    return ScanReport(k_grid=k_grid, min_sec=min_sec, min_ric=min_ric,
                      argmin_sec=arg_sec, argmin_ric=arg_ric,
                      k0_sec=_positivity_prefix(k_grid, min_sec),
                      k0_ric=_positivity_prefix(k_grid, min_ric),
                      n_samples=sample_budget, seed=seed, system=sys.name)


@dataclass
class TheoremBReport:
    """Low-energy surface positivity scan against the field zero set."""

    k_grid: list
    min_sec: list
    positive: list
    zero_set: list
    b_has_zero: bool
    b_has_nonzero: bool
    dichotomy_warning: bool
    grid_shape: tuple
    system: str = ""

    def to_json(self, path=None):
        payload = {
            "schema_version": 1,
            "kind": "theorem_b_report",
            "system": self.system,
            "k_grid": [float(k) for k in self.k_grid],
            "min_sec": [float(v) for v in self.min_sec],
            "positive": [bool(p) for p in self.positive],
            "zero_set": [[float(c) for c in x] for x in self.zero_set],
            "b_has_zero": self.b_has_zero,
            "b_has_nonzero": self.b_has_nonzero,
            "dichotomy_warning": self.dichotomy_warning,
            "grid_shape": list(self.grid_shape),
        }
        if path:
            dump_json(path, payload)
        return json.dumps(payload, sort_keys=True)


def theorem_b_scan(sys, k0, k_steps=8, grid_shape=(24, 24), zero_tol=1e-9, box=None):
    """Scan min over directions of the surface curvature on k in (0, k0).

    For each grid point the direction minimum is analytic:
    min_v [2kK - sqrt(2k) db(Jv) + b^2] = 2kK - sqrt(2k) |db|_g + b^2.
    Reports empirical positivity per k and the zero set of b.  A positive
    scan while b has both zeros and nonzeros is flagged as a resolution
    warning, never as a violation of the underlying dichotomy.
    """
    if sys.dim != 2:
        raise ValueError("theorem_b_scan requires a surface system")
    if k0 <= 0:
        raise ValueError("k0 must be positive")
    bounds = _sample_box(sys, box)
    xs = [np.linspace(lo, hi, m, endpoint=False) for (lo, hi), m in zip(bounds, grid_shape)]
    points = [np.array([a, b_]) for a in xs[0] for b_ in xs[1]]

    data = []
    for x in points:
        b_val = field_strength(sys, x)
        db = field_strength_gradient(sys, x)
        ginv = sys.inverse_metric_at(x)
        db_norm = float(np.sqrt(max(db @ ginv @ db, 0.0)))
        k_gauss = gauss_curvature(sys, x)
        data.append((x, b_val, db_norm, k_gauss))

    k_grid = [k0 * (i + 1) / (k_steps + 1) for i in range(k_steps)]
    min_sec, positive = [], []
    for k in k_grid:
        vals = [2.0 * k * kg - np.sqrt(2.0 * k) * dbn + bv ** 2
                for (_, bv, dbn, kg) in data]
        m = float(min(vals))
        min_sec.append(m)
        positive.append(m > POSITIVITY_GUARD)

    zero_set = [x for (x, bv, _, _) in data if abs(bv) <= zero_tol]
    has_zero = len(zero_set) > 0
    has_nonzero = any(abs(bv) > zero_tol for (_, bv, _, _) in data)
    warning = bool(all(positive) and has_zero and has_nonzero)

    return TheoremBReport(k_grid=k_grid, min_sec=min_sec, positive=positive,
                          zero_set=zero_set, b_has_zero=has_zero,
                          b_has_nonzero=has_nonzero, dichotomy_warning=warning,
                          grid_shape=tuple(grid_shape), system=sys.name)
