"""Chart-level Riemannian and magnetic tensor calculus.

A magnetic system on a coordinate chart is a metric ``g`` together with a
closed antisymmetric two-form ``sigma``; the Lorentz operator is the
(1,1)-tensor ``Omega = g^{-1} sigma``, so that ``<v, Omega(w)>_g =
sigma(v, w)`` for all vectors ``v, w``.

Index conventions (all arrays are plain float64 ndarrays):

================  =====================================================
metric            ``g[i, j]``
metric derivative ``dg[i, j, k]   = d g_ij / d x^k``
second derivative ``d2g[i, j, k, l] = d^2 g_ij / d x^k d x^l``
two-form          ``sigma[i, j]`` (antisymmetric)
christoffel       ``Gamma[k, i, j] = Gamma^k_ij``
riemann           ``R[l, k, i, j]``: ``(R(u,v)w)^l = R[l,k,i,j] u^i v^j w^k``
lorentz           ``Om[k, j]``: ``(Omega w)^k = Om[k, j] w^j``
nabla_omega       ``dOm[k, j, i] = (nabla_{e_i} Omega)^k_j``
================  =====================================================

Sign convention: the sectional curvature of the round unit sphere is +1,
i.e. ``<R(u,v)v, u>_g = 1`` for orthonormal ``u, v``.

All operations are pure functions of their inputs; ``ChartedSystem``
values are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateMetricError, DerivativeStepError, FrameError

DEFAULT_FD_STEP = 1e-5

# Tolerances for cheap input validation.
_SYM_TOL = 1e-10
_UNIT_TOL = 1e-8


@dataclass(frozen=True)
class ChartedSystem:
    """A magnetic system (g, sigma) on a single coordinate chart.

    Parameters
    ----------
    dim : int
        Chart dimension, n >= 2.
    metric : callable
        x -> symmetric positive-definite (n, n) array.
    two_form : callable
        x -> antisymmetric (n, n) array.
    primitive : callable, optional
        x -> length-n covector theta with d theta = sigma on the chart
        (or on the universal-cover chart for lattice systems).
    lattice : sequence, optional
        n period lengths; ``None`` entries mark non-periodic coordinates.
    scheme : str
        "analytic" (dmetric/d2metric/dtwo_form callbacks supplied) or
        "fd" (central differences with step ``fd_step``).
    fd_step : float
        Base finite-difference step, scaled per coordinate by
        ``max(1, |x_i|)``.
    transition : callable, optional
        (x, v) -> (x', v') chart-swap rule applied when ``|x|`` exceeds
        ``safe_radius`` (used by the built-in two-chart sphere).  The rule
        must be an isometry that preserves the two-form.
    safe_radius : float, optional
        Euclidean chart radius beyond which ``transition`` is applied.
    oriented : bool
        Whether the chart carries the standard orientation (surfaces).
    """

    dim: int
    metric: Callable
    two_form: Callable
    primitive: Optional[Callable] = None
    lattice: Optional[Sequence] = None
    scheme: str = "fd"
    fd_step: float = DEFAULT_FD_STEP
    dmetric: Optional[Callable] = None
    d2metric: Optional[Callable] = None
    dtwo_form: Optional[Callable] = None
    transition: Optional[Callable] = None
    safe_radius: Optional[float] = None
    oriented: bool = True
    name: str = ""
    extras: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dimension must be >= 2")
        if self.scheme not in ("analytic", "fd"):
            raise ValueError(f"unknown derivative scheme {self.scheme!r}")
        if self.scheme == "analytic":
            missing = [n for n, f in (("dmetric", self.dmetric),
                                      ("d2metric", self.d2metric),
                                      ("dtwo_form", self.dtwo_form)) if f is None]
            if missing:
                raise ValueError(f"analytic scheme requires callbacks: {missing}")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")
        if self.lattice is not None and len(self.lattice) != self.dim:
            raise ValueError("lattice must have one entry per coordinate")

    # -- field evaluation with validation ---------------------------------

    def metric_at(self, x):
        g = np.asarray(self.metric(np.asarray(x, dtype=float)), dtype=float)
        scale = max(1.0, float(np.max(np.abs(g))))
        if np.max(np.abs(g - g.T)) > _SYM_TOL * scale:
            raise DegenerateMetricError(f"metric not symmetric at x={np.asarray(x)!r}")
        return g

    def inverse_metric_at(self, x):
        g = self.metric_at(x)
        try:
            cho = np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise DegenerateMetricError(f"degenerate metric at x={np.asarray(x)!r}") from None
        ident = np.eye(self.dim)
        inv_l = np.linalg.solve(cho, ident)
        return inv_l.T @ inv_l

    def two_form_at(self, x):
        s = np.asarray(self.two_form(np.asarray(x, dtype=float)), dtype=float)
        scale = max(1.0, float(np.max(np.abs(s))))
        if np.max(np.abs(s + s.T)) > _SYM_TOL * scale:
            raise ValueError(f"two_form not antisymmetric at x={np.asarray(x)!r}")
        return s

    def primitive_at(self, x):
        if self.primitive is None:
            return None
        return np.asarray(self.primitive(np.asarray(x, dtype=float)), dtype=float)

    # -- helpers -----------------------------------------------------------

    def inner(self, x, u, v):
        return float(np.asarray(u) @ self.metric_at(x) @ np.asarray(v))

    def norm(self, x, v):
        return float(np.sqrt(max(self.inner(x, v, v), 0.0)))

    def wrap(self, x):
        """Reduce coordinates to the fundamental lattice cell [0, L)."""
        x = np.array(x, dtype=float)
        if self.lattice is None:
            return x
        for i, period in enumerate(self.lattice):
            if period:
                x[i] = x[i] % period
        return x

    def wrap_diff(self, dx):
        """Reduce a coordinate difference to the minimal lattice image."""
        dx = np.array(dx, dtype=float)
        if self.lattice is None:
            return dx
        for i, period in enumerate(self.lattice):
            if period:
                dx[i] -= period * np.round(dx[i] / period)
        return dx

    # -- derivative schemes -------------------------------------------------

    def _steps(self, x):
        x = np.asarray(x, dtype=float)
        h = self.fd_step * np.maximum(1.0, np.abs(x))
        if np.any(x + h == x) or np.any(x - h == x):
            raise DerivativeStepError(f"derivative step too small at x={x!r}")
        return h

    def dmetric_at(self, x):
        if self.scheme == "analytic":
            return np.asarray(self.dmetric(np.asarray(x, dtype=float)), dtype=float)
        return _fd_jacobian(self.metric, x, self._steps(x))

    def d2metric_at(self, x):
        if self.scheme == "analytic":
            return np.asarray(self.d2metric(np.asarray(x, dtype=float)), dtype=float)
        return _fd_hessian(self.metric, x, self._steps(x))

    def dtwo_form_at(self, x):
        if self.scheme == "analytic":
            return np.asarray(self.dtwo_form(np.asarray(x, dtype=float)), dtype=float)
        return _fd_jacobian(self.two_form, x, self._steps(x))


@dataclass(frozen=True)
class TangentSample:
    """A base point with one or two tangent vectors (contravariant)."""

    x: np.ndarray
    v: np.ndarray
    w: Optional[np.ndarray] = None

    def require_unit(self, sys, tol=_UNIT_TOL):
        if abs(sys.norm(self.x, self.v) - 1.0) > tol:
            raise FrameError("frame violation: |v|_g != 1")
        return self

    def require_orthonormal(self, sys, tol=_UNIT_TOL):
        self.require_unit(sys, tol)
        if self.w is None:
            raise FrameError("frame violation: missing second vector")
        if abs(sys.norm(self.x, self.w) - 1.0) > tol:
            raise FrameError("frame violation: |w|_g != 1")
        if abs(sys.inner(self.x, self.v, self.w)) > tol:
            raise FrameError("frame violation: <v,w>_g != 0")
        return self


# ---------------------------------------------------------------------------
# finite differences


def _fd_jacobian(fn, x, h):
    """Central-difference coordinate derivatives, output shape fn(x).shape + (n,)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    base = np.asarray(fn(x), dtype=float)
    out = np.empty(base.shape + (n,))
    for k in range(n):
        xp = x.copy(); xp[k] += h[k]
        xm = x.copy(); xm[k] -= h[k]
        out[..., k] = (np.asarray(fn(xp), dtype=float)
                       - np.asarray(fn(xm), dtype=float)) / (2.0 * h[k])
    return out


def _fd_hessian(fn, x, h):
    """Central-difference second derivatives, shape fn(x).shape + (n, n)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    base = np.asarray(fn(x), dtype=float)
    out = np.empty(base.shape + (n, n))
    for k in range(n):
        xp = x.copy(); xp[k] += h[k]
        xm = x.copy(); xm[k] -= h[k]
        out[..., k, k] = (np.asarray(fn(xp), dtype=float) - 2.0 * base
                          + np.asarray(fn(xm), dtype=float)) / h[k] ** 2
    for k in range(n):
        for l in range(k + 1, n):
            xpp = x.copy(); xpp[k] += h[k]; xpp[l] += h[l]
            xpm = x.copy(); xpm[k] += h[k]; xpm[l] -= h[l]
            xmp = x.copy(); xmp[k] -= h[k]; xmp[l] += h[l]
            xmm = x.copy(); xmm[k] -= h[k]; xmm[l] -= h[l]
            mixed = (np.asarray(fn(xpp), dtype=float) - np.asarray(fn(xpm), dtype=float)
                     - np.asarray(fn(xmp), dtype=float) + np.asarray(fn(xmm), dtype=float))
            mixed /= 4.0 * h[k] * h[l]
            out[..., k, l] = mixed
            out[..., l, k] = mixed
    return out


# ---------------------------------------------------------------------------
# connection and curvature


def christoffel(sys, x):
    """Christoffel symbols Gamma[k, i, j] = (1/2) g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)."""
    ginv = sys.inverse_metric_at(x)
    dg = sys.dmetric_at(x)
    # dg[j, l, i] = d_i g_jl
    term = (np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg)
            - np.einsum("ijl->lij", dg))
    return 0.5 * np.einsum("kl,lij->kij", ginv, term)


def dchristoffel(sys, x):
    """Coordinate derivatives dGamma[k, i, j, m] = d_m Gamma^k_ij."""
    g = sys.metric_at(x)
    ginv = sys.inverse_metric_at(x)
    dg = sys.dmetric_at(x)
    d2g = sys.d2metric_at(x)
    term = (np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg)
            - np.einsum("ijl->lij", dg))
    dterm = (np.einsum("jlim->lijm", d2g) + np.einsum("iljm->lijm", d2g)
             - np.einsum("ijlm->lijm", d2g))
    # d_m g^{kl} = -g^{ka} (d_m g_ab) g^{bl}
    dginv = -np.einsum("ka,abm,bl->klm", ginv, dg, ginv)
    return 0.5 * (np.einsum("klm,lij->kijm", dginv, term)
                  + np.einsum("kl,lijm->kijm", ginv, dterm))


def riemann_tensor(sys, x):
    """Curvature R[l, k, i, j] with (R(u,v)w)^l = R[l,k,i,j] u^i v^j w^k."""
    gam = christoffel(sys, x)
    dgam = dchristoffel(sys, x)
    r = (np.einsum("ljki->lkij", dgam) - np.einsum("likj->lkij", dgam)
         + np.einsum("lim,mjk->lkij", gam, gam)
         - np.einsum("ljm,mik->lkij", gam, gam))
    return r


def riemann(sys, x, u, v, w):
    """The curvature vector R(u,v)w; trilinear in (u, v, w)."""
    r = riemann_tensor(sys, x)
    return np.einsum("lkij,i,j,k->l", r, np.asarray(u, float),
                     np.asarray(v, float), np.asarray(w, float))


def sectional(sys, x, u, v):
    """Sectional curvature of the plane spanned by u, v."""
    g = sys.metric_at(x)
    uu = float(u @ g @ u)
    vv = float(v @ g @ v)
    uv = float(u @ g @ v)
    area2 = uu * vv - uv * uv
    if area2 <= 0:
        raise FrameError("degenerate frame: u, v do not span a plane")
    return float(riemann(sys, x, u, v, v) @ g @ u) / area2


def ricci(sys, x, v):
    """Ricci curvature Ric(v, v) = trace of u -> R(u, v)v (basis independent)."""
    r = riemann_tensor(sys, x)
    v = np.asarray(v, dtype=float)
    return float(np.einsum("ikij,j,k->", r, v, v))


# ---------------------------------------------------------------------------
# Lorentz operator


def lorentz_matrix(sys, x):
    """Matrix of the Lorentz operator, Om = g^{-1} sigma."""
    return sys.inverse_metric_at(x) @ sys.two_form_at(x)


def lorentz(sys, x, w):
    """Omega(w): the unique g-antisymmetric operator with <v, Omega(w)> = sigma(v, w)."""
    return lorentz_matrix(sys, x) @ np.asarray(w, dtype=float)


def nabla_omega_tensor(sys, x):
    """Covariant derivative of Omega: dOm[k, j, i] = (nabla_{e_i} Omega)^k_j."""
    ginv = sys.inverse_metric_at(x)
    sig = sys.two_form_at(x)
    dg = sys.dmetric_at(x)
    dsig = sys.dtwo_form_at(x)
    gam = christoffel(sys, x)
    # d_i Om^k_j = d_i (g^{ka} sigma_aj)
    dginv = -np.einsum("ka,abi,bl->kli", ginv, dg, ginv)
    dom = np.einsum("kai,aj->kji", dginv, sig) + np.einsum("ka,aji->kji", ginv, dsig)
    om = ginv @ sig
    return (dom + np.einsum("kil,lj->kji", gam, om)
            - np.einsum("lij,kl->kji", gam, om))


def nabla_omega(sys, x, w, v):
    """(nabla_w Omega)(v); bilinear in (w, v)."""
    dom = nabla_omega_tensor(sys, x)
    return np.einsum("kji,i,j->k", dom, np.asarray(w, float), np.asarray(v, float))


# ---------------------------------------------------------------------------
# frames


def orthonormal_completion(sys, x, v):
    """Complete unit v to a g-orthonormal frame, columns[0] = v.

    Gram-Schmidt over the coordinate basis, pivoting at each stage on the
    candidate with the largest residual norm (deterministic and stable).
    """
    g = sys.metric_at(x)
    n = sys.dim
    v = np.asarray(v, dtype=float)
    nv = float(np.sqrt(v @ g @ v))
    if abs(nv - 1.0) > _UNIT_TOL:
        raise FrameError("frame violation: |v|_g != 1")
    frame = [v / nv]
    candidates = list(np.eye(n))
    for _ in range(n - 1):
        best, best_norm = None, -1.0
        for c in candidates:
            r = c.copy()
            for e in frame:
                r -= (r @ g @ e) * e
            rn = float(np.sqrt(max(r @ g @ r, 0.0)))
            if rn > best_norm:
                best, best_norm = r, rn
        if best_norm < 1e-9:
            raise FrameError("degenerate frame")
        e_new = best / best_norm
        frame.append(e_new)
        # drop the coordinate vector most aligned with the accepted direction
        overlaps = [abs(c @ g @ e_new) for c in candidates]
        candidates.pop(int(np.argmax(overlaps)))
    return np.column_stack(frame)


def coordinate_frame(sys, x, order=None):
    """g-orthonormalize the coordinate basis at x (pivoted, deterministic).

    Returns an (n, n) matrix whose columns form a g-orthonormal frame.
    ``order`` overrides the pivot order (used to probe frame invariance).
    """
    g = sys.metric_at(x)
    n = sys.dim
    if order is None:
        order = range(n)
    frame = []
    for idx in order:
        r = np.eye(n)[idx].astype(float)
        for e in frame:
            r -= (r @ g @ e) * e
        rn = float(np.sqrt(max(r @ g @ r, 0.0)))
        if rn < 1e-12:
            raise FrameError("degenerate frame")
        frame.append(r / rn)
    return np.column_stack(frame)


def exterior_derivative_residual(sys, x):
    """Max norm of (d theta - sigma)_ij at x, via the system's derivative scheme.

    Only available when a primitive is present; used to validate user input.
    """
    if sys.primitive is None:
        raise ValueError("system has no primitive")
    h = sys._steps(x)
    dtheta = _fd_jacobian(sys.primitive, x, h)  # dtheta[j, i] = d_i theta_j
    ext = dtheta.T - dtheta  # (d theta)_ij = d_i theta_j - d_j theta_i
    return float(np.max(np.abs(ext - sys.two_form_at(x))))
