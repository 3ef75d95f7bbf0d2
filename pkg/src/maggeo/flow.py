"""Magnetic geodesic flow and magnetic parallel transport.

The flow integrates the second-order equation  D(gamma')/dt = Omega(gamma')
as a first-order system in phase space; the kinetic energy |v|_g^2 / 2 is
a conserved quantity and its sampled drift is reported as an integrator
diagnostic rather than being projected away (an optional projection mode
rescales the speed for long searches).

Transport solves  DV/dt = Omega_tilde(V)  along a stored orbit, where
Omega_tilde mixes the Lorentz operator through the g-orthogonal splitting
along the velocity; the induced end map is g-orthogonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np
from scipy.integrate import solve_ivp

from . import geom
from .errors import ChartExitError, StiffTrajectoryError
from .io import dump_csv, dump_json

DEFAULT_TOLERANCE = 1e-10
DEFAULT_SAMPLES = 257


@dataclass(frozen=True)
class PhaseState:
    """Point plus contravariant velocity."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))


def energy(sys, state):
    """Kinetic energy E = |v|_g^2 / 2 at the state's point."""
    return 0.5 * sys.inner(state.x, state.v, state.v)


def magnetic_ode_rhs(sys, state):
    """(dx/dt, dv/dt) with (dv/dt)^k = -Gamma^k_ij v^i v^j + Om^k_j v^j."""
    gam = geom.christoffel(sys, state.x)
    om = geom.lorentz_matrix(sys, state.x)
    acc = -np.einsum("kij,i,j->k", gam, state.v, state.v) + om @ state.v
    return state.v.copy(), acc


@dataclass
class _Segment:
    t0: float
    t1: float
    sol: object  # scipy OdeSolution
    swaps: int   # chart swaps applied before this segment


@dataclass
class Orbit:
    """A time-sampled trajectory of the magnetic flow.

    Positions in ``states`` are unwrapped (continuous lift); ``wrapped_x``
    carries the lattice-reduced copy.  ``chart_swaps`` counts transitions
    applied before each sample for two-chart systems.
    """

    t: np.ndarray
    states: np.ndarray          # (m, 2n) unwrapped [x, v]
    wrapped_x: np.ndarray       # (m, n)
    period: float
    k: float
    closure_residual: float
    energy_drift: float
    winding: np.ndarray
    chart_swaps: np.ndarray
    meta: dict = field(default_factory=dict)
    segments: list = field(default_factory=list, repr=False)

    @property
    def dim(self):
        return self.states.shape[1] // 2

    def state(self, i):
        n = self.dim
        return PhaseState(self.states[i, :n], self.states[i, n:])

    def eval(self, t):
        """Dense evaluation; returns (PhaseState, chart swap count)."""
        t = float(t)
        for seg in self.segments:
            if seg.t0 - 1e-12 <= t <= seg.t1 + 1e-12:
                y = seg.sol(np.clip(t, seg.t0, seg.t1))
                n = self.dim
                return PhaseState(y[:n], y[n:]), seg.swaps
        raise ValueError(f"time {t} outside orbit range [0, {self.period}]")

    def to_csv(self, path):
        n = self.dim
        header = (["t"] + [f"x{i+1}" for i in range(n)]
                  + [f"v{i+1}" for i in range(n)] + ["E"])
        rows = []
        sys = self.meta.get("_system")
        for i, ti in enumerate(self.t):
            x = self.states[i, :n]
            v = self.states[i, n:]
            e = 0.5 * float(v @ sys.metric_at(x) @ v) if sys is not None else float("nan")
            rows.append([float(ti)] + [float(c) for c in x] + [float(c) for c in v] + [e])
        dump_csv(path, header, rows)

    def to_json(self, path=None):
        payload = {
            "schema_version": 1,
            "kind": "orbit",
            "period": float(self.period),
            "k": float(self.k),
            "closure_residual": float(self.closure_residual),
            "energy_drift": float(self.energy_drift),
            "winding": [int(w) for w in self.winding],
            "n_samples": int(len(self.t)),
            "meta": {k: v for k, v in self.meta.items() if not k.startswith("_")},
        }
        if path:
            dump_json(path, payload)
        return payload


def _chart_exit_event(sys):
    radius = sys.safe_radius

    def event(t, y):
        n = len(y) // 2
        return float(y[:n] @ y[:n]) - radius ** 2

    event.terminal = True
    event.direction = 1.0
    return event


def integrate(sys, state0, t_end, tolerance=DEFAULT_TOLERANCE, samples=DEFAULT_SAMPLES,
              projection=False, projection_chunks=64):
    """Integrate the magnetic flow with an adaptive high-order scheme.

    Uses an embedded Runge-Kutta pair of order 8(5,3); lattice wrapping
    is applied to stored positions while the unwrapped copy is kept for
    winding numbers.  Chart transitions are applied when the system
    defines them; leaving a bounded chart without a transition raises.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    n = sys.dim
    state0 = state0 if isinstance(state0, PhaseState) else PhaseState(*state0)
    e0 = energy(sys, state0)

    def rhs(t, y):
        st = PhaseState(y[:n], y[n:])
        dx, dv = magnetic_ode_rhs(sys, st)
        return np.concatenate([dx, dv])

    events = None
    if sys.safe_radius is not None:
        events = [_chart_exit_event(sys)]

    chunk_ends = [t_end]
    if projection:
        chunk_ends = list(np.linspace(0.0, t_end, projection_chunks + 1)[1:])

    segments = []
    swaps = 0
    t_cur = 0.0
    y_cur = np.concatenate([state0.x, state0.v])
    nfev = 0
    target_iter = iter(chunk_ends)
    t_target = next(target_iter)
    while True:
        sol = solve_ivp(rhs, (t_cur, t_target), y_cur, method="DOP853",
                        rtol=tolerance, atol=tolerance, dense_output=True,
                        events=events)
        nfev += sol.nfev
        if sol.status == -1:
            raise StiffTrajectoryError(f"stiff or singular trajectory: {sol.message}")
        if sol.t[-1] > sol.t[0]:
            segments.append(_Segment(sol.t[0], sol.t[-1], sol.sol, swaps))
        t_cur = float(sol.t[-1])
        y_cur = sol.y[:, -1].copy()
        if sol.status == 1:  # chart exit
            if sys.transition is None:
                raise ChartExitError(f"left chart domain at t={t_cur}")
            xn, vn = sys.transition(y_cur[:n], y_cur[n:])
            y_cur = np.concatenate([xn, vn])
            swaps += 1
            continue
        if t_cur >= t_end - 1e-14:
            break
        if projection and abs(t_cur - t_target) < 1e-12:
            speed = float(np.sqrt(y_cur[n:] @ sys.metric_at(y_cur[:n]) @ y_cur[n:]))
            y_cur[n:] *= np.sqrt(2.0 * e0) / speed
            try:
                t_target = next(target_iter)
            except StopIteration:
                break

    ts = np.linspace(0.0, t_end, samples)
    states = np.empty((samples, 2 * n))
    swap_counts = np.empty(samples, dtype=int)
    seg_idx = 0
    for i, ti in enumerate(ts):
        while seg_idx + 1 < len(segments) and ti > segments[seg_idx].t1 + 1e-12:
            seg_idx += 1
        seg = segments[seg_idx]
        states[i] = seg.sol(np.clip(ti, seg.t0, seg.t1))
        swap_counts[i] = seg.swaps

    wrapped = np.array([sys.wrap(states[i, :n]) for i in range(samples)])

    energies = np.array([0.5 * states[i, n:] @ sys.metric_at(states[i, :n]) @ states[i, n:]
                         for i in range(samples)])
    drift = float(np.max(np.abs(energies - e0)))

    # closure against t = 0, after lattice reduction / chart canonicalization
    xe, ve = states[-1, :n].copy(), states[-1, n:].copy()
    if swap_counts[-1] % 2 == 1 and sys.transition is not None:
        xe, ve = sys.transition(xe, ve)
    dx = sys.wrap_diff(xe - state0.x)
    closure = float(np.linalg.norm(dx) + np.linalg.norm(ve - state0.v))

    winding = np.zeros(n, dtype=int)
    if sys.lattice is not None:
        for i, period in enumerate(sys.lattice):
            if period:
                winding[i] = int(np.round((states[-1, i] - state0.x[i]) / period))

    return Orbit(t=ts, states=states, wrapped_x=wrapped, period=float(t_end),
                 k=float(e0), closure_residual=closure, energy_drift=drift,
                 winding=winding, chart_swaps=swap_counts,
                 meta={"tolerance": tolerance, "nfev": nfev,
                       "n_segments": len(segments), "chart_swaps_total": swaps,
                       "scheme": "DOP853", "_system": sys},
                 segments=segments)


# ---------------------------------------------------------------------------
# magnetic parallel transport


def omega_tilde(sys, state, V):
    """Omega_tilde(V) = Om(V_1) + (Om V)_1 + (1/2)(Om V_2)_2 with the
    g-orthogonal splitting along the state's velocity."""
    x, v = state.x, state.v
    g = sys.metric_at(x)
    v2 = float(v @ g @ v)
    if v2 <= 0.0:
        raise ValueError("zero velocity: projections undefined")
    om = geom.lorentz_matrix(sys, x)
    V = np.asarray(V, dtype=float)

    def par(w):
        return (float(w @ g @ v) / v2) * v

    v1 = par(V)
    v2p = V - v1
    ov1 = om @ v1
    ov = om @ V
    ov2 = om @ v2p
    return ov1 + par(ov) + 0.5 * (ov2 - par(ov2))


@dataclass
class TransportedField:
    """Solution of the transport equation sampled along the orbit."""

    t: np.ndarray
    values: np.ndarray   # (m, n)
    end_value: np.ndarray

    def to_csv(self, path):
        n = self.values.shape[1]
        header = ["t"] + [f"V{i+1}" for i in range(n)]
        rows = [[float(t)] + [float(c) for c in row]
                for t, row in zip(self.t, self.values)]
        dump_csv(path, header, rows)


def magnetic_transport(sys, orbit, V0, tolerance=None):
    """Transport V0 along the orbit by solving DV/dt = Omega_tilde(V).

    Coordinate form: dV^k/dt = -Gamma^k_ij gamma'^i V^j + Omega_tilde(V)^k.
    The base curve is read from the orbit's dense output, so transport
    accuracy is decoupled from re-integration.  At chart swaps the
    transition's tangent map is applied to V.
    """
    n = sys.dim
    tol = tolerance if tolerance is not None else orbit.meta.get("tolerance", DEFAULT_TOLERANCE)

    def rhs_for(seg):
        def rhs(t, V):
            y = seg.sol(np.clip(t, seg.t0, seg.t1))
            st = PhaseState(y[:n], y[n:])
            gam = geom.christoffel(sys, st.x)
            corr = -np.einsum("kij,i,j->k", gam, st.v, V)
            return corr + omega_tilde(sys, st, V)
        return rhs

    values = np.empty((len(orbit.t), n))
    v_cur = np.asarray(V0, dtype=float).copy()
    sample_i = 0
    for si, seg in enumerate(orbit.segments):
        if si > 0 and seg.swaps != orbit.segments[si - 1].swaps:
            x_prev = orbit.segments[si - 1].sol(orbit.segments[si - 1].t1)[:n]
            _, v_cur = sys.transition(x_prev, v_cur)
        t_eval = [t for t in orbit.t[sample_i:] if t <= seg.t1 + 1e-12]
        sol = solve_ivp(rhs_for(seg), (seg.t0, seg.t1), v_cur, method="DOP853",
                        rtol=tol, atol=tol, dense_output=True)
        if sol.status != 0:
            raise StiffTrajectoryError(f"transport failed: {sol.message}")
        for t in t_eval:
            values[sample_i] = sol.sol(np.clip(t, seg.t0, seg.t1))
            sample_i += 1
        v_cur = sol.y[:, -1].copy()
    while sample_i < len(orbit.t):  # trailing samples on the final segment edge
        values[sample_i] = v_cur
        sample_i += 1
    return TransportedField(t=orbit.t.copy(), values=values, end_value=v_cur)


def transport_frame(sys, orbit, vectors=None, tolerance=None):
    """Transport several initial vectors; defaults to a g-orthonormal frame
    with first leg along the initial velocity."""
    st0 = orbit.state(0)
    if vectors is None:
        speed = np.sqrt(2.0 * orbit.k)
        frame0 = geom.orthonormal_completion(sys, st0.x, st0.v / speed)
        vectors = [frame0[:, i] for i in range(sys.dim)]
    return [magnetic_transport(sys, orbit, v, tolerance=tolerance) for v in vectors]
