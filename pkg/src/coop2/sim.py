"""Adaptive ODE integration and periodic-orbit detection.

Integration uses an embedded Dormand-Prince 5(4) pair with mixed
absolute/relative error control and cubic-Hermite dense output (built
from the stored states and derivatives, 4th-order accurate).  Built-in
models dispatch to the compiled kernel when it is available; everything
else, and anyone setting ``COOP2_PURE_PYTHON=1``, runs the pure-Python
fallback with identical stepping arithmetic.

Orbit detection takes Poincare sections on a coordinate hyperplane
through the equilibrium and estimates the period from the return times,
refining each crossing by bisection on the dense output.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _dopri5
from . import signvar

try:
    from . import _kernels
except ImportError:  # pragma: no cover - build without the extension
    _kernels = None

HAVE_KERNELS = _kernels is not None


def _use_kernels():
    return HAVE_KERNELS and not os.environ.get("COOP2_PURE_PYTHON")


__all__ = [
    "Trajectory",
    "PeriodEstimate",
    "OrbitOptions",
    "IntegrationError",
    "StiffnessError",
    "HAVE_KERNELS",
    "integrate",
    "detect_orbit",
    "pair_sign_variation_series",
]

_KERNEL_KINDS = {"goodwin": 0, "field_noyes": 1}


class IntegrationError(RuntimeError):
    """Integration aborted; ``trajectory`` holds the progress so far."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StiffnessError(IntegrationError):
    """Step size underflowed (below 1e-14 * t_end).

    The explicit pair cannot resolve the fastest local time scale at a
    useful step; reduce t_end, rescale the problem, or use a smaller box.
    """


@dataclass
class Trajectory:
    """Time-stamped solution samples with dense-output support."""

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    n_accepted: int
    n_rejected: int
    rtol: float
    atol: np.ndarray
    box_exited: bool = False
    max_box_excursion: float = 0.0

    def __len__(self):
        return len(self.times)

    @property
    def t_end(self):
        return float(self.times[-1])

    def sample(self, t):
        """Cubic-Hermite interpolation at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if len(self.times) == 1:
            out = np.broadcast_to(self.states[0], t.shape + (3,)).copy()
            return out[0] if scalar else out
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2)
        t0 = self.times[idx]
        t1 = self.times[idx + 1]
        h = t1 - t0
        th = (t - t0) / h
        h00 = (1.0 + 2.0 * th) * (1.0 - th) ** 2
        h10 = th * (1.0 - th) ** 2
        h01 = th * th * (3.0 - 2.0 * th)
        h11 = th * th * (th - 1.0)
        out = (
            h00[:, None] * self.states[idx]
            + (h10 * h)[:, None] * self.derivs[idx]
            + h01[:, None] * self.states[idx + 1]
            + (h11 * h)[:, None] * self.derivs[idx + 1]
        )
        return out[0] if scalar else out

    def write_csv(self, fh, resample=None):
        """Write ``t,x1,x2,x3`` rows: every accepted step, or ``resample``
        uniformly spaced samples.  Numbers use shortest round-trip decimals.
        """
        if resample is not None:
            ts = np.linspace(0.0, self.t_end, int(resample)) if len(self) > 1 else self.times[:1]
            xs = self.sample(ts)
        else:
            ts, xs = self.times, self.states
        fh.write("t,x1,x2,x3\n")
        for t, x in zip(ts, xs):
            fh.write(f"{float(t)!r},{float(x[0])!r},{float(x[1])!r},{float(x[2])!r}\n")


def _atol_vector(model, atol):
    if atol is None:
        atol = 1e-9
    atol = np.asarray(atol, dtype=float)
    if atol.ndim == 0:
        return float(atol) * np.maximum(1.0, model.box.extent)
    if atol.shape != (3,):
        raise ValueError("atol must be a scalar or a 3-vector")
    return atol.copy()


def integrate(model, x0, t_end, rtol=1e-8, atol=None, max_steps=20_000_000, force_python=False):
    """Integrate ``model`` from ``x0`` over [0, t_end].

    A scalar ``atol`` is scaled per component by the box extent (stiff
    models with wide boxes need absolute slack proportional to the state
    magnitude); pass a 3-vector for full control.  Raises
    :class:`StiffnessError` when the step size underflows and
    :class:`IntegrationError` on other failures, both carrying the
    partial trajectory.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (3,):
        raise ValueError("x0 must be a 3-vector")
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    if rtol <= 0:
        raise ValueError("rtol must be positive")
    box = model.box
    if box.excursion(x0) > 1e-9 * max(1.0, float(np.max(box.extent))):
        raise ValueError(f"x0 = {x0} lies outside the model box")
    atol_vec = _atol_vector(model, atol)
    if np.any(atol_vec <= 0):
        raise ValueError("atol must be positive")
    clip_threshold = 10.0 * float(np.max(atol_vec))

    if not force_python and _use_kernels() and model.kernel is not None:
        kind = _KERNEL_KINDS[model.kernel[0]]
        params = np.asarray(model.kernel[1], dtype=float)
        times, states, derivs, nacc, nrej, status, exc = _kernels.integrate(
            kind, params, x0, float(t_end), float(rtol), atol_vec,
            int(max_steps), box.lower, box.upper, clip_threshold,
        )
    else:
        times, states, derivs, nacc, nrej, status, exc = _dopri5.integrate_raw(
            model.f, x0, float(t_end), float(rtol), atol_vec,
            int(max_steps), box.lower, box.upper, clip_threshold,
        )

    traj = Trajectory(
        times=times,
        states=states,
        derivs=derivs,
        n_accepted=int(nacc),
        n_rejected=int(nrej),
        rtol=float(rtol),
        atol=atol_vec,
        box_exited=exc > clip_threshold,
        max_box_excursion=float(exc),
    )
    if status == _dopri5.STEP_UNDERFLOW:
        raise StiffnessError(
            f"step size underflow at t = {traj.t_end:.6g} (state {traj.states[-1]})",
            traj,
        )
    if status == _dopri5.MAX_STEPS_EXCEEDED:
        raise IntegrationError(f"exceeded {max_steps} steps at t = {traj.t_end:.6g}", traj)
    if status == _dopri5.NONFINITE:
        raise IntegrationError(
            f"state became non-finite near t = {traj.t_end:.6g}", traj
        )
    return traj


@dataclass(frozen=True)
class OrbitOptions:
    """Tunables for :func:`detect_orbit`."""

    horizon: float = 400.0
    rtol: float = 1e-9
    atol: float | None = None
    n_returns: int = 5
    rel_tol: float = 1e-3
    abs_tol: float | None = None  # None: 1e-3 * orbit diameter
    section_coord: int = 1
    crossing_time_tol: float = 1e-10
    hysteresis_fraction: float = 0.005
    transient_windows: int = 10
    transient_agreement: float = 0.01


@dataclass
class PeriodEstimate:
    """Detected orbit period and closure statistics.

    When ``converged`` is true, the standard error of the period is at
    most ``rel_tol * period`` and the largest gap between consecutive
    section returns is at most ``abs_tol``.
    """

    period: float
    period_stderr: float
    closure_distance: float
    n_returns: int
    converged: bool
    transient_skipped: float
    section_value: float
    abs_tol: float
    rel_tol: float
    message: str = ""
    return_times: np.ndarray = field(default_factory=lambda: np.empty(0))


def _transient_end(traj, horizon, n_windows, agreement):
    """First time after which per-window amplitudes agree to ``agreement``
    (relative), capped at half the horizon."""
    edges = np.linspace(0.0, horizon, n_windows + 1)
    amps = []
    for w in range(n_windows):
        mask = (traj.times >= edges[w]) & (traj.times <= edges[w + 1])
        if np.count_nonzero(mask) < 3:
            amps.append(None)
            continue
        block = traj.states[mask]
        amps.append(block.max(axis=0) - block.min(axis=0))
    for w in range(n_windows - 1):
        a, b = amps[w], amps[w + 1]
        if a is None or b is None:
            continue
        scale = np.maximum(np.maximum(a, b), 1e-30)
        if np.all(np.abs(a - b) <= agreement * scale):
            return min(float(edges[w + 1]), 0.5 * horizon)
    return 0.5 * horizon


def _refine_crossing(traj, coord, level, t_lo, t_hi, tol):
    """Bisect the dense output for the crossing time of x[coord] = level."""
    g_lo = traj.sample(t_lo)[coord] - level
    for _ in range(200):
        if t_hi - t_lo <= tol:
            break
        t_mid = 0.5 * (t_lo + t_hi)
        g_mid = traj.sample(t_mid)[coord] - level
        if (g_lo < 0.0) == (g_mid < 0.0):
            t_lo, g_lo = t_mid, g_mid
        else:
            t_hi = t_mid
    return 0.5 * (t_lo + t_hi)


def detect_orbit(model, x0, opts=OrbitOptions()):
    """Detect a periodic orbit by Poincare return analysis.

    Integrates past a transient, sections the trajectory on the
    hyperplane where the chosen coordinate equals its equilibrium value
    (upward crossings only), and estimates the period as the mean of the
    last ``n_returns`` return intervals.  Crossings are debounced with a
    hysteresis band (a fraction of the post-transient amplitude): a new
    crossing is counted only after the coordinate has first dropped below
    the band, which suppresses the micro-crossing jitter that stiff
    systems produce while the fast variable creeps along its slow
    manifold.  Detection is observational: a non-converged result is an
    outcome, not an error.
    """
    traj = integrate(model, x0, opts.horizon, rtol=opts.rtol, atol=opts.atol)
    coord = opts.section_coord

    if model.equilibrium is not None:
        level = float(model.equilibrium()[coord])
    else:
        tail = traj.states[traj.times >= 0.5 * opts.horizon]
        level = float(np.mean(tail[:, coord]))

    t_skip = _transient_end(traj, opts.horizon, opts.transient_windows, opts.transient_agreement)

    mask = traj.times >= t_skip
    ts = traj.times[mask]
    xs = traj.states[mask]
    diam = float(np.linalg.norm(xs.max(axis=0) - xs.min(axis=0))) if len(xs) else 0.0
    abs_tol = opts.abs_tol if opts.abs_tol is not None else 1e-3 * max(diam, 1e-30)

    vals = xs[:, coord] - level
    hyst = opts.hysteresis_fraction * float(vals.max() - vals.min()) if len(vals) else 0.0
    crossings = []
    points = []
    armed = bool(len(vals)) and vals[0] < -hyst
    for i in range(len(vals) - 1):
        if not armed:
            armed = vals[i] < -hyst
        if armed and vals[i] < 0.0 <= vals[i + 1]:
            tc = _refine_crossing(traj, coord, level, ts[i], ts[i + 1], opts.crossing_time_tol)
            crossings.append(tc)
            points.append(traj.sample(tc))
            armed = False

    k = opts.n_returns
    n_cross = len(crossings)
    if n_cross < k + 2:
        return PeriodEstimate(
            period=float("nan"),
            period_stderr=float("nan"),
            closure_distance=float("nan"),
            n_returns=max(0, n_cross - 1),
            converged=False,
            transient_skipped=t_skip,
            section_value=level,
            abs_tol=abs_tol,
            rel_tol=opts.rel_tol,
            message=(
                f"only {n_cross} section crossings in horizon {opts.horizon}; "
                "the trajectory may approach an equilibrium or the horizon is too short"
            ),
        )

    times = np.array(crossings)
    pts = np.array(points)
    intervals = np.diff(times)[-k:]
    period = float(np.mean(intervals))
    stderr = float(np.std(intervals, ddof=1) / math.sqrt(k))
    last_pts = pts[-(k + 1):]
    closure = float(np.max(np.linalg.norm(np.diff(last_pts, axis=0), axis=1)))
    converged = stderr <= opts.rel_tol * period and closure <= abs_tol
    return PeriodEstimate(
        period=period,
        period_stderr=stderr,
        closure_distance=closure,
        n_returns=k,
        converged=converged,
        transient_skipped=t_skip,
        section_value=level,
        abs_tol=abs_tol,
        rel_tol=opts.rel_tol,
        return_times=times,
    )


def pair_sign_variation_series(model, a, b, t_end, n_samples=200, rtol=1e-8, atol=None):
    """Sample the sign-variation counts of z(t) = x(t, a) - x(t, b).

    Both solutions are integrated and sampled on a uniform grid; each
    difference is scaled by the model's variation signature (the counts
    that the flow preserves are those of the signature coordinates),
    snapped at 1e-9 relative to |z|, and counted.  Returns a list of
    ``(t, s_minus, s_plus)`` tuples.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.array_equal(a, b):
        raise ValueError("initial conditions must differ")
    ta = integrate(model, a, t_end, rtol=rtol, atol=atol)
    tb = integrate(model, b, t_end, rtol=rtol, atol=atol)
    ts = np.linspace(0.0, t_end, n_samples)
    za = ta.sample(ts) - tb.sample(ts)
    sig = model.signature()
    out = []
    for t, z in zip(ts, za):
        zs = sig * z
        norm = float(np.linalg.norm(zs))
        zs = signvar.snap(zs, 1e-9 * norm)
        out.append((float(t), signvar.s_minus(zs), signvar.s_plus(zs)))
    return out


def workers_hint():
    """Worker-count cap from COOP2_THREADS (defaults to 1)."""
    try:
        return max(1, int(os.environ.get("COOP2_THREADS", "1")))
    except ValueError:
        return 1
