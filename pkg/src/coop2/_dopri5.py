"""Pure-Python adaptive Runge-Kutta 5(4) core (Dormand-Prince pair).

Reference implementation of the stepping loop; the compiled kernel in
``coop2._kernels`` runs the identical algorithm for the built-in models.
Kept dependency-free beyond numpy so it always works as a fallback and
for user-supplied Python vector fields.
"""

import math

import numpy as np

# Dormand-Prince 5(4) tableau (FSAL: the last stage is the next first one)
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# error weights: 5th-order minus embedded 4th-order solution
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0

OK = 0
STEP_UNDERFLOW = 1
MAX_STEPS_EXCEEDED = 2
NONFINITE = 3


def _error_norm(err, x, x_new, rtol, atol):
    sc = atol + rtol * np.maximum(np.abs(x), np.abs(x_new))
    return math.sqrt(float(np.mean((err / sc) ** 2)))


def initial_step(f, x0, f0, t_end, rtol, atol):
    """Hairer-style starting step size estimate."""
    sc = atol + rtol * np.abs(x0)
    d0 = math.sqrt(float(np.mean((x0 / sc) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / sc) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    x1 = x0 + h0 * f0
    f1 = f(x1)
    d2 = math.sqrt(float(np.mean(((f1 - f0) / sc) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, t_end)


def fixed_step_solution(f, x0, t_end, n_steps):
    """Run the same fifth-order stage arithmetic with a fixed step and no
    controller.  Only used to measure the propagation order of the pair;
    production integration always goes through :func:`integrate_raw`."""
    h = t_end / n_steps
    x = np.array(x0, dtype=float)
    k1 = f(x)
    for _ in range(n_steps):
        k2 = f(x + h * (A21 * k1))
        k3 = f(x + h * (A31 * k1 + A32 * k2))
        k4 = f(x + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = f(x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = f(x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        x = x + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k1 = f(x)
    return x


def integrate_raw(f, x0, t_end, rtol, atol, max_steps, lower, upper, clip_threshold):
    """Adaptive integration of dot(x) = f(x) from t = 0 to t_end.

    Returns (times, states, derivs, n_accepted, n_rejected, status,
    max_excursion).  ``derivs`` holds f at every stored point so callers
    can build cubic-Hermite dense output.  States that leave the
    [lower, upper] box by more than ``clip_threshold`` are clipped back
    (the boxes are invariant, so genuine exits are integration noise);
    the largest pre-clip excursion is reported.
    """
    x = np.array(x0, dtype=float)
    atol = np.broadcast_to(np.asarray(atol, dtype=float), x.shape).copy()
    times = [0.0]
    k1 = f(x)
    states = [x.copy()]
    derivs = [k1.copy()]
    status = OK
    n_accepted = 0
    n_rejected = 0
    max_excursion = 0.0

    if t_end <= 0.0:
        return (
            np.array(times),
            np.array(states),
            np.array(derivs),
            n_accepted,
            n_rejected,
            status,
            max_excursion,
        )

    h = initial_step(f, x, k1, t_end, rtol, atol)
    h_min = 1e-14 * t_end
    t = 0.0
    factor_cap = MAX_FACTOR

    while t < t_end:
        if n_accepted + n_rejected >= max_steps:
            status = MAX_STEPS_EXCEEDED
            break
        if h < h_min:
            status = STEP_UNDERFLOW
            break
        h = min(h, t_end - t)

        k2 = f(x + h * (A21 * k1))
        k3 = f(x + h * (A31 * k1 + A32 * k2))
        k4 = f(x + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = f(x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = f(x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        x_new = x + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = f(x_new)

        if not np.all(np.isfinite(x_new)) or not np.all(np.isfinite(k7)):
            n_rejected += 1
            h *= 0.5
            factor_cap = 1.0
            if h < h_min:
                status = NONFINITE
                break
            continue

        err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        err_norm = _error_norm(err, x, x_new, rtol, atol)

        if err_norm <= 1.0:
            t += h
            exc = float(np.max(np.maximum(lower - x_new, x_new - upper), initial=0.0))
            if exc > max_excursion:
                max_excursion = exc
            if exc > clip_threshold:
                x_new = np.clip(x_new, lower, upper)
                k7 = f(x_new)
            x = x_new
            k1 = k7
            times.append(t)
            states.append(x.copy())
            derivs.append(k1.copy())
            n_accepted += 1
            factor = MAX_FACTOR if err_norm == 0.0 else SAFETY * err_norm ** (-0.2)
            h *= min(factor_cap, max(MIN_FACTOR, factor))
            factor_cap = MAX_FACTOR
        else:
            n_rejected += 1
            h *= max(MIN_FACTOR, SAFETY * err_norm ** (-0.2))
            factor_cap = 1.0

    return (
        np.array(times),
        np.array(states),
        np.array(derivs),
        n_accepted,
        n_rejected,
        status,
        max_excursion,
    )
