# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernels for the built-in models.

Runs the same Dormand-Prince 5(4) loop as ``coop2._dopri5`` with the
right-hand sides of the built-in models written in C, so the stepper
never re-enters Python.  The stiff Field-Noyes system needs ~1e5..1e6
steps per trajectory; this kernel is what keeps batch experiments cheap.
"""

import numpy as np

from libc.math cimport fabs, fmax, fmin, isfinite, pow, sqrt

KIND_GOODWIN = 0
KIND_FIELD_NOYES = 1

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0

cdef int OK = 0
cdef int STEP_UNDERFLOW = 1
cdef int MAX_STEPS_EXCEEDED = 2
cdef int NONFINITE = 3


cdef inline void _rhs(int kind, const double* p, const double* x, double* out) noexcept nogil:
    if kind == 0:
        out[0] = -p[0] * x[0] + 1.0 / (1.0 + pow(x[2], p[3]))
        out[1] = -p[1] * x[1] + x[0]
        out[2] = -p[2] * x[2] + x[1]
    else:
        out[0] = p[0] * (x[1] - x[0] * x[1] + x[0] - p[1] * x[0] * x[0])
        out[1] = (x[2] * p[2] - x[1] - x[0] * x[1]) / p[0]
        out[2] = p[3] * (x[0] - x[2])


cdef inline double _error_norm(const double* err, const double* x, const double* x_new,
                               double rtol, const double* atol) noexcept nogil:
    cdef double acc = 0.0
    cdef double sc
    cdef int i
    for i in range(3):
        sc = atol[i] + rtol * fmax(fabs(x[i]), fabs(x_new[i]))
        acc += (err[i] / sc) * (err[i] / sc)
    return sqrt(acc / 3.0)


cdef inline double _rms_scaled(const double* v, const double* sc) noexcept nogil:
    cdef double acc = 0.0
    cdef int i
    for i in range(3):
        acc += (v[i] / sc[i]) * (v[i] / sc[i])
    return sqrt(acc / 3.0)


def rhs_eval(int kind, double[::1] params, double[::1] x):
    """Evaluate a built-in right-hand side (parity checks with the Python models)."""
    out = np.empty(3)
    cdef double[::1] ov = out
    _rhs(kind, &params[0], &x[0], &ov[0])
    return out


def integrate(int kind, double[::1] params, double[::1] x0, double t_end,
              double rtol, double[::1] atol, long max_steps,
              double[::1] lower, double[::1] upper, double clip_threshold):
    """Mirror of ``coop2._dopri5.integrate_raw`` for the compiled models."""
    cdef double x[3]
    cdef double x_new[3]
    cdef double stage[3]
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double k5[3]
    cdef double k6[3]
    cdef double k7[3]
    cdef double err[3]
    cdef double sc[3]
    cdef double p[8]
    cdef double lo[3]
    cdef double hi[3]
    cdef double at[3]
    cdef int i
    cdef long n_params = params.shape[0]
    if n_params > 8:
        raise ValueError("at most 8 kernel parameters supported")

    for i in range(3):
        x[i] = x0[i]
        lo[i] = lower[i]
        hi[i] = upper[i]
        at[i] = atol[i]
    for i in range(n_params):
        p[i] = params[i]

    cdef long cap = 4096
    t_arr = np.empty(cap)
    s_arr = np.empty((cap, 3))
    d_arr = np.empty((cap, 3))
    cdef double[::1] tv = t_arr
    cdef double[:, ::1] sv = s_arr
    cdef double[:, ::1] dv = d_arr

    cdef long n = 0
    cdef long n_accepted = 0
    cdef long n_rejected = 0
    cdef int status = OK
    cdef double max_excursion = 0.0
    cdef double t = 0.0
    cdef double h, h_min, err_norm, factor, factor_cap, exc, d0, d1, d2, h0, h1
    cdef bint bad

    _rhs(kind, p, x, k1)
    tv[n] = 0.0
    for i in range(3):
        sv[n, i] = x[i]
        dv[n, i] = k1[i]
    n += 1

    if t_end <= 0.0:
        return (t_arr[:n].copy(), s_arr[:n].copy(), d_arr[:n].copy(),
                n_accepted, n_rejected, status, max_excursion)

    # Hairer-style starting step (same arithmetic as the Python fallback)
    for i in range(3):
        sc[i] = at[i] + rtol * fabs(x[i])
    d0 = _rms_scaled(x, sc)
    d1 = _rms_scaled(k1, sc)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    for i in range(3):
        stage[i] = x[i] + h0 * k1[i]
    _rhs(kind, p, stage, k2)
    for i in range(3):
        err[i] = k2[i] - k1[i]
    d2 = _rms_scaled(err, sc) / h0
    if fmax(d1, d2) <= 1e-15:
        h1 = fmax(1e-6, h0 * 1e-3)
    else:
        h1 = pow(0.01 / fmax(d1, d2), 0.2)
    h = fmin(fmin(100.0 * h0, h1), t_end)

    h_min = 1e-14 * t_end
    factor_cap = MAX_FACTOR

    with nogil:
        while t < t_end:
            if n_accepted + n_rejected >= max_steps:
                status = MAX_STEPS_EXCEEDED
                break
            if h < h_min:
                status = STEP_UNDERFLOW
                break
            h = fmin(h, t_end - t)

            for i in range(3):
                stage[i] = x[i] + h * (0.2 * k1[i])
            _rhs(kind, p, stage, k2)
            for i in range(3):
                stage[i] = x[i] + h * (3.0 / 40.0 * k1[i] + 9.0 / 40.0 * k2[i])
            _rhs(kind, p, stage, k3)
            for i in range(3):
                stage[i] = x[i] + h * (44.0 / 45.0 * k1[i] - 56.0 / 15.0 * k2[i] + 32.0 / 9.0 * k3[i])
            _rhs(kind, p, stage, k4)
            for i in range(3):
                stage[i] = x[i] + h * (19372.0 / 6561.0 * k1[i] - 25360.0 / 2187.0 * k2[i]
                                       + 64448.0 / 6561.0 * k3[i] - 212.0 / 729.0 * k4[i])
            _rhs(kind, p, stage, k5)
            for i in range(3):
                stage[i] = x[i] + h * (9017.0 / 3168.0 * k1[i] - 355.0 / 33.0 * k2[i]
                                       + 46732.0 / 5247.0 * k3[i] + 49.0 / 176.0 * k4[i]
                                       - 5103.0 / 18656.0 * k5[i])
            _rhs(kind, p, stage, k6)
            for i in range(3):
                x_new[i] = x[i] + h * (35.0 / 384.0 * k1[i] + 500.0 / 1113.0 * k3[i]
                                       + 125.0 / 192.0 * k4[i] - 2187.0 / 6784.0 * k5[i]
                                       + 11.0 / 84.0 * k6[i])
            _rhs(kind, p, x_new, k7)

            bad = False
            for i in range(3):
                if not isfinite(x_new[i]) or not isfinite(k7[i]):
                    bad = True
            if bad:
                n_rejected += 1
                h *= 0.5
                factor_cap = 1.0
                if h < h_min:
                    status = NONFINITE
                    break
                continue

            for i in range(3):
                err[i] = h * (71.0 / 57600.0 * k1[i] - 71.0 / 16695.0 * k3[i]
                              + 71.0 / 1920.0 * k4[i] - 17253.0 / 339200.0 * k5[i]
                              + 22.0 / 525.0 * k6[i] - 1.0 / 40.0 * k7[i])
            err_norm = _error_norm(err, x, x_new, rtol, at)

            if err_norm <= 1.0:
                t += h
                exc = 0.0
                for i in range(3):
                    exc = fmax(exc, fmax(lo[i] - x_new[i], x_new[i] - hi[i]))
                exc = fmax(exc, 0.0)
                if exc > max_excursion:
                    max_excursion = exc
                if exc > clip_threshold:
                    for i in range(3):
                        x_new[i] = fmin(fmax(x_new[i], lo[i]), hi[i])
                    _rhs(kind, p, x_new, k7)
                for i in range(3):
                    x[i] = x_new[i]
                    k1[i] = k7[i]
                if n == cap:
                    with gil:
                        cap *= 2
                        t_arr = np.resize(t_arr, cap)
                        s_arr = np.resize(s_arr, (cap, 3))
                        d_arr = np.resize(d_arr, (cap, 3))
                        tv = t_arr
                        sv = s_arr
                        dv = d_arr
                tv[n] = t
                for i in range(3):
                    sv[n, i] = x[i]
                    dv[n, i] = k1[i]
                n += 1
                n_accepted += 1
                if err_norm == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = SAFETY * pow(err_norm, -0.2)
                h *= fmin(factor_cap, fmax(MIN_FACTOR, factor))
                factor_cap = MAX_FACTOR
            else:
                n_rejected += 1
                h *= fmax(MIN_FACTOR, SAFETY * pow(err_norm, -0.2))
                factor_cap = 1.0

    return (t_arr[:n].copy(), s_arr[:n].copy(), d_arr[:n].copy(),
            n_accepted, n_rejected, status, max_excursion)
