"""Built-in case-study systems and the generic model interface.

Two classical three-variable oscillators are built in: the Goodwin
negative-feedback gene-regulation loop and the Field-Noyes reduction of
the Belousov-Zhabotinskii reaction.  Both come with exact Jacobians, an
invariant state box, a sign-pattern certificate valid on the interior of
the box, and a dedicated equilibrium routine with an analytic uniqueness
argument.  User-defined systems enter through :func:`from_config` with
expression-based fields and auto-derived Jacobians.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import expr as _expr
from .signpat import SignPattern, two_positive_pattern

__all__ = [
    "Box3",
    "SystemModel",
    "GoodwinParams",
    "FieldNoyesParams",
    "goodwin",
    "goodwin_equilibrium",
    "field_noyes",
    "field_noyes_equilibrium",
    "field_noyes_det_identity",
    "from_config",
]


@dataclass(frozen=True)
class Box3:
    """Axis-aligned box, lower <= upper componentwise."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("box bounds must be 3-vectors")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def extent(self):
        return self.upper - self.lower

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def strictly_contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > self.lower) and np.all(x < self.upper))

    def clip(self, x):
        return np.clip(x, self.lower, self.upper)

    def excursion(self, x):
        """Largest componentwise violation of the bounds (0 inside)."""
        x = np.asarray(x, dtype=float)
        out = np.maximum(self.lower - x, x - self.upper)
        return float(np.max(np.maximum(out, 0.0)))

    def interior_grid(self, n):
        """Uniform n x n x n grid strictly inside the box."""
        axes = [
            lo + (hi - lo) * (np.arange(1, n + 1) / (n + 1))
            for lo, hi in zip(self.lower, self.upper)
        ]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return pts.reshape(-1, 3)

    def sample(self, rng, size=None):
        return rng.uniform(self.lower, self.upper, None if size is None else (size, 3))


@dataclass(frozen=True)
class SystemModel:
    """A three-dimensional vector field with certification metadata.

    ``f`` and ``jac`` broadcast over leading axes (input shape (..., 3)).
    ``sign_certificate`` is the sign pattern claimed for the Jacobian on
    the interior of ``box``; ``variation_signature`` is the diagonal
    +-1 vector bringing that pattern to the two-positive normal form (the
    sign-variation counts that the flow preserves are those of the
    signature-scaled coordinates).  ``kernel`` names a compiled
    fast-integration path; None selects the pure-Python integrator.
    """

    name: str
    params: dict
    f: object
    jac: object
    box: Box3
    sign_certificate: SignPattern | None = None
    variation_signature: np.ndarray | None = None
    equilibrium: object = None  # callable () -> ndarray, or None
    equilibrium_unique: bool = False
    uniqueness_note: str = ""
    kernel: tuple | None = field(default=None, repr=False)

    def signature(self):
        if self.variation_signature is None:
            return np.ones(3)
        return np.asarray(self.variation_signature, dtype=float)


@dataclass(frozen=True)
class GoodwinParams:
    alpha: float
    beta: float
    gamma: float
    m: int

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) <= 0.0:
            raise ValueError("alpha, beta, gamma must be positive")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        object.__setattr__(self, "m", int(self.m))


@dataclass(frozen=True)
class FieldNoyesParams:
    s: float
    q: float
    f: float
    w: float

    def __post_init__(self):
        if min(self.s, self.q, self.f, self.w) <= 0.0:
            raise ValueError("s, q, f, w must be positive")
        if self.q >= 0.01:
            warnings.warn(
                f"q = {self.q} is unusually large; the invariant box assumes q << 1",
                stacklevel=3,
            )


def goodwin(p):
    """Goodwin negative-feedback loop:

        dx1 = -alpha*x1 + 1/(1 + x3**m)
        dx2 = -beta*x2 + x1
        dx3 = -gamma*x3 + x2

    All trajectories in the non-negative orthant eventually enter the box
    [0, 1/alpha] x [0, 1/(alpha*beta)] x [0, 1/(alpha*beta*gamma)], which
    is forward invariant; that box is attached to the model.
    """
    if not isinstance(p, GoodwinParams):
        p = GoodwinParams(**p)
    a, b, g, m = p.alpha, p.beta, p.gamma, p.m

    def f(x):
        x = np.asarray(x, dtype=float)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        return np.stack(
            [-a * x1 + 1.0 / (1.0 + x3**m), -b * x2 + x1, -g * x3 + x2],
            axis=-1,
        )

    def jac(x):
        x = np.asarray(x, dtype=float)
        x3 = x[..., 2]
        base = x.shape[:-1]
        J = np.zeros(base + (3, 3))
        hill = 1.0 + x3**m
        J[..., 0, 0] = -a
        J[..., 0, 2] = -m * x3 ** (m - 1) / hill**2
        J[..., 1, 0] = 1.0
        J[..., 1, 1] = -b
        J[..., 2, 1] = 1.0
        J[..., 2, 2] = -g
        return J

    box = Box3(np.zeros(3), np.array([1.0 / a, 1.0 / (a * b), 1.0 / (a * b * g)]))
    return SystemModel(
        name="goodwin",
        params={"alpha": a, "beta": b, "gamma": g, "m": m},
        f=f,
        jac=jac,
        box=box,
        sign_certificate=two_positive_pattern(3),
        variation_signature=np.array([1.0, 1.0, 1.0]),
        equilibrium=lambda: goodwin_equilibrium(p),
        equilibrium_unique=True,
        uniqueness_note=(
            "analytic: e3 is the unique positive root of the strictly "
            "increasing polynomial a*b*g*(s**(m+1) + s) - 1"
        ),
        kernel=("goodwin", (a, b, g, float(m))),
    )


def goodwin_equilibrium(p):
    """Unique equilibrium of the Goodwin model.

    e3 solves a*b*g*(s**(m+1) + s) = 1, which is strictly increasing with
    a sign change on (0, 1/(a*b*g)]; bisection brackets the root and a
    Newton polish drives the residual to ~1e-12.  Then e1 = b*g*e3 and
    e2 = g*e3.
    """
    if not isinstance(p, GoodwinParams):
        p = GoodwinParams(**p)
    abg = p.alpha * p.beta * p.gamma
    m = p.m

    def Q(s):
        return abg * (s ** (m + 1) + s) - 1.0

    def dQ(s):
        return abg * ((m + 1) * s**m + 1.0)

    lo, hi = 0.0, 1.0 / abg
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if Q(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    e3 = 0.5 * (lo + hi)
    for _ in range(8):
        r = Q(e3)
        if abs(r) <= 1e-12:
            break
        e3 -= r / dQ(e3)
    return np.array([p.beta * p.gamma * e3, p.gamma * e3, e3])


def field_noyes(p):
    """Field-Noyes oscillator (Belousov-Zhabotinskii reaction):

        dx1 = s*(x2 - x1*x2 + x1 - q*x1**2)
        dx2 = (x3*f - x2 - x1*x2)/s
        dx3 = w*(x1 - x3)

    The box [1, 1/q] x [q*f/(1+q), f/(2q)] x [1, 1/q] is invariant for
    q << 1.  The Jacobian keeps a fixed sign pattern on the interior of
    the box; flipping the orientation of x2 and x3 maps it onto the
    two-positive normal form, so the model carries the signature
    (1, -1, -1).
    """
    if not isinstance(p, FieldNoyesParams):
        p = FieldNoyesParams(**p)
    s, q, fq, w = p.s, p.q, p.f, p.w

    def f(x):
        x = np.asarray(x, dtype=float)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        return np.stack(
            [
                s * (x2 - x1 * x2 + x1 - q * x1 * x1),
                (x3 * fq - x2 - x1 * x2) / s,
                w * (x1 - x3),
            ],
            axis=-1,
        )

    def jac(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        base = x.shape[:-1]
        J = np.zeros(base + (3, 3))
        J[..., 0, 0] = s * (1.0 - x2 - 2.0 * q * x1)
        J[..., 0, 1] = s * (1.0 - x1)
        J[..., 1, 0] = -x2 / s
        J[..., 1, 1] = -(1.0 + x1) / s
        J[..., 1, 2] = fq / s
        J[..., 2, 0] = w
        J[..., 2, 2] = -w
        return J

    box = Box3(
        np.array([1.0, q * fq / (1.0 + q), 1.0]),
        np.array([1.0 / q, fq / (2.0 * q), 1.0 / q]),
    )
    return SystemModel(
        name="field-noyes",
        params={"s": s, "q": q, "f": fq, "w": w},
        f=f,
        jac=jac,
        box=box,
        sign_certificate=SignPattern.from_symbols(
            [["*", "-", "0"], ["-", "*", "+"], ["+", "0", "*"]]
        ),
        variation_signature=np.array([1.0, -1.0, -1.0]),
        equilibrium=lambda: field_noyes_equilibrium(p),
        equilibrium_unique=True,
        uniqueness_note=(
            "analytic: the positive equilibrium is in closed form; the only "
            "other equilibrium in the non-negative orthant is the origin, "
            "which lies outside the box"
        ),
        kernel=("field_noyes", (s, q, fq, w)),
    )


def field_noyes_equilibrium(p):
    """Closed-form positive equilibrium of the Field-Noyes model.

    e2 admits two algebraically equal forms; e1*f/(1+e1) is used because
    (1 + f - q*e1)/2 loses digits to cancellation when q*e1 approaches
    1 + f.  Both are computed and must agree to 1e-8 relative.
    """
    if not isinstance(p, FieldNoyesParams):
        p = FieldNoyesParams(**p)
    s, q, fq = p.s, p.q, p.f
    root = math.sqrt((1.0 - fq - q) ** 2 + 4.0 * q * (1.0 + fq))
    e1 = (1.0 - fq - q + root) / (2.0 * q)
    e2 = e1 * fq / (1.0 + e1)
    e2_alt = (1.0 + fq - q * e1) / 2.0
    if abs(e2 - e2_alt) > 1e-8 * max(1.0, abs(e2)):
        raise ArithmeticError(
            f"equilibrium branches disagree: {e2!r} vs {e2_alt!r} (params {p})"
        )
    return np.array([e1, e2, e1])


def field_noyes_det_identity(p):
    """Jacobian determinant at the positive equilibrium, in closed form:
    -w * e1 * sqrt((1-f-q)**2 + 4q(1+f))."""
    if not isinstance(p, FieldNoyesParams):
        p = FieldNoyesParams(**p)
    root = math.sqrt((1.0 - p.f - p.q) ** 2 + 4.0 * p.q * (1.0 + p.f))
    e1 = (1.0 - p.f - p.q + root) / (2.0 * p.q)
    return -p.w * e1 * root


def _fd_jacobian(f):
    def jac(x):
        x = np.asarray(x, dtype=float)
        base = x.shape[:-1]
        J = np.empty(base + (3, 3))
        for i in range(3):
            h = 1e-6 * (1.0 + np.abs(x[..., i]))
            xp = x.copy()
            xm = x.copy()
            xp[..., i] += h
            xm[..., i] -= h
            J[..., :, i] = (f(xp) - f(xm)) / (2.0 * h)[..., None]
        return J

    return jac


def from_config(cfg):
    """Build a :class:`SystemModel` from a configuration mapping.

    Expected keys::

        name:          optional string
        params:        {name: value}
        f:             [expr1, expr2, expr3]   (strings over x1,x2,x3 and params)
        box:           {lower: [..], upper: [..]}
        sign_pattern:  optional 3x3 grid of "*", "0", "+", "-"
        signature:     optional [1, +-1, +-1]

    The Jacobian is differentiated from the expression tree (exact,
    forward mode).  When no expressions are available a plain callable
    ``f`` may be passed instead, in which case the Jacobian falls back to
    central finite differences.
    """
    params = dict(cfg.get("params", {}))
    fspec = cfg["f"]
    if callable(fspec):
        f = fspec
        jac = cfg.get("jac") or _fd_jacobian(f)
    else:
        vf = _expr.VectorField(list(fspec), params)
        f = vf
        jac = vf.jacobian
    box = Box3(np.asarray(cfg["box"]["lower"], float), np.asarray(cfg["box"]["upper"], float))
    pattern = None
    if cfg.get("sign_pattern") is not None:
        pattern = SignPattern.from_symbols(cfg["sign_pattern"])
    signature = None
    if cfg.get("signature") is not None:
        signature = np.asarray(cfg["signature"], dtype=float)
        if signature.shape != (3,) or signature[0] != 1.0 or not np.all(np.abs(signature) == 1.0):
            raise ValueError("signature must be [1, +-1, +-1]")
    return SystemModel(
        name=str(cfg.get("name", "custom")),
        params=params,
        f=f,
        jac=jac,
        box=box,
        sign_certificate=pattern,
        variation_signature=signature,
        equilibrium=None,
        equilibrium_unique=False,
        uniqueness_note="",
        kernel=None,
    )
