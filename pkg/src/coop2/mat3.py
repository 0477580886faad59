"""Dense 3x3 linear algebra for the certification pipeline.

Everything here is specialised to 3x3 real matrices: closed-form
determinant and characteristic polynomial, a trigonometric/Cardano cubic
solver with Newton polish, the Routh stability test for monic cubics, a
scaling-and-squaring matrix exponential, and the spectral machinery for
saddle-type equilibria of 2-cooperative systems (classification of the
one-stable/two-unstable eigenvalue split and the real block-Schur form
used to build equilibrium-free invariant sets).
"""

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "SpectralClassificationError",
    "CharPoly3",
    "Spectrum3",
    "SchurCase",
    "BlockSchur3",
    "RouthVerdict",
    "det3",
    "charpoly3",
    "cubic_roots",
    "routh_classify",
    "expm3",
    "classify_saddle",
    "block_schur3",
    "kappa",
]


class SpectralClassificationError(RuntimeError):
    """A spectral property required for classification failed to hold.

    Raised either because the input matrix does not satisfy the
    preconditions (unstable, negative determinant, variation-monotone
    flow) or because the computation broke down numerically; the message
    carries diagnostics.
    """


@dataclass(frozen=True)
class CharPoly3:
    """Monic cubic s^3 + c2 s^2 + c1 s + c0."""

    c2: float
    c1: float
    c0: float

    def __call__(self, s):
        return ((s + self.c2) * s + self.c1) * s + self.c0

    def derivative(self, s):
        return (3.0 * s + 2.0 * self.c2) * s + self.c1

    def coeffs(self):
        return (self.c2, self.c1, self.c0)


class RouthVerdict(Enum):
    HURWITZ = "hurwitz"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


class SchurCase(Enum):
    REAL_PAIR = "real_pair"
    COMPLEX_PAIR = "complex_pair"
    DEFECTIVE_PAIR = "defective_pair"


@dataclass(frozen=True)
class Spectrum3:
    """Spectrum of a saddle-type 3x3 matrix.

    ``lambda_real`` is the single negative real eigenvalue; ``pair`` holds
    the remaining two eigenvalues (exactly conjugate when complex, ordered
    with non-negative imaginary part first); ``zeta`` is the unit
    eigenvector of ``lambda_real`` normalised so its first non-zero
    component is positive.  For matrices whose flow contracts the
    one-variation cone, ``zeta`` alternates in sign.
    """

    lambda_real: float
    pair: tuple
    zeta: np.ndarray


@dataclass(frozen=True)
class BlockSchur3:
    """Real block-Schur data: T^-1 A T = [[lambda3,0,0],[0,u1,v1/delta],[0,v2*delta,u2]].

    The first column of T is the stable eigenvector, so T^-1 maps it to
    [1,0,0]; the trailing 2x2 block carries the unstable pair.  ``delta``
    rescales the off-diagonal coupling; for a defective pair it is chosen
    large enough that the symmetric part of the block stays positive
    definite.
    """

    T: np.ndarray
    lambda3: float
    u1: float
    u2: float
    v1: float
    v2: float
    delta: float
    case: SchurCase

    def block(self):
        return np.array(
            [
                [self.lambda3, 0.0, 0.0],
                [0.0, self.u1, self.v1 / self.delta],
                [0.0, self.v2 * self.delta, self.u2],
            ]
        )


def _as_mat3(A):
    A = np.asarray(A, dtype=float)
    if A.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    return A


def det3(A):
    """Determinant by cofactor expansion along the first row."""
    A = _as_mat3(A)
    return float(
        A[0, 0] * (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
        - A[0, 1] * (A[1, 0] * A[2, 2] - A[1, 2] * A[2, 0])
        + A[0, 2] * (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0])
    )


def charpoly3(A):
    """Characteristic polynomial det(sI - A) as a monic cubic.

    c2 = -trace, c1 = sum of principal 2x2 minors, c0 = -det.
    """
    A = _as_mat3(A)
    c2 = -float(A[0, 0] + A[1, 1] + A[2, 2])
    c1 = float(
        (A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])
        + (A[0, 0] * A[2, 2] - A[0, 2] * A[2, 0])
        + (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
    )
    c0 = -det3(A)
    return CharPoly3(c2, c1, c0)


def _polish_root(p, r):
    # one Newton step; skip if the derivative is tiny (multiple root)
    d = p.derivative(r)
    if abs(d) > 1e-30:
        r = r - p(r) / d
    return r


def cubic_roots(p):
    """All three roots of a monic cubic, as complex numbers.

    Closed-form (trigonometric for three real roots, Cardano otherwise)
    followed by one Newton polish per root.  A complex pair is returned
    exactly conjugate, imaginary-positive member first.
    """
    if not isinstance(p, CharPoly3):
        p = CharPoly3(*p)
    c2, c1, c0 = p.c2, p.c1, p.c0
    # depressed cubic t^3 + a t + b with s = t - c2/3
    shift = c2 / 3.0
    a = c1 - c2 * c2 / 3.0
    b = (2.0 * c2 * c2 * c2 / 27.0) - c2 * c1 / 3.0 + c0
    scale = max(1.0, abs(a)) ** 3 + b * b
    disc = -4.0 * a * a * a - 27.0 * b * b

    if abs(a) < 1e-14 * max(1.0, abs(b)) ** (2.0 / 3.0) and abs(b) < 1e-300:
        t_roots = [0.0, 0.0, 0.0]
        real_count = 3
    elif disc >= -1e-14 * scale and a < 0.0:
        # three real roots (possibly repeated)
        m = 2.0 * math.sqrt(-a / 3.0)
        arg = 3.0 * b / (a * m)
        arg = min(1.0, max(-1.0, arg))
        theta = math.acos(arg) / 3.0
        t_roots = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]
        real_count = 3
    else:
        # one real root, Cardano with cancellation-safe branch
        sq = cmath.sqrt(b * b / 4.0 + a * a * a / 27.0)
        if sq.imag == 0.0:
            sq = sq.real
            u3 = -b / 2.0 - sq if b > 0.0 else -b / 2.0 + sq
            u = math.copysign(abs(u3) ** (1.0 / 3.0), u3)
            t1 = u - a / (3.0 * u) if u != 0.0 else 0.0
        else:
            u = (-b / 2.0 + sq) ** (1.0 / 3.0)
            t1 = (u - a / (3.0 * u)).real
        t_roots = [t1]
        real_count = 1

    roots = []
    if real_count == 3:
        for t in t_roots:
            r = _polish_root(p, t - shift)
            roots.append(complex(r, 0.0))
    else:
        r1 = _polish_root(p, t_roots[0] - shift)
        # deflate by coefficient relations: p(s) = (s - r1)(s^2 + bq s + cq)
        bq = c2 + r1
        cq = c1 + r1 * bq
        disc2 = bq * bq - 4.0 * cq
        if disc2 >= 0.0:
            sq2 = math.sqrt(disc2)
            q = -(bq + math.copysign(sq2, bq)) / 2.0
            r2 = q
            r3 = cq / q if q != 0.0 else -bq - q
            roots = [complex(r1), complex(_polish_root(p, r2)), complex(_polish_root(p, r3))]
        else:
            re = -bq / 2.0
            im = math.sqrt(-disc2) / 2.0
            z = complex(re, im)
            d = (3.0 * z + 2.0 * c2) * z + c1
            if abs(d) > 1e-30:
                z = z - (((z + c2) * z + c1) * z + c0) / d
            z = complex(z.real, abs(z.imag))
            roots = [complex(r1), z, z.conjugate()]
    return np.array(roots, dtype=complex)


def routh_classify(p, tol=1e-12):
    """Routh test for a monic cubic: Hurwitz iff c2 > 0, c0 > 0 and
    c2*c1 > c0.  Any strictly reversed inequality certifies an eigenvalue
    with positive real part, so it wins over an equality elsewhere;
    marginal means no strict reversal but some check inside ``tol`` of
    zero."""
    if not isinstance(p, CharPoly3):
        p = CharPoly3(*p)
    checks = (p.c2, p.c0, p.c2 * p.c1 - p.c0)
    if any(v < -tol for v in checks):
        return RouthVerdict.UNSTABLE
    if any(abs(v) <= tol for v in checks):
        return RouthVerdict.MARGINAL
    return RouthVerdict.HURWITZ


def expm3(A):
    """Matrix exponential by scaling and squaring with a Taylor core.

    The argument is scaled so its infinity norm is <= 0.5, a degree-18
    Taylor polynomial is evaluated by Horner's rule, and the result is
    squared back up.  Relative accuracy is comfortably below 1e-10 for
    norms up to a few hundred.
    """
    A = _as_mat3(A)
    norm = float(np.max(np.sum(np.abs(A), axis=1)))
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
    B = A / (2.0**s)
    E = np.eye(3)
    for k in range(18, 0, -1):
        E = np.eye(3) + (B @ E) / k
    for _ in range(s):
        E = E @ E
    return E


def _adjugate(M):
    # transpose of the cofactor matrix; works for complex input
    out = np.empty_like(M)
    out[0, 0] = M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1]
    out[1, 0] = -(M[1, 0] * M[2, 2] - M[1, 2] * M[2, 0])
    out[2, 0] = M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0]
    out[0, 1] = -(M[0, 1] * M[2, 2] - M[0, 2] * M[2, 1])
    out[1, 1] = M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
    out[2, 1] = -(M[0, 0] * M[2, 1] - M[0, 1] * M[2, 0])
    out[0, 2] = M[0, 1] * M[1, 2] - M[0, 2] * M[1, 1]
    out[1, 2] = -(M[0, 0] * M[1, 2] - M[0, 2] * M[1, 0])
    out[2, 2] = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    return out


def _eigvec(A, lam):
    """Eigenvector for a simple eigenvalue via the adjugate of A - lam*I:
    the adjugate of a rank-2 matrix has rank one and its non-zero columns
    span the kernel.  No iteration needed."""
    M = A.astype(complex) - lam * np.eye(3)
    adj = _adjugate(M)
    norms = np.linalg.norm(adj, axis=0)
    col = int(np.argmax(norms))
    if norms[col] == 0.0:
        raise SpectralClassificationError(
            f"adjugate vanished for eigenvalue {lam}: eigenvalue not simple or breakdown"
        )
    v = adj[:, col]
    return v / np.linalg.norm(v)


def _fix_sign(v, tol=0.0):
    for x in v:
        if abs(x) > tol:
            return v if x > 0 else -v
    return v


def classify_saddle(A, zero_snap=1e-10, require_alternation=True):
    """Classify a 3x3 matrix as a saddle of the cone-monotone type.

    Expects an unstable matrix with negative determinant whose flow is
    strongly monotone on the one-variation cone (the caller establishes
    that through :mod:`coop2.signpat`).  Verifies that the spectrum splits
    into one negative real eigenvalue and a pair with positive real part,
    and that the stable eigenvector alternates in sign (two sign
    variations after snapping entries below ``zero_snap``).  Synthetic
    matrices without the monotonicity structure can opt out of the
    eigenvector check with ``require_alternation=False``.

    Raises :class:`SpectralClassificationError` with diagnostics when any
    of those properties fails.
    """
    from . import signvar

    A = _as_mat3(A)
    p = charpoly3(A)
    d = det3(A)
    if not d < 0.0:
        raise SpectralClassificationError(f"det(A) = {d:.6g} is not negative")
    verdict = routh_classify(p)
    if verdict is not RouthVerdict.UNSTABLE:
        raise SpectralClassificationError(f"matrix is not strictly unstable (Routh: {verdict.value})")

    roots = cubic_roots(p)
    scale = 1.0 + max(abs(r) for r in roots)
    is_real = np.abs(roots.imag) <= 1e-9 * scale
    neg_real = [r.real for r, re in zip(roots, is_real) if re and r.real < 0.0]
    if len(neg_real) != 1:
        raise SpectralClassificationError(
            f"expected exactly one negative real eigenvalue, got {roots}"
        )
    lam3 = neg_real[0]
    others = sorted(
        (r for r in roots if not (abs(r.imag) <= 1e-9 * scale and r.real == lam3)),
        key=lambda r: -r.imag,
    )
    # guard against picking the same root twice when values coincide
    if len(others) != 2:
        others = [r for r in roots if r.real != lam3 or abs(r.imag) > 1e-9 * scale]
    if len(others) != 2 or any(r.real <= 0.0 for r in others):
        raise SpectralClassificationError(
            f"unstable pair does not have positive real part: {roots}"
        )
    if abs(others[0].imag) > 1e-9 * scale:
        im = (abs(others[0].imag) + abs(others[1].imag)) / 2.0
        re = (others[0].real + others[1].real) / 2.0
        pair = (complex(re, im), complex(re, -im))
    else:
        pair = (complex(others[0].real), complex(others[1].real))

    zeta = _eigvec(A, lam3)
    if np.max(np.abs(zeta.imag)) > 1e-12:
        raise SpectralClassificationError("stable eigenvector is not real")
    zeta = _fix_sign(zeta.real, tol=zero_snap)
    resid = np.linalg.norm(A @ zeta - lam3 * zeta)
    a_norm = np.linalg.norm(A)
    if resid > 1e-8 * max(1.0, a_norm):
        raise SpectralClassificationError(
            f"eigenvector residual {resid:.3g} exceeds 1e-8 * ||A|| = {1e-8 * a_norm:.3g}"
        )
    if require_alternation:
        snapped = signvar.snap(zeta, zero_snap)
        if signvar.s_minus(snapped) != 2:
            raise SpectralClassificationError(
                f"stable eigenvector {zeta} does not alternate in sign "
                "(flow is likely not strongly monotone on the one-variation cone)"
            )
    return Spectrum3(lambda_real=float(lam3), pair=pair, zeta=zeta)


def block_schur3(A, spec, cond_limit=1e12):
    """Real block-Schur form separating the stable eigendirection.

    Builds an invertible T whose first column is the stable eigenvector
    and whose remaining columns span the invariant subspace of the
    unstable pair, so that T^-1 A T has the arrow form stored in
    :class:`BlockSchur3`.  Three cases: distinct real pair (v1 = v2 = 0,
    delta = 1), complex pair (u1 = u2, v1 = -v2, delta = 1), and a
    defective double eigenvalue u (v1 = 1, v2 = 0) where delta = 1/u,
    strictly above the 1/(2u) threshold that keeps the symmetric part of
    the block positive definite.
    """
    A = _as_mat3(A)
    lam3 = spec.lambda_real
    p = charpoly3(A)
    # quadratic factor of the unstable pair: s^2 + bq s + cq
    bq = p.c2 + lam3
    cq = -p.c0 / lam3
    disc = bq * bq - 4.0 * cq
    tol = 1e-8 * max(1.0, bq * bq, abs(cq))

    zeta = spec.zeta
    if disc > tol:
        case = SchurCase.REAL_PAIR
        sq = math.sqrt(disc)
        lam1 = (-bq + sq) / 2.0
        lam2 = (-bq - sq) / 2.0
        w1 = _eigvec(A, lam1).real
        w2 = _eigvec(A, lam2).real
        T = np.column_stack([zeta, w1 / np.linalg.norm(w1), w2 / np.linalg.norm(w2)])
        u1, u2, v1, v2, delta = lam1, lam2, 0.0, 0.0, 1.0
    elif disc < -tol:
        case = SchurCase.COMPLEX_PAIR
        u = -bq / 2.0
        v = math.sqrt(-disc) / 2.0
        w = _eigvec(A, complex(u, v))
        wr, wi = w.real, w.imag
        if np.linalg.norm(wi) < 1e-14:
            raise SpectralClassificationError("complex pair produced a real eigenvector")
        T = np.column_stack([zeta, wr, wi])
        u1, u2, v1, v2, delta = u, u, v, -v, 1.0
    else:
        case = SchurCase.DEFECTIVE_PAIR
        u = -bq / 2.0
        if u <= 0.0:
            raise SpectralClassificationError(f"defective eigenvalue {u:.6g} is not positive")
        w1 = _eigvec(A, u).real
        # Jordan chain: (A - u I) w2 = w1 is consistent since the
        # eigenvalue has algebraic multiplicity 2 but geometric 1
        M = A - u * np.eye(3)
        w2, *_ = np.linalg.lstsq(M, w1, rcond=None)
        resid = np.linalg.norm(M @ w2 - w1)
        if resid > 1e-6 * max(1.0, np.linalg.norm(w1)):
            raise SpectralClassificationError(
                f"generalized eigenvector solve failed (residual {resid:.3g})"
            )
        delta = 1.0 / u
        T = np.column_stack([zeta, w1, w2 / delta])
        u1, u2, v1, v2 = u, u, 1.0, 0.0

    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SpectralClassificationError(f"similarity transform ill-conditioned (cond = {cond:.3g})")
    bs = BlockSchur3(T=T, lambda3=lam3, u1=u1, u2=u2, v1=v1, v2=v2, delta=delta, case=case)
    resid = np.linalg.norm(np.linalg.solve(T, A @ T) - bs.block())
    if resid > 1e-8 * max(1.0, np.linalg.norm(A)):
        raise SpectralClassificationError(
            f"block-Schur residual {resid:.3g} exceeds tolerance (case {case.value})"
        )
    return bs


def kappa(bs):
    """Smallest eigenvalue of the symmetric part of the unstable block.

    This is the growth constant of V = (q2^2 + q3^2)/2 along the flow
    near the equilibrium; the delta choices in :func:`block_schur3` keep
    it strictly positive.
    """
    m = (bs.v1 / bs.delta + bs.delta * bs.v2) / 2.0
    mean = (bs.u1 + bs.u2) / 2.0
    half_gap = (bs.u1 - bs.u2) / 2.0
    return float(mean - math.hypot(half_gap, m))
