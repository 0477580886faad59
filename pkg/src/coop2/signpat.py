"""Qualitative (sign-pattern) matrix analysis.

A sign pattern assigns each matrix entry one of four symbols: free ("*"),
exactly zero ("0"), non-negative ("+"), or non-positive ("-").  Conformance
of a numerical matrix to a pattern, together with irreducibility of its
adjacency graph, is the checkable hypothesis behind the flow-monotonicity
certificates in :mod:`coop2.certify`.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

__all__ = [
    "Sign",
    "SignPattern",
    "conforms",
    "two_positive_pattern",
    "is_metzler",
    "is_irreducible",
    "exp_minors_positive",
    "pattern_implies",
    "find_variation_signature",
]


class Sign(IntEnum):
    ANY = 0
    ZERO = 1
    NONNEG = 2
    NONPOS = 3


_SYMBOLS = {"*": Sign.ANY, "0": Sign.ZERO, "+": Sign.NONNEG, "-": Sign.NONPOS}
_NAMES = {v: k for k, v in _SYMBOLS.items()}


@dataclass(frozen=True)
class SignPattern:
    """Square grid of qualitative entries."""

    codes: np.ndarray  # int8, values from Sign

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int8)
        if codes.ndim != 2 or codes.shape[0] != codes.shape[1]:
            raise ValueError("sign pattern must be square")
        if not np.all((codes >= 0) & (codes <= 3)):
            raise ValueError("invalid sign code")
        object.__setattr__(self, "codes", codes)

    @property
    def n(self):
        return self.codes.shape[0]

    @classmethod
    def from_symbols(cls, rows):
        """Build from nested lists of the symbols ``"*", "0", "+", "-"``."""
        try:
            codes = [[_SYMBOLS[s] for s in row] for row in rows]
        except KeyError as exc:
            raise ValueError(f"unknown sign symbol {exc.args[0]!r}") from None
        return cls(np.array(codes, dtype=np.int8))

    def symbols(self):
        return [[_NAMES[Sign(c)] for c in row] for row in self.codes]

    def transform(self, signs):
        """Pattern of D A D for a diagonal signature D = diag(signs)."""
        signs = np.asarray(signs)
        flip = np.outer(signs, signs) < 0
        codes = self.codes.copy()
        swap = flip & (codes == Sign.NONNEG)
        swap_back = flip & (codes == Sign.NONPOS)
        codes[swap] = Sign.NONPOS
        codes[swap_back] = Sign.NONNEG
        return SignPattern(codes)

    def __repr__(self):
        body = "; ".join(" ".join(row) for row in self.symbols())
        return f"SignPattern[{body}]"


def conforms(A, pattern, tol=0.0):
    """True iff every entry of ``A`` satisfies its pattern symbol up to ``tol``.

    Zero symbols require |a| <= tol, "+" requires a >= -tol, "-" requires
    a <= tol.  Broadcasts over leading axes of ``A`` and returns a boolean
    array in that case.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    A = np.asarray(A, dtype=float)
    n = pattern.n
    if A.shape[-2:] != (n, n):
        raise ValueError(f"matrix shape {A.shape[-2:]} does not match pattern ({n}, {n})")
    codes = pattern.codes
    ok = np.ones(A.shape[:-2], dtype=bool)
    ok &= np.all(np.where(codes == Sign.ZERO, np.abs(A) <= tol, True), axis=(-2, -1))
    ok &= np.all(np.where(codes == Sign.NONNEG, A >= -tol, True), axis=(-2, -1))
    ok &= np.all(np.where(codes == Sign.NONPOS, A <= tol, True), axis=(-2, -1))
    if ok.ndim == 0:
        return bool(ok)
    return ok


def two_positive_pattern(n):
    """Sign pattern under which a linear flow preserves vectors with <= 1
    sign variation: non-negative tridiagonal couplings, non-positive corner
    feedback at (1, n) and (n, 1), free diagonal, zeros elsewhere.

    Defined for n >= 3, where the corner and tridiagonal roles are distinct.
    """
    if n < 3:
        raise ValueError("pattern requires n >= 3")
    codes = np.full((n, n), Sign.ZERO, dtype=np.int8)
    np.fill_diagonal(codes, Sign.ANY)
    for i in range(n - 1):
        codes[i, i + 1] = Sign.NONNEG
        codes[i + 1, i] = Sign.NONNEG
    codes[0, n - 1] = Sign.NONPOS
    codes[n - 1, 0] = Sign.NONPOS
    return SignPattern(codes)


def is_metzler(A, tol=1e-12):
    """True iff all off-diagonal entries are >= -tol."""
    A = np.asarray(A, dtype=float)
    off = A[~np.eye(A.shape[0], dtype=bool)]
    return bool(np.all(off >= -tol))


def is_irreducible(A, tol=1e-12):
    """True iff the digraph with an edge i->j whenever |a_ij| > tol (i != j)
    is strongly connected (Tarjan's algorithm, iterative)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 1:
        return True
    adj = [np.flatnonzero((np.abs(A[i]) > tol) & (np.arange(n) != i)) for i in range(n)]

    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    counter = 0
    n_components = 0

    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for j in range(pi, len(adj[v])):
                w = adj[v][j]
                if index[w] == -1:
                    work[-1] = (v, j + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                n_components += 1
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    if w == v:
                        break
    return n_components == 1


def exp_minors_positive(A):
    """Numerical witness that the flow of ``xdot = A x`` strictly contracts
    the one-variation cone: all nine 2x2 minors of exp(A) must be strictly
    positive (A is 3x3)."""
    from .mat3 import expm3

    E = expm3(A)
    for rows in ((0, 1), (0, 2), (1, 2)):
        for cols in ((0, 1), (0, 2), (1, 2)):
            minor = (
                E[rows[0], cols[0]] * E[rows[1], cols[1]]
                - E[rows[0], cols[1]] * E[rows[1], cols[0]]
            )
            if not minor > 0.0:
                return False
    return True


def pattern_implies(p, q):
    """True iff every matrix conforming to ``p`` also conforms to ``q``."""
    if p.n != q.n:
        raise ValueError("pattern dimensions differ")
    pc, qc = p.codes, q.codes
    ok = qc == Sign.ANY
    ok |= pc == qc
    ok |= (pc == Sign.ZERO) & ((qc == Sign.NONNEG) | (qc == Sign.NONPOS))
    return bool(np.all(ok))


def find_variation_signature(jacs, tol=1e-12):
    """Search for a diagonal signature D = diag(1, s2, s3, ...) such that
    D J D conforms to :func:`two_positive_pattern` for every matrix in
    ``jacs`` (an array of shape (..., n, n)).  Returns the sign vector, or
    None when no signature works.

    Sign-variation monotonicity of a flow may hold only after flipping the
    orientation of some coordinates; the signature makes that coordinate
    change explicit.
    """
    jacs = np.asarray(jacs, dtype=float)
    n = jacs.shape[-1]
    target = two_positive_pattern(n)
    from itertools import product as _product

    for tail in _product((1.0, -1.0), repeat=n - 1):
        signs = np.array((1.0,) + tail)
        scaled = jacs * np.outer(signs, signs)
        if np.all(conforms(scaled, target, tol)):
            return signs
    return None
