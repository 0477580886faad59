"""Sign-variation calculus on real vectors.

Three variation counts are used throughout the package: ``sigma`` for
vectors without zero entries, ``s_minus`` (zeros deleted before counting)
and ``s_plus`` (zeros replaced by the worst-case choice of +-1).  The sets
of vectors with at most k-1 variations form nested cones; membership in
those cones is what the flow of a k-cooperative system preserves.

Zero entries are taken literally: an entry counts as zero only when it is
bit-exactly 0.0.  Callers working with floating-point data should pass
their vectors through :func:`snap` first with an explicit tolerance.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

__all__ = [
    "snap",
    "sigma",
    "s_minus",
    "s_plus",
    "ConeMembership",
    "cone_membership",
]


def snap(x, tol=1e-12):
    """Copy ``x`` with every entry of magnitude <= ``tol`` replaced by 0.0.

    Sign-variation counts are discontinuous in the entries, so the policy
    for flushing near-zeros must be explicit and under caller control.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    x = np.array(x, dtype=float)
    x[np.abs(x) <= tol] = 0.0
    return x


def _check_vector(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("expected a 1-D vector with at least one entry")
    if not np.all(np.isfinite(x)):
        raise ValueError("entries must be finite")
    return x


def sigma(x):
    """Number of adjacent sign changes in a vector with no zero entries."""
    x = _check_vector(x)
    if np.any(x == 0.0):
        raise ValueError("sigma is undefined for vectors with zero entries")
    s = np.sign(x)
    return int(np.sum(s[:-1] != s[1:]))


def s_minus(x):
    """Sign variations after deleting all zero entries (0 for the zero vector)."""
    x = _check_vector(x)
    y = x[x != 0.0]
    if y.size == 0:
        return 0
    return sigma(y)


def s_plus(x):
    """Maximum sign variations over all +-1 substitutions of the zero entries.

    Exhaustive over the 2**z substitutions, where z is the number of zero
    entries; vectors here are short (n <= 8), so enumeration is cheap.
    For the zero vector this yields n-1 (alternating substitution).
    """
    x = _check_vector(x)
    zero_idx = np.flatnonzero(x == 0.0)
    if zero_idx.size == 0:
        return sigma(x)
    if zero_idx.size == x.size:
        return x.size - 1
    best = 0
    y = x.copy()
    for signs in product((-1.0, 1.0), repeat=zero_idx.size):
        y[zero_idx] = signs
        best = max(best, sigma(y))
    return best


@dataclass(frozen=True)
class ConeMembership:
    """Membership of a vector in the closed / open variation cones of order k.

    ``in_p_plus`` implies ``in_p_minus``: the open cone (at most k-1
    variations under every zero substitution) is the interior of the
    closed one (at most k-1 variations after zero deletion).
    """

    k: int
    in_p_minus: bool
    in_p_plus: bool


def cone_membership(x, k):
    """Test whether ``x`` lies in the closed/open cones of rank ``k``."""
    x = _check_vector(x)
    if not 1 <= k <= x.size:
        raise ValueError(f"k must be in 1..{x.size}, got {k}")
    return ConeMembership(
        k=k,
        in_p_minus=s_minus(x) <= k - 1,
        in_p_plus=s_plus(x) <= k - 1,
    )
