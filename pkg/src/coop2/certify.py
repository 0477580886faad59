"""Certification pipeline: hypothesis checks and invariant-set construction.

For a three-dimensional system whose Jacobian keeps the two-positive sign
pattern (possibly after a diagonal +-1 coordinate signature) on an
invariant box, an unstable interior equilibrium with negative Jacobian
determinant forces every trajectory of the low-variation core region to
converge to a periodic orbit.  This module verifies those hypotheses
numerically on grids, classifies the equilibrium spectrum, and builds an
explicit equilibrium-free invariant set by cutting a cylinder around the
stable eigendirection out of the core region.

All grid-sampled constants are witnesses at a disclosed resolution, not
formal proofs.
"""

from dataclasses import dataclass

import numpy as np

from . import mat3, signvar
from .models import Box3
from .signpat import (
    conforms,
    find_variation_signature,
    is_irreducible,
    pattern_implies,
    two_positive_pattern,
)

__all__ = [
    "OrthantPartition",
    "orthant_partition",
    "Conclusion",
    "CertificationReport",
    "InvariantSetCert",
    "InvarianceCheck",
    "AngleMarginError",
    "certify_model",
    "construct_invariant_set",
    "verify_invariance",
]

# sign templates of the eight equilibrium-centred octants, 1-based order;
# the first six make up the core region (offsets with <= 1 sign variation),
# the last two are the strictly alternating octants
OCTANT_TEMPLATES = (
    (-1, -1, -1),
    (+1, -1, -1),
    (+1, +1, -1),
    (+1, +1, +1),
    (-1, +1, +1),
    (-1, -1, +1),
    (+1, -1, +1),
    (-1, +1, -1),
)


class AngleMarginError(RuntimeError):
    """The sampled directions reached the forbidden cone (xi <= 0)."""


@dataclass(frozen=True)
class OrthantPartition:
    """Partition of a box into eight closed octants around an interior point.

    Membership is evaluated on signature-scaled offsets z = U (x - e); the
    core region (octants 1..6) coincides with the set of x in the box whose
    offset has at most one sign variation.
    """

    box: Box3
    e: np.ndarray
    signature: np.ndarray

    def offsets(self, x):
        return self.signature * (np.asarray(x, dtype=float) - self.e)

    def octant_labels(self, x):
        """1-based labels of every closed octant containing ``x`` (empty
        tuple when x is outside the box)."""
        if not self.box.contains(x):
            return ()
        z = self.offsets(x)
        labels = []
        for idx, tpl in enumerate(OCTANT_TEMPLATES, start=1):
            if all(s * zi >= 0.0 for s, zi in zip(tpl, z)):
                labels.append(idx)
        return tuple(labels)

    def in_core(self, x, snap_tol=1e-12):
        """Sign-variation rule: x in box and s_minus(U(x-e)) <= 1."""
        if not self.box.contains(x):
            return False
        z = signvar.snap(self.offsets(x), snap_tol)
        return signvar.s_minus(z) <= 1

    def in_core_by_union(self, x):
        """Direct union rule over the six core octants."""
        labels = self.octant_labels(x)
        return any(lbl <= 6 for lbl in labels)

    def forbidden_depth(self, x):
        """Distance x protrudes into the interior of the two alternating
        octants (0 on the core region); the smallest coordinate move that
        returns the offset to an octant boundary."""
        z = self.offsets(x)
        for tpl in OCTANT_TEMPLATES[6:]:
            if all(s * zi > 0.0 for s, zi in zip(tpl, z)):
                return float(np.min(np.abs(z)))
        return 0.0


def orthant_partition(box, e, signature=None):
    """Build the octant partition; ``e`` must lie in the open interior."""
    e = np.asarray(e, dtype=float)
    if not box.strictly_contains(e):
        raise ValueError(f"centre {e} is not in the interior of the box")
    sig = np.ones(3) if signature is None else np.asarray(signature, dtype=float)
    return OrthantPartition(box=box, e=e, signature=sig)


@dataclass(frozen=True)
class Conclusion:
    kind: str  # "certified" | "refuted" | "inconclusive"
    reason: str = ""


@dataclass
class CertificationReport:
    """Outcome of the hypothesis checks plus the spectral data."""

    model_name: str
    params: dict
    grid_n: int
    signature: np.ndarray
    pattern_ok: float
    pattern_note: str
    two_positive: bool
    irreducible_ok: float
    equilibrium: np.ndarray | None
    equilibrium_interior: bool
    unique_in_box: bool
    uniqueness_method: str
    charpoly: mat3.CharPoly3 | None
    routh: mat3.RouthVerdict | None
    det_j: float | None
    det_negative: bool
    spectrum: mat3.Spectrum3 | None
    schur: mat3.BlockSchur3 | None
    conclusion: Conclusion

    @property
    def certified(self):
        return self.conclusion.kind == "certified"


@dataclass
class InvariantSetCert:
    """Constants of the equilibrium-free invariant set.

    ``xi`` is the angle margin between core-region directions and the
    stable eigendirection (in transformed coordinates); ``M`` bounds the
    quadratic remainder of the vector field; ``kappa`` is the radial
    growth rate of V = (q2^2 + q3^2)/2; ``M_prime`` bounds the remainder
    term against V^(3/2); any eta in (0, eta_star] cuts out an invariant
    set, and ``eta`` is the value chosen here.
    """

    xi: float
    M: float
    kappa: float
    M_prime: float
    eta_star: float
    eta: float
    grid_resolution: str


@dataclass
class InvarianceCheck:
    """Empirical invariance report for trajectories started in the set."""

    n_traj: int
    horizon: float
    eta: float
    tol: float
    max_core_excursion: float
    min_v: float
    min_distance_to_equilibrium: float
    n_excursions: int
    v_ok: bool
    passed: bool


def _newton_equilibria(model, seeds, f_scale_tol=1e-9):
    """Multi-start Newton search for roots of f in the box (evidence of
    uniqueness for user-supplied models, never a proof)."""
    x = np.array(seeds, dtype=float)
    for _ in range(50):
        fx = model.f(x)
        J = model.jac(x)
        try:
            dx = np.linalg.solve(J, fx[..., None])[..., 0]
        except np.linalg.LinAlgError:
            dx = (np.linalg.pinv(J) @ fx[..., None])[..., 0]
        x = x - dx
        bad = ~np.all(np.isfinite(x), axis=-1)
        x[bad] = np.nan
    ok = np.all(np.isfinite(x), axis=-1)
    x = x[ok]
    if len(x) == 0:
        return []
    resid = np.max(np.abs(model.f(x)), axis=-1)
    scale = np.maximum(1.0, np.max(np.abs(x), axis=-1))
    x = x[resid <= f_scale_tol * scale]
    roots = []
    box_scale = max(1.0, float(np.max(model.box.extent)))
    for cand in x:
        if not model.box.contains(cand, tol=1e-9 * box_scale):
            continue
        if not any(np.linalg.norm(cand - r) <= 1e-6 * box_scale for r in roots):
            roots.append(cand)
    return roots


def certify_model(model, grid_n=11):
    """Verify the convergence-certificate hypotheses on a grid.

    Checks, in order: Jacobian sign pattern on an interior grid (exact,
    tol 0 against the model certificate; tol 1e-12 for sampled numerical
    scans), irreducibility on the same grid, equilibrium location and
    interiority, uniqueness (analytic for built-ins, multi-start Newton
    evidence otherwise), Routh instability, negative determinant, and the
    spectral classification with its block-Schur form.  The conclusion is
    certified only when every check passes.
    """
    if grid_n < 5:
        raise ValueError("grid_n must be >= 5")
    box = model.box
    grid = box.interior_grid(grid_n)
    jacs = model.jac(grid)

    failures = []  # (kind, reason) in hypothesis order

    # --- sign pattern and signature -------------------------------------
    pattern = two_positive_pattern(3)
    if model.sign_certificate is not None:
        frac = float(np.mean(conforms(jacs, model.sign_certificate, tol=0.0)))
        note = "certificate conformance (tol 0)"
        if model.variation_signature is not None:
            signature = model.signature()
        else:
            signature = None
            for cand in ((1, 1, 1), (1, 1, -1), (1, -1, 1), (1, -1, -1)):
                sig = np.array(cand, dtype=float)
                if pattern_implies(model.sign_certificate.transform(sig), pattern):
                    signature = sig
                    break
        two_pos = signature is not None and pattern_implies(
            model.sign_certificate.transform(signature), pattern
        )
    else:
        signature = (
            model.signature()
            if model.variation_signature is not None
            else find_variation_signature(jacs, tol=1e-12)
        )
        if signature is not None:
            scaled = jacs * np.outer(signature, signature)
            frac = float(np.mean(conforms(scaled, pattern, tol=1e-12)))
            two_pos = frac == 1.0
            note = "two-positive normal form scan (tol 1e-12)"
        else:
            frac = 0.0
            two_pos = False
            note = "no diagonal signature yields the two-positive pattern"
    if signature is None:
        signature = np.ones(3)
    if frac < 1.0:
        failures.append(("refuted", f"sign pattern violated on {1.0 - frac:.1%} of grid points"))
    elif not two_pos:
        failures.append(("refuted", "sign pattern does not give the two-positive form under any signature"))

    # --- irreducibility ---------------------------------------------------
    irr = np.array([is_irreducible(J) for J in jacs])
    irr_frac = float(np.mean(irr))
    if irr_frac < 1.0:
        failures.append(
            ("inconclusive", f"irreducibility holds on only {irr_frac:.1%} of interior grid points")
        )

    # --- equilibrium ------------------------------------------------------
    e = None
    interior = False
    unique = False
    method = ""
    if model.equilibrium is not None:
        e = np.asarray(model.equilibrium(), dtype=float)
        unique = bool(model.equilibrium_unique)
        method = model.uniqueness_note or "model-supplied routine"
        if not unique:
            failures.append(("inconclusive", "model does not assert equilibrium uniqueness"))
    else:
        roots = _newton_equilibria(model, grid)
        if len(roots) == 1:
            e = roots[0]
            unique = True
            method = f"multi-start Newton from {grid_n}^3 seeds found one root (evidence, not proof)"
        elif len(roots) == 0:
            failures.append(("inconclusive", "no equilibrium found in the box"))
            method = "multi-start Newton found no root"
        else:
            e = roots[0]
            failures.append(("refuted", f"found {len(roots)} equilibria in the box"))
            method = f"multi-start Newton found {len(roots)} roots"
    if e is not None:
        interior = box.strictly_contains(e)
        if not interior:
            failures.append(("refuted", f"equilibrium {e} is not in the interior of the box"))

    # --- spectral checks ----------------------------------------------------
    poly = None
    verdict = None
    det = None
    det_neg = False
    spectrum = None
    schur = None
    if e is not None:
        Je = model.jac(e)
        poly = mat3.charpoly3(Je)
        verdict = mat3.routh_classify(poly)
        det = mat3.det3(Je)
        det_neg = det < 0.0
        if verdict is mat3.RouthVerdict.HURWITZ:
            failures.append(("refuted", "equilibrium is Hurwitz-stable (Routh test)"))
        elif verdict is mat3.RouthVerdict.MARGINAL:
            failures.append(("inconclusive", "Routh test is marginal at tolerance 1e-12"))
        if not det_neg:
            failures.append(("refuted", f"det(J(e)) = {det:.6g} is not negative"))
        if not failures:
            Jt = signature[:, None] * Je * signature[None, :]
            try:
                spectrum = mat3.classify_saddle(Jt)
                schur = mat3.block_schur3(Jt, spectrum)
            except mat3.SpectralClassificationError as exc:
                failures.append(("inconclusive", f"spectral classification failed: {exc}"))

    if failures:
        kinds = [k for k, _ in failures]
        kind = "refuted" if "refuted" in kinds else "inconclusive"
        reason = "; ".join(r for _, r in failures)
        conclusion = Conclusion(kind, reason)
    else:
        conclusion = Conclusion("certified")

    return CertificationReport(
        model_name=model.name,
        params=dict(model.params),
        grid_n=grid_n,
        signature=signature,
        pattern_ok=frac,
        pattern_note=note,
        two_positive=two_pos,
        irreducible_ok=irr_frac,
        equilibrium=e,
        equilibrium_interior=interior,
        unique_in_box=unique,
        uniqueness_method=method,
        charpoly=poly,
        routh=verdict,
        det_j=det,
        det_negative=det_neg,
        spectrum=spectrum,
        schur=schur,
        conclusion=conclusion,
    )


def _tilde_box(box, e, signature):
    a = signature * (box.lower - e)
    b = signature * (box.upper - e)
    return np.minimum(a, b), np.maximum(a, b)


def _face_directions(lo, hi, grid_n):
    """Sample every face of the six core octant boxes (inclusive grids, so
    all edges and vertices are included) and return the points as direction
    samples."""
    pts = []
    ticks = np.linspace(0.0, 1.0, grid_n + 1)
    for tpl in OCTANT_TEMPLATES[:6]:
        bounds = [(0.0, hi[i]) if s > 0 else (lo[i], 0.0) for i, s in enumerate(tpl)]
        for axis in range(3):
            for side in range(2):
                u, v = [a for a in range(3) if a != axis]
                gu = bounds[u][0] + (bounds[u][1] - bounds[u][0]) * ticks
                gv = bounds[v][0] + (bounds[v][1] - bounds[v][0]) * ticks
                face = np.zeros((grid_n + 1, grid_n + 1, 3))
                face[..., axis] = bounds[axis][side]
                face[..., u] = gu[:, None]
                face[..., v] = gv[None, :]
                pts.append(face.reshape(-1, 3))
    pts = np.concatenate(pts, axis=0)
    return pts[np.linalg.norm(pts, axis=1) > 0.0]


def _hessians(f, e):
    """Central finite-difference Hessians of each component of f at e."""
    e = np.asarray(e, dtype=float)
    h = 1e-5 * (1.0 + np.abs(e))
    H = np.zeros((3, 3, 3))
    for i in range(3):
        for j in range(i, 3):
            ei = np.zeros(3)
            ej = np.zeros(3)
            ei[i] = h[i]
            ej[j] = h[j]
            val = (
                f(e + ei + ej) - f(e + ei - ej) - f(e - ei + ej) + f(e - ei - ej)
            ) / (4.0 * h[i] * h[j])
            H[:, i, j] = val
            H[:, j, i] = val
    return H


def construct_invariant_set(model, report, grid_n=11, eta_fraction=0.5):
    """Build the equilibrium-free invariant set constants.

    The cylinder {V(q2, q3) <= eta} around the stable eigendirection is
    removed from the (transformed) core region; the certificate records
    the sampled angle margin xi, the remainder bound M, the radial growth
    rate kappa, the derived constant M', and eta_star = kappa^2 / (4 M'^2).
    Sampling is at the stated resolution: the certificate is numerical
    evidence, not a proof.
    """
    if not report.certified:
        raise ValueError("invariant set construction requires a certified report")
    schur = report.schur
    e = report.equilibrium
    sig = report.signature
    T = schur.T
    Tinv = np.linalg.inv(T)
    lo, hi = _tilde_box(model.box, e, sig)

    # angle margin: directions of the core region, sampled on all octant
    # faces; the stable eigendirection maps to [1,0,0], and xi > 0 means
    # no core direction gets within the forbidden cone around it
    dirs = _face_directions(lo, hi, grid_n)
    q = dirs @ Tinv.T
    cosines = np.abs(q[:, 0]) / np.linalg.norm(q, axis=1)
    xi = 1.0 - float(np.max(cosines))
    if xi <= 0.0:
        raise AngleMarginError(
            f"angle margin not established at this resolution (grid_n = {grid_n})"
        )

    # remainder bound M: max over the transformed box of |g_i(q)| / |q|^2,
    # where g is the vector field minus its linearisation in q-coordinates
    ticks = [np.linspace(a, b, grid_n + 1) for a, b in zip(lo, hi)]
    Z = np.stack(np.meshgrid(*ticks, indexing="ij"), axis=-1).reshape(-1, 3)
    X = sig * Z + e
    F = sig * model.f(X)
    Q = Z @ Tinv.T
    G = F @ Tinv.T - Q @ schur.block().T
    qn = np.linalg.norm(Q, axis=1)
    keep = qn >= 1e-6
    ratios = np.max(np.abs(G[keep]), axis=1) / qn[keep] ** 2
    M_grid = float(np.max(ratios))

    # near the equilibrium the grid ratio is 0/0; bound the Taylor
    # remainder there by the Hessians of the transformed field instead
    H = _hessians(model.f, e)
    M_hess = 0.0
    for row in range(3):
        Hrow = np.zeros((3, 3))
        for k in range(3):
            Hk = sig[k] * (sig[:, None] * H[k] * sig[None, :])
            Hrow += Tinv[row, k] * Hk
        Hrow = T.T @ Hrow @ T
        M_hess = max(M_hess, 0.5 * float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (Hrow + Hrow.T))))))
    M = max(M_grid, M_hess)

    kap = mat3.kappa(schur)
    if kap <= 0.0:
        raise ValueError(f"growth rate kappa = {kap:.3g} is not positive")

    # Derivation of M': on the core region |q1| <= (1-xi)|q|, so
    #   (1 - (1-xi)^2) q1^2 <= (1-xi)^2 (q2^2+q3^2) = 2 (1-xi)^2 V
    # and adding q2^2 + q3^2 = 2V to both sides of q1^2 <= ... gives
    #   |q|^2 <= 2V / (1 - (1-xi)^2).
    # With |g_i(q)| <= M |q|^2 and |q2| + |q3| <= sqrt(2) * sqrt(2V) = 2 sqrt(V):
    #   |s| = |q2 g2 + q3 g3| <= (|q2|+|q3|) M |q|^2
    #       <= 2 sqrt(V) * M * 2V / (1 - (1-xi)^2)
    #       = [4M / (1 - (1-xi)^2)] * V^(3/2).
    M_prime = 4.0 * M / (1.0 - (1.0 - xi) ** 2)
    eta_star = kap**2 / (4.0 * M_prime**2)
    if not 0.0 < eta_fraction <= 1.0:
        raise ValueError("eta_fraction must be in (0, 1]")
    eta = eta_fraction * eta_star

    return InvariantSetCert(
        xi=xi,
        M=M,
        kappa=kap,
        M_prime=M_prime,
        eta_star=eta_star,
        eta=eta,
        grid_resolution=(
            f"faces {grid_n}x{grid_n} per octant face, volume {grid_n}^3 "
            "(inclusive subdivision grids)"
        ),
    )


def transformed_radial(states, report):
    """V(q2, q3) along a trajectory, in the transformed coordinates."""
    Tinv = np.linalg.inv(report.schur.T)
    Z = report.signature * (np.asarray(states) - report.equilibrium)
    Q = Z @ Tinv.T
    return 0.5 * (Q[..., 1] ** 2 + Q[..., 2] ** 2)


def verify_invariance(
    model,
    report,
    cert,
    n_traj=100,
    horizon=500.0,
    tol=1e-6,
    seed=0,
    rtol=1e-9,
    atol=1e-12,
):
    """Integrate random starts from the invariant set and report the worst
    excursion out of the core region, the minimum of V along the way, and
    the closest approach to the equilibrium.  A failed empirical check is
    a reported outcome, not an exception."""
    from . import sim

    if not report.certified:
        raise ValueError("empirical invariance check requires a certified report")
    part = orthant_partition(model.box, report.equilibrium, report.signature)
    rng = np.random.default_rng(seed)

    starts = []
    attempts = 0
    while len(starts) < n_traj:
        attempts += 1
        if attempts > 1000 * n_traj:
            raise RuntimeError("could not sample enough starting points in the invariant set")
        x = model.box.sample(rng)
        if not part.in_core(x):
            continue
        if transformed_radial(x[None, :], report)[0] <= cert.eta:
            continue
        starts.append(x)

    def run_one(x0):
        traj = sim.integrate(model, x0, horizon, rtol=rtol, atol=atol)
        depth = max(part.forbidden_depth(x) for x in traj.states)
        exc = max(traj.max_box_excursion, depth)
        v_min = float(np.min(transformed_radial(traj.states, report)))
        d_min = float(np.min(np.linalg.norm(traj.states - report.equilibrium, axis=1)))
        return exc, v_min, d_min

    workers = sim.workers_hint()
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, starts))
    else:
        results = [run_one(x0) for x0 in starts]

    # reductions over the fixed start order, independent of scheduling
    max_exc = max(r[0] for r in results)
    min_v = min(r[1] for r in results)
    min_dist = min(r[2] for r in results)
    n_bad = sum(1 for r in results if r[0] > tol)

    v_ok = min_v > cert.eta * (1.0 - 1e-3)
    return InvarianceCheck(
        n_traj=n_traj,
        horizon=horizon,
        eta=cert.eta,
        tol=tol,
        max_core_excursion=max_exc,
        min_v=min_v,
        min_distance_to_equilibrium=min_dist,
        n_excursions=n_bad,
        v_ok=v_ok,
        passed=(n_bad == 0 and v_ok),
    )
