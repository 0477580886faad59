"""Certification pipeline: partition, core region, hypothesis checks,
invariant-set constants."""

import numpy as np
import pytest

from conftest import example_goodwin
from coop2 import certify, models
from coop2.certify import (
    AngleMarginError,
    construct_invariant_set,
    certify_model,
    orthant_partition,
    transformed_radial,
    verify_invariance,
)


@pytest.fixture(scope="module")
def goodwin_report(goodwin_model):
    return certify_model(goodwin_model, grid_n=11)


@pytest.fixture(scope="module")
def goodwin_inv(goodwin_model, goodwin_report):
    return construct_invariant_set(goodwin_model, goodwin_report, grid_n=11)


class TestOrthantPartition:
    def setup_method(self):
        self.box = models.Box3(np.zeros(3), 2.0 * np.ones(3))
        self.part = orthant_partition(self.box, np.ones(3))

    def test_all_below_center(self):
        labels = self.part.octant_labels([0.5, 0.5, 0.5])
        assert labels == (1,)
        assert self.part.in_core([0.5, 0.5, 0.5])

    def test_alternating_octant_only(self):
        labels = self.part.octant_labels([1.5, 0.5, 1.5])
        assert labels == (7,)
        assert not self.part.in_core([1.5, 0.5, 1.5])

    def test_goodwin_initial_condition(self, goodwin_model):
        part = orthant_partition(goodwin_model.box, goodwin_model.equilibrium())
        assert part.in_core([0.1, 0.1, 0.1])

    def test_center_is_in_core(self):
        assert self.part.in_core(np.ones(3))

    def test_boundary_center_rejected(self):
        with pytest.raises(ValueError):
            orthant_partition(self.box, np.array([0.0, 1.0, 1.0]))

    def test_coverage_and_interior_uniqueness(self):
        grid = np.stack(
            np.meshgrid(*[np.linspace(0.0, 2.0, 9)] * 3, indexing="ij"), axis=-1
        ).reshape(-1, 3)
        for x in grid:
            labels = self.part.octant_labels(x)
            assert len(labels) >= 1
            if np.all(x != 1.0):
                assert len(labels) == 1

    def test_forbidden_depth(self):
        assert self.part.forbidden_depth([1.5, 0.5, 1.5]) == 0.5
        assert self.part.forbidden_depth([0.5, 0.5, 0.5]) == 0.0


class TestCoreRegionDualRule:
    @pytest.mark.parametrize(
        "box,e,signature",
        [
            (models.Box3(np.zeros(3), 2.0 * np.ones(3)), np.ones(3), None),
            (
                models.Box3(np.array([-1.0, 0.5, -3.0]), np.array([2.0, 4.0, 1.0])),
                np.array([0.25, 2.0, -1.0]),
                np.array([1.0, -1.0, -1.0]),
            ),
        ],
    )
    def test_sign_rule_equals_union_rule_on_grid(self, box, e, signature):
        """The sign-variation membership rule and the direct union of the
        six octant boxes agree on an inclusive 21^3 grid."""
        part = orthant_partition(box, e, signature)
        axes = [np.linspace(lo, hi, 21) for lo, hi in zip(box.lower, box.upper)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        for x in grid:
            assert part.in_core(x) == part.in_core_by_union(x)

    def test_equilibrium_belongs_to_core(self, goodwin_model):
        part = orthant_partition(goodwin_model.box, goodwin_model.equilibrium())
        assert part.in_core(goodwin_model.equilibrium())


class TestCertifyModel:
    def test_goodwin_example_certified(self, goodwin_report):
        rep = goodwin_report
        assert rep.certified
        assert rep.pattern_ok == 1.0
        assert rep.irreducible_ok == 1.0
        assert rep.unique_in_box and rep.equilibrium_interior
        assert rep.charpoly.c2 == pytest.approx(1.5, abs=1e-3)
        assert rep.charpoly.c1 == pytest.approx(0.74, abs=1e-3)
        assert rep.charpoly.c0 == pytest.approx(1.1478, abs=1e-3)
        assert rep.routh.value == "unstable"
        assert rep.det_negative

    def test_field_noyes_example_certified(self, field_noyes_model):
        rep = certify_model(field_noyes_model, grid_n=11)
        assert rep.certified
        assert rep.det_j == pytest.approx(-1.1722, abs=1e-3)
        assert np.array_equal(rep.signature, [1.0, -1.0, -1.0])
        # eigenvector of the transformed Jacobian alternates
        zeta = rep.spectrum.zeta
        assert np.all(np.sign(zeta) == [1.0, -1.0, 1.0])

    def test_stable_goodwin_refuted(self):
        gw = models.goodwin(models.GoodwinParams(1.0, 1.0, 1.0, 1))
        rep = certify_model(gw, grid_n=7)
        assert rep.conclusion.kind == "refuted"
        assert "Hurwitz" in rep.conclusion.reason
        assert rep.routh.value == "hurwitz"

    def test_generic_model_via_expressions(self):
        cfg = {
            "name": "goodwin-expr",
            "params": {"a": 0.5, "b": 0.4, "g": 0.6},
            "f": ["-a*x1 + 1/(1 + x3**10)", "-b*x2 + x1", "-g*x3 + x2"],
            "box": {"lower": [0.0, 0.0, 0.0], "upper": [2.0, 5.0, 8.3333333333]},
        }
        model = models.from_config(cfg)
        rep = certify_model(model, grid_n=7)
        assert rep.certified
        assert "Newton" in rep.uniqueness_method
        expected = example_goodwin().equilibrium()
        assert np.allclose(rep.equilibrium, expected, atol=1e-6)

    def test_grid_too_coarse_rejected(self, goodwin_model):
        with pytest.raises(ValueError):
            certify_model(goodwin_model, grid_n=4)


class TestInvariantSet:
    def test_goodwin_constants(self, goodwin_inv):
        cert = goodwin_inv
        assert 0.0 < cert.xi < 1.0
        assert cert.M > 0.0
        # complex pair: the symmetric part is u1 * I, so kappa = Re(pair)
        assert cert.kappa == pytest.approx(0.0062, abs=1e-3)
        assert cert.eta_star > 0.0
        assert 0.0 < cert.eta <= cert.eta_star
        assert cert.eta == pytest.approx(cert.eta_star / 2.0)

    def test_eta_star_formula(self, goodwin_inv):
        c = goodwin_inv
        assert c.eta_star == pytest.approx(c.kappa**2 / (4.0 * c.M_prime**2), rel=1e-12)

    def test_remainder_constant_bounds_direct_maximisation(
        self, goodwin_model, goodwin_report, goodwin_inv
    ):
        """M' was derived from the inequality chain; it must dominate the
        direct numerical maximisation of |s| / V^(3/2) over the core
        region (the independent check of the derivation)."""
        rep, cert = goodwin_report, goodwin_inv
        T = rep.schur.T
        Tinv = np.linalg.inv(T)
        e = rep.equilibrium
        box = goodwin_model.box
        axes = [np.linspace(lo, hi, 25) for lo, hi in zip(box.lower - e, box.upper - e)]
        Z = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        # core region: offsets with at most one sign variation
        sm = np.array(
            [certify.signvar.s_minus(certify.signvar.snap(z, 1e-12)) for z in Z]
        )
        Z = Z[sm <= 1]
        Q = Z @ Tinv.T
        F = goodwin_model.f(Z + e)
        G = F @ Tinv.T - Q @ rep.schur.block().T
        V = 0.5 * (Q[:, 1] ** 2 + Q[:, 2] ** 2)
        keep = V > 1e-12
        s_val = np.abs(Q[:, 1] * G[:, 1] + Q[:, 2] * G[:, 2])
        ratio = s_val[keep] / V[keep] ** 1.5
        direct_max = float(np.max(ratio))
        assert 0.0 < direct_max <= cert.M_prime * (1.0 + 1e-9)

    def test_monotone_refinement(self, goodwin_model, goodwin_report):
        """Doubling the subdivision count keeps every old sample, so the
        angle margin can only shrink and the remainder bound only grow."""
        c1 = construct_invariant_set(goodwin_model, goodwin_report, grid_n=8)
        c2 = construct_invariant_set(goodwin_model, goodwin_report, grid_n=16)
        assert c2.xi <= c1.xi + 1e-15
        assert c2.M >= c1.M - 1e-15

    def test_requires_certified_report(self, goodwin_model):
        gw = models.goodwin(models.GoodwinParams(1.0, 1.0, 1.0, 1))
        rep = certify_model(gw, grid_n=7)
        with pytest.raises(ValueError):
            construct_invariant_set(gw, rep)

    def test_excluded_ball_radius(self, goodwin_report, goodwin_inv):
        """Points of the invariant set keep a computable distance from the
        equilibrium: V > eta excludes a ball of radius
        sqrt(2 eta) * sigma_min(T) around it."""
        T = goodwin_report.schur.T
        sigma_min = np.linalg.svd(T, compute_uv=False)[-1]
        r = np.sqrt(2.0 * goodwin_inv.eta) * sigma_min
        assert r > 0.0
        rng = np.random.default_rng(5)
        Tinv = np.linalg.inv(T)
        for _ in range(200):
            z = rng.normal(size=3)
            z *= 0.99 * r / np.linalg.norm(z)
            q = Tinv @ z
            assert 0.5 * (q[1] ** 2 + q[2] ** 2) <= goodwin_inv.eta


class TestVerifyInvariance:
    def test_goodwin_smoke(self, goodwin_model, goodwin_report, goodwin_inv):
        chk = verify_invariance(
            goodwin_model, goodwin_report, goodwin_inv,
            n_traj=20, horizon=120.0, seed=3,
        )
        assert chk.passed
        assert chk.max_core_excursion <= 1e-6
        assert chk.min_v > goodwin_inv.eta
        assert chk.min_distance_to_equilibrium > 0.0

    def test_radial_function_positive_off_axis(self, goodwin_report):
        vals = transformed_radial(goodwin_report.equilibrium[None, :] + 0.1, goodwin_report)
        assert vals[0] > 0.0

    def test_worker_count_does_not_change_results(
        self, goodwin_model, goodwin_report, goodwin_inv, monkeypatch
    ):
        kwargs = dict(n_traj=8, horizon=60.0, seed=7)
        seq = verify_invariance(goodwin_model, goodwin_report, goodwin_inv, **kwargs)
        monkeypatch.setenv("COOP2_THREADS", "4")
        par = verify_invariance(goodwin_model, goodwin_report, goodwin_inv, **kwargs)
        assert seq == par
