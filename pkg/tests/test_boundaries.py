"""No-slip closures (BB/CLI/MR), their coefficients, and domain faces."""

import numpy as np
import pytest

from lbcouple import boundaries as bnd
from lbcouple import lattice as lat
from conftest import make_plane_links, run_channel


class TestCoefficients:
    def test_cli_reduces_to_bb_at_half(self):
        kappa0, alpha = bnd.cli_coefficients(0.5)
        assert kappa0 == 0.0
        assert alpha == 2.0

    def test_cli_quarter(self):
        kappa0, alpha = bnd.cli_coefficients(0.25)
        assert kappa0 == pytest.approx(1 / 3)
        assert alpha == pytest.approx(8 / 3)

    # the MR correction coefficient pinned at four surface distances, for
    # tau = 1 with magic 3/16 (lam+ = -1, lam- = -8/7):
    # X = (16/7)(3 d^2 - 3/4)/(2d + 1)
    MR_PINS = {
        0.0: -12 / 7,
        0.25: -6 / 7,
        0.5: 0.0,
        1.0: 12 / 7,
    }

    @pytest.mark.parametrize("delta", sorted(MR_PINS))
    def test_mr_pinned(self, delta):
        kappa0, alpha, x_pc = bnd.mr_coefficients(delta, -1.0, -8 / 7)
        assert (kappa0, alpha) == pytest.approx(bnd.cli_coefficients(delta))
        assert x_pc == pytest.approx(self.MR_PINS[delta], rel=1e-13, abs=1e-15)

    def test_mr_correction_vanishes_at_matched_magic(self):
        # Lambda = 3 d^2/4 is the combination where CLI is already
        # parabolic-exact; the correction must vanish there
        for d in (0.3, 0.5, 0.8):
            magic = 3 * d * d / 4
            lam_p = -1.25
            lam_m = 1.0 / (magic / (0.5 + 1.0 / lam_p) - 0.5)
            _, _, x_pc = bnd.mr_coefficients(d, lam_p, lam_m)
            assert abs(x_pc) < 1e-14


class TestClosureValues:
    def test_bb_pure_reflection(self):
        assert bnd.bounce_back_value(0.37, 5, (0, 0, 0)) == 0.37

    def test_bb_moving_wall(self):
        # f~ = w = 1/18 along c = (1,0,0), v = (0.01, 0, 0)
        out = bnd.bounce_back_value(1 / 18, 1, (0.01, 0, 0))
        assert out == pytest.approx(1 / 18 - 2 * (1 / 18) * 3 * 0.01, rel=1e-14)
        assert out == pytest.approx(0.05222222222222222, rel=1e-12)

    def test_cli_direct_evaluation(self):
        out = bnd.cli_value(0.10, 0.12, 0.08, 1, 0.25, (0, 0, 0))
        assert out == pytest.approx(0.10 + 0.12 / 3 - 0.08 / 3, rel=1e-14)

    def test_cli_equals_bb_at_half(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            ftq, up, back = rng.random(3)
            v = 0.1 * (rng.random(3) - 0.5)
            q = int(rng.integers(1, 19))
            assert (bnd.cli_value(ftq, up, back, q, 0.5, v)
                    == bnd.bounce_back_value(ftq, q, v))

    def test_mr_rest_state_steady(self):
        # all post-collision inputs at weights, resting wall -> weights back
        for d in (0.1, 0.3, 0.5, 0.9):
            for q in range(1, 19):
                w = lat.W_Q[q]
                out = bnd.mr_value(w, w, w, q, d, (0, 0, 0),
                                   w, w, (0, 0, 0), -1.0, -8 / 7)
                assert out == pytest.approx(w, rel=1e-13)


class TestChannelFlows:
    def test_poiseuille_trt_magic(self):
        # body-force channel with midlink walls, TRT magic 3/16
        g = 1e-6
        nu = 1 / 6
        xs, prof, a, b = run_channel(nx=34, g_y=g, nu=nu, delta=0.5,
                                     scheme="bb", steps=30000)
        exact = g / (2 * nu) * (xs - a) * (b - xs)
        mid = np.abs(exact) > 0.5 * np.abs(exact).max()
        rel = np.abs(prof - exact)[mid] / np.abs(exact)[mid]
        assert rel.max() < 1e-3

    def test_couette_cli_off_lattice(self):
        V = 1e-3
        for delta in (0.2, 0.7):
            xs, prof, a, b = run_channel(nx=16, v_high=(0, V, 0), delta=delta,
                                         scheme="cli", steps=12000)
            exact = V * (xs - a) / (b - a)
            assert np.abs(prof - exact).max() < 1e-8

    def test_couette_mr_off_lattice(self):
        V = 1e-3
        for delta in (0.2, 0.7):
            xs, prof, a, b = run_channel(nx=16, v_high=(0, V, 0), delta=delta,
                                         scheme="mr", steps=12000)
            exact = V * (xs - a) / (b - a)
            assert np.abs(prof - exact).max() < 1e-8

    def test_poiseuille_mr_off_lattice_any_magic(self):
        # the quadratic closure keeps the discrete parabola exactly even with
        # off-lattice walls and a magic constant that does not match delta
        g = 2e-7
        nu = 0.05
        xs, prof, a, b = run_channel(nx=16, g_y=g, nu=nu, delta=0.3,
                                     scheme="mr", steps=25000)
        exact = g / (2 * nu) * (xs - a) * (b - xs)
        assert np.abs(prof - exact).max() < 1e-8

    def test_bb_off_lattice_sees_wrong_wall(self):
        # negative control: BB ignores delta, so an off-lattice wall target
        # yields an O(delta - 1/2) error
        V = 1e-3
        xs, prof, a, b = run_channel(nx=16, v_high=(0, V, 0), delta=0.2,
                                     scheme="bb", steps=12000)
        exact = V * (xs - a) / (b - a)
        assert np.abs(prof - exact).max() > 1e-5


class TestSchemeDegradation:
    def test_cli_matches_bb_bitwise_at_half_link(self):
        rng = np.random.default_rng(5)
        outs = {}
        for scheme in ("bb", "cli"):
            fld = lat.FluidField((12, 6, 6))
            fld.initialize_equilibrium(1.0, (0.0, 0.02, -0.01))
            fld.f *= 1.0 + 0.05 * (np.random.default_rng(3).random(fld.f.shape)
                                   - 0.5)
            fld.flags[0] = lat.SOLID
            fld.flags[-1] = lat.SOLID
            cfg = lat.relaxation_parameters(0.1)
            links = make_plane_links(fld, "low", 0.5)
            lat.collide_stream_step(fld, cfg)
            bnd.apply_particle_closures(fld, links, scheme,
                                        (0.0, 0.013, 0.0), (0, 0, 0))
            outs[scheme] = fld.f_next.copy()
        assert np.array_equal(outs["bb"], outs["cli"])

    def test_fallback_ladder(self):
        # without the upstream fluid neighbor both interpolated schemes
        # degrade to plain bounce back, link by link
        def run(scheme, ok1):
            fld = lat.FluidField((12, 4, 4))
            fld.initialize_equilibrium(1.0, (0, 0.01, 0))
            fld.f *= 1.0 + 0.1 * (np.random.default_rng(1).random(fld.f.shape)
                                  - 0.5)
            fld.flags[0] = lat.SOLID
            fld.flags[-1] = lat.SOLID
            cfg = lat.relaxation_parameters(0.05)
            links = make_plane_links(fld, "low", 0.31)
            links.up1_ok[:] = ok1
            lat.collide_stream_step(fld, cfg)
            bnd.apply_particle_closures(fld, links, scheme, (0, 0, 0),
                                        (0, 0, 0), cfg.f_ext, cfg.lam_plus,
                                        cfg.lam_minus)
            return fld.f_next.copy()

        bb = run("bb", True)
        assert np.array_equal(run("cli", False), bb)
        assert np.array_equal(run("mr", False), bb)
        assert not np.array_equal(run("cli", True), bb)
        assert not np.array_equal(run("mr", True), run("cli", True))


class TestDomainFaces:
    def _uniform_flow_field(self, dims, u):
        fld = lat.FluidField(dims, periodic=(True, True, False))
        fld.initialize_equilibrium(1.0, u)
        return fld

    def test_resting_inflow_is_resting_wall(self):
        fld = self._uniform_flow_field((6, 6, 10), (0, 0, 0))
        cfg = lat.relaxation_parameters(0.1)
        lat.collide_stream_step(fld, cfg)
        bnd.apply_face_closures(fld, bnd.inflow_outflow_faces((0, 0, 0)))
        fld.swap()
        assert np.allclose(fld.f, lat.W_Q[:, None, None, None], atol=1e-15)

    def test_uniform_flow_fixed_point(self):
        u = (0.0, 0.0, 0.05)
        fld = self._uniform_flow_field((6, 6, 12), u)
        cfg = lat.relaxation_parameters(0.08)
        before = fld.f.copy()
        for _ in range(3):
            lat.collide_stream_step(fld, cfg)
            bnd.apply_face_closures(fld, bnd.inflow_outflow_faces(u))
            fld.swap()
        assert np.abs(fld.f - before).max() < 1e-10

    def test_inflow_flux_develops(self):
        u_inf = (0.0, 0.0, 0.03)
        fld = self._uniform_flow_field((6, 6, 24), (0, 0, 0))
        cfg = lat.relaxation_parameters(0.1)
        faces = bnd.inflow_outflow_faces(u_inf)
        for _ in range(3000):
            lat.collide_stream_step(fld, cfg)
            bnd.apply_face_closures(fld, faces)
            fld.swap()
        rho, u = fld.macroscopic()
        near = u[2, :, :, 1].mean()
        assert abs(near - 0.03) / 0.03 < 0.01

    def test_outflow_holds_density(self):
        u = (0.0, 0.0, 0.04)
        fld = self._uniform_flow_field((4, 4, 30), u)
        cfg = lat.relaxation_parameters(0.1)
        faces = bnd.inflow_outflow_faces(u)
        for _ in range(5000):
            lat.collide_stream_step(fld, cfg)
            bnd.apply_face_closures(fld, faces)
            fld.swap()
        rho, _ = fld.macroscopic()
        assert abs(rho.mean() - 1.0) < 1e-3
