"""Rigid sphere kinematics and the symplectic Euler update."""

import numpy as np
import pytest

from lbcouple import rigidbody as rb


def make_body(**kw):
    kw.setdefault("position", (10.0, 10.0, 10.0))
    kw.setdefault("diameter", 6.0)
    return rb.BodyState(**kw)


class TestSurfaceVelocity:
    def test_pure_translation(self):
        b = make_body(velocity=(0.1, -0.2, 0.05))
        for x in ((0, 0, 0), (13, 10, 10), (10, 7, 10)):
            assert np.allclose(rb.surface_velocity(b, x), b.velocity)

    def test_pure_rotation(self):
        w = 0.02
        b = make_body(angular_velocity=(0, 0, w))
        v = rb.surface_velocity(b, (13.0, 10.0, 10.0))  # lever (3, 0, 0)
        assert np.allclose(v, (0, 3 * w, 0), atol=1e-15)

    def test_center_sees_translation_only(self):
        b = make_body(velocity=(0.01, 0.02, 0.03),
                      angular_velocity=(0.4, -0.5, 0.6))
        assert np.allclose(rb.surface_velocity(b, b.position), b.velocity)

    def test_periodic_wrap(self):
        b = make_body(position=(1.0, 10.0, 10.0), angular_velocity=(0, 0, 0.1))
        # point just across the periodic x face; lever is (-2, 0, 0)
        v = rb.surface_velocity(b, (19.0, 10.0, 10.0), dims=(20, 20, 20),
                                periodic=(True, True, True))
        assert np.allclose(v, (0.0, -0.2, 0.0), atol=1e-14)


class TestMassProperties:
    def test_mass_and_inertia(self):
        b = make_body(diameter=6.0, density_ratio=1.5)
        vol = np.pi / 6 * 6.0 ** 3
        assert b.mass == pytest.approx(1.5 * vol)
        assert b.inertia == pytest.approx(1.5 * vol * 36 / 10)

    def test_buoyant_weight(self):
        b = make_body(density_ratio=1.5, gravity=(0, 0, -1e-4))
        expect = 0.5 * (np.pi / 6 * 216) * np.array([0, 0, -1e-4])
        assert np.allclose(b.buoyant_weight, expect)

    def test_validation(self):
        with pytest.raises(ValueError):
            make_body(diameter=-1.0)
        with pytest.raises(ValueError):
            make_body(density_ratio=0.0)


class TestIntegrate:
    def test_force_balance_keeps_velocity(self):
        b = make_body(velocity=(0, 0, -0.01), gravity=(0, 0, -1e-4))
        out = rb.integrate(b, -b.buoyant_weight, (0, 0, 0), 1.0)
        assert np.allclose(out.velocity, b.velocity)

    def test_drift(self):
        b = make_body(velocity=(0, 0, -0.01))
        out = rb.integrate(b, (0, 0, 0), (0, 0, 0), 1.0)
        assert np.allclose(out.position - b.position, (0, 0, -0.01))

    def test_constant_force_closed_form(self):
        b = make_body()
        F = np.array([2e-4, 0, 0])
        n = 50
        for _ in range(n):
            b = rb.integrate(b, F, (0, 0, 0), 1.0)
        assert np.allclose(b.velocity, n * F / b.mass, rtol=1e-13)

    def test_velocity_then_position_order(self):
        # regression pin: position advances with the updated velocity
        b = make_body(velocity=(0.0, 0.0, 0.0))
        F = np.array([0.0, 0.0, -b.mass * 1e-3])
        out = rb.integrate(b, F, (0, 0, 0), 1.0)
        assert out.position[2] == pytest.approx(10.0 - 1e-3, abs=1e-15)

    def test_angular_update(self):
        b = make_body()
        T = np.array([0.0, 5e-4, 0.0])
        out = rb.integrate(b, (0, 0, 0), T, 2.0)
        assert np.allclose(out.angular_velocity, 2.0 * T / b.inertia)

    def test_zero_everything_is_fixed_point(self):
        b = make_body(velocity=(0, 0, 0))
        out = rb.integrate(b, (0, 0, 0), (0, 0, 0), 1.0)
        assert np.array_equal(out.position, b.position)
        assert np.array_equal(out.velocity, b.velocity)

    def test_immobile_unchanged(self):
        b = make_body(mobile=False, gravity=(0, 0, -1))
        out = rb.integrate(b, (1.0, 0, 0), (0, 0, 0), 1.0)
        assert out is b

    def test_rejects_nonfinite(self):
        b = make_body()
        with pytest.raises(ValueError):
            rb.integrate(b, (np.nan, 0, 0), (0, 0, 0), 1.0)
