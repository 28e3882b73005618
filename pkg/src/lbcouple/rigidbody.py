"""Rigid sphere state and explicit time integration.

A single solid sphere carries position, translational and angular velocity.
Gravity and buoyancy act together as (rho_p - rho_f) * (pi/6) D^3 * g; the
hydrodynamic force comes from the coupling scheme.  Integration is symplectic
Euler: the velocity update runs first and the position update uses the new
velocity.  Orientation is not tracked since a sphere's mapping onto the grid
is orientation invariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass
class BodyState:
    """Kinematic and material state of the sphere (lattice units)."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    diameter: float = 1.0
    density_ratio: float = 1.5
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mobile: bool = True

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.velocity = np.asarray(self.velocity, dtype=np.float64)
        self.angular_velocity = np.asarray(self.angular_velocity,
                                           dtype=np.float64)
        self.gravity = np.asarray(self.gravity, dtype=np.float64)
        if self.diameter <= 0:
            raise ValueError("diameter must be positive")
        if self.density_ratio <= 0:
            raise ValueError("density ratio must be positive")

    @property
    def radius(self) -> float:
        return 0.5 * self.diameter

    @property
    def volume(self) -> float:
        return np.pi / 6.0 * self.diameter ** 3

    @property
    def mass(self) -> float:
        # rho_f = rho0 = 1 in lattice units
        return self.density_ratio * self.volume

    @property
    def inertia(self) -> float:
        """Moment of inertia of a solid sphere, m D^2 / 10."""
        return self.mass * self.diameter ** 2 / 10.0

    @property
    def buoyant_weight(self) -> np.ndarray:
        """Combined gravity + buoyancy force (rho_p - rho_f) V g."""
        return (self.density_ratio - 1.0) * self.volume * self.gravity


def surface_velocity(body: BodyState, x, dims=None, periodic=None) -> np.ndarray:
    """Solid-body velocity U_p + Omega_p x (x - X_p) at point x."""
    from .geometry import displacement

    r = displacement(x, body.position, dims, periodic)
    return body.velocity + np.cross(body.angular_velocity, r)


def integrate(body: BodyState, f_hydro, t_hydro, dt: float = 1.0) -> BodyState:
    """Advance the body by dt under hydrodynamic force/torque plus gravity.

    Velocity first, then position with the updated velocity (symplectic
    Euler); angular velocity explicit.  Immobile bodies are returned
    unchanged.
    """
    f_hydro = np.asarray(f_hydro, dtype=np.float64)
    t_hydro = np.asarray(t_hydro, dtype=np.float64)
    if not (np.all(np.isfinite(f_hydro)) and np.all(np.isfinite(t_hydro))):
        raise ValueError(f"non-finite force/torque: {f_hydro}, {t_hydro}")
    if not body.mobile:
        return body
    accel = (f_hydro + body.buoyant_weight) / body.mass
    vel = body.velocity + accel * dt
    pos = body.position + vel * dt
    omega = body.angular_velocity + (t_hydro / body.inertia) * dt
    return replace(body, position=pos, velocity=vel, angular_velocity=omega)
