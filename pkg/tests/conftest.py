"""Shared helpers: plane-wall link construction and channel flow driver."""

import numpy as np
import pytest

from lbcouple import boundaries, lattice as lat


def make_plane_links(fld, side, delta):
    """Boundary links for a plane wall on the x faces of the grid.

    side 'low': solid layer ix = 0, wall plane at x = 1.5 - delta;
    side 'high': solid layer ix = nx-1, wall plane at x = nx - 1.5 + delta.
    All five lattice directions crossing the plane get the same delta
    (the plane is normal to x and |c_x| = 1 for each of them).
    """
    nx, ny, nz = fld.dims
    if side == "low":
        fluid_ix, solid_ix, sign = 1, 0, -1
    else:
        fluid_ix, solid_ix, sign = nx - 2, nx - 1, 1
    qs = [q for q in range(1, 19) if lat.C_Q[q, 0] == sign]
    cells, qarr, i_self, i_nbr, i_up1, i_up2 = [], [], [], [], [], []
    for iy in range(ny):
        for iz in range(nz):
            for q in qs:
                cy, cz = int(lat.C_Q[q, 1]), int(lat.C_Q[q, 2])
                cells.append((fluid_ix, iy, iz))
                qarr.append(q)
                i_self.append((fluid_ix * ny + iy) * nz + iz)
                i_nbr.append((solid_ix * ny + (iy + cy) % ny) * nz
                             + (iz + cz) % nz)
                i_up1.append(((fluid_ix - sign) * ny + (iy - cy) % ny) * nz
                             + (iz - cz) % nz)
                i_up2.append(((fluid_ix - 2 * sign) * ny + (iy - 2 * cy) % ny)
                             * nz + (iz - 2 * cz) % nz)
    n = len(qarr)
    return boundaries.BoundaryLinks(
        cells=np.array(cells, dtype=np.int64),
        q=np.array(qarr, dtype=np.int64),
        delta=np.full(n, float(delta)),
        lever=np.zeros((n, 3)),
        idx_self=np.array(i_self, dtype=np.int64),
        idx_nbr=np.array(i_nbr, dtype=np.int64),
        idx_up1=np.array(i_up1, dtype=np.int64),
        idx_up2=np.array(i_up2, dtype=np.int64),
        up1_ok=np.ones(n, dtype=bool),
        up2_ok=np.ones(n, dtype=bool))


def run_channel(nx=20, ny=4, nz=4, nu=1 / 6, magic=3 / 16, g_y=0.0,
                v_low=(0, 0, 0), v_high=(0, 0, 0), delta=0.5, scheme="cli",
                steps=4000, operator="trt"):
    """Drive a plane channel (walls on the x faces) to steady state.

    Returns (x cell centers of the fluid layers, u_y profile, wall plane
    positions a and b).
    """
    fld = lat.FluidField((nx, ny, nz))
    fld.initialize_equilibrium()
    fld.flags[0] = lat.SOLID
    fld.flags[-1] = lat.SOLID
    cfg = lat.relaxation_parameters(nu, magic=magic, f_ext=(0.0, g_y, 0.0),
                                    operator=operator)
    low = make_plane_links(fld, "low", delta)
    high = make_plane_links(fld, "high", delta)
    for _ in range(steps):
        lat.collide_stream_step(fld, cfg)
        boundaries.apply_particle_closures(fld, low, scheme, v_low, (0, 0, 0),
                                           cfg.f_ext, cfg.lam_plus,
                                           cfg.lam_minus)
        boundaries.apply_particle_closures(fld, high, scheme, v_high,
                                           (0, 0, 0), cfg.f_ext,
                                           cfg.lam_plus, cfg.lam_minus)
        fld.swap()
    rho, u = fld.macroscopic(cfg.f_ext)
    prof = u[1, 1:-1].mean(axis=(1, 2))
    xs = np.arange(1, nx - 1) + 0.5
    a = 1.5 - delta
    b = nx - 1.5 + delta
    return xs, prof, a, b


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
