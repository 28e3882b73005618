"""D3Q19 lattice Boltzmann core: stencil, collision operators, streaming.

Everything operates in lattice units (dx = dt = 1, rho0 = 1, c_s^2 = 1/3).
The incompressible equilibrium is used, i.e. the density enters the
equilibrium linearly as rho_f = rho0 + drho and velocity moments are taken
with respect to rho0.  Two collision operators are provided: single
relaxation time (BGK) and two relaxation time (TRT).  For the TRT operator
the antisymmetric rate is tied to the symmetric one through the "magic"
combination Lambda = (1/2 + 1/lam_plus)(1/2 + 1/lam_minus), which renders
solid boundary locations viscosity independent.

Cell (i, j, k) has its center at position (i + 1/2, j + 1/2, k + 1/2).

All grid-level hot loops are numba kernels operating on the raw PDF arrays
of shape (19, nx, ny, nz); the scalar functions in this module define the
per-cell contracts and serve as reference implementations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# stencil
# ---------------------------------------------------------------------------

#: canonical direction ordering: rest, 6 axis directions, 12 edge diagonals.
#: Opposite directions are adjacent (2i+1, 2i+2) so OPP is a cheap lookup.
C_Q = np.array(
    [
        (0, 0, 0),
        (1, 0, 0), (-1, 0, 0),
        (0, 1, 0), (0, -1, 0),
        (0, 0, 1), (0, 0, -1),
        (1, 1, 0), (-1, -1, 0),
        (1, -1, 0), (-1, 1, 0),
        (1, 0, 1), (-1, 0, -1),
        (1, 0, -1), (-1, 0, 1),
        (0, 1, 1), (0, -1, -1),
        (0, 1, -1), (0, -1, 1),
    ],
    dtype=np.int64,
)

W_Q = np.array([1 / 3] + [1 / 18] * 6 + [1 / 36] * 12, dtype=np.float64)

#: index of the reversed direction, c[OPP[q]] == -c[q]
OPP = np.array([0, 2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11, 14, 13, 16, 15, 18, 17],
               dtype=np.int64)

CS2 = 1.0 / 3.0
Q = 19

#: cell flag values
FLUID = np.uint8(0)
SOLID = np.uint8(1)


@dataclass(frozen=True)
class LatticeDescriptor:
    """The D3Q19 velocity set with weights, opposites and speed of sound."""

    velocities: np.ndarray = field(default_factory=lambda: C_Q.copy())
    weights: np.ndarray = field(default_factory=lambda: W_Q.copy())
    opposite: np.ndarray = field(default_factory=lambda: OPP.copy())
    cs2: float = CS2


#: module-level descriptor; all index-based code goes through this object.
D3Q19 = LatticeDescriptor()


# ---------------------------------------------------------------------------
# per-cell operations (reference implementations, used by tests and refilling)
# ---------------------------------------------------------------------------

def equilibrium(rho_f: float, U) -> np.ndarray:
    """Incompressible equilibrium distribution for density rho_f and velocity U.

    Satisfies sum_q feq = rho_f and sum_q feq c_q = rho0 U exactly.
    """
    U = np.asarray(U, dtype=np.float64)
    cu = C_Q @ U
    usq = U @ U
    return W_Q * (rho_f + cu / CS2 + cu * cu / (2 * CS2 * CS2) - usq / (2 * CS2))


def moments(f):
    """Density and velocity moments (rho_f, U) of a 19-entry PDF vector."""
    f = np.asarray(f, dtype=np.float64)
    rho_f = f.sum()
    U = f @ C_Q.astype(np.float64)
    return rho_f, U


def forcing(U, f_ext) -> np.ndarray:
    """Per-direction force increments for a constant body force density.

    Zeroth moment vanishes, first moment equals dt * f_ext.
    """
    U = np.asarray(U, dtype=np.float64)
    f_ext = np.asarray(f_ext, dtype=np.float64)
    cu = C_Q @ U
    cf = C_Q @ f_ext
    return W_Q * ((cf - U @ f_ext) / CS2 + cu * cf / (CS2 * CS2))


def macroscopic_velocity(U, f_ext) -> np.ndarray:
    """Half-force-shifted physical velocity u = U + dt/(2 rho0) f_ext."""
    return np.asarray(U, dtype=np.float64) + 0.5 * np.asarray(f_ext, dtype=np.float64)


# ---------------------------------------------------------------------------
# collision configuration
# ---------------------------------------------------------------------------

@dataclass
class CollisionConfig:
    """Relaxation data for the BGK / TRT collision operators.

    tau is the symmetric relaxation time; lam_plus = -1/tau.  For TRT the
    antisymmetric rate lam_minus keeps (1/2 + 1/lam_plus)(1/2 + 1/lam_minus)
    equal to the magic constant.
    """

    tau: float
    lam_plus: float
    lam_minus: float
    magic: float = 3.0 / 16.0
    f_ext: np.ndarray = field(default_factory=lambda: np.zeros(3))
    operator: str = "trt"

    def __post_init__(self):
        self.f_ext = np.asarray(self.f_ext, dtype=np.float64)
        if self.tau <= 0.5:
            raise ValueError(f"tau = {self.tau} must exceed 1/2")
        if self.operator not in ("bgk", "trt"):
            raise ValueError(f"unknown collision operator {self.operator!r}")
        if not (-2.0 < self.lam_plus < 0.0 and -2.0 < self.lam_minus < 0.0):
            raise ValueError(
                f"relaxation rates ({self.lam_plus}, {self.lam_minus}) "
                "must lie in (-2, 0)")
        check = (0.5 + 1.0 / self.lam_plus) * (0.5 + 1.0 / self.lam_minus)
        if abs(check - self.magic) > 1e-12 * max(1.0, abs(self.magic)):
            raise ValueError(
                f"lam_minus inconsistent with magic constant: {check} != {self.magic}")

    @property
    def nu(self) -> float:
        """Kinematic viscosity nu = (tau - 1/2) c_s^2."""
        return (self.tau - 0.5) * CS2

    def with_viscosity(self, nu: float) -> "CollisionConfig":
        """Same operator/magic/forcing at a different viscosity."""
        new = relaxation_parameters(nu, self.magic)
        return replace(self, tau=new.tau, lam_plus=new.lam_plus,
                       lam_minus=new.lam_minus)


def relaxation_parameters(nu: float, magic: float = 3.0 / 16.0,
                          f_ext=(0.0, 0.0, 0.0),
                          operator: str = "trt") -> CollisionConfig:
    """Build a CollisionConfig from viscosity and magic constant.

    tau = nu/c_s^2 + 1/2, lam_plus = -1/tau; lam_minus solves the magic
    relation.  Raises ValueError when the resulting lam_minus leaves (-2, 0).
    """
    if nu <= 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    tau = nu / CS2 + 0.5
    lam_plus = -1.0 / tau
    denom = magic / (0.5 + 1.0 / lam_plus) - 0.5
    if denom == 0:
        raise ValueError("magic constant incompatible with lam_plus")
    lam_minus = 1.0 / denom
    cfg = CollisionConfig(tau=tau, lam_plus=lam_plus, lam_minus=lam_minus,
                          magic=magic, f_ext=np.asarray(f_ext, dtype=np.float64),
                          operator=operator)
    return cfg


def collide_bgk(f, cfg: CollisionConfig) -> np.ndarray:
    """Single-cell BGK collision with forcing: f + (feq - f)/tau + F_q."""
    f = np.asarray(f, dtype=np.float64)
    rho_f, U = moments(f)
    feq = equilibrium(rho_f, U)
    return f + (feq - f) / cfg.tau + forcing(U, cfg.f_ext)


def collide_trt(f, cfg: CollisionConfig) -> np.ndarray:
    """Single-cell TRT collision with forcing.

    Symmetric/antisymmetric parts f_q^± = (f_q ± f_qbar)/2 relax with
    lam_plus and lam_minus towards the matching equilibrium parts.
    """
    f = np.asarray(f, dtype=np.float64)
    rho_f, U = moments(f)
    feq = equilibrium(rho_f, U)
    fp = 0.5 * (f + f[OPP])
    fm = 0.5 * (f - f[OPP])
    ep = 0.5 * (feq + feq[OPP])
    em = 0.5 * (feq - feq[OPP])
    return (f + cfg.lam_plus * (fp - ep) + cfg.lam_minus * (fm - em)
            + forcing(U, cfg.f_ext))


def equilibrium_symmetric(rho_f: float, U) -> np.ndarray:
    """Symmetric (even) part of the equilibrium, used by the outflow closure."""
    U = np.asarray(U, dtype=np.float64)
    cu = C_Q @ U
    usq = U @ U
    return W_Q * (rho_f + cu * cu / (2 * CS2 * CS2) - usq / (2 * CS2))


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

class FluidField:
    """Double-buffered PDF grid with per-cell flags.

    `f` is the current buffer; collide acts in place on it, stream writes the
    other buffer, after which the buffers swap.  Incoming populations of
    boundary-adjacent links are owned by the boundary closures, never by the
    bulk stream.  `epsilon` / `weight_b` are only allocated for partially
    saturated cell runs.
    """

    def __init__(self, dims, periodic=(True, True, True)):
        self.dims = tuple(int(d) for d in dims)
        if any(d < 1 for d in self.dims):
            raise ValueError(f"invalid grid dims {dims}")
        self.periodic = tuple(bool(p) for p in periodic)
        nx, ny, nz = self.dims
        self.f = np.zeros((Q, nx, ny, nz))
        self.f_next = np.zeros((Q, nx, ny, nz))
        self.flags = np.zeros((nx, ny, nz), dtype=np.uint8)
        self.epsilon = None
        self.weight_b = None

    def enable_psm(self):
        nx, ny, nz = self.dims
        self.epsilon = np.zeros((nx, ny, nz))
        self.weight_b = np.zeros((nx, ny, nz))

    def swap(self):
        self.f, self.f_next = self.f_next, self.f

    def initialize_equilibrium(self, rho_f=1.0, U=(0.0, 0.0, 0.0)):
        """Fill the current buffer with a uniform equilibrium state."""
        feq = equilibrium(float(rho_f), U)
        self.f[:] = feq[:, None, None, None]

    def cell_centers(self, axis: int) -> np.ndarray:
        return np.arange(self.dims[axis]) + 0.5

    def macroscopic(self, f_ext=(0.0, 0.0, 0.0)):
        """Density and shifted velocity fields of the current buffer.

        Returns (rho, u) with rho of shape dims and u of shape (3,) + dims.
        Solid cells (flag SOLID) report rho = rho0 and u = 0.
        """
        rho = self.f.sum(axis=0)
        u = np.einsum("qxyz,qd->dxyz", self.f, C_Q.astype(np.float64))
        u += 0.5 * np.asarray(f_ext, dtype=np.float64)[:, None, None, None]
        solid = self.flags == SOLID
        rho[solid] = 1.0
        u[:, solid] = 0.0
        return rho, u


def stream(fld: FluidField):
    """Propagate post-collision values to neighbor cells (periodic wrap).

    Writes the non-current buffer and swaps.  Slots that correspond to links
    out of solid or domain-boundary cells carry stale data afterwards and are
    overwritten by the boundary closures.
    """
    _stream_pull(fld.f, fld.f_next)
    fld.swap()


def collide_field(fld: FluidField, cfg: CollisionConfig):
    """Apply the configured collision to every fluid cell of the grid in place.

    Reference (vectorized numpy) path; the simulation drivers use the fused
    numba kernels instead.
    """
    f = fld.f.reshape(Q, -1)
    fluid = (fld.flags != SOLID).reshape(-1)
    fc = f[:, fluid]
    rho = fc.sum(axis=0)
    U = np.einsum("qn,qd->dn", fc, C_Q.astype(np.float64))
    cu = np.einsum("qd,dn->qn", C_Q.astype(np.float64), U)
    usq = np.einsum("dn,dn->n", U, U)
    feq = W_Q[:, None] * (rho[None, :] + cu / CS2 + cu * cu / (2 * CS2 * CS2)
                          - usq[None, :] / (2 * CS2))
    cf = C_Q.astype(np.float64) @ cfg.f_ext
    uf = np.einsum("dn,d->n", U, cfg.f_ext)
    frc = W_Q[:, None] * ((cf[:, None] - uf[None, :]) / CS2
                          + cu * cf[:, None] / (CS2 * CS2))
    if cfg.operator == "bgk":
        out = fc + (feq - fc) / cfg.tau + frc
    else:
        fp = 0.5 * (fc + fc[OPP])
        fm = 0.5 * (fc - fc[OPP])
        ep = 0.5 * (feq + feq[OPP])
        em = 0.5 * (feq - feq[OPP])
        out = fc + cfg.lam_plus * (fp - ep) + cfg.lam_minus * (fm - em) + frc
    f[:, fluid] = out


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _stream_pull(src, dst):
    """dst[q, x] = src[q, x - c_q] with periodic wrap on every axis."""
    nx, ny, nz = src.shape[1], src.shape[2], src.shape[3]
    for ix in range(nx):
        ixm = ix - 1 if ix > 0 else nx - 1
        ixp = ix + 1 if ix < nx - 1 else 0
        for iy in range(ny):
            iym = iy - 1 if iy > 0 else ny - 1
            iyp = iy + 1 if iy < ny - 1 else 0
            for iz in range(nz):
                izm = iz - 1 if iz > 0 else nz - 1
                izp = iz + 1 if iz < nz - 1 else 0
                dst[0, ix, iy, iz] = src[0, ix, iy, iz]
                dst[1, ix, iy, iz] = src[1, ixm, iy, iz]
                dst[2, ix, iy, iz] = src[2, ixp, iy, iz]
                dst[3, ix, iy, iz] = src[3, ix, iym, iz]
                dst[4, ix, iy, iz] = src[4, ix, iyp, iz]
                dst[5, ix, iy, iz] = src[5, ix, iy, izm]
                dst[6, ix, iy, iz] = src[6, ix, iy, izp]
                dst[7, ix, iy, iz] = src[7, ixm, iym, iz]
                dst[8, ix, iy, iz] = src[8, ixp, iyp, iz]
                dst[9, ix, iy, iz] = src[9, ixm, iyp, iz]
                dst[10, ix, iy, iz] = src[10, ixp, iym, iz]
                dst[11, ix, iy, iz] = src[11, ixm, iy, izm]
                dst[12, ix, iy, iz] = src[12, ixp, iy, izp]
                dst[13, ix, iy, iz] = src[13, ixm, iy, izp]
                dst[14, ix, iy, iz] = src[14, ixp, iy, izm]
                dst[15, ix, iy, iz] = src[15, ix, iym, izm]
                dst[16, ix, iy, iz] = src[16, ix, iyp, izp]
                dst[17, ix, iy, iz] = src[17, ix, iym, izp]
                dst[18, ix, iy, iz] = src[18, ix, iyp, izm]


@njit(cache=True, inline="always", fastmath=True)
def _pair_trt(fq, fqb, w, cu, cg, rho, usq, ug, lam_p, lam_m):
    """Post-collision values of an opposite-direction pair, TRT operator."""
    s = w * (rho + 4.5 * cu * cu - 1.5 * usq)
    a = w * (3.0 * cu)
    dp = lam_p * (0.5 * (fq + fqb) - s)
    dm = lam_m * (0.5 * (fq - fqb) - a)
    ftq = fq + dp + dm + w * (3.0 * (cg - ug) + 9.0 * cu * cg)
    ftqb = fqb + dp - dm + w * (3.0 * (-cg - ug) + 9.0 * cu * cg)
    return ftq, ftqb


@njit(cache=True, inline="always")
def _pair_bgk(fq, fqb, w, cu, cg, rho, usq, ug, omega):
    """Post-collision values of an opposite-direction pair, BGK operator."""
    s = w * (rho + 4.5 * cu * cu - 1.5 * usq)
    a = w * (3.0 * cu)
    ftq = fq + omega * ((s + a) - fq) + w * (3.0 * (cg - ug) + 9.0 * cu * cg)
    ftqb = fqb + omega * ((s - a) - fqb) + w * (3.0 * (-cg - ug) + 9.0 * cu * cg)
    return ftq, ftqb


@njit(cache=True, fastmath=True)
def _collide_stream_trt(cur, nxt, flags, lam_p, lam_m, gx, gy, gz):
    """Fused TRT collide + push-stream over the whole grid.

    Solid-flagged cells are skipped as sources; their outgoing slots in `nxt`
    end up holding the post-collision values pushed from the adjacent fluid
    cells, which is exactly what the link closures consume.
    """
    nx, ny, nz = cur.shape[1], cur.shape[2], cur.shape[3]
    w1 = 1.0 / 18.0
    w2 = 1.0 / 36.0
    for ix in range(nx):
        ixm = ix - 1 if ix > 0 else nx - 1
        ixp = ix + 1 if ix < nx - 1 else 0
        for iy in range(ny):
            iym = iy - 1 if iy > 0 else ny - 1
            iyp = iy + 1 if iy < ny - 1 else 0
            for iz in range(nz):
                if flags[ix, iy, iz] == 1:
                    continue
                izm = iz - 1 if iz > 0 else nz - 1
                izp = iz + 1 if iz < nz - 1 else 0

                f0 = cur[0, ix, iy, iz]
                f1 = cur[1, ix, iy, iz]
                f2 = cur[2, ix, iy, iz]
                f3 = cur[3, ix, iy, iz]
                f4 = cur[4, ix, iy, iz]
                f5 = cur[5, ix, iy, iz]
                f6 = cur[6, ix, iy, iz]
                f7 = cur[7, ix, iy, iz]
                f8 = cur[8, ix, iy, iz]
                f9 = cur[9, ix, iy, iz]
                f10 = cur[10, ix, iy, iz]
                f11 = cur[11, ix, iy, iz]
                f12 = cur[12, ix, iy, iz]
                f13 = cur[13, ix, iy, iz]
                f14 = cur[14, ix, iy, iz]
                f15 = cur[15, ix, iy, iz]
                f16 = cur[16, ix, iy, iz]
                f17 = cur[17, ix, iy, iz]
                f18 = cur[18, ix, iy, iz]

                rho = (f0 + f1 + f2 + f3 + f4 + f5 + f6 + f7 + f8 + f9
                       + f10 + f11 + f12 + f13 + f14 + f15 + f16 + f17 + f18)
                ux = f1 - f2 + f7 - f8 + f9 - f10 + f11 - f12 + f13 - f14
                uy = f3 - f4 + f7 - f8 - f9 + f10 + f15 - f16 + f17 - f18
                uz = f5 - f6 + f11 - f12 - f13 + f14 + f15 - f16 - f17 + f18
                usq = ux * ux + uy * uy + uz * uz
                ug = ux * gx + uy * gy + uz * gz

                s0 = (1.0 / 3.0) * (rho - 1.5 * usq)
                nxt[0, ix, iy, iz] = f0 + lam_p * (f0 - s0) - (1.0 / 3.0) * 3.0 * ug

                a, b = _pair_trt(f1, f2, w1, ux, gx, rho, usq, ug, lam_p, lam_m)
                nxt[1, ixp, iy, iz] = a
                nxt[2, ixm, iy, iz] = b
                a, b = _pair_trt(f3, f4, w1, uy, gy, rho, usq, ug, lam_p, lam_m)
                nxt[3, ix, iyp, iz] = a
                nxt[4, ix, iym, iz] = b
                a, b = _pair_trt(f5, f6, w1, uz, gz, rho, usq, ug, lam_p, lam_m)
                nxt[5, ix, iy, izp] = a
                nxt[6, ix, iy, izm] = b
                a, b = _pair_trt(f7, f8, w2, ux + uy, gx + gy, rho, usq, ug,
                                 lam_p, lam_m)
                nxt[7, ixp, iyp, iz] = a
                nxt[8, ixm, iym, iz] = b
                a, b = _pair_trt(f9, f10, w2, ux - uy, gx - gy, rho, usq, ug,
                                 lam_p, lam_m)
                nxt[9, ixp, iym, iz] = a
                nxt[10, ixm, iyp, iz] = b
                a, b = _pair_trt(f11, f12, w2, ux + uz, gx + gz, rho, usq, ug,
                                 lam_p, lam_m)
                nxt[11, ixp, iy, izp] = a
                nxt[12, ixm, iy, izm] = b
                a, b = _pair_trt(f13, f14, w2, ux - uz, gx - gz, rho, usq, ug,
                                 lam_p, lam_m)
                nxt[13, ixp, iy, izm] = a
                nxt[14, ixm, iy, izp] = b
                a, b = _pair_trt(f15, f16, w2, uy + uz, gy + gz, rho, usq, ug,
                                 lam_p, lam_m)
                nxt[15, ix, iyp, izp] = a
                nxt[16, ix, iym, izm] = b
                a, b = _pair_trt(f17, f18, w2, uy - uz, gy - gz, rho, usq, ug,
                                 lam_p, lam_m)
                nxt[17, ix, iyp, izm] = a
                nxt[18, ix, iym, izp] = b


@njit(cache=True)
def _collide_stream_bgk(cur, nxt, flags, omega, gx, gy, gz):
    """Fused BGK collide + push-stream; mirrors _collide_stream_trt."""
    nx, ny, nz = cur.shape[1], cur.shape[2], cur.shape[3]
    w1 = 1.0 / 18.0
    w2 = 1.0 / 36.0
    for ix in range(nx):
        ixm = ix - 1 if ix > 0 else nx - 1
        ixp = ix + 1 if ix < nx - 1 else 0
        for iy in range(ny):
            iym = iy - 1 if iy > 0 else ny - 1
            iyp = iy + 1 if iy < ny - 1 else 0
            for iz in range(nz):
                if flags[ix, iy, iz] == 1:
                    continue
                izm = iz - 1 if iz > 0 else nz - 1
                izp = iz + 1 if iz < nz - 1 else 0

                f0 = cur[0, ix, iy, iz]
                f1 = cur[1, ix, iy, iz]
                f2 = cur[2, ix, iy, iz]
                f3 = cur[3, ix, iy, iz]
                f4 = cur[4, ix, iy, iz]
                f5 = cur[5, ix, iy, iz]
                f6 = cur[6, ix, iy, iz]
                f7 = cur[7, ix, iy, iz]
                f8 = cur[8, ix, iy, iz]
                f9 = cur[9, ix, iy, iz]
                f10 = cur[10, ix, iy, iz]
                f11 = cur[11, ix, iy, iz]
                f12 = cur[12, ix, iy, iz]
                f13 = cur[13, ix, iy, iz]
                f14 = cur[14, ix, iy, iz]
                f15 = cur[15, ix, iy, iz]
                f16 = cur[16, ix, iy, iz]
                f17 = cur[17, ix, iy, iz]
                f18 = cur[18, ix, iy, iz]

                rho = (f0 + f1 + f2 + f3 + f4 + f5 + f6 + f7 + f8 + f9
                       + f10 + f11 + f12 + f13 + f14 + f15 + f16 + f17 + f18)
                ux = f1 - f2 + f7 - f8 + f9 - f10 + f11 - f12 + f13 - f14
                uy = f3 - f4 + f7 - f8 - f9 + f10 + f15 - f16 + f17 - f18
                uz = f5 - f6 + f11 - f12 - f13 + f14 + f15 - f16 - f17 + f18
                usq = ux * ux + uy * uy + uz * uz
                ug = ux * gx + uy * gy + uz * gz

                s0 = (1.0 / 3.0) * (rho - 1.5 * usq)
                nxt[0, ix, iy, iz] = f0 + omega * (s0 - f0) - (1.0 / 3.0) * 3.0 * ug

                a, b = _pair_bgk(f1, f2, w1, ux, gx, rho, usq, ug, omega)
                nxt[1, ixp, iy, iz] = a
                nxt[2, ixm, iy, iz] = b
                a, b = _pair_bgk(f3, f4, w1, uy, gy, rho, usq, ug, omega)
                nxt[3, ix, iyp, iz] = a
                nxt[4, ix, iym, iz] = b
                a, b = _pair_bgk(f5, f6, w1, uz, gz, rho, usq, ug, omega)
                nxt[5, ix, iy, izp] = a
                nxt[6, ix, iy, izm] = b
                a, b = _pair_bgk(f7, f8, w2, ux + uy, gx + gy, rho, usq, ug, omega)
                nxt[7, ixp, iyp, iz] = a
                nxt[8, ixm, iym, iz] = b
                a, b = _pair_bgk(f9, f10, w2, ux - uy, gx - gy, rho, usq, ug, omega)
                nxt[9, ixp, iym, iz] = a
                nxt[10, ixm, iyp, iz] = b
                a, b = _pair_bgk(f11, f12, w2, ux + uz, gx + gz, rho, usq, ug, omega)
                nxt[11, ixp, iy, izp] = a
                nxt[12, ixm, iy, izm] = b
                a, b = _pair_bgk(f13, f14, w2, ux - uz, gx - gz, rho, usq, ug, omega)
                nxt[13, ixp, iy, izm] = a
                nxt[14, ixm, iy, izp] = b
                a, b = _pair_bgk(f15, f16, w2, uy + uz, gy + gz, rho, usq, ug, omega)
                nxt[15, ix, iyp, izp] = a
                nxt[16, ix, iym, izm] = b
                a, b = _pair_bgk(f17, f18, w2, uy - uz, gy - gz, rho, usq, ug, omega)
                nxt[17, ix, iyp, izm] = a
                nxt[18, ix, iym, izp] = b


def collide_stream_step(fld: FluidField, cfg: CollisionConfig):
    """One fused collide+stream pass: f(t) in `fld.f` -> f(t+1) in `fld.f_next`.

    Does not swap; the caller applies boundary closures to `f_next` first.
    """
    gx, gy, gz = (float(v) for v in cfg.f_ext)
    if cfg.operator == "trt":
        _collide_stream_trt(fld.f, fld.f_next, fld.flags,
                            cfg.lam_plus, cfg.lam_minus, gx, gy, gz)
    else:
        _collide_stream_bgk(fld.f, fld.f_next, fld.flags,
                            1.0 / cfg.tau, gx, gy, gz)
