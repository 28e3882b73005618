"""Partially saturated cells coupling (solid volume fraction weighting).

Every cell carries a solid fraction eps and a derived weight B; the
collision blends the plain BGK operator with a solid collision operator:

    f~_q = f_q + (1 - B) C_bgk_q + B C_solid_q + (1 - B) F_q

Three solid operators are supported (M1, M2, M3) together with the two
weight formulas (B1, B2); the standard combinations are M1B1, M2B2 and
M3B2.  The hydrodynamic force is the momentum the solid operator removes
from the fluid, applied at the cell centers.  The base operator is always
BGK, which makes the coupling viscosity dependent by construction; at
eps = 0 the scheme reduces bitwise to the plain BGK step.

No LBM subcycling is used here: one global step is one lattice step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import boundaries, geometry, rigidbody
from .lattice import C_Q, CS2, OPP, W_Q, CollisionConfig, FluidField, equilibrium
from .lattice import _pair_bgk
from .mem import InstabilityError, StepRecord

log = logging.getLogger(__name__)

VARIANTS = {"m1b1": ("m1", "b1"), "m2b2": ("m2", "b2"), "m3b2": ("m3", "b2")}
_SOLID_IDS = {"m1": 1, "m2": 2, "m3": 3}


@dataclass(frozen=True)
class PsmVariant:
    """Solid collision operator and weight formula combination."""

    solid_op: str   # m1 | m2 | m3
    weight: str     # b1 | b2

    def __post_init__(self):
        if self.solid_op not in _SOLID_IDS or self.weight not in ("b1", "b2"):
            raise ValueError(f"unknown PSM variant {self.solid_op}{self.weight}")
        name = self.solid_op + self.weight
        if name not in VARIANTS:
            log.warning("PSM combination %s is outside the commonly used set "
                        "(m1b1, m2b2, m3b2); treat results as experimental",
                        name)

    @classmethod
    def parse(cls, name: str) -> "PsmVariant":
        name = name.lower()
        if name in VARIANTS:
            return cls(*VARIANTS[name])
        if len(name) == 4:
            return cls(name[:2], name[2:])
        raise ValueError(f"cannot parse PSM variant {name!r}")


def weight_b(eps, tau: float, weight: str = "b2"):
    """Solid weight B_s from the volume fraction eps.

    b1: B = eps.  b2: B = eps (tau - 1/2) / ((1 - eps) + (tau - 1/2)).
    Monotone in eps with B(0) = 0 and B(1) = 1.
    """
    eps = np.asarray(eps, dtype=np.float64)
    if weight == "b1":
        return eps.copy() if eps.ndim else float(eps)
    t = tau - 0.5
    out = eps * t / ((1.0 - eps) + t)
    return out if eps.ndim else float(out)


def solid_collision(f, rho: float, U, v_s, solid_op: str,
                    tau: float = 1.0) -> np.ndarray:
    """Per-direction increments of the solid collision operator (one cell)."""
    f = np.asarray(f, dtype=np.float64)
    feq_u = equilibrium(rho, U)
    feq_v = equilibrium(rho, v_s)
    if solid_op == "m1":
        return (f[OPP] - feq_u[OPP]) - (f - feq_v)
    if solid_op == "m2":
        return (feq_v - f) + (1.0 - 1.0 / tau) * (f - feq_u)
    if solid_op == "m3":
        return (f[OPP] - feq_v[OPP]) - (f - feq_v)
    raise ValueError(f"unknown solid operator {solid_op!r}")


def psm_collide_cell(f, b: float, cfg: CollisionConfig, v_s,
                     solid_op: str) -> np.ndarray:
    """Weighted collision of one cell (reference for the fused kernel)."""
    from .lattice import collide_bgk, forcing, moments

    f = np.asarray(f, dtype=np.float64)
    rho, U = moments(f)
    c_bgk = (equilibrium(rho, U) - f) / cfg.tau
    c_sol = solid_collision(f, rho, U, v_s, solid_op, cfg.tau)
    return (f + (1.0 - b) * c_bgk + b * c_sol
            + (1.0 - b) * forcing(U, cfg.f_ext))


def psm_velocity(b, U, f_ext, v_s):
    """Weighted macroscopic velocity, u = (1-B)(U + f_ext/2) + B v_s."""
    U = np.asarray(U, dtype=np.float64)
    return ((1.0 - b) * (U + 0.5 * np.asarray(f_ext, dtype=np.float64))
            + b * np.asarray(v_s, dtype=np.float64))


def psm_force_torque(b_weights, increments, levers):
    """Force/torque from retained solid-collision increments.

    F = sum_cells B sum_q C_q c_qbar, torque with the cell-center lever.
    """
    b_weights = np.asarray(b_weights, dtype=np.float64)
    increments = np.asarray(increments, dtype=np.float64)
    levers = np.asarray(levers, dtype=np.float64)
    c_bar = C_Q[OPP].astype(np.float64)
    per_cell = b_weights[:, None] * (increments @ c_bar)
    return per_cell.sum(axis=0), np.cross(levers, per_cell).sum(axis=0)


class PsmSimulation:
    """Partially-saturated-cells coupled simulation of one sphere."""

    def __init__(self, dims, cfg: CollisionConfig, body=None,
                 variant="m2b2", periodic=(True, True, True), faces=(),
                 rho_init: float = 1.0, u_init=(0.0, 0.0, 0.0),
                 max_depth: int = geometry.DEFAULT_SS_DEPTH,
                 check_interval: int = 200):
        if cfg.operator != "bgk":
            raise ValueError("the partially saturated cells coupling runs on "
                             "the BGK operator")
        self.cfg = cfg
        self.body = body
        self.variant = (variant if isinstance(variant, PsmVariant)
                        else PsmVariant.parse(variant))
        self.faces = list(faces)
        self.max_depth = int(max_depth)
        self.check_interval = int(check_interval)
        self.field = FluidField(dims, periodic)
        self.field.initialize_equilibrium(rho_init, u_init)
        self.field.enable_psm()
        self.steps_taken = 0
        self._box = None
        self._fractions_dirty = body is not None

    @property
    def sphere(self) -> geometry.Sphere:
        if self.body is None:
            raise ValueError("simulation has no particle")
        return geometry.Sphere(center=self.body.position,
                               diameter=self.body.diameter)

    def _update_fractions(self):
        fld = self.field
        sphere = self.sphere
        lo, hi = geometry.bounding_box(sphere, fld.dims, margin=2.0)
        if self._box is not None:
            lo = np.minimum(lo, self._box[0])
            hi = np.maximum(hi, self._box[1])
        geometry.fill_solid_fractions(fld.epsilon, sphere, fld.dims,
                                      fld.periodic, self.max_depth,
                                      box=(lo, hi))
        if self.variant.weight == "b1":
            np.copyto(fld.weight_b, fld.epsilon)
        else:
            t = self.cfg.tau - 0.5
            np.divide(fld.epsilon * t, (1.0 - fld.epsilon) + t,
                      out=fld.weight_b)
        self._box = geometry.bounding_box(sphere, fld.dims, margin=2.0)
        self._fractions_dirty = False

    def step(self) -> StepRecord:
        fld = self.field
        if self._fractions_dirty:
            self._update_fractions()
        gx, gy, gz = (float(v) for v in self.cfg.f_ext)
        per = fld.periodic
        if self.body is None:
            pos = vel = omega = np.zeros(3)
        else:
            pos = self.body.position
            vel = self.body.velocity
            omega = self.body.angular_velocity
        out = _psm_collide_stream(
            fld.f.reshape(19, -1), fld.f_next.reshape(19, -1),
            fld.weight_b.reshape(-1), 1.0 / self.cfg.tau, gx, gy, gz,
            _SOLID_IDS[self.variant.solid_op],
            pos[0], pos[1], pos[2], vel[0], vel[1], vel[2],
            omega[0], omega[1], omega[2],
            fld.dims[0], fld.dims[1], fld.dims[2],
            per[0], per[1], per[2])
        force = out[:3].copy()
        torque = out[3:].copy()
        if self.faces:
            boundaries.apply_face_closures(fld, self.faces, self.cfg.f_ext)
        fld.swap()

        if self.body is not None and self.body.mobile:
            self.body = rigidbody.integrate(self.body, force, torque, 1.0)
            self._fractions_dirty = True

        self.steps_taken += 1
        if not np.all(np.isfinite(force)):
            raise InstabilityError(
                f"non-finite hydrodynamic force at step {self.steps_taken}")
        if self.steps_taken % self.check_interval == 0:
            if not np.all(np.isfinite(fld.f)):
                raise InstabilityError(
                    f"non-finite PDFs detected at step {self.steps_taken}")
        return StepRecord(force=force, torque=torque, body=self.body,
                          subcycle_forces=[force], subcycle_torques=[torque])

    def mean_velocity(self) -> np.ndarray:
        """Domain-average weighted macroscopic velocity."""
        rho = self.field.f.sum(axis=0)
        U = np.einsum("qxyz,qd->dxyz", self.field.f, C_Q.astype(np.float64))
        b = self.field.weight_b
        u = (1.0 - b)[None] * (U + 0.5 * self.cfg.f_ext[:, None, None, None])
        # solid-body velocity term of the moving sphere
        moving = self.body is not None and (
            np.any(self.body.velocity != 0.0)
            or np.any(self.body.angular_velocity != 0.0))
        if moving and np.any(b > 0):
            idx = np.nonzero(b > 0)
            centers = np.stack(idx, axis=1) + 0.5
            for n in range(centers.shape[0]):
                v_s = rigidbody.surface_velocity(self.body, centers[n],
                                                 self.field.dims,
                                                 self.field.periodic)
                u[:, idx[0][n], idx[1][n], idx[2][n]] += b[idx[0][n],
                                                           idx[1][n],
                                                           idx[2][n]] * v_s
        return u.sum(axis=(1, 2, 3)) / np.prod(self.field.dims)

    def fluid_momentum(self) -> np.ndarray:
        return np.einsum("qn,qd->d", self.field.f.reshape(19, -1),
                         C_Q.astype(np.float64))


@njit(cache=True)
def _psm_collide_stream(cur, nxt, bw, omega, gx, gy, gz, solid_id,
                        xpx, xpy, xpz, vpx, vpy, vpz, opx, opy, opz,
                        nx, ny, nz, px, py, pz):
    """Fused weighted collide + push-stream with force/torque capture.

    Cells with B = 0 follow the exact arithmetic of the plain BGK kernel.
    Returns (Fx, Fy, Fz, Tx, Ty, Tz) accumulated in fixed cell order.
    """
    w1 = 1.0 / 18.0
    w2 = 1.0 / 36.0
    fx_acc = 0.0
    fy_acc = 0.0
    fz_acc = 0.0
    tx_acc = 0.0
    ty_acc = 0.0
    tz_acc = 0.0
    for ix in range(nx):
        ixm = ix - 1 if ix > 0 else nx - 1
        ixp = ix + 1 if ix < nx - 1 else 0
        for iy in range(ny):
            iym = iy - 1 if iy > 0 else ny - 1
            iyp = iy + 1 if iy < ny - 1 else 0
            rowb = (ix * ny + iy) * nz
            t_x = (ixp * ny + iy) * nz
            t_mx = (ixm * ny + iy) * nz
            t_y = (ix * ny + iyp) * nz
            t_my = (ix * ny + iym) * nz
            t_xy = (ixp * ny + iyp) * nz
            t_mxy = (ixm * ny + iym) * nz
            t_xmy = (ixp * ny + iym) * nz
            t_mxp = (ixm * ny + iyp) * nz
            for iz in range(nz):
                i0 = rowb + iz
                izm = iz - 1 if iz > 0 else nz - 1
                izp = iz + 1 if iz < nz - 1 else 0

                f0 = cur[0, i0]
                f1 = cur[1, i0]
                f2 = cur[2, i0]
                f3 = cur[3, i0]
                f4 = cur[4, i0]
                f5 = cur[5, i0]
                f6 = cur[6, i0]
                f7 = cur[7, i0]
                f8 = cur[8, i0]
                f9 = cur[9, i0]
                f10 = cur[10, i0]
                f11 = cur[11, i0]
                f12 = cur[12, i0]
                f13 = cur[13, i0]
                f14 = cur[14, i0]
                f15 = cur[15, i0]
                f16 = cur[16, i0]
                f17 = cur[17, i0]
                f18 = cur[18, i0]

                rho = (f0 + f1 + f2 + f3 + f4 + f5 + f6 + f7 + f8 + f9
                       + f10 + f11 + f12 + f13 + f14 + f15 + f16 + f17 + f18)
                ux = f1 - f2 + f7 - f8 + f9 - f10 + f11 - f12 + f13 - f14
                uy = f3 - f4 + f7 - f8 - f9 + f10 + f15 - f16 + f17 - f18
                uz = f5 - f6 + f11 - f12 - f13 + f14 + f15 - f16 - f17 + f18
                usq = ux * ux + uy * uy + uz * uz
                ug = ux * gx + uy * gy + uz * gz

                b = bw[i0]
                if b == 0.0:
                    # plain BGK path, bitwise identical to the BGK kernel
                    s0 = (1.0 / 3.0) * (rho - 1.5 * usq)
                    nxt[0, i0] = f0 + omega * (s0 - f0) - (1.0 / 3.0) * 3.0 * ug

                    a, c = _pair_bgk(f1, f2, w1, ux, gx, rho, usq, ug, omega)
                    nxt[1, t_x + iz] = a
                    nxt[2, t_mx + iz] = c
                    a, c = _pair_bgk(f3, f4, w1, uy, gy, rho, usq, ug, omega)
                    nxt[3, t_y + iz] = a
                    nxt[4, t_my + iz] = c
                    a, c = _pair_bgk(f5, f6, w1, uz, gz, rho, usq, ug, omega)
                    nxt[5, rowb + izp] = a
                    nxt[6, rowb + izm] = c
                    a, c = _pair_bgk(f7, f8, w2, ux + uy, gx + gy, rho, usq, ug, omega)
                    nxt[7, t_xy + iz] = a
                    nxt[8, t_mxy + iz] = c
                    a, c = _pair_bgk(f9, f10, w2, ux - uy, gx - gy, rho, usq, ug, omega)
                    nxt[9, t_xmy + iz] = a
                    nxt[10, t_mxp + iz] = c
                    a, c = _pair_bgk(f11, f12, w2, ux + uz, gx + gz, rho, usq, ug, omega)
                    nxt[11, t_x + izp] = a
                    nxt[12, t_mx + izm] = c
                    a, c = _pair_bgk(f13, f14, w2, ux - uz, gx - gz, rho, usq, ug, omega)
                    nxt[13, t_x + izm] = a
                    nxt[14, t_mx + izp] = c
                    a, c = _pair_bgk(f15, f16, w2, uy + uz, gy + gz, rho, usq, ug, omega)
                    nxt[15, t_y + izp] = a
                    nxt[16, t_my + izm] = c
                    a, c = _pair_bgk(f17, f18, w2, uy - uz, gy - gz, rho, usq, ug, omega)
                    nxt[17, t_y + izm] = a
                    nxt[18, t_my + izp] = c
                    continue

                # solid-body velocity at the cell center (minimal image)
                rx = ix + 0.5 - xpx
                ry = iy + 0.5 - xpy
                rz = iz + 0.5 - xpz
                if px:
                    rx -= nx * np.round(rx / nx)
                if py:
                    ry -= ny * np.round(ry / ny)
                if pz:
                    rz -= nz * np.round(rz / nz)
                vsx = vpx + opy * rz - opz * ry
                vsy = vpy + opz * rx - opx * rz
                vsz = vpz + opx * ry - opy * rx
                vsq = vsx * vsx + vsy * vsy + vsz * vsz
                one_b = 1.0 - b

                mx = 0.0
                my = 0.0
                mz = 0.0

                # rest direction: no momentum contribution
                equ = (1.0 / 3.0) * (rho - 1.5 * usq)
                eqv = (1.0 / 3.0) * (rho - 1.5 * vsq)
                if solid_id == 1:
                    cs0 = (f0 - equ) - (f0 - eqv)
                elif solid_id == 2:
                    cs0 = (eqv - f0) + (1.0 - omega) * (f0 - equ)
                else:
                    cs0 = 0.0
                nxt[0, i0] = (f0 + one_b * (omega * (equ - f0)) + b * cs0
                              + one_b * ((1.0 / 3.0) * (-3.0 * ug)))

                for pair in range(9):
                    if pair == 0:
                        q, w, cu, cv, cg = 1, w1, ux, vsx, gx
                        tq = t_x + iz
                        tqb = t_mx + iz
                    elif pair == 1:
                        q, w, cu, cv, cg = 3, w1, uy, vsy, gy
                        tq = t_y + iz
                        tqb = t_my + iz
                    elif pair == 2:
                        q, w, cu, cv, cg = 5, w1, uz, vsz, gz
                        tq = rowb + izp
                        tqb = rowb + izm
                    elif pair == 3:
                        q, w, cu, cv, cg = 7, w2, ux + uy, vsx + vsy, gx + gy
                        tq = t_xy + iz
                        tqb = t_mxy + iz
                    elif pair == 4:
                        q, w, cu, cv, cg = 9, w2, ux - uy, vsx - vsy, gx - gy
                        tq = t_xmy + iz
                        tqb = t_mxp + iz
                    elif pair == 5:
                        q, w, cu, cv, cg = 11, w2, ux + uz, vsx + vsz, gx + gz
                        tq = t_x + izp
                        tqb = t_mx + izm
                    elif pair == 6:
                        q, w, cu, cv, cg = 13, w2, ux - uz, vsx - vsz, gx - gz
                        tq = t_x + izm
                        tqb = t_mx + izp
                    elif pair == 7:
                        q, w, cu, cv, cg = 15, w2, uy + uz, vsy + vsz, gy + gz
                        tq = t_y + izp
                        tqb = t_my + izm
                    else:
                        q, w, cu, cv, cg = 17, w2, uy - uz, vsy - vsz, gy - gz
                        tq = t_y + izm
                        tqb = t_my + izp
                    fq = cur[q, i0]
                    fqb = cur[q + 1, i0]
                    equ_s = w * (rho + 4.5 * cu * cu - 1.5 * usq)
                    equ_q = equ_s + w * (3.0 * cu)
                    equ_qb = equ_s - w * (3.0 * cu)
                    eqv_s = w * (rho + 4.5 * cv * cv - 1.5 * vsq)
                    eqv_q = eqv_s + w * (3.0 * cv)
                    eqv_qb = eqv_s - w * (3.0 * cv)
                    if solid_id == 1:
                        csq = (fqb - equ_qb) - (fq - eqv_q)
                        csqb = (fq - equ_q) - (fqb - eqv_qb)
                    elif solid_id == 2:
                        csq = (eqv_q - fq) + (1.0 - omega) * (fq - equ_q)
                        csqb = (eqv_qb - fqb) + (1.0 - omega) * (fqb - equ_qb)
                    else:
                        csq = (fqb - eqv_qb) - (fq - eqv_q)
                        csqb = -csq
                    frc_q = w * (3.0 * (cg - ug) + 9.0 * cu * cg)
                    frc_qb = w * (3.0 * (-cg - ug) + 9.0 * cu * cg)
                    nxt[q, tq] = (fq + one_b * (omega * (equ_q - fq))
                                  + b * csq + one_b * frc_q)
                    nxt[q + 1, tqb] = (fqb + one_b * (omega * (equ_qb - fqb))
                                       + b * csqb + one_b * frc_qb)
                    # momentum transferred to the body: B * sum_q C_q c_qbar
                    d = b * (csqb - csq)
                    qx = float(C_Q[q, 0])
                    qy = float(C_Q[q, 1])
                    qz = float(C_Q[q, 2])
                    mx += d * qx
                    my += d * qy
                    mz += d * qz

                fx_acc += mx
                fy_acc += my
                fz_acc += mz
                tx_acc += ry * mz - rz * my
                ty_acc += rz * mx - rx * mz
                tz_acc += rx * my - ry * mx
    return np.array([fx_acc, fy_acc, fz_acc, tx_acc, ty_acc, tz_acc])
