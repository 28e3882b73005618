"""Link-wise no-slip closures and domain inflow/outflow conditions.

Three particle no-slip schemes of increasing interpolation order:

* bounce back (BB): plain reflection with a wall-velocity source term; the
  effective wall sits midway along the link.
* central linear interpolation (CLI): uses the actual surface distance
  delta_q through kappa0 = (1-2 delta)/(1+2 delta), alpha = 4/(1+2 delta);
  reduces to BB at delta = 1/2.  Exact for linear (Couette-type) steady
  profiles at any delta and any TRT rates.
* multireflection (MR): quadratic closure on a three-node directed
  stencil.  It augments CLI with a correction proportional to the directed
  second difference of the post-collision populations,

      f_pc = X2 [f~_q(x) - 2 f~_q(x - c_q) + f~_q(x - 2 c_q)],
      X2 = 2 (3 delta^2 - 4 Lambda) / (3 (2 delta + 1)),

  which makes the closure exact for steady profiles up to parabolic
  (Poiseuille-type) at arbitrary delta_q and arbitrary TRT rates: the
  second difference of the steady populations carries the profile
  curvature free of any relaxation-rate content, and it vanishes on
  constant and linear profiles, so CLI's Couette exactness is untouched.
  X2 depends only on delta and the magic combination Lambda, reduces to
  (2 delta - 1)/2 at Lambda = 3/16, and vanishes at Lambda = 3 delta^2/4,
  the combination at which CLI is already parabolic-exact.  The same
  derivation machinery recovers that bounce back is Couette-exact only at
  delta = 1/2 and Poiseuille-exact only at Lambda = 3/16, anchoring the
  construction.  Closure members that feed the correction from the local
  incoming populations (antisymmetric non-equilibrium style) satisfy the
  same steady exactness conditions but destabilize curved boundaries, so
  the feedback-free directed form is used.

  A plain second difference amplifies the staircase (odd-even) kinetic
  mode of the near-wall layer, which on closed curved surfaces can
  self-excite, and at tau near 1/2 the steady near-wall layer itself
  pollutes the correction.  The implementation therefore averages the
  second difference over two adjacent stencil positions,

      pc_raw = [f~_q(x) - f~_q(x-c) - f~_q(x-2c) + f~_q(x-3c)] / 2,

  which annihilates spatially alternating content exactly while keeping
  the same steady value, and additionally averages pc_raw over the current
  and previous time step per link (history in BoundaryLinks.pc_prev),
  killing the temporally alternating mode.  Neither average moves the
  steady fixed point, so the exactness properties are untouched.

Closures run after the fused collide+stream pass: post-collision values
f~_q(x) are read from the pushed slot nxt[q, x + c_q], outputs are written
into nxt[qbar, x], and each link also returns its momentum-exchange force
contribution with the Galilean velocity correction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import Sphere, displacement
from .lattice import C_Q, CS2, OPP, SOLID, W_Q, FluidField, equilibrium_symmetric

log = logging.getLogger(__name__)

#: delta is clamped to this floor before entering CLI/MR coefficients to
#: avoid blow-up on near-tangent links; the effect is below discretization
#: error.
DELTA_FLOOR = 1e-4

SCHEME_IDS = {"bb": 0, "cli": 1, "mr": 2}


# ---------------------------------------------------------------------------
# closure coefficient sets and single-link reference formulas
# ---------------------------------------------------------------------------

def cli_coefficients(delta: float):
    """kappa0 and alpha of the central linear interpolation closure."""
    return (1.0 - 2.0 * delta) / (1.0 + 2.0 * delta), 4.0 / (1.0 + 2.0 * delta)


def mr_coefficients(delta: float, lam_plus: float, lam_minus: float):
    """Multireflection coefficients (kappa0, alpha, x2).

    kappa0 and alpha are the CLI coefficients; x2 scales the directed
    second-difference correction.  The combination is parabolic-exact for
    any delta and any TRT rates; x2 depends on the rates only through the
    magic combination Lambda.
    """
    kappa0, alpha = cli_coefficients(delta)
    magic = (0.5 + 1.0 / lam_plus) * (0.5 + 1.0 / lam_minus)
    x2 = (2.0 * (3.0 * delta * delta - 4.0 * magic)
          / (3.0 * (2.0 * delta + 1.0)))
    return kappa0, alpha, x2


def bounce_back_value(ft_q: float, q: int, v_b) -> float:
    """Reflected population for a wall moving at v_b (link midpoint wall)."""
    cv = float(C_Q[q] @ np.asarray(v_b, dtype=np.float64))
    return ft_q - 2.0 * (W_Q[q] / CS2) * cv


def cli_value(ft_q: float, ft_q_up: float, ft_qb: float, q: int,
              delta: float, v_b) -> float:
    """CLI closure output from the three post-collision inputs."""
    delta = max(delta, DELTA_FLOOR)
    kappa0, alpha = cli_coefficients(delta)
    cv = float(C_Q[q] @ np.asarray(v_b, dtype=np.float64))
    return (ft_q + kappa0 * ft_q_up - kappa0 * ft_qb
            - alpha * (W_Q[q] / CS2) * cv)


def mr_value(ft_q: float, ft_q_up: float, ft_q_up2: float, ft_q_up3: float,
             ft_qb: float, q: int, delta: float, v_b,
             lam_plus: float, lam_minus: float, pc_prev: float = None):
    """MR closure output from the directed four-node post-collision stencil.

    Returns (value, pc) where pc is this step's smoothed second difference
    (the history carried to the next step).  With pc_prev None the
    correction is taken unfiltered (steady-state form).
    """
    delta = max(delta, DELTA_FLOOR)
    kappa0, alpha, x2 = mr_coefficients(delta, lam_plus, lam_minus)
    cv = float(C_Q[q] @ np.asarray(v_b, dtype=np.float64))
    raw = 0.5 * (ft_q - ft_q_up - ft_q_up2 + ft_q_up3)
    corr = raw if pc_prev is None else 0.5 * (raw + pc_prev)
    value = (ft_q + kappa0 * ft_q_up - kappa0 * ft_qb
             - alpha * (W_Q[q] / CS2) * cv + x2 * corr)
    return value, raw


# ---------------------------------------------------------------------------
# link tables
# ---------------------------------------------------------------------------

@dataclass
class BoundaryLinks:
    """Flat arrays describing every fluid->solid link of the mapped sphere."""

    cells: np.ndarray      # (n, 3) fluid cell indices
    q: np.ndarray          # (n,) direction into the solid
    delta: np.ndarray      # (n,) surface distance fraction, unclamped
    lever: np.ndarray      # (n, 3) x_b - X_p, minimal image
    idx_self: np.ndarray   # flat cell index of x
    idx_nbr: np.ndarray    # flat index of x + c_q (solid side)
    idx_up1: np.ndarray    # flat index of x - c_q
    idx_up2: np.ndarray    # flat index of x - 2 c_q
    up1_ok: np.ndarray     # bool, x - c_q is usable fluid
    up2_ok: np.ndarray     # bool, x - 2 c_q is usable fluid
    up3_ok: np.ndarray = None    # bool, x - 3 c_q is usable fluid
    pc_prev: np.ndarray = None   # previous-step MR correction input

    def __post_init__(self):
        if self.up3_ok is None:
            self.up3_ok = np.zeros(self.q.shape[0], dtype=bool)
        if self.pc_prev is None:
            self.pc_prev = np.zeros(self.q.shape[0])

    def __len__(self):
        return self.q.shape[0]

    def carry_history(self, old: "BoundaryLinks"):
        """Copy per-link history from a previous link table (matched by
        fluid cell and direction); new links start from zero."""
        lookup = {}
        for j in range(len(old)):
            lookup[(old.idx_self[j], old.q[j])] = old.pc_prev[j]
        for i in range(len(self)):
            self.pc_prev[i] = lookup.get((self.idx_self[i], self.q[i]), 0.0)


def build_links(sphere: Sphere, flags, boundary_cells, dims,
                periodic=(True, True, True)) -> BoundaryLinks:
    """Enumerate all fluid->solid links with their geometry, in the
    deterministic cell order of `boundary_cells`."""
    n_bc = boundary_cells.shape[0]
    per = [bool(p) for p in periodic]
    out = _build_links(flags, boundary_cells.astype(np.int64),
                       sphere.center[0], sphere.center[1], sphere.center[2],
                       sphere.radius ** 2,
                       dims[0], dims[1], dims[2], per[0], per[1], per[2], C_Q)
    (n, cells, qarr, delta, lever, i_self, i_nbr, i_up1, i_up2,
     up1_ok, up2_ok, up3_ok) = out
    links = BoundaryLinks(
        cells=cells[:n].copy(), q=qarr[:n].copy(), delta=delta[:n].copy(),
        lever=lever[:n].copy(), idx_self=i_self[:n].copy(),
        idx_nbr=i_nbr[:n].copy(), idx_up1=i_up1[:n].copy(),
        idx_up2=i_up2[:n].copy(), up1_ok=up1_ok[:n].copy(),
        up2_ok=up2_ok[:n].copy(), up3_ok=up3_ok[:n].copy())
    return links


@njit(cache=True)
def _build_links(flags, bcells, cx, cy, cz, r2, nx, ny, nz, px, py, pz, c_q):
    n_max = bcells.shape[0] * 18
    cells = np.empty((n_max, 3), dtype=np.int64)
    qarr = np.empty(n_max, dtype=np.int64)
    delta = np.empty(n_max)
    lever = np.empty((n_max, 3))
    i_self = np.empty(n_max, dtype=np.int64)
    i_nbr = np.empty(n_max, dtype=np.int64)
    i_up1 = np.empty(n_max, dtype=np.int64)
    i_up2 = np.empty(n_max, dtype=np.int64)
    up1_ok = np.zeros(n_max, dtype=np.bool_)
    up2_ok = np.zeros(n_max, dtype=np.bool_)
    up3_ok = np.zeros(n_max, dtype=np.bool_)
    n = 0
    for b in range(bcells.shape[0]):
        ix, iy, iz = bcells[b, 0], bcells[b, 1], bcells[b, 2]
        # minimal-image displacement of the cell center from the sphere center
        dx = ix + 0.5 - cx
        dy = iy + 0.5 - cy
        dz = iz + 0.5 - cz
        if px:
            dx -= nx * np.round(dx / nx)
        if py:
            dy -= ny * np.round(dy / ny)
        if pz:
            dz -= nz * np.round(dz / nz)
        for q in range(1, 19):
            qx, qy, qz = c_q[q, 0], c_q[q, 1], c_q[q, 2]
            jx, jy, jz = ix + qx, iy + qy, iz + qz
            if px:
                jx %= nx
            elif jx < 0 or jx >= nx:
                continue
            if py:
                jy %= ny
            elif jy < 0 or jy >= ny:
                continue
            if pz:
                jz %= nz
            elif jz < 0 or jz >= nz:
                continue
            if flags[jx, jy, jz] != 1:
                continue
            # ray-sphere intersection along the link
            a = float(qx * qx + qy * qy + qz * qz)
            bq = 2.0 * (qx * dx + qy * dy + qz * dz)
            c0 = dx * dx + dy * dy + dz * dz - r2
            disc = bq * bq - 4.0 * a * c0
            if disc < 0.0:
                d_link = 0.5  # degenerate (tangent): midpoint fallback
            else:
                d_link = (-bq - np.sqrt(disc)) / (2.0 * a)
                if d_link < 0.0:
                    d_link = 0.0
                elif d_link > 1.0:
                    d_link = 1.0
            cells[n, 0] = ix
            cells[n, 1] = iy
            cells[n, 2] = iz
            qarr[n] = q
            delta[n] = d_link
            lever[n, 0] = dx + d_link * qx
            lever[n, 1] = dy + d_link * qy
            lever[n, 2] = dz + d_link * qz
            i_self[n] = (ix * ny + iy) * nz + iz
            i_nbr[n] = (jx * ny + jy) * nz + jz
            # upstream availability for the interpolated schemes
            ok1 = False
            ok2 = False
            ok3 = False
            u1 = 0
            u2 = 0
            kx, ky, kz = ix - qx, iy - qy, iz - qz
            if px:
                kx %= nx
            if py:
                ky %= ny
            if pz:
                kz %= nz
            if 0 <= kx < nx and 0 <= ky < ny and 0 <= kz < nz:
                u1 = (kx * ny + ky) * nz + kz
                ok1 = flags[kx, ky, kz] != 1
                lx, ly, lz = kx - qx, ky - qy, kz - qz
                if px:
                    lx %= nx
                if py:
                    ly %= ny
                if pz:
                    lz %= nz
                if 0 <= lx < nx and 0 <= ly < ny and 0 <= lz < nz:
                    u2 = (lx * ny + ly) * nz + lz
                    ok2 = ok1 and flags[lx, ly, lz] != 1
                    mx, my, mz = lx - qx, ly - qy, lz - qz
                    if px:
                        mx %= nx
                    if py:
                        my %= ny
                    if pz:
                        mz %= nz
                    if 0 <= mx < nx and 0 <= my < ny and 0 <= mz < nz:
                        ok3 = ok2 and flags[mx, my, mz] != 1
            i_up1[n] = u1
            i_up2[n] = u2
            up1_ok[n] = ok1
            up2_ok[n] = ok2
            up3_ok[n] = ok3
            n += 1
    return (n, cells, qarr, delta, lever, i_self, i_nbr, i_up1, i_up2,
            up1_ok, up2_ok, up3_ok)


# ---------------------------------------------------------------------------
# batched closure application (one serial pass, deterministic order)
# ---------------------------------------------------------------------------

def apply_particle_closures(fld: FluidField, links: BoundaryLinks, scheme: str,
                            body_velocity, body_omega, f_ext=(0.0, 0.0, 0.0),
                            lam_plus: float = -1.0, lam_minus: float = -8.0 / 7.0):
    """Close all particle links on fld.f_next and return (force, torque).

    `scheme` is 'bb', 'cli' or 'mr'; the interpolated schemes degrade per
    link to plain bounce back when the upstream fluid neighbor is missing.
    The TRT rates feed the multireflection correction coefficient.
    """
    scheme_id = SCHEME_IDS[scheme]
    cur = fld.f.reshape(19, -1)
    nxt = fld.f_next.reshape(19, -1)
    vx, vy, vz = (float(v) for v in body_velocity)
    ox, oy, oz = (float(v) for v in body_omega)
    return _apply_links(cur, nxt, links.q, links.delta, links.lever,
                        links.idx_self, links.idx_nbr, links.idx_up1,
                        links.idx_up2, links.up1_ok, links.up2_ok,
                        links.up3_ok, links.pc_prev, scheme_id,
                        vx, vy, vz, ox, oy, oz,
                        float(lam_plus), float(lam_minus), C_Q, W_Q, OPP)


@njit(cache=True)
def _apply_links(cur, nxt, qarr, delta, lever, i_self, i_nbr, i_up1, i_up2,
                 up1_ok, up2_ok, up3_ok, pc_prev, scheme_id,
                 vx, vy, vz, ox, oy, oz,
                 lam_p, lam_m, c_q, w_q, opp):
    magic = (0.5 + 1.0 / lam_p) * (0.5 + 1.0 / lam_m)
    fx = 0.0
    fy = 0.0
    fz = 0.0
    tx = 0.0
    ty = 0.0
    tz = 0.0
    n = qarr.shape[0]
    for i in range(n):
        q = qarr[i]
        qb = opp[q]
        w = w_q[q]
        qx = float(c_q[q, 0])
        qy = float(c_q[q, 1])
        qz = float(c_q[q, 2])
        s = i_self[i]
        ft_q = nxt[q, i_nbr[i]]

        # per-link effective scheme by the availability ladder
        eff = scheme_id
        if eff == 2 and not (up2_ok[i] and up3_ok[i]):
            eff = 1
        if eff == 1 and not up1_ok[i]:
            eff = 0

        if eff == 0:
            lx = lever[i, 0] + (0.5 - delta[i]) * qx
            ly = lever[i, 1] + (0.5 - delta[i]) * qy
            lz = lever[i, 2] + (0.5 - delta[i]) * qz
        else:
            lx = lever[i, 0]
            ly = lever[i, 1]
            lz = lever[i, 2]
        # wall velocity at the boundary point
        vbx = vx + oy * lz - oz * ly
        vby = vy + oz * lx - ox * lz
        vbz = vz + ox * ly - oy * lx
        cv = qx * vbx + qy * vby + qz * vbz

        if eff == 0:
            out = ft_q - 2.0 * (3.0 * w) * cv
        elif eff == 1:
            d = delta[i] if delta[i] > 1e-4 else 1e-4
            kappa0 = (1.0 - 2.0 * d) / (1.0 + 2.0 * d)
            alpha = 4.0 / (1.0 + 2.0 * d)
            out = (ft_q + kappa0 * nxt[q, s] - kappa0 * nxt[qb, i_up1[i]]
                   - alpha * (3.0 * w) * cv)
        else:
            d = delta[i] if delta[i] > 1e-4 else 1e-4
            kappa0 = (1.0 - 2.0 * d) / (1.0 + 2.0 * d)
            alpha = 4.0 / (1.0 + 2.0 * d)
            x2 = (2.0 * (3.0 * d * d - 4.0 * magic)
                  / (3.0 * (2.0 * d + 1.0)))
            ft_up = nxt[q, s]
            # smoothed directed curvature; the pushed slot at i_up2 holds
            # the post-collision value of the cell x - 3 c_q
            raw = 0.5 * (ft_q - ft_up - nxt[q, i_up1[i]] + nxt[q, i_up2[i]])
            corr = 0.5 * (raw + pc_prev[i])
            pc_prev[i] = raw
            out = (ft_q + kappa0 * ft_up - kappa0 * nxt[qb, i_up1[i]]
                   - alpha * (3.0 * w) * cv + x2 * corr)

        nxt[qb, s] = out

        # momentum exchange with Galilean correction
        flx = (qx - vbx) * ft_q - (-qx - vbx) * out
        fly = (qy - vby) * ft_q - (-qy - vby) * out
        flz = (qz - vbz) * ft_q - (-qz - vbz) * out
        fx += flx
        fy += fly
        fz += flz
        tx += ly * flz - lz * fly
        ty += lz * flx - lx * flz
        tz += lx * fly - ly * flx
    return np.array([fx, fy, fz]), np.array([tx, ty, tz])


# ---------------------------------------------------------------------------
# domain boundary conditions
# ---------------------------------------------------------------------------

@dataclass
class FaceClosure:
    """One domain-face boundary condition.

    kind 'wall' is a velocity bounce-back wall (side 0: wall below the first
    cell layer along `axis`, side 1: above the last); kind 'outflow' is the
    anti-bounce-back density outlet using the local pre-collision velocity.
    """

    axis: int
    side: int
    kind: str = "wall"
    velocity: tuple = (0.0, 0.0, 0.0)
    rho_out: float = 1.0


def apply_face_closures(fld: FluidField, faces, f_ext=(0.0, 0.0, 0.0)):
    """Apply all domain-face closures to f_next.

    All inputs (post-collision values pushed across the periodic wrap, and
    pre-collision face velocities for outflows) are gathered before any
    slot is written, since opposing faces read each other's target slots.
    """
    staged = []
    for fc in faces:
        axis, side = fc.axis, fc.side
        nxt = np.moveaxis(fld.f_next, 1 + axis, 1)
        layer = 0 if side == 0 else fld.dims[axis] - 1
        opp_layer = fld.dims[axis] - 1 if side == 0 else 0
        sign = -1 if side == 0 else 1
        qs = [q for q in range(1, 19) if C_Q[q, axis] == sign]
        gathered = []
        for q in qs:
            shift = [-int(C_Q[q, a]) for a in range(3) if a != axis]
            gathered.append(np.roll(nxt[q, opp_layer], shift=shift,
                                    axis=(0, 1)))
        if fc.kind == "outflow":
            f_face = np.moveaxis(fld.f, 1 + axis, 1)[:, layer]
            u = np.einsum("qab,qd->dab", f_face, C_Q.astype(np.float64))
            u += 0.5 * np.asarray(f_ext, dtype=np.float64)[:, None, None]
            staged.append((fc, nxt, layer, qs, gathered, u))
        else:
            staged.append((fc, nxt, layer, qs, gathered, None))

    for fc, nxt, layer, qs, gathered, u in staged:
        if fc.kind == "wall":
            vel = np.asarray(fc.velocity, dtype=np.float64)
            for q, ftq in zip(qs, gathered):
                cv = float(C_Q[q] @ vel)
                nxt[OPP[q], layer] = ftq - 2.0 * (W_Q[q] / CS2) * cv
        elif fc.kind == "outflow":
            usq = np.einsum("dab,dab->ab", u, u)
            for q, ftq in zip(qs, gathered):
                cu = np.einsum("d,dab->ab", C_Q[q].astype(np.float64), u)
                feq_plus = W_Q[q] * (fc.rho_out + cu * cu / (2 * CS2 * CS2)
                                     - usq / (2 * CS2))
                nxt[OPP[q], layer] = -ftq + 2.0 * feq_plus
        else:
            raise ValueError(f"unknown face closure kind {fc.kind!r}")


def inflow_outflow_faces(u_inf) -> list:
    """Bottom-face velocity inflow plus top-face outflow along z."""
    return [FaceClosure(axis=2, side=0, kind="wall",
                        velocity=tuple(float(v) for v in u_inf)),
            FaceClosure(axis=2, side=1, kind="outflow")]


def channel_faces(axis: int) -> list:
    """Resting bounce-back walls on both faces of `axis`."""
    return [FaceClosure(axis=axis, side=0), FaceClosure(axis=axis, side=1)]
