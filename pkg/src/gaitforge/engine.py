"""Compiled numerical core for the 500 Hz control and physics loop.

Everything here is numba-jitted and operates on plain float64/bool/int64
arrays. The public modules (robot, qp, mpc, swing, sim) wrap these kernels
with dataclasses, validation, and errors; this module stays import-light and
allocation-lean because it runs tens of millions of times during training.

Shared array conventions:
  leg order            [FR, FL, RR, RL]
  state vector x       [euler(3), position(3), omega(3), velocity(3)]
  world frame          x forward, y left, z up
  horizontal frame     yaw-aligned, gravity-vertical, origin at the base
"""

from __future__ import annotations

from collections import namedtuple

import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi

# Engine-wide configuration, packed once per environment. Scalars stay python
# ints/floats so numba specializes on dtype, arrays are float64 unless noted.
EngineCfg = namedtuple(
    "EngineCfg",
    [
        # geometry / rigid body
        "hip",          # (4,3) hip offsets in base frame
        "side",         # (4,) +1 left legs, -1 right legs
        "links",        # (3,) l_abduction, l_thigh, l_calf
        "mass",         # scalar kg
        "gravity",      # scalar m/s^2, positive magnitude
        "inertia",      # (3,3) base inertia in base frame
        # motors / joints
        "motor_alpha",  # scalar, heat coefficient in tau^2
        "tau_limit",    # scalar N*m per joint
        "joint_inertia",   # scalar, reflected inertia of a swing joint
        "joint_friction",  # scalar, viscous coefficient
        # mpc
        "horizon",      # int T
        "dt_mpc",       # scalar s
        "q_diag",       # (12,) state weights
        "r_force",      # scalar force weight
        "mu",           # friction coefficient
        "fz_min",       # N
        "fz_max",       # N
        "qp_tol",       # KKT tolerance
        "qp_max_iter",  # int
        "qp_reg",       # Hessian ridge
        "fallback_max",  # int, substeps of command reuse before failure
        # swing
        "kp",           # (3,)
        "kd",           # (3,)
        "z_clearance",  # scalar m
        "stand_height",  # scalar m
        # env
        "dt_low",       # scalar s
        "n_substeps",   # int per high-level step
        "accel",        # m/s^2 command ramp
        "v_max",        # m/s command plateau
        "reward_bonus",  # c
        "w_speed",      # w_v
        "w_energy",     # w_e
        "v_eps",        # reward denominator floor
        "min_height",   # termination
        "max_tilt",     # termination, rad
        "blowup",       # state magnitude limit
    ],
)

# Mutable per-episode state. 1-element arrays hold scalars the kernels mutate.
EngineState = namedtuple(
    "EngineState",
    [
        "pos", "vel", "eul", "omg",      # base, world frame
        "q", "dq",                        # (4,3) joint angles / rates
        "phase",                          # (1,) master gait phase
        "pin_on",                         # (4,) bool, foot pinned (stance)
        "pins",                           # (4,3) pinned foot world positions
        "lift",                           # (4,3) latched lift-off, horizontal frame
        "prev_stance",                    # (4,) bool, previous substep schedule
        "time", "energy",                 # (1,) each
        "last_grf",                       # (4,3) last valid force command
        "fallback",                       # (1,) int64 consecutive fallback count
        "counters",                       # (4,) int64: clip, clamp, slip, qp_fail
        "warm_u", "warm_lam", "warm_s",   # QP warm-start vectors (max sized)
        "warm_n",                         # (1,) int64, active size or -1
        "warm_pattern",                   # (T*4,) bool
    ],
)

# trace row layout written by run_env_step for every substep
TRACE_WIDTH = 28
(TR_TIME, TR_VBAR, TR_VX, TR_VY, TR_VZ, TR_PX, TR_PY, TR_PZ, TR_ROLL,
 TR_PITCH, TR_YAW, TR_PH0, TR_PH1, TR_PH2, TR_PH3, TR_ST0, TR_ST1, TR_ST2,
 TR_ST3, TR_POWER, TR_FREQ, TR_SWING, TR_TH2, TR_TH3, TR_TH4, TR_FZ,
 TR_QP_ITERS, TR_QP_FALLBACK) = range(TRACE_WIDTH)

# result row layout returned by run_env_step
OUT_WIDTH = 12
(OUT_REWARD, OUT_V, OUT_VBAR, OUT_MEAN_POWER, OUT_SPEED_ERR, OUT_COT,
 OUT_SUBSTEPS, OUT_ENERGY, OUT_CLIPS, OUT_CLAMPS, OUT_SLIPS,
 OUT_QP_FAILS) = range(OUT_WIDTH)

# episode status codes
STATUS_RUNNING = 0
STATUS_FELL = 1
STATUS_FAILURE = 2

# QP status codes
QP_OPTIMAL = 0
QP_MAX_ITER = 1
QP_INFEASIBLE = 2


# ---------------------------------------------------------------------------
# small math helpers
# ---------------------------------------------------------------------------

@njit(cache=True)
def _wrap_two_pi(x):
    w = x % TWO_PI
    # % of a tiny negative value can round up to the modulus itself
    if w >= TWO_PI:
        return 0.0
    return w


@njit(cache=True)
def _rot_zyx(eul, out):
    """Base-to-world rotation, R = Rz(yaw) Ry(pitch) Rx(roll)."""
    cr, sr = np.cos(eul[0]), np.sin(eul[0])
    cp, sp = np.cos(eul[1]), np.sin(eul[1])
    cy, sy = np.cos(eul[2]), np.sin(eul[2])
    out[0, 0] = cy * cp
    out[0, 1] = cy * sp * sr - sy * cr
    out[0, 2] = cy * sp * cr + sy * sr
    out[1, 0] = sy * cp
    out[1, 1] = sy * sp * sr + cy * cr
    out[1, 2] = sy * sp * cr - cy * sr
    out[2, 0] = -sp
    out[2, 1] = cp * sr
    out[2, 2] = cp * cr


@njit(cache=True)
def _solve3(a, b, out):
    """3x3 linear solve via adjugate; returns determinant (0 -> singular)."""
    d = (a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
         - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
         + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))
    if np.abs(d) < 1e-12:
        return 0.0
    inv = 1.0 / d
    out[0] = inv * ((a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]) * b[0]
                    + (a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]) * b[1]
                    + (a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]) * b[2])
    out[1] = inv * ((a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]) * b[0]
                    + (a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]) * b[1]
                    + (a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]) * b[2])
    out[2] = inv * ((a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]) * b[0]
                    + (a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]) * b[1]
                    + (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]) * b[2])
    return d


# ---------------------------------------------------------------------------
# leg kinematics
# ---------------------------------------------------------------------------

@njit(cache=True)
def leg_fk(q, side, links, out):
    """Foot position relative to the hip, base frame."""
    la, lt, lc = links[0], links[1], links[2]
    x = -lt * np.sin(q[1]) - lc * np.sin(q[1] + q[2])
    z = -lt * np.cos(q[1]) - lc * np.cos(q[1] + q[2])
    y = side * la
    c0, s0 = np.cos(q[0]), np.sin(q[0])
    out[0] = x
    out[1] = c0 * y - s0 * z
    out[2] = s0 * y + c0 * z


@njit(cache=True)
def leg_jac(q, side, links, out):
    """3x3 foot Jacobian d(foot_base)/dq."""
    la, lt, lc = links[0], links[1], links[2]
    s1, c1 = np.sin(q[1]), np.cos(q[1])
    s12, c12 = np.sin(q[1] + q[2]), np.cos(q[1] + q[2])
    x = -lt * s1 - lc * s12
    z = -lt * c1 - lc * c12
    y = side * la
    c0, s0 = np.cos(q[0]), np.sin(q[0])
    # d/dq0 of Rx(q0) @ (x, y, z)
    out[0, 0] = 0.0
    out[1, 0] = -s0 * y - c0 * z
    out[2, 0] = c0 * y - s0 * z
    # d/dq1 = Rx(q0) @ (z, 0, -x)
    out[0, 1] = z
    out[1, 1] = s0 * x
    out[2, 1] = -c0 * x
    # d/dq2 = Rx(q0) @ (-lc*c12, 0, lc*s12)
    out[0, 2] = -lc * c12
    out[1, 2] = -s0 * lc * s12
    out[2, 2] = c0 * lc * s12


@njit(cache=True)
def leg_ik(p, side, links, out):
    """Joint angles for a foot target relative to the hip, base frame.

    Knee-backward branch: q2 = -acos(.) in [-pi, 0]. Returns True when the
    target is inside the reachable shell (radius and lateral offset), False
    when it had to fail; out is only valid on success.
    """
    la, lt, lc = links[0], links[1], links[2]
    rho2 = p[1] * p[1] + p[2] * p[2]
    la2 = la * la
    if rho2 < la2 - 1e-12:
        return False
    zl = -np.sqrt(max(rho2 - la2, 0.0))
    q0 = np.arctan2(p[2], p[1]) - np.arctan2(zl, side * la)
    q0 = (q0 + np.pi) % TWO_PI - np.pi
    r2 = p[0] * p[0] + zl * zl
    ck = (r2 - lt * lt - lc * lc) / (2.0 * lt * lc)
    if ck > 1.0 + 1e-9 or ck < -1.0 - 1e-9:
        return False
    if ck > 1.0:
        ck = 1.0
    elif ck < -1.0:
        ck = -1.0
    q2 = -np.arccos(ck)
    q1 = np.arctan2(-p[0], -zl) - np.arctan2(lc * np.sin(q2),
                                             lt + lc * np.cos(q2))
    q1 = (q1 + np.pi) % TWO_PI - np.pi
    out[0] = q0
    out[1] = q1
    out[2] = q2
    return True


@njit(cache=True)
def clamp_reach(d, links, margin):
    """Shrink/grow a hip-relative target onto the reachable shell in place.

    Returns True if the target was modified. Only valid for zero or small
    abduction offsets; the shell is treated as the sphere band
    [|lt - lc|, lt + lc] on the full 3-D radius.
    """
    la, lt, lc = links[0], links[1], links[2]
    r_max = (lt + lc) * (1.0 - margin)
    r_min_geo = np.abs(lt - lc) + la
    r_min = r_min_geo + (lt + lc) * margin
    r = np.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
    if r > r_max:
        s = r_max / r
        d[0] *= s
        d[1] *= s
        d[2] *= s
        return True
    if r < r_min:
        if r < 1e-9:
            d[2] = -r_min
        else:
            s = r_min / r
            d[0] *= s
            d[1] *= s
            d[2] *= s
        return True
    return False


# ---------------------------------------------------------------------------
# dense interior-point QP:  min 0.5 u'Hu + c'u  s.t.  Gu <= h
# ---------------------------------------------------------------------------

@njit(cache=True)
def _chol_solve(L, b, x):
    """Solve L L' x = b with explicit triangular substitutions."""
    n = b.shape[0]
    for i in range(n):
        acc = b[i]
        for j in range(i):
            acc -= L[i, j] * x[j]
        x[i] = acc / L[i, i]
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for j in range(i + 1, n):
            acc -= L[j, i] * x[j]
        x[i] = acc / L[i, i]


@njit(cache=True)
def _step_to_boundary(x, dx):
    a = 1.0
    for i in range(x.shape[0]):
        if dx[i] < 0.0:
            r = -x[i] / dx[i]
            if r < a:
                a = r
    return a


@njit(cache=True)
def kkt_residual_dense(H, c, G, h, u, lam):
    """max of stationarity, primal violation, |lam'(Gu - h)|."""
    n = u.shape[0]
    m = h.shape[0]
    rd = H @ u + c
    if m > 0:
        rd += G.T @ lam
    stat = 0.0
    for i in range(n):
        a = np.abs(rd[i])
        if a > stat:
            stat = a
    viol = 0.0
    comp = 0.0
    if m > 0:
        gu = G @ u
        for i in range(m):
            v = gu[i] - h[i]
            if v > viol:
                viol = v
            comp += lam[i] * v
    comp = np.abs(comp)
    return max(stat, max(viol, comp))


@njit(cache=True)
def ipm_solve_dense(H, c, G, h, u, lam, s, warm, tol, max_iter, reg):
    """Mehrotra predictor-corrector interior point.

    u, lam, s are in/out (warm start when warm=True and contents are valid).
    Returns (status, iterations, kkt). Infeasible-start variant: the initial
    point need not satisfy Gu + s = h.
    """
    n = u.shape[0]
    m = h.shape[0]
    Hr = H + reg * np.eye(n)
    if m == 0:
        L = np.linalg.cholesky(Hr)
        _chol_solve(L, -c, u)
        return QP_OPTIMAL, 1, kkt_residual_dense(H, c, G, h, u, lam)

    if not warm:
        L0 = np.linalg.cholesky(Hr)
        _chol_solve(L0, -c, u)
        gu0 = G @ u
        for i in range(m):
            si = h[i] - gu0[i]
            s[i] = si if si > 1.0 else 1.0
            lam[i] = 1.0
    else:
        gu0 = G @ u
        for i in range(m):
            si = h[i] - gu0[i]
            s[i] = si if si > 1e-3 else 1e-3
            lam[i] = lam[i] if lam[i] > 1e-3 else 1e-3

    du = np.empty(n)
    kkt = np.inf
    it = 0
    best_viol = np.inf
    for it in range(1, max_iter + 1):
        gu = G @ u
        rd = H @ u + c + G.T @ lam
        rp = gu + s - h
        stat = 0.0
        for i in range(n):
            a = np.abs(rd[i])
            if a > stat:
                stat = a
        viol = 0.0
        comp = 0.0
        for i in range(m):
            v = gu[i] - h[i]
            if v > viol:
                viol = v
            comp += lam[i] * v
        comp = np.abs(comp)
        kkt = max(stat, max(viol, comp))
        if viol < best_viol:
            best_viol = viol
        if kkt <= tol:
            return QP_OPTIMAL, it, kkt
        mu = 0.0
        for i in range(m):
            mu += s[i] * lam[i]
        mu /= m

        d = np.empty(m)
        for i in range(m):
            di = lam[i] / s[i]
            if di < 1e-12:
                di = 1e-12
            elif di > 1e12:
                di = 1e12
            d[i] = di
        M = Hr + G.T @ (d.reshape(m, 1) * G)
        L = np.linalg.cholesky(M)

        # affine (predictor) step; r_comp = s*lam componentwise
        w = d * rp - lam
        rhs = -rd - G.T @ w
        _chol_solve(L, rhs, du)
        gdu = G @ du
        dlam_a = d * (gdu + rp) - lam
        ds_a = np.empty(m)
        for i in range(m):
            ds_a[i] = -(s[i] * lam[i] + s[i] * dlam_a[i]) / lam[i]
        ap = _step_to_boundary(s, ds_a)
        ad = _step_to_boundary(lam, dlam_a)
        mu_aff = 0.0
        for i in range(m):
            mu_aff += (s[i] + ap * ds_a[i]) * (lam[i] + ad * dlam_a[i])
        mu_aff /= m
        sig = (mu_aff / mu) ** 3
        if sig > 1.0:
            sig = 1.0

        # corrector with centering
        rc = np.empty(m)
        for i in range(m):
            rc[i] = s[i] * lam[i] + ds_a[i] * dlam_a[i] - sig * mu
        w = d * rp - rc / s
        rhs = -rd - G.T @ w
        _chol_solve(L, rhs, du)
        gdu = G @ du
        dlam = d * (gdu + rp) - rc / s
        ds = np.empty(m)
        for i in range(m):
            ds[i] = -(rc[i] + s[i] * dlam[i]) / lam[i]
        ap = min(1.0, 0.995 * _step_to_boundary(s, ds))
        ad = min(1.0, 0.995 * _step_to_boundary(lam, dlam))
        for i in range(n):
            u[i] += ap * du[i]
        for i in range(m):
            s[i] += ap * ds[i]
            lam[i] += ad * dlam[i]

    if best_viol > np.sqrt(tol):
        return QP_INFEASIBLE, it, kkt
    return QP_MAX_ITER, it, kkt


# ---------------------------------------------------------------------------
# block interior point for the MPC structure: G = I_nblk (x) F, h = tile(h6)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _blk_gmatvec(F, u, out):
    """out = (I (x) F) @ u, 3 columns and 6 rows per block."""
    nblk = u.shape[0] // 3
    for b in range(nblk):
        for i in range(6):
            acc = 0.0
            for j in range(3):
                acc += F[i, j] * u[3 * b + j]
            out[6 * b + i] = acc


@njit(cache=True)
def _blk_gtmatvec(F, y, out):
    nblk = out.shape[0] // 3
    for b in range(nblk):
        for j in range(3):
            acc = 0.0
            for i in range(6):
                acc += F[i, j] * y[6 * b + i]
            out[3 * b + j] = acc


@njit(cache=True)
def ipm_solve_blocked(H, c, F, h6, u, lam, s, warm, tol, max_iter, reg):
    """Interior point specialized to per-leg-step friction/box blocks.

    Identical math to ipm_solve_dense with G = I (x) F implicit; exploited in
    the normal matrix, which gains only 3x3 diagonal blocks.
    """
    n = u.shape[0]
    nblk = n // 3
    m = 6 * nblk
    Hr = H + reg * np.eye(n)
    if m == 0:
        L = np.linalg.cholesky(Hr)
        _chol_solve(L, -c, u)
        return QP_OPTIMAL, 1, 0.0

    h = np.empty(m)
    for b in range(nblk):
        for i in range(6):
            h[6 * b + i] = h6[i]

    gu = np.empty(m)
    if not warm:
        L0 = np.linalg.cholesky(Hr)
        _chol_solve(L0, -c, u)
        _blk_gmatvec(F, u, gu)
        for i in range(m):
            si = h[i] - gu[i]
            s[i] = si if si > 1.0 else 1.0
            lam[i] = 1.0
    else:
        _blk_gmatvec(F, u, gu)
        for i in range(m):
            si = h[i] - gu[i]
            s[i] = si if si > 1e-3 else 1e-3
            lam[i] = lam[i] if lam[i] > 1e-3 else 1e-3

    du = np.empty(n)
    rd = np.empty(n)
    gt = np.empty(n)
    rp = np.empty(m)
    d = np.empty(m)
    rc = np.empty(m)
    ds_a = np.empty(m)
    ds = np.empty(m)
    gdu = np.empty(m)
    kkt = np.inf
    it = 0
    best_viol = np.inf
    for it in range(1, max_iter + 1):
        _blk_gmatvec(F, u, gu)
        hu = H @ u
        _blk_gtmatvec(F, lam, gt)
        stat = 0.0
        for i in range(n):
            rd[i] = hu[i] + c[i] + gt[i]
            a = np.abs(rd[i])
            if a > stat:
                stat = a
        viol = 0.0
        comp = 0.0
        mu = 0.0
        for i in range(m):
            v = gu[i] - h[i]
            rp[i] = v + s[i]
            if v > viol:
                viol = v
            comp += lam[i] * v
            mu += s[i] * lam[i]
        comp = np.abs(comp)
        mu /= m
        kkt = max(stat, max(viol, comp))
        if viol < best_viol:
            best_viol = viol
        if kkt <= tol:
            return QP_OPTIMAL, it, kkt

        for i in range(m):
            di = lam[i] / s[i]
            if di < 1e-12:
                di = 1e-12
            elif di > 1e12:
                di = 1e12
            d[i] = di
        M = Hr.copy()
        for b in range(nblk):
            for jj in range(3):
                for kk in range(3):
                    acc = 0.0
                    for i in range(6):
                        acc += F[i, jj] * d[6 * b + i] * F[i, kk]
                    M[3 * b + jj, 3 * b + kk] += acc
        L = np.linalg.cholesky(M)

        rhs = np.empty(n)
        for i in range(m):
            rc[i] = d[i] * rp[i] - lam[i]
        _blk_gtmatvec(F, rc, gt)
        for i in range(n):
            rhs[i] = -rd[i] - gt[i]
        _chol_solve(L, rhs, du)
        _blk_gmatvec(F, du, gdu)
        dlam_a = np.empty(m)
        for i in range(m):
            dlam_a[i] = d[i] * (gdu[i] + rp[i]) - lam[i]
            ds_a[i] = -(s[i] * lam[i] + s[i] * dlam_a[i]) / lam[i]
        ap = _step_to_boundary(s, ds_a)
        ad = _step_to_boundary(lam, dlam_a)
        mu_aff = 0.0
        for i in range(m):
            mu_aff += (s[i] + ap * ds_a[i]) * (lam[i] + ad * dlam_a[i])
        mu_aff /= m
        sig = (mu_aff / mu) ** 3
        if sig > 1.0:
            sig = 1.0

        for i in range(m):
            rci = s[i] * lam[i] + ds_a[i] * dlam_a[i] - sig * mu
            rc[i] = d[i] * rp[i] - rci / s[i]
        _blk_gtmatvec(F, rc, gt)
        for i in range(n):
            rhs[i] = -rd[i] - gt[i]
        _chol_solve(L, rhs, du)
        _blk_gmatvec(F, du, gdu)
        dlam = np.empty(m)
        for i in range(m):
            rci = s[i] * lam[i] + ds_a[i] * dlam_a[i] - sig * mu
            dlam[i] = d[i] * (gdu[i] + rp[i]) - rci / s[i]
            ds[i] = -(rci + s[i] * dlam[i]) / lam[i]
        ap = min(1.0, 0.995 * _step_to_boundary(s, ds))
        ad = min(1.0, 0.995 * _step_to_boundary(lam, dlam))
        for i in range(n):
            u[i] += ap * du[i]
        for i in range(m):
            s[i] += ap * ds[i]
            lam[i] += ad * dlam[i]

    if best_viol > np.sqrt(tol):
        return QP_INFEASIBLE, it, kkt
    return QP_MAX_ITER, it, kkt


# ---------------------------------------------------------------------------
# MPC condensing and solve
# ---------------------------------------------------------------------------

@njit(cache=True)
def friction_rows(mu, fz_min, fz_max, F, h6):
    """Per-leg-step constraint block F f <= h6 (box on fz, pyramid on fx/fy)."""
    F[:] = 0.0
    F[0, 2] = -1.0
    F[1, 2] = 1.0
    F[2, 0] = 1.0
    F[2, 2] = -mu
    F[3, 0] = -1.0
    F[3, 2] = -mu
    F[4, 1] = 1.0
    F[4, 2] = -mu
    F[5, 1] = -1.0
    F[5, 2] = -mu
    h6[0] = -fz_min
    h6[1] = fz_max
    h6[2] = 0.0
    h6[3] = 0.0
    h6[4] = 0.0
    h6[5] = 0.0


@njit(cache=True)
def contact_pattern(phase, freq, swing_frac, offsets4, horizon, dt_mpc, out):
    """Roll the phase integrator forward; out: (T,4) stance booleans."""
    thr = TWO_PI * swing_frac
    for k in range(horizon):
        ph1 = _wrap_two_pi(phase + TWO_PI * freq * k * dt_mpc)
        for leg in range(4):
            out[k, leg] = _wrap_two_pi(ph1 + offsets4[leg]) >= thr


@njit(cache=True)
def mpc_assemble(eul, pos, omg, vel, r_feet, pattern, vbar, cfg_q, r_force,
                 inertia, mass, gravity, stand_height, dt, horizon,
                 H_out, c_out, colmap_out):
    """Condense the horizon QP onto stacked stance forces.

    r_feet: (4,3) foot positions relative to the base, world frame, one row
    per leg (landing estimates for swing legs). pattern: (T,4) stance flags.
    Fills H_out (n,n), c_out (n,) and colmap_out (n//3, 2) = (step, leg).
    Returns n (active force variables).
    """
    T = horizon
    R = np.empty((3, 3))
    _rot_zyx(eul, R)
    Iw = R @ inertia @ R.T
    # A_c only has the yaw map (eul rows) and identity (pos rows)
    yawm = np.empty((3, 3))
    cy, sy = np.cos(eul[2]), np.sin(eul[2])
    yawm[0, 0] = cy
    yawm[0, 1] = sy
    yawm[0, 2] = 0.0
    yawm[1, 0] = -sy
    yawm[1, 1] = cy
    yawm[1, 2] = 0.0
    yawm[2, 0] = 0.0
    yawm[2, 1] = 0.0
    yawm[2, 2] = 1.0

    # B_c blocks: omega rows Iw^-1 [r]x, velocity rows I/m
    Iw_inv_rx = np.empty((4, 3, 3))
    rx = np.empty((3, 3))
    col = np.empty(3)
    sol = np.empty(3)
    for leg in range(4):
        r = r_feet[leg]
        rx[0, 0] = 0.0
        rx[0, 1] = -r[2]
        rx[0, 2] = r[1]
        rx[1, 0] = r[2]
        rx[1, 1] = 0.0
        rx[1, 2] = -r[0]
        rx[2, 0] = -r[1]
        rx[2, 1] = r[0]
        rx[2, 2] = 0.0
        for j in range(3):
            for i in range(3):
                col[i] = rx[i, j]
            det = _solve3(Iw, col, sol)
            if det == 0.0:
                return -1
            for i in range(3):
                Iw_inv_rx[leg, i, j] = sol[i]

    inv_m = 1.0 / mass
    # discretized per-leg blocks: Bp = B_c*dt, Cp = A_c @ B_c * dt^2
    Bp = np.zeros((12, 12))
    Cp = np.zeros((12, 12))
    for leg in range(4):
        for i in range(3):
            for j in range(3):
                Bp[6 + i, 3 * leg + j] = Iw_inv_rx[leg, i, j] * dt
            Bp[9 + i, 3 * leg + i] = inv_m * dt
        # A_c @ B_c: eul rows pick yawm @ omega-rows, pos rows pick vel-rows
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for k in range(3):
                    acc += yawm[i, k] * Iw_inv_rx[leg, k, j]
                Cp[i, 3 * leg + j] = acc * dt * dt
            Cp[3 + i, 3 * leg + i] = inv_m * dt * dt

    # free response minus reference, stacked over t = 1..T
    ax = np.empty(12)  # A_c @ x0
    for i in range(3):
        ax[i] = yawm[i, 0] * omg[0] + yawm[i, 1] * omg[1] + yawm[i, 2] * omg[2]
        ax[3 + i] = vel[i]
        ax[6 + i] = 0.0
        ax[9 + i] = 0.0
    gz = -gravity * dt  # g' affine term, velocity-z slot
    e = np.empty(12 * T)
    for t in range(1, T + 1):
        base = 12 * (t - 1)
        tt = t * dt
        # free = x0 + t*dt*(A_c x0) + accumulated gravity
        for i in range(3):
            e[base + i] = eul[i] + tt * ax[i]
            e[base + 3 + i] = pos[i] + tt * ax[3 + i]
            e[base + 6 + i] = omg[i]
            e[base + 9 + i] = vel[i]
        e[base + 11] += t * gz                       # velocity z
        e[base + 5] += 0.5 * t * (t - 1) * dt * gz   # position z via A_c g'
        # subtract reference
        e[base + 3] -= pos[0] + vbar * tt
        e[base + 4] -= pos[1]
        e[base + 5] -= stand_height
        e[base + 9] -= vbar

    # active columns
    n = 0
    for k in range(T):
        for leg in range(4):
            if pattern[k, leg]:
                colmap_out[n // 3, 0] = k
                colmap_out[n // 3, 1] = leg
                n += 3
    if n == 0:
        return 0

    B = np.zeros((12 * T, n))
    nblk = n // 3
    for b in range(nblk):
        k = colmap_out[b, 0]
        leg = colmap_out[b, 1]
        for t in range(k + 1, T + 1):
            base = 12 * (t - 1)
            f = float(t - 1 - k)
            for i in range(12):
                for j in range(3):
                    B[base + i, 3 * b + j] = (Bp[i, 3 * leg + j]
                                              + f * Cp[i, 3 * leg + j])

    # H = 2 (B' QB + R I), c = 2 B' Q e
    S = np.empty((12 * T, n))
    for i in range(12 * T):
        qi = cfg_q[i % 12]
        for j in range(n):
            S[i, j] = qi * B[i, j]
    Bt = np.ascontiguousarray(B.T)
    Hm = Bt @ S
    for i in range(n):
        for j in range(n):
            H_out[i, j] = 2.0 * Hm[i, j]
        H_out[i, i] += 2.0 * r_force
    qe = np.empty(12 * T)
    for i in range(12 * T):
        qe[i] = cfg_q[i % 12] * e[i]
    cv = Bt @ qe
    for i in range(n):
        c_out[i] = 2.0 * cv[i]
    return n


@njit(cache=True)
def mpc_solve(eul, pos, omg, vel, r_feet, pattern, vbar, cfg, state,
              grf_out):
    """Condense + solve + scatter first-step forces. Returns (ok, iters).

    Warm start is keyed on the contact pattern stored in state.warm_pattern.
    """
    T = cfg.horizon
    nmax = 12 * T
    H = np.empty((nmax, nmax))
    c = np.empty(nmax)
    colmap = np.empty((4 * T, 2), dtype=np.int64)
    n = mpc_assemble(eul, pos, omg, vel, r_feet, pattern, vbar, cfg.q_diag,
                     cfg.r_force, cfg.inertia, cfg.mass, cfg.gravity,
                     cfg.stand_height, cfg.dt_mpc, T, H, c, colmap)
    grf_out[:] = 0.0
    if n < 0:
        return False, 0
    if n == 0:
        return True, 0

    same = state.warm_n[0] == n
    if same:
        for k in range(T):
            for leg in range(4):
                if state.warm_pattern[4 * k + leg] != pattern[k, leg]:
                    same = False
                    break
            if not same:
                break
    F = np.empty((6, 3))
    h6 = np.empty(6)
    friction_rows(cfg.mu, cfg.fz_min, cfg.fz_max, F, h6)
    u = state.warm_u[:n]
    lam = state.warm_lam[:2 * n]
    s = state.warm_s[:2 * n]
    Hc = np.ascontiguousarray(H[:n, :n])
    cc = np.ascontiguousarray(c[:n])
    status, iters, kkt = ipm_solve_blocked(Hc, cc, F, h6, u, lam, s, same,
                                           cfg.qp_tol, cfg.qp_max_iter,
                                           cfg.qp_reg)
    ok = status == QP_OPTIMAL
    if not ok and status == QP_MAX_ITER and kkt < 1e-4:
        ok = True  # soft-accept a nearly converged command
    if ok:
        state.warm_n[0] = n
        for k in range(T):
            for leg in range(4):
                state.warm_pattern[4 * k + leg] = pattern[k, leg]
        nblk = n // 3
        for b in range(nblk):
            if colmap[b, 0] == 0:
                leg = colmap[b, 1]
                for j in range(3):
                    grf_out[leg, j] = u[3 * b + j]
    else:
        state.warm_n[0] = -1
    return ok, iters


# ---------------------------------------------------------------------------
# swing trajectory
# ---------------------------------------------------------------------------

@njit(cache=True)
def swing_eval(lift, mid, land, s, out):
    """Per-axis Lagrange quadratic through (0, lift), (0.5, mid), (1, land)."""
    b0 = 2.0 * (s - 0.5) * (s - 1.0)
    b1 = -4.0 * s * (s - 1.0)
    b2 = 2.0 * s * (s - 0.5)
    for i in range(3):
        out[i] = b0 * lift[i] + b1 * mid[i] + b2 * land[i]


# ---------------------------------------------------------------------------
# physics substep
# ---------------------------------------------------------------------------

@njit(cache=True)
def physics_substep(state, cfg, grf, tau_swing, dt, power_clip_out):
    """Semi-implicit Euler step; mutates state in place.

    grf: (4,3) world-frame ground reaction forces (zero rows for swing legs).
    tau_swing: (4,3) joint torques for swing legs (rows for pinned legs are
    ignored). power_clip_out: [sum motor power W, clip events, slip events].
    Returns False on numerical blowup.
    """
    pos, vel, eul, omg = state.pos, state.vel, state.eul, state.omg
    q, dq = state.q, state.dq
    m = cfg.mass

    # force/torque on the base from pinned feet plus gravity
    fx = 0.0
    fy = 0.0
    fz = -m * cfg.gravity
    tq = np.zeros(3)
    for leg in range(4):
        if state.pin_on[leg]:
            fx += grf[leg, 0]
            fy += grf[leg, 1]
            fz += grf[leg, 2]
            rx = state.pins[leg, 0] - pos[0]
            ry = state.pins[leg, 1] - pos[1]
            rz = state.pins[leg, 2] - pos[2]
            tq[0] += ry * grf[leg, 2] - rz * grf[leg, 1]
            tq[1] += rz * grf[leg, 0] - rx * grf[leg, 2]
            tq[2] += rx * grf[leg, 1] - ry * grf[leg, 0]

    R = np.empty((3, 3))
    _rot_zyx(eul, R)
    Iw = R @ cfg.inertia @ R.T
    iw_omg = Iw @ omg
    tq[0] -= omg[1] * iw_omg[2] - omg[2] * iw_omg[1]
    tq[1] -= omg[2] * iw_omg[0] - omg[0] * iw_omg[2]
    tq[2] -= omg[0] * iw_omg[1] - omg[1] * iw_omg[0]
    domg = np.empty(3)
    if _solve3(Iw, tq, domg) == 0.0:
        return False

    # semi-implicit: velocities first, then positions with new velocities
    vel[0] += dt * fx / m
    vel[1] += dt * fy / m
    vel[2] += dt * fz / m
    for i in range(3):
        omg[i] += dt * domg[i]
    for i in range(3):
        pos[i] += dt * vel[i]
    # Euler-rate map at the pre-update orientation
    E = np.empty((3, 3))
    cz, sz = np.cos(eul[2]), np.sin(eul[2])
    cyp, syp = np.cos(eul[1]), np.sin(eul[1])
    E[0, 0] = cz * cyp
    E[0, 1] = -sz
    E[0, 2] = 0.0
    E[1, 0] = sz * cyp
    E[1, 1] = cz
    E[1, 2] = 0.0
    E[2, 0] = -syp
    E[2, 1] = 0.0
    E[2, 2] = 1.0
    erate = np.empty(3)
    if _solve3(E, omg, erate) == 0.0:
        return False
    for i in range(3):
        eul[i] += dt * erate[i]

    _rot_zyx(eul, R)
    power = 0.0
    clips = 0
    slips = 0
    pw = np.empty(3)
    fb = np.empty(3)
    tau = np.empty(3)
    J = np.empty((3, 3))
    qn = np.empty(3)
    d = np.empty(3)
    alpha = cfg.motor_alpha
    tlim = cfg.tau_limit
    for leg in range(4):
        if state.pin_on[leg]:
            # back-solve joints from the pinned foot at the new base pose
            wx = state.pins[leg, 0] - pos[0]
            wy = state.pins[leg, 1] - pos[1]
            wz = state.pins[leg, 2] - pos[2]
            for i in range(3):
                d[i] = (R[0, i] * wx + R[1, i] * wy + R[2, i] * wz
                        - cfg.hip[leg, i])
            if clamp_reach(d, cfg.links, 1e-4):
                slips += 1
                # re-anchor the pin at the clamped position
                for i in range(3):
                    state.pins[leg, i] = pos[i] + (R[i, 0] * (cfg.hip[leg, 0] + d[0])
                                                   + R[i, 1] * (cfg.hip[leg, 1] + d[1])
                                                   + R[i, 2] * (cfg.hip[leg, 2] + d[2]))
            if not leg_ik(d, cfg.side[leg], cfg.links, qn):
                return False
            for i in range(3):
                q[leg, i] = qn[i]
            # foot velocity in base frame from the base twist
            vx = vel[0] + omg[1] * wz - omg[2] * wy
            vy = vel[1] + omg[2] * wx - omg[0] * wz
            vz = vel[2] + omg[0] * wy - omg[1] * wx
            for i in range(3):
                pw[i] = -(R[0, i] * vx + R[1, i] * vy + R[2, i] * vz)
            leg_jac(qn, cfg.side[leg], cfg.links, J)
            if _solve3(J, pw, d) == 0.0:
                slips += 1
                d[0] = 0.0
                d[1] = 0.0
                d[2] = 0.0
            for i in range(3):
                dq[leg, i] = d[i]
            # motor torque transmitting the reaction force: tau = J' R' (-f)
            for i in range(3):
                fb[i] = -(R[0, i] * grf[leg, 0] + R[1, i] * grf[leg, 1]
                          + R[2, i] * grf[leg, 2])
            for i in range(3):
                tau[i] = J[0, i] * fb[0] + J[1, i] * fb[1] + J[2, i] * fb[2]
            for i in range(3):
                if tau[i] > tlim:
                    tau[i] = tlim
                    clips += 1
                elif tau[i] < -tlim:
                    tau[i] = -tlim
                    clips += 1
                p = tau[i] * dq[leg, i] + alpha * tau[i] * tau[i]
                if p > 0.0:
                    power += p
        else:
            for i in range(3):
                t = tau_swing[leg, i]
                ddq = (t - cfg.joint_friction * dq[leg, i]) / cfg.joint_inertia
                dq[leg, i] += dt * ddq
                q[leg, i] += dt * dq[leg, i]
                p = t * dq[leg, i] + alpha * t * t
                if p > 0.0:
                    power += p

    lim = cfg.blowup
    for i in range(3):
        if (np.abs(pos[i]) > lim or np.abs(vel[i]) > lim
                or np.abs(eul[i]) > lim or np.abs(omg[i]) > lim):
            return False
    for leg in range(4):
        for i in range(3):
            if np.abs(q[leg, i]) > lim or np.abs(dq[leg, i]) > lim:
                return False

    power_clip_out[0] = power
    power_clip_out[1] = float(clips)
    power_clip_out[2] = float(slips)
    return True


# ---------------------------------------------------------------------------
# the 20 Hz environment step: 25 substeps of control + physics
# ---------------------------------------------------------------------------

@njit(cache=True)
def _desired_speed(t, accel, v_max):
    v = accel * t
    return v if v < v_max else v_max


@njit(cache=True)
def run_env_step(state, cfg, gait, trace, out):
    """One high-level step under fixed gait parameters.

    gait: [frequency_hz, swing_fraction, theta2, theta3, theta4].
    trace: (n_substeps, TRACE_WIDTH) buffer, filled per executed substep.
    out: (OUT_WIDTH,) results. Returns STATUS_* code.
    """
    freq = gait[0]
    swing_frac = gait[1]
    offsets = np.empty(4)
    offsets[0] = 0.0
    offsets[1] = gait[2]
    offsets[2] = gait[3]
    offsets[3] = gait[4]
    thr = TWO_PI * swing_frac
    dt = cfg.dt_low
    T = cfg.horizon

    pattern = np.empty((T, 4), dtype=np.bool_)
    grf = np.zeros((4, 3))
    tau_swing = np.zeros((4, 3))
    r_feet = np.empty((4, 3))
    foot_b = np.empty(3)
    foot_w = np.empty(3)
    target = np.empty(3)
    mid = np.empty(3)
    land = np.empty(3)
    qdes = np.empty(3)
    pcs = np.empty(3)
    phys_out = np.empty(3)
    R = np.empty((3, 3))
    energy0 = state.energy[0]
    status = STATUS_RUNNING
    done = 0
    clips0 = state.counters[0]
    clamps0 = state.counters[1]
    slips0 = state.counters[2]
    qpf0 = state.counters[3]

    for sub in range(cfg.n_substeps):
        t_now = state.time[0]
        vbar = _desired_speed(t_now, cfg.accel, cfg.v_max)
        state.phase[0] = _wrap_two_pi(state.phase[0] + TWO_PI * freq * dt)
        ph1 = state.phase[0]
        _rot_zyx(state.eul, R)
        yaw = state.eul[2]
        cyw, syw = np.cos(yaw), np.sin(yaw)

        # schedule, transitions, lift-off latching / pinning
        for leg in range(4):
            ph = _wrap_two_pi(ph1 + offsets[leg])
            in_stance = ph >= thr
            if in_stance and not state.prev_stance[leg]:
                # touch down: pin at the current foot world position
                leg_fk(state.q[leg], cfg.side[leg], cfg.links, foot_b)
                for i in range(3):
                    foot_b[i] += cfg.hip[leg, i]
                for i in range(3):
                    state.pins[leg, i] = state.pos[i] + (R[i, 0] * foot_b[0]
                                                         + R[i, 1] * foot_b[1]
                                                         + R[i, 2] * foot_b[2])
                state.pin_on[leg] = True
            elif not in_stance and state.prev_stance[leg]:
                # lift off: latch position in the horizontal frame
                leg_fk(state.q[leg], cfg.side[leg], cfg.links, foot_b)
                for i in range(3):
                    foot_b[i] += cfg.hip[leg, i]
                for i in range(3):
                    foot_w[i] = (R[i, 0] * foot_b[0] + R[i, 1] * foot_b[1]
                                 + R[i, 2] * foot_b[2])
                state.lift[leg, 0] = cyw * foot_w[0] + syw * foot_w[1]
                state.lift[leg, 1] = -syw * foot_w[0] + cyw * foot_w[1]
                state.lift[leg, 2] = foot_w[2]
                state.pin_on[leg] = False
            state.prev_stance[leg] = in_stance

        # swing landing estimates (horizontal frame) + MPC foot vector
        t_stance = (1.0 - swing_frac) / freq
        vh_x = cyw * state.vel[0] + syw * state.vel[1]
        vh_y = -syw * state.vel[0] + cyw * state.vel[1]

        contact_pattern(ph1, freq, swing_frac, offsets, T, cfg.dt_mpc,
                        pattern)
        # Planner foot vector: one arm per leg, averaged over the horizon
        # steps where the leg is active.  Feet stay pinned in world while the
        # base keeps moving, so a stance arm sweeps backward at the base
        # velocity, and legs touching down inside the horizon enter at the
        # landing estimate.  Feeding the stale time-zero arm instead biases
        # every late-stance solve toward pushing forward.
        for leg in range(4):
            if state.pin_on[leg]:
                r0x = state.pins[leg, 0] - state.pos[0]
                r0y = state.pins[leg, 1] - state.pos[1]
                r0z = state.pins[leg, 2] - state.pos[2]
            else:
                lx = cfg.hip[leg, 0] + vh_x * 0.5 * t_stance
                ly = cfg.hip[leg, 1] + vh_y * 0.5 * t_stance
                r0x = cyw * lx - syw * ly
                r0y = syw * lx + cyw * ly
                r0z = -cfg.stand_height
            lx = cfg.hip[leg, 0] + vh_x * 0.5 * t_stance
            ly = cfg.hip[leg, 1] + vh_y * 0.5 * t_stance
            tdx = cyw * lx - syw * ly
            tdy = syw * lx + cyw * ly
            phi = _wrap_two_pi(ph1 + offsets[leg])
            sx = 0.0
            sy = 0.0
            sz = 0.0
            cnt = 0
            for k in range(T):
                if not pattern[k, leg]:
                    continue
                tk = k * cfg.dt_mpc
                t_td = -1.0
                # thr == 0 keeps legs planted: no touchdown ever happens
                if freq > 0.0 and thr > 0.0:
                    total = phi + TWO_PI * freq * tk
                    ncyc = np.floor(total / TWO_PI)
                    t_td = (TWO_PI * ncyc + thr - phi) / (TWO_PI * freq)
                if t_td <= 0.0:
                    # stance already underway at replan time: sweep the pin
                    sx += r0x - state.vel[0] * tk
                    sy += r0y - state.vel[1] * tk
                    sz += r0z
                else:
                    sx += tdx - state.vel[0] * (tk - t_td)
                    sy += tdy - state.vel[1] * (tk - t_td)
                    sz += -cfg.stand_height
                cnt += 1
            if cnt > 0:
                inv = 1.0 / cnt
                r_feet[leg, 0] = sx * inv
                r_feet[leg, 1] = sy * inv
                r_feet[leg, 2] = sz * inv
            else:
                r_feet[leg, 0] = r0x
                r_feet[leg, 1] = r0y
                r_feet[leg, 2] = r0z
        ok, iters = mpc_solve(state.eul, state.pos, state.omg, state.vel,
                              r_feet, pattern, vbar, cfg, state, grf)
        fell_back = False
        if ok:
            for leg in range(4):
                for i in range(3):
                    state.last_grf[leg, i] = grf[leg, i]
            state.fallback[0] = 0
        else:
            state.counters[3] += 1
            state.fallback[0] += 1
            fell_back = True
            if state.fallback[0] > cfg.fallback_max:
                status = STATUS_FAILURE
            for leg in range(4):
                for i in range(3):
                    grf[leg, i] = state.last_grf[leg, i] if state.pin_on[leg] else 0.0
        if status != STATUS_RUNNING:
            break

        # swing PD torques toward the quadratic trajectory target
        for leg in range(4):
            if state.pin_on[leg]:
                for i in range(3):
                    tau_swing[leg, i] = 0.0
                continue
            ph = _wrap_two_pi(ph1 + offsets[leg])
            s_prog = ph / thr
            if s_prog > 1.0:
                s_prog = 1.0
            mid[0] = cfg.hip[leg, 0]
            mid[1] = cfg.hip[leg, 1]
            mid[2] = -cfg.stand_height + cfg.z_clearance
            land[0] = cfg.hip[leg, 0] + vh_x * 0.5 * t_stance
            land[1] = cfg.hip[leg, 1] + vh_y * 0.5 * t_stance
            land[2] = -cfg.stand_height
            swing_eval(state.lift[leg], mid, land, s_prog, target)
            # horizontal frame -> base frame: R' Rz(yaw) target
            wxx = cyw * target[0] - syw * target[1]
            wyy = syw * target[0] + cyw * target[1]
            wzz = target[2]
            for i in range(3):
                pcs[i] = (R[0, i] * wxx + R[1, i] * wyy + R[2, i] * wzz
                          - cfg.hip[leg, i])
            if clamp_reach(pcs, cfg.links, 1e-3):
                state.counters[1] += 1
            if not leg_ik(pcs, cfg.side[leg], cfg.links, qdes):
                state.counters[1] += 1
                for i in range(3):
                    qdes[i] = state.q[leg, i]
            for i in range(3):
                t_cmd = (cfg.kp[i] * (qdes[i] - state.q[leg, i])
                         - cfg.kd[i] * state.dq[leg, i])
                if t_cmd > cfg.tau_limit:
                    t_cmd = cfg.tau_limit
                    state.counters[0] += 1
                elif t_cmd < -cfg.tau_limit:
                    t_cmd = -cfg.tau_limit
                    state.counters[0] += 1
                tau_swing[leg, i] = t_cmd

        if not physics_substep(state, cfg, grf, tau_swing, dt, phys_out):
            status = STATUS_FAILURE
            break
        state.counters[0] += np.int64(phys_out[1])
        state.counters[2] += np.int64(phys_out[2])
        power = phys_out[0]
        state.energy[0] += power * dt
        state.time[0] = t_now + dt
        done = sub + 1

        row = trace[sub]
        row[TR_TIME] = state.time[0]
        row[TR_VBAR] = vbar
        row[TR_VX] = state.vel[0]
        row[TR_VY] = state.vel[1]
        row[TR_VZ] = state.vel[2]
        row[TR_PX] = state.pos[0]
        row[TR_PY] = state.pos[1]
        row[TR_PZ] = state.pos[2]
        row[TR_ROLL] = state.eul[0]
        row[TR_PITCH] = state.eul[1]
        row[TR_YAW] = state.eul[2]
        fz_tot = 0.0
        for leg in range(4):
            row[TR_PH0 + leg] = _wrap_two_pi(ph1 + offsets[leg])
            row[TR_ST0 + leg] = 1.0 if state.pin_on[leg] else 0.0
            fz_tot += grf[leg, 2]
        row[TR_POWER] = power
        row[TR_FREQ] = freq
        row[TR_SWING] = swing_frac
        row[TR_TH2] = gait[2]
        row[TR_TH3] = gait[3]
        row[TR_TH4] = gait[4]
        row[TR_FZ] = fz_tot
        row[TR_QP_ITERS] = float(iters)
        row[TR_QP_FALLBACK] = 1.0 if fell_back else 0.0

        if (state.pos[2] < cfg.min_height
                or np.abs(state.eul[0]) > cfg.max_tilt
                or np.abs(state.eul[1]) > cfg.max_tilt):
            status = STATUS_FELL
            break

    # reward at the step boundary (end-of-step sampling)
    t_end = state.time[0]
    vbar_end = _desired_speed(t_end, cfg.accel, cfg.v_max)
    v_end = state.vel[0]
    denom = vbar_end if vbar_end > cfg.v_eps else cfg.v_eps
    err = (vbar_end - v_end) / denom
    e_step = state.energy[0] - energy0
    t_span = done * dt
    mean_power = e_step / t_span if t_span > 0.0 else 0.0
    mgv = cfg.mass * cfg.gravity * denom
    reward = (cfg.reward_bonus - cfg.w_speed * err * err
              - cfg.w_energy * mean_power / mgv)
    v_abs = np.abs(v_end)
    cot_den = cfg.mass * cfg.gravity * (v_abs if v_abs > cfg.v_eps else cfg.v_eps)

    out[OUT_REWARD] = reward
    out[OUT_V] = v_end
    out[OUT_VBAR] = vbar_end
    out[OUT_MEAN_POWER] = mean_power
    out[OUT_SPEED_ERR] = np.abs(vbar_end - v_end) / denom
    out[OUT_COT] = mean_power / cot_den
    out[OUT_SUBSTEPS] = float(done)
    out[OUT_ENERGY] = e_step
    out[OUT_CLIPS] = float(state.counters[0] - clips0)
    out[OUT_CLAMPS] = float(state.counters[1] - clamps0)
    out[OUT_SLIPS] = float(state.counters[2] - slips0)
    out[OUT_QP_FAILS] = float(state.counters[3] - qpf0)
    return status
