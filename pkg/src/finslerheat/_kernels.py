"""Compiled pointwise and stencil kernels.

Each norm kind has its own set of pointwise functions taking the flat float64
parameter vector ``prm`` built by ``norms.NormSpec``.  The stencil loops take
those functions as arguments, so numba compiles one specialised loop per kind
instead of branching on the kind inside the innermost loop.  Nothing here
validates input; the public modules do.

Parameter layouts:

* quadratic: ``g00, g01, g11, gi00, gi01, gi11`` (``gi`` the inverse of ``g``)
* randers: quadratic layout then ``b0, b1, w0, w1, s`` with ``w = gi beta``
  and ``s = 1 - beta.w``
* lpeps: ``p, eps`` (``p`` may be ``inf``)
* table: ``K, a0, a1..aK, b1..bK`` for ``f(th) = a0 + sum a_k cos(k th) +
  b_k sin(k th)``
"""

import heapq
import math

import numpy as np
from numba import njit

QUAD = 0
RANDERS = 1
LPEPS = 2
TABLE = 3

_GOLD = 0.5 * (np.sqrt(5.0) - 1.0)
_N_SCAN = 64
_N_BISECT = 64
_TIE = 1e-12

# Triangle table, indexed by [orientation * 2 + slot].  Square corners are
# 0:(i,j) 1:(i+1,j) 2:(i,j+1) 3:(i+1,j+1).  Columns: x-difference (plus,
# minus), y-difference (plus, minus), the three vertices.  The stencil loops
# below hard-code the same table.
TRI = np.array(
    [
        [1, 0, 2, 0, 0, 1, 2],
        [3, 2, 3, 1, 2, 1, 3],
        [1, 0, 3, 1, 0, 1, 3],
        [3, 2, 2, 0, 0, 2, 3],
    ],
    dtype=np.int64,
)


# ---------------------------------------------------------------------------
# quadratic


@njit(cache=True)
def _pair_sqrt(ax, ay, vx, vy):
    """``sqrt(a.v)`` without underflow for tiny ``a`` and ``v``."""
    m = max(abs(ax), abs(ay))
    n = max(abs(vx), abs(vy))
    if m == 0.0 or n == 0.0:
        return 0.0
    q = (ax / m) * (vx / n) + (ay / m) * (vy / n)
    return np.sqrt(m) * np.sqrt(n) * np.sqrt(max(q, 0.0))


@njit(cache=True)
def F_quad(prm, x, y):
    m = max(abs(x), abs(y))
    if m == 0.0:
        return 0.0
    x /= m
    y /= m
    q = prm[0] * x * x + 2.0 * prm[1] * x * y + prm[2] * y * y
    return m * np.sqrt(max(q, 0.0))


@njit(cache=True)
def leg_quad(prm, ax, ay):
    if ax == 0.0 and ay == 0.0:
        return 0.0, 0.0, 0.0
    vx = prm[3] * ax + prm[4] * ay
    vy = prm[4] * ax + prm[5] * ay
    return vx, vy, _pair_sqrt(ax, ay, vx, vy)


@njit(cache=True)
def gdual_quad(prm, ax, ay):
    return prm[3], prm[4], prm[5]


@njit(cache=True)
def gprim_quad(prm, x, y):
    return prm[0], prm[1], prm[2]


@njit(cache=True)
def linv_quad(prm, x, y):
    return prm[0] * x + prm[1] * y, prm[1] * x + prm[2] * y


# ---------------------------------------------------------------------------
# Randers: F = sqrt(v.G v) + beta.v, with closed-form dual


@njit(cache=True)
def F_randers(prm, x, y):
    m = max(abs(x), abs(y))
    if m == 0.0:
        return 0.0
    x /= m
    y /= m
    q = prm[0] * x * x + 2.0 * prm[1] * x * y + prm[2] * y * y
    return m * (np.sqrt(max(q, 0.0)) + prm[6] * x + prm[7] * y)


@njit(cache=True)
def leg_randers(prm, ax, ay):
    # F*(a) = (R - a.w) / s with R = sqrt(s a.Gi a + (a.w)^2); L* = F* grad F*
    # 1-homogeneous: evaluate on the rescaled covector so that tiny
    # differences in far-field tails do not underflow the square root
    m = max(abs(ax), abs(ay))
    if m == 0.0:
        return 0.0, 0.0, 0.0
    ax /= m
    ay /= m
    s = prm[10]
    gax = prm[3] * ax + prm[4] * ay
    gay = prm[4] * ax + prm[5] * ay
    aw = ax * prm[8] + ay * prm[9]
    rr = np.sqrt(s * (ax * gax + ay * gay) + aw * aw)
    fs = (rr - aw) / s
    dx = ((s * gax + aw * prm[8]) / rr - prm[8]) / s
    dy = ((s * gay + aw * prm[9]) / rr - prm[9]) / s
    fs *= m
    return fs * dx, fs * dy, fs


@njit(cache=True)
def gdual_randers(prm, ax, ay):
    # 0-homogeneous
    m = max(abs(ax), abs(ay))
    ax /= m
    ay /= m
    s = prm[10]
    wx = prm[8]
    wy = prm[9]
    gax = prm[3] * ax + prm[4] * ay
    gay = prm[4] * ax + prm[5] * ay
    aw = ax * wx + ay * wy
    rr = np.sqrt(s * (ax * gax + ay * gay) + aw * aw)
    fs = (rr - aw) / s
    qx = s * gax + aw * wx
    qy = s * gay + aw * wy
    dx = (qx / rr - wx) / s
    dy = (qy / rr - wy) / s
    r3 = rr * rr * rr
    h00 = ((s * prm[3] + wx * wx) / rr - qx * qx / r3) / s
    h01 = ((s * prm[4] + wx * wy) / rr - qx * qy / r3) / s
    h11 = ((s * prm[5] + wy * wy) / rr - qy * qy / r3) / s
    return dx * dx + fs * h00, dx * dy + fs * h01, dy * dy + fs * h11


@njit(cache=True)
def gprim_randers(prm, x, y):
    m = max(abs(x), abs(y))
    x /= m
    y /= m
    gx = prm[0] * x + prm[1] * y
    gy = prm[1] * x + prm[2] * y
    a = np.sqrt(x * gx + y * gy)
    f = a + prm[6] * x + prm[7] * y
    dx = gx / a + prm[6]
    dy = gy / a + prm[7]
    h00 = (prm[0] - gx * gx / (a * a)) / a
    h01 = (prm[1] - gx * gy / (a * a)) / a
    h11 = (prm[2] - gy * gy / (a * a)) / a
    return dx * dx + f * h00, dx * dy + f * h01, dy * dy + f * h11


@njit(cache=True)
def linv_randers(prm, x, y):
    m = max(abs(x), abs(y))
    if m == 0.0:
        return 0.0, 0.0
    x /= m
    y /= m
    gx = prm[0] * x + prm[1] * y
    gy = prm[1] * x + prm[2] * y
    a = np.sqrt(x * gx + y * gy)
    f = m * (a + prm[6] * x + prm[7] * y)
    return f * (gx / a + prm[6]), f * (gy / a + prm[7])


# ---------------------------------------------------------------------------
# regularised lp: F^2 = |v|_p^2 + eps |v|_2^2


@njit(cache=True)
def _lp_core(p, x, y):
    ax = abs(x)
    ay = abs(y)
    if p == 1.0:
        return ax + ay
    if np.isinf(p):
        return max(ax, ay)
    m = max(ax, ay)
    if m == 0.0:
        return 0.0
    return m * ((ax / m) ** p + (ay / m) ** p) ** (1.0 / p)


@njit(cache=True)
def F_lp(prm, x, y):
    m = max(abs(x), abs(y))
    if m == 0.0:
        return 0.0
    x /= m
    y /= m
    n = _lp_core(prm[0], x, y)
    return m * np.sqrt(n * n + prm[1] * (x * x + y * y))


@njit(cache=True)
def gprim_lp(prm, x, y):
    p = prm[0]
    eps = prm[1]
    sx = 1.0 if x >= 0.0 else -1.0
    sy = 1.0 if y >= 0.0 else -1.0
    if p == 1.0:
        return 1.0 + eps, sx * sy, 1.0 + eps
    if np.isinf(p):
        if abs(x) >= abs(y):
            return 1.0 + eps, 0.0, eps
        return eps, 0.0, 1.0 + eps
    # Hess(|v|_p^2 / 2) = (2 - p) w w^T + (p - 1) diag(q^(p-2)),
    # q = |v_i| / |v|_p, w_i = q_i^(p-1) sign(v_i)
    n = _lp_core(p, x, y)
    qx = abs(x) / n
    qy = abs(y) / n
    wx = qx ** (p - 1.0) * sx
    wy = qy ** (p - 1.0) * sy
    return (
        (2.0 - p) * wx * wx + (p - 1.0) * qx ** (p - 2.0) + eps,
        (2.0 - p) * wx * wy,
        (2.0 - p) * wy * wy + (p - 1.0) * qy ** (p - 2.0) + eps,
    )


@njit(cache=True)
def linv_lp(prm, x, y):
    if x == 0.0 and y == 0.0:
        return 0.0, 0.0
    p = prm[0]
    eps = prm[1]
    sx = 1.0 if x >= 0.0 else -1.0
    sy = 1.0 if y >= 0.0 else -1.0
    n = _lp_core(p, x, y)
    if p == 1.0:
        # on an axis the l1 norm has a kink; take the symmetric subgradient
        cx = n * sx if x != 0.0 else 0.0
        cy = n * sy if y != 0.0 else 0.0
    elif np.isinf(p):
        cx = 0.0
        cy = 0.0
        if abs(x) > abs(y):
            cx = n * sx
        elif abs(y) > abs(x):
            cy = n * sy
        else:
            cx = 0.5 * n * sx
            cy = 0.5 * n * sy
    else:
        cx = n * (abs(x) / n) ** (p - 1.0) * sx
        cy = n * (abs(y) / n) ** (p - 1.0) * sy
    return cx + eps * x, cy + eps * y


@njit(cache=True)
def _lp_objective(p, eps, ax, ay, vx, vy):
    n = _lp_core(p, vx, vy)
    return ax * vx + ay * vy - 0.5 * (n * n + eps * (vx * vx + vy * vy))


@njit(cache=True)
def _lp_special(p, eps, ax, ay):
    """Exact maximiser of a(v) - F(v)^2/2 for p in {1, inf}.

    F^2 is quadratic on finitely many pieces; every piece has an explicit
    stationary point, and the best candidate is the global maximiser because
    the objective is concave.  Returns (vx, vy, case, sx, sy) where case 1 is
    an open piece with sign pattern (sx, sy) and cases 2, 3 are the pieces
    aligned with the x and y axes.
    """
    bx = 0.0
    by = 0.0
    bj = 0.0
    bcase = 0
    bsx = 1.0
    bsy = 1.0
    for k in range(4):
        sx = 1.0 if (k & 1) == 0 else -1.0
        sy = 1.0 if (k & 2) == 0 else -1.0
        if p == 1.0:
            nn = (sx * ax + sy * ay) / (2.0 + eps)
            vx = (ax - nn * sx) / eps
            vy = (ay - nn * sy) / eps
        else:
            r = (sx * ax + sy * ay) / (1.0 + 2.0 * eps)
            if r <= 0.0:
                continue
            vx = r * sx
            vy = r * sy
        j = _lp_objective(p, eps, ax, ay, vx, vy)
        if j > bj:
            bx, by, bj, bcase, bsx, bsy = vx, vy, j, 1, sx, sy
    if p == 1.0:
        c2x, c2y = ax / (1.0 + eps), 0.0
        c3x, c3y = 0.0, ay / (1.0 + eps)
    else:
        c2x, c2y = ax / (1.0 + eps), ay / eps
        c3x, c3y = ax / eps, ay / (1.0 + eps)
    j = _lp_objective(p, eps, ax, ay, c2x, c2y)
    if j > bj:
        bx, by, bj, bcase = c2x, c2y, j, 2
    j = _lp_objective(p, eps, ax, ay, c3x, c3y)
    if j > bj:
        bx, by, bj, bcase = c3x, c3y, j, 3
    return bx, by, bcase, bsx, bsy


@njit(cache=True)
def leg_lp(prm, ax, ay):
    if ax == 0.0 and ay == 0.0:
        return 0.0, 0.0, 0.0
    p = prm[0]
    eps = prm[1]
    if p == 2.0:
        vx = ax / (1.0 + eps)
        vy = ay / (1.0 + eps)
        return vx, vy, _pair_sqrt(ax, ay, vx, vy)
    if p == 1.0 or np.isinf(p):
        # 1-homogeneous: solve on the rescaled covector to avoid underflow
        m = max(abs(ax), abs(ay))
        vx, vy, case, sx, sy = _lp_special(p, eps, ax / m, ay / m)
        return m * vx, m * vy, m * _pair_sqrt(ax / m, ay / m, vx, vy)
    return _angular_max(LPEPS, prm, ax, ay)


@njit(cache=True)
def gdual_lp(prm, ax, ay):
    p = prm[0]
    eps = prm[1]
    if p == 2.0:
        return 1.0 / (1.0 + eps), 0.0, 1.0 / (1.0 + eps)
    if p == 1.0 or np.isinf(p):
        m = max(abs(ax), abs(ay))
        vx, vy, case, sx, sy = _lp_special(p, eps, ax / m, ay / m)
        if case == 1:
            if p == 1.0:
                k = 1.0 / (2.0 + eps)
                return (1.0 - k) / eps, -k * sx * sy / eps, (1.0 - k) / eps
            k = 1.0 / (1.0 + 2.0 * eps)
            return k, k * sx * sy, k
        if p == 1.0:
            if case == 2:
                return 1.0 / (1.0 + eps), 0.0, 0.0
            return 0.0, 0.0, 1.0 / (1.0 + eps)
        if case == 2:
            return 1.0 / (1.0 + eps), 0.0, 1.0 / eps
        return 1.0 / eps, 0.0, 1.0 / (1.0 + eps)
    vx, vy, fs = _angular_max(LPEPS, prm, ax, ay)
    return _inverse_sym(gprim_lp(prm, vx, vy))


# ---------------------------------------------------------------------------
# tabulated norm: F(r e_th) = r f(th)


@njit(cache=True)
def _table_f012_cs(prm, c1, s1):
    # cos(k th), sin(k th) by the angle-addition recurrence
    k_max = int(prm[0])
    f = prm[1]
    f1 = 0.0
    f2 = 0.0
    c = 1.0
    s = 0.0
    for k in range(1, k_max + 1):
        c, s = c * c1 - s * s1, s * c1 + c * s1
        a = prm[1 + k]
        b = prm[1 + k_max + k]
        f += a * c + b * s
        f1 += k * (b * c - a * s)
        f2 -= k * k * (a * c + b * s)
    return f, f1, f2


@njit(cache=True)
def F_table(prm, x, y):
    r = np.hypot(x, y)
    if r == 0.0:
        return 0.0
    c1 = x / r
    s1 = y / r
    k_max = int(prm[0])
    f = prm[1]
    c = 1.0
    s = 0.0
    for k in range(1, k_max + 1):
        c, s = c * c1 - s * s1, s * c1 + c * s1
        f += prm[1 + k] * c + prm[1 + k_max + k] * s
    return r * f


@njit(cache=True)
def gprim_table(prm, x, y):
    # in the polar frame (e_r, e_th): [[f^2, f f'], [f f', f^2 + f'^2 + f f'']]
    r = np.hypot(x, y)
    c = x / r
    s = y / r
    f, f1, f2 = _table_f012_cs(prm, c, s)
    prr = f * f
    prt = f * f1
    ptt = f * f + f1 * f1 + f * f2
    g00 = c * c * prr - 2.0 * c * s * prt + s * s * ptt
    g01 = c * s * prr + (c * c - s * s) * prt - c * s * ptt
    g11 = s * s * prr + 2.0 * c * s * prt + c * c * ptt
    return g00, g01, g11


@njit(cache=True)
def linv_table(prm, x, y):
    if x == 0.0 and y == 0.0:
        return 0.0, 0.0
    r = np.hypot(x, y)
    c = x / r
    s = y / r
    f, f1, f2 = _table_f012_cs(prm, c, s)
    gr = r * f * f
    gt = r * f * f1
    return c * gr - s * gt, s * gr + c * gt


@njit(cache=True)
def leg_table(prm, ax, ay):
    if ax == 0.0 and ay == 0.0:
        return 0.0, 0.0, 0.0
    return _angular_max(TABLE, prm, ax, ay)


@njit(cache=True)
def gdual_table(prm, ax, ay):
    vx, vy, fs = _angular_max(TABLE, prm, ax, ay)
    return _inverse_sym(gprim_table(prm, vx, vy))


# ---------------------------------------------------------------------------
# generic dual by maximising alpha(e) / F(e) over unit directions, used for
# the smooth kinds without a closed form (lp with 1 < p < inf, p != 2; tables)


@njit(cache=True)
def _inverse_sym(g):
    g00, g01, g11 = g
    det = g00 * g11 - g01 * g01
    return g11 / det, -g01 / det, g00 / det


@njit(cache=True)
def _F_smooth(kind, prm, x, y):
    if kind == LPEPS:
        return F_lp(prm, x, y)
    return F_table(prm, x, y)


@njit(cache=True)
def _linv_smooth(kind, prm, x, y):
    if kind == LPEPS:
        return linv_lp(prm, x, y)
    return linv_table(prm, x, y)


@njit(cache=True)
def _ratio_slope(kind, prm, ax, ay, th):
    # d/dth of alpha(e_th) / F(e_th), up to a positive factor
    c = np.cos(th)
    s = np.sin(th)
    f = _F_smooth(kind, prm, c, s)
    gx, gy = _linv_smooth(kind, prm, c, s)
    df = (-s * gx + c * gy) / f
    return (-ax * s + ay * c) * f - (ax * c + ay * s) * df


@njit(cache=True)
def _angular_max(kind, prm, ax, ay):
    best = -np.inf
    jb = 0
    for j in range(_N_SCAN):
        th = 2.0 * np.pi * j / _N_SCAN
        c = np.cos(th)
        s = np.sin(th)
        r = (ax * c + ay * s) / _F_smooth(kind, prm, c, s)
        if r > best:
            best = r
            jb = j
    # the ratio is unimodal around its maximum, so its slope changes sign
    # once inside the bracket; bisect on that sign
    width = 2.0 * np.pi / _N_SCAN
    lo = 2.0 * np.pi * jb / _N_SCAN - width
    hi = lo + 2.0 * width
    for _ in range(_N_BISECT):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _ratio_slope(kind, prm, ax, ay, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    th = 0.5 * (lo + hi)
    c = np.cos(th)
    s = np.sin(th)
    f = _F_smooth(kind, prm, c, s)
    ux = c / f
    uy = s / f
    fs = ax * ux + ay * uy
    return fs * ux, fs * uy, fs


# ---------------------------------------------------------------------------
# array wrappers


@njit(cache=True)
def map_F(Ffn, prm, x, y, out):
    for i in range(x.size):
        out[i] = Ffn(prm, x[i], y[i])


@njit(cache=True)
def map_legendre(leg, prm, ax, ay, vx, vy, fs):
    for i in range(ax.size):
        vx[i], vy[i], fs[i] = leg(prm, ax[i], ay[i])


@njit(cache=True)
def map_pair(fn, prm, x, y, ox, oy):
    for i in range(x.size):
        ox[i], oy[i] = fn(prm, x[i], y[i])


@njit(cache=True)
def map_sym(fn, prm, x, y, out):
    for i in range(x.size):
        out[i, 0], out[i, 1], out[i, 2] = fn(prm, x[i], y[i])


# ---------------------------------------------------------------------------
# stencil kernels on the adaptive triangulation
#
# Square (i, j) has corners u0 = u[i, j], u1 = u[i+1, j], u2 = u[i, j+1],
# u3 = u[i+1, j+1].  Orientation 0 uses triangles a = {0, 1, 2} with
# du = (dx0, dy0) and b = {1, 2, 3} with du = (dx1, dy1); orientation 1 uses
# c = {0, 1, 3} with (dx0, dy1) and d = {0, 2, 3} with (dx1, dy0).


@njit(cache=True)
def nonlinear_operator(leg, u, prm, hx, hy, periodic, rho, out, flip, fixed):
    """Write grad E_h(u) (with respect to node values) into ``out`` and
    return E_h(u); ``flip`` receives the energy-minimising orientation, or
    the orientation ``fixed`` (0 or 1) everywhere when that is non-negative."""
    nx, ny = u.shape
    sx = nx if periodic else nx - 1
    sy = ny if periodic else ny - 1
    area = hx * hy / 6.0
    out[:, :] = 0.0
    energy = 0.0
    for i in range(sx):
        i1 = i + 1
        if i1 == nx:
            i1 = 0
        for j in range(sy):
            j1 = j + 1
            if j1 == ny:
                j1 = 0
            u0 = u[i, j]
            u1 = u[i1, j]
            u2 = u[i, j1]
            u3 = u[i1, j1]
            r0 = rho[i, j]
            r1 = rho[i1, j]
            r2 = rho[i, j1]
            r3 = rho[i1, j1]
            dx0 = (u1 - u0) / hx
            dx1 = (u3 - u2) / hx
            dy0 = (u2 - u0) / hy
            dy1 = (u3 - u1) / hy
            vax, vay, fa = leg(prm, dx0, dy0)
            vbx, vby, fb = leg(prm, dx1, dy1)
            vcx, vcy, fc = leg(prm, dx0, dy1)
            vdx, vdy, fd = leg(prm, dx1, dy0)
            wa = area * (r0 + r1 + r2)
            wb = area * (r1 + r2 + r3)
            wc = area * (r0 + r1 + r3)
            wd = area * (r0 + r2 + r3)
            e0 = wa * fa * fa + wb * fb * fb
            e1 = wc * fc * fc + wd * fd * fd
            if fixed == 1 or (fixed < 0 and e1 < e0):
                flip[i, j] = True
                energy += 0.5 * e1
                f = wc * vcx / hx
                out[i1, j] += f
                out[i, j] -= f
                f = wc * vcy / hy
                out[i1, j1] += f
                out[i1, j] -= f
                f = wd * vdx / hx
                out[i1, j1] += f
                out[i, j1] -= f
                f = wd * vdy / hy
                out[i, j1] += f
                out[i, j] -= f
            else:
                flip[i, j] = False
                energy += 0.5 * e0
                f = wa * vax / hx
                out[i1, j] += f
                out[i, j] -= f
                f = wa * vay / hy
                out[i, j1] += f
                out[i, j] -= f
                f = wb * vbx / hx
                out[i1, j1] += f
                out[i, j1] -= f
                f = wb * vby / hy
                out[i1, j1] += f
                out[i1, j] -= f
    return energy


@njit(cache=True)
def freeze_tensors(leg, gdual, u, prm, hx, hy, periodic, rho, fbx, fby, flip, gten, fixed):
    """Orientation and dual metric of the two active triangles per square,
    frozen at du (at the fallback covector where du = 0).  A non-negative
    ``fixed`` imposes that orientation everywhere."""
    nx, ny = u.shape
    sx, sy = flip.shape
    area = hx * hy / 6.0
    for i in range(sx):
        i1 = i + 1
        if i1 == nx:
            i1 = 0
        for j in range(sy):
            j1 = j + 1
            if j1 == ny:
                j1 = 0
            u0 = u[i, j]
            u1 = u[i1, j]
            u2 = u[i, j1]
            u3 = u[i1, j1]
            r0 = rho[i, j]
            r1 = rho[i1, j]
            r2 = rho[i, j1]
            r3 = rho[i1, j1]
            dx0 = (u1 - u0) / hx
            dx1 = (u3 - u2) / hx
            dy0 = (u2 - u0) / hy
            dy1 = (u3 - u1) / hy
            fa = leg(prm, dx0, dy0)[2]
            fb = leg(prm, dx1, dy1)[2]
            fc = leg(prm, dx0, dy1)[2]
            fd = leg(prm, dx1, dy0)[2]
            e0 = area * ((r0 + r1 + r2) * fa * fa + (r1 + r2 + r3) * fb * fb)
            e1 = area * ((r0 + r1 + r3) * fc * fc + (r0 + r2 + r3) * fd * fd)
            if fixed >= 0:
                o = fixed
            elif abs(e0 - e1) <= _TIE * (e0 + e1):
                # u is affine or flat on this square and its energy does not
                # pick a diagonal; take the one that is monotone for the
                # frozen tensor
                ax = dx0
                ay = dy0
                if ax == 0.0 and ay == 0.0:
                    ax = fbx
                    ay = fby
                o = 1 if gdual(prm, ax, ay)[1] > 0.0 else 0
            else:
                o = 1 if e1 < e0 else 0
            flip[i, j] = o == 1
            if o == 0:
                ax0, ay0, ax1, ay1 = dx0, dy0, dx1, dy1
            else:
                ax0, ay0, ax1, ay1 = dx0, dy1, dx1, dy0
            if ax0 == 0.0 and ay0 == 0.0:
                ax0 = fbx
                ay0 = fby
            if ax1 == 0.0 and ay1 == 0.0:
                ax1 = fbx
                ay1 = fby
            gten[i, j, 0, 0], gten[i, j, 0, 1], gten[i, j, 0, 2] = gdual(prm, ax0, ay0)
            gten[i, j, 1, 0], gten[i, j, 1, 1], gten[i, j, 1, 2] = gdual(prm, ax1, ay1)


@njit(cache=True)
def linear_operator(h, gten, flip, hx, hy, periodic, rho, out):
    """Write the gradient of the frozen quadratic form into ``out`` and return
    the form's value at ``h``."""
    nx, ny = h.shape
    sx, sy = flip.shape
    area = hx * hy / 6.0
    out[:, :] = 0.0
    energy = 0.0
    for i in range(sx):
        i1 = i + 1
        if i1 == nx:
            i1 = 0
        for j in range(sy):
            j1 = j + 1
            if j1 == ny:
                j1 = 0
            u0 = h[i, j]
            u1 = h[i1, j]
            u2 = h[i, j1]
            u3 = h[i1, j1]
            r0 = rho[i, j]
            r1 = rho[i1, j]
            r2 = rho[i, j1]
            r3 = rho[i1, j1]
            dx0 = (u1 - u0) / hx
            dx1 = (u3 - u2) / hx
            dy0 = (u2 - u0) / hy
            dy1 = (u3 - u1) / hy
            g00 = gten[i, j, 0, 0]
            g01 = gten[i, j, 0, 1]
            g11 = gten[i, j, 0, 2]
            k00 = gten[i, j, 1, 0]
            k01 = gten[i, j, 1, 1]
            k11 = gten[i, j, 1, 2]
            if flip[i, j]:
                wc = area * (r0 + r1 + r3)
                wd = area * (r0 + r2 + r3)
                vx = g00 * dx0 + g01 * dy1
                vy = g01 * dx0 + g11 * dy1
                energy += 0.5 * wc * (dx0 * vx + dy1 * vy)
                f = wc * vx / hx
                out[i1, j] += f
                out[i, j] -= f
                f = wc * vy / hy
                out[i1, j1] += f
                out[i1, j] -= f
                vx = k00 * dx1 + k01 * dy0
                vy = k01 * dx1 + k11 * dy0
                energy += 0.5 * wd * (dx1 * vx + dy0 * vy)
                f = wd * vx / hx
                out[i1, j1] += f
                out[i, j1] -= f
                f = wd * vy / hy
                out[i, j1] += f
                out[i, j] -= f
            else:
                wa = area * (r0 + r1 + r2)
                wb = area * (r1 + r2 + r3)
                vx = g00 * dx0 + g01 * dy0
                vy = g01 * dx0 + g11 * dy0
                energy += 0.5 * wa * (dx0 * vx + dy0 * vy)
                f = wa * vx / hx
                out[i1, j] += f
                out[i, j] -= f
                f = wa * vy / hy
                out[i, j1] += f
                out[i, j] -= f
                vx = k00 * dx1 + k01 * dy1
                vy = k01 * dx1 + k11 * dy1
                energy += 0.5 * wb * (dx1 * vx + dy1 * vy)
                f = wb * vx / hx
                out[i1, j1] += f
                out[i, j1] -= f
                f = wb * vy / hy
                out[i1, j1] += f
                out[i1, j] -= f
    return energy


# ---------------------------------------------------------------------------
# distances

_NB8 = np.array(
    [[1, 0], [1, 1], [0, 1], [-1, 1], [-1, 0], [-1, -1], [0, -1], [1, -1]], dtype=np.int64
)
def _primitive_offsets(radius):
    out = []
    for a in range(-radius, radius + 1):
        for b in range(-radius, radius + 1):
            if (a, b) != (0, 0) and math.gcd(a, b) == 1:
                out.append((a, b))
    out.sort(key=lambda v: math.atan2(v[1], v[0]) % (2 * math.pi))
    return np.array(out, dtype=np.int64)


# primitive lattice steps with both components at most 3 in size: 32
# directions, the largest angular gap (between (1, 0) and (3, 1)) is 18.4 deg
NB32 = _primitive_offsets(3)


@njit(cache=True)
def _wrap(i, n, periodic):
    if periodic:
        if i < 0:
            return i + n
        if i >= n:
            return i - n
        return i
    if i < 0 or i >= n:
        return -1
    return i


@njit(cache=True)
def _simplex_min(Ffn, prm, d1, d2, e1x, e1y, e2x, e2y):
    # min over lam in [0, 1] of (1 - lam) d1 + lam d2 + F((1 - lam) e1 + lam e2),
    # a convex function of lam
    best = min(d1 + Ffn(prm, e1x, e1y), d2 + Ffn(prm, e2x, e2y))
    lo = 0.0
    hi = 1.0
    l1 = hi - _GOLD
    l2 = _GOLD
    v1 = (1 - l1) * d1 + l1 * d2 + Ffn(prm, (1 - l1) * e1x + l1 * e2x, (1 - l1) * e1y + l1 * e2y)
    v2 = (1 - l2) * d1 + l2 * d2 + Ffn(prm, (1 - l2) * e1x + l2 * e2x, (1 - l2) * e1y + l2 * e2y)
    for _ in range(48):
        if v1 < v2:
            hi = l2
            l2 = l1
            v2 = v1
            l1 = hi - _GOLD * (hi - lo)
            v1 = (1 - l1) * d1 + l1 * d2 + Ffn(prm, (1 - l1) * e1x + l1 * e2x, (1 - l1) * e1y + l1 * e2y)
        else:
            lo = l1
            l1 = l2
            v1 = v2
            l2 = lo + _GOLD * (hi - lo)
            v2 = (1 - l2) * d1 + l2 * d2 + Ffn(prm, (1 - l2) * e1x + l2 * e2x, (1 - l2) * e1y + l2 * e2y)
    return min(best, v1, v2)


@njit(cache=True)
def _local_update(Ffn, d, i, j, prm, hx, hy, periodic):
    nx, ny = d.shape
    cur = d[i, j]
    for k in range(8):
        k2 = (k + 1) % 8
        a0 = _wrap(i + _NB8[k, 0], nx, periodic)
        a1 = _wrap(j + _NB8[k, 1], ny, periodic)
        b0 = _wrap(i + _NB8[k2, 0], nx, periodic)
        b1 = _wrap(j + _NB8[k2, 1], ny, periodic)
        da = np.inf if (a0 < 0 or a1 < 0) else d[a0, a1]
        db = np.inf if (b0 < 0 or b1 < 0) else d[b0, b1]
        if min(da, db) >= cur:
            continue
        e1x = _NB8[k, 0] * hx
        e1y = _NB8[k, 1] * hy
        e2x = _NB8[k2, 0] * hx
        e2y = _NB8[k2, 1] * hy
        if np.isinf(db):
            v = da + Ffn(prm, e1x, e1y)
        elif np.isinf(da):
            v = db + Ffn(prm, e2x, e2y)
        else:
            v = _simplex_min(Ffn, prm, da, db, e1x, e1y, e2x, e2y)
        if v < cur:
            cur = v
    return cur


@njit(cache=True)
def fast_sweep(Ffn, source, prm, hx, hy, periodic, max_sweeps, tol):
    """Gauss-Seidel Hopf-Lax sweeping for d_B(x) = inf_{y in B} d(x, y).

    Returns (values, sweeps, max change in the last sweep)."""
    nx, ny = source.shape
    d = np.full((nx, ny), np.inf)
    for i in range(nx):
        for j in range(ny):
            if source[i, j]:
                d[i, j] = 0.0
    change = np.inf
    sweeps = 0
    while sweeps < max_sweeps:
        order = sweeps % 4
        change = 0.0
        for ii in range(nx):
            i = ii if (order & 1) == 0 else nx - 1 - ii
            for jj in range(ny):
                j = jj if (order & 2) == 0 else ny - 1 - jj
                if source[i, j]:
                    continue
                new = _local_update(Ffn, d, i, j, prm, hx, hy, periodic)
                if new < d[i, j]:
                    if np.isinf(d[i, j]):
                        change = np.inf
                    elif d[i, j] - new > change:
                        change = d[i, j] - new
                    d[i, j] = new
        sweeps += 1
        if sweeps >= 4 and change <= tol:
            break
    return d, sweeps, change


@njit(cache=True)
def dijkstra_graph(cost, offsets, source, periodic):
    """Shortest paths into ``source`` on the lattice graph whose edges from
    x to x + offsets[k] cost ``cost[k]``."""
    nx, ny = source.shape
    nk = offsets.shape[0]
    d = np.full((nx, ny), np.inf)
    heap = [(0.0, np.int64(0))]
    heap.pop()
    for i in range(nx):
        for j in range(ny):
            if source[i, j]:
                d[i, j] = 0.0
                heap.append((0.0, np.int64(i * ny + j)))
    heapq.heapify(heap)
    done = np.zeros((nx, ny), dtype=np.bool_)
    while len(heap) > 0:
        dist, key = heapq.heappop(heap)
        i = key // ny
        j = key % ny
        if done[i, j]:
            continue
        done[i, j] = True
        for k in range(nk):
            # predecessor x = y - e_k reaches y along e_k
            xi = _wrap(i - offsets[k, 0], nx, periodic)
            xj = _wrap(j - offsets[k, 1], ny, periodic)
            if xi < 0 or xj < 0 or done[xi, xj]:
                continue
            nd = dist + cost[k]
            if nd < d[xi, xj]:
                d[xi, xj] = nd
                heapq.heappush(heap, (nd, np.int64(xi * ny + xj)))
    return d
