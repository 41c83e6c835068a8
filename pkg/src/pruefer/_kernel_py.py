"""Pure-Python integration kernels.

This module is the reference twin of ``_kernel_cy.pyx``; both expose the same
two entry points with identical signatures and return layouts:

integrate_pruefer
    Dormand-Prince 5(4) integration of the Pruefer system in piece-local
    coordinates, with restarts at every crossing of a multiple of pi/2.
rk4_march
    Fixed-step classical RK4 for u'' = (V - k^2) u with power-of-two
    rescaling.

Any change here must be mirrored in the Cython source.
"""
import math

import numpy as np

HALF_PI = 0.5 * math.pi

ZERO, COULOMB, WVN, FEEDBACK, TABLE = range(5)

OK, UNDERFLOW, NONFINITE, BOUNCE = range(4)

# Dormand-Prince 5(4) tableau.
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176,
                           -5103 / 18656)
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (-71 / 57600, 71 / 16695, -71 / 1920,
                          17253 / 339200, -22 / 525, 1 / 40)

# Dense output: y(x + s h) = y + h * sum_j Q[:, j] s^(j+1), Q = K^T P.
P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423,
     69997945 / 29380423),
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
MAX_BOUNCES = 64


def _potential(variant, p0, p1, p2, x, sigma, cell, tab_x, tab_v, tab_linear):
    if variant == ZERO:
        return 0.0
    if variant == COULOMB:
        return p1 * p0 / (1.0 + x)
    if variant == WVN:
        return -p0 * math.sin(2.0 * p1 * x + p2) / (1.0 + x)
    if variant == FEEDBACK:
        return -sigma * p0 / (1.0 + x)
    v = tab_v[cell]
    if tab_linear:
        x0 = tab_x[cell]
        v += (tab_v[cell + 1] - v) * (x - x0) / (tab_x[cell + 1] - x0)
    return v


def _rhs(x, phi, odd, sigma, k, variant, p0, p1, p2, cell, tab_x, tab_v,
         tab_linear):
    s = math.sin(phi)
    c = math.cos(phi)
    s2 = 2.0 * s * c
    sq = c * c if odd else s * s
    v = _potential(variant, p0, p1, p2, x, sigma, cell, tab_x, tab_v,
                   tab_linear)
    return (k - v * sq / k,
            v * sigma * s2 / (2.0 * k),
            s2,
            s2 / (1.0 + x))


def _dense_phi(phi0, h, q, s):
    return phi0 + h * s * (q[0] + s * (q[1] + s * (q[2] + s * q[3])))


def _locate(phi0, h, q, target, tol):
    """Illinois root of phi(s) = target on the dense output, s in (0, 1]."""
    sa, ga = 0.0, phi0 - target
    sb, gb = 1.0, _dense_phi(phi0, h, q, 1.0) - target
    if gb == 0.0:
        return 1.0
    side = 0
    sc = sb
    for _ in range(200):
        sc = (sa * gb - sb * ga) / (gb - ga)
        gc = _dense_phi(phi0, h, q, sc) - target
        if abs(gc) <= tol or (sb - sa) * abs(h) <= 1e-16 * (1.0 + abs(h)):
            break
        if (gc > 0.0) == (gb > 0.0):
            sb, gb = sc, gc
            if side == -1:
                ga *= 0.5
            side = -1
        else:
            sa, ga = sc, gc
            if side == 1:
                gb *= 0.5
            side = 1
    return sc


def integrate_pruefer(variant, params, tab_x, tab_v, tab_linear, k, theta0,
                      x_end, rtol, atol, hmax, event_tol, out_x):
    """Integrate (theta, log R) from x = 0 to ``x_end``.

    Returns a dict of numpy arrays and scalars; see ``core.integrate`` for the
    meaning of every key.
    """
    p0, p1, p2 = float(params[0]), float(params[1]), float(params[2])
    tab_x = [float(t) for t in tab_x]
    tab_v = [float(t) for t in tab_v]
    n_tab = len(tab_x)
    out_x = np.asarray(out_x, dtype=float)
    n_out = out_x.shape[0]
    o_theta = np.empty(n_out)
    o_logr = np.empty(n_out)
    o_q1 = np.empty(n_out)
    o_q2 = np.empty(n_out)
    o_sig = np.empty(n_out)

    cross_level, cross_x = [], []
    pc_level, pc_x0, pc_x1, pc_q1, pc_q2, pc_exit = [], [], [], [], [], []
    sw_x = []
    sl_level, sl_x0, sl_x1 = [], [], []

    feedback = variant == FEEDBACK
    a = p0
    tol_phi = 0.5 * event_tol

    m = int(math.floor(theta0 / HALF_PI))
    phi = theta0 - m * HALF_PI
    if phi >= HALF_PI:
        m += 1
        phi -= HALF_PI
    if phi < 0.0:
        phi = 0.0
    max_level = m
    x = 0.0
    logr = 0.0
    q1 = q2 = 0.0
    cum1 = cum2 = 0.0
    piece_x0 = 0.0
    n_down = 0
    x_last_down = -1.0
    n_steps = n_rej = 0
    status = OK
    bounces = 0

    cell = 0
    if variant == TABLE:
        while cell + 2 < n_tab and tab_x[cell + 1] <= x:
            cell += 1

    sliding = (feedback and phi == 0.0 and (m & 1)
               and k - a / (k * (1.0 + x)) < 0.0)

    io = 0
    while io < n_out and out_x[io] <= x:
        sig = 0.0 if sliding else (1.0 if m % 2 == 0 else -1.0)
        o_theta[io] = m * HALF_PI + phi
        o_logr[io] = logr
        o_q1[io] = cum1
        o_q2[io] = cum2
        o_sig[io] = sig
        io += 1

    h = min(hmax, 1e-3)
    while x < x_end:
        if sliding:
            x_rel = a / (k * k) - 1.0
            if x_rel > x_end:
                x_rel = x_end
            if x_rel > x:
                while io < n_out and out_x[io] <= x_rel:
                    o_theta[io] = m * HALF_PI
                    o_logr[io] = logr
                    o_q1[io] = cum1
                    o_q2[io] = cum2
                    o_sig[io] = 0.0
                    io += 1
                sl_level.append(m)
                sl_x0.append(x)
                sl_x1.append(x_rel)
                x = x_rel
            sliding = False
            phi = 0.0
            piece_x0 = x
            continue

        odd = m & 1
        sigma = -1.0 if odd else 1.0
        h_try = h
        if h > hmax:
            h = hmax
        clip = 0
        x_lim = x_end
        if variant == TABLE and tab_x[cell + 1] < x_lim:
            x_lim = tab_x[cell + 1]
        if x + h >= x_lim:
            h = x_lim - x
            clip = 1
        if h <= 16.0 * 2.2e-16 * max(1.0, abs(x)):
            status = UNDERFLOW
            break

        args = (odd, sigma, k, variant, p0, p1, p2, cell, tab_x, tab_v,
                tab_linear)
        y = (phi, logr, q1, q2)
        k1 = _rhs(x, phi, *args)
        k2 = _rhs(x + C2 * h, phi + h * A21 * k1[0], *args)
        k3 = _rhs(x + C3 * h, phi + h * (A31 * k1[0] + A32 * k2[0]), *args)
        k4 = _rhs(x + C4 * h, phi + h * (A41 * k1[0] + A42 * k2[0]
                                         + A43 * k3[0]), *args)
        k5 = _rhs(x + C5 * h, phi + h * (A51 * k1[0] + A52 * k2[0]
                                         + A53 * k3[0] + A54 * k4[0]), *args)
        x_new = x_lim if clip else x + h
        k6 = _rhs(x_new, phi + h * (A61 * k1[0] + A62 * k2[0] + A63 * k3[0]
                                    + A64 * k4[0] + A65 * k5[0]), *args)
        yn = [y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                          + B5 * k5[i] + B6 * k6[i]) for i in range(4)]
        k7 = _rhs(x_new, yn[0], *args)

        err = 0.0
        for i in range(4):
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                     + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * max(abs(y[i]), abs(yn[i]))
            err += (e / sc) ** 2
        err = math.sqrt(err / 4.0)
        if not math.isfinite(err) or not all(math.isfinite(v) for v in yn):
            if h > 1e-6 * hmax:
                h *= MIN_FACTOR
                n_rej += 1
                continue
            status = NONFINITE
            break
        if err > 1.0:
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
            n_rej += 1
            continue
        n_steps += 1
        if err == 0.0:
            fac = MAX_FACTOR
        else:
            fac = min(MAX_FACTOR, SAFETY * err ** -0.2)
        h_next = h * fac
        if clip and h_next < h_try:
            h_next = h_try

        ks = (k1, k2, k3, k4, k5, k6, k7)
        q = [[sum(ks[s][i] * P[s][j] for s in range(7)) for j in range(4)]
             for i in range(4)]

        event = 0
        s_ev = 1.0
        if yn[0] >= HALF_PI and phi <= HALF_PI:
            event = 1
            s_ev = _locate(phi, h, q[0], HALF_PI, tol_phi)
        elif yn[0] < 0.0 and phi >= 0.0:
            event = -1
            s_ev = _locate(phi, h, q[0], 0.0, tol_phi)
        if event:
            if s_ev == 1.0:
                x_ev = x_new
            else:
                x_ev = x + s_ev * h
            yn = [y[i] + h * s_ev * (q[i][0] + s_ev * (q[i][1] + s_ev * (
                q[i][2] + s_ev * q[i][3]))) for i in range(4)]
            x_new = x_ev

        while io < n_out and out_x[io] <= x_new:
            s = (out_x[io] - x) / h
            if s > s_ev:
                s = s_ev
            yo = [y[i] + h * s * (q[i][0] + s * (q[i][1] + s * (
                q[i][2] + s * q[i][3]))) for i in range(4)]
            o_theta[io] = m * HALF_PI + yo[0]
            o_logr[io] = yo[1]
            o_q1[io] = cum1 + yo[2]
            o_q2[io] = cum2 + yo[3]
            o_sig[io] = sigma
            io += 1

        if x_new == x:
            bounces += 1
            if bounces > MAX_BOUNCES:
                status = BOUNCE
                break
        else:
            bounces = 0
        x = x_new
        phi, logr, q1, q2 = yn
        h = h_next
        if variant == TABLE:
            while cell + 2 < n_tab and tab_x[cell + 1] <= x:
                cell += 1

        if event:
            pc_level.append(m)
            pc_x0.append(piece_x0)
            pc_x1.append(x)
            pc_q1.append(q1)
            pc_q2.append(q2)
            pc_exit.append(event)
            cum1 += q1
            cum2 += q2
            q1 = q2 = 0.0
            piece_x0 = x
            if feedback:
                sw_x.append(x)
            if event == 1:
                m += 1
                phi = 0.0
                if m > max_level:
                    max_level = m
                    cross_level.append(m)
                    cross_x.append(x)
                if feedback and (m & 1) and k - a / (k * (1.0 + x)) < 0.0:
                    sliding = True
            else:
                n_down += 1
                x_last_down = x
                if feedback:
                    phi = 0.0
                    sliding = True
                else:
                    m -= 1
                    phi = HALF_PI

    if x > piece_x0:
        pc_level.append(m)
        pc_x0.append(piece_x0)
        pc_x1.append(x)
        pc_q1.append(q1)
        pc_q2.append(q2)
        pc_exit.append(0)

    return {
        "status": status,
        "x_stop": x,
        "n_out": io,
        "theta": o_theta,
        "logR": o_logr,
        "q1": o_q1,
        "q2": o_q2,
        "sigma": o_sig,
        "cross_level": np.asarray(cross_level, dtype=np.int64),
        "cross_x": np.asarray(cross_x, dtype=float),
        "piece_level": np.asarray(pc_level, dtype=np.int64),
        "piece_x0": np.asarray(pc_x0, dtype=float),
        "piece_x1": np.asarray(pc_x1, dtype=float),
        "piece_q1": np.asarray(pc_q1, dtype=float),
        "piece_q2": np.asarray(pc_q2, dtype=float),
        "piece_exit": np.asarray(pc_exit, dtype=np.int64),
        "switch_x": np.asarray(sw_x, dtype=float),
        "slide_level": np.asarray(sl_level, dtype=np.int64),
        "slide_x0": np.asarray(sl_x0, dtype=float),
        "slide_x1": np.asarray(sl_x1, dtype=float),
        "n_down": n_down,
        "x_last_down": x_last_down,
        "n_steps": n_steps,
        "n_rejected": n_rej,
    }


def rk4_march(x, v_left, v_mid, v_right, k, u0, up0, record):
    """Classical RK4 for (u, u') on the node grid ``x``.

    ``v_left/v_mid/v_right`` hold V at the start, midpoint and end of every
    substep (one-sided values inside the substep).  Returns ``(u, up, e2)``
    at the nodes flagged in ``record``; the true solution is
    ``(u, up) * 2**e2``.
    """
    x = np.asarray(x, dtype=float)
    record = np.asarray(record, dtype=bool)
    n_rec = int(record.sum())
    ou = np.empty(n_rec)
    oup = np.empty(n_rec)
    oe = np.empty(n_rec, dtype=np.int64)
    kk = k * k
    big = 2.0 ** 512
    tiny = 2.0 ** -512
    u, p, e2 = float(u0), float(up0), 0
    j = 0
    if record[0]:
        ou[0], oup[0], oe[0] = u, p, e2
        j = 1
    vl_, vm_, vr_ = v_left.tolist(), v_mid.tolist(), v_right.tolist()
    xs = x.tolist()
    rec = record.tolist()
    for i in range(len(xs) - 1):
        h = xs[i + 1] - xs[i]
        hh = 0.5 * h
        wl = vl_[i] - kk
        wm = vm_[i] - kk
        wr = vr_[i] - kk
        k1u = p
        k1p = wl * u
        k2u = p + hh * k1p
        k2p = wm * (u + hh * k1u)
        k3u = p + hh * k2p
        k3p = wm * (u + hh * k2u)
        k4u = p + h * k3p
        k4p = wr * (u + h * k3u)
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        mag = max(abs(u), abs(p))
        if mag > big:
            u *= tiny
            p *= tiny
            e2 += 512
        elif 0.0 < mag < tiny:
            u *= big
            p *= big
            e2 -= 512
        if rec[i + 1]:
            ou[j], oup[j], oe[j] = u, p, e2
            j += 1
    return ou, oup, oe
