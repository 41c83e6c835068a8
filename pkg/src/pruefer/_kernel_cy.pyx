# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled integration kernels; twin of ``_kernel_py``.

Same entry points, same algorithm, same return layout.  Keep the two in step.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt, floor, fabs, isfinite

cnp.import_array()

cdef double HALF_PI = 1.5707963267948966

cdef enum:
    ZERO = 0
    COULOMB = 1
    WVN = 2
    FEEDBACK = 3
    TABLE = 4

cdef enum:
    OK = 0
    UNDERFLOW = 1
    NONFINITE = 2
    BOUNCE = 3

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187
cdef double A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247
cdef double A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192
cdef double B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = -71.0 / 57600, E3 = 71.0 / 16695, E4 = -71.0 / 1920
cdef double E5 = 17253.0 / 339200, E6 = -22.0 / 525, E7 = 1.0 / 40

cdef double P[7][4]
P[0][:] = [1.0, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608,
           -12715105075.0 / 11282082432]
P[1][:] = [0.0, 0.0, 0.0, 0.0]
P[2][:] = [0.0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933,
           87487479700.0 / 32700410799]
P[3][:] = [0.0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304,
           -10690763975.0 / 1880347072]
P[4][:] = [0.0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408,
           701980252875.0 / 199316789632]
P[5][:] = [0.0, -282668133.0 / 205662961, 2019193451.0 / 616988883,
           -1453857185.0 / 822651844]
P[6][:] = [0.0, 40617522.0 / 29380423, -110615467.0 / 29380423,
           69997945.0 / 29380423]

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0
cdef int MAX_BOUNCES = 64


cdef struct Model:
    int variant
    double p0, p1, p2, k
    double *tab_x
    double *tab_v
    int tab_linear


cdef inline double potential(Model *mdl, double x, double sigma, Py_ssize_t cell) nogil:
    cdef double v, x0
    if mdl.variant == ZERO:
        return 0.0
    if mdl.variant == COULOMB:
        return mdl.p1 * mdl.p0 / (1.0 + x)
    if mdl.variant == WVN:
        return -mdl.p0 * sin(2.0 * mdl.p1 * x + mdl.p2) / (1.0 + x)
    if mdl.variant == FEEDBACK:
        return -sigma * mdl.p0 / (1.0 + x)
    v = mdl.tab_v[cell]
    if mdl.tab_linear:
        x0 = mdl.tab_x[cell]
        v += (mdl.tab_v[cell + 1] - v) * (x - x0) / (mdl.tab_x[cell + 1] - x0)
    return v


cdef inline void rhs(Model *mdl, double x, double phi, int odd, double sigma,
                     Py_ssize_t cell, double *f) nogil:
    cdef double s = sin(phi)
    cdef double c = cos(phi)
    cdef double s2 = 2.0 * s * c
    cdef double sq = c * c if odd else s * s
    cdef double v = potential(mdl, x, sigma, cell)
    f[0] = mdl.k - v * sq / mdl.k
    f[1] = v * sigma * s2 / (2.0 * mdl.k)
    f[2] = s2
    f[3] = s2 / (1.0 + x)


cdef inline double dense_phi(double phi0, double h, double *q, double s) nogil:
    return phi0 + h * s * (q[0] + s * (q[1] + s * (q[2] + s * q[3])))


cdef double locate(double phi0, double h, double *q, double target, double tol) nogil:
    cdef double sa = 0.0, ga = phi0 - target
    cdef double sb = 1.0, gb = dense_phi(phi0, h, q, 1.0) - target
    cdef double sc = sb, gc
    cdef int side = 0, it
    if gb == 0.0:
        return 1.0
    for it in range(200):
        sc = (sa * gb - sb * ga) / (gb - ga)
        gc = dense_phi(phi0, h, q, sc) - target
        if fabs(gc) <= tol or (sb - sa) * fabs(h) <= 1e-16 * (1.0 + fabs(h)):
            break
        if (gc > 0.0) == (gb > 0.0):
            sb = sc
            gb = gc
            if side == -1:
                ga *= 0.5
            side = -1
        else:
            sa = sc
            ga = gc
            if side == 1:
                gb *= 0.5
            side = 1
    return sc


def integrate_pruefer(int variant, params, tab_x, tab_v, int tab_linear,
                      double k, double theta0, double x_end, double rtol,
                      double atol, double hmax, double event_tol, out_x):
    """Integrate (theta, log R) from x = 0 to ``x_end``; see ``_kernel_py``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tx = np.ascontiguousarray(tab_x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tv = np.ascontiguousarray(tab_v, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ox = np.ascontiguousarray(out_x, dtype=np.float64)
    cdef Py_ssize_t n_tab = tx.shape[0]
    cdef Py_ssize_t n_out = ox.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] o_theta = np.empty(n_out)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] o_logr = np.empty(n_out)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] o_q1 = np.empty(n_out)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] o_q2 = np.empty(n_out)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] o_sig = np.empty(n_out)

    cdef list cross_level = [], cross_x = []
    cdef list pc_level = [], pc_x0 = [], pc_x1 = [], pc_q1 = [], pc_q2 = [], pc_exit = []
    cdef list sw_x = []
    cdef list sl_level = [], sl_x0 = [], sl_x1 = []

    cdef Model mdl
    mdl.variant = variant
    mdl.p0 = float(params[0])
    mdl.p1 = float(params[1])
    mdl.p2 = float(params[2])
    mdl.k = k
    mdl.tab_x = &tx[0] if n_tab > 0 else NULL
    mdl.tab_v = &tv[0] if n_tab > 0 else NULL
    mdl.tab_linear = tab_linear

    cdef bint feedback = variant == FEEDBACK
    cdef double a = mdl.p0
    cdef double tol_phi = 0.5 * event_tol

    cdef long m = <long>floor(theta0 / HALF_PI)
    cdef double phi = theta0 - m * HALF_PI
    if phi >= HALF_PI:
        m += 1
        phi -= HALF_PI
    if phi < 0.0:
        phi = 0.0
    cdef long max_level = m
    cdef double x = 0.0, logr = 0.0, q1 = 0.0, q2 = 0.0
    cdef double cum1 = 0.0, cum2 = 0.0, piece_x0 = 0.0
    cdef long n_down = 0
    cdef double x_last_down = -1.0
    cdef long n_steps = 0, n_rej = 0
    cdef int status = OK
    cdef int bounces = 0
    cdef Py_ssize_t cell = 0
    cdef Py_ssize_t io = 0
    cdef int odd, clip, event, i, j, st
    cdef double sigma, h, h_try, h_next, x_lim, x_new, x_ev, x_rel
    cdef double err, e, sc, fac, s_ev, s
    cdef double y[4]
    cdef double yn[4]
    cdef double yo[4]
    cdef double K[7][4]
    cdef double q[4][4]
    cdef double yt0

    if variant == TABLE:
        while cell + 2 < n_tab and tx[cell + 1] <= x:
            cell += 1

    cdef bint sliding = (feedback and phi == 0.0 and (m & 1)
                         and k - a / (k * (1.0 + x)) < 0.0)

    while io < n_out and ox[io] <= x:
        o_theta[io] = m * HALF_PI + phi
        o_logr[io] = logr
        o_q1[io] = cum1
        o_q2[io] = cum2
        o_sig[io] = 0.0 if sliding else (1.0 if m % 2 == 0 else -1.0)
        io += 1

    h = hmax if hmax < 1e-3 else 1e-3
    while x < x_end:
        if sliding:
            x_rel = a / (k * k) - 1.0
            if x_rel > x_end:
                x_rel = x_end
            if x_rel > x:
                while io < n_out and ox[io] <= x_rel:
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
        if variant == TABLE and tx[cell + 1] < x_lim:
            x_lim = tx[cell + 1]
        if x + h >= x_lim:
            h = x_lim - x
            clip = 1
        if h <= 16.0 * 2.2e-16 * (fabs(x) if fabs(x) > 1.0 else 1.0):
            status = UNDERFLOW
            break

        y[0] = phi
        y[1] = logr
        y[2] = q1
        y[3] = q2
        rhs(&mdl, x, phi, odd, sigma, cell, K[0])
        yt0 = phi + h * A21 * K[0][0]
        rhs(&mdl, x + C2 * h, yt0, odd, sigma, cell, K[1])
        yt0 = phi + h * (A31 * K[0][0] + A32 * K[1][0])
        rhs(&mdl, x + C3 * h, yt0, odd, sigma, cell, K[2])
        yt0 = phi + h * (A41 * K[0][0] + A42 * K[1][0] + A43 * K[2][0])
        rhs(&mdl, x + C4 * h, yt0, odd, sigma, cell, K[3])
        yt0 = phi + h * (A51 * K[0][0] + A52 * K[1][0] + A53 * K[2][0]
                         + A54 * K[3][0])
        rhs(&mdl, x + C5 * h, yt0, odd, sigma, cell, K[4])
        yt0 = phi + h * (A61 * K[0][0] + A62 * K[1][0] + A63 * K[2][0]
                         + A64 * K[3][0] + A65 * K[4][0])
        x_new = x_lim if clip else x + h
        rhs(&mdl, x_new, yt0, odd, sigma, cell, K[5])
        for i in range(4):
            yn[i] = y[i] + h * (B1 * K[0][i] + B3 * K[2][i] + B4 * K[3][i]
                                + B5 * K[4][i] + B6 * K[5][i])
        rhs(&mdl, x_new, yn[0], odd, sigma, cell, K[6])

        err = 0.0
        for i in range(4):
            e = h * (E1 * K[0][i] + E3 * K[2][i] + E4 * K[3][i] + E5 * K[4][i]
                     + E6 * K[5][i] + E7 * K[6][i])
            sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(yn[i]) else fabs(yn[i]))
            err += (e / sc) * (e / sc)
        err = sqrt(err / 4.0)
        if not (isfinite(err) and isfinite(yn[0]) and isfinite(yn[1])
                and isfinite(yn[2]) and isfinite(yn[3])):
            if h > 1e-6 * hmax:
                h *= MIN_FACTOR
                n_rej += 1
                continue
            status = NONFINITE
            break
        if err > 1.0:
            fac = SAFETY * err ** -0.2
            h *= fac if fac > MIN_FACTOR else MIN_FACTOR
            n_rej += 1
            continue
        n_steps += 1
        if err == 0.0:
            fac = MAX_FACTOR
        else:
            fac = SAFETY * err ** -0.2
            if fac > MAX_FACTOR:
                fac = MAX_FACTOR
        h_next = h * fac
        if clip and h_next < h_try:
            h_next = h_try

        for i in range(4):
            for j in range(4):
                q[i][j] = 0.0
                for st in range(7):
                    q[i][j] += K[st][i] * P[st][j]

        event = 0
        s_ev = 1.0
        if yn[0] >= HALF_PI and phi <= HALF_PI:
            event = 1
            s_ev = locate(phi, h, q[0], HALF_PI, tol_phi)
        elif yn[0] < 0.0 and phi >= 0.0:
            event = -1
            s_ev = locate(phi, h, q[0], 0.0, tol_phi)
        if event:
            if s_ev == 1.0:
                x_ev = x_new
            else:
                x_ev = x + s_ev * h
            for i in range(4):
                yn[i] = y[i] + h * s_ev * (q[i][0] + s_ev * (q[i][1] + s_ev * (
                    q[i][2] + s_ev * q[i][3])))
            x_new = x_ev

        while io < n_out and ox[io] <= x_new:
            s = (ox[io] - x) / h
            if s > s_ev:
                s = s_ev
            for i in range(4):
                yo[i] = y[i] + h * s * (q[i][0] + s * (q[i][1] + s * (
                    q[i][2] + s * q[i][3])))
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
        phi = yn[0]
        logr = yn[1]
        q1 = yn[2]
        q2 = yn[3]
        h = h_next
        if variant == TABLE:
            while cell + 2 < n_tab and tx[cell + 1] <= x:
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
            q1 = 0.0
            q2 = 0.0
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


def rk4_march(x, v_left, v_mid, v_right, double k, double u0, double up0, record):
    """Classical RK4 for (u, u') on the node grid ``x``; see ``_kernel_py``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xs = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vl = np.ascontiguousarray(v_left, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vm = np.ascontiguousarray(v_mid, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vr = np.ascontiguousarray(v_right, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] rec = np.ascontiguousarray(record, dtype=np.uint8)
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t n_rec = int(rec.sum())
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ou = np.empty(n_rec)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] oup = np.empty(n_rec)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] oe = np.empty(n_rec, dtype=np.int64)
    cdef double kk = k * k
    cdef double big = 2.0 ** 512
    cdef double tiny = 2.0 ** -512
    cdef double u = u0, p = up0, h, hh, wl, wm, wr, mag
    cdef double k1u, k1p, k2u, k2p, k3u, k3p, k4u, k4p
    cdef long e2 = 0
    cdef Py_ssize_t i, j = 0
    if rec[0]:
        ou[0] = u
        oup[0] = p
        oe[0] = e2
        j = 1
    for i in range(n - 1):
        h = xs[i + 1] - xs[i]
        hh = 0.5 * h
        wl = vl[i] - kk
        wm = vm[i] - kk
        wr = vr[i] - kk
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
        mag = fabs(u) if fabs(u) > fabs(p) else fabs(p)
        if mag > big:
            u *= tiny
            p *= tiny
            e2 += 512
        elif 0.0 < mag < tiny:
            u *= big
            p *= big
            e2 -= 512
        if rec[i + 1]:
            ou[j] = u
            oup[j] = p
            oe[j] = e2
            j += 1
    return ou, oup, oe
