"""Compiled kernels for the geodesic flow of g = |dX|^2 + f(z) dz^2 on S^2.

A surface-of-revolution metric ds^2 = (1 + h(cos r))^2 dr^2 + sin^2 r dphi^2
pulled back to the unit sphere X = (sin r cos phi, sin r sin phi, cos r)
is the round metric plus f(z) dz^2 with f(z) = h(z)(2 + h(z)) / (1 - z^2),
a polynomial whenever h vanishes at z = ±1. The constrained equations of
motion are regular everywhere, poles included.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _poly(c, z):
    acc = 0.0
    for k in range(len(c) - 1, -1, -1):
        acc = acc * z + c[k]
    return acc


@njit(cache=True, nogil=True)
def _accel(x0, x1, x2, v0, v1, v2, fc, fpc):
    f = _poly(fc, x2)
    fp = _poly(fpc, x2)
    one_f = 1.0 + f
    wz = -0.5 * fp * v2 * v2 / one_f
    u2 = x2 - f * x2 / one_f
    xu = x0 * x0 + x1 * x1 + x2 * u2
    lam = (-(v0 * v0 + v1 * v1 + v2 * v2) - x2 * wz) / xu
    return lam * x0, lam * x1, wz + lam * u2


@njit(cache=True, nogil=True)
def _speed2(x2, v0, v1, v2, fc):
    return v0 * v0 + v1 * v1 + v2 * v2 + _poly(fc, x2) * v2 * v2


@njit(cache=True, nogil=True)
def _step(X, V, h, fc, fpc):
    x0, x1, x2 = X[0], X[1], X[2]
    v0, v1, v2 = V[0], V[1], V[2]
    a0, a1, a2 = _accel(x0, x1, x2, v0, v1, v2, fc, fpc)
    k1x0, k1x1, k1x2, k1v0, k1v1, k1v2 = v0, v1, v2, a0, a1, a2
    hh = 0.5 * h
    a0, a1, a2 = _accel(x0 + hh * k1x0, x1 + hh * k1x1, x2 + hh * k1x2,
                        v0 + hh * k1v0, v1 + hh * k1v1, v2 + hh * k1v2, fc, fpc)
    k2x0, k2x1, k2x2 = v0 + hh * k1v0, v1 + hh * k1v1, v2 + hh * k1v2
    k2v0, k2v1, k2v2 = a0, a1, a2
    a0, a1, a2 = _accel(x0 + hh * k2x0, x1 + hh * k2x1, x2 + hh * k2x2,
                        v0 + hh * k2v0, v1 + hh * k2v1, v2 + hh * k2v2, fc, fpc)
    k3x0, k3x1, k3x2 = v0 + hh * k2v0, v1 + hh * k2v1, v2 + hh * k2v2
    k3v0, k3v1, k3v2 = a0, a1, a2
    a0, a1, a2 = _accel(x0 + h * k3x0, x1 + h * k3x1, x2 + h * k3x2,
                        v0 + h * k3v0, v1 + h * k3v1, v2 + h * k3v2, fc, fpc)
    k4x0, k4x1, k4x2 = v0 + h * k3v0, v1 + h * k3v1, v2 + h * k3v2
    k4v0, k4v1, k4v2 = a0, a1, a2
    s = h / 6.0
    X[0] = x0 + s * (k1x0 + 2 * k2x0 + 2 * k3x0 + k4x0)
    X[1] = x1 + s * (k1x1 + 2 * k2x1 + 2 * k3x1 + k4x1)
    X[2] = x2 + s * (k1x2 + 2 * k2x2 + 2 * k3x2 + k4x2)
    V[0] = v0 + s * (k1v0 + 2 * k2v0 + 2 * k3v0 + k4v0)
    V[1] = v1 + s * (k1v1 + 2 * k2v1 + 2 * k3v1 + k4v1)
    V[2] = v2 + s * (k1v2 + 2 * k2v2 + 2 * k3v2 + k4v2)


@njit(cache=True, nogil=True)
def _renormalize(X, V, fc):
    """Project back to the sphere and to unit g-speed; returns the speed drift."""
    n = np.sqrt(X[0] * X[0] + X[1] * X[1] + X[2] * X[2])
    X[0] /= n
    X[1] /= n
    X[2] /= n
    d = X[0] * V[0] + X[1] * V[1] + X[2] * V[2]
    V[0] -= d * X[0]
    V[1] -= d * X[1]
    V[2] -= d * X[2]
    sp = np.sqrt(_speed2(X[2], V[0], V[1], V[2], fc))
    V[0] /= sp
    V[1] /= sp
    V[2] /= sp
    return abs(sp - 1.0)


@njit(cache=True, nogil=True)
def integrate(x0, v0, h, n, fc, fpc, X_out, V_out):
    """n RK4 steps of size h, writing all n + 1 states; returns (speed, clairaut) drift."""
    X = x0.copy()
    V = v0.copy()
    c0 = X[0] * V[1] - X[1] * V[0]
    X_out[0] = X
    V_out[0] = V
    speed = 0.0
    clair = 0.0
    for k in range(1, n + 1):
        _step(X, V, h, fc, fpc)
        ds = _renormalize(X, V, fc)
        if ds > speed:
            speed = ds
        dc = abs(X[0] * V[1] - X[1] * V[0] - c0)
        if dc > clair:
            clair = dc
        X_out[k] = X
        V_out[k] = V
    return speed, clair


@njit(cache=True, nogil=True)
def _hermite(Xa, Va, Xb, Vb, h, tau, P, D):
    t2 = tau * tau
    t3 = t2 * tau
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + tau
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    d00 = (6 * t2 - 6 * tau) / h
    d10 = 3 * t2 - 4 * tau + 1
    d01 = (-6 * t2 + 6 * tau) / h
    d11 = 3 * t2 - 2 * tau
    for i in range(3):
        P[i] = h00 * Xa[i] + h10 * h * Va[i] + h01 * Xb[i] + h11 * h * Vb[i]
        D[i] = d00 * Xa[i] + d10 * Va[i] + d01 * Xb[i] + d11 * Vb[i]


@njit(cache=True, nogil=True)
def _along(P, D, y):
    return (P[0] - y[0]) * D[0] + (P[1] - y[1]) * D[1] + (P[2] - y[2]) * D[2]


@njit(cache=True, nogil=True)
def _refine(Xa, Va, Xb, Vb, h, y, out):
    """Closest approach to y inside one step: out = (tau, signed miss, distance)."""
    P = np.empty(3)
    D = np.empty(3)
    _hermite(Xa, Va, Xb, Vb, h, 0.0, P, D)
    fa = _along(P, D, y)
    _hermite(Xa, Va, Xb, Vb, h, 1.0, P, D)
    fb = _along(P, D, y)
    lo, hi = 0.0, 1.0
    tau = 0.5
    if fa != fb:
        tau = min(max(fa / (fa - fb), 0.0), 1.0)
    for _ in range(60):
        _hermite(Xa, Va, Xb, Vb, h, tau, P, D)
        f = _along(P, D, y)
        if f < 0:
            lo = tau
        else:
            hi = tau
        # secant on the bracket, falling back to bisection
        _hermite(Xa, Va, Xb, Vb, h, lo, P, D)
        flo = _along(P, D, y)
        _hermite(Xa, Va, Xb, Vb, h, hi, P, D)
        fhi = _along(P, D, y)
        new = 0.5 * (lo + hi)
        if fhi != flo:
            cand = lo - flo * (hi - lo) / (fhi - flo)
            if lo < cand < hi:
                new = cand
        if abs(new - tau) < 1e-15 or hi - lo < 1e-15:
            tau = new
            break
        tau = new
    _hermite(Xa, Va, Xb, Vb, h, tau, P, D)
    nx = P[1] * D[2] - P[2] * D[1]
    ny = P[2] * D[0] - P[0] * D[2]
    nz = P[0] * D[1] - P[1] * D[0]
    nn = np.sqrt(nx * nx + ny * ny + nz * nz)
    miss = ((y[0] - P[0]) * nx + (y[1] - P[1]) * ny + (y[2] - P[2]) * nz) / nn
    dist = np.sqrt((P[0] - y[0]) ** 2 + (P[1] - y[1]) ** 2 + (P[2] - y[2]) ** 2)
    out[0] = tau
    out[1] = miss
    out[2] = dist


@njit(cache=True, nogil=True)
def _events_from(Xs, Vs, n, h, y, capture, s_min, ev, max_events):
    """Local minima of |X(s) - y| below ``capture`` for s > s_min."""
    count = 0
    out = np.empty(3)
    dprev2 = 1e300
    dprev = 1e300
    for k in range(n + 1):
        d = np.sqrt((Xs[k, 0] - y[0]) ** 2 + (Xs[k, 1] - y[1]) ** 2 + (Xs[k, 2] - y[2]) ** 2)
        # sample k - 1 is a local minimum
        if k >= 2 and dprev <= dprev2 and dprev < d and dprev < capture:
            j = k - 1
            # along-track sign change lies in (j - 1, j) or (j, j + 1)
            fj = ((Xs[j, 0] - y[0]) * Vs[j, 0] + (Xs[j, 1] - y[1]) * Vs[j, 1]
                  + (Xs[j, 2] - y[2]) * Vs[j, 2])
            a = j if fj < 0 else j - 1
            _refine(Xs[a], Vs[a], Xs[a + 1], Vs[a + 1], h, y, out)
            s = (a + out[0]) * h
            if s > s_min and count < max_events:
                ev[count, 0] = s
                ev[count, 1] = out[1]
                ev[count, 2] = out[2]
                count += 1
        dprev2 = dprev
        dprev = d
    return count


@njit(cache=True, nogil=True)
def scan(x0, V0, y, h, n, fc, fpc, capture, s_min, max_events, events, counts, drift):
    """Integrate every initial velocity in V0 and record close passages of y."""
    Xs = np.empty((n + 1, 3))
    Vs = np.empty((n + 1, 3))
    for i in range(V0.shape[0]):
        sp, cl = integrate(x0, V0[i], h, n, fc, fpc, Xs, Vs)
        drift[i, 0] = sp
        drift[i, 1] = cl
        counts[i] = _events_from(Xs, Vs, n, h, y, capture, s_min, events[i], max_events)


@njit(cache=True, nogil=True)
def fan_scan(x0, V0, Y, h, n, fc, fpc, capture, s_min, max_events, events, counts):
    """Like ``scan`` but for many targets Y at once, with a coarse screen."""
    Xs = np.empty((n + 1, 3))
    Vs = np.empty((n + 1, 3))
    out = np.empty(3)
    stride = 16
    reach = capture + stride * h * 1.5
    for i in range(V0.shape[0]):
        integrate(x0, V0[i], h, n, fc, fpc, Xs, Vs)
        for j in range(Y.shape[0]):
            y = Y[j]
            c = 0
            k0 = 0
            while k0 <= n:
                k1 = min(k0 + stride, n)
                d0 = np.sqrt((Xs[k0, 0] - y[0]) ** 2 + (Xs[k0, 1] - y[1]) ** 2 + (Xs[k0, 2] - y[2]) ** 2)
                if d0 < reach:
                    for k in range(max(k0, 1), min(k1, n - 1) + 1):
                        dm = np.sqrt((Xs[k - 1, 0] - y[0]) ** 2 + (Xs[k - 1, 1] - y[1]) ** 2 + (Xs[k - 1, 2] - y[2]) ** 2)
                        dk = np.sqrt((Xs[k, 0] - y[0]) ** 2 + (Xs[k, 1] - y[1]) ** 2 + (Xs[k, 2] - y[2]) ** 2)
                        dp = np.sqrt((Xs[k + 1, 0] - y[0]) ** 2 + (Xs[k + 1, 1] - y[1]) ** 2 + (Xs[k + 1, 2] - y[2]) ** 2)
                        if dk <= dm and dk < dp and dk < capture:
                            fk = ((Xs[k, 0] - y[0]) * Vs[k, 0] + (Xs[k, 1] - y[1]) * Vs[k, 1]
                                  + (Xs[k, 2] - y[2]) * Vs[k, 2])
                            a = k if fk < 0 else k - 1
                            _refine(Xs[a], Vs[a], Xs[a + 1], Vs[a + 1], h, y, out)
                            s = (a + out[0]) * h
                            if s > s_min and c < max_events:
                                events[i, j, c, 0] = s
                                events[i, j, c, 1] = out[1]
                                events[i, j, c, 2] = out[2]
                                c += 1
                k0 = k1 + 1 if k1 > k0 else n + 1
            counts[i, j] = c


@njit(cache=True, nogil=True)
def closest_event(x0, v0, y, h, n, fc, fpc, s_target, window, result):
    """Signed miss of the close passage nearest ``s_target`` (within ``window``)."""
    Xs = np.empty((n + 1, 3))
    Vs = np.empty((n + 1, 3))
    integrate(x0, v0, h, n, fc, fpc, Xs, Vs)
    ev = np.empty((32, 3))
    c = _events_from(Xs, Vs, n, h, y, 10.0, 0.0, ev, 32)
    best = -1
    for k in range(c):
        if abs(ev[k, 0] - s_target) <= window:
            if best < 0 or abs(ev[k, 0] - s_target) < abs(ev[best, 0] - s_target):
                best = k
    if best < 0:
        return False
    result[0] = ev[best, 0]
    result[1] = ev[best, 1]
    result[2] = ev[best, 2]
    return True
