"""Elliptic integrals and Jacobi functions.

All routines take the modulus ``p`` (so the parameter is ``p**2``).
Integrals go through Carlson's symmetric forms, the Jacobi functions
through the descending Landen (AGM) transformation.
"""

import math

import numpy as np

from .errors import DomainError

_RF_TOL = 1e-3
_RC_TOL = 1e-3
_RJ_TOL = 1e-3
_NEAR_ONE = 1e-12
_MAX_ITER = 60


def _complement(p):
    return math.sqrt((1.0 - p) * (1.0 + p))


def agm(a, b):
    """Arithmetic-geometric mean of two non-negative numbers."""
    if a < 0 or b < 0:
        raise DomainError("agm needs non-negative arguments")
    for _ in range(_MAX_ITER):
        if abs(a - b) <= 1e-16 * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def carlson_rf(x, y, z):
    """Symmetric integral R_F(x, y, z); at most one argument may be zero."""
    if min(x, y, z) < 0 or min(x + y, y + z, z + x) == 0:
        raise DomainError("R_F needs non-negative arguments, at most one zero")
    for _ in range(_MAX_ITER):
        sx, sy, sz = math.sqrt(x), math.sqrt(y), math.sqrt(z)
        lam = sx * (sy + sz) + sy * sz
        x, y, z = 0.25 * (x + lam), 0.25 * (y + lam), 0.25 * (z + lam)
        ave = (x + y + z) / 3.0
        dx, dy, dz = (ave - x) / ave, (ave - y) / ave, (ave - z) / ave
        if max(abs(dx), abs(dy), abs(dz)) < _RF_TOL:
            break
    e2 = dx * dy - dz * dz
    e3 = dx * dy * dz
    return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / math.sqrt(ave)


def carlson_rc(x, y):
    """Degenerate integral R_C(x, y) = R_F(x, y, y) for x >= 0, y > 0."""
    if x < 0 or y <= 0:
        raise DomainError("R_C needs x >= 0 and y > 0")
    for _ in range(_MAX_ITER):
        lam = 2.0 * math.sqrt(x) * math.sqrt(y) + y
        x, y = 0.25 * (x + lam), 0.25 * (y + lam)
        ave = (x + 2.0 * y) / 3.0
        s = (y - ave) / ave
        if abs(s) < _RC_TOL:
            break
    return (1.0 + s * s * (0.3 + s * (1.0 / 7.0 + s * (0.375 + s * 9.0 / 22.0)))) / math.sqrt(ave)


def carlson_rj(x, y, z, r):
    """Symmetric integral of the third kind R_J(x, y, z, r) for r > 0."""
    if min(x, y, z) < 0 or min(x + y, y + z, z + x) == 0 or r <= 0:
        raise DomainError("R_J needs x, y, z >= 0 (at most one zero) and r > 0")
    c1, c2, c3, c4 = 3.0 / 14.0, 1.0 / 3.0, 3.0 / 22.0, 3.0 / 26.0
    c5, c6, c7, c8 = 0.75 * c3, 1.5 * c4, 0.5 * c2, 2.0 * c3
    total, fac = 0.0, 1.0
    for _ in range(_MAX_ITER):
        sx, sy, sz = math.sqrt(x), math.sqrt(y), math.sqrt(z)
        lam = sx * (sy + sz) + sy * sz
        alpha = (r * (sx + sy + sz) + sx * sy * sz) ** 2
        beta = r * (r + lam) ** 2
        total += fac * carlson_rc(alpha, beta)
        fac *= 0.25
        x, y, z, r = 0.25 * (x + lam), 0.25 * (y + lam), 0.25 * (z + lam), 0.25 * (r + lam)
        ave = 0.2 * (x + y + z + 2.0 * r)
        dx, dy, dz, dp = (ave - x) / ave, (ave - y) / ave, (ave - z) / ave, (ave - r) / ave
        if max(abs(dx), abs(dy), abs(dz), abs(dp)) < _RJ_TOL:
            break
    ea = dx * (dy + dz) + dy * dz
    eb = dx * dy * dz
    ec = dp * dp
    ed = ea - 3.0 * ec
    ee = eb + 2.0 * dp * (ea - ec)
    series = (1.0 + ed * (-c1 + c5 * ed - c6 * dp * ee)
              + eb * (c7 + dp * (-c8 + dp * c4))
              + dp * ea * (c2 - dp * c3) - c2 * dp * ec)
    return 3.0 * total + fac * series / (ave * math.sqrt(ave))


def _check_modulus(p, allow_one=False):
    if not np.isfinite(p) or p < 0 or p > 1 or (p == 1 and not allow_one):
        raise DomainError(f"modulus p={p!r} outside [0, 1)")


def complete_K(p):
    """Complete integral of the first kind, K(p) = pi / (2 agm(1, sqrt(1-p^2)))."""
    _check_modulus(p)
    return 0.5 * math.pi / agm(1.0, _complement(p))


def incomplete_F(gamma, p):
    """Incomplete integral of the first kind for 0 <= gamma <= pi/2."""
    _check_modulus(p, allow_one=True)
    if not 0 <= gamma <= 0.5 * math.pi:
        raise DomainError("amplitude must lie in [0, pi/2]")
    s, c = math.sin(gamma), math.cos(gamma)
    if gamma == 0.5 * math.pi:
        c = 0.0
    if s == 0:
        return 0.0
    if p == 1 and c == 0:
        raise DomainError("F(pi/2, 1) diverges")
    return s * carlson_rf(c * c, (1.0 - p * s) * (1.0 + p * s), 1.0)


def incomplete_Pi(gamma, n, p):
    """Incomplete integral of the third kind,
    int_0^gamma dt / ((1 - n sin^2 t) sqrt(1 - p^2 sin^2 t))."""
    _check_modulus(p, allow_one=True)
    if not 0 <= gamma <= 0.5 * math.pi:
        raise DomainError("amplitude must lie in [0, pi/2]")
    s, c = math.sin(gamma), math.cos(gamma)
    if gamma == 0.5 * math.pi:
        c = 0.0
    if n * s * s >= 1:
        raise DomainError("characteristic n sin^2(gamma) must stay below 1")
    if s == 0:
        return 0.0
    if p == 1 and c == 0:
        raise DomainError("Pi(pi/2, n, 1) diverges")
    d2 = (1.0 - p * s) * (1.0 + p * s)
    out = s * carlson_rf(c * c, d2, 1.0)
    if n != 0:
        out += n * s ** 3 * carlson_rj(c * c, d2, 1.0, 1.0 - n * s * s) / 3.0
    return out


def jacobi_sn_cn(u, p):
    """Jacobi sn and cn of argument ``u`` (scalar or array) at modulus ``p``."""
    _check_modulus(p, allow_one=True)
    u = np.asarray(u, dtype=float)
    if p == 0:
        return np.sin(u), np.cos(u)
    if p > 1.0 - _NEAR_ONE:
        return np.tanh(u), 1.0 / np.cosh(u)
    a, b, c = 1.0, _complement(p), p
    chain = []
    for _ in range(_MAX_ITER):
        if abs(c) <= 1e-16 * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        chain.append(c / a)
    phi = (2.0 ** len(chain)) * a * u
    for ratio in reversed(chain):
        phi = 0.5 * (phi + np.arcsin(np.clip(ratio * np.sin(phi), -1.0, 1.0)))
    return np.sin(phi), np.cos(phi)


def jacobi_am(u, p):
    """Jacobi amplitude for 0 <= u <= K(p)."""
    sn, cn = jacobi_sn_cn(u, p)
    return np.arctan2(sn, cn)
