"""Depleted-pump propagation: reduced coefficients, elliptic closed forms and
two numerical oracles (quadrature of the implicit integral, canonical ODEs).

Fluxes are normalised by the entrance pump flux, x = J / eta10. Two
pump-depletion conventions are supported: ``as-printed`` uses (1 - x)^2 in the
reduced polynomial, ``manley-rowe`` uses (1 - 2x)^2 so that the pump loses two
photons per generated photon.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .core import branch_eigenvalue, solve_monic_cubic
from .errors import (BoundaryError, ConvergenceError, DomainError,
                     RegimeMismatchError, SingularConfigurationError)
from .special import complete_K, jacobi_sn_cn

CONVENTIONS = ("as-printed", "manley-rowe")
BOUNDARY_TOL = 1e-6


def _depletion(convention):
    if convention not in CONVENTIONS:
        raise DomainError(f"convention must be one of {CONVENTIONS}")
    return 1.0 if convention == "as-printed" else 2.0


def reduced_cubic(b1, b2, ratio, convention="as-printed"):
    """Coefficients (highest first) of P(x) = (1 - k x)^2 (ratio + x) - x (b1 + b2 x)^2."""
    k = _depletion(convention)
    return np.array([k * k - b2 * b2,
                     -2.0 * k + k * k * ratio - 2.0 * b1 * b2,
                     1.0 - 2.0 * k * ratio - b1 * b1,
                     ratio])


def roots(b1, b2, ratio, convention="as-printed"):
    """Approximate roots (x1, x2, x3) of the reduced cubic for ratio << 1."""
    k = _depletion(convention)
    if b1 * b1 == 1 or b2 == -k or b2 == k:
        raise BoundaryError("root approximations are singular on regime boundaries")
    return (1.0 - b1) / (k + b2), (1.0 + b1) / (k - b2), -ratio / (1.0 - b1 * b1)


def _polish_root(poly, x):
    d = np.polyder(poly)
    for _ in range(8):
        f, df = np.polyval(poly, x), np.polyval(d, x)
        if df == 0:
            break
        step = f / df
        x -= step
        if abs(step) <= 1e-16 * max(abs(x), 1e-300):
            break
    return x


def exact_roots(b1, b2, ratio, convention="as-printed"):
    """Roots of the reduced cubic matched to (x1, x2, x3) by proximity."""
    poly = reduced_cubic(b1, b2, ratio, convention)
    raw = np.roots(poly)
    if np.max(np.abs(raw.imag)) > 1e-9 * np.max(np.abs(raw)):
        raise ConvergenceError("reduced cubic has complex roots")
    raw = [_polish_root(poly, float(r.real)) for r in raw]
    approx = roots(b1, b2, ratio, convention)
    out = [None] * 3
    for i in np.argsort([abs(a) for a in approx]):
        j = min(range(len(raw)), key=lambda j: abs(raw[j] - approx[i]))
        out[i] = raw.pop(j)
    return tuple(out)


@dataclass(frozen=True)
class PropagationCoefficients:
    """Reduced description of one retarded-time slice.

    ``rate`` converts the dimensionless argument to distance: x depends on
    ``kappa_prime * z`` with kappa_prime proportional to ``rate``. ``alpha`` is
    the relative slope of the refraction denominator, a1 eta10 / a0.
    """
    b1: float
    b2: float
    ratio: float
    alpha: float = 0.0
    rate: float = 1.0
    convention: str = "as-printed"
    root_method: str = "printed"
    A1: float = math.nan
    A2: float = math.nan
    a0: float = math.nan
    a1: float = math.nan
    lam: float = math.nan
    eta10: float = math.nan
    derived: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.ratio < 0:
            raise DomainError("idler-to-pump ratio must be non-negative")
        if self.rate == 0:
            raise SingularConfigurationError("zero conversion rate")
        self.derived.update(_elliptic_parameters(self))

    def __getattr__(self, name):
        derived = self.__dict__.get("derived", {})
        if name in derived:
            return derived[name]
        raise AttributeError(name)

    @classmethod
    def from_slowdown(cls, b1, b2, ratio, slowdown, **kw):
        """Regime-B coefficients with a prescribed slowdown factor s."""
        x1, x2, _ = roots(b1, b2, ratio, kw.get("convention", "as-printed"))
        turning, far = (x1, x2) if x1 > 0 else (x2, x1)
        return cls(b1, b2, ratio, alpha=(slowdown - 1.0) * math.sqrt(turning / abs(far)), **kw)


def classify(b1, b2, convention="as-printed"):
    k = _depletion(convention)
    if abs(b1 * b1 - 1.0) < BOUNDARY_TOL or abs(b2 * b2 - k * k) < BOUNDARY_TOL:
        return "boundary"
    if b1 * b1 > 1:
        return "C"
    return "A" if b2 * b2 < k * k else "B"


def _elliptic_parameters(c):
    regime = classify(c.b1, c.b2, c.convention)
    out = {"regime": regime}
    if regime == "boundary":
        return out
    k = _depletion(c.convention)
    lead = k * k - c.b2 * c.b2
    if c.root_method == "printed":
        x1, x2, x3 = roots(c.b1, c.b2, c.ratio, c.convention)
    elif c.root_method == "exact":
        x1, x2, x3 = exact_roots(c.b1, c.b2, c.ratio, c.convention)
    else:
        raise DomainError("root_method must be 'printed' or 'exact'")
    out.update(x1=x1, x2=x2, x3=x3)
    rate = abs(c.rate)
    small = abs(x3)
    if regime == "A":
        turning, far = min(x1, x2), max(x1, x2)
        p2 = turning * (far + small) / (far * (turning + small))
        n = turning / (turning + small)
        d, s, r = 1.0, 1.0, small
    elif regime == "B":
        turning, far = (x1, x2) if x1 > 0 else (x2, x1)
        if abs(far) <= small:
            raise DomainError("idler too strong for the regime-B reduction")
        p2 = turning * (abs(far) - small) / (abs(far) * (turning + small))
        n = -turning / abs(far)
        d, r = 1.0 - n, abs(far)
        s = 1.0 + c.alpha / math.sqrt(-n)
        if s == 0:
            raise SingularConfigurationError("slowdown factor vanishes")
    else:
        turning = x3
        negs = sorted((x for x in (x1, x2) if x < 0), key=abs)
        pos = [x for x in (x1, x2) if x > 0]
        if len(negs) == 1:
            near, far = abs(negs[0]), pos[0]
            p2 = x3 * (far + near) / (far * (x3 + near))
            n, d, r = x3 / (x3 + near), 1.0, near
        elif len(negs) == 2:
            near, far = abs(negs[0]), negs[1]
            p2 = x3 * (abs(far) - near) / (abs(far) * (x3 + near))
            n = -x3 / abs(far)
            d, r = 1.0 - n, abs(far)
        else:
            near, far = min(pos), max(pos)
            p2 = x3 * (far - near) / ((far - x3) * near)
            n, d, r = math.nan, 1.0, near
        kp = rate * math.sqrt(abs(1.0 - c.b1 ** 2) * (1.0 + abs(x3) / near))
        out.update(turning=turning, far=far, p=math.sqrt(p2) if p2 >= 0 else math.nan,
                   n=n, d=d, s=1.0, r=r, kappa_prime=kp, lead=lead)
        return out
    kp = rate * math.sqrt(lead * far * (turning + small)) / abs(s)
    out.update(turning=turning, far=far, p=math.sqrt(min(max(p2, 0.0), 1.0)), n=n, d=d,
               s=s, r=r, kappa_prime=kp, lead=lead)
    return out


def coefficients(p, eta10, delta2, eta20=0.0, q=None, convention="as-printed",
                 root_method="printed", branch="upper"):
    """Reduced coefficients for pump flux ``eta10`` at detuning ``delta2``.

    ``q`` is 2 dk / density (default: the background value of ``p``).
    """
    raw = raw_coefficients(p, eta10, delta2, eta20, q, branch)
    return PropagationCoefficients(convention=convention, root_method=root_method, **raw)


def raw_coefficients(p, eta10, delta2, eta20=0.0, q=None, branch="upper"):
    """Field values of PropagationCoefficients without the root analysis."""
    if not eta10 > 0:
        raise DomainError("pump flux must be positive")
    if eta20 < 0:
        raise DomainError("idler flux must be non-negative")
    q = 2.0 * p.dk_over_density if q is None else q
    big_d = delta2 + p.beta21 * eta10
    om = p.mu1 * eta10
    lam = branch_eigenvalue(big_d, om, branch == "upper")
    split = 2.0 * lam + big_d
    a0 = p.delta30 * split
    if a0 == 0 or not math.isfinite(a0):
        raise SingularConfigurationError("refraction denominator a0 vanishes")
    a1 = -(p.mu2 + p.mu3)
    A1 = -q * p.delta30 * split - p.mu2 * lam - p.mu3 * (lam + big_d)
    A2 = q * q * p.delta30 + p.mu2 * q + p.mu3 * (q - p.beta22 - p.beta23 + 2.0 * p.beta21)
    root = 2.0 * p.mu1 * math.sqrt(p.mu2 * p.mu3)
    rate = p.kappa0 * om / split
    return dict(b1=A1 / (root * eta10), b2=A2 / root, ratio=eta20 / eta10, alpha=a1 * eta10 / a0,
                rate=rate, A1=A1, A2=A2, a0=a0, a1=a1, lam=lam, eta10=eta10)


def _require(c, *regimes):
    if c.regime == "boundary":
        raise BoundaryError("coefficients lie on a regime boundary")
    if c.regime not in regimes:
        raise RegimeMismatchError(f"coefficients are in regime {c.regime}, not {'/'.join(regimes)}")


def _check_z(z):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or not np.all(np.isfinite(z)):
        raise DomainError("z must be finite and non-negative")
    return z


def _elliptic_growth(c, z, prefactor=1.0):
    sn, cn = jacobi_sn_cn(c.kappa_prime * _check_z(z), c.p)
    t, small = c.turning, abs(c.x3)
    return t * small * sn ** 2 / (small + t * prefactor * cn ** 2)


def solve_regimeA(c, z):
    """Compensated linear and Kerr mismatch: growth to a plateau at the turning root."""
    _require(c, "A")
    return _elliptic_growth(c, z)


def solve_regimeB(c, z, printed_prefactor=False):
    """Compensated linear mismatch with large Kerr mismatch.

    The default inverts the reduced integral exactly. ``printed_prefactor``
    multiplies the cn^2 term by 2|x_far| / (x_turn + |x_far|) for comparison.
    """
    _require(c, "B")
    fac = 2.0 * abs(c.far) / (c.turning + abs(c.far)) if printed_prefactor else 1.0
    return _elliptic_growth(c, z, fac)


def solve_regimeC(c, z):
    """Uncompensated linear mismatch: bounded sinusoidal exchange."""
    _require(c, "C")
    return abs(c.x3) * np.sin(c.kappa_prime * _check_z(z)) ** 2


def solve(c, z):
    _require(c, "A", "B", "C")
    return {"A": solve_regimeA, "B": solve_regimeB, "C": solve_regimeC}[c.regime](c, z)


def plateau_distance(c):
    """Distance at which regime A/B solutions first reach the turning root."""
    _require(c, "A", "B")
    if c.p >= 1.0:
        return math.inf
    return complete_K(c.p) / c.kappa_prime


def max_generated_flux(c):
    """Turning root in units of eta10 (the maximum of x)."""
    _require(c, "A", "B", "C")
    return abs(c.turning)


# ----------------------------------------------------------------------------
# implicit-integral oracle


@dataclass(frozen=True)
class PropagationProblem:
    """Full single-slice problem for the numerical oracles."""
    params: object
    eta10: float
    eta20: float
    delta2: float = 0.0
    q: float = None
    eta30: float = 0.0
    branch: str = "upper"

    def __post_init__(self):
        if not self.eta10 > 0 or self.eta20 < 0 or self.eta30 < 0:
            raise DomainError("fluxes must be non-negative with a positive pump")

    @property
    def q_value(self):
        return 2.0 * self.params.dk_over_density if self.q is None else self.q

    def coefficients(self, convention="as-printed", root_method="printed"):
        return coefficients(self.params, self.eta10, self.delta2, self.eta20, self.q_value,
                            convention, root_method, self.branch)


class ImplicitIntegral:
    """z as a function of x from quadrature of f(x) / sqrt(h(x)), where h
    vanishes at the lower turning root ``x_low`` (0 unless the generated field
    is seeded) and at the upper turning root ``x_turn``. z = 0 at x = 0.

    Substitutions x = x_low + s^2 (lower half) and x = x_turn - v^2 (upper half)
    remove both inverse-square-root endpoints. ``lower_deflated`` and
    ``deflated`` may supply h / (x - x_low) and h / (x_turn - x) in closed
    form; otherwise they are evaluated numerically. ``scale`` maps the
    integral to z; ``knees`` are x offsets where the integrand changes scale.
    """

    def __init__(self, h, f, x_turn, scale, deflated=None, knees=(), x_low=0.0, lower_deflated=None):
        self.h, self.f, self.x_turn, self.x_low, self.scale = h, f, x_turn, x_low, scale
        exact = deflated is not None and lower_deflated is not None
        # an h built from cancelling terms cannot support the tightest tolerance
        self.epsrel = 1e-13 if exact else 1e-11
        span = x_turn - x_low
        self.deflated = deflated or self._numeric_deflation(x_turn, -1.0, span)
        self.lower_deflated = lower_deflated or self._numeric_deflation(x_low, 1.0, span)
        self.knees = [k for k in knees if k > 0]
        self._mid = 0.5 * (x_low + x_turn)
        self._total = self._lower(self._mid) + self._upper(self._mid)
        self._origin = self._cumulative(0.0)
        self.z_turn = scale * (self._total - self._origin)

    def _numeric_deflation(self, root, side, span):
        # h(x) / |x - root| by division away from the root; next to it the
        # division loses digits, so the smooth quotient is extrapolated
        # quadratically from three samples just outside
        h, near = self.h, 1e-5 * span
        q1, q2, q3 = (h(root + side * k * near) / (k * near) for k in (1.0, 2.0, 3.0))

        def deflated(x):
            gap = side * (x - root)
            if gap < near:
                u = gap / near - 1.0
                return q1 + u * (q2 - q1) + 0.5 * u * (u - 1.0) * (q3 - 2.0 * q2 + q1)
            return h(x) / gap

        return deflated

    @staticmethod
    def _positive(value, x):
        if value < 0:
            raise ConvergenceError(f"integrand negative at x = {x!r}: turning root mis-bracketed")
        return value

    def _lower(self, x):
        top = math.sqrt(max(x - self.x_low, 0.0))
        if top == 0:
            return 0.0
        pts = sorted({v for k in self.knees for v in (math.sqrt(k) * f for f in (1.0, 10.0, 100.0))
                      if v < top}) or None

        def g(s):
            t = self.x_low + s * s
            return 2.0 * self.f(t) / math.sqrt(self._positive(self.lower_deflated(t), t))

        return quad(g, 0.0, top, epsabs=0.0, epsrel=self.epsrel, limit=400, points=pts)[0]

    def _upper(self, x):
        top = math.sqrt(max(self.x_turn - x, 0.0))
        if top == 0:
            return 0.0

        def g(v):
            t = self.x_turn - v * v
            return 2.0 * self.f(t) / math.sqrt(self._positive(self.deflated(t), t))

        return quad(g, 0.0, top, epsabs=0.0, epsrel=self.epsrel, limit=400)[0]

    def _cumulative(self, x):
        """Integral from x_low to x, unscaled."""
        if x <= self._mid:
            return self._lower(x)
        return self._total - self._upper(min(x, self.x_turn))

    def z_of_x(self, x):
        x = float(x)
        if x < self.x_low or x > self.x_turn * (1 + 1e-12):
            raise DomainError("x outside the interval between the turning roots")
        return self.scale * (self._cumulative(x) - self._origin)

    def __call__(self, x):
        return np.array([self.z_of_x(v) for v in np.atleast_1d(x)])

    def x_of_z(self, z, tabulated=None):
        """Invert z(x); the motion is reflected at both turning roots.

        ``tabulated`` (a relative tolerance, e.g. 1e-9) inverts a cubic Hermite
        table of the integral instead of root-finding on quadratures; much
        faster for long z grids.
        """
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if np.any(z < 0):
            raise DomainError("z must be non-negative")
        total = self.scale * self._total
        w = np.fmod(z + self.scale * self._origin, 2.0 * total)
        w = np.where(w > total, 2.0 * total - w, w)
        if tabulated:
            return self._invert_table(np.clip(w / self.scale, 0.0, self._total), tabulated)
        out = []
        for ww in w:
            if ww <= 0:
                out.append(self.x_low)
            elif ww >= total:
                out.append(self.x_turn)
            else:
                out.append(brentq(lambda x: self.scale * self._cumulative(x) - ww, self.x_low, self.x_turn,
                                  xtol=1e-300, rtol=1e-14, maxiter=300))
        return np.array(out)

    # The orbit is parametrised by u in [0, 2 S], S = sqrt(mid - x_low):
    # x = x_low + u^2 below the midpoint, x = x_turn - (2 S - u)^2 above it.
    # The integral is smooth in u and its u-derivative is the substituted integrand.

    def _du(self, u):
        span = 2.0 * self._half
        if u <= self._half:
            t = self.x_low + u * u
            return 2.0 * self.f(t) / math.sqrt(self._positive(self.lower_deflated(t), t))
        v = span - u
        t = self.x_turn - v * v
        return 2.0 * self.f(t) / math.sqrt(self._positive(self.deflated(t), t))

    def _x_of_u(self, u):
        return np.where(u <= self._half, self.x_low + u * u, self.x_turn - (2.0 * self._half - u) ** 2)

    def _segment(self, a, b, tol):
        return quad(self._du, a, b, epsabs=0.0, epsrel=max(self.epsrel, 1e-3 * tol), limit=400)[0]

    def _build_table(self, tol):
        self._half = math.sqrt(self._mid - self.x_low)
        half = self._half
        cuts = [half * k / 16 for k in range(17)]
        cuts += [math.sqrt(k) * f for k in self.knees for f in (1.0, 10.0, 100.0) if math.sqrt(k) * f < half]
        cuts = sorted(set(cuts + [2.0 * half - c for c in cuts]))
        us, Is, ds = [cuts[0]], [0.0], [self._du(cuts[0])]
        target = tol * self._total
        stack = [(b, a) for a, b in zip(cuts[:-1], cuts[1:])][::-1]
        while stack:
            b, a = stack.pop()
            Ia, da = Is[-1], ds[-1]
            Ib = Ia + self._segment(a, b, tol)
            db = self._du(b)
            m = 0.5 * (a + b)
            Im = Ia + self._segment(a, m, tol)
            pred = 0.5 * (Ia + Ib) + 0.125 * (b - a) * (da - db)
            if abs(pred - Im) > target and b - a > 1e-12 * half:
                stack.append((b, m))
                stack.append((m, a))
                continue
            us.append(b)
            Is.append(Ib)
            ds.append(db)
        Is = np.array(Is)
        # rescale so the table ends exactly at the quadrature total
        Is *= self._total / Is[-1]
        return np.array(us), Is, np.array(ds) * self._total / Is[-1]

    def _invert_table(self, w, tol):
        tables = self.__dict__.setdefault("_tables", {})
        if tol not in tables:
            tables[tol] = self._build_table(tol)
        us, Is, ds = tables[tol]
        i = np.clip(np.searchsorted(Is, w) - 1, 0, us.size - 2)
        h = us[i + 1] - us[i]
        y0, y1, m0, m1 = Is[i], Is[i + 1], ds[i] * h, ds[i + 1] * h
        # cubic Hermite on t in [0, 1]; safeguarded Newton for H(t) = w
        lo, hi = np.zeros_like(w), np.ones_like(w)
        t = np.clip((w - y0) / np.maximum(y1 - y0, 1e-300), 0.0, 1.0)
        for _ in range(60):
            t2, t3 = t * t, t * t * t
            H = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1
            dH = (6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1
            r = H - w
            lo = np.where(r < 0, t, lo)
            hi = np.where(r > 0, t, hi)
            step = np.where(dH > 0, r / np.where(dH > 0, dH, 1.0), np.inf)
            nt = t - step
            bad = ~((nt > lo) & (nt < hi))
            nt = np.where(bad, 0.5 * (lo + hi), nt)
            if np.all(np.abs(nt - t) <= 1e-15):
                t = nt
                break
            t = nt
        x = self._x_of_u(us[i] + t * h)
        return np.where(w <= 0, self.x_low, np.where(w >= self._total, self.x_turn, x))


def _first_positive_root(h, upper, n=4000):
    grid = np.concatenate([[0.0], np.geomspace(1e-14 * upper, upper, n)])
    vals = np.array([h(x) for x in grid[1:]])
    idx = np.nonzero(vals <= 0)[0]
    if idx.size == 0:
        raise ConvergenceError("no turning point found")
    i = idx[0]
    lo = grid[i]
    return brentq(h, lo if lo > 0 else grid[1] * 1e-3, grid[i + 1], xtol=1e-300, rtol=1e-15, maxiter=400)


def reduced_integral(b1, b2, ratio, alpha=0.0, rate=1.0, convention="as-printed"):
    """Quadrature oracle for the reduced polynomial. It needs no root analysis,
    so it also covers regime boundaries."""
    if rate == 0:
        raise SingularConfigurationError("zero conversion rate")
    k = _depletion(convention)
    poly = reduced_cubic(b1, b2, ratio, convention)

    def cubic(x):
        return ((poly[0] * x + poly[1]) * x + poly[2]) * x + poly[3]

    def h(x):
        return x * cubic(x)

    upper = 1.0 / k
    turn = _first_positive_root(cubic, upper)
    # synthetic division P(x) = (x - turn) * (a x^2 + b x + c)
    qa = poly[0]
    qb = poly[1] + turn * qa
    qc = poly[2] + turn * qb

    def deflated(t):
        return t * -((qa * t + qb) * t + qc)

    if 1.0 + alpha * turn <= 0:
        raise SingularConfigurationError("refraction denominator changes sign before the turning point")
    return ImplicitIntegral(h, lambda x: 1.0 + alpha * x, turn, 1.0 / (2.0 * abs(rate)),
                            deflated=deflated, knees=(ratio,), lower_deflated=cubic)


def _reduced_integral(c):
    return reduced_integral(c.b1, c.b2, c.ratio, c.alpha, c.rate, c.convention)


class _FullCubic:
    """Eigenvalue cubic of the full problem in scaled units.

    Fluxes in units of eta10, frequencies in units of mu1 eta10.
    """

    def __init__(self, prob):
        p = prob.params
        om = p.mu1 * prob.eta10
        self.w2 = p.mu2 / (p.mu1 * om)
        self.w3 = p.mu3 / (p.mu1 * om)
        self.b2 = np.array([p.beta21, p.beta22, p.beta23]) / p.mu1
        self.b3 = np.array([p.beta31, p.beta32, p.beta33]) / p.mu1
        self.d2 = prob.delta2 / om
        self.d3 = p.delta30 / om
        self.q = prob.q_value / p.mu1
        self.e2 = prob.eta20 / prob.eta10
        self.e3 = prob.eta30 / prob.eta10
        self.coupling = math.sqrt(self.w2 * self.w3)
        self.om = om

    def terms(self, n1, n2, n3):
        d2 = self.d2 + self.b2 @ (n1, n2, n3)
        d3 = self.d3 + self.b3 @ (n1, n2, n3)
        o1, o2, o3 = n1 * n1, self.w2 * n2, self.w3 * n3
        return d2, d3, o1, o2, o3

    def coeffs(self, n1, n2, n3, c):
        d2, d3, o1, o2, o3 = self.terms(n1, n2, n3)
        return d2 + d3, d2 * d3 - (o1 + o2 + o3), -o1 * d3 - o3 * d2 + 2.0 * c

    def fluxes(self, x):
        return 1.0 - 2.0 * x, self.e2 + x, self.e3 + x

    def G(self, lam, x):
        """Cubic without the phase term, evaluated at lam - q x."""
        a, b, c = self.coeffs(*self.fluxes(x), 0.0)
        l0 = lam - self.q * x
        return ((l0 + a) * l0 + b) * l0 + c

    def G_lam(self, lam, x):
        a, b, _ = self.coeffs(*self.fluxes(x), 0.0)
        l0 = lam - self.q * x
        return (3.0 * l0 + 2.0 * a) * l0 + b

    def g(self, x):
        n1, n2, n3 = self.fluxes(x)
        return -2.0 * self.coupling * n1 * math.sqrt(max(n2, 0.0) * max(n3, 0.0))

    def dressed_guess(self, n1, n2, n3):
        d2 = self.terms(n1, n2, n3)[0]
        return branch_eigenvalue(d2, n1, True)


def _entrance_lambda(fc, branch, phi0):
    n1, n2, n3 = fc.fluxes(0.0)
    d2 = fc.terms(n1, n2, n3)[0]
    guess = branch_eigenvalue(d2, n1, branch == "upper")
    a, b, c = fc.coeffs(n1, n2, n3, fc.coupling * n1 * math.sqrt(n2 * n3) * math.cos(phi0))
    rts = solve_monic_cubic(a, b, c)
    return float(rts[np.argmin(np.abs(rts - guess))])


def _full_integral(prob, phi0=math.pi / 2):
    fc = _FullCubic(prob)
    lam = _entrance_lambda(fc, prob.branch, phi0)

    def h(x):
        return fc.g(x) ** 2 - fc.G(lam, x) ** 2

    sign = math.copysign(1.0, fc.G_lam(lam, 0.0))
    turn = _first_positive_root(h, 0.5)
    # a seeded generated field lets x dip below zero, down to where h vanishes
    low = brentq(h, -fc.e3, 0.0, xtol=1e-300, rtol=1e-15) if fc.e3 > 0 and h(0.0) > 0 else 0.0
    p = prob.params
    scale = 2.0 / (p.density * p.mu1)
    integral = ImplicitIntegral(h, lambda x: sign * fc.G_lam(lam, x), turn, scale,
                                knees=(fc.e2, fc.e3), x_low=low)
    integral.lam = lam * fc.om
    return integral


def implicit_integral_oracle(problem, convention="as-printed"):
    """Quadrature oracle for z(x), x = J / eta10.

    ``problem`` is either a PropagationCoefficients (reduced polynomial, either
    convention) or a PropagationProblem. For a PropagationProblem the
    ``manley-rowe`` convention uses the full eigenvalue cubic with the pump
    depleted at two photons per generated photon.
    """
    if isinstance(problem, PropagationCoefficients):
        if problem.convention != convention:
            problem = PropagationCoefficients(problem.b1, problem.b2, problem.ratio, problem.alpha,
                                              problem.rate, convention, problem.root_method)
        return _reduced_integral(problem)
    if convention == "as-printed":
        return _reduced_integral(problem.coefficients(convention))
    _depletion(convention)
    return _full_integral(problem)


# ----------------------------------------------------------------------------
# canonical-equation oracle


@dataclass
class OdeTrajectory:
    z: np.ndarray
    x: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    eta3: np.ndarray
    residuals: dict

    def max_residual(self):
        return {k: float(np.max(np.abs(v))) for k, v in self.residuals.items()}


def reduced_ode(b1, b2, ratio, alpha, rate, convention, z, rtol=1e-12):
    """Integrate the reduced one-dimensional motion on the grid ``z``.

    Needs no root analysis, so it also covers regime boundaries.
    """
    poly = reduced_cubic(b1, b2, ratio, convention)
    dpoly = np.polyder(np.polymul(poly, [1.0, 0.0]))
    k = _depletion(convention)

    def potential(x):
        return x * np.polyval(poly, x) / (1.0 + alpha * x) ** 2

    def rhs(zeta, y):
        x = y[0]
        den = 1.0 + alpha * x
        dv = np.polyval(dpoly, x) / den ** 2 - 2.0 * alpha * x * np.polyval(poly, x) / den ** 3
        return [y[1], 0.5 * dv]

    # dx/dzeta squared equals the potential, zeta = 2 |rate| z
    zeta = 2.0 * abs(rate) * z
    sol = solve_ivp(rhs, (0.0, float(zeta[-1])), [0.0, 0.0], method="DOP853", t_eval=zeta,
                    rtol=rtol, atol=1e-14 * max(ratio, 1e-12))
    if not sol.success:
        raise ConvergenceError(sol.message)
    x, v = sol.y
    scale = max(float(np.max(potential(x))), 1e-300)
    energy = (v ** 2 - potential(x)) / scale
    return OdeTrajectory(z, x, 1.0 - k * x, ratio + x, x, {"first_integral": energy})


def _reduced_ode(c, z, rtol):
    return reduced_ode(c.b1, c.b2, c.ratio, c.alpha, c.rate, c.convention, z, rtol)


def _full_ode(prob, z, rtol, phi0):
    fc = _FullCubic(prob)
    p = prob.params
    lam_entrance = _entrance_lambda(fc, prob.branch, phi0)
    q = fc.q
    b2, b3, w2, w3, kc = fc.b2, fc.b3, fc.w2, fc.w3, fc.coupling
    state = {"lam0": lam_entrance}

    def parts(a1, a2, a3, zeta):
        n = np.array([abs(a1) ** 2, abs(a2) ** 2, abs(a3) ** 2])
        d2, d3, o1, o2, o3 = fc.terms(*n)
        ph = complex(math.cos(q * zeta), -math.sin(q * zeta))
        w = a1 * a1 * a2.conjugate() * a3.conjugate() * ph
        return n, d2, d3, o1, o2, o3, ph, w

    def root(d2, d3, o1, o2, o3, cterm, guess):
        a, b, c = d2 + d3, d2 * d3 - (o1 + o2 + o3), -o1 * d3 - o3 * d2 + 2.0 * cterm
        lam = guess
        for _ in range(60):
            f = ((lam + a) * lam + b) * lam + c
            df = (3.0 * lam + 2.0 * a) * lam + b
            step = f / df
            lam -= step
            if abs(step) <= 1e-15 * max(1.0, abs(lam)):
                break
        else:
            raise ConvergenceError("dressed eigenvalue did not converge")
        return lam, (3.0 * lam + 2.0 * a) * lam + b

    n3_0 = fc.e3

    def rhs(zeta, y):
        a1, a2, a3 = complex(y[0], y[1]), complex(y[2], y[3]), complex(y[4], y[5])
        n, d2, d3, o1, o2, o3, ph, w = parts(a1, a2, a3, zeta)
        guess = lam_entrance - q * (n[2] - n3_0)
        lam, dlam = root(d2, d3, o1, o2, o3, kc * w.real, guess)
        p_d2 = lam * lam + d3 * lam - o3
        p_d3 = lam * lam + d2 * lam - o1
        grads = []
        for j, a in enumerate((a1, a2, a3)):
            g = (p_d2 * b2[j] + p_d3 * b3[j]) * a
            if j == 0:
                g += (-lam - d3) * 2.0 * n[0] * a1
                g += 2.0 * kc * a1.conjugate() * a2 * a3 * ph.conjugate()
            elif j == 1:
                g += -lam * w2 * a2
                g += kc * a1 * a1 * a3.conjugate() * ph
            else:
                g += (-lam - d2) * w3 * a3
                g += kc * a1 * a1 * a2.conjugate() * ph
            grads.append(-1j * g / dlam)
        return [grads[0].real, grads[0].imag, grads[1].real, grads[1].imag,
                grads[2].real, grads[2].imag]

    amp3 = math.sqrt(fc.e3)
    y0 = [1.0, 0.0, math.sqrt(fc.e2), 0.0, 0.0, 0.0]
    if amp3 > 0:
        # pick the seed phase (relative phase +-phi0) whose intensity grows
        best = None
        for sgn in (1.0, -1.0):
            a3 = amp3 * complex(math.cos(sgn * phi0), -math.sin(sgn * phi0))
            trial = y0[:4] + [a3.real, a3.imag]
            d = rhs(0.0, trial)
            growth = a3.real * d[4] + a3.imag * d[5]
            if best is None or growth > best[0]:
                best = (growth, trial)
        y0 = best[1]
    zeta = 0.5 * p.density * p.mu1 * z
    scale_amp = math.sqrt(max(fc.e3, fc.e2, 1e-30))
    sol = solve_ivp(rhs, (0.0, float(zeta[-1])), y0, method="DOP853", t_eval=zeta,
                    rtol=rtol, atol=1e-3 * rtol * scale_amp)
    if not sol.success:
        raise ConvergenceError(sol.message)
    a1 = sol.y[0] + 1j * sol.y[1]
    a2 = sol.y[2] + 1j * sol.y[3]
    a3 = sol.y[4] + 1j * sol.y[5]
    n1, n2, n3 = np.abs(a1) ** 2, np.abs(a2) ** 2, np.abs(a3) ** 2

    lam_rec = np.empty_like(n1)
    for i in range(n1.size):
        n, d2, d3, o1, o2, o3, ph, w = parts(a1[i], a2[i], a3[i], zeta[i])
        a, b, c = d2 + d3, d2 * d3 - (o1 + o2 + o3), -o1 * d3 - o3 * d2 + 2.0 * kc * w.real
        rts = solve_monic_cubic(a, b, c)
        lam0 = rts[np.argmin(np.abs(rts - (lam_entrance - q * (n3[i] - n3_0))))]
        lam_rec[i] = lam0 + q * n3[i]
    lam_scale = max(abs(lam_rec[0]), 1.0)
    om1 = 1.0 / p.lambda1
    om2 = 1.0 / p.lambda2
    om3 = 2.0 * om1 - om2
    energy = om1 * n1 + om2 * n2 + om3 * n3
    residuals = {
        "mr12": (n1 + 2.0 * n2) - (n1[0] + 2.0 * n2[0]),
        "mr13": (n1 + 2.0 * n3) - (n1[0] + 2.0 * n3[0]),
        "lambda": (lam_rec - lam_rec[0]) / lam_scale,
        "intensity": (energy - energy[0]) / om1,
    }
    worst = max(float(np.max(np.abs(v))) for v in residuals.values())
    if worst > 1e-6:
        detail = ", ".join(f"{k} {float(np.max(np.abs(v))):.1e}" for k, v in residuals.items())
        raise ConvergenceError(f"conservation violated beyond 1e-6 ({detail})")
    traj = OdeTrajectory(z, n3 - n3_0, n1, n2, n3, residuals)
    traj.lam = lam_rec * fc.om
    return traj


def canonical_ode_oracle(problem, z, convention="manley-rowe", rtol=1e-12, phi0=math.pi / 2):
    """Integrate the propagation equations directly.

    ``manley-rowe``: Hamilton's equations for the three complex amplitudes with
    the dressed eigenvalue of the full cubic as Hamiltonian (needs a
    PropagationProblem; the generated field is seeded with ``eta30`` at relative
    phase +-phi0). ``as-printed``: the reduced one-dimensional motion whose first
    integral is the printed implicit solution (accepts coefficients).
    Fluxes in the result are normalised by eta10.
    """
    z = _check_z(z)
    if z.ndim != 1 or z.size < 2 or np.any(np.diff(z) <= 0):
        raise DomainError("z must be a strictly increasing grid")
    if convention == "as-printed" or isinstance(problem, PropagationCoefficients):
        c = problem if isinstance(problem, PropagationCoefficients) else problem.coefficients(convention)
        return _reduced_ode(c, z, rtol)
    _depletion(convention)
    return _full_ode(problem, z, rtol, phi0)
