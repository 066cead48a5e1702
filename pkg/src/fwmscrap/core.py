"""Three-level atomic model: parameters, Rabi rates, detunings and dressed states."""

import math
import warnings
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import DegenerateStateError, DomainError, ModelValidityWarning


@dataclass(frozen=True)
class AtomicParams:
    """Coupling and Stark coefficients of the ladder.

    Units follow the photon-flux convention: ``mu1 * eta`` and ``mu * eta`` are
    (squared) angular Rabi frequencies, ``density * mu / delta`` is an inverse length.
    Wavelengths are in nanometres.
    """
    mu1: float
    mu2: float
    mu3: float
    beta21: float
    beta22: float
    beta23: float
    delta30: float
    density: float
    dk_over_density: float = 0.0
    lambda1: float = 212.55
    lambda2: float = 759.0
    lambda3: float = 123.6
    beta31: float = 0.0
    beta32: float = 0.0
    beta33: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise DomainError(f"{f.name} must be a finite number, got {v!r}")
        for name in ("mu1", "mu2", "mu3", "density", "lambda1", "lambda2", "lambda3"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.delta30 == 0:
            raise DomainError("delta30 must be non-zero")
        if not self.model_valid:
            warnings.warn(
                "couplings mu2, mu3 (over mu1) do not exceed 10|delta30|; "
                "the large-detuning reduction is only approximate",
                ModelValidityWarning, stacklevel=3)

    @property
    def model_valid(self):
        return min(self.mu2, self.mu3) / self.mu1 > 10 * abs(self.delta30)

    @property
    def coupling_ratio(self):
        return self.mu2 / self.mu3

    @property
    def kappa0(self):
        """Coherent gain scale (density/2) sqrt(mu2 mu3) / delta30, signed."""
        return 0.5 * self.density * math.sqrt(self.mu2 * self.mu3) / self.delta30

    @property
    def delta_k(self):
        return self.dk_over_density * self.density

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class FieldPoint:
    """Photon fluxes of pump, idler and generated field plus the relative phase."""
    eta1: float
    eta2: float
    eta3: float
    phi: float = 0.0

    def __post_init__(self):
        for name in ("eta1", "eta2", "eta3"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"{name} must be finite and non-negative")


@dataclass(frozen=True)
class DressedState:
    lam: float
    c1: float
    c2: float

    @property
    def rho12(self):
        return abs(self.c1 * self.c2)


KR_COUPLINGS = dict(mu1=1.8e-16, mu2=3.507e-2, mu3=0.441e-2,
                    beta21=3.7e-17, beta22=2.2e-17, beta23=6.4e-17)


def kr_preset(density=1e13, detuning_ratio=20.0, detuning_sign=-1.0):
    """Krypton ladder. ``delta30`` is fixed by |mu2 / (2 mu1 delta30)| = detuning_ratio.

    The default negative sign keeps the refraction denominator a0 + a1 J away
    from zero over the conversion range.
    """
    c = KR_COUPLINGS
    delta30 = detuning_sign * c["mu2"] / (2.0 * c["mu1"] * detuning_ratio)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ModelValidityWarning)
        return AtomicParams(delta30=delta30, density=density,
                            dk_over_density=4.8e-17, **c)


def rabi_two_photon(p, eta1):
    """Two-photon Rabi frequency mu1 * eta1."""
    if np.any(np.asarray(eta1) < 0):
        raise DomainError("pump flux must be non-negative")
    return p.mu1 * eta1


def rabi_single_photon(mu, eta):
    """Single-photon Rabi frequency sqrt(mu * eta)."""
    if np.any(np.asarray(eta) < 0):
        raise DomainError("flux must be non-negative")
    return np.sqrt(mu * eta)


def detuning(p, n, stark_shift, eta):
    """Dynamic detuning of level ``n`` (2 or 3): static detuning, external
    Stark shift and the field-induced shifts."""
    if n == 2:
        base, b = 0.0, (p.beta21, p.beta22, p.beta23)
    elif n == 3:
        base, b = p.delta30, (p.beta31, p.beta32, p.beta33)
    else:
        raise DomainError("level index must be 2 or 3")
    return base + stark_shift + b[0] * eta.eta1 + b[1] * eta.eta2 + b[2] * eta.eta3


def eigen_cubic_coefficients(d2, d3, om1, om2, om3, phi):
    """Monic coefficients (a, b, c) of lam^3 + a lam^2 + b lam + c."""
    a = d2 + d3
    b = d2 * d3 - (om1 ** 2 + om2 ** 2 + om3 ** 2)
    c = -om1 ** 2 * d3 - om3 ** 2 * d2 + 2.0 * om1 * om2 * om3 * math.cos(phi)
    return a, b, c


def _polish(x, a, b, c):
    f = ((x + a) * x + b) * x + c
    for _ in range(3):
        df = (3.0 * x + 2.0 * a) * x + b
        if df == 0:
            break
        xn = x - f / df
        fn = ((xn + a) * xn + b) * xn + c
        if abs(fn) >= abs(f):
            break
        x, f = xn, fn
    return x


def solve_monic_cubic(a, b, c):
    """Real roots of a monic cubic with three real roots, ascending."""
    shift = a / 3.0
    pp = b - a * a / 3.0
    qq = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    if pp < 0:
        r = 2.0 * math.sqrt(-pp / 3.0)
        arg = 3.0 * qq / (pp * r)
        theta = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        t = [r * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]
    else:
        t = [-math.copysign(abs(qq) ** (1.0 / 3.0), qq)] * 3
    roots = sorted(_polish(ti - shift, a, b, c) for ti in t)
    return np.array(roots)


def eigenvalue_cubic(d2, d3, om1, om2, om3, phi):
    """Three real eigenvalues of the interaction Hamiltonian, ascending."""
    for v in (d2, d3, om1, om2, om3, phi):
        if not math.isfinite(v):
            raise DomainError("eigenvalue_cubic needs finite inputs")
    return solve_monic_cubic(*eigen_cubic_coefficients(d2, d3, om1, om2, om3, phi))


def branch_eigenvalue(d2, om1, upper=True):
    """Eigenvalue of the two-level block [[0, -om1], [-om1, -d2]], written to
    avoid cancellation."""
    root = math.hypot(d2, 2.0 * om1)
    if upper:
        return 2.0 * om1 * om1 / (d2 + root) if d2 > 0 else 0.5 * (root - d2)
    return -2.0 * om1 * om1 / (root - d2) if d2 < 0 else -0.5 * (root + d2)


def branch_state(d2, om1, upper=True):
    """Normalised eigenvector (c1, c2) on the given branch, sign chosen so c1 >= 0."""
    if om1 < 0:
        raise DomainError("two-photon Rabi frequency must be non-negative")
    if om1 == 0:
        if d2 == 0:
            raise DegenerateStateError("levels degenerate with zero coupling")
        in_ground = (d2 > 0) == upper
        return DressedState(branch_eigenvalue(d2, 0.0, upper),
                            1.0 if in_ground else 0.0, 0.0 if in_ground else -1.0)
    lam = branch_eigenvalue(d2, om1, upper)
    norm = math.hypot(lam, om1)
    return DressedState(lam, om1 / norm, -lam / norm)


def dressed_state(d2, om1, branch="upper"):
    """Adiabatic state connected to the ground state.

    Zero coupling with ``d2 <= 0`` has no adiabatic connection on the upper
    branch and raises.
    """
    if not (math.isfinite(d2) and math.isfinite(om1)):
        raise DomainError("dressed_state needs finite inputs")
    upper = branch == "upper"
    if branch not in ("upper", "lower"):
        raise DomainError("branch must be 'upper' or 'lower'")
    if om1 == 0 and (d2 <= 0 if upper else d2 >= 0):
        raise DegenerateStateError("zero coupling: adiabatic state not connected to the ground state")
    return branch_state(d2, om1, upper)
