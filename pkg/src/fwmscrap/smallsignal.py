"""Small-signal propagation: undepleted coherence and undepleted pump."""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import branch_eigenvalue
from .errors import DomainError, SingularConfigurationError

RAZOR_EDGE = 1e-8


@dataclass(frozen=True)
class SmallSignalSetup:
    """Preparation state and input idler flux for the undepleted-coherence problem."""
    params: object
    c1sq: float
    c2sq: float
    eta20: float
    delta3: float = None
    dk: float = None

    def __post_init__(self):
        if self.eta20 < 0:
            raise DomainError("eta20 must be non-negative")
        if self.c1sq < 0 or self.c2sq < 0 or abs(self.c1sq + self.c2sq - 1) > 1e-12:
            raise DomainError("c1sq and c2sq must be non-negative and sum to one")

    @property
    def rho12(self):
        return math.sqrt(self.c1sq * self.c2sq)

    @property
    def kappa(self):
        return abs(kappa_coherent(self.params, self.rho12, self.delta3))

    @property
    def dkprime(self):
        return dkprime_total(self.params, self.c1sq, self.c2sq, self.delta3, self.dk)


def _delta3(p, delta3):
    d3 = p.delta30 if delta3 is None else delta3
    if d3 == 0:
        raise SingularConfigurationError("upper-level detuning must be non-zero")
    return d3


def kappa_coherent(p, rho12, delta3=None):
    """Conversion coefficient (density/2) sqrt(mu2 mu3) rho12 / delta3 (signed)."""
    return 0.5 * p.density * math.sqrt(p.mu2 * p.mu3) * rho12 / _delta3(p, delta3)


def dkprime_total(p, c1sq, c2sq, delta3=None, dk=None):
    """Background mismatch plus the linear refraction of the prepared medium."""
    dk = p.delta_k if dk is None else dk
    return dk + 0.5 * p.density * (p.mu3 * c1sq + p.mu2 * c2sq) / _delta3(p, delta3)


def kappa0(p):
    if p.delta30 == 0:
        raise SingularConfigurationError("delta30 must be non-zero")
    return p.kappa0


def kappa_far_detuned(p, eta10, delta2):
    """Rate when the two-photon detuning dominates the coupling."""
    return p.kappa0 * p.mu1 * eta10 / delta2


def kappa_stark_limited(p):
    """Rate at maximum coherence limited by the pump-induced Stark shift."""
    return p.kappa0 * p.mu1 / math.hypot(p.beta21, 2.0 * p.mu1)


def small_signal_profile(kappa, dkprime, eta20, z):
    """(eta2, eta3) for gain ``kappa`` and total mismatch ``dkprime``."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise DomainError("z must be non-negative")
    if kappa == 0:
        raise SingularConfigurationError("zero conversion coefficient")
    r = (dkprime / (2.0 * kappa)) ** 2
    kz = abs(kappa) * z
    if abs(1.0 - r) < RAZOR_EDGE:
        eta3 = eta20 * kz ** 2
        eta2 = eta20 * (1.0 + kz ** 2)
    elif r < 1:
        g = math.sqrt(1.0 - r)
        sh = np.sinh(kz * g) ** 2
        eta3 = eta20 / (1.0 - r) * sh
        eta2 = eta20 * np.cosh(kz * g) ** 2 + eta20 * r / (1.0 - r) * sh
    else:
        g = math.sqrt(r - 1.0)
        sn = np.sin(kz * g) ** 2
        eta3 = eta20 / (r - 1.0) * sn
        eta2 = eta20 * np.cos(kz * g) ** 2 + eta20 * r / (r - 1.0) * sn
    return eta2, eta3


def undepleted_coherence_solution(setup, z):
    return small_signal_profile(setup.kappa, setup.dkprime, setup.eta20, z)


def oscillation_bound(kappa, dkprime, eta20):
    """sup_z eta3 in the mismatched regime, inf when there is gain."""
    r = (dkprime / (2.0 * kappa)) ** 2
    return math.inf if r <= 1 else eta20 / (r - 1.0)


def linear_ode_oracle(p, c1sq, c2sq, eta20, z, delta3=None, dk=None, rtol=1e-12):
    """Integrate the linear coupled-amplitude pair directly.

    A3 is the generated amplitude and B = conj(A2) the idler; each picks up its
    own refraction phase, and the two are coupled through the coherence.
    """
    d3 = _delta3(p, delta3)
    dk = p.delta_k if dk is None else dk
    half_n = 0.5 * p.density
    a2 = half_n * p.mu2 * c2sq / d3
    a3 = half_n * p.mu3 * c1sq / d3
    kap = half_n * math.sqrt(p.mu2 * p.mu3 * c1sq * c2sq) / d3
    z = np.asarray(z, dtype=float)

    def rhs(zz, y):
        a, b = complex(y[0], y[1]), complex(y[2], y[3])
        ph = complex(math.cos(dk * zz), -math.sin(dk * zz))
        da = 1j * a3 * a + 1j * kap * ph * b
        db = -1j * a2 * b - 1j * kap * ph.conjugate() * a
        return [da.real, da.imag, db.real, db.imag]

    sol = solve_ivp(rhs, (0.0, float(z.max())), [0.0, 0.0, math.sqrt(eta20), 0.0],
                    method="DOP853", t_eval=z, rtol=rtol, atol=1e-14 * max(eta20, 1e-300) ** 0.5)
    eta3 = sol.y[0] ** 2 + sol.y[1] ** 2
    eta2 = sol.y[2] ** 2 + sol.y[3] ** 2
    return eta2, eta3


def undepleted_pump_rates(p, eta10, delta2, dk=None, branch="upper"):
    """(kappa, dkprime) for a pump of flux eta10 at two-photon detuning delta2."""
    if eta10 <= 0:
        raise DomainError("pump flux must be positive")
    dk = p.delta_k if dk is None else dk
    q = 2.0 * dk / p.density
    big_d = delta2 + p.beta21 * eta10
    om = p.mu1 * eta10
    lam = branch_eigenvalue(big_d, om, branch == "upper")
    denom = 2.0 * lam + big_d
    a0 = p.delta30 * denom
    a1_lin = -q * p.delta30 * denom - p.mu2 * lam - p.mu3 * (lam + big_d)
    kappa = abs(p.kappa0 * om / denom)
    return kappa, -0.5 * p.density * a1_lin / a0


def undepleted_pump_solution(p, eta10, eta20, delta2, z, dk=None, branch="upper"):
    """Generated flux at distance z while pump and coherence are undepleted."""
    if eta20 > 0.1 * eta10:
        warnings.warn("idler is not small compared with the pump", RuntimeWarning, stacklevel=2)
    kappa, dkp = undepleted_pump_rates(p, eta10, delta2, dk, branch)
    return small_signal_profile(kappa, dkp, eta20, z)[1]
