"""Pulse envelopes and SCRAP / half-SCRAP preparation of the two-photon coherence.

Times are in units of the pump duration T1, frequencies in units of the peak
two-photon Rabi frequency. ``omega_t1`` converts between the two.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .core import branch_state
from .errors import ConvergenceError, DegenerateStateError, DomainError

ACTIVE_COUPLING = 1e-3


@dataclass(frozen=True)
class GaussianPulse:
    peak: float
    center: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise DomainError("pulse width must be positive")

    def __call__(self, tau):
        return self.peak * np.exp(-((np.asarray(tau, dtype=float) - self.center) / self.width) ** 2)

    def derivative(self, tau):
        tau = np.asarray(tau, dtype=float)
        return -2.0 * (tau - self.center) / self.width ** 2 * self(tau)


@dataclass(frozen=True)
class PulseConfig:
    """Stark, pump and idler pulses in normalised units.

    ``stark_peak`` and ``static_detuning`` are in units of the peak two-photon
    Rabi frequency; ``idler_ratio`` is the idler-to-pump peak flux ratio; the
    ``beta*_ratio`` fields are Stark coefficients over mu1; ``pump_peak`` scales
    the pump envelope (0 switches the pump off).
    """
    omega_t1: float = 100.0
    stark_peak: float = 2.0
    stark_center: float = -1.5
    stark_width: float = 1.0
    static_detuning: float = 0.0
    idler_ratio: float = 0.005
    idler_center: float = -1.0
    idler_width: float = 0.5
    pump_width: float = 1.0
    pump_peak: float = 1.0
    beta21_ratio: float = 0.2
    beta22_ratio: float = 2.2 / 18.0

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite")
        if self.omega_t1 <= 0:
            raise DomainError("omega_t1 must be positive")
        for name in ("pump_width", "stark_width", "idler_width"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.pump_peak < 0:
            raise DomainError("pump_peak must be non-negative")
        if self.idler_ratio < 0:
            raise DomainError("idler_ratio must be non-negative")

    @property
    def pump(self):
        return GaussianPulse(self.pump_peak, 0.0, self.pump_width)

    @property
    def idler(self):
        return GaussianPulse(self.idler_ratio, self.idler_center, self.idler_width)

    @property
    def stark(self):
        return GaussianPulse(self.stark_peak, self.stark_center, self.stark_width)

    def detuning(self, tau):
        """Two-photon detuning over the peak Rabi frequency."""
        return (self.static_detuning + self.stark(tau) + self.beta21_ratio * self.pump(tau)
                + self.beta22_ratio * self.idler(tau))

    def detuning_rate(self, tau):
        return (self.stark.derivative(tau) + self.beta21_ratio * self.pump.derivative(tau)
                + self.beta22_ratio * self.idler.derivative(tau))

    def rabi(self, tau):
        return self.pump(tau)

    def with_(self, **changes):
        return replace(self, **changes)


HALF_SCRAP = PulseConfig()
FULL_SCRAP = PulseConfig(stark_peak=10.0, stark_center=-1.7, stark_width=2.0,
                         static_detuning=-5.0, idler_center=0.0)


def gaussian_envelope(peak, center, width, tau):
    return GaussianPulse(peak, center, width)(tau)


def default_grid(n=2001, start=-4.0, stop=4.0):
    return np.linspace(start, stop, n)


@dataclass
class PreparationTrajectory:
    tau: np.ndarray
    detuning: np.ndarray
    rabi: np.ndarray
    pop1: np.ndarray
    pop2: np.ndarray
    rho12: np.ndarray
    margin: np.ndarray
    upper: np.ndarray
    flagged: np.ndarray

    def as_columns(self):
        return np.column_stack([self.tau, self.detuning, self.rabi, self.pop1,
                                self.pop2, self.rho12, self.margin])


def _check_grid(grid):
    tau = np.asarray(grid, dtype=float)
    if tau.ndim != 1 or tau.size < 2 or not np.all(np.diff(tau) > 0):
        raise DomainError("time grid must be a strictly increasing 1-D array")
    return tau


def local_margin(cfg, tau):
    """gap / |d theta / d tau| per sample, in consistent units."""
    d2, om = cfg.detuning(tau), cfg.rabi(tau)
    dd2, dom = cfg.detuning_rate(tau), cfg.pump.derivative(tau)
    denom = d2 ** 2 + 4.0 * om ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        theta_rate = np.abs(om * dd2 - dom * d2) / denom
        margin = cfg.omega_t1 * np.sqrt(denom) / theta_rate
    return np.where(theta_rate == 0, np.inf, margin)


def adiabaticity_margin(cfg, grid=None):
    """Smallest local margin over samples where the pump coupling is active."""
    tau = default_grid() if grid is None else _check_grid(grid)
    active = cfg.rabi(tau) >= ACTIVE_COUPLING
    if not active.any():
        return math.inf
    return float(np.min(local_margin(cfg, tau)[active]))


def adiabatic_trajectory(cfg, grid=None):
    """Populations and coherence of the adiabatic state that starts in |1>.

    The branch is kept through crossings where the coupling is active and
    switched at sign changes of the detuning where it is not (diabatic passage).
    """
    tau = default_grid() if grid is None else _check_grid(grid)
    d2, om = cfg.detuning(tau), cfg.rabi(tau)
    n = tau.size
    pop1, pop2, rho = (np.full(n, np.nan) for _ in range(3))
    upper = np.zeros(n, dtype=bool)
    flagged = np.zeros(n, dtype=bool)

    try:
        up = branch_state(d2[0], om[0], True).c1 ** 2 >= branch_state(d2[0], om[0], False).c1 ** 2
    except DegenerateStateError:
        up = True
    for i in range(n):
        if i > 0 and d2[i - 1] * d2[i] < 0:
            frac = d2[i - 1] / (d2[i - 1] - d2[i])
            om_cross = om[i - 1] + frac * (om[i] - om[i - 1])
            if om_cross <= ACTIVE_COUPLING:
                up = not up
        upper[i] = up
        try:
            st = branch_state(d2[i], om[i], up)
        except DegenerateStateError:
            flagged[i] = True
            continue
        pop1[i], pop2[i], rho[i] = st.c1 ** 2, st.c2 ** 2, st.rho12
    return PreparationTrajectory(tau, d2, om, pop1, pop2, rho, local_margin(cfg, tau), upper, flagged)


def _integrate(cfg, tau, rtol):
    w = cfg.omega_t1
    pump, stark, idler = cfg.pump, cfg.stark, cfg.idler
    b21, b22, static = cfg.beta21_ratio, cfg.beta22_ratio, cfg.static_detuning

    def rhs(t, y):
        om = pump.peak * math.exp(-((t - pump.center) / pump.width) ** 2)
        d2 = (static + stark.peak * math.exp(-((t - stark.center) / stark.width) ** 2)
              + b21 * om + b22 * idler.peak * math.exp(-((t - idler.center) / idler.width) ** 2))
        c1, c2 = complex(y[0], y[1]), complex(y[2], y[3])
        # i dc/dt = w H c with H = [[0, -om], [-om, -d2]]
        g1 = 1j * w * om * c2
        g2 = 1j * w * (om * c1 + d2 * c2)
        return [g1.real, g1.imag, g2.real, g2.imag]

    sol = solve_ivp(rhs, (tau[0], tau[-1]), [1.0, 0.0, 0.0, 0.0], method="DOP853",
                    t_eval=tau, rtol=rtol, atol=1e-2 * rtol)
    if not sol.success:
        raise ConvergenceError(f"TDSE integration failed: {sol.message}")
    return sol.y[0] + 1j * sol.y[1], sol.y[2] + 1j * sol.y[3]


def tdse_oracle(cfg, grid=None, tol=1e-6, rtol=1e-12):
    """Direct integration of the two-level Schrodinger equation from |1>.

    The run is repeated at a 100x looser tolerance; final populations of the
    two runs must agree within ``tol``.
    """
    tau = default_grid() if grid is None else _check_grid(grid)
    d2, om = cfg.detuning(tau), cfg.rabi(tau)
    c1, c2 = _integrate(cfg, tau, rtol)
    r1, r2 = _integrate(cfg, tau, 100 * rtol)
    spread = max(abs(abs(c1[-1]) ** 2 - abs(r1[-1]) ** 2), abs(abs(c2[-1]) ** 2 - abs(r2[-1]) ** 2))
    if spread > tol:
        raise ConvergenceError(f"TDSE tolerance check failed (spread {spread:.2e})")
    n = tau.size
    return PreparationTrajectory(tau, d2, om, np.abs(c1) ** 2, np.abs(c2) ** 2,
                                 np.abs(c1 * np.conj(c2)), local_margin(cfg, tau),
                                 np.ones(n, dtype=bool), np.zeros(n, dtype=bool))
