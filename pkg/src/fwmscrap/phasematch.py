"""Phase-matching requirement and the linear / Kerr compensation windows."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def stark_ratio(p, delta2, eta10):
    """d2 = (delta2 + beta21 eta10) / (2 mu1 eta10)."""
    if eta10 <= 0:
        raise DomainError("pump flux must be positive")
    return (delta2 + p.beta21 * eta10) / (2.0 * p.mu1 * eta10)


def phase_match_required_dk(p, delta2, eta10, limit=None):
    """2 dk / density that cancels linear refraction of the dressed medium.

    ``limit='early'`` gives the far-detuned value, ``limit='max-coherence'``
    drops the external detuning so only the pump Stark shift remains.
    """
    s = p.mu3 + p.mu2
    d = p.mu3 - p.mu2
    if limit == "early":
        return -p.mu3 / p.delta30
    if limit == "max-coherence":
        big_d = p.beta21
        root = math.hypot(p.beta21, 2.0 * p.mu1)
    elif limit is None:
        if eta10 <= 0:
            raise DomainError("pump flux must be positive")
        big_d = delta2 + p.beta21 * eta10
        root = math.hypot(big_d, 2.0 * p.mu1 * eta10)
    else:
        raise DomainError(f"unknown limit {limit!r}")
    return -s / (2.0 * p.delta30) - d * big_d / (2.0 * p.delta30 * root)


def crossing_angle(dk_increase, lambda_nm):
    """Idler tilt (rad) that adds ``dk_increase`` (1/cm) to the mismatch.

    Assumes unit refractive index, a small angle and that only the idler is
    tilted, so its axial wavenumber drops by k theta^2 / 2.
    """
    if dk_increase < 0:
        raise DomainError("tilting the idler can only increase the mismatch")
    k = 2.0 * math.pi / (lambda_nm * 1e-7)
    return math.sqrt(2.0 * dk_increase / k)


def tuning_parameter(p, q):
    return q * p.delta30 / math.sqrt(p.mu2 * p.mu3)


@dataclass(frozen=True)
class MatchWindows:
    y: float
    y0: float
    y1: float
    y2: float
    y3: float
    y4: float
    m: float
    d2: float
    kerr_halfwidth: float

    @property
    def linear_width(self):
        return self.y2 - self.y1

    def in_linear_window(self, y=None):
        y = self.y if y is None else y
        return self.y1 < y < self.y2


def window_edges(m, d2):
    """(y0, y1, y2, y4) for coupling ratio m and Stark ratio d2."""
    if m <= 0:
        raise DomainError("coupling ratio must be positive")
    rm = math.sqrt(m)
    g = math.sqrt(1.0 + d2 * d2)
    y0 = -(1.0 - m) / (2.0 * rm) * d2 / g - (1.0 + m) / (2.0 * rm)
    return y0, y0 - 1.0 / g, y0 + 1.0 / g, -(1.0 + m) / rm


def windows(p, delta2, eta10, q=None):
    """Window analysis at the given detuning and pump; ``q`` defaults to the
    background 2 dk / density."""
    d2 = stark_ratio(p, delta2, eta10)
    q = 2.0 * p.dk_over_density if q is None else q
    m = p.coupling_ratio
    y0, y1, y2, y4 = window_edges(m, d2)
    return MatchWindows(tuning_parameter(p, q), y0, y1, y2, 0.0, y4, m, d2,
                        2.0 * p.mu1 * p.delta30 / (p.mu2 + p.mu3))


@dataclass(frozen=True)
class JointCompensationReport:
    d2: float
    required_d2: float
    condition_holds: bool
    required_y: float
    verdict: str


def joint_compensation_check(p, delta2, eta10, tol=1e-3):
    """Whether linear and Kerr compensation can coincide at this instant."""
    m = p.coupling_ratio
    d2 = stark_ratio(p, delta2, eta10)
    target = (1.0 - m) / (2.0 * math.sqrt(m))
    scale = max(abs(target), 1.0)
    holds = abs(d2 - target) <= tol * scale
    y1 = window_edges(m, d2)[1]
    verdict = "jointly compensable at this instant (y = y1 = y4)" if holds else "not jointly compensable: impossible at this instant"
    return JointCompensationReport(d2, target, holds, y1, verdict)


def count_condition_crossings(p, delta2, eta10):
    """Sign changes of d2 - (1-m)/(2 sqrt m) along sampled (delta2, eta10) arrays."""
    m = p.coupling_ratio
    target = (1.0 - m) / (2.0 * math.sqrt(m))
    d2 = (np.asarray(delta2) + p.beta21 * np.asarray(eta10)) / (2.0 * p.mu1 * np.asarray(eta10))
    s = np.sign(d2 - target)
    return int(np.count_nonzero(s[1:] * s[:-1] < 0))
