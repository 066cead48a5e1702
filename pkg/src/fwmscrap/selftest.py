"""Fast invariant checks for every module, used by ``fwmscrap selftest``."""

import math
import time

import numpy as np
from scipy.integrate import quad

from . import experiments as ex
from .core import branch_state, eigenvalue_cubic
from .phasematch import phase_match_required_dk, window_edges
from .propagation import (PropagationCoefficients, PropagationProblem, canonical_ode_oracle,
                          coefficients, implicit_integral_oracle, plateau_distance, solve)
from .scrap import HALF_SCRAP, adiabatic_trajectory, tdse_oracle
from .smallsignal import linear_ode_oracle, small_signal_profile
from .special import complete_K, incomplete_F, incomplete_Pi, jacobi_sn_cn


def _special(rng):
    r1 = 0.0
    for p in rng.uniform(0, 0.999, 20):
        sn, cn = jacobi_sn_cn(rng.uniform(-10, 10, 100), p)
        r1 = max(r1, float(np.max(np.abs(sn ** 2 + cn ** 2 - 1))))
    r2 = abs(complete_K(0.0) - math.pi / 2)
    r3 = 0.0
    for g, m in zip(rng.uniform(0, 1.5, 5), rng.uniform(0, 0.95, 5)):
        ref = quad(lambda t: 1 / math.sqrt(1 - (m * math.sin(t)) ** 2), 0, g, epsabs=0, epsrel=1e-13)[0]
        r3 = max(r3, abs(incomplete_F(g, m) - ref), abs(incomplete_Pi(g, 0.0, m) - incomplete_F(g, m)))
    return max(r1, r2, r3), 1e-9


def _core(rng):
    worst = 0.0
    for _ in range(20):
        d2, d3 = rng.uniform(-3, 3, 2)
        o1, o2, o3 = rng.uniform(0.1, 2, 3)
        phi = rng.uniform(0, 2 * math.pi)
        e = np.exp(1j * phi)
        h = np.array([[0, -o1, -o3], [-o1, -d2, -o2 * e], [-o3, -o2 * np.conj(e), -d3]])
        lam = eigenvalue_cubic(d2, d3, o1, o2, o3, phi)
        worst = max(worst, float(np.max(np.abs(lam - np.linalg.eigvalsh(h)))))
        st = branch_state(d2, o1, True)
        worst = max(worst, abs(st.c1 ** 2 + st.c2 ** 2 - 1))
    return worst, 1e-10


def _scrap(rng):
    grid = np.linspace(-4, 4, 401)
    adi = adiabatic_trajectory(HALF_SCRAP, grid)
    td = tdse_oracle(HALF_SCRAP, grid)
    return max(abs(adi.rho12[-1] - 0.5), float(np.max(np.abs(adi.pop2 - td.pop2)))), 0.01


def _smallsignal(rng):
    p = ex.figure_atomic()
    z = np.linspace(0, 3 / abs(p.kappa0), 50)
    worst = 0.0
    for c1sq in rng.uniform(0.2, 0.8, 3):
        dk = rng.uniform(-0.5, 0.5) * abs(p.kappa0)
        setup_k = 0.5 * p.density * math.sqrt(p.mu2 * p.mu3 * c1sq * (1 - c1sq)) / p.delta30
        dkp = dk + 0.5 * p.density * (p.mu3 * c1sq + p.mu2 * (1 - c1sq)) / p.delta30
        _, e3 = small_signal_profile(setup_k, dkp, 1.0, z)
        _, o3 = linear_ode_oracle(p, c1sq, 1 - c1sq, 1.0, z, dk=dk)
        worst = max(worst, float(np.max(np.abs(e3 - o3)) / max(np.max(e3), 1.0)))
    return worst, 1e-8


def _propagation(rng):
    worst = 0.0
    for _ in range(3):
        c = PropagationCoefficients(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0.01,
                                    root_method="exact")
        z = np.linspace(0, 0.95 * plateau_distance(c), 12)[1:]
        xo = implicit_integral_oracle(c).x_of_z(z)
        worst = max(worst, float(np.max(np.abs(solve(c, z) - xo) / xo)))
    p = ex.figure_atomic()
    eta10 = 0.01 * abs(p.delta30) / p.mu1
    q = phase_match_required_dk(p, 0.0, eta10, "max-coherence")
    prob = PropagationProblem(p, eta10, 0.01 * eta10, 0.0, q, 1e-12 * eta10)
    kp = prob.coefficients("manley-rowe").kappa_prime
    traj = canonical_ode_oracle(prob, np.linspace(0, 3, 31)[1:] / kp)
    worst = max(worst, max(traj.max_residual().values()))
    return worst, 1e-4


def _phasematch(rng):
    worst = -math.inf
    for m, d in zip(rng.uniform(0.01, 50, 2000), rng.uniform(-20, 20, 2000)):
        y0, y1, y2, y4 = window_edges(m, d)
        worst = max(worst, y4 - y1, y1 - y2 + 1e-15, y2)
    p = ex.figure_atomic()
    eta10 = 0.01 * abs(p.delta30) / p.mu1
    q = phase_match_required_dk(p, 0.0, eta10, "max-coherence")
    b1 = coefficients(p, eta10, 0.0, 0.0, q).b1
    return max(0.0, worst) + abs(b1), 1e-10


def _experiments(rng):
    res = ex.grid_simulate(ex.figure_preset("fig7-t0").with_(nz=40, ntau=40))
    bad = float(np.sum(res.W < 0) + np.sum(res.W > 1) + np.sum(np.nan_to_num(res.J) < 0))
    return bad + abs(res.W[0]), 1e-12


SUITES = [("special-fn", _special), ("core-model", _core), ("scrap", _scrap),
          ("smallsignal", _smallsignal), ("propagation", _propagation),
          ("phasematch", _phasematch), ("experiments", _experiments)]


def run_selftest(seed=0):
    """Run all suites; returns (report lines, overall pass)."""
    rng = np.random.default_rng(seed)
    lines, ok = [], True
    for name, fn in SUITES:
        t0 = time.perf_counter()
        try:
            resid, tol = fn(rng)
            passed = bool(resid <= tol)
            msg = f"max residual {resid:.3e} (tol {tol:.0e})"
        except Exception as exc:  # report and keep going
            passed, msg = False, f"{type(exc).__name__}: {exc}"
        ok &= passed
        lines.append(f"{'PASS' if passed else 'FAIL'} {name}: {msg} [{time.perf_counter() - t0:.2f} s]")
    return lines, ok
