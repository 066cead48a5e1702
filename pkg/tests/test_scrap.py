import math

import numpy as np
import pytest

from fwmscrap.errors import ConvergenceError, DomainError
from fwmscrap.scrap import (FULL_SCRAP, HALF_SCRAP, PulseConfig, adiabatic_trajectory,
                            adiabaticity_margin, default_grid, gaussian_envelope, tdse_oracle)

GRID = default_grid()


def reflected(cfg):
    return cfg.with_(stark_center=-cfg.stark_center, idler_center=-cfg.idler_center)


def test_gaussian_envelope():
    assert gaussian_envelope(2.0, 0.5, 1.5, 0.5) == 2.0
    for sign in (-1, 1):
        assert gaussian_envelope(2.0, 0.5, 1.5, 0.5 + sign * 1.5) == pytest.approx(2.0 / math.e, rel=1e-15)
    d = np.linspace(0, 3, 7)
    assert np.array_equal(gaussian_envelope(1.0, 0.3, 0.7, 0.3 + d), gaussian_envelope(1.0, 0.3, 0.7, 0.3 - d))
    with pytest.raises(DomainError):
        gaussian_envelope(1.0, 0.0, 0.0, 0.0)


def test_half_scrap_leaves_maximum_coherence():
    adi = adiabatic_trajectory(HALF_SCRAP, GRID)
    late = GRID >= 3.0
    assert np.all(np.abs(adi.rho12[late] - 0.5) <= 0.005)


def test_full_scrap_transfers_population():
    adi = adiabatic_trajectory(FULL_SCRAP, GRID)
    assert abs(adi.pop2[-1] - 1) <= 0.01
    assert abs(np.nanmax(adi.rho12) - 0.5) <= 0.01


def test_trajectory_invariants():
    for cfg in (HALF_SCRAP, FULL_SCRAP):
        adi = adiabatic_trajectory(cfg, GRID)
        assert np.max(np.abs(adi.pop1 + adi.pop2 - 1)) < 1e-10
        assert np.all((adi.rho12 >= 0) & (adi.rho12 <= 0.5 + 1e-15))
        assert not adi.flagged.any()


def test_coherence_peak_coincides_with_equal_populations():
    for cfg in (HALF_SCRAP, FULL_SCRAP):
        adi = adiabatic_trajectory(cfg, GRID)
        assert np.argmax(adi.rho12) == np.argmin(np.abs(adi.pop1 - adi.pop2))


def test_no_pump_stays_in_ground_state():
    cfg = HALF_SCRAP.with_(pump_peak=0.0)
    adi = adiabatic_trajectory(cfg, GRID)
    assert np.all(adi.pop1 == 1.0)
    td = tdse_oracle(cfg, GRID)
    assert np.max(np.abs(td.pop1 - 1.0)) < 1e-14


def test_degenerate_samples_are_flagged():
    cfg = HALF_SCRAP.with_(pump_peak=0.0, stark_peak=0.0, beta22_ratio=0.0)
    adi = adiabatic_trajectory(cfg, GRID)
    assert adi.flagged.all() and np.isnan(adi.pop1).all()


def test_time_reversal_symmetry():
    for cfg in (HALF_SCRAP, HALF_SCRAP.with_(idler_ratio=0.3)):
        fwd = adiabatic_trajectory(cfg, GRID)
        back = adiabatic_trajectory(reflected(cfg), GRID)
        for a, b in ((fwd.pop1, back.pop1), (fwd.rho12, back.rho12), (fwd.detuning, back.detuning)):
            assert np.allclose(a, b[::-1], atol=1e-12, rtol=0)


def test_tdse_conserves_norm():
    for cfg in (HALF_SCRAP, FULL_SCRAP):
        td = tdse_oracle(cfg, GRID)
        assert np.max(np.abs(td.pop1 + td.pop2 - 1)) < 1e-9


def test_tdse_agrees_with_adiabatic_when_margin_large():
    for cfg in (HALF_SCRAP, HALF_SCRAP.with_(omega_t1=50.0), FULL_SCRAP):
        assert adiabaticity_margin(cfg, GRID) > 10
        adi, td = adiabatic_trajectory(cfg, GRID), tdse_oracle(cfg, GRID)
        assert np.max(np.abs(adi.pop2 - td.pop2)) < 0.01
        assert np.max(np.abs(adi.rho12 - td.rho12)) < 0.01


def test_tdse_detects_diabatic_passage():
    cfg = FULL_SCRAP.with_(omega_t1=0.1)
    assert adiabaticity_margin(cfg, GRID) < 1
    adi, td = adiabatic_trajectory(cfg, GRID), tdse_oracle(cfg, GRID)
    assert adi.pop2[-1] > 0.99 and td.pop2[-1] < 0.1


def test_tdse_refinement_failure_is_reported():
    with pytest.raises(ConvergenceError):
        tdse_oracle(FULL_SCRAP, GRID, tol=1e-16, rtol=1e-6)


def test_margin_examples_and_scaling():
    assert adiabaticity_margin(HALF_SCRAP) > 10
    assert adiabaticity_margin(HALF_SCRAP.with_(omega_t1=0.1)) < 1
    cfg = FULL_SCRAP
    slow = cfg.with_(omega_t1=2 * cfg.omega_t1, pump_width=2 * cfg.pump_width,
                     stark_width=2 * cfg.stark_width, stark_center=2 * cfg.stark_center,
                     idler_width=2 * cfg.idler_width, idler_center=2 * cfg.idler_center)
    m1, m2 = adiabaticity_margin(cfg, GRID), adiabaticity_margin(slow, 2 * GRID)
    assert m2 > m1
    assert m2 == pytest.approx(4 * m1, rel=1e-9)


def test_config_validation():
    with pytest.raises(DomainError):
        PulseConfig(pump_width=0.0)
    with pytest.raises(DomainError):
        PulseConfig(idler_ratio=-1.0)
    with pytest.raises(DomainError):
        PulseConfig(pump_peak=-1.0)
    with pytest.raises(DomainError):
        adiabatic_trajectory(HALF_SCRAP, [0.0, 0.0, 1.0])
