import math

import numpy as np
import pytest

from fwmscrap.core import AtomicParams, dressed_state, kr_preset
from fwmscrap.errors import DomainError, SingularConfigurationError
from fwmscrap.experiments import figure_atomic, figure_preset, slice_inputs
from fwmscrap.phasematch import phase_match_required_dk
from fwmscrap.smallsignal import (SmallSignalSetup, dkprime_total, kappa0, kappa_coherent,
                                  kappa_far_detuned, kappa_stark_limited, linear_ode_oracle,
                                  oscillation_bound, small_signal_profile, undepleted_coherence_solution,
                                  undepleted_pump_rates, undepleted_pump_solution)

KR = kr_preset()


def test_kappa_examples():
    assert kappa_coherent(KR, 0.0) == 0.0
    ref = 0.5 * 1e13 * math.sqrt(3.507e-2 * 0.441e-2) * 0.5 / KR.delta30
    assert kappa_coherent(KR, 0.5) == pytest.approx(ref, rel=1e-14)
    p = AtomicParams(1.0, 50.0, 50.0, 0, 0, 0, 2.0, 3.0)
    assert kappa0(p) == pytest.approx(1.5 * 50.0 / 2.0, rel=1e-15)
    assert kappa0(KR) == pytest.approx(2 * ref, rel=1e-14)


def test_dkprime_examples():
    d3 = KR.delta30
    assert dkprime_total(KR, 1.0, 0.0) == pytest.approx(KR.delta_k + 0.5e13 * KR.mu3 / d3, rel=1e-14)
    ref = 4.8e-17 * 1e13 + 0.5e13 * (0.441e-2 + 3.507e-2) * 0.5 / d3
    assert dkprime_total(KR, 0.5, 0.5) == pytest.approx(ref, rel=1e-14)
    p = AtomicParams(1.0, 50.0, 50.0, 0, 0, 0, 2.0, 3.0, dk_over_density=0.1)
    vals = [dkprime_total(p, c, 1 - c) for c in np.linspace(0, 1, 11)]
    assert np.ptp(vals) <= 1e-14 * abs(vals[0])


def test_upper_detuning_must_be_nonzero():
    with pytest.raises(SingularConfigurationError):
        kappa_coherent(KR, 0.5, delta3=0.0)
    with pytest.raises(SingularConfigurationError):
        dkprime_total(KR, 0.5, 0.5, delta3=0.0)
    with pytest.raises(DomainError):
        KR.with_(delta30=0.0)


def test_profile_examples():
    e2, e3 = small_signal_profile(2.0, 1.0, 3.0, 0.0)
    assert (e2, e3) == (3.0, 0.0)
    z = np.linspace(0, 2, 21)
    _, e3 = small_signal_profile(1.5, 0.0, 2.0, z)
    assert np.allclose(e3, 2.0 * np.sinh(1.5 * z) ** 2, rtol=1e-14, atol=0)
    with pytest.raises(DomainError):
        small_signal_profile(1.0, 0.0, 1.0, -1.0)
    with pytest.raises(SingularConfigurationError):
        small_signal_profile(0.0, 0.0, 1.0, 1.0)


def test_small_signal_photon_balance():
    z = np.linspace(0, 5, 51)
    for dkp in (0.0, 1.0, 1.999, 2.0, 3.0, 10.0):
        e2, e3 = small_signal_profile(1.0, dkp, 0.7, z)
        assert np.max(np.abs((e2 - e3) - 0.7)) < 1e-12 * max(1.0, np.max(e2))


def test_razor_edge_is_continuous():
    z = np.linspace(0, 3, 31)
    edge = small_signal_profile(1.0, 2.0, 1.0, z)[1]
    for dkp in (2.0 * (1 - 1e-7), 2.0 * (1 + 1e-7)):
        assert np.max(np.abs(small_signal_profile(1.0, dkp, 1.0, z)[1] - edge)) < 1e-5 * np.max(edge)


def test_closed_form_satisfies_linear_equations():
    rng = np.random.default_rng(20)
    p = figure_atomic()
    kz = abs(p.kappa0)
    for c1sq in (0.5, 0.2, 0.9):
        for dk in (0.0, 0.6 * kz, -2.5 * kz, 4.0 * kz):
            setup = SmallSignalSetup(p, c1sq, 1 - c1sq, 1.0, dk=dk)
            z = np.sort(rng.uniform(0, 4, 100)) / kz
            e2, e3 = undepleted_coherence_solution(setup, z)
            o2, o3 = linear_ode_oracle(p, c1sq, 1 - c1sq, 1.0, z, dk=dk)
            assert np.max(np.abs(e3 - o3) / np.maximum(e3, 1e-300)) < 1e-6
            assert np.max(np.abs(e2 - o2) / e2) < 1e-6


def test_gain_oscillation_dichotomy():
    z = np.linspace(0, 40, 40001)
    for dkp in (0.0, 1.0, 1.9):
        e3 = small_signal_profile(1.0, dkp, 1.0, z)[1]
        assert np.all(np.diff(e3) > 0) and e3[-1] > 1e6
        assert oscillation_bound(1.0, dkp, 1.0) == math.inf
    for dkp in (2.1, 3.0, 10.0):
        e3 = small_signal_profile(1.0, dkp, 1.0, z)[1]
        bound = oscillation_bound(1.0, dkp, 1.0)
        assert np.max(e3) <= bound * (1 + 1e-12)
        assert np.max(e3) == pytest.approx(bound, rel=1e-6)


def test_maximum_coherence_advantage():
    p = AtomicParams(1.0, 40.0, 40.0, 0, 0, 0, 2.0, 1.0)

    def amplitude(c1sq):
        rho = math.sqrt(c1sq * (1 - c1sq))
        return oscillation_bound(kappa_coherent(p, rho), dkprime_total(p, c1sq, 1 - c1sq, dk=0.0), 1.0)

    c1_max = 0.5 * (1 + math.sqrt(1 - 4 * 0.49 ** 2))
    assert amplitude(c1_max) > 10 * amplitude(0.99)
    # closed form of the ratio: rho^2 / (c1^2 - c2^2)^2
    for c1 in (c1_max, 0.99, 0.8):
        rho2 = c1 * (1 - c1)
        assert amplitude(c1) == pytest.approx(4 * rho2 / (2 * c1 - 1) ** 2, rel=1e-12)


def test_undepleted_pump_reduces_to_undepleted_coherence():
    rng = np.random.default_rng(21)
    p = figure_atomic()
    for _ in range(30):
        eta10 = rng.uniform(0.001, 0.05) * abs(p.delta30) / p.mu1
        delta2 = rng.uniform(-3, 3) * p.mu1 * eta10
        dk = rng.uniform(-3, 3) * abs(p.kappa0)
        for branch in ("upper", "lower"):
            kappa, dkp = undepleted_pump_rates(p, eta10, delta2, dk, branch)
            st = dressed_state(delta2 + p.beta21 * eta10, p.mu1 * eta10, branch)
            ref_k = abs(kappa_coherent(p, st.rho12))
            ref_d = dkprime_total(p, st.c1 ** 2, st.c2 ** 2, dk=dk)
            assert abs(kappa - ref_k) <= 1e-8 * ref_k
            assert abs(dkp - ref_d) <= 1e-8 * max(abs(ref_d), ref_k)
            z = np.linspace(0, 3 / ref_k, 20)
            a = undepleted_pump_solution(p, eta10, 1e-3 * eta10, delta2, z, dk, branch)
            b = small_signal_profile(ref_k, ref_d, 1e-3 * eta10, z)[1]
            assert np.max(np.abs(a - b)) <= 1e-8 * np.max(b)


def test_undepleted_pump_boundary_and_warning():
    p = figure_atomic()
    eta10 = 0.01 * abs(p.delta30) / p.mu1
    assert undepleted_pump_solution(p, eta10, 0.01 * eta10, 0.0, 0.0) == 0.0
    with pytest.warns(RuntimeWarning):
        undepleted_pump_solution(p, eta10, 0.5 * eta10, 0.0, 1.0)
    with pytest.raises(DomainError):
        undepleted_pump_rates(p, 0.0, 0.0)


def test_phase_matched_rate_at_maximum_coherence():
    p = figure_atomic()
    eta10 = 0.01 * abs(p.delta30) / p.mu1
    q = phase_match_required_dk(p, 0.0, eta10, "max-coherence")
    kappa, dkp = undepleted_pump_rates(p, eta10, 0.0, 0.5 * p.density * q)
    ref = abs(p.kappa0) * p.mu1 / math.hypot(p.beta21, 2 * p.mu1)
    assert kappa == pytest.approx(ref, rel=1e-12)
    assert abs(kappa_stark_limited(p)) == pytest.approx(ref, rel=1e-12)
    assert abs(dkp) < 1e-10 * kappa


def test_far_detuned_rate_is_much_smaller_early():
    cfg = figure_preset("fig4")
    p = cfg.atomic
    tau = np.array([-3.0])
    eta10, _, delta2 = (float(v[0]) for v in slice_inputs(cfg, tau))
    k1 = abs(kappa_far_detuned(p, eta10, delta2))
    k2 = abs(kappa_stark_limited(p))
    assert k2 / k1 > 10
    assert undepleted_pump_rates(p, eta10, delta2)[0] == pytest.approx(k1, rel=1e-3)


def test_required_mismatch_limits():
    p = AtomicParams(1.0, 40.0, 20.0, 0.0, 0.0, 0.0, 2.0, 1.0)
    eta10 = 0.01
    far = phase_match_required_dk(p, 1e7 * p.mu1 * eta10, eta10)
    assert far == pytest.approx(-p.mu3 / p.delta30, rel=1e-6)
    assert phase_match_required_dk(p, 0.0, eta10, "early") == -p.mu3 / p.delta30
    near = phase_match_required_dk(p, 0.0, eta10)
    assert near == pytest.approx(-(p.mu3 + p.mu2) / (2 * p.delta30), rel=1e-15)
    assert phase_match_required_dk(p, 0.0, eta10, "max-coherence") == pytest.approx(near, rel=1e-15)
