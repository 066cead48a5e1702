import math

import numpy as np
import pytest

from fwmscrap import experiments as ex
from fwmscrap.errors import ConfigError, SingularConfigurationError
from fwmscrap.scrap import PulseConfig

GRID_PRESETS = ("fig4", "fig6", "fig7-t0", "fig7-tm1", "fig7-tp1")


@pytest.fixture(scope="module")
def grids():
    return {name: ex.grid_simulate(ex.figure_preset(name)) for name in GRID_PRESETS}


def test_preset_values():
    assert ex.figure_preset("fig4").pulses.idler_center == -1.0
    fig6 = ex.figure_preset("fig6").pulses
    assert fig6.static_detuning == -5.0 and fig6.stark_peak == 10.0
    dotted = ex.figure_preset("fig5-dotted")
    assert dotted.b2 == 8.0 and dotted.s == pytest.approx(5.0, rel=1e-12)
    solid = ex.figure_preset("fig5-solid")
    assert (solid.b1, solid.b2, solid.ratio) == (0.1, 0.5, 0.01)
    assert [ex.figure_preset(f"fig7-{k}").pulses.idler_center for k in ("t0", "tm1", "tp1")] == [0.0, -1.0, 1.0]
    assert isinstance(ex.figure_preset("fig2"), PulseConfig)


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        ex.figure_preset("fig9")
    with pytest.raises(ConfigError):
        ex.fig5_coefficients("dashed")


def test_config_validation():
    cfg = ex.figure_preset("fig4")
    for bad in (dict(nz=1), dict(ntau=0), dict(z_max=0.0), dict(tau_min=1.0, tau_max=1.0),
                dict(convention="other"), dict(root_method="guess"), dict(pump_to_detuning=0.0)):
        with pytest.raises(ConfigError):
            cfg.with_(**bad)


def test_no_pump_no_signal():
    cfg = ex.figure_preset("fig4").with_(nz=20, ntau=401, tau_min=-40.0, tau_max=4.0)
    r = ex.grid_simulate(cfg)
    far = r.tau < -30
    assert far.sum() > 50 and np.all(r.J[:, far] == 0)
    assert np.max(r.J) > 0


def test_grid_invariants(grids):
    for name, r in grids.items():
        assert r.W[0] == 0.0, name
        assert np.all(r.W >= 0) and np.all(r.W <= 1), name
        assert np.nanmin(r.J) >= 0, name
        assert r.flagged_count == 0 and r.meta["flagged_slices"] == 0, name


def test_early_slices_oscillate_and_later_ones_plateau(grids):
    r = grids["fig4"]
    active = [g for g, t in zip(r.regimes, r.tau) if g != "none"]
    early = [g for g, t in zip(r.regimes, r.tau) if g != "none" and t < -1.0]
    late = [g for g, t in zip(r.regimes, r.tau) if g != "none" and t > 0.0]
    assert early and set(early) == {"C"}
    assert late and set(late) == {"B"}
    assert len(active) > 100


def test_generated_peak_follows_pump_not_idler(grids):
    for name in ("fig4", "fig7-tm1", "fig7-tp1"):
        r = grids[name]
        cfg = ex.figure_preset(name)
        best = r.tau[np.argmax(np.nanmax(r.J, axis=0))]
        assert abs(best - 0.0) < abs(best - cfg.pulses.idler_center), name


def test_refinement(grids):
    for name in GRID_PRESETS:
        cfg = ex.figure_preset(name)
        fine = ex.grid_simulate(cfg.with_(nz=2 * cfg.nz, ntau=2 * cfg.ntau))
        coarse = grids[name].W.max()
        assert abs(fine.W.max() / coarse - 1) < 0.01, name


def test_efficiency_is_continuous_in_z(grids):
    # the largest step between neighbours must shrink under z refinement
    for name in GRID_PRESETS:
        cfg = ex.figure_preset(name)
        coarse = np.max(np.abs(np.diff(grids[name].W)))
        fine = ex.grid_simulate(cfg.with_(nz=2 * cfg.nz - 1))
        assert np.max(np.abs(np.diff(fine.W))) < 0.75 * coarse, name


def test_slice_order_does_not_matter():
    cfg = ex.figure_preset("fig6").with_(nz=30, ntau=120)
    a = ex.grid_simulate(cfg)
    b = ex.grid_simulate(cfg, order=np.random.default_rng(50).permutation(cfg.ntau))
    assert np.array_equal(a.J, b.J, equal_nan=True) and a.regimes == b.regimes


def test_csv_is_byte_identical(tmp_path):
    cfg = ex.figure_preset("fig4").with_(nz=20, ntau=50)
    for d in ("a", "b"):
        ex.write_grid(ex.grid_simulate(cfg), tmp_path / d)
    for f in ("grid.csv", "wz.csv", "meta.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    header = (tmp_path / "a" / "grid.csv").read_text().splitlines()[0]
    assert header.startswith("# {")


def test_flagged_slices_are_nan_not_zero(tmp_path):
    cfg = ex.figure_preset("fig6").with_(nz=20, boundary_oracle=False)
    r = ex.grid_simulate(cfg)
    assert r.flagged_count > 0
    assert np.all(np.isnan(r.J[:, r.flagged])) and not np.any(np.isnan(r.J[:, ~r.flagged]))
    assert all(g.startswith("flagged") for g, f in zip(r.regimes, r.flagged) if f)
    assert r.meta["flagged_slices"] == r.flagged_count
    ex.write_grid(r, tmp_path)
    text = (tmp_path / "grid.csv").read_text()
    assert "nan" in text and f'"flagged_slices": {r.flagged_count}' in text


def test_oracle_slices_match_exact_inversion():
    cfg = ex.figure_preset("fig6").with_(nz=40)
    r = ex.grid_simulate(cfg.with_(ntau=400))
    j = r.regimes.index("oracle")
    eta10, eta20, delta2 = (float(v[0]) for v in ex.slice_inputs(cfg, r.tau[j:j + 1]))
    raw = ex.raw_coefficients(cfg.atomic, eta10, delta2, eta20, cfg.q_value)
    oracle = ex.reduced_integral(raw["b1"], raw["b2"], raw["ratio"], raw["alpha"], raw["rate"], cfg.convention)
    exact = oracle.x_of_z(r.z / abs(cfg.atomic.kappa0)) * eta10 / cfg.peak_pump_flux
    assert np.max(np.abs(r.J[:, j] - exact)) < 1e-8 * np.max(exact)


def test_efficiency_zero_denominator():
    cfg = ex.figure_preset("fig4").with_(pulses=ex.figure_preset("fig4").pulses.with_(pump_peak=0.0),
                                         nz=5, ntau=11)
    with pytest.raises(SingularConfigurationError):
        ex.grid_simulate(cfg)


def test_frequency_ratio():
    p = ex.figure_atomic()
    assert p.lambda1 / p.lambda3 == pytest.approx(1.72, abs=0.01)


def test_parse_config_and_line_diagnostics(tmp_path):
    text = "preset = fig6\nnz = 12  # comment\n\npulse.idler_ratio = 0.01\natomic.density = 2e13\n"
    path = tmp_path / "run.cfg"
    path.write_text(text)
    cfg = ex.load_experiment(path)
    assert cfg.nz == 12 and cfg.pulses.idler_ratio == 0.01 and cfg.atomic.density == 2e13
    assert cfg.pulses.static_detuning == -5.0
    for bad, line in (("nz = 3\nbogus = 1\n", 2), ("nz = three\n", 1), ("nz = 3\nnz = 4\n", 2),
                      ("\n\njust words\n", 3), ("z_max = inf\n", 1), ("boundary_oracle = maybe\n", 1)):
        with pytest.raises(ConfigError, match=f"line {line}"):
            ex.parse_config(bad, ex.EXPERIMENT_SCHEMA)
    with pytest.raises(ConfigError):
        ex.experiment_from_mapping({"preset": "fig5-solid"})
    with pytest.raises(ConfigError):
        ex.experiment_from_mapping({"pulse.pump_width": -1.0})


def test_describe_is_json_ready():
    import json
    d = ex.figure_preset("fig4").describe()
    json.dumps(d, default=float)
    assert math.isfinite(d["q_value"]) and d["name"] == "fig4"
