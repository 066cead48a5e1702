"""Spatio-temporal grids J(z, tau), conversion efficiency W(z), figure presets
and config ingestion.

Each retarded-time slice is propagated on its own with the envelope values
frozen at that instant. z is measured in units of 1/|kappa0|, tau in units of
the pump duration, and J is normalised by the peak pump flux.
"""

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .core import KR_COUPLINGS, AtomicParams
from .errors import (BoundaryError, ConfigError, ConvergenceError, DegenerateStateError,
                     DomainError, ModelValidityWarning, RegimeMismatchError,
                     SingularConfigurationError)
from .phasematch import phase_match_required_dk
from .propagation import (CONVENTIONS, PropagationCoefficients, raw_coefficients,
                          reduced_integral, solve)
from .scrap import FULL_SCRAP, HALF_SCRAP, PulseConfig, adiabatic_trajectory

SLICE_ERRORS = (BoundaryError, ConvergenceError, DegenerateStateError, DomainError,
                RegimeMismatchError, SingularConfigurationError, FloatingPointError)


def figure_atomic(detuning_ratio=20.0, detuning_sign=-1.0, density=1e13):
    """Kr couplings with the Stark ratios of the pulse presets imposed exactly."""
    c = dict(KR_COUPLINGS)
    c["beta21"] = HALF_SCRAP.beta21_ratio * c["mu1"]
    c["beta22"] = HALF_SCRAP.beta22_ratio * c["mu1"]
    delta30 = detuning_sign * c["mu2"] / (2.0 * c["mu1"] * detuning_ratio)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ModelValidityWarning)
        return AtomicParams(delta30=delta30, density=density, **c)


@dataclass(frozen=True)
class ExperimentConfig:
    atomic: AtomicParams = field(default_factory=figure_atomic)
    pulses: PulseConfig = HALF_SCRAP
    nz: int = 200
    ntau: int = 400
    z_max: float = 1000.0
    tau_min: float = -4.0
    tau_max: float = 4.0
    pump_to_detuning: float = 0.01
    convention: str = "as-printed"
    root_method: str = "exact"
    q: float = None
    boundary_oracle: bool = True
    name: str = "custom"

    def __post_init__(self):
        if self.nz < 2 or self.ntau < 2:
            raise ConfigError("grid sizes must be at least 2")
        if not (self.z_max > 0 and math.isfinite(self.z_max)):
            raise ConfigError("z_max must be positive")
        if not self.tau_max > self.tau_min:
            raise ConfigError("tau_max must exceed tau_min")
        if not self.pump_to_detuning > 0:
            raise ConfigError("pump_to_detuning must be positive")
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"convention must be one of {CONVENTIONS}")
        if self.root_method not in ("printed", "exact"):
            raise ConfigError("root_method must be 'printed' or 'exact'")

    @property
    def z(self):
        return np.linspace(0.0, self.z_max, self.nz)

    @property
    def tau(self):
        return np.linspace(self.tau_min, self.tau_max, self.ntau)

    @property
    def peak_rabi(self):
        return self.pump_to_detuning * abs(self.atomic.delta30)

    @property
    def peak_pump_flux(self):
        return self.peak_rabi / self.atomic.mu1

    @property
    def q_value(self):
        if self.q is not None:
            return self.q
        return phase_match_required_dk(self.atomic, 0.0, self.peak_pump_flux, "max-coherence")

    def with_(self, **changes):
        return replace(self, **changes)

    def describe(self):
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("atomic", "pulses")}
        out["atomic"] = asdict(self.atomic)
        out["pulses"] = asdict(self.pulses)
        out["q_value"] = self.q_value
        out["kappa0"] = self.atomic.kappa0
        return out


@dataclass
class GridResult:
    z: np.ndarray
    tau: np.ndarray
    J: np.ndarray
    regimes: list
    flagged: np.ndarray
    W: np.ndarray
    meta: dict

    @property
    def flagged_count(self):
        return int(np.count_nonzero(self.flagged))


def slice_inputs(cfg, tau):
    """(eta10, eta20, delta2) at each tau in physical units."""
    pl, eta_m = cfg.pulses, cfg.peak_pump_flux
    eta10 = eta_m * pl.pump(tau)
    eta20 = eta_m * pl.idler(tau)
    delta2 = cfg.peak_rabi * (pl.static_detuning + pl.stark(tau))
    return eta10, eta20, delta2


def _slice(cfg, eta10, eta20, delta2, upper, zphys):
    """(regime tag, x(z)) for one slice. Boundary slices, and slices whose
    root analysis fails, go to the quadrature oracle when allowed."""
    raw = raw_coefficients(cfg.atomic, eta10, delta2, eta20, cfg.q_value,
                           "upper" if upper else "lower")
    try:
        c = PropagationCoefficients(convention=cfg.convention, root_method=cfg.root_method, **raw)
        if c.regime != "boundary":
            return c.regime, solve(c, zphys)
        reason = BoundaryError("slice lies on a regime boundary")
    except (BoundaryError, ConvergenceError, DomainError) as exc:
        reason = exc
    if not cfg.boundary_oracle:
        raise reason
    oracle = reduced_integral(raw["b1"], raw["b2"], raw["ratio"], raw["alpha"], raw["rate"],
                              cfg.convention)
    return "oracle", oracle.x_of_z(zphys, tabulated=1e-9)


def grid_simulate(cfg, order=None):
    """J(z, tau) / eta10_peak with rows indexed by z and columns by tau.

    ``order`` permutes the evaluation order of the tau slices; the result
    does not depend on it.
    """
    z, tau = cfg.z, cfg.tau
    eta10, eta20, delta2 = slice_inputs(cfg, tau)
    upper = adiabatic_trajectory(cfg.pulses, tau).upper
    zphys = z / abs(cfg.atomic.kappa0)
    J = np.zeros((z.size, tau.size))
    regimes = ["none"] * tau.size
    flagged = np.zeros(tau.size, dtype=bool)
    scale = cfg.peak_pump_flux
    for j in (range(tau.size) if order is None else order):
        if eta10[j] <= 0 or eta20[j] <= 0:
            continue
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                regimes[j], x = _slice(cfg, eta10[j], eta20[j], delta2[j], upper[j], zphys)
            if not np.all(np.isfinite(x)):
                raise ConvergenceError("non-finite slice")
            J[:, j] = np.maximum(x, 0.0) * eta10[j] / scale
        except SLICE_ERRORS as exc:
            regimes[j] = f"flagged: {type(exc).__name__}"
            flagged[j] = True
            J[:, j] = np.nan
    result = GridResult(z, tau, J, regimes, flagged, None, {})
    result.W = efficiency_curve(result, cfg)
    result.meta = {"config": cfg.describe(), "flagged_slices": result.flagged_count,
                   "regime_counts": {r: regimes.count(r) for r in sorted(set(regimes))},
                   "J_normalisation": "peak pump flux",
                   "z_unit": "1/|kappa0|", "tau_unit": "pump duration"}
    return result


def efficiency_curve(result, cfg):
    """W(z): generated energy over pump energy, trapezoidal in tau.

    Flagged slices are left out of the numerator.
    """
    pump = cfg.pulses.pump(result.tau)
    den = np.trapezoid(pump, result.tau)
    if den <= 0:
        raise SingularConfigurationError("pump energy vanishes on the tau grid")
    freq = cfg.atomic.lambda1 / cfg.atomic.lambda3
    J = np.where(np.isnan(result.J), 0.0, result.J)
    return freq * np.trapezoid(J, result.tau, axis=1) / den


# ----------------------------------------------------------------------------
# presets


FIG5_SOLID = dict(b1=0.1, b2=0.5, ratio=0.01)
FIG5_DOTTED = dict(b1=0.1, b2=8.0, ratio=0.01, slowdown=5.0)


def fig5_coefficients(kind):
    if kind == "solid":
        return PropagationCoefficients(**FIG5_SOLID)
    if kind == "dotted":
        d = FIG5_DOTTED
        return PropagationCoefficients.from_slowdown(d["b1"], d["b2"], d["ratio"], d["slowdown"])
    raise ConfigError(f"unknown fig5 curve {kind!r}")


_GRID_PRESETS = {
    "fig4": dict(pulses=HALF_SCRAP),
    # slices near the b1 = +-1 crossings oscillate quickly in tau at the W maximum
    "fig6": dict(pulses=FULL_SCRAP, ntau=3200),
    "fig7": dict(pulses=HALF_SCRAP.with_(idler_center=0.0)),
    "fig7-t0": dict(pulses=HALF_SCRAP.with_(idler_center=0.0)),
    "fig7-tm1": dict(pulses=HALF_SCRAP.with_(idler_center=-1.0)),
    "fig7-tp1": dict(pulses=HALF_SCRAP.with_(idler_center=1.0)),
}
FIGURE_NAMES = ("fig2", "fig3", "fig4", "fig5-solid", "fig5-dotted", "fig6",
                "fig7", "fig7-t0", "fig7-tm1", "fig7-tp1")


def figure_preset(name):
    """ExperimentConfig for a grid figure, PulseConfig for the preparation
    figures and PropagationCoefficients for the two single-slice curves."""
    if name == "fig2":
        return FULL_SCRAP
    if name == "fig3":
        return HALF_SCRAP
    if name.startswith("fig5-"):
        return fig5_coefficients(name[5:])
    if name in _GRID_PRESETS:
        return ExperimentConfig(name=name, **_GRID_PRESETS[name])
    raise ConfigError(f"unknown preset {name!r}; known: {', '.join(FIGURE_NAMES)}")


# ----------------------------------------------------------------------------
# flat key = value configs

_PULSE_KEYS = {f.name: float for f in fields(PulseConfig)}
_ATOMIC_KEYS = {f.name: float for f in fields(AtomicParams)}
_EXPERIMENT_KEYS = {"nz": int, "ntau": int, "z_max": float, "tau_min": float, "tau_max": float,
                    "pump_to_detuning": float, "convention": str, "root_method": str,
                    "q": float, "boundary_oracle": bool, "name": str, "preset": str}


def _convert(kind, text):
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is float:
        v = float(text)
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v
    return kind(text)


def parse_config(text, schema):
    """Parse ``key = value`` lines against {key: type}. '#' starts a comment.

    Raises ConfigError naming the line for unknown keys, duplicates and bad values.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in schema:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            out[key] = _convert(schema[key], value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return out


EXPERIMENT_SCHEMA = {**_EXPERIMENT_KEYS,
                     **{f"pulse.{k}": t for k, t in _PULSE_KEYS.items()},
                     **{f"atomic.{k}": t for k, t in _ATOMIC_KEYS.items()}}


def experiment_from_mapping(values, base=None):
    values = dict(values)
    if base is None:
        base = figure_preset(values.pop("preset", "fig4"))
        if not isinstance(base, ExperimentConfig):
            raise ConfigError("preset must name a grid figure")
    else:
        values.pop("preset", None)
    pulse = {k[6:]: v for k, v in values.items() if k.startswith("pulse.")}
    atomic = {k[7:]: v for k, v in values.items() if k.startswith("atomic.")}
    top = {k: v for k, v in values.items() if "." not in k}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ModelValidityWarning)
            pulses = base.pulses.with_(**pulse) if pulse else base.pulses
            atoms = base.atomic.with_(**atomic) if atomic else base.atomic
        return base.with_(pulses=pulses, atomic=atoms, **top)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def load_experiment(path, base=None):
    with open(path) as fh:
        return experiment_from_mapping(parse_config(fh.read(), EXPERIMENT_SCHEMA), base)


# ----------------------------------------------------------------------------
# output


def _fmt(v):
    return "nan" if isinstance(v, float) and math.isnan(v) else repr(float(v))


def write_csv(path, header, columns, names):
    """Columns as CSV after a '#'-prefixed JSON line. repr() keeps floats exact."""
    with open(path, "w", newline="\n") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True, default=_json_default) + "\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*columns):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")


def write_grid(result, outdir):
    """grid.csv (row-major J, one row per z), wz.csv and meta.json."""
    import os
    os.makedirs(outdir, exist_ok=True)
    header = {"rows": "z", "columns": "tau", "shape": list(result.J.shape),
              "flagged_slices": result.flagged_count}
    cols = [result.z] + [result.J[:, j] for j in range(result.tau.size)]
    names = ["z"] + [f"tau{j}" for j in range(result.tau.size)]
    write_csv(os.path.join(outdir, "grid.csv"), header, cols, names)
    write_csv(os.path.join(outdir, "wz.csv"), {"quantity": "W(z)"}, [result.z, result.W], ["z", "W"])
    meta = dict(result.meta)
    meta.update(z=result.z, tau=result.tau, regimes=result.regimes,
                flagged=np.flatnonzero(result.flagged))
    write_json(os.path.join(outdir, "meta.json"), meta)
