"""Command-line entry point.

Every subcommand reads an optional flat ``key = value`` config, writes CSV /
JSON into ``--out`` and prints a short summary. Exit status is 0 on success,
2 for configuration errors and 3 for numerical failures.
"""

import argparse
import math
import os
import sys
import time
import warnings

import numpy as np

from . import experiments as ex
from .core import branch_state
from .errors import (BoundaryError, ConfigError, ConvergenceError, DegenerateStateError,
                     DomainError, ModelValidityWarning, RegimeMismatchError,
                     SingularConfigurationError)
from .phasematch import joint_compensation_check, phase_match_required_dk, windows
from .propagation import (PropagationCoefficients, PropagationProblem, canonical_ode_oracle,
                          implicit_integral_oracle, plateau_distance, reduced_ode, solve)
from .scrap import adiabatic_trajectory, adiabaticity_margin, default_grid, tdse_oracle
from .smallsignal import linear_ode_oracle, undepleted_pump_rates, undepleted_pump_solution

NUMERICAL_ERRORS = (BoundaryError, ConvergenceError, DegenerateStateError, DomainError,
                    RegimeMismatchError, SingularConfigurationError, FloatingPointError)

ATOMIC_SCHEMA = {f"atomic.{k}": float for k in ex._ATOMIC_KEYS}
SLICE_SCHEMA = {"pump_to_detuning": float, "stark_ratio": float, "idler_ratio": float,
                "q": float, "q_limit": str, "branch": str, **ATOMIC_SCHEMA}

SCHEMAS = {
    "scrap": {"preset": str, "n": int, "tau_min": float, "tau_max": float,
              **{f"pulse.{k}": float for k in ex._PULSE_KEYS}},
    "undepleted": {**SLICE_SCHEMA, "z_max": float, "nz": int},
    "propagate": {**SLICE_SCHEMA, "b1": float, "b2": float, "ratio": float, "alpha": float,
                  "slowdown": float, "rate": float, "root_method": str, "kz_max": float,
                  "nz": int, "phi0": float},
    "grid": ex.EXPERIMENT_SCHEMA,
    "efficiency": ex.EXPERIMENT_SCHEMA,
    "phase-match": {**SLICE_SCHEMA, "sweep_min": float, "sweep_max": float, "sweep_n": int},
    "selftest": {},
}


def _load(args, command):
    if not args.config:
        return {}
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return ex.parse_config(text, SCHEMAS[command])


def _atomic(values):
    over = {k[7:]: v for k, v in values.items() if k.startswith("atomic.")}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ModelValidityWarning)
        try:
            return ex.figure_atomic().with_(**over)
        except DomainError as exc:
            raise ConfigError(str(exc)) from None


def _slice(values):
    """(params, eta10, eta20, delta2, q, branch) for a single-slice command."""
    p = _atomic(values)
    ratio = values.get("pump_to_detuning", 0.01)
    if ratio <= 0:
        raise ConfigError("pump_to_detuning must be positive")
    eta10 = ratio * abs(p.delta30) / p.mu1
    delta2 = values.get("stark_ratio", 0.0) * p.mu1 * eta10
    eta20 = values.get("idler_ratio", 0.01) * eta10
    if eta20 < 0:
        raise ConfigError("idler_ratio must be non-negative")
    limit = values.get("q_limit", "max-coherence")
    if limit not in ("max-coherence", "early", "instant"):
        raise ConfigError("q_limit must be max-coherence, early or instant")
    q = values.get("q")
    if q is None:
        q = phase_match_required_dk(p, delta2, eta10, None if limit == "instant" else limit)
    branch = values.get("branch", "upper")
    if branch not in ("upper", "lower"):
        raise ConfigError("branch must be upper or lower")
    return p, eta10, eta20, delta2, q, branch


def _out(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


# ----------------------------------------------------------------------------
# subcommands


def cmd_scrap(args, values):
    name = args.preset or values.get("preset", "fig3")
    if name not in ("fig2", "fig3"):
        raise ConfigError("scrap presets are fig2 (full SCRAP) and fig3 (half-SCRAP)")
    cfg = ex.figure_preset(name)
    pulse = {k[6:]: v for k, v in values.items() if k.startswith("pulse.")}
    try:
        cfg = cfg.with_(**pulse)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    tau = default_grid(values.get("n", 2001), values.get("tau_min", -4.0), values.get("tau_max", 4.0))
    adi = adiabatic_trajectory(cfg, tau)
    cols = [adi.tau, adi.detuning, adi.rabi, adi.pop1, adi.pop2, adi.rho12, adi.margin]
    names = ["tau", "detuning", "rabi", "pop1", "pop2", "rho12", "margin"]
    summary = {"preset": name, "final_pop2": float(adi.pop2[-1]), "final_rho12": float(adi.rho12[-1]),
               "peak_rho12": float(np.nanmax(adi.rho12)), "margin": adiabaticity_margin(cfg, tau)}
    if args.oracle != "none":
        td = tdse_oracle(cfg, tau)
        cols += [td.pop1, td.pop2, td.rho12]
        names += ["tdse_pop1", "tdse_pop2", "tdse_rho12"]
        summary["max_population_difference"] = float(np.nanmax(np.abs(td.pop2 - adi.pop2)))
    ex.write_csv(_out(args, "scrap.csv"), summary, cols, names)
    return summary


def cmd_undepleted(args, values):
    p, eta10, eta20, delta2, q, branch = _slice(values)
    dk = 0.5 * p.density * q
    z = np.linspace(0.0, values.get("z_max", 5.0), values.get("nz", 201)) / abs(p.kappa0)
    kappa, dkp = undepleted_pump_rates(p, eta10, delta2, dk, branch)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        eta3 = undepleted_pump_solution(p, eta10, eta20, delta2, z, dk, branch)
    big_d = delta2 + p.beta21 * eta10
    st = branch_state(big_d, p.mu1 * eta10, branch == "upper")
    summary = {"kappa": kappa, "dkprime": dkp, "gain": (dkp / (2 * kappa)) ** 2 < 1}
    cols = [z * abs(p.kappa0), eta3 / eta20]
    names = ["z", "eta3_over_eta20"]
    if args.oracle != "none":
        _, o3 = linear_ode_oracle(p, st.c1 ** 2, st.c2 ** 2, eta20, z, dk=dk)
        cols.append(o3 / eta20)
        names.append("oracle_eta3_over_eta20")
        summary["max_relative_difference"] = float(np.max(np.abs(o3 - eta3)) / max(np.max(eta3), 1e-300))
    ex.write_csv(_out(args, "undepleted.csv"), summary, cols, names)
    return summary


def _coefficients_from(values, convention):
    root_method = values.get("root_method", "exact")
    if "b1" in values or "b2" in values:
        try:
            b1, b2, ratio = values["b1"], values["b2"], values.get("ratio", 0.01)
        except KeyError:
            raise ConfigError("b1 and b2 must be given together") from None
        kw = dict(convention=convention, root_method=root_method, rate=values.get("rate", 1.0))
        if "slowdown" in values:
            return PropagationCoefficients.from_slowdown(b1, b2, ratio, values["slowdown"], **kw), None
        return PropagationCoefficients(b1, b2, ratio, alpha=values.get("alpha", 0.0), **kw), None
    p, eta10, eta20, delta2, q, branch = _slice(values)
    prob = PropagationProblem(p, eta10, eta20, delta2, q, 1e-12 * eta10, branch)
    return prob.coefficients(convention, root_method), prob


def cmd_propagate(args, values):
    convention = args.convention or "as-printed"
    c, prob = _coefficients_from(values, convention)
    kz = np.linspace(0.0, values.get("kz_max", 3.0), values.get("nz", 301))
    if c.regime == "boundary":
        return _propagate_boundary(args, c, kz, convention)
    z = kz / c.kappa_prime
    x = solve(c, z)
    summary = {"regime": c.regime, "b1": c.b1, "b2": c.b2, "ratio": c.ratio, "alpha": c.alpha,
               "s": c.s, "turning_root": c.turning, "kappa_prime": c.kappa_prime,
               "convention": convention}
    if c.regime in "AB":
        summary["plateau_kappa_z"] = plateau_distance(c) * c.kappa_prime
    cols, names = [kz, x], ["kappa_prime_z", "x_closed"]
    if args.oracle == "quad":
        oracle = implicit_integral_oracle(prob if prob is not None else c, convention)
        xo = oracle.x_of_z(z)
        cols += [xo, xo - x]
        names += ["x_oracle", "difference"]
        summary["max_abs_difference"] = float(np.max(np.abs(xo - x)))
    elif args.oracle == "ode":
        src = prob if prob is not None else c
        traj = canonical_ode_oracle(src, z[1:] if z[0] == 0 else z, convention,
                                    phi0=values.get("phi0", math.pi / 2))
        pad = (lambda a: np.concatenate([[a[0] * 0.0], a])) if z[0] == 0 else (lambda a: a)
        xo = pad(traj.x)
        cols += [xo, xo - x]
        names += ["x_oracle", "difference"]
        for key, res in traj.residuals.items():
            cols.append(pad(res))
            names.append(f"residual_{key}")
        summary["max_residuals"] = traj.max_residual()
    ex.write_csv(_out(args, "propagate.csv"), summary, cols, names)
    return summary


def _propagate_boundary(args, c, kz, convention):
    """No closed form on a regime boundary: integrate the reduced motion instead.
    The distance axis is scaled by |rate| since kappa' is undefined there."""
    z = kz / abs(c.rate)
    traj = reduced_ode(c.b1, c.b2, c.ratio, c.alpha, c.rate, convention, z[1:])
    x = np.concatenate([[0.0], traj.x])
    summary = {"regime": "boundary", "solver": "reduced ODE (closed form undefined)",
               "b1": c.b1, "b2": c.b2, "ratio": c.ratio, "alpha": c.alpha,
               "convention": convention, "max_x": float(np.max(x)),
               "max_residuals": traj.max_residual()}
    res = np.concatenate([[0.0], traj.residuals["first_integral"]])
    ex.write_csv(_out(args, "propagate.csv"), summary,
                 [kz, np.full(kz.size, np.nan), x, res],
                 ["rate_z", "x_closed", "x_oracle", "residual_first_integral"])
    return summary


def _experiment(args, values):
    if args.preset:
        values = {**values, "preset": args.preset}
    cfg = ex.experiment_from_mapping(values)
    over = {}
    if args.grid_nz:
        over["nz"] = args.grid_nz
    if args.grid_ntau:
        over["ntau"] = args.grid_ntau
    if args.convention:
        over["convention"] = args.convention
    return cfg.with_(**over) if over else cfg


def cmd_grid(args, values):
    cfg = _experiment(args, values)
    res = ex.grid_simulate(cfg)
    ex.write_grid(res, args.out)
    i = int(np.argmax(res.W))
    return {"preset": cfg.name, "flagged_slices": res.flagged_count,
            "regimes": res.meta["regime_counts"], "max_W": float(res.W[i]), "z_at_max_W": float(res.z[i])}


def cmd_efficiency(args, values):
    names = [args.preset] if args.preset else ["fig7-t0", "fig7-tp1", "fig7-tm1", "fig6"]
    cols, header, z = [], {}, None
    for name in names:
        cfg = _experiment(argparse.Namespace(**{**vars(args), "preset": name}), values)
        res = ex.grid_simulate(cfg)
        z = res.z if z is None else z
        if z.shape != res.z.shape or not np.allclose(z, res.z):
            raise ConfigError("presets disagree on the z grid")
        cols.append(res.W)
        i = int(np.argmax(res.W))
        header[name] = {"max_W": float(res.W[i]), "z_at_max_W": float(res.z[i]),
                        "flagged_slices": res.flagged_count}
    ex.write_csv(_out(args, "wz.csv"), header, [z] + cols, ["z"] + [f"W_{n}" for n in names])
    ex.write_json(_out(args, "meta.json"), {"presets": header, "z": z})
    return header


def cmd_phase_match(args, values):
    p, eta10, _, delta2, q, _ = _slice(values)
    w = windows(p, delta2, eta10, q)
    jc = joint_compensation_check(p, delta2, eta10)
    summary = {
        "q_instant": phase_match_required_dk(p, delta2, eta10),
        "q_early": phase_match_required_dk(p, delta2, eta10, "early"),
        "q_max_coherence": phase_match_required_dk(p, delta2, eta10, "max-coherence"),
        "q_used": q, "y": w.y, "y0": w.y0, "y1": w.y1, "y2": w.y2, "y4": w.y4,
        "in_linear_window": w.in_linear_window(), "kerr_halfwidth": w.kerr_halfwidth,
        "d2": jc.d2, "required_d2": jc.required_d2, "verdict": jc.verdict,
    }
    ratios = np.linspace(values.get("sweep_min", -5.0), values.get("sweep_max", 5.0),
                         values.get("sweep_n", 101))
    rows = [[], [], [], [], []]
    for r in ratios:
        d = r * p.mu1 * eta10
        ww = windows(p, d, eta10, q)
        for col, v in zip(rows, (r, phase_match_required_dk(p, d, eta10), ww.y1, ww.y2, ww.y0)):
            col.append(v)
    ex.write_csv(_out(args, "phase_match.csv"), summary, rows,
                 ["stark_ratio", "q_required", "y1", "y2", "y0"])
    return summary


def cmd_selftest(args, values):
    from .selftest import run_selftest
    lines, ok = run_selftest(seed=args.seed)
    with open(_out(args, "selftest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    if not ok:
        raise ConvergenceError("self-test failed")
    return {"passed": True}


def cmd_presets(args, values):
    lines = ["figure presets: " + ", ".join(ex.FIGURE_NAMES), "", "config keys per subcommand:"]
    for name, schema in SCHEMAS.items():
        keys = ", ".join(sorted(schema)) or "(none)"
        lines.append(f"  {name}: {keys}")
    print("\n".join(lines))
    return None


COMMANDS = {"scrap": cmd_scrap, "undepleted": cmd_undepleted, "propagate": cmd_propagate,
            "grid": cmd_grid, "efficiency": cmd_efficiency, "phase-match": cmd_phase_match,
            "selftest": cmd_selftest, "presets": cmd_presets}


def build_parser():
    ap = argparse.ArgumentParser(prog="fwmscrap", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--preset")
        sp.add_argument("--config")
        sp.add_argument("--out", default=".")
        sp.add_argument("--convention", choices=("as-printed", "manley-rowe"))
        sp.add_argument("--oracle", choices=("quad", "ode", "tdse", "none"), default="none")
        sp.add_argument("--grid-nz", type=int)
        sp.add_argument("--grid-ntau", type=int)
        sp.add_argument("--seed", type=int, default=0)
    return ap


def run_cli(argv=None):
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        values = _load(args, args.command) if args.command in SCHEMAS else {}
        with np.errstate(all="ignore"):
            summary = COMMANDS[args.command](args, values)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    if summary is not None and args.command != "selftest":
        for k, v in summary.items():
            print(f"{k}: {v}")
        print(f"elapsed: {time.perf_counter() - t0:.2f} s")
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
