"""
Command-line front end. Every subcommand reads one RunConfig, computes, and
writes CSV/SVG (and JSON for schedules) into --out.

    python main.py rates --config configs/exact_check.toml --out out/
    python main.py figures --out figures/
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np

import export
from config import RunConfig, config_hash, from_dict, load_config
from equilibrium import equilibrium_report, lamb_shift_t0, purity_scan
from errors import ConfigError, QztError, exit_code
from exact_bath import ExactBath
from master_equation import MeasurementSchedule, evolve, initial_from_temperature
from presets import presets_data
from rates import build_rate_table
from scheduler import ScheduleObjective, greedy_schedule, temperature_sweep
from thermo import EntropyTrace, cooling_scan, high_t_bound, reference_populations, sigma

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("equilibrium", "rates", "evolve", "exact", "entropy", "cooling-check", "schedule", "sweep",
               "figures")


# ---------------------------- Config helpers -------------------------
def schedule_from(config: RunConfig) -> MeasurementSchedule:
    s = config.schedule
    first = s.pre_relax_over_t_c * config.spectrum.t_c_over_inv_omega_a + s.first_over_inv_omega_a
    return MeasurementSchedule.uniform(first, s.interval_over_inv_omega_a, s.count, s.duration_over_inv_omega_a)


def objective_from(config: RunConfig) -> ScheduleObjective:
    o, e = config.objective, config.engine
    return ScheduleObjective(
        direction=o.direction,
        count=o.count,
        window=(o.dt_min_over_inv_omega_a, o.dt_max_over_inv_omega_a),
        engine=e.kind,
        grid_points=o.grid_points,
        n_modes=e.n_modes,
        coverage=e.coverage_over_gamma,
        max_quanta=e.max_quanta,
    )


def markov_after(config: RunConfig) -> float:
    return config.engine.markov_after_over_t_c * config.spectrum.t_c_over_inv_omega_a


def exact_bath_from(config: RunConfig) -> ExactBath:
    if not math.isinf(config.temperature.alpha_bath):
        raise ConfigError("the exact engine needs temperature.alpha_bath = inf")
    e = config.engine
    rho0 = initial_from_temperature(config.temperature.alpha_system).rho_ee
    return ExactBath.from_spec(config.spectrum.to_spec(), e.n_modes, e.coverage_over_gamma, e.max_quanta,
                               initial_rho_ee=rho0, parity_sector=e.parity_sector)


def me_trace(config: RunConfig):
    spec = config.spectrum.to_spec()
    return evolve(
        initial_from_temperature(config.temperature.alpha_system),
        schedule_from(config),
        config.run.horizon_over_inv_omega_a,
        spec,
        config.temperature.bath,
        sample_step=config.run.sample_step_over_inv_omega_a,
        rethermalize=config.engine.rethermalize,
        markov_after=markov_after(config),
    )


# ---------------------------- Subcommands ----------------------------
def cmd_equilibrium(config: RunConfig, out: Path, digest: str, threads=None) -> None:
    spec = config.spectrum.to_spec()
    scan = purity_scan(spec, config.equilibrium.alphas, config.equilibrium.form)
    t0 = equilibrium_report(spec, config.temperature.bath, config.equilibrium.form)
    rows = np.column_stack([scan.alphas, scan.bare, scan.corrected, scan.relative_change,
                            scan.excited_corrected, scan.mean_hsb])
    export.write_csv(
        out / "equilibrium.csv", rows,
        ("alpha [1]", "P_bare [1]", "P_corrected [1]", "relative_change [1]", "rho_ee [1]", "H_SB [omega_a]"),
        digest,
        meta={"form": config.equilibrium.form, "lamb_shift_t0_omega_a": f"{lamb_shift_t0(spec):.12e}",
              "report_alpha_bath": f"{t0.alpha}", "report_p_eq_corrected": f"{t0.p_eq_corrected:.12e}"},
    )
    export.write_svg(out / "equilibrium.svg", scan.alphas, {"(P - P0)/|P0|": scan.relative_change},
                     "alpha = beta omega_a", "relative purity change", logx=True)


def cmd_rates(config: RunConfig, out: Path, digest: str, threads=None) -> None:
    spec = config.spectrum.to_spec()
    table = build_rate_table(spec, config.temperature.bath, config.run.horizon_over_inv_omega_a, markov_after(config))
    export.write_csv(out / "rates.csv", table.to_rows(), table.COLUMNS, digest,
                     meta={"rdot0_omega_a2": f"{table.rdot0:.12e}", "markov_e": f"{table.markov_e:.12e}",
                           "markov_g": f"{table.markov_g:.12e}"})
    export.write_svg(out / "rates.svg", table.times, {"R_e": table.r_e, "R_g": table.r_g},
                     "t [1/omega_a]", "rate [omega_a]")


def _write_me_trace(trace, out: Path, name: str, digest: str) -> None:
    export.write_csv(out / f"{name}.csv", trace.to_rows(), trace.COLUMNS, digest,
                     meta={"events": " ".join(f"{t:.12g}" for t in trace.events)})
    export.write_svg(out / f"{name}.svg", trace.times, {"rho_ee": trace.rho_ee}, "t [1/omega_a]", "rho_ee",
                     markers=trace.events.tolist())


def cmd_evolve(config: RunConfig, out: Path, digest: str, threads=None) -> None:
    _write_me_trace(me_trace(config), out, "evolve", digest)


def cmd_exact(config: RunConfig, out: Path, digest: str, threads=None) -> None:
    bath = exact_bath_from(config)
    r = config.run
    trace = bath.simulate(
        schedule_from(config), r.horizon_over_inv_omega_a, r.sample_step_over_inv_omega_a,
        r.mode_sample_step_over_inv_omega_a,
        initial_rho_ee=initial_from_temperature(config.temperature.alpha_system).rho_ee,
        finite=config.engine.finite_measurements,
    )
    export.write_csv(out / "exact_trace.csv", trace.to_rows(), trace.COLUMNS, digest,
                     meta={"dimension": bath.basis.dimension})
    export.write_csv(out / "exact_modes.csv", trace.mode_rows(), trace.MODE_COLUMNS, digest)
    export.write_svg(out / "exact_trace.svg", trace.times,
                     {"rho_ee": trace.rho_ee, "H_SB": trace.h_sb}, "t [1/omega_a]", "value",
                     markers=trace.events.tolist())


def _entropy(config: RunConfig) -> EntropyTrace:
    trace = me_trace(config)
    p0 = reference_populations(config.spectrum.to_spec(), config.temperature.bath)
    return sigma(trace, p0)


def cmd_entropy(config: RunConfig, out: Path, digest: str, threads=None) -> None:
    ent = _entropy(config)
    export.write_csv(out / "entropy.csv", ent.to_rows(), ent.COLUMNS, digest,
                     meta={"reference_rho_ee": f"{ent.reference:.12e}"})
    export.write_svg(out / "entropy.svg", ent.times, {"S": ent.relative_entropy, "sigma": ent.sigma},
                     "t [1/omega_a]", "nats")


def cmd_cooling_check(config: RunConfig, out: Path, digest: str, threads=None) -> None:
    spec = config.spectrum.to_spec()
    beta = config.temperature.bath
    scan = cooling_scan(spec, beta)
    meta = {"crossings": " ".join(f"{t:.12g}" for t in scan.crossings)}
    if not beta.is_zero:
        meta["high_t_bound_omega_a"] = f"{high_t_bound(beta):.12e}"
    export.write_csv(out / "cooling.csv", scan.to_rows(), scan.COLUMNS, digest, meta=meta)
    export.write_svg(out / "cooling.svg", scan.times, {"margin": scan.margins}, "t [1/omega_a]", "margin",
                     logx=True)


def cmd_schedule(config: RunConfig, out: Path, digest: str, threads=None, name: str = "schedule") -> None:
    result = greedy_schedule(
        objective_from(config),
        initial_from_temperature(config.temperature.alpha_system),
        config.spectrum.to_spec(),
        config.temperature.bath,
    )
    trace = result.trace
    if hasattr(trace, "rho_ee_dot"):
        _write_me_trace(trace, out, name, digest)
    else:
        export.write_csv(out / f"{name}.csv", trace.to_rows(), trace.COLUMNS, digest)
    export.write_json(out / f"{name}.json", result.to_dict(), digest)


def cmd_sweep(config: RunConfig, out: Path, digest: str, threads=None, name: str = "sweep") -> None:
    table = temperature_sweep(objective_from(config), config.sweep.alphas, config.spectrum.to_spec(), threads)
    crit = table.critical_alpha
    export.write_csv(out / f"{name}.csv", table.to_rows(), table.COLUMNS, digest,
                     meta={**table.metadata, "critical_alpha": "none" if crit is None else f"{crit:.12e}"})
    export.write_svg(out / f"{name}.svg", table.alphas, {"max heating": table.max_heat,
                                                         "max cooling": table.max_cool},
                     "alpha = beta omega_a", "rho_ee - rho_ee(Gibbs)", logx=True)


# ---------------------------- Figures --------------------------------
def preset(name: str) -> RunConfig:
    return from_dict(presets_data[name])


def figure_exact_check(out: Path) -> None:
    config = preset("exact_check")
    digest = config_hash(config)
    bath = exact_bath_from(config)
    spec = bath.model.matching_spec()
    schedule = schedule_from(config)
    r = config.run
    horizon = r.horizon_over_inv_omega_a

    me = evolve(initial_from_temperature(config.temperature.alpha_system), schedule, horizon, spec,
                config.temperature.bath, sample_step=r.sample_step_over_inv_omega_a)
    impulsive = bath.simulate(schedule, horizon, r.sample_step_over_inv_omega_a, r.mode_sample_step_over_inv_omega_a)
    finite = bath.simulate(schedule, horizon, r.sample_step_over_inv_omega_a, r.mode_sample_step_over_inv_omega_a,
                           finite=True)

    grid = np.linspace(0.0, horizon, int(round(horizon / r.sample_step_over_inv_omega_a)) + 1)
    curves = {
        "master equation": np.interp(grid, me.times, me.rho_ee),
        "exact impulsive": np.interp(grid, impulsive.times, impulsive.rho_ee),
        "exact finite tau": np.interp(grid, finite.times, finite.rho_ee),
    }
    export.write_csv(out / "fig1_trace.csv", np.column_stack([grid, *curves.values()]),
                     ("t [1/omega_a]", "rho_ee_me [1]", "rho_ee_exact [1]", "rho_ee_exact_finite [1]"), digest,
                     meta={"events": " ".join(f"{e.time:.12g}" for e in schedule)})
    export.write_svg(out / "fig1_trace.svg", grid, curves, "t [1/omega_a]", "rho_ee",
                     markers=schedule.times.tolist())

    table = build_rate_table(spec, config.temperature.bath, 5 * spec.t_c)
    export.write_csv(out / "fig1a_rates.csv", table.to_rows(), table.COLUMNS, digest)
    export.write_svg(out / "fig1a_rates.svg", table.times, {"R_e": table.r_e, "R_g": table.r_g},
                     "t [1/omega_a]", "rate [omega_a]")

    ent = sigma(me, reference_populations(spec, config.temperature.bath))
    export.write_csv(out / "fig1b_entropy.csv", ent.to_rows(), ent.COLUMNS, digest,
                     meta={"reference_rho_ee": f"{ent.reference:.12e}"})
    export.write_svg(out / "fig1b_entropy.svg", ent.times, {"sigma": ent.sigma}, "t [1/omega_a]",
                     "sigma [nats omega_a]", markers=schedule.times.tolist())

    export.write_csv(out / "fig1c_modes.csv", impulsive.mode_rows(), impulsive.MODE_COLUMNS, digest)
    total = impulsive.mode_occupations.sum(axis=1)
    export.write_svg(out / "fig1c_modes.svg", impulsive.mode_times, {"sum of mode occupations": total},
                     "t [1/omega_a]", "bath quanta")


def figure_purity_scan(out: Path) -> None:
    config = preset("purity_scan")
    cmd_equilibrium(config, out, config_hash(config))
    (out / "equilibrium.csv").rename(out / "fig_purity.csv")
    (out / "equilibrium.svg").rename(out / "fig_purity.svg")


def figure_cooling(out: Path, threads: Optional[int]) -> None:
    config = preset("cooling_sweep")
    digest = config_hash(config)
    cmd_schedule(config, out, digest, name="fig2b_schedule")
    cmd_sweep(config, out, digest, threads, name="fig2c_sweep")


def cmd_figures(config: Optional[RunConfig], out: Path, digest: str, threads=None) -> None:
    figure_exact_check(out)
    figure_purity_scan(out)
    figure_cooling(out, threads)


HANDLERS: Dict[str, Callable] = {
    "equilibrium": cmd_equilibrium,
    "rates": cmd_rates,
    "evolve": cmd_evolve,
    "exact": cmd_exact,
    "entropy": cmd_entropy,
    "cooling-check": cmd_cooling_check,
    "schedule": cmd_schedule,
    "sweep": cmd_sweep,
    "figures": cmd_figures,
}


# ---------------------------- Entry ----------------------------------
def run(subcommand: str, config: Optional[RunConfig], out_dir, threads: Optional[int] = None) -> int:
    """Run one subcommand; 0 on success, 2 for input errors, 3 for numerical failures."""
    if subcommand not in HANDLERS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    if config is None and subcommand != "figures":
        raise ConfigError(f"{subcommand} needs --config")
    digest = config_hash(config) if config is not None else ""
    try:
        with export.staged_output(out_dir) as scratch:
            HANDLERS[subcommand](config, scratch, digest, threads)
    except QztError as e:
        logger.error(f"❌ {subcommand} failed: {e}")
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return exit_code(e)
    logger.info(f"✅ {subcommand} finished, outputs in {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qzt", description="Qubit thermodynamics under frequent QND measurements")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=Path, help="TOML run configuration")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--threads", type=int, default=None, help="sweep worker threads (overrides QZT_THREADS)")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        config = load_config(args.config) if args.config is not None else None
        return run(args.subcommand, config, args.out, args.threads)
    except QztError as e:
        logger.error(f"❌ {e}")
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return exit_code(e)
