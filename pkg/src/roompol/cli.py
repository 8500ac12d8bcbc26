"""Command-line surface: eval | simulate | fit | cpr.

Every command is a deterministic function of its config file, input files,
and seed. Exit codes: 0 success, 2 validation failure, 3 I/O failure,
4 fit did not converge under --strict.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import fitting, io, mirror, model
from .config import ConfigError, FitSettings, RunConfig, load_run_config


def _db(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(values)


def _db_scalar(value: float) -> float:
    return -math.inf if value <= 0 else 10.0 * math.log10(value)


def _fmt(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.6g}"


def _channel_params(cfg: RunConfig) -> tuple[model.PdsParams, model.PdsParams]:
    """Co channel uses the configured gains; cross channel swaps receive entries."""
    co = model.PdsParams(
        room=cfg.room,
        material=cfg.material,
        mu_t=cfg.mu_t,
        mu_r=cfg.mu_r,
        wavelength=cfg.wavelength,
    )
    cross = model.PdsParams(
        room=cfg.room,
        material=cfg.material,
        mu_t=cfg.mu_t,
        mu_r=cfg.mu_r.swapped(),
        wavelength=cfg.wavelength,
    )
    return co, cross


def _print_derived(cfg: RunConfig) -> None:
    t_rev = model.reverberation_time(cfg.room, cfg.material)
    t_mix = model.mixing_time(cfg.room, cfg.material)
    params_co, _ = _channel_params(cfg)
    ratio = model.cpr(params_co)
    print(f"T = {_fmt(t_rev * 1e9)} ns")
    print(f"T_p = {_fmt(t_mix * 1e9)} ns")
    print(f"mixing constant = {_fmt(model.mixing_constant(cfg.material))}")
    if math.isinf(ratio):
        print("CPR = inf")
    else:
        print(f"CPR = {_fmt(ratio)} ({_db_scalar(ratio):.4f} dB)")


def _model_channel_curves(cfg: RunConfig, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    params_co, params_cross = _channel_params(cfg)
    if cfg.cond is not None:
        co, _ = model.pds_conditional(tau, params_co, cfg.cond)
        cross, _ = model.pds_conditional(tau, params_cross, cfg.cond)
    else:
        co = model.pds(tau, params_co)
        cross = model.pds(tau, params_cross)
    return co, cross


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    cfg.require("grid", "grid")
    cfg.require("material", "material")
    cfg.require("mu_t", "antennas")
    tau = cfg.grid
    params_co, _ = _channel_params(cfg)
    co, cross = _model_channel_curves(cfg, tau)
    asym = model.pds_asymptote(tau, params_co)
    io.write_report_csv(
        args.out,
        [
            ("delay_ns", tau * 1e9),
            ("co_db", _db(co)),
            ("cross_db", _db(cross)),
            ("total_db", _db(co + cross)),
            ("asymptote_db", _db(asym)),
        ],
        [io.format_delay_ns] + [io.format_db] * 4,
    )
    _print_derived(cfg)
    if cfg.cond is not None:
        ratio_d = model.cpr_distance(params_co, cfg.cond)
        state = "LOS" if cfg.cond.los else "NLOS"
        print(f"CPR(d={_fmt(cfg.cond.distance)} m, {state}) = {_fmt(ratio_d)}")
        _, spike = model.pds_conditional(tau[:2], params_co, cfg.cond)
        if spike is not None:
            print(
                f"direct path: delay = {_fmt(spike.delay * 1e9)} ns, "
                f"weight = {_fmt(spike.weight)}"
            )
    print(f"wrote {args.out}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    cfg.require("sim", "simulation")
    cfg.require("material", "material")
    cfg.require("mu_t", "antennas")
    sim_cfg = cfg.sim
    if args.seed is not None:
        sim_cfg = mirror.SimConfig(
            n_realizations=sim_cfg.n_realizations,
            bin_width=sim_cfg.bin_width,
            max_delay=sim_cfg.max_delay,
            rng_seed=args.seed,
            placement=sim_cfg.placement,
            distance=sim_cfg.distance,
            los=sim_cfg.los,
        )
    co_sim, cross_sim = mirror.simulate_pdp(
        cfg.room, cfg.material, cfg.mu_t, cfg.mu_r, cfg.wavelength, sim_cfg,
        workers=args.workers,
    )
    co_model, cross_model = _model_channel_curves(cfg, co_sim.delays)
    io.write_report_csv(
        args.out,
        [
            ("delay_ns", co_sim.delays * 1e9),
            ("co_sim_db", _db(co_sim.values)),
            ("cross_sim_db", _db(cross_sim.values)),
            ("co_model_db", _db(co_model)),
            ("cross_model_db", _db(cross_model)),
        ],
        [io.format_delay_ns] + [io.format_db] * 4,
    )
    if args.trace_prefix:
        from .measurement import PdpTrace

        for tag, trace in (("co", co_sim), ("cross", cross_sim)):
            io.write_trace_csv(
                f"{args.trace_prefix}_{tag}.csv",
                PdpTrace(delays=trace.delays, values=_db(trace.values), scale="db"),
            )
    print(f"simulated {sim_cfg.n_realizations} realizations (seed {sim_cfg.rng_seed})")
    print(f"wrote {args.out}")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    cfg.require("pulse", "pulse")
    settings = cfg.fit if cfg.fit is not None else FitSettings()
    co_trace = io.read_trace_csv(args.co)
    cross_trace = io.read_trace_csv(args.cross)
    for name, tr in (("co", co_trace), ("cross", cross_trace)):
        if tr.scale != "db":
            raise ConfigError(f"{name} input trace must be in dB")
    problem = fitting.FitProblem(
        room=cfg.room,
        wavelength=cfg.wavelength,
        cond=cfg.cond,
        pulse=cfg.pulse,
        co_trace=co_trace,
        cross_trace=cross_trace,
        fit_window=settings.window,
        initial_guess=settings.initial_guess,
        bounds=settings.bounds,
        method=settings.method,
        max_iterations=settings.max_iterations,
    )
    result = fitting.fit(problem)

    print(f"g = {_fmt(result.g)}")
    print(f"gamma = {_fmt(result.gamma)}")
    print(f"xi = {_fmt(result.xi)}")
    print(f"P_noise = {_fmt(result.noise_power)}")
    print(f"T = {_fmt(result.t_rev * 1e9)} ns")
    print(f"T_p = {_fmt(result.t_mix * 1e9)} ns")
    print(f"mixing constant = {_fmt(result.mixing_constant)}")
    if math.isinf(result.cpr):
        print("CPR = inf")
    else:
        print(f"CPR = {_fmt(result.cpr)} ({_db_scalar(result.cpr):.4f} dB)")
    print(f"residual RMS = {result.residual_rms_db:.4f} dB")
    print(f"iterations = {result.iterations}")
    print(f"converged = {'yes' if result.converged else 'no'}")
    print(f"weakly identified (gamma, xi) = {'yes' if result.weakly_identified else 'no'}")

    co_fit, cross_fit = fitting.predict(result, cfg.cond, problem)
    fitted_material = model.WallMaterial(g=result.g, gamma=result.gamma)
    mu = model.PolGain.from_split(result.xi)
    fitted_params = model.PdsParams(
        room=cfg.room, material=fitted_material, mu_t=mu, mu_r=mu,
        wavelength=cfg.wavelength,
    )
    tau = co_trace.delays
    io.write_report_csv(
        args.out,
        [
            ("delay_ns", tau * 1e9),
            ("co_db", _db(co_fit.values)),
            ("cross_db", _db(cross_fit.values)),
            ("total_db", _db(co_fit.values + cross_fit.values)),
            ("asymptote_db", _db(model.pds_asymptote(tau, fitted_params))),
            ("co_meas_db", co_trace.values),
            ("cross_meas_db", cross_trace.values),
        ],
        [io.format_delay_ns] + [io.format_db] * 6,
    )
    print(f"wrote {args.out}")
    if args.strict and not result.converged:
        print("fit did not converge", file=sys.stderr)
        return 4
    return 0


def cmd_cpr(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    cfg.require("cpr_distances", "cpr")
    cfg.require("material", "material")
    cfg.require("mu_t", "antennas")
    params_co, _ = _channel_params(cfg)
    distances = np.array(cfg.cpr_distances)
    nlos = np.array([
        _db_scalar(model.cpr_distance(params_co, model.DistanceCondition(d, los=False)))
        for d in distances
    ])
    los = np.array([
        _db_scalar(model.cpr_distance(params_co, model.DistanceCondition(d, los=True)))
        for d in distances
    ])
    io.write_report_csv(
        args.out,
        [("d_m", distances), ("cpr_nlos_db", nlos), ("cpr_los_db", los)],
        [io.format_delay_ns, io.format_db, io.format_db],
    )
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roompol",
        description="Polarimetric reverberation model for in-room radio channels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="evaluate model curves onto a CSV")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_sim = sub.add_parser("simulate", help="run the mirror-source Monte Carlo")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.add_argument("--workers", type=int, default=None,
                       help="parallel workers (capped by ROOMPOL_MAX_WORKERS)")
    p_sim.add_argument("--trace-prefix", default=None,
                       help="also write per-channel trace CSVs with this prefix")
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit model parameters to measured PDP traces")
    p_fit.add_argument("--config", required=True)
    p_fit.add_argument("--co", required=True, help="co-polarized trace CSV (dB)")
    p_fit.add_argument("--cross", required=True, help="cross-polarized trace CSV (dB)")
    p_fit.add_argument("--out", required=True, help="fitted-curve CSV")
    p_fit.add_argument("--strict", action="store_true",
                       help="exit with code 4 when the fit does not converge")
    p_fit.set_defaults(func=cmd_fit)

    p_cpr = sub.add_parser("cpr", help="tabulate CPR versus distance")
    p_cpr.add_argument("--config", required=True)
    p_cpr.add_argument("--out", required=True)
    p_cpr.set_defaults(func=cmd_cpr)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
