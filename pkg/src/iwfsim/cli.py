"""Command-line front end.

Subcommands: ``run`` executes the configured algorithms on a scenario and
writes one trace CSV per algorithm plus a summary report; ``certificate``
prints the contraction certificate; ``bias-study`` writes the bias
histogram; ``lemma4`` simulates the scalar averaged recursion.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.  The
default output directory is ``$IWFSIM_OUT`` or ``./iwfsim-out``.
"""

from __future__ import annotations

import argparse
import os
import sys

from iwfsim.algorithms import Algorithm, StepSizeSchedule, run
from iwfsim.analysis import contraction_certificate
from iwfsim.config import (
    ConfigError,
    RunSettings,
    load_scenario,
    parse_algorithm,
)
from iwfsim.experiments import CANNED_SCENARIOS, Scenario, bias_study, lemma4_recursion
from iwfsim.noise import KINDS as NOISE_KINDS
from iwfsim.noise import NoiseModel

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _default_out() -> str:
    return os.environ.get("IWFSIM_OUT", "iwfsim-out")


def _write_trace_csv(path: str, trace) -> None:
    """One row per kept (iteration, user, channel), starting at iteration 1.

    The residual column repeats the iteration-level successive-iterate
    distance; the distance column is empty when the run has no reference.
    """
    lines = ["iteration,user,channel,power,water_level,residual,distance_to_reference"]
    for idx, t in enumerate(trace.kept_iterations):
        if t == 0:
            continue
        values = trace.iterates[idx].values
        levels = trace.water_levels[idx]
        residual = _fmt(trace.residuals[t - 1])
        if trace.distance_to_reference is not None:
            distance = _fmt(trace.distance_to_reference[idx])
        else:
            distance = ""
        for i in range(values.shape[0]):
            level = _fmt(levels[i])
            for k in range(values.shape[1]):
                lines.append(
                    f"{t},{i},{k},{_fmt(values[i, k])},{level},{residual},{distance}"
                )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _summary_lines(scenario, settings: RunSettings, traces) -> list[str]:
    cert = contraction_certificate(scenario.network)
    lines = [
        f"scenario: {scenario.name}",
        f"users: {scenario.network.num_users}",
        f"channels: {scenario.network.num_channels}",
        f"max_iters: {scenario.max_iters}",
        f"tolerance: {_fmt(settings.tolerance)}",
        "certificate:",
    ]
    lines += ["  " + line for line in cert.describe().splitlines()]
    lines.append("results:")
    for trace in traces:
        final_residual = _fmt(trace.residuals[-1])
        entry = (
            f"  {trace.algorithm.label}: verdict={trace.verdict}"
            f" convergence_iteration={trace.convergence_iteration}"
            f" final_residual={final_residual}"
        )
        if trace.distance_to_reference is not None:
            entry += f" final_distance={_fmt(trace.distance_to_reference[-1])}"
        lines.append(entry)
    return lines


def _apply_run_overrides(args, scenario, settings: RunSettings):
    """Fold command-line flags into the loaded scenario."""
    algorithms = scenario.algorithms
    if args.algos:
        specs = [s.strip() for s in args.algos.split(",") if s.strip()]
        resolved = []
        for spec in specs:
            if spec == "riwf" and args.lam is not None:
                resolved.append(Algorithm.riwf(args.lam))
            elif spec == "aiwf" and args.schedule:
                resolved.append(parse_algorithm(f"aiwf(schedule={args.schedule})"))
            else:
                resolved.append(parse_algorithm(spec))
        algorithms = tuple(resolved)

    noise = scenario.noise
    seed = args.seed if args.seed is not None else scenario.seed
    if args.noise:
        if args.noise not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {args.noise!r}; expected one of {NOISE_KINDS}")
        kwargs = {"kind": args.noise, "seed": seed}
        if args.noise == "gaussian_ier":
            kwargs["ier_db"] = args.ier_db if args.ier_db is not None else 20.0
        try:
            noise = NoiseModel(**kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif args.ier_db is not None:
        if noise.kind != "gaussian_ier":
            raise ConfigError("--ier-db requires gaussian_ier noise")
        noise = NoiseModel(kind="gaussian_ier", ier_db=args.ier_db, seed=seed)
    elif args.seed is not None:
        noise = NoiseModel(
            kind=noise.kind,
            ier_db=noise.ier_db,
            variance=noise.variance,
            decay_exponent=noise.decay_exponent,
            scale=noise.scale,
            seed=seed,
        )

    max_iters = args.max_iters if args.max_iters is not None else scenario.max_iters
    if args.tol is not None:
        settings.tolerance = args.tol
    return Scenario(
        name=scenario.name,
        network=scenario.network,
        noise=noise,
        algorithms=algorithms,
        max_iters=max_iters,
        seed=seed,
        start=scenario.start,
        reference=scenario.reference,
    )


def _cmd_run(args) -> int:
    scenario, settings, cfg_out = load_scenario(args.scenario)
    scenario = _apply_run_overrides(args, scenario, settings)
    out_dir = args.out or cfg_out or _default_out()
    os.makedirs(out_dir, exist_ok=True)

    traces = []
    for algo in scenario.algorithms:
        trace = run(
            scenario.network,
            algo,
            noise=scenario.noise,
            start=scenario.start if scenario.start is not None else "default",
            max_iters=scenario.max_iters,
            reference=scenario.reference,
            tol=settings.tolerance,
            window=settings.window,
            decimate=settings.decimation,
        )
        traces.append(trace)
        _write_trace_csv(os.path.join(out_dir, f"{scenario.name}_{algo.label}.csv"), trace)

    lines = _summary_lines(scenario, settings, traces)
    with open(os.path.join(out_dir, f"{scenario.name}_summary.txt"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def _cmd_certificate(args) -> int:
    scenario, _, _ = load_scenario(args.scenario)
    cert = contraction_certificate(scenario.network)
    print(f"scenario: {scenario.name}")
    print(cert.describe())
    return EXIT_OK


def _cmd_bias_study(args) -> int:
    result = bias_study(
        ier_db=args.ier_db,
        L=args.samples,
        repetitions=args.repetitions,
        seed=args.seed,
    )
    out_path = args.out
    if not out_path:
        os.makedirs(_default_out(), exist_ok=True)
        out_path = os.path.join(_default_out(), "bias_histogram.csv")
    lines = ["bin_left,bin_right,mass"]
    for left, right, mass in zip(result.bin_edges[:-1], result.bin_edges[1:], result.masses):
        lines.append(f"{_fmt(left)},{_fmt(right)},{_fmt(mass)}")
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    pooled = result.pooled
    print(f"samples_per_estimate: {result.samples_per_estimate}")
    print(f"repetitions: {result.repetitions}")
    print(f"mean: {_fmt(pooled.mean())}")
    print(f"std: {_fmt(pooled.std())}")
    print(f"histogram: {out_path}")
    return EXIT_OK


def _cmd_lemma4(args) -> int:
    if args.schedule == "harmonic":
        schedule = StepSizeSchedule.harmonic()
    else:
        algo = parse_algorithm(f"aiwf(schedule={args.schedule})")
        schedule = algo.schedule
    final_abs, trajectory = lemma4_recursion(
        schedule, args.noise_bound, args.T, seed=args.seed, w0=args.w0
    )
    if args.out:
        lines = ["iteration,w"]
        lines += [f"{t},{_fmt(w)}" for t, w in enumerate(trajectory)]
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"trajectory: {args.out}")
    print(f"final_abs_w: {_fmt(final_abs)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iwfsim",
        description="Iterative water-filling simulator for interference networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    canned = ", ".join(sorted(CANNED_SCENARIOS))
    p_run = sub.add_parser("run", help="run algorithms on a scenario")
    p_run.add_argument("scenario_pos", nargs="?", default=None, metavar="SCENARIO",
                       help=f"canned scenario ({canned}) or config file path")
    p_run.add_argument("--scenario", dest="scenario_flag", default=None)
    p_run.add_argument("--algos", default=None,
                       help="comma list, e.g. iwf,riwf(lambda=0.4),aiwf(schedule=harmonic)")
    p_run.add_argument("--noise", default=None, help="override noise kind")
    p_run.add_argument("--ier-db", type=float, default=None)
    p_run.add_argument("--lambda", dest="lam", type=float, default=None,
                       help="relaxation factor for bare 'riwf' in --algos")
    p_run.add_argument("--schedule", default=None,
                       help="schedule for bare 'aiwf' in --algos, e.g. harmonic")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--max-iters", type=int, default=None)
    p_run.add_argument("--tol", type=float, default=None)
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.set_defaults(func=_cmd_run)

    p_cert = sub.add_parser("certificate", help="print the contraction certificate")
    p_cert.add_argument("scenario_pos", nargs="?", default=None, metavar="SCENARIO")
    p_cert.add_argument("--scenario", dest="scenario_flag", default=None)
    p_cert.set_defaults(func=_cmd_certificate)

    p_bias = sub.add_parser("bias-study", help="bias distribution Monte Carlo study")
    p_bias.add_argument("--samples", type=int, default=1000, metavar="L")
    p_bias.add_argument("--repetitions", type=int, default=1000)
    p_bias.add_argument("--ier-db", type=float, default=10.0)
    p_bias.add_argument("--seed", type=int, default=0)
    p_bias.add_argument("--out", default=None, help="histogram CSV path")
    p_bias.set_defaults(func=_cmd_bias_study)

    p_l4 = sub.add_parser("lemma4", help="scalar averaged-recursion experiment")
    p_l4.add_argument("--T", type=int, default=100000)
    p_l4.add_argument("--noise-bound", type=float, default=1.0)
    p_l4.add_argument("--schedule", default="harmonic")
    p_l4.add_argument("--seed", type=int, default=0)
    p_l4.add_argument("--w0", type=float, default=1.0)
    p_l4.add_argument("--out", default=None, help="trajectory CSV path")
    p_l4.set_defaults(func=_cmd_lemma4)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "scenario_pos"):
        scenario = args.scenario_flag or args.scenario_pos
        if scenario is None:
            print("error: a scenario name or config path is required", file=sys.stderr)
            return EXIT_CONFIG
        args.scenario = scenario
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - the CLI maps any failure to exit 3
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
