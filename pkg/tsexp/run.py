"""CLI entry point for tsexp.

Usage:
    python run.py simulate --input test_data/process_spec.json --T 100 --seed 7 --output-dir runs/sim
    python run.py estimate --input runs/sim/experiment.csv --p 0..3 --running
    python run.py test --input runs/sim/experiment.csv --p 0,1 --M 1000 --seed 11
    python run.py pool --input panel.csv --independent --method fisher pooled-conservative --seed 3
    python run.py slip --input test_data/orders.csv --mechanism test_data/mechanism.json
    python run.py replicate --seed 2024 --studies clt uniformity

Every command writes its results plus events/events.jsonl and transcript.md
under --output-dir (default TSEXP_OUTPUT_DIR). Exit codes: 0 success,
2 validation report or refused input, 3 malformed input file.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Callable

import pandas as pd

import config
from core.experiment import UnitExperiment, arm_summary, validate_experiment
from core.mechanisms import BernoulliConstant, mechanism_from_spec
from estimators.dispatch import estimate, running_estimate
from events import EventKind, EventLog, EventLogHandler
from export.results import ResultWriter
from inference.conservative import conservative_test
from inference.randomization import exact_test
from ingest import (
    SchemaError,
    experiment_frame,
    read_experiment,
    read_mechanism_spec,
    read_orders,
    read_panel,
    read_process_spec,
)
from models import (
    Alternative,
    ArmSummary,
    EstimandSpec,
    MechanismKind,
    MechanismSpec,
    PoolMethod,
    SimulationSummary,
    TestMethod,
    TieRule,
    TrueLagEffect,
)
from pooling.fisher import fisher_panel_test
from pooling.pooled import pooled_conservative_test, pooled_exact_test
from process.estimands import true_lag_effect
from process.simulator import draw_noise, simulate_experiment
from seeding import derive_seed
from slippage.slippage import orders_to_experiment
from study.harness import STUDIES, ReplicateScale, run_replication


log = logging.getLogger("tsexp")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SCHEMA = 3

DEFAULT_MECHANISM = MechanismSpec(kind=MechanismKind.BERNOULLI_CONSTANT, pi=0.5)


class ValidationFailed(Exception):
    """Raised after a non-empty validation report has been written."""


# --------------------------------------------------------------------------- #
# flag parsing helpers
# --------------------------------------------------------------------------- #


def parse_lags(text: str) -> list[int]:
    """`3`, `0,1,2` or the inclusive range `0..4`."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lags = list(range(int(lo), int(hi) + 1))
        else:
            lags = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"lags must look like 2, 0,1,2 or 0..4; got {text!r}") from None
    if not lags or min(lags) < 0:
        raise argparse.ArgumentTypeError(f"lags must be a non-empty set of integers >= 0; got {text!r}")
    return lags


def parse_suffix(text: str) -> tuple[int, ...]:
    """Treatment suffix written oldest first, e.g. `011` or `0,1,1`."""
    digits = text.replace(",", "").strip()
    if not digits or any(c not in "01" for c in digits):
        raise argparse.ArgumentTypeError(f"treatment suffix must be binary digits; got {text!r}")
    return tuple(int(c) for c in digits)


def estimands_from_args(args: argparse.Namespace) -> list[EstimandSpec]:
    if args.m_period is not None:
        if args.w_target is None or args.w_comparison is None:
            raise ValueError("--m-period needs --w-target and --w-comparison")
        return [EstimandSpec(m=args.m_period, w_target=args.w_target, w_comparison=args.w_comparison)]
    proxy = "lagged-outcome" if args.proxy else None
    return [
        EstimandSpec(p=p, q=args.q, proxy=proxy, standardized=args.standardized)
        for p in args.p
    ]


def _mechanism_arg(args: argparse.Namespace) -> MechanismSpec | None:
    path = getattr(args, "mechanism", None)
    return read_mechanism_spec(path) if path is not None else None


def _fmt(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.6g}"


def _check(e: UnitExperiment, writer: ResultWriter) -> None:
    violations = validate_experiment(e)
    if not violations:
        return
    writer.write_json(f"validation_{e.unit_id}", violations, summary=f"{len(violations)} violation(s)")
    print(f"VALIDATION FAILED: unit {e.unit_id}, {len(violations)} violation(s)", file=sys.stderr)
    for v in violations[:20]:
        where = "" if v.index is None else f" at t={v.index}"
        print(f"  - {v.rule}{where}: {v.message}", file=sys.stderr)
    if len(violations) > 20:
        print(f"  ... {len(violations) - 20} more in validation_{e.unit_id}.json", file=sys.stderr)
    raise ValidationFailed(e.unit_id)


def _arms_frame(arms: list[ArmSummary]) -> pd.DataFrame:
    return pd.DataFrame([a.model_dump() for a in arms])


# --------------------------------------------------------------------------- #
# commands
# --------------------------------------------------------------------------- #


def cmd_simulate(args: argparse.Namespace, cfg: config.RunConfig, writer: ResultWriter) -> int:
    spec = read_process_spec(args.input)
    mech_spec = _mechanism_arg(args) or DEFAULT_MECHANISM
    if spec.is_degenerate:
        log.warning(
            "process has a zero innovation scale (sigma0=%s, sigma1=%s); the simulated "
            "series is not suitable for the randomization tests",
            spec.sigma0, spec.sigma1,
        )
    noise_seed, path_seed = derive_seed(cfg.seed, 0), derive_seed(cfg.seed, 1)
    noise = draw_noise(spec, args.T, noise_seed)
    mechanism = mechanism_from_spec(mech_spec)
    e = simulate_experiment(spec, noise, mechanism, path_seed, unit_id=args.unit_id or "sim")
    writer.write_frame("experiment", experiment_frame(e), summary=f"T={e.T}")

    effects, series = [], []
    for p in range(min(args.max_lag, e.T - 1) + 1):
        tau = true_lag_effect(spec, noise, e.treatments, p)
        effects.append(TrueLagEffect(p=p, tau_bar=float(tau.mean()), T_effective=int(tau.size)))
        series.append(pd.DataFrame({"p": p, "t": range(p + 1, e.T + 1), "tau": tau}))
    writer.write_frame("true_effects", pd.concat(series, ignore_index=True))
    writer.write_json(
        "simulation",
        SimulationSummary(
            spec=spec, mechanism=mech_spec, T=e.T, seed=cfg.seed,
            noise_seed=noise_seed, path_seed=path_seed, true_effects=effects,
        ),
    )
    treated = int(e.w.sum())
    print(f"SIMULATE: T={e.T}, treated={treated}, "
          + ", ".join(f"tau_bar_{x.p}={x.tau_bar:.6g}" for x in effects))
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace, cfg: config.RunConfig, writer: ResultWriter) -> int:
    e = read_experiment(args.input, mechanism=_mechanism_arg(args))
    _check(e, writer)
    writer.write_frame("arms", _arms_frame([arm_summary(e)]))
    for est in estimands_from_args(args):
        result = estimate(e, est, ci_level=1.0 - cfg.alpha)
        writer.write_json(f"estimate_{est.label}", result, summary=f"tau_bar_hat={result.tau_bar_hat:.6g}")
        if args.running:
            writer.write_frame(f"running_{est.label}", running_estimate(result))
        print(f"ESTIMATE {est.label}: tau_bar_hat={result.tau_bar_hat:.6g} "
              f"gamma_hat={result.gamma_hat:.6g} "
              f"[{result.ci_low:.6g}, {result.ci_high:.6g}] T_eff={result.T_effective}")
    return EXIT_OK


def cmd_test(args: argparse.Namespace, cfg: config.RunConfig, writer: ResultWriter) -> int:
    e = read_experiment(args.input, mechanism=_mechanism_arg(args))
    _check(e, writer)
    methods = set(args.method)
    for est in estimands_from_args(args):
        if TestMethod.EXACT in methods:
            res = exact_test(
                e, est, cfg.replicates, cfg.seed,
                tie_rule=args.tie_rule, alternative=args.alternative, keep_draws=args.keep_draws,
                threads=cfg.threads, chunk=cfg.replicate_chunk,
            )
            writer.write_json(f"test_exact_{est.label}", res, summary=f"p={_fmt(res.p_value)}")
            if res.null_draws is not None:
                writer.write_draws(f"test_exact_{est.label}", res.null_draws)
            print(f"TEST {est.label}: estimate={_fmt(res.estimate)} p={_fmt(res.p_value)} "
                  f"(exact, M={cfg.replicates}, {args.tie_rule.value})")
        if TestMethod.CONSERVATIVE in methods:
            res = conservative_test(e, est, alternative=args.alternative)
            writer.write_json(f"test_conservative_{est.label}", res, summary=f"p={_fmt(res.p_value)}")
            print(f"TEST {est.label}: estimate={_fmt(res.estimate)} z={_fmt(res.statistic)} "
                  f"p={_fmt(res.p_value)} (conservative)" + (f" [{res.note}]" if res.note else ""))
    return EXIT_OK


def cmd_pool(args: argparse.Namespace, cfg: config.RunConfig, writer: ResultWriter) -> int:
    panel = read_panel(args.input, mechanism=_mechanism_arg(args), independent=args.independent)
    for unit in panel.units:
        _check(unit, writer)
    writer.write_frame("arms", _arms_frame([arm_summary(u) for u in panel.units]))
    methods = set(args.method)
    for est in estimands_from_args(args):
        results = []
        if PoolMethod.POOLED_EXACT in methods:
            results.append(pooled_exact_test(
                panel, est, cfg.replicates, cfg.seed,
                tie_rule=args.tie_rule, alternative=args.alternative, keep_draws=args.keep_draws,
                threads=cfg.threads, chunk=cfg.replicate_chunk,
            ))
        if PoolMethod.POOLED_CONSERVATIVE in methods:
            results.append(pooled_conservative_test(panel, est, alternative=args.alternative))
        if PoolMethod.FISHER in methods:
            results.append(fisher_panel_test(
                panel, est, cfg.replicates, cfg.seed, tie_rule=args.tie_rule, threads=cfg.threads,
            ))
        for res in results:
            name = f"pool_{res.method.value}_{est.label}"
            writer.write_json(name, res, summary=f"p={res.p_value:.6g}")
            if res.null_draws is not None:
                writer.write_draws(name, res.null_draws)
            print(f"POOL {est.label}: {res.method.value} pooled={_fmt(res.tau_bar_pooled)} "
                  f"stat={_fmt(res.statistic)} p={res.p_value:.6g} units={len(res.per_unit)}")
    return EXIT_OK


def cmd_slip(args: argparse.Namespace, cfg: config.RunConfig, writer: ResultWriter) -> int:
    orders = read_orders(args.input)
    mech_spec = _mechanism_arg(args)
    if mech_spec is None:
        log.info("no --mechanism given; assuming Bernoulli(1/2) assignment")
        mechanism = BernoulliConstant(0.5)
    else:
        mechanism = mechanism_from_spec(mech_spec, sorted(o.randomization_time for o in orders))
    e = orders_to_experiment(orders, args.unit_id or Path(args.input).stem, mechanism)
    writer.write_frame("experiment", experiment_frame(e), summary=f"{e.T} orders")
    arms = arm_summary(e)
    writer.write_frame("arms", _arms_frame([arms]))
    print(f"SLIP: {e.T} orders, A={arms.n_control} (mean {_fmt(arms.mean_control)} bps), "
          f"B={arms.n_treated} (mean {_fmt(arms.mean_treated)} bps)")
    return EXIT_OK


def cmd_replicate(args: argparse.Namespace, cfg: config.RunConfig, writer: ResultWriter) -> int:
    overrides = {
        "T": args.T, "M": args.M, "outer": args.outer,
        "resamples": args.resamples, "power_outer": args.power_outer, "alpha": args.alpha,
    }
    scale = ReplicateScale(**{k: v for k, v in overrides.items() if v is not None},
                           tie_rule=args.tie_rule)
    started = time.monotonic()
    outputs = run_replication(
        scale, cfg.seed, studies=args.studies, threads=cfg.threads,
        write=lambda name, frame: writer.write_frame(name, frame),
    )
    for out in outputs:
        print(f"STUDY {out.name}: " + ", ".join(f"{k} ({len(f)} rows)" for k, f in out.frames.items()))
    print(f"REPLICATE: {len(outputs)} studies in {time.monotonic() - started:.1f}s")
    return EXIT_OK


Command = Callable[[argparse.Namespace, config.RunConfig, ResultWriter], int]

COMMANDS: dict[str, Command] = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "test": cmd_test,
    "pool": cmd_pool,
    "slip": cmd_slip,
    "replicate": cmd_replicate,
}


def _is_stochastic(args: argparse.Namespace) -> bool:
    if args.command in ("simulate", "replicate"):
        return True
    if args.command == "test":
        return TestMethod.EXACT in args.method
    if args.command == "pool":
        return bool({PoolMethod.POOLED_EXACT, PoolMethod.FISHER} & set(args.method))
    return False


# --------------------------------------------------------------------------- #
# parser
# --------------------------------------------------------------------------- #


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output-dir", type=Path, default=None,
                   help="Directory for results, events/ and transcript.md (default TSEXP_OUTPUT_DIR)")
    p.add_argument("--seed", type=int, default=None, help="Master seed; required for stochastic commands")
    p.add_argument("--threads", type=int, default=None, help="Worker threads (default TSEXP_THREADS)")
    p.add_argument("--alpha", type=float, default=None, help="Test level / 1 - CI level (default TSEXP_ALPHA)")
    p.add_argument("--verbose", action="store_true")


def _add_estimand(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p", type=parse_lags, default=[0],
                   help="Lag(s): 2, 0,1,2 or the range 0..4; one result per lag")
    p.add_argument("--q", type=int, default=0, help="Steps averaged over before the switched time")
    p.add_argument("--proxy", action="store_true", help="Subtract the lagged-outcome proxy")
    p.add_argument("--standardized", action="store_true", help="Use the null-variance standardized statistic")
    p.add_argument("--m-period", type=int, default=None, help="m for the m-period causal impact")
    p.add_argument("--w-target", type=parse_suffix, default=None, help="Target suffix of length m+1, e.g. 11")
    p.add_argument("--w-comparison", type=parse_suffix, default=None, help="Comparison suffix, e.g. 00")
    p.add_argument("--mechanism", type=Path, default=None,
                   help="Mechanism JSON; default is the p1 column as a Bernoulli schedule")


def _add_testing(p: argparse.ArgumentParser) -> None:
    p.add_argument("--M", type=int, default=None, help="Monte Carlo replicates (default TSEXP_REPLICATES)")
    p.add_argument("--tie-rule", type=TieRule, choices=[r.value for r in TieRule], default=TieRule.STRICT)
    p.add_argument("--alternative", type=Alternative, choices=[a.value for a in Alternative], default=Alternative.TWO_SIDED)
    p.add_argument("--keep-draws", action="store_true", help="Also write the null draws as CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsexp", description="Randomization inference for time-series experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Simulate a potential-outcome process under a mechanism")
    p.add_argument("--input", type=Path, required=True, help="Process spec JSON")
    p.add_argument("--mechanism", type=Path, default=None, help="Mechanism JSON (default Bernoulli 1/2)")
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--max-lag", type=int, default=3, help="True lag effects written for p = 0..max-lag")
    p.add_argument("--unit-id", default=None)
    _add_common(p)

    p = sub.add_parser("estimate", help="Horvitz-Thompson estimates with variance bounds")
    p.add_argument("--input", type=Path, required=True, help="Experiment CSV (t, ts, y, w, p1)")
    p.add_argument("--running", action="store_true", help="Write the running estimate with its band")
    _add_estimand(p)
    _add_common(p)

    p = sub.add_parser("test", help="Exact randomization and/or conservative tests")
    p.add_argument("--input", type=Path, required=True, help="Experiment CSV (t, ts, y, w, p1)")
    p.add_argument("--method", type=TestMethod, choices=[m.value for m in TestMethod], nargs="+",
                   default=[TestMethod.EXACT, TestMethod.CONSERVATIVE])
    _add_estimand(p)
    _add_testing(p)
    _add_common(p)

    p = sub.add_parser("pool", help="Pool a multi-unit panel")
    p.add_argument("--input", type=Path, required=True, help="Panel CSV with a unit_id column")
    p.add_argument("--method", type=PoolMethod, choices=[m.value for m in PoolMethod], nargs="+",
                   default=[PoolMethod.POOLED_EXACT, PoolMethod.POOLED_CONSERVATIVE, PoolMethod.FISHER])
    p.add_argument("--independent", action="store_true",
                   help="Assert that assignment is independent across units")
    _add_estimand(p)
    _add_testing(p)
    _add_common(p)

    p = sub.add_parser("slip", help="Convert order records to a slippage experiment CSV")
    p.add_argument("--input", type=Path, required=True, help="Orders CSV, one row per fill")
    p.add_argument("--mechanism", type=Path, default=None, help="Mechanism JSON with probability regimes")
    p.add_argument("--unit-id", default=None)
    _add_common(p)

    p = sub.add_parser("replicate", help="Run the simulation studies and write plot-ready CSVs")
    p.add_argument("--studies", nargs="+", choices=STUDIES, default=list(STUDIES))
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--outer", type=int, default=None, help="Outer replications of the uniformity study")
    p.add_argument("--resamples", type=int, default=None, help="Path resamples for fixed-outcome studies")
    p.add_argument("--power-outer", type=int, default=None, help="Outer replications per power grid point")
    p.add_argument("--tie-rule", type=TieRule, choices=[r.value for r in TieRule], default=TieRule.STRICT)
    _add_common(p)
    return parser


def resolve_config(args: argparse.Namespace) -> config.RunConfig:
    given = {
        "seed": args.seed,
        "threads": args.threads,
        "alpha": args.alpha,
        "output_dir": args.output_dir,
        "replicates": getattr(args, "M", None),
        "log_level": "DEBUG" if args.verbose else None,
    }
    return config.RunConfig(
        command=args.command,
        stochastic=_is_stochastic(args),
        **{k: v for k, v in given.items() if v is not None},
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ValueError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_INVALID
    config.configure_logging(cfg.log_level)

    events = EventLog(cfg.output_dir / "events")
    writer = ResultWriter(cfg.output_dir, args.command, events)
    handler = EventLogHandler(events, args.command)
    root = logging.getLogger()
    root.addHandler(handler)
    events.emit(args.command, EventKind.COMMAND_STARTED, seed=cfg.seed,
                extras=cfg.model_dump(mode="json", exclude={"command", "seed"}))
    print(f"OUTPUTS: {cfg.output_dir}")
    started = time.monotonic()

    def _failed(code: int, message: str) -> int:
        events.emit(args.command, EventKind.COMMAND_FAILED, seed=cfg.seed, error=message)
        return code

    try:
        code = COMMANDS[args.command](args, cfg, writer)
        events.emit(args.command, EventKind.COMMAND_COMPLETED, seed=cfg.seed,
                    duration_ms=int((time.monotonic() - started) * 1000),
                    summary=f"{len(writer.produced)} file(s) written")
    except ValidationFailed as exc:
        code = _failed(EXIT_INVALID, f"validation report for unit {exc}")
    except SchemaError as exc:
        print(f"SCHEMA ERROR: {exc}", file=sys.stderr)
        code = _failed(EXIT_SCHEMA, str(exc))
    except (ValueError, FileNotFoundError) as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        code = _failed(EXIT_INVALID, str(exc))
    finally:
        root.removeHandler(handler)
    transcript = writer.write_transcript()
    print(f"      events:     {events.events_path}")
    print(f"      transcript: {transcript}")
    return code


if __name__ == "__main__":
    sys.exit(main())
