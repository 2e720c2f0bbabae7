"""Experiment orchestration and the ``osa-bench`` command line tool.

Five run modes produce CSV tables: ``curve`` (sensing operating curves per
reporting scheme), ``chain`` (analytical throughput versus a swept scenario
variable), ``simulate`` (Monte Carlo estimates with confidence intervals),
``optimize`` (constrained grid search frontier), and ``compare`` (paired
analytical/simulated values with CI verdicts).  Output is deterministic:
identical (config, seed) pairs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field, replace

from . import __version__
from .chain import ModelKind, mac_throughput
from .config import ExperimentConfig, parse_config
from .detection import PhyParams, node_probs
from .errors import InfeasibleError, ValidationError
from .optimize import SearchGrid, _solve_threshold, optimize
from .sensing import (
    FusionConfig,
    ReportingScheme,
    fixed_operating_point,
    group_layout,
    network_detection_summary,
)
from .simulate import PuTrafficModel, run_mac_sim

OUTPUT_DIR_ENV = "OSA_BENCH_OUT_DIR"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INFEASIBLE = 2
EXIT_DISAGREEMENT = 3

#: fraction of compare-mode rows that must sit inside the simulation CI
AGREEMENT_THRESHOLD = 0.9


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[tuple]
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.12g}"
    return str(value)


def emit_csv(table: ResultTable, path) -> None:
    """Write a table as UTF-8 CSV with '#' metadata comment lines."""
    lines = [f"# {key}={table.metadata[key]}" for key in sorted(table.metadata)]
    lines.append(",".join(table.columns))
    for row in table.rows:
        if len(row) != len(table.columns):
            raise ValidationError(
                f"row arity {len(row)} does not match {len(table.columns)} columns"
            )
        lines.append(",".join(_fmt(v) for v in row))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _curve_t_e_grid(config: ExperimentConfig) -> tuple[float, ...]:
    values = config.sensing["t_e_values"]
    if values != "auto":
        return values
    steps = int(round(math.log10(config.scenario["t_t"]) * 10))
    return tuple(10.0 ** (i / 10.0) for i in range(steps + 1))


def _run_curve(config: ExperimentConfig) -> ResultTable:
    """Sensing operating curves: p_f at pinned network p_d, plus time budget.

    The swept variable is t_e by default, or kappa when [run] sweep = kappa.
    Points where the detection requirement is unreachable are skipped.
    """
    scene = config.scene()
    sweep = config.run["sweep"]
    if sweep not in ("t_e", "kappa"):
        sweep = "t_e"
    columns = [
        "scheme", "kappa", "n_g", "t_e_us", "theta", "p10", "p11",
        "p_f", "p_d", "t_s_us", "t_r_us", "t_q_us",
    ]
    rows = []
    n_g = config.sensing["n_g"]
    layout = group_layout(scene.M, scene.N, n_g)
    p_d_min = config.sensing["p_d_min"]
    if sweep == "kappa":
        kappas = [int(v) for v in config.run["sweep_values"]]
        t_e_values = [config.sensing["t_e"]]
    else:
        kappas = [config.sensing["kappa"]]
        t_e_values = list(_curve_t_e_grid(config))
    for scheme in config.schemes():
        for kappa in kappas:
            if kappa > layout.min_users:
                raise ValidationError(
                    f"kappa={kappa} exceeds group size (min users {layout.min_users})"
                )
            for t_e in t_e_values:
                phy = PhyParams(
                    t_e=t_e, alpha=config.alpha, M=scene.M, b=scene.b,
                    gamma=scene.gamma, theta=0.0,
                )
                try:
                    theta = _solve_threshold(
                        layout, scheme, kappa, scene.p_e,
                        phy.epsilon, phy.collected_gamma, p_d_min,
                    )
                except InfeasibleError:
                    continue
                phy = replace(phy, theta=theta)
                probs = node_probs(phy)
                summary = network_detection_summary(
                    layout, scheme, FusionConfig(kappa, scene.p_e, scene.q_p), phy, scene.C
                )
                rows.append((
                    scheme.value, kappa, n_g, t_e, theta, probs.p10, probs.p11,
                    summary.p_f, summary.p_d, summary.t_s, summary.t_r, summary.t_q,
                ))
    return ResultTable(columns=columns, rows=rows)


def _sweep_scenes(config: ExperimentConfig):
    """Yield (value, scene) pairs for the configured scenario sweep."""
    sweep = config.run["sweep"]
    if sweep not in ("q_p", "d_kb", "t_p", "N"):
        raise ValidationError(f"sweep variable {sweep!r} is not valid for this mode")
    for value in config.run["sweep_values"]:
        if sweep == "N":
            yield value, config.scene(n=int(value))
        else:
            yield value, config.scene(**{sweep.lower() if sweep != "N" else "n": value})


def _run_chain(config: ExperimentConfig) -> ResultTable:
    columns = ["variant", "control", "swept_var", "value", "R_mbps", "xi", "R_t_mbps"]
    rows = []
    se = config.sensing
    for value, scene in _sweep_scenes(config):
        for variant in config.variants():
            report = mac_throughput(
                scene, variant, se["p_d"], se["p_f"], se["t_q"], config.model_kind
            )
            rows.append((
                variant.code, variant.control.value, config.run["sweep"], value,
                report.R, report.xi, report.R_t,
            ))
    return ResultTable(columns=columns, rows=rows)


def _run_simulate(config: ExperimentConfig, seed: int) -> ResultTable:
    columns = [
        "variant", "control", "traffic", "swept_var", "value",
        "mean_mbps", "ci90_mbps", "batches", "events_per_batch", "warmup",
    ]
    rows = []
    se, rn = config.sensing, config.run
    det = fixed_operating_point(se["p_f"], se["p_d"], se["t_q"])
    for value, scene in _sweep_scenes(config):
        traffic = PuTrafficModel.from_code(rn["traffic"], scene.q_p)
        for variant in config.variants():
            sim = run_mac_sim(
                scene, variant, det, traffic,
                batches=rn["batches"], events_per_batch=rn["events_per_batch"],
                warmup=rn["warmup"], seed=seed,
            )
            est = sim.throughput
            rows.append((
                variant.code, variant.control.value, rn["traffic"], rn["sweep"], value,
                est.mean, est.ci_half_width, est.batches, est.events_per_batch, est.warmup,
            ))
    return ResultTable(columns=columns, rows=rows)


def _run_optimize(config: ExperimentConfig, jobs: int) -> ResultTable:
    """Grid-search frontier; rows deduplicated to unique (kappa, t_e, n_g).

    Seeds of the per-node false-alarm grid resolve to identical operating
    points under the p_d equality constraint, so one row per distinct
    operating point carries the full information of the frontier.
    """
    scene = config.scene()
    se = config.sensing
    default = SearchGrid.default(scene)
    grid = SearchGrid(
        kappa_values=default.kappa_values if se["kappa_values"] == "auto" else se["kappa_values"],
        t_e_values=default.t_e_values if se["t_e_values"] == "auto" else se["t_e_values"],
        n_g_values=default.n_g_values if se["n_g_values"] == "auto" else se["n_g_values"],
        p_f_values=default.p_f_values if se["p_f_values"] == "auto" else se["p_f_values"],
    )
    columns = [
        "variant", "scheme", "kappa", "t_e_us", "n_g", "theta",
        "t_q_us", "p_d", "p_f", "R_mbps", "xi", "R_t_mbps", "is_best",
    ]
    rows = []
    for scheme in config.schemes():
        for variant in config.variants():
            result = optimize(
                grid, scene, variant, scheme, config.model_kind,
                p_d_min=se["p_d_min"], alpha=config.alpha, jobs=jobs,
            )
            seen = set()
            best = result.best
            for pt in result.frontier:
                key = (pt.kappa, pt.t_e, pt.n_g)
                if key in seen:
                    continue
                seen.add(key)
                is_best = int(
                    (pt.kappa, pt.t_e, pt.n_g) == (best.kappa, best.t_e, best.n_g)
                )
                rows.append((
                    variant.code, scheme.value, pt.kappa, pt.t_e, pt.n_g, pt.theta,
                    pt.t_q, pt.p_d, pt.p_f, pt.R, pt.xi, pt.R_t, is_best,
                ))
    return ResultTable(columns=columns, rows=rows)


def _run_compare(config: ExperimentConfig, seed: int) -> ResultTable:
    columns = [
        "variant", "control", "swept_var", "value",
        "analytic_Rt", "sim_mean", "sim_ci90", "verdict",
    ]
    rows = []
    se, rn = config.sensing, config.run
    det = fixed_operating_point(se["p_f"], se["p_d"], se["t_q"])
    cell = 0
    for value, scene in _sweep_scenes(config):
        for variant in config.variants():
            report = mac_throughput(
                scene, variant, se["p_d"], se["p_f"], se["t_q"], config.model_kind
            )
            sim = run_mac_sim(
                scene, variant, det, PuTrafficModel.from_code(rn["traffic"], scene.q_p),
                batches=rn["batches"], events_per_batch=rn["events_per_batch"],
                warmup=rn["warmup"], seed=seed + cell,
            )
            cell += 1
            within = sim.throughput.contains(report.R_t)
            rows.append((
                variant.code, variant.control.value, rn["sweep"], value,
                report.R_t, sim.throughput.mean, sim.throughput.ci_half_width,
                "within_ci" if within else "outside_ci",
            ))
    return ResultTable(columns=columns, rows=rows)


def run_experiment(
    config: ExperimentConfig, seed: int | None = None, jobs: int | None = None
) -> ResultTable:
    """Dispatch one experiment; the table carries reproducibility metadata."""
    seed = config.run["seed"] if seed is None else seed
    jobs = config.run["jobs"] if jobs is None else jobs
    mode = config.run["mode"]
    if mode == "curve":
        table = _run_curve(config)
    elif mode == "chain":
        table = _run_chain(config)
    elif mode == "simulate":
        table = _run_simulate(config, seed)
    elif mode == "optimize":
        table = _run_optimize(config, jobs)
    elif mode == "compare":
        table = _run_compare(config, seed)
    else:  # unreachable: parse_config validates the mode
        raise ValidationError(f"unknown mode {mode!r}")
    table.metadata = {
        "config_hash": config.digest(),
        "mode": mode,
        "seed": seed,
        "tool": "osa-bench",
        "version": __version__,
    }
    return table


def _output_path(args, config: ExperimentConfig) -> str:
    if args.out:
        return args.out
    if config.run["output"]:
        return config.run["output"]
    out_dir = os.environ.get(OUTPUT_DIR_ENV, ".")
    return os.path.join(out_dir, f"{config.run['mode']}.csv")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="osa-bench",
        description="Analytical and Monte Carlo benchmarks for joint "
        "spectrum-sensing / multichannel-MAC designs.",
    )
    parser.add_argument("mode", choices=("curve", "chain", "simulate", "optimize", "compare"))
    parser.add_argument("--config", help="path to an INI experiment description")
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--jobs", type=int, help="parallel workers for optimize mode")
    args = parser.parse_args(argv)

    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        config = parse_config(text)
        config.run["mode"] = args.mode
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        table = run_experiment(config, seed=args.seed, jobs=args.jobs)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    path = _output_path(args, config)
    try:
        emit_csv(table, path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"{len(table.rows)} rows -> {path}")

    if config.run["mode"] == "compare" and table.rows:
        verdicts = table.column("verdict")
        agreement = sum(v == "within_ci" for v in verdicts) / len(verdicts)
        if agreement < AGREEMENT_THRESHOLD:
            print(
                f"analysis/simulation disagreement: only {agreement:.0%} of rows "
                f"within the 90% CI (threshold {AGREEMENT_THRESHOLD:.0%})",
                file=sys.stderr,
            )
            return EXIT_DISAGREEMENT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
