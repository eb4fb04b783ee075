"""Report-writing commands behind the CLI subcommands.

Each ``cmd_*`` takes a validated :class:`ExperimentConfig` and an output
directory, writes CSV files there and returns their paths.  Numbers are
written with six significant digits so reruns with a fixed seed produce
identical files.
"""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence

import numpy as np

from .config import ExperimentConfig
from .diagnosis import Diagnosis, diagnose
from .errors import ConfigError, InfeasibleNetworkError
from .analytic import relay_interruption_matrix, single_hop_from_matrix, tier_interruption_matrix
from .link_metrics import (
    FadingSurvival,
    availability,
    combine_flows,
    coverage_probability,
    db_to_linear,
    multiflow_interruption,
    urllc_rate,
)
from .markov import reachable_tiers
from .pipeline import AnalysisResult, run_analysis
from .simulator import SimulationEstimate, estimate, exhaustive_search
from .strategy import strategy_reports
from .sweeps import SweepRow, run_sweep

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    logger.debug("Wrote %s", path)
    return path


def _out_dir(out: Any) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _tier_labels(k: int, absorbing: bool = False) -> List[str]:
    labels = [f"tier_{j + 1}" for j in range(k)]
    return labels + ["interrupted"] if absorbing else labels


def _write_matrix(path: Path, matrix: np.ndarray, k: int) -> Path:
    absorbing = matrix.shape[1] == k + 1
    rows = []
    for i, row in enumerate(matrix):
        label = f"tier_{i + 1}" if i < k else "interrupted"
        rows.append([label, *row])
    return write_csv(path, ["from", *_tier_labels(k, absorbing)], rows)


def write_diagnostics(out: Path, diagnoses: List[Diagnosis]) -> Path:
    return write_csv(
        out / "diagnostics.csv",
        ["category", "tier", "root_cause", "suggestion"],
        [[d.error_category, "" if d.tier is None else d.tier + 1, d.root_cause, d.suggestion] for d in diagnoses],
    )


def analyze(config: ExperimentConfig, workers: int = 1) -> AnalysisResult:
    return run_analysis(
        config.tiers,
        config.constraints,
        strategy=config.explicit_strategy,
        mode=config.strategy_mode,
        horizons=config.horizons,
        workers=workers,
    )


def cmd_analyze(config: ExperimentConfig, out: Any, workers: int = 1) -> List[Path]:
    """Interruption matrix, TPMs, stationary distribution and hop statistics."""
    out = _out_dir(out)
    k = len(config.tiers)
    try:
        result = analyze(config, workers)
    except InfeasibleNetworkError as exc:
        p_i = tier_interruption_matrix(config.tiers, config.constraints)
        relay_p_i = relay_interruption_matrix(config.tiers, config.constraints)
        _write_matrix(out / "pI.csv", p_i, k)
        write_csv(out / "pS.csv", ["tier", "p_s"],
                  [[i + 1, p] for i, p in enumerate(single_hop_from_matrix(relay_p_i))])
        write_csv(out / "reachable.csv", ["tier"], [[t + 1] for t in sorted(reachable_tiers(relay_p_i))])
        write_diagnostics(out, exc.diagnoses or diagnose(relay_p_i, config.tiers, config.constraints))
        raise

    paths = [
        _write_matrix(out / "pI.csv", result.p_i, k),
        write_csv(out / "pS.csv", ["tier", "p_s"], [[i + 1, p] for i, p in enumerate(result.p_s)]),
        _write_matrix(out / "t1.csv", result.matrices.t1, k),
        _write_matrix(out / "t2.csv", result.matrices.t2, k),
        _write_matrix(out / "t3.csv", result.matrices.t3, k),
        write_csv(out / "stationary.csv", ["tier", "v"],
                  [[i + 1, v] for i, v in enumerate(result.stationary.weights)]),
    ]
    stats = result.hop_stats
    hop_rows: List[List[Any]] = [["mu", i + 1, m] for i, m in enumerate(stats.mu)]
    hop_rows += [["n_h", "", stats.n_h], ["theta_bar", "", stats.theta_bar]]
    paths.append(write_csv(out / "hop_stats.csv", ["quantity", "tier", "value"], hop_rows))
    paths.append(write_csv(
        out / "multihop.csv",
        ["strategy", "n_h", "multihop", "weighted_single_hop"],
        [[str(result.strategy), stats.n_h, result.multihop, result.weighted_interruption]],
    ))
    paths.append(write_csv(
        out / "cumulative.csv",
        ["n_e", "hop", "cumulative"],
        [[n_e, n, value] for n_e, curve in result.cumulative.items() for n, value in enumerate(curve)],
    ))
    if result.diagnoses:
        paths.append(write_diagnostics(out, result.diagnoses))
    logger.info("Analysis reports written to %s", out)
    return paths


def _write_estimate(out: Path, result: SimulationEstimate, label: str) -> List[Path]:
    paths = [
        write_csv(
            out / "estimate.csv",
            ["strategy", "iterations", "interruption", "stderr", "mean_hops_success"],
            [[label, result.iterations, result.interruption_probability, result.standard_error,
              result.mean_hops_success]],
        ),
        write_csv(
            out / "hop_histogram.csv",
            ["hops", "routes", "successful"],
            [[hops, count, result.success_histogram.get(hops, 0)] for hops, count in result.hop_histogram.items()],
        ),
        write_csv(
            out / "per_hop_interruptions.csv",
            ["hop", "reached", "interrupted", "rate"],
            [[h + 1, reached, count, rate] for h, (reached, count, rate) in enumerate(zip(
                result.per_hop_reached, result.per_hop_interruptions, result.per_hop_interruption_rates))],
        ),
    ]
    return paths


def cmd_simulate(config: ExperimentConfig, out: Any, workers: int = 1) -> List[Path]:
    """Monte Carlo estimate of the configured strategy.

    An explicit strategy is simulated as given, so networks the closed form
    rejects still get an estimate; derived modes run the analysis first.
    """
    out = _out_dir(out)
    dynamic = config.strategy_mode == "dynamic"
    if config.strategy_mode == "explicit" and config.explicit_strategy is not None:
        strategy = config.explicit_strategy
    else:
        strategy = analyze(config, workers).strategy
    result = estimate(config.tiers, config.constraints, strategy, config.iterations, config.seed, workers, dynamic)
    label = f"dynamic {strategy}" if dynamic else str(strategy)
    return _write_estimate(out, result, label)


def cmd_strategy_search(config: ExperimentConfig, out: Any, workers: int = 1, simulate: bool = False) -> List[Path]:
    """Analytic report of every strategy, optionally ranked by simulation too."""
    out = _out_dir(out)
    k = len(config.tiers)
    p_i = relay_interruption_matrix(config.tiers, config.constraints)
    if not reachable_tiers(p_i):
        diagnoses = diagnose(p_i, config.tiers, config.constraints)
        write_diagnostics(out, diagnoses)
        raise InfeasibleNetworkError("no tier is reachable from the gateway tier", diagnoses)

    reports = strategy_reports(p_i, config.tiers, config.constraints)
    header = ["strategy", *[f"v_{j + 1}" for j in range(k)], *[f"w_{j + 1}" for j in range(k + 1)],
              "weighted_interruption", "multihop"]
    rows = [[str(r.strategy), *r.stationary.weights, *r.w, r.weighted_interruption, r.analytic_multihop]
            for r in reports]
    paths = [write_csv(out / "strategies.csv", header, rows)]

    if simulate:
        ranked = exhaustive_search(config.tiers, config.constraints, config.iterations, config.seed, workers)
        paths.append(write_csv(
            out / "simulated_ranking.csv",
            ["rank", "strategy", "interruption", "stderr", "mean_hops_success"],
            [[rank, str(s), e.interruption_probability, e.standard_error, e.mean_hops_success]
             for rank, (s, e) in enumerate(ranked, 1)],
        ))
    return paths


def cmd_metrics(config: ExperimentConfig, out: Any, workers: int = 1) -> List[Path]:
    """Availability, coverage, URLLC and multi-flow reports."""
    if config.link_budget is None:
        raise ConfigError([
            "link_budget: required by the metrics command (carrier_frequency_hz, transmit_power_dbw, "
            "antenna_gain_dbi, bandwidth_hz, noise_power_w, rain_attenuation_db, package_size_bits, "
            "sr_b, sr_m, sr_omega, snr_threshold_db, latency_threshold_s)"
        ])
    out = _out_dir(out)
    budget = config.link_budget
    result = analyze(config, workers)
    strategy = result.strategy
    survival = FadingSurvival(budget, seed=config.seed)
    grid = config.metrics

    paths = [write_csv(out / "availability.csv", ["strategy", "availability"],
                       [[str(strategy), availability(config.tiers, config.constraints, strategy)]])]
    coverage_rows = []
    for gamma_db in grid.gamma_db:
        gamma = db_to_linear(gamma_db)
        coverage_rows.append([gamma_db, gamma, coverage_probability(
            gamma, config.tiers, config.constraints, strategy, budget, result, survival)])
    paths.append(write_csv(out / "coverage.csv", ["gamma_db", "gamma", "coverage"], coverage_rows))

    urllc_rows = []
    for gamma_db in grid.gamma_db:
        for tau in grid.tau:
            urllc_rows.append([gamma_db, tau, urllc_rate(
                db_to_linear(gamma_db), tau, config.tiers, config.constraints, strategy, budget,
                grid.urllc_mode, result, survival)])
    paths.append(write_csv(out / "urllc.csv", ["gamma_db", "tau", "urllc"], urllc_rows))

    theta_m = config.constraints.theta_m
    flow_rows: List[List[Any]] = [
        ["single", theta, multiflow_interruption(theta, result.multihop, theta_m)] for theta in grid.dihedral_angles
    ]
    if config.flows is not None:
        flow_rows.append(["total", math.nan, combine_flows(config.flows, result.multihop, theta_m, grid.flow_mode)])
    paths.append(write_csv(out / "multiflow.csv", ["flow", "theta_dihedral", "interruption"], flow_rows))
    return paths


def _sweep_rows(rows: List[SweepRow]) -> List[List[Any]]:
    return [[r.sweep, r.point, r.x_name, r.x, r.y_name, r.y, r.strategy, r.metric, r.value] for r in rows]


def cmd_sweep(config: ExperimentConfig, out: Any, workers: int = 1, iterations: Optional[int] = None) -> List[Path]:
    """Long-format sweep table; simulated points only when *iterations* is given."""
    if config.sweep is None:
        raise ConfigError(["sweep: the sweep command needs a 'sweep' section"])
    out = _out_dir(out)
    spec = dict(config.sweep)
    if iterations and spec["kind"] in ("nonuniformity", "tiers", "theta_m"):
        spec.setdefault("iterations", iterations)
    try:
        rows = run_sweep(spec, config.tiers, config.constraints, config.link_budget, config.seed, workers)
    except TypeError as exc:
        raise ConfigError([f"sweep: {exc}"]) from exc
    return [write_csv(
        out / "sweep.csv",
        ["sweep", "point", "x_name", "x", "y_name", "y", "strategy", "metric", "value"],
        _sweep_rows(rows),
    )]
