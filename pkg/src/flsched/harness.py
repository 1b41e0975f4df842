"""Experiment harness: config files, policy runs, sweeps, calibration, bounds.

A single JSON document configures the system, scenario, policy, solver, and
output location. Unknown keys anywhere are a hard ConfigError. All outputs
(per-round CSV, summary JSON, sweep and comparison tables) are byte-identical
across reruns with the same config and seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import bandwidth as bw
from . import lyapunov as lyap
from .bandwidth import BarrierParams
from .errors import ConfigError, TooLarge, Unreachable
from .scheduler import (PedpcParams, PolicySpec, RoundContext, RunTrace,
                        pedpc_run, run_policy)
from .simenv import IID, NONIID, Scenario, ScenarioSpec

CSV_HEADER = ("round,policy,seed,n_selected,latency_s,phi,cost,queue_l2,"
              "cum_latency_s,cum_cost,energy_overflow_j")

_SYSTEM_KEYS = {"num_clients", "num_rounds", "frame_len", "num_frames",
                "bandwidth", "min_ratio", "noise_power", "accuracy_coeff"}
_SCENARIO_KEYS = {"mode", "cpu_freq", "cycles_per_bit", "tx_power", "capacitance",
                  "local_iters", "model_size", "energy_budget", "data_size",
                  "data_size_choices", "gain_sq"}
_POLICY_KEYS = {"kind", "random_fraction", "latency_cap"}
_PEDPC_KEYS = {"penalty", "penalty_growth", "iter_rounds"}
_BARRIER_KEYS = {"t0", "mu_growth", "tol", "max_newton"}
_OUTPUT_KEYS = {"dir"}
_SECTION_KEYS = {
    "system": _SYSTEM_KEYS,
    "scenario": _SCENARIO_KEYS,
    "policy": _POLICY_KEYS,
    "pedpc": _PEDPC_KEYS,
    "barrier": _BARRIER_KEYS,
    "output": _OUTPUT_KEYS,
}


@dataclass(frozen=True)
class HarnessConfig:
    """Validated configuration document."""

    mode: str = IID
    overrides: Mapping[str, Any] = field(default_factory=dict)
    policy: PolicySpec = PolicySpec("PEDPC")
    penalty: float = 1.0
    penalty_growth: float = 1.0
    iter_rounds: int = 3
    barrier: BarrierParams = BarrierParams()
    output_dir: Path = Path("out")


def _check_section(name: str, content: Any) -> dict:
    if not isinstance(content, dict):
        raise ConfigError(f"section {name!r} must be an object")
    unknown = set(content) - _SECTION_KEYS[name]
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
    return content


def parse_config(doc: Mapping[str, Any]) -> HarnessConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    unknown = set(doc) - set(_SECTION_KEYS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    system = _check_section("system", doc.get("system", {}))
    scenario = _check_section("scenario", doc.get("scenario", {}))
    policy_raw = _check_section("policy", doc.get("policy", {}))
    pedpc_raw = _check_section("pedpc", doc.get("pedpc", {}))
    barrier_raw = _check_section("barrier", doc.get("barrier", {}))
    output_raw = _check_section("output", doc.get("output", {}))

    mode = scenario.get("mode", IID)
    if mode not in (IID, NONIID):
        raise ConfigError(f"scenario mode must be {IID!r} or {NONIID!r}")
    overrides = dict(system)
    for key, value in scenario.items():
        if key == "mode":
            continue
        overrides[key] = tuple(value) if isinstance(value, list) else value
    try:
        policy = PolicySpec(
            kind=policy_raw.get("kind", "PEDPC"),
            random_fraction=policy_raw.get("random_fraction"),
            latency_cap=policy_raw.get("latency_cap"),
        )
        barrier = BarrierParams(
            t0=float(barrier_raw.get("t0", 1.0)),
            mu_growth=float(barrier_raw.get("mu_growth", 20.0)),
            tol=float(barrier_raw.get("tol", 1e-8)),
            max_newton=int(barrier_raw.get("max_newton", 200)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    penalty = float(pedpc_raw.get("penalty", 1.0))
    growth = float(pedpc_raw.get("penalty_growth", 1.0))
    iters = int(pedpc_raw.get("iter_rounds", 3))
    if penalty <= 0 or growth <= 0 or iters < 1:
        raise ConfigError("pedpc penalty and growth must be positive, iter_rounds >= 1")
    return HarnessConfig(
        mode=mode,
        overrides=overrides,
        policy=policy,
        penalty=penalty,
        penalty_growth=growth,
        iter_rounds=iters,
        barrier=barrier,
        output_dir=Path(output_raw.get("dir", "out")),
    )


def load_config(path: str | Path) -> HarnessConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(doc)


def build_scenario(cfg: HarnessConfig, seed: int) -> Scenario:
    try:
        return Scenario(ScenarioSpec(seed=seed, mode=cfg.mode, overrides=cfg.overrides))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def pedpc_params_for(cfg: HarnessConfig, scenario: Scenario,
                     penalty: float | None = None) -> PedpcParams:
    config = scenario.config
    v0 = cfg.penalty if penalty is None else penalty
    if cfg.penalty_growth == 1.0:
        return PedpcParams.constant(v0, config.frame_len, config.num_frames, cfg.iter_rounds)
    return PedpcParams.geometric(v0, cfg.penalty_growth, config.frame_len,
                                 config.num_frames, cfg.iter_rounds)


# ---------------------------------------------------------------------------
# summaries and file output


@dataclass(frozen=True)
class ExperimentSummary:
    """End-of-run aggregates of one policy run."""

    policy: str
    seed: int
    avg_selected: float
    total_latency: float
    avg_cost: float
    energy_overflow: float
    total_phi: float
    per_client_totals: np.ndarray

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "seed": self.seed,
            "avg_selected": self.avg_selected,
            "total_latency_s": self.total_latency,
            "avg_cost": self.avg_cost,
            "energy_overflow_j": self.energy_overflow,
            "total_phi": self.total_phi,
            "per_client_totals_j": [float(x) for x in self.per_client_totals],
        }


def summarize(trace: RunTrace, budgets: np.ndarray) -> ExperimentSummary:
    totals = trace.per_client_totals
    costs = [rec.cost for rec in trace.records]
    return ExperimentSummary(
        policy=trace.policy,
        seed=trace.seed,
        avg_selected=float(np.mean([rec.n_selected for rec in trace.records])),
        total_latency=float(np.sum([rec.latency for rec in trace.records])),
        avg_cost=float(np.mean(costs)),
        energy_overflow=float(np.maximum(totals - budgets, 0.0).sum()),
        total_phi=float(np.sum([rec.phi for rec in trace.records])),
        per_client_totals=totals,
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_rounds_csv(path: Path, trace: RunTrace) -> None:
    lines = [CSV_HEADER]
    for rec in trace.records:
        lines.append(",".join([
            str(rec.round), rec.policy, str(trace.seed), str(rec.n_selected),
            _fmt(rec.latency), _fmt(rec.phi), _fmt(rec.cost), _fmt(rec.queue_l2),
            _fmt(rec.cum_latency), _fmt(rec.cum_cost), _fmt(rec.cum_energy_overflow),
        ]))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_summary_json(path: Path, summary: ExperimentSummary) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _run_trace(cfg: HarnessConfig, policy: PolicySpec, seed: int,
               penalty: float | None = None) -> tuple[RunTrace, Scenario]:
    scenario = build_scenario(cfg, seed)
    drift = lyap.drift_bound(scenario.population, scenario.config,
                             scenario.worst_case_energy())
    params = pedpc_params_for(cfg, scenario, penalty) if policy.kind == "PEDPC" else None
    trace = run_policy(scenario.population, scenario.config, policy, scenario.observe,
                       seed, pedpc=params, barrier_params=cfg.barrier, drift=drift)
    if trace.drift_violations:
        raise AssertionError("one-step drift inequality violated during the run")
    if not trace.lemma_deficit_ok:
        raise AssertionError("queue-implied deficit lower bound violated")
    return trace, scenario


def run_experiment(config_path: str | Path, policy: PolicySpec | None = None,
                   seed: int = 0, output_path: str | Path | None = None
                   ) -> ExperimentSummary:
    """Run one policy over the configured scenario; write CSV + summary JSON."""
    cfg = load_config(config_path)
    policy = policy if policy is not None else cfg.policy
    trace, scenario = _run_trace(cfg, policy, seed)
    summary = summarize(trace, scenario.population.energy_budget)
    csv_path = Path(output_path) if output_path is not None else \
        cfg.output_dir / f"{policy.kind}_{seed}_{cfg.penalty:g}.csv"
    write_rounds_csv(csv_path, trace)
    write_summary_json(csv_path.with_suffix(".summary.json"), summary)
    return summary


def sweep_v(config_path: str | Path, v_grid: Sequence[float], seed: int = 0
            ) -> list[ExperimentSummary]:
    """One drift-plus-penalty run per penalty weight over an identical scenario."""
    if not len(v_grid):
        raise ValueError("empty penalty grid")
    if any(v <= 0 for v in v_grid):
        raise ValueError("penalty weights must be positive")
    cfg = load_config(config_path)
    summaries = []
    for v in v_grid:
        trace, scenario = _run_trace(cfg, PolicySpec("PEDPC"), seed, penalty=float(v))
        summary = summarize(trace, scenario.population.energy_budget)
        csv_path = cfg.output_dir / f"PEDPC_{seed}_{float(v):g}.csv"
        write_rounds_csv(csv_path, trace)
        write_summary_json(csv_path.with_suffix(".summary.json"), summary)
        summaries.append(summary)
    lines = ["v,avg_selected,total_latency_s,avg_cost,energy_overflow_j,total_phi"]
    for v, s in zip(v_grid, summaries):
        lines.append(",".join([_fmt(v), _fmt(s.avg_selected), _fmt(s.total_latency),
                               _fmt(s.avg_cost), _fmt(s.energy_overflow), _fmt(s.total_phi)]))
    out = cfg.output_dir / f"sweep_{seed}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return summaries


# ---------------------------------------------------------------------------
# calibration


def _avg_selected(cfg: HarnessConfig, policy: PolicySpec, seed: int,
                  penalty: float | None = None) -> float:
    trace, scenario = _run_trace(cfg, policy, seed, penalty=penalty)
    return summarize(trace, scenario.population.energy_budget).avg_selected


def calibrate(config_path: str | Path, policy_kind: str, target_avg_selected: float,
              seed: int = 0, tolerance: float = 2.0) -> float:
    """Bisect the policy's scalar knob until the average selected count is close.

    Knobs: penalty weight for PEDPC, selection fraction for Random, latency
    cap for FedCS. Raises Unreachable when the bracket cannot meet the target.
    """
    cfg = load_config(config_path)
    if policy_kind == "Random":
        # exact by construction: floor(fraction * K) clients every round
        from .simenv import DEFAULTS
        k = int(cfg.overrides.get("num_clients", DEFAULTS["num_clients"]))
        if not (1 <= target_avg_selected <= k):
            raise Unreachable("target outside [1, K]")
        return float(target_avg_selected) / k

    if policy_kind == "PEDPC":
        lo, hi = 1e-6, 1e4

        def probe(v: float) -> float:
            return _avg_selected(cfg, PolicySpec("PEDPC"), seed, penalty=v)
    elif policy_kind == "FedCS":
        lo, hi = 1e-4, 1e3

        def probe(t_max: float) -> float:
            return _avg_selected(cfg, PolicySpec("FedCS", latency_cap=t_max), seed)
    else:
        raise ValueError(f"policy {policy_kind!r} has no calibration knob")

    f_lo = probe(lo) - target_avg_selected
    if abs(f_lo) <= tolerance:
        return lo
    f_hi = probe(hi) - target_avg_selected
    if abs(f_hi) <= tolerance:
        return hi
    if f_lo > 0 or f_hi < 0:
        raise Unreachable("target outside the achievable bracket")
    for _ in range(60):
        mid = math.exp(0.5 * (math.log(lo) + math.log(hi)))
        f_mid = probe(mid) - target_avg_selected
        if abs(f_mid) <= tolerance:
            return mid
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    raise Unreachable("bisection failed to reach the target")


@dataclass(frozen=True)
class ComparisonRow:
    policy: str
    knob: float | None
    avg_selected: float
    total_latency: float
    energy_overflow: float
    total_phi: float


def compare_policies(config_path: str | Path, seed: int = 0,
                     target_avg: float = 40.0) -> list[ComparisonRow]:
    """Calibrate where applicable, run all five policies on identical scenarios."""
    cfg = load_config(config_path)
    v_star = calibrate(config_path, "PEDPC", target_avg, seed)
    fraction = calibrate(config_path, "Random", target_avg, seed)
    t_max = calibrate(config_path, "FedCS", target_avg, seed)
    runs: list[tuple[PolicySpec, float | None, float | None]] = [
        (PolicySpec("PEDPC"), v_star, v_star),
        (PolicySpec("SelectAll"), None, None),
        (PolicySpec("Random", random_fraction=fraction), fraction, None),
        (PolicySpec("Greedy"), None, None),
        (PolicySpec("FedCS", latency_cap=t_max), t_max, None),
    ]
    rows = []
    for policy, knob, penalty in runs:
        trace, scenario = _run_trace(cfg, policy, seed, penalty=penalty)
        s = summarize(trace, scenario.population.energy_budget)
        rows.append(ComparisonRow(policy.kind, knob, s.avg_selected, s.total_latency,
                                  s.energy_overflow, s.total_phi))
    lines = ["policy,knob,avg_selected,total_latency_s,energy_overflow_j,total_phi"]
    for row in rows:
        knob = "" if row.knob is None else _fmt(row.knob)
        lines.append(",".join([row.policy, knob, _fmt(row.avg_selected),
                               _fmt(row.total_latency), _fmt(row.energy_overflow),
                               _fmt(row.total_phi)]))
    out = cfg.output_dir / f"compare_{seed}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows


# ---------------------------------------------------------------------------
# tiny-scale verification of the performance and energy bounds


@dataclass(frozen=True)
class TinyCase:
    """Scenario small enough for the exhaustive frame lookahead."""

    num_clients: int = 3
    num_rounds: int = 4
    frame_len: int = 2
    num_frames: int = 2
    seed: int = 0
    mode: str = IID
    min_ratio: float = 0.1
    overrides: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.num_clients > 3 or self.num_rounds > 4:
            raise TooLarge("lookahead verification limited to 3 clients / 4 rounds")
        if self.frame_len * self.num_frames != self.num_rounds:
            raise ValueError("frame_len * num_frames must equal num_rounds")


@dataclass(frozen=True)
class BoundsReport:
    penalty_weight: float
    lhs_cost: float
    lookahead_opt: float
    theorem2_rhs: float
    theorem2_ok: bool
    per_client_totals: np.ndarray
    energy_bound_rhs: np.ndarray
    energy_bound_ok: np.ndarray

    @property
    def all_ok(self) -> bool:
        return bool(self.theorem2_ok and self.energy_bound_ok.all())


def _frame_lookahead(scenario: Scenario, frame_index: int, grid_step: float) -> float:
    """Exhaustive offline optimum of one frame's average cost.

    Enumerates every selection set and every grid bandwidth vector per round,
    then searches all per-round combinations satisfying the per-frame energy
    budget. The empty round is always a candidate, so a feasible plan exists.
    """
    config, pop = scenario.config, scenario.population
    k = config.num_clients
    frame_len = config.frame_len
    cap_energy = pop.energy_budget / config.num_frames
    per_round: list[tuple[np.ndarray, np.ndarray]] = []
    for r in range(frame_index * frame_len, (frame_index + 1) * frame_len):
        ctx = RoundContext(pop, scenario.observe(r), config)
        ys = [0.0]
        es = [np.zeros(k)]
        for mask in range(1, 2 ** k):
            idx = np.array([i for i in range(k) if mask >> i & 1])
            m = idx.size
            if m * config.min_ratio > 1 + 1e-12:
                continue
            if np.any(ctx.rate_coeff[idx] <= 0):
                continue
            grids = bw.simplex_grid(m, config.min_ratio, grid_step)
            t_com = pop.model_size[idx] / (grids * ctx.rate_coeff[idx])
            lat = (pop.comp_latency[idx] + t_com).max(axis=1)
            energy = pop.comp_energy[idx] + pop.tx_power[idx] * t_com
            phi = float(ctx.log_utility[idx].sum())
            for row in range(grids.shape[0]):
                ys.append(float(lat[row]) - phi)
                evec = np.zeros(k)
                evec[idx] = energy[row]
                es.append(evec)
        per_round.append((np.array(ys), np.vstack(es)))
    sizes = math.prod(len(ys) for ys, _ in per_round)
    if sizes > 5_000_000:
        raise TooLarge(f"lookahead product too large ({sizes} combinations)")

    best = math.inf

    def dfs(level: int, acc_y: float, acc_e: np.ndarray) -> None:
        nonlocal best
        if level == frame_len:
            best = min(best, acc_y / frame_len)
            return
        ys, es = per_round[level]
        for j in range(ys.size):
            e_new = acc_e + es[j]
            if np.any(e_new > cap_energy + 1e-12):
                continue
            dfs(level + 1, acc_y + ys[j], e_new)

    dfs(0, 0.0, np.zeros(k))
    return best


def verify_bounds(tiny: TinyCase, penalty_weight: float, grid_step: float) -> BoundsReport:
    """Check the horizon cost bound and the per-client energy bound at tiny scale.

    Runs the online policy on a realization, computes the frame-wise offline
    optimum on the same realization by exhaustive search, and evaluates both
    inequalities with the drift constant from the environment's worst case.
    """
    overrides = dict(tiny.overrides)
    overrides.update(num_clients=tiny.num_clients, num_rounds=tiny.num_rounds,
                     frame_len=tiny.frame_len, num_frames=tiny.num_frames,
                     min_ratio=tiny.min_ratio)
    scenario = Scenario(ScenarioSpec(seed=tiny.seed, mode=tiny.mode, overrides=overrides))
    config, pop = scenario.config, scenario.population
    drift = lyap.drift_bound(pop, config, scenario.worst_case_energy())
    params = PedpcParams.constant(penalty_weight, config.frame_len, config.num_frames)
    trace = pedpc_run(pop, config, params, scenario.observe, seed=tiny.seed, drift=drift)
    if trace.drift_violations:
        raise AssertionError("one-step drift inequality violated during the run")
    lhs = float(np.mean([rec.cost for rec in trace.records]))
    c_stars = [_frame_lookahead(scenario, f, grid_step) for f in range(config.num_frames)]
    lookahead = float(np.mean(c_stars))
    rhs = lookahead + drift.constant * config.frame_len / penalty_weight
    y0_min = -float(np.log1p(config.accuracy_coeff * pop.data_size).sum())
    slack = (2.0 * drift.constant * config.num_rounds * config.frame_len
             + 2.0 * penalty_weight * config.frame_len
             * float(np.sum(np.asarray(c_stars) - y0_min)))
    energy_rhs = pop.energy_budget + math.sqrt(max(slack, 0.0))
    totals = trace.per_client_totals
    return BoundsReport(
        penalty_weight=penalty_weight,
        lhs_cost=lhs,
        lookahead_opt=lookahead,
        theorem2_rhs=rhs,
        theorem2_ok=bool(lhs <= rhs + 1e-9),
        per_client_totals=totals,
        energy_bound_rhs=energy_rhs,
        energy_bound_ok=totals <= energy_rhs + 1e-9,
    )
