"""Round-by-round scheduling: the drift-plus-penalty policy and baselines.

The PEDPC policy prices each client by its energy-deficit backlog, then
alternates exact client selection with barrier bandwidth allocation. Each
half-step is accepted only if it does not increase the true per-round
objective, so the objective trace is non-increasing by construction even
though the bandwidth subproblem is solved through a smoothed surrogate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bandwidth as bw
from . import lyapunov as lyap
from . import model
from .errors import InfeasibleConfig
from .lyapunov import DriftBound, QueueState
from .model import Decision, Population, RoundObservation, SystemConfig
from .selection import SelectionInstance, itmcs

POLICY_KINDS = ("PEDPC", "SelectAll", "Random", "Greedy", "FedCS")
DESCENT_SLACK = 1e-9  # minimal per-iteration improvement to keep alternating


@dataclass(frozen=True)
class PedpcParams:
    """Per-frame penalty weights and the alternation depth."""

    penalty_schedule: np.ndarray  # one positive weight per frame
    frame_len: int
    num_frames: int
    iter_rounds: int = 3

    def __post_init__(self):
        sched = np.asarray(self.penalty_schedule, dtype=float)
        object.__setattr__(self, "penalty_schedule", sched)
        if sched.ndim != 1 or sched.size != self.num_frames:
            raise ValueError("need one penalty weight per frame")
        if np.any(sched <= 0):
            raise ValueError("penalty weights must be positive")
        if self.iter_rounds < 1:
            raise ValueError("iter_rounds must be at least 1")

    @classmethod
    def constant(cls, penalty: float, frame_len: int, num_frames: int,
                 iter_rounds: int = 3) -> "PedpcParams":
        return cls(np.full(num_frames, float(penalty)), frame_len, num_frames, iter_rounds)

    @classmethod
    def geometric(cls, penalty: float, growth: float, frame_len: int, num_frames: int,
                  iter_rounds: int = 3) -> "PedpcParams":
        sched = penalty * growth ** np.arange(num_frames)
        return cls(sched, frame_len, num_frames, iter_rounds)


@dataclass(frozen=True)
class PolicySpec:
    """Which policy to run and its scalar knob, if any."""

    kind: str
    random_fraction: float | None = None  # Random only
    latency_cap: float | None = None  # FedCS only

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "Random":
            if self.random_fraction is None or not (0 < self.random_fraction <= 1):
                raise ValueError("Random requires random_fraction in (0, 1]")
        if self.kind == "FedCS":
            if self.latency_cap is None or not self.latency_cap > 0:
                raise ValueError("FedCS requires a positive latency_cap")


class RoundContext:
    """Per-round cached quantities shared by the policies and objective."""

    def __init__(self, population: Population, observation: RoundObservation,
                 config: SystemConfig):
        self.population = population
        self.config = config
        self.rate_coeff = model.rate_coefficients(population, observation.gain_sq, config)
        self.log_utility = np.log1p(config.accuracy_coeff * population.data_size)

    def totals(self, decision: Decision) -> tuple[np.ndarray, np.ndarray]:
        return model.selected_totals(self.population, self.rate_coeff, decision)


def _p3_value(decision: Decision, queue: QueueState, ctx: RoundContext,
              penalty_weight: float) -> float:
    """Backlog-priced energy drift plus weighted round cost (constant term dropped)."""
    latency, energy = ctx.totals(decision)
    credit = ctx.population.energy_budget / ctx.config.num_rounds
    drift_term = float(np.dot(queue.backlog, energy - credit))
    t0 = float(latency[decision.selected].max()) if decision.selected.any() else 0.0
    phi = float(ctx.log_utility[decision.selected].sum())
    return drift_term + penalty_weight * (t0 - phi)


def p3_objective(decision: Decision, queue: QueueState, observation: RoundObservation,
                 population: Population, config: SystemConfig, penalty_weight: float) -> float:
    """Per-round scheduling objective at a decision, given current backlogs."""
    ctx = RoundContext(population, observation, config)
    return _p3_value(decision, queue, ctx, penalty_weight)


@dataclass(frozen=True)
class SolveResult:
    decision: Decision
    objective: float
    half_step_values: tuple[float, ...]


def _predicted_latency(ctx: RoundContext, shares: np.ndarray) -> np.ndarray:
    rate = shares * ctx.rate_coeff
    pop = ctx.population
    with np.errstate(divide="ignore"):
        t_com = np.where(rate > 0, pop.model_size / np.where(rate > 0, rate, 1.0), np.inf)
    return pop.comp_latency + t_com


def _solve_round_ctx(queue: QueueState, ctx: RoundContext, penalty_weight: float,
                     iter_rounds: int, barrier_params: bw.BarrierParams | None) -> SolveResult:
    pop, config = ctx.population, ctx.config
    k = len(pop)
    cap = config.max_selectable
    hyp_share = 1.0 / k  # scoring share for clients outside the current set
    x = np.zeros(k, dtype=bool)
    b = np.zeros(k)
    value = _p3_value(Decision(x, b), queue, ctx, penalty_weight)
    halves = [value]
    for _ in range(iter_rounds):
        start_value = value
        # selection half-step: rescore everyone, keep the change only if it helps
        shares = np.where(x, b, hyp_share)
        prices = lyap.energy_prices(queue.backlog, pop, ctx.rate_coeff, shares)
        scores = prices - penalty_weight * ctx.log_utility
        latencies = _predicted_latency(ctx, shares)
        proposal = itmcs(SelectionInstance(scores, latencies, penalty_weight,
                                           max_selected=cap)).selected
        if not np.array_equal(proposal, x):
            m = int(proposal.sum())
            b_cand = np.where(proposal, 1.0 / m if m else 0.0, 0.0)
            cand_val = _p3_value(Decision(proposal, b_cand), queue, ctx, penalty_weight)
            if cand_val <= value:
                x, b, value = proposal, b_cand, cand_val
        halves.append(value)
        # bandwidth half-step: barrier solve, kept only if the true value improves
        if x.any():
            idx = np.flatnonzero(x)
            instance = bw.AllocationInstance(
                comp_latency=pop.comp_latency[idx],
                lat_coeff=pop.model_size[idx] / ctx.rate_coeff[idx],
                price_coeff=(pop.tx_power[idx] * queue.backlog[idx] * pop.model_size[idx]
                             / ctx.rate_coeff[idx]),
                penalty_weight=penalty_weight,
                min_ratio=config.min_ratio,
            )
            alloc = bw.barrier_solve(instance, barrier_params)
            b_new = np.zeros(k)
            b_new[idx] = alloc.ratios
            new_val = _p3_value(Decision(x, b_new), queue, ctx, penalty_weight)
            if new_val <= value:
                b, value = b_new, new_val
        halves.append(value)
        if start_value - value < DESCENT_SLACK:
            break
    return SolveResult(Decision(x, b), value, tuple(halves))


def solve_round(queue: QueueState, observation: RoundObservation, population: Population,
                config: SystemConfig, penalty_weight: float, iter_rounds: int = 3,
                barrier_params: bw.BarrierParams | None = None) -> SolveResult:
    """Alternating selection/allocation solve of one round's objective.

    Starts from the always-feasible empty decision; the returned half-step
    value trace is non-increasing. An all-infeasible round yields the empty
    decision (its objective is the budget credit term alone).
    """
    ctx = RoundContext(population, observation, config)
    return _solve_round_ctx(queue, ctx, penalty_weight, iter_rounds, barrier_params)


# ---------------------------------------------------------------------------
# baseline policies


def baseline_select_all(observation: RoundObservation, population: Population,
                        config: SystemConfig) -> Decision:
    """Everyone selected, equal shares."""
    k = config.num_clients
    if 1.0 / k < config.min_ratio - 1e-12:
        raise InfeasibleConfig("equal split over all clients falls below the floor")
    return Decision(np.ones(k, dtype=bool), np.full(k, 1.0 / k))


def baseline_random(observation: RoundObservation, population: Population,
                    config: SystemConfig, fraction: float,
                    rng: np.random.Generator) -> Decision:
    """A fixed-size uniform sample of clients, equal shares."""
    k = config.num_clients
    n = int(math.floor(fraction * k + 1e-9))  # guard against 0.29*100 = 28.999...
    if n < 1:
        raise InfeasibleConfig("fraction selects nobody")
    if n * config.min_ratio > 1 + 1e-12:
        raise InfeasibleConfig("equal split over the sample falls below the floor")
    idx = rng.choice(k, size=n, replace=False)
    selected = np.zeros(k, dtype=bool)
    selected[idx] = True
    return Decision(selected, np.where(selected, 1.0 / n, 0.0))


def _prefix_fill(shares: np.ndarray, eligible: np.ndarray) -> Decision:
    """Shared tail of the budget/latency-capped baselines.

    Sorts the eligible clients by their (floor-clamped) minimal share, admits
    them while the running total stays within the band, then tops up the last
    admitted client so the shares sum to one.
    """
    k = shares.size
    selected = np.zeros(k, dtype=bool)
    out = np.zeros(k)
    idx = np.flatnonzero(eligible)
    if idx.size == 0:
        return Decision(selected, out)
    order = idx[np.lexsort((idx, shares[idx]))]
    total = 0.0
    last = -1
    for client in order:
        s = shares[client]
        if total + s > 1.0 + 1e-12:
            break
        selected[client] = True
        out[client] = s
        total += s
        last = client
    if last >= 0:
        out[last] += 1.0 - total
    return Decision(selected, out)


def baseline_greedy(observation: RoundObservation, population: Population,
                    config: SystemConfig) -> Decision:
    """As many clients as fit when each is given exactly its per-round energy budget.

    Each client's share is sized so its round energy equals its budget share
    (clamped up to the floor, which can only reduce energy); clients whose
    training alone busts the budget are excluded.
    """
    rate_coeff = model.rate_coefficients(population, observation.gain_sq, config)
    credit = population.energy_budget / config.num_rounds
    headroom = credit - population.comp_energy
    eligible = (headroom > 0) & (rate_coeff > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(eligible,
                        population.tx_power * population.model_size
                        / (rate_coeff * np.where(eligible, headroom, 1.0)),
                        np.inf)
    shares = np.maximum(need, config.min_ratio)
    return _prefix_fill(shares, eligible)


def baseline_fedcs(observation: RoundObservation, population: Population,
                   config: SystemConfig, latency_cap: float) -> Decision:
    """As many clients as fit when each is given exactly its latency-cap share."""
    if not latency_cap > 0:
        raise ValueError("latency_cap must be positive")
    rate_coeff = model.rate_coefficients(population, observation.gain_sq, config)
    slack = latency_cap - population.comp_latency
    eligible = (slack > 0) & (rate_coeff > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(eligible,
                        population.model_size / (rate_coeff * np.where(eligible, slack, 1.0)),
                        np.inf)
    shares = np.maximum(need, config.min_ratio)
    return _prefix_fill(shares, eligible)


# ---------------------------------------------------------------------------
# run loop


@dataclass(frozen=True)
class RoundRecord:
    """Per-round metrics of one policy run."""

    round: int
    policy: str
    n_selected: int
    latency: float
    phi: float
    cost: float
    per_client_energy: np.ndarray
    queue_l2: float
    cum_latency: float
    cum_cost: float
    cum_energy_overflow: float


@dataclass
class RunTrace:
    """Everything a finished run exposes for metrics and verification."""

    policy: str
    seed: int
    records: list[RoundRecord]
    backlog_trace: np.ndarray  # (R+1, K); row r is the backlog entering round r
    energies: np.ndarray  # (R, K) realized per-round energy of selected clients
    half_step_values: list[tuple[float, ...]]  # PEDPC objective traces, else empty
    drift_violations: int
    drift_min_slack: float
    lemma_deficit_ok: bool

    @property
    def per_client_totals(self) -> np.ndarray:
        return self.energies.sum(axis=0)


def _decide(kind: str, ctx: RoundContext, observation: RoundObservation,
            policy: PolicySpec, seed: int, round_index: int) -> Decision:
    from .simenv import policy_rng  # local import to keep module deps one-way

    if kind == "SelectAll":
        return baseline_select_all(observation, ctx.population, ctx.config)
    if kind == "Random":
        return baseline_random(observation, ctx.population, ctx.config,
                               policy.random_fraction, policy_rng(seed, round_index))
    if kind == "Greedy":
        return baseline_greedy(observation, ctx.population, ctx.config)
    if kind == "FedCS":
        return baseline_fedcs(observation, ctx.population, ctx.config, policy.latency_cap)
    raise ValueError(f"unknown policy kind {kind!r}")


def run_policy(population: Population, config: SystemConfig, policy: PolicySpec,
               observations: Callable[[int], RoundObservation], seed: int,
               pedpc: PedpcParams | None = None,
               barrier_params: bw.BarrierParams | None = None,
               initial_queue: QueueState | None = None,
               drift: DriftBound | None = None) -> RunTrace:
    """Run one policy across the whole horizon; deterministic in (inputs, seed).

    Backlogs advance for every policy (they are the metric of budget
    compliance even where the policy ignores them). When a drift envelope is
    supplied, the one-step drift inequality is checked each round and
    violations are counted; the queue-implied deficit lower bound is checked
    at the end of every run.
    """
    k, r_total = config.num_clients, config.num_rounds
    if policy.kind == "PEDPC":
        if pedpc is None:
            raise ValueError("PEDPC requires PedpcParams")
        if pedpc.frame_len != config.frame_len or pedpc.num_frames != config.num_frames:
            raise ValueError("PedpcParams frames disagree with the system config")
    state = initial_queue if initial_queue is not None else QueueState.zero(k)
    if state.backlog.size != k:
        raise ValueError("initial queue has the wrong number of clients")
    backlog_trace = np.zeros((r_total + 1, k))
    backlog_trace[0] = state.backlog
    energies = np.zeros((r_total, k))
    records: list[RoundRecord] = []
    halves: list[tuple[float, ...]] = []
    cum_latency = 0.0
    cum_cost = 0.0
    cum_energy = np.zeros(k)
    drift_violations = 0
    drift_min_slack = math.inf
    for r in range(r_total):
        observation = observations(r)
        ctx = RoundContext(population, observation, config)
        if policy.kind == "PEDPC":
            frame = r // pedpc.frame_len
            result = _solve_round_ctx(state, ctx, float(pedpc.penalty_schedule[frame]),
                                      pedpc.iter_rounds, barrier_params)
            decision = result.decision
            halves.append(result.half_step_values)
        else:
            decision = _decide(policy.kind, ctx, observation, policy, seed, r)
        decision.validate(config)
        latency_vec, energy_vec = ctx.totals(decision)
        t0 = float(latency_vec[decision.selected].max()) if decision.selected.any() else 0.0
        phi = float(ctx.log_utility[decision.selected].sum())
        cost = t0 - phi
        new_state = lyap.update_queue(state, decision, energy_vec, population, config)
        if drift is not None:
            slack = lyap.drift_gap(state, new_state, decision, energy_vec,
                                   population, config, drift)
            drift_min_slack = min(drift_min_slack, slack)
            if slack < -1e-9:
                drift_violations += 1
        cum_latency += t0
        cum_cost += cost
        cum_energy += energy_vec
        overflow = float(np.maximum(cum_energy - population.energy_budget, 0.0).sum())
        records.append(RoundRecord(
            round=r,
            policy=policy.kind,
            n_selected=decision.n_selected,
            latency=t0,
            phi=phi,
            cost=cost,
            per_client_energy=energy_vec,
            queue_l2=float(np.linalg.norm(new_state.backlog)),
            cum_latency=cum_latency,
            cum_cost=cum_cost,
            cum_energy_overflow=overflow,
        ))
        energies[r] = energy_vec
        backlog_trace[r + 1] = new_state.backlog
        state = new_state
    _, deficit_ok = lyap.stability_series(backlog_trace, consumed=cum_energy,
                                          budgets=population.energy_budget)
    return RunTrace(
        policy=policy.kind,
        seed=seed,
        records=records,
        backlog_trace=backlog_trace,
        energies=energies,
        half_step_values=halves,
        drift_violations=drift_violations,
        drift_min_slack=drift_min_slack,
        lemma_deficit_ok=bool(deficit_ok.all()),
    )


def pedpc_run(population: Population, config: SystemConfig, params: PedpcParams,
              observations: Callable[[int], RoundObservation], seed: int = 0,
              barrier_params: bw.BarrierParams | None = None,
              initial_queue: QueueState | None = None,
              drift: DriftBound | None = None) -> RunTrace:
    """Full drift-plus-penalty run over the horizon (frame-wise penalty weights)."""
    return run_policy(population, config, PolicySpec("PEDPC"), observations, seed,
                      pedpc=params, barrier_params=barrier_params,
                      initial_queue=initial_queue, drift=drift)
