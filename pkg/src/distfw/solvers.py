"""Round engines: the distributed stochastic FW solver and its two baselines.

All engines run synchronous supersteps: within a round every agent reads
only the round-start snapshot of its neighbors' state and writes its own
next-state buffer, so agent order inside a round is irrelevant.  Randomness
comes from per-agent streams derived from the sampling seed, never from
scheduling, which makes every run bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constraint import ConstraintSet
from .graph import MixingMatrix
from .metrics import InvariantError, IterationRecord, RunLog, consensus_error, fw_gap
from .problem import FiniteSumProblem, batch_gradient, full_local_gradient, global_gradient, global_loss
from .sampling import SamplingSchedule, draw_sample_set

FEASIBILITY_TOL = 1e-9
TRACKING_TOL = 1e-10

STEP_MODES = ("convex", "nonconvex", "denfw_convex", "denfw_nonconvex",
              "cenfw_convex", "cenfw_nonconvex")

#: Communication rounds charged per iteration: the stochastic solver
#: exchanges (x, g) in one round, the deterministic baseline mixes x and the
#: tracked gradient in two, the centralized baseline exchanges nothing.
COMM_ROUNDS_PER_ITER = {"dstofw": 1, "denfw": 2, "cenfw": 0}


@dataclass(frozen=True)
class StepSchedule:
    """Step-size rule gamma_k for one solver/objective combination."""

    mode: str
    alpha: float = 0.5
    q: int | None = None
    total_iters: int | None = None

    def __post_init__(self):
        if self.mode not in STEP_MODES:
            raise ValueError(f"mode must be one of {STEP_MODES}, got {self.mode!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0,1]")
        if self.mode == "cenfw_convex" and (self.q is None or self.q < 1):
            raise ValueError("cenfw_convex needs the epoch length q")
        if self.mode == "cenfw_nonconvex" and (self.total_iters is None or self.total_iters < 1):
            raise ValueError("cenfw_nonconvex needs the horizon K")

    def gamma(self, k: int) -> float:
        return step_size(k, self)


def step_size(k: int, sched: StepSchedule) -> float:
    """gamma_k: 2/(k+1) convex, k^-alpha non-convex, epoch-shifted for cenfw."""
    if k < 1:
        raise ValueError("iterations are 1-based")
    mode = sched.mode
    if mode in ("convex", "denfw_convex"):
        return 2.0 / (k + 1)
    if mode in ("nonconvex", "denfw_nonconvex"):
        return float(k) ** (-sched.alpha)
    if mode == "cenfw_convex":
        t = k // sched.q
        # cap the exponent so the denominator stays finite in float64
        return 2.0 / (2.0 ** min(t, 1020) + k + 1)
    if mode == "cenfw_nonconvex":
        return 1.0 / math.sqrt(sched.total_iters)
    raise ValueError(f"unknown step mode {mode!r}")


def make_step_schedule(solver: str, objective: str, alpha: float = 0.5,
                       q: int | None = None, total_iters: int | None = None) -> StepSchedule:
    prefixes = {"dstofw": "", "denfw": "denfw_", "cenfw": "cenfw_"}
    if solver not in prefixes:
        raise ValueError(f"solver must be one of {tuple(prefixes)}, got {solver!r}")
    return StepSchedule(mode=prefixes[solver] + objective, alpha=alpha, q=q,
                        total_iters=max(1, total_iters or 1))


@dataclass
class AgentState:
    """One agent's iterates and oracle counters.

    x is the decision vector, v the variance-reduced gradient estimator,
    g the pre-mix tracked gradient, d the post-mix tracked gradient, and
    x_prev the previous decision vector needed by the difference estimator.
    """

    x: np.ndarray
    v: np.ndarray
    g: np.ndarray
    d: np.ndarray
    x_prev: np.ndarray
    ifo_count: int = 0
    lo_count: int = 0


def init_states(problem: FiniteSumProblem, x0: np.ndarray, constraint: ConstraintSet,
                warm_gradient: bool = True) -> list[AgentState]:
    """d = v = g = local full gradient at the common feasible start.

    With ``warm_gradient`` off (the deterministic baseline charges its
    gradient work inside the rounds) the tracking slots start at zero.
    """
    if not constraint.contains(x0, FEASIBILITY_TOL):
        raise InvariantError("initial point lies outside the constraint set")
    states = []
    for loc in problem.locals:
        if warm_gradient:
            grad = full_local_gradient(x0, loc, problem.objective)
            ifo = loc.n
        else:
            grad = np.zeros_like(x0)
            ifo = 0
        states.append(AgentState(x=x0.copy(), v=grad, g=grad.copy(), d=grad.copy(),
                                 x_prev=x0.copy(), ifo_count=ifo, lo_count=0))
    return states


def dstofw_round(states: list[AgentState], w: MixingMatrix, constraint: ConstraintSet,
                 problem: FiniteSumProblem, sched: StepSchedule,
                 sampling: SamplingSchedule, rngs: list[np.random.Generator],
                 k: int) -> list[AgentState]:
    """One synchronous round of the stochastic solver.

    Per agent: consensus mix of x, FW step along the tracked gradient,
    variance-reduction update of v (full refresh when mod(k+1, q) = 0,
    otherwise the sampled difference estimator), then gradient tracking
    with a mix of the freshly corrected g.
    """
    gamma = step_size(k, sched)
    xs = np.stack([s.x for s in states])
    xbar = w.w @ xs
    refresh = sampling.is_refresh(k)
    size = None if refresh else sampling.size(k)
    new_states = []
    g_new = np.empty_like(xs)
    for i, s in enumerate(states):
        loc = problem.locals[i]
        u = constraint.lmo(s.d)
        x_next = (1.0 - gamma) * xbar[i] + gamma * u
        if not constraint.contains(x_next, FEASIBILITY_TOL):
            raise InvariantError(f"agent {i} left the constraint set at k={k}")
        if refresh:
            v_next = full_local_gradient(x_next, loc, problem.objective)
            ifo = s.ifo_count + loc.n
        else:
            rows = draw_sample_set(rngs[i], loc.n, size)
            v_next = (batch_gradient(x_next, loc, rows, problem.objective)
                      - batch_gradient(s.x, loc, rows, problem.objective) + s.v)
            ifo = s.ifo_count + 2 * size
        g_new[i] = s.d + v_next - s.v
        new_states.append(AgentState(x=x_next, v=v_next, g=g_new[i], d=g_new[i],
                                     x_prev=s.x, ifo_count=ifo, lo_count=s.lo_count + 1))
    d_new = w.w @ g_new
    for i, s in enumerate(new_states):
        s.d = d_new[i]
    return new_states


def denfw_round(states: list[AgentState], w: MixingMatrix, constraint: ConstraintSet,
                problem: FiniteSumProblem, sched: StepSchedule, k: int) -> list[AgentState]:
    """One round of the deterministic decentralized baseline.

    Two mixes per iteration, both reading the round-start snapshot:
    consensus on x, and a second mix of the tracked gradient, which is then
    corrected by the change in the full local gradient evaluated at the
    agent's own iterate.  The v slot stores that local gradient and g
    aliases d, so the averaging identity d-bar = v-bar holds here too, with
    d-bar equal to the mean local gradient at the round-start iterates.
    """
    gamma = step_size(k, sched)
    xs = np.stack([s.x for s in states])
    xbar = w.w @ xs
    d_mixed = w.w @ np.stack([s.d for s in states])
    new_states = []
    for i, s in enumerate(states):
        loc = problem.locals[i]
        h = full_local_gradient(s.x, loc, problem.objective)
        d_next = d_mixed[i] + h - s.v
        u = constraint.lmo(d_next)
        x_next = (1.0 - gamma) * xbar[i] + gamma * u
        if not constraint.contains(x_next, FEASIBILITY_TOL):
            raise InvariantError(f"agent {i} left the constraint set at k={k}")
        new_states.append(AgentState(x=x_next, v=h, g=d_next, d=d_next, x_prev=s.x,
                                     ifo_count=s.ifo_count + loc.n,
                                     lo_count=s.lo_count + 1))
    return new_states


def _check_tracking_identity(states: list[AgentState], k: int) -> None:
    d_bar = np.mean([s.d for s in states], axis=0)
    v_bar = np.mean([s.v for s in states], axis=0)
    g_bar = np.mean([s.g for s in states], axis=0)
    if np.max(np.abs(d_bar - v_bar)) > TRACKING_TOL or np.max(np.abs(d_bar - g_bar)) > TRACKING_TOL:
        raise InvariantError(f"tracking identity d-bar = g-bar = v-bar broken at k={k}")


def _snapshot(k: int, gamma: float, states: list[AgentState],
              problem: FiniteSumProblem, constraint: ConstraintSet,
              comm_rounds: int, eval_ifo: int) -> IterationRecord:
    xs = [s.x for s in states]
    x_avg = np.mean(xs, axis=0)
    # loss and gradient count as one evaluation pass: an IFO call returns
    # the (value, gradient) pair for one component at one point.
    loss = global_loss(x_avg, problem)
    grad = global_gradient(x_avg, problem)
    return IterationRecord(
        k=k, gamma=gamma, loss=loss,
        fw_gap=fw_gap(x_avg, grad, constraint),
        consensus_err=consensus_error(xs),
        ifo_cum=sum(s.ifo_count for s in states),
        lo_cum=sum(s.lo_count for s in states),
        comm_rounds_cum=comm_rounds, eval_ifo_cum=eval_ifo)


def _run(solver: str, problem: FiniteSumProblem, constraint: ConstraintSet,
         w: MixingMatrix, sched: StepSchedule, sampling: SamplingSchedule | None,
         n_iters: int, sampling_seed: int, log_every: int, x0: np.ndarray,
         check_invariants: bool, meta: dict[str, str]) -> RunLog:
    if w.m != problem.m:
        raise ValueError("mixing matrix size does not match the agent count")
    if n_iters < 0:
        raise ValueError("iteration count must be >= 0")
    log_every = max(1, log_every)
    states = init_states(problem, x0, constraint, warm_gradient=solver != "denfw")
    rngs = [np.random.default_rng(np.random.SeedSequence((sampling_seed, i)))
            for i in range(problem.m)]
    comm_per_iter = COMM_ROUNDS_PER_ITER[solver]
    comm = 0
    eval_ifo = problem.total_samples
    log = RunLog(meta=dict(meta))
    log.records.append(_snapshot(1, sched.gamma(1), states, problem, constraint, comm, eval_ifo))
    for k in range(1, n_iters + 1):
        if solver == "denfw":
            states = denfw_round(states, w, constraint, problem, sched, k)
        else:
            states = dstofw_round(states, w, constraint, problem, sched, sampling, rngs, k)
        comm += comm_per_iter
        if check_invariants:
            _check_tracking_identity(states, k)
        if k % log_every == 0 or k == n_iters:
            eval_ifo += problem.total_samples
            log.records.append(_snapshot(k + 1, sched.gamma(k + 1), states, problem,
                                         constraint, comm, eval_ifo))
    log.final_x = np.mean([s.x for s in states], axis=0)
    return log


def run_dstofw(problem, constraint, w, sched, sampling, n_iters, sampling_seed=0,
               log_every=1, x0=None, check_invariants=False, meta=None) -> RunLog:
    """Run the stochastic solver for n_iters rounds and collect metrics."""
    x0 = np.zeros(problem.dim) if x0 is None else np.asarray(x0, dtype=float)
    return _run("dstofw", problem, constraint, w, sched, sampling, n_iters,
                sampling_seed, log_every, x0, check_invariants, meta or {})


def run_denfw(problem, constraint, w, sched, n_iters, log_every=1, x0=None,
              check_invariants=False, meta=None) -> RunLog:
    """Run the deterministic decentralized baseline."""
    x0 = np.zeros(problem.dim) if x0 is None else np.asarray(x0, dtype=float)
    return _run("denfw", problem, constraint, w, sched, None, n_iters,
                0, log_every, x0, check_invariants, meta or {})


def run_cenfw(problem, constraint, sched, sampling, n_iters, sampling_seed=0,
              log_every=1, x0=None, check_invariants=False, meta=None) -> RunLog:
    """Run the centralized variance-reduced baseline (single node, all samples)."""
    if problem.m != 1:
        raise ValueError("the centralized baseline needs all samples on one node (m=1)")
    w = MixingMatrix(w=np.ones((1, 1)), lambda2=0.0)
    x0 = np.zeros(problem.dim) if x0 is None else np.asarray(x0, dtype=float)
    return _run("cenfw", problem, constraint, w, sched, sampling, n_iters,
                sampling_seed, log_every, x0, check_invariants, meta or {})
