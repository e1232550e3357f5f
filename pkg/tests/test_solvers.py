import numpy as np
import pytest

from distfw.constraint import L1Ball
from distfw.graph import build_topology, metropolis_weights
from distfw.metrics import InvariantError
from distfw.problem import (
    FiniteSumProblem,
    LocalDataset,
    full_local_gradient,
    partition,
    synthetic_samples,
)
from distfw.sampling import FullBatchSchedule, SamplingSchedule, epoch_length, is_refresh, sample_size
from distfw.solvers import (
    StepSchedule,
    dstofw_round,
    init_states,
    make_step_schedule,
    run_cenfw,
    run_denfw,
    run_dstofw,
    step_size,
)


def ring_setup(m=4, dim=20, n_local=256, objective="convex", seed=0, radius=20.0):
    samples = synthetic_samples(m * n_local, dim, seed=seed, noise=0.05)
    locs = partition(samples, m, seed=seed)
    problem = FiniteSumProblem(locals=tuple(locs), objective=objective, dim=dim)
    wmat = metropolis_weights(build_topology("ring", m))
    return problem, L1Ball(radius, dim), wmat


# ---------------------------------------------------------------------------
# step sizes
# ---------------------------------------------------------------------------

def test_step_size_examples():
    assert step_size(1, StepSchedule(mode="convex")) == 1.0
    assert step_size(4, StepSchedule(mode="nonconvex", alpha=0.5)) == 0.5
    assert step_size(9, StepSchedule(mode="cenfw_convex", q=4)) == pytest.approx(1 / 7)


def test_step_size_monotone_in_unit_interval():
    for sched in (StepSchedule(mode="convex"),
                  StepSchedule(mode="nonconvex", alpha=0.3),
                  StepSchedule(mode="denfw_nonconvex", alpha=1.0),
                  StepSchedule(mode="cenfw_convex", q=5),
                  StepSchedule(mode="cenfw_nonconvex", total_iters=50)):
        previous = 1.0
        for k in range(1, 200):
            g = step_size(k, sched)
            assert 0.0 < g <= 1.0
            assert g <= previous + 1e-15
            previous = g


def test_step_schedule_validation():
    with pytest.raises(ValueError):
        StepSchedule(mode="magic")
    with pytest.raises(ValueError):
        StepSchedule(mode="nonconvex", alpha=1.5)
    with pytest.raises(ValueError):
        StepSchedule(mode="cenfw_convex")
    with pytest.raises(ValueError):
        step_size(0, StepSchedule(mode="convex"))


# ---------------------------------------------------------------------------
# reductions and identities
# ---------------------------------------------------------------------------

def test_single_agent_full_batch_is_classical_fw():
    samples = synthetic_samples(64, 8, seed=1, noise=0.1)
    loc = LocalDataset(samples, 8)
    problem = FiniteSumProblem(locals=(loc,), objective="convex", dim=8)
    ball = L1Ball(5.0, 8)
    sched = make_step_schedule("dstofw", "convex", q=4, total_iters=30)
    wmat = metropolis_weights(build_topology("ring", 1))
    log = run_dstofw(problem, ball, wmat, sched, FullBatchSchedule(4, 64), 30)

    x = np.zeros(8)
    for k in range(1, 31):
        g = full_local_gradient(x, loc, "convex")
        x = (1 - 2.0 / (k + 1)) * x + 2.0 / (k + 1) * ball.lmo(g)
    assert np.max(np.abs(log.final_x - x)) == 0.0


def test_tracking_identity_holds_each_round():
    problem, ball, wmat = ring_setup()
    sched = make_step_schedule("dstofw", "convex", q=4, total_iters=300)
    schedule = SamplingSchedule(4, sched.gamma, 256)
    states = init_states(problem, np.zeros(20), ball)
    rngs = [np.random.default_rng(np.random.SeedSequence((0, i))) for i in range(4)]
    worst = 0.0
    for k in range(1, 301):
        states = dstofw_round(states, wmat, ball, problem, sched, schedule, rngs, k)
        d_bar = np.mean([s.d for s in states], axis=0)
        v_bar = np.mean([s.v for s in states], axis=0)
        g_bar = np.mean([s.g for s in states], axis=0)
        worst = max(worst, np.max(np.abs(d_bar - v_bar)), np.max(np.abs(d_bar - g_bar)))
    assert worst <= 1e-10


def test_full_batch_tracking_matches_direct_gradients():
    problem, ball, wmat = ring_setup()
    sched = make_step_schedule("dstofw", "convex", q=4, total_iters=200)
    states = init_states(problem, np.zeros(20), ball)
    rngs = [np.random.default_rng(i) for i in range(4)]
    schedule = FullBatchSchedule(4, 256)
    for k in range(1, 201):
        states = dstofw_round(states, wmat, ball, problem, sched, schedule, rngs, k)
        d_bar = np.mean([s.d for s in states], axis=0)
        direct = np.mean([full_local_gradient(s.x, loc, "convex")
                          for s, loc in zip(states, problem.locals)], axis=0)
        assert np.max(np.abs(d_bar - direct)) <= 1e-8


def test_denfw_tracked_average_equals_mean_local_gradient():
    from distfw.solvers import denfw_round

    problem, ball, wmat = ring_setup(m=3, n_local=64, dim=10)
    sched = make_step_schedule("denfw", "convex", total_iters=100)
    states = init_states(problem, np.zeros(10), ball, warm_gradient=False)
    for k in range(1, 101):
        states = denfw_round(states, wmat, ball, problem, sched, k)
        d_bar = np.mean([s.d for s in states], axis=0)
        direct = np.mean([full_local_gradient(states[i].x_prev, problem.locals[i], "convex")
                          for i in range(3)], axis=0)
        assert np.max(np.abs(d_bar - direct)) <= 1e-10


def test_denfw_single_agent_is_centralized_fw():
    samples = synthetic_samples(32, 6, seed=2, noise=0.1)
    loc = LocalDataset(samples, 6)
    problem = FiniteSumProblem(locals=(loc,), objective="convex", dim=6)
    ball = L1Ball(3.0, 6)
    wmat = metropolis_weights(build_topology("ring", 1))
    sched = make_step_schedule("denfw", "convex", total_iters=25)
    log = run_denfw(problem, ball, wmat, sched, 25)
    x = np.zeros(6)
    for k in range(1, 26):
        x = (1 - 2.0 / (k + 1)) * x + 2.0 / (k + 1) * ball.lmo(full_local_gradient(x, loc, "convex"))
    assert np.max(np.abs(log.final_x - x)) <= 1e-14


def test_cenfw_single_node_consensus_error_is_zero():
    samples = synthetic_samples(128, 8, seed=3, noise=0.05)
    loc = LocalDataset(samples, 8)
    problem = FiniteSumProblem(locals=(loc,), objective="convex", dim=8)
    sched = make_step_schedule("cenfw", "convex", q=3, total_iters=40)
    schedule = SamplingSchedule(3, sched.gamma, 128)
    log = run_cenfw(problem, L1Ball(4.0, 8), sched, schedule, 40)
    assert all(r.consensus_err == 0.0 for r in log.records)
    assert log.records[-1].comm_rounds_cum == 0


def test_cenfw_full_batch_is_classical_fw_with_shifted_steps():
    samples = synthetic_samples(64, 6, seed=9, noise=0.1)
    loc = LocalDataset(samples, 6)
    problem = FiniteSumProblem(locals=(loc,), objective="convex", dim=6)
    ball = L1Ball(3.0, 6)
    sched = make_step_schedule("cenfw", "convex", q=4, total_iters=30)
    log = run_cenfw(problem, ball, sched, FullBatchSchedule(4, 64), 30)
    x = np.zeros(6)
    for k in range(1, 31):
        gamma = 2.0 / (2.0 ** (k // 4) + k + 1)
        x = (1 - gamma) * x + gamma * ball.lmo(full_local_gradient(x, loc, "convex"))
    assert np.max(np.abs(log.final_x - x)) <= 1e-12


def test_stochastic_solver_matches_deterministic_baseline_trend():
    # equal iteration count: lower-or-equal final loss at a fraction of the
    # oracle cost, for both objectives
    for objective in ("convex", "nonconvex"):
        m, dim, n_loc, iters = 6, 12, 256, 800
        samples = synthetic_samples(m * n_loc, dim, seed=3, noise=0.05)
        locs = partition(samples, m, seed=3)
        problem = FiniteSumProblem(locals=tuple(locs), objective=objective, dim=dim)
        ball = L1Ball(15.0, dim)
        wmat = metropolis_weights(build_topology("ring", m))
        q = epoch_length(n_loc, objective)
        sched_d = make_step_schedule("dstofw", objective, q=q, total_iters=iters)
        schedule = SamplingSchedule(q, sched_d.gamma, n_loc)
        log_d = run_dstofw(problem, ball, wmat, sched_d, schedule, iters,
                           sampling_seed=3, log_every=iters)
        sched_n = make_step_schedule("denfw", objective, total_iters=iters)
        log_n = run_denfw(problem, ball, wmat, sched_n, iters, log_every=iters)
        assert log_d.records[-1].loss <= log_n.records[-1].loss
        assert log_n.records[-1].ifo_cum >= 2 * log_d.records[-1].ifo_cum


def test_cenfw_rejects_multi_node_problem():
    problem, ball, _ = ring_setup(m=2, n_local=16, dim=5)
    sched = make_step_schedule("cenfw", "convex", q=2, total_iters=5)
    with pytest.raises(ValueError):
        run_cenfw(problem, ball, sched, SamplingSchedule(2, sched.gamma, 16), 5)


# ---------------------------------------------------------------------------
# feasibility and accounting
# ---------------------------------------------------------------------------

def test_iterates_stay_feasible():
    problem, ball, wmat = ring_setup(m=3, n_local=64, dim=10, radius=2.0)
    sched = make_step_schedule("dstofw", "convex", q=4, total_iters=150)
    schedule = SamplingSchedule(4, sched.gamma, 64)
    states = init_states(problem, np.zeros(10), ball)
    rngs = [np.random.default_rng(np.random.SeedSequence((7, i))) for i in range(3)]
    for k in range(1, 151):
        states = dstofw_round(states, wmat, ball, problem, sched, schedule, rngs, k)
        for s in states:
            assert ball.contains(s.x, tol=1e-9)


def test_infeasible_start_raises():
    problem, ball, wmat = ring_setup(m=2, n_local=16, dim=5, radius=1.0)
    sched = make_step_schedule("dstofw", "convex", q=2, total_iters=5)
    with pytest.raises(InvariantError):
        run_dstofw(problem, ball, wmat, sched, SamplingSchedule(2, sched.gamma, 16), 5,
                   x0=np.full(5, 1.0))


def test_oracle_accounting_closed_form():
    m, n_local, iters, q = 4, 256, 203, 4
    problem, ball, wmat = ring_setup(m=m, n_local=n_local)
    sched = make_step_schedule("dstofw", "convex", q=q, total_iters=iters)
    schedule = SamplingSchedule(q, sched.gamma, n_local)
    log = run_dstofw(problem, ball, wmat, sched, schedule, iters)
    expected_ifo = m * n_local
    for k in range(1, iters + 1):
        if is_refresh(k, q):
            expected_ifo += m * n_local
        else:
            expected_ifo += 2 * m * sample_size(k, q, sched.gamma, n_local)
    assert log.records[-1].ifo_cum == expected_ifo
    assert log.records[-1].lo_cum == m * iters
    assert log.records[-1].comm_rounds_cum == iters


def test_denfw_accounting():
    m, n_local, iters = 3, 64, 40
    problem, ball, wmat = ring_setup(m=m, n_local=n_local, dim=10)
    sched = make_step_schedule("denfw", "convex", total_iters=iters)
    log = run_denfw(problem, ball, wmat, sched, iters)
    assert log.records[-1].ifo_cum == iters * m * n_local
    assert log.records[-1].lo_cum == m * iters
    assert log.records[-1].comm_rounds_cum == 2 * iters


def test_counters_monotone_and_eval_separate():
    problem, ball, wmat = ring_setup(m=2, n_local=32, dim=6)
    sched = make_step_schedule("dstofw", "convex", q=2, total_iters=50)
    log = run_dstofw(problem, ball, wmat, sched, SamplingSchedule(2, sched.gamma, 32), 50,
                     log_every=10)
    for a, b in zip(log.records, log.records[1:]):
        assert b.ifo_cum >= a.ifo_cum and b.lo_cum >= a.lo_cum
        assert b.eval_ifo_cum > a.eval_ifo_cum
    # one evaluation pass per record, never charged to the solver counter
    assert log.records[-1].eval_ifo_cum == len(log.records) * problem.total_samples


# ---------------------------------------------------------------------------
# logging contracts
# ---------------------------------------------------------------------------

def test_zero_iterations_logs_init_only():
    problem, ball, wmat = ring_setup(m=2, n_local=16, dim=5)
    sched = make_step_schedule("dstofw", "convex", q=2, total_iters=0)
    log = run_dstofw(problem, ball, wmat, sched, SamplingSchedule(2, sched.gamma, 16), 0)
    assert len(log.records) == 1
    assert log.records[0].k == 1
    assert log.records[0].lo_cum == 0


def test_log_cadence_does_not_change_trajectory():
    problem, ball, wmat = ring_setup(m=3, n_local=64, dim=10)
    sched = make_step_schedule("dstofw", "convex", q=4, total_iters=120)
    schedule = SamplingSchedule(4, sched.gamma, 64)
    dense = run_dstofw(problem, ball, wmat, sched, schedule, 120, log_every=1)
    sparse = run_dstofw(problem, ball, wmat, sched, schedule, 120, log_every=100)
    assert np.array_equal(dense.final_x, sparse.final_x)
    dense_by_k = {r.k: r for r in dense.records}
    for r in sparse.records:
        assert dense_by_k[r.k].loss == r.loss
        assert dense_by_k[r.k].fw_gap == r.fw_gap
        assert dense_by_k[r.k].ifo_cum == r.ifo_cum


def test_same_seed_reproduces_trajectory():
    problem, ball, wmat = ring_setup(m=3, n_local=64, dim=10)
    sched = make_step_schedule("dstofw", "convex", q=4, total_iters=80)
    schedule = SamplingSchedule(4, sched.gamma, 64)
    a = run_dstofw(problem, ball, wmat, sched, schedule, 80, sampling_seed=5)
    b = run_dstofw(problem, ball, wmat, sched, schedule, 80, sampling_seed=5)
    assert np.array_equal(a.final_x, b.final_x)
    c = run_dstofw(problem, ball, wmat, sched, schedule, 80, sampling_seed=6)
    assert not np.array_equal(a.final_x, c.final_x)


def test_unequal_local_counts_run_with_min_capped_sizes():
    # equalize off: agents hold different counts; one shared size sequence
    # capped at the smallest local count keeps every draw valid
    samples = synthetic_samples(50, 6, seed=8, noise=0.1)
    locs = partition(samples, 3, seed=0, equalize=False)
    assert sorted(loc.n for loc in locs) == [16, 17, 17]
    problem = FiniteSumProblem(locals=tuple(locs), objective="convex", dim=6)
    ball = L1Ball(4.0, 6)
    wmat = metropolis_weights(build_topology("ring", 3))
    sched = make_step_schedule("dstofw", "convex", q=2, total_iters=60)
    schedule = SamplingSchedule(2, sched.gamma, min(loc.n for loc in locs))
    log = run_dstofw(problem, ball, wmat, sched, schedule, 60, check_invariants=True)
    assert log.records[-1].lo_cum == 3 * 60


def test_consensus_decay_slope():
    # agents' disagreement shrinks like the step size: the log-log slope of
    # consensus error against k stays below -0.8 for the convex schedule.
    problem, ball, wmat = ring_setup()
    sched = make_step_schedule("dstofw", "convex", q=4, total_iters=2000)
    schedule = SamplingSchedule(4, sched.gamma, 256)
    log = run_dstofw(problem, ball, wmat, sched, schedule, 2000, log_every=1)
    ks = np.array([r.k for r in log.records if 50 <= r.k <= 2000])
    errs = np.array([r.consensus_err for r in log.records if 50 <= r.k <= 2000])
    slope = np.polyfit(np.log(ks), np.log(errs), 1)[0]
    assert slope <= -0.8
