import numpy as np
import pytest

from distfw.sampling import (
    FullBatchSchedule,
    RefreshIterationError,
    SamplingSchedule,
    anchor_iteration,
    draw_sample_set,
    epoch_length,
    is_refresh,
    raw_sample_size,
    sample_size,
)
from distfw.solvers import StepSchedule


def gamma_convex(k):
    return 2.0 / (k + 1)


def gamma_sqrt(k):
    return k ** -0.5


def test_epoch_length_values():
    assert epoch_length(3256, "convex") == 7
    assert epoch_length(3256, "nonconvex") == 14
    assert epoch_length(16, "convex") == 2
    assert epoch_length(1, "convex") == 2     # floored at 2 for tiny data
    assert epoch_length(2401, "convex") == 7  # exact fourth power
    assert epoch_length(2400, "convex") == 6
    assert epoch_length(64, "nonconvex") == 4  # exact cube, no float drift
    assert epoch_length(63, "nonconvex") == 3


def test_refresh_condition():
    assert [k for k in range(1, 13) if is_refresh(k, 4)] == [3, 7, 11]
    assert anchor_iteration(5, 4) == 7
    assert anchor_iteration(4, 4) == 7
    assert anchor_iteration(1, 4) == 3


def test_worked_sample_sizes_q4_convex():
    assert sample_size(7, 4, gamma_convex, 10_000) == 16
    assert sample_size(6, 4, gamma_convex, 10_000) == 21
    assert sample_size(5, 4, gamma_convex, 10_000) == 29


def test_anchor_is_q_squared_every_epoch():
    for q, gamma in ((4, gamma_convex), (7, gamma_convex), (14, gamma_sqrt)):
        for epoch in range(1, 11):
            assert raw_sample_size(epoch * q - 1, q, gamma) == q * q


@pytest.mark.parametrize("q,gamma", [(4, gamma_convex), (7, gamma_convex), (14, gamma_sqrt)])
def test_rule_inequality_and_monotonicity(q, gamma):
    horizon = 10 * q
    sizes = {k: raw_sample_size(k, q, gamma) for k in range(1, horizon + 1)
             if not is_refresh(k, q)}
    for k, size in sizes.items():
        if k + 1 in sizes and anchor_iteration(k, q) == anchor_iteration(k + 1, q):
            nxt = sizes[k + 1]
            assert size >= nxt  # monotone non-increasing within the epoch
            assert gamma(k) / np.sqrt(size) <= gamma(k + 1) / np.sqrt(nxt) + 1e-12


def test_rule_inequality_holds_up_to_the_anchor():
    # the nominal anchor value q^2 closes each epoch's chain
    for q, gamma in ((4, gamma_convex), (7, gamma_convex), (14, gamma_sqrt)):
        for k in range(1, 10 * q):
            if is_refresh(k, q) or is_refresh(k + 1, q):
                continue
            a, b = raw_sample_size(k, q, gamma), raw_sample_size(k + 1, q, gamma)
            assert gamma(k) / np.sqrt(a) <= gamma(k + 1) / np.sqrt(b) + 1e-12


def test_cap_soundness_with_paper_epochs():
    # with q from epoch_length, uncapped sizes stay below n_local after the
    # first epoch; inside the first epoch the cap may engage
    for n_local, mode, gamma in ((256, "convex", gamma_convex),
                                 (3256, "convex", gamma_convex),
                                 (3256, "nonconvex", gamma_sqrt)):
        q = epoch_length(n_local, mode)
        for k in range(q + 1, 12 * q):
            if not is_refresh(k, q):
                assert raw_sample_size(k, q, gamma) <= n_local
        assert all(sample_size(k, q, gamma, n_local) <= n_local
                   for k in range(1, q) if not is_refresh(k, q))


def test_cap_engages_on_tiny_data():
    assert raw_sample_size(1, 4, gamma_convex) > 16
    assert sample_size(1, 4, gamma_convex, 16) == 16


def test_step_schedule_gamma_feeds_sampling():
    sched = StepSchedule(mode="convex")
    assert sample_size(5, 4, sched.gamma, 10_000) == 29


def test_draw_full_set_and_single():
    rng = np.random.default_rng(0)
    full = draw_sample_set(rng, 9, 9)
    assert np.array_equal(np.sort(full), np.arange(9))
    one = draw_sample_set(rng, 9, 1)
    assert one.shape == (1,) and 0 <= one[0] < 9


def test_draw_deterministic_given_stream():
    a = [draw_sample_set(np.random.default_rng(42), 100, s) for s in (5, 7, 3)]
    b = [draw_sample_set(np.random.default_rng(42), 100, s) for s in (5, 7, 3)]
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_draw_rejects_oversized():
    with pytest.raises(ValueError):
        draw_sample_set(np.random.default_rng(0), 5, 6)
    with pytest.raises(ValueError):
        draw_sample_set(np.random.default_rng(0), 5, 0)


def test_schedule_object_signals_refresh():
    sched = SamplingSchedule(4, gamma_convex, 64)
    assert sched.is_refresh(3) and not sched.is_refresh(4)
    assert sched.size(5) == 29
    with pytest.raises(RefreshIterationError):
        sched.draw(3, np.random.default_rng(0))
    rows = sched.draw(5, np.random.default_rng(0))
    assert rows.shape == (29,) and len(set(rows.tolist())) == 29


def test_full_batch_schedule():
    sched = FullBatchSchedule(4, 12)
    assert sched.size(1) == 12 and sched.size(6) == 12
    assert sched.is_refresh(3)


def test_sizes_within_range_after_cap():
    sched = SamplingSchedule(5, gamma_convex, 40)
    for k in range(1, 60):
        if not sched.is_refresh(k):
            assert 1 <= sched.size(k) <= 40
