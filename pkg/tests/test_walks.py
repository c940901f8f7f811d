import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from stepwalk.laws import discrete, gaussian, rademacher
from stepwalk.walks import (ReinforcementParams, map_paths, read_paths_csv, replay_events, simulate_batch,
                            simulate_coupled, simulate_decomposed, simulate_ensemble, write_paths_csv)

laws = st.sampled_from([rademacher(), gaussian(), discrete([-2, 0, 1], [0.25, 0.25, 0.5])])
ps = st.floats(min_value=0.0, max_value=1.0)
seeds = st.integers(min_value=0, max_value=2**40)


def test_no_memory_gives_three_copies():
    b = simulate_batch(ReinforcementParams(0.0, gaussian()), 300, 1, np.arange(5))
    assert np.array_equal(b.S, b.S_hat) and np.array_equal(b.S, b.S_check)


def test_full_memory_repeats_first_step():
    b = simulate_batch(ReinforcementParams(1.0, gaussian()), 50, 2, np.arange(5))
    assert np.allclose(b.S_hat[:, -1], 50 * b.S[:, 1])


@given(ps, seeds)
def test_rademacher_invariants(p, seed):
    b = simulate_batch(ReinforcementParams(p, rademacher()), 200, seed, np.arange(4))
    k = np.arange(201)
    assert np.array_equal(b.V_hat, np.broadcast_to(k, b.V_hat.shape).astype(float))
    assert np.all(np.abs(b.S_check) <= k)
    assert np.all(np.abs(np.diff(b.S_hat)) == 1)


@given(ps, seeds, laws)
def test_squared_steps_and_signs(p, seed, law):
    b = simulate_batch(ReinforcementParams(p, law), 120, seed, np.arange(3))
    dh, dc = np.diff(b.S_hat), np.diff(b.S_check)
    assert np.allclose(dh**2, dc**2)
    assert np.allclose(np.diff(b.V_hat), dh**2)
    assert np.all(np.abs(b.G_check) <= b.V_hat + 1e-9)
    assert np.allclose(np.diff(b.G_check), np.sign(dc * dh) * dh**2)


@given(ps, seeds, laws)
def test_simulation_equals_replay(p, seed, law):
    path = simulate_coupled(ReinforcementParams(p, law), 60, seed, 7, record_events=True)
    S, Sh, Sc = replay_events(path.events.eps, path.events.U, path.events.X)
    assert np.array_equal(S, path.S)
    assert np.array_equal(Sh, path.S_hat)
    assert np.array_equal(Sc, path.S_check)


def test_uniform_index_drawn_without_a_repeat():
    path = simulate_coupled(ReinforcementParams(0.0, rademacher()), 30, 4, record_events=True)
    assert not path.events.eps.any()
    assert np.all(path.events.U[1:] >= 1)
    assert np.all(path.events.U[1:] <= np.arange(1, 30))


def test_streams_do_not_depend_on_p():
    a = simulate_coupled(ReinforcementParams(0.2, rademacher()), 40, 9, record_events=True)
    b = simulate_coupled(ReinforcementParams(0.7, rademacher()), 40, 9, record_events=True)
    assert np.array_equal(a.events.U, b.events.U)
    assert np.array_equal(a.S, b.S)


def test_aux_flag_does_not_change_walks():
    on = simulate_batch(ReinforcementParams(0.4, gaussian()), 100, 3, np.arange(6))
    off = simulate_batch(ReinforcementParams(0.4, gaussian(), emit_aux=False), 100, 3, np.arange(6))
    assert off.V_hat is None and off.G_check is None
    for name in ("S", "S_hat", "S_check"):
        assert np.array_equal(getattr(on, name), getattr(off, name))


def test_paths_do_not_depend_on_batching_or_threads():
    params = ReinforcementParams(0.35, gaussian())
    ref = simulate_batch(params, 80, 5, np.arange(37)).S_check
    for threads, size in ((1, 37), (3, 5), (4, 1)):
        parts = map_paths(lambda b: b.S_check, params, 80, 37, 5, threads=threads, batch_size=size)
        assert np.array_equal(np.concatenate(parts), ref)


@given(ps, seeds, st.floats(min_value=0.2, max_value=3.0))
def test_decomposition_adds_up(p, seed, K):
    total, low, high = simulate_decomposed(ReinforcementParams(p, gaussian()), K, 150, seed)
    for name in ("S", "S_hat", "S_check"):
        assert np.allclose(getattr(low, name) + getattr(high, name), getattr(total, name), atol=1e-9)


def test_decomposition_needs_centred_law():
    with pytest.raises(ValueError):
        simulate_decomposed(ReinforcementParams(0.3, discrete([0, 2])), 1.0, 10, 0)


@pytest.mark.parametrize("p", [0.3, 0.8])
def test_steps_keep_the_step_law(p):
    law = discrete([-1, 0, 2], [0.3, 0.3, 0.4])
    ens = simulate_ensemble(ReinforcementParams(p, law, emit_aux=False), 60, 100_000, 8)
    for k in (2, 17, 60):
        steps = ens["S_hat"][:, k] - ens["S_hat"][:, k - 1]
        counts = np.array([(steps == v).sum() for v in (-1, 0, 2)])
        assert stats.chisquare(counts, np.array([0.3, 0.3, 0.4]) * len(steps)).pvalue > 1e-3


def test_csv_round_trip():
    params = ReinforcementParams(0.5, gaussian())
    b = simulate_batch(params, 12, 6, np.arange(3))
    series = {k: getattr(b, k) for k in ("S", "S_hat", "S_check", "V_hat", "G_check")}
    buf = io.StringIO()
    write_paths_csv(buf, b.path_ids, np.arange(13), series, True)
    buf.seek(0)
    ids, idx, back = read_paths_csv(buf)
    assert ids.tolist() == [0, 1, 2] and idx.tolist() == list(range(13))
    for k, v in series.items():
        assert np.array_equal(back[k], v)


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        ReinforcementParams(1.2, rademacher())
    with pytest.raises(ValueError):
        simulate_batch(ReinforcementParams(0.2, rademacher()), 0, 0, [0])
