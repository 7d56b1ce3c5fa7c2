import math

import numpy as np
import pytest

from cimtune import cacm
from cimtune.cacm import (
    CacmParams,
    beta_schedule,
    cacm_run,
    cacm_step,
    evaluate,
    init_state,
    trajectory,
    tts,
)
from cimtune.ising import IsingInstance, WishartSpec, energy, generate_wishart

BACKENDS = cacm.available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    before = cacm.get_backend()
    cacm.set_backend(request.param)
    yield request.param
    cacm.set_backend(before)


def test_native_backend_is_default_when_built():
    if "native" in BACKENDS:
        assert cacm.get_backend() == "native"
    with pytest.raises(ValueError):
        cacm.set_backend("gpu")


def test_beta_schedule_endpoints():
    assert beta_schedule(0, 1000, 1.0, 2.0) == 1.0
    assert beta_schedule(500, 1000, 1.0, 2.0) == 1.5
    assert beta_schedule(999, 1000, 1.0, 2.0) == pytest.approx(1.999)
    assert beta_schedule(10, 100, 1.185, 1.185) == 1.185


def test_tts_examples():
    assert tts(0.5, 1000) == pytest.approx(1000 * math.log(0.01) / math.log(0.5), abs=1e-9)
    assert tts(0.5, 1000) == pytest.approx(6643.856189774724, abs=1e-6)
    assert tts(0.54, 1000) == pytest.approx(1000 * math.log(0.01) / math.log(0.46), abs=1e-9)
    assert tts(0.99, 1000) == 1000.0
    assert tts(1.0, 1000) == 1000.0
    assert tts(0.0, 1000) == math.inf


@pytest.mark.parametrize("bad", [-0.1, 1.5, math.nan])
def test_tts_rejects_bad_probability(bad):
    with pytest.raises(ValueError):
        tts(bad, 1000)


def test_params_validation():
    with pytest.raises(ValueError):
        CacmParams(steps=0)
    with pytest.raises(ValueError):
        CacmParams(dt=0)
    with pytest.raises(ValueError):
        CacmParams(alpha=math.inf)
    assert CacmParams().with_values(alpha=0.2).alpha == 0.2


def test_single_step_by_hand():
    # with alpha = gamma = xi = 0 and beta = 1 the update is x' = x - dt*x
    inst = IsingInstance(np.array([[0.0, 1.0], [1.0, 0.0]]), [1, 1], -1.0)
    params = CacmParams(steps=10, beta1=1.0, beta2=1.0, alpha=0.0, gamma=0.0, xi=0.0, dt=0.5)
    state = cacm.CacmState(np.array([0.2, -0.4]), np.array([0.2, -0.4]), np.array([0.2, -0.4]),
                           np.ones(2), 0, 1.0, np.array([1, -1], dtype=np.int8))
    nxt = cacm_step(state, inst, params)
    assert np.allclose(nxt.x, [0.1, -0.2], atol=0, rtol=1e-15)
    assert np.array_equal(nxt.e, [1.0, 1.0])
    assert nxt.t_index == 1
    assert state.t_index == 0  # input untouched


def test_single_step_full_update_by_hand():
    w = np.array([[0.0, 2.0], [2.0, 0.0]])
    inst = IsingInstance(w, [1, 1], -2.0)
    p = CacmParams(steps=4, beta1=1.0, beta2=3.0, alpha=0.5, gamma=0.25, xi=0.1, dt=0.5)
    x, xp = np.array([0.3, -0.1]), np.array([0.2, 0.05])
    e = np.array([1.2, 0.8])
    state = cacm.CacmState(x, xp, xp, e, 2, 0.0, np.array([1, 1], dtype=np.int8))
    nxt = cacm_step(state, inst, p)
    beta = 1.0 + (2 / 4) * 2.0
    mu = w @ np.tanh(x)
    x_new = x + 0.5 * (-beta * x + 0.5 * e * mu + 0.25 * (x - xp))
    e_new = e - (x * x - 1) * e * 0.1
    e_new = e_new / e_new.mean()
    assert np.allclose(nxt.x, x_new, rtol=1e-14)
    assert np.allclose(nxt.e, e_new, rtol=1e-14)
    assert np.array_equal(nxt.x_prev, x)
    assert np.array_equal(nxt.x_prev2, xp)


def test_one_spin_instance(backend):
    inst = IsingInstance(np.zeros((1, 1)), [1], 0.0)
    r = cacm_run(inst, CacmParams(steps=20), seed=3)
    assert r.hit_ground and r.best_energy == 0.0 and r.steps_to_first_hit == 0


def test_e_normalized_every_step(backend, wpe12):
    tr = trajectory(wpe12, CacmParams(), seed=11)
    assert np.all(np.abs(tr.e_means - 1.0) < 1e-9)
    assert np.all(np.isfinite(tr.energies))


def test_trajectory_energies_match_spins(backend, wpe12):
    tr = trajectory(wpe12, CacmParams(steps=200), seed=2)
    assert tr.result.best_energy == pytest.approx(energy(wpe12, tr.best_spins), abs=1e-12)
    assert tr.result.best_energy <= np.min(tr.energies) + 1e-12


def test_kernel_matches_stepwise_api(backend, wpe12):
    params = CacmParams(steps=15)
    state = init_state(wpe12, 5)
    energies = []
    for _ in range(params.steps):
        state = cacm_step(state, wpe12, params)
        energies.append(energy(wpe12, np.where(state.x >= 0, 1, -1)))
    tr = trajectory(wpe12, params, seed=5)
    assert np.allclose(tr.energies, energies, atol=1e-12)


def test_run_deterministic(backend, wpe12):
    a = cacm_run(wpe12, CacmParams(), seed=123)
    b = cacm_run(wpe12, CacmParams(), seed=123)
    assert a == b


def test_evaluate_worker_invariant(backend, wpe12):
    p = CacmParams(steps=300)
    assert evaluate(wpe12, p, runs=12, master_seed=4, workers=1) == \
        evaluate(wpe12, p, runs=12, master_seed=4, workers=3)


def test_sign_symmetry(backend, wpe8):
    x0 = np.random.default_rng(0).uniform(-0.1, 0.1, 8)
    a = trajectory(wpe8, CacmParams(), x0=x0)
    b = trajectory(wpe8, CacmParams(), x0=-x0)
    assert np.max(np.abs(a.energies - b.energies)) <= 1e-12


def test_divergence_is_flagged(backend, wpe12):
    wild = CacmParams(steps=400, beta1=-5.0, beta2=-5.0, alpha=5.0, gamma=5.0, xi=5.0, dt=5.0)
    r = cacm_run(wpe12, wild, seed=0)
    assert r.diverged and not r.hit_ground and r.steps_to_first_hit is None
    ev = evaluate(wpe12, wild, runs=3)
    assert ev.diverged_runs == 3 and ev.tts == math.inf


def test_evaluate_counts(wpe12):
    ev = evaluate(wpe12, CacmParams(), runs=20, master_seed=1)
    assert ev.p0 == ev.hits / 20
    assert ev.tts == tts(ev.p0, 1000)
    assert ev.mean_best_energy >= wpe12.ground_energy - 1e-9
    with pytest.raises(ValueError):
        evaluate(wpe12, CacmParams(), runs=0)


@pytest.mark.skipif("native" not in BACKENDS, reason="extension not built")
def test_backends_agree_early(wpe12):
    # The loops use the same arithmetic order; chaos amplifies last-bit
    # differences from BLAS eventually, so only the early part is compared.
    params = CacmParams(steps=30)
    out = {}
    for name in BACKENDS:
        cacm.set_backend(name)
        out[name] = trajectory(wpe12, params, seed=9)
    cacm.set_backend("native")
    assert np.allclose(out["native"].energies, out["python"].energies, atol=1e-12)


@pytest.mark.skipif("native" not in BACKENDS, reason="extension not built")
def test_backends_statistically_equivalent():
    inst = generate_wishart(WishartSpec(12, 9, 2))
    res = {}
    for name in BACKENDS:
        cacm.set_backend(name)
        res[name] = evaluate(inst, CacmParams(), runs=60, master_seed=5)
    cacm.set_backend("native")
    assert abs(res["native"].p0 - res["python"].p0) <= 0.2


def test_tts_54_of_100():
    assert tts(54 / 100, 1000) == pytest.approx(5930, abs=1)


def test_small_instance_hits_are_genuine(wpe12):
    from cimtune.ising import brute_force_ground

    ev = evaluate(wpe12, CacmParams(), runs=100, master_seed=0)
    assert ev.hits >= 1
    _, e_min = brute_force_ground(wpe12)
    tr = trajectory(wpe12, CacmParams(), seed=0)
    if tr.result.hit_ground:
        assert energy(wpe12, tr.best_spins) == pytest.approx(e_min, abs=1e-9)


def test_n60_baseline_finite():
    inst = generate_wishart(WishartSpec(60, 42, 0))
    ev = evaluate(inst, CacmParams(), runs=100, master_seed=0)
    assert ev.p0 > 0 and math.isfinite(ev.tts)
