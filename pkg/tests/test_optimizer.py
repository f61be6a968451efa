import dataclasses
import math

import numpy as np
import pytest

from flhdc.energy import EnergyParams, UserProfile, completion_time, total_energy
from flhdc.optimizer import (
    MAX_EVALS,
    InfeasibleError,
    Scenario,
    baseline_fixed_frequency,
    baseline_fixed_power,
    min_frequency,
    optimize_dimension,
    optimize_user,
    power_from_frequency,
    sweep_time,
    user_energy,
)
from flhdc.scenario import DEFAULT_ROUNDS, ScenarioConfig, generate_scenario

from oracles import (
    naive_cycles,
    naive_power_for_deadline,
    naive_rate_limited_f_low,
    random_scenario,
    random_user_problem,
    vector_user_energy,
)

DEFAULTS = EnergyParams()
PROF = UserProfile(D=1200, g=1e-12, b=2e4, f_max=2.3e9, P_max=0.5, e=0.4)


@pytest.fixture(scope="module")
def default_scenario():
    return generate_scenario(ScenarioConfig())[0]


def test_power_unit_exponent():
    d, J, T = 4000, 20, 60.0
    A = naive_cycles(d, J, PROF, DEFAULTS)
    # choose f so that the upload window equals J*Q/b, making the exponent 1
    f = A / (T - J * DEFAULTS.kappa * d / PROF.b)
    p = power_from_frequency(f, d, J, PROF, DEFAULTS, T)
    assert p == pytest.approx(DEFAULTS.N0 * PROF.b / PROF.g, rel=1e-9)


def test_power_diverges_and_decreases():
    d, J, T = 4000, 20, 40.0
    A = naive_cycles(d, J, PROF, DEFAULTS)
    with pytest.raises(InfeasibleError):
        power_from_frequency(A / T, d, J, PROF, DEFAULTS, T)
    with pytest.raises(InfeasibleError):
        power_from_frequency(A / T * 1.0000001, d, J, PROF, DEFAULTS, T)
    fs = np.linspace(A / T * 1.05, 5e9, 200)
    ps = [power_from_frequency(f, d, J, PROF, DEFAULTS, T) for f in fs]
    assert np.all(np.diff(ps) < 0)
    for f, p in zip(fs[::20], ps[::20]):
        assert p == pytest.approx(naive_power_for_deadline(f, d, J, PROF, DEFAULTS, T), rel=1e-9)


def test_min_frequency_recovers_pmax():
    rng = np.random.default_rng(3)
    for _ in range(50):
        d, J, prof, params, T = random_user_problem(rng)
        fl = min_frequency(d, J, prof, params, T)
        assert fl == pytest.approx(naive_rate_limited_f_low(d, J, prof, params, T), rel=1e-12)
        assert power_from_frequency(fl, d, J, prof, params, T) == pytest.approx(prof.P_max, rel=1e-9)


def test_min_frequency_large_pmax_limit():
    big = dataclasses.replace(PROF, P_max=1e30)
    A = naive_cycles(4000, 20, PROF, DEFAULTS)
    fl = min_frequency(4000, 20, big, DEFAULTS, 300.0)
    assert fl == pytest.approx(A / 300.0, rel=1e-2)
    assert fl > A / 300.0


def test_shrinking_deadline_becomes_infeasible():
    d, J = 4000, 20
    T = 60.0
    while True:
        try:
            optimize_user(d, J, PROF, DEFAULTS, T)
        except InfeasibleError:
            break
        T *= 0.9
    assert T > 0.1
    sc = Scenario([PROF], DEFAULTS, T, [d], {d: J})
    res = optimize_dimension(sc)
    assert not res.feasible and d in res.infeasible_reasons


def test_user_energy_matches_total_energy():
    rng = np.random.default_rng(4)
    for _ in range(100):
        d, J, prof, params, T = random_user_problem(rng)
        fl = min_frequency(d, J, prof, params, T)
        f = rng.uniform(fl, prof.f_max)
        p = power_from_frequency(f, d, J, prof, params, T)
        assert user_energy(f, d, J, prof, params, T) == pytest.approx(
            total_energy(d, J, f, p, [prof], params), rel=1e-10)
        assert completion_time(d, J, f, p, prof, params) == pytest.approx(T, rel=1e-9)


def test_zero_gamma_energy_decreasing_and_fmax_optimal():
    params = dataclasses.replace(DEFAULTS, gamma=0.0)
    d, J, T = 4000, 20, 40.0
    fl = min_frequency(d, J, PROF, params, T)
    fs = np.linspace(fl, PROF.f_max, 200)
    es = [user_energy(f, d, J, PROF, params, T) for f in fs]
    assert np.all(np.diff(es) < 0)
    assert optimize_user(d, J, PROF, params, T).f == PROF.f_max


def test_huge_gamma_puts_optimum_at_f_low():
    params = dataclasses.replace(DEFAULTS, gamma=1e-20)
    sol = optimize_user(4000, 20, PROF, params, 40.0)
    assert sol.f == min_frequency(4000, 20, PROF, params, 40.0)
    assert sol.p == PROF.P_max


def test_optimize_user_grid_oracle():
    rng = np.random.default_rng(5)
    for _ in range(40):
        d, J, prof, params, T = random_user_problem(rng)
        sol = optimize_user(d, J, prof, params, T)
        grid = np.linspace(naive_rate_limited_f_low(d, J, prof, params, T), prof.f_max, 100_000)
        energies = vector_user_energy(grid, d, J, prof, params, T)
        k = int(np.argmin(energies))
        assert sol.energy <= energies[k] * (1 + 1e-12)
        assert sol.energy == pytest.approx(energies[k], rel=1e-6)
        assert sol.f == pytest.approx(grid[k], rel=1e-3)


def test_convexity_sampled():
    rng = np.random.default_rng(6)
    for _ in range(20):
        d, J, prof, params, T = random_user_problem(rng)
        fs = np.linspace(naive_rate_limited_f_low(d, J, prof, params, T), prof.f_max, 1000)
        assert np.all(np.diff(vector_user_energy(fs, d, J, prof, params, T), 2) > 0)


def test_allocation_invariants():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(30):
        sc = random_scenario(rng)
        res = optimize_dimension(sc)
        if not res.feasible:
            continue
        checked += 1
        for prof, f, p in zip(sc.profiles, res.f_star, res.p_star):
            fl = min_frequency(res.d_star, res.J_d, prof, sc.params, sc.T)
            assert fl * (1 - 1e-12) <= f <= prof.f_max
            assert 0 <= p <= prof.P_max
            t = completion_time(res.d_star, res.J_d, f, p, prof, sc.params)
            assert t <= sc.T * (1 + 1e-9)
            # tightening: any lower power misses the deadline
            assert completion_time(res.d_star, res.J_d, f, p * (1 - 1e-3), prof, sc.params) > sc.T
        again = total_energy(res.d_star, res.J_d, res.f_star, res.p_star, sc.profiles, sc.params)
        assert res.E_total == pytest.approx(again, rel=1e-10)
        assert res.E_total == pytest.approx(res.energy_by_dim[res.d_star], rel=1e-10)
        assert res.energy_by_dim[res.d_star] == min(res.energy_by_dim.values())
        assert res.evaluations <= len(sc.dims) * len(sc.profiles) * MAX_EVALS
    assert checked >= 10


def test_separability_against_joint_grid():
    params = DEFAULTS
    profs = [UserProfile(D=1000, g=1e-12, b=5e4), UserProfile(D=1500, g=4e-13, b=5e4)]
    d, J, T = 5000, 18, 40.0
    res = optimize_dimension(Scenario(profs, params, T, [d], {d: J}))
    grids = [np.linspace(min_frequency(d, J, p, params, T), p.f_max, 50) for p in profs]
    e1 = vector_user_energy(grids[0], d, J, profs[0], params, T)
    e2 = vector_user_energy(grids[1], d, J, profs[1], params, T)
    joint = e1[:, None] + e2[None, :]
    idx = np.unravel_index(np.argmin(joint), joint.shape)
    assert res.E_total <= joint[idx] * (1 + 1e-12)
    slack = 0.0
    for k, (prof, f, grid) in enumerate(zip(profs, res.f_star, grids)):
        step = grid[1] - grid[0]
        assert abs(f - grid[idx[k]]) <= step
        near = np.clip([f - step, f + step], grid[0], grid[-1])
        slack += vector_user_energy(near, d, J, prof, params, T).max() - \
            vector_user_energy(np.array([f]), d, J, prof, params, T)[0]
    assert joint[idx] - res.E_total <= slack


def test_singleton_and_dominated_dimension(default_scenario):
    one = optimize_dimension(default_scenario.with_dims([6000]))
    assert one.d_star == 6000
    base = optimize_dimension(default_scenario.with_dims([3000, 4000, 5000]))
    more = optimize_dimension(default_scenario.with_dims([3000, 4000, 5000, 9000]))
    assert base.d_star == more.d_star == 4000


def test_tie_breaks_to_smaller_dimension():
    sc = Scenario([PROF], DEFAULTS, 40.0, [4000, 5000], {4000: 20, 5000: 20})
    twin = Scenario([PROF], DEFAULTS, 40.0, [4000], {4000: 20})
    e = optimize_dimension(twin).E_total
    res = optimize_dimension(sc)
    assert res.energy_by_dim[4000] == pytest.approx(e)
    # a dimension with unreachable target is skipped with a reason
    sc2 = Scenario([PROF], DEFAULTS, 40.0, [3000, 4000], {3000: None, 4000: 20})
    res2 = optimize_dimension(sc2)
    assert res2.d_star == 4000 and 3000 in res2.infeasible_reasons


def test_energy_by_dim_ordering(default_scenario):
    res = optimize_dimension(default_scenario)
    e = res.energy_by_dim
    assert e[4000] < e[3000] and e[4000] < e[5000]
    assert res.d_star == 4000


def test_baselines_dominated_and_ratio(default_scenario):
    opt = optimize_dimension(default_scenario)
    ff = baseline_fixed_frequency(default_scenario)
    fp = baseline_fixed_power(default_scenario)
    assert opt.E_total <= ff.E_total and opt.E_total <= fp.E_total
    assert opt.E_total / ff.E_total <= 0.5
    for d, e in opt.energy_by_dim.items():
        if d in ff.energy_by_dim:
            assert e <= ff.energy_by_dim[d] * (1 + 1e-12)
        if d in fp.energy_by_dim:
            assert e <= fp.energy_by_dim[d] * (1 + 1e-12)
    assert "P_max/2" in fp.notes and "f_max" in ff.notes


def test_baselines_at_optimum_reproduce_energy():
    d, J, T = 4000, 20, 40.0
    sc = Scenario([PROF], DEFAULTS, T, [d], {d: J})
    opt = optimize_dimension(sc)
    ff = baseline_fixed_frequency(sc, f_fixed=opt.f_star[0])
    fp = baseline_fixed_power(sc, p_fixed=opt.p_star[0])
    assert ff.E_total == pytest.approx(opt.E_total, rel=1e-9)
    assert fp.E_total == pytest.approx(opt.E_total, rel=1e-6)


def test_baseline_pinning_errors():
    sc = Scenario([PROF], DEFAULTS, 40.0, [4000], {4000: 20})
    assert not baseline_fixed_frequency(sc, f_fixed=PROF.f_max * 2).feasible
    assert not baseline_fixed_power(sc, p_fixed=PROF.P_max * 2).feasible


def test_sweep_monotone_and_dominated(default_scenario):
    rows = sweep_time(default_scenario, [15, 20, 25, 30, 35, 40])
    opt = [r["optimized"] for r in rows]
    assert [r["T"] for r in rows] == [15, 20, 25, 30, 35, 40]
    assert all(b <= a for a, b in zip(opt, opt[1:]))
    for r in rows:
        for key in ("fixed_d_3000", "fixed_d_5000", "fixed_frequency", "fixed_power"):
            other = math.inf if math.isnan(r[key]) else r[key]
            assert r["optimized"] <= other
    assert all(e > 0 for e in opt)
    with pytest.raises(ValueError):
        sweep_time(default_scenario, [30, 20])


def test_deterministic(default_scenario):
    a = optimize_dimension(default_scenario).to_dict()
    b = optimize_dimension(generate_scenario(ScenarioConfig())[0]).to_dict()
    assert a == b


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario([PROF], DEFAULTS, 0.0, [4000], {4000: 20})
    with pytest.raises(ValueError):
        Scenario([PROF], DEFAULTS, 30.0, [4000], {3000: 20})
    with pytest.raises(ValueError):
        Scenario([PROF], DEFAULTS, 30.0, [], dict(DEFAULT_ROUNDS))
