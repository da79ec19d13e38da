import numpy as np
import pytest

from mfbo import runner
from mfbo.config import ExperimentConfig
from mfbo.envs import DEMAND_MATCHING, SWARM, EnvironmentSpec
from mfbo.meanfield import ActionSet, ContextMeasure
from mfbo.acquisition import AcqOptConfig


def demand_env(demand, m=100):
    demand = np.asarray(demand, dtype=float)
    return EnvironmentSpec(DEMAND_MATCHING, ActionSet(np.arange(len(demand), dtype=float)), ContextMeasure.single(),
                           m, demand=demand, deterministic_mode=True)


def small_cfg(**kw):
    env = EnvironmentSpec(SWARM, ActionSet.circle(5), ContextMeasure.single(), 20, 1.0, 10.0)
    base = dict(name="t", env=env, algorithms=("mf_gp_ucb", "random"), budget_t=6, seeds=(0, 1),
                acq=AcqOptConfig(steps=20, restarts=2))
    base.update(kw)
    return ExperimentConfig(**base)


def test_aggregate_hand_values():
    mean, se = runner.aggregate([[1, 2], [3, 4]])
    assert mean.tolist() == [2.0, 3.0]
    assert se == pytest.approx(np.array([1.0, 1.0]), abs=1e-15)
    mean, se = runner.aggregate([[1, 5, 7]])
    assert mean.tolist() == [1, 5, 7] and se.tolist() == [0, 0, 0]


def test_regret_curve():
    assert runner.regret_curve([0.5] * 4, 0.5).tolist() == [0, 0, 0, 0]
    assert runner.regret_curve([-1.0] * 5, 0.0).tolist() == [1, 2, 3, 4, 5]


def test_simplex_grid():
    verts = np.array(list(runner.simplex_grid(3, 1)))
    assert sorted(map(tuple, verts)) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
    pts = list(runner.simplex_grid(3, 10))
    assert len(pts) == 66
    assert all(abs(p.sum() - 1) < 1e-12 for p in pts)


def test_brute_force_two_actions():
    xi, g = runner.brute_force_optimum(demand_env([0.7, 0.3]), 100)
    assert np.allclose(xi, [[0.7, 0.3]]) and g == pytest.approx(0.0, abs=1e-15)


def test_brute_force_three_actions():
    demand = np.array([0.5, 0.3, 0.2])
    xi, g = runner.brute_force_optimum(demand_env(demand), 20)
    assert np.abs(xi[0] - demand).sum() <= 2 / 20
    with pytest.raises(ValueError):
        runner.brute_force_optimum(demand_env(np.full(6, 1 / 6)), 10)


def test_single_iteration_is_uniform():
    cfg = small_cfg(budget_t=1, seeds=(0,))
    res = runner.run_mf_gp_ucb(cfg, 0)
    assert len(res.records) == 1
    assert np.allclose(res.best_xi, 0.2)


def test_gp_input_dim():
    res = runner.run_mf_gp_ucb(small_cfg(budget_t=2), 0)
    assert res.gp_input_dim == 5 * 1 + 1 + 1


def test_mf_gp_ucb_bit_identical():
    a = runner.run_mf_gp_ucb(small_cfg(), 3)
    b = runner.run_mf_gp_ucb(small_cfg(), 3)
    assert [(r.reward, r.observed_y) for r in a.records] == [(r.reward, r.observed_y) for r in b.records]


def test_deterministic_demand_reaches_optimum():
    env = demand_env([0.5, 0.3, 0.2])
    cfg = ExperimentConfig(name="d", env=env, budget_t=60, seeds=(0,))
    res = runner.run_mf_gp_ucb(cfg, 0)
    assert res.best_rewards[-1] >= -1e-2


def test_best_csv_round_trip(tmp_path):
    res = runner.run_baseline(small_cfg(), "random", 0)
    runner.write_best_csv(tmp_path / "b.csv", res.best_assignment, 1, 5)
    counts = runner.read_best_csv(tmp_path / "b.csv")
    assert counts.shape == (1, 5) and counts.sum() == 20


def test_experiment_outputs_byte_identical(tmp_path):
    cfg = small_cfg(algorithms=("mf_gp_ucb", "random", "simulated_annealing"), budget_t=5)
    runner.run_experiment(cfg, tmp_path / "a", workers=1)
    runner.run_experiment(cfg, tmp_path / "b", workers=1)
    names = sorted(p.name for p in (tmp_path / "a").iterdir() if not p.name.startswith("timing_"))
    assert "agg_mf_gp_ucb.csv" in names and "convergence.svg" in names and "histogram.svg" in names
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes(), n
    recs = runner.read_run_csv(tmp_path / "a" / "run_random_1.csv")
    assert [r.iteration for r in recs] == [1, 2, 3, 4, 5]


def test_aggregate_dir_recomputes(tmp_path):
    cfg = small_cfg(algorithms=("random",), budget_t=4, seeds=(0, 1, 2))
    results = runner.run_experiment(cfg, tmp_path, workers=1)
    summary = runner.aggregate_dir(tmp_path)
    best = np.array([r.best_rewards for r in results["random"]])
    assert np.allclose(summary["random"][0], best.mean(axis=0))
    assert np.allclose(summary["random"][1], best.std(axis=0, ddof=1) / np.sqrt(3))
    with pytest.raises(FileNotFoundError):
        runner.aggregate_dir(tmp_path / "missing")


def test_parallel_matches_serial(tmp_path):
    cfg = small_cfg(algorithms=("random", "mf_gp_ucb"), budget_t=4)
    serial = runner.run_all(cfg, workers=1)
    parallel = runner.run_all(cfg, workers=2)
    for algo in serial:
        for a, b in zip(serial[algo], parallel[algo]):
            assert a.seed == b.seed and np.array_equal(a.best_rewards, b.best_rewards)


def test_failed_run_keeps_partial_records(monkeypatch):
    calls = {"n": 0}
    real = runner.env_step

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] == 3:
            raise FloatingPointError("boom")
        return real(*args, **kw)

    monkeypatch.setattr(runner, "env_step", flaky)
    with pytest.raises(runner.RunAborted) as info:
        runner.run_mf_gp_ucb(small_cfg(), 0)
    assert len(info.value.records) == 2 and "iteration 3" in str(info.value)
