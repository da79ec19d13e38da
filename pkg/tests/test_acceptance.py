"""Acceptance criteria, each at its stated tolerance.

Every test prints exactly one ``[PASS]`` / ``[FAIL]`` line.  The long
experiment runs (criteria 3, 4, 5, 6, 7 and the scaled taxi check) take
several minutes in total; run this module alone with

    pytest tests/test_acceptance.py -v -s
"""
import json
import math
import time
from decimal import Decimal, localcontext
from pathlib import Path

import numpy as np
import pytest

from conftest import random_input, random_problem
from mfbo import _backend, runner
from mfbo.acquisition import (
    THEORETICAL,
    AcqProblem,
    BetaScheduleParams,
    beta_value,
    objective_and_grad,
    xi_cardinality,
)
from mfbo.config import load_config
from mfbo.envs import (
    ARENA,
    DEMAND_MATCHING,
    MARITIME,
    SWARM,
    EnvironmentSpec,
    arena_reward,
    evaluate_assignment,
    js_divergence,
    maritime_reward,
    swarm_reward,
)
from mfbo.gp import InputBatch, cross_kernel, predict
from mfbo.meanfield import ActionSet, ContextMeasure, PopulationAssignment

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
PI = Decimal("3.14159265358979323846264338327950288419716939937510")
GOLDEN = json.loads((ROOT / "golden" / "thresholds.json").read_text())


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
        assert ok, detail

    return emit


def finals(results, algo):
    return np.array([r.best_rewards[-1] for r in results[algo]])


def stderr(x):
    return x.std(ddof=1) / math.sqrt(len(x))


# 1 ---------------------------------------------------------------------------

def dense_posterior(buf, params, noise_std, batch):
    """Explicit inverse of the regularised Gram matrix; no factorisation reuse."""
    train = buf.batch()
    K = cross_kernel(train, train, params)
    Kinv = np.linalg.inv(K + noise_std**2 * np.eye(len(buf)))
    Ks = cross_kernel(batch, train, params)
    kss = np.diag(cross_kernel(batch, batch, params))
    y = np.array(buf.targets)
    return Ks @ Kinv @ y, kss - np.einsum("ij,jk,ik->i", Ks, Kinv, Ks)


def test_c1_gp_oracle_equivalence(report):
    rng = np.random.default_rng(GOLDEN["c1"]["seed"])
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        n, A, C = int(rng.integers(1, 51)), int(rng.integers(1, 6)), int(rng.integers(1, 4))
        post, _, _, buf = random_problem(rng, n, A, C, standardize=False)
        batch = InputBatch.from_inputs([random_input(rng, A, C) for _ in range(10)] + buf.inputs[:3])
        mean, var = predict(post, batch)
        m0, v0 = dense_posterior(buf, post.params, post.noise.noise_std, batch)
        worst = max(worst, np.abs(mean - m0).max(), np.abs(var - np.maximum(v0, 0)).max())
    elapsed = time.perf_counter() - t0
    report(1, worst < 1e-8 and elapsed < 10, f"max |cholesky - dense| = {worst:.2e} (< 1e-8), {elapsed:.2f} s (< 10 s)")


# 2 ---------------------------------------------------------------------------

def test_c2_gradient_correctness(report):
    rng = np.random.default_rng(GOLDEN["c2"]["seed"])
    t0 = time.perf_counter()
    worst = 0.0
    h = 1e-5
    for _ in range(20):
        A, C = int(rng.integers(2, 6)), int(rng.integers(1, 4))
        post, acts, p, _ = random_problem(rng, int(rng.integers(2, 20)), A, C)
        prob = AcqProblem.build(post, p, acts, float(rng.uniform(0.1, 4.0)))
        theta = rng.normal(size=(1, C, A))
        for backend in ["python"] + (["cython"] if _backend.NAME == "cython" else []):
            _, g = objective_and_grad(prob, theta, backend)
            fd = np.zeros_like(theta)
            for idx in np.ndindex(C, A):
                e = np.zeros_like(theta)
                e[(0,) + idx] = h
                fd[(0,) + idx] = (objective_and_grad(prob, theta + e, backend)[0][0]
                                  - objective_and_grad(prob, theta - e, backend)[0][0]) / (2 * h)
            worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
    elapsed = time.perf_counter() - t0
    report(2, worst < 1e-4 and elapsed < 30, f"max relative error {worst:.2e} (< 1e-4), {elapsed:.2f} s (< 30 s)")


# 3 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_c3_swarm_convergence(report):
    cfg = load_config(CONFIGS / "swarm.yaml")
    t0 = time.perf_counter()
    res = runner.run_all(cfg)
    elapsed = time.perf_counter() - t0
    mean = {a: finals(res, a).mean() for a in cfg.algorithms}
    mf_curve = np.mean([r.best_rewards for r in res["mf_gp_ucb"]], axis=0)
    at150 = mf_curve[149] / mf_curve[-1]
    beats = all(mean["mf_gp_ucb"] > mean[a] for a in cfg.algorithms if a != "mf_gp_ucb")
    detail = ", ".join(f"{a} {v:.1f}" for a, v in mean.items())
    report(3, beats and at150 >= 0.95 and elapsed < 1800,
           f"final means {detail}; MF at t=150 is {at150:.3f} of final (>= 0.95); {elapsed:.0f} s")


# 4 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_c4_arena_solution_quality(report):
    cfg = load_config(CONFIGS / "arena.yaml").replace(algorithms=("mf_gp_ucb",))
    res = runner.run_all(cfg)
    mean = finals(res, "mf_gp_ucb").mean()
    # the congestion term alone is at most -sigma * ln 2 for any population
    ceiling = 1.0 - cfg.env.congestion_sigma * math.log(2)
    report(4, mean >= 0.8, f"MF-GP-UCB mean best reward {mean:.4f} (target >= 0.8; attainable ceiling {ceiling:.4f})")


# 5 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_c5_demand_matching_optimality(report):
    cfg = load_config(CONFIGS / "demand_five.yaml")
    _, g_star = runner.brute_force_optimum(cfg.env, GOLDEN["c5"]["oracle_resolution"])
    res = runner.run_all(cfg)
    best = finals(res, "mf_gp_ucb")
    ok = g_star == 0.0 and np.all(best >= -1e-2)
    report(5, ok, f"{int(np.sum(best >= -1e-2))}/{len(best)} seeds reach >= -1e-2 within T={cfg.budget_t} "
                  f"(worst {best.min():.2e}); brute-force optimum {g_star + 0.0}")


# 6 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_c6_regret_sublinearity(report):
    cfg = load_config(CONFIGS / "demand_tiny.yaml")
    _, g_star = runner.brute_force_optimum(cfg.env, 100)
    res = runner.run_all(cfg)
    curves = np.array([runner.regret_curve(r.rewards, g_star) for r in res["mf_gp_ucb"]])
    early, late = curves[:, 19].mean() / 20, curves[:, 199].mean() / 200
    report(6, late < 0.5 * early, f"R_T/T at T=20 is {early:.4g}, at T=200 is {late:.4g} (needs < {0.5 * early:.4g})")


# 7 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_c7_population_independence(report):
    base = load_config(CONFIGS / "swarm.yaml")
    T = GOLDEN["c7"]["budget_t"]
    times, dims = {}, {}
    for m in (50, 5000):
        env = EnvironmentSpec(SWARM, base.env.actions, base.env.contexts, m, base.env.noise_std,
                              base.env.congestion_sigma)
        cfg = base.replace(env=env, budget_t=T, seeds=tuple(GOLDEN["c7"]["seeds"]))
        runs = [runner.run_mf_gp_ucb(cfg, s) for s in cfg.seeds]
        times[m] = np.mean([[r.wall_ms for r in run.records] for run in runs])
        dims[m] = {run.gp_input_dim for run in runs}
    A, C = len(base.env.actions), len(base.env.contexts)
    want = A * C + base.env.actions.dim + base.env.contexts.dim
    ratio = max(times.values()) / min(times.values())
    ok = ratio < 2 and dims[50] == dims[5000] == {want}
    report(7, ok, f"mean per-iteration time M=50 {times[50]:.1f} ms, M=5000 {times[5000]:.1f} ms "
                  f"(ratio {ratio:.2f} < 2); GP input dim {sorted(dims[50])} == {want}")


# 8 ---------------------------------------------------------------------------

def scripted_beta(t, A, C, a, b):
    """50-digit decimal evaluation of the schedule, exponentiating the discretisation size directly."""
    with localcontext() as ctx:
        ctx.prec = 50
        return _scripted_beta(t, A, C, a, b)


def _scripted_beta(t, A, C, a, b):
    ac = A * C
    sqrt_pi = PI.sqrt()
    base = Decimal(b) * ac * Decimal(t) ** 2 * ((Decimal(a) * ac).ln() + sqrt_pi / 2)
    log_xi = (base**ac).ln() if base > 1 else Decimal(0)
    two_pi = 2 * PI
    beta = 2 * (Decimal(A).ln() + Decimal(C).ln() + log_xi + 2 * Decimal(t).ln() - two_pi.ln() / 2)
    return float(log_xi), float(beta)


def test_c8_schedule_arithmetic(report):
    rng = np.random.default_rng(GOLDEN["c8"]["seed"])
    worst = 0.0
    for _ in range(20):
        t, A, C = int(rng.integers(1, 500)), int(rng.integers(1, 8)), int(rng.integers(1, 5))
        a, b = float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.5, 3.0))
        want_xi, want_beta = scripted_beta(t, A, C, a, b)
        got_xi = xi_cardinality(t, A, C, a, b)
        got_beta = beta_value(t, A, C, BetaScheduleParams(mode=THEORETICAL, a_const=a, b_const=b))
        for got, want in ((got_xi, want_xi), (got_beta, want_beta)):
            worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
    report(8, worst < 1e-10, f"max relative deviation from decimal oracle {worst:.2e} (< 1e-10)")


# 9 ---------------------------------------------------------------------------

def test_c9_reward_golden_values(report):
    ln2 = math.log(2)
    one = np.zeros(50, dtype=np.int64)
    checks = {
        "swarm all at pi/2": (swarm_reward(PopulationAssignment(one, one + 1), ActionSet([0.0, math.pi / 2]), 10.0),
                              50 * (2 * math.pi**2 + 2) - 10 * ln2),
        "arena same context": (arena_reward(PopulationAssignment(one + 1, one), ContextMeasure([-1.0, 1.0]),
                                            ActionSet.circle(3), 10.0), 1 - 10 * ln2),
        "maritime single port": (maritime_reward(
            PopulationAssignment(one, one),
            EnvironmentSpec(MARITIME, ActionSet([0.0]), ContextMeasure.single(), 50, port_capacity=[1.0],
                            port_region=[0])), -0.5),
        "js disjoint support": (js_divergence([1.0, 0.0], [0.0, 1.0]), ln2),
    }
    errs = {k: abs(got - want) for k, (got, want) in checks.items()}
    report(9, max(errs.values()) < 1e-9, "; ".join(f"{k} err {e:.1e}" for k, e in errs.items()))


# 10 --------------------------------------------------------------------------

def random_env(kind, rng):
    A, m = int(rng.integers(2, 12)), int(rng.integers(2, 80))
    if kind == SWARM:
        return EnvironmentSpec(SWARM, ActionSet.circle(A), ContextMeasure.single(), m, 0.0, float(rng.uniform(0, 10)))
    if kind == ARENA:
        return EnvironmentSpec(ARENA, ActionSet.circle(A), ContextMeasure([-1.0, 1.0]), m, 0.0,
                               float(rng.uniform(0, 10)))
    if kind == DEMAND_MATCHING:
        return EnvironmentSpec(DEMAND_MATCHING, ActionSet(np.arange(A, dtype=float)), ContextMeasure.single(), m,
                               demand=rng.dirichlet(np.ones(A)))
    C = int(rng.integers(1, 4))
    return EnvironmentSpec(MARITIME, ActionSet(np.arange(A, dtype=float)), ContextMeasure(np.arange(C, dtype=float)),
                           m, port_capacity=rng.dirichlet(np.ones(A)), port_region=rng.integers(C, size=A))


def test_c10_permutation_invariance(report):
    rng = np.random.default_rng(GOLDEN["c10"]["seed"])
    changed = {}
    for kind in (SWARM, ARENA, DEMAND_MATCHING, MARITIME):
        changed[kind] = 0
        for _ in range(1000):
            env = random_env(kind, rng)
            m = env.population_m
            pop = PopulationAssignment(rng.integers(env.num_contexts, size=m), rng.integers(env.num_actions, size=m))
            a = evaluate_assignment(env, pop)
            b = evaluate_assignment(env, pop.permuted(rng.permutation(m)))
            changed[kind] += np.float64(a).tobytes() != np.float64(b).tobytes()
    report(10, sum(changed.values()) == 0, f"instances with any changed bit per environment: {changed}")


# scaled taxi ----------------------------------------------------------------

@pytest.mark.slow
def test_scaled_taxi_beats_random(report):
    cfg = load_config(CONFIGS / "nyc_small.yaml").replace(algorithms=("mf_gp_ucb", "random"))
    res = runner.run_all(cfg)
    mf, rnd = finals(res, "mf_gp_ucb"), finals(res, "random")
    margin = (mf.mean() - rnd.mean()) / stderr(rnd)
    report("NYC-scaled", margin >= 3,
           f"MF-GP-UCB {mf.mean():.4f} vs random {rnd.mean():.4f} +- {stderr(rnd):.4f}: {margin:.1f} SE (>= 3)")
