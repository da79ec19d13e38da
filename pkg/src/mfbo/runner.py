"""Experiment orchestration: MF-GP-UCB main loop, baselines, seeds, aggregation, oracles."""
import csv
import itertools
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baselines, plotting
from .acquisition import beta_value, optimize_acquisition
from .config import GENETIC_ALGORITHM, MF_GP_UCB, RANDOM, SIMULATED_ANNEALING
from .envs import env_step, expected_reward
from .gp import GpInput, NoiseModel, ObservationBuffer, fit
from .meanfield import flatten_distribution
from .records import RECORD_COLUMNS, BestTracker, RunRecord

log = logging.getLogger(__name__)

RUN_COLUMNS = tuple(c for c in RECORD_COLUMNS if c != "wall_ms")
AGG_COLUMNS = ("iteration", "mean_best", "stderr_best", "n_seeds")
MAX_BRUTE_FORCE_DIM = 5


class RunAborted(RuntimeError):
    """An iteration failed; ``records`` holds everything logged before it."""

    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


@dataclass
class RunResult:
    algorithm: str
    seed: int
    records: list
    best_assignment: object = None
    best_xi: np.ndarray = None
    gp_input_dim: int = None

    @property
    def best_rewards(self):
        return np.array([r.best_reward for r in self.records])

    @property
    def rewards(self):
        return np.array([r.reward for r in self.records])


def _streams(seed):
    env_ss, alg_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(alg_ss)


def run_mf_gp_ucb(cfg, seed, timing=None):
    """The MF-GP-UCB loop: fit, maximise MF-UCB, deploy, observe, append.  Exactly budget_t env steps.

    ``wall_ms`` covers only the GP fit and acquisition optimisation.  When
    ``timing`` is a list, per-iteration (fit_ms, acq_ms) pairs are appended.
    """
    env = cfg.env
    env_rng, alg_rng = _streams(seed)
    buffer = ObservationBuffer()
    tracker = BestTracker()
    noise = NoiseModel(cfg.gp_noise_std)
    C, A = env.num_contexts, env.num_actions
    input_dim = None
    for t in range(1, cfg.budget_t + 1):
        try:
            t0 = time.perf_counter()
            post = fit(buffer, cfg.kernel, noise, cfg.standardize) if len(buffer) else None
            t1 = time.perf_counter()
            beta = beta_value(t, A, C, cfg.beta)
            xi = optimize_acquisition(post, beta, env.contexts, env.actions, cfg.acq, alg_rng)
            t2 = time.perf_counter()
            out = env_step(env, xi, env_rng)
        except Exception as exc:
            raise RunAborted(f"mf_gp_ucb seed {seed} failed at iteration {t}: {exc}", tracker.records) from exc
        if timing is not None:
            timing.append((1e3 * (t1 - t0), 1e3 * (t2 - t1)))
        z = GpInput(
            env.actions.embeddings[out.representative_action],
            env.contexts.embeddings[out.representative_context],
            flatten_distribution(xi),
            C,
        )
        input_dim = z.dim
        buffer.append(z, out.observed_y)
        tracker.add(out.system_reward, out.observed_y, 1e3 * (t2 - t0), (xi, out.assignment))
    xi_best, pop_best = tracker.best_payload
    return RunResult(MF_GP_UCB, seed, tracker.records, pop_best, xi_best, input_dim)


def run_baseline(cfg, algorithm, seed):
    env_rng, _ = _streams(seed)
    if algorithm == RANDOM:
        tracker = baselines.random_search_run(cfg.env, cfg.budget_t, env_rng)
    elif algorithm == SIMULATED_ANNEALING:
        tracker = baselines.simulated_annealing_run(cfg.env, cfg.sa, cfg.budget_t, env_rng)
    elif algorithm == GENETIC_ALGORITHM:
        tracker = baselines.genetic_algorithm_run(cfg.env, cfg.ga, cfg.budget_t, env_rng)
    else:
        raise ValueError(f"unknown baseline {algorithm!r}")
    return RunResult(algorithm, seed, tracker.records, tracker.best_payload)


def run_one(cfg, algorithm, seed):
    if algorithm == MF_GP_UCB:
        return run_mf_gp_ucb(cfg, seed)
    return run_baseline(cfg, algorithm, seed)


def _run_job(args):
    cfg, algorithm, seed = args
    try:
        return run_one(cfg, algorithm, seed)
    except RunAborted as exc:
        return RunResult(algorithm, seed, exc.records), str(exc)


def thread_count():
    raw = os.environ.get("MFBO_THREADS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def run_all(cfg, workers=None):
    """Run every (algorithm, seed) pair; returns {algorithm: [RunResult, ...]} ordered by seed.

    Raises RunAborted after all jobs finish if any of them failed; partial
    results are still returned through the exception's ``records`` attribute
    as a dict.
    """
    jobs = [(cfg, a, s) for a in cfg.algorithms for s in cfg.seeds]
    workers = thread_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            outputs = list(pool.map(_run_job, jobs))
    else:
        outputs = [_run_job(j) for j in jobs]
    results, failures = {}, []
    for out in outputs:
        if isinstance(out, tuple):
            out, msg = out
            failures.append(msg)
        results.setdefault(out.algorithm, []).append(out)
    if failures:
        raise RunAborted("; ".join(failures), results)
    return results


def aggregate(best_matrix):
    """Per-iteration mean and standard error (sample std / sqrt(n)) across seeds."""
    best = np.asarray(best_matrix, dtype=float)
    n = best.shape[0]
    mean = best.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, best.std(axis=0, ddof=1) / np.sqrt(n)


def _fmt(x):
    return repr(float(x))


def write_run_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for r in records:
            w.writerow([r.iteration, _fmt(r.reward), _fmt(r.best_reward), _fmt(r.observed_y)])


def read_run_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        RunRecord(int(r["iteration"]), float(r["reward"]), float(r["best_reward"]), float(r["observed_y"]),
                  float(r.get("wall_ms") or 0.0))
        for r in rows
    ]


def write_agg_csv(path, mean, stderr, n):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_COLUMNS)
        for i, (m, s) in enumerate(zip(mean, stderr), start=1):
            w.writerow([i, _fmt(m), _fmt(s), n])


def read_agg_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["mean_best"]) for r in rows]), np.array([float(r["stderr_best"]) for r in rows])


def write_best_csv(path, assignment, num_contexts, num_actions):
    """Head counts of the best population found, one row per (context, action)."""
    counts = np.zeros((num_contexts, num_actions), dtype=int)
    np.add.at(counts, (assignment.context_idx, assignment.action_idx), 1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("context", "action", "count"))
        for c, a in itertools.product(range(num_contexts), range(num_actions)):
            w.writerow([c, a, counts[c, a]])


def read_best_csv(path):
    with open(path, newline="") as fh:
        rows = [(int(r["context"]), int(r["action"]), int(r["count"])) for r in csv.DictReader(fh)]
    C = max(r[0] for r in rows) + 1
    A = max(r[1] for r in rows) + 1
    counts = np.zeros((C, A), dtype=int)
    for c, a, n in rows:
        counts[c, a] = n
    return counts


def write_timing_csv(path, results):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("seed", "iteration", "wall_ms"))
        for res in results:
            for r in res.records:
                w.writerow([res.seed, r.iteration, f"{r.wall_ms:.3f}"])


def aggregate_dir(out_dir):
    """Recompute agg_<algo>.csv from every run_<algo>_<seed>.csv in ``out_dir``."""
    out_dir = Path(out_dir)
    groups = {}
    for path in sorted(out_dir.glob("run_*.csv")):
        algo, _, seed = path.stem[len("run_"):].rpartition("_")
        groups.setdefault(algo, []).append((int(seed), path))
    if not groups:
        raise FileNotFoundError(f"no run_*.csv files in {out_dir}")
    summary = {}
    for algo, items in sorted(groups.items()):
        best = [[r.best_reward for r in read_run_csv(p)] for _, p in sorted(items)]
        length = min(len(b) for b in best)
        mean, se = aggregate([b[:length] for b in best])
        write_agg_csv(out_dir / f"agg_{algo}.csv", mean, se, len(best))
        summary[algo] = (mean, se)
    return summary


def plot_dir(out_dir, title=""):
    out_dir = Path(out_dir)
    curves = {}
    for path in sorted(out_dir.glob("agg_*.csv")):
        curves[path.stem[len("agg_"):]] = read_agg_csv(path)
    if not curves:
        raise FileNotFoundError(f"no agg_*.csv files in {out_dir}")
    plotting.write_convergence_svg(out_dir / "convergence.svg", curves, title=title)
    hist_algo = MF_GP_UCB if MF_GP_UCB in curves else next(iter(curves))
    bests = sorted(out_dir.glob(f"best_{hist_algo}_*.csv"))
    if bests:
        counts = read_best_csv(bests[0])
        plotting.write_histogram_svg(out_dir / "histogram.svg", counts, title=f"{hist_algo} best solution")


def run_experiment(cfg, out_dir=None, workers=None):
    """Run, write per-seed/aggregate CSVs and SVG plots; returns {algorithm: [RunResult]}."""
    out_dir = Path(out_dir or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failure = None
    try:
        results = run_all(cfg, workers)
    except RunAborted as exc:
        results, failure = exc.records, exc
    for algo, runs in results.items():
        for res in runs:
            write_run_csv(out_dir / f"run_{algo}_{res.seed}.csv", res.records)
            if res.best_assignment is not None:
                write_best_csv(out_dir / f"best_{algo}_{res.seed}.csv", res.best_assignment,
                               cfg.env.num_contexts, cfg.env.num_actions)
        write_timing_csv(out_dir / f"timing_{algo}.csv", runs)
    if failure is not None:
        raise failure
    aggregate_dir(out_dir)
    plot_dir(out_dir, title=cfg.name)
    return results


def simplex_grid(num_actions, resolution):
    """All points of the simplex whose coordinates are multiples of 1/resolution."""
    for bars in itertools.combinations(range(resolution + num_actions - 1), num_actions - 1):
        parts = np.diff((-1,) + bars + (resolution + num_actions - 1,)) - 1
        yield parts / resolution


def brute_force_optimum(env, resolution):
    """Exhaustive scan of the product-of-simplices grid using the mean-field reward."""
    C, A = env.num_contexts, env.num_actions
    if A * C > MAX_BRUTE_FORCE_DIM:
        raise ValueError(f"|A||C| = {A * C} exceeds the brute-force limit of {MAX_BRUTE_FORCE_DIM}")
    if resolution < 1:
        raise ValueError("resolution must be at least 1")
    rows = list(simplex_grid(A, resolution))
    best_xi, best_val = None, -np.inf
    for combo in itertools.product(rows, repeat=C):
        xi = np.stack(combo)
        val = expected_reward(env, xi)
        if val > best_val:
            best_xi, best_val = xi, val
    return best_xi, float(best_val)


def regret_curve(rewards, g_star):
    """Cumulative regret sum_t (g* - r_t)."""
    rewards = np.asarray([r.reward if isinstance(r, RunRecord) else r for r in rewards], dtype=float)
    return np.cumsum(g_star - rewards)
