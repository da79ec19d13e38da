"""Shared random-problem generators for the test suite."""
import numpy as np

from mfbo.gp import GpInput, KernelParams, NoiseModel, ObservationBuffer, fit
from mfbo.meanfield import ActionSet, ContextMeasure


def random_problem(rng, n_obs, num_actions, num_contexts, noise=None, params=None, standardize=True):
    """A posterior over random observations plus the action set and context measure it lives on."""
    actions = ActionSet(rng.normal(size=(num_actions, 1)))
    contexts = ContextMeasure(rng.normal(size=(num_contexts, 1)), rng.dirichlet(np.ones(num_contexts)))
    if params is None:
        params = KernelParams(
            lengthscale_action=rng.uniform(0.3, 2.0),
            lengthscale_context=rng.uniform(0.3, 2.0),
            lengthscale_dist=rng.uniform(0.2, 1.0),
            output_scale=rng.uniform(0.5, 2.0),
        )
    noise = NoiseModel(rng.uniform(0.05, 0.5) if noise is None else noise)
    buf = ObservationBuffer()
    for _ in range(n_obs):
        xi = rng.dirichlet(np.ones(num_actions), size=num_contexts)
        a, c = rng.integers(num_actions), rng.integers(num_contexts)
        buf.append(GpInput(actions.embeddings[a], contexts.embeddings[c], xi.ravel(), num_contexts), rng.normal())
    return fit(buf, params, noise, standardize), actions, contexts, buf


def random_input(rng, num_actions, num_contexts, d_action=1, d_context=1):
    xi = rng.dirichlet(np.ones(num_actions), size=num_contexts)
    return GpInput(rng.normal(size=d_action), rng.normal(size=d_context), xi.ravel(), num_contexts)
