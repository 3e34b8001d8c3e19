import numpy as np
import pytest

from opeval.core import BanditInstance, Policy, RewardModel, RewardSpec


def random_discrete_instance(rng, max_k=4, min_behavior=0.01, rmax=1.0):
    """Random small instance with point-mass/Bernoulli arms.

    Behavior probabilities are floored away from zero so likelihood ratios
    stay bounded and absolute tolerances on exact comparisons are
    meaningful.
    """
    k = int(rng.integers(1, max_k + 1))
    behavior = rng.dirichlet(np.ones(k))
    while behavior.min() < min_behavior:
        behavior = rng.dirichlet(np.ones(k))
    target = rng.dirichlet(np.ones(k))
    specs = []
    for _ in range(k):
        if rng.random() < 0.5:
            specs.append(RewardSpec.point(float(rng.uniform(0.0, 1.0))))
        else:
            specs.append(RewardSpec.bernoulli(float(rng.uniform(0.0, 1.0))))
    return BanditInstance(Policy(behavior), Policy(target),
                          RewardModel(specs, rmax=rmax))


@pytest.fixture
def rng():
    return np.random.default_rng(987654321)
