"""The two value estimators: importance weighting (LR) and regression (REG).

Both are pure functions of the policies and a logged dataset.  ``lr``
reweights logged rewards by target/behavior probability ratios; ``reg``
plugs per-action sample-mean rewards into the target policy and never looks
at the behavior policy.  ``reg`` can equivalently be written as ``lr`` with
the behavior policy replaced by its empirical estimate; both forms are
implemented separately so that their equality is a checkable surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, ModelError, Policy


class ZeroPropensityError(ModelError):
    """A logged action has zero probability under the behavior policy."""

    def __init__(self, actions):
        self.actions = tuple(int(a) for a in actions)
        super().__init__(
            f"observed actions with zero behavior probability: {list(self.actions)}"
        )


@dataclass(frozen=True)
class EstimateReport:
    """An estimate plus the reweighting that produced it.

    value           the point estimate of the target policy value
    weights         per-action weights w(a); the estimate is
                    (1/n) * sum_a w(a) * (total reward of a)
    unseen_actions  exactly the actions with no samples in the data
    """

    value: float
    weights: tuple[float, ...]
    unseen_actions: frozenset[int]


def _unseen(data: Dataset) -> frozenset[int]:
    return frozenset(int(a) for a in np.nonzero(data.counts == 0)[0])


def lr_estimate(target: Policy, behavior: Policy, data: Dataset) -> EstimateReport:
    """Importance-weighted average of logged rewards.

    Every sample contributes target(a)/behavior(a) times its reward; the
    estimate is the mean of those reweighted rewards.  Raises
    :class:`ZeroPropensityError` if any observed action has zero behavior
    probability.
    """
    if target.k != data.k or behavior.k != data.k:
        raise ModelError("policy and dataset dimensions differ")
    observed = data.counts > 0
    bad = np.nonzero(observed & (behavior.probs == 0.0))[0]
    if bad.size:
        raise ZeroPropensityError(bad)
    weights = np.divide(target.probs, behavior.probs,
                        out=np.zeros(data.k), where=behavior.probs > 0.0)
    value = float(np.dot(weights, data.sums) / data.n)
    return EstimateReport(value=value, weights=tuple(weights.tolist()),
                          unseen_actions=_unseen(data))


def reg_estimate(target: Policy, data: Dataset) -> EstimateReport:
    """Plug-in estimate from per-action sample means.

    Actions without samples contribute zero (the 0/0 := 0 convention).
    The behavior policy is deliberately not an input: the estimator never
    uses it.
    """
    if target.k != data.k:
        raise ModelError("policy and dataset dimensions differ")
    seen = data.counts > 0
    value = 0.0
    weights = np.zeros(data.k)
    for a in np.nonzero(seen)[0]:
        r_hat = data.sums[a] / data.counts[a]
        value += target.probs[a] * r_hat
        weights[a] = target.probs[a] * data.n / data.counts[a]
    return EstimateReport(value=float(value), weights=tuple(weights.tolist()),
                          unseen_actions=_unseen(data))


def reg_estimate_reweighted(target: Policy, data: Dataset) -> EstimateReport:
    """Regression estimate written as importance weighting against the
    empirical behavior policy.

    Computed sample by sample as the mean of target(a)/empirical(a) times
    reward; numerically identical to :func:`reg_estimate` and kept as a
    separate code path on purpose.
    """
    if target.k != data.k:
        raise ModelError("policy and dataset dimensions differ")
    pi_hat = empirical_propensity(data, data.k)
    total = 0.0
    for a, r in zip(data.actions.tolist(), data.rewards.tolist()):
        total += (target.probs[a] / pi_hat[a]) * r
    value = total / data.n
    weights = np.divide(target.probs, pi_hat,
                        out=np.zeros(data.k), where=pi_hat > 0.0)
    return EstimateReport(value=float(value), weights=tuple(weights.tolist()),
                          unseen_actions=_unseen(data))


def empirical_propensity(data: Dataset, k: int) -> np.ndarray:
    """Empirical action frequencies n(a)/n.

    May contain zeros, so the result is returned as a plain vector rather
    than a validated :class:`Policy`.
    """
    if data.n < 1:
        raise ModelError("empirical propensity needs at least one sample")
    if k != data.k:
        raise ModelError(f"dataset was built for K={data.k}, not {k}")
    return data.counts.astype(np.float64) / data.n
