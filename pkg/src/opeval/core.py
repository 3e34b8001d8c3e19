"""Problem model for off-policy evaluation on a finite action set.

A logging (behavior) policy draws actions, an unknown per-action reward
distribution draws rewards, and the quantity of interest is the mean reward
a different target policy would collect.  This module holds the immutable
model types (policies, reward models, instances, logged datasets), data
generation, exact policy values, and a brute-force enumeration oracle that
computes exact estimator moments on small discrete instances.

All types are immutable after construction and safe to share across threads;
randomness always comes from an explicit seed.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

PROB_TOL = 1e-12

POINT = "point"
BERNOULLI = "bernoulli"
NORMAL = "normal"
_KINDS = (POINT, BERNOULLI, NORMAL)


class ModelError(ValueError):
    """Invalid model construction or model-level failure."""


class InputError(ValueError):
    """Malformed external input (JSON documents, config files)."""


class UnidentifiableInstanceError(ModelError):
    """Target policy puts mass on actions the behavior policy never plays."""

    def __init__(self, actions: Sequence[int]):
        self.actions = tuple(int(a) for a in actions)
        super().__init__(
            "target policy has positive probability on actions with zero "
            f"behavior probability: {list(self.actions)}"
        )


class BudgetExceededError(ModelError):
    """Exact enumeration would exceed the configured outcome budget."""


class ContinuousRewardError(ModelError):
    """Exact enumeration requires discrete (point or Bernoulli) rewards."""


def _as_prob_vector(probs: Iterable[float], what: str) -> np.ndarray:
    arr = np.asarray(list(probs) if not isinstance(probs, np.ndarray) else probs,
                     dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ModelError(f"{what} must be a non-empty 1-d probability vector")
    if np.any(arr < -PROB_TOL) or np.any(arr > 1.0 + PROB_TOL):
        raise ModelError(f"{what} entries must lie in [0, 1]")
    if abs(float(arr.sum()) - 1.0) > 1e-12:
        raise ModelError(f"{what} must sum to 1 (got {arr.sum()!r})")
    arr = np.clip(arr, 0.0, 1.0)
    arr.flags.writeable = False
    return arr


class Policy:
    """A probability vector over K actions."""

    __slots__ = ("probs",)

    def __init__(self, probs: Iterable[float]):
        object.__setattr__(self, "probs", _as_prob_vector(probs, "policy"))

    def __setattr__(self, name, value):  # immutable
        raise AttributeError("Policy is immutable")

    @property
    def k(self) -> int:
        return int(self.probs.size)

    @property
    def min_prob(self) -> float:
        """Smallest action probability (worst-case logging coverage)."""
        return float(self.probs.min())

    def support(self) -> tuple[int, ...]:
        return tuple(int(a) for a in np.nonzero(self.probs > 0.0)[0])

    def __eq__(self, other) -> bool:
        return isinstance(other, Policy) and np.array_equal(self.probs, other.probs)

    def __repr__(self) -> str:
        return f"Policy({self.probs.tolist()!r})"

    @staticmethod
    def uniform(k: int) -> "Policy":
        return Policy(np.full(k, 1.0 / k))


@dataclass(frozen=True)
class RewardSpec:
    """Distribution of the reward of one action.

    kind      one of "point", "bernoulli", "normal"
    mean      expected reward
    variance  reward variance (0 for point mass, p(1-p) for Bernoulli)
    """

    kind: str
    mean: float
    variance: float

    @staticmethod
    def point(r: float) -> "RewardSpec":
        return RewardSpec(POINT, float(r), 0.0)

    @staticmethod
    def bernoulli(p: float) -> "RewardSpec":
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ModelError(f"bernoulli parameter must be in [0, 1], got {p}")
        return RewardSpec(BERNOULLI, p, p * (1.0 - p))

    @staticmethod
    def normal(mean: float, variance: float) -> "RewardSpec":
        variance = float(variance)
        if variance < 0.0:
            raise ModelError(f"normal variance must be nonnegative, got {variance}")
        return RewardSpec(NORMAL, float(mean), variance)


class RewardModel:
    """Per-action reward distributions with mean/variance accessors.

    ``rmax`` is an optional declared cap on mean rewards.  It is validated at
    construction when present and is required by worst-case bound
    computations; plain estimation works without it.
    """

    __slots__ = ("specs", "means", "variances", "rmax")

    def __init__(self, specs: Sequence[RewardSpec], rmax: float | None = None):
        if not specs:
            raise ModelError("reward model needs at least one action")
        for s in specs:
            if s.kind not in _KINDS:
                raise ModelError(f"unknown reward kind {s.kind!r}")
        means = np.array([s.mean for s in specs], dtype=np.float64)
        variances = np.array([s.variance for s in specs], dtype=np.float64)
        if rmax is not None:
            rmax = float(rmax)
            if np.any(means < -PROB_TOL) or np.any(means > rmax + PROB_TOL):
                raise ModelError(
                    f"declared rmax={rmax} requires every mean reward in [0, rmax]"
                )
        means.flags.writeable = False
        variances.flags.writeable = False
        object.__setattr__(self, "specs", tuple(specs))
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "rmax", rmax)

    def __setattr__(self, name, value):
        raise AttributeError("RewardModel is immutable")

    @property
    def k(self) -> int:
        return len(self.specs)

    def mean(self, a: int) -> float:
        return float(self.means[a])

    def variance(self, a: int) -> float:
        return float(self.variances[a])

    @property
    def is_discrete(self) -> bool:
        return all(s.kind in (POINT, BERNOULLI) for s in self.specs)

    @property
    def all_normal(self) -> bool:
        return all(s.kind == NORMAL for s in self.specs)

    def sample(self, rng: np.random.Generator, actions: np.ndarray) -> np.ndarray:
        """Draw one reward per entry of ``actions`` (sample order preserved)."""
        rewards = self.means[actions].copy()
        kinds = np.array([_KINDS.index(s.kind) for s in self.specs])[actions]
        bern = kinds == _KINDS.index(BERNOULLI)
        if bern.any():
            rewards[bern] = (rng.random(int(bern.sum())) < rewards[bern]).astype(np.float64)
        norm = kinds == _KINDS.index(NORMAL)
        if norm.any():
            sd = np.sqrt(self.variances[actions[norm]])
            rewards[norm] += sd * rng.standard_normal(int(norm.sum()))
        return rewards

    @staticmethod
    def point_mass(values: Iterable[float], rmax: float | None = None) -> "RewardModel":
        return RewardModel([RewardSpec.point(v) for v in values], rmax)

    @staticmethod
    def bernoulli(ps: Iterable[float], rmax: float | None = None) -> "RewardModel":
        return RewardModel([RewardSpec.bernoulli(p) for p in ps], rmax)

    @staticmethod
    def normal(means: Iterable[float], variances: Iterable[float],
               rmax: float | None = None) -> "RewardModel":
        return RewardModel(
            [RewardSpec.normal(m, v) for m, v in zip(means, variances)], rmax
        )


class BanditInstance:
    """Behavior policy, target policy, and reward model over K shared actions.

    Instances where the target puts mass on an action the behavior policy
    never plays are flagged ``unidentifiable`` at construction: the
    importance-weighted estimator is undefined there.  Construction itself
    does not raise so that such instances can still be inspected.
    """

    __slots__ = ("behavior", "target", "rewards", "unidentifiable_actions")

    def __init__(self, behavior: Policy, target: Policy, rewards: RewardModel):
        if not (behavior.k == target.k == rewards.k):
            raise ModelError(
                f"dimension mismatch: behavior K={behavior.k}, "
                f"target K={target.k}, rewards K={rewards.k}"
            )
        bad = np.nonzero((target.probs > 0.0) & (behavior.probs == 0.0))[0]
        object.__setattr__(self, "behavior", behavior)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "unidentifiable_actions",
                           tuple(int(a) for a in bad))

    def __setattr__(self, name, value):
        raise AttributeError("BanditInstance is immutable")

    @property
    def k(self) -> int:
        return self.behavior.k

    @property
    def is_identifiable(self) -> bool:
        return not self.unidentifiable_actions

    def require_identifiable(self) -> None:
        if self.unidentifiable_actions:
            raise UnidentifiableInstanceError(self.unidentifiable_actions)


class Dataset:
    """An ordered log of (action, reward) draws plus per-action tallies.

    ``counts[a]`` is the number of samples of action ``a`` and ``sums[a]``
    their total reward; both are derived at construction and are zero for
    unobserved actions.
    """

    __slots__ = ("actions", "rewards", "k", "counts", "sums")

    def __init__(self, actions: Sequence[int], rewards: Sequence[float], k: int):
        acts = np.asarray(actions, dtype=np.int64)
        rews = np.asarray(rewards, dtype=np.float64)
        if acts.shape != rews.shape or acts.ndim != 1:
            raise ModelError("actions and rewards must be 1-d and equally long")
        if acts.size and (acts.min() < 0 or acts.max() >= k):
            raise ModelError(f"action index out of range for K={k}")
        counts = np.bincount(acts, minlength=k).astype(np.int64)
        sums = np.bincount(acts, weights=rews, minlength=k)
        for arr in (acts, rews, counts, sums):
            arr.flags.writeable = False
        object.__setattr__(self, "actions", acts)
        object.__setattr__(self, "rewards", rews)
        object.__setattr__(self, "k", int(k))
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "sums", sums)

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    @property
    def n(self) -> int:
        return int(self.actions.size)

    @property
    def samples(self) -> list[tuple[int, float]]:
        return list(zip(self.actions.tolist(), self.rewards.tolist()))

    @staticmethod
    def from_samples(samples: Iterable[tuple[int, float]], k: int) -> "Dataset":
        pairs = list(samples)
        return Dataset([a for a, _ in pairs], [r for _, r in pairs], k)


def policy_value(instance: BanditInstance) -> float:
    """Mean reward the target policy would collect, sum_a pi(a) * mean(a)."""
    return float(np.dot(instance.target.probs, instance.rewards.means))


def sample_dataset(instance: BanditInstance, n: int, seed: int) -> Dataset:
    """Draw n i.i.d. (action, reward) pairs under the behavior policy.

    Deterministic given ``seed``: actions are drawn first, then rewards in
    sample order, from a counter-based generator keyed by the seed alone.
    """
    if n < 1:
        raise ModelError(f"need n >= 1, got {n}")
    rng = np.random.Generator(np.random.Philox(key=int(seed) & (2**128 - 1)))
    probs = instance.behavior.probs
    actions = rng.choice(instance.k, size=n, p=probs / probs.sum())
    rewards = instance.rewards.sample(rng, actions)
    return Dataset(actions, rewards, instance.k)


@dataclass(frozen=True)
class ExactMoments:
    """Exact mean, variance, and mean squared error of an estimator."""

    mean: float
    variance: float
    mse: float


def _estimator_fn(instance: BanditInstance, estimator: str):
    # Imported here to keep the dependency one-way at module load.
    from . import estimators as est

    if estimator == "lr":
        instance.require_identifiable()
        return lambda ds: est.lr_estimate(instance.target, instance.behavior, ds).value
    if estimator == "reg":
        return lambda ds: est.reg_estimate(instance.target, ds).value
    if estimator == "reg_reweighted":
        return lambda ds: est.reg_estimate_reweighted(instance.target, ds).value
    raise InputError(f"unknown estimator id {estimator!r}")


def enumerate_exact_moments(
    instance: BanditInstance,
    n: int,
    estimator: str,
    budget: int = 10_000_000,
) -> ExactMoments:
    """Exact estimator moments by enumerating every possible dataset.

    Walks every (action sequence, reward outcome) combination of length
    ``n`` with its exact probability, evaluates the named estimator on the
    realized dataset, and accumulates the first two moments plus the exact
    MSE around the true policy value.  Requires discrete rewards and a
    total outcome count within ``budget``.
    """
    if n < 1:
        raise ModelError(f"need n >= 1, got {n}")
    if not instance.rewards.is_discrete:
        raise ContinuousRewardError(
            "exact enumeration supports point-mass and Bernoulli rewards only"
        )
    fn = _estimator_fn(instance, estimator)

    options: list[tuple[int, float, float]] = []  # (action, reward, probability)
    behavior = instance.behavior.probs
    for a, spec in enumerate(instance.rewards.specs):
        pa = float(behavior[a])
        if pa == 0.0:
            continue
        if spec.kind == POINT:
            options.append((a, spec.mean, pa))
        else:
            p = spec.mean
            if p > 0.0:
                options.append((a, 1.0, pa * p))
            if p < 1.0:
                options.append((a, 0.0, pa * (1.0 - p)))

    total = len(options) ** n
    if total > budget:
        raise BudgetExceededError(
            f"{len(options)}^{n} = {total} outcomes exceeds budget {budget}"
        )

    v_true = policy_value(instance)
    use_logs = n > 30  # avoid underflow of long probability products
    if use_logs:
        log_options = [(a, r, math.log(p)) for a, r, p in options]

    probs: list[float] = []
    mean_terms: list[float] = []
    mse_terms: list[float] = []
    k = instance.k
    for combo in itertools.product(options, repeat=n):
        if use_logs:
            prob = math.exp(math.fsum(math.log(p) for _, _, p in combo))
        else:
            prob = 1.0
            for _, _, p in combo:
                prob *= p
        ds = Dataset([a for a, _, _ in combo], [r for _, r, _ in combo], k)
        v = fn(ds)
        probs.append(prob)
        mean_terms.append(prob * v)
        mse_terms.append(prob * (v - v_true) ** 2)

    total_prob = math.fsum(probs)
    if abs(total_prob - 1.0) > 1e-9:
        raise ModelError(f"enumeration probabilities sum to {total_prob}, not 1")
    mean = math.fsum(mean_terms)
    mse = math.fsum(mse_terms)
    variance = mse - (mean - v_true) ** 2
    return ExactMoments(mean=mean, variance=max(variance, 0.0), mse=mse)


# ---------------------------------------------------------------------------
# JSON document format.  Field names are fixed:
#   {"K": int, "behavior": [...], "target": [...],
#    "rewards": [{"kind": "normal", "mean": .., "var": ..}, ...], "rmax": ..}
# Reward entries: {"kind": "point", "r": ..}, {"kind": "bernoulli", "p": ..},
# {"kind": "normal", "mean": .., "var": ..}.
# ---------------------------------------------------------------------------

def _spec_to_dict(spec: RewardSpec) -> dict:
    if spec.kind == POINT:
        return {"kind": POINT, "r": spec.mean}
    if spec.kind == BERNOULLI:
        return {"kind": BERNOULLI, "p": spec.mean}
    return {"kind": NORMAL, "mean": spec.mean, "var": spec.variance}


def _spec_from_dict(d: dict) -> RewardSpec:
    try:
        kind = d["kind"]
        if kind == POINT:
            return RewardSpec.point(d["r"])
        if kind == BERNOULLI:
            return RewardSpec.bernoulli(d["p"])
        if kind == NORMAL:
            return RewardSpec.normal(d["mean"], d["var"])
    except KeyError as exc:
        raise InputError(f"reward entry {d!r} is missing field {exc}") from exc
    except ModelError:
        raise
    raise InputError(f"unknown reward kind {kind!r}")


def instance_to_dict(instance: BanditInstance) -> dict:
    return {
        "K": instance.k,
        "behavior": instance.behavior.probs.tolist(),
        "target": instance.target.probs.tolist(),
        "rewards": [_spec_to_dict(s) for s in instance.rewards.specs],
        "rmax": instance.rewards.rmax,
    }


def instance_from_dict(doc: dict) -> BanditInstance:
    if not isinstance(doc, dict):
        raise InputError("instance document must be a JSON object")
    try:
        k = int(doc["K"])
        behavior = doc["behavior"]
        target = doc["target"]
        rewards = doc["rewards"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad instance document: {exc}") from exc
    if not (len(behavior) == len(target) == len(rewards) == k):
        raise InputError("behavior, target, and rewards must all have length K")
    try:
        model = RewardModel([_spec_from_dict(d) for d in rewards],
                            rmax=doc.get("rmax"))
        return BanditInstance(Policy(behavior), Policy(target), model)
    except ModelError:
        raise
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad instance document: {exc}") from exc


def instance_to_json(instance: BanditInstance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2)


def instance_from_json(text: str) -> BanditInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from exc
    return instance_from_dict(doc)
