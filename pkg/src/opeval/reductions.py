"""Contextual-bandit and fixed-horizon-MDP evaluation by reduction.

Context-action pairs (and, for MDPs, whole length-H trajectories) become
composite actions of an ordinary bandit instance, after which every
estimator and analytic quantity applies unchanged.  Trajectory spaces are
stored sparsely: only trajectories reachable under the behavior or the
target policy are materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (
    BERNOULLI,
    NORMAL,
    POINT,
    BanditInstance,
    BudgetExceededError,
    Dataset,
    InputError,
    ModelError,
    Policy,
    RewardModel,
    RewardSpec,
)

_KIND_INDEX = {POINT: 0, BERNOULLI: 1, NORMAL: 2}
_KIND_NAMES = (POINT, BERNOULLI, NORMAL)


class RewardTable:
    """Array-backed grid of reward distributions, one per cell.

    Used for per-(context, action) and per-(state, action) reward models so
    that large tables stay cheap; individual cells materialize as
    :class:`RewardSpec` on demand.
    """

    __slots__ = ("kinds", "means", "variances")

    def __init__(self, kinds: np.ndarray, means: np.ndarray, variances: np.ndarray):
        kinds = np.asarray(kinds, dtype=np.int8)
        means = np.asarray(means, dtype=np.float64)
        variances = np.asarray(variances, dtype=np.float64)
        if not (kinds.shape == means.shape == variances.shape) or kinds.ndim != 2:
            raise ModelError("reward table arrays must share one 2-d shape")
        if np.any(variances < 0.0):
            raise ModelError("reward variances must be nonnegative")
        for arr in (kinds, means, variances):
            arr.flags.writeable = False
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    def __setattr__(self, name, value):
        raise AttributeError("RewardTable is immutable")

    @property
    def shape(self) -> tuple[int, int]:
        return self.kinds.shape

    def spec(self, x: int, a: int) -> RewardSpec:
        return RewardSpec(_KIND_NAMES[self.kinds[x, a]],
                          float(self.means[x, a]), float(self.variances[x, a]))

    @staticmethod
    def from_specs(rows: Sequence[Sequence[RewardSpec]]) -> "RewardTable":
        kinds = [[_KIND_INDEX[s.kind] for s in row] for row in rows]
        means = [[s.mean for s in row] for row in rows]
        variances = [[s.variance for s in row] for row in rows]
        return RewardTable(np.array(kinds), np.array(means), np.array(variances))

    @staticmethod
    def point_mass(means) -> "RewardTable":
        means = np.asarray(means, dtype=np.float64)
        return RewardTable(np.zeros(means.shape, dtype=np.int8), means,
                           np.zeros(means.shape))

    @staticmethod
    def normal(means, variances) -> "RewardTable":
        means = np.asarray(means, dtype=np.float64)
        return RewardTable(np.full(means.shape, _KIND_INDEX[NORMAL], dtype=np.int8),
                           means, np.asarray(variances, dtype=np.float64))


def _policy_table(table, m: int, k: int, what: str) -> np.ndarray:
    arr = np.asarray(table, dtype=np.float64)
    if arr.shape != (m, k):
        raise ModelError(f"{what} must have shape ({m}, {k})")
    if np.any(arr < 0.0):
        raise ModelError(f"{what} entries must be nonnegative")
    if np.any(np.abs(arr.sum(axis=1) - 1.0) > 1e-9):
        raise ModelError(f"every row of {what} must sum to 1")
    arr = arr / arr.sum(axis=1, keepdims=True)
    arr.flags.writeable = False
    return arr


class ContextualInstance:
    """Evaluation problem with per-context policies and rewards."""

    __slots__ = ("m", "k", "mu", "behavior", "target", "rewards", "rmax")

    def __init__(self, mu, behavior, target, rewards: RewardTable,
                 rmax: float | None = None):
        mu = np.asarray(mu, dtype=np.float64)
        m = mu.size
        if m == 0 or np.any(mu < 0.0) or abs(float(mu.sum()) - 1.0) > 1e-9:
            raise ModelError("context distribution must be a probability vector")
        mu = mu / mu.sum()
        k = np.asarray(behavior).shape[1] if np.asarray(behavior).ndim == 2 else 0
        behavior = _policy_table(behavior, m, k, "behavior table")
        target = _policy_table(target, m, k, "target table")
        if rewards.shape != (m, k):
            raise ModelError(f"reward table must have shape ({m}, {k})")
        mu.flags.writeable = False
        object.__setattr__(self, "m", int(m))
        object.__setattr__(self, "k", int(k))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "behavior", behavior)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "rmax", rmax)

    def __setattr__(self, name, value):
        raise AttributeError("ContextualInstance is immutable")


def composite_index(x: int, a: int, k: int) -> int:
    """Flat action index of the (context, action) pair: x * K + a."""
    return x * k + a


def contextual_value(instance: ContextualInstance) -> float:
    """Direct target value sum_{x,a} mu(x) target(a|x) mean(x, a)."""
    return float(np.sum(instance.mu[:, None] * instance.target * instance.rewards.means))


def contextual_to_bandit(instance: ContextualInstance) -> BanditInstance:
    """Flatten contexts into composite actions (index x * K + a).

    Behavior and target become the joint context-action distributions, and
    every bandit estimator or analytic quantity applies unchanged.
    """
    behavior = (instance.mu[:, None] * instance.behavior).reshape(-1)
    target = (instance.mu[:, None] * instance.target).reshape(-1)
    specs = [
        instance.rewards.spec(x, a)
        for x in range(instance.m)
        for a in range(instance.k)
    ]
    return BanditInstance(Policy(behavior), Policy(target),
                          RewardModel(specs, rmax=instance.rmax))


def contextual_reg_fast(instance: ContextualInstance,
                        data: Iterable[tuple[int, int, float]]) -> float:
    """Regression estimate in one pass over (context, action, reward) rows.

    Uses a sparse (x, a) -> (count, total) map, so cost is O(n) regardless
    of how many context-action pairs exist; unseen pairs contribute zero.
    Matches ``reg_estimate`` on the flattened bandit.
    """
    tallies: dict[tuple[int, int], list[float]] = {}
    for x, a, r in data:
        cell = tallies.setdefault((int(x), int(a)), [0, 0.0])
        cell[0] += 1
        cell[1] += float(r)
    value = 0.0
    for (x, a), (count, total) in tallies.items():
        value += instance.mu[x] * instance.target[x, a] * (total / count)
    return float(value)


# ---------------------------------------------------------------------------
# Fixed-horizon MDPs
# ---------------------------------------------------------------------------

class MdpInstance:
    """Finite MDP with N states, K actions, a fixed horizon H, a known
    transition kernel, per-(state, action) rewards, and a start
    distribution."""

    __slots__ = ("n_states", "k", "transitions", "rewards", "start", "horizon")

    def __init__(self, transitions, rewards: RewardTable, start, horizon: int):
        p = np.asarray(transitions, dtype=np.float64)
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise ModelError("transition kernel must have shape (N, K, N)")
        n_states, k = p.shape[0], p.shape[1]
        if np.any(p < 0.0) or np.any(np.abs(p.sum(axis=2) - 1.0) > 1e-9):
            raise ModelError("every transition row P(.|x, a) must sum to 1")
        p = p / p.sum(axis=2, keepdims=True)
        start = np.asarray(start, dtype=np.float64)
        if start.shape != (n_states,) or np.any(start < 0.0) \
                or abs(float(start.sum()) - 1.0) > 1e-9:
            raise ModelError("start distribution must be a probability vector")
        start = start / start.sum()
        if rewards.shape != (n_states, k):
            raise ModelError(f"reward table must have shape ({n_states}, {k})")
        if horizon < 1:
            raise ModelError(f"horizon must be >= 1, got {horizon}")
        p.flags.writeable = False
        start.flags.writeable = False
        object.__setattr__(self, "n_states", int(n_states))
        object.__setattr__(self, "k", int(k))
        object.__setattr__(self, "transitions", p)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "horizon", int(horizon))

    def __setattr__(self, name, value):
        raise AttributeError("MdpInstance is immutable")


@dataclass(frozen=True)
class Trajectory:
    """One rollout: H+1 states (terminal included), H actions, H rewards."""

    states: tuple[int, ...]
    actions: tuple[int, ...]
    rewards: tuple[float, ...]

    def __post_init__(self):
        h = len(self.actions)
        if len(self.states) != h + 1 or len(self.rewards) != h:
            raise ModelError(
                "trajectory needs H+1 states and H actions/rewards, got "
                f"{len(self.states)} states, {h} actions, {len(self.rewards)} rewards"
            )

    @property
    def total_reward(self) -> float:
        return float(math.fsum(self.rewards))


@dataclass(frozen=True)
class TrajectoryBandit:
    """A bandit over reachable trajectories plus the index that maps a raw
    (states, actions) pair to its composite action."""

    instance: BanditInstance
    trajectories: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]

    def index_of(self, states: Sequence[int], actions: Sequence[int]) -> int:
        key = (tuple(int(s) for s in states), tuple(int(a) for a in actions))
        try:
            return self._index[key]
        except AttributeError:
            index = {t: i for i, t in enumerate(self.trajectories)}
            object.__setattr__(self, "_index", index)
            return index[key]

    def dataset(self, rollouts: Sequence[Trajectory]) -> Dataset:
        """Raw rollouts as a dataset over composite actions, one sample per
        trajectory with its total reward."""
        actions = [self.index_of(t.states, t.actions) for t in rollouts]
        rewards = [t.total_reward for t in rollouts]
        return Dataset(actions, rewards, self.instance.k)


def _policy_grid(table, mdp: MdpInstance, what: str) -> np.ndarray:
    return _policy_table(table, mdp.n_states, mdp.k, what)


def mdp_to_bandit(mdp: MdpInstance, behavior, target,
                  budget: int = 1_000_000) -> TrajectoryBandit:
    """Reduce an MDP evaluation problem to a bandit over trajectories.

    Enumerates every trajectory reachable (probability > 0) under the
    behavior or the target policy, depth-first; zero-probability
    trajectories are pruned, which keeps deterministic kernels tiny.  Each
    trajectory's behavior/target mass is the product of start, policy, and
    transition probabilities; its reward distribution has the per-step mean
    and variance sums (the first two moments are all any estimator or
    analytic quantity here consumes).
    """
    behavior = _policy_grid(behavior, mdp, "behavior table")
    target = _policy_grid(target, mdp, "target table")
    h = mdp.horizon
    keys: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    b_mass: list[float] = []
    t_mass: list[float] = []
    specs: list[RewardSpec] = []

    def walk(states, actions, pb, pt, mean, var):
        if len(actions) == h:
            if len(keys) >= budget:
                raise BudgetExceededError(
                    f"more than {budget} reachable trajectories"
                )
            keys.append((tuple(states), tuple(actions)))
            b_mass.append(pb)
            t_mass.append(pt)
            specs.append(RewardSpec.point(mean) if var == 0.0
                         else RewardSpec.normal(mean, var))
            return
        x = states[-1]
        for a in range(mdp.k):
            pb_a, pt_a = behavior[x, a], target[x, a]
            if pb_a == 0.0 and pt_a == 0.0:
                continue
            step_mean = float(mdp.rewards.means[x, a])
            step_var = float(mdp.rewards.variances[x, a])
            row = mdp.transitions[x, a]
            for x_next in np.nonzero(row > 0.0)[0]:
                walk(states + [int(x_next)], actions + [a],
                     pb * pb_a * float(row[x_next]),
                     pt * pt_a * float(row[x_next]),
                     mean + step_mean, var + step_var)

    for x0 in np.nonzero(mdp.start > 0.0)[0]:
        walk([int(x0)], [], float(mdp.start[x0]), float(mdp.start[x0]), 0.0, 0.0)

    b = np.array(b_mass)
    t = np.array(t_mass)
    # Tiny float drift from long probability products; both sums are 1 by
    # construction.
    b /= b.sum()
    t /= t.sum()
    instance = BanditInstance(Policy(b), Policy(t), RewardModel(specs))
    return TrajectoryBandit(instance=instance, trajectories=tuple(keys))


def mdp_policy_value(mdp: MdpInstance, policy) -> float:
    """Expected total reward over the horizon by backward induction.

    Dynamic-programming oracle, independent of the trajectory reduction.
    """
    policy = _policy_grid(policy, mdp, "policy table")
    value = np.zeros(mdp.n_states)
    step_reward = np.sum(policy * mdp.rewards.means, axis=1)
    for _ in range(mdp.horizon):
        cont = np.einsum("xa,xay,y->x", policy, mdp.transitions, value)
        value = step_reward + cont
    return float(np.dot(mdp.start, value))


def trajectory_weight(behavior, target, states: Sequence[int],
                      actions: Sequence[int]) -> float:
    """Importance weight of one trajectory: the per-step policy-ratio
    product (start and transition factors cancel)."""
    behavior = np.asarray(behavior, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    w = 1.0
    for x, a in zip(states[:-1], actions):
        d = behavior[x, a]
        if d == 0.0:
            raise ModelError(f"zero behavior probability at state {x}, action {a}")
        w *= target[x, a] / d
    return w


def mdp_lr_estimate(behavior, target, rollouts: Sequence[Trajectory]) -> float:
    """Importance-weighted estimate straight from raw trajectories."""
    if not rollouts:
        raise ModelError("need at least one trajectory")
    total = 0.0
    for t in rollouts:
        total += trajectory_weight(behavior, target, t.states, t.actions) \
            * t.total_reward
    return total / len(rollouts)


def sample_trajectories(mdp: MdpInstance, policy, n: int, seed: int) -> list[Trajectory]:
    """Roll out n independent trajectories under a policy, deterministically
    in the seed."""
    policy = _policy_grid(policy, mdp, "policy table")
    rng = np.random.Generator(np.random.Philox(key=int(seed) & (2**128 - 1)))
    out = []
    for _ in range(n):
        x = int(rng.choice(mdp.n_states, p=mdp.start))
        states, actions, rewards = [x], [], []
        for _ in range(mdp.horizon):
            a = int(rng.choice(mdp.k, p=policy[x]))
            spec = mdp.rewards.spec(x, a)
            if spec.kind == POINT:
                r = spec.mean
            elif spec.kind == BERNOULLI:
                r = float(rng.random() < spec.mean)
            else:
                r = spec.mean + math.sqrt(spec.variance) * float(rng.standard_normal())
            x = int(rng.choice(mdp.n_states, p=mdp.transitions[states[-1], a]))
            states.append(x)
            actions.append(a)
            rewards.append(r)
        out.append(Trajectory(tuple(states), tuple(actions), tuple(rewards)))
    return out


def reach_probability(mdp: MdpInstance, policy, goal_state: int) -> float:
    """Probability a rollout under ``policy`` ever visits ``goal_state``
    within the horizon, by forward dynamic programming."""
    policy = _policy_grid(policy, mdp, "policy table")
    # Absorb at the goal so mass is counted once.
    dist = mdp.start.copy()
    reached = float(dist[goal_state])
    dist[goal_state] = 0.0
    for _ in range(mdp.horizon):
        step = np.einsum("x,xa,xay->y", dist, policy, mdp.transitions)
        reached += float(step[goal_state])
        step[goal_state] = 0.0
        dist = step
    return reached


# ---------------------------------------------------------------------------
# The combination-lock family
# ---------------------------------------------------------------------------

RESET, ADVANCE = 0, 1


@dataclass(frozen=True)
class CombinationLock:
    """A chain MDP where one action resets to the start, bundled with the
    reset-biased behavior policy and the always-advance target policy."""

    mdp: MdpInstance
    behavior: np.ndarray
    target: np.ndarray
    p_star: float
    rmax: float


def combination_lock(n_states: int, p_star: float, rmax: float = 1.0,
                     horizon: int | None = None) -> CombinationLock:
    """Chain of ``n_states`` states where ADVANCE moves one state forward,
    RESET returns to the start, and the only reward is granted on the
    advancing move out of the penultimate state (i.e. on arrival at the
    final state).

    The behavior policy resets with probability ``p_star`` everywhere, so a
    horizon-(N-1) rollout collects the reward only by advancing every step,
    which has probability (1 - p_star)^(N-1).  The target always advances.
    """
    if n_states < 2:
        raise ModelError(f"need at least 2 states, got {n_states}")
    if not 0.0 < p_star < 1.0:
        raise ModelError(f"need p_star in (0, 1), got {p_star}")
    n = n_states
    h = horizon if horizon is not None else n - 1
    p = np.zeros((n, 2, n))
    p[:, RESET, 0] = 1.0
    for x in range(n):
        p[x, ADVANCE, min(x + 1, n - 1)] = 1.0
    means = np.zeros((n, 2))
    means[n - 2, ADVANCE] = rmax
    rewards = RewardTable.point_mass(means)
    start = np.zeros(n)
    start[0] = 1.0
    mdp = MdpInstance(p, rewards, start, h)
    behavior = np.tile([p_star, 1.0 - p_star], (n, 1))
    target = np.tile([0.0, 1.0], (n, 1))
    return CombinationLock(mdp=mdp, behavior=behavior, target=target,
                           p_star=float(p_star), rmax=float(rmax))


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------

def _table_to_nested(table: RewardTable) -> list:
    from .core import _spec_to_dict

    m, k = table.shape
    return [[_spec_to_dict(table.spec(x, a)) for a in range(k)] for x in range(m)]


def _table_from_nested(rows) -> RewardTable:
    from .core import _spec_from_dict

    return RewardTable.from_specs([[_spec_from_dict(d) for d in row] for row in rows])


def contextual_to_dict(instance: ContextualInstance) -> dict:
    return {
        "M": instance.m,
        "K": instance.k,
        "mu": instance.mu.tolist(),
        "behavior": instance.behavior.tolist(),
        "target": instance.target.tolist(),
        "rewards": _table_to_nested(instance.rewards),
        "rmax": instance.rmax,
    }


def contextual_from_dict(doc: dict) -> ContextualInstance:
    try:
        return ContextualInstance(doc["mu"], doc["behavior"], doc["target"],
                                  _table_from_nested(doc["rewards"]),
                                  rmax=doc.get("rmax"))
    except (KeyError, TypeError) as exc:
        raise InputError(f"bad contextual instance document: {exc}") from exc


def mdp_to_dict(mdp: MdpInstance) -> dict:
    return {
        "N": mdp.n_states,
        "K": mdp.k,
        "P": mdp.transitions.tolist(),
        "rewards": _table_to_nested(mdp.rewards),
        "nu": mdp.start.tolist(),
        "H": mdp.horizon,
    }


def mdp_from_dict(doc: dict) -> MdpInstance:
    try:
        return MdpInstance(doc["P"], _table_from_nested(doc["rewards"]),
                           doc["nu"], doc["H"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"bad MDP document: {exc}") from exc
