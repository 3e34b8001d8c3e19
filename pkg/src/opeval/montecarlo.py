"""Replicated-simulation engine for empirical MSE / nMSE curves.

Each replication draws a fresh n-sample log and records the squared error
of every requested estimator.  Replication i of sample size n reads from
its own counter-based random stream keyed by (master seed, n, i), so
results are bit-identical at any thread count and chunking.

Both estimators are functions of the per-action sample counts and reward
sums alone, so a replication draws those sufficient statistics directly:
counts from a multinomial, per-action reward totals from the matching
point/binomial/normal laws.  This is distribution-exact, not an
approximation, and is cross-checked against the dataset-level enumeration
oracle in the test suite.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import BERNOULLI, NORMAL, POINT, BanditInstance, ModelError, Policy, RewardModel, policy_value

_MASK64 = 2**64 - 1
_MASK32 = 2**32 - 1

CSV_COLUMNS = ("experiment", "instance_id", "estimator", "n", "replications",
               "mse", "nmse", "stderr", "seed")

DEFAULT_COMPARISON_GRID = (10, 18, 32, 56, 100, 178, 316, 562, 1000, 1778,
                           3162, 5623, 10000)
DEFAULT_KSCALING_KS = (50, 100, 200, 500, 1000)


def replication_stream(master_seed: int, n: int, replication: int) -> np.random.Generator:
    """Independent counter-based stream for one replication of one sample
    size, keyed by (master seed, n, replication index)."""
    if n > _MASK32 or replication > _MASK32:
        raise ModelError("sample size and replication index must fit in 32 bits")
    key = ((master_seed & _MASK64) << 64) | ((n & _MASK32) << 32) | (replication & _MASK32)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class McConfig:
    """Simulation plan: how many replications of which sample sizes."""

    sample_sizes: tuple[int, ...]
    replications: int = 10000
    seed: int = 0
    estimators: tuple[str, ...] = ("lr", "reg")
    threads: int = 1

    def __post_init__(self):
        if self.replications < 2:
            raise ModelError("need at least 2 replications for a standard error")
        if not self.sample_sizes or any(n < 1 for n in self.sample_sizes):
            raise ModelError("sample sizes must be positive")
        if list(self.sample_sizes) != sorted(self.sample_sizes):
            raise ModelError("sample sizes must be sorted ascending")
        for e in self.estimators:
            if e not in ("lr", "reg"):
                raise ModelError(f"unknown estimator id {e!r}")
        if self.threads < 1:
            raise ModelError("threads must be >= 1")

    @staticmethod
    def from_dict(doc: dict) -> "McConfig":
        return McConfig(
            sample_sizes=tuple(int(n) for n in doc["sample_sizes"]),
            replications=int(doc.get("replications", 10000)),
            seed=int(doc.get("seed", 0)),
            estimators=tuple(doc.get("estimators", ("lr", "reg"))),
            threads=int(doc.get("threads", 1)),
        )


@dataclass(frozen=True)
class McRow:
    experiment: str
    instance_id: str
    estimator: str
    n: int
    replications: int
    mse: float
    nmse: float
    stderr: float
    seed: int


@dataclass(frozen=True)
class McResult:
    rows: tuple[McRow, ...]

    def curve(self, instance_id: str, estimator: str) -> list[McRow]:
        return sorted(
            (r for r in self.rows
             if r.instance_id == instance_id and r.estimator == estimator),
            key=lambda r: r.n,
        )

    def instance_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.rows:
            seen.setdefault(r.instance_id)
        return list(seen)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for r in self.rows:
            buf.write(
                f"{r.experiment},{r.instance_id},{r.estimator},{r.n},"
                f"{r.replications},{r.mse!r},{r.nmse!r},{r.stderr!r},{r.seed}\n"
            )
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps([r.__dict__ for r in self.rows], indent=2)

    def merged(self, other: "McResult") -> "McResult":
        return McResult(rows=self.rows + other.rows)


def _arm_kind_masks(rewards: RewardModel):
    kinds = np.array([s.kind for s in rewards.specs])
    return kinds == POINT, kinds == BERNOULLI, kinds == NORMAL


def _draw_stats(rng: np.random.Generator, pvals: np.ndarray, n: int,
                rewards: RewardModel, masks) -> tuple[np.ndarray, np.ndarray]:
    """Counts and per-action reward sums of one n-sample log.

    Draw order is fixed (counts, then Bernoulli totals, then normal noise)
    so a replication's stream always yields the same statistics.
    """
    point, bern, norm = masks
    counts = rng.multinomial(n, pvals)
    sums = np.zeros(pvals.size)
    if point.any():
        sums[point] = counts[point] * rewards.means[point]
    if bern.any():
        sums[bern] = rng.binomial(counts[bern], rewards.means[bern])
    if norm.any():
        noise = rng.standard_normal(int(norm.sum()))
        sums[norm] = counts[norm] * rewards.means[norm] \
            + np.sqrt(counts[norm] * rewards.variances[norm]) * noise
    return counts, sums


def _lr_from_stats(weights: np.ndarray, sums: np.ndarray, n: int) -> float:
    return float(weights @ sums / n)


def _reg_from_stats(target: np.ndarray, counts: np.ndarray, sums: np.ndarray) -> float:
    seen = counts > 0
    return float(target[seen] @ (sums[seen] / counts[seen]))


def run_mc(instance: BanditInstance, config: McConfig,
           instance_id: str = "instance", experiment: str = "adhoc") -> McResult:
    """Estimate the MSE of each configured estimator at each sample size.

    Returns one row per (estimator, n) with the empirical MSE, nMSE
    (n times MSE, exactly), and the standard error of the MSE estimate
    (sample standard deviation of squared errors over sqrt(replications)).
    """
    if "lr" in config.estimators:
        instance.require_identifiable()
    v_true = policy_value(instance)
    pvals = instance.behavior.probs / instance.behavior.probs.sum()
    target = instance.target.probs
    weights = np.divide(target, instance.behavior.probs,
                        out=np.zeros(instance.k),
                        where=instance.behavior.probs > 0.0)
    masks = _arm_kind_masks(instance.rewards)
    reps = config.replications
    estimators = config.estimators

    rows: list[McRow] = []
    for n in config.sample_sizes:
        errors = np.empty((reps, len(estimators)))

        def fill(lo: int, hi: int, n=n, errors=errors):
            for i in range(lo, hi):
                rng = replication_stream(config.seed, n, i)
                counts, sums = _draw_stats(rng, pvals, n, instance.rewards, masks)
                for j, name in enumerate(estimators):
                    if name == "lr":
                        v = _lr_from_stats(weights, sums, n)
                    else:
                        v = _reg_from_stats(target, counts, sums)
                    errors[i, j] = (v - v_true) ** 2

        if config.threads == 1:
            fill(0, reps)
        else:
            chunk = -(-reps // config.threads)
            bounds = [(lo, min(lo + chunk, reps)) for lo in range(0, reps, chunk)]
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                list(pool.map(lambda b: fill(*b), bounds))

        mse = errors.mean(axis=0)
        stderr = errors.std(axis=0, ddof=1) / math.sqrt(reps)
        for j, name in enumerate(estimators):
            rows.append(McRow(
                experiment=experiment, instance_id=instance_id, estimator=name,
                n=int(n), replications=reps, mse=float(mse[j]),
                nmse=float(n * mse[j]), stderr=float(stderr[j]),
                seed=config.seed,
            ))
    return McResult(rows=tuple(rows))


# ---------------------------------------------------------------------------
# The two canned experiments
# ---------------------------------------------------------------------------

def linear_profile_instance(k: int, behavior: str) -> BanditInstance:
    """K actions with index values 0..K-1: mean reward a/K, target mass
    proportional to a, normal noise with variance 0.01.

    ``behavior`` picks the logging policy: "aligned" (proportional to a),
    "uniform", or "reversed" (proportional to K - a).
    """
    a = np.arange(k, dtype=np.float64)
    target = a / a.sum()
    if behavior == "aligned":
        probs = a / a.sum()
    elif behavior == "uniform":
        probs = np.full(k, 1.0 / k)
    elif behavior == "reversed":
        rev = k - a
        probs = rev / rev.sum()
    else:
        raise ModelError(f"unknown behavior profile {behavior!r}")
    rewards = RewardModel.normal(a / k, np.full(k, 0.01), rmax=1.0)
    return BanditInstance(Policy(probs), Policy(target), rewards)


def comparison_instances(k: int = 10) -> list[tuple[str, BanditInstance]]:
    """The three-instance family of the estimator-comparison experiment."""
    return [(name, linear_profile_instance(k, name))
            for name in ("aligned", "uniform", "reversed")]


@dataclass(frozen=True)
class ExperimentBundle:
    """Curves plus the per-instance closed-form constants they converge to."""

    result: McResult
    constants: dict[str, dict[str, float]] = field(default_factory=dict)


def experiment_estimator_comparison(
    replications: int = 10000,
    seed: int = 7001,
    sample_sizes: Sequence[int] = DEFAULT_COMPARISON_GRID,
    threads: int = 1,
    k: int = 10,
) -> ExperimentBundle:
    """Both estimators on the three linear-profile instances, over a
    logarithmic sample-size grid."""
    from .analytics import compute_v1_v2

    rows: tuple[McRow, ...] = ()
    constants: dict[str, dict[str, float]] = {}
    for name, instance in comparison_instances(k):
        config = McConfig(sample_sizes=tuple(sample_sizes),
                          replications=replications, seed=seed,
                          estimators=("lr", "reg"), threads=threads)
        result = run_mc(instance, config, instance_id=name, experiment="comparison")
        rows += result.rows
        terms = compute_v1_v2(instance)
        constants[name] = {"v1": terms.v1, "v2": terms.v2,
                           "v1_plus_v2": terms.v1 + terms.v2}
    return ExperimentBundle(result=McResult(rows=rows), constants=constants)


def kscaling_grid(k: int) -> tuple[int, ...]:
    """Sample sizes bracketing the bias knee near (K-1)/2, with a long tail
    so curves can settle at their asymptote."""
    factors = [2 ** (e / 2.0) for e in range(-6, 3)] + [4.0, 8.0, 16.0, 32.0]
    ns = sorted({max(2, int(round((k - 1) * f))) for f in factors})
    return tuple(ns)


def experiment_k_scaling(
    ks: Sequence[int] = DEFAULT_KSCALING_KS,
    replications: int = 10000,
    seed: int = 7002,
    threads: int = 1,
) -> ExperimentBundle:
    """Regression-estimator curves for growing action counts, uniform
    logging, over grids spanning the knee at (K-1)/2."""
    from .analytics import compute_v1_v2

    rows: tuple[McRow, ...] = ()
    constants: dict[str, dict[str, float]] = {}
    for k in ks:
        instance = linear_profile_instance(k, "uniform")
        config = McConfig(sample_sizes=kscaling_grid(k),
                          replications=replications, seed=seed,
                          estimators=("reg",), threads=threads)
        name = f"K={k}"
        result = run_mc(instance, config, instance_id=name, experiment="kscaling")
        rows += result.rows
        terms = compute_v1_v2(instance)
        constants[name] = {"v1": terms.v1, "v2": terms.v2,
                           "v1_plus_v2": terms.v1 + terms.v2}
    return ExperimentBundle(result=McResult(rows=rows), constants=constants)


def knee_location(result: McResult, instance_id: str,
                  estimator: str = "reg") -> int:
    """Sample size at which a curve's nMSE peaks (where it starts to
    decrease)."""
    curve = result.curve(instance_id, estimator)
    if not curve:
        raise ModelError(f"no rows for {instance_id!r}/{estimator!r}")
    return max(curve, key=lambda r: r.nmse).n
