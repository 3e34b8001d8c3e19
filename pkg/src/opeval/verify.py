"""Named invariant sweeps behind the ``verify`` command.

Each suite re-derives a closed-form claim from an independent route
(enumeration oracles, brute-force subset search, exact binomial sums) and
checks the production code against it at small scale.  Key formula
dependencies are injectable so a deliberately perturbed formula makes the
matching suite fail (exercised by the test harness).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import analytics, estimators, reductions
from .core import (
    BanditInstance,
    Dataset,
    InputError,
    Policy,
    RewardModel,
    RewardSpec,
    enumerate_exact_moments,
    policy_value,
    sample_dataset,
)


@dataclass(frozen=True)
class SuiteResult:
    name: str
    status: str  # "pass" | "fail" | "skipped"
    checks: int
    detail: str

    @property
    def passed(self) -> bool:
        return self.status != "fail"


@dataclass(frozen=True)
class VerifyReport:
    results: tuple[SuiteResult, ...]

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_dict(self) -> dict:
        return {
            "all_passed": self.all_passed,
            "results": [r.__dict__ for r in self.results],
        }


def _random_discrete_instance(rng: np.random.Generator, max_k: int = 4,
                              min_behavior: float = 0.02) -> BanditInstance:
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
                          RewardModel(specs, rmax=1.0))


def _suite_lr_mse(overrides: dict) -> SuiteResult:
    v1v2 = overrides.get("v1v2", analytics.compute_v1_v2)
    rng = np.random.default_rng(101)
    worst = 0.0
    checks = 0
    for _ in range(25):
        instance = _random_discrete_instance(rng)
        n = int(rng.integers(1, 5))
        oracle = enumerate_exact_moments(instance, n, "lr")
        terms = v1v2(instance)
        worst = max(worst, abs(oracle.mse - (terms.v1 + terms.v2) / n))
        worst = max(worst, abs(oracle.mean - policy_value(instance)))
        checks += 2
    status = "pass" if worst <= 1e-10 else "fail"
    return SuiteResult("lr-mse-exact", status, checks,
                       f"max |oracle - closed form| = {worst:.2e}")


def _suite_reg_bias(overrides: dict) -> SuiteResult:
    bias_fn = overrides.get("reg_bias", analytics.reg_bias)
    rng = np.random.default_rng(102)
    worst = 0.0
    checks = 0
    for _ in range(25):
        instance = _random_discrete_instance(rng)
        n = int(rng.integers(1, 5))
        oracle = enumerate_exact_moments(instance, n, "reg")
        expected = policy_value(instance) - bias_fn(instance, n)
        worst = max(worst, abs(oracle.mean - expected))
        checks += 1
    status = "pass" if worst <= 1e-10 else "fail"
    return SuiteResult("reg-bias-exact", status, checks,
                       f"max |oracle mean - (value - bias)| = {worst:.2e}")


def _suite_reg_sandwich(overrides: dict) -> SuiteResult:
    upper_fn = overrides.get("reg_mse_upper", analytics.reg_mse_upper)
    rng = np.random.default_rng(103)
    worst_slack = -math.inf
    worst_exact = 0.0
    checks = 0
    for _ in range(25):
        instance = _random_discrete_instance(rng)
        n = int(rng.integers(1, 5))
        oracle = enumerate_exact_moments(instance, n, "reg")
        worst_slack = max(worst_slack, oracle.mse - upper_fn(instance, n))
        worst_exact = max(worst_exact,
                          abs(oracle.mse - analytics.reg_mse_exact(instance, n)))
        checks += 2
    # Normal-model lower bound, checked in its adequate-coverage regime
    # against the exact closed form.
    lower_ok = True
    for k, n in ((2, 100), (3, 240), (5, 400)):
        instance = BanditInstance(
            Policy(np.full(k, 1.0 / k)),
            Policy(np.arange(1, k + 1) / (k * (k + 1) / 2)),
            RewardModel.normal(np.linspace(0.2, 0.8, k), np.full(k, 0.05)),
        )
        lower = analytics.reg_mse_lower_normal(instance, n)
        exact = analytics.reg_mse_exact(instance, n)
        lower_ok = lower_ok and lower <= exact + 1e-12
        checks += 1
    ok = worst_slack <= 1e-10 and worst_exact <= 1e-10 and lower_ok
    return SuiteResult(
        "reg-mse-sandwich", "pass" if ok else "fail", checks,
        f"max upper-bound violation = {worst_slack:.2e}, "
        f"max |oracle - closed form| = {worst_exact:.2e}, lower bound ok = {lower_ok}",
    )


def _suite_rewrite(overrides: dict) -> SuiteResult:
    rng = np.random.default_rng(104)
    worst = 0.0
    checks = 0
    for _ in range(200):
        k = int(rng.integers(1, 6))
        n = int(rng.integers(1, 12))
        target = Policy(rng.dirichlet(np.ones(k)))
        ds = Dataset(rng.integers(0, k, size=n), rng.normal(size=n), k)
        a = estimators.reg_estimate(target, ds).value
        b = estimators.reg_estimate_reweighted(target, ds).value
        worst = max(worst, abs(a - b))
        checks += 1
    status = "pass" if worst <= 1e-12 else "fail"
    return SuiteResult("rewrite-equivalence", status, checks,
                       f"max |reg - reweighted| = {worst:.2e}")


def _suite_inverse_moment(overrides: dict) -> SuiteResult:
    bounds_fn = overrides.get("inverse_moment_bounds", analytics.inverse_moment_bounds)
    worst = -math.inf
    checks = 0
    for n in range(1, 81):
        for p in np.arange(0.05, 1.0001, 0.05):
            p = float(min(p, 1.0))
            exact = analytics.inverse_moment_exact(n, p)
            b = bounds_fn(n, p)
            worst = max(worst, exact - b.basic)
            if b.refined is not None:
                worst = max(worst, exact - b.refined)
            checks += 1
    status = "pass" if worst <= 1e-12 else "fail"
    return SuiteResult("inverse-moment-bounds", status, checks,
                       f"max bound violation = {worst:.2e}")


def _suite_seen_variance(overrides: dict) -> SuiteResult:
    rng = np.random.default_rng(105)
    worst = -math.inf
    checks = 0
    for _ in range(40):
        instance = _random_discrete_instance(rng)
        n = int(rng.integers(1, 6))
        res = analytics.indicator_variance_bound(instance, n)
        worst = max(worst, res.value - res.bound)
        checks += 1
    status = "pass" if worst <= 1e-12 else "fail"
    return SuiteResult("seen-indicator-variance", status, checks,
                       f"max bound violation = {worst:.2e}")


def _suite_lower_tail(overrides: dict) -> SuiteResult:
    worst = -math.inf
    checks = 0
    for n in (1, 2, 5, 10, 25, 50, 100, 200):
        for p in np.arange(0.05, 1.0001, 0.05):
            p = float(min(p, 1.0))
            for beta in (0.0, 0.1, 0.3, 0.5, 0.7, 0.9):
                exact = analytics.binomial_lower_tail_exact(n, p, beta)
                bound = analytics.chernoff_lower_tail(n, p, beta)
                worst = max(worst, exact - bound)
                checks += 1
    status = "pass" if worst <= 1e-12 else "fail"
    return SuiteResult("binomial-lower-tail", status, checks,
                       f"max bound violation = {worst:.2e}")


def _suite_fisher(overrides: dict) -> SuiteResult:
    rng = np.random.default_rng(106)
    worst = 0.0
    checks = 0
    for _ in range(50):
        k = int(rng.integers(1, 6))
        behavior = rng.dirichlet(np.ones(k)) * 0.98 + 0.02 / k
        target = rng.dirichlet(np.ones(k))
        instance = BanditInstance(
            Policy(behavior / behavior.sum()), Policy(target),
            RewardModel.normal(rng.uniform(0, 1, k), rng.uniform(0.01, 1.0, k)),
        )
        fi = analytics.fisher_info(instance)
        worst = max(worst, abs(fi.quadratic_inverse()
                               - analytics.compute_v1_v2(instance).v1))
        checks += 1
    status = "pass" if worst <= 1e-12 else "fail"
    return SuiteResult("fisher-identity", status, checks,
                       f"max |quadratic - v1| = {worst:.2e}")


def _suite_reductions(overrides: dict) -> SuiteResult:
    rng = np.random.default_rng(107)
    worst = 0.0
    checks = 0
    for _ in range(15):
        m, k = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        ci = reductions.ContextualInstance(
            rng.dirichlet(np.ones(m)),
            rng.dirichlet(np.ones(k), size=m),
            rng.dirichlet(np.ones(k), size=m),
            reductions.RewardTable.point_mass(rng.random((m, k))),
        )
        worst = max(worst, abs(reductions.contextual_value(ci)
                               - policy_value(reductions.contextual_to_bandit(ci))))
        checks += 1
    for _ in range(15):
        n, k, h = int(rng.integers(2, 4)), int(rng.integers(2, 4)), int(rng.integers(1, 4))
        mdp = reductions.MdpInstance(
            rng.dirichlet(np.ones(n), size=(n, k)),
            reductions.RewardTable.point_mass(rng.random((n, k))),
            rng.dirichlet(np.ones(n)), h,
        )
        behavior = rng.dirichlet(np.ones(k), size=n)
        target = rng.dirichlet(np.ones(k), size=n)
        tb = reductions.mdp_to_bandit(mdp, behavior, target)
        worst = max(worst, abs(reductions.mdp_policy_value(mdp, target)
                               - policy_value(tb.instance)))
        checks += 1
    lock_ok = True
    for n_states in (2, 4, 6):
        lock = reductions.combination_lock(n_states, 0.5)
        reach = reductions.reach_probability(lock.mdp, lock.behavior, n_states - 1)
        lock_ok = lock_ok and reach == 0.5 ** (n_states - 1)
        checks += 1
    ok = worst <= 1e-10 and lock_ok
    return SuiteResult("reduction-soundness", "pass" if ok else "fail", checks,
                       f"max |reduced - direct| = {worst:.2e}, lock exact = {lock_ok}")


def _suite_subsets(overrides: dict) -> SuiteResult:
    rng = np.random.default_rng(108)
    worst = 0.0
    checks = 0
    for _ in range(30):
        k = int(rng.integers(1, 9))
        n = int(rng.integers(1, 8))
        target = Policy(rng.dirichlet(np.ones(k)))
        behavior = Policy(rng.dirichlet(np.ones(k)))
        got = analytics.minimax_lower_bound(target, behavior, 1.0,
                                            np.zeros(k), n)
        brute = 0.0
        for size in range(k + 1):
            for subset in itertools.combinations(range(k), size):
                brute = max(brute, analytics.p_missing_set(behavior, subset, n)
                            * float(target.probs[list(subset)].sum()) ** 2)
        worst = max(worst, abs(got.subset_term - brute))
        # The heuristic never exceeds the exhaustive maximum.
        pre = analytics._subset_term_prefix(target.probs, behavior.probs, n)[0]
        if pre > got.subset_term + 1e-12:
            worst = max(worst, pre - got.subset_term)
        checks += 2
    status = "pass" if worst <= 1e-12 else "fail"
    return SuiteResult("subset-search", status, checks,
                       f"max |incremental - brute force| = {worst:.2e}")


_SUITES: dict[str, Callable[[dict], SuiteResult]] = {
    "lr-mse-exact": _suite_lr_mse,
    "reg-bias-exact": _suite_reg_bias,
    "reg-mse-sandwich": _suite_reg_sandwich,
    "rewrite-equivalence": _suite_rewrite,
    "inverse-moment-bounds": _suite_inverse_moment,
    "seen-indicator-variance": _suite_seen_variance,
    "binomial-lower-tail": _suite_lower_tail,
    "fisher-identity": _suite_fisher,
    "reduction-soundness": _suite_reductions,
    "subset-search": _suite_subsets,
}


def suite_names() -> tuple[str, ...]:
    return tuple(_SUITES)


def run_verify(suites: Iterable[str] | None = None,
               overrides: dict | None = None) -> VerifyReport:
    """Run the selected suites (all by default).

    Unselected suites still appear in the report, marked skipped.
    ``overrides`` swaps out named formula dependencies; it exists so the
    test harness can prove a corrupted formula is caught.
    """
    overrides = overrides or {}
    if suites is None:
        selected = set(_SUITES)
    else:
        selected = set(suites)
        unknown = selected - set(_SUITES)
        if unknown:
            raise InputError(f"unknown verify suites: {sorted(unknown)}")
    results = []
    for name, fn in _SUITES.items():
        if name in selected:
            results.append(fn(overrides))
        else:
            results.append(SuiteResult(name, "skipped", 0, "not selected"))
    return VerifyReport(results=tuple(results))
