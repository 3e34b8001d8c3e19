"""Closed-form risk quantities, bounds, and inequality ingredients.

Everything here is computed exactly (binomial sums rather than bounds)
unless a function name says otherwise.  The two key constants are

    v1 = sum_a target(a)^2 * variance(a) / behavior(a)
    v2 = sum_a target(a)^2 * mean(a)^2 / behavior(a) - value^2

``v1`` is the reward-noise term of the importance-weighted estimator and
the asymptotic rate constant; ``v2`` is its excess term coming from the
spread of weighted mean rewards.  ``p_missing`` gives the per-action
probability of never appearing in an n-sample log, which drives the
regression estimator's bias.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import (
    BanditInstance,
    Dataset,
    ModelError,
    Policy,
    policy_value,
)

EXHAUSTIVE_SUBSET_LIMIT = 20  # 2^K fits comfortably in memory up to here


# ---------------------------------------------------------------------------
# Binomial building blocks
# ---------------------------------------------------------------------------

def binomial_pmf(n: int, p: float) -> np.ndarray:
    """Probability mass of Binomial(n, p) for k = 0..n.

    Uses exact integer coefficients for small n and log-space otherwise
    (plain coefficients overflow past n ~ 60).
    """
    if not 0.0 <= p <= 1.0:
        raise ModelError(f"p must be in [0, 1], got {p}")
    k = np.arange(n + 1)
    if p == 0.0:
        out = np.zeros(n + 1)
        out[0] = 1.0
        return out
    if p == 1.0:
        out = np.zeros(n + 1)
        out[n] = 1.0
        return out
    if n <= 60:
        return np.array([
            math.comb(n, i) * p**i * (1.0 - p) ** (n - i) for i in range(n + 1)
        ])
    logpmf = (
        gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        + k * math.log(p) + (n - k) * math.log1p(-p)
    )
    return np.exp(logpmf)


def inverse_moment_exact(n: int, p: float) -> float:
    """Exact E[ 1{S>0}/(S/n) - 1/p ] for S ~ Binomial(n, p).

    This is the per-action gap between reweighting by the empirical action
    frequency and by the true one.  It can be negative (small samples pull
    the truncated inverse below 1/p).
    """
    if n < 1:
        raise ModelError(f"need n >= 1, got {n}")
    if not 0.0 < p <= 1.0:
        raise ModelError(f"need 0 < p <= 1, got {p}")
    pmf = binomial_pmf(n, p)
    terms = [(n / k) * pmf[k] for k in range(1, n + 1)]
    return math.fsum(terms) - 1.0 / p


@dataclass(frozen=True)
class InverseMomentBounds:
    """Upper bounds on :func:`inverse_moment_exact`.

    basic    4/p, valid for every n
    refined  tighter bound, only valid (and only reported) when n*p >= 34
    """

    basic: float
    refined: float | None


def inverse_moment_bounds(n: int, p: float) -> InverseMomentBounds:
    if n < 1 or not 0.0 < p <= 1.0:
        raise ModelError(f"need n >= 1 and 0 < p <= 1, got n={n}, p={p}")
    basic = 4.0 / p
    refined = None
    if n * p >= 34.0:
        refined = (2.0 / p) * math.sqrt(2.0 / (n * p)) * (
            math.sqrt(1.5 * math.log(n * p / 2.0)) + 1.0
        )
    return InverseMomentBounds(basic=basic, refined=refined)


def inverse_seen_moment(n: int, p: float) -> float:
    """Exact E[ 1{S>0}/S ] for S ~ Binomial(n, p)."""
    if n < 1:
        raise ModelError(f"need n >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ModelError(f"need 0 <= p <= 1, got {p}")
    if p == 0.0:
        return 0.0
    pmf = binomial_pmf(n, p)
    return math.fsum(pmf[k] / k for k in range(1, n + 1))


def chernoff_lower_tail(n: int, p: float, beta: float) -> float:
    """Multiplicative lower-tail bound P(S/n <= (1-beta) p) <= exp(-beta^2 n p / 2)."""
    if not 0.0 <= beta < 1.0:
        raise ModelError(f"need 0 <= beta < 1, got {beta}")
    if n < 1 or not 0.0 <= p <= 1.0:
        raise ModelError(f"need n >= 1 and 0 <= p <= 1, got n={n}, p={p}")
    return math.exp(-(beta**2) * n * p / 2.0)


def binomial_lower_tail_exact(n: int, p: float, beta: float) -> float:
    """Exact P(S/n <= (1-beta) p) for S ~ Binomial(n, p)."""
    if not 0.0 <= beta < 1.0:
        raise ModelError(f"need 0 <= beta < 1, got {beta}")
    cutoff = math.floor((1.0 - beta) * n * p + 1e-9)
    if cutoff < 0:
        return 0.0
    pmf = binomial_pmf(n, p)
    return math.fsum(pmf[: min(cutoff, n) + 1].tolist())


# ---------------------------------------------------------------------------
# Instance-level closed forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarianceTerms:
    v1: float
    v2: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.v1) and math.isfinite(self.v2)


def compute_v1_v2(instance: BanditInstance) -> VarianceTerms:
    """The two variance constants of the importance-weighted estimator.

    Terms with zero target probability contribute nothing even when the
    behavior probability is also zero.  If the target puts mass where the
    behavior policy has none, both values are +inf.
    """
    pi = instance.target.probs
    pi_d = instance.behavior.probs
    if not instance.is_identifiable:
        return VarianceTerms(v1=math.inf, v2=math.inf)
    active = pi > 0.0
    ratio = np.zeros(instance.k)
    ratio[active] = pi[active] ** 2 / pi_d[active]
    v1 = float(np.dot(ratio, instance.rewards.variances))
    v = policy_value(instance)
    v2 = float(np.dot(ratio, instance.rewards.means**2) - v * v)
    return VarianceTerms(v1=v1, v2=max(v2, 0.0))


def p_missing(behavior: Policy, n: int) -> np.ndarray:
    """Per-action probability (1 - behavior(a))^n of no sample in n draws."""
    if n < 0:
        raise ModelError(f"need n >= 0, got {n}")
    return (1.0 - behavior.probs) ** n


def p_missing_set(behavior: Policy, subset, n: int) -> float:
    """Probability that no draw in an n-sample log lands in ``subset``."""
    idx = sorted(set(int(a) for a in subset))
    if any(a < 0 or a >= behavior.k for a in idx):
        raise ModelError(f"subset {idx} out of range for K={behavior.k}")
    mass = float(behavior.probs[idx].sum()) if idx else 0.0
    return max(1.0 - mass, 0.0) ** n


@dataclass(frozen=True)
class SmallSampleTerms:
    v0n: float
    v3n: float


def compute_v0n_v3n(instance: BanditInstance, n: int) -> SmallSampleTerms:
    """Finite-sample terms of the regression estimator's risk.

    v0n collects the squared bias plus the seen-indicator variance caps;
    v3n is the exact aggregated gap between empirical and true inverse
    propensities, computed by binomial summation (it can be negative).
    """
    pi = instance.target.probs
    pi_d = instance.behavior.probs
    r = instance.rewards.means
    var = instance.rewards.variances
    p_n = p_missing(instance.behavior, n)

    bias = float(np.dot(pi * r, p_n))
    v0n = bias**2 + float(np.dot((pi * r) ** 2, p_n * (1.0 - p_n)))

    v3n_terms = []
    for a in range(instance.k):
        w = pi[a] ** 2 * var[a]
        if w == 0.0:
            continue
        if pi_d[a] == 0.0:
            raise ModelError(
                f"v3n undefined: action {a} has reward variance but zero "
                "behavior probability"
            )
        v3n_terms.append(w * inverse_moment_exact(n, float(pi_d[a])))
    return SmallSampleTerms(v0n=v0n, v3n=math.fsum(v3n_terms))


def lr_mse(instance: BanditInstance, n: int) -> float:
    """Exact MSE of the importance-weighted estimator: (v1 + v2) / n."""
    if n < 1:
        raise ModelError(f"need n >= 1, got {n}")
    terms = compute_v1_v2(instance)
    return (terms.v1 + terms.v2) / n


def reg_bias(instance: BanditInstance, n: int) -> float:
    """Magnitude b_n of the regression estimator's bias.

    The estimator's expectation is value - b_n; unseen actions are the only
    source of bias, so b_n = sum_a target(a) * mean(a) * p_missing(a, n).
    """
    p_n = p_missing(instance.behavior, n)
    return float(np.dot(instance.target.probs * instance.rewards.means, p_n))


def reg_mse_upper(instance: BanditInstance, n: int) -> float:
    """Closed-form upper bound on the regression estimator's MSE.

    Valid for nonnegative mean rewards: v0n + (v1 + v3n)/n.
    """
    if n < 1:
        raise ModelError(f"need n >= 1, got {n}")
    small = compute_v0n_v3n(instance, n)
    v1 = compute_v1_v2(instance).v1
    return small.v0n + (v1 + small.v3n) / n


def reg_mse_lower_normal(instance: BanditInstance, n: int) -> float:
    """Closed-form lower bound on the regression estimator's MSE for
    normally distributed rewards.

    Note: the formula is only informative when every action has adequate
    coverage (roughly n * behavior(a) >= 34); at low coverage it can exceed
    the exact MSE and should not be used as a bound there.
    """
    if not instance.rewards.all_normal:
        raise ModelError("the normal-model lower bound needs normal rewards everywhere")
    if n < 1:
        raise ModelError(f"need n >= 1, got {n}")
    pi = instance.target.probs
    pi_d = instance.behavior.probs
    var = instance.rewards.variances
    active = (pi > 0.0) & (var > 0.0)
    if np.any(active & (pi_d == 0.0)):
        raise ModelError("lower bound undefined without behavior support")
    v1 = compute_v1_v2(instance).v1
    b = reg_bias(instance, n)
    p_n = p_missing(instance.behavior, n)
    tail = np.zeros(instance.k)
    tail[active] = pi[active] ** 2 * var[active] * p_n[active] / pi_d[active]
    return v1 / n + 4.0 * b * b * (1.0 + v1 / n) + (2.0 / n) * float(tail.sum())


def reg_mse_exact(instance: BanditInstance, n: int) -> float:
    """Exact MSE of the regression estimator from indicator moments.

    MSE = b_n^2
        + sum_a target(a)^2 var(a) E[1{seen}/count]
        + Var(sum_a target(a) mean(a) 1{a seen}),
    with the last term expanded through pairwise seen-probabilities.
    """
    if n < 1:
        raise ModelError(f"need n >= 1, got {n}")
    pi = instance.target.probs
    pi_d = instance.behavior.probs
    b = reg_bias(instance, n)
    noise = 0.0
    for a in range(instance.k):
        w = pi[a] ** 2 * instance.rewards.variances[a]
        if w > 0.0:
            noise += w * inverse_seen_moment(n, float(pi_d[a]))
    w_mean = pi * instance.rewards.means
    seen_var = seen_indicator_variance_pairwise(instance.behavior, w_mean, n)
    return b * b + noise + seen_var


def seen_indicator_variance_pairwise(behavior: Policy, weights: np.ndarray,
                                     n: int) -> float:
    """Exact Var(sum_a w_a 1{action a seen}) via pairwise joint-missing
    probabilities: Cov(X_a, X_b) = p_{ab} - p_a p_b."""
    p_n = p_missing(behavior, n)
    k = behavior.k
    total = []
    for a in range(k):
        if weights[a] == 0.0:
            continue
        total.append(weights[a] ** 2 * p_n[a] * (1.0 - p_n[a]))
        for bdx in range(a + 1, k):
            if weights[bdx] == 0.0:
                continue
            p_ab = max(1.0 - float(behavior.probs[a] + behavior.probs[bdx]), 0.0) ** n
            total.append(2.0 * weights[a] * weights[bdx] * (p_ab - p_n[a] * p_n[bdx]))
    return math.fsum(total)


# ---------------------------------------------------------------------------
# Seen-indicator variance: enumeration oracle vs closed-form bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IndicatorVariance:
    """Exact (or Monte Carlo) variance of a weighted seen-indicator sum,
    together with its independent-sum upper bound."""

    value: float
    bound: float
    exact: bool


def _compositions(n: int, k: int):
    """All count vectors of length k summing to n."""
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def indicator_variance_bound(
    instance: BanditInstance,
    n: int,
    budget: int = 2_000_000,
    mc_draws: int = 200_000,
    seed: int = 0,
) -> IndicatorVariance:
    """Variance of sum_a target(a) mean(a) 1{a seen} against its bound.

    The exact value enumerates multinomial count vectors when the number of
    compositions fits the budget; otherwise a flagged Monte Carlo estimate
    is returned.  The bound is sum_a w_a^2 p_a (1 - p_a), valid for
    nonnegative mean rewards.
    """
    if np.any(instance.rewards.means < 0.0):
        raise ModelError("the seen-indicator bound needs nonnegative mean rewards")
    w = instance.target.probs * instance.rewards.means
    p_n = p_missing(instance.behavior, n)
    bound = float(np.dot(w * w, p_n * (1.0 - p_n)))

    k = instance.k
    n_compositions = math.comb(n + k - 1, k - 1)
    if n_compositions <= budget:
        pi_d = instance.behavior.probs
        log_pi_d = np.log(np.where(pi_d > 0.0, pi_d, 1.0))
        log_nfact = gammaln(n + 1)
        vals, probs = [], []
        for counts in _compositions(n, k):
            c = np.array(counts)
            if np.any((c > 0) & (pi_d == 0.0)):
                continue
            logp = log_nfact - gammaln(c + 1).sum() + float(np.dot(c, log_pi_d))
            probs.append(math.exp(logp))
            vals.append(float(np.dot(w, c > 0)))
        mean = math.fsum(p * v for p, v in zip(probs, vals))
        var = math.fsum(p * (v - mean) ** 2 for p, v in zip(probs, vals))
        return IndicatorVariance(value=var, bound=bound, exact=True)

    rng = np.random.Generator(np.random.Philox(key=seed))
    counts = rng.multinomial(n, instance.behavior.probs, size=mc_draws)
    vals = (counts > 0) @ w
    return IndicatorVariance(value=float(vals.var(ddof=1)), bound=bound, exact=False)


# ---------------------------------------------------------------------------
# Worst-case lower bound on the minimax risk
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimaxBound:
    """Lower bound on the worst-case MSE of any estimator over the class
    of reward models with means in [0, rmax] and variances below the caps.

    value        0.25 * max(rmax^2 * subset_term, v1_cap / n)
    subset_term  max over action subsets B of (target mass of B)^2 times
                 the probability no draw lands in B
    v1_cap       v1 evaluated at the variance caps
    best_subset  a maximizing subset
    heuristic    True when the subset search used sorted prefixes instead
                 of exhaustive enumeration (still a valid lower bound)
    """

    value: float
    subset_term: float
    v1_cap: float
    best_subset: tuple[int, ...]
    heuristic: bool


def _subset_term_exhaustive(pi: np.ndarray, pi_d: np.ndarray, n: int):
    k = pi.size
    pi_sums = np.zeros(1)
    d_sums = np.zeros(1)
    for a in range(k):
        pi_sums = np.concatenate([pi_sums, pi_sums + pi[a]])
        d_sums = np.concatenate([d_sums, d_sums + pi_d[a]])
    values = pi_sums**2 * np.clip(1.0 - d_sums, 0.0, 1.0) ** n
    best = int(np.argmax(values))
    subset = tuple(a for a in range(k) if best >> a & 1)
    return float(values[best]), subset


def _subset_term_prefix(pi: np.ndarray, pi_d: np.ndarray, n: int):
    ratio = np.where(pi_d > 0.0, pi / np.where(pi_d > 0.0, pi_d, 1.0), np.inf)
    ratio = np.where(pi > 0.0, ratio, -1.0)  # dead target actions last
    order = np.argsort(-ratio, kind="stable")
    best_val, best_len = 0.0, 0
    mass_pi = mass_d = 0.0
    for i, a in enumerate(order, start=1):
        mass_pi += float(pi[a])
        mass_d += float(pi_d[a])
        val = mass_pi**2 * max(1.0 - mass_d, 0.0) ** n
        if val > best_val:
            best_val, best_len = val, i
    return best_val, tuple(sorted(int(a) for a in order[:best_len]))


def minimax_lower_bound(
    target: Policy,
    behavior: Policy,
    rmax: float,
    sigma2,
    n: int,
) -> MinimaxBound:
    """Worst-case risk lower bound for the class (target, behavior, rmax,
    variance caps) at sample size n.

    The subset search is exhaustive up to K = 20 actions and falls back to
    prefixes of actions sorted by descending target/behavior ratio above
    that (flagged ``heuristic``; any subset yields a valid bound).
    """
    if n < 1:
        raise ModelError(f"need n >= 1, got {n}")
    if rmax < 0.0:
        raise ModelError(f"need rmax >= 0, got {rmax}")
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    if sigma2.shape != (target.k,) or np.any(sigma2 < 0.0):
        raise ModelError("variance caps must be a nonnegative vector of length K")
    pi, pi_d = target.probs, behavior.probs

    if pi.size <= EXHAUSTIVE_SUBSET_LIMIT:
        subset_term, subset = _subset_term_exhaustive(pi, pi_d, n)
        heuristic = False
    else:
        subset_term, subset = _subset_term_prefix(pi, pi_d, n)
        heuristic = True

    active = (pi > 0.0) & (sigma2 > 0.0)
    if np.any(active & (pi_d == 0.0)):
        v1_cap = math.inf
    else:
        v1_cap = float(np.sum(pi[active] ** 2 * sigma2[active] / pi_d[active]))

    value = 0.25 * max(rmax**2 * subset_term, v1_cap / n)
    return MinimaxBound(value=value, subset_term=subset_term, v1_cap=v1_cap,
                        best_subset=subset, heuristic=heuristic)


def minimax_lower_bound_for_instance(instance: BanditInstance, n: int,
                                     rmax: float | None = None) -> MinimaxBound:
    """Bound for the class anchored at an instance: caps at its variances,
    rmax from the instance unless overridden."""
    if rmax is None:
        rmax = instance.rewards.rmax
    if rmax is None:
        raise ModelError("minimax bound needs a declared rmax")
    return minimax_lower_bound(instance.target, instance.behavior, rmax,
                               instance.rewards.variances, n)


# ---------------------------------------------------------------------------
# Fisher information of the normal-reward model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FisherInfo:
    """Diagonal Fisher information for per-action mean rewards under normal
    noise, with the value functional's gradient (the target policy)."""

    diagonal: tuple[float, ...]
    gradient: tuple[float, ...]

    def quadratic_inverse(self) -> float:
        """gradient' F^{-1} gradient; equals v1 for matching caps."""
        g = np.asarray(self.gradient)
        d = np.asarray(self.diagonal)
        return float(np.sum(g * g / d))


def fisher_info(instance: BanditInstance) -> FisherInfo:
    var = instance.rewards.variances
    if np.any(var <= 0.0):
        raise ModelError("Fisher information needs strictly positive variances")
    if np.any(instance.behavior.probs <= 0.0):
        raise ModelError("Fisher information needs full behavior support")
    diag = instance.behavior.probs / var
    return FisherInfo(diagonal=tuple(diag.tolist()),
                      gradient=tuple(instance.target.probs.tolist()))


# ---------------------------------------------------------------------------
# Bundled report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticReport:
    """Every closed-form quantity for one instance at one sample size."""

    v1: float
    v2: float
    p_missing: tuple[float, ...]
    v0n: float
    v3n: float
    bias_bn: float
    lr_mse: float
    reg_mse_upper: float
    reg_mse_lower_normal: float | None
    minimax_lower: float | None
    best_subset: tuple[int, ...] | None
    heuristic: bool | None

    def to_dict(self) -> dict:
        return {
            "v1": self.v1,
            "v2": self.v2,
            "p_missing": list(self.p_missing),
            "v0n": self.v0n,
            "v3n": self.v3n,
            "bias_bn": self.bias_bn,
            "lr_mse": self.lr_mse,
            "reg_mse_upper": self.reg_mse_upper,
            "reg_mse_lower_normal": self.reg_mse_lower_normal,
            "minimax_lower": self.minimax_lower,
            "best_subset": list(self.best_subset) if self.best_subset is not None else None,
            "heuristic": self.heuristic,
        }


def analytic_report(instance: BanditInstance, n: int) -> AnalyticReport:
    """Compute the full report; raises on unidentifiable instances."""
    instance.require_identifiable()
    terms = compute_v1_v2(instance)
    small = compute_v0n_v3n(instance, n)
    lower = None
    if instance.rewards.all_normal:
        lower = reg_mse_lower_normal(instance, n)
    bound = None
    if instance.rewards.rmax is not None:
        bound = minimax_lower_bound_for_instance(instance, n)
    return AnalyticReport(
        v1=terms.v1,
        v2=terms.v2,
        p_missing=tuple(p_missing(instance.behavior, n).tolist()),
        v0n=small.v0n,
        v3n=small.v3n,
        bias_bn=reg_bias(instance, n),
        lr_mse=(terms.v1 + terms.v2) / n,
        reg_mse_upper=small.v0n + (terms.v1 + small.v3n) / n,
        reg_mse_lower_normal=lower,
        minimax_lower=bound.value if bound else None,
        best_subset=bound.best_subset if bound else None,
        heuristic=bound.heuristic if bound else None,
    )
