"""Off-policy evaluation for finite bandits, contextual bandits, and
fixed-horizon MDPs: estimators, exact risk analytics, enumeration oracles,
and a reproducible Monte Carlo harness."""

__version__ = "0.1.0"
