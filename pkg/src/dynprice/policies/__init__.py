"""Pricing policies behind one interface (see :class:`PricingPolicy`)."""

from .base import (
    ConfigurationError,
    Feedback,
    PolicyConfig,
    PolicySpec,
    PolicyState,
    PricingPolicy,
    ThetaBall,
    Tuning,
    l_p,
    project_theta,
)
from .etc import ETC, ETCDoubling, MLECycle, SemiMyopic, doubling_tau, etc_tau, modified_cycle_k
from .ldp import ETCLDP, ETCLDPApprox, ETCLDPMixed, ldp_doubling_tau, ldp_tau, mixed_tau, replay_sgd
from .oracle import Clairvoyant, FixedPrice
from .supcb import SupCB, supcb_parameters
from .ucb import UCB

POLICIES = {
    cls.kind: cls
    for cls in (ETC, ETCDoubling, MLECycle, SemiMyopic, SupCB, UCB, ETCLDP, ETCLDPApprox, ETCLDPMixed,
                Clairvoyant, FixedPrice)
}

PRIVATE_KINDS = frozenset({"etc_ldp", "etc_ldp_approx", "etc_ldp_mixed"})


def make_policy(kind: str, config: PolicyConfig, rng, privacy_rng=None, **extra) -> PricingPolicy:
    """Instantiate a policy by its ``kind`` tag."""
    try:
        cls = POLICIES[kind]
    except KeyError:
        raise ConfigurationError(f"unknown policy {kind!r}; expected one of {sorted(POLICIES)}") from None
    return cls(config, rng, privacy_rng, **extra)


__all__ = [
    "POLICIES", "PRIVATE_KINDS", "make_policy", "ConfigurationError", "Feedback", "PolicyConfig",
    "PolicySpec", "PolicyState", "PricingPolicy", "ThetaBall", "Tuning", "l_p", "project_theta", "ETC", "ETCDoubling",
    "MLECycle", "SemiMyopic", "SupCB", "UCB", "ETCLDP", "ETCLDPApprox", "ETCLDPMixed", "Clairvoyant",
    "FixedPrice", "etc_tau", "doubling_tau", "modified_cycle_k", "ldp_tau", "ldp_doubling_tau", "mixed_tau",
    "replay_sgd", "supcb_parameters",
]
