import numpy as np

from dynprice.environments import policy_config
from dynprice.glm import Covariate, sample_demand
from dynprice.policies import Feedback, make_policy


def drive(env, spec, seed=0, rounds=None, prepare=None, tags=None):
    """Run a policy round by round on ``env``; returns (policy, prices, contexts)."""
    rng = np.random.default_rng(seed)
    T = rounds or env.horizon
    policy = make_policy(spec.kind, policy_config(env, spec), np.random.default_rng(seed + 1),
                         np.random.default_rng(seed + 2))
    if prepare is not None:
        prepare(policy)
    Z, _ = env.context.draw_many(T, rng, env.horizon)
    prices = np.empty(T)
    for t in range(T):
        p = policy.choose_price(Z[t])
        y = sample_demand(env.family, Covariate(Z[t], p), env.truth, rng)
        tag = "none" if tags is None else tags[t]
        policy.observe(Feedback(Z[t], p, y, tag))
        prices[t] = p
    return policy, prices, Z
