"""One-state continuous bandit: the smallest problem the learners can solve.

The reward is -(a - c)^2, so the best Gaussian policy puts its mean on c and
earns -sigma^2 on average. With a 1x1 grid the factored mean is a single
product l * r, which shows how the two factors move together.
"""

import numpy as np

from lrpg.envs import Bandit
from lrpg.factored import new_factored
from lrpg.grid import Dim, GridSpec
from lrpg.mlp import mlp_forward, new_mlp, rvfb_train
from lrpg.policy import FixedSigma, PolicyParams
from lrpg.trainer import Hyper, train

TARGET = 2.0
SIGMA = 0.3

env = Bandit(target=TARGET)
grid = GridSpec((Dim(-1, 1, 1), Dim(-1, 1, 1)), (0,), (1,))
hyper = Hyper(gamma=0.99, alpha_mu=3e-3, alpha_omega=1e-2, episodes=2000, horizon=1)

rng = np.random.default_rng(0)
policy = PolicyParams(new_factored(1, 1, 1, 0.1, rng), FixedSigma(SIGMA))
x_omega = new_factored(1, 1, 1, 0.1, rng)


def report(h, ret):
    if h % 250 == 0 or h == hyper.episodes - 1:
        L, R = policy.x_mu.left[0, 0], policy.x_mu.right[0, 0]
        print(f"episode {h:4d}  return {ret:8.3f}  l={L:+.3f} r={R:+.3f} mu={L * R:+.3f}")


print(f"factored actor-critic, target {TARGET}")
train(env, policy, x_omega, grid, hyper, rng, callback=report)
print(f"best expected return is {-SIGMA ** 2:.3f}\n")

rng = np.random.default_rng(0)
actor, critic = new_mlp([2, 8, 1], rng), new_mlp([2, 8, 1], rng)
returns = rvfb_train(env, actor, critic, hyper, SIGMA, rng)
print(f"MLP actor-critic: mean action {mlp_forward(actor, env.reset(rng)):+.3f}, "
      f"mean return over the last 100 episodes {returns[-100:].mean():.3f}")
