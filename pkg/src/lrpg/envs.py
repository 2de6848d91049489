"""Continuous-state, scalar-action control environments.

All systems are integrated with semi-implicit Euler (velocity first, then
position with the new velocity). States are tuples of floats; every physical
constant is a dataclass field and can be overridden at construction, e.g.
``Pendulum(g=9.81, horizon=100)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np


class StepResult(NamedTuple):
    next_state: tuple
    reward: float
    done: bool


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_low: float
    action_high: float
    horizon: int
    state_low: tuple
    state_high: tuple


class EpisodeOver(RuntimeError):
    pass


def wrap_angle(x: float) -> float:
    return ((x + math.pi) % (2.0 * math.pi)) - math.pi


def _clip(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


@dataclass
class Env:
    """Base class: episode bookkeeping and action clipping.

    ``done`` is reported on true termination and also when the step counter
    reaches ``horizon``; stepping after that raises :class:`EpisodeOver`.
    """

    horizon: int = 200
    name = "env"

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.state = None
        self.t = 0
        self.finished = True

    @classmethod
    def constant_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def spec(self) -> EnvSpec:
        lo, hi = self.state_bounds()
        return EnvSpec(self.name, len(lo), self.action_low, self.action_high,
                       self.horizon, tuple(lo), tuple(hi))

    def clip_action(self, a: float) -> float:
        return _clip(float(a), self.action_low, self.action_high)

    def reset(self, rng: np.random.Generator) -> tuple:
        self.t = 0
        self.finished = False
        self.state = self._initial_state(rng)
        return self.state

    def step(self, action: float) -> StepResult:
        if self.finished:
            raise EpisodeOver(f"{self.name}: step() called on a finished episode; call reset()")
        u = self.clip_action(action)
        nxt, reward, done = self._advance(self.state, u)
        self.t += 1
        done = done or self.t >= self.horizon
        if done:
            reward += self._final_reward(nxt)
        self.state = nxt
        self.finished = done
        return StepResult(nxt, reward, done)

    def _final_reward(self, state) -> float:
        return 0.0


def env_spec(env: Env) -> EnvSpec:
    return env.spec()


def reset(env: Env, rng: np.random.Generator) -> tuple:
    return env.reset(rng)


def step(env: Env, action: float) -> StepResult:
    return env.step(action)


@dataclass
class Pendulum(Env):
    """Torque-limited pendulum swing-up; ``theta = 0`` is upright.

    Reward is ``-(theta**2 + 0.1 * omega**2 + 0.001 * u**2)`` evaluated at the
    pre-step state with the clipped torque.
    """

    g: float = 10.0
    m: float = 1.0
    l: float = 1.0
    dt: float = 0.05
    max_speed: float = 8.0
    max_torque: float = 2.0
    init_speed: float = 1.0
    horizon: int = 200
    name = "pendulum"

    @property
    def action_low(self):
        return -self.max_torque

    @property
    def action_high(self):
        return self.max_torque

    def state_bounds(self):
        return (-math.pi, -self.max_speed), (math.pi, self.max_speed)

    def _initial_state(self, rng):
        th = float(rng.uniform(-math.pi, math.pi))
        thdot = float(rng.uniform(-self.init_speed, self.init_speed))
        return (th, thdot)

    def angular_accel(self, th: float, u: float) -> float:
        return 3.0 * self.g / (2.0 * self.l) * math.sin(th) + 3.0 / (self.m * self.l ** 2) * u

    def _advance(self, state, u):
        th, thdot = state
        reward = -(th * th + 0.1 * thdot * thdot + 0.001 * u * u)
        thdot = thdot + self.angular_accel(th, u) * self.dt
        thdot = _clip(thdot, -self.max_speed, self.max_speed)
        th = wrap_angle(th + thdot * self.dt)
        return (th, thdot), reward, False

    def energy(self, state) -> float:
        """Conserved quantity of the unforced dynamics, per unit ``m l**2 / 3``."""
        th, thdot = state
        return 0.5 * thdot * thdot + 3.0 * self.g / (2.0 * self.l) * math.cos(th)


@dataclass
class Acrobot(Env):
    """Two-link arm actuated at the elbow with a continuous torque.

    Angles are measured from hanging down; the tip height is
    ``-cos(th1) - cos(th1 + th2)`` and is also the per-step reward. The
    episode terminates once the tip rises above ``goal_height``.
    """

    link_length_1: float = 1.0
    link_mass_1: float = 1.0
    link_mass_2: float = 1.0
    link_com_1: float = 0.5
    link_com_2: float = 0.5
    link_moi: float = 1.0
    g: float = 9.8
    dt: float = 0.2
    substeps: int = 4
    max_vel_1: float = 4 * math.pi
    max_vel_2: float = 9 * math.pi
    max_torque: float = 1.0
    goal_height: float = 1.0
    init_range: float = 0.1
    horizon: int = 500
    name = "acrobot"

    @property
    def action_low(self):
        return -self.max_torque

    @property
    def action_high(self):
        return self.max_torque

    def state_bounds(self):
        return ((-math.pi, -math.pi, -self.max_vel_1, -self.max_vel_2),
                (math.pi, math.pi, self.max_vel_1, self.max_vel_2))

    def _initial_state(self, rng):
        return tuple(float(v) for v in rng.uniform(-self.init_range, self.init_range, size=4))

    def accelerations(self, th1, th2, dth1, dth2, u):
        m1, m2 = self.link_mass_1, self.link_mass_2
        l1, lc1, lc2 = self.link_length_1, self.link_com_1, self.link_com_2
        I1 = I2 = self.link_moi
        g = self.g
        d1 = m1 * lc1 ** 2 + m2 * (l1 ** 2 + lc2 ** 2 + 2 * l1 * lc2 * math.cos(th2)) + I1 + I2
        d2 = m2 * (lc2 ** 2 + l1 * lc2 * math.cos(th2)) + I2
        phi2 = m2 * lc2 * g * math.cos(th1 + th2 - math.pi / 2.0)
        phi1 = (-m2 * l1 * lc2 * dth2 ** 2 * math.sin(th2)
                - 2 * m2 * l1 * lc2 * dth2 * dth1 * math.sin(th2)
                + (m1 * lc1 + m2 * l1) * g * math.cos(th1 - math.pi / 2.0) + phi2)
        ddth2 = ((u + d2 / d1 * phi1 - m2 * l1 * lc2 * dth1 ** 2 * math.sin(th2) - phi2)
                 / (m2 * lc2 ** 2 + I2 - d2 ** 2 / d1))
        ddth1 = -(d2 * ddth2 + phi1) / d1
        return ddth1, ddth2

    def tip_height(self, state) -> float:
        th1, th2 = state[0], state[1]
        return -math.cos(th1) - math.cos(th1 + th2)

    def _advance(self, state, u):
        th1, th2, dth1, dth2 = state
        h = self.dt / self.substeps
        for _ in range(self.substeps):
            a1, a2 = self.accelerations(th1, th2, dth1, dth2, u)
            dth1 = _clip(dth1 + h * a1, -self.max_vel_1, self.max_vel_1)
            dth2 = _clip(dth2 + h * a2, -self.max_vel_2, self.max_vel_2)
            th1 = wrap_angle(th1 + h * dth1)
            th2 = wrap_angle(th2 + h * dth2)
        nxt = (th1, th2, dth1, dth2)
        height = self.tip_height(nxt)
        return nxt, height, height > self.goal_height


@dataclass
class Goddard(Env):
    """Normalised vertical Goddard rocket ``(h, v, m)``, thrust fraction in ``[0, 1]``.

    The only reward is ``reward_scale * (h_peak - 1)`` on the last step. When
    the fuel runs out while still ascending, the unpowered coast to apogee is
    integrated inside that final step so ``h_peak`` is the true apogee.
    """

    thrust_max: float = 3.5
    exhaust_speed: float = 0.5
    drag_coef: float = 310.0
    drag_scale_height: float = 500.0
    m_final: float = 0.6
    dt: float = 0.005
    reward_scale: float = 100.0
    max_speed: float = 10.0
    horizon: int = 400
    name = "goddard"
    action_low = 0.0
    action_high = 1.0

    def state_bounds(self):
        return (1.0, 0.0, self.m_final), (1.02, 0.25, 1.0)

    def _initial_state(self, rng):
        self.h_peak = 1.0
        return (1.0, 0.0, 1.0)

    def _derivs(self, h, v, m, thrust):
        drag = self.drag_coef * v * v * math.exp(-self.drag_scale_height * (h - 1.0))
        return (thrust - drag) / m - 1.0 / (h * h)

    def _euler(self, h, v, m, thrust):
        v = _clip(v + self._derivs(h, v, m, thrust) * self.dt, -self.max_speed, self.max_speed)
        h = max(h + v * self.dt, 1e-3)
        return h, v

    def _advance(self, state, u):
        h, v, m = state
        burn = u * self.thrust_max / self.exhaust_speed * self.dt
        if m - burn < self.m_final:
            burn = max(m - self.m_final, 0.0)
        thrust = burn * self.exhaust_speed / self.dt
        h, v = self._euler(h, v, m, thrust)
        m = m - burn
        self.h_peak = max(self.h_peak, h)
        out_of_fuel = m <= self.m_final + 1e-12
        done = v < 0.0 or out_of_fuel
        if out_of_fuel and v > 0.0:
            for _ in range(1_000_000):
                h, v = self._euler(h, v, m, 0.0)
                self.h_peak = max(self.h_peak, h)
                if v <= 0.0:
                    break
        return (h, v, m), 0.0, done

    def _final_reward(self, state) -> float:
        return self.reward_scale * (self.h_peak - 1.0)


@dataclass
class Bandit(Env):
    """Single-state, single-step problem with reward ``-(a - target)**2``.

    The state is the constant ``(0, 0)`` so that it splits into one row and one
    column dimension like every other environment.
    """

    target: float = 0.0
    bound: float = 10.0
    horizon: int = 1
    name = "bandit"

    @property
    def action_low(self):
        return -self.bound

    @property
    def action_high(self):
        return self.bound

    def state_bounds(self):
        return (-1.0, -1.0), (1.0, 1.0)

    def _initial_state(self, rng):
        return (0.0, 0.0)

    def _advance(self, state, u):
        return state, -(u - self.target) ** 2, True


ENVIRONMENTS = {cls.name: cls for cls in (Pendulum, Acrobot, Goddard, Bandit)}


def make_env(name: str, **overrides) -> Env:
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    unknown = set(overrides) - set(cls.constant_names())
    if unknown:
        raise ValueError(f"{name}: unknown constant(s) {sorted(unknown)}")
    return cls(**overrides)
