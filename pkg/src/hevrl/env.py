"""MDP wrapper around the powertrain: one episode = one pass over a cycle.

State is (soc, v, acc); the scalar action u in [-1, 1] maps affinely onto
engine power [0, P_e_max].  The per-step reward penalizes energy use and SoC
deviation:

    r = -(alpha * (fuel_g + elec_g) + beta * (soc_ref - soc)^n)

computed with the post-step SoC, so the penalty responds to the action just
taken.  Episodes terminate only at cycle end; SoC hitting its bounds is
penalized, not terminal, which keeps the return scale comparable across
configurations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .cycles import DrivingCycle
from .powertrain import BatteryState, Driveline, step_powertrain

# Fixed normalization scales; deliberately not per-cycle statistics so that
# source and target domains share one input distribution.
V_SCALE = 40.0  # m/s
ACC_SCALE = 3.0  # m/s^2

TRACE_HEADER = ("step", "soc", "v", "acc", "u", "reward", "fuel_g", "elec_g")


class EpisodeDoneError(RuntimeError):
    """step() called on a finished episode."""


@dataclass(frozen=True)
class RewardParams:
    alpha: float = 1.0  # consumption weight
    beta: float = 350.0  # SoC-sustain weight
    n: int = 2  # deviation exponent
    soc_ref: float = 0.6  # reference state of charge


@dataclass(frozen=True)
class State:
    soc: float
    v: float
    acc: float


def normalize_state(s: State) -> np.ndarray:
    """Map a raw state into roughly [-1, 1]^3 for the networks."""
    return np.array([s.soc * 2.0 - 1.0, s.v / V_SCALE, s.acc / ACC_SCALE])


def reward_value(rp: RewardParams, fuel_g: float, elec_g: float, soc: float) -> float:
    """Per-step reward: minus consumption, minus the SoC-deviation penalty."""
    return float(-(rp.alpha * (fuel_g + elec_g) + rp.beta * (rp.soc_ref - soc) ** rp.n))


@dataclass(frozen=True)
class StepRecord:
    step: int
    soc: float
    v: float
    acc: float
    u: float
    reward: float
    fuel_g: float
    elec_g: float


@dataclass
class EpisodeLog:
    cycle_name: str
    records: list[StepRecord] = field(default_factory=list)

    @property
    def episode_return(self) -> float:
        return sum(r.reward for r in self.records)

    def __len__(self) -> int:
        return len(self.records)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            for r in self.records:
                writer.writerow(
                    [r.step, repr(float(r.soc)), repr(float(r.v)), repr(float(r.acc)),
                     repr(float(r.u)), repr(float(r.reward)), repr(float(r.fuel_g)),
                     repr(float(r.elec_g))]
                )


class CycleEnv:
    """Sequential single-agent environment over one or more driving cycles.

    Instances are independent; use one per training run.  All stochasticity
    lives in the agent -- the environment itself is deterministic.
    """

    def __init__(
        self,
        cycles: Sequence[DrivingCycle] | DrivingCycle,
        driveline: Driveline | None = None,
        reward: RewardParams | None = None,
    ):
        if isinstance(cycles, DrivingCycle):
            cycles = [cycles]
        if not cycles:
            raise ValueError("need at least one cycle")
        for c in cycles:
            if len(c) < 2:
                raise ValueError(f"cycle {c.name!r} has no transitions")
        self.cycles = list(cycles)
        self.driveline = driveline if driveline is not None else Driveline()
        self.reward = reward if reward is not None else RewardParams()
        self._cycle: DrivingCycle | None = None
        self._battery = BatteryState(soc=self.reward.soc_ref)
        self._clock = 0
        self._done = True
        self.last_result = None

    @property
    def num_cycles(self) -> int:
        return len(self.cycles)

    @property
    def current_cycle(self) -> DrivingCycle:
        if self._cycle is None:
            raise RuntimeError("reset() has not been called")
        return self._cycle

    @property
    def done(self) -> bool:
        return self._done

    def action_to_engine_power(self, u: float) -> float:
        """Affine map [-1, 1] -> [0, P_e_max]; out-of-range u is clipped here."""
        u = min(max(float(u), -1.0), 1.0)
        return (u + 1.0) / 2.0 * self.driveline.vehicle.P_e_max

    def _state(self) -> State:
        c = self._cycle
        k = self._clock
        return State(soc=self._battery.soc, v=float(c.v[k]), acc=float(c.acc[k]))

    def reset(self, cycle_index: int = 0) -> State:
        """Start an episode at soc_ref on the chosen cycle's first sample."""
        self._cycle = self.cycles[cycle_index % len(self.cycles)]
        self._battery = BatteryState(soc=self.reward.soc_ref)
        self._clock = 0
        self._done = self._cycle.n_steps == 0
        return self._state()

    def step(self, u: float) -> tuple[State, float, bool]:
        """Advance one cycle sample under action u; returns (state, reward, done)."""
        if self._done or self._cycle is None:
            raise EpisodeDoneError("episode is finished; call reset()")
        c = self._cycle
        k = self._clock
        result = step_powertrain(
            self.driveline,
            self._battery,
            v=float(c.v[k]),
            a=float(c.acc[k]),
            p_eng_cmd=self.action_to_engine_power(u),
            dt=c.dt,
        )
        self._battery = BatteryState(soc=result.soc)
        self._clock = k + 1
        self._done = self._clock >= len(c) - 1
        reward = reward_value(self.reward, result.fuel_g, result.elec_g, result.soc)
        self.last_result = result
        return self._state(), reward, self._done


def rollout(
    policy: Callable[[State], float], env: CycleEnv, cycle_index: int = 0
) -> EpisodeLog:
    """Run one full episode under a deterministic policy and log every step."""
    state = env.reset(cycle_index)
    log = EpisodeLog(cycle_name=env.current_cycle.name)
    k = 0
    done = env.done
    while not done:
        u = float(policy(state))
        pre = state
        state, reward, done = env.step(u)
        res = env.last_result
        log.records.append(
            StepRecord(
                step=k, soc=state.soc, v=pre.v, acc=pre.acc, u=u,
                reward=reward, fuel_g=res.fuel_g, elec_g=res.elec_g,
            )
        )
        k += 1
    return log
