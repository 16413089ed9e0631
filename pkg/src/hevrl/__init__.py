"""Energy-management workbench for a power-split hybrid vehicle.

Simulates the powertrain over driving cycles, trains deterministic-policy-
gradient agents with interchangeable exploration-noise strategies, transfers
trained weights (all layers but the output layer) to a new driving-cycle
domain, and scores adaptation with jumpstart / asymptotic / time-to-threshold
metrics.
"""

from .cycles import DrivingCycle, cycle_stats, load_cycle, resolve_cycle, synth_trapezoid
from .ddpg import Agent, Hyperparams, ReplayBuffer, Transition, learn_step, make_agent, train
from .env import CycleEnv, EpisodeLog, RewardParams, State, normalize_state, rollout
from .explore import NoiseSpec, NoiseState, explore_action
from .net import LayerSpec, Mlp, adam_step, backward, forward, init_network
from .powertrain import (
    BatteryParams,
    BatteryState,
    Driveline,
    EfficiencyMap,
    StepResult,
    VehicleParams,
    battery_current,
    battery_step,
    demand_force,
    demand_power,
    engine_fuel_rate,
    planetary_speeds,
    step_powertrain,
)
from .transfer import (
    AdaptationReport,
    Checkpoint,
    asymptotic,
    build_report,
    jumpstart,
    load_checkpoint,
    save_checkpoint,
    time_to_threshold,
    transfer_init,
)

__version__ = "0.1.0"
