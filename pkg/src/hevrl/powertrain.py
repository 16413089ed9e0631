"""Physical model of the power-split hybrid.

Longitudinal force demand, planetary-gear kinematics, engine fuel rate from
an efficiency map, and battery state-of-charge dynamics from an equivalent
circuit (open-circuit voltage behind an internal resistance; temperature and
aging effects ignored).

All operations are pure functions of their inputs and use SI units: W, N,
m/s, seconds, coulombs.  Fuel masses are grams.  Electricity consumption is
expressed as equivalent fuel grams via the gasoline lower heating value so
the two reward terms are commensurable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

GRAVITY = 9.81  # m/s^2
AIR_DENSITY = 1.225  # kg/m^3
GASOLINE_LHV_J_PER_G = 42_600.0


class PowerLimitError(ValueError):
    """Requested battery power exceeds the equivalent-circuit feasibility limit."""


@dataclass(frozen=True)
class VehicleParams:
    """Chassis, engine, motor, and transmission constants (production hatchback
    hybrid defaults)."""

    m: float = 1449.0  # curb weight, kg
    g: float = GRAVITY
    f: float = 0.013  # rolling friction coefficient
    rho: float = AIR_DENSITY
    A_f: float = 2.23  # frontal area, m^2
    C_D: float = 0.26  # aerodynamic coefficient
    r: float = 0.287  # wheel radius, m
    i_g: float = 3.93  # final gear ratio
    C: float = 2.6  # planetary characteristic parameter (ring/sun)
    P_e_max: float = 56e3  # engine max power, W
    T_e_max: float = 120.0  # engine max torque, Nm
    P_m_max: float = 50e3  # motor max power, W
    T_m_max: float = 400.0  # motor max torque, Nm

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value <= 0:
                raise ValueError(f"VehicleParams.{name} must be positive, got {value}")


#: Nominal pack: 1.54 kWh at 237 V, expressed in coulombs.
_PACK_CAPACITY_C = 1.54e3 * 3600.0 / 237.0


@dataclass(frozen=True)
class BatteryParams:
    """Equivalent-circuit battery: open-circuit voltage behind a series resistance."""

    Q: float = _PACK_CAPACITY_C  # nominal capacity, C
    Q_0: float = 0.6 * _PACK_CAPACITY_C  # initial charge, C
    V_oc: float = 237.0  # open-circuit voltage, V
    R_0: float = 0.3  # internal resistance, ohm

    def __post_init__(self):
        if not (0 < self.Q_0 <= self.Q):
            raise ValueError(f"need 0 < Q_0 <= Q, got Q_0={self.Q_0}, Q={self.Q}")
        if self.V_oc <= 0 or self.R_0 <= 0:
            raise ValueError("V_oc and R_0 must be positive")

    @property
    def soc_0(self) -> float:
        return self.Q_0 / self.Q

    @property
    def p_max(self) -> float:
        """Largest discharge power with a real-valued current solution, W."""
        return self.V_oc**2 / (4.0 * self.R_0)


@dataclass(frozen=True)
class BatteryState:
    """State of charge in [0, 1]; `saturated` marks a clamped update."""

    soc: float
    saturated: bool = False


@dataclass(frozen=True)
class EfficiencyMap:
    """Piecewise-linear efficiency vs. power, eta in (0, 1]."""

    power: np.ndarray  # W, strictly increasing
    eff: np.ndarray  # dimensionless

    def __post_init__(self):
        power = np.asarray(self.power, dtype=float)
        eff = np.asarray(self.eff, dtype=float)
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "eff", eff)
        if power.ndim != 1 or power.size < 2 or power.size != eff.size:
            raise ValueError("map needs matching 1-D power/efficiency columns (>= 2 rows)")
        if np.any(np.diff(power) <= 0):
            raise ValueError("power grid must be strictly increasing")
        if np.any(eff <= 0) or np.any(eff > 1):
            raise ValueError("efficiencies must lie in (0, 1]")
        power.setflags(write=False)
        eff.setflags(write=False)

    def eta(self, p: float) -> float:
        """Interpolated efficiency at power p (clipped to the grid range)."""
        return float(np.interp(p, self.power, self.eff))

    @property
    def mean_eff(self) -> float:
        return float(np.mean(self.eff))

    @classmethod
    def from_csv(cls, path: str | Path) -> "EfficiencyMap":
        """Read a ``power_w,efficiency`` CSV."""
        path = Path(path)
        powers, effs = [], []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = [c.strip().lower() for c in next(reader)]
            if header[:2] != ["power_w", "efficiency"]:
                raise ValueError(
                    f"{path}: expected header 'power_w,efficiency', got {header}"
                )
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    powers.append(float(row[0]))
                    effs.append(float(row[1]))
                except (ValueError, IndexError):
                    raise ValueError(f"{path}:{lineno}: bad row {row!r}") from None
        return cls(power=np.array(powers), eff=np.array(effs))

    @classmethod
    def flat(cls, eta: float, p_max: float = 100e3) -> "EfficiencyMap":
        return cls(power=np.array([0.0, p_max]), eff=np.array([eta, eta]))


def default_engine_map() -> EfficiencyMap:
    """Synthetic Willans-style engine efficiency curve shipped with the package.

    Stand-in for unpublished bench-test data; substitute a measured map via
    ``EfficiencyMap.from_csv``.
    """
    return EfficiencyMap.from_csv(resources.files("hevrl.data") / "maps" / "engine_eff.csv")


def demand_force(p: VehicleParams, v: float, a: float) -> float:
    """Longitudinal force demand [N]: rolling + aerodynamic + inertial.

    Rolling resistance applies only when the vehicle moves; the road-grade
    term is zero (flat-road model).
    """
    f_roll = p.m * p.g * p.f if v > 0 else 0.0
    f_aero = 0.5 * p.rho * p.A_f * p.C_D * v * v
    f_inertia = p.m * a
    return f_roll + f_aero + f_inertia


def demand_power(p: VehicleParams, v: float, a: float) -> float:
    """Wheel power demand [W]; negative while braking (recoverable in part)."""
    return demand_force(p, v, a) * v


def planetary_speeds(p: VehicleParams, w_ring: float, w_carrier: float) -> float:
    """Sun-gear speed [rad/s] from the Willis relation with characteristic ratio C."""
    return (1.0 + p.C) * w_carrier - p.C * w_ring


def battery_current(b: BatteryParams, p_batt: float) -> float:
    """Terminal current [A] for battery power p_batt [W]; positive = discharge.

    Solves P = I*V_oc - R_0*I^2 for the low-loss root.  Raises
    PowerLimitError when p_batt exceeds the feasibility limit V_oc^2/(4 R_0).
    """
    disc = b.V_oc**2 - 4.0 * b.R_0 * p_batt
    if disc < 0:
        raise PowerLimitError(
            f"battery power {p_batt:.1f} W exceeds feasible maximum {b.p_max:.1f} W"
        )
    return float((b.V_oc - np.sqrt(disc)) / (2.0 * b.R_0))


def battery_step(b: BatteryParams, s: BatteryState, p_batt: float, dt: float) -> BatteryState:
    """Integrate SoC one step: soc' = soc - I*dt/Q, clamped to [0, 1]."""
    i = battery_current(b, p_batt)
    soc = s.soc - i * dt / b.Q
    clipped = soc < 0.0 or soc > 1.0
    return BatteryState(soc=min(max(soc, 0.0), 1.0), saturated=clipped)


def engine_fuel_rate(
    emap: EfficiencyMap, p_eng: float, lhv_j_per_g: float = GASOLINE_LHV_J_PER_G
) -> float:
    """Fuel mass flow [g/s] at engine power p_eng [W].

    p_eng is clipped into the map's power range rather than raising: agents
    explore infeasible commands constantly and training must not abort.
    """
    p = min(max(p_eng, float(emap.power[0])), float(emap.power[-1]))
    if p <= 0.0:
        return 0.0
    return p / (emap.eta(p) * lhv_j_per_g)


@dataclass(frozen=True)
class StepResult:
    """Outcome of one powertrain step."""

    fuel_g: float  # engine fuel mass, g
    elec_g: float  # electricity drawn, in equivalent fuel grams
    soc: float  # post-step state of charge
    p_req: float  # power demand seen by the powertrain, W
    p_batt: float  # battery terminal power, W (positive = discharge)
    p_batt_mech: float  # battery-path mechanical power before conversion, W
    saturated: bool  # any actuator/battery/SoC limit hit this step


@dataclass(frozen=True)
class Driveline:
    """Vehicle + battery + maps + conversion efficiencies, bundled for stepping."""

    vehicle: VehicleParams = field(default_factory=VehicleParams)
    battery: BatteryParams = field(default_factory=BatteryParams)
    engine_map: EfficiencyMap = field(default_factory=default_engine_map)
    motor_map: EfficiencyMap = field(default_factory=lambda: EfficiencyMap.flat(0.90))
    eta_trans: float = 0.95  # driveline efficiency, traction path
    eta_regen: float = 0.3  # effective recuperation fraction while braking
    lhv_j_per_g: float = GASOLINE_LHV_J_PER_G
    floor_elec: bool = True  # floor elec_g at 0 (no credit for regen charging)

    @property
    def elec_eta(self) -> float:
        """Reference efficiency converting electrical energy to fuel-equivalents."""
        return self.engine_map.mean_eff

    def with_(self, **kw) -> "Driveline":
        return replace(self, **kw)


def step_powertrain(
    d: Driveline,
    s: BatteryState,
    v: float,
    a: float,
    p_eng_cmd: float,
    dt: float,
) -> StepResult:
    """Advance the powertrain one step under engine-power command p_eng_cmd [W].

    The engine supplies p_eng_cmd; the battery path covers the rest of the
    demand, clipped to motor and battery limits.  Any residual demand beyond
    actuator limits is flagged as `saturated`, never raised: training
    rollouts must survive arbitrary commands.
    """
    veh = d.vehicle
    saturated = False

    p_eng = min(max(p_eng_cmd, 0.0), veh.P_e_max)
    if p_eng != p_eng_cmd:
        saturated = True

    p_wheel = demand_power(veh, v, a)
    if p_wheel >= 0:
        p_req = p_wheel / d.eta_trans
    else:
        p_req = max(p_wheel * d.eta_regen, -veh.P_m_max)

    # Battery path: mechanical shortfall (+) or surplus (-), motor-limited.
    p_batt_mech = p_req - p_eng
    if abs(p_batt_mech) > veh.P_m_max:
        p_batt_mech = min(max(p_batt_mech, -veh.P_m_max), veh.P_m_max)
        saturated = True

    # Electrical terminal power: conversion losses widen a draw and shrink a charge.
    eta_m = d.motor_map.eta(abs(p_batt_mech))
    p_batt = p_batt_mech / eta_m if p_batt_mech >= 0 else p_batt_mech * eta_m

    # Battery feasibility: re-clip instead of erroring inside rollouts.
    if p_batt > d.battery.p_max:
        p_batt = d.battery.p_max
        saturated = True

    state = battery_step(d.battery, s, p_batt, dt)
    saturated = saturated or state.saturated

    fuel_g = engine_fuel_rate(d.engine_map, p_eng, d.lhv_j_per_g) * dt
    elec_w = p_batt if not d.floor_elec else max(p_batt, 0.0)
    elec_g = elec_w * dt / (d.elec_eta * d.lhv_j_per_g)

    return StepResult(
        fuel_g=fuel_g,
        elec_g=elec_g,
        soc=state.soc,
        p_req=p_req,
        p_batt=p_batt,
        p_batt_mech=p_batt_mech,
        saturated=saturated,
    )
