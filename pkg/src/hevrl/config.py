"""Experiment configuration: declarative INI sections with profile presets.

Precedence is flag > file > profile default > base default.  Every run
materializes the fully resolved key/value table into ``manifest.ini`` in its
output directory; re-running any subcommand with ``--config manifest.ini``
reproduces the outputs byte-for-byte (the seed is part of the manifest, and
wall-clock seeding does not exist).

Two profiles ship with the package:

* ``paper`` -- full-scale settings: source K=1000 (lr 0.001/0.01), target
  K=300 (lr 0.0009/0.009), metrics JP window 50 and AP interval [50, 300).
  Source cycles default to user-supplied ``data/cycles/udds.csv`` and
  ``ftp75.csv`` tables; the packaged ``nedc`` cycle is the target.
* ``desk`` -- minutes-scale settings on packaged synthetic cycles: source
  K=150, target K=80, JP window 10, AP interval [10, 80).
"""

from __future__ import annotations

import configparser
import copy
from dataclasses import dataclass
from pathlib import Path

from .ddpg import Hyperparams
from .env import RewardParams
from .explore import NoiseSpec
from .powertrain import (
    BatteryParams,
    Driveline,
    EfficiencyMap,
    VehicleParams,
    default_engine_map,
)


class ConfigError(ValueError):
    pass


MODES = ("train-source", "train-target", "grid", "rollout", "report", "plots")
PROFILES = ("paper", "desk")

#: Canonical ordering of the five exploration labels (grid axes, summaries).
CANONICAL_LABELS = ("TFS", "Gaussian_AS", "OU_AS", "Gaussian_PS", "APS")

_BASE: dict[str, dict[str, str]] = {
    "run": {"seed": "", "out": "runs/out", "profile": "desk", "jobs": "1"},
    "cycles": {"paths": "trapezoid", "speed_unit": "mps", "dt": "1.0"},
    "vehicle": {
        "m": "1449.0", "g": "9.81", "f": "0.013", "rho": "1.225",
        "a_f": "2.23", "c_d": "0.26", "r": "0.287", "i_g": "3.93", "c": "2.6",
        "p_e_max": "56000.0", "t_e_max": "120.0", "p_m_max": "50000.0", "t_m_max": "400.0",
    },
    "battery": {
        "capacity_kwh": "1.54", "voltage": "237.0", "r_0": "0.3", "soc_init": "0.6",
    },
    "powertrain": {
        "eta_trans": "0.95", "eta_regen": "0.3", "motor_eff": "0.90",
        "engine_map": "", "floor_elec": "true", "lhv": "42600.0",
    },
    "reward": {"alpha": "1.0", "beta": "350.0", "n": "2", "soc_ref": "0.6"},
    "net": {"hidden": "64,32"},
    "hyperparams": {
        "episodes": "1000", "memory": "50000", "lr_actor": "0.001", "lr_critic": "0.01",
        "gamma": "0.9", "tau": "0.01", "batch": "64",
        "warmup": "", "learn_every": "1", "grad_clip": "",
    },
    "noise": {
        "spec": "TFS", "sigma2_action": "", "sigma2_param": "",
        "ou_theta": "0.15", "decay": "1.0",
    },
    "transfer": {"checkpoint": "", "networks": "actor,critic"},
    "metrics": {
        "jp_window": "50", "ap_start": "50", "ap_end": "300",
        "tt_window": "10", "band": "0.05",
    },
    "grid": {
        "sources": "TFS",
        "target_noises": "TFS,Gaussian_AS(0.06),OU_AS(0.09),Gaussian_PS(0.03),APS(0.09,0.03)",
    },
    "rollout": {"checkpoint": "", "constant_u": "", "cycle_index": "0"},
    "report": {"curve": ""},
    "plots": {"runs": "", "png": "false"},
}

#: profile -> mode (or "*") -> section -> {key: value}
_PROFILE_LAYER: dict[str, dict[str, dict[str, dict[str, str]]]] = {
    "paper": {
        "*": {},
        "train-source": {
            "cycles": {"paths": "data/cycles/udds.csv,data/cycles/ftp75.csv"},
            "hyperparams": {"episodes": "1000", "lr_actor": "0.001", "lr_critic": "0.01"},
        },
        "train-target": {
            "cycles": {"paths": "nedc"},
            "hyperparams": {"episodes": "300", "lr_actor": "0.0009", "lr_critic": "0.009"},
        },
        "rollout": {"cycles": {"paths": "nedc"}},
    },
    "desk": {
        # Desk-scale miniature: a motor sized to the short cycles keeps any
        # constant-action policy's battery runaway on the same clip, which is
        # what makes minute-scale comparisons meaningful.
        "*": {
            "hyperparams": {"memory": "10000"},
            "vehicle": {"p_m_max": "15000.0"},
        },
        "train-source": {
            "cycles": {"paths": "trapezoid,urban_excerpt"},
            "hyperparams": {"episodes": "150", "lr_actor": "0.001", "lr_critic": "0.01"},
        },
        "train-target": {
            "cycles": {"paths": "nedc_excerpt"},
            "hyperparams": {
                "episodes": "80", "lr_actor": "0.0009", "lr_critic": "0.009",
                "warmup": "400",
            },
            "metrics": {"jp_window": "10", "ap_start": "10", "ap_end": "80"},
        },
        "rollout": {"cycles": {"paths": "nedc_excerpt"}},
    },
}
# Grid cells are target-domain runs; reuse the train-target layer.
for _profile in _PROFILE_LAYER.values():
    _profile["grid"] = copy.deepcopy(_profile.get("train-target", {}))
    _profile["report"] = copy.deepcopy(_profile.get("train-target", {}))


def _parse_bool(text: str, where: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {text!r}")


def _parse_float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {text!r}") from None


def _parse_int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {text!r}") from None


def _split_list(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


@dataclass(frozen=True)
class MetricWindows:
    jp_window: int
    ap_start: int
    ap_end: int
    tt_window: int
    band: float


@dataclass
class ExperimentConfig:
    """Fully resolved run configuration plus typed views of it."""

    mode: str
    raw: dict[str, dict[str, str]]

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        self._require_seed()

    # -- typed accessors --------------------------------------------------

    def _get(self, section: str, key: str) -> str:
        return self.raw[section][key]

    def _require_seed(self) -> None:
        if self.mode in ("plots",):
            return
        if not self._get("run", "seed").strip():
            raise ConfigError("run.seed is mandatory (wall-clock seeding is not supported)")

    @property
    def seed(self) -> int:
        return _parse_int(self._get("run", "seed"), "run.seed")

    @property
    def out(self) -> Path:
        return Path(self._get("run", "out"))

    @property
    def profile(self) -> str:
        return self._get("run", "profile")

    @property
    def jobs(self) -> int:
        return max(1, _parse_int(self._get("run", "jobs"), "run.jobs"))

    @property
    def cycle_specs(self) -> tuple[str, ...]:
        paths = _split_list(self._get("cycles", "paths"))
        if not paths:
            raise ConfigError("cycles.paths must name at least one cycle")
        return paths

    @property
    def speed_unit(self) -> str:
        return self._get("cycles", "speed_unit")

    @property
    def dt(self) -> float:
        return _parse_float(self._get("cycles", "dt"), "cycles.dt")

    @property
    def hidden(self) -> tuple[int, ...]:
        dims = tuple(_parse_int(d, "net.hidden") for d in _split_list(self._get("net", "hidden")))
        if not dims:
            raise ConfigError("net.hidden must list at least one width")
        return dims

    def build_vehicle(self) -> VehicleParams:
        v = self.raw["vehicle"]
        return VehicleParams(
            m=_parse_float(v["m"], "vehicle.m"),
            g=_parse_float(v["g"], "vehicle.g"),
            f=_parse_float(v["f"], "vehicle.f"),
            rho=_parse_float(v["rho"], "vehicle.rho"),
            A_f=_parse_float(v["a_f"], "vehicle.a_f"),
            C_D=_parse_float(v["c_d"], "vehicle.c_d"),
            r=_parse_float(v["r"], "vehicle.r"),
            i_g=_parse_float(v["i_g"], "vehicle.i_g"),
            C=_parse_float(v["c"], "vehicle.c"),
            P_e_max=_parse_float(v["p_e_max"], "vehicle.p_e_max"),
            T_e_max=_parse_float(v["t_e_max"], "vehicle.t_e_max"),
            P_m_max=_parse_float(v["p_m_max"], "vehicle.p_m_max"),
            T_m_max=_parse_float(v["t_m_max"], "vehicle.t_m_max"),
        )

    def build_battery(self) -> BatteryParams:
        b = self.raw["battery"]
        q = _parse_float(b["capacity_kwh"], "battery.capacity_kwh") * 1e3 * 3600.0
        q /= _parse_float(b["voltage"], "battery.voltage")
        soc_init = _parse_float(b["soc_init"], "battery.soc_init")
        return BatteryParams(
            Q=q,
            Q_0=soc_init * q,
            V_oc=_parse_float(b["voltage"], "battery.voltage"),
            R_0=_parse_float(b["r_0"], "battery.r_0"),
        )

    def build_driveline(self) -> Driveline:
        p = self.raw["powertrain"]
        engine_map = (
            EfficiencyMap.from_csv(p["engine_map"]) if p["engine_map"].strip()
            else default_engine_map()
        )
        motor_eff = _parse_float(p["motor_eff"], "powertrain.motor_eff")
        return Driveline(
            vehicle=self.build_vehicle(),
            battery=self.build_battery(),
            engine_map=engine_map,
            motor_map=EfficiencyMap.flat(motor_eff),
            eta_trans=_parse_float(p["eta_trans"], "powertrain.eta_trans"),
            eta_regen=_parse_float(p["eta_regen"], "powertrain.eta_regen"),
            lhv_j_per_g=_parse_float(p["lhv"], "powertrain.lhv"),
            floor_elec=_parse_bool(p["floor_elec"], "powertrain.floor_elec"),
        )

    def build_reward(self) -> RewardParams:
        r = self.raw["reward"]
        return RewardParams(
            alpha=_parse_float(r["alpha"], "reward.alpha"),
            beta=_parse_float(r["beta"], "reward.beta"),
            n=_parse_int(r["n"], "reward.n"),
            soc_ref=_parse_float(r["soc_ref"], "reward.soc_ref"),
        )

    def build_hyperparams(self) -> Hyperparams:
        h = self.raw["hyperparams"]
        warmup = h["warmup"].strip()
        grad_clip = h["grad_clip"].strip()
        return Hyperparams(
            episodes=_parse_int(h["episodes"], "hyperparams.episodes"),
            memory=_parse_int(h["memory"], "hyperparams.memory"),
            lr_actor=_parse_float(h["lr_actor"], "hyperparams.lr_actor"),
            lr_critic=_parse_float(h["lr_critic"], "hyperparams.lr_critic"),
            gamma=_parse_float(h["gamma"], "hyperparams.gamma"),
            tau=_parse_float(h["tau"], "hyperparams.tau"),
            batch=_parse_int(h["batch"], "hyperparams.batch"),
            warmup=_parse_int(warmup, "hyperparams.warmup") if warmup else None,
            learn_every=_parse_int(h["learn_every"], "hyperparams.learn_every"),
            grad_clip=_parse_float(grad_clip, "hyperparams.grad_clip") if grad_clip else None,
        )

    def build_noise(self) -> NoiseSpec:
        section = self.raw["noise"]
        spec = NoiseSpec.parse(section["spec"])
        kw: dict = {}
        if section["sigma2_action"].strip():
            kw["sigma2_action"] = _parse_float(section["sigma2_action"], "noise.sigma2_action")
        if section["sigma2_param"].strip():
            kw["sigma2_param"] = _parse_float(section["sigma2_param"], "noise.sigma2_param")
        kw["ou_theta"] = _parse_float(section["ou_theta"], "noise.ou_theta")
        kw["decay"] = _parse_float(section["decay"], "noise.decay")
        return NoiseSpec(
            kind=spec.kind,
            sigma2_action=kw.get("sigma2_action", spec.sigma2_action),
            sigma2_param=kw.get("sigma2_param", spec.sigma2_param),
            mixture_action=spec.mixture_action,
            ou_theta=kw["ou_theta"],
            decay=kw["decay"],
        )

    @property
    def checkpoint(self) -> Path | None:
        text = self._get("transfer", "checkpoint").strip()
        return Path(text) if text else None

    @property
    def transfer_networks(self) -> tuple[str, ...]:
        nets = _split_list(self._get("transfer", "networks"))
        for n in nets:
            if n not in ("actor", "critic"):
                raise ConfigError(f"transfer.networks: unknown network {n!r}")
        return nets

    def metric_windows(self) -> MetricWindows:
        m = self.raw["metrics"]
        return MetricWindows(
            jp_window=_parse_int(m["jp_window"], "metrics.jp_window"),
            ap_start=_parse_int(m["ap_start"], "metrics.ap_start"),
            ap_end=_parse_int(m["ap_end"], "metrics.ap_end"),
            tt_window=_parse_int(m["tt_window"], "metrics.tt_window"),
            band=_parse_float(m["band"], "metrics.band"),
        )

    @property
    def grid_sources(self) -> tuple[tuple[str, str], ...]:
        """(label, checkpoint path) pairs; TFS carries an empty path."""
        entries = []
        for item in _split_list(self._get("grid", "sources")):
            label, _, path = item.partition("=")
            label = label.strip()
            path = path.strip()
            if label.upper() == "TFS":
                entries.append(("TFS", ""))
            elif not path:
                raise ConfigError(f"grid.sources: {label!r} needs a checkpoint path (label=path)")
            else:
                entries.append((label, path))
        if not entries:
            raise ConfigError("grid.sources must list at least one source")
        return tuple(entries)

    @property
    def grid_target_noises(self) -> tuple[str, ...]:
        noises = _split_list(self._get("grid", "target_noises"))
        if not noises:
            raise ConfigError("grid.target_noises must list at least one noise spec")
        return noises

    # -- derivation -------------------------------------------------------

    def derived(self, updates: dict[str, dict[str, str]], mode: str | None = None) -> "ExperimentConfig":
        """Copy of this config with specific raw keys replaced (grid cells)."""
        raw = copy.deepcopy(self.raw)
        for section, kv in updates.items():
            for key, value in kv.items():
                if section not in raw or key not in raw[section]:
                    raise ConfigError(f"unknown config key [{section}] {key}")
                raw[section][key] = value
        return ExperimentConfig(mode=mode or self.mode, raw=raw)


def resolve_config(
    mode: str,
    config_file: str | Path | None = None,
    overrides: dict[str, dict[str, str]] | None = None,
) -> ExperimentConfig:
    """Layer base defaults, profile defaults, a config file, and CLI overrides."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")

    file_layer: dict[str, dict[str, str]] = {}
    if config_file is not None:
        parser = configparser.RawConfigParser()
        read = parser.read(config_file, encoding="utf-8")
        if not read:
            raise ConfigError(f"config file not found: {config_file}")
        for section in parser.sections():
            if section not in _BASE:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in _BASE[section]:
                    raise ConfigError(f"unknown config key [{section}] {key}")
                file_layer.setdefault(section, {})[key] = value

    overrides = overrides or {}
    profile = (
        overrides.get("run", {}).get("profile")
        or file_layer.get("run", {}).get("profile")
        or _BASE["run"]["profile"]
    )
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; expected one of {PROFILES}")

    raw = copy.deepcopy(_BASE)
    raw["run"]["profile"] = profile
    for layer_mode in ("*", mode):
        for section, kv in _PROFILE_LAYER[profile].get(layer_mode, {}).items():
            raw[section].update(kv)
    for section, kv in file_layer.items():
        raw[section].update(kv)
    for section, kv in overrides.items():
        if section not in raw:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in kv.items():
            if key not in raw[section]:
                raise ConfigError(f"unknown config key [{section}] {key}")
            if value is not None:
                raw[section][key] = value
    return ExperimentConfig(mode=mode, raw=raw)


def write_manifest(cfg: ExperimentConfig, path: str | Path) -> None:
    """Dump the fully resolved configuration (defaults materialized)."""
    lines = [f"# mode: {cfg.mode}", ""]
    for section in _BASE:
        lines.append(f"[{section}]")
        for key in _BASE[section]:
            lines.append(f"{key} = {cfg.raw[section][key]}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")
