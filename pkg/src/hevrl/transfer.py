"""Checkpointing, layer-selective weight transfer, and adaptation metrics.

Transfer initializes a new agent from a stored one by copying every layer
except the output layer of both actor and critic (a flag restricts this to
the actor for ablation).  Output layers are freshly initialized, target
networks are reset to the new online networks, and optimizer state is NOT
carried over: stale moment estimates would alias curvature from the old
task.

Adaptation quality of a target-domain learning curve is summarized by three
scalars: jumpstart (mean return of an initial window), asymptotic
performance (mean return over a convergence interval), and time-to-threshold
(first episode from which every rolling-window mean stays inside a band
around the asymptotic value).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ddpg import Agent, Hyperparams, make_agent
from .net import LayerSpec, Mlp, init_layer_flat

MAGIC = b"HEVEMSC1"
FORMAT_VERSION = 1

REPORT_HEADER = ("target_noise", "source_init", "jp", "ap", "tt")
NOT_CONVERGED = "nc"


class CheckpointError(ValueError):
    pass


class TransferError(ValueError):
    pass


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class Checkpoint:
    """All four networks plus provenance, as written to disk."""

    version: int
    actor_specs: tuple[LayerSpec, ...]
    critic_specs: tuple[LayerSpec, ...]
    actor: np.ndarray
    critic: np.ndarray
    actor_target: np.ndarray
    critic_target: np.ndarray
    meta: dict[str, str]


def _specs_to_text(specs: Sequence[LayerSpec]) -> str:
    return "|".join(f"{s.in_dim}x{s.out_dim}:{s.activation}" for s in specs)


def _specs_from_text(text: str) -> tuple[LayerSpec, ...]:
    layers = []
    for part in text.split("|"):
        try:
            dims, activation = part.split(":")
            in_dim, out_dim = dims.split("x")
            layers.append(LayerSpec(int(in_dim), int(out_dim), activation))
        except ValueError:
            raise CheckpointError(f"bad architecture segment {part!r}") from None
    return tuple(layers)


def _write_block(fh, vec: np.ndarray) -> None:
    fh.write(struct.pack("<Q", vec.size))
    fh.write(np.ascontiguousarray(vec, dtype="<f8").tobytes())


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def _read_block(fh, expected: int, what: str) -> np.ndarray:
    (count,) = struct.unpack("<Q", _read_exact(fh, 8, f"{what} length"))
    if count != expected:
        raise CheckpointError(f"{what}: expected {expected} parameters, file has {count}")
    return np.frombuffer(_read_exact(fh, 8 * count, what), dtype="<f8").astype(np.float64)


def checkpoint_from_agent(agent: Agent, meta: dict[str, str] | None = None) -> Checkpoint:
    return Checkpoint(
        version=FORMAT_VERSION,
        actor_specs=agent.actor.specs,
        critic_specs=agent.critic.specs,
        actor=agent.actor.flatten(),
        critic=agent.critic.flatten(),
        actor_target=agent.actor_target.flatten(),
        critic_target=agent.critic_target.flatten(),
        meta=dict(meta or {}),
    )


def save_checkpoint(agent: Agent, meta: dict[str, str], path: str | Path) -> None:
    """Write a versioned binary checkpoint; the round trip is bit-exact."""
    ckpt = checkpoint_from_agent(agent, meta)
    arch = f"actor={_specs_to_text(ckpt.actor_specs)};critic={_specs_to_text(ckpt.critic_specs)}"
    meta_text = "".join(f"{k}={v}\n" for k, v in sorted(ckpt.meta.items()))
    for k, v in ckpt.meta.items():
        if "=" in k or "\n" in k or "\n" in v:
            raise CheckpointError(f"metadata key/value not encodable: {k!r}={v!r}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        arch_bytes = arch.encode("utf-8")
        fh.write(struct.pack("<I", len(arch_bytes)))
        fh.write(arch_bytes)
        for vec in (ckpt.actor, ckpt.critic, ckpt.actor_target, ckpt.critic_target):
            _write_block(fh, vec)
        meta_bytes = meta_text.encode("utf-8")
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read and validate a checkpoint; errors name the offending field."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, len(MAGIC), "magic")
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic {magic!r})")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        (arch_len,) = struct.unpack("<I", _read_exact(fh, 4, "architecture length"))
        arch = _read_exact(fh, arch_len, "architecture").decode("utf-8")
        try:
            actor_part, critic_part = arch.split(";")
            actor_specs = _specs_from_text(actor_part.removeprefix("actor="))
            critic_specs = _specs_from_text(critic_part.removeprefix("critic="))
        except ValueError:
            raise CheckpointError(f"{path}: bad architecture header {arch!r}") from None
        n_actor = sum(s.n_params for s in actor_specs)
        n_critic = sum(s.n_params for s in critic_specs)
        actor = _read_block(fh, n_actor, "actor")
        critic = _read_block(fh, n_critic, "critic")
        actor_target = _read_block(fh, n_actor, "actor_target")
        critic_target = _read_block(fh, n_critic, "critic_target")
        (meta_len,) = struct.unpack("<I", _read_exact(fh, 4, "metadata length"))
        meta_text = _read_exact(fh, meta_len, "metadata").decode("utf-8")
    meta = {}
    for line in meta_text.splitlines():
        if line:
            key, _, value = line.partition("=")
            meta[key] = value
    return Checkpoint(
        version=version,
        actor_specs=actor_specs,
        critic_specs=critic_specs,
        actor=actor,
        critic=critic,
        actor_target=actor_target,
        critic_target=critic_target,
        meta=meta,
    )


def agent_from_checkpoint(ckpt: Checkpoint, hp: Hyperparams, rng: np.random.Generator) -> Agent:
    """Rebuild a full agent with every network loaded bit-exactly."""
    agent = make_agent(hp, rng, actor_arch=ckpt.actor_specs, critic_arch=ckpt.critic_specs)
    agent.actor.load_flat(ckpt.actor)
    agent.critic.load_flat(ckpt.critic)
    agent.actor_target.load_flat(ckpt.actor_target)
    agent.critic_target.load_flat(ckpt.critic_target)
    return agent


def _check_transferable(
    name: str, source: Sequence[LayerSpec], target: Sequence[LayerSpec]
) -> None:
    if len(source) != len(target):
        raise TransferError(
            f"{name}: layer count differs (source {len(source)}, target {len(target)})"
        )
    for k, (s, t) in enumerate(zip(source[:-1], target[:-1])):
        if s != t:
            raise TransferError(
                f"{name} layer {k}: source {s.in_dim}x{s.out_dim}:{s.activation} != "
                f"target {t.in_dim}x{t.out_dim}:{t.activation} (only the final layer may differ)"
            )
    if source[-1].in_dim != target[-1].in_dim:
        raise TransferError(
            f"{name} final layer: input width differs "
            f"(source {source[-1].in_dim}, target {target[-1].in_dim})"
        )


def _transfer_network(target: Mlp, source_flat: np.ndarray, rng: np.random.Generator) -> None:
    last = len(target.specs) - 1
    body = target.layer_slice(0).start, target.layer_slice(last).start
    target.theta[body[0] : body[1]] = source_flat[body[0] : body[1]]
    target.theta[target.layer_slice(last)] = init_layer_flat(target.specs[last], rng)


def transfer_init(
    source: Checkpoint,
    hp: Hyperparams,
    rng: np.random.Generator,
    actor_arch: Sequence[LayerSpec] | None = None,
    critic_arch: Sequence[LayerSpec] | None = None,
    networks: Sequence[str] = ("actor", "critic"),
) -> Agent:
    """New agent initialized from `source` except for freshly drawn output layers.

    `networks` restricts which networks inherit weights ("actor", "critic");
    anything not listed is initialized from scratch.  Targets equal the
    resulting online networks; optimizer state starts zeroed.
    """
    actor_arch = tuple(actor_arch or source.actor_specs)
    critic_arch = tuple(critic_arch or source.critic_specs)
    if "actor" in networks:
        _check_transferable("actor", source.actor_specs, actor_arch)
    if "critic" in networks:
        _check_transferable("critic", source.critic_specs, critic_arch)
    agent = make_agent(hp, rng, actor_arch=actor_arch, critic_arch=critic_arch)
    if "actor" in networks:
        _transfer_network(agent.actor, source.actor, rng)
    if "critic" in networks:
        _transfer_network(agent.critic, source.critic, rng)
    agent.actor_target.load_flat(agent.actor.theta)
    agent.critic_target.load_flat(agent.critic.theta)
    return agent


# -- adaptation metrics ---------------------------------------------------------


def jumpstart(curve: Sequence[float], window: int = 50) -> float:
    """Mean return of the first `window` episodes."""
    if len(curve) < window:
        raise MetricError(f"curve has {len(curve)} episodes, jumpstart window needs {window}")
    return float(np.mean(np.asarray(curve, dtype=float)[:window]))


def asymptotic(curve: Sequence[float], start: int = 50, end: int = 300) -> float:
    """Mean return over the convergence interval [start, end)."""
    if not 0 <= start < end:
        raise MetricError(f"bad interval [{start}, {end})")
    if len(curve) < end:
        raise MetricError(f"curve has {len(curve)} episodes, interval needs {end}")
    return float(np.mean(np.asarray(curve, dtype=float)[start:end]))


def time_to_threshold(
    curve: Sequence[float],
    window: int = 10,
    band: float = 0.05,
    ap_start: int = 50,
    ap_end: int = 300,
) -> int | None:
    """First episode k from which every rolling `window`-mean stays near the
    asymptotic value; None if the curve never settles.

    "Near" means within `band` relative when |AP| >= 1 and within `band`
    absolute otherwise.
    """
    curve = np.asarray(curve, dtype=float)
    if len(curve) < max(20, window):
        raise MetricError(f"curve has {len(curve)} episodes, need >= {max(20, window)}")
    ap = asymptotic(curve, ap_start, ap_end)
    tol = band * abs(ap) if abs(ap) >= 1.0 else band
    kernel = np.full(window, 1.0 / window)
    means = np.convolve(curve, kernel, mode="valid")
    inside = np.abs(means - ap) <= tol
    # Smallest k such that every window from k on stays inside the band.
    bad = np.nonzero(~inside)[0]
    if bad.size == 0:
        return 0
    k = int(bad[-1]) + 1
    return k if k < means.size else None


@dataclass(frozen=True)
class AdaptationReport:
    """Jumpstart / asymptotic / time-to-threshold summary of one learning curve."""

    jp: float
    ap: float
    tt: int | None
    curve: tuple[float, ...]

    @property
    def converged(self) -> bool:
        return self.tt is not None

    def row(self, target_noise: str, source_init: str) -> str:
        tt = NOT_CONVERGED if self.tt is None else str(self.tt)
        return f"{target_noise},{source_init},{self.jp!r},{self.ap!r},{tt}"


def build_report(
    curve: Sequence[float],
    jp_window: int = 50,
    ap_start: int = 50,
    ap_end: int = 300,
    tt_window: int = 10,
    band: float = 0.05,
) -> AdaptationReport:
    """Assemble the three metrics for one curve."""
    return AdaptationReport(
        jp=jumpstart(curve, jp_window),
        ap=asymptotic(curve, ap_start, ap_end),
        tt=time_to_threshold(curve, tt_window, band, ap_start, ap_end),
        curve=tuple(float(r) for r in curve),
    )
