"""Exploration-noise strategies behind one interface.

Four families, all expressible by one spec:

* Gaussian action noise  -- a_t = mu(s) + N(0, sigma2_action)
* OU action noise        -- temporally correlated, mean-reverting to 0
* Gaussian param noise   -- a_t = mu(s | theta + N(0, sigma2_param I)),
                            perturbation redrawn once per episode
* mixtures               -- perturbed network plus action noise on top

Parameter-space noise is state-consistent: within one episode, one
perturbation draw is held fixed, so the same state always maps to the same
explored action.  Action-space noise has no such guarantee.  Actions are
clipped to [-1, 1] after noise is applied; no strategy ever mutates the
online actor.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .net import Mlp, forward

NOISE_KINDS = ("none", "gaussian_action", "ou_action", "gaussian_param", "mixture")

#: Kinds that add a perturbation to the selected action.
ACTION_NOISE_KINDS = ("gaussian_action", "ou_action", "mixture")
#: Kinds that act through a perturbed copy of the actor.
PARAM_NOISE_KINDS = ("gaussian_param", "mixture")


class NoiseSpecError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    """Discriminated choice of exploration strategy with its variance(s)."""

    kind: str = "none"
    sigma2_action: float = 0.0  # variance of the action-space noise
    sigma2_param: float = 0.0  # variance of the parameter-space noise
    mixture_action: str = "ou"  # action-noise flavor inside a mixture
    ou_theta: float = 0.15  # OU mean-reversion rate (dt = 1)
    decay: float = 1.0  # per-episode multiplicative variance decay (1 = off)

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise NoiseSpecError(f"unknown noise kind {self.kind!r}")
        if self.sigma2_action < 0 or self.sigma2_param < 0:
            raise NoiseSpecError("variances must be non-negative")
        if self.mixture_action not in ("gaussian", "ou"):
            raise NoiseSpecError(f"mixture_action must be gaussian|ou, got {self.mixture_action!r}")
        if self.decay <= 0:
            raise NoiseSpecError("decay must be positive (1.0 disables decay)")

    @property
    def has_action_noise(self) -> bool:
        return self.kind in ACTION_NOISE_KINDS

    @property
    def has_param_noise(self) -> bool:
        return self.kind in PARAM_NOISE_KINDS

    def label(self) -> str:
        """Canonical string form, e.g. TFS, Gaussian_AS(0.06), APS(0.09,0.03)."""
        if self.kind == "none":
            return "TFS"
        if self.kind == "gaussian_action":
            return f"Gaussian_AS({self.sigma2_action:g})"
        if self.kind == "ou_action":
            return f"OU_AS({self.sigma2_action:g})"
        if self.kind == "gaussian_param":
            return f"Gaussian_PS({self.sigma2_param:g})"
        prefix = "APS" if self.mixture_action == "ou" else "Gaussian_APS"
        return f"{prefix}({self.sigma2_action:g},{self.sigma2_param:g})"

    @classmethod
    def parse(cls, text: str) -> "NoiseSpec":
        """Parse a label produced by :meth:`label` (case-insensitive name part).

        Accepted forms: ``TFS`` / ``none``, ``Gaussian_AS(v)``, ``OU_AS(v)``,
        ``Gaussian_PS(v)``, ``APS(va,vp)``, ``Gaussian_APS(va,vp)``.  Bare
        names fall back to the reference variances (0.06 / 0.09 / 0.03).
        """
        text = text.strip()
        m = re.fullmatch(r"(?i)([a-z_]+)(?:\(([^)]*)\))?", text)
        if not m:
            raise NoiseSpecError(f"cannot parse noise spec {text!r}")
        name = m.group(1).lower()
        args = [float(a) for a in m.group(2).split(",")] if m.group(2) else []
        if name in ("tfs", "none", "no_noise"):
            return cls(kind="none")
        if name in ("gaussian_as", "gaussian_action"):
            return cls(kind="gaussian_action", sigma2_action=args[0] if args else 0.06)
        if name in ("ou_as", "ou_action"):
            return cls(kind="ou_action", sigma2_action=args[0] if args else 0.09)
        if name in ("gaussian_ps", "gaussian_param"):
            return cls(kind="gaussian_param", sigma2_param=args[0] if args else 0.03)
        if name in ("aps", "mixture"):
            sa, sp = (args + [0.09, 0.03])[:2] if args else (0.09, 0.03)
            return cls(kind="mixture", sigma2_action=sa, sigma2_param=sp, mixture_action="ou")
        if name == "gaussian_aps":
            sa, sp = (args + [0.06, 0.03])[:2] if args else (0.06, 0.03)
            return cls(kind="mixture", sigma2_action=sa, sigma2_param=sp, mixture_action="gaussian")
        raise NoiseSpecError(f"unknown noise spec {text!r}")


@dataclass
class NoiseState:
    """Per-run mutable exploration state; owned by a single training run."""

    ou_x: float = 0.0
    scale: float = 1.0  # decay accumulator applied to the variances
    episodes_started: int = 0
    perturbed: Mlp | None = None


def episode_reset(spec: NoiseSpec, state: NoiseState, actor: Mlp, rng: np.random.Generator) -> None:
    """Start-of-episode housekeeping: reset the OU value, apply variance decay,
    and redraw the actor perturbation (held fixed for the whole episode)."""
    state.ou_x = 0.0
    state.scale = spec.decay**state.episodes_started
    state.episodes_started += 1
    state.perturbed = (
        perturb_actor(actor, spec, rng, scale=state.scale) if spec.has_param_noise else None
    )


def sample_action_noise(spec: NoiseSpec, state: NoiseState, rng: np.random.Generator) -> float:
    """Draw one action-space noise value (Gaussian, or one OU step with dt = 1)."""
    if not spec.has_action_noise:
        raise NoiseSpecError(f"{spec.kind!r} has no action-noise component")
    flavor = spec.mixture_action if spec.kind == "mixture" else (
        "gaussian" if spec.kind == "gaussian_action" else "ou"
    )
    sigma = float(np.sqrt(spec.sigma2_action * state.scale))
    if flavor == "gaussian":
        return sigma * rng.standard_normal()
    state.ou_x = state.ou_x + spec.ou_theta * (0.0 - state.ou_x) + sigma * rng.standard_normal()
    return state.ou_x


def perturb_actor(
    actor: Mlp, spec: NoiseSpec, rng: np.random.Generator, scale: float = 1.0
) -> Mlp:
    """Copy of the actor with N(0, sigma2_param I) added to every parameter."""
    if not spec.has_param_noise:
        raise NoiseSpecError(f"{spec.kind!r} has no parameter-noise component")
    sigma = float(np.sqrt(spec.sigma2_param * scale))
    noisy = actor.copy()
    noisy.theta += sigma * rng.standard_normal(noisy.theta.size)
    return noisy


def explore_action(
    spec: NoiseSpec,
    state: NoiseState,
    actor: Mlp,
    s_norm: np.ndarray,
    rng: np.random.Generator,
) -> float:
    """Select an exploration action for normalized state s_norm, clipped to [-1, 1]."""
    network = state.perturbed if (spec.has_param_noise and state.perturbed is not None) else actor
    u = float(forward(network, s_norm)[0])
    if spec.has_action_noise:
        u += sample_action_noise(spec, state, rng)
    return min(max(u, -1.0), 1.0)
