"""Training cost head and the cubic fan-power law.

The cost folds a raw readings vector (energy figure plus zone temperatures,
in physical units) into the scalar the controllers are trained to minimize:

    cost = readings[energy] + sum_i  weight * softplus(readings[temp_i] - threshold)

The softplus hinge prices overheating smoothly, so the head stays
differentiable and can sit on top of the critic network during training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import sigmoid, stable_softplus


@dataclass(frozen=True)
class CostParams:
    """Pricing of the overheating penalty and the reading-channel roles.

    penalty_weight trades energy against overheating; overheat_threshold is
    the zone temperature (degC) above which the penalty ramps up.
    """

    penalty_weight: float = 0.01
    overheat_threshold: float = 29.0
    energy_channel: int = 0
    temp_channels: tuple[int, ...] = (1, 2)

    def __post_init__(self):
        if self.penalty_weight < 0.0:
            raise ValueError("penalty_weight must be >= 0")
        if not self.temp_channels:
            raise ValueError("at least one temperature channel is required")
        chans = (self.energy_channel,) + tuple(self.temp_channels)
        if len(set(chans)) != len(chans):
            raise ValueError("energy and temperature channels must be distinct")
        if any(c < 0 for c in chans):
            raise ValueError("channel indices must be non-negative")
        object.__setattr__(self, "temp_channels", tuple(self.temp_channels))

    def n_channels_at_least(self) -> int:
        return max((self.energy_channel,) + self.temp_channels) + 1


def cost(readings, params: CostParams):
    """Scalar cost for one readings vector, or a vector of costs for a batch.

    readings may be shape (c,) or (n, c) in physical units.
    """
    arr = np.asarray(readings, dtype=float)
    if arr.shape[-1] < params.n_channels_at_least():
        raise ValueError(
            f"readings have {arr.shape[-1]} channels, cost head needs at "
            f"least {params.n_channels_at_least()}"
        )
    temps = arr[..., list(params.temp_channels)]
    penalty = params.penalty_weight * stable_softplus(
        temps - params.overheat_threshold
    )
    total = arr[..., params.energy_channel] + np.sum(penalty, axis=-1)
    return float(total) if arr.ndim == 1 else total


def cost_gradient(readings, params: CostParams):
    """d(cost)/d(readings); same shape as readings.

    The energy channel has derivative 1; each temperature channel has
    derivative penalty_weight * sigmoid(temp - threshold); other channels 0.
    """
    arr = np.asarray(readings, dtype=float)
    grad = np.zeros_like(arr)
    grad[..., params.energy_channel] = 1.0
    for c in params.temp_channels:
        grad[..., c] = params.penalty_weight * sigmoid(
            arr[..., c] - params.overheat_threshold
        )
    return grad


def fan_power(flow, rated_flow, rated_power):
    """Fan electrical power (kW) from the cube law: P = P_rated * (q/q_rated)^3."""
    if rated_flow <= 0.0:
        raise ValueError("rated_flow must be positive")
    if rated_power <= 0.0:
        raise ValueError("rated_power must be positive")
    q = np.asarray(flow, dtype=float)
    if np.any(q < 0.0):
        raise ValueError("flow must be non-negative")
    out = rated_power * (q / rated_flow) ** 3
    return float(out) if np.ndim(flow) == 0 else out
