"""Comparison controllers: a fixed-target rule and per-state optimization.

The fixed controller stands in for a conventional building-management setup:
every set-point follows an affine rule in (ambient temperature, load factor,
zone temperature target), clipped to its bounds. Its coefficients are part of
the experiment fixture, not of this module.

The two-stage controller reuses the trained critic as a plant model and runs
a small rand/1/bin differential-evolution search over the action box for each
test state. A brute-force grid search over the same objective serves as the
independent oracle for the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cca import Critic
from .trace import ActionBounds, NormalizationSpec


@dataclass(frozen=True)
class FixedController:
    """Affine set-point rule around the channel midpoints.

    For channel i:
        sp_i = mid_i + offset_i + ambient_coef_i * (t_amb - ambient_ref)
                     + load_coef_i * (load - load_ref)
                     + target_coef_i * (target_zone_temp - target_ref)
    clipped to the bounds. target_coef must be non-negative so that raising
    the zone-temperature target never lowers a cooling set-point.
    """

    bounds: ActionBounds
    target_zone_temp: float
    offsets: tuple[float, ...]
    ambient_coef: tuple[float, ...]
    load_coef: tuple[float, ...]
    target_coef: tuple[float, ...]
    ambient_ref: float = 29.0
    load_ref: float = 0.5
    target_ref: float = 27.0

    def __post_init__(self):
        n = self.bounds.dim
        for name in ("offsets", "ambient_coef", "load_coef", "target_coef"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have {n} entries")
        if any(c < 0.0 for c in self.target_coef):
            raise ValueError("target_coef entries must be >= 0")


def fixed_policy(state, ctrl: FixedController) -> np.ndarray:
    """Deterministic affine set-points for one state [t_amb, load]."""
    state = np.asarray(state, dtype=float)
    if state.shape[0] < 2:
        raise ValueError("state must provide [t_amb, load]")
    t_amb, load = float(state[0]), float(state[1])
    sp = (
        ctrl.bounds.mid()
        + np.asarray(ctrl.offsets)
        + np.asarray(ctrl.ambient_coef) * (t_amb - ctrl.ambient_ref)
        + np.asarray(ctrl.load_coef) * (load - ctrl.load_ref)
        + np.asarray(ctrl.target_coef) * (ctrl.target_zone_temp - ctrl.target_ref)
    )
    return ctrl.bounds.clip(sp)


def make_fixed_controller(ctrl: FixedController):
    def controller(state, past):
        return fixed_policy(state, ctrl)

    return controller


@dataclass(frozen=True)
class DEConfig:
    """rand/1/bin differential evolution settings."""

    population: int = 75
    generations: int = 100
    crossover_prob: float = 0.7
    differential_weight: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be >= 4")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must lie in [0, 1]")
        if not 0.0 < self.differential_weight < 2.0:
            raise ValueError("differential_weight must lie in (0, 2)")


@dataclass
class DEResult:
    x: np.ndarray
    fun: float
    best_per_generation: list[float]


def minimize_de(func, lower, upper, cfg: DEConfig) -> DEResult:
    """Minimize func over a box with rand/1/bin differential evolution.

    func must accept a (p, dim) matrix and return p objective values.
    Mutants are projected back into the box, so no out-of-box point is ever
    evaluated. Deterministic for a fixed cfg.seed.
    """
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    dim = lo.shape[0]
    p = cfg.population
    rng = np.random.default_rng(cfg.seed)
    pop = rng.uniform(lo, hi, size=(p, dim))
    fitness = np.asarray(func(pop), dtype=float)
    history = [float(fitness.min())]
    member = np.arange(p)[:, None]
    for _ in range(cfg.generations):
        # Three donors per member, all distinct and different from the member.
        r = rng.integers(0, p - 1, size=(p, 3))
        r += r >= member
        while True:
            bad = ((r[:, 0] == r[:, 1]) | (r[:, 0] == r[:, 2])
                   | (r[:, 1] == r[:, 2]))
            if not bad.any():
                break
            redo = rng.integers(0, p - 1, size=(int(bad.sum()), 3))
            redo += redo >= np.nonzero(bad)[0][:, None]
            r[bad] = redo
        mutants = pop[r[:, 0]] + cfg.differential_weight * (pop[r[:, 1]] - pop[r[:, 2]])
        cross = rng.random((p, dim)) < cfg.crossover_prob
        cross[np.arange(p), rng.integers(dim, size=p)] = True  # >= 1 mutant gene
        trial = np.where(cross, mutants, pop)
        np.clip(trial, lo, hi, out=trial)
        trial_fitness = np.asarray(func(trial), dtype=float)
        improved = trial_fitness <= fitness
        pop[improved] = trial[improved]
        fitness[improved] = trial_fitness[improved]
        history.append(float(fitness.min()))
    best = int(np.argmin(fitness))
    return DEResult(x=pop[best].copy(), fun=float(fitness[best]),
                    best_per_generation=history)


def grid_search(func, lower, upper, resolution: int,
                budget: int = 10_000_000) -> tuple[np.ndarray, float]:
    """Exhaustive grid argmin; ties break to the lexicographically smallest point."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    dim = lo.shape[0]
    if resolution ** dim > budget:
        raise ValueError(
            f"grid of {resolution}^{dim} points exceeds the budget of {budget}"
        )
    axes = [np.linspace(lo[d], hi[d], resolution) for d in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)  # lexicographic order
    values = np.asarray(func(points), dtype=float)
    best = int(np.argmin(values))  # first minimum = lexicographically smallest
    return points[best].copy(), float(values[best])


def _critic_action_objective(critic: Critic, actor_input_row: np.ndarray):
    """Critic value as a function of the normalized action filling the last slot."""
    row = np.asarray(actor_input_row, dtype=float)

    def objective(actions: np.ndarray) -> np.ndarray:
        acts = np.atleast_2d(np.asarray(actions, dtype=float))
        tiled = np.tile(row, (acts.shape[0], 1))
        return critic.value(np.hstack([tiled, acts]))

    return objective


def _normalized_action_box(critic: Critic, bounds: ActionBounds):
    lo = critic.norm.normalize(bounds.lower, "action")
    hi = critic.norm.normalize(bounds.upper, "action")
    return np.minimum(lo, hi), np.maximum(lo, hi)


def ts_optimize(critic: Critic, actor_input_row, bounds: ActionBounds,
                de: DEConfig) -> np.ndarray:
    """Best action for one state window, found by DE through the critic."""
    objective = _critic_action_objective(critic, actor_input_row)
    lo, hi = _normalized_action_box(critic, bounds)
    result = minimize_de(objective, lo, hi, de)
    return bounds.clip(critic.norm.denormalize(result.x, "action"))


def grid_oracle(critic: Critic, actor_input_row, bounds: ActionBounds,
                resolution: int) -> np.ndarray:
    """Exhaustive-search counterpart of ts_optimize, for verification."""
    objective = _critic_action_objective(critic, actor_input_row)
    lo, hi = _normalized_action_box(critic, bounds)
    x, _ = grid_search(objective, lo, hi, resolution)
    return bounds.clip(critic.norm.denormalize(x, "action"))


def make_ts_controller(critic: Critic, norm: NormalizationSpec,
                       bounds: ActionBounds, tau: int, de: DEConfig):
    """Per-state DE optimization wrapped as a rollout controller.

    The DE seed is re-derived per step so repeated evaluations of the same
    rollout are deterministic.
    """

    def controller(state, past):
        pairs = list(past[-(tau - 1):]) if tau > 1 else []
        while len(pairs) < tau - 1:
            pairs.insert(0, (state, bounds.mid()))
        parts = []
        for s, a in pairs:
            parts.append(norm.normalize(np.asarray(s, dtype=float), "state"))
            parts.append(norm.normalize(np.asarray(a, dtype=float), "action"))
        parts.append(norm.normalize(np.asarray(state, dtype=float), "state"))
        row = np.concatenate(parts)
        step_cfg = DEConfig(
            population=de.population,
            generations=de.generations,
            crossover_prob=de.crossover_prob,
            differential_weight=de.differential_weight,
            seed=de.seed + len(past),
        )
        return ts_optimize(critic, row, bounds, step_cfg)

    return controller
