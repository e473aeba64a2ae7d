"""Deterministic surrogate of a two-zone data-center cooling plant.

This stands in for a full building-energy simulation. Each zone is a single
lumped thermal node:

    T_zone' = T_zone + (dt / mass) * (heat_in - cooling)
    heat_in = load_factor * designed_it_load + coupling * (T_amb - T_zone)
    cooling = sum over the zone's set-points of gain_i * max(T_zone - sp_i, 0)

so lowering a set-point always cools its zone harder. Electrical cooling
power rises steeply as a set-point is pushed down (convex in the modulation
depth u_i = (high_i - sp_i) / (high_i - low_i)):

    cooling_power = sum_i floor_i + scale_i * u_i ** exponent
    PUE = 1 + (cooling_power + facility_overhead) / it_power

The five set-points are, in order: two evaporative-cooler outlets and a DX
coil outlet serving zone 1, and a chilled-water loop plus a chiller air loop
serving zone 2 (the chiller side carries the larger fixed floors).

The slot update integrates with internal Euler substeps, so the zone time
constant can sit well below the sampling interval: readings taken at slot
boundaries are then close to quasi-steady in the applied action, and an
action applied during slot t is first visible in the readings at t+1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .objective import CostParams, cost

STATE_NAMES = ("T_amb", "H_ite")
ACTION_NAMES = ("T_dec", "T_iec", "T_cw", "T_dx", "T_ch")
READING_NAMES = ("PUE", "T_z1", "T_z2")


class PlantError(ValueError):
    """Raised for out-of-range plant inputs."""


class RolloutError(RuntimeError):
    """Raised when a controller fails during a closed-loop rollout."""


@dataclass(frozen=True)
class PlantModel:
    """Parameters of the surrogate plant. All powers in kW, temperatures degC.

    Defaults are sized so the plant is controllable (all set-points at their
    lower bounds hold both zones well below 29 degC at full load) and so the
    energy/overheating trade-off has an interior optimum below 29.5 degC at
    the default penalty weight.
    """

    zone_areas: tuple[float, float] = (15.24 * 15.24, 15.24 * 17.00)
    load_densities: tuple[float, float] = (4.0, 2.0)       # designed kW/m^2
    zone_masses: tuple[float, float] = (1.2, 1.4)          # kWh/degC
    setpoint_zone: tuple[int, ...] = (0, 0, 1, 0, 1)
    setpoint_low: tuple[float, ...] = (16.0, 17.0, 7.0, 12.0, 14.0)
    setpoint_high: tuple[float, ...] = (26.0, 27.0, 16.0, 24.0, 26.0)
    cooling_gains: tuple[float, ...] = (34.0, 30.0, 8.0, 25.0, 34.0)    # kW/degC
    power_scales: tuple[float, ...] = (30.0, 24.0, 100.0, 140.0, 52.0)  # kW at u=1
    power_floors: tuple[float, ...] = (3.0, 3.0, 14.0, 8.0, 8.0)        # kW
    power_exponent: float = 4.0
    ambient_coupling: tuple[float, float] = (5.0, 5.0)     # kW/degC
    idle_power_fraction: float = 0.25
    facility_overhead_kw: float = 40.0
    noise_std: float = 0.0                                 # degC on temp readings
    substeps: int = 24

    def __post_init__(self):
        n = len(self.setpoint_zone)
        for name in ("setpoint_low", "setpoint_high", "cooling_gains",
                     "power_scales", "power_floors"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have {n} entries")
        if any(l >= h for l, h in zip(self.setpoint_low, self.setpoint_high)):
            raise ValueError("setpoint_low must be strictly below setpoint_high")
        if any(g <= 0 for g in self.cooling_gains):
            raise ValueError("cooling gains must be positive")
        if any(z not in (0, 1) for z in self.setpoint_zone):
            raise ValueError("setpoint_zone entries must be 0 or 1")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    @property
    def n_setpoints(self) -> int:
        return len(self.setpoint_zone)

    @property
    def designed_it_kw(self) -> float:
        return sum(d * a for d, a in zip(self.load_densities, self.zone_areas))

    def it_power_kw(self, load_factor: float) -> float:
        frac = self.idle_power_fraction
        return (frac + (1.0 - frac) * load_factor) * self.designed_it_kw

    def zone_heat_kw(self, zone: int, load_factor: float) -> float:
        return load_factor * self.load_densities[zone] * self.zone_areas[zone]

    def cooling_power_kw(self, action) -> float:
        sp = np.asarray(action, dtype=float)
        lo = np.asarray(self.setpoint_low)
        hi = np.asarray(self.setpoint_high)
        u = np.clip((hi - sp) / (hi - lo), 0.0, 1.0)
        return float(
            np.sum(self.power_floors) + np.sum(
                np.asarray(self.power_scales) * u ** self.power_exponent
            )
        )


def plant_step(model: PlantModel, zone_temps, action, t_amb, load_factor,
               timestep_minutes=6.0, rng=None):
    """Advance both zones one slot under `action`; returns (temps', pue, readings).

    readings = [PUE, T_z1', T_z2'] is what a monitoring system would log at
    the end of the slot, i.e. the first observation that reflects `action`.
    Sensor noise (model.noise_std) is applied to the readings only, never to
    the underlying state; pass an rng to make the noise stream explicit.
    """
    sp = np.asarray(action, dtype=float)
    if sp.shape != (model.n_setpoints,):
        raise PlantError(
            f"action has shape {sp.shape}, expected ({model.n_setpoints},)"
        )
    lo = np.asarray(model.setpoint_low)
    hi = np.asarray(model.setpoint_high)
    tol = 1e-9
    if np.any(sp < lo - tol) or np.any(sp > hi + tol):
        bad = int(np.argmax((sp < lo - tol) | (sp > hi + tol)))
        raise PlantError(
            f"set-point {ACTION_NAMES[bad]}={sp[bad]:.4f} outside "
            f"[{lo[bad]}, {hi[bad]}]"
        )
    if not 0.0 <= load_factor <= 1.0:
        raise PlantError(f"load factor {load_factor} outside [0, 1]")

    temps = np.asarray(zone_temps, dtype=float).copy()
    gains = np.asarray(model.cooling_gains)
    zones = np.asarray(model.setpoint_zone)
    dt_h = timestep_minutes / 60.0 / model.substeps
    for _ in range(model.substeps):
        for z in (0, 1):
            heat = model.zone_heat_kw(z, load_factor)
            heat += model.ambient_coupling[z] * (t_amb - temps[z])
            mask = zones == z
            removal = np.sum(gains[mask] * np.maximum(temps[z] - sp[mask], 0.0))
            temps[z] += dt_h / model.zone_masses[z] * (heat - removal)

    cooling = model.cooling_power_kw(sp)
    pue = 1.0 + (cooling + model.facility_overhead_kw) / model.it_power_kw(load_factor)

    readings = np.array([pue, temps[0], temps[1]])
    if model.noise_std > 0.0 and rng is not None:
        readings[1] += rng.normal(0.0, model.noise_std)
        readings[2] += rng.normal(0.0, model.noise_std)
        readings[0] += rng.normal(0.0, model.noise_std * 0.01)
    return temps, pue, readings


@dataclass
class Scenario:
    """Exogenous inputs for a run: ambient temperature and IT load factor."""

    t_amb: np.ndarray
    load: np.ndarray
    timestep_minutes: float = 6.0
    seed: int = 0

    def __post_init__(self):
        self.t_amb = np.asarray(self.t_amb, dtype=float)
        self.load = np.asarray(self.load, dtype=float)
        if self.t_amb.shape != self.load.shape or self.t_amb.ndim != 1:
            raise ValueError("t_amb and load must be 1-D series of equal length")
        if np.any(self.load < 0.0) or np.any(self.load > 1.0):
            raise ValueError("load factors must lie in [0, 1]")

    def __len__(self) -> int:
        return self.t_amb.shape[0]

    def slice(self, start: int, stop: int | None = None) -> "Scenario":
        return Scenario(
            t_amb=self.t_amb[start:stop],
            load=self.load[start:stop],
            timestep_minutes=self.timestep_minutes,
            seed=self.seed,
        )


def _smoothed_noise(rng, length, std, window):
    noise = rng.normal(0.0, std, size=length)
    if window <= 1:
        return noise
    kernel = np.ones(window)
    counts = np.convolve(np.ones(length), kernel, mode="same")
    return np.convolve(noise, kernel, mode="same") / counts


def make_scenario(length, timestep_minutes=6.0, seed=0, ambient_mean=29.0,
                  ambient_swing=3.5, ambient_jitter=0.8, load_mean=0.5,
                  load_swing=0.22, load_jitter=0.05) -> Scenario:
    """Diurnal sinusoids plus seeded smoothed jitter, tropical-climate flavour."""
    rng = np.random.default_rng(seed)
    hours = np.arange(length) * timestep_minutes / 60.0
    day = 2.0 * np.pi * hours / 24.0
    smooth_w = max(1, int(round(180.0 / timestep_minutes)))  # ~3 h window
    t_amb = (
        ambient_mean
        + ambient_swing * np.sin(day - 0.5 * np.pi)
        + _smoothed_noise(rng, length, ambient_jitter, smooth_w)
    )
    load = (
        load_mean
        + load_swing * np.sin(day + 0.25 * np.pi)
        + _smoothed_noise(rng, length, load_jitter, smooth_w)
    )
    return Scenario(
        t_amb=t_amb,
        load=np.clip(load, 0.02, 0.98),
        timestep_minutes=timestep_minutes,
        seed=seed,
    )


@dataclass
class RolloutMetrics:
    """Aggregate results of one closed-loop run plus the per-step series."""

    mean_pue: float
    max_t_z1: float
    max_t_z2: float
    mean_cost: float
    series: dict[str, np.ndarray]

    def summary(self) -> dict:
        return {
            "mean_pue": self.mean_pue,
            "max_t_z1": self.max_t_z1,
            "max_t_z2": self.max_t_z2,
            "mean_cost": self.mean_cost,
        }


def rollout(model: PlantModel, scenario: Scenario, controller,
            cost_params: CostParams, initial_temps=(26.0, 26.0)) -> RolloutMetrics:
    """Run `controller` closed-loop over the scenario.

    controller(state, past) -> action, where state = [t_amb, load] for the
    current slot and past is the list of earlier (state, action) pairs,
    oldest first. The action chosen at slot t drives the plant during slot t,
    so its effect shows up in the readings attributed to that decision (the
    first post-action observation). Each series row pairs a decision with
    its consequence.
    """
    n = len(scenario)
    temps = np.asarray(initial_temps, dtype=float).copy()
    rng = np.random.default_rng(scenario.seed + 0x5EED)
    past: list[tuple[np.ndarray, np.ndarray]] = []
    actions = np.empty((n, model.n_setpoints))
    pues = np.empty(n)
    t_z = np.empty((n, 2))
    costs = np.empty(n)
    for t in range(n):
        state = np.array([scenario.t_amb[t], scenario.load[t]])
        try:
            action = np.asarray(controller(state, past), dtype=float)
        except Exception as exc:
            raise RolloutError(f"controller failed at step {t}: {exc}") from exc
        if action.shape != (model.n_setpoints,):
            raise RolloutError(
                f"controller returned shape {action.shape} at step {t}, "
                f"expected ({model.n_setpoints},)"
            )
        temps, pue, readings = plant_step(
            model, temps, action, scenario.t_amb[t], scenario.load[t],
            timestep_minutes=scenario.timestep_minutes, rng=rng,
        )
        actions[t] = action
        pues[t] = readings[0]
        t_z[t] = readings[1:3]
        costs[t] = cost(readings, cost_params)
        past.append((state, action))
    series = {
        "t": np.arange(n, dtype=float),
        "t_amb": scenario.t_amb.copy(),
        "load": scenario.load.copy(),
        "action": actions,
        "pue": pues,
        "t_z1": t_z[:, 0],
        "t_z2": t_z[:, 1],
        "cost": costs,
    }
    return RolloutMetrics(
        mean_pue=float(np.mean(pues)),
        max_t_z1=float(np.max(t_z[:, 0])),
        max_t_z2=float(np.max(t_z[:, 1])),
        mean_cost=float(np.mean(costs)),
        series=series,
    )
