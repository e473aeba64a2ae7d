"""Offline trace handling: CSV ingestion, (-1, 1) normalization, window building.

CSV schema: one header row naming every channel with a role prefix, e.g.

    t,s:T_amb,s:H_ite,a:T_dec,...,r:PUE,r:T_z1,r:T_z2

followed by numeric rows with strictly increasing, uniformly spaced time
stamps. A record's readings are the observations available AT its time step,
i.e. produced by the action stored one record earlier; window building relies
on that convention to pair each action with the readings one slot later.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .simulator import (ACTION_NAMES, PlantModel, READING_NAMES, STATE_NAMES,
                        Scenario, plant_step)

ROLES = ("state", "action", "reading")

DEFAULT_MARGIN = 0.05


class TraceFormatError(ValueError):
    """Malformed trace file or inconsistent record dimensions."""


@dataclass
class TraceRecord:
    """One time slot: the state seen, the action taken, the readings observed."""

    t: float
    state: np.ndarray
    action: np.ndarray
    readings: np.ndarray


@dataclass
class Trace:
    """A time-ordered list of records plus the channel names per role."""

    records: list[TraceRecord]
    state_names: tuple[str, ...]
    action_names: tuple[str, ...]
    reading_names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        return self.records[idx]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (len(self.state_names), len(self.action_names),
                len(self.reading_names))


def load_csv(path) -> Trace:
    """Parse a trace CSV, rejecting malformed rows with their row number."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError(f"{path}: empty file") from None
        if not header or header[0] != "t":
            raise TraceFormatError(f"{path}: first header column must be 't'")
        roles, names = [], []
        for col in header[1:]:
            prefix, _, name = col.partition(":")
            if prefix not in ("s", "a", "r") or not name:
                raise TraceFormatError(
                    f"{path}: header column {col!r} lacks an s:/a:/r: role prefix"
                )
            roles.append(prefix)
            names.append(name)
        state_idx = [i for i, r in enumerate(roles) if r == "s"]
        action_idx = [i for i, r in enumerate(roles) if r == "a"]
        reading_idx = [i for i, r in enumerate(roles) if r == "r"]
        records: list[TraceRecord] = []
        times: list[float] = []
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise TraceFormatError(
                    f"{path}: row {rownum} has {len(row)} cells, "
                    f"expected {len(header)}"
                )
            try:
                vals = [float(cell) for cell in row]
            except ValueError as exc:
                raise TraceFormatError(
                    f"{path}: row {rownum}: non-numeric cell ({exc})"
                ) from None
            t = vals[0]
            chans = vals[1:]
            if times and t <= times[-1]:
                raise TraceFormatError(
                    f"{path}: row {rownum}: time {t} does not increase"
                )
            times.append(t)
            records.append(TraceRecord(
                t=t,
                state=np.array([chans[i] for i in state_idx]),
                action=np.array([chans[i] for i in action_idx]),
                readings=np.array([chans[i] for i in reading_idx]),
            ))
    if len(times) >= 3:
        steps = np.diff(times)
        ref = steps[0]
        bad = np.nonzero(np.abs(steps - ref) > 1e-9 * max(1.0, abs(ref)))[0]
        if bad.size:
            raise TraceFormatError(
                f"{path}: row {int(bad[0]) + 3}: non-uniform time step "
                f"({steps[bad[0]]} vs {ref})"
            )
    return Trace(
        records=records,
        state_names=tuple(n for r, n in zip(roles, names) if r == "s"),
        action_names=tuple(n for r, n in zip(roles, names) if r == "a"),
        reading_names=tuple(n for r, n in zip(roles, names) if r == "r"),
    )


def save_csv(trace: Trace, path) -> None:
    """Write a trace with deterministic shortest-round-trip float formatting."""
    path = Path(path)
    header = (["t"] + [f"s:{n}" for n in trace.state_names]
              + [f"a:{n}" for n in trace.action_names]
              + [f"r:{n}" for n in trace.reading_names])
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rec in trace.records:
            row = [repr(float(rec.t))]
            for vec in (rec.state, rec.action, rec.readings):
                row.extend(repr(float(v)) for v in vec)
            writer.writerow(row)


@dataclass
class NormalizationSpec:
    """Per-channel affine maps into (-1, 1) with a safety margin.

    A channel's observed minimum maps to -(1 - margin) and its maximum to
    +(1 - margin), so a tanh-limited policy head can still reach the extremes
    seen in training. Values outside the fitted range simply map outside
    +/-(1 - margin); nothing clips here.
    """

    mins: dict[str, np.ndarray]
    maxs: dict[str, np.ndarray]
    margin: float = DEFAULT_MARGIN

    def normalize(self, values, role: str):
        lo, hi = self._range(role)
        arr = np.asarray(values, dtype=float)
        return (1.0 - self.margin) * (2.0 * (arr - lo) / (hi - lo) - 1.0)

    def denormalize(self, values, role: str):
        lo, hi = self._range(role)
        arr = np.asarray(values, dtype=float)
        return lo + (hi - lo) * (arr / (1.0 - self.margin) + 1.0) / 2.0

    def scale(self, role: str) -> np.ndarray:
        """d(physical)/d(normalized) per channel."""
        lo, hi = self._range(role)
        return (hi - lo) / (2.0 * (1.0 - self.margin))

    def _range(self, role):
        if role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {role!r}")
        return self.mins[role], self.maxs[role]

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "mins": {k: v.tolist() for k, v in self.mins.items()},
            "maxs": {k: v.tolist() for k, v in self.maxs.items()},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NormalizationSpec":
        return cls(
            mins={k: np.asarray(v, dtype=float) for k, v in payload["mins"].items()},
            maxs={k: np.asarray(v, dtype=float) for k, v in payload["maxs"].items()},
            margin=float(payload["margin"]),
        )


def fit_normalization(records, margin=DEFAULT_MARGIN) -> NormalizationSpec:
    """Fit per-channel (min, max) over a training trace; constant channels fail."""
    if len(records) < 2:
        raise TraceFormatError("need at least two records to fit normalization")
    stacks = {
        "state": np.stack([r.state for r in records]),
        "action": np.stack([r.action for r in records]),
        "reading": np.stack([r.readings for r in records]),
    }
    mins, maxs = {}, {}
    for role, arr in stacks.items():
        lo = arr.min(axis=0)
        hi = arr.max(axis=0)
        flat = np.nonzero(hi - lo <= 0.0)[0]
        if flat.size:
            raise TraceFormatError(
                f"{role} channel {int(flat[0])} is constant; cannot normalize"
            )
        mins[role] = lo
        maxs[role] = hi
    return NormalizationSpec(mins=mins, maxs=maxs, margin=margin)


def normalize_records(spec: NormalizationSpec, records) -> list[TraceRecord]:
    return [
        TraceRecord(
            t=r.t,
            state=spec.normalize(r.state, "state"),
            action=spec.normalize(r.action, "action"),
            readings=spec.normalize(r.readings, "reading"),
        )
        for r in records
    ]


@dataclass
class WindowedDataset:
    """Model-ready rows built from tau consecutive records.

    Row k concatenates (state, action) for records k .. k+tau-1; the critic
    input keeps the final action, the actor input drops it. next_readings[k]
    holds the readings of record k+tau, i.e. the observation one slot after
    the last action in the row.
    """

    critic_inputs: np.ndarray
    actor_inputs: np.ndarray
    next_readings: np.ndarray
    tau: int
    state_dim: int
    action_dim: int

    @property
    def n_rows(self) -> int:
        return self.critic_inputs.shape[0]

    def rows(self, idx) -> "WindowedDataset":
        return WindowedDataset(
            critic_inputs=self.critic_inputs[idx],
            actor_inputs=self.actor_inputs[idx],
            next_readings=self.next_readings[idx],
            tau=self.tau,
            state_dim=self.state_dim,
            action_dim=self.action_dim,
        )


def build_windows(records, tau: int) -> WindowedDataset:
    """Assemble sliding windows with the one-slot action/readings shift."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    n = len(records)
    if n < tau + 1:
        raise TraceFormatError(
            f"trace has {n} records, need at least tau + 1 = {tau + 1}"
        )
    state_dim = records[0].state.shape[0]
    action_dim = records[0].action.shape[0]
    pairs = np.hstack([
        np.stack([r.state for r in records]),
        np.stack([r.action for r in records]),
    ])  # (n, state_dim + action_dim)
    readings = np.stack([r.readings for r in records])
    n_rows = n - tau
    width = tau * (state_dim + action_dim)
    critic_inputs = np.empty((n_rows, width))
    for j in range(tau):
        block = pairs[j:j + n_rows]
        critic_inputs[:, j * (state_dim + action_dim):(j + 1) * (state_dim + action_dim)] = block
    actor_inputs = critic_inputs[:, :width - action_dim].copy()
    next_readings = readings[tau:tau + n_rows].copy()
    return WindowedDataset(
        critic_inputs=critic_inputs,
        actor_inputs=actor_inputs,
        next_readings=next_readings,
        tau=tau,
        state_dim=state_dim,
        action_dim=action_dim,
    )


def split(dataset: WindowedDataset, train_fraction: float):
    """Chronological train/validation split; no shuffling across the boundary."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = dataset.n_rows
    n_train = int(round(n * train_fraction))
    if n_train == 0 or n_train == n:
        raise ValueError(
            f"split of {n} rows at fraction {train_fraction} leaves a side empty"
        )
    return dataset.rows(slice(0, n_train)), dataset.rows(slice(n_train, n))


@dataclass(frozen=True)
class ActionBounds:
    """Per-channel lower/upper limits for the set-points, physical units."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if np.any(self.lower >= self.upper):
            bad = int(np.argmax(self.lower >= self.upper))
            raise ValueError(
                f"bounds channel {bad}: lower {self.lower[bad]} is not below "
                f"upper {self.upper[bad]}"
            )

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def mid(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def clip(self, action) -> np.ndarray:
        return np.clip(np.asarray(action, dtype=float), self.lower, self.upper)


def smooth_actions(actions: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average per channel; edges use the in-range samples only."""
    if window <= 1:
        return actions.copy()
    kernel = np.ones(window)
    counts = np.convolve(np.ones(actions.shape[0]), kernel, mode="same")
    out = np.empty_like(actions)
    for c in range(actions.shape[1]):
        out[:, c] = np.convolve(actions[:, c], kernel, mode="same") / counts
    return out


def generate_random_trace(bounds: ActionBounds, length: int, smoothing_window: int,
                          seed: int, plant: PlantModel,
                          scenario: Scenario) -> Trace:
    """Exploration trace: smoothed uniform-random set-points driven through the plant.

    Actions are sampled uniformly inside the bounds, smoothed with a centered
    moving average, clipped back to the bounds, then applied in closed loop;
    each record stores the readings observed at its own slot (produced by the
    previous record's action). Deterministic for a fixed seed.
    """
    if smoothing_window < 1:
        raise ValueError("smoothing_window must be >= 1")
    if length <= smoothing_window:
        raise ValueError("length must exceed smoothing_window")
    if len(scenario) < length:
        raise ValueError(
            f"scenario has {len(scenario)} steps, need at least {length}"
        )
    if bounds.dim != plant.n_setpoints:
        raise ValueError("bounds dimension does not match the plant's set-points")
    rng = np.random.default_rng(seed)
    raw = rng.uniform(bounds.lower, bounds.upper, size=(length, bounds.dim))
    actions = bounds.clip(smooth_actions(raw, smoothing_window))

    temps = np.array([scenario.t_amb[0] - 3.0, scenario.t_amb[0] - 3.0])
    noise_rng = np.random.default_rng(seed + 0x0FF5E7)
    # Readings for the first record come from the pre-trace behaviour: hold
    # mid-range set-points for one settling slot.
    warm = bounds.mid()
    temps, _, readings = plant_step(
        plant, temps, warm, scenario.t_amb[0], scenario.load[0],
        timestep_minutes=scenario.timestep_minutes, rng=noise_rng,
    )
    records: list[TraceRecord] = []
    for t in range(length):
        state = np.array([scenario.t_amb[t], scenario.load[t]])
        records.append(TraceRecord(
            t=float(t), state=state, action=actions[t], readings=readings,
        ))
        temps, _, readings = plant_step(
            plant, temps, actions[t], scenario.t_amb[t], scenario.load[t],
            timestep_minutes=scenario.timestep_minutes, rng=noise_rng,
        )
    return Trace(
        records=records,
        state_names=STATE_NAMES,
        action_names=ACTION_NAMES,
        reading_names=READING_NAMES,
    )
