"""Replicated multivariate event-time data and the evaluation time grid.

A trial is an observation window [0, t_end] with one sorted event-time vector
per channel.  Trials are independent replications sharing a channel set;
likelihood contributions across trials add.  All containers are treated as
immutable after construction.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MERGE_TOL = 1e-12


@dataclass(frozen=True)
class Trial:
    """One observation window with per-channel sorted event times (seconds)."""

    t_end: float
    events: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        if not np.isfinite(self.t_end) or self.t_end <= 0:
            raise ValueError("t_end must be positive and finite")
        clean = {}
        for channel, times in self.events.items():
            arr = np.asarray(times, dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError(f"channel {channel!r}: times must be 1-D")
            if len(arr) and (arr.min() <= 0.0 or arr.max() >= self.t_end):
                raise ValueError(
                    f"channel {channel!r}: event times must lie strictly inside (0, {self.t_end})"
                )
            if np.any(np.diff(arr) <= 0.0):
                raise ValueError(
                    f"channel {channel!r}: duplicate or unsorted event time "
                    "(simple point process requires strictly increasing times)"
                )
            clean[channel] = arr
        object.__setattr__(self, "events", clean)

    def count(self, channel: str) -> int:
        return len(self.events[channel])


@dataclass(frozen=True)
class EventData:
    """Replicated trials over a common channel set."""

    trials: list[Trial]
    channels: list[str]

    def __post_init__(self) -> None:
        if not self.trials:
            raise ValueError("at least one trial required")
        chanset = set(self.channels)
        if len(chanset) != len(self.channels):
            raise ValueError("duplicate channel names")
        for idx, trial in enumerate(self.trials):
            if set(trial.events) != chanset:
                raise ValueError(f"trial {idx} channel set differs from {sorted(chanset)}")

    @property
    def n_trials(self) -> int:
        return len(self.trials)

    def total_time(self) -> float:
        return float(sum(t.t_end for t in self.trials))

    def total_count(self, channel: str) -> int:
        return sum(t.count(channel) for t in self.trials)


@dataclass(frozen=True)
class TimeGrid:
    """Evaluation grid 0 = t_0 < ... < t_n = T with target events as grid points.

    ``jump_indices`` are exactly the indices of the target-channel events and
    ``deltas[l-1]`` is t_l - t_{l-1} for l = 1..n.
    """

    points: np.ndarray
    deltas: np.ndarray
    jump_indices: np.ndarray

    @property
    def n(self) -> int:
        return len(self.points) - 1

    @property
    def t_end(self) -> float:
        return float(self.points[-1])


def make_time_grid(trial: Trial, target: str, base_n: int) -> TimeGrid:
    """Union of the uniform (base_n + 1)-point grid with the target event times.

    An event within MERGE_TOL of an interior uniform point replaces that
    point, so the event time itself is always a grid value and every spacing
    stays positive.
    """
    if base_n < 1:
        raise ValueError("base_n must be >= 1")
    if target not in trial.events:
        raise KeyError(f"target channel {target!r} not present")
    uniform = np.linspace(0.0, trial.t_end, base_n + 1)
    taus = trial.events[target]

    points: list[float] = []
    is_jump: list[bool] = []
    iu, ie = 0, 0
    while iu < len(uniform) or ie < len(taus):
        if ie >= len(taus):
            points.append(uniform[iu])
            is_jump.append(False)
            iu += 1
        elif iu >= len(uniform):
            points.append(taus[ie])
            is_jump.append(True)
            ie += 1
        else:
            u, tau = uniform[iu], taus[ie]
            interior = 0 < iu < len(uniform) - 1
            if interior and abs(u - tau) <= MERGE_TOL:
                points.append(tau)  # event value wins the merge
                is_jump.append(True)
                iu += 1
                ie += 1
            elif u <= tau:
                points.append(u)
                is_jump.append(False)
                iu += 1
            else:
                points.append(tau)
                is_jump.append(True)
                ie += 1

    pts = np.asarray(points)
    deltas = np.diff(pts)
    if np.any(deltas <= 0.0):
        raise ValueError("grid spacings must be positive")
    jump_indices = np.flatnonzero(np.asarray(is_jump))
    return TimeGrid(pts, deltas, jump_indices)


def split_replications(data: EventData, holdout: int) -> tuple[EventData, EventData]:
    """Partition trials into (all but holdout, holdout alone)."""
    if data.n_trials < 2:
        raise ValueError("cannot hold out from single-trial data")
    if not 0 <= holdout < data.n_trials:
        raise IndexError(f"holdout index {holdout} out of range")
    train = [t for i, t in enumerate(data.trials) if i != holdout]
    test = [data.trials[holdout]]
    return EventData(train, data.channels), EventData(test, data.channels)


# -- file formats -----------------------------------------------------------
#
# CSV: header "trial,channel,time", one event per row; t_end is recovered as
# the per-trial max event time (the window length is not part of the format).
# JSON: {"trials": [{"id": ..., "t_end": ..., "events": {channel: [...]}}]}.


def save_events(data: EventData, path: str | Path, format: str = "json") -> None:
    path = Path(path)
    if format == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trial", "channel", "time"])
            for idx, trial in enumerate(data.trials):
                for channel in data.channels:
                    for t in trial.events[channel]:
                        writer.writerow([idx, channel, repr(float(t))])
    elif format == "json":
        payload = {
            "trials": [
                {
                    "id": idx,
                    "t_end": trial.t_end,
                    "events": {ch: trial.events[ch].tolist() for ch in data.channels},
                }
                for idx, trial in enumerate(data.trials)
            ]
        }
        with path.open("w") as fh:
            json.dump(payload, fh)
    else:
        raise ValueError(f"unknown format {format!r}")


def load_events(path: str | Path, format: str | None = None) -> EventData:
    path = Path(path)
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "csv"
    if format == "csv":
        return _load_csv(path)
    if format == "json":
        return _load_json(path)
    raise ValueError(f"unknown format {format!r}")


def _load_csv(path: Path) -> EventData:
    raw: dict[str, dict[str, list[float]]] = {}
    order: list[str] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["trial", "channel", "time"]:
            raise ValueError("expected CSV header 'trial,channel,time'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 3:
                raise ValueError(f"line {lineno}: expected 3 fields")
            trial_id, channel = row[0].strip(), row[1].strip()
            time = float(row[2])
            if trial_id not in raw:
                raw[trial_id] = {}
                order.append(trial_id)
            raw[trial_id].setdefault(channel, []).append(time)
    if not raw:
        raise ValueError("no events found")
    channels = sorted({ch for per in raw.values() for ch in per})
    trials = []
    for trial_id in order:
        per = raw[trial_id]
        t_end = max(max(v) for v in per.values()) * (1.0 + 1e-9)
        events = {}
        for ch in channels:
            times = np.sort(np.asarray(per.get(ch, []), dtype=np.float64))
            if np.any(np.diff(times) == 0.0):
                raise ValueError(f"trial {trial_id}, channel {ch}: duplicate event time")
            events[ch] = times
        trials.append(Trial(t_end=t_end, events=events))
    return EventData(trials, channels)


def _load_json(path: Path) -> EventData:
    with path.open() as fh:
        payload = json.load(fh)
    entries = payload.get("trials")
    if not entries:
        raise ValueError("JSON must contain a nonempty 'trials' list")
    channels = sorted({ch for entry in entries for ch in entry["events"]})
    trials = []
    for entry in entries:
        events = {}
        for ch in channels:
            times = np.sort(np.asarray(entry["events"].get(ch, []), dtype=np.float64))
            if np.any(np.diff(times) == 0.0):
                raise ValueError(f"trial {entry.get('id')}, channel {ch}: duplicate event time")
            events[ch] = times
        trials.append(Trial(t_end=float(entry["t_end"]), events=events))
    return EventData(trials, channels)
