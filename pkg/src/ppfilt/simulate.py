"""Ground-truth event streams: recursive exponential-filter intensities and
Ogata thinning for general link/filter models.

The exponential filter g(s) = exp(alpha s + beta) with alpha < 0 admits a
one-pass recursive intensity update across events, which the thinning loop
uses as its state.  Dominating rates exploit that every exponential term
decays between events, and that a tabulated filter's contribution is bounded
by the event count in its support times the positive part of the curve; the
bound is recomputed after every accepted or rejected candidate.  All link
families here are nondecreasing, which the bound argument requires.

Randomness comes from numpy's default_rng (PCG64); trials draw from
SeedSequence(seed).spawn substreams, so streams are reproducible across
platforms and trial counts.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .events import EventData, Trial
from .links import LinkFunction

DEFAULT_EXPLOSION_CAP = 1_000_000


class ExplosionError(RuntimeError):
    """The configuration produced more events than the cap allows."""


@dataclass(frozen=True)
class ExpFilter:
    """g(s) = exp(alpha s + beta), alpha < 0, unbounded support."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if self.alpha >= 0:
            raise ValueError("exponential filter requires alpha < 0 (decaying memory)")


@dataclass(frozen=True)
class TabulatedFilter:
    """Step-function filter on [0, A]: values[k] on [delta_k, delta_{k+1}), last bin closed."""

    lags: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.values) != len(self.lags) - 1:
            raise ValueError("need one value per lag bin")

    @property
    def support(self) -> float:
        return float(self.lags[-1])

    @property
    def max_positive(self) -> float:
        return float(max(0.0, self.values.max())) if len(self.values) else 0.0

    def at(self, lag: np.ndarray) -> np.ndarray:
        lag = np.asarray(lag, dtype=np.float64)
        inside = (lag > 0.0) & (lag <= self.support)
        k = np.searchsorted(self.lags, lag, side="right") - 1
        k = np.clip(k, 0, len(self.values) - 1)
        return np.where(inside, self.values[k], 0.0)


Filter = ExpFilter | TabulatedFilter


@dataclass(frozen=True)
class SimConfig:
    """Generative model: per-channel links/baselines and pairwise filters.

    ``filters`` maps (target channel, source channel) to the filter applied
    to the source's events inside the target's linear predictor.
    """

    channels: list[str]
    t_end: float
    link: LinkFunction | dict[str, LinkFunction]
    baseline: float | dict[str, float]
    filters: dict[tuple[str, str], Filter] = field(default_factory=dict)
    seed: int = 0
    explosion_cap: int = DEFAULT_EXPLOSION_CAP

    def __post_init__(self) -> None:
        if self.explosion_cap < 1:
            raise ValueError("explosion cap must be >= 1")
        for (tgt, src) in self.filters:
            if tgt not in self.channels or src not in self.channels:
                raise ValueError(f"filter pair ({tgt!r}, {src!r}) names unknown channels")

    def link_of(self, channel: str) -> LinkFunction:
        return self.link[channel] if isinstance(self.link, dict) else self.link

    def baseline_of(self, channel: str) -> float:
        if isinstance(self.baseline, dict):
            return float(self.baseline[channel])
        return float(self.baseline)


def exp_hawkes_intensity(events: np.ndarray, alpha: float, beta: float, t: float) -> float:
    """sum over events sigma < t of exp(alpha (t - sigma) + beta), via the recursion.

    The running value is decayed from event to event and bumped by exp(beta),
    so the cost is one pass over the events instead of a full double sum.
    """
    if alpha >= 0:
        raise ValueError("alpha must be negative")
    y = 0.0
    prev = None
    for sigma in np.asarray(events, dtype=np.float64):
        if sigma >= t:
            break
        if prev is None:
            y = np.exp(beta)
        else:
            y = y * np.exp(alpha * (sigma - prev)) + np.exp(beta)
        prev = sigma
    if prev is None:
        return 0.0
    return float(y * np.exp(alpha * (t - prev)))


class _ExpState:
    """Markov state of one exponential filter term: value just after last update."""

    def __init__(self, flt: ExpFilter) -> None:
        self.alpha = flt.alpha
        self.jump = float(np.exp(flt.beta))
        self.value = 0.0
        self.time = 0.0

    def at(self, t: float) -> float:
        return self.value * float(np.exp(self.alpha * (t - self.time)))

    def register_event(self, t: float) -> None:
        self.value = self.at(t) + self.jump
        self.time = t


def _simulate_trial(cfg: SimConfig, rng: np.random.Generator) -> Trial:
    channels = cfg.channels
    events: dict[str, list[float]] = {ch: [] for ch in channels}
    exp_states: dict[tuple[str, str], _ExpState] = {}
    tab_filters: dict[tuple[str, str], TabulatedFilter] = {}
    for pair, flt in cfg.filters.items():
        if isinstance(flt, ExpFilter):
            exp_states[pair] = _ExpState(flt)
        else:
            tab_filters[pair] = flt

    def predictor(target: str, t: float) -> float:
        x = cfg.baseline_of(target)
        for (tgt, src), state in exp_states.items():
            if tgt == target:
                x += state.at(t)
        for (tgt, src), flt in tab_filters.items():
            if tgt == target:
                src_events = events[src]
                cut = bisect.bisect_left(src_events, t - flt.support)
                recent = np.asarray(src_events[cut:])
                if len(recent):
                    x += float(np.sum(flt.at(t - recent)))
        return x

    def predictor_bound(target: str, t: float) -> float:
        x = cfg.baseline_of(target)
        for (tgt, src), state in exp_states.items():
            if tgt == target:
                x += state.at(t)
        for (tgt, src), flt in tab_filters.items():
            if tgt == target:
                src_events = events[src]
                cut = bisect.bisect_left(src_events, t - flt.support)
                x += (len(src_events) - cut) * flt.max_positive
        return x

    t = 0.0
    total = 0
    while True:
        bounds = np.array(
            [cfg.link_of(ch).phi(predictor_bound(ch, t))[0] for ch in channels]
        )
        total_bound = float(np.maximum(bounds, 0.0).sum())
        if not np.isfinite(total_bound):
            raise ExplosionError(
                f"dominating rate overflowed at t={t:.3f}; "
                "the link/filter combination appears unstable"
            )
        if total_bound <= 0.0:
            break
        wait = rng.exponential(1.0 / total_bound)
        t_cand = t + wait
        if t_cand <= t:
            # the wait underflowed float resolution: intensity has diverged
            raise ExplosionError(
                f"intensity diverged near t={t:.6f}; "
                "the link/filter combination appears unstable"
            )
        if t_cand >= cfg.t_end:
            break
        lam = np.array([cfg.link_of(ch).phi(predictor(ch, t_cand))[0] for ch in channels])
        lam = np.maximum(lam, 0.0)  # identity link can go negative; the rate cannot
        mark = rng.uniform(0.0, total_bound)
        cum = np.cumsum(lam)
        if mark < cum[-1]:
            idx = int(np.searchsorted(cum, mark, side="right"))
            accepted = channels[idx]
            events[accepted].append(t_cand)
            for (tgt, src), state in exp_states.items():
                if src == accepted:
                    state.register_event(t_cand)
            total += 1
            if total > cfg.explosion_cap:
                raise ExplosionError(
                    f"more than {cfg.explosion_cap} events before t={t_cand:.3f}; "
                    "the link/filter combination appears unstable"
                )
        t = t_cand
    return Trial(
        t_end=cfg.t_end,
        events={ch: np.asarray(times) for ch, times in events.items()},
    )


def thinning_simulate(cfg: SimConfig) -> EventData:
    """One seeded trial on [0, t_end]."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    return EventData([_simulate_trial(cfg, rng)], list(cfg.channels))


def simulate_trials(cfg: SimConfig, n_trials: int) -> EventData:
    """Independent replications from sequential substreams of the seed."""
    if n_trials < 1:
        raise ValueError("need at least one trial")
    children = np.random.SeedSequence(cfg.seed).spawn(n_trials)
    trials = [_simulate_trial(cfg, np.random.default_rng(child)) for child in children]
    return EventData(trials, list(cfg.channels))


def compensator_increments(trial: Trial, cfg: SimConfig, target: str) -> np.ndarray:
    """Integrated intensity between consecutive target events (identity link,
    exponential filters only); increments are Exp(1) under the true model."""
    if cfg.link_of(target).family != "identity":
        raise ValueError("closed-form compensator requires the identity link")
    taus = trial.events[target]
    if len(taus) < 2:
        return np.empty(0)
    mu = cfg.baseline_of(target)

    def integral(a: float, b: float) -> float:
        out = mu * (b - a)
        for (tgt, src), flt in cfg.filters.items():
            if tgt != target:
                continue
            if not isinstance(flt, ExpFilter):
                raise ValueError("closed-form compensator requires exponential filters")
            sigmas = trial.events[src]
            sigmas = sigmas[sigmas < b]
            if len(sigmas) == 0:
                continue
            lo = np.maximum(a, sigmas)
            out += float(
                np.sum(
                    np.exp(flt.beta)
                    * (np.exp(flt.alpha * (lo - sigmas)) - np.exp(flt.alpha * (b - sigmas)))
                    / (-flt.alpha)
                )
            )
        return out

    return np.array([integral(taus[k], taus[k + 1]) for k in range(len(taus) - 1)])
