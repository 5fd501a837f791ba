"""Memory events, mode survival and the lifetime curve families.

A stimulus carries modes that share one openness ``n``.  When it arrives at
time ``t`` only the modes above the infrared threshold ``k_threshold(n, t)``
are stored; each stored mode then dies ``T_{k,n}`` after the recording
instant.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ClockError, DomainError, ParameterError, UnknownRecordError
from .formulas import (
    TWO_PI,
    Mode,
    ModelParams,
    check_order,
    domain_size,
    k_threshold,
    lambda_inverse,
    lifetime_lambda,
    recording_deadline,
)

DEFAULT_LAMBDA_MAX = 30.0


@dataclass(frozen=True)
class StimulusSpectrum:
    modes: tuple
    weights: Optional[tuple] = None

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise ParameterError("a stimulus spectrum needs at least one mode")
        if len({m.n for m in modes}) != 1:
            raise ParameterError("all modes of one stimulus must share the same n")
        object.__setattr__(self, "modes", modes)
        if self.weights is not None:
            weights = tuple(float(w) for w in self.weights)
            if len(weights) != len(modes):
                raise ParameterError("need exactly one weight per mode")
            if not all(math.isfinite(w) and w > 0 for w in weights):
                raise ParameterError("weights must be finite and > 0")
            object.__setattr__(self, "weights", weights)

    @classmethod
    def of(cls, n: int, ks: Iterable[float], weights=None) -> "StimulusSpectrum":
        return cls(tuple(Mode(k, n) for k in ks), None if weights is None else tuple(weights))

    @property
    def n(self) -> int:
        return self.modes[0].n

    def weight_of(self, i: int) -> float:
        return 1.0 if self.weights is None else self.weights[i]


@dataclass(frozen=True)
class MemoryRecord:
    id: int
    t_recorded: float
    spectrum: StimulusSpectrum
    modes: tuple
    death_times: tuple
    weights: tuple

    @property
    def n(self) -> int:
        return self.spectrum.n

    @property
    def empty(self) -> bool:
        return not self.modes

    @property
    def max_death_time(self) -> Optional[float]:
        return max(self.death_times) if self.death_times else None


class MemoryRegistry:
    """Append-only collection of memory records with a monotone clock."""

    def __init__(self, params: ModelParams, clock: float = 0.0):
        self.params = params
        self._clock = float(clock)
        self._records: tuple = ()
        self._lock = threading.Lock()

    @property
    def clock(self) -> float:
        return self._clock

    @property
    def records(self) -> tuple:
        return self._records

    def record_event(self, spectrum: StimulusSpectrum, t: float) -> MemoryRecord:
        t = float(t)
        with self._lock:
            if not math.isfinite(t) or t < self._clock:
                raise ClockError(f"event at t={t!r} precedes registry clock {self._clock!r}")
            threshold = float(k_threshold(spectrum.n, t, self.params))
            kept, deaths, weights = [], [], []
            for i, mode in enumerate(spectrum.modes):
                if mode.k < threshold:
                    continue
                window = recording_deadline(mode, self.params)
                if not window.recordable:
                    continue
                kept.append(mode)
                deaths.append(t + window.deadline)
                weights.append(spectrum.weight_of(i))
            record = MemoryRecord(
                id=len(self._records),
                t_recorded=t,
                spectrum=spectrum,
                modes=tuple(kept),
                death_times=tuple(deaths),
                weights=tuple(weights),
            )
            self._records = self._records + (record,)
            self._clock = t
            return record

    def get(self, record_id: int) -> MemoryRecord:
        records = self._records
        if not isinstance(record_id, int) or not 0 <= record_id < len(records):
            raise UnknownRecordError(record_id)
        return records[record_id]

    def alive_modes(self, record_id: int, t: float) -> frozenset:
        record = self.get(record_id)
        if t < record.t_recorded:
            raise DomainError(
                f"record {record_id} was made at t={record.t_recorded!r}, asked at t={t!r}")
        return frozenset(m for m, d in zip(record.modes, record.death_times) if d > t)

    def persistence_report(self, t: float) -> dict:
        """Per-record survival summary at time ``t``, most persistent first.

        Records are ranked by their latest death time, ties broken by the
        weight-averaged death time.  ``domain_size`` is the infrared cutoff
        length for the record's ``n`` at ``t``; ``mean_wavelength`` is the
        weight-averaged ``2*pi/k`` of the stored modes, the localisation proxy
        of the stored pattern itself.
        """
        t = float(t)
        if t < 0:
            raise DomainError("report time must be >= 0")
        rows = []
        visible = [r for r in self._records if r.t_recorded <= t]
        alive_sets = {}
        for rec in visible:
            alive = self.alive_modes(rec.id, t)
            alive_sets[rec.id] = alive
            total = len(rec.modes)
            if rec.modes:
                w = np.asarray(rec.weights)
                mean_death = float(np.dot(w, rec.death_times) / w.sum())
                mean_wavelength = float(np.dot(w, [TWO_PI / m.k for m in rec.modes]) / w.sum())
            else:
                mean_death = None
                mean_wavelength = None
            rows.append({
                "id": rec.id,
                "t_recorded": rec.t_recorded,
                "n": rec.n,
                "modes_recorded": total,
                "modes_alive": len(alive),
                "fraction_alive": (len(alive) / total) if total else 0.0,
                "empty": rec.empty,
                "max_death_time": rec.max_death_time,
                "mean_death_time": mean_death,
                "domain_size": float(domain_size(rec.n, t, self.params)),
                "mean_wavelength": mean_wavelength,
            })

        def rank_key(row):
            missing = row["max_death_time"] is None
            return (missing,
                    -(row["max_death_time"] or 0.0),
                    -(row["mean_death_time"] or 0.0),
                    row["id"])

        rows.sort(key=rank_key)
        for rank, row in enumerate(rows):
            row["rank"] = rank

        overlaps = []
        ids = sorted(alive_sets)
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                shared = alive_sets[a] & alive_sets[b]
                if shared:
                    overlaps.append({"records": [a, b], "shared_k": sorted(m.k for m in shared)})
        return {"t": t, "records": rows, "overlaps": overlaps}

    def to_dict(self) -> dict:
        return {
            "params": {"L": self.params.L, "c": self.params.c},
            "clock": self._clock,
            "events": [
                {
                    "t": r.t_recorded,
                    "n": r.n,
                    "k": [m.k for m in r.spectrum.modes],
                    "weights": None if r.spectrum.weights is None else list(r.spectrum.weights),
                }
                for r in self._records
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MemoryRegistry":
        """Rebuild a registry by replaying its stored events."""
        params = ModelParams(**data["params"])
        reg = cls(params)
        for ev in data["events"]:
            reg.record_event(StimulusSpectrum.of(ev["n"], ev["k"], ev.get("weights")), ev["t"])
        clock = float(data.get("clock", reg.clock))
        if clock < reg.clock:
            raise ClockError("stored clock precedes the last event")
        reg._clock = clock
        return reg


@dataclass(frozen=True)
class ScriptEvent:
    t: float
    spectrum: StimulusSpectrum


def parse_event_script(text: str) -> list:
    """Parse lines of the form ``t n k1,k2,... [w1,w2,...]``.

    Blank lines and ``#`` comments are ignored.  Events are returned in file
    order; ordering is enforced when they are replayed.
    """
    events = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise ParameterError(f"line {lineno}: expected 't n k1,k2,... [w1,w2,...]'")
        try:
            t = float(parts[0])
            n = int(parts[1])
            ks = [float(v) for v in parts[2].split(",") if v]
            weights = [float(v) for v in parts[3].split(",") if v] if len(parts) == 4 else None
        except ValueError as exc:
            raise ParameterError(f"line {lineno}: {exc}") from None
        try:
            events.append(ScriptEvent(t, StimulusSpectrum.of(check_order(n), ks, weights)))
        except ParameterError as exc:
            raise ParameterError(f"line {lineno}: {exc}") from None
    return events


@dataclass(frozen=True)
class LifetimeCurve:
    k: float
    n: int
    deadline: float
    t: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    clipped: bool = False


@dataclass(frozen=True)
class CurveFamily:
    curves: tuple
    skipped: tuple


def lifetime_curve(mode: Mode, params: ModelParams, t_grid: Sequence[float],
                   lambda_max: float = DEFAULT_LAMBDA_MAX) -> LifetimeCurve:
    """Sample ``Lambda_{k,n}`` on ``t_grid`` restricted to ``[0, T)``.

    The curve always starts at ``t = 0`` and is cut where ``Lambda`` reaches
    ``lambda_max``; the cut point itself is appended.
    """
    T = recording_deadline(mode, params).deadline
    grid = np.unique(np.asarray(t_grid, dtype=float))
    if np.any(grid < 0):
        raise DomainError("time grid must be >= 0")
    t_cut = lambda_inverse(lambda_max, mode, params)
    grid = grid[(grid < T) & (grid <= t_cut)]
    if len(grid) == 0 or grid[0] != 0.0:
        grid = np.concatenate(([0.0], grid))
    lam = np.asarray(lifetime_lambda(grid, mode, params), dtype=float).reshape(-1)
    clipped = False
    if t_cut < T and grid[-1] < t_cut:
        grid = np.append(grid, t_cut)
        lam = np.append(lam, lambda_max)
        clipped = True
    return LifetimeCurve(k=mode.k, n=mode.n, deadline=T, t=grid, lam=lam, clipped=clipped)


def _family(modes, params, t_grid, lambda_max):
    curves, skipped = [], []
    for mode in modes:
        if not recording_deadline(mode, params).recordable:
            skipped.append({"k": mode.k, "n": mode.n, "reason": "not recordable"})
            continue
        curves.append(lifetime_curve(mode, params, t_grid, lambda_max))
    return CurveFamily(curves=tuple(curves), skipped=tuple(skipped))


def fig1_curves(k_list, n: int, params: ModelParams, t_grid,
                lambda_max: float = DEFAULT_LAMBDA_MAX) -> CurveFamily:
    """Lifetime curves of several k modes at fixed openness ``n``."""
    return _family([Mode(k, n) for k in k_list], params, t_grid, lambda_max)


def fig2_curves(n_list, k: float, params: ModelParams, t_grid,
                lambda_max: float = DEFAULT_LAMBDA_MAX) -> CurveFamily:
    """Lifetime curves of one k mode for growing openness ``n``."""
    return _family([Mode(k, n) for n in n_list], params, t_grid, lambda_max)
