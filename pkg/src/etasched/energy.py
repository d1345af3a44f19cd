"""Energy-event detection, predictability metrics and the capacitor store.

An *energy event* is the generation of at least ``k_joules`` within a window
of ``t_slots`` consecutive slots of a harvest trace.  The conditional
energy-event curve CEE(N) gives the probability of an event given the N
immediately preceding slots were all events (N > 0) or all non-events
(N < 0).  A perfectly persistent source has a flat curve at 1; a memoryless
source has a flat curve at its event rate.

Distances between CEE curves are mean absolute differences over the
2*n_max support points (``kw_distance``).  The predictability factor
eta compares the harvester's distance-to-persistent against the
distance-to-persistent of a memoryless source with the same event rate:
1 means persistent power, 0 means the events carry no memory, negative
values mean anti-correlated events.  The eta pipeline measures those
distances on the positive-run support (``side="positive"``): comparing the
N < 0 half against the flat-1 persistent curve would penalise exactly the
sources whose quiet periods are most predictable, collapsing every
symmetric bursty source onto the memoryless baseline.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientEnergyError, ValidationError

DEFAULT_N_MAX = 20

__all__ = [
    "DEFAULT_N_MAX",
    "EnergyTrace",
    "EventParams",
    "EventSeries",
    "CeeCurve",
    "HarvesterProfile",
    "Capacitor",
    "detect_events",
    "compute_cee",
    "reference_persistent",
    "reference_random",
    "kw_distance",
    "eta_factor",
    "analyze_events",
    "analyze_trace",
    "capacitor_step",
    "read_trace_csv",
    "write_trace_csv",
]


@dataclass(frozen=True)
class EnergyTrace:
    """Per-slot harvested energy in joules."""

    slot_duration: float
    harvest: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.harvest, dtype=float)
        if self.slot_duration <= 0:
            raise ValidationError("slot_duration must be positive")
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("harvest must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValidationError("harvest values must be finite and >= 0")
        object.__setattr__(self, "harvest", arr)

    def __len__(self) -> int:
        return self.harvest.size


@dataclass(frozen=True)
class EventParams:
    """Energy-event definition: at least k_joules within t_slots."""

    k_joules: float
    t_slots: int

    def __post_init__(self):
        if self.k_joules <= 0:
            raise ValidationError("k_joules must be > 0")
        if int(self.t_slots) != self.t_slots or self.t_slots < 1:
            raise ValidationError("t_slots must be an integer >= 1")


@dataclass(frozen=True)
class EventSeries:
    """Boolean event indicator, one per window position."""

    events: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.events, dtype=bool)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("events must be a non-empty 1-D sequence")
        object.__setattr__(self, "events", arr)

    def __len__(self) -> int:
        return self.events.size

    @property
    def rate(self) -> float:
        return float(self.events.mean())


@dataclass(frozen=True)
class CeeCurve:
    """CEE values over N in {-n_max..-1, 1..n_max}; no entry for N = 0.

    ``fallback_rate`` is the unconditional event rate, substituted where a
    conditioning run never occurs in the data.
    """

    n_max: int
    values: dict[int, float]
    fallback_rate: float

    def __post_init__(self):
        if self.n_max < 1:
            raise ValidationError("n_max must be >= 1")
        support = set(range(-self.n_max, 0)) | set(range(1, self.n_max + 1))
        if set(self.values) != support:
            raise ValidationError("values must cover exactly -n_max..-1 and 1..n_max")
        for n, v in self.values.items():
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"CEE({n}) = {v} outside [0, 1]")
        if not 0.0 <= self.fallback_rate <= 1.0:
            raise ValidationError("fallback_rate outside [0, 1]")


@dataclass(frozen=True)
class HarvesterProfile:
    """Summary of a trace: event rate, curve distances and the eta factor.

    ``persistent_source`` flags the degenerate case kw_random_to_persistent=0
    (event rate 1), where eta is 1 by convention.
    """

    event_rate: float
    kw_to_persistent: float
    kw_random_to_persistent: float
    eta: float
    cee: CeeCurve
    persistent_source: bool = False

    def to_json_dict(self) -> dict:
        return {
            "event_rate": self.event_rate,
            "kw_h": self.kw_to_persistent,
            "kw_r": self.kw_random_to_persistent,
            "eta": self.eta,
            "persistent_source": self.persistent_source,
            "cee": {str(n): v for n, v in sorted(self.cee.values.items())},
        }


@dataclass(frozen=True)
class Capacitor:
    """Energy store with operating thresholds e_man <= e_opt <= capacity."""

    capacity: float
    charge: float
    e_man: float
    e_opt: float

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValidationError("capacity must be > 0")
        if not 0 <= self.charge <= self.capacity:
            raise ValidationError("charge outside [0, capacity]")
        if not 0 <= self.e_man <= self.e_opt <= self.capacity:
            raise ValidationError("thresholds must satisfy 0 <= e_man <= e_opt <= capacity")


def detect_events(trace: EnergyTrace, params: EventParams) -> EventSeries:
    """Slide a t_slots window (stride 1) and mark windows harvesting >= k_joules."""
    t = params.t_slots
    if len(trace) < t:
        raise ValidationError(f"trace length {len(trace)} shorter than window {t}")
    windows = np.lib.stride_tricks.sliding_window_view(trace.harvest, t)
    return EventSeries(windows.sum(axis=1) >= params.k_joules)


def compute_cee(events: EventSeries, n_max: int) -> CeeCurve:
    """Empirical CEE curve of an event series.

    For N > 0, CEE(N) = (# slots preceded by N consecutive events that are
    events) / (# slots preceded by N consecutive events); N < 0 conditions on
    N consecutive non-events.  Slots whose conditioning run never occurs take
    the unconditional event rate.
    """
    e = events.events
    if len(e) <= n_max:
        raise ValidationError("events length must exceed n_max")
    rate = events.rate
    values: dict[int, float] = {}
    as_int = e.astype(np.int64)
    for n in range(1, n_max + 1):
        # runs[j] == True: slots j..j+n-1 are all events; prediction slot is j+n
        run_sums = np.convolve(as_int, np.ones(n, dtype=np.int64), mode="valid")
        for sign, target in ((1, n), (-1, 0)):
            runs = run_sums[: len(e) - n] == target
            den = int(runs.sum())
            if den == 0:
                values[sign * n] = rate
            else:
                num = int(e[n:][runs].sum())
                values[sign * n] = num / den
    return CeeCurve(n_max=n_max, values=values, fallback_rate=rate)


def reference_persistent(n_max: int) -> CeeCurve:
    """Curve of an uninterrupted source: every entry 1."""
    support = list(range(-n_max, 0)) + list(range(1, n_max + 1))
    return CeeCurve(n_max=n_max, values={n: 1.0 for n in support}, fallback_rate=1.0)


def reference_random(p: float, n_max: int) -> CeeCurve:
    """Curve of a memoryless source with event rate p: every entry p."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError("p must be a probability")
    support = list(range(-n_max, 0)) + list(range(1, n_max + 1))
    return CeeCurve(n_max=n_max, values={n: float(p) for n in support}, fallback_rate=float(p))


def kw_distance(h: CeeCurve, p: CeeCurve, side: str = "both") -> float:
    """Mean absolute gap between two CEE curves of equal n_max.

    ``side`` selects the support: "both" (default) averages over all
    2*n_max points, "positive" over N = 1..n_max only (the support used by
    the eta pipeline).
    """
    if h.n_max != p.n_max:
        raise ValidationError(f"curves have different n_max: {h.n_max} != {p.n_max}")
    if side == "both":
        support = list(range(-h.n_max, 0)) + list(range(1, h.n_max + 1))
    elif side == "positive":
        support = list(range(1, h.n_max + 1))
    else:
        raise ValidationError(f"unknown side {side!r}")
    return float(np.mean([abs(h.values[n] - p.values[n]) for n in support]))


def eta_factor(kw_h: float, kw_r: float) -> float:
    """Predictability factor (kw_r - kw_h) / kw_r.

    kw_r = 0 means the source itself is persistent; by convention eta is 1
    (callers flag this via HarvesterProfile.persistent_source).  May be
    negative for sources less predictable than memoryless.
    """
    if kw_h < 0 or kw_r < 0:
        raise ValidationError("distances must be non-negative")
    if kw_r == 0:
        return 1.0
    return (kw_r - kw_h) / kw_r


def analyze_events(events: EventSeries, n_max: int = DEFAULT_N_MAX) -> HarvesterProfile:
    """Profile an event series: CEE curve, distances, event rate, eta."""
    cee = compute_cee(events, n_max)
    rate = events.rate
    persistent = reference_persistent(n_max)
    kw_h = kw_distance(cee, persistent, side="positive")
    kw_r = kw_distance(reference_random(rate, n_max), persistent, side="positive")
    return HarvesterProfile(
        event_rate=rate,
        kw_to_persistent=kw_h,
        kw_random_to_persistent=kw_r,
        eta=eta_factor(kw_h, kw_r),
        cee=cee,
        persistent_source=(kw_r == 0),
    )


def analyze_trace(
    trace: EnergyTrace, params: EventParams, n_max: int = DEFAULT_N_MAX
) -> HarvesterProfile:
    """detect_events then analyze_events."""
    return analyze_events(detect_events(trace, params), n_max)


def capacitor_step(
    cap: Capacitor, harvested: float, consumed: float
) -> tuple[Capacitor, float]:
    """One slot of capacitor dynamics; returns (new state, overflow waste).

    Energy is conserved: new charge + consumed + wasted = charge + harvested.
    """
    if harvested < 0 or consumed < 0:
        raise ValidationError("harvested and consumed must be >= 0")
    available = cap.charge + harvested
    if consumed > available:
        raise InsufficientEnergyError(
            f"consumed {consumed} exceeds available {available}"
        )
    balance = available - consumed
    wasted = max(0.0, balance - cap.capacity)
    new_charge = min(cap.capacity, balance)
    return (
        Capacitor(capacity=cap.capacity, charge=new_charge, e_man=cap.e_man, e_opt=cap.e_opt),
        wasted,
    )


def read_trace_csv(path: str | Path, slot_duration: float = 1.0) -> EnergyTrace:
    """Read a trace CSV with header ``slot,joules`` and consecutive slots from 0."""
    rows = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header[:2]] != ["slot", "joules"]:
                raise ValidationError(f"{path}: expected header 'slot,joules'")
            for lineno, row in enumerate(reader):
                if not row:
                    continue
                try:
                    slot, joules = int(row[0]), float(row[1])
                except (IndexError, ValueError) as exc:
                    raise ValidationError(f"{path}: bad row {lineno + 2}: {row!r}") from exc
                rows.append((slot, joules))
    except OSError as exc:
        raise ValidationError(f"cannot read trace: {exc}") from exc
    if not rows:
        raise ValidationError(f"{path}: empty trace")
    slots = [s for s, _ in rows]
    if slots != list(range(len(rows))):
        raise ValidationError(f"{path}: slot indices must be consecutive from 0")
    return EnergyTrace(slot_duration=slot_duration, harvest=np.array([j for _, j in rows]))


def write_trace_csv(trace: EnergyTrace, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot", "joules"])
        for i, j in enumerate(trace.harvest):
            writer.writerow([i, repr(float(j))])
