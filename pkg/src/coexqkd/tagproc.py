"""Offline tag-stream processing: clock phase, temporal filter, frame sync, QBER.

Symbols are numbered by the nearest window center,
``index = floor((t - phase)/P + 1/2)``, and the reference pattern is applied
as ``frame[(index + frame_offset) % len(frame)]``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .bb84 import PolState, state_basis, state_bit
from .errors import InsufficientStatistics, SyncFailure, UndefinedQBER
from .tagfile import TagStream

MIN_PHASE_TAGS = 100


class PhaseEstimate(NamedTuple):
    phase_ps: float
    score: float


@dataclass(frozen=True)
class SyncResult:
    clock_phase: float
    frame_offset: int
    correlation_score: float
    phase_score: float = float("nan")


@dataclass(frozen=True)
class FilterResult:
    times: np.ndarray
    symbol_index: np.ndarray
    rejected: int

    @property
    def accepted(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class EstimationReport:
    accepted_tags: int
    rejected_tags: int
    clicks: int
    sifted_bits: int
    errors: int
    qber: float
    raw_rate: float
    duration_s: float

    CSV_FIELDS = ("accepted_tags", "rejected_tags", "clicks", "sifted_bits", "errors",
                  "qber", "raw_rate_cps", "duration_s")

    def csv_row(self) -> list[str]:
        return [str(self.accepted_tags), str(self.rejected_tags), str(self.clicks),
                str(self.sifted_bits), str(self.errors), f"{self.qber:.9g}",
                f"{self.raw_rate:.9g}", f"{self.duration_s:.9g}"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_FIELDS)
        writer.writerow(self.csv_row())
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            f"tags accepted / rejected : {self.accepted_tags} / {self.rejected_tags}",
            f"clicks (1 per symbol)    : {self.clicks}",
            f"sifted bits / errors     : {self.sifted_bits} / {self.errors}",
            f"QBER                     : {100 * self.qber:.3f} %",
            f"raw rate                 : {self.raw_rate:.1f} cts/s over {self.duration_s:.6g} s",
            "multi-click symbols count once (first tag wins)",
        ]
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return asdict(self)


def _phases(timestamps, period):
    ts = np.asarray(timestamps)
    if ts.dtype.kind == "u":
        return (ts % np.uint64(period)).astype(float)
    return np.mod(ts.astype(float), period)


def recover_clock_phase(timestamps, symbol_period_ps: int, n_bins: int = 64,
                        window_fraction: float = 0.5) -> PhaseEstimate:
    """Estimate the center of the signal lobe modulo the symbol period.

    Timestamps are folded into ``n_bins`` bins; the circular window of
    ``window_fraction * n_bins`` bins with the largest count locates the
    lobe coarsely, then the circular mean of the tags inside the lobe (plus
    one bin of margin) is iterated to convergence.

    The score is the excess fraction of tags in the best window over what a
    flat background would put there, scaled to 1 for a perfectly confined
    lobe; values near 0 mean there is no lobe to find.
    """
    n = len(timestamps)
    if n < MIN_PHASE_TAGS:
        raise InsufficientStatistics(n, MIN_PHASE_TAGS)
    period = float(symbol_period_ps)
    ph = _phases(timestamps, symbol_period_ps)
    bins = np.minimum((ph * n_bins / period).astype(np.int64), n_bins - 1)
    hist = np.bincount(bins, minlength=n_bins)
    k = min(max(1, round(window_fraction * n_bins)), n_bins)
    wrapped = np.concatenate([hist, hist[:k - 1]])
    sums = np.convolve(wrapped, np.ones(k, dtype=np.int64), mode="valid")[:n_bins]
    start = int(np.argmax(sums))
    bin_width = period / n_bins
    est = ((start + k / 2) * bin_width) % period

    half = 0.5 * window_fraction * period + bin_width
    for _ in range(100):
        d = np.mod(ph - est + period / 2, period) - period / 2
        sel = (d >= -half) & (d < half)
        if not sel.any():
            break
        shift = float(d[sel].mean())
        est = (est + shift) % period
        if abs(shift) < 1e-6:
            break

    flat = k / n_bins
    score = (sums[start] / n - flat) / (1 - flat) if flat < 1 else 0.0
    return PhaseEstimate(float(est), float(score))


def temporal_filter(timestamps, phase_ps: float, symbol_period_ps: int,
                    window_fraction: float = 0.5) -> FilterResult:
    """Keep tags whose offset from the clock phase lies in the centered window.

    The window is ``[-w*P/2, +w*P/2)`` around ``phase`` (closed below, open
    above).  Accepted tags are labelled with their symbol index.
    """
    period = float(symbol_period_ps)
    if not 0 <= phase_ps < period:
        raise ValueError("phase must lie in [0, symbol_period)")
    if not 0 < window_fraction <= 1:
        raise ValueError("window fraction must lie in (0, 1]")
    ts = np.asarray(timestamps)
    t = ts.astype(float)
    width = window_fraction * period
    u = np.mod(t - phase_ps + width / 2, period)
    u = np.where(u >= period, u - period, u)
    keep = u < width
    kept_t = ts[keep]
    index = np.floor((t[keep] - phase_ps) / period + 0.5).astype(np.int64)
    return FilterResult(kept_t, index, int(ts.size - keep.sum()))


def first_clicks(symbol_index: np.ndarray) -> np.ndarray:
    """Unique symbol indices, one per symbol (first tag in time order wins)."""
    uniq, first = np.unique(symbol_index, return_index=True)
    return symbol_index[np.sort(first)]


def frame_align(symbol_index, detected_states, reference_frame, max_search: int | None = None,
                score_floor: float = 0.6, clock_phase: float = float("nan")) -> SyncResult:
    """Find the cyclic shift that best explains the detected states.

    For each candidate shift ``s`` only clicks whose detected basis matches
    the reference basis at ``(index + s) % F`` count; the score is the
    fraction of those whose bit also matches.  Ties go to the smallest shift.
    """
    ref = np.asarray(reference_frame, dtype=np.int64)
    F = ref.size
    idx = np.asarray(symbol_index, dtype=np.int64)
    det = np.broadcast_to(np.asarray(detected_states, dtype=np.int64), idx.shape)
    if idx.size == 0 or idx.max() - idx.min() + 1 < F:
        raise InsufficientStatistics(int(idx.size and idx.max() - idx.min() + 1), F)
    n_shifts = F if max_search is None else min(max_search, F)

    counts = np.bincount(det * F + idx % F, minlength=4 * F).reshape(4, F)
    shifts = np.arange(n_shifts)
    shifted = ref[(np.arange(F)[None, :] + shifts[:, None]) % F]
    shifted_basis = shifted >> 1
    sifted = np.zeros(n_shifts, dtype=np.int64)
    matches = np.zeros(n_shifts, dtype=np.int64)
    for d in range(4):
        c = counts[d]
        if not c.any():
            continue
        sifted += (shifted_basis == (d >> 1)).astype(np.int64) @ c
        matches += (shifted == d).astype(np.int64) @ c
    with np.errstate(invalid="ignore", divide="ignore"):
        score = np.where(sifted > 0, matches / np.maximum(sifted, 1), 0.0)
    best = int(np.argmax(score))
    if score[best] < score_floor:
        raise SyncFailure(float(score[best]), best, score_floor)
    return SyncResult(clock_phase, best, float(score[best]))


def estimate_qber(symbol_index, reference_frame, frame_offset: int, receiver_state: PolState,
                  duration_s: float, rejected: int = 0) -> EstimationReport:
    """Sift clicks against the reference pattern and count errors.

    ``symbol_index`` holds the accepted tags in time order; repeated symbols
    count once.
    """
    idx = np.asarray(symbol_index, dtype=np.int64)
    clicks = first_clicks(idx)
    ref = np.asarray(reference_frame, dtype=np.int64)
    tx = ref[(clicks + frame_offset) % ref.size]
    rx = PolState(receiver_state)
    sifted = state_basis(tx) == rx.basis
    errors = sifted & (state_bit(tx) != rx.bit)
    n_sift = int(sifted.sum())
    if n_sift == 0:
        raise UndefinedQBER("no sifted clicks")
    return EstimationReport(
        accepted_tags=int(idx.size),
        rejected_tags=int(rejected),
        clicks=int(clicks.size),
        sifted_bits=n_sift,
        errors=int(errors.sum()),
        qber=float(errors.sum()) / n_sift,
        raw_rate=clicks.size / duration_s,
        duration_s=float(duration_s),
    )


def analyze_stream(stream: TagStream, reference_frame, receiver_state: PolState,
                   window_fraction: float = 0.5, duration_s: float | None = None,
                   channel: int = 0, n_bins: int = 64,
                   score_floor: float = 0.6) -> tuple[SyncResult, EstimationReport]:
    """Phase recovery, temporal filtering, frame alignment and QBER estimation."""
    ts = stream.channel(channel)
    period = stream.symbol_period_ps
    phase = recover_clock_phase(ts, period, n_bins, window_fraction)
    filtered = temporal_filter(ts, phase.phase_ps, period, window_fraction)
    clicks = first_clicks(filtered.symbol_index)
    sync = frame_align(clicks, int(receiver_state), reference_frame, score_floor=score_floor,
                       clock_phase=phase.phase_ps)
    sync = SyncResult(sync.clock_phase, sync.frame_offset, sync.correlation_score, phase.score)
    if duration_s is None:
        last = int(ts[-1]) if ts.size else 0
        duration_s = (last // period + 1) * period * 1e-12
    report = estimate_qber(filtered.symbol_index, reference_frame, sync.frame_offset,
                           receiver_state, duration_s, rejected=filtered.rejected)
    return sync, report
