"""Event-level simulation of the quantum channel, producing QTAG streams.

Symbols are processed in fixed-size batches.  Batch ``b`` draws from its own
generator seeded by ``SeedSequence(seed, spawn_key=(1, b))``, so the output
does not depend on how many worker threads process the batches.  The
non-paralyzable dead time couples neighbouring events and is applied in a
single sequential pass over the merged, time-sorted stream.

Timing convention: symbol ``k`` occupies ``[offset + k*P, offset + (k+1)*P)``
and its signal light sits in the centered window of width ``w*P``.  The
clock phase reported in :class:`RunTruth` is the window center modulo ``P``,
which is what :func:`coexqkd.tagproc.recover_clock_phase` estimates.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bb84 import Basis, PolState, measure
from .tagfile import TagStream

SIGNAL, DARK, RAMAN, LEAKAGE = 0, 1, 2, 3
LABEL_NAMES = ("signal", "dark", "raman", "leakage")

_FRAME_KEY = (0,)
_BATCH_KEY = 1


@dataclass(frozen=True)
class Physics:
    """Detector-side rates driving one run.

    ``raman_photon_rate`` and ``leakage_photon_rate`` are photons/s at the
    detector input; the efficiency thins them just like the signal.
    """

    mu_arrival: float
    efficiency: float = 0.10
    dead_time_s: float = 25e-6
    dark_rate_cps: float = 485.0
    raman_photon_rate: float = 0.0
    leakage_photon_rate: float = 0.0
    e_opt: float = 0.0
    window_fraction: float = 0.5
    signal_window_acceptance: float = 1.0

    def __post_init__(self):
        if min(self.mu_arrival, self.dark_rate_cps, self.raman_photon_rate,
               self.leakage_photon_rate, self.dead_time_s) < 0:
            raise ValueError("rates and dead time must be >= 0")
        if not 0 <= self.efficiency <= 1:
            raise ValueError("efficiency must lie in [0, 1]")
        if not 0 <= self.e_opt <= 0.5:
            raise ValueError("e_opt must lie in [0, 0.5]")
        if not 0 < self.window_fraction <= 1:
            raise ValueError("window fraction must lie in (0, 1]")
        if not 0 <= self.signal_window_acceptance <= 1:
            raise ValueError("signal window acceptance must lie in [0, 1]")


@dataclass(frozen=True)
class RunConfig:
    seed: int
    n_symbols: int
    physics: Physics
    symbol_period_ps: int = 10_000
    frame_length: int = 1024
    pattern: np.ndarray | None = None
    pattern_offset: int = 0
    receiver_basis: Basis = Basis.CIRCULAR
    receiver_bit: int = 0
    clock_phase_offset_ps: int = 0
    batch_symbols: int = 1 << 20
    workers: int = 1

    def __post_init__(self):
        if self.n_symbols < 1:
            raise ValueError("n_symbols must be >= 1")
        if self.symbol_period_ps <= 0:
            raise ValueError("symbol period must be positive")
        if not 0 <= self.clock_phase_offset_ps < self.symbol_period_ps:
            raise ValueError("clock phase offset must lie in [0, symbol_period)")
        if self.batch_symbols < 1 or self.workers < 1:
            raise ValueError("batch size and worker count must be >= 1")
        if self.receiver_bit not in (0, 1):
            raise ValueError("receiver bit must be 0 or 1")
        object.__setattr__(self, "receiver_basis", Basis.parse(self.receiver_basis))
        if self.pattern is not None:
            pat = np.asarray(self.pattern, dtype=np.int8)
            if pat.ndim != 1 or pat.size < 1 or pat.min() < 0 or pat.max() > 3:
                raise ValueError("pattern must be a non-empty sequence of states 0..3")
            object.__setattr__(self, "pattern", pat)
            object.__setattr__(self, "frame_length", pat.size)
        elif self.frame_length < 1:
            raise ValueError("frame length must be >= 1")
        if not 0 <= self.pattern_offset < self.frame_length:
            raise ValueError("pattern offset must lie in [0, frame_length)")

    @property
    def receiver_state(self) -> PolState:
        return PolState.of(self.receiver_basis, self.receiver_bit)

    @property
    def duration_ps(self) -> int:
        return self.n_symbols * self.symbol_period_ps

    def frame(self) -> np.ndarray:
        if self.pattern is not None:
            return self.pattern
        return reference_frame(self.seed, self.frame_length)


@dataclass(frozen=True, eq=False)
class RunTruth:
    frame: np.ndarray
    pattern_offset: int
    clock_phase_ps: float
    frame_offset: int
    duration_ps: int
    emitted_times: np.ndarray
    emitted_labels: np.ndarray
    kept: np.ndarray = field(repr=False)

    @property
    def labels(self) -> np.ndarray:
        """Origin label of every tag in the output stream."""
        return self.emitted_labels[self.kept]

    def counts(self, kept_only: bool = True) -> dict[str, int]:
        labels = self.labels if kept_only else self.emitted_labels
        n = np.bincount(labels, minlength=len(LABEL_NAMES))
        return {name: int(n[i]) for i, name in enumerate(LABEL_NAMES)}


def reference_frame(seed: int, length: int = 1024) -> np.ndarray:
    """Deterministic shuffled frame of BB84 states (0..3) for a given seed.

    The four states appear equally often (to within one when ``length`` is
    not a multiple of 4), so the frame-averaged click and error rates equal
    the ensemble values the analytic model uses.
    """
    if length < 1:
        raise ValueError("frame length must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=_FRAME_KEY))
    return rng.permutation(np.arange(length) % 4).astype(np.int8)


def apply_dead_time(times: np.ndarray, dead_time_ps: int) -> np.ndarray:
    """Boolean mask of events surviving a non-paralyzable dead time.

    ``times`` must be sorted.  Coincident events collapse to one even with a
    zero dead time so the output is strictly increasing.
    """
    n = times.size
    kept = np.zeros(n, dtype=bool)
    gap = max(int(dead_time_ps), 1)
    i = 0
    while i < n:
        kept[i] = True
        i = int(np.searchsorted(times, times[i] + gap, side="left"))
    return kept


def poisson_times(rng: np.random.Generator, rate_cps: float, start_ps: int, stop_ps: int) -> np.ndarray:
    """Homogeneous Poisson arrival times (integer ps) on ``[start, stop)``."""
    span = stop_ps - start_ps
    if rate_cps <= 0 or span <= 0:
        return np.empty(0, dtype=np.int64)
    n = rng.poisson(rate_cps * span * 1e-12)
    return start_ps + np.floor(rng.random(n) * span).astype(np.int64)


def _signal_offsets(rng, n, period, window_fraction, acceptance):
    """Offsets (ps) of signal tags within their symbol slot."""
    width = window_fraction * period
    lead = 0.5 * (period - width)
    v = rng.random(n)
    inside = rng.random(n) < acceptance if acceptance < 1 else np.ones(n, dtype=bool)
    out = lead + v * width
    if not inside.all():
        x = v[~inside] * (period - width)
        out[~inside] = np.where(x < lead, x, x + width)
    return np.floor(out).astype(np.int64)


def _simulate_batch(cfg: RunConfig, frame: np.ndarray, b: int):
    ph = cfg.physics
    period = cfg.symbol_period_ps
    k0 = b * cfg.batch_symbols
    k1 = min(cfg.n_symbols, k0 + cfg.batch_symbols)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_BATCH_KEY, b)))

    # Poisson photon counts per symbol, drawn as one Poisson total spread
    # uniformly over the batch's symbols (same joint distribution)
    n_ph = rng.poisson(ph.mu_arrival * ph.efficiency * (k1 - k0))
    sym = k0 + rng.integers(0, k1 - k0, size=n_ph)
    states = frame[(sym + cfg.pattern_offset) % frame.size]
    outcome = measure(states, cfg.receiver_basis, ph.e_opt, rng.random(n_ph))
    sym = sym[np.atleast_1d(outcome) == cfg.receiver_bit]
    sig = (cfg.clock_phase_offset_ps + sym * period
           + _signal_offsets(rng, sym.size, period, ph.window_fraction, ph.signal_window_acceptance))

    t0, t1 = k0 * period, k1 * period
    dark = poisson_times(rng, ph.dark_rate_cps, t0, t1)
    raman = poisson_times(rng, ph.raman_photon_rate * ph.efficiency, t0, t1)
    leak = poisson_times(rng, ph.leakage_photon_rate * ph.efficiency, t0, t1)

    times = np.concatenate([sig, dark, raman, leak])
    labels = np.concatenate([
        np.full(sig.size, SIGNAL, np.int8), np.full(dark.size, DARK, np.int8),
        np.full(raman.size, RAMAN, np.int8), np.full(leak.size, LEAKAGE, np.int8),
    ])
    return times, labels


def simulate_quantum_run(cfg: RunConfig) -> tuple[TagStream, RunTruth]:
    """Simulate one run; fully determined by ``cfg`` (including its seed)."""
    frame = cfg.frame()
    n_batches = -(-cfg.n_symbols // cfg.batch_symbols)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda b: _simulate_batch(cfg, frame, b), range(n_batches)))
    else:
        parts = [_simulate_batch(cfg, frame, b) for b in range(n_batches)]

    times = np.concatenate([p[0] for p in parts])
    labels = np.concatenate([p[1] for p in parts])
    order = np.argsort(times, kind="stable")
    times, labels = times[order], labels[order]
    kept = apply_dead_time(times, round(cfg.physics.dead_time_s * 1e12))

    stream = TagStream(times[kept].astype(np.uint64), np.zeros(int(kept.sum()), np.uint8),
                       cfg.symbol_period_ps)

    period = cfg.symbol_period_ps
    center = cfg.clock_phase_offset_ps + period / 2
    wrapped = int(center >= period)
    truth = RunTruth(
        frame=frame,
        pattern_offset=cfg.pattern_offset,
        clock_phase_ps=center - wrapped * period,
        # tagproc numbers symbols by the nearest window center, which lags
        # the simulator's slot index by one when the center wraps
        frame_offset=(cfg.pattern_offset - wrapped) % frame.size,
        duration_ps=cfg.duration_ps,
        emitted_times=times,
        emitted_labels=labels,
        kept=kept,
    )
    return stream, truth
