"""BB84 state algebra, QBER arithmetic, key distillation and AES renewal capacity.

Bit convention: R and D encode 0, L and A encode 1.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedQBER

QBER_THRESHOLD = 0.11

# secure fraction back-derived from 0.37 kb/s out of 1.33 kb/s
PAPER_FIXED_FRACTION = 0.2797


class Basis(enum.IntEnum):
    CIRCULAR = 0
    DIAGONAL = 1

    @property
    def conjugate(self) -> Basis:
        return Basis(1 - self)

    @classmethod
    def parse(cls, name) -> Basis:
        if isinstance(name, Basis):
            return name
        try:
            return cls[str(name).upper()]
        except KeyError:
            raise ValueError(f"unknown basis {name!r}; use 'circular' or 'diagonal'") from None


class PolState(enum.IntEnum):
    R = 0
    L = 1
    D = 2
    A = 3

    @property
    def basis(self) -> Basis:
        return Basis(self >> 1)

    @property
    def bit(self) -> int:
        return int(self) & 1

    @classmethod
    def of(cls, basis: Basis, bit: int) -> PolState:
        return cls(2 * int(basis) + int(bit))


def state_basis(states):
    """Basis index (0 circular, 1 diagonal) of integer-coded states."""
    return np.asarray(states) >> 1


def state_bit(states):
    return np.asarray(states) & 1


def measure(state, basis, e_opt: float, u):
    """Outcome bit of projecting ``state`` onto ``basis``.

    ``u`` is a uniform draw in [0, 1) supplied by the caller; everything is
    vectorized over ``state`` and ``u``.  A same-basis measurement returns
    the encoded bit unless ``u < e_opt``; a conjugate-basis measurement
    returns 0 or 1 with probability 1/2 each.
    """
    state = np.asarray(state)
    u = np.asarray(u, dtype=float)
    same = state_basis(state) == int(basis)
    flipped = state_bit(state) ^ (u < e_opt)
    random_bit = (u < 0.5).astype(np.int64)
    out = np.where(same, flipped, random_bit)
    return int(out) if out.ndim == 0 else out


def binary_entropy(p):
    """Binary Shannon entropy in bits, with h(0) = h(1) = 0."""
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0) | (p_arr > 1)) or np.any(np.isnan(p_arr)):
        raise ValueError(f"probability outside [0, 1]: {p}")
    inner = (p_arr > 0) & (p_arr < 1)
    q = np.where(inner, p_arr, 0.5)
    h = np.where(inner, -q * np.log2(q) - (1 - q) * np.log2(1 - q), 0.0)
    return float(h) if h.ndim == 0 else h


@dataclass(frozen=True)
class DistillationModel:
    """Secure-fraction model.

    Use the constructors :meth:`ideal_asymptotic`, :meth:`ec_efficiency` and
    :meth:`fixed_fraction`.
    """

    variant: str = "ideal_asymptotic"
    parameter: float = field(default=1.0)

    def __post_init__(self):
        if self.variant == "ec_efficiency" and self.parameter < 1:
            raise ValueError("error-correction efficiency f must be >= 1")
        if self.variant == "fixed_fraction" and not 0 <= self.parameter <= 1:
            raise ValueError("fixed secure fraction must lie in [0, 1]")
        if self.variant not in ("ideal_asymptotic", "ec_efficiency", "fixed_fraction"):
            raise ValueError(f"unknown distillation variant {self.variant!r}")

    @classmethod
    def ideal_asymptotic(cls) -> DistillationModel:
        return cls("ideal_asymptotic", 1.0)

    @classmethod
    def ec_efficiency(cls, f: float) -> DistillationModel:
        return cls("ec_efficiency", f)

    @classmethod
    def fixed_fraction(cls, r: float = PAPER_FIXED_FRACTION) -> DistillationModel:
        return cls("fixed_fraction", r)

    def describe(self) -> str:
        if self.variant == "ideal_asymptotic":
            return "ideal asymptotic 1 - 2 h2(Q)"
        if self.variant == "ec_efficiency":
            return f"1 - (1 + f) h2(Q), f = {self.parameter:g}"
        return f"fixed fraction r = {self.parameter:g} below Q = {QBER_THRESHOLD}"


def secure_fraction(q, model: DistillationModel = DistillationModel()):
    q_arr = np.asarray(q, dtype=float)
    if np.any((q_arr < 0) | (q_arr > 0.5)):
        raise ValueError(f"QBER outside [0, 0.5]: {q}")
    if model.variant == "fixed_fraction":
        out = np.where(q_arr < QBER_THRESHOLD, model.parameter, 0.0)
    else:
        f = 1.0 if model.variant == "ideal_asymptotic" else model.parameter
        out = np.maximum(0.0, 1.0 - (1.0 + f) * binary_entropy(q_arr))
    return float(out) if out.ndim == 0 else out


def secure_key_rate(raw_rate, q, model: DistillationModel = DistillationModel()):
    if np.any(np.asarray(raw_rate) < 0):
        raise ValueError("raw key rate must be >= 0")
    return raw_rate * secure_fraction(q, model)


def aes_secured_capacity(secure_rate, key_bits: int = 256, chunk_bytes: float = 64e9):
    """Classical capacity (b/s) protected by renewing one AES key per data chunk.

    Chunks are decimal gigabytes: 64 GB = 64e9 bytes.
    """
    if np.any(np.asarray(secure_rate) < 0):
        raise ValueError("secure key rate must be >= 0")
    return secure_rate / key_bits * chunk_bytes * 8


def qber_analytic(signal_rate, dark_in_window, noise_in_window, e_opt: float = 0.0):
    """QBER with uniform noise landing on the error outcome half the time."""
    total = signal_rate + dark_in_window + noise_in_window
    if np.any(np.asarray(total) <= 0):
        raise UndefinedQBER("total click rate is zero")
    if not 0.0 <= e_opt <= 0.5:
        raise ValueError("intrinsic error rate must lie in [0, 0.5]")
    return (e_opt * signal_rate + 0.5 * (dark_in_window + noise_in_window)) / total


@dataclass
class QberReport:
    raw_key_rate: float
    qber: float
    secure_key_rate: float
    counts_total: int | None = None
    counts_error: int | None = None
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.counts_total:
            self.qber = self.counts_error / self.counts_total
        if self.secure_key_rate > self.raw_key_rate * (1 + 1e-12):
            raise ValueError("secure key rate cannot exceed the raw key rate")
