"""Correlated raw-key generation over a bit-flip channel, plus error-rate
estimation by sacrificing a disclosed sample.

The quantum link is modeled classically: Alice's key is uniform random and
Bob's copy differs by independent bit flips (or clustered runs of flips in
burst mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tpm import BitKey

__all__ = [
    "DEFAULT_QBER_THRESHOLD",
    "DEFAULT_SAMPLE_FRACTION",
    "ERROR_MODES",
    "NoisyKeyPair",
    "QberEstimate",
    "estimate_qber",
    "generate_key_pair",
]

# Common abort level for the estimated error rate; callers may override.
DEFAULT_QBER_THRESHOLD = 0.11

# Fraction of the raw key sacrificed for estimation unless the caller says otherwise.
DEFAULT_SAMPLE_FRACTION = 0.1

ERROR_MODES = ("uniform", "burst")


@dataclass(frozen=True)
class NoisyKeyPair:
    """Alice/Bob raw keys plus the oracle view of where they differ."""

    alice: BitKey
    bob: BitKey
    true_error_positions: frozenset[int]
    nominal_qber: float

    def __post_init__(self) -> None:
        if self.alice.length != self.bob.length:
            raise ValueError("keys must have equal length")
        actual = frozenset(int(i) for i in np.flatnonzero(self.alice.bits != self.bob.bits))
        if actual != self.true_error_positions:
            raise ValueError("true_error_positions does not match the keys")

    @property
    def length(self) -> int:
        return self.alice.length

    @property
    def error_count(self) -> int:
        return len(self.true_error_positions)


@dataclass(frozen=True)
class QberEstimate:
    """Outcome of disclosing a sample: the estimate and the shortened keys."""

    sampled_count: int
    mismatches: int
    estimate: float
    remaining_alice: BitKey
    remaining_bob: BitKey
    sampled_positions: np.ndarray


def _burst_flips(
    rng: np.random.Generator, length: int, qber: float, mean_run: float
) -> np.ndarray:
    """Place roughly Binomial(length, qber) flips in geometric-length runs."""
    flips = np.zeros(length, dtype=bool)
    target = int(rng.binomial(length, qber)) if qber > 0 else 0
    placed = 0
    while placed < target:
        open_positions = np.flatnonzero(~flips)
        start = int(rng.choice(open_positions))
        run = int(rng.geometric(1.0 / mean_run))
        for j in range(start, min(start + run, length)):
            if placed >= target:
                break
            if not flips[j]:
                flips[j] = True
                placed += 1
    return flips


def generate_key_pair(
    length: int,
    qber: float,
    seed: int,
    error_mode: str = "uniform",
    mean_burst_length: float = 4.0,
) -> NoisyKeyPair:
    """Draw Alice's key uniformly and corrupt Bob's copy at rate qber.

    Uniform mode flips each bit independently; burst mode clusters the same
    expected number of flips into runs with the given mean length. The result
    is a pure function of the arguments.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if not 0.0 <= qber <= 0.5:
        raise ValueError(f"qber must be in [0, 0.5], got {qber}")
    if error_mode not in ERROR_MODES:
        raise ValueError(f"error_mode must be one of {ERROR_MODES}, got {error_mode!r}")
    if mean_burst_length < 1.0:
        raise ValueError("mean_burst_length must be >= 1")
    rng = np.random.default_rng(seed)
    alice_bits = rng.integers(0, 2, size=length, dtype=np.uint8)
    if error_mode == "uniform":
        flips = rng.random(length) < qber
    else:
        flips = _burst_flips(rng, length, qber, mean_burst_length)
    bob_bits = alice_bits ^ flips.astype(np.uint8)
    positions = frozenset(int(i) for i in np.flatnonzero(flips))
    return NoisyKeyPair(BitKey(alice_bits), BitKey(bob_bits), positions, float(qber))


def estimate_qber(pair: NoisyKeyPair, sample_fraction: float, seed: int) -> QberEstimate:
    """Disclose a uniform sample of positions, estimate the error rate on it,
    and drop the disclosed bits from both keys."""
    if not 0.0 < sample_fraction < 1.0:
        raise ValueError(f"sample_fraction must be in (0, 1), got {sample_fraction}")
    n = pair.length
    size = int(math.floor(sample_fraction * n + 1e-9))
    if size < 1:
        raise ValueError("sample would be empty; use a larger fraction or key")
    rng = np.random.default_rng(seed)
    positions = np.sort(rng.choice(n, size=size, replace=False))
    mismatches = int((pair.alice.bits[positions] != pair.bob.bits[positions]).sum())
    return QberEstimate(
        sampled_count=size,
        mismatches=mismatches,
        estimate=mismatches / size,
        remaining_alice=pair.alice.without(positions),
        remaining_bob=pair.bob.without(positions),
        sampled_positions=positions,
    )
