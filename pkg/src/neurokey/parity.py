"""Parity-block error correction baselines: BBBSS and Cascade.

Both protocols run several passes. Pass 1 partitions the key (in natural
order) into blocks of round(0.73 / qber) bits; each later pass doubles the
block size and applies a fresh seeded pseudo-random permutation shared by
both parties. Every block's parity is compared over the public channel; a
mismatch means an odd number of errors, which a binary search pins down and
flips on Bob's side.

Cascade additionally back-propagates: a flip toggles the known parity of the
blocks containing that position in every earlier pass, and any block that
turns odd is searched in turn, smallest block first (the toggle itself is
inferred, not communicated). BBBSS simply reruns passes without
back-propagation.

Accounting: one parity check = one disclosed bit. Comparing a whole block at
the top of a pass costs one check; each binary-search split compares the
first half only (the other half's parity is inferred), costing one check per
level. Passes stop early once a full pass finds no mismatch at all.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .channel import NoisyKeyPair
from .tpm import BitKey

__all__ = [
    "ALGORITHMS",
    "ParityConfig",
    "ParityOutcome",
    "block_parity",
    "block_size_for",
    "run_parity_reconciliation",
]

ALGORITHMS = ("bbbss", "cascade")


@dataclass(frozen=True)
class ParityConfig:
    """Inputs the parties agree on before a reconciliation run."""

    qber_hint: float
    passes: int = 4
    seed: int = 0
    algorithm: str = "cascade"

    def __post_init__(self) -> None:
        if self.qber_hint <= 0.0:
            raise ValueError("qber_hint must be > 0 (a block size cannot be derived)")
        if self.passes < 1:
            raise ValueError("passes must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")


@dataclass(frozen=True)
class ParityOutcome:
    """Corrected keys plus the public-channel cost of getting there.

    residual_errors is an oracle count; a nonzero value is reported, never
    raised.
    """

    corrected_alice: BitKey
    corrected_bob: BitKey
    parity_checks: int
    disclosed_bits: int
    residual_errors: int
    flipped_positions: list[int]


def block_size_for(qber: float) -> int:
    """Pass-1 block size: 0.73/qber rounded half-up, at least 1."""
    if qber <= 0.0:
        raise ValueError("qber must be > 0")
    return max(1, int(math.floor(0.73 / qber + 0.5)))


def block_parity(bits: np.ndarray, positions: np.ndarray) -> int:
    """Parity of the selected positions."""
    return int(bits[positions].sum() & 1)


def _binary_locate(
    alice: np.ndarray, bob: np.ndarray, block: np.ndarray
) -> tuple[int, int]:
    """Binary-search an odd-parity block down to one position.

    Returns (position, parity checks spent). Each level compares the first
    half (size ceil(n/2)) only.
    """
    checks = 0
    while block.size > 1:
        half = (block.size + 1) // 2
        first = block[:half]
        checks += 1
        if block_parity(alice, first) != block_parity(bob, first):
            block = first
        else:
            block = block[half:]
    return int(block[0]), checks


def run_parity_reconciliation(pair: NoisyKeyPair, config: ParityConfig) -> ParityOutcome:
    """Correct Bob's key toward Alice's with the configured parity protocol."""
    alice = pair.alice.bits
    bob = pair.bob.bits.copy()
    n = pair.length
    rng = np.random.default_rng(config.seed)
    cascade = config.algorithm == "cascade"
    base_size = block_size_for(config.qber_hint)

    checks = 0
    flips: list[int] = []
    partitions: list[list[np.ndarray]] = []
    position_block: list[np.ndarray] = []
    odd: list[np.ndarray] = []

    for p in range(config.passes):
        size = min(n, base_size << p)
        order = np.arange(n) if p == 0 else rng.permutation(n)
        blocks = [order[i : i + size] for i in range(0, n, size)]
        partitions.append(blocks)
        lookup = np.empty(n, dtype=np.int64)
        for index, block in enumerate(blocks):
            lookup[block] = index
        position_block.append(lookup)
        state = np.zeros(len(blocks), dtype=bool)
        odd.append(state)

        # heap keyed by block size: searches run cheapest-first; the tie
        # counter keeps the order deterministic
        pending: list[tuple[int, int, int, int]] = []
        tie = 0
        for index, block in enumerate(blocks):
            checks += 1
            if block_parity(alice, block) != block_parity(bob, block):
                state[index] = True
                heapq.heappush(pending, (block.size, tie, p, index))
                tie += 1
        clean_pass = not pending

        while pending:
            _, _, q, index = heapq.heappop(pending)
            if not odd[q][index]:
                continue
            position, spent = _binary_locate(alice, bob, partitions[q][index])
            checks += spent
            bob[position] ^= 1
            flips.append(position)
            for q2 in range(len(partitions)):
                index2 = int(position_block[q2][position])
                odd[q2][index2] = not odd[q2][index2]
                if odd[q2][index2] and (cascade or q2 == p):
                    heapq.heappush(pending, (partitions[q2][index2].size, tie, q2, index2))
                    tie += 1

        if clean_pass:
            break

    return ParityOutcome(
        corrected_alice=pair.alice,
        corrected_bob=BitKey(bob),
        parity_checks=checks,
        disclosed_bits=checks,
        residual_errors=int((alice != bob).sum()),
        flipped_positions=flips,
    )
