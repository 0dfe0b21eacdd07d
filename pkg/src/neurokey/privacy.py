"""Privacy amplification: budget arithmetic plus key compression with a
binary Toeplitz hash (a Wegman-Carter universal family with a compact
description).

The budget removes every bit the attacker could hold deterministically
(reconciliation leakage plus all explicitly disclosed bits) and a security
margin on top of that; the residual information the attacker is expected to
keep about the compressed key is at most 2^-margin divided by ln 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adversary import LeakageEstimate
from .tpm import BitKey

__all__ = [
    "AmplificationBudget",
    "InfeasibleBudgetError",
    "ToeplitzSpec",
    "amplify",
    "plan_budget",
]

# Divisor for the residual-information bound 2^-margin / BOUND_LOG_DIVISOR.
# The natural-log reading is used; switch to math.log2(...)-style by editing
# this single constant.
BOUND_LOG_DIVISOR = math.log(2)

DEFAULT_SECURITY_BITS = 30


class InfeasibleBudgetError(ValueError):
    """The security margin does not fit: margin >= key length - known bits."""


@dataclass(frozen=True)
class AmplificationBudget:
    """Sizes for one compression: reconciled length, attacker-known bits,
    and the extra margin removed on top."""

    reconciled_length: int
    eve_known_bits: int
    security_bits: int

    @property
    def final_length(self) -> int:
        return self.reconciled_length - self.eve_known_bits - self.security_bits

    @property
    def information_bound(self) -> float:
        """Upper bound, in bits, on the attacker's expected residual
        information about the compressed key."""
        return 2.0**-self.security_bits / BOUND_LOG_DIVISOR


def plan_budget(
    reconciled_length: int,
    leakage: LeakageEstimate,
    disclosed_bits: int,
    security_bits: int = DEFAULT_SECURITY_BITS,
) -> AmplificationBudget:
    """Combine leakage accounting with explicitly disclosed bits and check
    that the margin fits (strictly) inside what remains."""
    if reconciled_length < 1:
        raise ValueError("reconciled_length must be >= 1")
    if disclosed_bits < 0:
        raise ValueError("disclosed_bits must be >= 0")
    if security_bits < 0:
        raise ValueError("security_bits must be >= 0")
    eve_known = int(math.ceil(leakage.bit_reduction)) + int(disclosed_bits)
    if security_bits >= reconciled_length - eve_known:
        raise InfeasibleBudgetError(
            f"security_bits={security_bits} must be < {reconciled_length} - {eve_known}"
        )
    return AmplificationBudget(
        reconciled_length=int(reconciled_length),
        eve_known_bits=eve_known,
        security_bits=int(security_bits),
    )


@dataclass(frozen=True)
class ToeplitzSpec:
    """A binary Toeplitz matrix described by its first row and first column.

    ``first_row_and_col`` holds the first row left-to-right (cols bits)
    followed by the first column below the top-left corner, top-to-bottom
    (rows-1 bits). Entry (i, j) equals first_row_and_col[j-i] when j >= i and
    first_row_and_col[cols + (i-j) - 1] otherwise, so every diagonal is
    constant.
    """

    rows: int
    cols: int
    first_row_and_col: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be >= 1")
        arr = np.asarray(self.first_row_and_col)
        expected = self.rows + self.cols - 1
        if arr.ndim != 1 or arr.size != expected:
            raise ValueError(f"first_row_and_col must hold {expected} bits, got {arr.size}")
        arr = arr.astype(np.uint8, copy=True)
        if arr.size and arr.max(initial=0) > 1:
            raise ValueError("first_row_and_col entries must be 0 or 1")
        object.__setattr__(self, "first_row_and_col", arr)

    @classmethod
    def from_seed(cls, rows: int, cols: int, seed: int) -> "ToeplitzSpec":
        rng = np.random.default_rng(seed)
        bits = rng.integers(0, 2, size=rows + cols - 1, dtype=np.uint8)
        return cls(rows=rows, cols=cols, first_row_and_col=bits, seed=seed)

    def to_hex(self) -> str:
        """Hex encoding of first_row_and_col (big-endian bit packing,
        zero-padded to a whole byte)."""
        return np.packbits(self.first_row_and_col).tobytes().hex()

    @classmethod
    def from_hex(cls, rows: int, cols: int, encoded: str) -> "ToeplitzSpec":
        packed = np.frombuffer(bytes.fromhex(encoded), dtype=np.uint8)
        bits = np.unpackbits(packed)[: rows + cols - 1]
        return cls(rows=rows, cols=cols, first_row_and_col=bits)


def amplify(key: BitKey, spec: ToeplitzSpec) -> BitKey:
    """Compress the key to spec.rows bits: Toeplitz matrix times key over GF(2).

    Implemented as one integer convolution against the diagonal sequence
    rather than materializing the matrix.
    """
    if key.length != spec.cols:
        raise ValueError(f"key length {key.length} does not match matrix cols {spec.cols}")
    row = spec.first_row_and_col[: spec.cols]
    col_rest = spec.first_row_and_col[spec.cols :]
    diagonals = np.concatenate([row[::-1], col_rest]).astype(np.int64)
    full = np.convolve(diagonals, key.bits.astype(np.int64))
    start = spec.cols - 1
    return BitKey((full[start : start + spec.rows] & 1).astype(np.uint8))
