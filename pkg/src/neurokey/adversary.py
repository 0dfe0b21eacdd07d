"""Eavesdropper simulations against the mutual-learning channel, plus the
public-information accounting used to size the final key reduction.

Eve sees every input matrix and both public +/-1 outputs. Three strategies:

* passive: Eve applies the learning rule only on rounds where her own output
  matches the agreed one (when the parties disagree, nobody learns).
* geometric: when Eve disagrees with an agreed output, she flips the hidden
  unit with the smallest absolute local field and learns anyway.
* ensemble: several independent passive machines; the best one counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sync import SyncConfig, SyncTranscript, _InputStream, seed_initial_overlap
from .tpm import Tpm, TpmParams, _hebbian_inplace, _signs

__all__ = [
    "AttackConfig",
    "AttackResult",
    "LeakageEstimate",
    "STRATEGIES",
    "key_space_size",
    "leakage_after",
    "run_attack",
]

STRATEGIES = ("passive", "geometric", "ensemble")


@dataclass(frozen=True)
class AttackConfig:
    """Attacker strategy and budget for one eavesdropping run."""

    strategy: str = "passive"
    ensemble_size: int = 1
    iteration_budget: int = 1000
    # None keeps Eve fully uninformed (random start); a fraction models a
    # partially informed attacker for sensitivity studies.
    eve_initial_overlap: float | None = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if self.strategy != "ensemble" and self.ensemble_size != 1:
            raise ValueError("ensemble_size must be 1 unless strategy is 'ensemble'")
        if self.iteration_budget < 1:
            raise ValueError("iteration_budget must be >= 1")
        if self.eve_initial_overlap is not None and not 0.0 <= self.eve_initial_overlap <= 1.0:
            raise ValueError("eve_initial_overlap must be in [0, 1]")


@dataclass(frozen=True)
class AttackResult:
    """Attacker-side outcome of one run."""

    best_overlap: float
    synced: bool
    iterations_observed: int
    per_machine_overlap: list[float]
    eve_learning_steps: list[int]
    # total rounds where the parties agreed (Eve can never learn on more)
    exchange_learning_steps: int
    # best machine's overlap at the round the parties first coincided
    # (-1.0 when they never did within the budget)
    best_overlap_at_convergence: float = -1.0
    eve_overlap_trace: list[tuple[int, float]] | None = None


@dataclass(frozen=True)
class LeakageEstimate:
    """How much the public outputs narrow the attacker's search space.

    Each public round at most halves the candidate weight matrices, so after
    ``iterations`` rounds the space shrinks from (2L+1)^(K*N) by a factor of
    2^iterations, equivalent to removing ``weight_equivalent_reduction``
    weights or ``bit_reduction`` key bits.
    """

    iterations: int
    key_space_log2: float
    weight_equivalent_reduction: float
    bit_reduction: int


def key_space_size(params: TpmParams) -> int:
    """Exact count of distinct weight matrices, (2L+1)^(K*N)."""
    return params.alphabet_size**params.weight_count


def leakage_after(iterations: int, params: TpmParams) -> LeakageEstimate:
    """Accounting for ``iterations`` public rounds of the given shape."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    log2_alphabet = math.log2(params.alphabet_size)
    return LeakageEstimate(
        iterations=iterations,
        key_space_log2=params.weight_count * log2_alphabet - iterations,
        weight_equivalent_reduction=iterations / log2_alphabet,
        bit_reduction=iterations,
    )


def run_attack(
    alice: Tpm, bob: Tpm, config: SyncConfig, attack: AttackConfig
) -> tuple[SyncTranscript, AttackResult]:
    """Synchronize Alice and Bob while Eve eavesdrops on every round.

    The exchange keeps running for the full attack budget (the parties keep
    learning after they coincide), so Eve is measured against the complete
    public stream. The run ends early only if some Eve machine reaches full
    overlap. The returned transcript describes the Alice/Bob process, frozen
    at their convergence round. The caller's machines are not modified; the
    race runs on internal copies.
    """
    if alice.params != bob.params:
        raise ValueError(f"machine shapes differ: {alice.params} vs {bob.params}")
    if config.params != alice.params:
        raise ValueError("config params do not match the machines")
    params = alice.params
    n_eves = attack.ensemble_size
    bound = params.L

    root = np.random.SeedSequence(config.seed)
    input_seq, eve_seq = root.spawn(2)
    stream = _InputStream(np.random.default_rng(input_seq), (params.K, params.N))
    eve_rng = np.random.default_rng(eve_seq)

    w = np.empty((2 + n_eves, params.K, params.N), dtype=np.int32)
    w[0] = alice.weights
    w[1] = bob.weights
    for m in range(n_eves):
        if attack.eve_initial_overlap is None:
            w[2 + m] = Tpm.random(params, eve_rng).weights
        else:
            eve_seed = int(eve_rng.integers(0, 2**63, dtype=np.uint64))
            w[2 + m] = seed_initial_overlap(alice, attack.eve_initial_overlap, eve_seed).weights

    iterations = 0
    ab_learning = 0
    ab_converged = False
    ab_converged_at = 0
    ab_learning_at = 0
    overlap_at_convergence = -1.0
    eve_learning = [0] * n_eves
    geometric = attack.strategy == "geometric"
    trace: list[tuple[int, float]] | None = [] if config.record_overlap else None
    eve_trace: list[tuple[int, float]] | None = [] if config.record_overlap else None

    eve_synced = False
    while iterations < attack.iteration_budget and not eve_synced:
        x = stream.next()
        iterations += 1

        fields = (w * x).sum(axis=2)
        sigma = _signs(fields)
        taus = sigma.prod(axis=1)
        tau_public = int(taus[0])
        if taus[0] == taus[1]:
            _hebbian_inplace(w[:2], x, sigma[:2], taus[:2, None], bound)
            ab_learning += 1
            for m in range(n_eves):
                row = 2 + m
                if taus[row] == tau_public:
                    _hebbian_inplace(w[row], x, sigma[row], tau_public, bound)
                    eve_learning[m] += 1
                elif geometric:
                    weakest = int(np.argmin(np.abs(fields[row])))
                    flipped = sigma[row].copy()
                    flipped[weakest] = -flipped[weakest]
                    _hebbian_inplace(w[row], x, flipped, tau_public, bound)
                    eve_learning[m] += 1

        if not ab_converged and np.array_equal(w[0], w[1]):
            ab_converged = True
            ab_converged_at = iterations
            ab_learning_at = ab_learning
            overlap_at_convergence = max(
                float((w[2 + m] == w[0]).mean()) for m in range(n_eves)
            )
        if trace is not None:
            trace.append((iterations, float((w[0] == w[1]).mean())))
        if any(np.array_equal(w[2 + m], w[0]) for m in range(n_eves)):
            eve_synced = True
        if eve_trace is not None:
            best = max(float((w[2 + m] == w[0]).mean()) for m in range(n_eves))
            eve_trace.append((iterations, best))

    per_machine = [float((w[2 + m] == w[0]).mean()) for m in range(n_eves)]
    best_overlap = max(per_machine)
    transcript = SyncTranscript(
        iterations=ab_converged_at if ab_converged else iterations,
        learning_steps=ab_learning_at if ab_converged else ab_learning,
        digest_exchanges=0,
        converged=ab_converged,
        overlap_trace=trace,
    )
    result = AttackResult(
        best_overlap=best_overlap,
        synced=best_overlap == 1.0,
        iterations_observed=iterations,
        per_machine_overlap=per_machine,
        eve_learning_steps=eve_learning,
        exchange_learning_steps=ab_learning,
        best_overlap_at_convergence=overlap_at_convergence,
        eve_overlap_trace=eve_trace,
    )
    return transcript, result
