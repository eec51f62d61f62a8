"""Time-variant challenge generation from a pair of free-running LFSRs.

Both registers load the same external challenge and shift together once per
round, before the round's challenge is taken, so the raw seed never reaches
the arbiter.  The round's real challenge is read from one of the two
post-shift registers:

    register 1  if  prev_response xor mode == 1
    register 2  otherwise

where prev_response is the previous round's voted bit (0 before round 1) and
mode is the session's parity bit (1 selects the original wiring, 0 the
swapped one).  A response is the XOR fold of rounds_per_response voted bits
produced this way.

The scalar operations here are the reference semantics; run_rounds is the
vectorised engine the device, server, and attack harnesses share.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .apuf import ApufInstance
from .errors import WidthMismatch
from .lfsr import LfsrSpec, LfsrState, is_m_sequence, make_lfsr, step
from .postproc import vote, xor_fold

DEFAULT_ROUNDS = 5


@dataclass(frozen=True)
class DualLfsrSpec:
    """An ordered pair of distinct same-order maximal-period polynomials."""

    pair: tuple[LfsrSpec, LfsrSpec]
    rounds_per_response: int = DEFAULT_ROUNDS

    def __post_init__(self) -> None:
        a, b = self.pair
        if a.order != b.order:
            raise WidthMismatch(f"register orders differ: {a.order} vs {b.order}")
        if a == b:
            raise ValueError(f"registers must be distinct, both are {a}")
        for spec in (a, b):
            if not is_m_sequence(spec):
                raise ValueError(f"{spec} does not generate a maximal-period sequence")
        if self.rounds_per_response < 1:
            raise ValueError("rounds_per_response must be >= 1")

    @property
    def order(self) -> int:
        return self.pair[0].order


@dataclass(frozen=True)
class ObfuscatorState:
    """Selection-loop snapshot between rounds."""

    state1: LfsrState
    state2: LfsrState
    round_no: int
    prev_response: int
    mode: int


def seed_obfuscator(spec: DualLfsrSpec, external_challenge: int, mode: int) -> ObfuscatorState:
    """Load both registers with the external challenge; no shift yet."""
    return ObfuscatorState(
        state1=make_lfsr(spec.pair[0], external_challenge),
        state2=make_lfsr(spec.pair[1], external_challenge),
        round_no=0,
        prev_response=0,
        mode=mode & 1,
    )


def next_real_challenge(state: ObfuscatorState) -> tuple[int, ObfuscatorState]:
    """Shift both registers, then read the selected one.

    Selection looks only at the previous response bit, which the caller
    updates after evaluating this challenge.
    """
    s1 = step(state.state1)
    s2 = step(state.state2)
    chosen = s1 if state.prev_response ^ state.mode == 1 else s2
    advanced = replace(state, state1=s1, state2=s2, round_no=state.round_no + 1)
    return chosen.bits, advanced


def generate_response(
    spec: DualLfsrSpec,
    apuf: ApufInstance,
    external_challenge: int,
    mode: int,
    voter_t: int,
    noise_stream: np.random.Generator,
) -> int:
    """One full response: rounds_per_response voted bits, XOR folded."""
    if apuf.n_stages != spec.order:
        raise WidthMismatch(
            f"arbiter has {apuf.n_stages} stages, registers are order {spec.order}"
        )
    state = seed_obfuscator(spec, external_challenge, mode)
    bits = []
    for _ in range(spec.rounds_per_response):
        challenge, state = next_real_challenge(state)
        r = vote(apuf, challenge, voter_t, noise_stream)
        state = replace(state, prev_response=r)
        bits.append(r)
    return xor_fold(bits)


def challenge_trace(
    spec: DualLfsrSpec,
    external_challenge: int,
    mode: int,
    response_bits,
) -> list[int]:
    """Challenge sequence the selection rule emits for a given vote history.

    Pure reconstruction with no arbiter: round j's selector is
    response_bits[j-1] (0 for round 1), exactly as generate_response would
    behave if its votes came out equal to response_bits.
    """
    response_bits = [int(b) & 1 for b in response_bits]
    if len(response_bits) != spec.rounds_per_response:
        raise WidthMismatch(
            f"need {spec.rounds_per_response} response bits, got {len(response_bits)}"
        )
    state = seed_obfuscator(spec, external_challenge, mode)
    out = []
    for r in response_bits:
        challenge, state = next_real_challenge(state)
        state = replace(state, prev_response=r)
        out.append(challenge)
    return out


def trace_records(
    spec: DualLfsrSpec,
    external_challenge: int,
    mode: int,
    response_bits,
) -> list[str]:
    """Waveform dump, one line per round: round M prev chosen_lfsr challenge_bits."""
    response_bits = [int(b) & 1 for b in response_bits]
    if len(response_bits) != spec.rounds_per_response:
        raise WidthMismatch(
            f"need {spec.rounds_per_response} response bits, got {len(response_bits)}"
        )
    state = seed_obfuscator(spec, external_challenge, mode)
    lines = []
    for round_no, r in enumerate(response_bits, start=1):
        prev = state.prev_response
        challenge, state = next_real_challenge(state)
        chosen = 1 if prev ^ mode == 1 else 2
        lines.append(
            f"{round_no} {mode & 1} {prev} {chosen} {challenge:0{spec.order}b}"
        )
        state = replace(state, prev_response=r)
    return lines


def run_rounds(
    feed1,
    feed2,
    seed,
    mode,
    rounds: int,
    round_eval,
    collect_challenges: bool = False,
):
    """Vectorised selection loop over any broadcastable lane/batch layout.

    feed1, feed2, seed, and mode broadcast together to the working shape;
    round_eval(round_index, chosen_states) maps an int64 challenge array of
    that shape to a uint8 bit array of the same shape.  Returns the XOR fold
    of the round bits, plus the per-round challenge arrays when
    collect_challenges is set.
    """
    feed1, feed2, seed, mode = (
        np.asarray(a, dtype=np.int64) for a in (feed1, feed2, seed, mode)
    )
    shape = np.broadcast_shapes(feed1.shape, feed2.shape, seed.shape, mode.shape)
    s1 = np.broadcast_to(seed, shape).copy()
    s2 = s1.copy()
    prev = np.zeros(shape, dtype=np.int64)
    folded = np.zeros(shape, dtype=np.uint8)
    challenges = []
    for round_no in range(rounds):
        s1 = (s1 >> 1) ^ (feed1 * (s1 & 1))
        s2 = (s2 >> 1) ^ (feed2 * (s2 & 1))
        chosen = np.where(prev ^ mode == 1, s1, s2)
        if collect_challenges:
            challenges.append(chosen)
        bits = round_eval(round_no, chosen)
        folded ^= bits
        prev = bits.astype(np.int64)
    if collect_challenges:
        return folded, challenges
    return folded
