"""Post-processing: initialization-time randomness adjustment, the temporal
majority voter, and XOR folding of per-round bits.

The adjustment loop is a successive approximation on the lane's compensation
counters: each round feeds a burst of fresh random challenges through the raw
arbiter, counts zero responses, and nudges one counter by a single unit until
the zero count falls strictly inside the acceptance window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .apuf import ApufInstance, eval_raw_batch, evaluate_raw
from .errors import EmptyInput, EvenVoterWidth, NoConvergence

DEFAULT_PULSE_COUNT = 96
DEFAULT_WINDOW_HALFWIDTH = 6
DEFAULT_MAX_ROUNDS = 1000


@dataclass(frozen=True)
class AdjustParams:
    """Knobs of the initialization loop.

    The acceptance window is exclusive: with 96 pulses and halfwidth 6 a
    round passes when the zero count lies strictly between 42 and 54.
    """

    pulse_count: int = DEFAULT_PULSE_COUNT
    window_halfwidth: int = DEFAULT_WINDOW_HALFWIDTH
    max_rounds: int = DEFAULT_MAX_ROUNDS
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.pulse_count % 2:
            raise ValueError(f"pulse_count {self.pulse_count} must be even")
        if not 0 < self.window_halfwidth < self.pulse_count / 2:
            raise ValueError(
                f"window halfwidth {self.window_halfwidth} outside "
                f"(0, {self.pulse_count / 2})"
            )
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")

    @property
    def band(self) -> tuple[int, int]:
        """Exclusive (lower, upper) bounds on the accepted zero count."""
        half = self.pulse_count // 2
        return half - self.window_halfwidth, half + self.window_halfwidth


@dataclass(frozen=True)
class AdjustReport:
    """Outcome of one randomness_adjust run."""

    rounds_used: int
    final_zero_count: int
    adjust_up: int
    adjust_low: int
    f_ready: int

    def record_line(self) -> str:
        """One log record: rounds, zeros, up, low, ready."""
        return (
            f"{self.rounds_used} {self.final_zero_count} "
            f"{self.adjust_up} {self.adjust_low} {self.f_ready}"
        )


def randomness_adjust(instance: ApufInstance, params: AdjustParams) -> AdjustReport:
    """Balance a lane's 0/1 rate by successive approximation.

    Each round evaluates pulse_count fresh seeded random challenges with
    fresh noise draws and counts zeros.  Strictly inside the band: done,
    counters kept as they are.  Below the band (too many ones) adjust_up
    gains one unit; above it adjust_low does.  A count sitting exactly on a
    bound changes nothing and the loop simply re-measures.  Mutates the
    instance counters; raises NoConvergence if max_rounds pass without
    acceptance.
    """
    rng = np.random.default_rng(params.rng_seed)
    lower, upper = params.band
    zeros = -1
    for round_no in range(1, params.max_rounds + 1):
        challenges = rng.integers(0, 1 << instance.n_stages, size=params.pulse_count)
        noise = rng.standard_normal(params.pulse_count) * instance.sigma_noise
        bits = eval_raw_batch(instance, challenges, noise)
        zeros = params.pulse_count - int(bits.sum())
        if lower < zeros < upper:
            return AdjustReport(
                rounds_used=round_no,
                final_zero_count=zeros,
                adjust_up=instance.adjust_up,
                adjust_low=instance.adjust_low,
                f_ready=1,
            )
        if zeros < lower:
            instance.adjust_up += 1
        elif zeros > upper:
            instance.adjust_low += 1
        # zeros exactly on a bound: leave counters alone, measure again
    raise NoConvergence(
        f"no acceptance in {params.max_rounds} rounds "
        f"(last zero count {zeros}/{params.pulse_count}, "
        f"up={instance.adjust_up}, low={instance.adjust_low})"
    )


def vote(
    instance: ApufInstance,
    challenge: int,
    voter_t: int,
    noise_stream: np.random.Generator,
) -> int:
    """Majority bit over voter_t independent noisy evaluations."""
    if voter_t < 1 or voter_t % 2 == 0:
        raise EvenVoterWidth(f"voter width {voter_t} must be odd and >= 1")
    draws = noise_stream.standard_normal(voter_t) * instance.sigma_noise
    ones = sum(evaluate_raw(instance, challenge, float(d)) for d in draws)
    return 1 if 2 * ones > voter_t else 0


def vote_batch(
    instance: ApufInstance,
    challenges: np.ndarray,
    voter_t: int,
    noise_stream: np.random.Generator,
) -> np.ndarray:
    """Voted bits for a whole challenge array, one column of draws per vote."""
    if voter_t < 1 or voter_t % 2 == 0:
        raise EvenVoterWidth(f"voter width {voter_t} must be odd and >= 1")
    challenges = np.asarray(challenges)
    draws = noise_stream.standard_normal((challenges.size, voter_t)) * instance.sigma_noise
    ones = np.zeros(challenges.size, dtype=np.int64)
    for col in range(voter_t):
        ones += eval_raw_batch(instance, challenges, draws[:, col])
    return (2 * ones > voter_t).astype(np.uint8)


def xor_fold(bits) -> int:
    """Parity of a nonempty bit sequence."""
    bits = list(bits)
    if not bits:
        raise EmptyInput("xor_fold of an empty sequence")
    out = 0
    for b in bits:
        out ^= int(b)
    return out & 1
