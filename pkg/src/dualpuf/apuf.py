"""Additive-delay arbiter PUF model.

A stage-N arbiter is parametrized by N+1 real weights w and evaluated on the
parity transform of the challenge: the arbiter sees the accumulated delay
difference

    delta = w . phi(C) + noise + (adjust_low - adjust_up) * delta_unit

and outputs 1 when delta > 0 (an exact tie yields 0).  The adjust counters
model compensation units inserted into the two racing paths; incrementing
adjust_up pulls delta down, so it corrects an excess of 1-responses.

Challenge bit C_j is bit j of the challenge integer (C_0 = LSB), which wires
LFSR flip-flop D_1 to stage 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import WidthMismatch

DEFAULT_DELTA_UNIT = 0.05


@dataclass
class ApufInstance:
    """One arbiter lane.

    weights has length n_stages+1 (the last entry is the challenge-independent
    path offset).  sigma_noise is the std of per-evaluation additive noise.
    The adjust counters are mutated only by the initialization loop.
    """

    n_stages: int
    weights: np.ndarray
    sigma_noise: float
    adjust_up: int = 0
    adjust_low: int = 0
    delta_unit: float = DEFAULT_DELTA_UNIT
    rng_seed: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.n_stages < 1:
            raise ValueError(f"n_stages {self.n_stages} < 1")
        if self.weights.shape != (self.n_stages + 1,):
            raise WidthMismatch(
                f"weights shape {self.weights.shape} != ({self.n_stages + 1},)"
            )
        if self.sigma_noise < 0:
            raise ValueError("sigma_noise must be >= 0")
        if self.delta_unit <= 0:
            raise ValueError("delta_unit must be > 0")
        if self.adjust_up < 0 or self.adjust_low < 0:
            raise ValueError("adjust counters must be >= 0")

    @property
    def offset(self) -> float:
        """Compensation contribution to delta."""
        return (self.adjust_low - self.adjust_up) * self.delta_unit


def sample_instance(
    n_stages: int,
    rng_seed: int | np.random.SeedSequence,
    sigma_noise: float = 0.0,
    delta_unit: float = DEFAULT_DELTA_UNIT,
    bias: float = 0.0,
) -> ApufInstance:
    """Draw one lane with i.i.d. standard normal weights.

    bias is added to the constant weight w[N], standing in for a fixed
    routing imbalance between the two paths; 0 gives an unbiased lane.
    Same seed, same instance.
    """
    rng = np.random.default_rng(rng_seed)
    weights = rng.standard_normal(n_stages + 1)
    weights[n_stages] += bias
    seed_repr = rng_seed if isinstance(rng_seed, int) else None
    return ApufInstance(
        n_stages=n_stages,
        weights=weights,
        sigma_noise=sigma_noise,
        delta_unit=delta_unit,
        rng_seed=seed_repr,
    )


def challenge_bits(challenge: int, n_stages: int) -> np.ndarray:
    """Unpack a challenge integer into its N challenge bits, C_0 first."""
    if not 0 <= challenge < 1 << n_stages:
        raise WidthMismatch(f"challenge {challenge:#x} does not fit {n_stages} stages")
    return (challenge >> np.arange(n_stages)) & 1


def bits_from_ints(challenges: np.ndarray, n_stages: int) -> np.ndarray:
    """Bit matrix for a whole challenge array; output shape (..., N)."""
    ch = np.asarray(challenges, dtype=np.int64)
    return ((ch[..., None] >> np.arange(n_stages)) & 1).astype(np.int8)


def parity_features(challenge, n_stages: int | None = None) -> np.ndarray:
    """Parity transform: phi_i = prod_{j>=i} (1 - 2 C_j), phi_N = 1.

    Accepts a challenge integer (with n_stages) or a bit array whose last
    axis is the challenge; returns floats in {-1, +1} with one extra column.
    """
    if isinstance(challenge, (int, np.integer)):
        bits = challenge_bits(int(challenge), n_stages)
    else:
        bits = np.asarray(challenge)
    x = 1.0 - 2.0 * bits
    suffix = np.cumprod(x[..., ::-1], axis=-1)[..., ::-1]
    ones = np.ones(suffix.shape[:-1] + (1,))
    return np.concatenate([suffix, ones], axis=-1)


def features_from_ints(challenges: np.ndarray, n_stages: int) -> np.ndarray:
    """Parity features for a challenge integer array; shape (..., N+1)."""
    return parity_features(bits_from_ints(challenges, n_stages))


def delta_raw(instance: ApufInstance, challenge: int, noise_draw: float = 0.0) -> float:
    """Delay difference seen by the arbiter for one evaluation."""
    phi = parity_features(challenge, instance.n_stages)
    return float(instance.weights @ phi) + noise_draw + instance.offset


def evaluate_raw(instance: ApufInstance, challenge: int, noise_draw: float = 0.0) -> int:
    """Single arbiter decision; caller supplies the noise draw (0 = noiseless)."""
    return 1 if delta_raw(instance, challenge, noise_draw) > 0 else 0


def eval_raw_batch(
    instance: ApufInstance,
    challenges: np.ndarray,
    noise_draws: np.ndarray | float = 0.0,
) -> np.ndarray:
    """Vectorised evaluate_raw over a challenge integer array."""
    phi = features_from_ints(challenges, instance.n_stages)
    delta = phi @ instance.weights + noise_draws + instance.offset
    return (delta > 0).astype(np.uint8)


def response_probability_one(instance: ApufInstance, challenge: int) -> float:
    """Closed-form P(bit = 1) under Gaussian evaluation noise.

    With sigma_noise = 0 the distribution is degenerate; the sign indicator
    is returned instead of raising, so the function stays total.
    """
    mu = delta_raw(instance, challenge)
    if instance.sigma_noise == 0:
        return 1.0 if mu > 0 else 0.0
    return 0.5 * (1.0 + math.erf(mu / (instance.sigma_noise * math.sqrt(2.0))))


def save_instance(instance: ApufInstance, path: str) -> None:
    """Write a lane as a self-contained key-value text file."""
    lines = [
        f"n_stages = {instance.n_stages}",
        f"rng_seed = {'' if instance.rng_seed is None else instance.rng_seed}",
        f"sigma_noise = {instance.sigma_noise!r}",
        f"delta_unit = {instance.delta_unit!r}",
        f"adjust_up = {instance.adjust_up}",
        f"adjust_low = {instance.adjust_low}",
        "weights = " + " ".join(repr(float(w)) for w in instance.weights),
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path: str) -> ApufInstance:
    """Read back a lane written by save_instance; floats round-trip exactly."""
    fields: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    seed_text = fields.get("rng_seed", "")
    return ApufInstance(
        n_stages=int(fields["n_stages"]),
        weights=np.array([float(w) for w in fields["weights"].split()]),
        sigma_noise=float(fields["sigma_noise"]),
        delta_unit=float(fields["delta_unit"]),
        adjust_up=int(fields["adjust_up"]),
        adjust_low=int(fields["adjust_low"]),
        rng_seed=int(seed_text) if seed_text else None,
    )
