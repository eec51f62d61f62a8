"""The tag-side PUF device: k parallel arbiter lanes behind dual-LFSR
challenge obfuscation, a fusable raw-CRP interface for enrollment, and
parallel-to-serial response assembly.

Serial order is fixed: lane 0's bit leaves first, so a response integer
carries lane i in bit i.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field, replace

import numpy as np

from .apuf import ApufInstance, features_from_ints, sample_instance
from .errors import InterfaceFused, NonMonotonicTicks, WidthMismatch, ZeroSeed
from .lfsr import LfsrSpec, pick_lfsr_pair
from .obfuscator import DualLfsrSpec, run_rounds
from .postproc import AdjustParams, AdjustReport, randomness_adjust, vote_batch

DEFAULT_VOTER_T = 5


def default_lane_pairs(order: int, k: int, rounds_per_response: int = 5) -> tuple[DualLfsrSpec, ...]:
    """One register pair per lane, cycling through all ordered primitive pairs."""
    return tuple(
        DualLfsrSpec(pick_lfsr_pair(order, i), rounds_per_response) for i in range(k)
    )


@dataclass(frozen=True)
class DeviceConfig:
    """Manufacturing parameters of one tag."""

    k: int
    n_stages: int
    lane_pairs: tuple[DualLfsrSpec, ...]
    voter_t: int = DEFAULT_VOTER_T
    sigma_noise: float = 0.0
    device_seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k {self.k} < 1")
        if len(self.lane_pairs) != self.k:
            raise WidthMismatch(
                f"{len(self.lane_pairs)} lane pairs for k={self.k} lanes"
            )
        for pair in self.lane_pairs:
            if pair.order != self.n_stages:
                raise WidthMismatch(
                    f"lane registers are order {pair.order}, challenge width is {self.n_stages}"
                )
        if self.voter_t < 1 or self.voter_t % 2 == 0:
            raise ValueError(f"voter width {self.voter_t} must be odd")

    @property
    def rounds_per_response(self) -> int:
        return self.lane_pairs[0].rounds_per_response


@dataclass
class PufDevice:
    """A built tag.  fused only ever goes False -> True."""

    config: DeviceConfig
    lanes: list[ApufInstance]
    fused: bool = False
    last_challenge_tick: int | None = None
    _noise_rng: np.random.Generator = field(init=False, repr=False, compare=False)
    _weights: np.ndarray = field(init=False, repr=False, compare=False)
    _offsets: np.ndarray = field(init=False, repr=False, compare=False)
    _feeds: tuple[np.ndarray, np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.lanes) != self.config.k:
            raise WidthMismatch(f"{len(self.lanes)} lanes for k={self.config.k}")
        self._noise_rng = np.random.default_rng(
            np.random.SeedSequence([self.config.device_seed, 0x5E55])
        )
        self.refresh_caches()

    def refresh_caches(self) -> None:
        """Rebuild the vectorised views of lane parameters (call after any
        direct lane mutation; build_device does it once after adjustment)."""
        self._weights = np.stack([lane.weights for lane in self.lanes])
        self._offsets = np.array([lane.offset for lane in self.lanes])
        self._feeds = (
            np.array([p.pair[0].feed for p in self.config.lane_pairs], dtype=np.int64),
            np.array([p.pair[1].feed for p in self.config.lane_pairs], dtype=np.int64),
        )

    # -- enrollment-only raw path -------------------------------------------

    def raw_crp_query(self, challenge: int, noise_stream: np.random.Generator | None = None) -> np.ndarray:
        """Voted naked response of every lane to one raw challenge.

        Bypasses the obfuscator entirely; the challenge may be zero here.
        Dead once the interface is fused.
        """
        if self.fused:
            raise InterfaceFused("raw interface is fused")
        if not 0 <= challenge < 1 << self.config.n_stages:
            raise WidthMismatch(
                f"challenge {challenge:#x} does not fit {self.config.n_stages} stages"
            )
        rng = noise_stream if noise_stream is not None else self._noise_rng
        out = np.empty(self.config.k, dtype=np.uint8)
        for i, lane in enumerate(self.lanes):
            out[i] = vote_batch(lane, np.array([challenge]), self.config.voter_t, rng)[0]
        return out

    def raw_crp_table(self, noise_stream: np.random.Generator | None = None) -> dict[int, int]:
        """Full naked-CRP table over every nonzero challenge, as
        challenge -> serialized k-bit response."""
        if self.fused:
            raise InterfaceFused("raw interface is fused")
        rng = noise_stream if noise_stream is not None else self._noise_rng
        challenges = np.arange(1, 1 << self.config.n_stages, dtype=np.int64)
        rows = np.empty((self.config.k, challenges.size), dtype=np.uint8)
        for i, lane in enumerate(self.lanes):
            rows[i] = vote_batch(lane, challenges, self.config.voter_t, rng)
        packed = np.zeros(challenges.size, dtype=object)
        for i in range(self.config.k):
            packed |= rows[i].astype(object) << i
        return {int(c): int(r) for c, r in zip(challenges, packed)}

    def fuse(self) -> None:
        """Permanently close the raw interface.  Idempotent."""
        self.fused = True

    # -- authenticated path --------------------------------------------------

    def respond(
        self,
        challenge: int,
        mode: int,
        noise_stream: np.random.Generator | None = None,
    ) -> np.ndarray:
        """k-bit obfuscated response, lane 0 first, as a uint8 array."""
        if not 0 < challenge < 1 << self.config.n_stages:
            raise ZeroSeed(
                f"external challenge {challenge:#x} outside the nonzero "
                f"{self.config.n_stages}-bit range"
            )
        rng = noise_stream if noise_stream is not None else self._noise_rng
        sigma = self.config.sigma_noise
        voter_t = self.config.voter_t
        weights, offsets = self._weights, self._offsets

        def voted(_, chosen: np.ndarray) -> np.ndarray:
            phi = features_from_ints(chosen, self.config.n_stages)
            mu = np.einsum("ki,ki->k", phi, weights) + offsets
            if sigma == 0:
                return (mu > 0).astype(np.uint8)
            draws = rng.standard_normal((chosen.size, voter_t)) * sigma
            ones = ((mu[:, None] + draws) > 0).sum(axis=1)
            return (2 * ones > voter_t).astype(np.uint8)

        feed1, feed2 = self._feeds
        return run_rounds(
            feed1, feed2, challenge, mode & 1, self.config.rounds_per_response, voted
        )

    # -- protocol responder interface ----------------------------------------

    def begin_session(self) -> None:
        self.last_challenge_tick = None

    def answer_challenge(self, frame) -> int:
        """Reply to one challenge frame: extract t from the tick gap, derive
        the mode bit (first challenge of a session runs in mode 1), respond,
        and serialize."""
        if self.last_challenge_tick is None:
            mode = 1
        else:
            t = frame.tick - self.last_challenge_tick
            if t <= 0:
                raise NonMonotonicTicks(
                    f"challenge tick {frame.tick} not after {self.last_challenge_tick}"
                )
            mode = t & 1
        self.last_challenge_tick = frame.tick
        return serialize_response(self.respond(frame.payload, mode))


def preprocess(device: PufDevice, frame_c1, frame_c2) -> tuple[int, int, int]:
    """Tick arithmetic of the second challenge: (challenge2, t, mode)."""
    t = frame_c2.tick - frame_c1.tick
    if t <= 0:
        raise NonMonotonicTicks(f"tick gap {t} is not positive")
    for f in (frame_c1, frame_c2):
        if not 0 <= f.payload < 1 << device.config.n_stages:
            raise WidthMismatch(
                f"payload {f.payload:#x} does not fit {device.config.n_stages} stages"
            )
    return frame_c2.payload, t, t & 1


def serialize_response(bits: np.ndarray) -> int:
    """Parallel-to-serial: lane i's bit becomes bit i of the integer."""
    out = 0
    for i, b in enumerate(np.asarray(bits, dtype=np.uint8)):
        out |= int(b) << i
    return out


def deserialize_response(value: int, k: int) -> np.ndarray:
    """Inverse of serialize_response."""
    if not 0 <= value < 1 << k:
        raise WidthMismatch(f"response {value:#x} does not fit {k} lanes")
    # plain int shifts: k = 64 already overflows int64 vector ops
    return np.fromiter(((value >> i) & 1 for i in range(k)), dtype=np.uint8, count=k)


def build_device(config: DeviceConfig, adjust_params: AdjustParams | None = None) -> "PufDevice":
    """Manufacture and initialize a tag.

    Lane weights come from per-lane children of the device seed; each lane
    then runs the randomness adjustment so its raw path is balanced.
    Returns an unfused device.  Reports of the per-lane adjustment are kept
    on the device as build_reports.
    """
    base = adjust_params if adjust_params is not None else AdjustParams()
    children = np.random.SeedSequence(config.device_seed).spawn(2 * config.k)
    lanes = []
    reports: list[AdjustReport] = []
    for i in range(config.k):
        lane = sample_instance(
            config.n_stages,
            children[2 * i],
            sigma_noise=config.sigma_noise,
        )
        seed_int = int(children[2 * i + 1].generate_state(1)[0])
        reports.append(randomness_adjust(lane, replace(base, rng_seed=seed_int)))
        lanes.append(lane)
    device = PufDevice(config=config, lanes=lanes)
    device.build_reports = reports
    return device


# -- persistence -------------------------------------------------------------


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pair_to_json(pair: DualLfsrSpec) -> dict:
    return {
        "masks": [pair.pair[0].mask, pair.pair[1].mask],
        "order": pair.order,
        "rounds": pair.rounds_per_response,
    }


def _pair_from_json(obj: dict) -> DualLfsrSpec:
    a, b = obj["masks"]
    return DualLfsrSpec(
        (LfsrSpec(obj["order"], a), LfsrSpec(obj["order"], b)),
        obj["rounds"],
    )


def save_device(device: PufDevice, path: str) -> None:
    """Persist a tag, bit-exactly, as a JSON document."""
    doc = {
        "k": device.config.k,
        "n_stages": device.config.n_stages,
        "voter_t": device.config.voter_t,
        "sigma_noise": device.config.sigma_noise,
        "device_seed": device.config.device_seed,
        "lane_pairs": [_pair_to_json(p) for p in device.config.lane_pairs],
        "fused": device.fused,
        "lanes": [
            {
                "weights": [float(w) for w in lane.weights],
                "adjust_up": lane.adjust_up,
                "adjust_low": lane.adjust_low,
                "delta_unit": lane.delta_unit,
            }
            for lane in device.lanes
        ],
    }
    _atomic_write(path, json.dumps(doc, indent=1))


def load_device(path: str) -> PufDevice:
    with open(path) as fh:
        doc = json.load(fh)
    config = DeviceConfig(
        k=doc["k"],
        n_stages=doc["n_stages"],
        lane_pairs=tuple(_pair_from_json(p) for p in doc["lane_pairs"]),
        voter_t=doc["voter_t"],
        sigma_noise=doc["sigma_noise"],
        device_seed=doc["device_seed"],
    )
    lanes = [
        ApufInstance(
            n_stages=doc["n_stages"],
            weights=np.array(entry["weights"]),
            sigma_noise=doc["sigma_noise"],
            adjust_up=entry["adjust_up"],
            adjust_low=entry["adjust_low"],
            delta_unit=entry["delta_unit"],
        )
        for entry in doc["lanes"]
    ]
    return PufDevice(config=config, lanes=lanes, fused=doc["fused"])
