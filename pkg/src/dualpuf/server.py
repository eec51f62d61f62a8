"""Reader-side registry: per-lane prediction material harvested at
enrollment, session generation, and the thresholded response comparator.

Prediction mirrors the tag exactly: the same register pairs, the same
selection loop, the same serialization.  Lane material is either a full
naked-CRP table (every nonzero challenge, practical up to order ~20) or the
exact lane parameters evaluated noiselessly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .apuf import ApufInstance, features_from_ints
from .device import _atomic_write, _pair_from_json, _pair_to_json, deserialize_response
from .errors import IncompleteTable, MissingEntry, WidthMismatch, ZeroSeed
from .obfuscator import DualLfsrSpec, run_rounds

TABLE_MODE = "table"
MODEL_MODE = "model"
MAX_TABLE_ORDER = 20
DEFAULT_T_RANGE = (2, 17)


def default_tau(k: int, sigma_noise: float) -> int:
    """0 for noiseless experiments, else a tight 10% of the lane count."""
    return 0 if sigma_noise == 0 else math.ceil(0.1 * k)


@dataclass
class ServerRegistry:
    """Everything the reader holds about one enrolled tag."""

    mode: str
    k: int
    n_stages: int
    lane_pairs: tuple[DualLfsrSpec, ...]
    tau: int
    t_range: tuple[int, int]
    rng_seed: int
    voter_t: int = 5
    table: np.ndarray | None = None      # (k, 2^N) uint8, row 0 of axis 1 unused
    weights: np.ndarray | None = None    # (k, N+1)
    offsets: np.ndarray | None = None    # (k,)

    def __post_init__(self) -> None:
        if self.mode not in (TABLE_MODE, MODEL_MODE):
            raise ValueError(f"unknown registry mode {self.mode!r}")
        if not 0 <= self.tau < self.k:
            raise ValueError(f"tau {self.tau} outside [0, k={self.k})")
        t_min, t_max = self.t_range
        if not 1 <= t_min <= t_max:
            raise ValueError(f"bad t range [{t_min}, {t_max}]")
        if len(self.lane_pairs) != self.k:
            raise WidthMismatch(f"{len(self.lane_pairs)} lane pairs for k={self.k}")
        if self.mode == TABLE_MODE and self.n_stages > MAX_TABLE_ORDER:
            raise ValueError(
                f"table mode caps at order {MAX_TABLE_ORDER}, got {self.n_stages}"
            )
        self._rng = np.random.default_rng(self.rng_seed)
        self._feeds = (
            np.array([p.pair[0].feed for p in self.lane_pairs], dtype=np.int64),
            np.array([p.pair[1].feed for p in self.lane_pairs], dtype=np.int64),
        )

    @property
    def rounds_per_response(self) -> int:
        return self.lane_pairs[0].rounds_per_response


def register_from_ttp(
    lane_data,
    lane_pairs: tuple[DualLfsrSpec, ...],
    tau: int,
    t_range: tuple[int, int] = DEFAULT_T_RANGE,
    rng_seed: int = 0,
    voter_t: int = 5,
) -> ServerRegistry:
    """Build a registry from enrollment material.

    lane_data is either a mapping challenge -> serialized k-bit naked
    response covering every nonzero challenge (table mode), or a sequence of
    lane parameter instances (model mode; noise is irrelevant because the
    server predicts noiselessly).
    """
    k = len(lane_pairs)
    n = lane_pairs[0].order
    if isinstance(lane_data, dict):
        size = 1 << n
        table = np.zeros((k, size), dtype=np.uint8)
        missing = 0
        for c in range(1, size):
            if c not in lane_data:
                missing += 1
                continue
            table[:, c] = deserialize_response(lane_data[c], k)
        if missing:
            raise IncompleteTable(f"{missing} of {size - 1} challenges missing")
        return ServerRegistry(
            mode=TABLE_MODE, k=k, n_stages=n, lane_pairs=lane_pairs,
            tau=tau, t_range=t_range, rng_seed=rng_seed, voter_t=voter_t,
            table=table,
        )
    lanes: list[ApufInstance] = list(lane_data)
    if len(lanes) != k:
        raise WidthMismatch(f"{len(lanes)} lane models for k={k}")
    return ServerRegistry(
        mode=MODEL_MODE, k=k, n_stages=n, lane_pairs=lane_pairs,
        tau=tau, t_range=t_range, rng_seed=rng_seed, voter_t=voter_t,
        weights=np.stack([lane.weights for lane in lanes]),
        offsets=np.array([lane.offset for lane in lanes]),
    )


def predict_response(registry: ServerRegistry, challenge: int, mode: int) -> np.ndarray:
    """R_m: the tag response the server expects, lane 0 first."""
    if not 0 < challenge < 1 << registry.n_stages:
        raise ZeroSeed(
            f"external challenge {challenge:#x} outside the nonzero "
            f"{registry.n_stages}-bit range"
        )
    lane_idx = np.arange(registry.k)

    if registry.mode == TABLE_MODE:
        table = registry.table

        def naked(_, chosen: np.ndarray) -> np.ndarray:
            return table[lane_idx, chosen]

    else:
        weights, offsets = registry.weights, registry.offsets

        def naked(_, chosen: np.ndarray) -> np.ndarray:
            phi = features_from_ints(chosen, registry.n_stages)
            return ((np.einsum("ki,ki->k", phi, weights) + offsets) > 0).astype(np.uint8)

    feed1, feed2 = registry._feeds
    return run_rounds(
        feed1, feed2, challenge, mode & 1, registry.rounds_per_response, naked
    )


def gen_session(registry: ServerRegistry) -> tuple[int, int, int]:
    """Draw (C1, C2, t): independent uniform nonzero challenges and a
    uniform tick gap from the registry's range."""
    rng = registry._rng
    size = 1 << registry.n_stages
    c1 = int(rng.integers(1, size))
    c2 = int(rng.integers(1, size))
    t_min, t_max = registry.t_range
    t = int(rng.integers(t_min, t_max + 1))
    return c1, c2, t


def compare(r_m: np.ndarray, r_p: np.ndarray, tau: int) -> int:
    """1 iff the responses differ in at most tau lanes."""
    r_m = np.asarray(r_m, dtype=np.uint8)
    r_p = np.asarray(r_p, dtype=np.uint8)
    if r_m.shape != r_p.shape:
        raise WidthMismatch(f"response widths differ: {r_m.shape} vs {r_p.shape}")
    return 1 if int((r_m ^ r_p).sum()) <= tau else 0


def table_lookup(registry: ServerRegistry, challenge: int) -> np.ndarray:
    """Naked k-bit table row; table mode only."""
    if registry.mode != TABLE_MODE:
        raise MissingEntry("registry holds no table")
    if not 0 < challenge < 1 << registry.n_stages:
        raise MissingEntry(f"challenge {challenge:#x} outside the table")
    return registry.table[:, challenge]


# -- persistence -------------------------------------------------------------


def save_registry(registry: ServerRegistry, path: str) -> None:
    doc = {
        "mode": registry.mode,
        "k": registry.k,
        "n_stages": registry.n_stages,
        "voter_t": registry.voter_t,
        "tau": registry.tau,
        "t_range": list(registry.t_range),
        "rng_seed": registry.rng_seed,
        "lane_pairs": [_pair_to_json(p) for p in registry.lane_pairs],
    }
    if registry.mode == TABLE_MODE:
        # one hex word per challenge, lane 0 in bit 0
        packed = []
        for c in range(registry.table.shape[1]):
            value = 0
            for i in range(registry.k):
                value |= int(registry.table[i, c]) << i
            packed.append(f"{value:x}")
        doc["table"] = packed
    else:
        doc["weights"] = [[float(w) for w in row] for row in registry.weights]
        doc["offsets"] = [float(o) for o in registry.offsets]
    _atomic_write(path, json.dumps(doc))


def load_registry(path: str) -> ServerRegistry:
    with open(path) as fh:
        doc = json.load(fh)
    kwargs = dict(
        mode=doc["mode"],
        k=doc["k"],
        n_stages=doc["n_stages"],
        lane_pairs=tuple(_pair_from_json(p) for p in doc["lane_pairs"]),
        tau=doc["tau"],
        t_range=tuple(doc["t_range"]),
        rng_seed=doc["rng_seed"],
        voter_t=doc["voter_t"],
    )
    if doc["mode"] == TABLE_MODE:
        k, size = doc["k"], 1 << doc["n_stages"]
        table = np.zeros((k, size), dtype=np.uint8)
        for c, word in enumerate(doc["table"]):
            table[:, c] = deserialize_response(int(word, 16), k)
        kwargs["table"] = table
    else:
        kwargs["weights"] = np.array(doc["weights"])
        kwargs["offsets"] = np.array(doc["offsets"])
    return ServerRegistry(**kwargs)


def save_crp_table(table: dict[int, int], path: str, n_stages: int, k: int) -> None:
    """Naked-CRP table file: one `challenge_hex response_hex` line per entry."""
    cw = (n_stages + 3) // 4
    rw = (k + 3) // 4
    lines = [f"{c:0{cw}x} {r:0{rw}x}" for c, r in sorted(table.items())]
    _atomic_write(path, "\n".join(lines) + "\n")


def load_crp_table(path: str) -> dict[int, int]:
    table: dict[int, int] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            c_hex, r_hex = line.split()
            table[int(c_hex, 16)] = int(r_hex, 16)
    return table
