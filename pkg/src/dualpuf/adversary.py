"""Attack harnesses and PUF quality metrics.

The replay attacker is content-only: it stores challenge payload ->
response payload from observed traffic and answers verbatim, never reading
tick gaps.  The modeling attacker is a single linear unit over parity
features, the known-strong attack against a bare arbiter lane; its input is
restricted to CRP records by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .apuf import ApufInstance, eval_raw_batch, features_from_ints, parity_features
from .device import PufDevice, _atomic_write
from .errors import EmptyDataset, EmptyStore, InsufficientSample, WidthMismatch
from .obfuscator import run_rounds
from .protocol import CHALLENGE, RESPONSE, SessionTranscript, run_authentication
from .server import ServerRegistry

# -- replay ------------------------------------------------------------------


@dataclass
class ReplayAttacker:
    """Stores observed (challenge, response) payloads and replays them."""

    store: dict[int, int] = field(default_factory=dict)

    def begin_session(self) -> None:
        pass

    def answer_challenge(self, frame) -> int | None:
        """Replay the stored response; silence on an unknown challenge."""
        return self.store.get(frame.payload)

    def tap(self):
        """Channel interceptor that eavesdrops pairs live, passing frames on."""
        pending: list[int | None] = [None]

        def intercept(frame):
            if frame.kind == CHALLENGE:
                pending[0] = frame.payload
            elif frame.kind == RESPONSE and pending[0] is not None:
                self.store[pending[0]] = frame.payload
                pending[0] = None
            return frame

        return intercept


def eavesdrop(attacker: ReplayAttacker, transcript: SessionTranscript) -> ReplayAttacker:
    """Fold a recorded transcript into the attacker's store.

    Each challenge frame pairs with the next response frame; tick gaps are
    deliberately not recorded.
    """
    pending: int | None = None
    for frame in transcript.frames:
        if frame.kind == CHALLENGE:
            pending = frame.payload
        elif frame.kind == RESPONSE and pending is not None:
            attacker.store[pending] = frame.payload
            pending = None
    return attacker


@dataclass(frozen=True)
class AttackReport:
    """Replay campaign outcome with the parity breakdown.

    outcomes holds one (drawn_t, parity_matched, succeeded) triple per
    session so totals can be reconciled against per-session logs.
    """

    trials: int
    successes: int
    parity_match_trials: int
    parity_match_successes: int
    parity_mismatch_trials: int
    parity_mismatch_successes: int
    outcomes: tuple[tuple[int, int, int], ...] = field(repr=False)

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    def record_lines(self) -> list[str]:
        return [
            f"trials = {self.trials}",
            f"successes = {self.successes}",
            f"success_rate = {self.success_rate!r}",
            f"parity_match_trials = {self.parity_match_trials}",
            f"parity_match_successes = {self.parity_match_successes}",
            f"parity_mismatch_trials = {self.parity_mismatch_trials}",
            f"parity_mismatch_successes = {self.parity_mismatch_successes}",
        ]

    def format_table(self) -> str:
        rows = [
            ("sessions", str(self.trials)),
            ("successes", str(self.successes)),
            ("success rate", f"{self.success_rate:.4f}"),
            ("parity match", f"{self.parity_match_successes}/{self.parity_match_trials}"),
            ("parity mismatch", f"{self.parity_mismatch_successes}/{self.parity_mismatch_trials}"),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def _recorded_session(recorded) -> tuple[int, int, int]:
    if isinstance(recorded, SessionTranscript):
        cf = recorded.challenge_frames()
        if len(cf) < 2:
            raise ValueError("recorded transcript is not a full two-challenge session")
        return cf[0].payload, cf[1].payload, cf[1].tick - cf[0].tick
    c1, c2, t = recorded
    return int(c1), int(c2), int(t)


def replay_attack(
    attacker: ReplayAttacker,
    registry: ServerRegistry,
    sessions: int,
    reuse_challenges: bool = True,
    recorded=None,
    parity_policy: str = "random",
    rng_seed: int = 0,
) -> AttackReport:
    """Run authentication sessions answered purely from the attacker's store.

    reuse_challenges forces the server to reissue the recorded session's
    (C1, C2) with a fresh t each time (recorded: a SessionTranscript or a
    (C1, C2, t) triple); otherwise the server draws fresh challenges.
    parity_policy constrains the fresh t against the recorded one: "random"
    draws uniformly from the registry's range, "match"/"flip" force its
    parity.  The recorded t is harness ground truth for the breakdown; the
    attacker itself never sees it.
    """
    if not attacker.store:
        raise EmptyStore("attacker has not eavesdropped any session")
    if reuse_challenges and recorded is None:
        raise ValueError("reuse_challenges needs the recorded session")
    rng = np.random.default_rng(rng_seed)
    t_min, t_max = registry.t_range
    t_values = np.arange(t_min, t_max + 1)
    if recorded is not None:
        c1_rec, c2_rec, t_rec = _recorded_session(recorded)

    outcomes: list[tuple[int, int, int]] = []
    for _ in range(sessions):
        if reuse_challenges:
            if parity_policy == "random":
                pool = t_values
            elif parity_policy == "flip":
                pool = t_values[t_values % 2 != t_rec % 2]
            elif parity_policy == "match":
                pool = t_values[t_values % 2 == t_rec % 2]
            else:
                raise ValueError(f"unknown parity policy {parity_policy!r}")
            t_new = int(rng.choice(pool))
            forced = (c1_rec, c2_rec, t_new)
        else:
            forced = None
        result = run_authentication(registry, attacker, forced_session=forced)
        t_drawn = result.session[2]
        matched = int(recorded is not None and t_drawn % 2 == t_rec % 2)
        outcomes.append((t_drawn, matched, int(result.passed)))

    match = [o for o in outcomes if o[1]]
    mismatch = [o for o in outcomes if not o[1]]
    return AttackReport(
        trials=len(outcomes),
        successes=sum(o[2] for o in outcomes),
        parity_match_trials=len(match),
        parity_match_successes=sum(o[2] for o in match),
        parity_mismatch_trials=len(mismatch),
        parity_mismatch_successes=sum(o[2] for o in mismatch),
        outcomes=tuple(outcomes),
    )


# -- modeling ----------------------------------------------------------------


@dataclass(frozen=True)
class CrpRecord:
    """One observed challenge/response-bit pair."""

    challenge: int
    label: int
    width: int


@dataclass(frozen=True)
class LinearAttackModel:
    """A trained linear unit over parity features."""

    weights: np.ndarray
    train_size: int
    holdout_accuracy: float

    def predict(self, challenge: int) -> int:
        phi = parity_features(challenge, self.weights.size - 1)
        return 1 if float(phi @ self.weights) > 0 else 0

    def predict_batch(self, challenges: np.ndarray) -> np.ndarray:
        phi = features_from_ints(challenges, self.weights.size - 1)
        return (phi @ self.weights > 0).astype(np.uint8)

    def record_lines(self) -> list[str]:
        return [
            f"train_size = {self.train_size}",
            f"holdout_accuracy = {self.holdout_accuracy!r}",
        ]


def collect_naked_crps(
    instance: ApufInstance, count: int, rng_seed: int = 0
) -> list[CrpRecord]:
    """Noiseless raw-lane CRPs at uniform random challenges."""
    rng = np.random.default_rng(rng_seed)
    challenges = rng.integers(0, 1 << instance.n_stages, size=count)
    labels = eval_raw_batch(instance, challenges)
    return [
        CrpRecord(int(c), int(y), instance.n_stages)
        for c, y in zip(challenges, labels)
    ]


def collect_obfuscated_crps(
    device: PufDevice, count: int, mode: int = 1, rng_seed: int = 0, lane: int = 0
) -> list[CrpRecord]:
    """External-interface CRPs: uniform nonzero external challenge ->
    one lane's final folded bit at a fixed mode."""
    rng = np.random.default_rng(rng_seed)
    n = device.config.n_stages
    seeds = rng.integers(1, 1 << n, size=count)
    pair = device.config.lane_pairs[lane]
    inst = device.lanes[lane]
    weights, offset = inst.weights, inst.offset
    sigma, voter_t = device.config.sigma_noise, device.config.voter_t

    def voted(_, chosen: np.ndarray) -> np.ndarray:
        mu = features_from_ints(chosen, n) @ weights + offset
        if sigma == 0:
            return (mu > 0).astype(np.uint8)
        draws = rng.standard_normal((chosen.size, voter_t)) * sigma
        ones = ((mu[:, None] + draws) > 0).sum(axis=1)
        return (2 * ones > voter_t).astype(np.uint8)

    bits = run_rounds(
        pair.pair[0].feed, pair.pair[1].feed, seeds, mode & 1,
        pair.rounds_per_response, voted,
    )
    return [CrpRecord(int(c), int(b), n) for c, b in zip(seeds, bits)]


def train_linear_attack(
    crps,
    split: float = 0.8,
    epochs: int = 300,
    learning_rate: float = 0.5,
    rng_seed: int = 0,
) -> LinearAttackModel:
    """Fit a logistic unit on parity features by full-batch gradient descent.

    Deterministic given rng_seed (which only shuffles the train/holdout
    split).  Reports accuracy on the held-out fraction.
    """
    crps = list(crps)
    if not crps:
        raise EmptyDataset("no CRP records to train on")
    if not 0 < split < 1:
        raise ValueError(f"split {split} outside (0, 1)")
    n = crps[0].width
    if any(r.width != n for r in crps):
        raise WidthMismatch("mixed challenge widths in the dataset")
    challenges = np.array([r.challenge for r in crps], dtype=np.int64)
    labels = np.array([r.label for r in crps], dtype=np.float64)
    phi = features_from_ints(challenges, n)

    order = np.random.default_rng(rng_seed).permutation(len(crps))
    cut = int(round(split * len(crps)))
    train_idx, hold_idx = order[:cut], order[cut:]
    x_train, y_train = phi[train_idx], labels[train_idx]
    x_hold, y_hold = phi[hold_idx], labels[hold_idx]

    w = np.zeros(n + 1)
    for _ in range(epochs):
        z = x_train @ w
        p = 1.0 / (1.0 + np.exp(-z))
        w -= learning_rate * (x_train.T @ (p - y_train)) / len(y_train)

    if len(y_hold):
        predictions = (x_hold @ w > 0).astype(np.float64)
        accuracy = float((predictions == y_hold).mean())
    else:
        accuracy = float("nan")
    return LinearAttackModel(weights=w, train_size=len(y_train), holdout_accuracy=accuracy)


def save_crp_dataset(crps, path: str) -> None:
    """Dataset file: one `challenge_hex label` line per record."""
    crps = list(crps)
    if not crps:
        raise EmptyDataset("nothing to save")
    hex_width = (crps[0].width + 3) // 4
    lines = [f"{r.challenge:0{hex_width}x} {r.label}" for r in crps]
    _atomic_write(path, "\n".join(lines) + "\n")


def load_crp_dataset(path: str, width: int) -> list[CrpRecord]:
    out: list[CrpRecord] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            c_hex, label = line.split()
            out.append(CrpRecord(int(c_hex, 16), int(label), width))
    if not out:
        raise EmptyDataset(f"{path} holds no records")
    return out


# -- metrics -----------------------------------------------------------------


@dataclass(frozen=True)
class MetricsRecord:
    """Standard PUF quality figures over a challenge sample."""

    uniformity: float
    reliability: float
    uniqueness: float
    n_lanes: int
    n_challenges: int
    repeats: int

    def record_lines(self) -> list[str]:
        return [
            f"uniformity = {self.uniformity!r}",
            f"reliability = {self.reliability!r}",
            f"uniqueness = {self.uniqueness!r}",
            f"n_lanes = {self.n_lanes}",
            f"n_challenges = {self.n_challenges}",
            f"repeats = {self.repeats}",
        ]

    def format_table(self) -> str:
        rows = [
            ("uniformity", f"{self.uniformity:.4f}"),
            ("reliability", f"{self.reliability:.4f}"),
            ("uniqueness", f"{self.uniqueness:.4f}"),
            ("lanes", str(self.n_lanes)),
            ("challenges", str(self.n_challenges)),
            ("repeats", str(self.repeats)),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def puf_metrics(lanes_or_devices, challenges: np.ndarray, repeats: int = 11, rng_seed: int = 0) -> MetricsRecord:
    """Uniformity, reliability, and uniqueness over a common challenge sample.

    Accepts a sequence of lane instances and/or devices (devices contribute
    all their lanes).  Reliability re-evaluates each lane `repeats` times
    with fresh noise against its noiseless reference; at sigma 0 it is
    exactly 1.  Uniqueness averages pairwise Hamming fractions between lane
    references.
    """
    lanes: list[ApufInstance] = []
    for item in lanes_or_devices:
        if isinstance(item, PufDevice):
            lanes.extend(item.lanes)
        else:
            lanes.append(item)
    challenges = np.asarray(challenges, dtype=np.int64)
    if challenges.size < 1000:
        raise InsufficientSample(
            f"{challenges.size} challenges < 1000 needed for stated tolerances"
        )
    if not lanes:
        raise InsufficientSample("no lanes to measure")

    rng = np.random.default_rng(rng_seed)
    reference = np.stack([eval_raw_batch(lane, challenges) for lane in lanes])
    uniformity = float(reference.mean())

    flips = 0
    for i, lane in enumerate(lanes):
        for _ in range(repeats):
            noise = rng.standard_normal(challenges.size) * lane.sigma_noise
            noisy = eval_raw_batch(lane, challenges, noise)
            flips += int((noisy ^ reference[i]).sum())
    reliability = 1.0 - flips / (len(lanes) * repeats * challenges.size)

    if len(lanes) >= 2:
        total = 0.0
        pairs = 0
        for i in range(len(lanes)):
            for j in range(i + 1, len(lanes)):
                total += float((reference[i] ^ reference[j]).mean())
                pairs += 1
        uniqueness = total / pairs
    else:
        uniqueness = float("nan")

    return MetricsRecord(
        uniformity=uniformity,
        reliability=reliability,
        uniqueness=uniqueness,
        n_lanes=len(lanes),
        n_challenges=int(challenges.size),
        repeats=repeats,
    )
