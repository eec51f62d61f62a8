"""Registration and the two-time authentication protocol over a simulated
tick-based channel.

Logical integer ticks replace wall-clock time.  A session is: challenge C1
at some tick, tag response one tick later, challenge C2 exactly t ticks
after C1, tag response one tick after that.  The gap t is never carried in
any frame; the tag recovers it by observing both challenge ticks, and its
parity becomes the selection mode of the second response.  The first
response of a session always runs in mode 1.

Authentication passes only when both comparisons pass; a failed first
comparison rejects immediately and C2 is never sent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .device import PufDevice, deserialize_response, _atomic_write
from .errors import ChannelTimeout, InterfaceFused, NonMonotonicTicks
from .server import (
    DEFAULT_T_RANGE,
    ServerRegistry,
    compare,
    default_tau,
    gen_session,
    predict_response,
    register_from_ttp,
    save_registry,
)

READER_TO_TAG = "reader->tag"
TAG_TO_READER = "tag->reader"
CHALLENGE = "CHALLENGE"
RESPONSE = "RESPONSE"

#: largest order where registration enumerates the full naked-CRP table
FULL_TABLE_MAX_ORDER = 12


@dataclass(frozen=True)
class Frame:
    """One carrier burst.  width is the payload bit width (hex padding only)."""

    tick: int
    direction: str
    kind: str
    payload: int
    width: int

    def line(self) -> str:
        hex_width = (self.width + 3) // 4
        return f"{self.tick} {self.direction} {self.kind} {self.payload:0{hex_width}x}"

    @classmethod
    def parse(cls, line: str) -> "Frame":
        tick, direction, kind, payload_hex = line.split()
        return cls(
            tick=int(tick),
            direction=direction,
            kind=kind,
            payload=int(payload_hex, 16),
            width=4 * len(payload_hex),
        )


@dataclass
class SessionTranscript:
    """Everything that crossed the wire in one session, plus the verdict."""

    frames: list[Frame] = field(default_factory=list)
    d1: int = 0
    d2: int = 0
    passed: bool = False

    def challenge_frames(self) -> list[Frame]:
        return [f for f in self.frames if f.kind == CHALLENGE]

    def tick_gap(self) -> int:
        """t as an eavesdropper would recover it from the challenge ticks."""
        cf = self.challenge_frames()
        if len(cf) < 2:
            raise ValueError("transcript holds fewer than two challenge frames")
        return cf[1].tick - cf[0].tick

    def save(self, path: str) -> None:
        lines = [f.line() for f in self.frames]
        lines.append(f"{self.d1} {self.d2} {int(self.passed)}")
        _atomic_write(path, "\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str) -> "SessionTranscript":
        frames: list[Frame] = []
        d1 = d2 = 0
        passed = False
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                tokens = line.split()
                if len(tokens) == 3:
                    d1, d2, passed = int(tokens[0]), int(tokens[1]), bool(int(tokens[2]))
                else:
                    frames.append(Frame.parse(line))
        return cls(frames=frames, d1=d1, d2=d2, passed=passed)


@dataclass(frozen=True)
class AuthResult:
    """Outcome of one session."""

    d1: int
    d2: int
    passed: bool
    transcript: SessionTranscript
    session: tuple[int, int, int]  # (C1, C2, drawn t)


class SimChannel:
    """Lossless ordered carrier with interceptor hooks.

    Interceptors see every transmitted frame in registration order; each may
    return the frame (tap), a replacement (man in the middle), or None
    (drop).  The log records what actually reached the far end.
    """

    def __init__(self) -> None:
        self.last_tick = -1
        self.interceptors: list = []
        self.log: list[Frame] = []

    def add_interceptor(self, interceptor) -> None:
        self.interceptors.append(interceptor)

    def transmit(self, frame: Frame) -> Frame | None:
        if frame.tick <= self.last_tick:
            raise NonMonotonicTicks(
                f"tick {frame.tick} not after {self.last_tick}"
            )
        self.last_tick = frame.tick
        for interceptor in self.interceptors:
            frame = interceptor(frame)
            if frame is None:
                return None
        self.log.append(frame)
        return frame

    def exchange(self, challenge_frame: Frame, responder, response_width: int) -> Frame:
        """Send one challenge and collect the tag's response one tick later.

        Raises ChannelTimeout when either direction is dropped or the
        responder stays silent.
        """
        delivered = self.transmit(challenge_frame)
        if delivered is None:
            raise ChannelTimeout(f"challenge at tick {challenge_frame.tick} was dropped")
        payload = responder.answer_challenge(delivered)
        if payload is None:
            raise ChannelTimeout(f"no response to challenge at tick {delivered.tick}")
        reply = Frame(
            tick=delivered.tick + 1,
            direction=TAG_TO_READER,
            kind=RESPONSE,
            payload=payload,
            width=response_width,
        )
        answered = self.transmit(reply)
        if answered is None:
            raise ChannelTimeout(f"response at tick {reply.tick} was dropped")
        return answered


def run_registration(
    device: PufDevice,
    registry_path: str | None = None,
    policy: str = "auto",
    tau: int | None = None,
    t_range: tuple[int, int] = DEFAULT_T_RANGE,
    rng_seed: int = 0,
) -> ServerRegistry:
    """Enroll a device and permanently fuse its raw interface.

    policy "full" harvests the complete naked-CRP table through the raw
    interface; "params" transfers the exact lane parameters (the
    manufacturer-data route for widths where enumeration is impractical);
    "auto" picks by order.  The registry is optionally written to
    registry_path.
    """
    if device.fused:
        raise InterfaceFused("device was already registered")
    if policy == "auto":
        policy = "full" if device.config.n_stages <= FULL_TABLE_MAX_ORDER else "params"
    if policy == "full":
        lane_data = device.raw_crp_table()
    elif policy == "params":
        lane_data = list(device.lanes)
    else:
        raise ValueError(f"unknown registration policy {policy!r}")
    device.fuse()
    if tau is None:
        tau = default_tau(device.config.k, device.config.sigma_noise)
    registry = register_from_ttp(
        lane_data,
        device.config.lane_pairs,
        tau=tau,
        t_range=t_range,
        rng_seed=rng_seed,
        voter_t=device.config.voter_t,
    )
    if registry_path is not None:
        save_registry(registry, registry_path)
    return registry


def run_authentication(
    registry: ServerRegistry,
    responder,
    channel: SimChannel | None = None,
    forced_session: tuple[int, int, int] | None = None,
) -> AuthResult:
    """One two-time session against any responder (honest tag or attacker).

    forced_session injects (C1, C2, t) instead of drawing them; the harness
    hook for replay experiments.  Timeouts become a 0 decision, never an
    exception.
    """
    if channel is None:
        channel = SimChannel()
    c1, c2, t = forced_session if forced_session is not None else gen_session(registry)
    k, n = registry.k, registry.n_stages
    responder.begin_session()
    log_start = len(channel.log)
    tick0 = channel.last_tick + 1

    def verdict(challenge: int, mode: int, tick: int) -> int:
        frame = Frame(tick, READER_TO_TAG, CHALLENGE, challenge, n)
        try:
            reply = channel.exchange(frame, responder, response_width=k)
        except ChannelTimeout:
            return 0
        expected = predict_response(registry, challenge, mode)
        return compare(expected, deserialize_response(reply.payload, k), registry.tau)

    d1 = verdict(c1, 1, tick0)
    d2 = 0
    if d1 == 1:
        d2 = verdict(c2, t & 1, tick0 + t)
    passed = d1 == 1 and d2 == 1
    transcript = SessionTranscript(
        frames=list(channel.log[log_start:]), d1=d1, d2=d2, passed=passed
    )
    return AuthResult(d1=d1, d2=d2, passed=passed, transcript=transcript, session=(c1, c2, t))
