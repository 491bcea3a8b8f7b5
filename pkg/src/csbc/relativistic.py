"""Discrete-event simulation of the timing-based commitment variant.

Six sites on a line (or any metric layout): the two main sites ``A`` and
``B``, a near pair ``A1``/``B1`` and a far pair ``A2``/``B2``.  Signals
travel at unit speed.  The committed bit is revealed at the far site
``A2`` while the near sites fix a coin toss; security rests on the reveal
being spacelike separated from the coin, which the geometry guarantees and
:func:`causality_check` verifies.  The coin decides whether the receiver
returns the commitment qubit for testing or keeps it and tests it himself
once the reveal reaches him.

Simulated time only; the coin-toss subprotocol itself is abstracted to a
single ``coin_fixed`` event at a configurable time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import qsim
from .branching import Chooser, SampledChooser, enumerate_branches
from .streams import derive_rng

SITES = ("A", "B", "A1", "B1", "A2", "B2")

# Operational readings of "roughly equal" and "much smaller" separations.
DEFAULT_APPROX_RATIO = 2.0
DEFAULT_SCALE_RATIO = 10.0


class GeometryError(ValueError):
    """Site layout violates the required separation hierarchy."""


def _coords(value) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise GeometryError(f"coordinates must be scalars or vectors, got {value!r}")
    return arr


@dataclass(frozen=True, eq=False)
class SiteConfig:
    """Positions of the six sites, with the separation hierarchy enforced.

    Distances are Euclidean with signal speed 1; pass ``approx_ratio`` /
    ``scale_ratio`` to loosen or tighten how the "roughly equal" and
    "an order of magnitude apart" constraints are read.
    """

    positions: dict[str, np.ndarray]
    approx_ratio: float = DEFAULT_APPROX_RATIO
    scale_ratio: float = DEFAULT_SCALE_RATIO

    def __post_init__(self):
        missing = [s for s in SITES if s not in self.positions]
        if missing:
            raise GeometryError(f"missing site positions: {missing}")
        coords = {s: _coords(p) for s, p in self.positions.items()}
        dims = {c.shape[0] for c in coords.values()}
        if len(dims) != 1:
            raise GeometryError("all sites must share one coordinate dimension")
        object.__setattr__(self, "positions", coords)
        for i, s1 in enumerate(SITES):
            for s2 in SITES[i + 1:]:
                if self.distance(s1, s2) <= 0.0:
                    raise GeometryError(f"sites {s1} and {s2} are co-located")
        pairs = [self.distance("A", "B"), self.distance("A1", "B1"),
                 self.distance("A2", "B2")]
        if max(pairs) > self.approx_ratio * min(pairs):
            raise GeometryError(
                f"pair separations {pairs} are not within a factor "
                f"{self.approx_ratio} of each other"
            )
        d_ab = self.distance("A", "B")
        d_a1 = self.distance("A", "A1")
        d_a2 = self.distance("A", "A2")
        if not d_ab * self.scale_ratio <= d_a1:
            raise GeometryError(
                f"d(A,B)={d_ab} must be at most d(A,A1)/{self.scale_ratio}={d_a1}"
            )
        if not d_a1 * self.scale_ratio <= d_a2:
            raise GeometryError(
                f"d(A,A1)={d_a1} must be at most d(A,A2)/{self.scale_ratio}={d_a2}"
            )

    def distance(self, s1: str, s2: str) -> float:
        try:
            p1, p2 = self.positions[s1], self.positions[s2]
        except KeyError as exc:
            raise GeometryError(f"unknown site {exc.args[0]!r}") from None
        return float(np.linalg.norm(p1 - p2))

    def scaled(self, factor: float) -> "SiteConfig":
        return SiteConfig(
            positions={s: p * factor for s, p in self.positions.items()},
            approx_ratio=self.approx_ratio,
            scale_ratio=self.scale_ratio,
        )


def default_sites() -> SiteConfig:
    """Line layout: main pair at 0/1, near pair at 100, far pair at 10000."""
    return SiteConfig(
        positions={
            "A": 0.0, "B": 1.0,
            "A1": 100.0, "B1": 101.0,
            "A2": 10000.0, "B2": 10001.0,
        }
    )


@dataclass(frozen=True)
class RelEvent:
    """Spacetime-stamped event; receive events carry their send pairing."""

    site: str
    time: float
    kind: str
    payload: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "site": self.site,
            "time": self.time,
            "kind": self.kind,
            "payload": self.payload,
        }


@dataclass(frozen=True)
class RelTranscript:
    events: tuple[RelEvent, ...]
    causality_ok: bool
    detection: bool
    coin: int

    def to_json_dict(self) -> dict:
        return {
            "causality_ok": self.causality_ok,
            "detection": self.detection,
            "coin": self.coin,
            "events": [e.to_json_dict() for e in self.events],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


class _Timeline:
    def __init__(self, cfg: SiteConfig):
        self.cfg = cfg
        self.events: list[RelEvent] = []

    def at(self, site: str, time: float, kind: str, **payload) -> None:
        self.events.append(RelEvent(site, time, kind, payload))

    def send(self, frm: str, t_send: float, to: str, kind: str, **payload) -> float:
        """Emit a light-speed message; returns the arrival time."""
        t_recv = t_send + self.cfg.distance(frm, to)
        self.at(frm, t_send, "msg", to=to, about=payload.get("about", kind))
        self.events.append(
            RelEvent(
                to,
                t_recv,
                kind,
                {**payload, "sent_from": frm, "sent_at": t_send},
            )
        )
        return t_recv

    def sorted_events(self) -> tuple[RelEvent, ...]:
        return tuple(sorted(self.events, key=lambda e: (e.time, e.site, e.kind)))


def _measure_qubit(
    amps: np.ndarray, projectors, chooser: Chooser, actor: str, desc: str
) -> tuple[int, np.ndarray]:
    probs, posts = [], []
    for proj in projectors:
        post = proj @ amps
        p = float(np.real(np.vdot(post, post)))
        probs.append(max(p, 0.0))
        posts.append(post)
    i = chooser.choose(actor, probs, desc)
    return i, posts[i] / math.sqrt(max(probs[i], 1e-300))


def _run_timeline(
    cfg: SiteConfig,
    bit: int,
    commit_states: tuple[np.ndarray, np.ndarray],
    b_measure_angle: Optional[float],
    coin: Callable[[Chooser], int],
    chooser: Chooser,
    t_coin: float,
) -> RelTranscript:
    psi0, psi1 = commit_states
    tl = _Timeline(cfg)
    d_a_a2 = cfg.distance("A", "A2")

    # Commitment long before the unveiling; reveal at the far site is t = 0.
    t_commit = -2.0 * d_a_a2
    tl.at("A", t_commit, "commit_sent", bit_hidden=True)
    t_qubit_at_b = tl.send("A", t_commit, "B", "msg", about="commitment qubit")
    qubit = np.array(psi1 if bit else psi0, dtype=complex)

    if b_measure_angle is not None:
        c, s = math.cos(b_measure_angle), math.sin(b_measure_angle)
        basis = [
            qsim.projector(np.array([c, s], dtype=complex)),
            qsim.projector(np.array([-s, c], dtype=complex)),
        ]
        _, qubit = _measure_qubit(
            qubit, basis, chooser, "B", "B:commitment measurement"
        )

    # A briefs her far agent in time for the reveal at t = 0.
    tl.send("A", -d_a_a2, "A2", "msg", about="bit for reveal")
    tl.at("A2", 0.0, "reveal", bit=bit)
    t_b2_knows = tl.send("A2", 0.0, "B2", "msg", about="revealed bit")

    coin_value = coin(chooser)
    tl.at("A", t_coin, "coin_fixed", coin=coin_value)
    t_b_coin = tl.send("A", t_coin, "B", "msg", about="coin result")

    expected = np.array(psi1 if bit else psi0, dtype=complex)
    test = qsim.binary_projectors(expected)
    if coin_value == 0:
        tl.at("A", t_coin, "return_request")
        t_back = tl.send("B", t_b_coin, "A", "state_returned")
        outcome, _ = _measure_qubit(qubit, test, chooser, "A", "A:return test")
        tl.at("A", t_back, "test_done", passed=outcome == 0)
    else:
        t_b_ready = max(tl.send("B2", t_b2_knows, "B", "msg", about="bit relay"),
                        t_b_coin)
        outcome, _ = _measure_qubit(qubit, test, chooser, "B", "B:keep test")
        tl.at("B", t_b_ready, "test_done", passed=outcome == 0)

    events = tl.sorted_events()
    causality_ok = not causality_check(events, cfg)
    return RelTranscript(
        events=events,
        causality_ok=causality_ok,
        detection=outcome != 0,
        coin=coin_value,
    )


def _validate_commit_states(commit_states) -> tuple[np.ndarray, np.ndarray]:
    psi0 = np.asarray(commit_states[0], dtype=complex)
    psi1 = np.asarray(commit_states[1], dtype=complex)
    for psi in (psi0, psi1):
        if psi.shape != (2,) or abs(np.linalg.norm(psi) - 1.0) > 1e-9:
            raise ValueError("commitment states must be normalized qubits")
    ov = abs(np.vdot(psi0, psi1))
    if ov < 1e-9 or ov > 1.0 - 1e-9:
        raise ValueError(
            f"commitment states must be non-orthogonal and distinct, overlap {ov}"
        )
    return psi0, psi1


def _coin_source(coin) -> Callable[[Chooser], int]:
    if coin in (0, 1):
        return lambda chooser: coin
    if coin == "fair" or coin is None:
        return lambda chooser: chooser.choose("A", (0.5, 0.5), "coin toss")
    raise ValueError(f"coin source must be 0, 1 or 'fair', got {coin!r}")


def run_rel_protocol(
    cfg: SiteConfig,
    bit: int,
    commit_states=((qsim.KET0, qsim.KET_PLUS)),
    b_strategy="honest",
    coin_source="fair",
    seed: int = 0,
    t_coin: float = 500.0,
) -> RelTranscript:
    """One seeded run of the timing-based protocol.

    ``b_strategy`` is ``"honest"`` or ``("measure", angle)``; the coin source
    is ``"fair"`` or a fixed bit.  A coin time at or past the reveal's light
    cone does not raise: the run completes with ``causality_ok`` false.
    """
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    psi0, psi1 = _validate_commit_states(commit_states)
    angle = _b_measure_angle(b_strategy)
    chooser = SampledChooser(
        {"A": derive_rng(seed, 0), "B": derive_rng(seed, 1)}
    )
    return _run_timeline(
        cfg, bit, (psi0, psi1), angle, _coin_source(coin_source), chooser, t_coin
    )


def _b_measure_angle(b_strategy) -> Optional[float]:
    if b_strategy == "honest":
        return None
    if isinstance(b_strategy, (tuple, list)) and len(b_strategy) == 2 \
            and b_strategy[0] == "measure":
        return float(b_strategy[1])
    raise ValueError(
        f"b_strategy must be 'honest' or ('measure', angle), got {b_strategy!r}"
    )


def rel_detection_exact(
    cfg: SiteConfig,
    bit: int,
    commit_states=((qsim.KET0, qsim.KET_PLUS)),
    b_strategy="honest",
    coin_source="fair",
    t_coin: float = 500.0,
) -> tuple[float, list]:
    """Exact detection probability over every measurement/coin branch."""
    psi0, psi1 = _validate_commit_states(commit_states)
    angle = _b_measure_angle(b_strategy)
    coin = _coin_source(coin_source)
    leaves = enumerate_branches(
        lambda chooser: _run_timeline(
            cfg, bit, (psi0, psi1), angle, coin, chooser, t_coin
        )
    )
    p = sum(l.probability for l in leaves if l.result.detection)
    return p, leaves


def causality_check(events: Sequence[RelEvent], cfg: SiteConfig) -> list[dict]:
    """Every light-speed or spacelike-separation violation in an event list.

    Checks each received message against its send stamp (no superluminal
    delivery) and each (coin_fixed, reveal) pair for spacelike separation.
    Returns an empty list for a consistent run.
    """
    violations = []
    for event in events:
        frm = event.payload.get("sent_from")
        if frm is None:
            continue
        dt = event.time - event.payload["sent_at"]
        dist = cfg.distance(frm, event.site)
        if dt < dist - 1e-9:
            violations.append(
                {
                    "type": "superluminal",
                    "from": frm,
                    "to": event.site,
                    "dt": dt,
                    "distance": dist,
                }
            )
    coins = [e for e in events if e.kind == "coin_fixed"]
    reveals = [e for e in events if e.kind == "reveal"]
    for coin in coins:
        for reveal in reveals:
            dx = cfg.distance(coin.site, reveal.site)
            dt = abs(coin.time - reveal.time)
            if not dx > dt:
                violations.append(
                    {
                        "type": "timelike_coin",
                        "coin_site": coin.site,
                        "reveal_site": reveal.site,
                        "dt": dt,
                        "distance": dx,
                    }
                )
    return violations


@dataclass(frozen=True)
class EchoRecord:
    """One ping/echo round trip used for separation verification."""

    frm: str
    to: str
    t_ping: float
    t_echo: float


def verify_separations(
    cfg: SiteConfig, echo_log: Sequence[EchoRecord]
) -> dict[tuple[str, str], bool]:
    """Check claimed separations against round-trip times.

    A pair passes when the round trip is at least twice the claimed
    distance: light speed makes a shorter round trip impossible at that
    separation, so an early echo proves the responder is nearer than
    claimed.  Delays only lengthen round trips, so the bound is one-sided:
    it cannot catch a site claiming to be nearer than it is.
    Pairs with no echo record fail.
    """
    results: dict[tuple[str, str], bool] = {}
    seen = set()
    for rec in echo_log:
        claimed = cfg.distance(rec.frm, rec.to)
        rtt = rec.t_echo - rec.t_ping
        results[(rec.frm, rec.to)] = rtt >= 2.0 * claimed - 1e-9
        seen.add((rec.frm, rec.to))
    for s1 in SITES:
        for s2 in SITES:
            if s1 < s2 and (s1, s2) not in seen and (s2, s1) not in seen:
                results.setdefault((s1, s2), False)
    return results


def simulate_echo_log(
    cfg: SiteConfig,
    actual_positions: Optional[dict[str, np.ndarray]] = None,
    response_delay: float = 0.0,
) -> list[EchoRecord]:
    """Round-trip records for all site pairs at their actual separations.

    ``actual_positions`` overrides where sites really are (to model a party
    faking a location); ``response_delay`` models a responder holding the
    echo back.
    """
    actual = dict(cfg.positions)
    if actual_positions:
        actual.update({s: _coords(p) for s, p in actual_positions.items()})
    log = []
    for i, s1 in enumerate(SITES):
        for s2 in SITES[i + 1:]:
            d = float(np.linalg.norm(actual[s1] - actual[s2]))
            log.append(EchoRecord(s1, s2, 0.0, 2.0 * d + response_delay))
    return log
