"""Random-choice routing shared by Monte Carlo and exact enumeration.

Every discrete random event in a protocol run (measurement outcomes,
classical coin flips inside strategies) goes through a chooser.  A
``SampledChooser`` draws from per-actor seeded streams; a ``ReplayChooser``
follows a scripted prefix so that :func:`enumerate_branches` can walk the
entire outcome tree with exact path probabilities.

Choices whose distribution is deterministic (one outcome carries essentially
all mass) consume no randomness and create no branch.  This keeps the stream
alignment identical between a strategy that performs a redundant measurement
and one that does not, and keeps branch trees minimal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

DETERMINISTIC_ATOL = 1e-12
BRANCH_PROB_FLOOR = 1e-12


class BranchCapacityError(RuntimeError):
    """Exact enumeration exceeded the configured branch budget."""


def _clean_probs(probs: Sequence[float]) -> tuple[float, ...]:
    return tuple(max(float(p), 0.0) for p in probs)


def _deterministic_index(probs: tuple[float, ...]) -> int | None:
    i = max(range(len(probs)), key=probs.__getitem__)
    return i if probs[i] >= 1.0 - DETERMINISTIC_ATOL else None


class Chooser:
    """Base class: tracks the probability of the realized path."""

    def __init__(self):
        self.path_probability = 1.0
        self.steps: list[tuple[str, int, float]] = []

    def choose(self, actor: str, probs: Sequence[float], desc: str) -> int:
        probs = _clean_probs(probs)
        i = _deterministic_index(probs)
        if i is None:
            i = self._draw(actor, probs, desc)
            self.steps.append((desc, i, probs[i]))
        self.path_probability *= probs[i]
        return i

    def _draw(self, actor: str, probs: tuple[float, ...], desc: str) -> int:
        raise NotImplementedError


class SampledChooser(Chooser):
    """Draws each actor's choices from that actor's own seeded stream.

    Streams may be passed as generators or zero-argument factories; a
    factory is only realized when its actor first draws, so parties that
    never need randomness in a run never construct a stream.
    """

    def __init__(self, rngs: dict):
        super().__init__()
        self._rngs = rngs

    def rng_for(self, actor: str) -> np.random.Generator:
        rng = self._rngs[actor]
        if not isinstance(rng, np.random.Generator):
            rng = self._rngs[actor] = rng()
        return rng

    def _draw(self, actor: str, probs: tuple[float, ...], desc: str) -> int:
        r = self.rng_for(actor).random() * sum(probs)
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if r < acc:
                return i
        return len(probs) - 1


class _BranchPending(Exception):
    """Internal: the replayed run reached an unscripted choice point."""


class ReplayChooser(Chooser):
    """Follows a scripted choice prefix; stops at the first unscripted one."""

    def __init__(self, script: tuple[int, ...]):
        super().__init__()
        self._script = script
        self._cursor = 0
        self.pending: tuple[tuple[float, ...], str] | None = None

    def _draw(self, actor: str, probs: tuple[float, ...], desc: str) -> int:
        if self._cursor < len(self._script):
            i = self._script[self._cursor]
            self._cursor += 1
            return i
        self.pending = (probs, desc)
        raise _BranchPending


@dataclass(frozen=True)
class Leaf:
    """One complete outcome branch of an enumerated run."""

    result: object
    probability: float
    steps: tuple[tuple[str, int, float], ...]

    def describe(self) -> str:
        if not self.steps:
            return "(deterministic)"
        return "; ".join(f"{desc}={i}" for desc, i, _ in self.steps)


def enumerate_branches(
    run: Callable[[Chooser], object], max_branches: int = 10**6
) -> list[Leaf]:
    """Exhaustively explore every outcome branch of ``run``.

    ``run`` must be deterministic apart from its chooser.  Each leaf carries
    the run's result and the exact probability of that branch; probabilities
    sum to one (up to the mass of branches below the floor, which is ~1e-12
    per dropped branch).
    """
    frontier: list[tuple[int, ...]] = [()]
    leaves: list[Leaf] = []
    expanded = 0
    while frontier:
        script = frontier.pop()
        chooser = ReplayChooser(script)
        try:
            result = run(chooser)
        except _BranchPending:
            probs, _ = chooser.pending
            expanded += len(probs)
            if expanded > max_branches:
                raise BranchCapacityError(
                    f"enumeration exceeded {max_branches} branches"
                ) from None
            # Reverse keeps leaf output in natural (low outcome first) order.
            for i in reversed(range(len(probs))):
                if probs[i] > BRANCH_PROB_FLOOR:
                    frontier.append(script + (i,))
        else:
            leaves.append(
                Leaf(result, chooser.path_probability, tuple(chooser.steps))
            )
    return leaves
