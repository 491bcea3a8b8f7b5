"""Two-party commitment protocol state machine.

One run walks a fixed stage order:

* prelude: the receiver prepares an entangled check pair and sends one half
  to the committer.
* commitment: the committer prepares the commitment qubit C (possibly
  entangled with private ancillas) and sends it over; both parties then get
  a private local-operation window.
* unveiling: the committer may challenge the check pair, must declare the
  committed bit, and (if she did not challenge) the receiver may challenge.
* game: whoever challenged automatically loses; otherwise both measure
  their check-pair halves in the computational basis, the receiver reports
  his outcome, the committer verifies anti-correlation, and the report
  picks the loser.  A losing committer names the encoding state and the
  receiver tests C against it; a losing receiver returns C and the
  committer tests it against the state her records predict.

A party that detects cheating keeps playing; the detection flags live in
the :class:`Transcript`.  Strategies interact with the run only through
:class:`PartyView`, which never exposes amplitudes and rejects operations
on qubits the party does not hold.  All randomness flows through the run's
chooser, so the same engine serves seeded Monte Carlo and exact branch
enumeration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from . import qsim
from .branching import Chooser, SampledChooser
from .streams import derive_rng

SINGLET_A = "singlet_A"
SINGLET_B = "singlet_B"
C_QUBIT = "C"

# Beyond the protocol qubits, each side may create this many private ancillas.
ANCILLA_BUDGET = {"A": 3, "B": 2}

_Z_PROJECTORS = [qsim.projector(qsim.KET0), qsim.projector(qsim.KET1)]
_SINGLET_TEST = qsim.binary_projectors(qsim.SINGLET)


class Stage(Enum):
    PRELUDE = "prelude"
    COMMITMENT = "commitment"
    UNVEILING = "unveiling"
    GAME = "game"
    DONE = "done"


class CommitSymbol(Enum):
    """The four commitment encodings; two per bit value."""

    S0 = "S0"
    S1 = "S1"
    SPLUS = "S+"
    SMINUS = "S-"

    @property
    def bit(self) -> int:
        return 0 if self in (CommitSymbol.S0, CommitSymbol.SMINUS) else 1

    @property
    def state(self) -> np.ndarray:
        return _SYMBOL_STATES[self]


_SYMBOL_STATES = {
    CommitSymbol.S0: qsim.KET0,
    CommitSymbol.S1: qsim.KET1,
    CommitSymbol.SPLUS: qsim.KET_PLUS,
    CommitSymbol.SMINUS: qsim.KET_MINUS,
}


class IllegalMessage(Exception):
    """A strategy acted outside its permissions; the run aborts against it."""


class ProtocolError(Exception):
    """Engine misuse (not attributable to a party)."""


class _AbortRun(Exception):
    def __init__(self, actor: str, reason: str):
        super().__init__(reason)
        self.actor = actor
        self.reason = reason


class Event(NamedTuple):
    stage: str
    actor: str
    kind: str
    payload: dict

    def to_json_dict(self) -> dict:
        return {
            "stage": self.stage,
            "actor": self.actor,
            "kind": self.kind,
            "payload": self.payload,
        }


@dataclass(frozen=True)
class Transcript:
    """Complete record of one protocol run."""

    events: tuple[Event, ...]
    challenge_by: Optional[str]
    declared_bit: Optional[int]
    game_loser: Optional[str]
    a_detected: bool
    b_detected: bool
    aborted_by: Optional[str]
    seed: Optional[int] = None
    strategy_ids: Optional[dict] = None

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "strategies": self.strategy_ids,
            "challenge_by": self.challenge_by,
            "declared_bit": self.declared_bit,
            "game_loser": self.game_loser,
            "a_detected": self.a_detected,
            "b_detected": self.b_detected,
            "aborted_by": self.aborted_by,
            "events": [e.to_json_dict() for e in self.events],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


class PartyView:
    """A party's window onto the run: its qubits, messages, and choices.

    Holds no amplitudes.  Every quantum operation is delegated to the engine,
    which rejects targets outside the party's held set.
    """

    def __init__(self, role: str, run: "ProtocolRun"):
        self.role = role
        self.memory: dict = {}
        self.received: list[dict] = []
        self._run = run

    @property
    def stage(self) -> Stage:
        return self._run.stage

    @property
    def held(self) -> frozenset[str]:
        return frozenset(self._run.held[self.role])

    @property
    def c_label(self) -> Optional[str]:
        return C_QUBIT if C_QUBIT in self._run.held[self.role] else None

    @property
    def singlet_label(self) -> str:
        return SINGLET_A if self.role == "A" else SINGLET_B

    @property
    def rng(self) -> np.random.Generator:
        """Raw stream for non-enumerable strategies (sampled runs only)."""
        chooser = self._run.chooser
        if not isinstance(chooser, SampledChooser):
            raise IllegalMessage(
                "raw randomness is unavailable under exact enumeration"
            )
        return chooser.rng_for(self.role)

    def choose(self, probs, desc: str) -> int:
        """Classical random choice, routed through the run's chooser."""
        return self._run.chooser.choose(self.role, probs, f"{self.role}:{desc}")

    def create_qubits(self, n: int, amps) -> tuple[str, ...]:
        """Add ``n`` private ancilla qubits in the given joint state."""
        return self._run.create_ancillas(self.role, n, amps)

    def apply(self, mat, targets) -> None:
        self._check_targets(targets)
        self._run.apply_unitary(mat, targets)

    def measure(self, ops, targets, desc: str) -> int:
        """Measure held qubits with the given complete operator family."""
        self._check_targets(targets)
        return self._run.measure(self.role, ops, targets, f"{self.role}:{desc}")

    def _check_targets(self, targets) -> None:
        missing = [t for t in targets if t not in self._run.held[self.role]]
        if missing:
            raise IllegalMessage(
                f"party {self.role} does not hold qubit(s) {missing}"
            )


class ProtocolRun:
    """Drives one run between two strategies over a shared chooser."""

    def __init__(self, strat_a, strat_b, chooser: Chooser):
        if strat_a.role != "A" or strat_b.role != "B":
            raise ProtocolError("strategies must be built for roles A and B")
        self.strat = {"A": strat_a, "B": strat_b}
        self.chooser = chooser
        self._set_stage(Stage.PRELUDE)
        self._stage_str = Stage.PRELUDE.value
        self.state: Optional[qsim.StateVector] = None
        self.held: dict[str, set[str]] = {"A": set(), "B": set()}
        self.views = {"A": PartyView("A", self), "B": PartyView("B", self)}
        self.events: list[Event] = []
        self.challenge_by: Optional[str] = None
        self.declared_bit: Optional[int] = None
        self.game_loser: Optional[str] = None
        self.a_detected = False
        self.b_detected = False
        self.aborted_by: Optional[str] = None
        self._ancillas = {"A": 0, "B": 0}

    # -- engine-level state helpers ------------------------------------

    def _set_stage(self, stage: Stage) -> None:
        self.stage = stage
        self._stage_str = stage.value

    def _event(self, actor: str, kind: str, payload: dict) -> None:
        self.events.append(Event(self._stage_str, actor, kind, payload))

    def _add_state(self, owner: str, labels: tuple[str, ...], amps) -> None:
        piece = qsim.make_state(labels, amps)
        self.state = piece if self.state is None else qsim.tensor(self.state, piece)
        self.held[owner].update(labels)

    def create_ancillas(self, owner: str, n: int, amps) -> tuple[str, ...]:
        if n < 1:
            raise IllegalMessage("must create at least one qubit")
        used = self._ancillas[owner]
        if used + n > ANCILLA_BUDGET[owner]:
            raise IllegalMessage(
                f"party {owner} ancilla budget {ANCILLA_BUDGET[owner]} exceeded"
            )
        labels = tuple(f"anc_{owner}{used + i}" for i in range(n))
        try:
            self._add_state(owner, labels, amps)
        except qsim.QsimError as exc:
            raise IllegalMessage(f"bad ancilla state: {exc}") from exc
        self._ancillas[owner] += n
        return labels

    def apply_unitary(self, mat, targets) -> None:
        try:
            self.state = qsim.apply_unitary(self.state, mat, targets)
        except qsim.QsimError as exc:
            raise IllegalMessage(str(exc)) from exc

    def measure(self, actor: str, ops, targets, desc: str) -> int:
        try:
            branches = qsim.branch_amplitudes(self.state, ops, targets)
        except qsim.QsimError as exc:
            raise IllegalMessage(str(exc)) from exc
        probs = [p for p, _ in branches]
        if abs(sum(probs) - 1.0) > 1e-6:
            raise IllegalMessage(f"measurement {desc!r} is not complete")
        i = self.chooser.choose(actor, probs, desc)
        self.state = qsim.collapse(self.state, branches[i][1], probs[i])
        return i

    def _transfer(self, label: str, frm: str, to: str) -> None:
        if label not in self.held[frm]:
            raise IllegalMessage(f"party {frm} does not hold qubit {label!r}")
        self.held[frm].discard(label)
        self.held[to].add(label)
        self._event(frm, "send_qubit", {"label": label, "to": to})
        self.views[to].received.append({"kind": "qubit", "label": label})

    def _invoke(self, actor: str, fn, *args):
        try:
            return fn(*args)
        except IllegalMessage as exc:
            raise _AbortRun(actor, str(exc)) from exc

    # -- stages ----------------------------------------------------------

    def run_commitment_phase(self) -> PartyView:
        """Drive the run up to the end of the commitment; returns B's view.

        Used by analyses that only need the receiver's pre-unveiling state
        of knowledge (e.g. information-gain computation).
        """
        self._prelude()
        self._commitment()
        return self.views["B"]

    def run(self, seed: Optional[int] = None,
            strategy_ids: Optional[dict] = None) -> Transcript:
        try:
            self._prelude()
            self._commitment()
            self._unveiling()
            self._game_and_obligations()
            self._set_stage(Stage.DONE)
            self._event("Referee", "complete", {})
        except _AbortRun as abort:
            self.aborted_by = abort.actor
            self._event(abort.actor, "abort", {"reason": abort.reason})
        return Transcript(
            events=tuple(self.events),
            challenge_by=self.challenge_by,
            declared_bit=self.declared_bit,
            game_loser=self.game_loser,
            a_detected=self.a_detected,
            b_detected=self.b_detected,
            aborted_by=self.aborted_by,
            seed=seed,
            strategy_ids=strategy_ids,
        )

    def _prelude(self) -> None:
        self._set_stage(Stage.PRELUDE)
        amps = self._invoke("B", self.strat["B"].prepare_singlet, self.views["B"])
        amps = np.asarray(amps, dtype=complex)
        if amps.shape != (4,):
            raise _AbortRun("B", "check-pair preparation must be a 2-qubit state")
        try:
            self._add_state("B", (SINGLET_A, SINGLET_B), amps)
        except qsim.QsimError as exc:
            raise _AbortRun("B", f"bad check-pair state: {exc}") from exc
        self._event("B", "prepare_pair", {"labels": [SINGLET_A, SINGLET_B]})
        self._transfer(SINGLET_A, "B", "A")

    def _commitment(self) -> None:
        self._set_stage(Stage.COMMITMENT)
        amps = self._invoke("A", self.strat["A"].commit, self.views["A"])
        amps = np.asarray(amps, dtype=complex)
        if amps.ndim != 1 or amps.shape[0] < 2:
            raise _AbortRun("A", "commitment must be a state on >= 1 qubit")
        n_total = int(np.log2(amps.shape[0]))
        if amps.shape[0] != 1 << n_total:
            raise _AbortRun("A", "commitment amplitudes must fill whole qubits")
        n_anc = n_total - 1
        if n_anc > ANCILLA_BUDGET["A"]:
            raise _AbortRun("A", f"committer ancilla budget is {ANCILLA_BUDGET['A']}")
        labels = tuple(f"anc_A{i}" for i in range(n_anc)) + (C_QUBIT,)
        try:
            self._add_state("A", labels, amps)
        except qsim.QsimError as exc:
            raise _AbortRun("A", f"bad commitment state: {exc}") from exc
        self._ancillas["A"] += n_anc
        self._event("A", "commit", {"ancillas": n_anc})
        self._transfer(C_QUBIT, "A", "B")
        self._invoke("A", self.strat["A"].window_after_commit, self.views["A"])
        self._invoke("B", self.strat["B"].window_after_commit, self.views["B"])

    def singlet_challenge(self, challenger: str) -> None:
        responder = "B" if challenger == "A" else "A"
        self.challenge_by = challenger
        label = self._invoke(
            responder, self.strat[responder].challenge_response, self.views[responder]
        )
        if label not in self.held[responder]:
            raise _AbortRun(responder, f"cannot surrender unheld qubit {label!r}")
        self._transfer(label, responder, challenger)
        own_half = SINGLET_A if challenger == "A" else SINGLET_B
        pair = (own_half, label) if challenger == "A" else (label, own_half)
        outcome = self.measure(
            challenger, _SINGLET_TEST, pair, f"{challenger}:pair test"
        )
        passed = outcome == 0
        self._event(challenger, "singlet_test", {"passed": passed})
        if not passed:
            self._flag_detected(challenger)

    def _flag_detected(self, party: str) -> None:
        if party == "A":
            self.a_detected = True
        else:
            self.b_detected = True

    def _unveiling(self) -> None:
        self._set_stage(Stage.UNVEILING)
        a_challenges = bool(
            self._invoke("A", self.strat["A"].challenge, self.views["A"])
        )
        self._event("A", "challenge_option", {"challenge": a_challenges})
        if a_challenges:
            self.singlet_challenge("A")

        bit = self._invoke("A", self.strat["A"].declare_bit, self.views["A"])
        if bit not in (0, 1):
            raise _AbortRun("A", f"declared bit must be 0 or 1, got {bit!r}")
        self.declared_bit = int(bit)
        self._event("A", "declare", {"bit": self.declared_bit})
        self.views["B"].received.append({"kind": "bit", "value": self.declared_bit})

        self._invoke("A", self.strat["A"].window_after_declare, self.views["A"])
        self._invoke("B", self.strat["B"].window_after_declare, self.views["B"])

        if not a_challenges:
            b_challenges = bool(
                self._invoke("B", self.strat["B"].challenge, self.views["B"])
            )
            self._event("B", "challenge_option", {"challenge": b_challenges})
            if b_challenges:
                self.singlet_challenge("B")

    def _game_and_obligations(self) -> None:
        self._set_stage(Stage.GAME)
        if self.challenge_by is not None:
            loser = self.challenge_by
            self._event("Referee", "auto_loss", {"loser": loser})
        else:
            loser = self.play_game()
        self.game_loser = loser
        self.loser_obligation(loser)

    def play_game(self) -> str:
        """Anti-correlated measurements plus the receiver's report pick a loser.

        The committer flags cheating when the reported outcome is not
        opposite to her own; a report of 1 makes her the loser, 0 the
        receiver.
        """
        a_out = self.measure("A", _Z_PROJECTORS, (SINGLET_A,), "A:game outcome")
        self._event("A", "measure_singlet", {"outcome": a_out})
        b_out = self.measure("B", _Z_PROJECTORS, (SINGLET_B,), "B:game outcome")
        self._event("B", "measure_singlet", {"outcome": b_out})
        report = self._invoke(
            "B", self.strat["B"].game_report, self.views["B"], b_out
        )
        if report not in (0, 1):
            raise _AbortRun("B", f"game report must be 0 or 1, got {report!r}")
        report = int(report)
        self._event("B", "report", {"bit": report})
        self.views["A"].received.append({"kind": "report", "bit": report})
        anticorrelated = report != a_out
        self._event("A", "anticorrelation_check", {"ok": anticorrelated})
        if not anticorrelated:
            self._flag_detected("A")
        loser = "A" if report == 1 else "B"
        self._event("Referee", "loser_decided", {"loser": loser})
        return loser

    def loser_obligation(self, loser: str) -> None:
        """A losing committer reveals the encoding; a losing receiver returns C."""
        if loser == "A":
            self._committer_reveals()
        else:
            self._receiver_returns()

    def _committer_reveals(self) -> None:
        symbol = self._invoke("A", self.strat["A"].name_symbol, self.views["A"])
        if not isinstance(symbol, CommitSymbol):
            raise _AbortRun("A", f"named symbol must be a CommitSymbol, got {symbol!r}")
        self._event("A", "name_symbol", {"symbol": symbol.value})
        if symbol.bit != self.declared_bit:
            # Naming a state that encodes the other bit is cheating on its face.
            self._event("B", "symbol_check", {"consistent": False, "passed": False})
            self._flag_detected("B")
            return
        if C_QUBIT not in self.held["B"]:
            self._event("B", "symbol_check", {"consistent": True, "skipped": True})
            return
        outcome = self.measure(
            "B", qsim.binary_projectors(symbol.state), (C_QUBIT,), "B:symbol check"
        )
        passed = outcome == 0
        self._event("B", "symbol_check", {"consistent": True, "passed": passed})
        if not passed:
            self._flag_detected("B")

    def _receiver_returns(self) -> None:
        label = self._invoke("B", self.strat["B"].return_qubit, self.views["B"])
        if label not in self.held["B"]:
            raise _AbortRun("B", f"cannot return unheld qubit {label!r}")
        self._transfer(label, "B", "A")
        expected = self._invoke(
            "A", self.strat["A"].expected_return_state, self.views["A"]
        )
        expected = np.asarray(expected, dtype=complex)
        if expected.shape != (2,):
            raise _AbortRun("A", "expected return state must be a single qubit")
        outcome = self.measure(
            "A", qsim.binary_projectors(expected), (label,), "A:return test"
        )
        passed = outcome == 0
        self._event("A", "return_check", {"passed": passed})
        if not passed:
            self._flag_detected("A")


def run_with_chooser(strat_a, strat_b, chooser: Chooser) -> Transcript:
    """Single run over an explicit chooser (used by exact enumeration)."""
    return ProtocolRun(strat_a, strat_b, chooser).run()


def _party_rngs(master_seed: int, *path: int) -> dict:
    # Factories: a party that never draws never pays for stream construction.
    return {
        "A": lambda: derive_rng(master_seed, *path, 0),
        "B": lambda: derive_rng(master_seed, *path, 1),
    }


def run_protocol(strat_a, strat_b, seed: int) -> Transcript:
    """One seeded run; deterministic given (strategies, seed)."""
    chooser = SampledChooser(_party_rngs(seed))
    return ProtocolRun(strat_a, strat_b, chooser).run(
        seed=seed, strategy_ids={"A": strat_a.kind, "B": strat_b.kind}
    )


def run_trial(strat_a, strat_b, master_seed: int, trial: int) -> Transcript:
    """One run of a Monte Carlo batch: streams derive from (seed, trial)."""
    chooser = SampledChooser(_party_rngs(master_seed, trial))
    return ProtocolRun(strat_a, strat_b, chooser).run()
