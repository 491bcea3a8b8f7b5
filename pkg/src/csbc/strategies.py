"""Party strategies: honest behaviour and the attack families under study.

A strategy is a bundle of callbacks invoked at the protocol's decision
points.  Callbacks only ever see the party's own :class:`~csbc.protocol.PartyView`
and route all randomness through it, so every shipped strategy works both
under seeded sampling and under exact branch enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import qsim
from .protocol import C_QUBIT, CommitSymbol, IllegalMessage, PartyView

BIT_SYMBOLS = {
    0: (CommitSymbol.S0, CommitSymbol.SMINUS),
    1: (CommitSymbol.S1, CommitSymbol.SPLUS),
}

# Flipping a commitment maps each encoding to the orthogonal one of the
# opposite bit, which a symbol check then rejects with certainty.
ORTHOGONAL_SYMBOL = {
    CommitSymbol.S0: CommitSymbol.S1,
    CommitSymbol.S1: CommitSymbol.S0,
    CommitSymbol.SMINUS: CommitSymbol.SPLUS,
    CommitSymbol.SPLUS: CommitSymbol.SMINUS,
}

BREIDBART_ANGLE = np.pi / 8


class InvalidCommitment(ValueError):
    """Entangled commitment whose unveiling branches cannot collapse cleanly."""


class InvalidAttack(ValueError):
    """Malformed ancilla attack (non-unitary coupling or bad readout)."""


def _noop(view: PartyView) -> None:
    return None


@dataclass(frozen=True, eq=False)
class StrategySpec:
    """A party's decision procedure at each protocol decision point."""

    role: str
    kind: str
    params: dict = field(default_factory=dict)
    enumerable: bool = True
    # committer decision points
    commit: Optional[Callable] = None
    declare_bit: Optional[Callable] = None
    name_symbol: Optional[Callable] = None
    expected_return_state: Optional[Callable] = None
    # receiver decision points
    prepare_singlet: Optional[Callable] = None
    game_report: Optional[Callable] = None
    return_qubit: Optional[Callable] = None
    # shared decision points
    challenge: Optional[Callable] = None
    challenge_response: Optional[Callable] = None
    window_after_commit: Callable = _noop
    window_after_declare: Callable = _noop


# -- honest parties ------------------------------------------------------


def honest_committer(bit: int, challenge: bool = False) -> StrategySpec:
    """Commits one of the two encodings of ``bit`` uniformly at random.

    ``challenge=True`` exercises the committer's legal option of demanding
    the check pair at the unveiling (and thereby losing the game).
    """
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")

    def commit(view: PartyView) -> np.ndarray:
        i = view.choose((0.5, 0.5), "commit symbol")
        symbol = BIT_SYMBOLS[bit][i]
        view.memory["symbol"] = symbol
        return symbol.state

    return StrategySpec(
        role="A",
        kind="honest_committer",
        params={"bit": bit, "challenge": challenge},
        commit=commit,
        declare_bit=lambda view: bit,
        name_symbol=lambda view: view.memory["symbol"],
        expected_return_state=lambda view: view.memory["symbol"].state,
        challenge=lambda view: challenge,
        challenge_response=lambda view: view.singlet_label,
    )


def honest_receiver(challenge: bool = False) -> StrategySpec:
    """Prepares a true singlet, never touches C, reports truthfully."""
    return StrategySpec(
        role="B",
        kind="honest_receiver",
        params={"challenge": challenge},
        prepare_singlet=lambda view: qsim.SINGLET,
        game_report=lambda view, outcome: outcome,
        return_qubit=lambda view: C_QUBIT,
        challenge=lambda view: challenge,
        challenge_response=lambda view: view.singlet_label,
    )


# -- entangled (improper) commitments -------------------------------------


@dataclass(frozen=True, eq=False)
class EntangledCommitment:
    """Commitment of the C half of an ancilla-entangled state.

    ``alphas`` maps each encoding symbol to an unnormalized ancilla vector;
    the committed joint state is the sum over symbols of (ancilla vector
    tensor encoding state) and must have unit norm.  ``unveil_unitary`` acts
    on the ancilla register at unveiling, after which the last ancilla qubit
    is measured as the declared bit.
    """

    alphas: dict[CommitSymbol, np.ndarray]
    unveil_unitary: np.ndarray

    def __post_init__(self):
        alphas = {}
        dim = None
        for sym in CommitSymbol:
            vec = np.asarray(self.alphas.get(sym, None), dtype=complex) \
                if sym in self.alphas else None
            if vec is None:
                continue
            if vec.ndim != 1:
                raise InvalidCommitment("ancilla vectors must be 1-d")
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise InvalidCommitment("ancilla vectors must share a dimension")
            alphas[sym] = vec
        if dim is None:
            raise InvalidCommitment("at least one ancilla vector is required")
        n = int(np.log2(dim))
        if 1 << n != dim or not 1 <= n <= 3:
            raise InvalidCommitment(
                f"ancilla dimension {dim} must be 2, 4 or 8 (1-3 qubits)"
            )
        u = np.asarray(self.unveil_unitary, dtype=complex)
        if u.shape != (dim, dim) or not np.allclose(
            u.conj().T @ u, np.eye(dim), atol=1e-9
        ):
            raise InvalidCommitment("unveil operator must be unitary on the ancilla")
        norm = np.linalg.norm(self.joint_amps_of(alphas, dim))
        if abs(norm - 1.0) > 1e-9:
            raise InvalidCommitment(f"joint commitment state norm is {norm}, not 1")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "unveil_unitary", u)

    @staticmethod
    def joint_amps_of(alphas: dict, dim: int) -> np.ndarray:
        psi = np.zeros((dim, 2), dtype=complex)
        for sym, vec in alphas.items():
            psi += np.outer(vec, sym.state)
        return psi.reshape(dim * 2)

    @property
    def ancilla_dim(self) -> int:
        return next(iter(self.alphas.values())).shape[0]

    @property
    def ancilla_qubits(self) -> int:
        return int(np.log2(self.ancilla_dim))

    def joint_amps(self) -> np.ndarray:
        """Committed state over (ancillas..., C), big-endian, C last."""
        return self.joint_amps_of(self.alphas, self.ancilla_dim)

    def rho_c(self) -> qsim.DensityMatrix:
        """Reduced state of the commitment qubit the receiver holds."""
        labels = tuple(f"a{i}" for i in range(self.ancilla_qubits)) + ("C",)
        state = qsim.make_state(labels, self.joint_amps())
        return qsim.reduced_state(state, ("C",))


@dataclass(frozen=True, eq=False)
class _UnveilBranch:
    """One declared-bit branch of an unveiled commitment."""

    bit: int
    probability: float
    symbols: tuple[CommitSymbol, CommitSymbol]
    components: tuple[np.ndarray, np.ndarray]  # residual-ancilla vectors
    cross_overlap: float  # |<u|w>| between the two components


def _dual_pair(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    basis = np.column_stack([x, y])
    dual = np.linalg.inv(basis).conj().T
    return dual[:, 0], dual[:, 1]


def unveil_branches(ec: EntangledCommitment) -> list[_UnveilBranch]:
    """Decompose the post-unveiling state into its two declared-bit branches.

    For each bit value k the residual (ancilla', C) state is expanded over
    the two encodings of k; a commitment lets the committer collapse C onto
    a definite encoding exactly when the two expansion components are
    orthogonal, so ``cross_overlap`` is the cheat-certainty diagnostic.
    """
    dim = ec.ancilla_dim
    chi = (ec.unveil_unitary @ ec.joint_amps().reshape(dim, 2)).reshape(
        dim // 2, 2, 2
    )
    branches = []
    for k in (0, 1):
        phi = chi[:, k, :]
        sym_a, sym_b = BIT_SYMBOLS[k]
        d_a, d_b = _dual_pair(sym_a.state, sym_b.state)
        u = phi @ d_a.conj()
        w = phi @ d_b.conj()
        prob = float(np.real(np.vdot(phi, phi)))
        branches.append(
            _UnveilBranch(
                bit=k,
                probability=prob,
                symbols=(sym_a, sym_b),
                components=(u, w),
                cross_overlap=float(abs(np.vdot(u, w))),
            )
        )
    return branches


def entangled_committer(ec: EntangledCommitment) -> StrategySpec:
    """Commits the C half of an entangled state; unveils by measurement.

    Construction rejects commitments whose unveiling branches cannot
    collapse C onto a definite encoding (cross overlap beyond 1e-9): such a
    committer could not be certain of surviving the post-game checks.
    """
    branches = unveil_branches(ec)
    for br in branches:
        if br.cross_overlap > 1e-9:
            raise InvalidCommitment(
                f"bit-{br.bit} branch has component overlap {br.cross_overlap:.3e}"
            )

    n_anc = ec.ancilla_qubits
    anc_labels = tuple(f"anc_A{i}" for i in range(n_anc))
    prime_labels = anc_labels[:-1]

    def commit(view: PartyView) -> np.ndarray:
        return ec.joint_amps()

    def declare_bit(view: PartyView) -> int:
        view.apply(ec.unveil_unitary, anc_labels)
        k = view.measure(
            [qsim.projector(qsim.KET0), qsim.projector(qsim.KET1)],
            (anc_labels[-1],),
            "unveil bit",
        )
        branch = branches[k]
        view.memory["symbol"] = _collapse_symbol(view, branch, prime_labels)
        return k

    return StrategySpec(
        role="A",
        kind="entangled_committer",
        params={"commitment": ec},
        commit=commit,
        declare_bit=declare_bit,
        name_symbol=lambda view: view.memory["symbol"],
        expected_return_state=lambda view: view.memory["symbol"].state,
        challenge=lambda view: False,
        challenge_response=lambda view: view.singlet_label,
    )


def _collapse_symbol(
    view: PartyView, branch: _UnveilBranch, prime_labels: tuple[str, ...]
) -> CommitSymbol:
    """Measure the residual ancilla so C collapses onto one encoding."""
    u, w = branch.components
    nu, nw = np.linalg.norm(u), np.linalg.norm(w)
    if not prime_labels:
        return branch.symbols[0] if nu >= nw else branch.symbols[1]
    dim = 1 << len(prime_labels)
    p_u = qsim.projector(u) if nu > 1e-9 else np.zeros((dim, dim), dtype=complex)
    p_w = qsim.projector(w) if nw > 1e-9 else np.zeros((dim, dim), dtype=complex)
    rest = np.eye(dim, dtype=complex) - p_u - p_w
    i = view.measure([p_u, p_w, rest], prime_labels, "collapse symbol")
    if i == 2:
        raise IllegalMessage("commitment residual escaped both encodings")
    return branch.symbols[i]


def classical_commitment(
    symbol: CommitSymbol, ancilla_qubits: int = 2
) -> EntangledCommitment:
    """Degenerate entangled commitment equivalent to committing ``symbol``."""
    dim = 1 << ancilla_qubits
    vec = np.zeros(dim, dtype=complex)
    vec[symbol.bit] = 1.0  # last ancilla qubit carries the bit
    return EntangledCommitment(
        alphas={symbol: vec}, unveil_unitary=np.eye(dim, dtype=complex)
    )


def random_valid_commitment(
    rng: np.random.Generator, ancilla_qubits: int = 2
) -> EntangledCommitment:
    """Random commitment that passes the clean-collapse validity check.

    Built backwards: draw orthogonal residual components for each bit
    branch, random branch weights, then hide the structure behind a Haar
    unitary that the unveiling step undoes.
    """
    if not 1 <= ancilla_qubits <= 3:
        raise ValueError("ancilla_qubits must be 1..3")
    dim = 1 << ancilla_qubits
    half = dim // 2
    weights = rng.dirichlet(np.ones(4))
    if half == 1:
        # No room for two orthogonal components: one per branch.
        dirs = [np.ones(1, dtype=complex), np.zeros(1, dtype=complex)]
        pairs = [(dirs[0], dirs[1]), (dirs[0], dirs[1])]
        weights = np.array([weights[0] + weights[1], 0.0,
                            weights[2] + weights[3], 0.0])
    else:
        frame0 = qsim.haar_unitary(half, rng)
        frame1 = qsim.haar_unitary(half, rng)
        pairs = [(frame0[:, 0], frame0[:, 1]), (frame1[:, 0], frame1[:, 1])]
    chi = np.zeros((half, 2, 2), dtype=complex)
    for k in (0, 1):
        sym_a, sym_b = BIT_SYMBOLS[k]
        ua, ub = pairs[k]
        chi[:, k, :] += np.sqrt(weights[2 * k]) * np.outer(ua, sym_a.state)
        chi[:, k, :] += np.sqrt(weights[2 * k + 1]) * np.outer(ub, sym_b.state)
    unveil = qsim.haar_unitary(dim, rng)
    psi = (unveil.conj().T @ chi.reshape(dim, 2)).reshape(dim, 2)
    return EntangledCommitment(
        alphas={CommitSymbol.S0: psi[:, 0], CommitSymbol.S1: psi[:, 1]},
        unveil_unitary=unveil,
    )


# -- cheating committers ---------------------------------------------------


def bit_flip_committer() -> StrategySpec:
    """Commits an encoding of 0 but declares 1, naming the orthogonal state."""
    base = honest_committer(0)
    return replace(
        base,
        kind="bit_flip_committer",
        params={},
        declare_bit=lambda view: 1,
        name_symbol=lambda view: ORTHOGONAL_SYMBOL[view.memory["symbol"]],
        # She knows the truth, so her own return test uses the real state.
        expected_return_state=lambda view: view.memory["symbol"].state,
    )


# -- measuring / ancilla-coupling receivers --------------------------------


def _basis_states(angle: float) -> tuple[np.ndarray, np.ndarray]:
    c, s = np.cos(angle), np.sin(angle)
    return (
        np.array([c, s], dtype=complex),
        np.array([-s, c], dtype=complex),
    )


def basis_angle_of(basis) -> float:
    if isinstance(basis, str):
        try:
            return {"Z": 0.0, "X": np.pi / 4, "BREIDBART": BREIDBART_ANGLE}[
                basis.upper()
            ]
        except KeyError:
            raise ValueError(f"unknown basis name {basis!r}") from None
    return float(basis)


def measuring_receiver(basis="Z") -> StrategySpec:
    """Honest except: measures C right after commitment in the given basis.

    ``basis`` is ``"Z"``, ``"X"``, ``"BREIDBART"`` or an angle in the X-Z
    plane (0 is the computational basis, pi/4 the diagonal one).
    """
    angle = basis_angle_of(basis)
    m0, m1 = _basis_states(angle)
    projs = [qsim.projector(m0), qsim.projector(m1)]

    def window(view: PartyView) -> None:
        view.memory["record"] = view.measure(projs, (C_QUBIT,), "basis measurement")

    return replace(
        honest_receiver(),
        kind="measuring_receiver",
        params={"basis_angle": angle},
        window_after_commit=window,
    )


@dataclass(frozen=True, eq=False)
class AncillaAttack:
    """Coupling of C to a receiver ancilla, then an ancilla readout.

    ``u1`` acts on (ancilla tensor C) with C as the least significant qubit;
    ``readout`` rows are the orthonormal outcome states of the ancilla.
    """

    ancilla_dim: int
    u1: np.ndarray
    readout: np.ndarray

    def __post_init__(self):
        m = self.ancilla_dim
        if m < 1:
            raise InvalidAttack("ancilla dimension must be >= 1")
        u1 = np.asarray(self.u1, dtype=complex)
        if u1.shape != (2 * m, 2 * m) or not np.allclose(
            u1.conj().T @ u1, np.eye(2 * m), atol=1e-9
        ):
            raise InvalidAttack("coupling must be unitary on ancilla x C")
        readout = np.asarray(self.readout, dtype=complex)
        if readout.shape != (m, m) or not np.allclose(
            readout @ readout.conj().T, np.eye(m), atol=1e-9
        ):
            raise InvalidAttack("readout rows must be an orthonormal basis")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "readout", readout)


def identity_attack(ancilla_dim: int = 2) -> AncillaAttack:
    return AncillaAttack(
        ancilla_dim=ancilla_dim,
        u1=np.eye(2 * ancilla_dim, dtype=complex),
        readout=np.eye(ancilla_dim, dtype=complex),
    )


def swap_z_attack() -> AncillaAttack:
    """Swap C into the ancilla, read the ancilla out in the Z basis."""
    swap = np.zeros((4, 4), dtype=complex)
    for anc in (0, 1):
        for c in (0, 1):
            swap[c * 2 + anc, anc * 2 + c] = 1.0
    return AncillaAttack(ancilla_dim=2, u1=swap, readout=np.eye(2, dtype=complex))


def weak_coupling_attack(theta: float) -> AncillaAttack:
    """C-controlled ancilla rotation by ``2*theta``; Z readout.

    At ``theta=0`` the ancilla decouples completely; at ``theta=pi/2`` the
    ancilla copies C's computational value, which is equivalent to measuring
    C in the Z basis.
    """
    c, s = np.cos(theta), np.sin(theta)
    u1 = np.zeros((4, 4), dtype=complex)
    blocks = {0: np.eye(2), 1: np.array([[c, -s], [s, c]])}
    for cbit, block in blocks.items():
        for a_out in (0, 1):
            for a_in in (0, 1):
                u1[a_out * 2 + cbit, a_in * 2 + cbit] = block[a_out, a_in]
    return AncillaAttack(ancilla_dim=2, u1=u1, readout=np.eye(2, dtype=complex))


def ancilla_receiver(
    attack: AncillaAttack, challenge_when: frozenset[int] | tuple[int, ...] = ()
) -> StrategySpec:
    """Honest except: couples C to an ancilla after commitment and reads it.

    ``challenge_when`` optionally conditions the receiver's challenge option
    on the readout outcome (a strategy the ancilla budget caps at two
    receiver qubits).
    """
    m = attack.ancilla_dim
    n_anc = int(np.log2(m)) if m > 1 else 0
    if m != 1 << n_anc:
        raise InvalidAttack(
            f"in-protocol attacks need a qubit-shaped ancilla, got dim {m}"
        )
    challenge_when = frozenset(challenge_when)
    readout_projs = [qsim.projector(attack.readout[i]) for i in range(m)]

    def window(view: PartyView) -> None:
        if n_anc == 0:
            view.apply(attack.u1, (C_QUBIT,))
            view.memory["record"] = 0
            return
        init = np.zeros(m, dtype=complex)
        init[0] = 1.0
        labels = view.create_qubits(n_anc, init)
        view.apply(attack.u1, labels + (C_QUBIT,))
        view.memory["record"] = view.measure(readout_projs, labels, "readout")

    def challenge(view: PartyView) -> bool:
        return view.memory.get("record") in challenge_when

    return replace(
        honest_receiver(),
        kind="ancilla_receiver",
        params={"attack": attack, "challenge_when": tuple(sorted(challenge_when))},
        window_after_commit=window,
        challenge=challenge,
    )


# -- other cheats ----------------------------------------------------------


def lying_game_receiver() -> StrategySpec:
    """Honest except: flips the reported game outcome."""
    return replace(
        honest_receiver(),
        kind="lying_game_receiver",
        params={},
        game_report=lambda view, outcome: 1 - outcome,
    )


def singlet_tampering_party(
    role: str, op: str = "measure_z", angle: float = 0.0, bit: int = 0
) -> StrategySpec:
    """Honest except: acts on its own check-pair half after the commitment.

    ``op`` is ``"measure_z"``, ``"measure_angle"`` (at ``angle`` in the X-Z
    plane), or ``"unitary_undone"`` (a rotation applied and reversed inside
    the window, which is undetectable and serves as the control case).
    """
    if role not in ("A", "B"):
        raise ValueError(f"role must be A or B, got {role!r}")
    if op not in ("measure_z", "measure_angle", "unitary_undone"):
        raise ValueError(f"unknown tampering op {op!r}")
    theta = 0.0 if op == "measure_z" else angle

    def window(view: PartyView) -> None:
        half = view.singlet_label
        if op == "unitary_undone":
            c, s = np.cos(theta), np.sin(theta)
            rot = np.array([[c, -s], [s, c]], dtype=complex)
            view.apply(rot, (half,))
            view.apply(rot.conj().T, (half,))
            return
        m0, m1 = _basis_states(theta)
        view.memory["tamper_outcome"] = view.measure(
            [qsim.projector(m0), qsim.projector(m1)], (half,), "tamper measurement"
        )

    base = honest_committer(bit) if role == "A" else honest_receiver()
    return replace(
        base,
        kind="singlet_tampering_party",
        params={"role": role, "op": op, "angle": angle, "bit": bit},
        window_after_commit=window,
    )


# -- registry (config files, worker processes) ------------------------------


def _build_measuring(params: dict) -> StrategySpec:
    if "basis_angle" in params:
        return measuring_receiver(float(params["basis_angle"]))
    return measuring_receiver(params.get("basis", "Z"))


def _build_ancilla(params: dict) -> StrategySpec:
    challenge_when = tuple(params.get("challenge_when", ()))
    if "attack_obj" in params:
        return ancilla_receiver(params["attack_obj"], challenge_when)
    name = params.get("attack", "identity")
    if name == "identity":
        attack = identity_attack()
    elif name == "swap_z":
        attack = swap_z_attack()
    elif name == "weak_coupling":
        attack = weak_coupling_attack(float(params["theta"]))
    else:
        raise ValueError(f"unknown ancilla attack {name!r}")
    return ancilla_receiver(attack, challenge_when)


def _build_entangled(params: dict) -> StrategySpec:
    if "commitment" in params:
        return entangled_committer(params["commitment"])
    from .streams import derive_rng

    rng = derive_rng(int(params["seed"]), 0)
    ec = random_valid_commitment(rng, int(params.get("ancilla_qubits", 2)))
    return entangled_committer(ec)


_BUILDERS: dict[str, Callable[[dict], StrategySpec]] = {
    "honest_committer": lambda p: honest_committer(
        int(p.get("bit", 0)), bool(p.get("challenge", False))
    ),
    "bit_flip_committer": lambda p: bit_flip_committer(),
    "entangled_committer": _build_entangled,
    "honest_receiver": lambda p: honest_receiver(bool(p.get("challenge", False))),
    "measuring_receiver": _build_measuring,
    "ancilla_receiver": _build_ancilla,
    "lying_game_receiver": lambda p: lying_game_receiver(),
    "singlet_tampering_party": lambda p: singlet_tampering_party(
        p["role"], p.get("op", "measure_z"), float(p.get("angle", 0.0)),
        int(p.get("bit", 0)),
    ),
}


def strategy_kinds() -> tuple[str, ...]:
    return tuple(sorted(_BUILDERS))


def build(role: str, kind: str, params: dict | None = None) -> StrategySpec:
    """Materialize a strategy from its (kind, params) description."""
    if kind not in _BUILDERS:
        raise ValueError(f"unknown strategy kind {kind!r}")
    spec = _BUILDERS[kind](params or {})
    if spec.role != role:
        raise ValueError(f"strategy {kind!r} plays role {spec.role}, not {role}")
    return spec


def standard_attack_pairs() -> list[tuple[StrategySpec, StrategySpec]]:
    """Every shipped cheating strategy paired with its honest counterpart.

    Counterparts exercise the check the protocol grants them against that
    attack; in particular check-pair tampering is only ever caught by a
    counterpart that uses its challenge option.
    """
    pairs = [
        (bit_flip_committer(), honest_receiver()),
        (singlet_tampering_party("A", "measure_z"), honest_receiver(challenge=True)),
        (honest_committer(0), measuring_receiver("Z")),
        (honest_committer(1), measuring_receiver("X")),
        (honest_committer(0), measuring_receiver("BREIDBART")),
        (honest_committer(0), ancilla_receiver(swap_z_attack())),
        (honest_committer(0), ancilla_receiver(weak_coupling_attack(np.pi / 5))),
        (honest_committer(0), lying_game_receiver()),
        (
            honest_committer(0, challenge=True),
            singlet_tampering_party("B", "measure_z"),
        ),
    ]
    return pairs
