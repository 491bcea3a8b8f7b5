"""Quantitative security analysis.

Detection probabilities come in two dual forms that cross-check each other:
seeded Monte Carlo over independent trials, and exact enumeration of every
measurement-outcome branch with its probability.  On top of those sit the
unveiling-probability formula, information-gain computation, the
measurement-factorisation checker for the shared check pair, and the
no-information property checker for ancilla attacks.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import qsim, strategies
from .branching import BranchCapacityError, enumerate_branches
from .protocol import (
    CommitSymbol,
    ProtocolRun,
    Transcript,
    run_trial,
    run_with_chooser,
)
from .strategies import AncillaAttack, EntangledCommitment, StrategySpec

SQRT1_2 = 1.0 / math.sqrt(2.0)

# Test operator of the unveiling-probability formula: the sum of projectors
# onto the two encodings of bit 0.
SIGMA_C = qsim.projector(qsim.KET0) + qsim.projector(qsim.KET_MINUS)


class NotEnumerableError(RuntimeError):
    """Exact enumeration was requested for a non-enumerable strategy."""


# -- information-theory helpers -------------------------------------------


def entropy_bits(dist: Iterable[float]) -> float:
    return -sum(p * math.log2(p) for p in dist if p > 0.0)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


# -- unveiling probability --------------------------------------------------


def p_unveil(rho_c: qsim.DensityMatrix) -> tuple[float, float]:
    """Probabilities of declaring 0 and 1 fixed by the committed qubit.

    ``p0 = Tr(rho sigma) - 1/2`` with sigma the summed bit-0 encoding
    projectors, clamped into [0, 1].  Exact for any commitment that passes
    the clean-collapse validity check.
    """
    if rho_c.n_qubits != 1:
        raise qsim.QsimError("unveiling formula needs a single-qubit state")
    p0 = float(np.real(np.trace(rho_c.mat @ SIGMA_C))) - 0.5
    p0 = min(max(p0, 0.0), 1.0)
    return p0, 1.0 - p0


# -- Monte Carlo estimation --------------------------------------------------


@dataclass(frozen=True)
class MCStats:
    """Associatively mergeable counters over protocol trials."""

    n: int
    a_detected: int
    b_detected: int
    aborted: int
    declared0: int
    declared1: int
    loser_a: int
    loser_b: int

    def merge(self, other: "MCStats") -> "MCStats":
        return MCStats(*(a + b for a, b in zip(_fields(self), _fields(other))))


def _fields(s: MCStats) -> tuple[int, ...]:
    return (
        s.n, s.a_detected, s.b_detected, s.aborted,
        s.declared0, s.declared1, s.loser_a, s.loser_b,
    )


def _tally(transcripts: Iterable[Transcript]) -> MCStats:
    n = a = b = ab = d0 = d1 = la = lb = 0
    for t in transcripts:
        n += 1
        a += t.a_detected
        b += t.b_detected
        ab += t.aborted_by is not None
        d0 += t.declared_bit == 0
        d1 += t.declared_bit == 1
        la += t.game_loser == "A"
        lb += t.game_loser == "B"
    return MCStats(n, a, b, ab, d0, d1, la, lb)


def _count_range(strat_a, strat_b, master_seed: int, start: int, stop: int) -> MCStats:
    return _tally(
        run_trial(strat_a, strat_b, master_seed, i) for i in range(start, stop)
    )


def _worker_count(desc_a, desc_b, master_seed: int, start: int, stop: int) -> MCStats:
    strat_a = strategies.build("A", desc_a[0], desc_a[1])
    strat_b = strategies.build("B", desc_b[0], desc_b[1])
    return _count_range(strat_a, strat_b, master_seed, start, stop)


def mc_stats(
    strat_a: StrategySpec,
    strat_b: StrategySpec,
    n: int,
    seed: int,
    threads: int = 1,
) -> MCStats:
    """Counters over ``n`` independent trials with per-trial derived streams.

    With ``threads > 1`` the trials are distributed over worker processes;
    results are independent of the thread count because trial ``i`` always
    uses the stream derived from ``(seed, i)`` and counters merge
    associatively.  Distribution requires both strategies to be registered
    kinds; custom strategies fall back to a single process.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    registered = (
        strat_a.kind in strategies.strategy_kinds()
        and strat_b.kind in strategies.strategy_kinds()
    )
    if threads <= 1 or n < 4 * threads or not registered:
        return _count_range(strat_a, strat_b, seed, 0, n)
    chunk = max(1, math.ceil(n / (threads * 4)))
    bounds = [(i, min(i + chunk, n)) for i in range(0, n, chunk)]
    desc_a = (strat_a.kind, strat_a.params)
    desc_b = (strat_b.kind, strat_b.params)
    with ProcessPoolExecutor(max_workers=threads) as pool:
        parts = list(
            pool.map(
                _worker_count,
                *zip(*[(desc_a, desc_b, seed, lo, hi) for lo, hi in bounds]),
            )
        )
    out = parts[0]
    for part in parts[1:]:
        out = out.merge(part)
    return out


@dataclass(frozen=True)
class BranchRow:
    description: str
    probability: float
    detected_by: str  # none | A | B | both

    def to_json_dict(self) -> dict:
        return {
            "description": self.description,
            "probability": self.probability,
            "detected_by": self.detected_by,
        }


@dataclass(frozen=True)
class DetectionReport:
    """Cheat-detection frequencies for one strategy pairing."""

    p_a_detect: float
    p_b_detect: float
    stderr_a: float
    stderr_b: float
    n_trials: int
    mode: str  # montecarlo | exact
    branch_table: Optional[tuple[BranchRow, ...]] = None

    def to_json_dict(self) -> dict:
        out = {
            "p_a_detect": self.p_a_detect,
            "p_b_detect": self.p_b_detect,
            "stderr_a": self.stderr_a,
            "stderr_b": self.stderr_b,
            "n_trials": self.n_trials,
            "mode": self.mode,
        }
        if self.branch_table is not None:
            out["branch_table"] = [row.to_json_dict() for row in self.branch_table]
        return out


def _stderr(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


def detection_mc(
    strat_a: StrategySpec,
    strat_b: StrategySpec,
    n: int,
    seed: int,
    threads: int = 1,
) -> DetectionReport:
    """Detection frequencies with binomial standard errors over ``n`` runs."""
    stats = mc_stats(strat_a, strat_b, n, seed, threads)
    pa = stats.a_detected / n
    pb = stats.b_detected / n
    return DetectionReport(
        p_a_detect=pa,
        p_b_detect=pb,
        stderr_a=_stderr(pa, n),
        stderr_b=_stderr(pb, n),
        n_trials=n,
        mode="montecarlo",
    )


def detection_exact(
    strat_a: StrategySpec,
    strat_b: StrategySpec,
    max_branches: int = 10**6,
) -> DetectionReport:
    """Exact detection probabilities by enumerating every outcome branch.

    No sampling: every measurement and classical choice is branched with
    its exact probability.  Fails loudly past ``max_branches`` rather than
    approximating.
    """
    if not (strat_a.enumerable and strat_b.enumerable):
        raise NotEnumerableError(
            "both strategies must be enumerable for exact analysis"
        )
    leaves = enumerate_branches(
        lambda chooser: run_with_chooser(strat_a, strat_b, chooser),
        max_branches=max_branches,
    )
    pa = float(sum(l.probability for l in leaves if l.result.a_detected))
    pb = float(sum(l.probability for l in leaves if l.result.b_detected))
    table = tuple(
        BranchRow(
            description=leaf.describe(),
            probability=leaf.probability,
            detected_by=_detected_by(leaf.result),
        )
        for leaf in leaves
    )
    return DetectionReport(
        p_a_detect=pa,
        p_b_detect=pb,
        stderr_a=0.0,
        stderr_b=0.0,
        n_trials=len(leaves),
        mode="exact",
        branch_table=table,
    )


def _detected_by(t: Transcript) -> str:
    if t.a_detected and t.b_detected:
        return "both"
    if t.a_detected:
        return "A"
    if t.b_detected:
        return "B"
    return "none"


# -- unveiling formula vs protocol -------------------------------------------


@dataclass(frozen=True)
class PunveilCheck:
    expected_p0: float
    empirical_p0: float
    n_trials: int
    stderr: float
    within_4_sigma: bool

    def to_json_dict(self) -> dict:
        return {
            "expected_p0": self.expected_p0,
            "empirical_p0": self.empirical_p0,
            "n_trials": self.n_trials,
            "stderr": self.stderr,
            "within_4_sigma": self.within_4_sigma,
        }


def verify_punveil_vs_protocol(
    ec: EntangledCommitment, n: int, seed: int, threads: int = 1
) -> PunveilCheck:
    """Empirical declared-bit frequency against the reduced-state formula.

    The declared-bit distribution only depends on the reduced state of the
    committed qubit, so the protocol frequency must match ``p_unveil`` of
    the commitment's partial trace within Monte Carlo error.
    """
    expected, _ = p_unveil(ec.rho_c())
    stats = mc_stats(
        strategies.entangled_committer(ec), strategies.honest_receiver(),
        n, seed, threads,
    )
    empirical = stats.declared0 / n
    stderr = _stderr(expected, n)
    within = abs(empirical - expected) <= 4.0 * stderr if stderr > 0.0 \
        else empirical == expected
    return PunveilCheck(expected, empirical, n, stderr, within)


# -- information gain ---------------------------------------------------------


@dataclass(frozen=True)
class InfoGainReport:
    """Mutual information between a receiver's record and the committed bit."""

    mutual_information: float
    conditional_distributions: dict[int, dict[int, float]]
    prior: tuple[float, float]

    def to_json_dict(self) -> dict:
        return {
            "mutual_information": self.mutual_information,
            "conditional_distributions": {
                str(bit): {str(k): v for k, v in dist.items()}
                for bit, dist in self.conditional_distributions.items()
            },
            "prior": list(self.prior),
        }


def _record_distribution(strat_b: StrategySpec, bit: int) -> dict[int, float]:
    """Exact distribution of the receiver's pre-unveiling record."""

    def phase(chooser):
        run = ProtocolRun(strategies.honest_committer(bit), strat_b, chooser)
        return run.run_commitment_phase().memory.get("record")

    dist: dict[int, float] = {}
    for leaf in enumerate_branches(phase):
        if leaf.result is None:
            return {}
        dist[leaf.result] = dist.get(leaf.result, 0.0) + leaf.probability
    return dist


def info_gain(
    strat_b: StrategySpec, prior: tuple[float, float] = (0.5, 0.5)
) -> InfoGainReport:
    """Information the receiver's record carries about the committed bit.

    The record distribution is computed exactly over the honest committer's
    encoding mixture for each bit value.  A receiver that records nothing
    before the unveiling gains zero information by definition.
    """
    if not strat_b.enumerable:
        raise NotEnumerableError("information gain needs an enumerable receiver")
    cond = {bit: _record_distribution(strat_b, bit) for bit in (0, 1)}
    if not cond[0] and not cond[1]:
        return InfoGainReport(0.0, cond, prior)
    outcomes = sorted(set(cond[0]) | set(cond[1]))
    marginal = [
        prior[0] * cond[0].get(k, 0.0) + prior[1] * cond[1].get(k, 0.0)
        for k in outcomes
    ]
    mi = entropy_bits(marginal) - sum(
        prior[bit] * entropy_bits(cond[bit].values()) for bit in (0, 1)
    )
    return InfoGainReport(max(mi, 0.0), cond, prior)


# -- check-pair measurement factorisation ------------------------------------


@dataclass(frozen=True)
class Lemma1Witness:
    op_index: int
    deviation: np.ndarray  # E_i minus its best identity-factored approximant
    norm: float


@dataclass(frozen=True)
class Lemma1Verdict:
    """Whether a measurement leaves the shared check pair intact.

    A family of operators on (pair-half tensor ancilla) preserves the pair
    for every outcome exactly when each operator factors as identity on the
    pair-half times an ancilla operator; ``factors`` holds the recovered
    ancilla operators in that case, ``witness`` the worst offender
    otherwise.
    """

    factored: bool
    singlet_preserved: bool
    factors: Optional[tuple[np.ndarray, ...]]
    witness: Optional[Lemma1Witness]

    def to_json_dict(self) -> dict:
        return {
            "factored": self.factored,
            "singlet_preserved": self.singlet_preserved,
            "witness_norm": None if self.witness is None else self.witness.norm,
            "witness_op_index": None if self.witness is None
            else self.witness.op_index,
        }


def _pair_action_deviation(op: np.ndarray, m: int) -> float:
    """How far ``op`` moves the check pair, maximized over ancilla inputs.

    Applies the operator to the committer's side of (pair tensor ancilla
    basis state) and measures the distance from the nearest state of the
    form (pair tensor anything).
    """
    worst = 0.0
    for j in range(m):
        vec = np.zeros((2, m, 2), dtype=complex)  # (half_a, ancilla, half_b)
        vec[0, j, 1] = SQRT1_2
        vec[1, j, 0] = -SQRT1_2
        out = (op @ vec.reshape(2 * m, 2)).reshape(2, m, 2)
        chi = (out[0, :, 1] - out[1, :, 0]) * SQRT1_2  # averaged pair component
        ideal = np.zeros_like(out)
        ideal[0, :, 1] = SQRT1_2 * chi
        ideal[1, :, 0] = -SQRT1_2 * chi
        worst = max(worst, float(np.linalg.norm(out - ideal)))
    return worst


def lemma1_factor(
    kraus: qsim.KrausSet, ancilla_dim: int, atol: float = 1e-8
) -> Lemma1Verdict:
    """Check pair preservation and extract the ancilla-only factorisation."""
    m = ancilla_dim
    for op in kraus.ops:
        if op.shape != (2 * m, 2 * m):
            raise qsim.QsimError(
                f"operators must act on a 2x{m}-dimensional space, got {op.shape}"
            )
    preserved = True
    factors = []
    worst: Optional[Lemma1Witness] = None
    for i, op in enumerate(kraus.ops):
        if _pair_action_deviation(op, m) > atol:
            preserved = False
        b00, b01 = op[:m, :m], op[:m, m:]
        b10, b11 = op[m:, :m], op[m:, m:]
        factor = (b00 + b11) / 2.0
        deviation = op - np.kron(np.eye(2), factor)
        norm = float(np.linalg.norm(deviation))
        factors.append(factor)
        if worst is None or norm > worst.norm:
            worst = Lemma1Witness(i, deviation, norm)
    factored = preserved and all(
        float(np.linalg.norm(op - np.kron(np.eye(2), f))) < atol
        for op, f in zip(kraus.ops, factors)
    )
    return Lemma1Verdict(
        factored=factored,
        singlet_preserved=preserved,
        factors=tuple(factors) if factored else None,
        witness=None if factored else worst,
    )


def slot_offidentity_norm(kraus: qsim.KrausSet, ancilla_dim: int) -> float:
    """Frobenius norm of the operators' non-identity pair-half components."""
    m = ancilla_dim
    paulis = (qsim.PAULI_X, qsim.PAULI_Y, qsim.PAULI_Z)
    total = 0.0
    for op in kraus.ops:
        blocks = np.array(
            [[op[:m, :m], op[:m, m:]], [op[m:, :m], op[m:, m:]]]
        )
        for pauli in paulis:
            comp = sum(
                pauli[a, b].conj() * blocks[a, b] for a in (0, 1) for b in (0, 1)
            ) / 2.0
            total += float(np.linalg.norm(comp)) ** 2
    return math.sqrt(total)


def random_factored_kraus(
    ancilla_dim: int, n_ops: int, rng: np.random.Generator
) -> tuple[qsim.KrausSet, tuple[np.ndarray, ...]]:
    """A complete Kraus family acting as identity on the pair half."""
    m = ancilla_dim
    z = rng.standard_normal((m * n_ops, m)) + 1j * rng.standard_normal((m * n_ops, m))
    q, _ = np.linalg.qr(z)  # isometry: q^dag q = I_m
    primes = tuple(q[i * m : (i + 1) * m, :] for i in range(n_ops))
    ops = tuple(np.kron(np.eye(2), e) for e in primes)
    return qsim.KrausSet(ops=ops, completeness_mode="complete"), primes


def slot_rotated_kraus(
    base: qsim.KrausSet, ancilla_dim: int, theta: float, rng: np.random.Generator
) -> qsim.KrausSet:
    """Perturb a Kraus family with a rotation that acts on the pair half.

    Conjugating by ``exp(i theta (n.sigma) tensor I)`` keeps completeness
    exact while giving every operator a non-identity pair-half component of
    norm ~ ``sin(theta) * ||E_i||``.
    """
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    n_sigma = (
        direction[0] * qsim.PAULI_X
        + direction[1] * qsim.PAULI_Y
        + direction[2] * qsim.PAULI_Z
    )
    rot = math.cos(theta) * np.eye(2) + 1j * math.sin(theta) * n_sigma
    w = np.kron(rot, np.eye(ancilla_dim))
    return qsim.KrausSet(
        ops=tuple(w @ op for op in base.ops), completeness_mode="complete"
    )


# -- no-information property ---------------------------------------------------


@dataclass(frozen=True)
class NoInformationReport:
    """Return-condition violation vs outcome distinguishability.

    ``max_overlap_excess`` is how far, over readout outcomes and the two
    same-bit encoding pairs, the residual-state overlap exceeds the overlap
    of the encodings themselves.  Deterministic processing cannot decrease
    overlaps, so any excess means the receiver cannot be certain of passing
    a return test; the no-information property says a bit-dependent outcome
    distribution forces such an excess.
    """

    max_overlap_excess: float
    outcome_tv_distance: float

    def to_json_dict(self) -> dict:
        return {
            "max_overlap_excess": self.max_overlap_excess,
            "outcome_tv_distance": self.outcome_tv_distance,
        }


def no_information_check(attack: AncillaAttack) -> NoInformationReport:
    m = attack.ancilla_dim
    init = np.zeros(m, dtype=complex)
    init[0] = 1.0
    residuals: dict[CommitSymbol, np.ndarray] = {}
    probs: dict[CommitSymbol, np.ndarray] = {}
    for sym in CommitSymbol:
        out = (attack.u1 @ np.kron(init, sym.state)).reshape(m, 2)
        comps = attack.readout.conj() @ out  # row i = unnormalized residual
        residuals[sym] = comps
        probs[sym] = np.sum(np.abs(comps) ** 2, axis=1)

    p_bit = {
        bit: 0.5 * (probs[syms[0]] + probs[syms[1]])
        for bit, syms in strategies.BIT_SYMBOLS.items()
    }
    tv = 0.5 * float(np.sum(np.abs(p_bit[0] - p_bit[1])))

    excess = 0.0
    for sym_a, sym_b in (
        (CommitSymbol.S0, CommitSymbol.SMINUS),
        (CommitSymbol.S1, CommitSymbol.SPLUS),
    ):
        for i in range(m):
            pa = probs[sym_a][i]
            pb = probs[sym_b][i]
            if pa < 1e-12 or pb < 1e-12:
                continue
            o = abs(np.vdot(residuals[sym_a][i], residuals[sym_b][i]))
            o /= math.sqrt(pa * pb)
            excess = max(excess, float(o) - SQRT1_2)
    return NoInformationReport(max(excess, 0.0), tv)


def random_ancilla_attack(
    ancilla_dim: int, rng: np.random.Generator
) -> AncillaAttack:
    """Haar-random coupling and readout basis on a given ancilla dimension."""
    return AncillaAttack(
        ancilla_dim=ancilla_dim,
        u1=qsim.haar_unitary(2 * ancilla_dim, rng),
        readout=qsim.haar_unitary(ancilla_dim, rng),
    )


# -- information/detection tradeoff -------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    param: float
    info_bits: float
    p_detect: float

    def to_json_dict(self) -> dict:
        return {
            "param": self.param,
            "info_bits": self.info_bits,
            "p_detect": self.p_detect,
        }


def tradeoff_sweep(
    family: Callable[[float], StrategySpec], grid: Sequence[float]
) -> list[SweepPoint]:
    """Information gain vs exact detection across a receiver-strategy family.

    Detection is the honest committer's probability against a bit-0
    commitment (the shipped families are symmetric under the bit flip);
    information gain already averages over the bit.  No monotonicity is
    asserted; the table is the product.
    """
    points = []
    for param in grid:
        strat = family(float(param))
        info = info_gain(strat).mutual_information
        det = detection_exact(strategies.honest_committer(0), strat).p_a_detect
        points.append(SweepPoint(float(param), info, det))
    return points
