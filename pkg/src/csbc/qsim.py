"""Dense complex linear algebra over small labelled qubit registers.

States live on ordered tuples of string labels, big-endian: the first label
is the most significant bit of the basis index.  Everything is immutable;
operations return new values.  Registers are capped at 8 qubits, which is
all the commitment protocol ever needs (singlet pair + commitment qubit +
bounded ancillas on both sides).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

MAX_QUBITS = 8

NORM_ATOL = 1e-10
HERMITIAN_ATOL = 1e-10
COMPLETENESS_ATOL = 1e-9
PSD_FLOOR = -1e-9

SQRT1_2 = 1.0 / np.sqrt(2.0)

# Single-qubit computational and diagonal-basis states.
KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)
KET_PLUS = np.array([SQRT1_2, SQRT1_2], dtype=complex)
KET_MINUS = np.array([SQRT1_2, -SQRT1_2], dtype=complex)

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT1_2

# (|01> - |10>)/sqrt(2) on two qubits, big-endian.
SINGLET = np.array([0.0, SQRT1_2, -SQRT1_2, 0.0], dtype=complex)
# (|01> + |10>)/sqrt(2), the orthogonal triplet partner used in tests.
PSI_PLUS = np.array([0.0, SQRT1_2, SQRT1_2, 0.0], dtype=complex)


class QsimError(ValueError):
    """Invalid state, operator, or label arguments."""


def _as_complex_vector(amps) -> np.ndarray:
    arr = np.ascontiguousarray(amps, dtype=complex)
    if arr.ndim != 1:
        raise QsimError(f"amplitudes must be a vector, got shape {arr.shape}")
    return arr


def _check_labels(labels) -> tuple[str, ...]:
    labels = tuple(labels)
    if len(set(labels)) != len(labels):
        raise QsimError(f"duplicate qubit labels: {labels}")
    if len(labels) > MAX_QUBITS:
        raise QsimError(f"register of {len(labels)} qubits exceeds cap {MAX_QUBITS}")
    return labels


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state on an ordered qubit register."""

    labels: tuple[str, ...]
    amps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", _check_labels(self.labels))
        amps = _as_complex_vector(self.amps)
        if amps.shape[0] != 1 << len(self.labels):
            raise QsimError(
                f"{len(self.labels)} labels need {1 << len(self.labels)} "
                f"amplitudes, got {amps.shape[0]}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_ATOL:
            raise QsimError(f"state norm {norm} outside tolerance {NORM_ATOL}")
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return 1 << len(self.labels)

    def axis_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise QsimError(f"unknown qubit label {label!r}") from None

    def to_json_dict(self) -> dict:
        """Debug dump: amplitudes as [re, im] pairs in basis order."""
        return {
            "labels": list(self.labels),
            "amps": [[z.real, z.imag] for z in self.amps],
        }


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Mixed state on an ordered qubit register."""

    labels: tuple[str, ...]
    mat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", _check_labels(self.labels))
        mat = np.ascontiguousarray(self.mat, dtype=complex)
        dim = 1 << len(self.labels)
        if mat.shape != (dim, dim):
            raise QsimError(f"expected {dim}x{dim} matrix, got {mat.shape}")
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_ATOL:
            raise QsimError("density matrix is not Hermitian within tolerance")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > NORM_ATOL:
            raise QsimError(f"density matrix trace {tr} differs from 1")
        if np.linalg.eigvalsh(mat).min() < PSD_FLOOR:
            raise QsimError("density matrix has a negative eigenvalue")
        mat.flags.writeable = False
        object.__setattr__(self, "mat", mat)

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    def to_json_dict(self) -> dict:
        """Debug dump: matrix rows as [re, im] pairs."""
        return {
            "labels": list(self.labels),
            "mat": [[[z.real, z.imag] for z in row] for row in self.mat],
        }


@dataclass(frozen=True)
class KrausSet:
    """Finite operator family describing a generalized measurement.

    ``complete`` mode requires sum(E_i^dag E_i) = I; ``subnormalized`` only
    requires I - sum(E_i^dag E_i) to be positive semidefinite.
    """

    ops: tuple[np.ndarray, ...]
    completeness_mode: str = "complete"

    def __post_init__(self):
        if self.completeness_mode not in ("complete", "subnormalized"):
            raise QsimError(f"unknown completeness mode {self.completeness_mode!r}")
        ops = tuple(np.ascontiguousarray(op, dtype=complex) for op in self.ops)
        if not ops:
            raise QsimError("empty Kraus set")
        dim = ops[0].shape[0]
        for op in ops:
            if op.shape != (dim, dim):
                raise QsimError("Kraus operators must share one square dimension")
        total = sum(op.conj().T @ op for op in ops)
        gap = np.eye(dim) - total
        if self.completeness_mode == "complete":
            if np.linalg.norm(gap) > COMPLETENESS_ATOL:
                raise QsimError("Kraus set violates completeness")
        else:
            if np.linalg.eigvalsh((gap + gap.conj().T) / 2).min() < -COMPLETENESS_ATOL:
                raise QsimError("subnormalized Kraus set exceeds identity")
        for op in ops:
            op.flags.writeable = False
        object.__setattr__(self, "ops", ops)

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]


@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    index: int
    probability: float
    post_state: StateVector


def _unchecked_state(labels: tuple[str, ...], amps: np.ndarray) -> StateVector:
    """Internal constructor for amplitudes already known to be valid.

    Skips the dataclass validation on hot paths (collapse, unitaries,
    tensor products of valid states preserve the invariants by
    construction; the property suite checks them).
    """
    s = object.__new__(StateVector)
    object.__setattr__(s, "labels", labels)
    object.__setattr__(s, "amps", amps)
    return s


def make_state(labels, amps) -> StateVector:
    """Normalized state from raw amplitudes; rejects zero vectors."""
    labels = _check_labels(labels)
    arr = _as_complex_vector(amps)
    if arr.shape[0] != 1 << len(labels):
        raise QsimError(
            f"{len(labels)} labels need {1 << len(labels)} amplitudes, "
            f"got {arr.shape[0]}"
        )
    norm = np.linalg.norm(arr)
    if norm < 1e-12:
        raise QsimError("cannot normalize a zero amplitude vector")
    return _unchecked_state(labels, arr / norm)


def tensor(s1: StateVector, s2: StateVector) -> StateVector:
    """Combined state on the concatenated registers."""
    labels = _check_labels(s1.labels + s2.labels)  # rejects overlaps
    amps = (s1.amps[:, None] * s2.amps[None, :]).reshape(s1.dim * s2.dim)
    return _unchecked_state(labels, amps)


def permute(s: StateVector, new_order) -> StateVector:
    """Same state with the register reordered to ``new_order``."""
    new_order = tuple(new_order)
    if set(new_order) != set(s.labels) or len(new_order) != len(s.labels):
        raise QsimError(f"{new_order} is not a permutation of {s.labels}")
    if new_order == s.labels:
        return s
    axes = [s.axis_of(lbl) for lbl in new_order]
    tens = s.amps.reshape((2,) * s.n_qubits).transpose(axes)
    return _unchecked_state(new_order, np.ascontiguousarray(tens).reshape(s.dim))


def _is_unitary(mat: np.ndarray, atol: float = 1e-9) -> bool:
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        return False
    return np.allclose(mat.conj().T @ mat, np.eye(mat.shape[0]), atol=atol)


_AXIS_CACHE: dict[tuple, tuple[int, ...]] = {}


def _target_axes(s: StateVector, targets) -> tuple[int, ...]:
    key = (s.labels, tuple(targets))
    axes = _AXIS_CACHE.get(key)
    if axes is None:
        axes = tuple(s.axis_of(lbl) for lbl in key[1])
        if len(set(axes)) != len(axes):
            raise QsimError(f"duplicate targets: {targets}")
        if len(_AXIS_CACHE) > 4096:
            _AXIS_CACHE.clear()
        _AXIS_CACHE[key] = axes
    return axes


def apply_operator(s: StateVector, mat: np.ndarray, targets) -> np.ndarray:
    """Raw (possibly non-unitary) operator application; unnormalized amps."""
    axes = _target_axes(s, targets)
    mat = np.ascontiguousarray(mat, dtype=complex)
    if mat.shape != (1 << len(axes), 1 << len(axes)):
        raise QsimError(
            f"operator shape {mat.shape} does not fit {len(axes)} target qubits"
        )
    return _kernels.apply_matrix(s.amps, mat, axes, s.n_qubits)


def apply_unitary(s: StateVector, mat: np.ndarray, targets) -> StateVector:
    """Unitary on the target subregister, identity elsewhere."""
    mat = np.asarray(mat, dtype=complex)
    if not _is_unitary(mat):
        raise QsimError("operator is not unitary within tolerance")
    return _unchecked_state(s.labels, apply_operator(s, mat, targets))


def branch_amplitudes(s: StateVector, ops, targets) -> list[tuple[float, np.ndarray]]:
    """Per-operator (probability, unnormalized amplitudes) pairs.

    The shared primitive behind both measurement entry points and the
    protocol engine's branch-enumeration mode.
    """
    out = []
    for op in ops:
        amps = apply_operator(s, op, targets)
        p = float(np.real(np.vdot(amps, amps)))
        out.append((max(p, 0.0), amps))
    return out


def collapse(s: StateVector, amps: np.ndarray, probability: float) -> StateVector:
    if probability <= 0.0:
        raise QsimError("cannot collapse onto a zero-probability branch")
    return _unchecked_state(s.labels, amps / np.sqrt(probability))


def _sample_index(probs, rng: np.random.Generator) -> int:
    r = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if r < acc:
            return i
    return len(probs) - 1


def _validate_projectors(projectors, dim: int) -> None:
    total = np.zeros((dim, dim), dtype=complex)
    for p in projectors:
        p = np.asarray(p, dtype=complex)
        if p.shape != (dim, dim):
            raise QsimError(f"projector shape {p.shape}, expected {(dim, dim)}")
        if np.max(np.abs(p - p.conj().T)) > COMPLETENESS_ATOL:
            raise QsimError("projector is not Hermitian")
        if np.max(np.abs(p @ p - p)) > COMPLETENESS_ATOL:
            raise QsimError("projector is not idempotent")
        total += p
    if np.max(np.abs(total - np.eye(dim))) > COMPLETENESS_ATOL:
        raise QsimError("projectors do not sum to the identity")


def measure_projective(
    s: StateVector, projectors, targets, rng: np.random.Generator
) -> MeasurementOutcome:
    """Sample a complete orthogonal projective measurement on ``targets``."""
    axes = _target_axes(s, targets)
    _validate_projectors(projectors, 1 << len(axes))
    branches = branch_amplitudes(s, projectors, targets)
    probs = [p for p, _ in branches]
    i = _sample_index(probs, rng)
    return MeasurementOutcome(i, probs[i], collapse(s, branches[i][1], probs[i]))


def measure_kraus(
    s: StateVector, k: KrausSet, targets, rng: np.random.Generator
) -> MeasurementOutcome:
    """Sample a generalized measurement: outcome i with prob ||E_i psi||^2."""
    if k.completeness_mode != "complete":
        raise QsimError("sampling requires a complete Kraus set")
    branches = branch_amplitudes(s, k.ops, targets)
    probs = [p for p, _ in branches]
    i = _sample_index(probs, rng)
    return MeasurementOutcome(i, probs[i], collapse(s, branches[i][1], probs[i]))


def density(s: StateVector) -> DensityMatrix:
    """Rank-one density matrix of a pure state."""
    return DensityMatrix(s.labels, np.outer(s.amps, s.amps.conj()))


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduced density matrix on ``keep`` (in the order given)."""
    keep = tuple(keep)
    n = rho.n_qubits
    keep_axes = []
    for lbl in keep:
        if lbl not in rho.labels:
            raise QsimError(f"unknown qubit label {lbl!r}")
        keep_axes.append(rho.labels.index(lbl))
    if len(set(keep_axes)) != len(keep_axes):
        raise QsimError(f"duplicate labels in keep: {keep}")
    drop_axes = [i for i in range(n) if i not in keep_axes]
    dk = 1 << len(keep_axes)
    dt = 1 << len(drop_axes)
    tens = rho.mat.reshape((2,) * (2 * n))
    # Order both the row and column index groups as (kept..., dropped...).
    perm = keep_axes + drop_axes
    tens = tens.transpose(perm + [n + ax for ax in perm]).reshape(dk, dt, dk, dt)
    reduced = np.einsum("itjt->ij", tens)
    return DensityMatrix(keep, reduced)


def reduced_state(s: StateVector, keep) -> DensityMatrix:
    """Partial trace of a pure state down to the ``keep`` register."""
    return partial_trace(density(s), keep)


def purity(rho: DensityMatrix) -> float:
    return float(np.real(np.trace(rho.mat @ rho.mat)))


def fidelity_pure(rho: DensityMatrix, psi: StateVector) -> float:
    """<psi|rho|psi>, clamped into [0, 1]."""
    if set(rho.labels) != set(psi.labels):
        raise QsimError(f"label mismatch: {rho.labels} vs {psi.labels}")
    v = permute(psi, rho.labels).amps
    val = float(np.real(v.conj() @ rho.mat @ v))
    return min(max(val, 0.0), 1.0)


def overlap(a: StateVector, b: StateVector) -> float:
    """|<a|b>|, clamped into [0, 1]."""
    if set(a.labels) != set(b.labels):
        raise QsimError(f"label mismatch: {a.labels} vs {b.labels}")
    val = abs(np.vdot(a.amps, permute(b, a.labels).amps))
    return min(val, 1.0)


def projector(vec: np.ndarray) -> np.ndarray:
    """Rank-one projector onto a (normalized) vector."""
    v = _as_complex_vector(vec)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def binary_projectors(vec: np.ndarray) -> list[np.ndarray]:
    """{P, I - P} test pair for a target pure state."""
    p = projector(vec)
    return [p, np.eye(p.shape[0], dtype=complex) - p]


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    # Fix the phase ambiguity of QR so the distribution is exactly Haar.
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_state(labels, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state on the given register."""
    labels = _check_labels(labels)
    dim = 1 << len(labels)
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return make_state(labels, z)
