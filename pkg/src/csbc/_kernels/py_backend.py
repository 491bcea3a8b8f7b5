"""Pure-numpy statevector kernel (fallback for the compiled backend)."""

import numpy as np

NAME = "python"


def apply_matrix(
    amps: np.ndarray, mat: np.ndarray, targets: tuple[int, ...], n_qubits: int
) -> np.ndarray:
    """Apply a ``2^k x 2^k`` operator to the target qubits of a statevector.

    Qubits are big-endian: qubit 0 is the most significant bit of the basis
    index, and ``targets[0]`` is the most significant qubit of the operator's
    own index space.  Returns a new contiguous array; ``amps`` is not touched.
    """
    k = len(targets)
    tens = amps.reshape((2,) * n_qubits)
    tens = np.moveaxis(tens, targets, range(k))
    out = (mat @ tens.reshape(1 << k, -1)).reshape((2,) * n_qubits)
    out = np.moveaxis(out, range(k), targets)
    return np.ascontiguousarray(out).reshape(1 << n_qubits)
