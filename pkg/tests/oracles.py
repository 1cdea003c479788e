"""Independent dense-matrix oracles used to check the symbolic code paths.

Everything here is built directly from 2x2 constants with numpy/scipy, on
purpose not reusing the package's own matrix builders.
"""
import numpy as np
import scipy.linalg

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SPLUS = np.array([[0, 0], [1, 0]], dtype=complex)   # |1><0|
SMINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
MAT = {"I": I2, "X": SX, "Y": SY, "Z": SZ, "+": SPLUS, "-": SMINUS}


def kron_string(ops: str, coeff=1.0) -> np.ndarray:
    """Dense matrix of a Pauli string with qubit 0 as least significant bit."""
    m = np.array([[coeff]], dtype=complex)
    for c in ops:
        m = np.kron(MAT[c], m)
    return m


def dense_hamiltonian(n: int, terms) -> np.ndarray:
    """terms: iterable of (coeff, ops)."""
    h = np.zeros((2**n, 2**n), dtype=complex)
    for coeff, ops in terms:
        assert len(ops) == n
        h += kron_string(ops, coeff)
    return h


def expm(m: np.ndarray) -> np.ndarray:
    return scipy.linalg.expm(m)


def evolve(h_dense: np.ndarray, t: float) -> np.ndarray:
    return scipy.linalg.expm(-1j * t * h_dense)


def op_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Spectral-norm distance."""
    return float(np.linalg.norm(a - b, ord=2))


def pauli_coefficients(m: np.ndarray, n: int) -> dict[str, complex]:
    """Project a 2^n x 2^n matrix onto the Pauli-string basis."""
    import itertools

    out = {}
    for ops in itertools.product("IXYZ", repeat=n):
        s = "".join(ops)
        basis = kron_string(s)
        c = np.trace(basis.conj().T @ m) / 2**n
        if abs(c) > 1e-13:
            out[s] = c
    return out


def local_layer_matrix(unitaries) -> np.ndarray:
    """Dense matrix of per-qubit 2x2 unitaries, qubit 0 least significant."""
    m = np.array([[1.0]], dtype=complex)
    for u in unitaries:
        m = np.kron(np.asarray(u, dtype=complex), m)
    return m
