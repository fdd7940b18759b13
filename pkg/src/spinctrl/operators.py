"""Pauli matrices and small-register operator helpers.

Operators throughout the package are plain dense complex ndarrays. Registers
are limited to 12 qubits so every operator fits comfortably in memory; the
statevector circuit engine in :mod:`spinctrl.circuits` is used beyond the
point where dense unitaries are practical.
"""
from __future__ import annotations

import itertools

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

MAX_DENSE_QUBITS = 12


def kron_all(ops) -> np.ndarray:
    """Kronecker product of a sequence of matrices, first factor leftmost."""
    out = np.array([[1.0 + 0.0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def pauli_string(label: str) -> np.ndarray:
    """Build the operator for a Pauli string label such as ``"XZI"``.

    The first character acts on qubit 0 (leftmost tensor factor).
    """
    if not label or any(c not in PAULIS for c in label):
        raise ValueError(f"invalid Pauli string label: {label!r}")
    return kron_all(PAULIS[c] for c in label)


def embed(op: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Embed a single-qubit operator on `qubit` into an `n_qubits` register."""
    if n_qubits > MAX_DENSE_QUBITS:
        raise ValueError(f"dense operators limited to {MAX_DENSE_QUBITS} qubits")
    if not 0 <= qubit < n_qubits:
        raise ValueError(f"qubit {qubit} out of range for {n_qubits} qubits")
    ops = [I2] * n_qubits
    ops[qubit] = op
    return kron_all(ops)


def pauli_labels(n_qubits: int) -> list[str]:
    """All 4**n Pauli string labels in lexicographic (I,X,Y,Z) order."""
    return ["".join(p) for p in itertools.product("IXYZ", repeat=n_qubits)]


def pauli_basis(n_qubits: int) -> np.ndarray:
    """Stack of all 4**n Pauli string matrices, index-aligned with labels."""
    dim = 2**n_qubits
    labels = pauli_labels(n_qubits)
    basis = np.empty((len(labels), dim, dim), dtype=complex)
    for k, label in enumerate(labels):
        basis[k] = pauli_string(label)
    return basis


def pauli_coefficients(op: np.ndarray, basis: np.ndarray | None = None) -> np.ndarray:
    """Coefficients c_k of op = sum_k c_k P_k over the Pauli string basis.

    Uses the normalized trace inner product c_k = Tr(P_k op) / 2**n. For a
    Hermitian op all coefficients are real (the imaginary parts are returned
    so callers can assert this).
    """
    dim = op.shape[0]
    n = dim.bit_length() - 1
    if 2**n != dim:
        raise ValueError("operator dimension is not a power of two")
    if basis is None:
        basis = pauli_basis(n)
    return np.einsum("kij,ji->k", basis, op) / dim


def is_hermitian(op: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(op - op.conj().T)) <= tol)


def is_unitary(op: np.ndarray, tol: float = 1e-9) -> bool:
    dim = op.shape[0]
    return bool(np.max(np.abs(op.conj().T @ op - np.eye(dim))) <= tol)
