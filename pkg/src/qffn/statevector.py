"""Dense statevector simulation of small qubit registers.

A state over ``n`` qubits is stored as a flat array of ``2**n`` complex128
amplitudes. Bit ordering is little-endian throughout the package: qubit 0 is
the least significant bit of the basis index, so basis state ``|q3 q2 q1 q0>``
lives at index ``q0 + 2*q1 + 4*q2 + 8*q3``.

Gate conventions (half-angle form):

    RY(t) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]]
    RZ(t) = diag(exp(-i t/2), exp(+i t/2))

CNOT flips the target bit where the control bit is 1; CZ negates the
amplitude of basis states where both bits are 1.

Gate application returns a new ``StateVector``; inputs are never mutated, so
states are safe to share and to simulate in parallel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 12


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray  # shape (2**num_qubits,), complex128


def _check_qubit(state: StateVector, qubit: int) -> None:
    if not 0 <= qubit < state.num_qubits:
        raise ValueError(
            f"qubit index {qubit} out of range for {state.num_qubits}-qubit state"
        )


def zero_state(num_qubits: int) -> StateVector:
    """All-qubits-|0> state: amplitude 1 at basis index 0."""
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be in 1..{MAX_QUBITS}, got {num_qubits}")
    amps = np.zeros(2**num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(num_qubits, amps)


def _apply_one_qubit(state: StateVector, qubit: int, matrix: np.ndarray) -> StateVector:
    # Reshape to one axis per qubit; axis k holds qubit n-1-k (little-endian).
    n = state.num_qubits
    psi = state.amplitudes.reshape([2] * n)
    axis = n - 1 - qubit
    psi = np.moveaxis(psi, axis, -1)
    psi = psi @ matrix.T
    psi = np.moveaxis(psi, -1, axis)
    return StateVector(n, np.ascontiguousarray(psi).reshape(-1))


def apply_ry(state: StateVector, qubit: int, theta: float) -> StateVector:
    """Rotate one qubit about Y by angle theta."""
    _check_qubit(state, qubit)
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    matrix = np.array([[c, -s], [s, c]], dtype=np.complex128)
    return _apply_one_qubit(state, qubit, matrix)


def apply_rz(state: StateVector, qubit: int, theta: float) -> StateVector:
    """Rotate one qubit about Z by angle theta."""
    _check_qubit(state, qubit)
    phase = np.exp(-0.5j * theta)
    matrix = np.array([[phase, 0.0], [0.0, np.conj(phase)]], dtype=np.complex128)
    return _apply_one_qubit(state, qubit, matrix)


def _two_qubit_slices(n: int, a: int, b: int, va: int, vb: int) -> tuple:
    idx: list = [slice(None)] * n
    idx[n - 1 - a] = va
    idx[n - 1 - b] = vb
    return tuple(idx)


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    """Flip the target bit on basis states where the control bit is 1."""
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise ValueError("control and target must be distinct qubits")
    n = state.num_qubits
    psi = state.amplitudes.reshape([2] * n)
    out = psi.copy()
    lo = _two_qubit_slices(n, control, target, 1, 0)
    hi = _two_qubit_slices(n, control, target, 1, 1)
    out[lo] = psi[hi]
    out[hi] = psi[lo]
    return StateVector(n, out.reshape(-1))


def apply_cz(state: StateVector, a: int, b: int) -> StateVector:
    """Negate the amplitude of basis states where both bits are 1 (symmetric in a, b)."""
    _check_qubit(state, a)
    _check_qubit(state, b)
    if a == b:
        raise ValueError("CZ requires two distinct qubits")
    n = state.num_qubits
    out = state.amplitudes.reshape([2] * n).copy()
    out[_two_qubit_slices(n, a, b, 1, 1)] *= -1.0
    return StateVector(n, out.reshape(-1))


def expectation_z(state: StateVector, qubit: int) -> float:
    """<Z> on one qubit: sum of |amplitude|^2 signed by that qubit's bit value."""
    _check_qubit(state, qubit)
    probs = np.abs(state.amplitudes) ** 2
    bits = (np.arange(probs.size) >> qubit) & 1
    return float(np.sum(probs * (1.0 - 2.0 * bits)))
