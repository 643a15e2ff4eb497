"""Layered 4-qubit ansatz circuits and their exact parameter-shift gradients.

Two ansatz variants are supported:

``Ansatz.OPTIMIZED``
    The input vector is encoded once, by an RY(x_i) on each qubit before the
    first layer. Every layer then applies an entangler that alternates with
    depth (CNOT ring on even layers, CZ pairs on odd layers) followed by a
    trainable RZ and a trainable RY on every qubit. 8 angles per layer.

``Ansatz.VANILLA``
    Every layer re-encodes the input with RY(x_i) on each qubit, applies the
    fixed CNOT ring, then one trainable RY per qubit. 4 angles per layer.

The circuit output is the vector of per-qubit Pauli-Z expectations, one value
in [-1, 1] per qubit.

Flat parameter layout (radians):

    optimized: theta[8k + q]     -> RZ angle, layer k, qubit q
               theta[8k + 4 + q] -> RY angle, layer k, qubit q
    vanilla:   theta[4k + q]     -> RY angle, layer k, qubit q

Gradients use the parameter-shift rule, df/dt = (f(t + pi/2) - f(t - pi/2)) / 2,
which is exact for the RY/RZ rotations used here. An input angle that is
encoded more than once (vanilla) gets one shift pair per occurrence, summed.
All shifted circuits share one gate sequence and differ only in angles, so
they are simulated together as rows of a single amplitude matrix. Rows never
interact, and every per-row operation (including the readout accumulation) is
elementwise with a fixed order, so a row's result is bit-identical whether it
is simulated alone or inside a batch.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .statevector import StateVector, apply_cnot, apply_cz, apply_ry, apply_rz, zero_state

SHIFT = np.pi / 2.0


class Ansatz(str, Enum):
    OPTIMIZED = "optimized"
    VANILLA = "vanilla"


@dataclass(frozen=True)
class PqcConfig:
    """Ansatz variant, depth (number of stacked layers), and register width."""

    variant: Ansatz
    num_layers: int
    num_qubits: int = 4

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.num_qubits < 2:
            raise ValueError(f"num_qubits must be >= 2, got {self.num_qubits}")


def layer_entangler(layer_index: int, num_qubits: int = 4) -> list[tuple[str, int, int]]:
    """Two-qubit gate pattern for one layer, as ("cx"|"cz", first, second) tuples.

    Even layers (0-indexed) use the circular CNOT chain q0->q1->...->q0; odd
    layers use CZ on next-nearest-neighbour pairs, (0,2) and (1,3) at width 4.
    """
    if layer_index < 0:
        raise ValueError(f"layer_index must be >= 0, got {layer_index}")
    if layer_index % 2 == 0:
        return [("cx", q, (q + 1) % num_qubits) for q in range(num_qubits)]
    return [("cz", q, q + 2) for q in range(max(0, num_qubits - 2))]


def cnot_ring(num_qubits: int = 4) -> list[tuple[str, int, int]]:
    """The fixed circular CNOT chain used in every vanilla layer."""
    return [("cx", q, (q + 1) % num_qubits) for q in range(num_qubits)]


def pqc_param_count(config: PqcConfig) -> int:
    """Number of trainable angles: 8 per layer (optimized), 4 per layer (vanilla)."""
    per_layer = 2 if config.variant is Ansatz.OPTIMIZED else 1
    return per_layer * config.num_qubits * config.num_layers


def init_pqc_params(config: PqcConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw the flat angle vector i.i.d. uniform on (-pi, pi)."""
    return rng.uniform(-np.pi, np.pi, size=pqc_param_count(config))


def _encoding_layers(config: PqcConfig) -> int:
    return 1 if config.variant is Ansatz.OPTIMIZED else config.num_layers


# --- batched amplitude kernel ----------------------------------------------
# Rows of `amps` are independent circuits sharing one gate sequence; gates act
# on index pairs selected by bit arithmetic (little-endian, as in statevector).


@lru_cache(maxsize=None)
def _bit_indices(num_qubits: int, qubit: int):
    idx = np.arange(2**num_qubits)
    i1 = idx[(idx >> qubit) & 1 == 1]
    return i1 - (1 << qubit), i1


@lru_cache(maxsize=None)
def _cx_indices(num_qubits: int, control: int, target: int):
    idx = np.arange(2**num_qubits)
    j0 = idx[(((idx >> control) & 1) == 1) & (((idx >> target) & 1) == 0)]
    return j0, j0 + (1 << target)


@lru_cache(maxsize=None)
def _cz_indices(num_qubits: int, a: int, b: int):
    idx = np.arange(2**num_qubits)
    return idx[(((idx >> a) & 1) == 1) & (((idx >> b) & 1) == 1)]


def _ry_rows(amps, num_qubits, qubit, angles):
    i0, i1 = _bit_indices(num_qubits, qubit)
    c = np.cos(0.5 * angles)[:, None]
    s = np.sin(0.5 * angles)[:, None]
    a0 = amps[:, i0]
    a1 = amps[:, i1]
    amps[:, i0] = c * a0 - s * a1
    amps[:, i1] = s * a0 + c * a1


def _rz_rows(amps, num_qubits, qubit, angles):
    i0, i1 = _bit_indices(num_qubits, qubit)
    phase = np.exp(-0.5j * angles)[:, None]
    amps[:, i0] *= phase
    amps[:, i1] *= np.conj(phase)


def _entangle_rows(amps, num_qubits, gates):
    for kind, a, b in gates:
        if kind == "cx":
            j0, j1 = _cx_indices(num_qubits, a, b)
            swapped = amps[:, j1]
            amps[:, j1] = amps[:, j0]
            amps[:, j0] = swapped
        else:
            amps[:, _cz_indices(num_qubits, a, b)] *= -1.0


def _run_batch(config: PqcConfig, thetas: np.ndarray, encodings: np.ndarray) -> np.ndarray:
    """Simulate one circuit per row: thetas [C, P], encodings [C, E, nq].

    ``encodings`` carries one row per encoding event (a single event for the
    optimized ansatz, one per layer for vanilla) so that gradient code can
    shift individual encoding occurrences. Returns amplitudes [C, 2**nq].
    """
    nq = config.num_qubits
    rows = thetas.shape[0]
    amps = np.zeros((rows, 2**nq), dtype=np.complex128)
    amps[:, 0] = 1.0
    if config.variant is Ansatz.OPTIMIZED:
        for q in range(nq):
            _ry_rows(amps, nq, q, encodings[:, 0, q])
        for layer in range(config.num_layers):
            _entangle_rows(amps, nq, layer_entangler(layer, nq))
            base = 2 * nq * layer
            for q in range(nq):
                _rz_rows(amps, nq, q, thetas[:, base + q])
            for q in range(nq):
                _ry_rows(amps, nq, q, thetas[:, base + nq + q])
    else:
        ring = cnot_ring(nq)
        for layer in range(config.num_layers):
            for q in range(nq):
                _ry_rows(amps, nq, q, encodings[:, layer, q])
            _entangle_rows(amps, nq, ring)
            base = nq * layer
            for q in range(nq):
                _ry_rows(amps, nq, q, thetas[:, base + q])
    return amps


def _z_readout(amps: np.ndarray, num_qubits: int) -> np.ndarray:
    """Per-qubit <Z> for every row: 1 - 2 P(bit = 1).

    Accumulates probabilities column by column in a fixed order (not via a
    shape-dependent reduction) so a row's readout is bit-identical whether it
    is simulated alone or inside a larger batch.
    """
    probs = amps.real**2 + amps.imag**2
    out = np.empty((amps.shape[0], num_qubits))
    for q in range(num_qubits):
        _, i1 = _bit_indices(num_qubits, q)
        acc = probs[:, i1[0]].copy()
        for column in i1[1:]:
            acc += probs[:, column]
        out[:, q] = 1.0 - 2.0 * acc
    return out


def _check_shapes(config, theta, x):
    theta = np.asarray(theta, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    expected = pqc_param_count(config)
    if theta.shape != (expected,):
        raise ValueError(f"theta must have shape ({expected},), got {theta.shape}")
    if x.shape != (config.num_qubits,):
        raise ValueError(f"input must have shape ({config.num_qubits},), got {x.shape}")
    return theta, x


def pqc_forward(config: PqcConfig, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Per-qubit Z expectations of the circuit evaluated at (theta, x)."""
    theta, x = _check_shapes(config, theta, x)
    encodings = np.tile(x, (1, _encoding_layers(config), 1))
    amps = _run_batch(config, theta[None, :], encodings)
    return _z_readout(amps, config.num_qubits)[0]


def pqc_final_state(config: PqcConfig, theta: np.ndarray, x: np.ndarray) -> StateVector:
    """Full statevector after the circuit, built gate by gate on the register
    simulator; doubles as a readable reference for the batched kernel."""
    theta, x = _check_shapes(config, theta, x)
    nq = config.num_qubits
    state = zero_state(nq)

    def entangle(state, gates):
        for kind, a, b in gates:
            state = apply_cnot(state, a, b) if kind == "cx" else apply_cz(state, a, b)
        return state

    if config.variant is Ansatz.OPTIMIZED:
        for q in range(nq):
            state = apply_ry(state, q, x[q])
        for layer in range(config.num_layers):
            state = entangle(state, layer_entangler(layer, nq))
            base = 2 * nq * layer
            for q in range(nq):
                state = apply_rz(state, q, theta[base + q])
            for q in range(nq):
                state = apply_ry(state, q, theta[base + nq + q])
    else:
        for layer in range(config.num_layers):
            for q in range(nq):
                state = apply_ry(state, q, x[q])
            state = entangle(state, cnot_ring(nq))
            base = nq * layer
            for q in range(nq):
                state = apply_ry(state, q, theta[base + q])
    return state


def pqc_value_and_gradients(
    config: PqcConfig, theta: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward value plus exact Jacobians w.r.t. theta and the input angles.

    Returns ``(value[nq], jac_theta[nq, P], jac_x[nq, nq])``. Simulates one
    baseline circuit plus two per shifted angle occurrence, all as one batch.
    """
    theta, x = _check_shapes(config, theta, x)
    nq = config.num_qubits
    p = theta.size
    enc_layers = _encoding_layers(config)
    occurrences = enc_layers * nq

    rows = 1 + 2 * (p + occurrences)
    thetas = np.tile(theta, (rows, 1))
    encodings = np.tile(x, (rows, enc_layers, 1))
    row = 1
    for j in range(p):
        thetas[row, j] += SHIFT
        thetas[row + 1, j] -= SHIFT
        row += 2
    for layer in range(enc_layers):
        for i in range(nq):
            encodings[row, layer, i] += SHIFT
            encodings[row + 1, layer, i] -= SHIFT
            row += 2

    out = _z_readout(_run_batch(config, thetas, encodings), nq)
    value = out[0]
    shifts = out[1:].reshape(p + occurrences, 2, nq)
    diffs = 0.5 * (shifts[:, 0, :] - shifts[:, 1, :])  # [K, nq]
    jac_theta = diffs[:p].T.copy()
    jac_x = np.zeros((nq, nq))
    for layer in range(enc_layers):
        jac_x += diffs[p + layer * nq : p + (layer + 1) * nq].T
    return value, jac_theta, jac_x


def pqc_gradients(config: PqcConfig, theta: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Parameter-shift Jacobians ``(jac_theta[nq, P], jac_x[nq, nq])``."""
    _, jac_theta, jac_x = pqc_value_and_gradients(config, theta, x)
    return jac_theta, jac_x
