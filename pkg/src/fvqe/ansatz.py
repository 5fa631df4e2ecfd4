"""Hardware-efficient and QAOA ansatz circuits.

Hardware-efficient layout, per layer: ``R_Y`` on every qubit, then a CNOT on
every neighbouring pair ``(q, q+1)`` applied in brickwork order (pairs
starting at odd 0-based qubits first, then pairs starting at even ones).
A final ``R_Y`` layer closes the circuit, so ``m = n (p + 1)`` and slot
``l * n + q`` belongs to the rotation of layer ``l`` on qubit ``q``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .problem import DiagonalHamiltonian, ValidationError
from .sim import (Circuit, EvalCounter, cnot, hadamard, pauli_rotation, probabilities, ry,
                  sampled_frequencies, _bit)


def _entangler(n: int) -> list:
    return [cnot(q, q + 1) for q in range(1, n - 1, 2)] + \
           [cnot(q, q + 1) for q in range(0, n - 1, 2)]


def build_hea(n: int, p: int, reduced: bool = False) -> Circuit:
    """Hardware-efficient ansatz on ``n`` qubits with ``p`` layers.

    ``reduced`` keeps only the first and the last rotation on each qubit
    (the hardware-experiment variant); then ``m = 2 n``.
    """
    if n < 2 or p < 1:
        raise ValidationError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
    gates, slot = [], 0
    for layer in range(p):
        if layer == 0 or not reduced:
            for q in range(n):
                gates.append(ry(q, slot))
                slot += 1
        gates += _entangler(n)
    for q in range(n):
        gates.append(ry(q, slot))
        slot += 1
    return Circuit(n, gates, slot)


def final_rotation_slots(circuit: Circuit) -> list[int]:
    last = {}
    for g in circuit.gates:
        if g.kind == "ry" and g.slot is not None:
            last[g.qubits[0]] = g.slot
    return [last[q] for q in sorted(last)]


def initial_params_plus_state(circuit: Circuit) -> np.ndarray:
    """pi/2 on the last rotation of every qubit, 0 elsewhere: prepares |+>^n."""
    theta = np.zeros(circuit.param_count)
    theta[final_rotation_slots(circuit)] = math.pi / 2
    return theta


def default_layers(n: int, algorithm: str = "fvqe") -> int:
    """Layer counts of the simulation settings (p = 1 for HE-ITE)."""
    if algorithm == "heite":
        return 1
    table = {5: 2, 7: 3, 9: 4, 11: 5, 13: 6}
    return table.get(n, max(1, (n - 1) // 2))


def ansatz_descriptor(kind: str, layers: int) -> dict:
    if kind not in ("hea", "qaoa"):
        raise ValidationError(f"unknown ansatz kind {kind!r}")
    if int(layers) < 1:
        raise ValidationError("layers must be >= 1")
    return {"kind": kind, "layers": int(layers)}


def ansatz_from_descriptor(desc: dict, H: DiagonalHamiltonian | None = None, reduced: bool = False):
    """Build the circuit (HEA) or :class:`QaoaAnsatz` named by a run-config descriptor."""
    desc = ansatz_descriptor(desc["kind"], desc["layers"])
    if desc["kind"] == "hea":
        if H is None:
            raise ValidationError("need the Hamiltonian to size the ansatz")
        return build_hea(H.n_qubits, desc["layers"], reduced=reduced)
    if H is None:
        raise ValidationError("QAOA ansatz needs the Hamiltonian")
    return QaoaAnsatz.for_hamiltonian(H, desc["layers"])


# -- QAOA ---------------------------------------------------------------------

@dataclass(frozen=True)
class QaoaAnsatz:
    n_qubits: int
    layers: int
    terms: tuple[tuple[float, tuple[int, ...]], ...]

    @property
    def param_count(self) -> int:
        return 2 * self.layers

    @classmethod
    def for_hamiltonian(cls, H: DiagonalHamiltonian, layers: int) -> "QaoaAnsatz":
        if layers < 1:
            raise ValidationError("QAOA needs at least one layer")
        return cls(H.n_qubits, layers, tuple((float(h), tuple(Q)) for h, Q in H.terms))


def qaoa_initial_params(p: int, seed) -> np.ndarray:
    """gamma and beta uniform on [0, pi], packed as (gamma_1..p, beta_1..p)."""
    return _rng.generator(seed).uniform(0.0, math.pi, size=2 * p)


def _rx_all(psi: np.ndarray, n: int, angles: np.ndarray, qubits=None) -> np.ndarray:
    """R_X(angle_b) on each listed qubit for every row b."""
    B = psi.shape[0]
    c = np.cos(angles / 2)[:, None, None]
    s = np.sin(angles / 2)[:, None, None]
    for q in (range(n) if qubits is None else qubits):
        v = psi.reshape(B, 1 << q, 2, 1 << (n - q - 1))
        a0, a1 = v[:, :, 0, :], v[:, :, 1, :]
        psi = np.stack([c * a0 - 1j * s * a1, -1j * s * a0 + c * a1], axis=2).reshape(B, -1)
    return psi


def _z_parity(n: int, Q) -> np.ndarray:
    par = np.zeros(1 << n, dtype=np.int64)
    for q in Q:
        par ^= _bit(n, q)
    return 1 - 2 * par


def _qaoa_batch(H: DiagonalHamiltonian, gamma: np.ndarray, beta: np.ndarray,
                inserts=None) -> np.ndarray:
    """QAOA states with optional single-rotation insertions per row.

    ``inserts[b]`` is None or ``(layer, "X", qubit, sign)`` (before that
    layer's mixer) or ``(layer, "Z", term, sign)`` (after that layer's phase).
    """
    n = H.n_qubits
    E = H.energies
    B = 1 if inserts is None else len(inserts)
    psi = np.full((B, 1 << n), 2 ** (-n / 2), dtype=complex)
    for j in range(len(gamma)):
        psi = psi * np.exp(-1j * beta[j] * E)[None, :]
        if inserts is not None:
            for b, ins in enumerate(inserts):
                if ins is None or ins[0] != j:
                    continue
                _, axis, which, sign = ins
                theta = sign * math.pi / 2
                if axis == "Z":
                    _, Q = H.terms[which]
                    psi[b] *= np.exp(-0.5j * theta * _z_parity(n, Q))
                else:
                    psi[b:b + 1] = _rx_all(psi[b:b + 1], n, np.array([theta]), [which])
        psi = _rx_all(psi, n, np.full(B, 2 * gamma[j]))
    return psi


def build_qaoa_state(H: DiagonalHamiltonian, gamma, beta) -> np.ndarray:
    """prod_j exp(-i gamma_j sum X) exp(-i beta_j H) |+>^n, phase applied diagonally."""
    gamma, beta = np.atleast_1d(gamma).astype(float), np.atleast_1d(beta).astype(float)
    if gamma.shape != beta.shape:
        raise ValidationError("gamma and beta must have the same length")
    return _qaoa_batch(H, gamma, beta)[0]


def qaoa_gate_circuit(H: DiagonalHamiltonian, gamma, beta) -> tuple[Circuit, complex]:
    """Gate-level QAOA circuit (fixed angles) and the global phase it omits."""
    n = H.n_qubits
    gates = [hadamard(q) for q in range(n)]
    for g, b in zip(gamma, beta):
        for h, Q in H.terms:
            gates.append(pauli_rotation("Z" * len(Q), Q, angle=2 * b * h))
        gates += [pauli_rotation("X", (q,), angle=2 * g) for q in range(n)]
    phase = np.exp(-1j * np.sum(beta) * H.constant)
    return Circuit(n, gates, 0), phase


def qaoa_shift_circuits(ansatz: QaoaAnsatz) -> list[tuple]:
    """Insertion descriptors of the 2 p (n + K) gradient circuits."""
    out = []
    for j in range(ansatz.layers):
        for q in range(ansatz.n_qubits):
            out += [(j, "X", q, +1), (j, "X", q, -1)]
        for k in range(len(ansatz.terms)):
            out += [(j, "Z", k, +1), (j, "Z", k, -1)]
    return out


def qaoa_gradient(H: DiagonalHamiltonian, gamma, beta, shots=None, seed=0,
                  counter: EvalCounter | None = None, layers_key=()) -> np.ndarray:
    """Analytic gradient (d/dgamma_1..p, d/dbeta_1..p) of <H> by circuit insertion."""
    gamma, beta = np.asarray(gamma, float), np.asarray(beta, float)
    anz = QaoaAnsatz.for_hamiltonian(H, len(gamma))
    inserts = qaoa_shift_circuits(anz)
    probs = probabilities(_qaoa_batch(H, gamma, beta, inserts))
    probs = sampled_frequencies(probs, shots, seed, key=tuple(layers_key))
    if counter is not None:
        counter.add(len(inserts), 0 if shots is None else shots * len(inserts))
    energies = probs @ H.energies
    grad = np.zeros(2 * anz.layers)
    for e, (j, axis, which, sign) in zip(energies, inserts):
        if axis == "X":
            grad[j] += sign * e
        else:
            grad[anz.layers + j] += sign * anz.terms[which][0] * e
    return grad
