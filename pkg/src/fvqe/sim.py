"""Gate-list circuits, exact statevector simulation and sampling.

Conventions: qubit 0 is the most significant bit of a basis index;
rotations are ``R_G(theta) = exp(-i theta G / 2)``, so
``R_Y(theta)|0> = cos(theta/2)|0> + sin(theta/2)|1>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import rng as _rng
from .filters import estimate_expectation, filter_value, log_filter_value
from .problem import CapabilityError, ValidationError

MAX_AMPLITUDES = 1 << 26

ROTATIONS = ("ry", "pauli")


@dataclass(frozen=True)
class Gate:
    """One gate of the IR.

    ``kind`` is ``ry`` (qubits=(q,)), ``pauli`` (rotation about the Pauli
    string ``pauli`` on ``qubits``), ``cnot`` (control, target), ``h`` or
    ``controlled`` (qubits=(control,), acting with ``block`` when the control
    is 1). A rotation's angle is ``angle + params[slot]``; ``slot=None``
    gives a fixed rotation.
    """

    kind: str
    qubits: tuple[int, ...]
    slot: int | None = None
    pauli: str | None = None
    angle: float = 0.0
    block: tuple["Gate", ...] = ()

    def support(self) -> tuple[int, ...]:
        if self.kind == "controlled":
            qs = set(self.qubits)
            for g in self.block:
                qs.update(g.support())
            return tuple(sorted(qs))
        return self.qubits

    def slots(self) -> list[int]:
        out = [] if self.slot is None else [self.slot]
        for g in self.block:
            out += g.slots()
        return out

    def remap(self, mapping: dict[int, int]) -> "Gate":
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.slot,
                    self.pauli, self.angle, tuple(g.remap(mapping) for g in self.block))


def ry(q, slot=None, angle=0.0) -> Gate:
    return Gate("ry", (q,), slot, None, angle)


def cnot(c, t) -> Gate:
    return Gate("cnot", (c, t))


def hadamard(q) -> Gate:
    return Gate("h", (q,))


def pauli_rotation(pauli: str, qubits, slot=None, angle=0.0) -> Gate:
    qubits = tuple(qubits)
    if len(pauli) != len(qubits) or set(pauli) - set("XYZ"):
        raise ValidationError(f"bad Pauli string {pauli!r} for qubits {qubits}")
    return Gate("pauli", qubits, slot, pauli, angle)


def controlled(control, block) -> Gate:
    return Gate("controlled", (control,), block=tuple(block))


@dataclass
class Circuit:
    width: int
    gates: list[Gate] = field(default_factory=list)
    param_count: int = 0

    def __post_init__(self):
        used = []
        for g in self.gates:
            for q in g.support():
                if not 0 <= q < self.width:
                    raise ValidationError(f"gate {g.kind} on qubit {q} outside width {self.width}")
            if g.kind == "cnot" and g.qubits[0] == g.qubits[1]:
                raise ValidationError("CNOT control equals target")
            used += g.slots()
        if len(used) != len(set(used)):
            raise ValidationError("a parameter slot is referenced by more than one gate")
        if used and (min(used) < 0 or max(used) >= self.param_count):
            raise ValidationError("parameter slot out of range")

    def slots_used(self) -> list[int]:
        return sorted(s for g in self.gates for s in g.slots())

    def dump(self) -> str:
        return "\n".join(_dump_gate(g) for g in self.gates) + ("\n" if self.gates else "")


def _dump_gate(g: Gate, indent="") -> str:
    kind = g.kind.upper() if g.pauli is None else f"R{g.pauli}"
    line = f"{indent}GATE {kind} {' '.join(map(str, g.qubits))}"
    if g.slot is not None:
        line += f" [{g.slot}]"
    elif g.kind in ROTATIONS:
        line += f" ({g.angle!r})"
    for sub in g.block:
        line += "\n" + _dump_gate(sub, indent + "  ")
    return line


# -- simulation ---------------------------------------------------------------

@lru_cache(maxsize=256)
def _flip_perm(n: int, mask: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.int64) ^ mask


@lru_cache(maxsize=256)
def _bit(n: int, q: int) -> np.ndarray:
    return (np.arange(1 << n, dtype=np.int64) >> (n - 1 - q)) & 1


@lru_cache(maxsize=256)
def _cnot_perm(n: int, c: int, t: int) -> np.ndarray:
    x = np.arange(1 << n, dtype=np.int64)
    return x ^ (_bit(n, c) << (n - 1 - t))


@lru_cache(maxsize=256)
def _pauli_action(n: int, pauli: str, qubits: tuple[int, ...]):
    mask = 0
    phase = np.ones(1 << n, dtype=complex)
    for p, q in zip(pauli, qubits):
        b = _bit(n, q)
        if p in "XY":
            mask |= 1 << (n - 1 - q)
        if p == "Z":
            phase = phase * (1 - 2 * b)
        elif p == "Y":
            phase = phase * np.where(b == 1, 1j, -1j)
        # P psi (y) = phase(y) psi(y ^ mask)
    return _flip_perm(n, mask), phase


def _angles(g: Gate, params: np.ndarray) -> np.ndarray:
    if g.slot is None:
        return np.full(params.shape[0], g.angle)
    return g.angle + params[:, g.slot]


def _apply(psi: np.ndarray, g: Gate, n: int, params: np.ndarray) -> np.ndarray:
    B = psi.shape[0]
    if g.kind in ("ry", "h"):
        q = g.qubits[0]
        v = psi.reshape(B, 1 << q, 2, 1 << (n - q - 1))
        a0, a1 = v[:, :, 0, :], v[:, :, 1, :]
        if g.kind == "h":
            r = 1 / np.sqrt(2)
            out = np.stack([(a0 + a1) * r, (a0 - a1) * r], axis=2)
        else:
            th = _angles(g, params)[:, None, None]
            c, s = np.cos(th / 2), np.sin(th / 2)
            out = np.stack([c * a0 - s * a1, s * a0 + c * a1], axis=2)
        return out.reshape(B, -1)
    if g.kind == "cnot":
        return psi[:, _cnot_perm(n, *g.qubits)]
    if g.kind == "pauli":
        perm, phase = _pauli_action(n, g.pauli, g.qubits)
        th = _angles(g, params)[:, None]
        return np.cos(th / 2) * psi - 1j * np.sin(th / 2) * (phase * psi[:, perm])
    if g.kind == "controlled":
        new = psi
        for sub in g.block:
            new = _apply(new, sub, n, params)
        return np.where(_bit(n, g.qubits[0]).astype(bool), new, psi)
    raise ValidationError(f"unknown gate kind {g.kind!r}")


def _as_batch(circuit: Circuit, params) -> np.ndarray:
    P = np.asarray(params, dtype=float)
    if P.ndim == 1:
        P = P[None, :]
    if P.shape[1] != circuit.param_count:
        raise ValidationError(
            f"circuit has {circuit.param_count} parameters, got {P.shape[1]}")
    return P


def simulate_batch(circuit: Circuit, params, initial=None) -> np.ndarray:
    """States for a batch of parameter vectors, shape (B, 2**width)."""
    P = _as_batch(circuit, params)
    n = circuit.width
    if (1 << n) > MAX_AMPLITUDES:
        raise CapabilityError(f"{n} qubits exceeds the memory cap of {MAX_AMPLITUDES} amplitudes")
    B = P.shape[0]
    if initial is None:
        psi = np.zeros((B, 1 << n), dtype=complex)
        psi[:, 0] = 1.0
    else:
        psi = np.broadcast_to(np.asarray(initial, dtype=complex), (B, 1 << n)).copy()
    for g in circuit.gates:
        psi = _apply(psi, g, n, P)
    return psi


def simulate(circuit: Circuit, params=None, initial=None) -> np.ndarray:
    if params is None:
        params = np.zeros(circuit.param_count)
    return simulate_batch(circuit, params, initial)[0]


def probabilities(state) -> np.ndarray:
    p = np.abs(state) ** 2
    return p / p.sum(axis=-1, keepdims=True)


class EvalCounter:
    """Tally of circuit executions, shots and (optionally) circuit widths."""

    def __init__(self):
        self.circuits = 0
        self.shots = 0
        self.widths: dict[int, int] = {}

    def add(self, circuits: int, shots: int = 0, width: int | None = None) -> None:
        self.circuits += int(circuits)
        self.shots += int(shots)
        if width is not None:
            self.widths[width] = self.widths.get(width, 0) + int(circuits)

    def snapshot(self) -> tuple[int, int]:
        return self.circuits, self.shots


# -- sampling -----------------------------------------------------------------

@dataclass(frozen=True)
class SampleSet:
    """Shot counts ``counts[i]`` of basis index ``outcomes[i]``."""

    n_qubits: int
    outcomes: np.ndarray
    counts: np.ndarray

    @property
    def shots(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> dict[int, int]:
        return {int(x): int(c) for x, c in zip(self.outcomes, self.counts)}

    def frequencies(self) -> np.ndarray:
        f = np.zeros(1 << self.n_qubits)
        f[self.outcomes] = self.counts / self.shots
        return f

    @classmethod
    def from_counts(cls, n_qubits: int, counts: dict[int, int]) -> "SampleSet":
        items = sorted((int(k), int(v)) for k, v in counts.items() if v > 0)
        return cls(n_qubits, np.array([k for k, _ in items], dtype=np.int64),
                   np.array([v for _, v in items], dtype=np.int64))


def sample(state, M, seed=None):
    """Computational-basis measurement of ``M`` shots.

    ``M=None`` is exact mode and returns the probability vector itself.
    """
    p = probabilities(np.asarray(state))
    if M is None:
        return p
    if M < 1:
        raise ValidationError("need at least one shot")
    n = int(np.log2(p.size))
    counts = np.random.default_rng(seed).multinomial(int(M), p)
    idx = np.flatnonzero(counts)
    return SampleSet(n, idx.astype(np.int64), counts[idx].astype(np.int64))


def sampled_frequencies(probs: np.ndarray, M, seed, key=()) -> np.ndarray:
    """Row-wise empirical frequencies; row ``i`` uses stream ``(*key, i)``."""
    if M is None:
        return probs
    out = np.empty_like(probs)
    for i, p in enumerate(probs):
        counts = _rng.generator(seed, *key, i).multinomial(int(M), p)
        out[i] = counts / M
    return out


def expectation_via_samples(circuit: Circuit, params, H, spec, power=1, M=None, seed=None) -> float:
    return estimate_expectation(sample(simulate(circuit, params), M, seed), H, spec, power)


# -- Hadamard test ------------------------------------------------------------

def hadamard_test_circuit(ansatz: Circuit) -> Circuit:
    """W(theta, phi) on width n+1, ancilla = qubit 0.

    Slots ``0..m-1`` carry theta, slots ``m..2m-1`` carry ``phi - theta``;
    each parametrized rotation is followed by the same rotation controlled
    on the ancilla so that the ancilla-1 branch sees phi.
    """
    m = ansatz.param_count
    shift = {q: q + 1 for q in range(ansatz.width)}
    gates = [hadamard(0)]
    for g in ansatz.gates:
        if g.kind == "controlled":
            raise ValidationError("nested controlled blocks are not supported")
        moved = g.remap(shift)
        gates.append(moved)
        if g.slot is not None:
            extra = Gate(moved.kind, moved.qubits, g.slot + m, moved.pauli, 0.0)
            gates.append(controlled(0, [extra]))
    gates.append(hadamard(0))
    return Circuit(ansatz.width + 1, gates, 2 * m)


def hadamard_test_overlap(theta, phi, ansatz: Circuit, H, spec, shots=None, seed=None,
                          log_scale: float = 0.0, _circuit: Circuit | None = None):
    """Re <psi(phi)| F |psi(theta)> from <Z_anc (x) F> on W(theta, phi).

    ``theta`` may be a batch (B, m) against a single ``phi``. The result is
    multiplied by ``exp(-log_scale)``.
    """
    W = _circuit or hadamard_test_circuit(ansatz)
    T = np.atleast_2d(np.asarray(theta, dtype=float))
    Phi = np.broadcast_to(np.asarray(phi, dtype=float), T.shape)
    states = simulate_batch(W, np.hstack([T, Phi - T]))
    n = ansatz.width
    half = 1 << n
    fvals = _filter_values(spec, H.energies, log_scale)
    obs = np.concatenate([fvals, -fvals])
    probs = probabilities(states)
    if shots is not None:
        probs = sampled_frequencies(probs, shots, 0 if seed is None else seed)
    out = probs @ obs
    return float(out[0]) if np.ndim(theta) == 1 else out


def _filter_values(spec, E, log_scale=0.0):
    if spec.family == "chebyshev":
        return filter_value(spec, E) * np.exp(-log_scale)
    return np.exp(log_filter_value(spec, E) - log_scale)


# -- causal cones -------------------------------------------------------------

@dataclass
class SubCone:
    qubits: tuple[int, ...]
    circuit: Circuit
    support: tuple[int, ...]

    @property
    def width(self) -> int:
        return len(self.qubits)

    @property
    def slots(self) -> list[int]:
        return self.circuit.slots_used()


@dataclass
class CausalCone:
    qubits: tuple[int, ...]
    gate_indices: list[int]
    subcones: list[SubCone]

    @property
    def n_cone(self) -> int:
        return len(self.qubits)

    @property
    def max_width(self) -> int:
        return max(s.width for s in self.subcones)

    @property
    def slots(self) -> list[int]:
        return sorted(s for c in self.subcones for s in c.slots)


def causal_cone(circuit: Circuit, support) -> CausalCone:
    """Gates and qubits that can influence a diagonal observable on ``support``.

    Backward sweep: a gate is kept if it touches the active set, and a kept
    multi-qubit gate adds its qubits to the set. The kept qubits split into
    sub-cones connected by kept multi-qubit gates; those are independent.
    """
    support = tuple(sorted(set(support)))
    if not support:
        raise ValidationError("observable support must be non-empty")
    if any(not 0 <= q < circuit.width for q in support):
        raise ValidationError("support outside circuit")
    active = set(support)
    kept = []
    for i in range(len(circuit.gates) - 1, -1, -1):
        qs = circuit.gates[i].support()
        if active.intersection(qs):
            kept.append(i)
            if len(qs) > 1:
                active.update(qs)
    kept.reverse()

    parent = {q: q for q in active}

    def find(q):
        while parent[q] != q:
            parent[q] = parent[parent[q]]
            q = parent[q]
        return q

    for i in kept:
        qs = circuit.gates[i].support()
        for q in qs[1:]:
            parent[find(q)] = find(qs[0])
    groups: dict[int, list[int]] = {}
    for q in sorted(active):
        groups.setdefault(find(q), []).append(q)

    subcones = []
    for qs in sorted(groups.values()):
        local = {q: k for k, q in enumerate(qs)}
        gates = [circuit.gates[i].remap(local) for i in kept if circuit.gates[i].support()[0] in local]
        sub_support = tuple(local[q] for q in support if q in local)
        subcones.append(SubCone(tuple(qs), Circuit(len(qs), gates, circuit.param_count), sub_support))
    return CausalCone(tuple(sorted(active)), kept, subcones)


def z_expectation(states: np.ndarray, support, n: int) -> np.ndarray:
    """<Z_S> for each state row (or from a frequency matrix when real)."""
    par = np.zeros(1 << n, dtype=np.int64)
    for q in support:
        par ^= _bit(n, q)
    probs = states if np.isrealobj(states) else np.abs(states) ** 2
    return probs @ (1 - 2 * par).astype(float)


def expectation_local_observable(circuit: Circuit, params, support, coeff: float = 1.0,
                                 via_cone: bool = True, shots=None, seed=None,
                                 cone: CausalCone | None = None, counter=None):
    """``coeff * <Z_S>``; ``params`` may be a batch (B, m).

    ``shots`` is an int, a callable ``width -> shots``, or None (exact).
    Each sub-cone is simulated and sampled on its own and the factors
    multiplied. ``counter`` (optional) receives ``(circuits, shots)`` tallies.
    """
    P = _as_batch(circuit, params)
    if not via_cone:
        states = simulate_batch(circuit, P)
        probs = probabilities(states)
        if shots is not None:
            M = shots(circuit.width) if callable(shots) else shots
            probs = sampled_frequencies(probs, M, 0 if seed is None else seed)
            if counter is not None:
                counter.add(P.shape[0], M * P.shape[0])
        elif counter is not None:
            counter.add(P.shape[0], 0)
        val = z_expectation(probs, support, circuit.width)
    else:
        cone = cone or causal_cone(circuit, support)
        val = np.ones(P.shape[0])
        for k, sub in enumerate(cone.subcones):
            probs = probabilities(simulate_batch(sub.circuit, P))
            M = None
            if shots is not None:
                M = shots(sub.width) if callable(shots) else shots
                probs = sampled_frequencies(probs, M, 0 if seed is None else seed, key=(k,))
            if counter is not None:
                counter.add(P.shape[0], 0 if M is None else M * P.shape[0], width=sub.width)
            if sub.support:
                val = val * z_expectation(probs, sub.support, sub.width)
    val = coeff * val
    return float(val[0]) if np.ndim(params) == 1 else val
