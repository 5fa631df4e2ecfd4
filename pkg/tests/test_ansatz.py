import math

import numpy as np
import pytest

from fvqe.ansatz import (QaoaAnsatz, ansatz_descriptor, ansatz_from_descriptor, build_hea,
                         build_qaoa_state, default_layers, final_rotation_slots,
                         initial_params_plus_state, qaoa_gate_circuit, qaoa_gradient,
                         qaoa_initial_params, qaoa_shift_circuits)
from fvqe.problem import MaxCutProblem, ValidationError
from fvqe.sim import EvalCounter, causal_cone, simulate


@pytest.mark.parametrize("n,p", [(3, 1), (5, 2), (9, 4)])
def test_hea_parameter_count(n, p):
    c = build_hea(n, p)
    assert c.param_count == n * (p + 1)
    assert sum(g.kind == "cnot" for g in c.gates) == p * (n - 1)
    assert build_hea(n, p, reduced=True).param_count == 2 * n


def test_hea_slot_layout():
    c = build_hea(4, 2)
    rys = [g for g in c.gates if g.kind == "ry"]
    assert [g.slot for g in rys] == list(range(12))
    assert [g.qubits[0] for g in rys[4:8]] == [0, 1, 2, 3]
    assert final_rotation_slots(c) == [8, 9, 10, 11]


def test_brickwork_order():
    c = build_hea(5, 1)
    pairs = [g.qubits for g in c.gates if g.kind == "cnot"]
    assert pairs == [(1, 2), (3, 4), (0, 1), (2, 3)]


def test_plus_state_initialisation():
    for reduced in (False, True):
        c = build_hea(5, 3, reduced=reduced)
        psi = simulate(c, initial_params_plus_state(c))
        assert np.allclose(psi, np.full(32, 2 ** -2.5), atol=1e-13)


def test_bad_hea():
    with pytest.raises(ValidationError):
        build_hea(1, 1)
    with pytest.raises(ValidationError):
        build_hea(4, 0)


def test_default_layers():
    assert [default_layers(n) for n in (5, 7, 9, 11, 13)] == [2, 3, 4, 5, 6]
    assert default_layers(13, "heite") == 1


def test_descriptors():
    pr = MaxCutProblem.random(5, seed=0)
    assert ansatz_descriptor("hea", 2) == {"kind": "hea", "layers": 2}
    assert ansatz_from_descriptor({"kind": "hea", "layers": 2}, pr.H).param_count == 15
    assert ansatz_from_descriptor({"kind": "qaoa", "layers": 3}, pr.H).param_count == 6
    with pytest.raises(ValidationError):
        ansatz_descriptor("ucc", 1)


@pytest.mark.parametrize("n", [6, 9, 12, 23])
def test_cone_widths_of_p1_layout(n):
    c = build_hea(n, 1)
    widths = [causal_cone(c, (u, u + 3 if u + 3 < n else u - 3)).max_width for u in range(n)]
    widths += [causal_cone(c, (u, u + 1)).max_width for u in range(n - 1)]
    assert max(widths) <= 6
    assert max(widths) < n


def test_qaoa_matches_gate_level_circuit():
    pr = MaxCutProblem.random(5, seed=2)
    g, b = np.array([0.3, 1.1]), np.array([0.7, 2.0])
    circ, phase = qaoa_gate_circuit(pr.H, g, b)
    assert np.allclose(build_qaoa_state(pr.H, g, b), phase * simulate(circ), atol=1e-13)


def _energy(H, params, p):
    psi = build_qaoa_state(H, params[:p], params[p:])
    return float(np.abs(psi) ** 2 @ H.energies)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_qaoa_gradient_finite_differences(seed):
    pr = MaxCutProblem.random(5, seed=seed)
    p = 2
    x = qaoa_initial_params(p, seed)
    grad = qaoa_gradient(pr.H, x[:p], x[p:])
    h = 1e-5
    for j in range(2 * p):
        e = np.zeros(2 * p)
        e[j] = h
        fd = (_energy(pr.H, x + e, p) - _energy(pr.H, x - e, p)) / (2 * h)
        assert grad[j] == pytest.approx(fd, abs=1e-8)


def test_qaoa_circuit_count():
    pr = MaxCutProblem.random(5, seed=0)
    anz = QaoaAnsatz.for_hamiltonian(pr.H, 3)
    K = len(pr.H.terms)
    assert len(qaoa_shift_circuits(anz)) == 2 * 3 * (5 + K)
    cnt = EvalCounter()
    qaoa_gradient(pr.H, np.ones(3), np.ones(3), shots=10, seed=0, counter=cnt)
    assert cnt.circuits == 2 * 3 * (5 + K) and cnt.shots == 10 * cnt.circuits


def test_qaoa_initial_params_range():
    x = qaoa_initial_params(4, 123)
    assert x.shape == (8,) and np.all((0 <= x) & (x <= math.pi))
    assert np.array_equal(x, qaoa_initial_params(4, 123))
