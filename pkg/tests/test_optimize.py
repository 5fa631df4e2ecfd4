import math

import numpy as np
import pytest

from fvqe import optimize as opt
from fvqe.ansatz import build_hea, initial_params_plus_state
from fvqe.filters import DegenerateFilterError, FilterSpec, filter_value, scaled_filter_values
from fvqe.optimize import (AdaptationError, FvqeGradient, OptimizerConfig, OptimizerTrace,
                           adapt_tau, fvqe_gradient, fvqe_run, heite_run, heite_term_update,
                           hessian_diagonal_fvqe, qaoa_run, qvf_cost_and_grad, qvf_run, qvf_step,
                           search_tau, vqe_gradient, vqe_hessian_diagonal, vqe_run)
from fvqe.problem import MaxCutProblem, ValidationError, WeightedGraph
from fvqe.sim import EvalCounter, causal_cone, probabilities, simulate


def random_graph_problem(n, seed):
    """Random weighted (not necessarily regular) graph on n + 1 vertices."""
    rng = np.random.default_rng(seed)
    N = n + 1
    edges = [(u, u + 1, rng.random()) for u in range(1, N)]
    for u in range(1, N + 1):
        for v in range(u + 2, N + 1):
            if rng.random() < 0.4:
                edges.append((u, v, rng.random()))
    return MaxCutProblem(WeightedGraph(N, tuple(edges)))


def qvf_cost(theta, theta_prev, c, H, spec):
    f = filter_value(spec, H.energies)
    prev = simulate(c, theta_prev)
    F2 = np.abs(prev) ** 2 @ f**2
    return 1 - np.real(np.conj(prev) @ (f * simulate(c, theta))) / math.sqrt(F2)


def energy(c, theta, obs):
    return float(np.abs(simulate(c, theta)) ** 2 @ obs)


def central_diff(fun, x, h=1e-5):
    out = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        out[j] = (fun(x + e) - fun(x - e)) / (2 * h)
    return out


def second_diff(fun, x, j, h=1e-4):
    e = np.zeros_like(x)
    e[j] = h
    return (fun(x + e) - 2 * fun(x) + fun(x - e)) / h**2


FAMS = ["inverse", "logarithm", "exponential", "power", "cosine"]


@pytest.mark.parametrize("k", range(6))
def test_fvqe_gradient_is_qvf_cost_gradient(k):
    n = 3 + k % 3
    pr = random_graph_problem(n, k)
    c = build_hea(n, 1)
    theta = np.random.default_rng(k).uniform(-np.pi, np.pi, c.param_count)
    spec = FilterSpec(FAMS[k % 5], 0.7 + 0.5 * k)
    g = fvqe_gradient(theta, spec, pr.H, c)
    fd = central_diff(lambda x: qvf_cost(x, theta, c, pr.H, spec), theta)
    assert np.max(np.abs(g.grad - fd)) < 1e-6
    assert g.norm == pytest.approx(np.linalg.norm(g.grad))
    assert g.energy == pytest.approx(energy(c, theta, pr.H.energies), abs=1e-12)


def test_fvqe_hessian_matches_second_derivative():
    pr = random_graph_problem(4, 9)
    c = build_hea(4, 1)
    theta = np.random.default_rng(9).normal(size=c.param_count)
    spec = FilterSpec("inverse", 1.5)
    g = fvqe_gradient(theta, spec, pr.H, c)
    hd = hessian_diagonal_fvqe(g)
    assert hd > 0
    for j in range(c.param_count):
        fd = second_diff(lambda x: qvf_cost(x, theta, c, pr.H, spec), theta, j)
        assert fd == pytest.approx(hd, abs=1e-4)


def test_eigenstate_gradient_vanishes_and_hessian_is_quarter():
    pr = MaxCutProblem.random(5, seed=1)
    c = build_hea(5, 2)
    theta = np.zeros(c.param_count)  # |00000>, a basis state
    g = fvqe_gradient(theta, FilterSpec("exponential", 3.0), pr.H, c)
    assert np.max(np.abs(g.grad)) < 1e-14
    assert hessian_diagonal_fvqe(g) == pytest.approx(0.25)
    assert np.max(np.abs(vqe_gradient(theta, pr.H, c))) < 1e-14


def test_fvqe_gradient_is_scaled_vqe_gradient_of_minus_f():
    pr = random_graph_problem(4, 3)
    c = build_hea(4, 2)
    theta = np.random.default_rng(3).normal(size=c.param_count)
    spec = FilterSpec("cosine", 2.0)
    g = fvqe_gradient(theta, spec, pr.H, c)
    f = scaled_filter_values(spec, pr.H.energies, support=probabilities(simulate(c, theta)) > 0)
    v = vqe_gradient(theta, pr.H, c, observable=-f)
    ratio = g.grad / v
    assert np.allclose(ratio, 1 / (2 * math.sqrt(g.F2)), rtol=1e-9)
    # the second derivatives differ even at theta_{t-1}
    hv = vqe_hessian_diagonal(theta, pr.H, c, observable=-f) / (2 * math.sqrt(g.F2))
    assert not np.allclose(hv, hessian_diagonal_fvqe(g), atol=1e-6)


def test_vqe_gradient_and_hessian_finite_differences():
    pr = random_graph_problem(5, 4)
    c = build_hea(5, 1)
    theta = np.random.default_rng(4).normal(size=c.param_count)
    fun = lambda x: energy(c, x, pr.H.energies)  # noqa: E731
    assert np.max(np.abs(vqe_gradient(theta, pr.H, c) - central_diff(fun, theta))) < 1e-6
    hd = vqe_hessian_diagonal(theta, pr.H, c)
    for j in range(c.param_count):
        assert hd[j] == pytest.approx(second_diff(fun, theta, j), abs=1e-4)


def test_gradient_circuit_count():
    pr = MaxCutProblem.random(5, seed=2)
    c = build_hea(5, 2)
    cnt = EvalCounter()
    fvqe_gradient(initial_params_plus_state(c), FilterSpec("inverse", 1.0), pr.H, c, shots=10,
                  counter=cnt)
    assert cnt.circuits == 2 * c.param_count + 1 and cnt.shots == 10 * cnt.circuits


def test_degenerate_filter_errors():
    pr = MaxCutProblem.random(3, seed=0)
    c = build_hea(3, 1)
    # |000> is the empty cut, E = 1, where the power filter vanishes; every shifted
    # circuit also has support only near that state, so shots can all land on it
    with pytest.raises(DegenerateFilterError):
        fvqe_gradient(np.zeros(c.param_count), FilterSpec("power", 1.0), pr.H, c)


# -- tau search -----------------------------------------------------------------

class Stub:
    def __init__(self, norm):
        self.norm = norm


def scripted(fun):
    calls = []

    def g(spec):
        calls.append(spec.tau)
        return Stub(fun(spec.tau))
    return g, calls


def test_bisection_lands_in_window():
    g, calls = scripted(lambda t: 1 - math.exp(-t))
    res = search_tau(g, "inverse", g_c=0.5)
    assert res.branch == "window"
    assert 0 < 0.5 - res.gradient.norm < 0.01
    assert res.evaluations == len(calls) <= 30
    assert calls[:4] == [0.1, 0.2, 0.4, 0.8]


def test_plateau_returns_largest_tried_tau():
    g, calls = scripted(lambda t: 0.3 * (1 - math.exp(-t)))
    res = search_tau(g, "inverse", g_c=0.5)
    assert res.branch == "plateau"
    assert res.tau == max(calls)


def test_eigenstate_is_a_plateau():
    g, _ = scripted(lambda t: 0.0)
    assert search_tau(g, "exponential", g_c=0.1).branch == "plateau"


def test_budget_exhaustion_raises():
    g, _ = scripted(lambda t: 5.0)
    with pytest.raises(AdaptationError):
        search_tau(g, "inverse", g_c=0.1, budget=10)


def test_chebyshev_scans_integers():
    g, calls = scripted(lambda t: 0.04 * t)
    res = search_tau(g, "chebyshev", g_c=0.1)
    assert all(float(t).is_integer() for t in calls)
    assert calls[:3] == [1, 2, 3]
    assert res.tau == 2 and res.branch == "integer"
    g, _ = scripted(lambda t: 0.095 if t == 3 else 0.03 * t)
    assert search_tau(g, "chebyshev", g_c=0.1).branch == "window"


def test_adapt_tau_on_circuit():
    pr = MaxCutProblem.random(5, seed=3)
    c = build_hea(5, 2)
    cnt = EvalCounter()
    res = adapt_tau(initial_params_plus_state(c), "inverse", pr.H, c, g_c=0.1, counter=cnt)
    assert res.branch in ("window", "plateau")
    if res.branch == "window":
        assert 0 < 0.1 - res.gradient.norm < 0.01
    # all trial taus reuse one set of 2m+1 circuits
    assert cnt.circuits == 2 * c.param_count + 1


def test_g_of_tau_saturates():
    pr = MaxCutProblem.random(5, seed=5)
    c = build_hea(5, 2)
    theta = np.random.default_rng(5).normal(size=c.param_count) * 0.3
    taus = [0.0, 0.5, 2.0, 8.0, 32.0, 128.0, 256.0]
    gs = [fvqe_gradient(theta, FilterSpec("exponential", t), pr.H, c).norm for t in taus]
    assert gs[0] == pytest.approx(0.0, abs=1e-14)
    assert gs[1] > 0
    assert abs(gs[-1] - gs[-2]) < 1e-3 * gs[-1] + 1e-12


# -- runs -------------------------------------------------------------------------

def test_config_validation_and_round_trip():
    with pytest.raises(ValidationError):
        OptimizerConfig(algorithm="adam")
    with pytest.raises(ValidationError):
        OptimizerConfig(g_c=0)
    with pytest.raises(ValidationError):
        OptimizerConfig(shots=0)
    with pytest.raises(ValidationError):
        OptimizerConfig(algorithm="heite", filter=FilterSpec("inverse", 1))
    cfg = OptimizerConfig(algorithm="qaoa", layers=3, learning_rate=1.0, seed=5)
    d = cfg.to_dict()
    assert d["ansatz"] == {"kind": "qaoa", "layers": 3}
    assert OptimizerConfig.from_dict(d) == cfg
    with pytest.raises(ValidationError):
        OptimizerConfig.from_dict({**d, "ansatz": {"kind": "hea", "layers": 3}})


def test_fvqe_run_five_qubits():
    pr = MaxCutProblem.random(5, seed=7)
    tr = fvqe_run(pr, OptimizerConfig(layers=2, steps=70))
    assert tr.error is None and len(tr.records) == 71
    a = tr.column("approx_ratio")
    assert a[-1] >= 0.95
    assert np.all(np.diff(a[5:]) >= -0.02)
    m = build_hea(5, 2).param_count
    assert all(r.circuits == 2 * m + 1 for r in tr.records[1:])
    assert all(r.tau_branch in ("window", "plateau") for r in tr.records[1:])


def test_fvqe_sampling_bookkeeping():
    pr = MaxCutProblem.random(5, seed=7)
    tr = fvqe_run(pr, OptimizerConfig(layers=2, steps=5, shots=10, seed=3))
    m = 15
    assert all(r.circuits == 2 * m + 1 and r.shots == 10 * (2 * m + 1) for r in tr.records[1:])
    again = fvqe_run(pr, OptimizerConfig(layers=2, steps=5, shots=10, seed=3))
    assert tr.to_csv() == again.to_csv()


def test_zero_gradient_freezes_parameters(monkeypatch):
    pr = MaxCutProblem.random(3, seed=0)
    cfg = OptimizerConfig(layers=1, steps=3)
    real = opt.gradient_from_samples

    def zero(ss, spec):
        g = real(ss, spec)
        return FvqeGradient(np.zeros_like(g.grad), 0.0, g.F, g.F2, g.energy)
    monkeypatch.setattr(opt, "gradient_from_samples", zero)
    tr = fvqe_run(pr, cfg)
    assert all(np.array_equal(t, tr.thetas[0]) for t in tr.thetas)


def test_degenerate_step_retries_then_aborts(monkeypatch):
    pr = MaxCutProblem.random(3, seed=0)
    calls = []

    def boom(ss, spec):
        calls.append(spec)
        raise DegenerateFilterError("all shots on f = 0")
    monkeypatch.setattr(opt, "gradient_from_samples", boom)
    tr = fvqe_run(pr, OptimizerConfig(layers=1, steps=4, shots=10))
    assert tr.error is not None and tr.error.startswith("step 1")
    assert len(tr.records) == 1  # partial trace: just the initial state
    assert len(calls) == 2  # one retry with doubled shots


def test_inverse_hessian_guard():
    assert opt._learning_rate("inverse-hessian", 1e-9) == 1.0
    assert opt._learning_rate("inverse-hessian", 0.25) == 4.0
    assert opt._learning_rate(0.3, 0.25) == 0.3


def test_trace_csv_round_trip():
    pr = MaxCutProblem.random(5, seed=1)
    tr = vqe_run(pr, OptimizerConfig(algorithm="vqe", layers=1, steps=3))
    text = tr.to_csv()
    assert text.splitlines()[0] == ",".join(opt.CSV_FIELDS)
    back = OptimizerTrace.records_from_csv(text)
    assert [r.approx_ratio for r in back] == [r.approx_ratio for r in tr.records]
    assert len(back) == 4


def test_vqe_and_qaoa_runs_are_finite():
    pr = MaxCutProblem.random(5, seed=2)
    for tr in (vqe_run(pr, OptimizerConfig(algorithm="vqe", layers=2, steps=10)),
               qaoa_run(pr, OptimizerConfig(algorithm="qaoa", layers=2, steps=70))):
        assert len(tr.records) == tr.records[-1].t + 1
        assert np.all(np.isfinite(tr.column("energy")))
    tr = vqe_run(pr, OptimizerConfig(algorithm="vqe", layers=2, steps=10))
    assert all(r.circuits == 2 * 15 for r in tr.records[1:])


# -- QVF --------------------------------------------------------------------------

def test_qvf_cost_at_previous_point():
    pr = random_graph_problem(4, 1)
    c = build_hea(4, 1)
    theta = np.random.default_rng(1).normal(size=c.param_count)
    spec = FilterSpec("inverse", 1.0)
    f = filter_value(spec, pr.H.energies)
    P = probabilities(simulate(c, theta))
    F, F2 = P @ f, P @ f**2
    scale = max(f[P > 0])
    cost, grad = qvf_cost_and_grad(theta, theta, spec, pr.H, c, F2 / scale**2, math.log(scale))
    assert cost == pytest.approx(1 - F / math.sqrt(F2), abs=1e-10)
    assert cost >= 0
    fd = central_diff(lambda x: qvf_cost(x, theta, c, pr.H, spec), theta)
    assert np.max(np.abs(grad - fd)) < 1e-6
    # identity filter: zero cost at the previous point
    c0, _ = qvf_cost_and_grad(theta, theta, FilterSpec("exponential", 0.0), pr.H, c, 1.0, 0.0)
    assert c0 == pytest.approx(0.0, abs=1e-12)


def test_qvf_step_approaches_filtered_state():
    pr = random_graph_problem(4, 2)
    c = build_hea(4, 2)
    theta = initial_params_plus_state(c) + 0.1 * np.random.default_rng(2).normal(size=c.param_count)
    spec = FilterSpec("exponential", 2.0)
    prev = simulate(c, theta)
    target = filter_value(spec, pr.H.energies) * prev
    target /= np.linalg.norm(target)
    res = qvf_step(theta, spec, pr.H, c, inner_steps=20, inner_lr=0.5)
    before = np.linalg.norm(prev - target)
    after = np.linalg.norm(simulate(c, res.theta) - target)
    assert after < before
    assert res.cost <= res.initial_cost


def test_qvf_run_short():
    pr = MaxCutProblem.random(3, seed=4)
    tr = qvf_run(pr, OptimizerConfig(algorithm="qvf", layers=1, steps=3, qvf_inner_steps=5))
    assert tr.error is None and len(tr.records) == 4
    assert tr.final.approx_ratio >= tr.records[0].approx_ratio


# -- HE-ITE -----------------------------------------------------------------------

def test_single_term_heite_equals_cone_restricted_fvqe_step():
    g = WeightedGraph(6, ((2, 3, 0.8),))
    pr = MaxCutProblem(g)
    c = build_hea(5, 1)
    theta = np.random.default_rng(0).normal(size=c.param_count)
    (h, Q), = pr.H.terms
    tau = 1.3
    new, _ = heite_term_update(theta, c, h, Q, tau)
    grad = fvqe_gradient(theta, FilterSpec("exponential", tau), pr.H, c)
    full = theta - grad.grad / hessian_diagonal_fvqe(grad)
    assert np.allclose(new, full, atol=1e-12)
    outside = sorted(set(range(c.param_count)) - set(causal_cone(c, Q).slots))
    assert np.all(new[outside] == theta[outside])


def test_heite_run_and_cone_histogram():
    pr = MaxCutProblem.random(7, seed=1)
    cfg = OptimizerConfig(algorithm="heite", filter=FilterSpec("exponential", 1.0), steps=3,
                          shots=1)
    tr = heite_run(pr, cfg)
    assert len(tr.records) == 4
    assert sum(tr.cone_widths.values()) == sum(r.circuits for r in tr.records)
    # sampling mode: 2^(w+2) shots per sub-cone circuit
    want = sum(2 ** (w + 2) * k for w, k in tr.cone_widths.items())
    assert sum(r.shots for r in tr.records) == want


def test_heite_total_time_sets_steps():
    pr = MaxCutProblem.random(5, seed=1)
    cfg = OptimizerConfig(algorithm="heite", filter=FilterSpec("exponential", 0.5),
                          heite_total_time=2.0)
    assert len(heite_run(pr, cfg).records) == 5
    with pytest.raises(ValidationError):
        heite_run(pr, OptimizerConfig(algorithm="heite", layers=2))
