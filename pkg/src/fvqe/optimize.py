"""Optimization loops: F-VQE, QVF, VQE, QAOA and HE-ITE.

Every loop records one :class:`StepRecord` per optimization step. Metrics
(energy, approximation ratio, ground-state probability) are always the exact
values of the state after the update; ``circuits`` and ``shots`` are the
instrumented counts of what the algorithm itself would run on hardware.
"""
from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .ansatz import (QaoaAnsatz, _qaoa_batch, ansatz_descriptor, build_hea, default_layers,
                     initial_params_plus_state, qaoa_gradient, qaoa_initial_params)
from .filters import (DegenerateFilterError, FilterSpec, filter_value, log_filter_value,
                      scaled_filter_values)
from .problem import MaxCutProblem, ValidationError
from .sim import (Circuit, EvalCounter, causal_cone, expectation_local_observable,
                  hadamard_test_circuit, hadamard_test_overlap, probabilities,
                  sampled_frequencies, simulate, simulate_batch)

ALGORITHMS = ("fvqe", "qvf", "vqe", "qaoa", "heite")
SHOTS_BY_SIZE = {5: 10, 7: 50, 9: 100, 11: 150, 13: 200}
HESSIAN_GUARD = 1e-8


class AdaptationError(RuntimeError):
    """No admissible tau was found within the evaluation budget."""


@dataclass
class OptimizerConfig:
    algorithm: str = "fvqe"
    filter: FilterSpec | None = None
    layers: int | None = None
    steps: int = 70
    shots: int | None = None
    g_c: float = 0.1
    tau_precision: float = 0.01
    tau_init: float = 0.1
    plateau_tol: float = 1e-3
    tau_budget: int = 30
    learning_rate: str | float = "inverse-hessian"
    reduced_ansatz: bool = False
    qvf_inner_steps: int = 20
    qvf_inner_lr: float = 0.5
    heite_total_time: float | None = None
    heite_cone_shots: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")
        if isinstance(self.filter, dict):
            self.filter = FilterSpec.from_dict(self.filter)
        if self.filter is None and self.algorithm in ("fvqe", "qvf"):
            self.filter = FilterSpec("inverse", self.tau_init)
        if self.filter is None and self.algorithm == "heite":
            self.filter = FilterSpec("exponential", 1.0)
        if self.algorithm == "heite" and self.filter.family != "exponential":
            raise ValidationError("HE-ITE uses the exponential filter")
        if not self.g_c > 0:
            raise ValidationError("g_c must be positive")
        if self.steps < 1 and self.heite_total_time is None:
            raise ValidationError("need at least one step")
        if self.shots is not None and self.shots < 1:
            raise ValidationError("shots must be >= 1 or None (exact)")
        if isinstance(self.learning_rate, str) and self.learning_rate != "inverse-hessian":
            raise ValidationError(f"unknown learning-rate mode {self.learning_rate!r}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["filter"] = None if self.filter is None else self.filter.to_dict()
        layers = d.pop("layers")
        d["ansatz"] = None if layers is None else ansatz_descriptor(
            "qaoa" if self.algorithm == "qaoa" else "hea", layers)
        return d

    @classmethod
    def from_dict(cls, d) -> "OptimizerConfig":
        d = dict(d)
        desc = d.pop("ansatz", None)
        if desc is not None:
            desc = ansatz_descriptor(desc["kind"], desc["layers"])
            if (desc["kind"] == "qaoa") != (d.get("algorithm", "fvqe") == "qaoa"):
                raise ValidationError(f"ansatz kind {desc['kind']!r} does not fit the algorithm")
            d["layers"] = desc["layers"]
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValidationError(f"unknown optimizer fields {sorted(unknown)}")
        return cls(**d)

    def defaults_for(self, n: int, shots_schedule: bool = False) -> "OptimizerConfig":
        """Copy with layer count (and, optionally, shots) filled in for size n."""
        upd = {}
        if self.layers is None:
            upd["layers"] = default_layers(n, self.algorithm)
        if shots_schedule and self.shots is None:
            upd["shots"] = SHOTS_BY_SIZE.get(n, 200)
        return dataclasses.replace(self, **upd)


@dataclass
class StepRecord:
    t: int
    tau: float
    grad_norm: float
    energy: float
    approx_ratio: float
    gs_prob: float
    circuits: int
    shots: int
    tau_evals: int = 0
    tau_branch: str = ""


CSV_FIELDS = ("t", "tau", "grad_norm", "energy", "approx_ratio", "gs_prob",
              "circuits", "shots", "tau_evals", "tau_branch")


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "nan" if not np.isfinite(x) else repr(float(x))


@dataclass
class OptimizerTrace:
    algorithm: str
    records: list[StepRecord] = field(default_factory=list)
    thetas: list[np.ndarray] = field(default_factory=list)
    cone_widths: dict[int, int] = field(default_factory=dict)
    error: str | None = None
    notes: dict = field(default_factory=dict)

    def append(self, rec: StepRecord, theta) -> None:
        self.records.append(rec)
        self.thetas.append(np.array(theta, dtype=float))

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def final(self) -> StepRecord:
        return self.records[-1]

    def steps_to(self, alpha: float) -> int | None:
        for r in self.records:
            if r.approx_ratio >= alpha:
                return r.t
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_FIELDS) + "\n")
        for r in self.records:
            buf.write(",".join(_fmt(getattr(r, f)) for f in CSV_FIELDS) + "\n")
        return buf.getvalue()

    @staticmethod
    def records_from_csv(text: str) -> list[StepRecord]:
        lines = text.strip().splitlines()
        header = lines[0].split(",")
        out = []
        for ln in lines[1:]:
            vals = dict(zip(header, ln.split(",")))
            out.append(StepRecord(
                int(vals["t"]), float(vals["tau"]), float(vals["grad_norm"]),
                float(vals["energy"]), float(vals["approx_ratio"]), float(vals["gs_prob"]),
                int(vals["circuits"]), int(vals["shots"]),
                int(vals.get("tau_evals", 0) or 0), vals.get("tau_branch", "")))
        return out


# -- F-VQE gradient -----------------------------------------------------------

def shifted_params(theta, slots=None) -> np.ndarray:
    """Rows: theta, then theta + pi/2 e_j for each slot, then theta - pi/2 e_j."""
    theta = np.asarray(theta, dtype=float)
    slots = np.arange(theta.size) if slots is None else np.asarray(slots)
    plus = np.repeat(theta[None, :], len(slots), axis=0)
    minus = plus.copy()
    plus[np.arange(len(slots)), slots] += math.pi / 2
    minus[np.arange(len(slots)), slots] -= math.pi / 2
    return np.vstack([theta[None, :], plus, minus])


@dataclass
class ShiftedSamples:
    """Empirical distributions of psi(theta) and its 2m parameter-shifted circuits.

    Filter expectations for any tau are post-processing of these samples, so
    the tau search runs no extra circuits.
    """

    weights: np.ndarray
    energies: np.ndarray
    m: int

    @property
    def support(self) -> np.ndarray:
        return self.weights.any(axis=0)


def sample_shifted(ansatz: Circuit, theta, H, shots=None, seed=0, key=(),
                   counter: EvalCounter | None = None) -> ShiftedSamples:
    batch = shifted_params(theta)
    probs = probabilities(simulate_batch(ansatz, batch))
    weights = sampled_frequencies(probs, shots, seed, key=tuple(key))
    if counter is not None:
        counter.add(len(batch), 0 if shots is None else shots * len(batch))
    return ShiftedSamples(weights, H.energies, ansatz.param_count)


def filter_log_scale(spec: FilterSpec, energies, support) -> float:
    """log max|f| over ``support``: the factor removed by :func:`scaled_filter_values`."""
    E = np.asarray(energies)[np.asarray(support, dtype=bool)]
    if spec.family == "chebyshev":
        peak = float(np.max(np.abs(filter_value(spec, E))))
        return math.log(peak) if peak > 0 else 0.0
    top = float(np.max(log_filter_value(spec, E)))
    return top if np.isfinite(top) else 0.0


@dataclass
class FvqeGradient:
    grad: np.ndarray
    norm: float
    F: float
    F2: float
    energy: float
    log_scale: float = 0.0

    @property
    def hessian_diagonal(self) -> float:
        return hessian_diagonal_fvqe(self)


def gradient_from_samples(ss: ShiftedSamples, spec: FilterSpec) -> FvqeGradient:
    fs = scaled_filter_values(spec, ss.energies, support=ss.support)
    log_scale = filter_log_scale(spec, ss.energies, ss.support)
    Fv = ss.weights @ fs
    F2 = float(ss.weights[0] @ fs**2)
    if not F2 > 0:
        raise DegenerateFilterError(f"<F^2> vanishes for {spec}")
    m = ss.m
    grad = -(Fv[1:m + 1] - Fv[m + 1:]) / (4 * math.sqrt(F2))
    return FvqeGradient(grad, float(np.linalg.norm(grad)), float(Fv[0]), F2,
                        float(ss.weights[0] @ ss.energies), log_scale)


def fvqe_gradient(theta_prev, spec: FilterSpec, H, ansatz: Circuit, shots=None, seed=0,
                  counter: EvalCounter | None = None) -> FvqeGradient:
    """Parameter-shift gradient of the filtering cost at ``theta_prev``.

    ``F`` and ``F2`` in the result are expectations of the filter rescaled
    by ``exp(-log_scale)`` (and its square); gradient and Hessian are
    scale-free. 2m+1 circuits.
    """
    ss = sample_shifted(ansatz, theta_prev, H, shots, seed, counter=counter)
    return gradient_from_samples(ss, spec)


def hessian_diagonal_fvqe(aux: FvqeGradient) -> float:
    """Common value of all diagonal Hessian entries, <F> / (4 sqrt<F^2>)."""
    if not aux.F2 > 0:
        raise DegenerateFilterError("<F^2> vanishes")
    return aux.F / (4 * math.sqrt(aux.F2))


# -- tau adaptation -----------------------------------------------------------

@dataclass
class TauResult:
    tau: float
    gradient: FvqeGradient
    branch: str
    evaluations: int
    history: list[tuple[float, float]]


def search_tau(gradient_at, family: str, g_c: float, precision: float = 0.01,
               tau_init: float = 0.1, plateau_tol: float = 1e-3, budget: int = 30) -> TauResult:
    """Pick tau with ``0 < g_c - g(tau) < precision``.

    ``gradient_at(spec)`` returns an :class:`FvqeGradient`. tau grows by
    doubling from ``tau_init`` until ``g > g_c`` (then bisection on the
    bracket) or until g stops changing (plateau: relative change below
    ``plateau_tol`` over two consecutive doublings). Chebyshev scans
    integers 1, 2, ... instead. ``branch`` is ``window``, ``plateau``,
    ``integer`` (Chebyshev overshoot) or ``budget``.
    """
    history: list[tuple[float, float]] = []
    cache: dict[float, FvqeGradient] = {}

    def ev(tau):
        res = gradient_at(FilterSpec(family, tau))
        cache[tau] = res
        history.append((tau, res.norm))
        return res.norm

    def in_window(g):
        return 0 < g_c - g < precision

    def done(tau, branch):
        return TauResult(tau, cache[tau], branch, len(history), history)

    def closest_below(branch):
        below = [(g, t) for t, g in history if g <= g_c]
        if not below:
            raise AdaptationError(f"no tau with g(tau) <= g_c={g_c} in {len(history)} evaluations")
        best = max(g for g, _ in below)
        tau = max(t for g, t in below if g == best)
        return done(tau, branch)

    integer = family == "chebyshev"
    tau = 1 if integer else tau_init
    lo, hi = 0.0, None
    while len(history) < budget:
        g = ev(tau)
        if in_window(g):
            return done(tau, "window")
        if g > g_c:
            hi = tau
            break
        lo = tau
        gs = [h for _, h in history]
        if len(gs) >= 3:
            scale = max(abs(gs[-1]), 1e-300)
            if gs[-1] < 1e-14 or (abs(gs[-1] - gs[-2]) <= plateau_tol * scale
                                  and abs(gs[-2] - gs[-3]) <= plateau_tol * scale):
                return closest_below("plateau")
        tau = tau + 1 if integer else 2 * tau
    if hi is None:
        return closest_below("budget")
    if integer:
        return closest_below("integer")
    while len(history) < budget:
        mid = 0.5 * (lo + hi)
        g = ev(mid)
        if in_window(g):
            return done(mid, "window")
        if g > g_c:
            hi = mid
        else:
            lo = mid
    return closest_below("budget")


def adapt_tau(theta_prev, family: str, H, ansatz: Circuit, g_c: float, shots=None, seed=0,
              counter: EvalCounter | None = None, **search) -> TauResult:
    """Choose tau for the step leaving ``theta_prev``.

    One sample set of the 2m+1 shifted circuits serves every trial tau.
    Keyword arguments go to :func:`search_tau`.
    """
    ss = sample_shifted(ansatz, theta_prev, H, shots, seed, counter=counter)
    return search_tau(lambda s: gradient_from_samples(ss, s), family, g_c, **search)


# -- shared helpers -----------------------------------------------------------

def _learning_rate(mode, hdiag: float) -> float:
    if mode == "inverse-hessian":
        return 1.0 if abs(hdiag) < HESSIAN_GUARD else 1.0 / hdiag
    return float(mode)


def _exact_metrics(problem: MaxCutProblem, ansatz: Circuit, theta):
    return problem.metrics(probabilities(simulate(ansatz, theta)))


def _record_initial(trace, problem, probs, theta, tau=0.0):
    e, a, g = problem.metrics(probs)
    trace.append(StepRecord(0, tau, float("nan"), e, a, g, 0, 0), theta)


def _hea_for(problem: MaxCutProblem, config: OptimizerConfig) -> Circuit:
    p = config.layers or default_layers(problem.n_qubits, config.algorithm)
    return build_hea(problem.n_qubits, p, reduced=config.reduced_ansatz)


# -- F-VQE --------------------------------------------------------------------

@dataclass
class FvqeStep:
    theta: np.ndarray
    tau: TauResult
    learning_rate: float


def fvqe_step(theta, problem_H, ansatz: Circuit, config: OptimizerConfig, step_key,
              counter: EvalCounter, tau: float | None = None) -> FvqeStep:
    """One F-VQE update. ``tau`` fixes the filter strength (no adaptation)."""
    shots = config.shots
    for attempt in range(2):
        try:
            ss = sample_shifted(ansatz, theta, problem_H, shots, config.seed,
                                key=(*step_key, attempt), counter=counter)
            if tau is None:
                res = search_tau(lambda s: gradient_from_samples(ss, s), config.filter.family,
                                config.g_c, config.tau_precision, config.tau_init,
                                config.plateau_tol, config.tau_budget)
            else:
                spec = config.filter.with_tau(tau)
                gr = gradient_from_samples(ss, spec)
                res = TauResult(spec.tau, gr, "fixed", 1, [(spec.tau, gr.norm)])
            break
        except DegenerateFilterError:
            if shots is None or attempt == 1:
                raise
            shots *= 2
    eta = _learning_rate(config.learning_rate, hessian_diagonal_fvqe(res.gradient))
    return FvqeStep(theta - eta * res.gradient.grad, res, eta)


def fvqe_run(problem: MaxCutProblem, config: OptimizerConfig) -> OptimizerTrace:
    ansatz = _hea_for(problem, config)
    theta = initial_params_plus_state(ansatz)
    trace = OptimizerTrace("fvqe")
    trace.notes["param_count"] = ansatz.param_count
    _record_initial(trace, problem, probabilities(simulate(ansatz, theta)), theta)
    counter = EvalCounter()
    for t in range(1, config.steps + 1):
        c0, s0 = counter.snapshot()
        try:
            st = fvqe_step(theta, problem.H, ansatz, config, (t,), counter)
        except (DegenerateFilterError, AdaptationError) as exc:
            trace.error = f"step {t}: {exc}"
            break
        theta = st.theta
        e, a, g = _exact_metrics(problem, ansatz, theta)
        c1, s1 = counter.snapshot()
        trace.append(StepRecord(t, float(st.tau.tau), st.tau.gradient.norm, e, a, g,
                                c1 - c0, s1 - s0, st.tau.evaluations, st.tau.branch), theta)
    return trace


# -- QVF ----------------------------------------------------------------------

@dataclass
class QvfResult:
    theta: np.ndarray
    cost: float
    initial_cost: float
    converged: bool
    costs: list[float]


def qvf_cost_and_grad(theta, theta_prev, spec, H, ansatz, F2, log_scale, W=None,
                      shots=None, seed=0, counter=None):
    """C_t(theta) and its gradient from Hadamard-test overlaps (m + 1 circuits)."""
    theta = np.asarray(theta, float)
    m = theta.size
    batch = np.vstack([theta[None, :], theta[None, :] + math.pi * np.eye(m)])
    ov = hadamard_test_overlap(batch, theta_prev, ansatz, H, spec, shots, seed,
                               log_scale=log_scale, _circuit=W)
    if counter is not None:
        counter.add(m + 1, 0 if shots is None else shots * (m + 1))
    root = math.sqrt(F2)
    return 1 - ov[0] / root, -ov[1:] / (2 * root)


def qvf_step(theta_prev, spec: FilterSpec, H, ansatz: Circuit, inner_steps: int = 20,
             inner_lr: float = 0.5, shots=None, seed=0, counter=None, tol=1e-10,
             W: Circuit | None = None) -> QvfResult:
    """Minimize C_t(theta) = 1 - Re<psi_prev|F|psi(theta)> / sqrt<F^2>_prev by
    gradient descent on Hadamard-test overlaps, starting at ``theta_prev``."""
    theta_prev = np.asarray(theta_prev, float)
    W = W or hadamard_test_circuit(ansatz)
    p0 = probabilities(simulate(ansatz, theta_prev))
    w0 = sampled_frequencies(p0[None, :], shots, seed, key=(0,))[0]
    if counter is not None:
        counter.add(1, 0 if shots is None else shots)
    sup = w0 > 0
    fs = scaled_filter_values(spec, H.energies, support=sup)
    F2 = float(w0 @ fs**2)
    if not F2 > 0:
        raise DegenerateFilterError(f"<F^2> vanishes for {spec}")
    log_scale = filter_log_scale(spec, H.energies, sup)
    theta = theta_prev.copy()
    best_theta, best, costs = theta.copy(), np.inf, []
    converged = False
    for k in range(inner_steps + 1):
        cost, grad = qvf_cost_and_grad(theta, theta_prev, spec, H, ansatz, F2, log_scale, W,
                                       shots, _rng.derive(seed, 1, k) if shots else 0, counter)
        costs.append(float(cost))
        if cost < best:
            best, best_theta = float(cost), theta.copy()
        if k == inner_steps:
            break
        if np.linalg.norm(grad) < tol or (k and abs(costs[-2] - costs[-1]) < tol):
            converged = True
            break
        theta = theta - inner_lr * grad
    return QvfResult(best_theta, best, costs[0], converged, costs)


def qvf_run(problem: MaxCutProblem, config: OptimizerConfig) -> OptimizerTrace:
    ansatz = _hea_for(problem, config)
    W = hadamard_test_circuit(ansatz)
    theta = initial_params_plus_state(ansatz)
    trace = OptimizerTrace("qvf")
    _record_initial(trace, problem, probabilities(simulate(ansatz, theta)), theta)
    counter = EvalCounter()
    for t in range(1, config.steps + 1):
        c0, s0 = counter.snapshot()
        try:
            ss = sample_shifted(ansatz, theta, problem.H, config.shots, config.seed,
                                key=(t, 0), counter=counter)
            tr = search_tau(lambda s: gradient_from_samples(ss, s), config.filter.family,
                           config.g_c, config.tau_precision, config.tau_init,
                           config.plateau_tol, config.tau_budget)
            res = qvf_step(theta, config.filter.with_tau(tr.tau), problem.H, ansatz,
                           config.qvf_inner_steps, config.qvf_inner_lr, config.shots,
                           _rng.derive(config.seed, t, 1), counter, W=W)
        except (DegenerateFilterError, AdaptationError) as exc:
            trace.error = f"step {t}: {exc}"
            break
        theta = res.theta
        e, a, g = _exact_metrics(problem, ansatz, theta)
        c1, s1 = counter.snapshot()
        trace.append(StepRecord(t, float(tr.tau), tr.gradient.norm, e, a, g, c1 - c0, s1 - s0,
                                tr.evaluations, tr.branch), theta)
    return trace


# -- VQE ----------------------------------------------------------------------

def vqe_gradient(theta, H, ansatz: Circuit, shots=None, seed=0, key=(), counter=None,
                 observable=None) -> np.ndarray:
    """(1/2)(<H>_{j+} - <H>_{j-}) for every parameter (2m circuits).

    ``observable`` replaces the energy vector (e.g. ``-f(E)`` for the
    filter comparison).
    """
    m = ansatz.param_count
    batch = shifted_params(theta)[1:]
    probs = probabilities(simulate_batch(ansatz, batch))
    probs = sampled_frequencies(probs, shots, seed, key=tuple(key))
    if counter is not None:
        counter.add(2 * m, 0 if shots is None else shots * 2 * m)
    obs = H.energies if observable is None else observable
    e = probs @ obs
    return 0.5 * (e[:m] - e[m:])


def vqe_hessian_diagonal(theta, H, ansatz: Circuit, shots=None, seed=0, key=(), counter=None,
                         observable=None) -> np.ndarray:
    """(1/2)<H>_{j++} - (1/2)<H> for every parameter (m + 1 circuits)."""
    theta = np.asarray(theta, float)
    m = theta.size
    batch = np.vstack([theta[None, :], theta[None, :] + math.pi * np.eye(m)])
    probs = probabilities(simulate_batch(ansatz, batch))
    probs = sampled_frequencies(probs, shots, seed, key=tuple(key))
    if counter is not None:
        counter.add(m + 1, 0 if shots is None else shots * (m + 1))
    obs = H.energies if observable is None else observable
    e = probs @ obs
    return 0.5 * e[1:] - 0.5 * e[0]


def vqe_run(problem: MaxCutProblem, config: OptimizerConfig) -> OptimizerTrace:
    ansatz = _hea_for(problem, config)
    theta = initial_params_plus_state(ansatz)
    trace = OptimizerTrace("vqe")
    _record_initial(trace, problem, probabilities(simulate(ansatz, theta)), theta)
    counter = EvalCounter()
    lr = 1.0 if config.learning_rate == "inverse-hessian" else float(config.learning_rate)
    for t in range(1, config.steps + 1):
        c0, s0 = counter.snapshot()
        grad = vqe_gradient(theta, problem.H, ansatz, config.shots, config.seed, (t,), counter)
        theta = theta - lr * grad
        e, a, g = _exact_metrics(problem, ansatz, theta)
        c1, s1 = counter.snapshot()
        trace.append(StepRecord(t, float("nan"), float(np.linalg.norm(grad)), e, a, g,
                                c1 - c0, s1 - s0), theta)
    return trace


# -- QAOA ---------------------------------------------------------------------

def qaoa_run(problem: MaxCutProblem, config: OptimizerConfig) -> OptimizerTrace:
    p = config.layers or default_layers(problem.n_qubits, "qaoa")
    H = problem.H
    params = qaoa_initial_params(p, _rng.derive(config.seed, 0))
    trace = OptimizerTrace("qaoa")
    trace.notes["initial_params"] = params.tolist()
    anz = QaoaAnsatz.for_hamiltonian(H, p)
    _record_initial(trace, problem, probabilities(_qaoa_batch(H, params[:p], params[p:]))[0], params)
    counter = EvalCounter()
    lr = 1.0 if config.learning_rate == "inverse-hessian" else float(config.learning_rate)
    for t in range(1, config.steps + 1):
        c0, s0 = counter.snapshot()
        grad = qaoa_gradient(H, params[:p], params[p:], config.shots, config.seed, counter,
                             layers_key=(t,))
        params = params - lr * grad
        probs = probabilities(_qaoa_batch(H, params[:p], params[p:]))[0]
        e, a, g = problem.metrics(probs)
        c1, s1 = counter.snapshot()
        trace.append(StepRecord(t, float("nan"), float(np.linalg.norm(grad)), e, a, g,
                                c1 - c0, s1 - s0), params)
    trace.notes["param_count"] = anz.param_count
    return trace


# -- HE-ITE -------------------------------------------------------------------

def cone_shots(width: int) -> int:
    return 2 ** (width + 2)


def heite_term_update(theta, ansatz: Circuit, h: float, support, tau: float, cone=None,
                      shots=None, seed=0, counter=None, learning_rate="inverse-hessian"):
    """One filtering update for the single factor exp(-tau h Z_S).

    Only parameters inside the causal cone of ``Z_S`` move. Returns
    ``(new_theta, gradient_over_cone_slots)``.
    """
    cone = cone or causal_cone(ansatz, support)
    slots = cone.slots
    batch = shifted_params(theta, slots)
    z = expectation_local_observable(ansatz, batch, support, via_cone=True, shots=shots,
                                     seed=seed, cone=cone, counter=counter)
    a = tau * h
    F = math.cosh(a) - math.sinh(a) * z
    F2 = math.cosh(2 * a) - math.sinh(2 * a) * z[0]
    s = len(slots)
    grad = -(F[1:s + 1] - F[s + 1:]) / (4 * math.sqrt(F2))
    eta = _learning_rate(learning_rate, F[0] / (4 * math.sqrt(F2)))
    new = np.array(theta, dtype=float)
    new[slots] -= eta * grad
    return new, grad


def heite_run(problem: MaxCutProblem, config: OptimizerConfig) -> OptimizerTrace:
    """Imaginary-time evolution, one term of the Hamiltonian at a time on its causal cone.

    A time step applies exp(-tau h_k Z_{Q_k}) for k = 1..K in term order,
    each as a single filtering update of the parameters in that term's cone.
    """
    if config.layers not in (None, 1):
        raise ValidationError("HE-ITE uses a single-layer ansatz")
    ansatz = build_hea(problem.n_qubits, 1, reduced=config.reduced_ansatz)
    tau = float(config.filter.tau)
    steps = config.steps
    if config.heite_total_time is not None:
        steps = max(1, int(round(config.heite_total_time / tau)))
    shots = None
    if config.shots is not None:
        shots = cone_shots if config.heite_cone_shots else config.shots
    theta = initial_params_plus_state(ansatz)
    trace = OptimizerTrace("heite")
    trace.notes["steps"] = steps
    _record_initial(trace, problem, probabilities(simulate(ansatz, theta)), theta, tau)
    terms = problem.H.terms
    cones = [causal_cone(ansatz, Q) for _, Q in terms]
    trace.notes["max_cone_width"] = max(c.max_width for c in cones)
    counter = EvalCounter()
    for t in range(1, steps + 1):
        c0, s0 = counter.snapshot()
        sq = 0.0
        for k, ((h, Q), cone) in enumerate(zip(terms, cones)):
            theta, grad = heite_term_update(theta, ansatz, h, Q, tau, cone, shots,
                                            _rng.derive(config.seed, t, k), counter,
                                            config.learning_rate)
            sq += float(grad @ grad)
        e, a, g = _exact_metrics(problem, ansatz, theta)
        c1, s1 = counter.snapshot()
        trace.append(StepRecord(t, tau, math.sqrt(sq), e, a, g, c1 - c0, s1 - s0), theta)
    trace.cone_widths = dict(sorted(counter.widths.items()))
    return trace


RUNNERS = {"fvqe": fvqe_run, "qvf": qvf_run, "vqe": vqe_run, "qaoa": qaoa_run, "heite": heite_run}


def run(problem: MaxCutProblem, config: OptimizerConfig) -> OptimizerTrace:
    return RUNNERS[config.algorithm](problem, config)
