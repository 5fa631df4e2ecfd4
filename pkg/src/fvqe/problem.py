"""Weighted MaxCut instances and their diagonal Hamiltonians.

Bit convention (used everywhere in the package): vertex ``u`` (1-based) is
carried by qubit ``u`` with bit value ``(1 - z_u) / 2``; qubit 1 is the most
significant bit of a basis index. The last vertex ``N`` has no qubit and is
pinned to ``z_N = +1``, so an ``n``-qubit register describes ``N = n + 1``
vertices.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

MAX_BRUTE_FORCE_QUBITS = 26
GROUND_OFFSET = 1e-3
_CHUNK = 1 << 20


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class CapabilityError(RuntimeError):
    """Request is valid but beyond what the implementation will attempt."""


@dataclass(frozen=True)
class WeightedGraph:
    num_vertices: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        N = self.num_vertices
        seen = set()
        norm = []
        for u, v, w in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValidationError(f"self-loop at vertex {u}")
            if u > v:
                u, v = v, u
            if not 1 <= u < v <= N:
                raise ValidationError(f"edge ({u}, {v}) outside 1..{N}")
            if (u, v) in seen:
                raise ValidationError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
            norm.append((u, v, float(w)))
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    @property
    def n_qubits(self) -> int:
        return self.num_vertices - 1

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_vertices, dtype=int)
        for u, v, _ in self.edges:
            deg[u - 1] += 1
            deg[v - 1] += 1
        return deg

    def is_connected(self) -> bool:
        if not self.edges:
            return self.num_vertices <= 1
        rows = [u - 1 for u, _, _ in self.edges]
        cols = [v - 1 for _, v, _ in self.edges]
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)),
                         shape=(self.num_vertices,) * 2)
        ncomp, _ = connected_components(adj, directed=False)
        return ncomp == 1

    def is_3_regular(self) -> bool:
        return bool(np.all(self.degrees() == 3))

    def to_text(self) -> str:
        lines = [f"{self.num_vertices} {len(self.edges)}"]
        lines += [f"{u} {v} {w!r}" for u, v, w in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "WeightedGraph":
        rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        if not rows or len(rows[0]) != 2:
            raise ValidationError("graph file must start with 'N M'")
        N, M = int(rows[0][0]), int(rows[0][1])
        body = rows[1:]
        if len(body) != M:
            raise ValidationError(f"header announces {M} edges, found {len(body)}")
        edges = []
        for r in body:
            if len(r) != 3:
                raise ValidationError(f"malformed edge line: {' '.join(r)}")
            edges.append((int(r[0]), int(r[1]), float(r[2])))
        return cls(N, tuple(edges))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "WeightedGraph":
        return cls.from_text(Path(path).read_text())


def hardware_instance_graph() -> WeightedGraph:
    """The 10-vertex instance used in the 9-qubit hardware experiment."""
    text = resources.files("fvqe").joinpath("data/hardware_instance.txt").read_text()
    return WeightedGraph.from_text(text)


def generate_instance(n_qubits: int, seed: int) -> WeightedGraph:
    """Random connected 3-regular graph on ``n_qubits + 1`` vertices.

    Uses the pairing (configuration) model: three stubs per vertex are
    matched by a random permutation, and the draw is rejected on self-loops,
    multi-edges or a disconnected result. Weights are uniform on [0, 1).
    """
    N = n_qubits + 1
    if N < 4 or N % 2:
        raise ValidationError(
            f"a 3-regular graph needs an even vertex count >= 4, got N={N}")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(1, N + 1), 3)
    while True:
        pairs = rng.permutation(stubs).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        keys = {tuple(sorted(p)) for p in pairs.tolist()}
        if len(keys) != len(pairs):
            continue
        weights = rng.random(len(pairs))
        g = WeightedGraph(N, tuple((u, v, w) for (u, v), w in zip(pairs.tolist(), weights)))
        if g.is_connected():
            return g


def bits_of(index: int, n: int) -> tuple[int, ...]:
    return tuple((index >> (n - 1 - q)) & 1 for q in range(n))


def cut_to_index(cut) -> int:
    z = np.asarray(cut)
    idx = 0
    for zu in z[:-1]:
        idx = (idx << 1) | int((1 - zu) // 2)
    return idx


def index_to_cut(index: int, n: int) -> tuple[int, ...]:
    return tuple(1 - 2 * b for b in bits_of(index, n)) + (1,)


def _validate_cut(graph: WeightedGraph, cut) -> np.ndarray:
    z = np.asarray(cut)
    if z.shape != (graph.num_vertices,):
        raise ValidationError(
            f"cut must have length {graph.num_vertices}, got shape {z.shape}")
    if not np.all(np.isin(z, (-1, 1))):
        raise ValidationError("cut entries must be +1 or -1")
    if z[-1] != 1:
        raise ValidationError("the last vertex is pinned to z_N = +1")
    return z


def cut_cost(graph: WeightedGraph, cut) -> float:
    z = _validate_cut(graph, cut)
    return float(sum(w * (1 - z[u - 1] * z[v - 1]) / 2 for u, v, w in graph.edges))


def cut_costs(graph: WeightedGraph, indices=None) -> np.ndarray:
    """Cut cost of every basis index (or of the given ones), vectorized."""
    n = graph.n_qubits
    x = np.arange(1 << n, dtype=np.int64) if indices is None else np.asarray(indices, dtype=np.int64)
    out = np.zeros(x.shape, dtype=float)
    N = graph.num_vertices
    for u, v, w in graph.edges:
        bu = (x >> (n - u)) & 1
        if v == N:
            out += w * bu
        else:
            bv = (x >> (n - v)) & 1
            out += w * (bu ^ bv)
    return out


def brute_force_optimum(graph: WeightedGraph) -> tuple[tuple[int, ...], float]:
    """Exact MaxCut optimum; ties go to the lowest basis index."""
    n = graph.n_qubits
    if n > MAX_BRUTE_FORCE_QUBITS:
        raise CapabilityError(f"brute force capped at {MAX_BRUTE_FORCE_QUBITS} qubits, got {n}")
    best_idx, best = 0, -np.inf
    for start in range(0, 1 << n, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, 1 << n), dtype=np.int64)
        c = cut_costs(graph, idx)
        k = int(np.argmax(c))
        if c[k] > best:
            best, best_idx = float(c[k]), int(idx[k])
    return index_to_cut(best_idx, n), best


@dataclass
class DiagonalHamiltonian:
    """``energy(x) = a - b * C(x)`` on the computational basis.

    ``terms`` holds the Pauli-Z expansion ``sum_k h_k Z_{Q_k}`` (0-based
    qubit tuples) and ``constant`` the identity coefficient.
    """

    n_qubits: int
    a: float
    b: float
    cost_upper_bound: float
    terms: list[tuple[float, tuple[int, ...]]]
    constant: float
    graph: WeightedGraph | None = None
    upper_bound_mode: str = "custom"
    optimum_cost: float | None = None
    optimum_index: int | None = None
    cost_lower_bound: float = 0.0
    _energies: np.ndarray | None = field(default=None, repr=False)

    @property
    def energies(self) -> np.ndarray:
        if self._energies is None:
            if self.graph is not None:
                self._energies = self.a - self.b * cut_costs(self.graph)
            else:
                self._energies = self.energy_of(np.arange(1 << self.n_qubits))
        return self._energies

    def energy(self, x: int) -> float:
        return float(self.energies[x])

    def energy_of(self, indices) -> np.ndarray:
        x = np.asarray(indices, dtype=np.int64)
        out = np.full(x.shape, self.constant, dtype=float)
        n = self.n_qubits
        for h, Q in self.terms:
            par = np.zeros(x.shape, dtype=np.int64)
            for q in Q:
                par ^= (x >> (n - 1 - q)) & 1
            out += h * (1 - 2 * par)
        return out

    @cached_property
    def ground_indices(self) -> np.ndarray:
        e = self.energies
        return np.flatnonzero(e <= e.min() + 1e-12)

    def metadata(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "upper_bound_mode": self.upper_bound_mode,
            "cost_upper_bound": self.cost_upper_bound,
            "cost_lower_bound": self.cost_lower_bound,
            "a": self.a,
            "b": self.b,
            "optimum_cost": self.optimum_cost,
            "optimum_index": self.optimum_index,
        }


def build_hamiltonian(graph: WeightedGraph, upper_bound_mode: str = "brute_force",
                      ground_offset: float = GROUND_OFFSET) -> DiagonalHamiltonian:
    """Rescaled MaxCut Hamiltonian with energies in [0, 1].

    ``brute_force`` uses ``U = C_max / (1 - ground_offset)`` so the ground
    energy sits at ``ground_offset`` instead of exactly 0 (the inverse and
    logarithm filters are undefined at E = 0). ``weight_sum`` uses
    ``U = sum(w)``.
    """
    cut, cmax = brute_force_optimum(graph)
    if upper_bound_mode == "brute_force":
        if not 0.0 <= ground_offset < 1.0:
            raise ValidationError("ground_offset must lie in [0, 1)")
        U = cmax / (1.0 - ground_offset)
    elif upper_bound_mode == "weight_sum":
        U = graph.total_weight
    else:
        raise ValidationError(f"unknown upper_bound_mode {upper_bound_mode!r}")
    if U <= 0:
        raise ValidationError("graph has no positive-weight cut")
    a, b = 1.0, 1.0 / U
    n, N = graph.n_qubits, graph.num_vertices
    # w (1 - z_u z_v)/2 -> energy contribution -b w/2 + (b w/2) Z_u Z_v
    constant = a
    terms = []
    for u, v, w in graph.edges:
        constant -= b * w / 2
        Q = (u - 1,) if v == N else (u - 1, v - 1)
        terms.append((b * w / 2, Q))
    return DiagonalHamiltonian(n, a, b, U, terms, constant, graph=graph,
                               upper_bound_mode=upper_bound_mode, optimum_cost=cmax,
                               optimum_index=cut_to_index(cut))


def _normalized_weights(samples_or_distribution, dim: int) -> np.ndarray:
    from .sim import SampleSet

    if isinstance(samples_or_distribution, SampleSet):
        return samples_or_distribution.frequencies()
    p = np.asarray(samples_or_distribution, dtype=float)
    if p.shape != (dim,):
        raise ValidationError(f"distribution must have length {dim}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError("distribution must be non-negative and sum to 1")
    return p


def approximation_ratio(samples_or_distribution, graph: WeightedGraph,
                        optimum_cost: float | None = None) -> float:
    n = graph.n_qubits
    p = _normalized_weights(samples_or_distribution, 1 << n)
    if optimum_cost is None:
        _, optimum_cost = brute_force_optimum(graph)
    return float(p @ cut_costs(graph) / optimum_cost)


def instance_metadata(graph: WeightedGraph, H: DiagonalHamiltonian, seed) -> str:
    data = {"seed": seed, "num_vertices": graph.num_vertices,
            "num_edges": len(graph.edges), **H.metadata()}
    return json.dumps(data, indent=2, sort_keys=True)


class MaxCutProblem:
    """A graph with its rescaled Hamiltonian and the quantities metrics need."""

    def __init__(self, graph: WeightedGraph, upper_bound_mode: str = "brute_force",
                 ground_offset: float = GROUND_OFFSET, seed=None):
        self.graph = graph
        self.seed = seed
        self.H = build_hamiltonian(graph, upper_bound_mode, ground_offset)
        self.costs = cut_costs(graph)
        self.optimum_cost = self.H.optimum_cost
        self.ground_mask = self.costs >= self.optimum_cost - 1e-12

    @classmethod
    def random(cls, n_qubits: int, seed: int, **kw) -> "MaxCutProblem":
        return cls(generate_instance(n_qubits, seed), seed=seed, **kw)

    @property
    def n_qubits(self) -> int:
        return self.graph.n_qubits

    def metrics(self, probs) -> tuple[float, float, float]:
        """(energy, approximation ratio, ground-state probability) of a distribution."""
        p = np.asarray(probs, dtype=float)
        return (float(p @ self.H.energies), float(p @ self.costs / self.optimum_cost),
                float(p[self.ground_mask].sum()))

    def metadata(self) -> dict:
        return {"seed": self.seed, "num_vertices": self.graph.num_vertices,
                "num_edges": len(self.graph.edges), **self.H.metadata()}
