"""Ensemble runner: instances, runs, persisted traces, summaries and plots.

Output directory layout::

    config.json                     the RunConfig that produced the directory
    instances/n{N}_i{I}.txt         graph file ("N M" + "u v w" lines)
    instances/n{N}_i{I}.json        instance metadata (seed, mode, U, optimum)
    runs/{label}/n{N}_i{I}.csv      OptimizerTrace, one row per step (row 0 = start)
    runs/{label}/n{N}_i{I}.json     run manifest (config, seeds, problem, wall time, status)
    summary.json                    EnsembleSummary, recomputable from runs/ alone

Seeds: the instance of size N and index I uses ``derive_int(seed, N, I)``;
the run of algorithm ``label`` on it uses
``derive_int(seed, N, I, label_key(label))``; inside a run every circuit's
shots come from further spawn keys (step, attempt, circuit row).
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as _rng
from .filters import FilterSpec
from .optimize import SHOTS_BY_SIZE, OptimizerConfig, OptimizerTrace, run
from .problem import MaxCutProblem, ValidationError, WeightedGraph, generate_instance, hardware_instance_graph

log = logging.getLogger(__name__)

ALPHA_TARGET = 0.75
GS_TARGET = 0.25


@dataclass
class AlgorithmEntry:
    """One algorithm of the ensemble: a label and its OptimizerConfig overrides."""

    label: str
    config: dict

    def to_dict(self):
        return {"label": self.label, "config": dict(self.config)}


@dataclass
class RunConfig:
    sizes: list[int] = field(default_factory=lambda: [5, 7, 9])
    instances: int = 10
    algorithms: list[AlgorithmEntry] = field(default_factory=list)
    exact: bool = True
    out: str = "runs-desk"
    seed: int = 0
    upper_bound_mode: str = "brute_force"
    preset: str | None = None

    def __post_init__(self):
        self.algorithms = [a if isinstance(a, AlgorithmEntry) else AlgorithmEntry(**a)
                           for a in self.algorithms]
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate algorithm labels in {labels}")
        if self.instances < 0:
            raise ValidationError("instances must be >= 0")
        for n in self.sizes:
            if n < 3 or (n + 1) % 2:
                raise ValidationError(f"size {n}: 3-regular graphs need n+1 even and >= 4")
        for a in self.algorithms:
            OptimizerConfig.from_dict(a.config)  # validate early

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["algorithms"] = [a.to_dict() for a in self.algorithms]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "RunConfig":
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValidationError(f"unknown RunConfig fields {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(text))
        except (TypeError, KeyError) as exc:
            raise ValidationError(f"malformed run config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())

    def optimizer_config(self, entry: AlgorithmEntry, n: int, seed: int) -> OptimizerConfig:
        cfg = OptimizerConfig.from_dict({**entry.config, "seed": seed})
        if self.exact:
            cfg = dataclasses.replace(cfg, shots=None)
        elif cfg.shots is None:
            # HE-ITE then samples 2^(cone width + 2) shots per cone circuit
            # unless heite_cone_shots is switched off
            cfg = dataclasses.replace(cfg, shots=SHOTS_BY_SIZE.get(n, 200))
        return cfg.defaults_for(n)


def _entries(*pairs) -> list[AlgorithmEntry]:
    return [AlgorithmEntry(label, cfg) for label, cfg in pairs]


def desk_preset(seed: int = 0, out: str = "runs-desk") -> RunConfig:
    """Sizes 5/7/9, 10 instances, exact mode: minutes on one core."""
    return RunConfig(
        sizes=[5, 7, 9], instances=10, exact=True, out=out, seed=seed, preset="desk",
        algorithms=_entries(
            ("fvqe-inverse", {"algorithm": "fvqe", "filter": {"family": "inverse", "tau": 0.1}}),
            ("vqe", {"algorithm": "vqe"}),
            ("qaoa", {"algorithm": "qaoa"}),
            ("heite", {"algorithm": "heite", "filter": {"family": "exponential", "tau": 1.0}}),
        ))


def paper_preset(seed: int = 0, out: str = "runs-paper") -> RunConfig:
    """Full simulation settings: sizes 5..13, 25 instances, shot sampling (hours)."""
    fams = ("inverse", "logarithm", "exponential", "power", "cosine", "chebyshev")
    fvqe = [(f"fvqe-{f}", {"algorithm": "fvqe",
                           "filter": {"family": f, "tau": 1 if f == "chebyshev" else 0.1}})
            for f in fams]
    return RunConfig(
        sizes=[5, 7, 9, 11, 13], instances=25, exact=False, out=out, seed=seed, preset="paper",
        algorithms=_entries(*fvqe, ("vqe", {"algorithm": "vqe"}), ("qaoa", {"algorithm": "qaoa"}),
                            ("heite", {"algorithm": "heite",
                                       "filter": {"family": "exponential", "tau": 1.0}})))


PRESETS = {"desk": desk_preset, "paper": paper_preset}


# -- instances ----------------------------------------------------------------

def instance_seed(seed: int, n: int, i: int) -> int:
    return _rng.derive_int(seed, n, i)


def run_seed(seed: int, n: int, i: int, label: str) -> int:
    return _rng.derive_int(seed, n, i, _rng.label_key(label))


def instance_name(n: int, i: int) -> str:
    return f"n{n}_i{i}"


def generate_instances(config: RunConfig, out: Path | None = None) -> dict[tuple[int, int], Path]:
    """Write every instance graph and its metadata; existing files are kept."""
    out = Path(out or config.out)
    (out / "instances").mkdir(parents=True, exist_ok=True)
    paths = {}
    for n in config.sizes:
        for i in range(config.instances):
            base = out / "instances" / instance_name(n, i)
            txt = base.with_suffix(".txt")
            if not txt.exists():
                s = instance_seed(config.seed, n, i)
                g = generate_instance(n, s)
                g.save(txt)
                prob = MaxCutProblem(g, config.upper_bound_mode, seed=s)
                base.with_suffix(".json").write_text(
                    json.dumps(prob.metadata(), indent=2, sort_keys=True) + "\n")
            paths[(n, i)] = txt
    return paths


def load_problem(config: RunConfig, path: Path, n: int, i: int) -> MaxCutProblem:
    return MaxCutProblem(WeightedGraph.load(path), config.upper_bound_mode,
                         seed=instance_seed(config.seed, n, i))


# -- running ------------------------------------------------------------------

@dataclass
class RunOutcome:
    label: str
    n: int
    instance: int
    status: str
    error: str | None = None
    skipped: bool = False


def _manifest(config: RunConfig, entry, n, i, ocfg: OptimizerConfig, problem, trace, wall):
    return {
        "label": entry.label, "size": n, "instance": i,
        "status": "failed" if trace.error else "ok",
        "error": trace.error,
        "config": ocfg.to_dict(),
        "seeds": {"master": config.seed, "instance": instance_seed(config.seed, n, i),
                  "run": ocfg.seed},
        "problem": problem.metadata(),
        "plateau_rule": {"plateau_tol": ocfg.plateau_tol, "window": ocfg.tau_precision,
                         "budget": ocfg.tau_budget, "tau_init": ocfg.tau_init},
        "cone_widths": {str(k): v for k, v in trace.cone_widths.items()},
        "notes": trace.notes,
        "wall_time_s": wall,
    }


def run_one(config: RunConfig, entry: AlgorithmEntry, n: int, i: int, out: Path,
            force: bool = False) -> RunOutcome:
    rdir = out / "runs" / entry.label
    csv = rdir / f"{instance_name(n, i)}.csv"
    man = csv.with_suffix(".json")
    ocfg = config.optimizer_config(entry, n, run_seed(config.seed, n, i, entry.label))
    if not force and csv.exists() and man.exists():
        old = json.loads(man.read_text())
        if old.get("config") == json.loads(json.dumps(ocfg.to_dict())):
            return RunOutcome(entry.label, n, i, old["status"], old.get("error"), skipped=True)
    rdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    problem = load_problem(config, out / "instances" / f"{instance_name(n, i)}.txt", n, i)
    try:
        trace = run(problem, ocfg)
    except Exception as exc:  # record and continue: ensemble statistics are the product
        log.exception("run %s %s failed", entry.label, instance_name(n, i))
        trace = OptimizerTrace(ocfg.algorithm, error=f"{type(exc).__name__}: {exc}")
    wall = time.perf_counter() - t0
    csv.write_text(trace.to_csv())
    man.write_text(json.dumps(_manifest(config, entry, n, i, ocfg, problem, trace, wall),
                              indent=2, sort_keys=True) + "\n")
    status = "failed" if trace.error else "ok"
    return RunOutcome(entry.label, n, i, status, trace.error)


def run_ensemble(config: RunConfig, force: bool = False, out=None) -> "EnsembleSummary":
    """Generate instances, run every algorithm on every instance, write the summary."""
    out = Path(out or config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(config.to_json() + "\n")
    generate_instances(config, out)
    outcomes = []
    for n in config.sizes:
        for i in range(config.instances):
            for entry in config.algorithms:
                oc = run_one(config, entry, n, i, out, force)
                log.info("%s %s: %s%s", entry.label, instance_name(n, i), oc.status,
                         " (cached)" if oc.skipped else "")
                outcomes.append(oc)
    summary = summarize(out, config)
    write_summary(summary, out)
    summary.outcomes = outcomes
    return summary


# -- summaries ----------------------------------------------------------------

@dataclass
class GroupSummary:
    size: int
    label: str
    runs: int
    failed: int
    mean_final_alpha: float | None
    std_final_alpha: float | None
    mean_final_gs_prob: float | None
    steps_to_alpha: list[int | None]
    median_steps_to_alpha: float | None
    reached_alpha: int
    fraction_gs_above: float | None
    first_tau: list[float]
    cone_widths: dict[str, int]


@dataclass
class EnsembleSummary:
    alpha_target: float
    gs_target: float
    groups: list[GroupSummary]
    outcomes: list[RunOutcome] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(g.failed for g in self.groups)

    def group(self, size: int, label: str) -> GroupSummary:
        for g in self.groups:
            if g.size == size and g.label == label:
                return g
        raise KeyError((size, label))

    def to_dict(self) -> dict:
        return {"alpha_target": self.alpha_target, "gs_target": self.gs_target,
                "failures": self.failures,
                "groups": [dataclasses.asdict(g) for g in self.groups]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _clean(x):
    return None if x is None or not np.isfinite(x) else float(x)


def load_traces(out) -> dict[tuple[str, int, int], tuple[list, dict]]:
    """(label, size, instance) -> (step records, manifest) for every persisted run."""
    out = Path(out)
    traces = {}
    root = out / "runs"
    if not root.exists():
        return traces
    for man in sorted(root.glob("*/*.json")):
        meta = json.loads(man.read_text())
        csv = man.with_suffix(".csv")
        if not csv.exists():
            warnings.warn(f"manifest without trace: {man}")
            continue
        recs = OptimizerTrace.records_from_csv(csv.read_text())
        traces[(meta["label"], int(meta["size"]), int(meta["instance"]))] = (recs, meta)
    return traces


def _group(size, label, runs):
    ok = [(recs, meta) for recs, meta in runs if meta["status"] == "ok" and recs]
    failed = len(runs) - len(ok)
    if not ok:
        return GroupSummary(size, label, len(runs), failed, None, None, None, [], None, 0,
                            None, [], {})
    final = np.array([recs[-1].approx_ratio for recs, _ in ok])
    gs = np.array([recs[-1].gs_prob for recs, _ in ok])
    steps = []
    for recs, _ in ok:
        hit = next((r.t for r in recs if r.approx_ratio >= ALPHA_TARGET), None)
        steps.append(hit)
    st = np.array([math.inf if s is None else s for s in steps], dtype=float)
    med = float(np.median(st))
    reached_gs = [max(r.gs_prob for r in recs) > GS_TARGET for recs, _ in ok]
    taus = [recs[1].tau for recs, _ in ok if len(recs) > 1 and np.isfinite(recs[1].tau)]
    widths: dict[str, int] = {}
    for _, meta in ok:
        for k, v in meta.get("cone_widths", {}).items():
            widths[k] = widths.get(k, 0) + int(v)
    return GroupSummary(
        size, label, len(runs), failed, float(final.mean()), float(final.std()), float(gs.mean()),
        steps, _clean(med), sum(s is not None for s in steps), float(np.mean(reached_gs)),
        [float(t) for t in taus], dict(sorted(widths.items(), key=lambda kv: int(kv[0]))))


def summarize(out, config: RunConfig | None = None) -> EnsembleSummary:
    """Aggregate statistics computed from the persisted traces and manifests only."""
    traces = load_traces(out)
    buckets: dict[tuple[int, str], list] = {}
    for (label, n, _i), val in sorted(traces.items(), key=lambda kv: (kv[0][1], kv[0][0], kv[0][2])):
        buckets.setdefault((n, label), []).append(val)
    if config is not None:
        order = {e.label: k for k, e in enumerate(config.algorithms)}
        keys = sorted(buckets, key=lambda k: (k[0], order.get(k[1], len(order)), k[1]))
    else:
        keys = sorted(buckets)
    return EnsembleSummary(ALPHA_TARGET, GS_TARGET, [_group(n, lab, buckets[(n, lab)])
                                                     for n, lab in keys])


def write_summary(summary: EnsembleSummary, out) -> Path:
    path = Path(out) / "summary.json"
    path.write_text(summary.to_json())
    return path


# -- plots --------------------------------------------------------------------

def _sidecar(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else (v if isinstance(v, str) else repr(float(v))
                                                     if isinstance(v, float) else str(v))
                              for v in row))
    path.write_text("\n".join(lines) + "\n")


def alpha_curves(traces, size: int, label: str):
    """(steps, mean, std) of the approximation ratio over successful runs."""
    runs = [recs for (lab, n, _), (recs, meta) in traces.items()
            if lab == label and n == size and meta["status"] == "ok" and recs]
    if not runs:
        return None
    T = min(len(r) for r in runs)
    A = np.array([[x.approx_ratio for x in r[:T]] for r in runs])
    return np.arange(T), A.mean(axis=0), A.std(axis=0)


def emit_plots(summary: EnsembleSummary, traces, out_dir) -> list[Path]:
    """Ratio-vs-step curves, final-ratio and ground-state bars, cone-width histograms.

    Each image ``X.png`` has a sidecar ``X.csv`` with the plotted numbers.
    Returns the written paths (empty for an empty ensemble).
    """
    if not summary.groups:
        return []
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    sizes = sorted({g.size for g in summary.groups})
    labels = list(dict.fromkeys(g.label for g in summary.groups))

    for n in sizes:
        fig, ax = plt.subplots(figsize=(6, 4))
        header, cols = ["step"], []
        for lab in labels:
            cur = alpha_curves(traces, n, lab)
            if cur is None:
                warnings.warn(f"no traces for {lab} at n={n}")
                continue
            t, m, s = cur
            ax.plot(t, m, label=lab)
            ax.fill_between(t, m - s, m + s, alpha=0.2)
            header += [f"{lab}_mean", f"{lab}_std"]
            cols.append((m, s))
        if not cols:
            plt.close(fig)
            continue
        ax.set_xlabel("optimization step")
        ax.set_ylabel("approximation ratio")
        ax.set_title(f"n = {n}")
        ax.legend(fontsize="small")
        base = out_dir / f"alpha_vs_step_n{n}"
        fig.savefig(base.with_suffix(".png"), dpi=100)
        plt.close(fig)
        T = min(len(m) for m, _ in cols)
        rows = [[k] + [float(v) for m, s in cols for v in (m[k], s[k])] for k in range(T)]
        _sidecar(base.with_suffix(".csv"), header, rows)
        written += [base.with_suffix(".png"), base.with_suffix(".csv")]

    for metric, ylabel, name in (("mean_final_alpha", "final approximation ratio", "final_alpha"),
                                 ("fraction_gs_above", f"fraction with P(ground) > {GS_TARGET}",
                                  "gs_fraction")):
        fig, ax = plt.subplots(figsize=(6, 4))
        width = 0.8 / max(1, len(labels))
        rows = []
        for k, lab in enumerate(labels):
            vals = []
            for n in sizes:
                try:
                    v = getattr(summary.group(n, lab), metric)
                except KeyError:
                    v = None
                vals.append(np.nan if v is None else v)
                rows.append([n, lab, None if v is None else float(v)])
            ax.bar(np.arange(len(sizes)) + k * width, vals, width, label=lab)
        ax.set_xticks(np.arange(len(sizes)) + 0.4 - width / 2)
        ax.set_xticklabels([str(n) for n in sizes])
        ax.set_xlabel("qubits")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize="small")
        base = out_dir / name
        fig.savefig(base.with_suffix(".png"), dpi=100)
        plt.close(fig)
        _sidecar(base.with_suffix(".csv"), ["size", "label", metric], rows)
        written += [base.with_suffix(".png"), base.with_suffix(".csv")]

    for g in summary.groups:
        if not g.cone_widths:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ks = sorted(int(k) for k in g.cone_widths)
        vs = [g.cone_widths[str(k)] for k in ks]
        ax.bar(ks, vs)
        ax.set_xlabel("sub-cone width (qubits)")
        ax.set_ylabel("circuits")
        ax.set_title(f"{g.label}, n = {g.size}")
        base = out_dir / f"cone_widths_{g.label}_n{g.size}"
        fig.savefig(base.with_suffix(".png"), dpi=100)
        plt.close(fig)
        _sidecar(base.with_suffix(".csv"), ["width", "count"], list(zip(ks, vs)))
        written += [base.with_suffix(".png"), base.with_suffix(".csv")]
    return written


# -- the hardware-experiment instance -------------------------------------------

PAPER_BITSTRING = "011001011"
# the reference solution as a spin vector over all ten vertices; its last
# entry is -1, the opposite of the z_N = +1 pin used throughout this package
PAPER_SOLUTION = (1, -1, -1, 1, 1, -1, 1, -1, -1, -1)
PAPER_HARDWARE = {"approx_ratio": (0.9844, 0.0062), "gs_prob": (0.928, 0.024)}


class FixtureMismatchError(RuntimeError):
    """The shipped instance does not reproduce its reference solution."""


def partition_of(z) -> frozenset:
    """The unordered vertex partition {S, complement of S} of a spin vector (1-based vertices)."""
    plus = frozenset(u + 1 for u, zu in enumerate(z) if zu == 1)
    minus = frozenset(u + 1 for u, zu in enumerate(z) if zu == -1)
    return frozenset({plus, minus})


def spins_of_bits(bits: str, z_last: int = 1) -> tuple[int, ...]:
    return tuple(1 - 2 * int(b) for b in bits) + (z_last,)


def verify_paper_instance(shots: int | None = 500, steps: int = 9, seed: int = 0,
                          run_fvqe: bool = True) -> dict:
    """Brute-force the 9-qubit experiment instance and rerun its F-VQE settings.

    The optimum must encode the same vertex partition as the reference
    solution (a mismatch raises :class:`FixtureMismatchError`). The
    reference bitstring reads the first nine spins of a vector whose tenth
    spin is -1; with the tenth spin pinned to +1 the same cut is the
    complementary bitstring.
    """
    problem = MaxCutProblem(hardware_instance_graph())
    n = problem.n_qubits
    idx = problem.H.optimum_index
    bits = "".join(str(b) for b in ((idx >> (n - 1 - q)) & 1 for q in range(n)))
    complement = "".join("1" if b == "0" else "0" for b in bits)
    same = partition_of(spins_of_bits(bits)) == partition_of(PAPER_SOLUTION)
    if not same or spins_of_bits(PAPER_BITSTRING, -1) != PAPER_SOLUTION:
        raise FixtureMismatchError(f"optimum {bits} does not match reference {PAPER_BITSTRING}")
    onehot = np.zeros(1 << n)
    onehot[idx] = 1.0
    report = {
        "optimum_bits": bits, "optimum_bits_complement": complement,
        "reference_bits": PAPER_BITSTRING, "reference_spins": list(PAPER_SOLUTION),
        "partition_matches": same,
        "optimum_cost": problem.optimum_cost, "alpha_of_optimum": problem.metrics(onehot)[1],
        "reference_hardware": {k: list(v) for k, v in PAPER_HARDWARE.items()},
    }
    if run_fvqe:
        cfg = OptimizerConfig(algorithm="fvqe", filter=FilterSpec("inverse", 0.1), layers=1,
                              reduced_ansatz=True, g_c=0.2, shots=shots, steps=steps, seed=seed)
        trace = run(problem, cfg)
        report.update({
            "config": cfg.to_dict(), "steps_run": len(trace.records) - 1, "error": trace.error,
            "final_approx_ratio": trace.final.approx_ratio, "final_gs_prob": trace.final.gs_prob,
            "trace": trace.to_csv(),
        })
    return report
