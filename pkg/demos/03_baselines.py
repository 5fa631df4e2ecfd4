"""F-VQE next to VQE, QAOA and HE-ITE on the same instances.

Exact expectations, 70 steps each. Steps to reach alpha >= 0.75 and the final
approximation ratio are printed per algorithm.
"""
import dataclasses

import numpy as np

from fvqe import FilterSpec, MaxCutProblem, OptimizerConfig, run

configs = {
    "fvqe": OptimizerConfig(algorithm="fvqe"),
    "vqe": OptimizerConfig(algorithm="vqe"),
    "qaoa": OptimizerConfig(algorithm="qaoa"),
    "heite": OptimizerConfig(algorithm="heite", filter=FilterSpec("exponential", 1.0)),
}
problems = [MaxCutProblem.random(7, seed=s) for s in range(4)]
for name, cfg in configs.items():
    finals, hits = [], []
    for k, pr in enumerate(problems):
        tr = run(pr, dataclasses.replace(cfg.defaults_for(pr.n_qubits), seed=k))
        finals.append(tr.final.approx_ratio)
        hits.append(tr.steps_to(0.75))
    print(f"{name:>6}: final alpha {np.mean(finals):.4f} +- {np.std(finals):.4f}, "
          f"steps to 0.75: {hits}")
