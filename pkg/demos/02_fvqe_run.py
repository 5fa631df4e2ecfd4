"""F-VQE on one 7-qubit instance, step by step.

Each step evaluates 2m+1 circuits, picks the filter strength tau so that the
gradient norm sits just below g_c, and takes one quasi-Newton step.
"""
from fvqe import MaxCutProblem, OptimizerConfig, run

problem = MaxCutProblem.random(7, seed=3)
config = OptimizerConfig(algorithm="fvqe", steps=15).defaults_for(problem.n_qubits)
trace = run(problem, config)

print(" t    tau    |grad|   alpha   P(ground)  branch")
for r in trace.records:
    print(f"{r.t:2d} {r.tau:6.3f} {r.grad_norm:8.4f} {r.approx_ratio:7.4f} {r.gs_prob:9.4f}  {r.tau_branch}")
print("circuits per step:", trace.records[1].circuits)

# The same run with shot noise (50 shots per circuit at this size).
noisy = run(problem, OptimizerConfig(algorithm="fvqe", steps=15, shots=50, seed=1)
            .defaults_for(problem.n_qubits))
print(f"with 50 shots: final alpha {noisy.final.approx_ratio:.4f}, "
      f"P(ground) {noisy.final.gs_prob:.4f}, shots used {sum(r.shots for r in noisy.records)}")
