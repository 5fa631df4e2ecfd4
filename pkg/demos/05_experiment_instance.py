"""The 9-qubit instance of the hardware experiment, simulated.

Brute force finds the optimal cut; F-VQE with the reduced two-rotation
ansatz, g_c = 0.2 and 500 shots per circuit runs for nine steps. The
noiseless simulation is expected to beat the hardware numbers.
"""
from fvqe.bench import verify_paper_instance

report = verify_paper_instance(shots=500, seed=0)
print("optimum bits           ", report["optimum_bits"])
print("same cut as reference  ", report["reference_bits"], report["partition_matches"])
print(f"final alpha            {report['final_approx_ratio']:.4f} "
      f"(hardware {report['reference_hardware']['approx_ratio']})")
print(f"final P(ground)        {report['final_gs_prob']:.4f} "
      f"(hardware {report['reference_hardware']['gs_prob']})")
print(report["trace"])
