"""Effect of the surface-Laplacian regularization on the front solve.

Solves the manufactured linear instance for a sequence of epsilon
values and prints the solution-to-data norm ratio (which should stay
flat) and the successive solution differences (which should shrink by
a decade per decade of epsilon).
"""

import numpy as np

from stefan_pme import scenarios, stefan_linear


def main():
    deltas = []
    for eps in (1e-2, 1e-3, 1e-4):
        p, _, _, _ = scenarios.manufactured_linear_problem(
            n_lam=25, n_omega=16, n_t=11, T=0.02, eps=eps, source_eps=0.0)
        sol = stefan_linear.solve_linear_stefan(p, tol=1e-10, max_iter=120)
        ratio = stefan_linear.measure_schauder_ratio(sol, p)
        deltas.append(sol.delta.rho)
        print(f"eps = {eps:.0e}: norm ratio {ratio:.6f}")
    for i, eps in enumerate((1e-2, 1e-3)):
        diff = np.abs(deltas[i] - deltas[i + 1]).max()
        print(f"|delta({eps:.0e}) - delta({eps / 10:.0e})|_inf = {diff:.3e}")


if __name__ == "__main__":
    main()
