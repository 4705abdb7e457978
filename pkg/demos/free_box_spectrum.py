"""Spectrum of the empty box against its two reference curves.

The discrete eigenvalues of the 1-d Dirichlet Laplacian have a closed
form, and as the mesh is refined the low spectrum converges to the
continuum parabola at second order.  This script prints both comparisons
for a unit box.
"""

import math

import numpy as np

from breather_lab.eigensolve import eigen_lowest
from breather_lab.grid_operator import GridSpec, assemble_hamiltonian


def discrete_exact(grid: GridSpec, k: int) -> float:
    return (4.0 / grid.h**2) * math.sin(k * math.pi * grid.h / (2 * grid.L)) ** 2


def main():
    grid = GridSpec(d=1, L=1, n_h=256)
    H = assemble_hamiltonian(grid, np.zeros(grid.n_dof), None)
    spectrum = eigen_lowest(H, 40 * math.pi**2)

    print(f"empty box, L = 1, h = 1/{grid.n_h}")
    print(f"{'k':>3} {'computed':>14} {'discrete exact':>14} {'pi^2 k^2':>12} "
          f"{'rel err':>9}")
    for k, lam in enumerate(spectrum.eigenvalues[:10], start=1):
        cont = math.pi**2 * k**2
        print(f"{k:>3} {lam:>14.6f} {discrete_exact(grid, k):>14.6f} "
              f"{cont:>12.4f} {abs(lam - cont) / cont:>9.2e}")

    print("\nsecond-order convergence of the ground state:")
    prev = None
    for n_h in (16, 32, 64, 128, 256):
        g = GridSpec(d=1, L=1, n_h=n_h)
        h_mat = assemble_hamiltonian(g, np.zeros(g.n_dof), None)
        lam = eigen_lowest(h_mat, 2 * math.pi**2).eigenvalues[0]
        err = abs(lam - math.pi**2)
        ratio = "" if prev is None else f"  ratio {prev / err:5.2f}"
        print(f"  n_h = {n_h:>3}  error {err:.3e}{ratio}")
        prev = err


if __name__ == "__main__":
    main()
