import numpy as np
import pytest

from breather_lab.breather_field import (
    MeasureSpec,
    increment_centers,
    potential_on_grid,
    sample_omega,
    shift_all,
    w_indicator,
)
from breather_lab.grid_operator import GridSpec, assemble_hamiltonian
from breather_lab.ucp_probe import fit_ucp_exponents, ucp_constant

UNIFORM = MeasureSpec(omega_minus=0.1, omega_plus=0.4)


def breather_hamiltonian(L, seed, n_h=16, d=1, shape="ball", measure=UNIFORM,
                         delta=None):
    """A sampled box Hamiltonian; optionally with all radii shifted by delta."""
    grid = GridSpec(d=d, L=L, n_h=n_h)
    omega = sample_omega(measure, L, seed, d)
    if delta is not None:
        omega = shift_all(omega, delta)
    v = potential_on_grid(omega, shape, grid)
    return assemble_hamiltonian(grid, v), grid, omega


@pytest.fixture(scope="session")
def small_fit():
    """Empirical (kappa, M) fit from a small d=1 population.

    Shared by the lifting and trace-monotonicity tests so the constants
    and the population they were fitted on stay consistent.
    """
    b = 40.0
    deltas = (0.02, 0.05, 0.1)
    population = []
    samples = []
    for L in (1, 3):
        grid = GridSpec(d=1, L=L, n_h=128)
        for seed in (1, 2):
            omega = sample_omega(UNIFORM, L, seed)
            for delta in deltas:
                shifted = shift_all(omega, delta)
                h = assemble_hamiltonian(grid, potential_on_grid(shifted, "ball", grid))
                w = w_indicator(increment_centers(omega, delta), grid)
                c = ucp_constant(h, b, w)
                population.append((L, seed, delta))
                if c is not None and c > 1e-12:
                    samples.append((0.5 * delta, c))
    constants = fit_ucp_exponents(samples, b)
    return {"constants": constants, "population": population, "samples": samples,
            "b": b, "n_h": 128, "measure": UNIFORM}
