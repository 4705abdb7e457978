"""Numerical laboratory for the random breather Schrodinger operator on
finite boxes.

The package discretizes H = -Laplace + V_omega on (-L/2, L/2)^d with
Dirichlet boundary conditions, where V_omega is a sum of indicator bumps
with i.i.d. random radii attached to the integer lattice sites of the box.
On top of that it provides the ingredients of a Wegner-type eigenvalue
counting estimate: eigenvalue lifting under radius shifts, an empirical
unique-continuation constant, spectral shift functions with Krein's trace
identity, singular values of semigroup differences, a telescoping and
averaging argument over single-site shifts, and Monte Carlo estimation of
expected eigenvalue counts in small energy windows.
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    breather_field,
    cli_runner,
    eigensolve,
    grid_operator,
    ssf_lab,
    ucp_probe,
    wegner_mc,
)
