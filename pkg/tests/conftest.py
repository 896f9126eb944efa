"""Shared fixtures.

The dipole solves at h = 0.01 and h = 0.005 are the expensive part of the
suite; they are session scoped so the solver tests and the acceptance run
reuse the same five solutions.
"""
import numpy as np
import pytest

from bogovskii.domain import Ball, StarDomain
from bogovskii.inputs import dipole_family
from bogovskii.quadrature import Grid
from bogovskii.solver import solve_star


@pytest.fixture(scope="session")
def disk():
    return StarDomain(Ball(np.zeros(2), 1.0), np.zeros(2), 0.35)


@pytest.fixture(scope="session")
def disk_mol(disk):
    return disk.default_mollifier()


@pytest.fixture(scope="session")
def disk_grid(disk):
    return Grid.from_domain(disk, 0.02)


def _solve_dipoles(disk, h, n=5):
    grid = Grid.from_domain(disk, h)
    fam = dipole_family(grid, disk, n=n, seed=42)
    out = []
    for name, f in fam:
        # analytic means are zero; the sampled grid mean is O(h^2) and is
        # projected out through the mollifier channel
        sol = solve_star(f, disk, fix_mean=True)
        out.append((name, f, sol))
    return out


@pytest.fixture(scope="session")
def dipole_solves_h01(disk):
    return _solve_dipoles(disk, 0.01)


@pytest.fixture(scope="session")
def dipole_solves_h005(disk):
    return _solve_dipoles(disk, 0.005)
