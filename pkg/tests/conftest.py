from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qgcontrol import fields, graphs, spectra

AL_STAR_LENGTHS = [1.0, np.sqrt(2.0), np.sqrt(3.0), np.sqrt(5.0)]
TADPOLE_LENGTHS = (1.0, np.sqrt(2.0))


@pytest.fixture(scope="session")
def al_star():
    return graphs.star(AL_STAR_LENGTHS)


@pytest.fixture(scope="session")
def tadpole_graph():
    return graphs.tadpole(*TADPOLE_LENGTHS)


@pytest.fixture(scope="session")
def star_basis_101(al_star):
    return spectra.compute_spectrum(al_star, 101)


@pytest.fixture(scope="session")
def tadpole_basis_101(tadpole_graph):
    return spectra.compute_spectrum(tadpole_graph, 101)


@pytest.fixture(scope="session")
def star_basis_510(al_star):
    return spectra.compute_spectrum(al_star, 510)


@pytest.fixture(scope="session")
def tadpole_basis_510(tadpole_graph):
    return spectra.compute_spectrum(tadpole_graph, 510)


@pytest.fixture(scope="session")
def equilateral3_basis_30():
    return spectra.compute_spectrum(graphs.star([1.0, 1.0, 1.0]), 30)


@pytest.fixture(scope="session")
def star_quartic_matrix_101(al_star, star_basis_101):
    return fields.matrix_elements(fields.star_quartic_field(al_star), star_basis_101)


@pytest.fixture(scope="session")
def tadpole_field_matrix_101(tadpole_graph, tadpole_basis_101):
    return fields.matrix_elements(
        fields.tadpole_mixed_field(tadpole_graph), tadpole_basis_101
    )
