"""Shared fixtures: seeded generators, small reference models and central-spin files."""

import numpy as np
import pytest

from src.services.central_spin import CentralSpinParameters, central_spin_model_file, generate_central_spin
from src.services.lindblad import CoefficientDomain, ControlChannel, ControlledLindbladGenerator
from src.services.model_io import model_from_file, write_json
from src.services.operators import PAULI_MATRICES, random_hermitian, random_operator

X = PAULI_MATRICES["X"]

# Central spin N=1 with fixed couplings: beta = +/- 0.7
J_N1 = np.array([[0.0, 0.7], [0.0, 0.3]])
GAMMAS_N1 = np.array([0.2])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def rabi_generator():
    """H0 = sigma_x on a qubit, no noise, no controls."""
    return ControlledLindbladGenerator(2, X)


@pytest.fixture
def random_controlled_generator(rng):
    """Qutrit with one noise operator, one Hamiltonian and one dissipator channel."""
    n = 3
    return ControlledLindbladGenerator(
        n,
        random_hermitian(n, rng),
        (0.3 * random_operator(n, rng),),
        (
            ControlChannel.hamiltonian(random_hermitian(n, rng), "h"),
            ControlChannel.dissipator(0.5 * random_operator(n, rng), "d", CoefficientDomain(0.0, 2.0)),
        ),
    )


@pytest.fixture
def central_spin_n1():
    return model_from_file(central_spin_model_file(CentralSpinParameters(1, J_N1, GAMMAS_N1)))


@pytest.fixture
def central_spin_factory():
    """Parsed central-spin model for a given N, seeded couplings."""
    def build(N, seed=11, **variants):
        return model_from_file(generate_central_spin(N, seed=seed, **variants))
    return build


@pytest.fixture
def central_spin_path(tmp_path):
    """Central spin N=2 written to disk."""
    path = tmp_path / "central_spin.json"
    write_json(path, generate_central_spin(2, seed=5))
    return path


@pytest.fixture
def plus_state():
    """|+>^(x num_qubits) as a density matrix."""
    def build(num_qubits):
        return _plus_state(num_qubits)
    return build


def _plus_state(num_qubits):
    plus = np.full(2, 1.0 / np.sqrt(2.0), dtype=complex)
    psi = plus
    for _ in range(num_qubits - 1):
        psi = np.kron(psi, plus)
    return np.outer(psi, psi.conj())
