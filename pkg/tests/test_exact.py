from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg

from qcprop import catalog
from qcprop.errors import InvalidSpin, TruncationTooSevere
from qcprop.exact import (Representation, coherent_vector, commutator_defect, evolve,
                          exact_amplitude, generator_matrices, resolution_of_unity)
from qcprop.geometry import PhaseSpaceGeometry, overlap
from qcprop.symbols import Algebra, HamiltonianSpec, Term, TimeCoefficient


def test_spin_half_j0():
    m = generator_matrices(Representation(Algebra.SU2, 0.5))
    assert np.array_equal(m["J0"], np.diag([-0.5, 0.5]))


def test_lowest_weight_is_annihilated():
    m = generator_matrices(Representation(Algebra.SU2, 2))
    assert np.all(m["J-"][:, 0] == 0)


@pytest.mark.parametrize("j", [0.5, 1, 3.5, 10])
def test_su2_commutators(j):
    assert commutator_defect(Representation(Algebra.SU2, j)) <= 1e-12


def test_spin_one_commutators_exact():
    assert commutator_defect(Representation(Algebra.SU2, 1)) <= 1e-15


def test_truncated_commutators():
    assert commutator_defect(Representation(Algebra.HW, 1.0, 64)) <= 1e-12
    assert commutator_defect(Representation(Algebra.SU11, 0.75)) <= 1e-12


def test_number_operator():
    m = generator_matrices(Representation(Algebra.HW, 1.0, 4))
    assert np.allclose(m["a+"] @ m["a"], np.diag([0, 1, 2, 3]), atol=1e-15)


def test_invalid_spin():
    with pytest.raises(InvalidSpin):
        Representation(Algebra.SU2, 0.3)
    with pytest.raises(InvalidSpin):
        Representation(Algebra.SU2, 0)


def test_coherent_vector_examples():
    rep = Representation(Algebra.SU2, 0.5)
    assert np.array_equal(coherent_vector(rep, 0).coefficients, [1, 0])
    z = 0.3 - 0.8j
    expect = np.array([1, z]) / np.sqrt(1 + abs(z) ** 2)
    assert np.allclose(coherent_vector(rep, z).coefficients, expect, atol=1e-15)


def test_coherent_norms():
    for rep, z in [(Representation(Algebra.SU2, 7), 1.3 + 2j), (Representation(Algebra.HW, 1.0, 64), 2.0),
                   (Representation(Algebra.SU11, 1.5), 0.5j)]:
        sv = coherent_vector(rep, z)
        assert abs(np.linalg.norm(sv.coefficients) - 1) <= 1e-12 + sv.truncation_tail


def test_truncation_guard():
    with pytest.raises(TruncationTooSevere):
        coherent_vector(Representation(Algebra.HW, 1.0, 16), 3.0)


def test_overlap_agreement():
    for g, tol in [(PhaseSpaceGeometry.sphere(3), 1e-12), (PhaseSpaceGeometry.plane(1.0), 1e-10)]:
        rep = Representation.for_geometry(g)
        for z1, z2 in [(0.2 + 0.3j, -1.1 + 0.4j), (2.0, 1.5j)]:
            v = np.vdot(coherent_vector(rep, z1).coefficients, coherent_vector(rep, z2).coefficients)
            assert abs(v - overlap(g, z1, z2)) <= tol


def test_evolve_free_is_identity():
    rep = Representation(Algebra.SU2, 2)
    assert np.allclose(evolve(rep, catalog.zero(Algebra.SU2), 1.3), np.eye(5), atol=0)


def test_evolve_diagonal_spin_half():
    A, tau = 0.7, 1.1
    h = HamiltonianSpec(Algebra.SU2, (Term(("J0",), TimeCoefficient(2 * A)),))
    u = evolve(Representation(Algebra.SU2, 0.5), h, tau)
    assert np.allclose(u, np.diag([np.exp(1j * A * tau), np.exp(-1j * A * tau)]), atol=1e-14)


def test_fiducial_phase():
    A, tau, j = 0.4, 0.9, 3
    h = HamiltonianSpec(Algebra.SU2, (Term(("J0",), TimeCoefficient(2 * A)),))
    amp = exact_amplitude(Representation(Algebra.SU2, j), h, 0, 0, tau)
    assert amp == pytest.approx(np.exp(2j * j * A * tau), abs=1e-13)


def test_unitarity_of_bundled_examples():
    cases = [(Representation(Algebra.SU2, 5), catalog.su2_linear()),
             (Representation(Algebra.SU2, 5), catalog.footnote2()),
             (Representation(Algebra.HW, 1.0, 64), catalog.oscillator(1.3)),
             (Representation(Algebra.HW, 1.0, 64), catalog.parametric_amplifier(0.8, 0.5)),
             (Representation(Algebra.SU11, 1.5), catalog.su11_linear())]
    for rep, h in cases:
        u = evolve(rep, h, 1.0)
        assert np.max(np.abs(u.conj().T @ u - np.eye(rep.dimension))) <= 1e-10


def test_time_dependent_evolution_matches_rotating_frame():
    # a driven spin in the rotating frame is time independent:
    # H(t) = 2A J0 + f e^{-i nu t} J+ + conj(f) e^{i nu t} J- = R(t) H_rot R(t)^+
    A, f, nu, tau = 0.5, 0.3 + 0.1j, 1.7, 1.2
    h = HamiltonianSpec(Algebra.SU2, (Term(("J0",), TimeCoefficient(2 * A)),
                                      Term(("J+",), TimeCoefficient(f, "exp", -nu)),
                                      Term(("J-",), TimeCoefficient(np.conj(f), "exp", nu))))
    rep = Representation(Algebra.SU2, 1.5)
    m = rep.matrices
    rot = scipy.linalg.expm(-1j * nu * tau * m["J0"])
    h_rot = (2 * A - nu) * m["J0"] + f * m["J+"] + np.conj(f) * m["J-"]
    ref = rot @ scipy.linalg.expm(-1j * tau * h_rot)
    assert np.max(np.abs(evolve(rep, h, tau) - ref)) <= 1e-10


def test_zero_duration_is_overlap():
    g = PhaseSpaceGeometry.sphere(2)
    rep = Representation.for_geometry(g)
    assert abs(exact_amplitude(rep, catalog.su2_linear(), 0.3, -0.5j, 0.0) - overlap(g, -0.5j, 0.3)) <= 1e-12


def test_oscillator_amplitude_closed_form():
    gamma, omega, tau = 1.0, 1.3, 0.9
    zi, zf = 0.5 + 0.2j, 0.3 + 0.6j
    ref = np.exp(gamma * (np.conj(zf) * zi * np.exp(-1j * omega * tau) - 0.5 * abs(zf) ** 2 - 0.5 * abs(zi) ** 2))
    amp = exact_amplitude(Representation(Algebra.HW, gamma, 64), catalog.oscillator(omega), zi, zf, tau)
    assert abs(amp - ref) <= 1e-12


@pytest.mark.parametrize("j", [0.5, 1, 1.5, 2])
def test_resolution_of_unity(j):
    rep = Representation(Algebra.SU2, j)
    assert np.max(np.abs(resolution_of_unity(rep) - np.eye(rep.dimension))) <= 1e-6
