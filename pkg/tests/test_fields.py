import numpy as np
import pytest

import oracles
from qgcontrol import fields, graphs, spectra
from qgcontrol.fields import (
    ControlField,
    ControlMatrix,
    EdgeField,
    FieldError,
    coupling_decay_fit,
    field_from_doc,
    field_to_doc,
    first_order_residuals,
    matrix_elements,
    perturbed_spectrum,
    resonance_collision_check,
)


def unit_field(g):
    return ControlField(
        "multiplication", tuple(EdgeField(poly=(1.0,)) for _ in g.edges)
    )


class TestMatrixElements:
    def test_unit_field_gives_identity(self, al_star, star_basis_101):
        B = matrix_elements(unit_field(al_star), spectra.compute_spectrum(al_star, 12))
        assert np.max(np.abs(B.matrix - np.eye(12))) < 1e-12

    def test_hermitian_real_diagonal(self, star_quartic_matrix_101):
        m = star_quartic_matrix_101.matrix
        assert np.max(np.abs(m - m.conj().T)) < 1e-12
        assert np.max(np.abs(np.diag(m).imag)) < 1e-14

    def test_quadrature_oracle_agreement(self, al_star, star_basis_101, star_quartic_matrix_101):
        field = fields.star_quartic_field(al_star)
        rng = np.random.default_rng(3)
        for _ in range(20):
            j, k = rng.integers(0, 40, size=2)
            want = oracles.quadrature_matrix_element(star_basis_101, field, int(j), int(k))
            got = star_quartic_matrix_101.matrix[j, k]
            assert abs(got - want) < 1e-9

    def test_tadpole_quadrature_agreement(self, tadpole_graph, tadpole_basis_101, tadpole_field_matrix_101):
        field = fields.tadpole_mixed_field(tadpole_graph)
        rng = np.random.default_rng(5)
        for _ in range(10):
            j, k = rng.integers(0, 30, size=2)
            want = oracles.quadrature_matrix_element(tadpole_basis_101, field, int(j), int(k))
            got = tadpole_field_matrix_101.matrix[j, k]
            assert abs(got - want) < 1e-9

    def test_missing_edge_rejected(self, al_star, star_basis_101):
        bad = ControlField("multiplication", (EdgeField(poly=(1.0,)),))
        with pytest.raises(FieldError, match="edge count"):
            matrix_elements(bad, star_basis_101)


def star_amplitude_sq(lam, lengths):
    sins = np.sin(np.sqrt(lam) * np.asarray(lengths))
    prods = [
        np.prod([sins[m] ** 2 for m in range(len(lengths)) if m != k])
        for k in range(len(lengths))
    ]
    return 2.0 * prods[0] / sum(L * p for L, p in zip(lengths, prods))


def star_offdiag_form(x, za, zb):
    piece = lambda w: 2.0 * (-6 * w * x + w**3 * x**3 + 6 * np.sin(w * x)) / w**5
    return piece(za - zb) - piece(za + zb)


def star_diag_form(x, z):
    return (4 * x**5 * z**5 - 20 * x**3 * z**3 + 30 * x * z - 15 * np.sin(2 * x * z)) / (
        40 * z**5
    )


class TestStarClosedForms:
    def test_ground_row_matches_product_form(self, al_star, star_basis_101, star_quartic_matrix_101):
        lengths = al_star.lengths
        L1 = lengths[0]
        lams = star_basis_101.lambdas
        B = star_quartic_matrix_101.matrix
        z1 = np.sqrt(lams[0])
        for j in range(1, 51):
            zj = np.sqrt(lams[j])
            want = (
                np.sqrt(star_amplitude_sq(lams[0], lengths))
                * np.sqrt(star_amplitude_sq(lams[j], lengths))
                * star_offdiag_form(L1, z1, zj)
            )
            assert abs(B[0, j].real - want) < 1e-10

    def test_diagonal_matches_product_form(self, al_star, star_basis_101, star_quartic_matrix_101):
        lengths = al_star.lengths
        lams = star_basis_101.lambdas
        B = star_quartic_matrix_101.matrix
        for j in (0, 1, 5, 20):
            want = star_amplitude_sq(lams[j], lengths) * star_diag_form(
                lengths[0], np.sqrt(lams[j])
            )
            assert abs(B[j, j].real - want) < 1e-10


@pytest.fixture()
def skew_indices(tadpole_basis_101):
    skew = spectra.expand_spectrum(
        spectra.closed_form_spectrum("tadpole_skew", 30, loop_length=1.0), 30
    )
    out = []
    for i, lam in enumerate(tadpole_basis_101.lambdas):
        if np.min(np.abs(skew - lam)) < 1e-6 * lam:
            out.append(i)
    return out


class TestTadpoleParity:
    def test_skew_modes_live_on_the_loop(self, tadpole_basis_101, skew_indices):
        assert len(skew_indices) >= 10
        for i in skew_indices:
            a2, b2 = tadpole_basis_101.pairs[i].coeffs[1]
            assert abs(a2) < 1e-10 and abs(b2) < 1e-10

    def test_loop_sinusoid_selection_rules(self, tadpole_graph, tadpole_basis_101, skew_indices):
        # the loop-only sinusoid part of the field: skew-skew and all diagonal
        # entries vanish by parity
        loop = next(i for i, e in enumerate(tadpole_graph.edges) if e.is_loop)
        profiles = [EdgeField() for _ in tadpole_graph.edges]
        profiles[loop] = EdgeField(sinusoid=(1.0, 2.0 * np.pi, 0.0))
        B1 = matrix_elements(ControlField("multiplication", tuple(profiles)),
                             tadpole_basis_101)
        sub = np.ix_(skew_indices, skew_indices)
        assert np.max(np.abs(B1.matrix[sub])) < 1e-12
        assert np.max(np.abs(np.diag(B1.matrix))) < 1e-12


class TestCouplingDecay:
    def test_unit_field_all_violations(self, al_star):
        basis = spectra.compute_spectrum(al_star, 12)
        B = matrix_elements(unit_field(al_star), basis)
        c, violations = coupling_decay_fit(B, 2.1)
        assert violations == list(range(2, 13))

    def test_star_quartic_positive(self, star_quartic_matrix_101):
        c, violations = coupling_decay_fit(star_quartic_matrix_101, 4.1)
        assert c > 0 and violations == []

    def test_tadpole_positive(self, tadpole_field_matrix_101):
        c, violations = coupling_decay_fit(tadpole_field_matrix_101, 4.1)
        assert c > 0 and violations == []


class TestResonanceCheck:
    def test_square_ladder_detected_with_degenerate_diagonal(self):
        lams = np.array([float(k**2) for k in range(1, 9)])
        B = ControlMatrix(np.zeros((8, 8)))
        bad = resonance_collision_check(B, lams, tol=1e-9, cap=8)
        # lambda_4 - lambda_1 = 15 = lambda_8 - lambda_7 with zero diagonal
        assert ((1, 4), (7, 8)) in {tuple(sorted(q)) for q in bad} or (
            (4, 1),
            (8, 7),
        ) in {tuple(q) for q in bad}

    def test_square_ladder_separated_by_diagonal(self):
        lams = np.array([float(k**2) for k in range(1, 9)])
        diag = np.diag(np.linspace(0.0, 2.1, 8) ** 2)
        bad = resonance_collision_check(ControlMatrix(diag), lams, tol=1e-9, cap=8)
        assert bad == []

    def test_generic_star_no_resonances(self, star_basis_101, star_quartic_matrix_101):
        bad = resonance_collision_check(
            star_quartic_matrix_101, star_basis_101.lambdas, tol=1e-9, cap=40
        )
        assert bad == []


class TestPerturbedSpectrum:
    def test_zero_coupling_strength(self, star_basis_101, star_quartic_matrix_101):
        lams = star_basis_101.lambdas[:101]
        got = perturbed_spectrum(lams, star_quartic_matrix_101, 0.0)
        assert np.max(np.abs(got - lams)) < 1e-12

    def test_quadratic_residual_slope(self, star_basis_101, star_quartic_matrix_101):
        lams = star_basis_101.lambdas
        u0s = np.array([1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
        r1 = np.array(
            [abs(first_order_residuals(lams, star_quartic_matrix_101, u)[0]) for u in u0s]
        )
        slope = np.polyfit(np.log(u0s), np.log(r1), 1)[0]
        assert 1.9 <= slope <= 2.1

    def test_continuity_bound(self, star_basis_101, star_quartic_matrix_101):
        lams = star_basis_101.lambdas
        normB = np.linalg.norm(star_quartic_matrix_101.matrix, 2)
        for u0 in (0.05, 0.1):
            shift = perturbed_spectrum(lams, star_quartic_matrix_101, u0) - lams
            assert np.max(np.abs(shift)) <= u0 * normB + 1e-12

    def test_resonance_splitting(self):
        # the square ladder has the exact resonance (4,1),(8,7): 15 = 15; a
        # diagonal coupling with distinct shift differences separates it
        lams = np.array([float(k**2) for k in range(1, 9)])
        d0 = (lams[3] - lams[0]) - (lams[7] - lams[6])
        assert abs(d0) < 1e-12
        B = ControlMatrix(np.diag([0.0, 0.1, 0.2, 0.5, 0.3, 0.4, 0.6, 1.3]).astype(complex))
        for u0 in (1e-2, 3e-2):
            pl = perturbed_spectrum(lams, B, u0)
            split = (pl[3] - pl[0]) - (pl[7] - pl[6])
            assert abs(split) > 1e-4


class TestVertexDefects:
    def test_star_quartic_flat_to_third_order(self, al_star):
        field = fields.star_quartic_field(al_star)
        report = fields.field_vertex_defects(field, al_star, max_order=2)
        for spread, flux in report["c"]:
            assert spread < 1e-12 and flux < 1e-12

    def test_tadpole_field_continuity_and_flux(self, tadpole_graph):
        field = fields.tadpole_mixed_field(tadpole_graph)
        report = fields.field_vertex_defects(field, tadpole_graph, max_order=0)
        spread, flux = report["v"][0]
        assert spread < 1e-12 and flux < 1e-12


class TestCrossScaledField:
    def test_hermitian_on_interval_family(self):
        g = graphs.disjoint_intervals([1.0, np.sqrt(2.0)])
        basis = spectra.compute_spectrum(g, 8)
        B = matrix_elements(fields.cross_scaled_field(g), basis)
        m = B.matrix
        assert np.max(np.abs(m - m.conj().T)) < 1e-10
        assert np.max(np.abs(m)) > 1e-3  # genuinely couples the intervals

    def test_single_interval_reduces_to_x_squared(self):
        g = graphs.disjoint_intervals([1.0])
        basis = spectra.compute_spectrum(g, 6)
        B = matrix_elements(fields.cross_scaled_field(g), basis)
        ref_field = ControlField("multiplication", (EdgeField(poly=(0.0, 0.0, 1.0)),))
        want = matrix_elements(ref_field, basis)
        assert np.max(np.abs(B.matrix - want.matrix)) < 1e-12


class TestFieldDocuments:
    def test_round_trip(self, tadpole_graph):
        field = fields.tadpole_mixed_field(tadpole_graph)
        doc = field_to_doc(field)
        rebuilt = field_from_doc(doc, tadpole_graph)
        assert rebuilt == field

    def test_preset_lookup(self, al_star):
        f = field_from_doc({"preset": "star-quartic"}, al_star)
        assert f == fields.star_quartic_field(al_star)

    def test_unknown_preset(self, al_star):
        with pytest.raises(FieldError, match="preset"):
            field_from_doc({"preset": "nope"}, al_star)

    def test_unknown_edge_rejected(self, al_star):
        with pytest.raises(FieldError, match="missing edges"):
            field_from_doc({"edges": {"zz": {"poly": [1.0]}}}, al_star)

    def test_non_hermitian_rejected(self):
        with pytest.raises(FieldError, match="Hermitian"):
            ControlMatrix(np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex))
