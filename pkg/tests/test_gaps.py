import numpy as np
import pytest

from qgcontrol import gaps
from qgcontrol.gaps import (
    GapHypothesisError,
    collapse_multiplicities,
    dirichlet_cross_family_gap,
    fit_gap_constants,
    neumann_star_secular_roots,
    partition_classes,
    small_divisor_check,
)


class TestCollapse:
    def test_exact_repeats(self):
        lams = [1.0, 4.0, 4.0, 9.0]
        distinct, cmap = collapse_multiplicities(lams)
        assert np.allclose(distinct, [1.0, 4.0, 9.0])
        assert cmap == [[1], [2, 3], [4]]

    def test_near_repeats_within_tolerance(self):
        lams = [1.0, 4.0, 4.0 + 1e-12, 9.0]
        distinct, _ = collapse_multiplicities(lams)
        assert len(distinct) == 3

    def test_no_repeats_identity(self):
        lams = np.array([1.0, 2.0, 3.5])
        distinct, cmap = collapse_multiplicities(lams)
        assert np.array_equal(distinct, lams)
        assert cmap == [[1], [2], [3]]


class TestFitGapConstants:
    def test_perfect_squares(self):
        lams = np.array([k**2 for k in range(1, 50)], dtype=float)
        rep = fit_gap_constants(lams, 1)
        # one-step gaps are 2k+1, smallest is 3
        assert rep.delta == 3.0
        assert rep.d_tilde == 0.0
        assert rep.C_fit == 3.0
        assert rep.worst_index == 1
        assert rep.ok

    def test_interleaved_counterexample(self):
        # keep k small enough that k^2 + e^-k stays representable above k^2
        k = np.arange(1, 26, dtype=float)
        lams = np.sort(np.concatenate([k**2, k**2 + np.exp(-k)]))
        rep1 = fit_gap_constants(lams, 1)
        assert rep1.violations  # consecutive-pair gaps collapse to zero
        assert rep1.delta < 1e-6
        rep2 = fit_gap_constants(lams, 2)
        assert rep2.delta > 0.4  # two-step windows straddle the pairs

    def test_m_step_never_decreases(self, tadpole_basis_510, star_basis_510):
        for basis in (tadpole_basis_510, star_basis_510):
            distinct, _ = collapse_multiplicities(basis.lambdas)
            products = [
                fit_gap_constants(distinct, M).delta * M for M in range(1, 6)
            ]
            assert all(b >= a - 1e-12 for a, b in zip(products, products[1:]))

    def test_repeated_eigenvalues_rejected(self):
        with pytest.raises(GapHypothesisError, match="collapse"):
            fit_gap_constants([1.0, 4.0, 4.0, 9.0], 1)

    def test_requires_enough_values(self):
        with pytest.raises(ValueError):
            fit_gap_constants([1.0, 2.0], 3)

    def test_tadpole_fit(self, tadpole_basis_510):
        distinct, cmap = collapse_multiplicities(tadpole_basis_510.lambdas[:500])
        rep = fit_gap_constants(distinct, 2, collapse_map=cmap)
        assert rep.ok and rep.delta > 1.0
        assert rep.d_tilde <= 1.0 and rep.C_fit > 0
        payload = rep.to_dict()
        assert payload["M"] == 2 and payload["violations"] == []


class TestPartition:
    def test_small_example(self):
        part = partition_classes([0.0, 0.1, 5.0, 10.0], delta=1.0, M=2)
        assert part.classes == ((1, 2), (3,), (4,))

    def test_squares_all_singletons(self):
        lams = [float(k**2) for k in range(1, 30)]
        part = partition_classes(lams, delta=3.0, M=2)
        assert all(size == 1 for size in part.sizes)

    def test_tadpole_pairs_grouped(self, tadpole_basis_510):
        distinct, _ = collapse_multiplicities(tadpole_basis_510.lambdas[:500])
        rep = fit_gap_constants(distinct, 3)
        part = partition_classes(distinct, rep.delta, 3)
        assert max(part.sizes) == 2  # near-coincident pairs from the two scales
        assert all(size <= 2 for size in part.sizes)

    def test_class_overflow_aborts(self):
        lams = [0.0, 0.1, 0.2, 5.0]
        with pytest.raises(GapHypothesisError, match="exceeds"):
            partition_classes(lams, delta=1.0, M=2)

    def test_cross_class_separation_invariant(self, star_basis_510):
        distinct, _ = collapse_multiplicities(star_basis_510.lambdas[:400])
        rep = fit_gap_constants(distinct, 2)
        part = partition_classes(distinct, rep.delta, 2)
        lams = distinct
        for c1, c2 in zip(part.classes, part.classes[1:]):
            assert lams[c2[0] - 1] - lams[c1[-1] - 1] >= rep.delta
        for c in part.classes:
            assert len(c) <= 2  # at most M members
            assert lams[c[-1] - 1] - lams[c[0] - 1] < rep.delta * max(2 - 1, 1)


class TestSmallDivisors:
    def test_single_interval_cosine_never_small(self):
        # roots of sin(x L): |cos| = 1 there, so the weighted minimum is at n = 1
        roots = neumann_star_secular_roots([1.0], 50)
        want = np.pi * np.arange(1, 51)
        assert np.max(np.abs(roots - want)) < 1e-10
        rep = small_divisor_check(roots, [1.0], 0.1)
        assert rep.C_eps == pytest.approx(np.pi**1.1, rel=1e-10)
        assert rep.argmin_root == 1

    def test_two_star_irrational(self):
        lengths = [1.0, np.sqrt(2.0)]
        roots = neumann_star_secular_roots(lengths, 300)
        # for two edges the secular function collapses to sin(x (L1 + L2))
        want = np.arange(1, 301) * np.pi / (1 + np.sqrt(2.0))
        assert np.max(np.abs(roots - want)) < 1e-9
        rep = small_divisor_check(roots, lengths, 0.1)
        assert rep.C_eps > 0.0
        assert rep.n_roots == 300

    def test_rational_ratio_control_case(self):
        # declared-ratio analysis is the failure flag; the numerical minimum
        # over the (1, 1/2) root family stays benign because the cosines cycle
        # through a finite value set
        from qgcontrol.graphs import EdgeLength, ratio_analysis

        rep = ratio_analysis([EdgeLength(1.0, "1/1"), EdgeLength(0.5, "1/2")])
        assert rep.ratios_irrational is False
        roots = neumann_star_secular_roots([1.0, 0.5], 100)
        want = np.arange(1, 101) * np.pi / 1.5
        assert np.max(np.abs(roots - want)) < 1e-9
        div = small_divisor_check(roots, [1.0, 0.5], 0.1)
        assert div.C_eps > 0.0


class TestCrossFamilyGap:
    def test_irrational_families_positive(self):
        rep = dirichlet_cross_family_gap([1.0], [np.sqrt(2.0)], 0.5, 500)
        assert rep.C_emp > 0.0 and rep.coincidences == 0

    def test_identical_families_coincide(self):
        rep = dirichlet_cross_family_gap([1.0, 0.5], [1.0, 0.5], 0.5, 200)
        assert rep.C_emp == 0.0 and rep.coincidences > 0

    def test_rational_ratio_families_coincide(self):
        rep = dirichlet_cross_family_gap([1.0], [2.0], 0.5, 200)
        assert rep.C_emp == 0.0 and rep.coincidences > 0
