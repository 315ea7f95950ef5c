import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qgcontrol import gaps
from qgcontrol.moments import (
    ControlSignal,
    DividedDifferenceBlock,
    MomentError,
    MomentProblem,
    apply_blocks,
    build_blocks,
    extend_conjugate,
    moment_bound_constant,
    moment_bound_monotone,
    moment_bound_trial_ratios,
    signal_moments,
    solve_moments,
    trace_bound_constant,
)


class TestBlocks:
    def test_singleton_is_one(self):
        b = DividedDifferenceBlock.from_nodes(1, [3.7])
        assert b.matrix.shape == (1, 1) and b.matrix[0, 0] == 1.0

    def test_two_nodes(self):
        b = DividedDifferenceBlock.from_nodes(1, [0.0, 0.1])
        assert np.allclose(b.matrix, [[1.0, -10.0], [0.0, 10.0]], atol=1e-12)

    def test_three_nodes(self):
        b = DividedDifferenceBlock.from_nodes(1, [0.0, 1.0, 3.0])
        assert b.matrix[0, 2] == pytest.approx(1.0 / 3.0)
        assert b.matrix[1, 2] == pytest.approx(-0.5)
        assert b.matrix[2, 2] == pytest.approx(1.0 / 6.0)
        assert b.matrix[1, 0] == 0.0  # strictly upper triangular below the diagonal

    def test_coincident_nodes_rejected(self):
        with pytest.raises(MomentError, match="coincident"):
            DividedDifferenceBlock.from_nodes(1, [1.0, 1.0])

    @settings(max_examples=40, deadline=None)
    @given(
        nodes=st.lists(
            st.floats(-10, 10).map(lambda x: round(x, 4)), min_size=1, max_size=4, unique=True
        )
    )
    def test_inverse_property(self, nodes):
        b = DividedDifferenceBlock.from_nodes(1, sorted(nodes))
        prod = b.matrix @ b.inverse()
        assert np.max(np.abs(prod - np.eye(len(nodes)))) < 1e-10

    def test_clustered_nodes_inverse(self):
        b = DividedDifferenceBlock.from_nodes(1, [100.0, 100.001])
        assert np.max(np.abs(b.matrix @ b.inverse() - np.eye(2))) < 1e-10


class TestApplyBlocks:
    def test_all_singletons_identity(self):
        part = gaps.partition_classes([0.0, 5.0, 10.0], delta=1.0, M=2)
        blocks = build_blocks([0.0, 5.0, 10.0], part)
        x = np.array([1.0 + 2j, -0.5, 3.0])
        assert np.allclose(apply_blocks(blocks, x), x)

    def test_two_by_two_block(self):
        part = gaps.partition_classes([0.0, 0.1], delta=1.0, M=2)
        blocks = build_blocks([0.0, 0.1], part)
        got = apply_blocks(blocks, np.array([1.0, 1.0]))
        assert np.allclose(got, [-9.0, 10.0])

    def test_matches_dense_block_diagonal(self):
        lams = [0.0, 0.05, 3.0, 7.0, 7.04]
        part = gaps.partition_classes(lams, delta=1.0, M=3)
        blocks = build_blocks(lams, part)
        dense = np.zeros((5, 5))
        pos = 0
        for b in blocks:
            n = b.size
            dense[pos : pos + n, pos : pos + n] = b.matrix
            pos += n
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = rng.standard_normal(5) + 1j * rng.standard_normal(5)
            assert np.allclose(apply_blocks(blocks, x), dense @ x, atol=1e-12)

    def test_length_mismatch(self):
        part = gaps.partition_classes([0.0, 5.0], delta=1.0, M=2)
        blocks = build_blocks([0.0, 5.0], part)
        with pytest.raises(ValueError):
            apply_blocks(blocks, np.ones(3))

    def test_trace_bound_controls_h_norm(self, tadpole_basis_510):
        distinct, _ = gaps.collapse_multiplicities(tadpole_basis_510.lambdas[:300])
        rep = gaps.fit_gap_constants(distinct, 3)
        part = gaps.partition_classes(distinct, rep.delta, 3)
        blocks = build_blocks(distinct, part)
        d_tilde = rep.d_tilde
        bound = trace_bound_constant(blocks, d_tilde)
        rng = np.random.default_rng(1)
        k = np.arange(1, len(distinct) + 1, dtype=float)
        for _ in range(10):
            x = (rng.standard_normal(len(distinct)) + 1j * rng.standard_normal(len(distinct)))
            x /= k ** (d_tilde + 0.6)  # a tail-summable h^d sequence
            h_norm = np.linalg.norm(k**d_tilde * x)
            assert np.linalg.norm(apply_blocks(blocks, x)) <= np.sqrt(bound) * h_norm + 1e-12


class TestMomentProblemValidation:
    def test_duplicate_frequencies(self):
        with pytest.raises(MomentError, match="distinct"):
            MomentProblem(np.array([1.0, 1.0]), np.array([0j, 0j]), 1.0)

    def test_zero_frequency_target_must_be_real(self):
        with pytest.raises(MomentError, match="real"):
            MomentProblem(np.array([0.0, 1.0]), np.array([1j, 0j]), 1.0)

    def test_bad_horizon(self):
        with pytest.raises(ValueError):
            MomentProblem(np.array([0.0]), np.array([1.0 + 0j]), 0.0)

    def test_conjugate_extension_drops_zero_duplicate(self):
        om, x = extend_conjugate(np.array([0.0, 1.0]), np.array([2.0, 1.0 + 1j]))
        assert np.allclose(om, [-1.0, 0.0, 1.0])
        assert np.allclose(x, [1.0 - 1j, 2.0, 1.0 + 1j])


class TestSolveMoments:
    def test_single_zero_frequency_constant(self):
        p = MomentProblem(np.array([0.0]), np.array([2.5 + 0j]), 10.0)
        sig = solve_moments(p)
        t = np.linspace(0, 10, 64)
        assert np.allclose(sig.evaluate(t), 0.25, atol=1e-12)

    def test_three_frequency_example(self):
        p = MomentProblem(
            np.array([0.0, 1.0, 2.0]), np.array([1.0, 0.0, 0.0], dtype=complex), 10.0
        )
        sig = solve_moments(p)
        got = signal_moments(sig, p.frequencies)
        assert np.linalg.norm(got - p.targets) < 1e-10
        assert sig.max_imag() < 1e-12
        # independent quadrature oracle
        quad = oracles.quadrature_moments(lambda t: sig.evaluate(t), p.frequencies, 10.0)
        assert np.linalg.norm(quad - p.targets) < 1e-9

    def test_round_trip_random_targets(self):
        rng = np.random.default_rng(11)
        om = np.array([0.0, 1.3, 2.9, 4.4, 7.7])
        x = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        x[0] = x[0].real
        p = MomentProblem(om, x, 12.0)
        sig = solve_moments(p)
        got = signal_moments(sig, om)
        assert np.linalg.norm(got - x) < 1e-10
        assert sig.max_imag() < 1e-12
        assert sig.residual < 1e-10

    def test_gram_positive_definite(self):
        from qgcontrol.moments import _gram

        om, _ = extend_conjugate(np.arange(6, dtype=float), np.ones(6, dtype=complex))
        G = _gram(om, 3.0)
        evals = np.linalg.eigvalsh(G)
        assert evals.min() > 0

    def test_short_horizon_warns(self):
        p = MomentProblem(np.array([0.0, 1.0]), np.array([1.0, 0.0], dtype=complex), 1.0)
        with pytest.warns(UserWarning, match="threshold"):
            solve_moments(p, delta=1.0)

    def test_near_resonant_conditioning_raises(self):
        om = np.array([0.0, 1.0, 1.0 + 1e-9])
        p = MomentProblem(om, np.array([1.0, 0.0, 0.0], dtype=complex), 2.0)
        with pytest.raises(MomentError, match="condition"):
            solve_moments(p)

    def test_minimum_norm_among_interpolants(self):
        # adding any exponential-sum correction with zero moments only grows the norm
        om = np.array([0.0, 2.0, 5.0])
        x = np.array([1.0, 0.5 - 0.2j, -0.3 + 0.1j])
        p = MomentProblem(om, x, 9.0)
        sig = solve_moments(p)
        base = sig.l2_norm()
        rng = np.random.default_rng(2)
        ext = sig.frequencies
        from qgcontrol.moments import _gram

        G = _gram(ext, 9.0)
        for _ in range(5):
            d = rng.standard_normal(len(ext)) + 1j * rng.standard_normal(len(ext))
            # project perturbation onto the zero-moment subspace: G d = 0 component
            # moments of sum c_j e^{-i w_j t} against the same frequencies are G c
            d -= np.linalg.solve(G, G @ d)  # zero vector, so instead use null trick
        # construct a genuine zero-moment perturbation by adding a new frequency pair
        freqs2 = np.concatenate([ext, [11.0, -11.0]])
        G2 = _gram(freqs2, 9.0)
        c2 = np.concatenate([sig.coefficients, [0.05, 0.05]])
        # correct back to the same moments
        rhs = np.zeros(len(freqs2), dtype=complex)
        rhs[: len(ext)] = G2[: len(ext)] @ c2 - G @ sig.coefficients
        corr = np.linalg.lstsq(G2[: len(ext)].T.conj() @ G2[: len(ext)], G2[: len(ext)].T.conj() @ rhs, rcond=None)[0]
        c2 = c2 - corr
        alt_norm = np.sqrt(np.real(c2.conj() @ G2 @ c2))
        assert alt_norm >= base - 1e-9


class TestSignalExports:
    def test_csv_and_json(self, tmp_path):
        p = MomentProblem(np.array([0.0, 1.0]), np.array([1.0, 0.5 + 0.1j]), 8.0)
        sig = solve_moments(p)
        sig.write_csv(tmp_path / "u.csv")
        sig.write_json(tmp_path / "u.json")
        import csv as csv_mod
        import json

        rows = list(csv_mod.DictReader(open(tmp_path / "u.csv")))
        assert float(rows[0]["t"]) == 0.0
        payload = json.loads((tmp_path / "u.json").read_text())
        assert len(payload["frequencies"]) == 3

    def test_sample_grid_density(self):
        p = MomentProblem(np.array([0.0, 1.0]), np.array([1.0, 0.0 + 0j]), 4.0)
        sig = solve_moments(p)
        t, u = sig.sample()
        assert len(t) >= 32 * len(sig.frequencies)


class TestMomentBound:
    def test_single_constant_trial(self):
        # one zero frequency, zero-band trials: g = gamma / sqrt(T), moment = gamma*sqrt(T)
        ratios = moment_bound_trial_ratios([0.0], 4.0, trials=5, seed=1, modes=0)
        assert np.allclose(ratios, 2.0, atol=1e-12)

    def test_square_frequencies_finite(self):
        lams = [float(k**2) for k in range(1, 30)]
        c = moment_bound_constant(lams, 1.0, trials=200, seed=0)
        assert 0 < c < 10.0

    def test_monotone_in_horizon(self):
        lams = [float(k**2) for k in range(1, 20)]
        cs = moment_bound_monotone(lams, [1.0, 2.0, 4.0, 8.0], trials=100, seed=3)
        assert all(b >= a for a, b in zip(cs, cs[1:]))
