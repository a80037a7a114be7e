import math

import numpy as np
import pytest

from bdfpt import (
    SpectrumError,
    bessel_like,
    eigenvalues,
    exact_mean_hitting,
    from_table,
    imitation,
    ornstein_uhlenbeck,
    sqrt_linearity,
    truncate,
    write_spectrum_csv,
)

# closed-form 2x2 eigensolve of [[100, -100], [-10, 100]]
OU10_N2_EIGS = (100.0 - math.sqrt(1000.0), 100.0 + math.sqrt(1000.0))


from oracles import charpoly_roots, det_tridiagonal, random_generator


class TestTruncate:
    def test_single_state(self):
        gen = truncate(ornstein_uhlenbeck(10), 1)
        assert gen.size == 1
        np.testing.assert_array_equal(gen.diag, [100.0])

    def test_two_states(self):
        gen = truncate(ornstein_uhlenbeck(10), 2)
        np.testing.assert_array_equal(gen.diag, [100.0, 100.0])
        np.testing.assert_array_equal(gen.upper, [100.0])
        np.testing.assert_array_equal(gen.lower, [10.0])

    def test_dense_matrix_layout(self):
        gen = truncate(ornstein_uhlenbeck(10), 2)
        np.testing.assert_array_equal(gen.dense(), [[100.0, -100.0], [-10.0, 100.0]])

    @pytest.mark.parametrize("n", [0, 11, -3])
    def test_rejects_out_of_range(self, n):
        with pytest.raises(ValueError):
            truncate(ornstein_uhlenbeck(10), n)


class TestEigenvalues:
    def test_one_by_one(self):
        eig = eigenvalues(truncate(ornstein_uhlenbeck(10), 1))
        np.testing.assert_allclose(eig, [100.0], rtol=1e-14)

    def test_two_by_two_closed_form(self):
        eig = eigenvalues(truncate(ornstein_uhlenbeck(10), 2))
        np.testing.assert_allclose(eig, OU10_N2_EIGS, rtol=1e-10)

    def test_product_matches_determinant_recurrence(self):
        rng = np.random.default_rng(1234)
        for _ in range(50):
            gen = random_generator(rng, 5)
            eig = eigenvalues(gen)
            log_det, sign = det_tridiagonal(gen)
            assert sign > 0
            assert np.sum(np.log(eig)) == pytest.approx(log_det, rel=1e-8, abs=1e-8)

    def test_matches_charpoly_root_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(25):
            gen = random_generator(rng, 5)
            np.testing.assert_allclose(eigenvalues(gen), charpoly_roots(gen), rtol=1e-8)

    def test_symmetrization_is_similarity_invariant(self):
        # eigenvalues of the nonsymmetric truncation equal those of the
        # symmetrized matrix: compare against the dense nonsymmetric solve
        rng = np.random.default_rng(7)
        for _ in range(20):
            gen = random_generator(rng, 6)
            np.testing.assert_allclose(
                eigenvalues(gen),
                np.sort(np.linalg.eigvals(gen.dense()).real),
                rtol=1e-8,
            )

    @pytest.mark.parametrize(
        "spec",
        [ornstein_uhlenbeck(60), imitation(1.0, 60), bessel_like(0.5, 60)],
        ids=lambda s: s.label,
    )
    def test_cauchy_interlacing(self, spec):
        prev = eigenvalues(truncate(spec, 1))
        for n in range(2, 51):
            cur = eigenvalues(truncate(spec, n))
            assert np.all(cur[:-1] <= prev * (1 + 1e-12))
            assert np.all(prev <= cur[1:] * (1 + 1e-12))
            prev = cur

    @pytest.mark.parametrize(
        "spec,n",
        [
            (ornstein_uhlenbeck(1000), 450),
            (ornstein_uhlenbeck(1000), 700),
            (imitation(0.5, 1000), 300),
            (bessel_like(0.5, 1000), 300),
        ],
        ids=["ou450", "ou700-tiny-lam1", "imit300", "bessel300"],
    )
    def test_slowest_rate_bounded_by_inverse_mean(self, spec, n):
        eig = eigenvalues(truncate(spec, n))
        mean = exact_mean_hitting(spec, n)
        assert eig[0] <= (1.0 / mean) * (1 + 1e-10)

    @pytest.mark.parametrize(
        "spec,n",
        [
            (ornstein_uhlenbeck(1000), 300),
            (ornstein_uhlenbeck(1000), 700),
            (imitation(0.5, 1000), 450),
            (bessel_like(1.5, 1000), 200),
        ],
        ids=["ou300", "ou700", "imit450", "bessel1.5-200"],
    )
    def test_keilson_mean_identity(self, spec, n):
        # independent check of full-spectrum relative accuracy: the hitting
        # mean equals the difference of reciprocal-eigenvalue sums for
        # consecutive truncations, including barrier cases with lam1 ~ 1e-32
        mean_spectral = np.sum(1.0 / eigenvalues(truncate(spec, n))) - np.sum(
            1.0 / eigenvalues(truncate(spec, n - 1))
        )
        assert mean_spectral == pytest.approx(exact_mean_hitting(spec, n), rel=1e-9)

    def test_tiny_barrier_eigenvalue_is_resolved(self):
        # absorption across the OU probability barrier: lam1 far below the
        # absolute noise floor of a dense solver must still come out positive
        eig = eigenvalues(truncate(ornstein_uhlenbeck(1000), 700))
        assert 0 < eig[0] < 1e-25
        assert eig[1] == pytest.approx(2000.0, rel=1e-6)

    def test_decoupled_block_spectrum(self):
        # a clamped down-rate cuts the matrix; the isolated state contributes
        # its own diagonal entry as an eigenvalue
        spec = bessel_like(2.5, 1000)
        assert spec.death_rate[1] == 0.0  # the cut
        gen = truncate(spec, 300)
        eig = eigenvalues(gen)
        assert eig.size == 300
        assert np.all(eig > 0)
        # block [0,0] is 1x1 with eigenvalue birth[0]
        assert np.any(np.isclose(eig, spec.birth_rate[0], rtol=1e-12))

    def test_no_absorption_raises(self):
        # birth cut below the threshold: no path to the absorbing state
        spec = from_table([1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 1.0, 1.0])
        with pytest.raises((SpectrumError, ValueError)):
            eigenvalues(truncate(spec, 3))


class TestSqrtLinearity:
    def test_perfect_squares(self):
        rep = sqrt_linearity(np.array([1.0, 4.0, 9.0, 16.0, 25.0]))
        assert rep.sqrt_fit_slope == pytest.approx(1.0, abs=1e-12)
        assert rep.sqrt_fit_intercept == pytest.approx(0.0, abs=1e-10)
        assert rep.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_default_window_is_central_20_80(self):
        rep = sqrt_linearity(np.linspace(1.0, 2.0, 100))
        assert rep.fit_window == (20, 80)

    def test_ou_n450_strongly_linear(self):
        eig = eigenvalues(truncate(ornstein_uhlenbeck(1000), 450))
        rep = sqrt_linearity(eig)
        assert rep.r_squared >= 0.99

    def test_rejects_short_window(self):
        with pytest.raises(ValueError):
            sqrt_linearity(np.array([1.0, 4.0, 9.0, 16.0]), window=(2, 3))

    def test_rejects_too_few_eigenvalues(self):
        with pytest.raises(ValueError):
            sqrt_linearity(np.array([1.0, 4.0, 9.0]))

    def test_report_json_fields(self):
        import json

        rep = sqrt_linearity(np.array([1.0, 4.0, 9.0, 16.0, 25.0]))
        data = json.loads(rep.to_json())
        assert set(data) == {
            "eigenvalues",
            "sqrt_fit_slope",
            "sqrt_fit_intercept",
            "fit_window",
            "r_squared",
            "residuals",
        }
        assert 0.0 <= data["r_squared"] <= 1.0


def test_spectrum_csv_format(tmp_path):
    path = tmp_path / "spec.csv"
    write_spectrum_csv([1.0, 4.0], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "rank,eigenvalue,sqrt_eigenvalue"
    assert lines[1] == "1,1.0,1.0"
    assert lines[2] == "2,4.0,2.0"
