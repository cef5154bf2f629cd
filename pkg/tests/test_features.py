"""Calendar features, standardization and polynomial expansion."""

from __future__ import annotations

from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from loadcast.features import (FEATURE_NAMES, FeatureMatrix, PolynomialExpander, Preprocessor,
                               apply_standardizer, expand_polynomial, extract_features, feature_matrix,
                               fit_standardizer)
from loadcast.loadgen import GeneratorConfig, LoadSeries, generate_profile


def one_point(stamp):
    return LoadSeries(np.array([stamp], dtype="datetime64[s]"), [1.0])


def row_of(stamp):
    X = extract_features(one_point(stamp))
    return dict(zip(X.column_names, X.values[0]))


class TestExtract:
    def test_column_order(self):
        X = extract_features(one_point("2024-01-01T00:00:00"))
        assert X.column_names == FEATURE_NAMES
        assert X.shape == (1, 9)

    def test_monday_midnight(self):
        r = row_of("2024-01-01T00:00:00")
        assert r["hour"] == 0 and r["day_of_week"] == 0 and r["is_weekend"] == 0
        assert r["day_of_year"] == 1 and r["month"] == 1
        assert r["sin_hour"] == 0.0 and r["cos_hour"] == 1.0

    def test_saturday_noon(self):
        r = row_of("2024-01-06T12:00:00")
        assert r["is_weekend"] == 1 and r["day_of_week"] == 5
        assert abs(r["sin_hour"]) < 1e-12
        assert r["cos_hour"] == pytest.approx(-1.0, abs=1e-12)

    def test_leap_day_of_year(self):
        assert row_of("2024-12-31T23:00:00")["day_of_year"] == 366
        assert row_of("2023-12-31T23:00:00")["day_of_year"] == 365

    def test_pythagorean_identity(self):
        X = extract_features(generate_profile(GeneratorConfig(end="2023-11-01T00:00:00")))
        v = dict(zip(X.column_names, X.values.T))
        np.testing.assert_allclose(v["sin_hour"] ** 2 + v["cos_hour"] ** 2, 1.0, atol=1e-12)
        np.testing.assert_allclose(v["sin_doy"] ** 2 + v["cos_doy"] ** 2, 1.0, atol=1e-12)

    def test_rows_are_independent(self):
        s = generate_profile(GeneratorConfig(end="2023-10-10T00:00:00"))
        X = extract_features(s)
        for k in (0, 17, len(s) - 1):
            np.testing.assert_array_equal(extract_features(s.slice(k, k + 1)).values[0], X.values[k])

    def test_empty_rejected(self):
        empty = LoadSeries(np.array([], dtype="datetime64[s]"), [])
        with pytest.raises(ValueError):
            extract_features(empty)


class TestFeatureMatrix:
    def test_duplicate_names(self):
        with pytest.raises(ValueError, match="duplicate"):
            FeatureMatrix(("a", "a"), np.zeros((2, 2)))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            FeatureMatrix(("a",), np.zeros((2, 2)))

    def test_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            FeatureMatrix(("a",), np.array([[np.inf]]))


class TestStandardizer:
    def test_two_point(self):
        s = fit_standardizer(feature_matrix([[1.0], [3.0]]))
        assert s.means[0] == 2.0 and s.stddevs[0] == 1.0

    def test_constant_column(self):
        X = feature_matrix([[5.0], [5.0], [5.0]])
        s = fit_standardizer(X)
        assert s.means[0] == 5.0 and s.stddevs[0] == 1.0
        np.testing.assert_array_equal(apply_standardizer(s, X).values, 0.0)

    def test_population_std(self):
        s = fit_standardizer(feature_matrix([[0.0], [0.0], [6.0], [6.0]]))
        assert s.means[0] == 3.0 and s.stddevs[0] == 3.0

    def test_direct_formula(self):
        s = fit_standardizer(feature_matrix([[1.0], [3.0]]))
        assert apply_standardizer(s, feature_matrix([[3.0]])).values[0, 0] == 1.0

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            fit_standardizer(feature_matrix([[1.0]]))

    def test_column_mismatch(self):
        s = fit_standardizer(feature_matrix(np.ones((3, 2))))
        with pytest.raises(ValueError):
            apply_standardizer(s, feature_matrix(np.ones((3, 3))))
        with pytest.raises(ValueError, match="order"):
            apply_standardizer(s, feature_matrix(np.ones((3, 2)), ("x1", "x0")))

    @given(arrays(np.float64, st.tuples(st.integers(2, 40), st.integers(1, 5)),
                  elements=st.floats(-1e3, 1e3, allow_nan=False)))
    @settings(max_examples=100, deadline=None)
    def test_unit_moments_and_round_trip(self, values):
        X = feature_matrix(values)
        s = fit_standardizer(X)
        Z = apply_standardizer(s, X).values
        assert np.all(np.abs(Z.mean(axis=0)) <= 1e-10 * max(1.0, np.abs(values).max()))
        spread = np.ptp(values, axis=0)
        for j in np.flatnonzero(spread > 1e-6 * (1.0 + np.abs(values).max())):
            assert Z[:, j].var() == pytest.approx(1.0, abs=1e-10)
        back = s.inverse(apply_standardizer(s, X)).values
        np.testing.assert_allclose(back, values, rtol=0, atol=1e-10 * (1.0 + np.abs(values).max()))

    def test_dict_round_trip(self):
        s = fit_standardizer(extract_features(generate_profile(GeneratorConfig(end="2023-10-05T00:00:00"))))
        t = type(s).from_dict(s.to_dict())
        np.testing.assert_array_equal(t.means, s.means)
        np.testing.assert_array_equal(t.stddevs, s.stddevs)


class TestPolynomial:
    def test_p2_counts_and_values(self):
        e = PolynomialExpander(("a", "b"))
        out = expand_polynomial(e, feature_matrix([[2.0, 3.0]], ("a", "b")))
        assert out.values[0].tolist() == [2.0, 3.0, 4.0, 6.0, 9.0]
        assert out.column_names == ("a", "b", "a^2", "a*b", "b^2")

    def test_default_width(self):
        e = PolynomialExpander(FEATURE_NAMES)
        assert len(e.output_names) == 54

    @pytest.mark.parametrize("p,degree", [(1, 1), (3, 2), (4, 3), (9, 2), (2, 4)])
    def test_combinatorial_count(self, p, degree):
        e = PolynomialExpander(tuple(f"x{j}" for j in range(p)), degree)
        assert len(e.terms) == comb(p + degree, degree) - 1
        pure = PolynomialExpander(tuple(f"x{j}" for j in range(p)), degree, include_interactions=False)
        assert len(pure.terms) == p * degree

    def test_no_constant_column(self):
        e = PolynomialExpander(("a", "b"))
        out = expand_polynomial(e, feature_matrix(np.zeros((3, 2)), ("a", "b")))
        np.testing.assert_array_equal(out.values, 0.0)

    def test_name_mismatch(self):
        with pytest.raises(ValueError):
            expand_polynomial(PolynomialExpander(("a", "b")), feature_matrix(np.ones((1, 2)), ("b", "a")))

    def test_bad_degree(self):
        with pytest.raises(ValueError):
            PolynomialExpander(("a",), degree=0)


class TestPreprocessor:
    def test_fit_transform_is_expand_of_standardized(self):
        s = generate_profile(GeneratorConfig(end="2023-10-20T00:00:00"))
        X = extract_features(s)
        pre = Preprocessor.fit(X)
        Z = pre.transform(X)
        assert Z.shape == (len(s), 54)
        std = apply_standardizer(fit_standardizer(X), X)
        np.testing.assert_array_equal(Z.values, expand_polynomial(PolynomialExpander(FEATURE_NAMES), std).values)

    def test_train_state_reused_on_test(self):
        s = generate_profile(GeneratorConfig(end="2023-10-20T00:00:00"))
        X = extract_features(s)
        pre = Preprocessor.fit(X.rows(slice(0, 300)))
        tail = X.rows(slice(300, None))
        np.testing.assert_array_equal(pre.transform(tail).values, pre.transform(X).values[300:])

    def test_dict_round_trip(self):
        X = extract_features(generate_profile(GeneratorConfig(end="2023-10-05T00:00:00")))
        pre = Preprocessor.fit(X)
        again = Preprocessor.from_dict(pre.to_dict())
        np.testing.assert_array_equal(again.transform(X).values, pre.transform(X).values)
