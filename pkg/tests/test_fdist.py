import pytest

from romkit.fdist import f_cdf, f_quantile

from oracles import f_cdf_quadrature, f_quantile_quadrature

DF_GRID = (1, 5, 24, 48, 120)
P_GRID = (0.025, 0.5, 0.975)


class TestFCdf:
    def test_zero_and_negative(self):
        assert f_cdf(0.0, 3, 7) == 0.0
        assert f_cdf(-2.0, 3, 7) == 0.0

    def test_against_quadrature(self):
        for x in (0.1, 0.5, 1.0, 2.5, 10.0):
            for d1, d2 in ((2, 9), (5, 5), (24, 48)):
                assert f_cdf(x, d1, d2) == pytest.approx(
                    f_cdf_quadrature(x, d1, d2), abs=1e-10)

    def test_bad_df(self):
        with pytest.raises(ValueError):
            f_cdf(1.0, 0, 5)


class TestFQuantile:
    def test_median_equal_df_is_one(self):
        for d in DF_GRID:
            assert f_quantile(0.5, d, d) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("p", P_GRID)
    @pytest.mark.parametrize("df1", DF_GRID)
    @pytest.mark.parametrize("df2", DF_GRID)
    def test_cdf_round_trip(self, p, df1, df2):
        x = f_quantile(p, df1, df2)
        assert f_cdf(x, df1, df2) == pytest.approx(p, abs=1e-8)

    @pytest.mark.parametrize("p", P_GRID)
    @pytest.mark.parametrize("df1", DF_GRID)
    @pytest.mark.parametrize("df2", DF_GRID)
    def test_reciprocal_identity(self, p, df1, df2):
        prod = f_quantile(p, df1, df2) * f_quantile(1 - p, df2, df1)
        assert prod == pytest.approx(1.0, abs=1e-8)

    def test_against_quadrature_oracle(self):
        ours = f_quantile(0.975, 24, 48)
        oracle = f_quantile_quadrature(0.975, 24, 48)
        assert ours == pytest.approx(oracle, abs=1e-8)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            f_quantile(0.5, -1, 5)
        with pytest.raises(ValueError):
            f_quantile(1.0, 5, 5)
        with pytest.raises(ValueError):
            f_quantile(0.0, 5, 5)
