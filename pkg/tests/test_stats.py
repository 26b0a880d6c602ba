import math
import random

import pytest

from veriloop import stats
from veriloop.stats import (
    DegenerateSample,
    EmptySample,
    NegativeStatistic,
    SampleSizeOutOfRange,
    TooFewGroups,
)

from conftest import kruskal_wallis_oracle


class TestMedian:
    def test_odd(self):
        assert stats.median([3, 1, 2]) == 2

    def test_even_mean_of_middle(self):
        assert stats.median([1, 2, 3, 4]) == 2.5

    def test_singleton(self):
        assert stats.median([5]) == 5

    def test_empty_raises(self):
        with pytest.raises(EmptySample):
            stats.median([])

    def test_permutation_invariance_and_bounds(self):
        rng = random.Random(3)
        for _ in range(200):
            values = [rng.uniform(-5, 5) for _ in range(rng.randint(1, 15))]
            m = stats.median(values)
            shuffled = values[:]
            rng.shuffle(shuffled)
            assert stats.median(shuffled) == m
            assert min(values) <= m <= max(values)


class TestKruskalWallis:
    def test_two_groups_no_ties(self):
        result = stats.kruskal_wallis([[1, 2, 3], [4, 5, 6]])
        assert result.H == pytest.approx(3.8571, abs=1e-4)
        assert result.df == 1
        assert result.p_value == pytest.approx(0.0495, abs=1e-4)

    def test_identical_multisets_give_zero(self):
        result = stats.kruskal_wallis([[1, 2], [2, 1]])
        assert result.H == 0.0
        assert result.p_value == 1.0

    def test_three_groups_with_ties_frozen(self):
        # scipy.stats.kruskal oracle, frozen
        groups = [
            [68, 93, 123, 83, 108, 122],
            [119, 116, 101, 103, 113, 84],
            [70, 68, 54, 73, 81, 68],
        ]
        result = stats.kruskal_wallis(groups)
        assert result.H == pytest.approx(9.207599309153704, abs=1e-9)
        assert result.df == 2
        assert result.p_value == pytest.approx(0.010013714710186188, abs=1e-9)

    def test_matches_first_principles_oracle_with_ties(self):
        rng = random.Random(99)
        for _ in range(100):
            k = rng.randint(2, 4)
            groups = [
                [rng.randint(0, 8) for _ in range(rng.randint(3, 20))] for _ in range(k)
            ]
            pooled = [v for g in groups for v in g]
            if len(set(pooled)) == 1:
                continue
            result = stats.kruskal_wallis(groups)
            assert result.H == pytest.approx(kruskal_wallis_oracle(groups), abs=1e-9)
            assert result.df == k - 1
            assert result.p_value == stats.chi_square_sf(result.H, result.df)

    def test_rank_based_monotone_transform_invariance(self):
        rng = random.Random(4)
        groups = [[rng.uniform(0, 1) for _ in range(8)] for _ in range(3)]
        base = stats.kruskal_wallis(groups)
        transformed = [[math.exp(3 * v) + 1 for v in g] for g in groups]
        again = stats.kruskal_wallis(transformed)
        assert again.H == pytest.approx(base.H, abs=1e-12)
        assert again.df == base.df

    def test_group_order_swap_invariance(self):
        g1, g2 = [1, 5, 2, 2], [4, 4, 7]
        a = stats.kruskal_wallis([g1, g2])
        b = stats.kruskal_wallis([g2, g1])
        assert a.H == pytest.approx(b.H, abs=1e-12)

    def test_h_nonnegative(self):
        rng = random.Random(12)
        for _ in range(200):
            groups = [[rng.randint(0, 3) for _ in range(4)] for _ in range(2)]
            if len({v for g in groups for v in g}) == 1:
                continue
            assert stats.kruskal_wallis(groups).H >= 0.0

    def test_degenerate_and_too_few(self):
        with pytest.raises(DegenerateSample):
            stats.kruskal_wallis([[2, 2], [2, 2]])
        with pytest.raises(TooFewGroups):
            stats.kruskal_wallis([[1, 2, 3]])
        with pytest.raises(EmptySample):
            stats.kruskal_wallis([[1, 2], []])


class TestChiSquareSF:
    # Reference H -> p rows this pipeline must reproduce
    @pytest.mark.parametrize(
        "h,expected",
        [(1.3276, 0.2492), (5.6366, 0.0176), (4.3395, 0.0372), (4.0060, 0.0453)],
    )
    def test_reference_values_df1(self, h, expected):
        assert stats.chi_square_sf(h, 1) == pytest.approx(expected, abs=5e-4)

    def test_at_zero(self):
        for df in range(1, 31):
            assert stats.chi_square_sf(0.0, df) == 1.0

    def test_frozen_scipy_values(self):
        # scipy.stats.chi2.sf oracle, frozen
        cases = [
            (3.8571428571428543, 1, 0.049534613435626915),
            (9.207599309153704, 2, 0.010013714710186188),
            (25.0, 10, 0.005345505487134069),
            (0.5, 5, 0.9921232932326296),
        ]
        for x, df, expected in cases:
            assert stats.chi_square_sf(x, df) == pytest.approx(expected, abs=5e-7)

    def test_monotone_decreasing_in_x(self):
        for df in (1, 3, 9, 30):
            previous = 1.0
            for i in range(1, 200):
                x = i * 0.5
                value = stats.chi_square_sf(x, df)
                assert value <= previous
                previous = value

    def test_normal_identity_df1(self):
        for i in range(0, 251):
            x = i * 0.1
            lhs = stats.chi_square_sf(x, 1)
            rhs = 2.0 * (1.0 - stats.normal_cdf(math.sqrt(x)))
            assert lhs == pytest.approx(rhs, abs=1e-6)

    def test_negative_raises(self):
        with pytest.raises(NegativeStatistic):
            stats.chi_square_sf(-0.1, 1)


class TestNormalCdf:
    def test_symmetry_center(self):
        assert stats.normal_cdf(0.0) == 0.5

    def test_quantile_1_96(self):
        assert stats.normal_cdf(1.96) == pytest.approx(0.9750021048517795, abs=1e-7)

    def test_symmetry_identity(self):
        for z in [0.1, 0.7, 1.3, 2.9, 4.4]:
            assert stats.normal_cdf(z) + stats.normal_cdf(-z) == pytest.approx(1.0, abs=1e-12)


class TestShapiroWilk:
    def test_evenly_spaced_20(self):
        result = stats.shapiro_wilk(list(range(1, 21)))
        assert result.W > 0.94
        # scipy.stats.shapiro oracle, frozen
        assert result.W == pytest.approx(0.9603751832429884, abs=1e-6)
        assert result.p_value == pytest.approx(0.5513717457916771, abs=1e-5)

    def test_discrete_accuracy_sample_is_non_normal(self):
        counts = [24] * 13 + [26] * 4 + [20, 30, 22]
        result = stats.shapiro_wilk([k / 32 for k in counts])
        assert result.p_value < 0.05
        # scipy.stats.shapiro oracle, frozen
        assert result.W == pytest.approx(0.771568894082708, abs=1e-6)

    def test_frozen_scipy_values_across_sizes(self):
        # scipy.stats.shapiro oracle, frozen
        cases = [
            ([2.1, 3.4, 1.9], 0.8479899497487435, 0.23508923424205008),
            ([1.0, 2.0, 3.0, 4.0, 10.0], 0.8357883166461942, 0.1536125843490888),
        ]
        for values, w_expected, p_expected in cases:
            result = stats.shapiro_wilk(values)
            assert result.W == pytest.approx(w_expected, abs=1e-6)
            assert result.p_value == pytest.approx(p_expected, abs=1e-5)

    def test_normalish_sample_not_rejected(self):
        rng = random.Random(21)
        values = [rng.gauss(0, 1) for _ in range(40)]
        result = stats.shapiro_wilk(values)
        assert 0 < result.W <= 1.0
        assert result.p_value > 0.05

    def test_size_bounds(self):
        with pytest.raises(SampleSizeOutOfRange):
            stats.shapiro_wilk([1.0, 2.0])
        with pytest.raises(SampleSizeOutOfRange):
            stats.shapiro_wilk([0.0] * 5001)

    def test_degenerate(self):
        with pytest.raises(DegenerateSample):
            stats.shapiro_wilk([3.0, 3.0, 3.0, 3.0])
