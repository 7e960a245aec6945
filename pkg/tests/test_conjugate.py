import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pstsize.conjugate import (
    ArmPrior,
    KnownPrecisionDesign,
    Method,
    PosteriorDelta,
    allocate,
    limiting_pst,
    marginal_delta1_sd,
    posterior_delta,
    prior_prob_superiority,
    pst_closed_form,
    pst_monte_carlo,
    success_margin,
)
from pstsize.errors import DomainError, InfeasibleLayoutError
from pstsize.numerics import RandomStream, std_normal_cdf


def irls(n=100, weight=2.0, delta=4.0, eta=0.975, R=1.0, sd=8.0, shift=0.0):
    return KnownPrecisionDesign(
        tau=1.0 / sd ** 2,
        prior_E=ArmPrior(delta + shift, weight),
        prior_C=ArmPrior(shift, weight),
        eta=eta,
        layout=allocate(n, R),
    )


class TestAllocate:
    @pytest.mark.parametrize("n, R, n_E, n_C", [(128, 1, 64, 64), (100, 1, 50, 50), (90, 2, 60, 30), (7, 1, 4, 3)])
    def test_examples(self, n, R, n_E, n_C):
        lay = allocate(n, R)
        assert (lay.n_E, lay.n_C, lay.n_total) == (n_E, n_C, n)

    def test_empty_arm(self):
        with pytest.raises(InfeasibleLayoutError):
            allocate(2, 100.0)

    @pytest.mark.parametrize("n", [0, 1, 2.5])
    def test_too_small(self, n):
        with pytest.raises(DomainError):
            allocate(n, 1.0)

    @given(n=st.integers(2, 10_000), R=st.floats(0.05, 20))
    def test_invariants(self, n, R):
        try:
            lay = allocate(n, R)
        except InfeasibleLayoutError:
            return
        assert lay.n_E + lay.n_C == n and lay.n_E >= 1 and lay.n_C >= 1
        assert abs(lay.n_E - n * R / (1 + R)) <= 0.5 + 1e-9


class TestPosteriorDelta:
    def test_data_at_prior_means(self):
        d = irls(weight=3.0, delta=2.5, shift=1.0)
        pd = posterior_delta(d, d.prior_E.prior_mean, d.prior_C.prior_mean)
        assert pd.delta1 == pytest.approx(2.5)

    def test_vanishing_prior(self):
        d = irls(weight=1e-12)
        pd = posterior_delta(d, 3.2, 1.1)
        assert pd.delta1 == pytest.approx(2.1, abs=1e-9)

    def test_weights_two_fifty_per_arm(self):
        pd = posterior_delta(irls(n=100, weight=2.0), 0.0, 0.0)
        assert pd.n_E1 == 52 and pd.n_C1 == 52
        assert pd.D1 == 26

    def test_invariants(self):
        d = KnownPrecisionDesign(0.3, ArmPrior(1.0, 2.0), ArmPrior(-0.5, 5.5), 0.9, allocate(30, 2.0))
        pd = posterior_delta(d, 1.7, 0.2)
        assert pd.n_E1 == 2.0 + 20 and pd.n_C1 == 5.5 + 10
        assert pd.D1 == pytest.approx(pd.n_E1 * pd.n_C1 / (pd.n_E1 + pd.n_C1))
        assert pd.delta1 == pytest.approx(pd.mu_E1 - pd.mu_C1, abs=1e-12)

    def test_vectorized(self):
        d = irls()
        pd = posterior_delta(d, np.array([0.0, 4.0]), np.array([0.0, 0.0]))
        assert pd.delta1.shape == (2,)


class TestSuccessMargin:
    def test_zero_at_median_threshold(self):
        pd = PosteriorDelta(delta1=0.0, D1=26, mu_E1=0, mu_C1=0, n_E1=52, n_C1=52)
        assert success_margin(irls(eta=0.5), pd) == 0.0

    def test_negative_effect(self):
        pd = PosteriorDelta(delta1=-0.1, D1=26, mu_E1=0, mu_C1=0.1, n_E1=52, n_C1=52)
        assert success_margin(irls(eta=0.9), pd) < 0

    def test_value(self):
        pd = PosteriorDelta(delta1=4.0, D1=26, mu_E1=4, mu_C1=0, n_E1=52, n_C1=52)
        # 4 * sqrt(26/64) - z_0.975
        assert success_margin(irls(), pd) == pytest.approx(0.58956, abs=1e-4)


class TestPriorProbability:
    def test_symmetric(self):
        assert prior_prob_superiority(irls(delta=0.0)) == 0.5

    def test_weights_two(self):
        assert prior_prob_superiority(irls()) == pytest.approx(0.6915, abs=5e-5)
        assert limiting_pst(irls()) == prior_prob_superiority(irls())

    def test_weights_thirty(self):
        assert prior_prob_superiority(irls(weight=30.0)) == pytest.approx(std_normal_cdf(4 * math.sqrt(15 / 64)))
        assert prior_prob_superiority(irls(weight=30.0)) == pytest.approx(0.9736, abs=5e-4)


class TestClosedForm:
    @pytest.mark.parametrize(
        "n, weight, psi, psi_star",
        [(100, 2.0, 0.55, None), (40, 2.0, 0.46, None), (40, 30.0, 0.75, 0.77)],
    )
    def test_table_examples(self, n, weight, psi, psi_star):
        res = pst_closed_form(irls(n=n, weight=weight))
        assert round(res.psi, 2) == psi
        if psi_star is not None:
            assert round(res.psi_star, 2) == psi_star
        assert res.method is Method.CLOSED_FORM and res.mc is None

    def test_exact_value_n100(self):
        assert pst_closed_form(irls()).psi == pytest.approx(0.5469, abs=5e-5)

    def test_normalization(self):
        res = pst_closed_form(irls(n=60, weight=7.0, delta=3.0))
        assert res.psi_star == res.psi / res.prior_prob

    def test_marginal_sd_per_arm_terms(self):
        d = KnownPrecisionDesign(0.5, ArmPrior(0, 1.0), ArmPrior(0, 4.0), 0.9, allocate(30, 2.0))
        expected = 20 / (0.5 * 1.0 * 21.0) + 10 / (0.5 * 4.0 * 14.0)
        assert marginal_delta1_sd(d) == pytest.approx(math.sqrt(expected))

    def test_invalid_design(self):
        with pytest.raises(DomainError):
            irls(eta=1.0)
        with pytest.raises(DomainError):
            KnownPrecisionDesign(0.0, ArmPrior(0, 1), ArmPrior(0, 1), 0.9, allocate(10))
        with pytest.raises(DomainError):
            ArmPrior(0.0, 0.0)

    @given(shift=st.integers(-10 ** 6, 10 ** 6), n=st.integers(2, 500).map(lambda k: 2 * k))
    @settings(max_examples=50)
    def test_translation_invariance(self, shift, n):
        assert pst_closed_form(irls(n=n, shift=float(shift))).psi == pst_closed_form(irls(n=n)).psi

    @pytest.mark.parametrize("n", [20, 100, 400])
    def test_monotone_in_eta(self, n):
        psis = [pst_closed_form(irls(n=n, eta=eta)).psi for eta in (0.8, 0.9, 0.95, 0.975)]
        assert all(a >= b for a, b in zip(psis, psis[1:]))

    def test_monotone_in_n_at_paper_settings(self):
        psis = [pst_closed_form(irls(n=n)).psi for n in range(4, 2001, 2)]
        assert np.all(np.diff(psis) >= 0)

    def test_approaches_limit(self):
        limit = limiting_pst(irls())
        gaps = [limit - pst_closed_form(irls(n=n)).psi for n in (10 ** 4, 10 ** 5, 10 ** 6, 4 * 10 ** 6, 10 ** 8)]
        assert all(g > 0 for g in gaps)
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
        # the gap shrinks like n^(-1/2): 1.38e-3 at n = 10^6, under 1e-3 from about 2e6 on
        assert gaps[2] == pytest.approx(1.381e-3, abs=1e-5)
        assert gaps[3] < 1e-3
        assert gaps[4] == pytest.approx(1.381e-4, abs=1e-6)


class TestMonteCarlo:
    def test_table_point(self):
        res = pst_monte_carlo(irls(), RandomStream(2012, 100), 10 ** 6)
        assert abs(res.psi - pst_closed_form(irls()).psi) <= 3 * res.std_error
        assert abs(res.psi - 0.5469) <= 0.0015 + 5e-5
        assert res.method is Method.MONTE_CARLO

    def test_shrinks_as_eta_approaches_one(self):
        etas = [0.9, 0.999, 1 - 1e-6, 1 - 1e-10, 1 - 1e-15]
        psis = [pst_monte_carlo(irls(n=20, eta=e), RandomStream(1), 100_000).psi for e in etas]
        assert all(a > b for a, b in zip(psis, psis[1:]))
        # closed form at the last eta is 0.0013
        assert psis[-1] < 0.003

    def test_deterministic(self):
        a = pst_monte_carlo(irls(), RandomStream(5, 1), 50_000)
        b = pst_monte_carlo(irls(), RandomStream(5, 1), 50_000)
        assert a == b

    def test_workers(self):
        a = pst_monte_carlo(irls(), RandomStream(5, 1), 300_000, workers=1)
        b = pst_monte_carlo(irls(), RandomStream(5, 1), 300_000, workers=3)
        assert a == b

    def test_translation_invariant_with_shared_stream(self):
        a = pst_monte_carlo(irls(), RandomStream(5, 1), 50_000)
        b = pst_monte_carlo(irls(shift=100.0), RandomStream(5, 1), 50_000)
        assert a.psi == b.psi

    def test_reps_floor(self):
        from pstsize.errors import ConfigurationError

        with pytest.raises(ConfigurationError):
            pst_monte_carlo(irls(), RandomStream(1), 500)

    GRID = list(
        itertools.islice(
            itertools.product([4.0, 1.0, -1.0, 6.0, 0.0], [2.0, 30.0], [0.975, 0.9], [40, 120], [1.0, 2.0]), 0, None, 4
        )
    )

    @pytest.mark.parametrize("delta, weight, eta, n, R", GRID)
    def test_oracle_equivalence(self, delta, weight, eta, n, R):
        d = irls(n=n, weight=weight, delta=delta, eta=eta, R=R)
        res = pst_monte_carlo(d, RandomStream(77, n), 100_000)
        assert abs(res.psi - pst_closed_form(d).psi) <= 3 * res.std_error

    def test_grid_has_twenty_points(self):
        assert len(self.GRID) == 20
