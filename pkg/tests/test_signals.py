import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from intermittent_es.checks import ConfigurationError
from intermittent_es.signals import (
    DitherBank,
    DitherSignal,
    as_fraction,
    common_period,
    cos_sin_bank,
    dither_value,
    dither_values,
    gamma_matrix,
    lcm_of_inverses,
    validate_dither,
)

OMEGA = 20 * math.pi


def bank(*pairs):
    makers = {"cos": DitherSignal.cosine, "sin": DitherSignal.sine}
    return DitherBank(tuple(makers[kind](k) for kind, k in pairs))


def gamma_oracle(u_i, u_j, T):
    """(omega/T) int_0^T int_0^theta u_j(theta) u_i(s) ds dtheta by adaptive quadrature."""
    val, _ = integrate.dblquad(lambda s, th: u_j(th) * u_i(s), 0.0, T, 0.0, lambda th: th,
                               epsabs=1e-11, epsrel=1e-11)
    return val


def brute_lcm_of_inverses(ks, limit=1000):
    # smallest L on a fine rational grid with L*k integer for all k
    for den in range(1, 60):
        for num in range(1, limit):
            L = Fraction(num, den)
            if all((L * k).denominator == 1 for k in ks):
                yield L
                return


class TestDitherValue:
    def test_cosine_at_zero(self):
        assert dither_value(DitherSignal.cosine(), 0.0) == 1.0

    def test_sine_at_pi(self):
        assert abs(dither_value(DitherSignal.sine(), math.pi)) < 1e-12

    def test_periodicity(self):
        assert dither_value(DitherSignal.cosine(), 2 * math.pi + 0.3) == pytest.approx(math.cos(0.3), abs=1e-15)

    def test_large_phase_is_reduced(self):
        assert dither_value(DitherSignal.sine(), 1000 * 2 * math.pi + 0.7) == pytest.approx(math.sin(0.7), abs=1e-12)

    def test_custom_interpolates_linearly(self):
        d = DitherSignal.custom([0.0, 1.0, 0.0, -1.0])
        assert dither_value(d, math.pi / 4) == pytest.approx(0.5)
        assert dither_value(d, 2 * math.pi - math.pi / 4) == pytest.approx(-0.5)

    def test_custom_empty_table_is_config_error(self):
        with pytest.raises(ConfigurationError):
            dither_value(DitherSignal.custom([]), 0.1)

    def test_vectorised_matches_scalar(self):
        d = DitherSignal.custom(np.sin(np.linspace(0, 2 * np.pi, 17, endpoint=False)))
        phases = np.linspace(-10, 10, 101)
        assert np.allclose(dither_values(d, phases), [dither_value(d, p) for p in phases], atol=1e-14)


class TestRationalK:
    def test_parses_strings_and_decimals(self):
        assert as_fraction("2/3") == Fraction(2, 3)
        assert as_fraction(0.5) == Fraction(1, 2)
        assert as_fraction(3) == Fraction(3)

    @pytest.mark.parametrize("bad", [0, -1, "0/5", "-2/3"])
    def test_nonpositive_k_rejected(self, bad):
        with pytest.raises(ConfigurationError):
            DitherSignal.cosine(bad)

    def test_garbage_rejected(self):
        with pytest.raises(ConfigurationError):
            as_fraction("two")

    def test_bank_needs_two(self):
        with pytest.raises(ConfigurationError):
            DitherBank((DitherSignal.cosine(),))


class TestCommonPeriod:
    def test_unit_multipliers(self):
        assert common_period(bank(("cos", 1), ("sin", 1))) == pytest.approx(2 * math.pi, rel=1e-15)

    def test_one_and_two(self):
        assert common_period(bank(("cos", 1), ("sin", 2))) == pytest.approx(2 * math.pi, rel=1e-15)

    def test_two_thirds_and_one(self):
        assert common_period(bank(("cos", "2/3"), ("sin", 1))) == pytest.approx(6 * math.pi, rel=1e-15)

    @pytest.mark.parametrize("ks", [[1, 1], [1, 2], [Fraction(2, 3), 1], [Fraction(3, 4), Fraction(5, 6)],
                                    [Fraction(1, 2), 3, Fraction(7, 5)]])
    def test_against_brute_force(self, ks):
        want = next(brute_lcm_of_inverses(ks))
        assert lcm_of_inverses(ks) == want

    def test_dithers_are_periodic_in_C(self):
        b = bank(("cos", Fraction(3, 4)), ("sin", Fraction(5, 6)))
        C = common_period(b)
        for d in b:
            for p in (0.1, 1.3, 4.0):
                assert dither_value(d, float(d.k) * (p + C)) == pytest.approx(dither_value(d, float(d.k) * p), abs=1e-12)


class TestGamma:
    def test_cos_sin(self):
        g = gamma_matrix(bank(("cos", 1), ("sin", 1)), OMEGA)
        assert abs(g[0, 1] - 0.5) < 1e-8

    def test_sin_cos(self):
        g = gamma_matrix(bank(("sin", 1), ("cos", 1)), OMEGA)
        assert abs(g[0, 1] + 0.5) < 1e-8

    def test_mismatched_frequencies_vanish(self):
        g = gamma_matrix(bank(("cos", 1), ("sin", 2)), OMEGA)
        assert abs(g[0, 1]) < 1e-8

    @pytest.mark.parametrize("pairs", [
        [("cos", 1), ("sin", 1)],
        [("cos", "2/3"), ("sin", 1)],
        [("sin", 1), ("cos", 2), ("sin", 3)],
    ])
    def test_against_adaptive_quadrature(self, pairs):
        b = bank(*pairs)
        omega = 1.0  # the coefficient does not depend on omega
        T = common_period(b) / omega
        g = gamma_matrix(b, omega)
        for i, di in enumerate(b):
            for j, dj in enumerate(b):
                if i == j:
                    continue
                want = (omega / T) * gamma_oracle(lambda s: dither_value(di, float(di.k) * omega * s),
                                                  lambda s: dither_value(dj, float(dj.k) * omega * s), T)
                assert g[i, j] == pytest.approx(want, abs=1e-8)

    def test_omega_invariance(self):
        b = cos_sin_bank(2)
        a = gamma_matrix(b, 20 * math.pi).entries
        c = gamma_matrix(b, 2002 * math.pi).entries
        assert np.max(np.abs(a - c)) < 1e-8

    def test_quadrature_convergence(self):
        b = bank(("cos", 1), ("sin", 1))
        a = gamma_matrix(b, OMEGA, 256).entries
        c = gamma_matrix(b, OMEGA, 512).entries
        assert np.max(np.abs(a - c)) < 1e-6

    def test_too_few_points(self):
        with pytest.raises(ConfigurationError):
            gamma_matrix(cos_sin_bank(), OMEGA, 32)

    def test_nonpositive_omega(self):
        with pytest.raises(ConfigurationError):
            gamma_matrix(cos_sin_bank(), 0.0)


class TestValidateDither:
    def test_cosine_passes(self):
        assert validate_dither(DitherSignal.cosine()).passed

    def test_constant_fails_zero_mean_only(self):
        r = validate_dither(DitherSignal.custom([1.0] * 32))
        assert not r["zero-mean"].passed
        assert r["bounded"].passed and r["periodic"].passed

    def test_half_sine_table_passes(self):
        samples = 0.5 * np.sin(np.linspace(0, 2 * np.pi, 128, endpoint=False))
        assert validate_dither(DitherSignal.custom(samples)).passed

    def test_out_of_bound_table_fails(self):
        r = validate_dither(DitherSignal.custom([0.0, 2.0, 0.0, -2.0]))
        assert not r["bounded"].passed

    def test_empty_table_reported(self):
        assert not validate_dither(DitherSignal.custom([])).passed
