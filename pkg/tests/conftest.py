"""Shared independent oracles for the test suite.

These deliberately avoid the library's own evaluation paths: probabilities
come from exhaustive enumeration over report sequences, detection curves from
numerical quadrature of the underlying densities, and stationary vectors from
fixed-point iteration.  Expected values asserted in the tests are frozen from
these oracles, not from the code under test.
"""

import itertools
import math

import numpy as np
from scipy import integrate, stats


def quad_false_alarm(theta: float, epsilon: int) -> float:
    """Upper tail of the central chi-square energy statistic via quadrature."""
    if theta == 0.0:
        return 1.0

    def density(u):
        return u ** (epsilon - 1) * math.exp(-u) / math.gamma(epsilon)

    value, _ = integrate.quad(density, theta / 2.0, np.inf, limit=400)
    return value


def quad_detection(theta: float, epsilon: int, gamma: float) -> float:
    """Rayleigh-averaged detection: noncentral chi-square tail integrated
    against the exponential SNR density (slow fading)."""

    def integrand(g):
        return stats.ncx2.sf(theta, 2 * epsilon, 2.0 * g) * math.exp(-g / gamma) / gamma

    value, _ = integrate.quad(integrand, 0.0, np.inf, limit=400)
    return value


def enum_fusion_prob(n_u: int, kappa: int, p_one: float) -> float:
    """P(at least kappa ones) by summing over all 2^n_u report sequences."""
    total = 0.0
    for bits in itertools.product((0, 1), repeat=n_u):
        if sum(bits) >= kappa:
            total += math.prod(p_one if b else 1.0 - p_one for b in bits)
    return total


def report_stop_position(bits, kappa: int) -> int:
    """Slot index at which truncated reporting halts for this bit sequence."""
    n_u = len(bits)
    nu = n_u - kappa + 1
    ones = zeros = 0
    for pos, bit in enumerate(bits, start=1):
        ones += bit
        zeros += 1 - bit
        if ones == kappa or zeros == nu:
            return pos
    raise AssertionError("a full sequence always hits a stopping rule")


def enum_expected_report_bits(n_u: int, kappa: int, q_p: float, p10: float, p11: float) -> float:
    """Exact expected truncated-report length by exhaustive enumeration."""
    total = 0.0
    for pu_state, weight in ((0, 1.0 - q_p), (1, q_p)):
        p_one = p11 if pu_state else p10
        for bits in itertools.product((0, 1), repeat=n_u):
            prob = weight * math.prod(p_one if b else 1.0 - p_one for b in bits)
            total += prob * report_stop_position(bits, kappa)
    return total


def corrupted(p: float, p_e: float) -> float:
    return (1.0 - p_e) * p + p_e * (1.0 - p)
