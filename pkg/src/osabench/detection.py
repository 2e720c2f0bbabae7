"""Energy-detection receiver operating characteristics for one sensing node.

The sensed PU channel is AWGN with Rayleigh fading.  With detection threshold
``theta`` and time-bandwidth product ``epsilon`` the per-node probabilities are

* false alarm   ``p10 = Gamma(epsilon, theta/2) / Gamma(epsilon)`` (regularized
  upper incomplete gamma), and
* detection     ``p11 = Q(eps-1, theta/2)
  + ((1+g)/g)^(eps-1) * exp(-theta/(2(1+g))) * P(eps-1, theta*g/(2(1+g)))``

for linear SNR ``g`` and ``epsilon > 1``; for ``epsilon = 1`` the detection
probability collapses to ``exp(-theta/(2(1+g)))``.  The ``p11`` form above is
an algebraically equivalent, cancellation-free rewrite of the textbook
"finite Poisson sum plus scaled correction" expression: the correction bracket
equals ``exp(-theta/(2(1+g)))`` times a regularized *lower* incomplete gamma,
which we evaluate in log space so the ``((1+g)/g)^(eps-1)`` growth never
overflows even for time-bandwidth products in the thousands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import optimize

from .errors import NumericalInstabilityError, ValidationError

_EPS = 2.0 * 2.220446049250313e-16
_TINY = 1.0e-300
_MAX_ITER = 2_000_000


def _log_prefactor(a: float, x: float) -> float:
    """log(x^a * exp(-x) / Gamma(a)), evaluated without large-argument rounding.

    A naive ``a*log(x) - x - lgamma(a)`` loses ~a*ulp of absolute precision for
    large ``a``; rewriting through Stirling keeps the dominant part as
    ``-a * (t - log1p(t))`` with ``t = (x - a)/a``, which is accurate relative
    to its own size.
    """
    if a < 10.0:
        return -x + a * math.log(x) - math.lgamma(a)
    t = (x - a) / a
    if abs(t) < 0.5:
        # t - log1p(t) = sum_{k>=2} (-1)^k t^k / k, no cancellation near t=0
        d = 0.0
        power = t * t
        k = 2.0
        while True:
            term = power / k
            d += term
            if abs(term) < abs(d) * _EPS:
                break
            power *= -t
            k += 1.0
    else:
        d = t - math.log1p(t)
    # Stirling correction phi(a) = lgamma(a) - [(a-1/2)ln a - a + ln(2*pi)/2]
    inv2 = 1.0 / (a * a)
    phi = (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - inv2 / 1680.0) * inv2) * inv2) / a
    return -a * d + 0.5 * math.log(a / (2.0 * math.pi)) - phi


def _gamma_p_series(a: float, x: float) -> tuple[float, float]:
    """Lower-gamma power series; returns (series sum, log prefactor).

    ``P(a, x) = sum * exp(log_prefactor)``.  Valid for ``x < a + 1``.
    """
    total = 1.0 / a
    term = total
    denom = a
    for _ in range(_MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise NumericalInstabilityError(f"gamma series stalled at a={a}, x={x}")
    return total, _log_prefactor(a, x)


def _gamma_q_cf(a: float, x: float) -> float:
    """Upper-gamma continued fraction (modified Lentz).  Valid for x >= a + 1."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b if b != 0.0 else 1.0 / _TINY
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise NumericalInstabilityError(f"gamma continued fraction stalled at a={a}, x={x}")
    return h * math.exp(_log_prefactor(a, x))


def reg_upper_gamma(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = Gamma(a, x)/Gamma(a)."""
    if a <= 0.0:
        raise ValidationError("gamma shape parameter must be positive")
    if x < 0.0:
        raise ValidationError("gamma argument must be nonnegative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        total, log_pref = _gamma_p_series(a, x)
        return 1.0 - total * math.exp(log_pref)
    return _gamma_q_cf(a, x)


def log_reg_lower_gamma(a: float, x: float) -> float:
    """log of the regularized lower incomplete gamma P(a, x).

    Stays finite (rather than underflowing to log(0)) deep in the left tail,
    which is what the detection-probability correction term needs.
    """
    if a <= 0.0:
        raise ValidationError("gamma shape parameter must be positive")
    if x < 0.0:
        raise ValidationError("gamma argument must be nonnegative")
    if x == 0.0:
        return -math.inf
    if x < a + 1.0:
        total, log_pref = _gamma_p_series(a, x)
        return math.log(total) + log_pref
    return math.log1p(-_gamma_q_cf(a, x))


def _check_epsilon(epsilon) -> int:
    eps = int(epsilon)
    if eps != epsilon or eps < 1:
        raise ValidationError(f"time-bandwidth product must be an integer >= 1, got {epsilon}")
    return eps


def false_alarm_prob(theta: float, epsilon: int) -> float:
    """Per-node false alarm probability p10 of the energy detector."""
    eps = _check_epsilon(epsilon)
    if theta < 0.0:
        raise ValidationError("detection threshold must be nonnegative")
    return reg_upper_gamma(eps, theta / 2.0)


def detection_prob(theta: float, epsilon: int, gamma: float) -> float:
    """Per-node detection probability p11 under Rayleigh fading.

    ``gamma`` is the linear mean SNR of the PU signal.
    """
    eps = _check_epsilon(epsilon)
    if theta < 0.0:
        raise ValidationError("detection threshold must be nonnegative")
    if gamma <= 0.0:
        raise ValidationError("linear SNR must be positive")
    if theta == 0.0:
        return 1.0
    ratio = gamma / (1.0 + gamma)
    log_faded_tail = -theta * (1.0 - ratio) / 2.0  # log of exp(-theta/(2(1+gamma)))
    if eps == 1:
        return math.exp(log_faded_tail)
    head = reg_upper_gamma(eps - 1, theta / 2.0)
    log_scale = -(eps - 1) * math.log(ratio)
    log_corr = log_reg_lower_gamma(eps - 1, theta * ratio / 2.0)
    value = head + math.exp(log_scale + log_faded_tail + log_corr)
    if not math.isfinite(value):
        raise NumericalInstabilityError(
            f"detection probability not finite at theta={theta}, eps={eps}, gamma={gamma}"
        )
    if value > 1.0:
        if value > 1.0 + 1e-12:
            raise NumericalInstabilityError(
                f"detection probability {value} exceeds 1 beyond rounding tolerance"
            )
        value = 1.0
    return value


def threshold_for_false_alarm(p10_target: float, epsilon: int) -> float:
    """Invert the false alarm curve: theta with p10(theta) = p10_target.

    Uses the strict monotonicity of p10 in theta with a bracketed root find.
    """
    eps = _check_epsilon(epsilon)
    if not 0.0 < p10_target <= 1.0:
        raise ValidationError("false alarm target must lie in (0, 1]")
    if p10_target == 1.0:
        return 0.0

    def shortfall(theta):
        return false_alarm_prob(theta, eps) - p10_target

    hi = 2.0 * (eps + 10.0 * math.sqrt(eps) + 20.0)
    for _ in range(200):
        if shortfall(hi) < 0.0:
            break
        hi *= 2.0
    else:
        raise NumericalInstabilityError("could not bracket the false alarm threshold")
    return optimize.brentq(shortfall, 0.0, hi, xtol=1e-12, rtol=8.9e-16, maxiter=200)


@dataclass(frozen=True)
class PhyParams:
    """Sensing-radio and detector parameters for a single node.

    ``gamma`` is a linear SNR ratio; dB inputs are converted once at the
    configuration boundary (see ``RadioScene.gamma``).
    """

    t_e: float
    alpha: float
    M: int
    b: float
    gamma: float
    theta: float

    def __post_init__(self):
        problems = []
        if not (0.0 < self.alpha <= 1.0) or self.alpha * self.M < 1.0 - 1e-12:
            problems.append("alpha must satisfy 1/M <= alpha <= 1")
        if self.t_e <= 0.0:
            problems.append("observation time t_e must be positive")
        if self.theta < 0.0:
            problems.append("threshold theta must be nonnegative")
        if self.gamma <= 0.0:
            problems.append("linear SNR gamma must be positive")
        if not problems and self.epsilon < 1:
            problems.append(
                f"time-bandwidth product floor(t_e*alpha*M*b) = {self.epsilon} < 1"
            )
        if problems:
            raise ValidationError("invalid PhyParams", problems)

    @property
    def epsilon(self) -> int:
        """Time-bandwidth product floor(t_e * alpha * M * b)."""
        return int(math.floor(self.t_e * self.alpha * self.M * self.b + 1e-9))

    @property
    def collected_gamma(self) -> float:
        """SNR accumulated over the observation: epsilon * gamma.

        ``gamma`` is the received SNR per unit of time-bandwidth product; a
        longer observation collects proportionally more signal energy against
        the same noise level (slow fading over one sensing window), which is
        what makes the false-alarm rate improve with sensing time at a fixed
        detection requirement.
        """
        return self.epsilon * self.gamma


@dataclass(frozen=True)
class NodeDetectionProbs:
    """Per-node sensing outcome probabilities (conditional on PU state)."""

    p10: float
    p11: float

    def __post_init__(self):
        if not (0.0 <= self.p10 <= 1.0 and 0.0 <= self.p11 <= 1.0):
            raise ValidationError("sensing probabilities must lie in [0, 1]")

    @property
    def p00(self) -> float:
        return 1.0 - self.p10

    @property
    def p01(self) -> float:
        return 1.0 - self.p11


def node_probs(phy: PhyParams) -> NodeDetectionProbs:
    """Evaluate the detector operating point implied by ``phy``."""
    eps = phy.epsilon
    return NodeDetectionProbs(
        p10=false_alarm_prob(phy.theta, eps),
        p11=detection_prob(phy.theta, eps, phy.collected_gamma),
    )
