"""Cooperative sensing MAC: grouping, measurement reporting, fusion, timing.

Users and channels are split into ``n_g`` balanced sub-groups.  Each group
senses its channels, the members report one-bit decisions over a shared
reporting phase (TDMA, truncated TDMA, acknowledged truncated TDMA, or a
single boosted slot), and the group fuses the reports with a
"kappa out of n" vote.  This module turns those choices into the
network-wide operating point: fused false-alarm/detection probabilities and
the quiet-time budget (sensing plus reporting microseconds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .detection import NodeDetectionProbs, PhyParams, node_probs
from .errors import ValidationError


class ReportingScheme(Enum):
    """Multiple-access discipline of the measurement reporting phase."""

    TDMA = "tdma"
    TTDMA = "ttdma"
    KAPPA_TTDMA = "kttdma"
    SSMA = "ssma"


@dataclass(frozen=True)
class GroupLayout:
    """Balanced partition of channels and users into sensing sub-groups."""

    n_g: int
    groups: tuple[tuple[int, int], ...]  # (channels sensed, users) per group

    @property
    def min_users(self) -> int:
        return min(n_u for _, n_u in self.groups)

    @property
    def max_channels(self) -> int:
        return max(m_s for m_s, _ in self.groups)


@dataclass(frozen=True)
class FusionConfig:
    """Vote threshold and reporting-channel conditions for decision fusion."""

    kappa: int
    p_e: float = 0.0
    q_p: float = 0.0

    def __post_init__(self):
        problems = []
        if self.kappa < 1:
            problems.append("kappa must be at least 1")
        if not 0.0 <= self.p_e < 1.0:
            problems.append("p_e must lie in [0, 1)")
        if not 0.0 <= self.q_p <= 1.0:
            problems.append("q_p must lie in [0, 1]")
        if problems:
            raise ValidationError("invalid FusionConfig", problems)


@dataclass(frozen=True)
class DetectionSummary:
    """Network-wide sensing operating point and its time budget."""

    p_f: float
    p_d: float
    m_bar_s: int     # sensing cycles
    m_bar_r: float   # expected report bits, network total
    t_s: float       # sensing time, us
    t_r: float       # reporting time, us
    t_q: float       # quiet time, us
    t_d: float       # detection delay, us
    t_a: float       # one-bit report transmit time, us


def fixed_operating_point(p_f: float, p_d: float, t_q: float) -> DetectionSummary:
    """Summary for experiments that posit (p_f, p_d, t_q) without a sensing stack."""
    return DetectionSummary(
        p_f=p_f, p_d=p_d, m_bar_s=0, m_bar_r=0.0,
        t_s=0.0, t_r=0.0, t_q=t_q, t_d=t_q, t_a=0.0,
    )


def group_layout(M: int, N: int, n_g: int) -> GroupLayout:
    """Split ``M`` channels and ``N`` users into ``n_g`` balanced groups.

    Groups carrying the extra channel and the extra user are aligned in index
    order, so larger groups come first and layouts are reproducible.
    """
    if not 1 <= n_g <= min(M, N):
        raise ValidationError(f"n_g must lie in [1, min(M, N)] = [1, {min(M, N)}], got {n_g}")
    base_m, extra_m = divmod(M, n_g)
    base_n, extra_n = divmod(N, n_g)
    groups = tuple(
        (base_m + (1 if i < extra_m else 0), base_n + (1 if i < extra_n else 0))
        for i in range(n_g)
    )
    return GroupLayout(n_g=n_g, groups=groups)


def sensing_cycles(layout: GroupLayout, alpha: float, M: int) -> int:
    """Sequential scans needed for the widest group: ceil(max m_s / (alpha*M)).

    A radio narrower than the group's band scans sequentially; even a wider
    radio still spends one cycle.
    """
    if alpha * M < 1.0 - 1e-12:
        raise ValidationError("sensing radio narrower than one channel (alpha*M < 1)")
    return max(1, math.ceil(layout.max_channels / (alpha * M) - 1e-9))


def _ttdma_expected_stop(n_u: int, kappa: int, q_p: float, probs: NodeDetectionProbs) -> float:
    """Mean reporting bits per channel for the truncated scheme.

    Reporting halts at the kappa-th "busy" bit or at the (n_u - kappa + 1)-th
    "idle" bit, whichever comes first.  For kappa >= n_u/2 the count is done on
    the complementary symbol; both branches evaluate to the same expectation.
    """
    if kappa < n_u / 2.0:
        stop, p_zero, p_one = kappa, (probs.p00, probs.p01), (probs.p10, probs.p11)
    else:
        stop = n_u - kappa + 1
        p_zero, p_one = (probs.p10, probs.p11), (probs.p00, probs.p01)
    nu = n_u - stop + 1
    m1 = m2 = 0.0
    for idle_weight, z, o in ((1.0 - q_p, p_zero[0], p_one[0]), (q_p, p_zero[1], p_one[1])):
        for delta in range(stop, n_u + 1):
            m1 += idle_weight * math.comb(delta - 1, stop - 1) * delta * z ** (delta - stop) * o ** stop
        for delta in range(nu, n_u + 1):
            m2 += idle_weight * math.comb(delta - 1, delta - nu) * delta * z ** nu * o ** (delta - nu)
    return m1 + m2


def expected_report_bits(
    scheme: ReportingScheme,
    group: tuple[int, int],
    fusion: FusionConfig,
    probs: NodeDetectionProbs,
) -> float:
    """Expected reporting bits contributed by one group for all its channels.

    TDMA always spends ``n_u`` one-bit slots per channel, SSMA a single shared
    slot per channel, TTDMA the expected truncated count, and the acknowledged
    variant twice the TTDMA count.
    """
    m_s, n_u = group
    if not 1 <= fusion.kappa <= n_u:
        raise ValidationError(f"kappa={fusion.kappa} outside [1, n_u={n_u}]")
    if scheme is ReportingScheme.TDMA:
        return float(n_u * m_s)
    if scheme is ReportingScheme.SSMA:
        return float(m_s)
    per_channel = _ttdma_expected_stop(n_u, fusion.kappa, fusion.q_p, probs)
    if scheme is ReportingScheme.KAPPA_TTDMA:
        per_channel *= 2.0
    return m_s * per_channel


def corrupted(p_hit: float, p_e: float) -> float:
    """One-bit report probability seen through a binary symmetric channel."""
    return (1.0 - p_e) * p_hit + p_e * (1.0 - p_hit)


def group_fusion_prob(
    scheme: ReportingScheme, n_u: int, kappa: int, p_hit: float, p_e: float = 0.0
) -> float:
    """Probability that a group's fused decision says "PU present".

    ``p_hit`` is the per-node one-bit probability (p10 for a false alarm
    figure, p11 for detection); channel errors flip each reported bit with
    probability ``p_e``.  TDMA/SSMA fuse the full binomial count; TTDMA stops
    at the kappa-th one, giving the equivalent negative-binomial form.
    """
    if not 1 <= kappa <= n_u:
        raise ValidationError(f"kappa={kappa} outside [1, n_u={n_u}]")
    if not (0.0 <= p_hit <= 1.0 and 0.0 <= p_e <= 1.0):
        raise ValidationError("probabilities must lie in [0, 1]")
    p = corrupted(p_hit, p_e)
    if scheme in (ReportingScheme.TDMA, ReportingScheme.SSMA):
        return sum(
            math.comb(n_u, delta) * p**delta * (1.0 - p) ** (n_u - delta)
            for delta in range(kappa, n_u + 1)
        )
    return sum(
        math.comb(kappa + beta - 1, beta) * p**kappa * (1.0 - p) ** beta
        for beta in range(0, n_u - kappa + 1)
    )


def network_detection_summary(
    layout: GroupLayout,
    scheme: ReportingScheme,
    fusion: FusionConfig,
    phy: PhyParams,
    C: float,
) -> DetectionSummary:
    """Compose per-group fusion and overhead into the network operating point.

    Network probabilities average the per-group figures; the quiet time splits
    into ``m_bar_s`` sensing cycles of ``t_e`` plus ``m_bar_r`` report bits of
    ``t_a = 1/C`` each (time-division arrangement, so t_q = t_d = t_s + t_r).
    """
    if fusion.kappa > layout.min_users:
        raise ValidationError(
            f"kappa={fusion.kappa} exceeds group size (min users {layout.min_users})"
        )
    probs = node_probs(phy)
    p_f = p_d = 0.0
    m_bar_r = 0.0
    for group in layout.groups:
        _, n_u = group
        p_f += group_fusion_prob(scheme, n_u, fusion.kappa, probs.p10, fusion.p_e)
        p_d += group_fusion_prob(scheme, n_u, fusion.kappa, probs.p11, fusion.p_e)
        m_bar_r += expected_report_bits(scheme, group, fusion, probs)
    p_f /= layout.n_g
    p_d /= layout.n_g
    m_bar_s = sensing_cycles(layout, phy.alpha, phy.M)
    t_a = 1.0 / C
    t_s = m_bar_s * phy.t_e
    t_r = m_bar_r * t_a
    return DetectionSummary(
        p_f=p_f, p_d=p_d, m_bar_s=m_bar_s, m_bar_r=m_bar_r,
        t_s=t_s, t_r=t_r, t_q=t_s + t_r, t_d=t_s + t_r, t_a=t_a,
    )
