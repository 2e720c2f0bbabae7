"""Grouping, reporting overhead, fusion, and the network operating point."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osabench.detection import NodeDetectionProbs, PhyParams, threshold_for_false_alarm
from osabench.errors import ValidationError
from osabench.sensing import (
    FusionConfig,
    ReportingScheme,
    expected_report_bits,
    group_fusion_prob,
    group_layout,
    network_detection_summary,
    sensing_cycles,
)

from conftest import corrupted, enum_expected_report_bits, enum_fusion_prob

PROBS = NodeDetectionProbs(p10=0.1, p11=0.9)


class TestGroupLayout:
    def test_single_group_takes_all(self):
        assert group_layout(3, 12, 1).groups == ((3, 12),)

    def test_uneven_users_balance(self):
        layout = group_layout(12, 40, 6)
        assert layout.groups == ((2, 7), (2, 7), (2, 7), (2, 7), (2, 6), (2, 6))

    def test_exact_division(self):
        assert group_layout(12, 40, 4).groups == ((3, 10),) * 4

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            group_layout(3, 12, 4)
        with pytest.raises(ValidationError):
            group_layout(3, 12, 0)

    @given(
        M=st.integers(1, 40),
        N=st.integers(2, 80),
        n_g=st.integers(1, 40),
    )
    @settings(max_examples=200, deadline=None)
    def test_balance_property(self, M, N, n_g):
        if n_g > min(M, N):
            with pytest.raises(ValidationError):
                group_layout(M, N, n_g)
            return
        layout = group_layout(M, N, n_g)
        assert sum(m for m, _ in layout.groups) == M
        assert sum(n for _, n in layout.groups) == N
        assert all(m in (M // n_g, -(-M // n_g)) for m, _ in layout.groups)
        assert all(n in (N // n_g, -(-N // n_g)) for _, n in layout.groups)


class TestSensingCycles:
    def test_narrowband_scans_sequentially(self):
        assert sensing_cycles(group_layout(3, 12, 1), 1.0 / 3.0, 3) == 3

    def test_wideband_single_cycle(self):
        assert sensing_cycles(group_layout(3, 12, 1), 1.0, 3) == 1

    def test_unit_bandwidth_product(self):
        assert sensing_cycles(group_layout(12, 40, 6), 1.0 / 12.0, 12) == 2

    def test_radio_narrower_than_channel_rejected(self):
        with pytest.raises(ValidationError):
            sensing_cycles(group_layout(12, 40, 6), 0.05, 12)


class TestExpectedReportBits:
    def test_tdma_is_users_times_channels(self):
        assert expected_report_bits(ReportingScheme.TDMA, (2, 4), FusionConfig(1), PROBS) == 8.0

    def test_ssma_is_one_bit_per_channel(self):
        assert expected_report_bits(ReportingScheme.SSMA, (5, 9), FusionConfig(3), PROBS) == 5.0

    def test_single_reporter_sends_one_bit_per_channel(self):
        value = expected_report_bits(
            ReportingScheme.TTDMA, (4, 1), FusionConfig(1, 0.0, 0.3), PROBS
        )
        assert value == pytest.approx(4.0, abs=1e-12)

    def test_enumeration_example(self):
        # Exhaustive enumeration of all 2^3 sequences per PU state:
        # idle (w=0.9, one-prob 0.1): E = .1*1 + .09*2 + .81*3 = 2.71
        # busy (w=0.1, one-prob 0.9): E = .9*1 + .09*2 + .01*3 = 1.11
        expected = enum_expected_report_bits(3, 1, 0.1, 0.1, 0.9)
        assert expected == pytest.approx(0.9 * 2.71 + 0.1 * 1.11, abs=1e-12)
        value = expected_report_bits(
            ReportingScheme.TTDMA, (1, 3), FusionConfig(1, 0.0, 0.1), PROBS
        )
        assert value == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("n_u", range(1, 9))
    def test_enumeration_grid(self, n_u):
        for kappa in range(1, n_u + 1):
            for q_p in (0.0, 0.1, 0.5, 1.0):
                for p10, p11 in ((0.05, 0.5), (0.2, 0.9), (0.5, 0.5)):
                    probs = NodeDetectionProbs(p10=p10, p11=p11)
                    value = expected_report_bits(
                        ReportingScheme.TTDMA, (1, n_u), FusionConfig(kappa, 0.0, q_p), probs
                    )
                    oracle = enum_expected_report_bits(n_u, kappa, q_p, p10, p11)
                    assert value == pytest.approx(oracle, abs=1e-12)

    def test_majority_boundary_uses_swapped_branch(self):
        # kappa = n_u/2 sits exactly on the non-strict branch condition; both
        # symbol conventions must agree with enumeration there
        value = expected_report_bits(
            ReportingScheme.TTDMA, (1, 8), FusionConfig(4, 0.0, 0.2), PROBS
        )
        assert value == pytest.approx(enum_expected_report_bits(8, 4, 0.2, 0.1, 0.9), abs=1e-12)

    def test_acknowledged_variant_doubles_ttdma(self):
        fusion = FusionConfig(2, 0.0, 0.1)
        plain = expected_report_bits(ReportingScheme.TTDMA, (3, 6), fusion, PROBS)
        doubled = expected_report_bits(ReportingScheme.KAPPA_TTDMA, (3, 6), fusion, PROBS)
        assert doubled == pytest.approx(2.0 * plain, abs=1e-12)

    def test_overhead_ordering(self):
        # one shared slot <= truncated <= fixed slots, for any operating point
        for n_u in (4, 8, 12):
            for kappa in (1, n_u // 2, n_u):
                fusion = FusionConfig(max(kappa, 1), 0.0, 0.1)
                ssma = expected_report_bits(ReportingScheme.SSMA, (2, n_u), fusion, PROBS)
                ttdma = expected_report_bits(ReportingScheme.TTDMA, (2, n_u), fusion, PROBS)
                tdma = expected_report_bits(ReportingScheme.TDMA, (2, n_u), fusion, PROBS)
                assert ssma <= ttdma <= tdma

    def test_acknowledged_exceeds_fixed_in_low_false_alarm_or_rule(self):
        # the acknowledgment penalty shows in the regime the operating curves
        # plot: or-rule fusion with a small per-node false alarm rate
        probs = NodeDetectionProbs(p10=0.05, p11=0.9)
        fusion = FusionConfig(1, 0.0, 0.1)
        tdma = expected_report_bits(ReportingScheme.TDMA, (1, 12), fusion, probs)
        ack = expected_report_bits(ReportingScheme.KAPPA_TTDMA, (1, 12), fusion, probs)
        assert ack > tdma

    def test_kappa_out_of_range(self):
        with pytest.raises(ValidationError):
            expected_report_bits(ReportingScheme.TTDMA, (1, 4), FusionConfig(5), PROBS)


class TestGroupFusion:
    def test_and_rule(self):
        assert group_fusion_prob(ReportingScheme.TDMA, 5, 5, 0.3) == pytest.approx(0.3**5)

    def test_or_rule(self):
        assert group_fusion_prob(ReportingScheme.TDMA, 5, 1, 0.3) == pytest.approx(
            1.0 - 0.7**5
        )

    def test_truncated_equals_fixed_count(self):
        value_t = group_fusion_prob(ReportingScheme.TTDMA, 6, 3, 0.2, 0.01)
        value_f = group_fusion_prob(ReportingScheme.TDMA, 6, 3, 0.2, 0.01)
        assert value_t == pytest.approx(value_f, abs=1e-12)
        assert value_t == pytest.approx(enum_fusion_prob(6, 3, corrupted(0.2, 0.01)), abs=1e-12)

    @pytest.mark.parametrize("n_u", range(1, 9))
    def test_scheme_identity_and_enumeration(self, n_u):
        for kappa in range(1, n_u + 1):
            for p in (0.05, 0.2, 0.5, 0.9):
                for p_e in (0.0, 0.01, 0.1):
                    values = [
                        group_fusion_prob(s, n_u, kappa, p, p_e)
                        for s in (ReportingScheme.TDMA, ReportingScheme.SSMA,
                                  ReportingScheme.TTDMA, ReportingScheme.KAPPA_TTDMA)
                    ]
                    assert max(values) - min(values) <= 1e-12
                    oracle = enum_fusion_prob(n_u, kappa, corrupted(p, p_e))
                    assert values[0] == pytest.approx(oracle, abs=1e-12)

    def test_error_free_limit_is_exact(self):
        for p in (0.0, 0.3, 1.0):
            raw = group_fusion_prob(ReportingScheme.TDMA, 7, 3, p, 0.0)
            assert raw == pytest.approx(enum_fusion_prob(7, 3, p), abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValidationError):
            group_fusion_prob(ReportingScheme.TDMA, 4, 0, 0.5)
        with pytest.raises(ValidationError):
            group_fusion_prob(ReportingScheme.TDMA, 4, 5, 0.5)
        with pytest.raises(ValidationError):
            group_fusion_prob(ReportingScheme.TDMA, 4, 2, 1.5)


class TestNetworkSummary:
    def _phy(self, t_e=10.0, theta=None, M=3):
        theta = threshold_for_false_alarm(0.1, int(t_e)) if theta is None else theta
        return PhyParams(t_e=t_e, alpha=1.0 / M, M=M, b=1.0, gamma=10 ** (-0.5), theta=theta)

    def test_single_group_is_the_network(self):
        layout = group_layout(3, 12, 1)
        phy = self._phy()
        fusion = FusionConfig(1, 0.0, 0.1)
        summary = network_detection_summary(layout, ReportingScheme.TDMA, fusion, phy, 1.0)
        direct = group_fusion_prob(ReportingScheme.TDMA, 12, 1, 0.1, 0.0)
        assert summary.p_f == pytest.approx(direct, rel=1e-9)

    def test_identical_groups_average_to_themselves(self):
        layout = group_layout(12, 40, 4)  # four identical (3, 10) groups
        phy = self._phy(M=12)
        fusion = FusionConfig(2, 0.0, 0.1)
        summary = network_detection_summary(layout, ReportingScheme.TTDMA, fusion, phy, 1.0)
        one = group_fusion_prob(ReportingScheme.TTDMA, 10, 2, 0.1, 0.0)
        assert summary.p_f == pytest.approx(one, rel=1e-9)

    def test_hand_composed_reference_point(self):
        # M=3, N=12, n_g=1, TDMA, kappa=1, eps=10, theta at p10=0.1, C=1 Mbps
        layout = group_layout(3, 12, 1)
        phy = self._phy(t_e=10.0)
        fusion = FusionConfig(1, 0.0, 0.1)
        summary = network_detection_summary(layout, ReportingScheme.TDMA, fusion, phy, 1.0)
        assert summary.m_bar_s == 3            # narrowband radio scans 3 channels
        assert summary.m_bar_r == pytest.approx(36.0)   # 12 users x 3 channels
        assert summary.t_a == pytest.approx(1.0)        # one bit at 1 Mbps
        assert summary.t_r == pytest.approx(36.0)
        assert summary.t_s == pytest.approx(30.0)
        assert summary.t_q == pytest.approx(66.0)
        assert summary.t_d == summary.t_q == summary.t_s + summary.t_r
        assert summary.p_f == pytest.approx(1.0 - 0.9**12, rel=1e-9)
        assert summary.p_d >= summary.p_f

    def test_detection_dominates_under_mild_errors(self):
        layout = group_layout(3, 12, 3)
        phy = self._phy()
        for p_e in (0.0, 0.05, 0.3):
            summary = network_detection_summary(
                layout, ReportingScheme.TTDMA, FusionConfig(2, p_e, 0.1), phy, 1.0
            )
            assert summary.p_d >= summary.p_f

    def test_kappa_exceeding_group_rejected(self):
        layout = group_layout(3, 12, 3)  # groups of 4 users
        with pytest.raises(ValidationError, match="kappa.*exceeds group size"):
            network_detection_summary(
                layout, ReportingScheme.TDMA, FusionConfig(5, 0.0, 0.1), self._phy(), 1.0
            )
