"""Slot-level Monte Carlo of the full sensing + MAC stack.

One simulation run walks the slot sequence of the whole network: PU occupancy
per channel, the network-wide collective detection outcome, S-ALOHA contention
on the control channel, the per-variant connection lifecycle (drop, switch by
priority, buffer, switch-else-buffer), and the channel error models.  Output
statistics use the method of batch means with Student-t 90% confidence
intervals.

The MAC simulator draws one collective busy/idle decision per channel per slot
(every node sees the same signal in a one-hop network); per-node reporting is
exercised separately by ``run_sensing_sim``, which is the layer the analytical
fusion and overhead formulas are validated against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats as _stats

from .chain import (
    ControlDesign,
    ErrorModel,
    MacVariant,
    ModelKind,
    TrafficParams,
    data_channel_count,
    max_connections,
    overhead_ratio,
)
from .errors import ValidationError
from .scene import RadioScene
from .sensing import DetectionSummary, FusionConfig, GroupLayout, ReportingScheme
from .detection import PhyParams, node_probs

CONFIDENCE = 0.90


class PuTrafficKind(Enum):
    PER_SLOT_BERNOULLI = "bernoulli"
    GEOMETRIC_ON_OFF = "EE"
    DISCRETE_UNIFORM_ON_OFF = "UU"
    DISCRETIZED_LOGNORMAL_ON_OFF = "LL"


_DIST_CODES = frozenset("EUL")


@dataclass(frozen=True)
class PuTrafficModel:
    """Per-channel PU occupancy process with a target stationary busy fraction.

    ``on_code``/``off_code`` pick the duration distribution of busy and idle
    runs: E geometric, U discretized uniform, L discretized log-normal.  With
    both codes None each slot is an independent Bernoulli draw (which is
    distributionally identical to the EE pair).  Durations are matched in mean
    to the geometric process with the same busy fraction; the log-normal also
    matches its variance, the ceiling-rounded uniform cannot.
    """

    target_busy: float
    on_code: str | None = None
    off_code: str | None = None

    def __post_init__(self):
        problems = []
        if not 0.0 <= self.target_busy <= 1.0:
            problems.append("target busy fraction must lie in [0, 1]")
        if (self.on_code is None) != (self.off_code is None):
            problems.append("on/off duration codes must be given together")
        for code in (self.on_code, self.off_code):
            if code is not None and code not in _DIST_CODES:
                problems.append(f"unknown duration code {code!r} (expected E, U or L)")
        if problems:
            raise ValidationError("invalid PuTrafficModel", problems)

    @classmethod
    def bernoulli(cls, q_p: float) -> "PuTrafficModel":
        return cls(target_busy=q_p)

    @classmethod
    def from_code(cls, code: str, q_p: float) -> "PuTrafficModel":
        """Build from a two-letter on/off code ("EE", "LE", ...) or "bernoulli"."""
        if code.lower() in ("bernoulli", "b"):
            return cls.bernoulli(q_p)
        if len(code) != 2:
            raise ValidationError(f"traffic code must be two letters, got {code!r}")
        return cls(target_busy=q_p, on_code=code[0].upper(), off_code=code[1].upper())

    @property
    def kind(self) -> PuTrafficKind:
        if self.on_code is None:
            return PuTrafficKind.PER_SLOT_BERNOULLI
        pair = self.on_code + self.off_code
        for kind in (
            PuTrafficKind.GEOMETRIC_ON_OFF,
            PuTrafficKind.DISCRETE_UNIFORM_ON_OFF,
            PuTrafficKind.DISCRETIZED_LOGNORMAL_ON_OFF,
        ):
            if kind.value == pair:
                return kind
        raise ValidationError(f"mixed code {pair} has no single named kind")


def _uniform_width(mean: float) -> float:
    """Width b such that ceil(U(0, b)) has the requested integer-valued mean.

    Rounding up would otherwise inflate the mean by ~0.5 slots and distort the
    busy fraction, so the continuous width is calibrated to the discretized
    target.  ceil(U(0, b)) has mean (floor(b)(floor(b)+1)/2 + (b-floor(b))*ceil(b))/b,
    increasing in b.
    """
    if mean <= 1.0:
        return 1e-9  # all runs of length one

    def discretized_mean(b):
        fl = math.floor(b)
        return (fl * (fl + 1) / 2.0 + (b - fl) * math.ceil(b)) / b

    lo, hi = 1e-9, 2.0 * mean + 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if discretized_mean(mid) < mean:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _draw_durations(code: str, mean: float, count: int, rng) -> np.ndarray:
    """Integer run lengths (>= 1) with the requested mean."""
    if code == "E":
        return rng.geometric(min(1.0, 1.0 / mean), size=count)
    if code == "U":
        width = _uniform_width(mean)
        return np.maximum(np.ceil(rng.uniform(0.0, width, size=count)).astype(np.int64), 1)
    # log-normal matched in mean and in variance to the geometric of equal mean
    variance = mean * mean - mean
    if variance <= 0.0:
        return np.ones(count, dtype=np.int64)
    sigma2 = math.log(1.0 + variance / (mean * mean))
    mu = math.log(mean * mean / math.sqrt(variance + mean * mean))
    draws = np.rint(rng.lognormal(mu, math.sqrt(sigma2), size=count)).astype(np.int64)
    return np.maximum(draws, 1)


def generate_pu_sequence(
    model: PuTrafficModel, channels: int, slots: int, rng
) -> np.ndarray:
    """Independent per-channel busy/idle sequences, shape (channels, slots)."""
    if slots < 1:
        raise ValidationError("horizon must be at least one slot")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    q_p = model.target_busy
    if model.on_code is None or q_p in (0.0, 1.0):
        return rng.random((channels, slots)) < q_p
    # On/off means 1/(1-q_p) and 1/q_p reproduce the per-slot marginal q_p as
    # the stationary busy fraction of the alternating-renewal process.
    mean_on = 1.0 / (1.0 - q_p)
    mean_off = 1.0 / q_p
    out = np.empty((channels, slots), dtype=bool)
    for ch in range(channels):
        busy = bool(rng.random() < q_p)
        filled = 0
        while filled < slots:
            pairs = max(8, int((slots - filled) / (mean_on + mean_off)) + 4)
            ons = _draw_durations(model.on_code, mean_on, pairs, rng)
            offs = _draw_durations(model.off_code, mean_off, pairs, rng)
            runs = np.empty(2 * pairs, dtype=np.int64)
            states = np.empty(2 * pairs, dtype=bool)
            runs[0::2], runs[1::2] = (ons, offs) if busy else (offs, ons)
            states[0::2], states[1::2] = (busy, not busy)
            expanded = np.repeat(states, runs)
            take = min(expanded.size, slots - filled)
            out[ch, filled : filled + take] = expanded[:take]
            filled += take
            # a fully consumed block of pairs returns to the entry state
    return out


@dataclass(frozen=True)
class SimEstimate:
    """Batch-means point estimate with a 90% confidence half-width."""

    mean: float
    ci_half_width: float
    batches: int
    events_per_batch: int
    warmup: int
    batch_values: tuple[float, ...] = field(default=(), repr=False)

    def overlaps(self, other: "SimEstimate") -> bool:
        return (
            self.mean - self.ci_half_width <= other.mean + other.ci_half_width
            and other.mean - other.ci_half_width <= self.mean + self.ci_half_width
        )

    def contains(self, value: float) -> bool:
        return abs(value - self.mean) <= self.ci_half_width


def batch_means(values, events_per_batch: int, warmup: int = 0) -> SimEstimate:
    """Fold per-batch averages into a Student-t confidence interval."""
    vals = [float(v) for v in values]
    n = len(vals)
    if n < 2:
        raise ValidationError("batch means needs at least 2 batches")
    mean = sum(vals) / n
    sd = math.sqrt(sum((v - mean) ** 2 for v in vals) / (n - 1))
    t_quantile = float(_stats.t.ppf(0.5 + CONFIDENCE / 2.0, n - 1))
    return SimEstimate(
        mean=mean,
        ci_half_width=t_quantile * sd / math.sqrt(n),
        batches=n,
        events_per_batch=events_per_batch,
        warmup=warmup,
        batch_values=tuple(vals),
    )


# ---------------------------------------------------------------------------
# Sensing-layer simulation
# ---------------------------------------------------------------------------


@dataclass
class SensingSimResult:
    p_f: SimEstimate
    p_d: SimEstimate
    report_bits: SimEstimate


def _ttdma_stop(received: np.ndarray, kappa: int) -> tuple[int, bool]:
    """Scan a received report stream; returns (bits used, busy decision)."""
    n_u = received.size
    nu = n_u - kappa + 1
    ones = zeros = 0
    for pos, bit in enumerate(received, start=1):
        if bit:
            ones += 1
            if ones == kappa:
                return pos, True
        else:
            zeros += 1
            if zeros == nu:
                return pos, False
    raise AssertionError("report stream must hit a stopping rule")


def run_sensing_sim(
    layout: GroupLayout,
    scheme: ReportingScheme,
    fusion: FusionConfig,
    phy: PhyParams,
    batches: int = 10,
    events_per_batch: int = 100,
    seed: int = 0,
) -> SensingSimResult:
    """Monte Carlo of per-node sensing, reporting-bit errors and fusion.

    One event is a full network sensing round (every group reports every one
    of its channels).  Per-group false-alarm/detection ratios are averaged
    with equal group weight to match the network-wide definition; report bits
    are the network total per round.
    """
    if fusion.kappa > layout.min_users:
        raise ValidationError("kappa exceeds group size")
    rng = np.random.default_rng(seed)
    probs = node_probs(phy)
    fa_batches, det_batches, bit_batches = [], [], []
    for _ in range(batches):
        fa_hits = [0] * layout.n_g
        fa_n = [0] * layout.n_g
        det_hits = [0] * layout.n_g
        det_n = [0] * layout.n_g
        bits_total = 0.0
        for _ in range(events_per_batch):
            for gi, (m_s, n_u) in enumerate(layout.groups):
                for _ in range(m_s):
                    pu_busy = rng.random() < fusion.q_p
                    p_one = probs.p11 if pu_busy else probs.p10
                    sent = rng.random(n_u) < p_one
                    flips = rng.random(n_u) < fusion.p_e
                    received = sent ^ flips
                    if scheme in (ReportingScheme.TDMA, ReportingScheme.SSMA):
                        busy = int(received.sum()) >= fusion.kappa
                        bits = n_u if scheme is ReportingScheme.TDMA else 1
                    else:
                        bits, busy = _ttdma_stop(received, fusion.kappa)
                        if scheme is ReportingScheme.KAPPA_TTDMA:
                            bits *= 2
                    bits_total += bits
                    if pu_busy:
                        det_n[gi] += 1
                        det_hits[gi] += busy
                    else:
                        fa_n[gi] += 1
                        fa_hits[gi] += busy
        fa_batches.append(_group_average(fa_hits, fa_n))
        det_batches.append(_group_average(det_hits, det_n))
        bit_batches.append(bits_total / events_per_batch)
    return SensingSimResult(
        p_f=batch_means(fa_batches, events_per_batch),
        p_d=batch_means(det_batches, events_per_batch),
        report_bits=batch_means(bit_batches, events_per_batch),
    )


def _group_average(hits, counts) -> float:
    ratios = [h / n for h, n in zip(hits, counts) if n > 0]
    return sum(ratios) / len(ratios) if ratios else math.nan


# ---------------------------------------------------------------------------
# MAC-layer simulation
# ---------------------------------------------------------------------------


def switch_scheduler(preempted, free_channels, priority) -> dict:
    """Map preempted connections onto free channels in priority order.

    ``priority`` maps a connection to its transmitter's current priority
    level; higher levels switch first (ties resolve in input order).
    Connections left over are blocked or buffered by the caller, per variant.
    """
    ranked = sorted(preempted, key=lambda c: -priority[c])
    return dict(zip(ranked, sorted(free_channels)))


class _Connection:
    __slots__ = ("tx", "rx", "channel", "active", "remaining")

    def __init__(self, tx, rx, channel, remaining=None):
        self.tx = tx
        self.rx = rx
        self.channel = channel   # None while buffered without a channel (B1S1)
        self.active = False
        self.remaining = remaining


@dataclass
class MacSimResult:
    throughput: SimEstimate            # Mbps including the xi overhead factor
    xi: float
    setup_stats: dict | None = None    # m -> (slots observed, setups succeeded)


def run_mac_sim(
    scene: RadioScene,
    variant: MacVariant,
    detection: DetectionSummary,
    traffic_model: PuTrafficModel | None = None,
    batches: int = 100,
    events_per_batch: int = 1000,
    warmup: int = 100,
    seed: int = 0,
    lifetime_mode: str = "memoryless",
    record_setup_stats: bool = False,
) -> MacSimResult:
    """Slot-level simulation of one MAC variant; one event is one slot.

    ``lifetime_mode`` selects how packet lifetimes are realised: per-slot
    Bernoulli completion ("memoryless", the default), a geometric length drawn
    at setup and counted down over active slots ("countdown"), or the same
    with a fresh length redrawn whenever a buffered connection resumes
    ("countdown_regen").  All three are equal in law; the countdown pair
    exercises the memorylessness argument that justifies the analysis.
    """
    if lifetime_mode not in ("memoryless", "countdown", "countdown_regen"):
        raise ValidationError(f"unknown lifetime mode {lifetime_mode!r}")
    traffic_model = traffic_model or PuTrafficModel.bernoulli(scene.q_p)
    if abs(traffic_model.target_busy - scene.q_p) > 1e-12:
        raise ValidationError("traffic model busy fraction must equal scene q_p")
    xi = overhead_ratio(ModelKind.MICRO, variant, scene.t_t, detection.t_q, scene.t_p, scene.t_d_max)
    traffic = TrafficParams.from_scene(scene, variant, detection.t_q, detection.p_d, detection.p_f)
    q, p = traffic.q, traffic.p
    p_d, p_f = detection.p_d, detection.p_f
    p_e = scene.p_e
    M_D = data_channel_count(scene.M, variant.control)
    s_m = max_connections(scene.N, M_D)
    is_hcc = variant.control is ControlDesign.HCC
    shared_control = variant.control is ControlDesign.DCC_SHARED
    error_model = variant.error_model

    rng = np.random.default_rng(seed)
    horizon = warmup + batches * events_per_batch
    # Channel 0 is the dedicated control channel for DCC (PU-free control
    # simply never sees a PU there); HCC uses all M channels for data.
    pu = generate_pu_sequence(traffic_model, scene.M, horizon, rng)
    data_offset = 0 if is_hcc else 1

    node_busy = np.zeros(scene.N, dtype=bool)
    priority = rng.random(scene.N)  # stand-in for hashed addresses; ordering is all that matters
    connections: list[_Connection] = []
    capacity = scene.C * (1.0 - p_e) if error_model is ErrorModel.E1 else scene.C
    batch_sums = []
    acc = 0.0
    setup_stats: dict[int, list[int]] = {}

    def draw_lifetime():
        return int(rng.geometric(q)) if lifetime_mode != "memoryless" else None

    for t in range(horizon):
        truth = pu[:, t]
        draws = rng.random(M_D)
        detected = np.where(
            truth[data_offset:], draws < p_d, draws < p_f
        )
        m_prev = len(connections)
        free_count = scene.N - 2 * m_prev

        # -- contention on the control channel (state as of the previous slot)
        success = False
        if free_count > 0 and rng.binomial(free_count, p) == 1:
            success = True
            if is_hcc:
                # The control exchange is pipelined: it happened on the previous
                # slot's hop channel, so its PU/decision state is independent of
                # this slot's data-channel detections (per-slot PU draws).
                hop = int(rng.integers(scene.M))
                held = {c.channel for c in connections if c.channel is not None}
                hop_truth = rng.random() < scene.q_p
                hop_detected = rng.random() < (p_d if hop_truth else p_f)
                if hop in held or hop_detected:
                    success = False
                if success:
                    free_nodes = np.flatnonzero(~node_busy)
                    tx = int(free_nodes[rng.integers(free_nodes.size)])
                    partner = int(rng.integers(scene.N - 1))
                    partner += partner >= tx
                    if node_busy[partner]:
                        success = False
                    else:
                        rx = partner
            else:
                if shared_control:
                    ctrl_busy = rng.random() < (p_d if truth[0] else p_f)
                    if ctrl_busy:
                        success = False
                if success and free_count >= 2:
                    free_nodes = np.flatnonzero(~node_busy)
                    pick = rng.integers(free_nodes.size)
                    other = rng.integers(free_nodes.size - 1)
                    other += other >= pick
                    tx, rx = int(free_nodes[pick]), int(free_nodes[other])
                elif success:
                    success = False  # a lone free node has nobody to receive
            if success and error_model is ErrorModel.E1 and rng.random() < p_e:
                success = False
            if success and error_model is ErrorModel.E2 and (
                rng.random() < p_e or rng.random() < p_e
            ):
                success = False
        if record_setup_stats and t >= warmup:
            stat = setup_stats.setdefault(m_prev, [0, 0])
            stat[0] += 1
            stat[1] += int(success)

        # -- terminations of connections that transmitted in the previous slot
        survivors = []
        terminated = 0
        for conn in connections:
            done = False
            if conn.active:
                if lifetime_mode == "memoryless":
                    done = rng.random() < q
                else:
                    conn.remaining -= 1
                    done = conn.remaining <= 0
            if done:
                terminated += 1
                node_busy[conn.tx] = False
                node_busy[conn.rx] = False
            else:
                survivors.append(conn)
        connections = survivors

        # -- new connection (control exchange pipelined into this slot)
        if success and m_prev - terminated + 1 <= s_m:
            held = {c.channel for c in connections if c.channel is not None}
            open_channels = [c for c in range(M_D) if c not in held]
            channel = open_channels[rng.integers(len(open_channels))]
            conn = _Connection(tx, rx, channel, draw_lifetime())
            connections.append(conn)
            node_busy[tx] = True
            node_busy[rx] = True

        # -- per-variant handling of collective detections
        if variant.buffering and not variant.switching:
            for conn in connections:
                was_buffered = not conn.active
                conn.active = not detected[conn.channel]
                if (
                    lifetime_mode == "countdown_regen"
                    and conn.active
                    and was_buffered
                    and conn.remaining is not None
                ):
                    conn.remaining = int(rng.geometric(q))
        elif not variant.buffering and not variant.switching:
            kept = []
            for conn in connections:
                if detected[conn.channel]:
                    node_busy[conn.tx] = False
                    node_busy[conn.rx] = False
                else:
                    conn.active = True
                    kept.append(conn)
            connections = kept
        else:
            # switching variants: keep holders on idle channels, re-map the rest
            keepers, pool = [], []
            for conn in connections:
                if conn.channel is not None and not detected[conn.channel]:
                    keepers.append(conn)
                else:
                    if conn.channel is not None:
                        priority[conn.tx] += 1.0  # preempted this slot
                        conn.channel = None
                    pool.append(conn)
            held = {c.channel for c in keepers}
            idle_free = [c for c in range(M_D) if not detected[c] and c not in held]
            mapping = switch_scheduler(pool, idle_free, {c: priority[c.tx] for c in pool})
            for conn in keepers:
                conn.active = True
            for conn in pool:
                target = mapping.get(conn)
                if target is not None:
                    was_buffered = variant.buffering and not conn.active
                    conn.channel = target
                    conn.active = True
                    if (
                        lifetime_mode == "countdown_regen"
                        and was_buffered
                        and conn.remaining is not None
                    ):
                        conn.remaining = int(rng.geometric(q))
                elif variant.buffering:
                    conn.active = False
                else:
                    node_busy[conn.tx] = False
                    node_busy[conn.rx] = False
            if not variant.buffering:
                connections = keepers + [c for c in pool if c in mapping]

        # -- slot accounting and state legality
        active = sum(1 for c in connections if c.active)
        busy_channels = int(detected.sum())
        buffered = len(connections) - active
        if (
            active + busy_channels > M_D
            or len(connections) > s_m
            or buffered > busy_channels
        ):
            raise AssertionError(
                f"illegal state at slot {t}: x={active} y={busy_channels} z={len(connections)}"
            )
        delivered = active
        if error_model is ErrorModel.E1 and active:
            delivered = int(sum(rng.random() >= p_e for c in connections if c.active))
        if t >= warmup:
            acc += capacity * xi * delivered
            if (t - warmup + 1) % events_per_batch == 0:
                batch_sums.append(acc / events_per_batch)
                acc = 0.0

    estimate = batch_means(batch_sums, events_per_batch, warmup)
    return MacSimResult(
        throughput=estimate,
        xi=xi,
        setup_stats={m: tuple(v) for m, v in setup_stats.items()} if record_setup_stats else None,
    )
