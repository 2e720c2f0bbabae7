"""Multichannel MAC Markov models and analytical throughput.

The network state is (x, y, z): channels actually carrying SU data, channels
on which the PU was collectively detected, and SU connections (z = x when
preempted connections are not buffered).  Valid states satisfy

    0 <= x <= z <= x + y <= M_D,   x, z <= s_m = min(floor(N/2), M_D),

with M_D = M - 1 when one channel is dedicated to control (DCC) and M_D = M
for the hopping-control design (HCC).  Four protocol variants are modelled:
preempted connections dropped (B0S0), switched to vacant channels (B0S1),
buffered on their channel (B1S0), or switched-else-buffered (B1S1).  Each
variant has its own one-slot transition family built from shared termination,
connection-setup, and PU-appearance factors; rows are validated to be
stochastic at build time and the stationary distribution is obtained by a
dense linear solve (power iteration is kept alongside as a test oracle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ChainBuildError, InfeasibleError, StationarySolveError, ValidationError
from .scene import RadioScene

ROW_SUM_TOL = 1e-9
STATIONARY_TOL = 1e-10


class ControlDesign(Enum):
    DCC_PU_FREE = "dcc_pu_free"   # dedicated control channel the PU never uses
    DCC_SHARED = "dcc_shared"     # dedicated control channel shared with the PU
    HCC = "hcc"                   # control rendezvous hops across data channels


class ErrorModel(Enum):
    E0 = "e0"   # error-free
    E1 = "e1"   # errored slots discarded, transmission resumes
    E2 = "e2"   # connection terminates on error


class ModelKind(Enum):
    MICRO = "micro"   # sensing every slot, per-slot PU dynamics
    MACRO = "macro"   # rare sensing against a quasi-static PU


@dataclass(frozen=True)
class MacVariant:
    """One multichannel MAC protocol option."""

    control: ControlDesign
    buffering: bool = False
    switching: bool = False
    error_model: ErrorModel = ErrorModel.E0

    def __post_init__(self):
        problems = []
        if self.switching and self.control is ControlDesign.HCC:
            problems.append(
                "channel switching requires a dedicated control channel; HCC nodes "
                "cannot trace the network connection arrangement"
            )
        if self.error_model is not ErrorModel.E0 and self.control is not ControlDesign.HCC:
            problems.append("error models E1/E2 are analysed for HCC only")
        if problems:
            raise ValidationError("invalid MacVariant", problems)

    @property
    def is_dcc(self) -> bool:
        return self.control is not ControlDesign.HCC

    @property
    def code(self) -> str:
        return f"B{int(self.buffering)}S{int(self.switching)}"

    def label(self) -> str:
        base = "DCC" if self.is_dcc else "HCC"
        tag = "" if self.error_model is ErrorModel.E0 else f" {self.error_model.value.upper()}"
        return f"{base} {self.code}{tag}"


@dataclass(frozen=True)
class TrafficParams:
    """Per-slot SU/PU traffic probabilities feeding the chain."""

    p: float     # control-channel access probability
    q: float     # per-slot packet completion probability
    d: float     # mean packet size, bits
    q_p: float   # PU per-slot activity
    p_c: float   # collective busy-detection probability per channel

    def __post_init__(self):
        problems = []
        if not 0.0 < self.q <= 1.0:
            problems.append(f"completion probability q={self.q} outside (0, 1]")
        if not 0.0 <= self.p_c <= 1.0:
            problems.append("p_c must lie in [0, 1]")
        if not 0.0 <= self.p < 1.0:
            problems.append("access probability p must lie in [0, 1)")
        if problems:
            raise ValidationError("invalid TrafficParams", problems)

    @classmethod
    def from_scene(
        cls,
        scene: RadioScene,
        variant: MacVariant,
        t_q: float,
        p_d: float,
        p_f: float,
        model_kind: ModelKind = ModelKind.MICRO,
    ) -> "TrafficParams":
        """Derive (q, p_c) from slot timing and the sensing operating point.

        The data part of a slot is t_t - t_q, less t_p when the variant
        switches channels on a dedicated control design; HCC connections keep
        the channel during switching, which lengthens the packet instead
        (1/q = d / (C * (t_u + t_p))).  In the macroscopic model quiet periods
        displace whole slots, so data slots are full length.
        """
        if model_kind is ModelKind.MACRO:
            usable = scene.t_t
        elif variant.switching:
            usable = scene.t_t - t_q - scene.t_p
        else:
            usable = scene.t_t - t_q
        if usable <= 0.0:
            raise ValidationError("no data time left in the slot at this quiet time")
        q = scene.C * usable / scene.d
        if variant.error_model is ErrorModel.E2:
            q = q + (1.0 - q) * scene.p_e
        p_c = scene.q_p * p_d + (1.0 - scene.q_p) * p_f
        if model_kind is ModelKind.MACRO:
            p_c = 0.0
        return cls(p=scene.p, q=q, d=scene.d, q_p=scene.q_p, p_c=p_c)


def data_channel_count(M: int, control: ControlDesign) -> int:
    """Channels available for SU data: M - 1 under DCC, M under HCC."""
    return M - 1 if control is not ControlDesign.HCC else M


def max_connections(N: int, M_D: int) -> int:
    """Connection cap s_m = min(floor(N/2), M_D)."""
    return min(N // 2, M_D)


def enumerate_states(M_D: int, s_m: int, buffering: bool) -> tuple[tuple[int, ...], ...]:
    """All valid states in lexicographic order.

    Non-buffering variants have z = x throughout, so their states are the
    (x, y) pairs; buffering variants enumerate full (x, y, z) triples.
    """
    if M_D < 0 or s_m < 0:
        raise ValidationError("M_D and s_m must be nonnegative")
    states = []
    for x in range(min(s_m, M_D) + 1):
        for y in range(M_D - x + 1):
            if buffering:
                for z in range(x, min(x + y, s_m) + 1):
                    states.append((x, y, z))
            else:
                states.append((x, y))
    return tuple(states)


def _b1s1_states(M_D: int, s_m: int) -> tuple[tuple[int, int, int], ...]:
    """Buffering states reachable under switch-else-buffer.

    With at least one vacant channel a connection never sits idle (it would
    have switched), so z != x is only possible when x + y = M_D.
    """
    return tuple(
        s for s in enumerate_states(M_D, s_m, buffering=True)
        if s[2] == s[0] or s[0] + s[1] == M_D
    )


def termination_prob(k: int, j: int, q: float) -> float:
    """Probability that j of k channel-active connections complete this slot."""
    if k < 0 or j < 0:
        return 0.0
    if j > k:
        return 0.0
    return math.comb(k, j) * q**j * (1.0 - q) ** (k - j)


def connection_setup_prob(
    m: int, j: int, scene: RadioScene, variant: MacVariant, p_c: float
) -> float:
    """Probability of j in {0, 1} successful new connections given m existing.

    The S-ALOHA core is (N-2m) p (1-p)^(N-2m-1); a PU detected on the control
    channel suppresses setup except in the PU-free dedicated design; HCC
    additionally needs the chosen partner free and the hop channel vacant.
    Channel errors scale the core by (1-p_e) (E1) or (1-p_e)^2 (E2).
    """
    if j == 0:
        return 1.0 - connection_setup_prob(m, 1, scene, variant, p_c)
    if j != 1:
        return 0.0
    free = scene.N - 2 * m
    if free <= 0:
        return 0.0
    s_hat = free * scene.p * (1.0 - scene.p) ** (free - 1)
    if variant.error_model is ErrorModel.E1:
        s_hat *= 1.0 - scene.p_e
    elif variant.error_model is ErrorModel.E2:
        s_hat *= (1.0 - scene.p_e) ** 2
    if variant.control is ControlDesign.DCC_PU_FREE:
        s_tilde = s_hat
    else:
        s_tilde = (1.0 - p_c) * s_hat
    if variant.control is ControlDesign.HCC:
        M_D = data_channel_count(scene.M, variant.control)
        s_tilde *= (free - 1) / (scene.N - 1) * (M_D - m) / scene.M
    return s_tilde


def _comb0(n: int, r: int) -> int:
    if r < 0 or n < 0 or r > n:
        return 0
    return math.comb(n, r)


class _ChainBuilder:
    """Precomputed factor tables for one (scene, variant, traffic) triple."""

    def __init__(self, scene: RadioScene, variant: MacVariant, traffic: TrafficParams):
        self.variant = variant
        self.M_D = data_channel_count(scene.M, variant.control)
        self.s_m = max_connections(scene.N, self.M_D)
        self.p_c = traffic.p_c
        q = traffic.q
        sm = self.s_m
        self.T = [[termination_prob(k, j, q) for j in range(k + 1)] for k in range(sm + 1)]
        self.S1 = [connection_setup_prob(m, 1, scene, variant, traffic.p_c) for m in range(sm + 1)]
        self.S0 = [1.0 - s for s in self.S1]
        # p_c^y (1-p_c)^(M_D-y) with the 0^0 = 1 convention at the corners
        self.pu_weight = [
            self.p_c**y * (1.0 - self.p_c) ** (self.M_D - y) for y in range(self.M_D + 1)
        ]

    def _t(self, k: int, j: int) -> float:
        if j < 0 or j > k:
            return 0.0
        return self.T[k][j]

    def _p_nb(self, x: int, i: int, y: int) -> float:
        """PU appearance factor without buffering: i hits on the x+i SU channels."""
        return _comb0(x + i, i) * _comb0(self.M_D - x - i, y - i) * self.pu_weight[y]

    def _r_buf(self, z: int, x: int, y: int) -> float:
        """PU appearance factor with buffering: z-x of z connection channels hit."""
        return _comb0(z, z - x) * _comb0(self.M_D - z, y - z + x) * self.pu_weight[y]

    def _is_edge(self, x: int, y: int) -> bool:
        return x + y == self.M_D or x == self.s_m

    def row_b0s0(self, k: int, targets) -> np.ndarray:
        row = np.zeros(len(targets))
        t, s0, s1 = self._t, self.S0[k], self.S1[k]
        for idx, (x, y) in enumerate(targets):
            if x > k + 1:
                continue
            if x == k + 1:
                row[idx] = t(k, 0) * s1 * self._p_nb(x, 0, y)
                continue
            total = 0.0
            for i in range(min(self.s_m - x, y) + 1):
                total += (t(k, k - x - i) * s0 + t(k, k - x - i + 1) * s1) * self._p_nb(x, i, y)
            if k == self.s_m and self._is_edge(x, y):
                total += t(k, 0) * s1 * self._p_nb(0, 0, y)
            row[idx] = total
        return row

    def row_b0s1(self, k: int, targets) -> np.ndarray:
        row = np.zeros(len(targets))
        t, s0, s1 = self._t, self.S0[k], self.S1[k]
        for idx, (x, y) in enumerate(targets):
            p_free = _comb0(self.M_D, y) * self.pu_weight[y]
            if x > k + 1:
                continue
            if x == k + 1:
                row[idx] = t(k, 0) * s1 * p_free
                continue
            if not self._is_edge(x, y):
                row[idx] = (t(k, k - x) * s0 + t(k, k - x + 1) * s1) * p_free
                continue
            total = 0.0
            for i in range(min(self.s_m - x, y) + 1):
                total += (t(k, k - x - i) * s0 + t(k, k - x - i + 1) * s1) * p_free
            if k == self.s_m:
                total += t(k, 0) * s1 * p_free
            row[idx] = total
        return row

    def _buffered_ts(self, k: int, m: int, z: int) -> float:
        """Termination/setup factor shared by both buffering variants."""
        t = self._t
        if z > m + 1:
            return 0.0
        if z == m + 1:
            return t(k, 0) * self.S1[m]
        if z == m == self.s_m:
            return t(k, 0) * self.S0[m] + t(k, 1) * self.S1[m] + t(k, 0) * self.S1[m]
        return t(k, m - z) * self.S0[m] + t(k, m - z + 1) * self.S1[m]

    def row_b1s0(self, k: int, m: int, targets) -> np.ndarray:
        row = np.zeros(len(targets))
        for idx, (x, y, z) in enumerate(targets):
            ts = self._buffered_ts(k, m, z)
            if ts:
                row[idx] = ts * self._r_buf(z, x, y)
        return row

    def row_b1s1(self, k: int, m: int, targets) -> np.ndarray:
        row = np.zeros(len(targets))
        for idx, (x, y, z) in enumerate(targets):
            ts = self._buffered_ts(k, m, z)
            if ts:
                row[idx] = ts * _comb0(self.M_D, y) * self.pu_weight[y]
        return row


def chain_states(scene: RadioScene, variant: MacVariant) -> tuple[tuple[int, ...], ...]:
    """State list used by ``transition_matrix`` for this variant."""
    M_D = data_channel_count(scene.M, variant.control)
    s_m = max_connections(scene.N, M_D)
    if variant.buffering and variant.switching:
        return _b1s1_states(M_D, s_m)
    return enumerate_states(M_D, s_m, variant.buffering)


def transition_row(
    state: tuple[int, ...],
    variant: MacVariant,
    scene: RadioScene,
    traffic: TrafficParams,
) -> np.ndarray:
    """One-slot transition probabilities out of ``state`` (chain_states order).

    Raises ChainBuildError if the row fails the stochasticity check; the
    literal transition families are trusted only as far as they conserve
    probability.
    """
    builder = _ChainBuilder(scene, variant, traffic)
    targets = chain_states(scene, variant)
    if state not in targets:
        raise ValidationError(f"state {state} is not valid for variant {variant.label()}")
    row = _dispatch_row(builder, variant, state, targets)
    _check_row(row, state, variant)
    return row


def _dispatch_row(builder, variant, state, targets) -> np.ndarray:
    if variant.buffering:
        k, _, m = state
        if variant.switching:
            return builder.row_b1s1(k, m, targets)
        return builder.row_b1s0(k, m, targets)
    k = state[0]
    if variant.switching:
        return builder.row_b0s1(k, targets)
    return builder.row_b0s0(k, targets)


def _check_row(row: np.ndarray, state, variant) -> None:
    defect = abs(row.sum() - 1.0)
    if defect > ROW_SUM_TOL:
        raise ChainBuildError(
            f"transition row from state {state} of {variant.label()} sums to "
            f"{row.sum():.12f} (defect {defect:.3e} > {ROW_SUM_TOL})"
        )
    if row.min() < -1e-15:
        raise ChainBuildError(f"negative transition probability from state {state}")


def transition_matrix(
    scene: RadioScene, variant: MacVariant, traffic: TrafficParams
) -> tuple[tuple[tuple[int, ...], ...], np.ndarray]:
    """Build and validate the full transition matrix for one variant.

    Rows depend on the source only through (x, z) (the PU column l never
    enters the factors), so distinct sources sharing those coordinates reuse
    one computed row.
    """
    builder = _ChainBuilder(scene, variant, traffic)
    states = chain_states(scene, variant)
    matrix = np.zeros((len(states), len(states)))
    cache: dict[tuple[int, int], np.ndarray] = {}
    for si, state in enumerate(states):
        if variant.buffering:
            key = (state[0], state[2])
        else:
            key = (state[0], state[0])
        row = cache.get(key)
        if row is None:
            row = _dispatch_row(builder, variant, state, states)
            _check_row(row, state, variant)
            cache[key] = row
        matrix[si] = row
    return states, matrix


def stationary_distribution(matrix: np.ndarray) -> tuple[np.ndarray, bool]:
    """Solve pi = pi P; returns (pi, degenerate flag).

    The primary method replaces one balance equation with the normalization
    row in a dense solve.  A chain frozen into several closed classes (the
    p = 0 / p_c = 1 corners) has no unique solution; those return the
    distribution concentrated on the first (all-zero) state, flagged
    degenerate, which downstream throughput treats as zero.
    """
    n = matrix.shape[0]
    if n == 1:
        return np.array([1.0]), False
    a = matrix.T - np.eye(n)
    if np.linalg.matrix_rank(a, tol=1e-12) < n - 1:
        pi = np.zeros(n)
        pi[0] = 1.0
        return pi, True
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise StationarySolveError(f"stationary solve failed: {exc}") from exc
    residual = float(np.max(np.abs(pi @ matrix - pi)))
    if residual > STATIONARY_TOL:
        raise StationarySolveError(
            f"stationary residual {residual:.3e} exceeds {STATIONARY_TOL}", residual=residual
        )
    pi = np.where(np.abs(pi) < 1e-14, np.maximum(pi, 0.0), pi)
    if pi.min() < 0.0:
        raise StationarySolveError(f"stationary solution has negative mass {pi.min():.3e}")
    return pi / pi.sum(), False


def stationary_power_iteration(
    matrix: np.ndarray, tol: float = 1e-13, max_iter: int = 1_000_000
) -> np.ndarray:
    """Independent fixed-point iteration used to cross-check the dense solve."""
    n = matrix.shape[0]
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = pi @ matrix
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        pi = nxt
    raise StationarySolveError("power iteration did not converge")


@dataclass
class ChainModel:
    """A solved Markov model for one parameter point."""

    states: tuple[tuple[int, ...], ...]
    matrix: np.ndarray
    stationary: np.ndarray
    degenerate: bool
    variant: MacVariant
    traffic: TrafficParams
    M_D: int
    s_m: int

    @property
    def utilization(self) -> float:
        """Expected number of channels carrying SU data."""
        return float(sum(pi * s[0] for s, pi in zip(self.states, self.stationary)))

    @property
    def buffered_fraction(self) -> float:
        """Steady-state probability of at least one buffered connection."""
        if not self.variant.buffering:
            return 0.0
        return float(
            sum(pi for s, pi in zip(self.states, self.stationary) if s[2] > s[0])
        )


def build_chain(scene: RadioScene, variant: MacVariant, traffic: TrafficParams) -> ChainModel:
    states, matrix = transition_matrix(scene, variant, traffic)
    pi, degenerate = stationary_distribution(matrix)
    M_D = data_channel_count(scene.M, variant.control)
    return ChainModel(
        states=states,
        matrix=matrix,
        stationary=pi,
        degenerate=degenerate,
        variant=variant,
        traffic=traffic,
        M_D=M_D,
        s_m=max_connections(scene.N, M_D),
    )


def throughput_micro(model: ChainModel, scene: RadioScene) -> float:
    """Steady-state Mbps excluding overhead: C * E[x] (C scaled for E1)."""
    capacity = scene.C
    if model.variant.error_model is ErrorModel.E1:
        capacity *= 1.0 - scene.p_e
    return capacity * model.utilization


def throughput_macro(
    scene: RadioScene, variant: MacVariant, p_d: float, p_f: float
) -> float:
    """Quasi-static PU throughput: availability factor times the no-PU chain.

    The channel-utilization chain is this module's model evaluated at p_c = 0
    (no PU ever detected), which is exactly the corrected non-OSA multichannel
    MAC chain; buffering/switching are irrelevant there.
    """
    if variant.buffering or variant.switching:
        raise ValidationError("the macroscopic model uses plain DCC or HCC variants")
    q = scene.C * scene.t_t / scene.d
    traffic = TrafficParams(p=scene.p, q=q, d=scene.d, q_p=scene.q_p, p_c=0.0)
    model = build_chain(scene, variant, traffic)
    availability = scene.q_p * (1.0 - p_d) + (1.0 - scene.q_p) * (1.0 - p_f)
    return availability * model.utilization * scene.C


def overhead_ratio(
    model_kind: ModelKind,
    variant: MacVariant,
    t_t: float,
    t_q: float,
    t_p: float,
    t_d_max: float,
) -> float:
    """Usable slot fraction xi; 1 - xi is the sensing/switching overhead."""
    if model_kind is ModelKind.MACRO:
        if t_q >= t_d_max:
            raise InfeasibleError(
                f"quiet time {t_q} us exhausts the detection window {t_d_max} us"
            )
        return (t_d_max - t_q) / t_d_max
    lost = t_q + (t_p if (variant.switching and variant.is_dcc) else 0.0)
    if lost >= t_t:
        raise InfeasibleError(f"quiet time exhausts the slot ({lost} of {t_t} us)")
    return (t_t - lost) / t_t


@dataclass
class ThroughputReport:
    """Throughput with and without the slot overhead factored in."""

    R: float
    xi: float
    R_t: float
    feasible: bool = True
    model: ChainModel | None = field(default=None, repr=False)


def mac_throughput(
    scene: RadioScene,
    variant: MacVariant,
    p_d: float,
    p_f: float,
    t_q: float,
    model_kind: ModelKind = ModelKind.MICRO,
) -> ThroughputReport:
    """End-to-end analytical throughput for one operating point."""
    xi = overhead_ratio(model_kind, variant, scene.t_t, t_q, scene.t_p, scene.t_d_max)
    if model_kind is ModelKind.MACRO:
        r = throughput_macro(scene, variant, p_d, p_f)
        model = None
    else:
        traffic = TrafficParams.from_scene(scene, variant, t_q, p_d, p_f, model_kind)
        model = build_chain(scene, variant, traffic)
        r = throughput_micro(model, scene)
    return ThroughputReport(R=r, xi=xi, R_t=xi * r, model=model)
