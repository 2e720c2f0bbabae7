"""Physical and network constants shared by the analytical and simulation stacks.

Units follow the usual link-budget conventions: capacities in Mbps, channel
bandwidth in MHz, all times in microseconds, packet size in bits.  With Mbps
and microseconds the product C*t is directly a bit count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ValidationError

#: Bits per decimal kilobyte (1 kB = 1000 bytes).
BITS_PER_KB = 8000.0


def db_to_linear(value_db: float) -> float:
    """Convert a dB power ratio to a linear ratio."""
    return 10.0 ** (value_db / 10.0)


@dataclass(frozen=True)
class RadioScene:
    """Static description of one PU/SU network deployment.

    Attributes
    ----------
    M, N:
        Number of PU channels and of SU nodes.
    C, b:
        Per-channel capacity (Mbps) and bandwidth (MHz).
    d:
        Mean SU packet size in bits.
    q_p:
        Per-slot PU activity probability on each channel.
    gamma_db:
        PU SNR at the detector, in dB.
    p_e:
        Per-transmission channel error probability (reporting and data).
    t_t, t_p, t_d_max:
        Slot length, channel-switching time and regulatory detection-delay
        limit, all in microseconds.
    p:
        SU control-channel access probability; defaults to exp(-1)/N, the
        S-ALOHA throughput-maximising choice.
    """

    M: int
    N: int
    C: float = 1.0
    b: float = 1.0
    d: float = 5.0 * BITS_PER_KB
    q_p: float = 0.1
    gamma_db: float = -5.0
    p_e: float = 0.0
    t_t: float = 1000.0
    t_p: float = 100.0
    t_d_max: float = 1000.0
    p: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.p is None:
            object.__setattr__(self, "p", math.exp(-1.0) / self.N)
        problems = []
        if self.M < 1:
            problems.append("M must be at least 1")
        if self.N < 2:
            problems.append("N must be at least 2 (a connection needs two nodes)")
        if self.C <= 0 or self.b <= 0:
            problems.append("C and b must be positive")
        if self.d <= 0:
            problems.append("packet size d must be positive")
        if not 0.0 <= self.q_p <= 1.0:
            problems.append("q_p must lie in [0, 1]")
        if not 0.0 <= self.p_e < 1.0:
            problems.append("p_e must lie in [0, 1)")
        if not 0.0 < self.p < 1.0:
            problems.append("access probability p must lie in (0, 1)")
        if self.t_t <= 0 or self.t_p < 0 or self.t_d_max <= 0:
            problems.append("slot timings must be positive (t_p may be zero)")
        if problems:
            raise ValidationError("invalid RadioScene", problems)

    @property
    def gamma(self) -> float:
        """PU SNR as a linear ratio."""
        return db_to_linear(self.gamma_db)


def small_network(**overrides) -> RadioScene:
    """The 3-channel, 12-node reference deployment (5 kB packets)."""
    params = dict(M=3, N=12, d=5.0 * BITS_PER_KB)
    params.update(overrides)
    return RadioScene(**params)


def large_network(**overrides) -> RadioScene:
    """The 12-channel, 40-node reference deployment (20 kB packets)."""
    params = dict(M=12, N=40, d=20.0 * BITS_PER_KB)
    params.update(overrides)
    return RadioScene(**params)
