"""Block Rayleigh fading links and BPSK transmission over them.

Noise is complex Gaussian with unit total variance, so after coherent
matched filtering the real-part statistic of a BPSK symbol ``x`` is
``y = sqrt(gamma) * x + n`` with ``n ~ N(0, 1/2)``.  The bit LLR is then
``4 * sqrt(gamma) * y`` and the uncoded error probability ``Q(sqrt(2 gamma))``.
Bits map to symbols as ``0 -> +1`` and ``1 -> -1``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

SOURCES = (1, 2)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def bpsk(bits) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


@dataclass(frozen=True)
class LinkBudget:
    """Average SNR (linear) of every link in a two-source, ``n_relays`` network.

    ``sd[i]`` is source ``i+1`` to destination, ``sr[i, j]`` source ``i+1`` to
    relay ``j+1`` and ``rd[j]`` relay ``j+1`` to destination.
    """

    sd: np.ndarray
    sr: np.ndarray
    rd: np.ndarray

    def __post_init__(self):
        sd = np.asarray(self.sd, dtype=float).reshape(2)
        rd = np.asarray(self.rd, dtype=float).ravel()
        sr = np.asarray(self.sr, dtype=float).reshape(2, rd.size)
        for name, arr in (("sd", sd), ("sr", sr), ("rd", rd)):
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise ValueError(f"average SNRs must be positive and finite ({name}={arr})")
        if rd.size < 1:
            raise ValueError("at least one relay is required")
        object.__setattr__(self, "sd", sd)
        object.__setattr__(self, "sr", sr)
        object.__setattr__(self, "rd", rd)

    @property
    def n_relays(self) -> int:
        return self.rd.size

    @classmethod
    def symmetric(cls, snr_sd_db: float, n_relays: int, sr_offset_db: float = 0.0,
                  rd_offset_db: float = 0.0) -> "LinkBudget":
        base = float(db_to_linear(snr_sd_db))
        return cls(
            np.full(2, base),
            np.full((2, n_relays), base * float(db_to_linear(sr_offset_db))),
            np.full(n_relays, base * float(db_to_linear(rd_offset_db))),
        )

    def replace(self, sd=None, sr=None, rd=None) -> "LinkBudget":
        return LinkBudget(
            self.sd if sd is None else sd,
            self.sr if sr is None else sr,
            self.rd if rd is None else rd,
        )

    def links(self):
        """Yield ``((tx, rx), gamma_bar)`` for every directed link."""
        for i in range(2):
            yield (f"S{i + 1}", "D"), float(self.sd[i])
        for i in range(2):
            for j in range(self.n_relays):
                yield (f"S{i + 1}", f"R{j + 1}"), float(self.sr[i, j])
        for j in range(self.n_relays):
            yield (f"R{j + 1}", "D"), float(self.rd[j])

    @property
    def gamma_bar(self) -> dict[tuple[str, str], float]:
        return dict(self.links())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["link", "gamma_bar_db"])
        for (tx, rx), g in self.links():
            w.writerow([f"{tx}-{rx}", f"{linear_to_db(g):.6f}"])
        return buf.getvalue()


def pathloss_offset_db(distance: float, exponent: float) -> float:
    """SNR gain in dB of a link of relative ``distance`` over a unit-length link."""
    return -10.0 * exponent * math.log10(distance)


def build_link_budget(snr_sd_db: float, n_relays: int, pathloss_exponent: float = 3.5,
                      relay_position: float = 0.5) -> LinkBudget:
    """Symmetric budget with every relay at ``relay_position`` along the S-D line."""
    if not math.isfinite(snr_sd_db):
        raise ValueError("snr_sd_db must be finite")
    if not 0.0 < relay_position < 1.0:
        raise ValueError("relay_position must lie strictly between 0 and 1")
    if pathloss_exponent < 0:
        raise ValueError("pathloss_exponent must be non-negative")
    if n_relays < 1:
        raise ValueError("n_relays must be >= 1")
    return LinkBudget.symmetric(
        snr_sd_db,
        n_relays,
        pathloss_offset_db(relay_position, pathloss_exponent),
        pathloss_offset_db(1.0 - relay_position, pathloss_exponent),
    )


@dataclass(frozen=True)
class ChannelRealization:
    """Fading of every link for one cooperation period (same layout as LinkBudget)."""

    h_sd: np.ndarray
    h_sr: np.ndarray
    h_rd: np.ndarray
    sd: np.ndarray
    sr: np.ndarray
    rd: np.ndarray

    @property
    def n_relays(self) -> int:
        return self.rd.size

    @property
    def gamma(self) -> dict[tuple[str, str], float]:
        return dict(LinkBudget.links(self))  # same field names, same iteration

    @classmethod
    def from_gains(cls, sd, sr, rd) -> "ChannelRealization":
        """Realization with given instantaneous SNRs and unit-phase fading."""
        sd = np.asarray(sd, dtype=float).reshape(2)
        rd = np.asarray(rd, dtype=float).ravel()
        sr = np.asarray(sr, dtype=float).reshape(2, rd.size)
        return cls(np.ones(2, complex), np.ones((2, rd.size), complex), np.ones(rd.size, complex), sd, sr, rd)


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def draw_realization(budget: LinkBudget, rng: np.random.Generator) -> ChannelRealization:
    """Independent unit-variance complex Gaussian fading on every link."""
    nr = budget.n_relays
    h_sd = _cn(rng, 2)
    h_sr = _cn(rng, (2, nr))
    h_rd = _cn(rng, nr)
    return ChannelRealization(
        h_sd, h_sr, h_rd,
        budget.sd * np.abs(h_sd) ** 2,
        budget.sr * np.abs(h_sr) ** 2,
        budget.rd * np.abs(h_rd) ** 2,
    )


def transmit(symbols, gamma: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Send BPSK symbols over a link with instantaneous SNR ``gamma``.

    Returns the matched-filter statistics and their bit LLRs.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    x = np.asarray(symbols, dtype=np.float64)
    amp = math.sqrt(gamma)
    y = amp * x + rng.standard_normal(x.shape) * math.sqrt(0.5)
    return y, 4.0 * amp * y
