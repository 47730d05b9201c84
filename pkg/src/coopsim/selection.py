"""Max-min relay selection and the statistics of the selected equivalent channel.

A two-hop demodulate-and-forward path is modelled by the minimum of its link
SNRs.  With exponential links the minimum is again exponential, with a rate
equal to the sum of the link rates, and the selected channel (the maximum over
relays) has an MGF given by inclusion-exclusion over relay subsets.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .channel import ChannelRealization, LinkBudget

MAX_RELAYS = 16


@dataclass(frozen=True)
class EquivalentChannelSet:
    values: np.ndarray  # instantaneous equivalent SNR per relay
    means: np.ndarray  # average equivalent SNR per relay


@dataclass(frozen=True)
class SubsetMgfTerm:
    sign: int
    mean: float  # 1 / (summed rate over the subset)
    subset: tuple[int, ...]

    @property
    def rate(self) -> float:
        return 1.0 / self.mean


def _check_mode(mode: str, source: int | None) -> None:
    if mode == "parc":
        if source not in (1, 2):
            raise ValueError("PARC selection needs source 1 or 2")
    elif mode != "ncc":
        raise ValueError(f"unknown selection mode {mode!r}")


def _relay_rates(budget: LinkBudget, mode: str, source: int | None) -> np.ndarray:
    _check_mode(mode, source)
    if mode == "parc":
        return 1.0 / budget.sr[source - 1] + 1.0 / budget.rd
    return 1.0 / budget.sr[0] + 1.0 / budget.sr[1] + 1.0 / budget.rd


def equivalent_channels(realization: ChannelRealization, budget: LinkBudget | None = None,
                        mode: str = "parc", source: int | None = 1) -> EquivalentChannelSet:
    _check_mode(mode, source)
    if mode == "parc":
        vals = np.minimum(realization.sr[source - 1], realization.rd)
    else:
        vals = np.minimum(np.minimum(realization.sr[0], realization.sr[1]), realization.rd)
    means = np.full(vals.shape, np.nan) if budget is None else 1.0 / _relay_rates(budget, mode, source)
    return EquivalentChannelSet(vals, means)


def select_parc(realization: ChannelRealization, source: int) -> tuple[int, float]:
    """Best relay (0-based) for ``source`` by max over relays of min(SR, RD)."""
    vals = equivalent_channels(realization, mode="parc", source=source).values
    j = int(np.argmax(vals))  # first maximum: ties go to the lowest index
    return j, float(vals[j])


def select_ncc(realization: ChannelRealization) -> tuple[int, float]:
    """Best relay (0-based) by max over relays of min(S1R, S2R, RD)."""
    vals = equivalent_channels(realization, mode="ncc", source=None).values
    j = int(np.argmax(vals))
    return j, float(vals[j])


def subset_indices(n: int) -> list[tuple[int, ...]]:
    """Non-empty subsets of ``range(n)`` ordered by size."""
    if n > MAX_RELAYS:
        raise ValueError(f"subset enumeration refuses more than {MAX_RELAYS} relays")
    return [sub for size in range(1, n + 1) for sub in itertools.combinations(range(n), size)]


def subset_terms(budget: LinkBudget, mode: str = "parc", source: int | None = 1) -> list[SubsetMgfTerm]:
    """Signed inclusion-exclusion terms, one per non-empty relay subset."""
    rates = _relay_rates(budget, mode, source)
    return [SubsetMgfTerm(1 if len(sub) % 2 else -1, 1.0 / float(rates[list(sub)].sum()), sub)
            for sub in subset_indices(rates.size)]


def mgf_selected(budget: LinkBudget, mode: str = "parc", s: float = 0.0, source: int | None = 1) -> float:
    """``E[exp(-s * gamma_selected)]`` of the selected equivalent channel."""
    if s < 0:
        raise ValueError("the MGF is evaluated for s >= 0 only")
    return float(sum(t.sign / (1.0 + t.mean * s) for t in subset_terms(budget, mode, source)))


def mgf_selected_symmetric(mean: float, n_relays: int, s: float) -> float:
    """Same MGF when every relay has equivalent mean ``mean`` (binomial collapse)."""
    if s < 0:
        raise ValueError("the MGF is evaluated for s >= 0 only")
    return float(sum((-1) ** (k + 1) * comb(n_relays, k) / (1.0 + mean / k * s) for k in range(1, n_relays + 1)))


def selected_cdf(budget: LinkBudget, x, mode: str = "parc", source: int | None = 1) -> np.ndarray:
    """CDF of the selected channel as a product of per-relay exponential CDFs."""
    rates = _relay_rates(budget, mode, source)
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    return np.prod(1.0 - np.exp(-np.multiply.outer(x, rates)), axis=-1)
