"""Relay demodulation, C-MRC soft combining at the destination, XOR network coding.

The C-MRC metric (a weighted sum of squared distances to the direct and the
relayed observation) is used in its equivalent LLR form so the decoder can
take soft values: ``L = L_direct + lambda * L_relayed`` with
``lambda = min(gamma_SR, gamma_RD) / gamma_RD``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def relay_ml_detect(y) -> np.ndarray:
    """Hard BPSK decisions from matched-filter statistics (``y < 0`` is bit 1)."""
    return (np.asarray(y) < 0).astype(np.uint8)


def cmrc_lambda(gamma_sr: float, gamma_rd: float) -> float:
    """C-MRC weight of the relayed branch; 0 when the relay-destination link is dead."""
    if gamma_sr < 0 or gamma_rd < 0:
        raise ValueError("SNRs must be non-negative")
    if gamma_rd == 0:
        return 0.0
    return min(gamma_sr, gamma_rd) / gamma_rd


def branch_llr(y, gamma: float) -> np.ndarray:
    return 4.0 * math.sqrt(gamma) * np.asarray(y, dtype=np.float64)


@dataclass
class RelayedBranch:
    """Symbols forwarded by one relay: destination statistics at ``positions``."""

    positions: np.ndarray
    y_rd: np.ndarray
    gamma_rd: float
    gamma_sr: float

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64)
        self.y_rd = np.asarray(self.y_rd, dtype=np.float64)
        if self.positions.shape != self.y_rd.shape:
            raise ValueError("positions and y_rd must have the same length")


@dataclass
class CombinerInput:
    y_sd: np.ndarray
    gamma_sd: float
    relayed: Sequence[RelayedBranch] = field(default_factory=list)


def cmrc_combine(inp: CombinerInput) -> np.ndarray:
    """Per-symbol LLRs after C-MRC of the direct path with every relayed fragment."""
    llr = branch_llr(inp.y_sd, inp.gamma_sd)
    n = llr.size
    for br in inp.relayed:
        if br.positions.size and (br.positions.min() < 0 or br.positions.max() >= n):
            raise ValueError("relayed positions fall outside the codeword")
        lam = cmrc_lambda(br.gamma_sr, br.gamma_rd)
        if lam == 0.0:
            continue
        llr[br.positions] += lam * branch_llr(br.y_rd, br.gamma_rd)
    return llr


def xor_encode(c1_hat, c2_hat) -> np.ndarray:
    a = np.asarray(c1_hat, dtype=np.uint8)
    b = np.asarray(c2_hat, dtype=np.uint8)
    if a.shape != b.shape:
        raise ValueError(f"cannot XOR codewords of shapes {a.shape} and {b.shape}")
    return a ^ b


def ncc_lambda(gamma_rd: float, gamma_s1r: float, gamma_s2r: float) -> float:
    """Weight of a network-coded relayed stream, from its three-link equivalent channel."""
    return cmrc_lambda(min(gamma_s1r, gamma_s2r), gamma_rd)


def ncc_relay_llr(y_rd, gamma_rd: float, gamma_s1r: float, gamma_s2r: float,
                  scaled: bool = True) -> np.ndarray:
    """LLRs of the network-coded stream as seen by the joint decoder.

    With ``scaled=False`` the stream is treated as error-free relaying
    (plain demodulation LLRs).
    """
    if min(gamma_rd, gamma_s1r, gamma_s2r) < 0:
        raise ValueError("SNRs must be non-negative")
    lam = ncc_lambda(gamma_rd, gamma_s1r, gamma_s2r) if scaled else 1.0
    return lam * branch_llr(y_rd, gamma_rd)
