"""One cooperation period, end to end, for each relaying scheme.

Every scheme spends exactly one relaying slot of ``N`` symbol periods:

========  =====================================================================
PARC      per-source best relay forwards ``floor(N/2)`` random symbols
NCC       one best relay forwards the whole XOR of both estimated codewords
REF1      every relay forwards a disjoint ``N/(2 N_r)`` share of each codeword
REF2      every relay forwards a disjoint ``N/N_r`` share of the XOR codeword
DIRECT    no relaying (coded point-to-point baseline)
UNCODED   no relaying, no channel code (uncoded BPSK baseline)
========  =====================================================================

Within a round, random draws happen in a fixed order (fading, messages, noise)
and relayed index sets come from a child stream spawned off the round's
generator, so a round is a pure function of its generator state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import detect
from .channel import ChannelRealization, LinkBudget, bpsk, draw_realization, transmit
from .codes import CodeSpec, CompoundCode, bcjr_decode, build_compound_code, encode, joint_decode_ncc
from .selection import select_ncc, select_parc

SCHEMES = ("PARC", "NCC", "REF1", "REF2", "DIRECT", "UNCODED")


@lru_cache(maxsize=8)
def compound_code(code: CodeSpec) -> CompoundCode:
    return build_compound_code(code)


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str
    code: CodeSpec
    n_relays: int = 1
    k: int = 1024
    ncc_scaling: bool = True
    exact: bool = True

    def __post_init__(self):
        name = self.scheme.upper()
        if name not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        object.__setattr__(self, "scheme", name)
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n_relays < 1:
            raise ValueError("n_relays must be >= 1")

    @property
    def n(self) -> int:
        """Coded symbols per source and cooperation period."""
        if self.scheme == "UNCODED":
            return self.k
        return self.code.codeword_length(self.k)


@dataclass
class RoundResult:
    bit_errors: np.ndarray  # per source
    frame_error: np.ndarray  # per source
    bits: int  # per source
    relayed_symbols: int = 0

    def __post_init__(self):
        self.bit_errors = np.asarray(self.bit_errors, dtype=np.int64)
        self.frame_error = np.asarray(self.frame_error, dtype=bool)


@dataclass
class _Sources:
    u: list[np.ndarray]
    c: list[np.ndarray]
    x: list[np.ndarray]
    y_sd: list[np.ndarray] = field(default_factory=list)


def _broadcast(cfg: SchemeConfig, real: ChannelRealization, rng: np.random.Generator) -> _Sources:
    u = [rng.integers(0, 2, cfg.k, dtype=np.uint8) for _ in range(2)]
    if cfg.scheme == "UNCODED":
        c = u
    else:
        c = [encode(ui, cfg.code) for ui in u]
    x = [bpsk(ci) for ci in c]
    src = _Sources(u, c, x)
    for i in range(2):
        y, _ = transmit(x[i], real.sd[i], rng)
        src.y_sd.append(y)
    return src


def _result(cfg: SchemeConfig, src: _Sources, decoded, relayed: int) -> RoundResult:
    errs = np.array([int(np.count_nonzero(d != u)) for d, u in zip(decoded, src.u)])
    return RoundResult(errs, errs > 0, cfg.k, relayed)


def _decode(cfg: SchemeConfig, llr: np.ndarray) -> np.ndarray:
    return bcjr_decode(llr, cfg.code, exact=cfg.exact)[0]


def _relay_forward(c_hat: np.ndarray, gamma_rd: float, rng: np.random.Generator) -> np.ndarray:
    return transmit(bpsk(c_hat), gamma_rd, rng)[0]


def run_parc_round(cfg: SchemeConfig, budget: LinkBudget, rng: np.random.Generator) -> RoundResult:
    real = draw_realization(budget, rng)
    src = _broadcast(cfg, real, rng)
    theta_rng = rng.spawn(1)[0]
    n = cfg.n
    L = n // 2
    decoded = []
    for i in range(2):
        j, _ = select_parc(real, i + 1)
        theta = np.sort(theta_rng.choice(n, L, replace=False))
        y_sr, _ = transmit(src.x[i][theta], real.sr[i, j], rng)
        y_rd = _relay_forward(detect.relay_ml_detect(y_sr), real.rd[j], rng)
        branch = detect.RelayedBranch(theta, y_rd, real.rd[j], real.sr[i, j])
        llr = detect.cmrc_combine(detect.CombinerInput(src.y_sd[i], real.sd[i], [branch]))
        decoded.append(_decode(cfg, llr))
    return _result(cfg, src, decoded, 2 * L)


def _joint(cfg: SchemeConfig, src: _Sources, real: ChannelRealization, llr_nc: np.ndarray):
    llr_sd = [detect.branch_llr(src.y_sd[i], real.sd[i]) for i in range(2)]
    return joint_decode_ncc(llr_sd[0], llr_sd[1], llr_nc, compound_code(cfg.code), exact=cfg.exact)


def run_ncc_round(cfg: SchemeConfig, budget: LinkBudget, rng: np.random.Generator) -> RoundResult:
    real = draw_realization(budget, rng)
    src = _broadcast(cfg, real, rng)
    j, _ = select_ncc(real)
    c_hat = [detect.relay_ml_detect(transmit(src.x[i], real.sr[i, j], rng)[0]) for i in range(2)]
    y_rd = _relay_forward(detect.xor_encode(*c_hat), real.rd[j], rng)
    llr_nc = detect.ncc_relay_llr(y_rd, real.rd[j], real.sr[0, j], real.sr[1, j], cfg.ncc_scaling)
    return _result(cfg, src, _joint(cfg, src, real, llr_nc), cfg.n)


def _partition(rng: np.random.Generator, n: int, parts: int, size: int) -> list[np.ndarray]:
    perm = rng.permutation(n)
    return [np.sort(perm[p * size:(p + 1) * size]) for p in range(parts)]


def run_ref1_round(cfg: SchemeConfig, budget: LinkBudget, rng: np.random.Generator) -> RoundResult:
    real = draw_realization(budget, rng)
    src = _broadcast(cfg, real, rng)
    theta_rng = rng.spawn(1)[0]
    n, nr = cfg.n, budget.n_relays
    share = n // (2 * nr)
    decoded = []
    for i in range(2):
        branches = []
        for j, pos in enumerate(_partition(theta_rng, n, nr, share)):
            y_sr, _ = transmit(src.x[i][pos], real.sr[i, j], rng)
            y_rd = _relay_forward(detect.relay_ml_detect(y_sr), real.rd[j], rng)
            branches.append(detect.RelayedBranch(pos, y_rd, real.rd[j], real.sr[i, j]))
        llr = detect.cmrc_combine(detect.CombinerInput(src.y_sd[i], real.sd[i], branches))
        decoded.append(_decode(cfg, llr))
    return _result(cfg, src, decoded, 2 * nr * share)


def run_ref2_round(cfg: SchemeConfig, budget: LinkBudget, rng: np.random.Generator) -> RoundResult:
    real = draw_realization(budget, rng)
    src = _broadcast(cfg, real, rng)
    theta_rng = rng.spawn(1)[0]
    n, nr = cfg.n, budget.n_relays
    share = n // nr
    llr_nc = np.zeros(n)
    for j, pos in enumerate(_partition(theta_rng, n, nr, share)):
        c_hat = [detect.relay_ml_detect(transmit(src.x[i][pos], real.sr[i, j], rng)[0]) for i in range(2)]
        y_rd = _relay_forward(detect.xor_encode(*c_hat), real.rd[j], rng)
        llr_nc[pos] = detect.ncc_relay_llr(y_rd, real.rd[j], real.sr[0, j], real.sr[1, j], cfg.ncc_scaling)
    return _result(cfg, src, _joint(cfg, src, real, llr_nc), nr * share)


def run_direct_round(cfg: SchemeConfig, budget: LinkBudget, rng: np.random.Generator) -> RoundResult:
    real = draw_realization(budget, rng)
    src = _broadcast(cfg, real, rng)
    decoded = [_decode(cfg, detect.branch_llr(src.y_sd[i], real.sd[i])) for i in range(2)]
    return _result(cfg, src, decoded, 0)


def run_uncoded_round(cfg: SchemeConfig, budget: LinkBudget, rng: np.random.Generator) -> RoundResult:
    real = draw_realization(budget, rng)
    src = _broadcast(cfg, real, rng)
    decoded = [detect.relay_ml_detect(y) for y in src.y_sd]
    return _result(cfg, src, decoded, 0)


_RUNNERS = {
    "PARC": run_parc_round,
    "NCC": run_ncc_round,
    "REF1": run_ref1_round,
    "REF2": run_ref2_round,
    "DIRECT": run_direct_round,
    "UNCODED": run_uncoded_round,
}


def run_round(cfg: SchemeConfig, budget: LinkBudget, rng: np.random.Generator) -> RoundResult:
    if budget.n_relays != cfg.n_relays:
        raise ValueError(f"budget has {budget.n_relays} relays but the scheme expects {cfg.n_relays}")
    return _RUNNERS[cfg.scheme](cfg, budget, rng)
