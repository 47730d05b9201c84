"""Monte Carlo BER campaigns: SNR sweeps with adaptive stopping.

A campaign is a grid of cells ``(scheme, code, n_relays, snr_db)``.  Each cell
runs cooperation rounds in fixed-size batches until ``min_bit_errors`` errors
(and, optionally, ``min_error_packets`` packets with at least one error) are
seen or ``max_packets`` rounds are spent.  Fading is constant over a packet,
so bit errors arrive in bursts; the packet floor guards against estimates
built from one or two bad fades.  Round ``t`` of a cell draws from
its own generator seeded by ``(seed, cell id, t)``, so a cell's result does not
depend on how many workers run the campaign or in what order.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .channel import build_link_budget
from .codes import CodeSpec
from .schemes import SCHEMES, SchemeConfig, run_round

CSV_COLUMNS = ("scheme", "code", "n_relays", "snr_db", "packets", "bits", "bit_errors", "ber", "ci95", "seconds")
WORKERS_ENV = "COOPSIM_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be >= 1")
    return n


@dataclass(frozen=True)
class CampaignConfig:
    schemes: Sequence[str]
    codes: Sequence[str]
    n_relays: Sequence[int]
    snr_db: Sequence[float]
    k: int = 1024
    min_bit_errors: int = 100
    max_packets: int = 200_000
    min_error_packets: int = 0
    seed: int = 0
    batch_size: int = 8
    pathloss_exponent: float = 3.5
    relay_position: float = 0.5
    ncc_scaling: bool = True
    exact: bool = True
    # stop a curve once a point measures a BER below this (None: never)
    ber_floor: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(s.upper() for s in self.schemes))
        object.__setattr__(self, "codes", tuple(CodeSpec.from_octal(c).name for c in self.codes))
        object.__setattr__(self, "n_relays", tuple(int(n) for n in self.n_relays))
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; expected one of {SCHEMES}")
        if not (self.schemes and self.codes and self.n_relays and self.snr_db):
            raise ValueError("schemes, codes, n_relays and snr_db must all be non-empty")
        if any(n < 1 for n in self.n_relays):
            raise ValueError("n_relays entries must be >= 1")
        if list(self.snr_db) != sorted(self.snr_db) or len(set(self.snr_db)) != len(self.snr_db):
            raise ValueError("the SNR grid must be strictly ascending")
        if self.min_bit_errors < 1:
            raise ValueError("min_bit_errors must be >= 1")
        if self.min_error_packets < 0:
            raise ValueError("min_error_packets must be >= 0")
        if self.max_packets < 1 or self.batch_size < 1 or self.k < 1:
            raise ValueError("max_packets, batch_size and k must be >= 1")
        if self.ber_floor is not None and not self.ber_floor > 0:
            raise ValueError("ber_floor must be positive")

    def curves(self) -> list[tuple[str, str, int]]:
        return [(s, c, n) for s in self.schemes for c in self.codes for n in self.n_relays]


@dataclass
class BerRecord:
    scheme: str
    code: str
    n_relays: int
    snr_db: float
    packets: int
    bits: int
    bit_errors: int
    seconds: float = 0.0
    stopped_by: str = "errors"  # or "packets"
    error_packets: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else math.nan

    @property
    def ci95(self) -> float:
        """Half-width of the normal-approximation 95% interval."""
        if not self.bits:
            return math.nan
        p = self.ber
        return 1.96 * math.sqrt(p * (1.0 - p) / self.bits)

    @property
    def curve(self) -> tuple[str, str, int]:
        return (self.scheme, self.code, self.n_relays)


@dataclass
class CellFailure:
    scheme: str
    code: str
    n_relays: int
    snr_db: float
    error: str


@dataclass
class CampaignResult:
    records: list[BerRecord] = field(default_factory=list)
    failures: list[CellFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def cell_id(scheme: str, code: str, n_relays: int, snr_db: float) -> int:
    key = f"{scheme}|{code}|{n_relays}|{snr_db!r}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def trial_rng(seed: int, cell: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, cell, trial]))


def run_cell(cfg: CampaignConfig, scheme: str, code: str, n_relays: int, snr_db: float) -> BerRecord:
    """Simulate one grid point until its stopping rule fires."""
    start = time.perf_counter()
    sc = SchemeConfig(scheme, CodeSpec.from_octal(code), n_relays, cfg.k, cfg.ncc_scaling, cfg.exact)
    budget = build_link_budget(snr_db, n_relays, cfg.pathloss_exponent, cfg.relay_position)
    cid = cell_id(scheme, code, n_relays, snr_db)
    packets = errors = bits = bad = 0

    def enough():
        return errors >= cfg.min_bit_errors and bad >= cfg.min_error_packets

    while not enough() and packets < cfg.max_packets:
        stop = min(packets + cfg.batch_size, cfg.max_packets)
        for t in range(packets, stop):
            res = run_round(sc, budget, trial_rng(cfg.seed, cid, t))
            e = int(res.bit_errors.sum())
            errors += e
            bad += e > 0
            bits += res.bits * res.bit_errors.size
        packets = stop
    return BerRecord(scheme, code, n_relays, snr_db, packets, bits, errors,
                     time.perf_counter() - start, "errors" if enough() else "packets", bad)


def _run_curve(cfg: CampaignConfig, curve: tuple[str, str, int]) -> tuple[list[BerRecord], list[CellFailure]]:
    scheme, code, nr = curve
    recs, fails = [], []
    for snr in cfg.snr_db:
        try:
            rec = run_cell(cfg, scheme, code, nr, snr)
        except Exception as exc:  # isolate the cell, keep the campaign going
            fails.append(CellFailure(scheme, code, nr, snr, f"{type(exc).__name__}: {exc}"))
            continue
        recs.append(rec)
        if cfg.ber_floor is not None and rec.ber < cfg.ber_floor:
            break
    return recs, fails


def run_campaign(cfg: CampaignConfig, workers: int | None = None) -> CampaignResult:
    """Run every cell of the grid; curves are distributed over ``workers`` processes."""
    workers = default_workers() if workers is None else workers
    if workers < 1:
        raise ValueError("workers must be >= 1")
    curves = cfg.curves()
    if workers == 1 or len(curves) == 1:
        parts = [_run_curve(cfg, c) for c in curves]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(curves))) as pool:
            parts = list(pool.map(_run_curve, [cfg] * len(curves), curves))
    out = CampaignResult()
    for recs, fails in parts:
        out.records.extend(recs)
        out.failures.extend(fails)
    return out


def records_to_csv(records: Iterable[BerRecord], timing: bool = False, header: Sequence[str] = ()) -> str:
    """CSV in the fixed column order.

    Wall time is only written with ``timing=True``; otherwise the column
    holds 0 so identical campaigns give byte-identical files.
    """
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([
            r.scheme, r.code, r.n_relays, f"{r.snr_db:g}", r.packets, r.bits, r.bit_errors,
            f"{r.ber:.6e}", f"{r.ci95:.6e}", f"{r.seconds:.3f}" if timing else "0",
        ])
    return buf.getvalue()


@dataclass
class AnalyticRecord(BerRecord):
    """A curve point whose BER is given directly (analytic bound or parsed CSV)."""

    value: float = math.nan
    half_width: float = 0.0

    @property
    def ber(self) -> float:
        return self.value

    @property
    def ci95(self) -> float:
        return self.half_width


def read_records_csv(text: str) -> list[BerRecord]:
    """Parse a BER CSV (comment lines starting with ``#`` are skipped)."""
    rows = [line for line in text.splitlines() if line.strip() and not line.startswith("#")]
    reader = csv.DictReader(rows)
    missing = [c for c in ("scheme", "code", "n_relays", "snr_db", "ber") if c not in (reader.fieldnames or ())]
    if missing:
        raise ValueError(f"BER CSV lacks columns {missing}")
    out = []
    for row in reader:
        bits = int(row.get("bits") or 0)
        errs = int(row.get("bit_errors") or 0)
        rec = AnalyticRecord(row["scheme"], row["code"], int(row["n_relays"]), float(row["snr_db"]),
                             int(row.get("packets") or 0), bits, errs, float(row.get("seconds") or 0.0),
                             value=float(row["ber"]))
        out.append(rec)
    return out


def group_curves(records: Iterable[BerRecord]) -> dict[tuple[str, str, int], list[BerRecord]]:
    out: dict[tuple[str, str, int], list[BerRecord]] = {}
    for r in records:
        out.setdefault(r.curve, []).append(r)
    for pts in out.values():
        pts.sort(key=lambda r: r.snr_db)
    return out


@dataclass(frozen=True)
class Crossing:
    snr_db: float | None

    @property
    def found(self) -> bool:
        return self.snr_db is not None


def estimate_crossing(records: Sequence[BerRecord] | Sequence[tuple[float, float]], target_ber: float) -> Crossing:
    """SNR where a BER curve first falls through ``target_ber``.

    Interpolates log10(BER) linearly in dB between the adjacent grid points
    that bracket the target.  Points with zero BER are ignored.
    """
    if not target_ber > 0:
        raise ValueError("target_ber must be positive")
    pts = []
    for r in records:
        s, b = (r.snr_db, r.ber) if isinstance(r, BerRecord) else (float(r[0]), float(r[1]))
        if b > 0 and math.isfinite(b):
            pts.append((s, b))
    pts.sort()
    lt = math.log10(target_ber)
    for (s0, b0), (s1, b1) in zip(pts, pts[1:]):
        if b0 == target_ber:
            return Crossing(s0)
        if b0 > target_ber >= b1:
            l0, l1 = math.log10(b0), math.log10(b1)
            return Crossing(s0 + (s1 - s0) * (l0 - lt) / (l0 - l1))
    if pts and pts[-1][1] == target_ber:
        return Crossing(pts[-1][0])
    return Crossing(None)
