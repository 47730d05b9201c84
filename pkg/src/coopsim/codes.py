"""Convolutional codes: encoding, trellises, BCJR decoding and distance spectra.

Generators are written in octal with the most significant bit acting on the
current input bit, e.g. ``133`` for ``1 011 011``.  All codewords are
zero-tail terminated: ``constraint_length - 1`` zero bits are appended to the
message, so a ``K``-bit message yields ``n * (K + m)`` coded bits.

LLR convention everywhere in the package: positive means bit 0 is more likely.
"""
from __future__ import annotations

import csv
import io
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _kernels

# Search guard: a non-catastrophic code leaves the all-zero path with positive
# weight growth, so this only trips for catastrophic generators.
_MAX_EVENT_STEPS = 10_000


def parse_generators(text: str | Sequence[int | str]) -> tuple[int, ...]:
    """Parse ``"133,165,171"`` (or a list of octal strings/ints) into integers.

    Integers are taken to be already octal-decoded; strings are read as octal.
    """
    if isinstance(text, str):
        parts = [p for p in text.replace(" ", ",").replace("[", "").replace("]", "").split(",") if p]
    else:
        parts = list(text)
    gens = []
    for p in parts:
        if isinstance(p, str):
            try:
                gens.append(int(p, 8))
            except ValueError:
                raise ValueError(f"generator {p!r} is not an octal number") from None
        else:
            gens.append(int(p))
    if not gens:
        raise ValueError("at least one generator is required")
    if any(g <= 0 for g in gens):
        raise ValueError("generators must be positive")
    return tuple(gens)


@dataclass(frozen=True)
class Trellis:
    """Dense trellis tables, see :mod:`coopsim._kernels` for the layout."""

    next_state: np.ndarray
    label: np.ndarray
    n_out: int
    n_in_bits: int = 1

    @property
    def n_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.next_state.shape[1]

    def output_bits(self, state: int, inp: int) -> np.ndarray:
        lab = int(self.label[state, inp])
        return np.array([(lab >> (self.n_out - 1 - k)) & 1 for k in range(self.n_out)], dtype=np.uint8)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.next_state.ravel(), minlength=self.n_states)


@dataclass(frozen=True)
class CodeSpec:
    """Rate ``1/n`` feedforward convolutional code."""

    generators: tuple[int, ...]
    constraint_length: int = 0
    termination: str = "zero-tail"

    def __post_init__(self):
        gens = tuple(int(g) for g in self.generators)
        if not gens:
            raise ValueError("generators must be non-empty")
        if any(g <= 0 for g in gens):
            raise ValueError("generators must be positive")
        object.__setattr__(self, "generators", gens)
        span = max(g.bit_length() for g in gens)
        if self.constraint_length == 0:
            object.__setattr__(self, "constraint_length", span)
        elif span > self.constraint_length:
            raise ValueError(
                f"generator needs {span} taps but constraint_length is {self.constraint_length}"
            )
        if self.termination != "zero-tail":
            raise ValueError("only zero-tail termination is supported")

    @classmethod
    def from_octal(cls, text: str | Sequence[int | str], constraint_length: int = 0) -> "CodeSpec":
        return cls(parse_generators(text), constraint_length)

    @property
    def n(self) -> int:
        return len(self.generators)

    @property
    def memory(self) -> int:
        return self.constraint_length - 1

    @property
    def rate(self) -> float:
        return 1.0 / self.n

    @property
    def name(self) -> str:
        return ",".join(format(g, "o") for g in self.generators)

    def codeword_length(self, k: int) -> int:
        return self.n * (k + self.memory)

    def message_length(self, n_coded: int) -> int:
        if n_coded % self.n:
            raise ValueError(f"{n_coded} coded bits is not a multiple of n={self.n}")
        k = n_coded // self.n - self.memory
        if k < 1:
            raise ValueError(f"{n_coded} coded bits is too short for this code")
        return k

    def taps(self) -> np.ndarray:
        """``(n, constraint_length)`` tap matrix, column 0 acting on the newest bit."""
        L = self.constraint_length
        return np.array(
            [[(g >> (L - 1 - j)) & 1 for j in range(L)] for g in self.generators], dtype=np.uint8
        )

    @cached_property
    def trellis(self) -> Trellis:
        m = self.memory
        n_states = 1 << m
        nxt = np.empty((n_states, 2), dtype=np.int32)
        lab = np.empty((n_states, 2), dtype=np.int32)
        for s in range(n_states):
            for b in (0, 1):
                reg = (b << m) | s
                nxt[s, b] = reg >> 1
                word = 0
                for g in self.generators:
                    word = (word << 1) | (bin(reg & g).count("1") & 1)
                lab[s, b] = word
        return Trellis(nxt, lab, self.n, 1)


def encode(data_bits: Iterable[int], code: CodeSpec) -> np.ndarray:
    """Zero-tail encode ``data_bits``; outputs are interleaved per trellis step."""
    u = np.asarray(data_bits, dtype=np.uint8).ravel()
    if u.size < 1:
        raise ValueError("data_bits must contain at least one bit")
    padded = np.concatenate([u, np.zeros(code.memory, dtype=np.uint8)])
    steps = padded.size
    streams = [np.convolve(padded, t)[:steps] & 1 for t in code.taps()]
    return np.stack(streams, axis=1).astype(np.uint8).ravel()


def _as_llr_matrix(llrs, n: int, name: str) -> np.ndarray:
    arr = np.asarray(llrs, dtype=np.float64).ravel()
    if arr.size % n:
        raise ValueError(f"{name}: length {arr.size} is not a multiple of {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: LLRs must be finite")
    return arr.reshape(-1, n)


def bcjr_decode(channel_llrs, code: CodeSpec, exact: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Bitwise MAP decoding of one zero-tail codeword.

    ``exact=False`` switches to the max-log approximation.  Returns
    ``(decisions, info_llrs)`` for the ``K`` message bits; a decision is 1
    where the a-posteriori LLR is negative.

    The exact decoder runs in the probability domain and is accurate up to
    LLR magnitudes of several hundred.  Blocks whose channel LLRs exceed the
    double range there, and the max-log decoder, use a log-domain recursion
    that prunes states far off the best path, so a-posteriori LLRs saturate
    (possibly to infinity) once their magnitude nears 30; the decisions are
    unaffected.
    """
    llr = _as_llr_matrix(channel_llrs, code.n, "channel_llrs")
    k = code.message_length(llr.size)
    tr = code.trellis
    post = _kernels.map_posteriors(tr.next_state, tr.label, llr, 1, exact)[:k, 0]
    return (post < 0).astype(np.uint8), post


# -- distance spectrum --------------------------------------------------------


@dataclass(frozen=True)
class DistanceSpectrum:
    """Error events of a single code that diverge from the zero path at a fixed time.

    ``entries[d]`` is the total input weight over all events of output weight
    ``d``; ``multiplicity[d]`` counts the events themselves.
    """

    entries: dict[int, int]
    multiplicity: dict[int, int]
    f: int
    d_max: int
    code: str = ""

    def __post_init__(self):
        if self.f < 1:
            raise ValueError("minimum distance must be positive")
        if any(d < self.f for d in self.entries):
            raise ValueError("spectrum has entries below the minimum distance")

    def weights(self) -> list[tuple[int, int]]:
        return sorted(self.entries.items())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SPECTRUM_COLUMNS)
        for d, wd in self.weights():
            w.writerow([d, d, "", "", wd, ""])
        return buf.getvalue()


SPECTRUM_COLUMNS = ("d", "d1", "d2", "dR", "w1", "w2")


def _return_distance(tr: Trellis) -> np.ndarray:
    """Minimum output weight needed to reach state 0 from every state."""
    weight = np.array([[bin(int(x)).count("1") for x in row] for row in tr.label])
    dist = np.full(tr.n_states, np.iinfo(np.int64).max // 4, dtype=np.int64)
    dist[0] = 0
    # Bellman-Ford on non-negative weights; converges in at most n_states rounds.
    for _ in range(tr.n_states):
        cand = (weight + dist[tr.next_state]).min(axis=1)
        new = np.minimum(dist, cand)
        new[0] = 0
        if np.array_equal(new, dist):
            break
        dist = new
    return dist


def compute_distance_spectrum(code: CodeSpec, d_max: int | None = None) -> DistanceSpectrum:
    """Enumerate every error event with output weight ``<= d_max``.

    Defaults to ``d_max = f + 10``; the free distance is found first when no
    truncation depth is given.
    """
    if d_max is None:
        f = _free_distance(code)
        d_max = f + 10
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    tr = code.trellis
    back = _return_distance(tr)
    weight = np.array([[bin(int(x)).count("1") for x in row] for row in tr.label])

    total_w: dict[int, int] = defaultdict(int)
    count: dict[int, int] = defaultdict(int)
    # frontier key: (state, weight so far) -> [paths, summed input weight]
    s0 = int(tr.next_state[0, 1])
    d0 = int(weight[0, 1])
    frontier: dict[tuple[int, int], list[int]] = {}
    if s0 == 0:
        if d0 <= d_max:
            count[d0] += 1
            total_w[d0] += 1
    elif d0 + back[s0] <= d_max:
        frontier[(s0, d0)] = [1, 1]

    steps = 0
    while frontier:
        steps += 1
        if steps > _MAX_EVENT_STEPS:
            raise RuntimeError(f"code {code.name} appears catastrophic: events never remerge")
        nxt: dict[tuple[int, int], list[int]] = {}
        for (s, d), (c, wsum) in frontier.items():
            for b in (0, 1):
                ns = int(tr.next_state[s, b])
                nd = d + int(weight[s, b])
                if nd + back[ns] > d_max:
                    continue
                nw = wsum + b * c
                if ns == 0:
                    count[nd] += c
                    total_w[nd] += nw
                    continue
                slot = nxt.get((ns, nd))
                if slot is None:
                    nxt[(ns, nd)] = [c, nw]
                else:
                    slot[0] += c
                    slot[1] += nw
        frontier = nxt

    if not count:
        raise ValueError(
            f"no error event of code {code.name} has output weight <= {d_max}; increase d_max"
        )
    f = min(count)
    return DistanceSpectrum(dict(sorted(total_w.items())), dict(sorted(count.items())), f, d_max, code.name)


def _free_distance(code: CodeSpec) -> int:
    tr = code.trellis
    back = _return_distance(tr)
    weight = np.array([[bin(int(x)).count("1") for x in row] for row in tr.label])
    return int(weight[0, 1] + back[tr.next_state[0, 1]])


def free_distance(code: CodeSpec) -> int:
    """Minimum output weight of any error event (shortest-path search)."""
    return _free_distance(code)


# -- compound code ------------------------------------------------------------


@dataclass(frozen=True)
class CompoundCode:
    """Product trellis realizing ``[[g, 0, g], [0, g, g]]``.

    State index ``s1 * S + s2``; input symbol ``2 * b1 + b2`` (source-1 bit is
    the high-order bit); output label is ``c1 | c2 | c1 xor c2`` with ``n``
    bits per block.
    """

    component: CodeSpec
    trellis: Trellis

    @property
    def n(self) -> int:
        return self.component.n


def build_compound_code(g: CodeSpec) -> CompoundCode:
    tr = g.trellis
    S = tr.n_states
    n = g.n
    nxt = np.empty((S * S, 4), dtype=np.int32)
    lab = np.empty((S * S, 4), dtype=np.int32)
    for s1 in range(S):
        for s2 in range(S):
            idx = s1 * S + s2
            for b1 in (0, 1):
                for b2 in (0, 1):
                    i = 2 * b1 + b2
                    nxt[idx, i] = tr.next_state[s1, b1] * S + tr.next_state[s2, b2]
                    l1 = int(tr.label[s1, b1])
                    l2 = int(tr.label[s2, b2])
                    lab[idx, i] = (l1 << (2 * n)) | (l2 << n) | (l1 ^ l2)
    return CompoundCode(g, Trellis(nxt, lab, 3 * n, 2))


@dataclass(frozen=True)
class CompoundEntry:
    d1: int
    d2: int
    dR: int
    w1: int
    w2: int
    multiplicity: int

    @property
    def d(self) -> int:
        return self.d1 + self.d2 + self.dR

    @property
    def pattern(self) -> tuple[int, int, int]:
        return (self.d1, self.d2, self.dR)


@dataclass(frozen=True)
class CompoundSpectrum:
    """Extended spectrum of the compound code, one entry per weight pattern."""

    entries: list[CompoundEntry]
    F: int
    f: int
    d_max: int
    code: str = ""

    @property
    def min_distance_is_doubled(self) -> bool:
        """``F == 2f``, reached only by the patterns (f,f,0), (f,0,f) and (0,f,f)."""
        at_f = {e.pattern for e in self.entries if e.d == self.F}
        f = self.f
        return self.F == 2 * f and at_f == {(f, f, 0), (f, 0, f), (0, f, f)}

    @property
    def two_blocks_always_hit(self) -> bool:
        """Every listed event has non-zero weight in at least two of the three blocks."""
        return all(sum(x > 0 for x in e.pattern) >= 2 for e in self.entries if e.d >= self.F)

    def patterns_at(self, d: int) -> list[CompoundEntry]:
        return [e for e in self.entries if e.d == d]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SPECTRUM_COLUMNS)
        for e in self.entries:
            w.writerow([e.d, e.d1, e.d2, e.dR, e.w1, e.w2])
        return buf.getvalue()


def compute_compound_spectrum(G: CompoundCode, d_max: int | None = None) -> CompoundSpectrum:
    """Enumerate compound error events up to total output weight ``d_max``.

    Each event is recorded with its per-block weights ``(d1, d2, dR)`` and the
    input weights ``(w1, w2)`` it carries for each source; events sharing a
    pattern are merged.  Defaults to ``d_max = 2f + 8``.
    """
    f = free_distance(G.component)
    if d_max is None:
        d_max = 2 * f + 8
    if d_max < 2 * f:
        raise ValueError(f"d_max={d_max} cannot reach the compound minimum distance 2f={2 * f}")

    tr = G.trellis
    n = G.n
    mask = (1 << n) - 1
    lab = tr.label
    w_c1 = np.vectorize(lambda x: bin(int(x) >> (2 * n)).count("1"))(lab)
    w_c2 = np.vectorize(lambda x: bin((int(x) >> n) & mask).count("1"))(lab)
    w_cr = np.vectorize(lambda x: bin(int(x) & mask).count("1"))(lab)
    back = _return_distance(tr)

    acc: dict[tuple[int, int, int], list[int]] = defaultdict(lambda: [0, 0, 0])
    frontier: dict[tuple[int, int, int, int], list[int]] = {}

    def extend(s, d1, d2, dr, c, w1, w2, i, into):
        ns = int(tr.next_state[s, i])
        nd1 = d1 + int(w_c1[s, i])
        nd2 = d2 + int(w_c2[s, i])
        ndr = dr + int(w_cr[s, i])
        if nd1 + nd2 + ndr + back[ns] > d_max:
            return
        nw1 = w1 + (i >> 1) * c
        nw2 = w2 + (i & 1) * c
        if ns == 0:
            slot = acc[(nd1, nd2, ndr)]
            slot[0] += c
            slot[1] += nw1
            slot[2] += nw2
            return
        key = (ns, nd1, nd2, ndr)
        slot = into.get(key)
        if slot is None:
            into[key] = [c, nw1, nw2]
        else:
            slot[0] += c
            slot[1] += nw1
            slot[2] += nw2

    for i in (1, 2, 3):
        extend(0, 0, 0, 0, 1, 0, 0, i, frontier)

    steps = 0
    while frontier:
        steps += 1
        if steps > _MAX_EVENT_STEPS:
            raise RuntimeError("compound search did not terminate; is the component code catastrophic?")
        nxt: dict = {}
        for (s, d1, d2, dr), (c, w1, w2) in frontier.items():
            for i in range(4):
                extend(s, d1, d2, dr, c, w1, w2, i, nxt)
        frontier = nxt

    if not acc:
        raise ValueError(f"compound search found no event with weight <= {d_max}")
    entries = [
        CompoundEntry(d1, d2, dr, w1, w2, c)
        for (d1, d2, dr), (c, w1, w2) in acc.items()
    ]
    entries.sort(key=lambda e: (e.d, e.d1, e.d2, e.dR))
    F = entries[0].d
    spec = CompoundSpectrum(entries, F, f, d_max, G.component.name)
    if F != 2 * f:
        warnings.warn(f"compound minimum distance {F} differs from 2f={2 * f}", stacklevel=2)
    return spec


def joint_decode_ncc(llr_s1, llr_s2, llr_nc, G: CompoundCode, exact: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Decode both messages from the direct streams and the network-coded stream.

    The three LLR vectors must be aligned symbol by symbol.  A zero entry in
    ``llr_nc`` marks a symbol the relay did not forward.
    """
    n = G.n
    a = _as_llr_matrix(llr_s1, n, "llr_s1")
    b = _as_llr_matrix(llr_s2, n, "llr_s2")
    c = _as_llr_matrix(llr_nc, n, "llr_nc")
    if not (a.shape == b.shape == c.shape):
        raise ValueError(f"LLR streams differ in length: {a.size}, {b.size}, {c.size}")
    k = G.component.message_length(a.size)
    llr = np.ascontiguousarray(np.hstack([a, b, c]))
    tr = G.trellis
    post = _kernels.map_posteriors(tr.next_state, tr.label, llr, 2, exact)[:k]
    return (post[:, 0] < 0).astype(np.uint8), (post[:, 1] < 0).astype(np.uint8)
