import itertools
import math

import numpy as np
import pytest

from coopsim import _kernels
from coopsim.codes import (CodeSpec, bcjr_decode, build_compound_code, compute_compound_spectrum,
                           compute_distance_spectrum, encode, free_distance, joint_decode_ncc, parse_generators)

C575 = CodeSpec.from_octal("5,7,5")
C57 = CodeSpec.from_octal("5,7")


# -- helpers: brute-force oracles ---------------------------------------------------


def naive_encode(u, code):
    """Shift-register encoder written out bit by bit."""
    m = code.memory
    reg = [0] * code.constraint_length
    out = []
    for b in list(u) + [0] * m:
        reg = [int(b)] + reg[:-1]
        for g in code.generators:
            taps = [(g >> (code.constraint_length - 1 - j)) & 1 for j in range(code.constraint_length)]
            out.append(sum(t * r for t, r in zip(taps, reg)) % 2)
    return np.array(out, dtype=np.uint8)


def brute_spectrum(code, max_len, d_max):
    """Events leaving zero at step 0: inputs starting and ending with 1, no inner run of m zeros."""
    m = code.memory
    count, wsum = {}, {}
    for L in range(1, max_len + 1):
        for tail in itertools.product((0, 1), repeat=L - 1):
            u = (1,) + tail
            if u[-1] == 0 or "0" * m in "".join(map(str, u)):
                continue  # returned to the zero state before the end
            d = int(naive_encode(u, code).sum())
            if d <= d_max:
                count[d] = count.get(d, 0) + 1
                wsum[d] = wsum.get(d, 0) + sum(u)
    return count, wsum


def map_llrs(llr, code, k, maxlog=False):
    """Exact bitwise posteriors by enumerating every message."""
    msgs = list(itertools.product((0, 1), repeat=k))
    metrics = []
    for u in msgs:
        c = encode(u, code)
        metrics.append(0.5 * np.sum((1 - 2.0 * c) * llr))
    metrics = np.array(metrics)
    out = []
    for i in range(k):
        on = np.array([u[i] for u in msgs]) == 1
        f = np.max if maxlog else lambda v: np.logaddexp.reduce(v)
        out.append(f(metrics[~on]) - f(metrics[on]))
    return np.array(out)


# -- parsing and encoding -------------------------------------------------------------


def test_parse_generators_accepts_common_spellings():
    assert parse_generators("133,165,171") == (0o133, 0o165, 0o171)
    assert parse_generators("[25 33 37]") == (0o25, 0o33, 0o37)
    assert parse_generators(["5", "7"]) == (5, 7)


@pytest.mark.parametrize("bad", ["", "9,7", "0,5"])
def test_parse_generators_rejects_garbage(bad):
    with pytest.raises(ValueError):
        parse_generators(bad)


def test_code_properties():
    c = CodeSpec.from_octal("133,165,171")
    assert (c.n, c.memory, c.constraint_length) == (3, 6, 7)
    assert c.name == "133,165,171"
    assert c.codeword_length(1024) == 3 * 1030
    assert c.message_length(3 * 1030) == 1024
    with pytest.raises(ValueError):
        c.message_length(3 * 1030 + 1)


def test_constraint_length_too_short_is_rejected():
    with pytest.raises(ValueError):
        CodeSpec((0o133,), constraint_length=5)


@pytest.mark.parametrize("gens", ["5,7,5", "25,33,37", "133,165,171", "23,35,37"])
def test_encode_matches_shift_register(gens):
    code = CodeSpec.from_octal(gens)
    rng = np.random.default_rng(1)
    for k in (1, 7, 40):
        u = rng.integers(0, 2, k)
        np.testing.assert_array_equal(encode(u, code), naive_encode(u, code))


def test_encode_is_linear_and_zero_tailed():
    code = CodeSpec.from_octal("25,33,37")
    rng = np.random.default_rng(2)
    a, b = rng.integers(0, 2, (2, 50))
    np.testing.assert_array_equal(encode(a ^ b, code), encode(a, code) ^ encode(b, code))
    # the final state is zero: the trellis walk ends in state 0
    tr = code.trellis
    s = 0
    for bit in list(a) + [0] * code.memory:
        s = tr.next_state[s, bit]
    assert s == 0


def test_trellis_labels_agree_with_encoder():
    code = CodeSpec.from_octal("23,35,37")
    tr = code.trellis
    rng = np.random.default_rng(3)
    u = rng.integers(0, 2, 30)
    c = encode(u, code).reshape(-1, code.n)
    s = 0
    for t, b in enumerate(list(u) + [0] * code.memory):
        np.testing.assert_array_equal(tr.output_bits(s, b), c[t])
        s = tr.next_state[s, b]
    assert np.all(tr.in_degree() == 2)


# -- distance spectra -------------------------------------------------------------------


@pytest.mark.parametrize("gens,f", [("5,7,5", 7), ("25,33,37", 12), ("133,165,171", 15), ("5,7", 5)])
def test_free_distance(gens, f):
    code = CodeSpec.from_octal(gens)
    assert free_distance(code) == f
    assert compute_distance_spectrum(code).f == f


@pytest.mark.parametrize("gens,max_len,d_max", [("5,7", 14, 8), ("5,7,5", 13, 11), ("23,35,37", 14, 13)])
def test_spectrum_matches_brute_force(gens, max_len, d_max):
    code = CodeSpec.from_octal(gens)
    count, wsum = brute_spectrum(code, max_len, d_max)
    # longer events only add weight above d_max, so the shorter search is complete
    assert brute_spectrum(code, max_len - 2, d_max) == (count, wsum)
    spec = compute_distance_spectrum(code, d_max)
    assert spec.multiplicity == dict(sorted(count.items()))
    assert spec.entries == dict(sorted(wsum.items()))


def test_known_spectrum_of_the_57_code():
    # the classic rate-1/2 memory-2 code: a_d = 2^(d-5), c_d = (d-4) 2^(d-5)
    spec = compute_distance_spectrum(C57, 10)
    for d in range(5, 11):
        assert spec.multiplicity[d] == 2 ** (d - 5)
        assert spec.entries[d] == (d - 4) * 2 ** (d - 5)


def test_spectrum_rejects_too_small_truncation():
    with pytest.raises(ValueError, match="increase d_max"):
        compute_distance_spectrum(C575, 5)


def test_catastrophic_code_is_detected():
    with pytest.raises(RuntimeError, match="catastrophic"):
        compute_distance_spectrum(CodeSpec.from_octal("3,3"), 6)


def test_spectrum_csv_header():
    text = compute_distance_spectrum(C575, 9).to_csv().splitlines()
    assert text[0] == "d,d1,d2,dR,w1,w2"
    assert text[1].startswith("7,")


# -- BCJR -----------------------------------------------------------------------------


@pytest.mark.parametrize("code", [C57, C575])
def test_bcjr_matches_exhaustive_map(code):
    rng = np.random.default_rng(4)
    k = 6
    for _ in range(5):
        u = rng.integers(0, 2, k)
        x = 1 - 2.0 * encode(u, code)
        llr = 4 * 0.6 * (0.6 * x + rng.normal(0, math.sqrt(0.5), x.size))
        bits, post = bcjr_decode(llr, code)
        ref = map_llrs(llr, code, k)
        np.testing.assert_array_equal(bits, (ref < 0).astype(np.uint8))
        np.testing.assert_allclose(post, ref, rtol=1e-9, atol=1e-9)
        # max-log pruning only touches posteriors approaching the 30-nat margin
        small = np.abs(ref) < 20
        _, post_ml = bcjr_decode(llr, code, exact=False)
        ref_ml = map_llrs(llr, code, k, maxlog=True)
        np.testing.assert_allclose(post_ml[small], ref_ml[small], atol=1e-9)


def test_bcjr_noiseless_roundtrip():
    code = CodeSpec.from_octal("133,165,171")
    u = np.random.default_rng(5).integers(0, 2, 500)
    bits, post = bcjr_decode(10.0 * (1 - 2.0 * encode(u, code)), code)
    np.testing.assert_array_equal(bits, u)
    assert np.all(np.sign(post) == 1 - 2.0 * u)


def test_log_domain_fallback_agrees_with_probability_domain():
    code = CodeSpec.from_octal("25,33,37")
    tr = code.trellis
    rng = np.random.default_rng(9)
    u = rng.integers(0, 2, 40)
    x = 1 - 2.0 * encode(u, code)
    llr = np.ascontiguousarray((4 * x + rng.normal(0, 2, x.size)).reshape(-1, code.n))
    post, ok = _kernels.sum_product(tr.next_state, tr.label, llr, 1)
    assert ok
    ref = _kernels.log_map(tr.next_state, tr.label, llr, 1, True)
    small = np.abs(ref) < 20
    np.testing.assert_allclose(post[small], ref[small], atol=1e-4)


def test_extreme_llrs_fall_back_to_the_log_domain():
    # a confidently wrong symbol leaves no branch within the double range
    code = CodeSpec.from_octal("5,7")
    u = np.array([1, 0, 1, 1, 0, 0])
    llr = 2000.0 * (1 - 2.0 * encode(u, code))
    llr[4] = -llr[4]
    tr = code.trellis
    assert not _kernels.sum_product(tr.next_state, tr.label, llr.reshape(-1, 2), 1)[1]
    bits, post = bcjr_decode(llr, code)
    np.testing.assert_array_equal(bits, (map_llrs(llr, code, u.size, maxlog=True) < 0).astype(np.uint8))
    assert np.all(np.isfinite(post))


def test_bcjr_input_validation():
    with pytest.raises(ValueError):
        bcjr_decode(np.zeros(7), C57)
    with pytest.raises(ValueError):
        bcjr_decode(np.full(12, np.nan), C57)


# -- compound code -----------------------------------------------------------------------


def test_compound_trellis_labels():
    G = build_compound_code(C575)
    tr = G.trellis
    rng = np.random.default_rng(6)
    u1, u2 = rng.integers(0, 2, (2, 12))
    c1 = encode(u1, C575).reshape(-1, 3)
    c2 = encode(u2, C575).reshape(-1, 3)
    s = 0
    for t, (b1, b2) in enumerate(zip(list(u1) + [0, 0], list(u2) + [0, 0])):
        out = tr.output_bits(s, 2 * b1 + b2)
        np.testing.assert_array_equal(out, np.concatenate([c1[t], c2[t], c1[t] ^ c2[t]]))
        s = tr.next_state[s, 2 * b1 + b2]
    assert s == 0


@pytest.mark.parametrize("gens,f", [("5,7,5", 7), ("25,33,37", 12), ("133,165,171", 15)])
def test_compound_minimum_distance_doubles(gens, f):
    spec = compute_compound_spectrum(build_compound_code(CodeSpec.from_octal(gens)), 2 * f + 4)
    assert spec.F == 2 * f
    assert {e.pattern for e in spec.patterns_at(2 * f)} == {(f, f, 0), (f, 0, f), (0, f, f)}
    assert spec.min_distance_is_doubled and spec.two_blocks_always_hit


def test_single_source_compound_events_mirror_the_component():
    # events where only source 2 deviates are component events copied into two blocks
    comp = compute_distance_spectrum(C575, 12)
    spec = compute_compound_spectrum(build_compound_code(C575), 24)
    for d, w in comp.weights():
        (e,) = [e for e in spec.entries if e.pattern == (0, d, d)]
        assert (e.w1, e.w2, e.multiplicity) == (0, w, comp.multiplicity[d])
        (e,) = [e for e in spec.entries if e.pattern == (d, d, 0)]
        assert (e.w1, e.w2) == (w, w)


def test_compound_spectrum_brute_force_small():
    # enumerate all pairs of short component inputs whose joint event starts at step 0
    code = C575
    m = code.memory
    d_max = 20
    expect = {}
    # component inputs start and end with a one (or are empty); padding with
    # zeros lines them up
    seqs = [(), (1,)] + [(1,) + t + (1,) for L in range(2, 9) for t in itertools.product((0, 1), repeat=L - 2)]
    for a in seqs:
        for b in seqs:
            if not a and not b:
                continue
            L = max(len(a), len(b))
            ua = np.array(a + (0,) * (L - len(a)), dtype=np.uint8)
            ub = np.array(b + (0,) * (L - len(b)), dtype=np.uint8)
            if ua[0] == 0 and ub[0] == 0:
                continue
            joint = "".join(str(int(x | y)) for x, y in zip(ua, ub))
            if "0" * m in joint:
                continue
            c1, c2 = encode(ua, code), encode(ub, code)
            key = (int(c1.sum()), int(c2.sum()), int((c1 ^ c2).sum()))
            if sum(key) > d_max:
                continue
            slot = expect.setdefault(key, [0, 0, 0])
            slot[0] += 1
            slot[1] += int(ua.sum())
            slot[2] += int(ub.sum())
    spec = compute_compound_spectrum(build_compound_code(code), d_max)
    got = {e.pattern: [e.multiplicity, e.w1, e.w2] for e in spec.entries}
    assert got == expect


def test_joint_decoder_matches_exhaustive_map():
    code = C575
    G = build_compound_code(code)
    rng = np.random.default_rng(7)
    k = 3
    msgs = list(itertools.product((0, 1), repeat=k))
    for _ in range(4):
        u1, u2 = rng.integers(0, 2, (2, k))
        c1, c2 = encode(u1, code), encode(u2, code)
        l1 = 2.0 * (1 - 2.0 * c1) + rng.normal(0, 2, c1.size)
        l2 = 2.0 * (1 - 2.0 * c2) + rng.normal(0, 2, c2.size)
        lr = 2.0 * (1 - 2.0 * (c1 ^ c2)) + rng.normal(0, 2, c1.size)
        metrics, bits1, bits2 = [], [], []
        for a in msgs:
            for b in msgs:
                e1, e2 = encode(a, code), encode(b, code)
                metrics.append(0.5 * (np.sum((1 - 2.0 * e1) * l1) + np.sum((1 - 2.0 * e2) * l2)
                                      + np.sum((1 - 2.0 * (e1 ^ e2)) * lr)))
                bits1.append(a)
                bits2.append(b)
        metrics = np.array(metrics)
        bits1, bits2 = np.array(bits1), np.array(bits2)
        exp1 = [np.logaddexp.reduce(metrics[bits1[:, i] == 0]) - np.logaddexp.reduce(metrics[bits1[:, i] == 1])
                for i in range(k)]
        exp2 = [np.logaddexp.reduce(metrics[bits2[:, i] == 0]) - np.logaddexp.reduce(metrics[bits2[:, i] == 1])
                for i in range(k)]
        d1, d2 = joint_decode_ncc(l1, l2, lr, G)
        np.testing.assert_array_equal(d1, (np.array(exp1) < 0).astype(np.uint8))
        np.testing.assert_array_equal(d2, (np.array(exp2) < 0).astype(np.uint8))


def test_joint_decoder_uses_the_relayed_stream():
    # source 1's direct stream is erased: only the XOR stream and source 2 recover it
    code = CodeSpec.from_octal("25,33,37")
    G = build_compound_code(code)
    rng = np.random.default_rng(8)
    u1, u2 = rng.integers(0, 2, (2, 64))
    c1, c2 = encode(u1, code), encode(u2, code)
    d1, d2 = joint_decode_ncc(np.zeros(c1.size), 8 * (1 - 2.0 * c2), 8 * (1 - 2.0 * (c1 ^ c2)), G)
    np.testing.assert_array_equal(d1, u1)
    np.testing.assert_array_equal(d2, u2)


def test_joint_decoder_rejects_misaligned_streams():
    G = build_compound_code(C575)
    with pytest.raises(ValueError):
        joint_decode_ncc(np.zeros(12), np.zeros(12), np.zeros(15), G)
