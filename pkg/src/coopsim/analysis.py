"""Closed-form error-probability analysis of PARC and NCC over Rayleigh fading.

Every pairwise error probability here is an MGF integral of the form

    (1/pi) * int_0^{pi/2} prod_k  sin^2(t) / (sin^2(t) + a_k)  dt

for a handful of effective SNRs ``a_k``.  The textbook partial-fraction forms
of these integrals cancel catastrophically at high SNR and are singular when
two ``a_k`` coincide; :func:`rayleigh_pep` evaluates them instead through
``p_k = sqrt(a_k / (1 + a_k))`` with every term positive, which is exact for
coincident arguments and keeps full relative precision at any SNR.

:func:`mgf_quadrature_oracle` computes the same quantities by adaptive
quadrature and shares no code with the closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Sequence

import mpmath
import numpy as np
from scipy import integrate, special

from .channel import LinkBudget
from .codes import CompoundSpectrum, DistanceSpectrum
from .selection import subset_indices


def q_function(x):
    """Gaussian tail probability ``Q(x) = P(N(0,1) > x)``."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def _check_nonneg(*args):
    for a in args:
        if not a >= 0:
            raise ValueError(f"effective SNRs must be non-negative, got {a}")


def _pep_closed_form(a, sqrt):
    # ``a``: positive effective SNRs (floats or mpmath numbers)
    p = [sqrt(x / (1 + x)) for x in a]
    scale = 1
    for x, pk in zip(a, p):
        scale = scale / ((1 + x) * (1 + pk))
    if len(a) == 1:
        return scale / 2
    if len(a) == 2:
        e1 = p[0] + p[1]
        e2 = p[0] * p[1]
        return scale * (e1 + e2) / (2 * e1)
    if len(a) == 3:
        e1 = p[0] + p[1] + p[2]
        e2 = p[0] * p[1] + p[0] * p[2] + p[1] * p[2]
        e3 = p[0] * p[1] * p[2]
        pairs = (p[0] + p[1]) * (p[0] + p[2]) * (p[1] + p[2])
        return scale * (e2 * (e1 + e2 + e3) - e3) / (2 * pairs)
    raise ValueError("at most three independent fading blocks are supported")


def rayleigh_pep(*snrs: float) -> float:
    """``E[Q(sqrt(2 * sum_k a_k X_k))]`` for independent unit-mean exponential ``X_k``.

    Supports up to three non-zero arguments; zeros drop out of the product.
    """
    _check_nonneg(*snrs)
    a = [float(x) for x in snrs if x > 0]
    if not a:
        return 0.5
    return _pep_closed_form(a, math.sqrt)


# Digits the float evaluation of a signed subset sum may lose before it is
# redone in extended precision.
_MAX_LOST_DIGITS = 6


def _selection_pep(fixed: Sequence[float], weight: float, rates: Sequence[Sequence[float]],
                   signs: Sequence[int]) -> float:
    """``sum_S sign_S * rayleigh_pep(*fixed, weight / sum(rates_S))``, free of cancellation error.

    Inclusion-exclusion sums cancel heavily at high SNR (each term decays
    with one order of diversity less than the total), amplifying rounding in
    both the terms and the subset rate sums.  When the float result has lost
    too many digits the whole sum is redone with mpmath.
    """
    vals = [sg * rayleigh_pep(*fixed, weight / math.fsum(r)) for sg, r in zip(signs, rates)]
    total = math.fsum(vals)
    mag = math.fsum(abs(v) for v in vals)
    if total > 0 and mag <= total * 10.0 ** _MAX_LOST_DIGITS:
        return total
    lost = 40 if total <= 0 else math.ceil(math.log10(mag / total))
    with mpmath.workdps(20 + lost):
        base = [mpmath.mpf(x) for x in fixed if x > 0]
        w = mpmath.mpf(weight)
        acc = mpmath.mpf(0)
        for sg, r in zip(signs, rates):
            mean = w / mpmath.fsum(mpmath.mpf(x) for x in r)
            acc += sg * _pep_closed_form(base + [mean], mpmath.sqrt)
        return float(acc)


def i1(a: float, b: float) -> float:
    """Two-block Rayleigh PEP with effective SNRs ``a`` and ``b``."""
    return rayleigh_pep(a, b)


def i2(a: float, b: float, c: float) -> float:
    """Three-block Rayleigh PEP with effective SNRs ``a``, ``b`` and ``c``."""
    return rayleigh_pep(a, b, c)


# -- quadrature oracle ----------------------------------------------------------


@dataclass(frozen=True)
class SelectedFactor:
    """A block that sees the best of several exponential equivalent channels."""

    weight: float
    means: Sequence[float]


def _selected_mgf_numeric(t: float, means: Sequence[float]) -> float:
    # E[exp(-t X)] for X = max_j Exp(mean_j), from the CDF product:
    # int_0^inf exp(-y) prod_j (1 - exp(-y / (t m_j))) dy
    if t == 0:
        return 1.0
    scales = [t * m for m in means]

    def integrand(y):
        v = math.exp(-y)
        for sc in scales:
            v *= -math.expm1(-y / sc)
        return v

    val, err = integrate.quad(integrand, 0.0, math.inf, epsabs=0.0, epsrel=1e-13, limit=400)
    return val


def mgf_quadrature_oracle(factors: Iterable[tuple[float, float]] = (),
                          selected: Iterable[SelectedFactor] = (),
                          tol: float = 1e-12) -> float:
    """``(1/pi) int_0^{pi/2} prod MGF(1/sin^2 t) dt`` by adaptive quadrature.

    ``factors`` are ``(weight, mean)`` pairs of exponential channels; each
    ``selected`` entry is a best-relay channel whose MGF is itself integrated
    numerically from its CDF.  A result whose error estimate exceeds both
    ``tol`` and 1e-10 relative raises ``RuntimeError``.
    """
    factors = [(float(w), float(m)) for w, m in factors]
    selected = list(selected)
    for w, m in factors:
        _check_nonneg(w, m)
    for sel in selected:
        _check_nonneg(sel.weight, *sel.means)

    def integrand(theta):
        s2 = math.sin(theta) ** 2
        if s2 == 0.0:
            return 0.0
        s = 1.0 / s2
        v = 1.0
        for w, m in factors:
            v /= 1.0 + w * m * s
        for sel in selected:
            v *= _selected_mgf_numeric(sel.weight * s, sel.means)
        return v

    # purely relative target: error probabilities far below ``tol`` still
    # come out to ~13 significant digits
    val, err = integrate.quad(integrand, 0.0, math.pi / 2, epsabs=0.0, epsrel=1e-13, limit=400)
    val /= math.pi
    err /= math.pi
    if err > max(tol, 1e-10 * abs(val)) and err > 1e-10 * abs(val):
        raise RuntimeError(f"quadrature did not converge: value {val:.3e}, error estimate {err:.3e}")
    return val


# -- PARC -----------------------------------------------------------------------


@dataclass
class BerBoundResult:
    contributions: dict[int, float]
    total: float
    d_max: int


def pattern_prob_parc(d: int, d2: int, N: int, L: int) -> float:
    """Probability that ``d2`` of ``d`` non-zero coded bits land in the relayed block.

    ``L`` of the ``N`` positions are relayed, chosen uniformly at random.
    """
    d1 = d - d2
    if not (0 <= L <= N and 0 <= d <= N):
        raise ValueError(f"invalid block sizes N={N}, L={L}, d={d}")
    if d2 < 0 or d1 < 0 or d2 > L or d1 > N - L:
        raise ValueError(f"pattern ({d1}, {d2}) is impossible for N={N}, L={L}")
    return comb(N - L, d1) * comb(L, d2) / comb(N, d)


def _subset_rates(*link_rates: np.ndarray) -> tuple[list[list[float]], list[int]]:
    # per non-empty relay subset: every link rate involved, and the sign
    n = link_rates[0].size
    rates, signs = [], []
    for t in subset_indices(n):
        rates.append([float(lr[j]) for j in t for lr in link_rates])
        signs.append(1 if len(t) % 2 else -1)
    return rates, signs


def _check_relays(budget: LinkBudget, n_relays: int | None) -> None:
    if n_relays is not None and n_relays != budget.n_relays:
        raise ValueError(f"budget has {budget.n_relays} relays, not {n_relays}")


def upep_parc(d: int, d2: int, budget: LinkBudget, n_relays: int | None = None, source: int = 1) -> float:
    """Fading-averaged PEP of a weight-``d`` error event with ``d2`` relayed bits."""
    _check_relays(budget, n_relays)
    if d < 1 or not 0 <= d2 <= d:
        raise ValueError(f"invalid PARC pattern d={d}, d2={d2}")
    a = d * budget.sd[source - 1]
    if d2 == 0:
        return rayleigh_pep(a)
    return _selection_pep((a,), d2, *_subset_rates(1.0 / budget.sr[source - 1], 1.0 / budget.rd))


def upep_parc_oracle(d: int, d2: int, budget: LinkBudget, source: int = 1) -> float:
    """Quadrature counterpart of :func:`upep_parc`."""
    sd = [(d, budget.sd[source - 1])]
    if d2 == 0:
        return mgf_quadrature_oracle(sd)
    means = 1.0 / (1.0 / budget.sr[source - 1] + 1.0 / budget.rd)
    return mgf_quadrature_oracle(sd, [SelectedFactor(d2, list(means))])


def ber_bound_parc(spectrum: DistanceSpectrum, budget: LinkBudget, N: int,
                   n_relays: int | None = None, source: int = 1) -> BerBoundResult:
    """Union bound on the information-bit error rate of one PARC source.

    The spectrum counts events leaving the zero path at one trellis step, so
    the weighted sum is already a per-information-bit quantity.
    """
    _check_relays(budget, n_relays)
    if not spectrum.entries:
        raise ValueError("empty distance spectrum")
    L = N // 2
    contrib = {}
    for d, w in spectrum.weights():
        lo, hi = max(0, d - (N - L)), min(d, L)
        pu = math.fsum(
            pattern_prob_parc(d, d2, N, L) * upep_parc(d, d2, budget, source=source)
            for d2 in range(lo, hi + 1)
        )
        contrib[d] = w * pu
    return BerBoundResult(contrib, math.fsum(contrib.values()), spectrum.d_max)


# -- NCC ------------------------------------------------------------------------


def _validate_ncc_pattern(pattern) -> tuple[int, int, int]:
    d1, d2, dr = (int(x) for x in pattern)
    if min(d1, d2, dr) < 0:
        raise ValueError(f"negative weight in pattern {pattern}")
    if sum(x > 0 for x in (d1, d2, dr)) < 2:
        raise ValueError(f"pattern {pattern} has fewer than two non-zero blocks")
    return d1, d2, dr


def upep_ncc(pattern, budget: LinkBudget, n_relays: int | None = None) -> float:
    """Fading-averaged PEP of a compound error event with weight pattern ``(d1, d2, dR)``."""
    _check_relays(budget, n_relays)
    d1, d2, dr = _validate_ncc_pattern(pattern)
    a = d1 * budget.sd[0]
    b = d2 * budget.sd[1]
    if dr == 0:
        return rayleigh_pep(a, b)
    return _selection_pep((a, b), dr, *_subset_rates(1.0 / budget.sr[0], 1.0 / budget.sr[1], 1.0 / budget.rd))


def upep_ncc_oracle(pattern, budget: LinkBudget) -> float:
    d1, d2, dr = _validate_ncc_pattern(pattern)
    fac = [(d1, budget.sd[0]), (d2, budget.sd[1])]
    if dr == 0:
        return mgf_quadrature_oracle(fac)
    means = 1.0 / (1.0 / budget.sr[0] + 1.0 / budget.sr[1] + 1.0 / budget.rd)
    return mgf_quadrature_oracle(fac, [SelectedFactor(dr, list(means))])


def ber_bound_ncc(cspec: CompoundSpectrum, budget: LinkBudget, n_relays: int | None = None,
                  source: int = 1) -> BerBoundResult:
    """Union bound on the bit error rate of ``source`` under joint network/channel decoding."""
    _check_relays(budget, n_relays)
    if not cspec.entries:
        raise ValueError("empty compound spectrum")
    if source not in (1, 2):
        raise ValueError("source must be 1 or 2")
    contrib: dict[int, float] = {}
    for e in cspec.entries:
        w = e.w1 if source == 1 else e.w2
        if w == 0:
            continue
        contrib[e.d] = contrib.get(e.d, 0.0) + 0.5 * w * upep_ncc(e.pattern, budget)
    return BerBoundResult(dict(sorted(contrib.items())), math.fsum(contrib.values()), cspec.d_max)


# -- diversity --------------------------------------------------------------------


def asymptotic_diversity(scheme: str, pattern, n_relays: int) -> int:
    """High-SNR slope of the UPEP for one weight pattern."""
    scheme = scheme.upper()
    if n_relays < 1:
        raise ValueError("n_relays must be >= 1")
    if scheme == "PARC":
        d1, d2 = (int(x) for x in pattern)
        if d1 < 0 or d2 < 0 or d1 + d2 == 0:
            raise ValueError(f"invalid PARC pattern {pattern}")
        return 1 if d2 == 0 else n_relays + 1
    if scheme == "NCC":
        d1, d2, dr = _validate_ncc_pattern(pattern)
        if dr == 0:
            return 2
        if d1 == 0 or d2 == 0:
            return n_relays + 1
        return n_relays + 2
    raise ValueError(f"unknown scheme {scheme!r}")


def instantaneous_diversity(curve: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Local negative log-log slope of a BER curve at its interior points.

    ``curve`` is a sequence of ``(snr_db, ber)`` pairs sorted by SNR.
    """
    pts = [(float(s), float(b)) for s, b in curve]
    if len(pts) < 3:
        raise ValueError("at least three points are needed")
    snr = np.array([s for s, _ in pts])
    ber = np.array([b for _, b in pts])
    if np.any(np.diff(snr) <= 0):
        raise ValueError("curve must be sorted by strictly increasing SNR")
    if np.any(~(ber > 0)):
        raise ValueError("BER values must be positive")
    log_g = snr * (math.log(10.0) / 10.0)
    log_p = np.log(ber)
    zeta = -(log_p[2:] - log_p[:-2]) / (log_g[2:] - log_g[:-2])
    return list(zip(snr[1:-1].tolist(), zeta.tolist()))
