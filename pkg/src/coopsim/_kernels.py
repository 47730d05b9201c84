"""Compiled trellis recursions shared by the single and compound decoders.

A trellis is described by two dense tables:

* ``next_state[s, i]``  -- state reached from ``s`` on input symbol ``i``
* ``label[s, i]``       -- integer output label; bit ``n_out - 1 - k`` holds
  output bit ``k`` of the branch

Channel LLRs use the convention ``L = log P(c=0) - log P(c=1)``.

:func:`sum_product` is the fast exact recursion; :func:`log_map` works in the
log domain (exact Jacobian logarithm or max-log) and takes over whenever the
probability domain runs out of range.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

# Unreachable states carry a large finite metric instead of -inf so that the
# inner loops stay branch-free; anything below _DEAD counts as unreachable.
_NEG = -1e30
_DEAD = -5e29

# log(1 + exp(-x)) sampled on [0, _CORR_SPAN] and zero beyond; linear
# interpolation keeps the absolute error below 2e-6, far under any
# decision-relevant LLR scale.
_CORR_STEP = 1.0 / 128.0
_CORR_SPAN = 24.0
_CORR = np.log1p(np.exp(-np.arange(0.0, _CORR_SPAN + 2 * _CORR_STEP, _CORR_STEP)))
_CORR[-2:] = 0.0

# States whose best path metric through them trails the best overall path by
# more than this (in nats) are skipped in the forward pass; their share of any
# posterior is below exp(-_PRUNE) per state.
_PRUNE = 30.0


@njit(cache=True, inline="always")
def _max_star(a, b, exact):
    top = max(a, b)
    if not exact:
        return top
    pos = min(abs(a - b), _CORR_SPAN) * (1.0 / _CORR_STEP)
    j = int(pos)
    return top + _CORR[j] + (pos - j) * (_CORR[j + 1] - _CORR[j])


@njit(cache=True)
def _label_metrics(llr_row, n_out):
    """Half-LLR correlation of every possible output label with one LLR row."""
    n_labels = 1 << n_out
    out = np.zeros(n_labels)
    for lab in range(n_labels):
        acc = 0.0
        for k in range(n_out):
            bit = (lab >> (n_out - 1 - k)) & 1
            if bit:
                acc -= llr_row[k]
            else:
                acc += llr_row[k]
        out[lab] = 0.5 * acc
    return out


@njit(cache=True)
def log_map(next_state, label, llr, n_in_bits, exact):
    """Forward-backward over a zero-started, zero-terminated trellis.

    ``llr`` has shape ``(T, n_out)``.  Returns a ``(T, n_in_bits)`` array of
    a-posteriori LLRs for the input bits; input bit ``b`` of symbol ``i`` is
    ``(i >> (n_in_bits - 1 - b)) & 1``.
    """
    n_states, n_inputs = next_state.shape
    n_steps, n_out = llr.shape

    beta = np.full((n_steps + 1, n_states), _NEG)
    beta[n_steps, 0] = 0.0
    for t in range(n_steps - 1, -1, -1):
        lm = _label_metrics(llr[t], n_out)
        top = _NEG
        for s in range(n_states):
            acc = _NEG
            for i in range(n_inputs):
                acc = _max_star(acc, lm[label[s, i]] + beta[t + 1, next_state[s, i]], exact)
            beta[t, s] = acc
            if acc > top:
                top = acc
        for s in range(n_states):
            beta[t, s] -= top

    out = np.zeros((n_steps, n_in_bits))
    alpha = np.full(n_states, _NEG)
    alpha[0] = 0.0
    new_alpha = np.empty(n_states)
    per_input = np.empty(n_inputs)
    for t in range(n_steps):
        lm = _label_metrics(llr[t], n_out)
        new_alpha[:] = _NEG
        per_input[:] = _NEG
        floor = _NEG
        for s in range(n_states):
            v = alpha[s] + beta[t, s]
            if v > floor:
                floor = v
        floor -= _PRUNE
        for s in range(n_states):
            a = alpha[s]
            if a + beta[t, s] < floor:
                continue
            for i in range(n_inputs):
                ns = next_state[s, i]
                g = a + lm[label[s, i]]
                new_alpha[ns] = _max_star(new_alpha[ns], g, exact)
                per_input[i] = _max_star(per_input[i], g + beta[t + 1, ns], exact)
        for b_idx in range(n_in_bits):
            shift = n_in_bits - 1 - b_idx
            zero = _NEG
            one = _NEG
            for i in range(n_inputs):
                if (i >> shift) & 1:
                    one = _max_star(one, per_input[i], exact)
                else:
                    zero = _max_star(zero, per_input[i], exact)
            if zero < _DEAD and one < _DEAD:
                out[t, b_idx] = 0.0
            elif one < _DEAD:
                out[t, b_idx] = np.inf
            elif zero < _DEAD:
                out[t, b_idx] = -np.inf
            else:
                out[t, b_idx] = zero - one
        top = _NEG
        for s in range(n_states):
            if new_alpha[s] > top:
                top = new_alpha[s]
        for s in range(n_states):
            alpha[s] = new_alpha[s] - top
    return out


# Per-step normalisers below this mean the probability-domain recursion has
# lost too much range; the caller then reruns the block in the log domain.
_TINY = 1e-200


@njit(cache=True)
def _label_probs(llr_row, n_out):
    lm = _label_metrics(llr_row, n_out)
    return np.exp(lm - lm.max())


@njit(cache=True)
def sum_product(next_state, label, llr, n_in_bits):
    """Exact MAP recursion in the probability domain with per-step scaling.

    Same contract as :func:`log_map`.  Returns ``(posteriors, ok)``; ``ok``
    is False when a scaling factor underflowed, in which case the
    posteriors must not be used.
    """
    n_states, n_inputs = next_state.shape
    n_steps, n_out = llr.shape
    out = np.zeros((n_steps, n_in_bits))

    beta = np.zeros((n_steps + 1, n_states))
    beta[n_steps, 0] = 1.0
    for t in range(n_steps - 1, -1, -1):
        gp = _label_probs(llr[t], n_out)
        nxt = beta[t + 1]
        cur = beta[t]
        total = 0.0
        for s in range(n_states):
            acc = 0.0
            for i in range(n_inputs):
                acc += gp[label[s, i]] * nxt[next_state[s, i]]
            cur[s] = acc
            total += acc
        if not total > _TINY:
            return out, False
        cur *= 1.0 / total

    alpha = np.zeros(n_states)
    alpha[0] = 1.0
    new_alpha = np.empty(n_states)
    per_input = np.empty(n_inputs)
    for t in range(n_steps):
        gp = _label_probs(llr[t], n_out)
        nxt = beta[t + 1]
        new_alpha[:] = 0.0
        per_input[:] = 0.0
        for s in range(n_states):
            a = alpha[s]
            if a == 0.0:
                continue
            for i in range(n_inputs):
                ns = next_state[s, i]
                g = a * gp[label[s, i]]
                new_alpha[ns] += g
                per_input[i] += g * nxt[ns]
        for b_idx in range(n_in_bits):
            shift = n_in_bits - 1 - b_idx
            zero = 0.0
            one = 0.0
            for i in range(n_inputs):
                if (i >> shift) & 1:
                    one += per_input[i]
                else:
                    zero += per_input[i]
            if not zero + one > _TINY:
                return out, False
            if one == 0.0:
                out[t, b_idx] = np.inf
            elif zero == 0.0:
                out[t, b_idx] = -np.inf
            else:
                out[t, b_idx] = math.log(zero / one)
        total = new_alpha.sum()
        if not total > _TINY:
            return out, False
        alpha[:] = new_alpha * (1.0 / total)
    return out, True


def map_posteriors(next_state, label, llr, n_in_bits, exact=True):
    """Input-bit posteriors: exact MAP, or max-log when ``exact`` is False."""
    if exact:
        post, ok = sum_product(next_state, label, llr, n_in_bits)
        if ok:
            return post
    return log_map(next_state, label, llr, n_in_bits, exact)
