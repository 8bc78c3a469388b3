"""Rate-1/3 parallel-concatenated turbo code with Max-Log-MAP iterative decoding.

Constituent code: recursive systematic convolutional, memory 3, feedback
1 + D^2 + D^3 (13 octal), feedforward 1 + D + D^3 (15 octal). Both trellises
are terminated. Codeword layout for ``k`` info bits::

    systematic[k] | parity1[k] | parity2[k] | tail1_sys[3] | tail1_par[3] | tail2_sys[3] | tail2_par[3]

LLRs follow the convention positive = bit 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

MEMORY = 3
N_STATES = 1 << MEMORY
TAIL = MEMORY


def _build_trellis():
    nxt = np.zeros((N_STATES, 2), dtype=np.int64)
    par = np.zeros((N_STATES, 2), dtype=np.int64)
    for s in range(N_STATES):
        s1, s2, s3 = (s >> 2) & 1, (s >> 1) & 1, s & 1
        for u in (0, 1):
            a = u ^ s2 ^ s3
            par[s, u] = a ^ s1 ^ s3
            nxt[s, u] = (a << 2) | (s1 << 1) | s2
    return nxt, par


NEXT_STATE, PARITY = _build_trellis()


@dataclass(frozen=True)
class TurboConfig:
    iterations: int = 5
    interleaver_seed: int = 1234
    extrinsic_scale: float = 1.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")


@lru_cache(maxsize=512)
def interleaver(k: int, seed: int = 1234) -> np.ndarray:
    """Pseudorandom permutation for block length ``k``; ``out[i] = in[perm[i]]``."""
    perm = np.random.default_rng([seed, k]).permutation(k)
    perm.setflags(write=False)
    return perm


def rsc_encode(bits: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (parity, tail systematic bits, tail parity bits); trellis ends in state 0."""
    state = 0
    parity = np.empty(bits.size, dtype=np.uint8)
    for i, u in enumerate(bits):
        parity[i] = PARITY[state, u]
        state = NEXT_STATE[state, u]
    tail_sys = np.empty(TAIL, dtype=np.uint8)
    tail_par = np.empty(TAIL, dtype=np.uint8)
    for j in range(TAIL):
        s2, s3 = (state >> 1) & 1, state & 1
        u = s2 ^ s3
        tail_sys[j] = u
        tail_par[j] = PARITY[state, u]
        state = NEXT_STATE[state, u]
    assert state == 0
    return parity, tail_sys, tail_par


def turbo_encode(info, cfg: TurboConfig = TurboConfig()) -> np.ndarray:
    u = np.asarray(info, dtype=np.uint8).reshape(-1)
    k = u.size
    if k < 1:
        raise ValueError("turbo_encode needs at least one information bit")
    perm = interleaver(k, cfg.interleaver_seed)
    p1, t1s, t1p = rsc_encode(u)
    p2, t2s, t2p = rsc_encode(u[perm])
    return np.concatenate([u, p1, p2, t1s, t1p, t2s, t2p])


def codeword_length(k: int) -> int:
    return 3 * k + 4 * TAIL


@numba.njit(cache=True)
def _max_log_map(lsys, lpar, lapr, tsys, tpar, nxt, par):
    """A-posteriori LLRs of the ``k`` info bits of one terminated RSC trellis."""
    k = lsys.size
    n = k + tsys.size
    ns = nxt.shape[0]
    neg = -1e300
    # branch inputs per step: systematic (+ a priori) and parity LLR
    ls = np.empty(n)
    lp = np.empty(n)
    for i in range(k):
        ls[i] = lsys[i] + lapr[i]
        lp[i] = lpar[i]
    for j in range(tsys.size):
        ls[k + j] = tsys[j]
        lp[k + j] = tpar[j]

    alpha = np.full((n + 1, ns), neg)
    alpha[0, 0] = 0.0
    for i in range(n):
        for s in range(ns):
            a = alpha[i, s]
            if a <= neg:
                continue
            for u in range(2):
                g = 0.5 * ((1 - 2 * u) * ls[i] + (1 - 2 * par[s, u]) * lp[i])
                t = nxt[s, u]
                v = a + g
                if v > alpha[i + 1, t]:
                    alpha[i + 1, t] = v
        m = alpha[i + 1].max()
        for s in range(ns):
            if alpha[i + 1, s] > neg:
                alpha[i + 1, s] -= m

    beta = np.full((n + 1, ns), neg)
    beta[n, 0] = 0.0
    for i in range(n - 1, -1, -1):
        for s in range(ns):
            best = neg
            for u in range(2):
                b = beta[i + 1, nxt[s, u]]
                if b <= neg:
                    continue
                g = 0.5 * ((1 - 2 * u) * ls[i] + (1 - 2 * par[s, u]) * lp[i])
                if b + g > best:
                    best = b + g
            beta[i, s] = best
        m = beta[i].max()
        for s in range(ns):
            if beta[i, s] > neg:
                beta[i, s] -= m

    post = np.empty(k)
    for i in range(k):
        best0 = neg
        best1 = neg
        for s in range(ns):
            a = alpha[i, s]
            if a <= neg:
                continue
            for u in range(2):
                b = beta[i + 1, nxt[s, u]]
                if b <= neg:
                    continue
                v = a + 0.5 * ((1 - 2 * u) * ls[i] + (1 - 2 * par[s, u]) * lp[i]) + b
                if u == 0:
                    if v > best0:
                        best0 = v
                elif v > best1:
                    best1 = v
        post[i] = best0 - best1
    return post


def split_codeword(llr: np.ndarray, k: int):
    llr = np.asarray(llr, dtype=np.float64)
    if llr.size != codeword_length(k):
        raise ValueError(f"expected {codeword_length(k)} LLRs for k={k}, got {llr.size}")
    s, p1, p2 = llr[:k], llr[k:2 * k], llr[2 * k:3 * k]
    t = llr[3 * k:]
    return s, p1, p2, t[0:3], t[3:6], t[6:9], t[9:12]


def turbo_decode(llr, k: int, cfg: TurboConfig = TurboConfig(), return_llr: bool = False):
    """Iterative Max-Log-MAP decoding; hard decision on the final a-posteriori LLRs."""
    ls, lp1, lp2, t1s, t1p, t2s, t2p = split_codeword(llr, k)
    perm = interleaver(k, cfg.interleaver_seed)
    ls_i = ls[perm]
    la = np.zeros(k)
    post = np.zeros(k)
    for _ in range(cfg.iterations):
        post1 = _max_log_map(ls, lp1, la, t1s, t1p, NEXT_STATE, PARITY)
        ext1 = (post1 - ls - la) * cfg.extrinsic_scale
        la2 = ext1[perm]
        post2 = _max_log_map(ls_i, lp2, la2, t2s, t2p, NEXT_STATE, PARITY)
        ext2 = (post2 - ls_i - la2) * cfg.extrinsic_scale
        la = np.empty(k)
        la[perm] = ext2
        post = np.empty(k)
        post[perm] = post2
    bits = (post < 0).astype(np.uint8)
    return (bits, post) if return_llr else bits
