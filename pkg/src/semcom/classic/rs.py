"""Systematic Reed-Solomon RS(255, 223) over GF(2^8).

Field polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D), generator roots
alpha^0 .. alpha^31. Decoding: syndromes, Berlekamp-Massey, Chien search,
Forney. Up to 16 symbol errors are corrected; beyond that the decoder either
flags failure or (rarely) miscorrects to another codeword.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PRIM = 0x11D
N = 255


def _tables():
    exp = np.zeros(512, dtype=np.int64)
    log = np.zeros(256, dtype=np.int64)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIM
    exp[255:510] = exp[:255]
    return exp, log


EXP, LOG = _tables()


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(EXP[LOG[a] + LOG[b]])


def gf_div(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(256)")
    if a == 0:
        return 0
    return int(EXP[(LOG[a] - LOG[b]) % 255])


def gf_pow(a: int, n: int) -> int:
    if a == 0:
        return 0
    return int(EXP[(LOG[a] * n) % 255])


class RSDecodeError(Exception):
    """More errors than the code can correct were detected."""


@dataclass(frozen=True)
class RSConfig:
    n: int = 255
    k: int = 223

    def __post_init__(self):
        if self.n != N or not 0 < self.k < self.n or (self.n - self.k) % 2:
            raise ValueError(f"unsupported RS parameters ({self.n}, {self.k})")

    @property
    def nsym(self) -> int:
        return self.n - self.k

    @property
    def t(self) -> int:
        return self.nsym // 2


def generator_poly(nsym: int) -> list[int]:
    """Coefficients, highest degree first, of prod_{j<nsym} (x - alpha^j)."""
    g = [1]
    for j in range(nsym):
        root = int(EXP[j])
        out = g + [0]
        for i, c in enumerate(g):
            out[i + 1] ^= gf_mul(c, root)
        g = out
    return g


_GEN: dict[int, list[int]] = {}


def rs_encode(data, cfg: RSConfig = RSConfig()) -> bytes:
    msg = bytes(data)
    if len(msg) != cfg.k:
        raise ValueError(f"rs_encode expects {cfg.k} bytes, got {len(msg)}")
    gen = _GEN.setdefault(cfg.nsym, generator_poly(cfg.nsym))
    rem = [0] * cfg.nsym
    for byte in msg:
        fb = byte ^ rem[0]
        rem = rem[1:] + [0]
        if fb:
            lf = LOG[fb]
            for i in range(cfg.nsym):
                g = gen[i + 1]
                if g:
                    rem[i] ^= int(EXP[lf + LOG[g]])
    return msg + bytes(rem)


def syndromes(received: np.ndarray, nsym: int) -> np.ndarray:
    """S_j = r(alpha^j), j < nsym, with received[0] the highest-degree coefficient."""
    r = np.asarray(received, dtype=np.int64)
    deg = np.arange(r.size - 1, -1, -1)
    nz = r != 0
    logs = LOG[r[nz]]
    degs = deg[nz]
    out = np.zeros(nsym, dtype=np.int64)
    if logs.size == 0:
        return out
    for j in range(nsym):
        out[j] = np.bitwise_xor.reduce(EXP[(logs + j * degs) % 255])
    return out


def _berlekamp_massey(synd: np.ndarray) -> list[int]:
    """Error locator, lowest degree first."""
    lam = [1]
    prev = [1]
    length, shift, b = 0, 1, 1
    for n in range(len(synd)):
        d = int(synd[n])
        for i in range(1, length + 1):
            if i < len(lam):
                d ^= gf_mul(lam[i], int(synd[n - i]))
        if d == 0:
            shift += 1
            continue
        coef = gf_div(d, b)
        update = [0] * shift + [gf_mul(coef, c) for c in prev]
        new = lam + [0] * max(0, len(update) - len(lam))
        for i, c in enumerate(update):
            new[i] ^= c
        if 2 * length <= n:
            prev, b = lam, d
            length = n + 1 - length
            shift = 1
        else:
            shift += 1
        lam = new
    while len(lam) > 1 and lam[-1] == 0:
        lam.pop()
    return lam


def _poly_eval_low(poly: list[int], x: int) -> int:
    y = 0
    for c in reversed(poly):
        y = gf_mul(y, x) ^ c
    return y


def rs_decode(received, cfg: RSConfig = RSConfig(), return_count: bool = False):
    """Correct up to ``t`` symbol errors and return the ``k`` data bytes.

    Raises :class:`RSDecodeError` when the error pattern is detectably
    uncorrectable.
    """
    r = np.frombuffer(bytes(received), dtype=np.uint8).astype(np.int64)
    if r.size != cfg.n:
        raise ValueError(f"rs_decode expects {cfg.n} bytes, got {r.size}")
    synd = syndromes(r, cfg.nsym)
    if not synd.any():
        out = bytes(r[: cfg.k].astype(np.uint8))
        return (out, 0) if return_count else out
    lam = _berlekamp_massey(synd)
    n_err = len(lam) - 1
    if n_err > cfg.t:
        raise RSDecodeError(f"locator degree {n_err} exceeds t={cfg.t}")

    # Chien search over all degrees e: root of lam at alpha^(-e)
    lam_arr = np.array(lam, dtype=np.int64)
    nz = np.nonzero(lam_arr)[0]
    e = np.arange(cfg.n)
    vals = np.zeros(cfg.n, dtype=np.int64)
    for i in nz:
        vals ^= EXP[(LOG[lam_arr[i]] - e * i) % 255]
    err_deg = e[vals == 0]
    if err_deg.size != n_err:
        raise RSDecodeError(f"found {err_deg.size} locator roots for degree {n_err}")

    # Forney: omega = S(x) * lam(x) mod x^nsym
    omega = [0] * cfg.nsym
    for i, li in enumerate(lam):
        if li == 0:
            continue
        for j in range(cfg.nsym - i):
            omega[i + j] ^= gf_mul(li, int(synd[j]))
    dlam = [lam[i] if i % 2 == 1 else 0 for i in range(1, len(lam))]
    corrected = r.copy()
    for deg in err_deg:
        x = int(EXP[deg])
        x_inv = int(EXP[(-deg) % 255])
        den = _poly_eval_low(dlam, x_inv)
        if den == 0:
            raise RSDecodeError("zero derivative in Forney step")
        mag = gf_mul(x, gf_div(_poly_eval_low(omega, x_inv), den))
        corrected[cfg.n - 1 - deg] ^= mag
    if syndromes(corrected, cfg.nsym).any():
        raise RSDecodeError("residual syndrome after correction")
    out = bytes(corrected[: cfg.k].astype(np.uint8))
    return (out, int(n_err)) if return_count else out
