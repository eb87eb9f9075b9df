"""Fourier-side state, model parameters, small divisors and norms.

All norms are norms of the coefficient sequence ``u(n)``, ``|n| <= N``; no
factors of ``2*pi`` appear anywhere.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class ModelParams:
    """One model instance: dispersion ``alpha``, sign ``sigma``, truncation, ball radius."""

    alpha: float
    sigma: int = 1
    n_trunc: int = 8
    radius: float = 1.0

    def __post_init__(self):
        if not 0.5 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (1/2, 1], got {self.alpha}")
        if self.sigma not in (-1, 1):
            raise ValueError(f"sigma must be +1 or -1, got {self.sigma}")
        if int(self.n_trunc) != self.n_trunc or self.n_trunc < 0:
            raise ValueError(f"n_trunc must be a nonnegative integer, got {self.n_trunc}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    @property
    def integer_divisors(self) -> bool:
        """True when ``alpha == 1`` and divisors are exact integers."""
        return self.alpha == 1.0

    @property
    def size(self) -> int:
        return 2 * self.n_trunc + 1

    def with_n(self, n_trunc: int) -> "ModelParams":
        return ModelParams(self.alpha, self.sigma, n_trunc, self.radius)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "sigma": self.sigma,
                "N": self.n_trunc, "R": self.radius}


@dataclass(frozen=True)
class FourierState:
    """Coefficients ``u(-N), ..., u(N)`` of a trigonometric polynomial."""

    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.ndim != 1 or c.size % 2 != 1:
            raise ValueError("coefficient vector must be 1-D with odd length 2N+1")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __array__(self, dtype=None, copy=None):
        return self.coeffs if dtype is None else self.coeffs.astype(dtype)

    @property
    def n_trunc(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.n_trunc, self.n_trunc + 1)

    def __getitem__(self, n: int) -> complex:
        if abs(n) > self.n_trunc:
            return 0j
        return complex(self.coeffs[n + self.n_trunc])

    @classmethod
    def zeros(cls, n_trunc: int) -> "FourierState":
        return cls(np.zeros(2 * n_trunc + 1, dtype=np.complex128))

    @classmethod
    def from_modes(cls, n_trunc: int, values: dict[int, complex]) -> "FourierState":
        c = np.zeros(2 * n_trunc + 1, dtype=np.complex128)
        for n, v in values.items():
            c[n + n_trunc] = v
        return cls(c)

    # serialization: [N, re(-N), im(-N), ..., re(N), im(N)]
    def to_record(self) -> list:
        flat = np.column_stack([self.coeffs.real, self.coeffs.imag]).ravel()
        return [self.n_trunc] + flat.tolist()

    def to_json(self) -> str:
        return json.dumps(self.to_record())

    @classmethod
    def from_record(cls, rec) -> "FourierState":
        n = int(rec[0])
        vals = np.asarray(rec[1:], dtype=np.float64)
        if vals.size != 2 * (2 * n + 1):
            raise ValueError(f"record for N={n} needs {2 * (2 * n + 1)} floats, got {vals.size}")
        return cls(vals[0::2] + 1j * vals[1::2])

    @classmethod
    def from_json(cls, text: str) -> "FourierState":
        return cls.from_record(json.loads(text))

    def to_bytes(self) -> bytes:
        return np.asarray(self.to_record(), dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> "FourierState":
        (n,) = struct.unpack_from("<d", data, offset)
        n = int(n)
        vals = np.frombuffer(data, dtype="<f8", count=2 * (2 * n + 1), offset=offset + 8)
        return cls(vals[0::2] + 1j * vals[1::2])


def record_nbytes(n_trunc: int) -> int:
    return 8 * (1 + 2 * (2 * n_trunc + 1))


def write_states(path, states) -> None:
    """Write a batch of states back to back in the binary record format."""
    with open(path, "wb") as fh:
        for u in states:
            fh.write(FourierState(np.asarray(u)).to_bytes())


def read_states(path) -> list[FourierState]:
    data = open(path, "rb").read()
    out, pos = [], 0
    while pos < len(data):
        s = FourierState.from_bytes(data, pos)
        out.append(s)
        pos += record_nbytes(s.n_trunc)
    return out


def as_coeffs(u) -> np.ndarray:
    c = np.asarray(u, dtype=np.complex128)
    if c.shape[-1] % 2 != 1:
        raise ValueError("coefficient axis must have odd length 2N+1")
    if not np.all(np.isfinite(c)):
        raise ValueError("non-finite coefficient")
    return c


def n_of(u) -> int:
    return (np.shape(u)[-1] - 1) // 2


# ---------------------------------------------------------------------------
# small divisors


class Divisor(NamedTuple):
    value: float
    resonant: bool


def is_resonant(j1: int, j2: int, j3: int, alpha: float | None = None) -> bool:
    """Multiset test ``{j1, j2} == {j3, j1 + j2 - j3}``.

    For ``alpha`` in (1/2, 1] this is exactly the zero set of the divisor, so
    no floating-point comparison is involved; ``alpha`` is accepted for
    signature symmetry only.
    """
    return j1 == j3 or j2 == j3


def divisor(j1: int, j2: int, j3: int, alpha: float) -> Divisor:
    n = j1 + j2 - j3
    if is_resonant(j1, j2, j3):
        return Divisor(0.0, True)
    if alpha == 1.0:
        return Divisor(float(2 * (j3 - j2) * (j1 - j3)), False)
    p = 2.0 * alpha
    val = abs(j1) ** p + abs(j2) ** p - abs(j3) ** p - abs(n) ** p
    return Divisor(float(val), False)


def frequencies(n_trunc: int, alpha: float) -> np.ndarray:
    """``|n|**(2 alpha)`` for ``n = -N..N`` with ``|0|**(2 alpha) = 0``."""
    n = np.abs(np.arange(-n_trunc, n_trunc + 1))
    if alpha == 1.0:
        return (n * n).astype(np.float64)
    return n.astype(np.float64) ** (2.0 * alpha)


@lru_cache(maxsize=32)
def _recip_table(n_trunc: int, alpha: float) -> np.ndarray:
    m = 2 * n_trunc + 1
    idx = np.arange(m)
    n_i, a_i, c_i = np.meshgrid(idx, idx, idx, indexing="ij")
    b_i = n_i + c_i - a_i
    valid = (b_i >= 0) & (b_i < m)
    resonant = (a_i == c_i) | (a_i == n_i)
    live = valid & ~resonant
    table = np.zeros((m, m, m))
    j1, j3, jn = a_i[live] - n_trunc, c_i[live] - n_trunc, n_i[live] - n_trunc
    j2 = jn + j3 - j1
    if alpha == 1.0:
        phi = (2 * (j3 - j2) * (j1 - j3)).astype(np.float64)
    else:
        om = frequencies(n_trunc, alpha)
        phi = om[a_i[live]] + om[b_i[live]] - om[c_i[live]] - om[n_i[live]]
    table[live] = 1.0 / phi
    table.setflags(write=False)
    return table


def reciprocal_divisors(n_trunc: int, alpha: float) -> np.ndarray:
    """Cached table ``recip[n, j1, j3] = 1/Phi(j1, j2, j3)`` in index space.

    Zero for resonant triples and for ``j2 = n + j3 - j1`` out of range.
    """
    return _recip_table(int(n_trunc), float(alpha))


# ---------------------------------------------------------------------------
# norms


def mass(u) -> float | np.ndarray:
    c = as_coeffs(u)
    return np.sum(c.real ** 2 + c.imag ** 2, axis=-1)


def hs_norm(u, s: float) -> float | np.ndarray:
    c = as_coeffs(u)
    n = np.abs(np.arange(-n_of(c), n_of(c) + 1)).astype(float)
    w = 1.0 + n ** (2.0 * s)
    return np.sqrt(np.sum(w * np.abs(c) ** 2, axis=-1))


def fl_norm(u, p: float) -> float | np.ndarray:
    if p < 1:
        raise ValueError("p must be >= 1")
    c = as_coeffs(u)
    return np.sum(np.abs(c) ** p, axis=-1) ** (1.0 / p)


def l4_quartic(u) -> float | np.ndarray:
    """``sum_k |(u*u)(k)|**2``, the coefficient form of ``||u||_{L^4}^4``."""
    c = as_coeffs(u)
    if c.ndim == 1:
        return float(_kernels.l4_row(np.ascontiguousarray(c)))
    return _kernels.l4_batch(np.ascontiguousarray(c.reshape(-1, c.shape[-1]))).reshape(c.shape[:-1])


def norms(u, s: float = 0.0, p: float = 2.0) -> dict:
    """All four norms of one state, keyed by name."""
    return {"mass": float(mass(u)), "hs_norm": float(hs_norm(u, s)),
            "fl_norm": float(fl_norm(u, p)), "l4_quartic": float(l4_quartic(u))}


def project(u, m: int) -> np.ndarray:
    """Zero every coefficient with ``|n| > m``; shape is kept."""
    if m < 0:
        raise ValueError("projection order must be >= 0")
    c = np.array(as_coeffs(u))
    n = n_of(c)
    if m < n:
        c[..., : n - m] = 0
        c[..., n + m + 1:] = 0
    return c


def complement(u, m: int) -> np.ndarray:
    return as_coeffs(u) - project(u, m)


def restrict(u, m: int) -> np.ndarray:
    """The modes ``|n| <= m`` as a shorter coefficient vector."""
    c = as_coeffs(u)
    n = n_of(c)
    if m > n:
        raise ValueError(f"cannot restrict N={n} state to m={m}")
    return c[..., n - m: n + m + 1]


def embed(u, n_big: int) -> np.ndarray:
    """Zero-pad a state to truncation ``n_big``."""
    c = as_coeffs(u)
    n = n_of(c)
    out = np.zeros(c.shape[:-1] + (2 * n_big + 1,), dtype=np.complex128)
    out[..., n_big - n: n_big + n + 1] = c
    return out
