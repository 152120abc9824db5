"""Per-band symbol models, probability-based skipping and range coding.

Every band uses a discretized two-sided geometric (quantized Laplacian)
distribution over ``[-S, S]`` plus an escape symbol, picked from a fixed
table of 255 scales by an 8-bit index. Index 0 is the degenerate model that
puts all mass on zero.

Skipping is inferred from the model alone: when the most probable symbol of
a band has probability ``>= tau`` the whole band is not coded and the
decoder substitutes zeros. Nothing about the skip decision is transmitted.
This threshold rule is our reading of probability-based entropy skipping;
it is not a reproduction of any specific published criterion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import rangecoder as rc
from .errors import BitstreamCorruptionError

SMAX = 31
N_SYMBOLS = 2 * SMAX + 2  # [-S, S] plus escape
ESCAPE = N_SYMBOLS - 1
N_SCALES = 256
DEFAULT_TAU = 0.95

# Laplacian scale per model index, geometric from 0.02 to 400
SCALES = np.concatenate([[0.0], np.geomspace(0.02, 400.0, N_SCALES - 1)])


def _build_tables():
    freqs = np.zeros((N_SCALES, N_SYMBOLS), dtype=np.int64)
    k = np.abs(np.arange(-SMAX, SMAX + 1))
    for m in range(1, N_SCALES):
        theta = np.exp(-1.0 / SCALES[m])
        p = (1.0 - theta) / (1.0 + theta) * theta**k
        tail = 2.0 * theta ** (SMAX + 1) / (1.0 + theta)
        p = np.append(p, tail)
        f = np.maximum(1, np.floor(p * (rc.TOTAL - N_SYMBOLS)).astype(np.int64))
        f[np.argmax(f)] += rc.TOTAL - f.sum()
        freqs[m] = f
    # degenerate model: never coded, CDF kept valid for completeness
    freqs[0] = 1
    freqs[0, SMAX] += rc.TOTAL - N_SYMBOLS
    cdf = np.zeros((N_SCALES, N_SYMBOLS + 1), dtype=np.int64)
    cdf[:, 1:] = np.cumsum(freqs, axis=1)
    return freqs, cdf


FREQS, CDF = _build_tables()
P_MAX = FREQS.max(axis=1) / rc.TOTAL
P_MAX[0] = 1.0
COST_BITS = -np.log2(FREQS / rc.TOTAL)  # (model, alphabet index)


def escape_extra_bits(values: np.ndarray) -> np.ndarray:
    """Equiprobable bits following an escape: sign + Exp-Golomb-0."""
    m1 = np.abs(values).astype(np.int64) - SMAX
    nbits = np.floor(np.log2(np.maximum(m1, 1))).astype(np.int64)
    return 1 + 2 * nbits + 1


def alphabet_index(symbols: np.ndarray) -> np.ndarray:
    s = np.asarray(symbols, dtype=np.int64)
    return np.where(np.abs(s) <= SMAX, s + SMAX, ESCAPE)


@dataclass(frozen=True)
class SkipPolicy:
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if not 0.5 <= self.tau <= 1.0:
            raise ValueError(f"tau {self.tau} outside [0.5, 1]")

    def skipped(self, model_index) -> np.ndarray:
        return P_MAX[np.asarray(model_index)] >= self.tau


NO_SKIP = SkipPolicy(1.0)


@dataclass(frozen=True)
class SymbolModel:
    """Model index (into the fixed scale table) per band."""

    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(not 0 <= i < N_SCALES for i in idx):
            raise ValueError("model index outside 0..255")
        object.__setattr__(self, "indices", idx)

    @property
    def n_bands(self) -> int:
        return len(self.indices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)

    def to_bytes(self) -> bytes:
        return bytes(self.indices)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SymbolModel":
        return cls(tuple(data))

    @classmethod
    def uniform(cls, n_bands: int, index: int) -> "SymbolModel":
        return cls((index,) * n_bands)

    def probabilities(self, band: int) -> np.ndarray:
        return FREQS[self.indices[band]] / rc.TOTAL


@dataclass
class SkipSummary:
    coded: int
    skipped: int
    skipped_bands: tuple
    substituted: np.ndarray  # symbol stream the decoder will reproduce


def _bands_array(bands, n: int) -> np.ndarray:
    if bands is None:
        return np.zeros(n, dtype=np.int64)
    return np.ascontiguousarray(bands, dtype=np.int64).ravel()


def substitute_skipped(symbols, bands, model: SymbolModel, policy: SkipPolicy) -> np.ndarray:
    s = np.array(symbols, dtype=np.int64)
    skip = policy.skipped(model.as_array())
    s[skip[_bands_array(bands, s.size)]] = 0
    return s


def encode_symbols(symbols, model: SymbolModel, policy: SkipPolicy = NO_SKIP, bands=None):
    """Range-code ``symbols``; returns ``(payload_bytes, SkipSummary)``."""
    s = np.ascontiguousarray(symbols, dtype=np.int64).ravel()
    b = _bands_array(bands, s.size)
    midx = model.as_array()
    skip = policy.skipped(midx)
    bad = (~skip[b]) & (midx[b] == 0) & (s != 0)
    if bad.any():
        raise ValueError("nonzero symbol in a band assigned the degenerate model")
    cap = 16 + 4 * s.size + int(escape_extra_bits(s[np.abs(s) > SMAX]).sum()) // 8 + 8
    out = np.zeros(cap, dtype=np.uint8)
    n = rc.encode_kernel(s, b, midx, skip, CDF, SMAX, out)
    sub = s.copy()
    sub[skip[b]] = 0
    summary = SkipSummary(
        coded=int((~skip[b]).sum()),
        skipped=int(skip[b].sum()),
        skipped_bands=tuple(int(i) for i in np.flatnonzero(skip)),
        substituted=sub,
    )
    return out[:n].tobytes(), summary


_STATUS_TEXT = {
    rc.EXHAUSTED: "payload exhausted before all symbols were decoded",
    rc.BAD_SYMBOL: "invalid code value",
    rc.TRAILING: "payload has bytes beyond the expected symbol count",
}


def decode_symbols(
    data: bytes, model: SymbolModel, policy: SkipPolicy = NO_SKIP, count: int = 0, bands=None
) -> np.ndarray:
    b = _bands_array(bands, count)
    if b.size != count:
        raise ValueError("bands length differs from count")
    midx = model.as_array()
    skip = policy.skipped(midx)
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    out = np.zeros(count, dtype=np.int64)
    status = rc.decode_kernel(buf, count, b, midx, skip, CDF, SMAX, out)
    if status != rc.OK:
        raise BitstreamCorruptionError(_STATUS_TEXT.get(int(status), f"decoder status {status}"))
    return out


def symbol_costs(symbols, model: SymbolModel, policy: SkipPolicy = NO_SKIP, bands=None):
    """Ideal cost in bits of every symbol (0 for skipped ones)."""
    s = np.asarray(symbols, dtype=np.int64).ravel()
    b = _bands_array(bands, s.size)
    midx = model.as_array()[b]
    a = alphabet_index(s)
    bits = COST_BITS[midx, a]
    esc = a == ESCAPE
    if esc.any():
        bits[esc] += escape_extra_bits(s[esc])
    bits[policy.skipped(midx)] = 0.0
    return bits


def estimate_bits(symbols, model: SymbolModel, policy: SkipPolicy = NO_SKIP, bands=None) -> float:
    return float(symbol_costs(symbols, model, policy, bands).sum())


def band_histograms(symbols, bands, n_bands: int):
    """Alphabet histogram per band plus total escape-extra bits per band."""
    s = np.asarray(symbols, dtype=np.int64).ravel()
    b = _bands_array(bands, s.size)
    a = alphabet_index(s)
    hist = np.zeros((n_bands, N_SYMBOLS), dtype=np.int64)
    np.add.at(hist, (b, a), 1)
    extra = np.zeros(n_bands)
    esc = a == ESCAPE
    if esc.any():
        np.add.at(extra, b[esc], escape_extra_bits(s[esc]))
    return hist, extra


def fit_model(
    symbols,
    bands,
    n_bands: int,
    policy: Optional[SkipPolicy] = None,
    zero_cost=None,
) -> SymbolModel:
    """Pick the cheapest model index for each band.

    With a ``policy``, a band whose cheapest model would be skipped keeps it
    only if ``sum(zero_cost)`` over the band (the caller's price, in bits, for
    zeroing its symbols) is below the cost of coding it with the best model
    that is not skipped.
    """
    s = np.asarray(symbols, dtype=np.int64).ravel()
    b = _bands_array(bands, s.size)
    hist, extra = band_histograms(s, b, n_bands)
    costs = hist @ COST_BITS[1:].T + extra[:, None]  # (band, model-1)
    indices = []
    skippable = policy.skipped(np.arange(1, N_SCALES)) if policy is not None else None
    zc = None
    if zero_cost is not None:
        zc = np.zeros(n_bands)
        np.add.at(zc, b, np.asarray(zero_cost, dtype=np.float64).ravel())
    for band in range(n_bands):
        nz = hist[band].sum() - hist[band, SMAX]
        if nz == 0:
            indices.append(0)
            continue
        best = int(np.argmin(costs[band]))
        if skippable is not None and skippable[best]:
            coded = np.where(skippable, np.inf, costs[band])
            alt = int(np.argmin(coded))
            price = zc[band] if zc is not None else 0.0
            if np.isfinite(coded[alt]) and coded[alt] < price:
                best = alt
        indices.append(best + 1)
    return SymbolModel(tuple(indices))
