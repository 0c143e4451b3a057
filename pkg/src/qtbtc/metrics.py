"""Error measures and compression accounting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, asdict

import numpy as np

from .imageio import GrayImage
from . import snibtc2

BITS_PER_PEL = 8
BTC_BASELINE_BPB = 32
SN2_BASELINE_BPB = snibtc2.BITS_PER_BLOCK
PELS_PER_BLOCK = 16

CSV_COLUMNS = ("mode", "mad", "mbd", "ratio", "increment_pct", "bpp", "mse", "mae", "snr_db")


@dataclass(frozen=True)
class QualityReport:
    mse: float
    mae: float
    snr: float
    bits_per_pel: int = BITS_PER_PEL


@dataclass(frozen=True)
class CompressionReport:
    original_bits: int
    coded_bits: int
    ratio: float
    bpp: float
    increment_pct: float | None = None


def _pair(x, y):
    a = x.pixels if isinstance(x, GrayImage) else np.asarray(x)
    b = y.pixels if isinstance(y, GrayImage) else np.asarray(y)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a.astype(np.float64), b.astype(np.float64)


def mse(x, y) -> float:
    a, b = _pair(x, y)
    return float(((a - b) ** 2).mean())


def mae(x, y) -> float:
    a, b = _pair(x, y)
    return float(np.abs(a - b).mean())


def snr(mse_value: float, bits_per_pel: int = BITS_PER_PEL) -> float:
    """Peak SNR in dB with the error deviation taken as sqrt(MSE); inf when MSE is 0."""
    if mse_value < 0:
        raise ValueError("MSE cannot be negative")
    if mse_value == 0:
        return math.inf
    return 20 * math.log10((2**bits_per_pel - 1) / math.sqrt(mse_value))


def quality(x, y) -> QualityReport:
    m = mse(x, y)
    return QualityReport(m, mae(x, y), snr(m))


def compression_report(width: int, height: int, coded_bits: int, baseline_bits_per_block=None) -> CompressionReport:
    """Ratio against the 8-bit original; ``increment_pct`` is relative to a
    fixed per-block budget (32 for BTC, 14 for SNIBTC2) when one is given."""
    if coded_bits <= 0:
        raise ValueError("coded bit count must be positive")
    original = width * height * BITS_PER_PEL
    ratio = original / coded_bits
    inc = None
    if baseline_bits_per_block is not None:
        baseline_ratio = PELS_PER_BLOCK * BITS_PER_PEL / baseline_bits_per_block
        inc = (ratio / baseline_ratio - 1) * 100
    return CompressionReport(original, coded_bits, ratio, BITS_PER_PEL / ratio, inc)


@dataclass(frozen=True)
class SweepRow:
    mode: str
    mad: int
    mbd: int
    ratio: float
    increment_pct: float
    bpp: float
    mse: float
    mae: float
    snr_db: float


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        d = asdict(row)
        for k in ("ratio", "increment_pct", "bpp", "mse", "mae", "snr_db"):
            d[k] = f"{d[k]:.6f}"
        writer.writerow(d)
    return buf.getvalue()


def format_quality(q: QualityReport) -> str:
    return f"MSE {q.mse:10.4f}\nMAE {q.mae:10.4f}\nSNR {q.snr:10.4f} dB\n"


def format_compression(r: CompressionReport) -> str:
    lines = [
        f"original bits {r.original_bits:>10d}",
        f"coded bits    {r.coded_bits:>10d}",
        f"ratio         {r.ratio:>10.3f}:1",
        f"bpp           {r.bpp:>10.4f}",
    ]
    if r.increment_pct is not None:
        lines.append(f"increment     {r.increment_pct:>+10.2f} %")
    return "\n".join(lines) + "\n"
