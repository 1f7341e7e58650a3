"""Quantizers behind one contract: Q(x) plus the exact error e = x - Q(x).

Schemes
-------
int-hadamard : row-wise symmetric integer grid in the Hadamard domain with an
               RMS-derived scale and an MSE-optimal Gaussian clip factor
int-plain    : same grid without the transform
mxfp4        : 4-bit E2M1 elements with a shared power-of-two scale per
               32-element block
floor-toy    : elementwise floor onto a fixed grid (default cell 1.0)

Every scheme returns a ``QuantResult`` whose ``quantized + error`` equals the
input bitwise; the error is always computed as ``x - quantized`` in the
original domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .transform import hadamard_forward, hadamard_inverse, hadamard_plan

__all__ = [
    "INT_SCHEMES",
    "SCHEMES",
    "QuantSpec",
    "QuantResult",
    "int_spec",
    "quantize",
    "quantize_int_row",
    "quantize_mxfp4",
    "quantize_floor",
    "quant_error",
    "calibrate_clip",
    "gaussian_clip_mse",
    "default_clip_factor",
    "write_clip_table",
    "read_clip_table",
]

INT_SCHEMES = ("int-hadamard", "int-plain")
SCHEMES = INT_SCHEMES + ("mxfp4", "floor-toy")

# degenerate-row scale floor: an all-zero row quantizes to zeros with this scale
SIGMA_FLOOR = 1e-12

# E2M1 magnitudes and whether the mantissa bit is 0 (used for tie-breaking)
_E2M1_GRID = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0])
_E2M1_EVEN = np.array([True, False, True, False, True, False, True, False])
_E2M1_MAX = 6.0


@dataclass(frozen=True)
class QuantSpec:
    """Quantizer configuration.

    ``row_length`` of ``None`` treats the whole input vector as a single row;
    otherwise the input length must be a multiple of ``row_length`` and rows
    are quantized independently.  ``grid`` is the cell size of the floor-toy
    scheme and is ignored by the others.
    """

    scheme: str
    bits: int = 4
    clip_factor: float | None = None
    block_size: int = 32
    row_length: int | None = None
    grid: float = 1.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if self.scheme in INT_SCHEMES:
            if self.bits < 2:
                raise ValueError(f"int schemes need bits >= 2, got {self.bits}")
            if self.clip_factor is None or self.clip_factor <= 0:
                raise ValueError("int schemes need a positive clip_factor")
        if self.scheme == "mxfp4" and self.block_size < 1:
            raise ValueError(f"block_size must be positive, got {self.block_size}")
        if self.scheme == "floor-toy" and self.grid <= 0:
            raise ValueError(f"grid must be positive, got {self.grid}")
        if self.row_length is not None and self.row_length < 1:
            raise ValueError(f"row_length must be positive, got {self.row_length}")

    @property
    def q_max(self) -> int:
        return 2 ** (self.bits - 1) - 1

    @property
    def q_min(self) -> int:
        return -(2 ** (self.bits - 1))


@dataclass(frozen=True)
class QuantResult:
    """Quantized values, the exact residual, and per-row diagnostics.

    ``scale`` is a scalar for a single integer row, an array of per-row values
    for chunked input, and an array of per-block values for mxfp4.
    """

    quantized: np.ndarray
    error: np.ndarray
    codes: np.ndarray
    scale: float | np.ndarray


def int_spec(scheme: str, bits: int, row_length: int | None = None) -> QuantSpec:
    """Integer-grid spec with the clip factor filled in from calibration."""
    return QuantSpec(scheme=scheme, bits=bits, clip_factor=default_clip_factor(bits), row_length=row_length)


def _quantize_int_single(spec: QuantSpec, x: np.ndarray) -> QuantResult:
    if spec.scheme == "int-hadamard":
        plan = hadamard_plan(x.shape[0])
        z = hadamard_forward(plan, x)
    else:
        plan = None
        z = x
    sigma = math.sqrt(float(np.mean(z * z)))
    if sigma == 0.0:
        scale = SIGMA_FLOOR
    else:
        scale = spec.clip_factor * sigma / spec.q_max
    codes = np.clip(np.rint(z / scale), spec.q_min, spec.q_max)
    z_hat = scale * codes
    if plan is not None:
        quantized = hadamard_inverse(plan, z_hat)
    else:
        quantized = z_hat
    return QuantResult(quantized=quantized, error=x - quantized, codes=codes.astype(np.int64), scale=scale)


def quantize_int_row(spec: QuantSpec, x: np.ndarray) -> QuantResult:
    """Symmetric integer quantization of one row (transform-domain for int-hadamard).

    z = Hx (int-hadamard) or z = x (int-plain); sigma = rms over the padded
    entries; scale = clip_factor * sigma / q_max; codes = clip(round-half-even
    (z / scale), q_min, q_max); the reconstruction is transformed back and the
    error taken in the original domain.
    """
    if spec.scheme not in INT_SCHEMES:
        raise ValueError(f"quantize_int_row needs an int scheme, got {spec.scheme!r}")
    x = np.asarray(x, dtype=np.float64)
    if spec.row_length is not None and x.shape[0] != spec.row_length:
        raise ValueError(f"expected row of length {spec.row_length}, got {x.shape[0]}")
    return _quantize_int_single(spec, x)


def _e2m1_round(u: np.ndarray) -> np.ndarray:
    """Indices into the E2M1 magnitude grid, nearest with ties to even mantissa."""
    d = np.abs(u[:, None] - _E2M1_GRID[None, :])
    idx = np.argmin(d, axis=1)
    n = _E2M1_GRID.size
    upper = np.minimum(idx + 1, n - 1)
    tie = (d[np.arange(u.size), idx] == d[np.arange(u.size), upper]) & (upper != idx)
    bump = tie & ~_E2M1_EVEN[idx]
    return np.where(bump, upper, idx)


def _block_scale(amax: float) -> float:
    """Smallest power of two s with amax <= 6 s, i.e. 2**ceil(log2(amax / 6))."""
    if amax == 0.0:
        return 1.0
    m, e = math.frexp(amax / _E2M1_MAX)
    if m == 0.5:
        e -= 1
    return math.ldexp(1.0, e)


def quantize_mxfp4(spec: QuantSpec, x: np.ndarray) -> QuantResult:
    """Block floating-point quantization: E2M1 elements, shared scale per block.

    Each block of ``block_size`` shares the power-of-two scale
    2**ceil(log2(max|x| / 6)); elements round to the nearest point of
    scale * {0, +-0.5, +-1, +-1.5, +-2, +-3, +-4, +-6} with ties to the even
    mantissa.  An all-zero block gets scale 1 and codes 0.
    """
    if spec.scheme != "mxfp4":
        raise ValueError(f"quantize_mxfp4 needs scheme 'mxfp4', got {spec.scheme!r}")
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    bs = spec.block_size
    n_blocks = max(1, -(-n // bs))
    padded = np.zeros(n_blocks * bs)
    padded[:n] = x
    blocks = padded.reshape(n_blocks, bs)

    scales = np.array([_block_scale(float(np.max(np.abs(b)))) for b in blocks])
    u = np.abs(blocks) / scales[:, None]
    idx = _e2m1_round(u.reshape(-1)).reshape(n_blocks, bs)
    mags = _E2M1_GRID[idx] * scales[:, None]
    quantized = np.copysign(mags, blocks).reshape(-1)[:n]
    sign_bit = (blocks.reshape(-1)[:n] < 0).astype(np.int64)
    codes = sign_bit * 8 + idx.reshape(-1)[:n]
    return QuantResult(quantized=quantized, error=x - quantized, codes=codes, scale=scales)


def quantize_floor(spec: QuantSpec, x: np.ndarray) -> QuantResult:
    """Elementwise floor onto the fixed grid ``spec.grid``."""
    if spec.scheme != "floor-toy":
        raise ValueError(f"quantize_floor needs scheme 'floor-toy', got {spec.scheme!r}")
    x = np.asarray(x, dtype=np.float64)
    codes = np.floor(x / spec.grid)
    quantized = codes * spec.grid
    # diagnostic codes saturate instead of overflowing the int cast
    safe = np.clip(codes, -(2.0**62), 2.0**62)
    return QuantResult(quantized=quantized, error=x - quantized, codes=safe.astype(np.int64), scale=spec.grid)


def quantize(spec: QuantSpec, x: np.ndarray) -> QuantResult:
    """Quantize a vector under ``spec``, chunking into rows when configured."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a vector, got shape {x.shape}")
    if spec.scheme == "floor-toy":
        return quantize_floor(spec, x)
    if spec.scheme == "mxfp4":
        return quantize_mxfp4(spec, x)
    rl = spec.row_length
    if rl is None or rl == x.shape[0]:
        return _quantize_int_single(spec, x)
    if x.shape[0] % rl:
        raise ValueError(f"input dim {x.shape[0]} is not a multiple of row_length {rl}")
    parts = [_quantize_int_single(spec, row) for row in x.reshape(-1, rl)]
    return QuantResult(
        quantized=np.concatenate([p.quantized for p in parts]),
        error=np.concatenate([p.error for p in parts]),
        codes=np.concatenate([p.codes for p in parts]),
        scale=np.array([p.scale for p in parts]),
    )


def quant_error(spec: QuantSpec, x: np.ndarray) -> np.ndarray:
    """e = x - Q(x), a pure value with no gradient semantics."""
    return quantize(spec, x).error


# ---------------------------------------------------------------------------
# clip-factor calibration
# ---------------------------------------------------------------------------

def _int_grid_dequant(z: np.ndarray, k: float, bits: int) -> np.ndarray:
    q_max = 2 ** (bits - 1) - 1
    q_min = -(2 ** (bits - 1))
    s = k / q_max
    return s * np.clip(np.rint(z / s), q_min, q_max)


def gaussian_clip_mse(bits: int, k: float, nodes: int = 100001) -> float:
    """E_{z~N(0,1)}[(z - dequant(quant(z; k)))^2] by trapezoid quadrature."""
    z = np.linspace(-12.0, 12.0, nodes)
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    r = z - _int_grid_dequant(z, k, bits)
    return float(np.trapezoid(r * r * pdf, z))


def calibrate_clip(bits: int, n_grid: int = 96, quadrature: int = 100001) -> float:
    """MSE-optimal Gaussian clip factor for a ``bits``-wide symmetric grid.

    Scans k in [0.5, 6] on an ``n_grid``-point grid, then refines the
    bracketing interval by golden section to 1e-6.  Deterministic; the result
    is stable to about 1e-4 across quadrature resolutions.
    """
    if not 2 <= bits <= 8:
        raise ValueError(f"bits out of supported range [2, 8]: {bits}")
    ks = np.linspace(0.5, 6.0, n_grid)
    mses = np.array([gaussian_clip_mse(bits, float(k), quadrature) for k in ks])
    i = int(np.argmin(mses))
    lo = float(ks[max(i - 1, 0)])
    hi = float(ks[min(i + 1, n_grid - 1)])

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = gaussian_clip_mse(bits, c, quadrature)
    fd = gaussian_clip_mse(bits, d, quadrature)
    while b - a > 1e-6:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = gaussian_clip_mse(bits, c, quadrature)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = gaussian_clip_mse(bits, d, quadrature)
    return (a + b) / 2.0


_CLIP_CACHE: dict[int, float] = {}
_CLIP_TABLE_VERSION = 1
_PACKAGED_TABLE = Path(__file__).parent / "data" / "clip_factors.tsv"


def default_clip_factor(bits: int) -> float:
    """Calibrated clip factor, served from the packaged table when available."""
    if bits not in _CLIP_CACHE:
        if _PACKAGED_TABLE.exists():
            try:
                _CLIP_CACHE.update({b: k for b, (k, _) in read_clip_table(_PACKAGED_TABLE).items()})
            except (OSError, ValueError):
                pass
        if bits not in _CLIP_CACHE:
            _CLIP_CACHE[bits] = calibrate_clip(bits)
    return _CLIP_CACHE[bits]


def write_clip_table(path, rows: list[tuple[int, float, float]]) -> None:
    """Write (bits, k_b, mse) rows as a versioned TSV."""
    path = Path(path)
    lines = [f"# clip-factors v{_CLIP_TABLE_VERSION}", "bits\tk\tmse"]
    for bits, k, mse in rows:
        lines.append(f"{bits}\t{k!r}\t{mse!r}")
    path.write_text("\n".join(lines) + "\n")


def read_clip_table(path) -> dict[int, tuple[float, float]]:
    """Read a clip table back as {bits: (k_b, mse)}."""
    out: dict[int, tuple[float, float]] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("bits"):
            continue
        b, k, mse = line.split("\t")
        out[int(b)] = (float(k), float(mse))
    return out
