"""Block partition and per-block frequency transforms.

The image is circularly shifted by the grid offset, edge-padded up to a
multiple of the block size, and tiled row-major into B x B blocks. The DCT
is the orthonormal 2D DCT-II; the DFT is the plain (unnormalized) 2D
transform of a real block, kept as a half spectrum of B x (B/2 + 1) bins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from watsonsim.errors import InputDomainError

MAX_OFFSET = 4


@dataclass(frozen=True)
class BlockGrid:
    """Block size plus the (dy, dx) circular shift applied before tiling."""

    block_size: int = 8
    offset: tuple[int, int] = (0, 0)

    def __post_init__(self):
        b = self.block_size
        if b < 2 or b % 2 != 0:
            raise InputDomainError("block_size must be even and >= 2")
        dy, dx = self.offset
        if abs(dy) > MAX_OFFSET or abs(dx) > MAX_OFFSET:
            raise InputDomainError(
                f"offset components must lie in [-{MAX_OFFSET}, {MAX_OFFSET}]"
            )

    def block_count(self, height: int, width: int) -> int:
        b = self.block_size
        return -(-height // b) * (-(-width // b))


def sample_grid_offset(rng: np.random.Generator) -> tuple[int, int]:
    """Draw a uniform offset from the integer square [-4, 4] x [-4, 4]."""
    dy, dx = rng.integers(-MAX_OFFSET, MAX_OFFSET + 1, size=2)
    return int(dy), int(dx)


def partition_blocks(channel: np.ndarray, grid: BlockGrid) -> np.ndarray:
    """Split one channel into (K, B, B) blocks, row-major over the padded grid."""
    channel = np.asarray(channel, dtype=np.float64)
    if channel.ndim != 2:
        raise InputDomainError("partition_blocks expects a 2D channel")
    h, w = channel.shape
    b = grid.block_size
    if h < b or w < b:
        raise InputDomainError(f"channel {h}x{w} smaller than one {b}x{b} block")
    shifted = np.roll(channel, grid.offset, axis=(0, 1))
    hp = -(-h // b) * b
    wp = -(-w // b) * b
    if (hp, wp) != (h, w):
        shifted = np.pad(shifted, ((0, hp - h), (0, wp - w)), mode="edge")
    blocks = shifted.reshape(hp // b, b, wp // b, b).swapaxes(1, 2)
    return blocks.reshape(-1, b, b)


def partition_adjoint(
    d_blocks: np.ndarray, grid: BlockGrid, shape: tuple[int, int]
) -> np.ndarray:
    """Adjoint of :func:`partition_blocks`: scatter block cotangents back.

    Edge-padded rows/columns accumulate into the last real row/column.
    """
    h, w = shape
    b = grid.block_size
    hp = -(-h // b) * b
    wp = -(-w // b) * b
    padded = (
        d_blocks.reshape(hp // b, wp // b, b, b)
        .swapaxes(1, 2)
        .reshape(hp, wp)
    )
    if (hp, wp) != (h, w):
        d_shift = padded[:h, :w].copy()
        if hp > h:
            d_shift[h - 1, :] += padded[h:, :w].sum(axis=0)
        if wp > w:
            d_shift[:, w - 1] += padded[:h, w:].sum(axis=1)
        if hp > h and wp > w:
            d_shift[h - 1, w - 1] += padded[h:, w:].sum()
    else:
        d_shift = padded
    dy, dx = grid.offset
    return np.roll(d_shift, (-dy, -dx), axis=(0, 1))


def dct_matrix(block_size: int) -> np.ndarray:
    """Orthonormal DCT-II basis: row i is the i-th cosine at half-sample phase."""
    b = block_size
    m = np.arange(b)
    i = np.arange(b)[:, None]
    mat = np.cos(np.pi * (2 * m[None, :] + 1) * i / (2 * b))
    scale = np.full((b, 1), np.sqrt(2.0 / b))
    scale[0, 0] = np.sqrt(1.0 / b)
    return scale * mat


def dft_matrix(block_size: int) -> np.ndarray:
    """Unnormalized DFT basis: E[u, m] = exp(-2 pi i u m / B)."""
    b = block_size
    u = np.arange(b)[:, None]
    m = np.arange(b)[None, :]
    return np.exp(-2j * np.pi * u * m / b)


def dct2_blocks(blocks: np.ndarray, basis: np.ndarray | None = None) -> np.ndarray:
    """Orthonormal 2D DCT-II of a (..., B, B) stack of blocks."""
    b = blocks.shape[-1]
    d = dct_matrix(b) if basis is None else basis
    return d @ blocks @ d.T


def dct2_block(block: np.ndarray) -> np.ndarray:
    block = np.asarray(block, dtype=np.float64)
    if block.ndim != 2 or block.shape[0] != block.shape[1]:
        raise InputDomainError("dct2_block expects a square 2D block")
    return dct2_blocks(block[None])[0]


def idct2_blocks(coeffs: np.ndarray, basis: np.ndarray | None = None) -> np.ndarray:
    b = coeffs.shape[-1]
    d = dct_matrix(b) if basis is None else basis
    return d.T @ coeffs @ d


def hermitian_valid_mask(block_size: int) -> np.ndarray:
    """Boolean (B, B/2+1) mask keeping one representative per conjugate pair.

    Columns 0 and B/2 of the half spectrum contain their own mirror bins;
    rows above B/2 there are the redundant halves.
    """
    b = block_size
    half = b // 2
    mask = np.ones((b, half + 1), dtype=bool)
    mask[half + 1 :, 0] = False
    mask[half + 1 :, half] = False
    return mask


def self_conjugate_mask(block_size: int) -> np.ndarray:
    """Bins whose value is real for any real block (phase is 0 or pi)."""
    b = block_size
    half = b // 2
    mask = np.zeros((b, half + 1), dtype=bool)
    mask[0, 0] = mask[0, half] = mask[half, 0] = mask[half, half] = True
    return mask


@dataclass(frozen=True)
class FourierBlocks:
    """Half-spectrum amplitudes/phases of a block stack plus the bin mask."""

    amplitude: np.ndarray  # (K, B, B/2+1)
    phase: np.ndarray  # (K, B, B/2+1), 0 where amplitude < AMP_FLOOR
    valid_mask: np.ndarray  # (B, B/2+1) bool


AMP_FLOOR = 1e-12


def rdft2_blocks(blocks: np.ndarray, basis: np.ndarray | None = None) -> FourierBlocks:
    """Half-spectrum DFT of a (..., B, B) real block stack.

    The phase of bins with amplitude below AMP_FLOOR is pinned to 0 so that
    fp noise in zero bins cannot leak into phase comparisons.
    """
    b = blocks.shape[-1]
    e = dft_matrix(b) if basis is None else basis
    spectrum = (e @ blocks.astype(np.complex128) @ e.T)[..., : b // 2 + 1]
    amplitude = np.abs(spectrum)
    phase = np.where(amplitude >= AMP_FLOOR, np.angle(spectrum), 0.0)
    return FourierBlocks(amplitude, phase, hermitian_valid_mask(b))


def rdft2_block(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude and phase of one real block's half spectrum."""
    block = np.asarray(block, dtype=np.float64)
    if block.ndim != 2 or block.shape[0] != block.shape[1]:
        raise InputDomainError("rdft2_block expects a square 2D block")
    out = rdft2_blocks(block[None])
    return out.amplitude[0], out.phase[0]


def rdft2_spectrum(blocks: np.ndarray, basis: np.ndarray | None = None) -> np.ndarray:
    """Complex half spectrum, kept for gradient work."""
    b = blocks.shape[-1]
    e = dft_matrix(b) if basis is None else basis
    return (e @ blocks.astype(np.complex128) @ e.T)[..., : b // 2 + 1]
