"""Test-problem construction and corpus I/O.

Provides the pieces the experiment driver assembles: circularly symmetric
Gaussian point-spread functions, smoothing penalties, reflexive-boundary
blurring through the fast spectral path, exact-SNR noise injection, and a
small grayscale corpus toolchain (binary PGM + CSV matrices, manifest files,
and a synthetic cratered-terrain generator used when no external imagery is
available).
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage
from scipy.fft import dctn, idctn

from .spectral import (_first_column_spectrum, laplacian_spectrum,
                       reflexive_kernel)
from .errors import KernelSymmetryError

__all__ = [
    "DataSet",
    "gaussian_psf",
    "laplacian_penalty",
    "blur",
    "blur_spectrum",
    "add_noise",
    "make_dataset",
    "synthetic_image",
    "read_pgm",
    "write_pgm",
    "load_image",
    "fit_to_size",
    "load_corpus",
    "read_manifest",
    "write_manifest",
]


@dataclass(frozen=True)
class DataSet:
    """One blurred-and-noisy observation with its provenance.

    b is exactly blur(x_true) when the truth is known; d = b + e with e
    scaled so the achieved SNR matches the target to rounding.
    """

    x_true: np.ndarray | None
    b: np.ndarray
    d: np.ndarray
    sigma2: float
    snr: float
    seed: int
    dims: tuple[int, int]


def gaussian_psf(xi: float, size: tuple[int, int]) -> np.ndarray:
    """Unit-sum circular Gaussian kernel exp(-(x^2+y^2)/(2 xi)) sampled on
    the integer grid centered at the peak.

    The grid x_i = i - (h-1)/2 is symmetric for odd and even sizes alike, so
    the kernel equals its flips exactly.
    """
    if xi <= 0:
        raise ValueError(f"xi must be positive, got {xi}")
    h, w = size
    if h < 3 or w < 3:
        raise ValueError(f"kernel size must be at least 3x3, got {size}")
    y = np.arange(h) - (h - 1) / 2.0
    x = np.arange(w) - (w - 1) / 2.0
    k = np.exp(-(y[:, None] ** 2 + x[None, :] ** 2) / (2.0 * xi))
    return k / k.sum()


def laplacian_penalty(dims: tuple[int, int]) -> np.ndarray:
    """Spectral values of the negative five-point Laplacian under reflexive
    boundaries; exactly one zero (the constant mode)."""
    return laplacian_spectrum(dims)


def _embedded_kernel(psf: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Center a (possibly smaller) PSF on an image-sized canvas.

    The PSF's center sample (hp-1)//2 lands on the canvas center (H-1)//2.
    """
    hp, wp = psf.shape
    H, W = dims
    if hp > H or wp > W:
        raise ValueError(f"PSF {psf.shape} larger than image {dims}")
    if (hp, wp) == (H, W):
        return psf
    canvas = np.zeros((H, W))
    r0 = (H - 1) // 2 - (hp - 1) // 2
    c0 = (W - 1) // 2 - (wp - 1) // 2
    canvas[r0:r0 + hp, c0:c0 + wp] = psf
    return canvas


def blur_spectrum(psf: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Eigenvalues of the reflexive-boundary blur on a dims-sized grid, in
    the cosine basis (unsorted, one per 2D frequency).

    The operator is defined by the symmetrized integer-shift kernel of the
    PSF, which is exact for odd sizes and the canonical symmetric extension
    for even ones."""
    psf = np.asarray(psf, dtype=float)
    if psf.ndim != 2:
        raise ValueError("PSF must be 2D")
    tol = 1e-12 * max(np.abs(psf).max(), 1.0)
    if (np.abs(psf - psf[::-1, :]).max() > tol
            or np.abs(psf - psf[:, ::-1]).max() > tol):
        raise KernelSymmetryError(
            "kernel not diagonalizable by DCT: PSF must be symmetric about "
            "its center in both axes")
    kern = _embedded_kernel(psf, dims)
    return _first_column_spectrum(reflexive_kernel(kern), dims)


def blur(image: np.ndarray, psf: np.ndarray) -> np.ndarray:
    """Apply the reflexive-boundary blur: cosine transform, multiply by the
    kernel spectrum, transform back."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("image must be 2D")
    a = blur_spectrum(psf, image.shape)
    coeff = dctn(image, type=2, norm="ortho")
    return idctn(a * coeff, type=2, norm="ortho")


def add_noise(b: np.ndarray, target_snr_db: float, seed) -> tuple[np.ndarray, float]:
    """Add white Gaussian noise scaled so 10*log10(||b||^2/||e||^2) hits the
    target exactly.  An infinite target returns the data untouched."""
    b = np.asarray(b, dtype=float)
    if np.isinf(target_snr_db):
        return b.copy(), 0.0
    bnorm2 = float(np.sum(b ** 2))
    if bnorm2 == 0.0:
        raise ValueError("zero-signal SNR undefined")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    e = rng.standard_normal(b.shape)
    enorm2 = float(np.sum(e ** 2))
    if enorm2 == 0.0:
        raise ValueError("degenerate zero noise draw")
    scale = np.sqrt(bnorm2 / (enorm2 * 10.0 ** (target_snr_db / 10.0)))
    e *= scale
    sigma2 = float(np.sum(e ** 2)) / b.size
    return b + e, sigma2


def make_dataset(x_true: np.ndarray, psf: np.ndarray, snr_db: float,
                 seed: int) -> DataSet:
    """Blur a truth image and inject seeded noise at the requested SNR."""
    x_true = np.asarray(x_true, dtype=float)
    b = blur(x_true, psf)
    d, sigma2 = add_noise(b, snr_db, seed)
    if np.isinf(snr_db):
        achieved = float("inf")
    else:
        achieved = 10.0 * np.log10(np.sum(b ** 2) / np.sum((d - b) ** 2))
    return DataSet(x_true=x_true, b=b, d=d, sigma2=sigma2,
                   snr=float(achieved), seed=int(seed),
                   dims=(x_true.shape[0], x_true.shape[1]))


def synthetic_image(size: int, seed, craters: int | None = None) -> np.ndarray:
    """Cratered-terrain stand-in for the experiment corpus.

    Smooth low-frequency background plus randomly placed bowl-and-rim
    craters: piecewise-smooth content with sharp circular edges, in [0,1].
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(float) / size
    img = np.zeros((size, size))
    for _ in range(4):
        fx, fy = rng.uniform(0.5, 3.0, size=2)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        img += rng.uniform(0.3, 1.0) * np.cos(2.0 * np.pi * (fx * xx + fy * yy) + phase)
    img = 0.35 + 0.25 * (img - img.min()) / max(np.ptp(img), 1e-12)

    k = int(craters) if craters is not None else int(rng.integers(8, 16))
    for _ in range(k):
        cx, cy = rng.uniform(0.05, 0.95, size=2)
        r = rng.uniform(0.04, 0.16)
        depth = rng.uniform(0.15, 0.35)
        rim = rng.uniform(0.10, 0.25)
        dist = np.hypot(xx - cx, yy - cy) / r
        bowl = np.where(dist < 1.0, depth * (1.0 - dist ** 2), 0.0)
        ridge = rim * np.exp(-((dist - 1.0) / 0.12) ** 2)
        img += ridge - bowl
    return np.clip(img, 0.0, 1.0)


# ---------------------------------------------------------------------------
# PGM / CSV image I/O and corpus handling
# ---------------------------------------------------------------------------

def write_pgm(path, image: np.ndarray, maxval: int = 65535) -> None:
    """Binary PGM (P5) writer; 16-bit samples are big-endian per the format.
    Input intensities are clipped to [0,1] before quantization."""
    if maxval not in (255, 65535):
        raise ValueError(f"maxval must be 255 or 65535, got {maxval}")
    arr = np.clip(np.asarray(image, dtype=float), 0.0, 1.0)
    quant = np.rint(arr * maxval)
    data = quant.astype(">u2" if maxval > 255 else "u1")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Binary PGM (P5) reader returning float intensities in [0,1]."""
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # header = magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments running to end of line
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        m = re.match(rb"(?:\s+|#[^\n]*\n)*(\d+)", raw[pos:])
        if m is None:
            raise ValueError(f"{path}: malformed PGM header")
        tokens.append(int(m.group(1)))
        pos += m.end()
    w, h, maxval = tokens
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype(">u2" if maxval > 255 else "u1")
    count = w * h
    if len(raw) - pos < count * dtype.itemsize:
        raise ValueError(f"{path}: truncated pixel data")
    pix = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    return pix.reshape(h, w).astype(float) / maxval


def load_image(path) -> np.ndarray:
    """Read one grayscale image (PGM or CSV matrix) as floats in [0,1]."""
    p = Path(path)
    if p.suffix.lower() == ".csv":
        arr = np.atleast_2d(np.loadtxt(p, delimiter=",", dtype=float))
        lo, hi = float(arr.min()), float(arr.max())
        if lo < 0.0 or hi > 1.0:
            arr = (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)
        return arr
    if p.suffix.lower() in (".pgm", ".pnm"):
        return read_pgm(p)
    raise ValueError(f"{path}: unsupported image format (PGM or CSV only)")


def fit_to_size(image: np.ndarray, size: int) -> np.ndarray:
    """Center-crop larger images to size x size; interpolate smaller ones up."""
    h, w = image.shape
    if h < size or w < size:
        image = ndimage.zoom(image, (size / h, size / w), order=1)
        image = np.clip(image, 0.0, 1.0)
        h, w = image.shape
    r0 = (h - size) // 2
    c0 = (w - size) // 2
    return image[r0:r0 + size, c0:c0 + size].copy()


def _subimages(image: np.ndarray, size: int) -> list[np.ndarray]:
    """Northwest and southeast size x size corners of one larger image."""
    h, w = image.shape
    if h < size or w < size:
        raise ValueError(f"image {image.shape} too small for {size}x{size} subimages")
    return [image[:size, :size].copy(), image[h - size:, w - size:].copy()]


def read_manifest(path) -> list[dict]:
    """Corpus manifest: one `path,split,seed` record per line, paths
    resolved relative to the manifest location."""
    base = Path(path).parent
    records = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: bad manifest record {row!r}")
            records.append({"path": (base / row[0].strip()).resolve(),
                            "split": row[1].strip(),
                            "seed": int(row[2])})
    if not records:
        raise ValueError(f"{path}: empty manifest")
    return records


def write_manifest(path, records: Iterable[dict]) -> None:
    base = Path(path).parent
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for rec in records:
            rel = Path(rec["path"])
            try:
                rel = rel.relative_to(base)
            except ValueError:
                pass
            writer.writerow([rel.as_posix(), rec["split"], rec["seed"]])


def load_corpus(source, split: str | None = None, size: int | None = None,
                subimage: bool = False) -> tuple[list[np.ndarray], list[dict]]:
    """Load a corpus from a manifest file, a directory, or explicit paths.

    Returns (images, records) with deterministic filename ordering; when
    subimage mode is on each input contributes its northwest and southeast
    corners as separate entries.
    """
    if isinstance(source, (str, Path)) and Path(source).is_file():
        records = read_manifest(source)
    elif isinstance(source, (str, Path)) and Path(source).is_dir():
        paths = sorted(p for p in Path(source).iterdir()
                       if p.suffix.lower() in (".pgm", ".pnm", ".csv"))
        records = [{"path": p, "split": split or "train", "seed": i}
                   for i, p in enumerate(paths)]
    else:
        records = [{"path": Path(p), "split": split or "train", "seed": i}
                   for i, p in enumerate(source)]
    if split is not None:
        records = [r for r in records if r["split"] == split]
    records.sort(key=lambda r: Path(r["path"]).name)
    if not records:
        raise ValueError("empty corpus: no records match the requested split")

    images: list[np.ndarray] = []
    out_records: list[dict] = []
    for rec in records:
        img = load_image(rec["path"])
        if subimage:
            if size is None:
                raise ValueError("subimage mode needs a target size")
            for tag, sub in zip(("nw", "se"), _subimages(img, size)):
                images.append(sub)
                out_records.append({**rec, "tag": tag})
        else:
            images.append(fit_to_size(img, size) if size is not None else img)
            out_records.append({**rec, "tag": ""})
    return images, out_records
