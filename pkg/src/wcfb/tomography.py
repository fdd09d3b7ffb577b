"""Binary tomography: parallel-beam projector, phantoms, sinograms, reconstructions.

Image convention: an ``n1 x n2`` (width x height) image is stored row-major,
pixel ``(r, c)`` has index ``r * n1 + c`` and covers the unit square centred
at ``(c + 0.5 - n1/2, n2/2 - r - 0.5)``. A ray at angle ``phi`` travels along
``(cos phi, sin phi)`` and is offset by ``s`` along ``(-sin phi, cos phi)``.
Projector rows are ordered angle-major, detectors ascending in ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, ParameterError
from .functions import BallDistanceTerm, binary_tomography_problem
from .linalg import CsrMatrix, as_vector, matvec, matvec_transpose
from .solver import SolverConfig, run_fb

__all__ = [
    "BinaryImage",
    "ScanGeometry",
    "Sinogram",
    "build_projector",
    "make_phantom",
    "simulate_sinogram",
    "lsqr_solve",
    "threshold_to_binary",
    "default_theta",
    "default_step",
    "reconstruct_crbt",
    "misclassification_rate",
    "write_pgm",
    "read_pgm",
    "write_sinogram_csv",
    "read_sinogram_csv",
]


@dataclass(eq=False)
class BinaryImage:
    """``height x width`` image with pixels in ``{-1, +1}``."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.size != self.width * self.height:
            raise DimensionError(f"expected {self.width * self.height} pixels, got {px.size}")
        px = px.reshape(self.height, self.width)
        if not np.all((px == 1.0) | (px == -1.0)):
            raise ValueError("binary image pixels must be -1 or +1")
        self.pixels = px

    @classmethod
    def from_vector(cls, x, width, height):
        return cls(width, height, np.asarray(x, dtype=np.float64).reshape(height, width))

    def vector(self) -> np.ndarray:
        return self.pixels.ravel().copy()

    def __eq__(self, other):
        return (isinstance(other, BinaryImage) and self.width == other.width
                and self.height == other.height and np.array_equal(self.pixels, other.pixels))


@dataclass(frozen=True)
class ScanGeometry:
    """Parallel-beam scan: ray angles in degrees and a centred detector array.

    ``detector_spacing=None`` spreads the detectors over the image diagonal
    (spacing ``sqrt(n1^2 + n2^2) / n_detectors``), so every pixel is hit at
    every angle.
    """

    angles_deg: Sequence[float]
    n_detectors: int
    detector_spacing: Optional[float] = None

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles_deg)
        object.__setattr__(self, "angles_deg", angles)
        if self.n_detectors < 1:
            raise ParameterError("need at least one detector")
        if not angles:
            raise ParameterError("need at least one angle")
        if not all(math.isfinite(a) for a in angles):
            raise ParameterError("angles must be finite")
        if self.detector_spacing is not None and not self.detector_spacing > 0:
            raise ParameterError("detector spacing must be positive")

    @property
    def n_rays(self) -> int:
        return len(self.angles_deg) * self.n_detectors

    def spacing(self, n1: int, n2: int) -> float:
        if self.detector_spacing is not None:
            return float(self.detector_spacing)
        return math.hypot(n1, n2) / self.n_detectors

    def offsets(self, n1: int, n2: int) -> np.ndarray:
        i = np.arange(self.n_detectors, dtype=np.float64)
        return (i + 0.5 - self.n_detectors / 2.0) * self.spacing(n1, n2)

    @classmethod
    def uniform(cls, n_angles: int, n_detectors: int, detector_spacing=None):
        """``n_angles`` equispaced angles in ``[0, 180)``."""
        return cls(tuple(180.0 * k / n_angles for k in range(n_angles)), n_detectors,
                   detector_spacing)


@dataclass(eq=False)
class Sinogram:
    y: np.ndarray
    sigma: float
    seed: Optional[int]


def _direction(angle_deg):
    phi = math.radians(angle_deg)
    c, s = math.cos(phi), math.sin(phi)
    # snap so that axis-aligned rays stay exactly axis-aligned
    c = 0.0 if abs(c) < 1e-12 else c
    s = 0.0 if abs(s) < 1e-12 else s
    return c, s


def _trace_ray(px, py, dx, dy, n1, n2):
    """Siddon traversal: pixel indices and intersection lengths of one ray."""
    hx, hy = n1 / 2.0, n2 / 2.0
    lo, hi = -math.inf, math.inf
    for p, d, h in ((px, dx, hx), (py, dy, hy)):
        if d == 0.0:
            if not (-h <= p <= h):
                return None
            continue
        a1, a2 = (-h - p) / d, (h - p) / d
        lo, hi = max(lo, min(a1, a2)), min(hi, max(a1, a2))
    if not hi > lo:
        return None
    params = [np.array([lo, hi])]
    if dx != 0.0:
        params.append((np.arange(n1 + 1) - hx - px) / dx)
    if dy != 0.0:
        params.append((np.arange(n2 + 1) - hy - py) / dy)
    a = np.concatenate(params)
    a = np.unique(a[(a >= lo) & (a <= hi)])
    seg = np.diff(a)
    mid = 0.5 * (a[1:] + a[:-1])
    keep = seg > 1e-12
    seg, mid = seg[keep], mid[keep]
    col = np.floor(px + mid * dx + hx).astype(np.int64)
    row = np.floor(hy - (py + mid * dy)).astype(np.int64)
    np.clip(col, 0, n1 - 1, out=col)
    np.clip(row, 0, n2 - 1, out=row)
    return row * n1 + col, seg


def build_projector(n1: int, n2: int, geometry: ScanGeometry) -> CsrMatrix:
    """Ray-pixel intersection lengths as an ``(n_rays, n1*n2)`` CSR matrix."""
    if n1 < 1 or n2 < 1:
        raise ParameterError("image dimensions must be >= 1")
    offsets = geometry.offsets(n1, n2)
    rows, cols, vals = [], [], []
    ray = 0
    for angle in geometry.angles_deg:
        dx, dy = _direction(angle)
        for s in offsets:
            hit = _trace_ray(-s * dy, s * dx, dx, dy, n1, n2)
            if hit is not None:
                idx, seg = hit
                rows.append(np.full(idx.shape[0], ray, dtype=np.int64))
                cols.append(idx)
                vals.append(seg)
            ray += 1
    if rows:
        r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        r = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0)
    return CsrMatrix.from_triplets(r, c, v, (geometry.n_rays, n1 * n2))


def _balanced(img):
    frac = np.mean(img > 0)
    return 0.1 <= frac <= 0.9


def make_phantom(kind: str, n1: int, n2: int, seed: int = 0) -> BinaryImage:
    """Synthetic binary phantom.

    ``disk``: centred disk of radius ``round(0.3125 * min(n1, n2))``, ``+1`` inside.
    ``bars``: vertical bars of random width (seeded).
    ``blob``: sum of random Gaussian bumps thresholded at its 60% quantile.
    Every kind keeps at least 10% of pixels in each class.
    """
    if n1 < 4 or n2 < 4:
        raise ParameterError("phantom dimensions must be >= 4")
    cx = np.arange(n1) + 0.5 - n1 / 2.0
    cy = n2 / 2.0 - np.arange(n2) - 0.5
    X, Y = np.meshgrid(cx, cy)
    if kind == "disk":
        radius = max(1, round(0.3125 * min(n1, n2)))
        img = np.where(X ** 2 + Y ** 2 <= radius ** 2, 1.0, -1.0)
        return BinaryImage(n1, n2, img)
    rng = np.random.default_rng(seed)
    if kind == "bars":
        for _ in range(1000):
            widths = rng.integers(1, max(2, n1 // 4) + 1, size=n1)
            labels = np.repeat(np.arange(n1) % 2, widths)[:n1]
            if rng.random() < 0.5:
                labels = 1 - labels
            img = np.where(np.broadcast_to(labels, (n2, n1)) == 1, 1.0, -1.0)
            if _balanced(img):
                return BinaryImage(n1, n2, img)
        raise RuntimeError("could not draw a balanced bar phantom")
    if kind == "blob":
        field_ = np.zeros((n2, n1))
        scale = min(n1, n2)
        for _ in range(4):
            mx, my = rng.uniform(-0.3, 0.3, size=2) * np.array([n1, n2])
            w = rng.uniform(0.1, 0.25) * scale
            field_ += np.exp(-((X - mx) ** 2 + (Y - my) ** 2) / (2.0 * w * w))
        cut = np.quantile(field_, 0.6)
        img = np.where(field_ > cut, 1.0, -1.0)
        return BinaryImage(n1, n2, img)
    raise ValueError(f"unknown phantom kind {kind!r}; choose disk, bars or blob")


def _standard_normal(seed, size):
    """Box-Muller normals from a counter-based Philox stream."""
    gen = np.random.Generator(np.random.Philox(seed))
    half = (size + 1) // 2
    u1 = gen.random(half)
    u2 = gen.random(half)
    r = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return z[:size]


def simulate_sinogram(A: CsrMatrix, x: BinaryImage, sigma: float, seed: int = 0) -> Sinogram:
    """``y = A x + noise`` with i.i.d. ``N(0, sigma^2)`` noise."""
    if sigma < 0:
        raise ParameterError("sigma must be nonnegative")
    vec = x.vector() if isinstance(x, BinaryImage) else as_vector(x)
    y = matvec(A, vec)
    if sigma > 0:
        y = y + sigma * _standard_normal(seed, y.shape[0])
    return Sinogram(y, float(sigma), seed)


def lsqr_solve(A: CsrMatrix, y, iterations: int = 100) -> np.ndarray:
    """Least-squares iterate of Golub-Kahan bidiagonalisation (LSQR) from zero."""
    b = as_vector(y, A.n_rows, name="y")
    x = np.zeros(A.n_cols)
    beta = np.linalg.norm(b)
    if beta == 0.0 or iterations < 1:
        return x
    u = b / beta
    v = matvec_transpose(A, u)
    alpha = np.linalg.norm(v)
    if alpha == 0.0:
        return x
    v /= alpha
    w = v.copy()
    phibar, rhobar = beta, alpha
    for _ in range(iterations):
        u = matvec(A, v) - alpha * u
        beta = np.linalg.norm(u)
        if beta > 0:
            u /= beta
        rho = math.hypot(rhobar, beta)
        c, s = rhobar / rho, beta / rho
        phi = c * phibar
        phibar = s * phibar
        x += (phi / rho) * w
        if beta == 0.0:
            break
        v = matvec_transpose(A, u) - beta * v
        alpha_next = np.linalg.norm(v)
        theta = s * alpha_next
        rhobar = -c * alpha_next
        if alpha_next == 0.0:
            break
        v /= alpha_next
        w = v - (theta / rho) * w
        alpha = alpha_next
    return x


def threshold_to_binary(x, width: Optional[int] = None, height: Optional[int] = None) -> BinaryImage:
    """Pixelwise sign, with ``0`` mapped to ``+1``."""
    x = as_vector(x)
    if width is None and height is None:
        width, height = x.shape[0], 1
    elif width is None:
        width = x.shape[0] // height
    elif height is None:
        height = x.shape[0] // width
    return BinaryImage.from_vector(np.where(x >= 0, 1.0, -1.0), width, height)


def default_theta(n_detectors: int, sigma: float, floor: float = 1e-8) -> float:
    """Ball radius ``10 (n_detectors * sigma)^2``, at least ``floor``."""
    return max(10.0 * (n_detectors * sigma) ** 2, floor)


def default_step(lipschitz: float, rho: float = 2.0) -> float:
    """``0.9 * min(1/L_g, 1/rho)``."""
    return 0.9 * min(1.0 / lipschitz if lipschitz > 0 else math.inf, 1.0 / rho)


def reconstruct_crbt(A: CsrMatrix, sinogram, width: int, height: int, theta: Optional[float] = None,
                     config: Optional[SolverConfig] = None, n_detectors: Optional[int] = None,
                     lipschitz: Optional[float] = None, x0=None,
                     truth: Optional[BinaryImage] = None, mu: Optional[float] = None):
    """Relaxed binary reconstruction by forward-backward splitting.

    Minimises ``sum_j |x_j^2 - 1| + 0.5 dist^2(A x, B(y, theta))`` from a zero
    start and thresholds the final iterate.

    Parameters
    ----------
    sinogram : Sinogram or array
        Measurements ``y``.
    theta : float, optional
        Ball radius; defaults to :func:`default_theta` with the sinogram's
        ``sigma`` and ``n_detectors``.
    config : SolverConfig, optional
        Defaults to exact mode, ``alpha = 0.9 min(1/L_g, 1/2)``, 2000
        iterations, step tolerance ``1e-10``.
    truth, mu : optional
        A feasible ground truth and a sharpness constant; with both, the
        trajectory logs distances to ``truth`` and contraction factors.

    Returns
    -------
    image : BinaryImage
    trajectory : Trajectory
    """
    if isinstance(sinogram, Sinogram):
        y, sigma = sinogram.y, sinogram.sigma
    else:
        y, sigma = as_vector(sinogram, name="y"), 0.0
    if A.n_cols != width * height:
        raise DimensionError("projector columns do not match the image size")
    if theta is None:
        if n_detectors is None:
            raise ParameterError("n_detectors is needed for the default theta")
        theta = default_theta(n_detectors, sigma)
    term = BallDistanceTerm(A, y, theta, lipschitz)
    problem = binary_tomography_problem(
        term, mu=mu, solution=None if truth is None else truth.vector())
    if config is None:
        config = SolverConfig(alpha=default_step(term.lipschitz), max_iterations=2000,
                              step_tolerance=1e-10)
    start = np.zeros(A.n_cols) if x0 is None else as_vector(x0, A.n_cols, name="x0")
    traj = run_fb(problem, config, start)
    return threshold_to_binary(traj.x_final, width, height), traj


def misclassification_rate(rec: BinaryImage, truth: BinaryImage) -> float:
    """Fraction of pixels where the two images differ."""
    if (rec.width, rec.height) != (truth.width, truth.height):
        raise DimensionError("images have different dimensions")
    return float(np.mean(rec.pixels != truth.pixels))


def write_pgm(img: BinaryImage, path) -> None:
    """Binary PGM (P5, maxval 255): ``-1 -> 0``, ``+1 -> 255``."""
    data = np.where(img.pixels > 0, 255, 0).astype(np.uint8)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + data.tobytes())


def _pgm_tokens(raw: bytes, count: int):
    """First `count` header tokens (comments skipped) and the data offset."""
    tokens, pos, n = [], 0, len(raw)
    while len(tokens) < count:
        while pos < n and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos:pos + 1] == b"#":
            while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(raw[start:pos].decode("ascii"))
    return tokens, pos + 1


def read_pgm(path) -> BinaryImage:
    """Read a P5 or P2 PGM; gray levels at or above 128/255 of maxval become ``+1``."""
    raw = Path(path).read_bytes()
    (magic, w, h, maxval), offset = _pgm_tokens(raw, 4)
    width, height, maxval = int(w), int(h), int(maxval)
    if not (0 < maxval < 65536):
        raise ValueError(f"{path}: bad maxval {maxval}")
    count = width * height
    if magic == "P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    elif magic == "P2":
        data = np.array(raw[offset:].split()[:count], dtype=np.int64)
        if data.size != count:
            raise ValueError(f"{path}: expected {count} samples")
    else:
        raise ValueError(f"{path}: unsupported PGM magic {magic!r}")
    gray = data.astype(np.float64) * (255.0 / maxval)
    return BinaryImage(width, height, np.where(gray >= 128.0, 1.0, -1.0))


def write_sinogram_csv(sino: Sinogram, geometry: ScanGeometry, path) -> None:
    """One row per ray: ``ray,angle_deg,detector,value``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("ray,angle_deg,detector,value\n")
        k = 0
        for angle in geometry.angles_deg:
            for d in range(geometry.n_detectors):
                fh.write(f"{k},{angle:.17g},{d},{sino.y[k]:.17g}\n")
                k += 1
        fh.write(f"#sigma,{sino.sigma:.17g}\n")
        fh.write(f"#seed,{'' if sino.seed is None else sino.seed}\n")


def read_sinogram_csv(path) -> Sinogram:
    values, sigma, seed = [], 0.0, None
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "ray,angle_deg,detector,value":
            raise ValueError(f"{path}: unexpected sinogram header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if parts[0] == "#sigma":
                sigma = float(parts[1])
            elif parts[0] == "#seed":
                seed = int(parts[1]) if parts[1] else None
            else:
                values.append(float(parts[3]))
    return Sinogram(np.array(values), sigma, seed)
