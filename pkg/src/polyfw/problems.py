"""Seeded simulation of sparse-image Fourier reconstruction instances.

An instance is ``y = G x0 + w`` with ``x0`` a K-sparse ``n x n`` image, ``G``
a random subsampling of ``L = alpha * K`` DFT frequencies, and ``w`` complex
Gaussian noise at a prescribed peak signal-to-noise ratio. All randomness
comes from numpy's PCG64 generator, so a seed fixes the instance on every
platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import FourierOperator, FrequencySampleSet
from .solvers import LassoProblem

__all__ = [
    "SparseImage",
    "NoiseSpec",
    "Instance",
    "gen_sparse_image",
    "sample_frequencies",
    "add_complex_noise",
    "assemble_problem",
    "build_instance",
    "noise_sigma",
]

DEFAULT_AMPLITUDE = (1.0, 10.0)


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SparseImage:
    n: int
    values: np.ndarray
    support: np.ndarray

    @property
    def K(self) -> int:
        return int(self.support.size)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise level as peak-to-RMS ratio in dB; ``inf`` (or ``None``) means noiseless."""

    psnr_db: float | None
    seed: int | np.random.SeedSequence = 0

    @property
    def noiseless(self) -> bool:
        return self.psnr_db is None or math.isinf(self.psnr_db)


def gen_sparse_image(n: int, K: int, seed, amplitude=DEFAULT_AMPLITUDE) -> SparseImage:
    """Image with ``K`` pixels drawn without replacement, amplitudes uniform on ``[lo, hi)``."""
    N = n * n
    if not 0 <= K <= N:
        raise ValueError(f"K must lie in [0, n^2 = {N}], got {K}")
    lo, hi = amplitude
    if not 0 < lo < hi:
        raise ValueError(f"amplitude range must satisfy 0 < lo < hi, got {amplitude}")
    rng = _rng(seed)
    support = np.sort(rng.choice(N, size=K, replace=False)).astype(np.int64)
    values = np.zeros(N)
    values[support] = rng.uniform(lo, hi, size=K)
    return SparseImage(n, values, support)


def sample_frequencies(n: int, L: int, seed) -> FrequencySampleSet:
    """``L`` distinct frequencies drawn uniformly without replacement from ``[0, n-1]^2``."""
    if not 1 <= L <= n * n:
        raise ValueError(f"L must lie in [1, n^2 = {n * n}], got {L}")
    flat = _rng(seed).choice(n * n, size=L, replace=False)
    u, v = np.divmod(flat, n)
    return FrequencySampleSet(n, np.stack([u, v], axis=1))


def noise_sigma(clean, psnr_db: float) -> float:
    """RMS noise level putting the peak of ``|clean|`` at ``psnr_db`` above it."""
    return float(np.max(np.abs(clean))) / 10.0 ** (psnr_db / 20.0)


def add_complex_noise(clean, spec: NoiseSpec) -> np.ndarray:
    """Add circular complex Gaussian noise, ``sigma * (g1 + 1j g2) / sqrt(2)``."""
    clean = np.asarray(clean, dtype=complex)
    if spec.noiseless:
        return clean.copy()
    if not np.any(clean):
        raise ValueError("cannot set a finite PSNR for an all-zero signal")
    sigma = noise_sigma(clean, spec.psnr_db)
    g = _rng(spec.seed).standard_normal((2, clean.size))
    return clean + sigma * (g[0] + 1j * g[1]) / math.sqrt(2.0)


def assemble_problem(image: SparseImage, freqs: FrequencySampleSet, noise: NoiseSpec, lambda_factor: float = 0.1):
    """Measure ``image`` through the sampled DFT and set ``lam = lambda_factor * ||G* y||_inf``.

    Returns ``(problem, x0)``. When ``G* y`` vanishes (e.g. an empty image
    without noise) every ``lam > 0`` makes zero optimal, and ``lam`` falls
    back to ``lambda_factor`` itself.
    """
    if image.n != freqs.n:
        raise ValueError(f"image side {image.n} does not match frequency grid side {freqs.n}")
    if not 0 < lambda_factor < 1:
        raise ValueError(f"lambda_factor must lie in (0, 1), got {lambda_factor}")
    op = FourierOperator(freqs)
    clean = op.forward(image.values)
    y = clean.copy() if (noise.noiseless or not np.any(clean)) else add_complex_noise(clean, noise)
    lam_max = float(np.max(np.abs(op.adjoint(y))))
    lam = lambda_factor * lam_max if lam_max > 0 else lambda_factor
    return LassoProblem(op, y, lam), image.values.copy()


@dataclass(frozen=True)
class Instance:
    problem: LassoProblem
    x0: np.ndarray
    image: SparseImage
    freqs: FrequencySampleSet

    def to_dict(self) -> dict:
        y = self.problem.y
        return {
            "n": self.image.n,
            "K": self.image.K,
            "lambda": self.problem.lam,
            "x0_support": self.image.support.tolist(),
            "x0_values": self.x0[self.image.support].tolist(),
            "freqs": self.freqs.to_dict(),
            "y": np.stack([y.real, y.imag], axis=1).tolist(),
        }


def build_instance(seed: int, n: int, K: int, alpha: int, psnr_db, lambda_factor: float = 0.1, amplitude=DEFAULT_AMPLITUDE) -> Instance:
    """Generate the full instance for one scenario from a single integer seed.

    The image, frequency and noise streams use independent children of
    ``SeedSequence(seed)``.
    """
    L = alpha * K
    if L > n * n:
        raise ValueError(f"alpha * K = {L} exceeds n^2 = {n * n}")
    s_img, s_freq, s_noise = np.random.SeedSequence(seed).spawn(3)
    image = gen_sparse_image(n, K, s_img, amplitude)
    # K = 0 gives no measurements at all; keep one frequency so the operator is defined
    freqs = sample_frequencies(n, max(L, 1), s_freq)
    psnr = math.inf if psnr_db is None else float(psnr_db)
    problem, x0 = assemble_problem(image, freqs, NoiseSpec(psnr, s_noise), lambda_factor)
    return Instance(problem, x0, image, freqs)
