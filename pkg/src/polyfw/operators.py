"""Linear measurement operators mapping real images to complex measurements.

Every operator here maps ``R^N -> C^L``. The adjoint is taken with respect to
the real inner product ``<a, b> = Re(conj(a) . b)`` on ``C^L``, so it maps
back into ``R^N``:

    G* z = Re(conj(G)^T z)

Images are flattened row-major: pixel ``(p, q)`` of an ``n x n`` image sits
at index ``p * n + q``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FrequencySampleSet",
    "LinearOperator",
    "FourierOperator",
    "DenseOperator",
    "CountingOperator",
    "dft_forward",
    "dft_adjoint",
    "hermitian_inner",
    "restrict_columns",
    "operator_norm_sq",
    "power_iteration",
]


@dataclass(frozen=True)
class FrequencySampleSet:
    """Ordered set of ``L`` distinct integer frequencies ``(u, v)`` in ``[0, n-1]^2``."""

    n: int
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.int64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError(f"coords must have shape (L, 2), got {coords.shape}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if coords.shape[0] < 1:
            raise ValueError("at least one frequency is required")
        if coords.min() < 0 or coords.max() > self.n - 1:
            raise ValueError(f"frequency coordinates must lie in [0, {self.n - 1}]")
        flat = coords[:, 0] * self.n + coords[:, 1]
        if np.unique(flat).size != flat.size:
            raise ValueError("frequency coordinates must be pairwise distinct")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def L(self) -> int:
        return self.coords.shape[0]

    def to_dict(self) -> dict:
        return {"n": int(self.n), "coords": self.coords.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FrequencySampleSet":
        return cls(int(d["n"]), np.asarray(d["coords"], dtype=np.int64).reshape(-1, 2))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "FrequencySampleSet":
        return cls.from_dict(json.loads(s))


def hermitian_inner(a, b) -> float:
    """Real part of the Hermitian inner product, ``Re(sum(conj(a) * b))``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.real(np.vdot(a, b)))


class LinearOperator:
    """Base class: a linear map ``R^N -> C^L`` with its real adjoint.

    Subclasses implement ``_forward``, ``_adjoint`` and ``columns``; the public
    methods validate shapes.
    """

    shape: tuple[int, int]

    @property
    def L(self) -> int:
        return self.shape[0]

    @property
    def N(self) -> int:
        return self.shape[1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.N,):
            raise ValueError(f"expected input of shape ({self.N},), got {x.shape}")
        return self._forward(x)

    def adjoint(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if z.shape != (self.L,):
            raise ValueError(f"expected input of shape ({self.L},), got {z.shape}")
        return self._adjoint(z)

    def columns(self, idx) -> np.ndarray:
        """Explicit ``L x len(idx)`` block of columns of the matrix."""
        raise NotImplementedError

    def todense(self) -> np.ndarray:
        return self.columns(np.arange(self.N))

    def _forward(self, x):
        raise NotImplementedError

    def _adjoint(self, z):
        raise NotImplementedError


class FourierOperator(LinearOperator):
    """Subsampled, ``1/n``-normalized 2D DFT of a flattened ``n x n`` image.

    ``(Gx)[l] = 1/n * sum_{p,q} x[p, q] exp(-2j pi (u_l p + v_l q) / n)``

    The double sum is separable, so both directions are evaluated as two
    dense products of cost ``O(n^2 L)`` without materializing the ``L x N``
    matrix. Phases are reduced modulo ``n`` in integer arithmetic first.
    """

    def __init__(self, freqs: FrequencySampleSet):
        self.freqs = freqs
        n = freqs.n
        self.n = n
        self.shape = (freqs.L, n * n)
        p = np.arange(n)
        u = freqs.coords[:, 0]
        v = freqs.coords[:, 1]
        self._eu = _phase(np.outer(u, p) % n, n)  # (L, n)
        self._ev = _phase(np.outer(v, p) % n, n)
        self._eu.setflags(write=False)
        self._ev.setflags(write=False)

    def _forward(self, x):
        img = x.reshape(self.n, self.n)
        t = img @ self._ev.T  # (n, L): sum over q
        return np.einsum("lp,pl->l", self._eu, t) / self.n

    def _adjoint(self, z):
        a = np.conj(self._eu).T * z  # (n, L)
        return np.real(a @ np.conj(self._ev)).ravel() / self.n

    def columns(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        n = self.n
        p, q = np.divmod(idx, n)
        u = self.freqs.coords[:, 0:1]
        v = self.freqs.coords[:, 1:2]
        return _phase((u * p + v * q) % n, n) / n


def _phase(k, n):
    return np.exp(-2j * np.pi * k / n)


class DenseOperator(LinearOperator):
    """Operator backed by an explicit complex ``L x N`` matrix."""

    def __init__(self, entries):
        entries = np.array(entries, dtype=complex, ndmin=2)
        if entries.ndim != 2:
            raise ValueError("entries must be a 2D matrix")
        entries.setflags(write=False)
        self.entries = entries
        self.shape = entries.shape

    def _forward(self, x):
        return self.entries @ x

    def _adjoint(self, z):
        return np.real(np.conj(self.entries).T @ z)

    def columns(self, idx) -> np.ndarray:
        return self.entries[:, np.asarray(idx, dtype=np.int64)]


class CountingOperator(LinearOperator):
    """Wraps an operator and counts forward/adjoint applications.

    Each solver run owns its own wrapper; the wrapped operator stays
    immutable and shareable.
    """

    def __init__(self, base: LinearOperator):
        self.base = base
        self.shape = base.shape
        self.n_forward = 0
        self.n_adjoint = 0

    def _forward(self, x):
        self.n_forward += 1
        return self.base._forward(x)

    def _adjoint(self, z):
        self.n_adjoint += 1
        return self.base._adjoint(z)

    def columns(self, idx) -> np.ndarray:
        return self.base.columns(idx)


def dft_forward(x, freqs: FrequencySampleSet) -> np.ndarray:
    """Apply the subsampled 2D DFT to a flattened real image."""
    x = np.asarray(x, dtype=float)
    if x.shape != (freqs.n**2,):
        raise ValueError(f"image must have {freqs.n**2} entries, got shape {x.shape}")
    return FourierOperator(freqs).forward(x)


def dft_adjoint(z, freqs: FrequencySampleSet) -> np.ndarray:
    """Apply the real adjoint of the subsampled 2D DFT."""
    z = np.asarray(z, dtype=complex)
    if z.shape != (freqs.L,):
        raise ValueError(f"measurement vector must have {freqs.L} entries, got shape {z.shape}")
    return FourierOperator(freqs).adjoint(z)


def restrict_columns(op: LinearOperator, support) -> DenseOperator:
    """Restrict ``op`` to the columns listed in ``support``.

    The result acts on vectors of length ``len(support)``; its forward map
    equals ``op`` applied to the zero-padded embedding, and its adjoint is
    ``op``'s adjoint followed by index selection.
    """
    support = np.asarray(support, dtype=np.int64).ravel()
    if support.size and (support.min() < 0 or support.max() >= op.N):
        raise ValueError(f"support indices must lie in [0, {op.N})")
    if np.unique(support).size != support.size:
        raise ValueError("support indices must be distinct")
    return DenseOperator(np.empty((op.L, 0), dtype=complex) if support.size == 0 else op.columns(support))


def operator_norm_sq(op: LinearOperator, tol: float = 1e-6, max_iter: int = 500, seed: int = 0, x0=None) -> float:
    """Estimate ``||G||^2``, the largest eigenvalue of ``G* G``, by power iteration.

    Starts from a seeded uniform random vector (or ``x0`` when given) and
    stops once the Rayleigh quotient changes by at most ``tol`` relatively,
    or after ``max_iter`` iterations.
    """
    return power_iteration(op, tol, max_iter, seed, x0)[0]


def power_iteration(op: LinearOperator, tol: float = 1e-6, max_iter: int = 500, seed: int = 0, x0=None):
    """Like :func:`operator_norm_sq` but also returns the last unit iterate."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if op.N == 0:
        return 0.0, np.zeros(0)
    if x0 is None or not np.any(x0):
        x = np.random.default_rng(seed).uniform(size=op.N)
    else:
        x = np.array(x0, dtype=float)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(max_iter):
        gx = op.forward(x)
        new = hermitian_inner(gx, gx)
        w = op.adjoint(gx)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0, x
        x = w / nrm
        if abs(new - est) <= tol * new:
            return new, x
        est = new
    return est, x
