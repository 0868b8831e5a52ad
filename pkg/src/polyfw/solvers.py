"""LASSO solvers: ISTA, accelerated proximal gradient, vanilla and polyatomic Frank-Wolfe.

All solvers minimize

    L(x) = 1/2 ||y - G x||_2^2 + lam ||x||_1,   x in R^N,

for a complex measurement vector ``y`` and an operator ``G: R^N -> C^L``.
Every traced run wraps the problem operator in a :class:`CountingOperator`
so that traces report how many full forward/adjoint applications were used.
Applications of column-restricted operators (the polyatomic subsolver) are
counted separately, together with their cost relative to a full application.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .operators import (
    CountingOperator,
    LinearOperator,
    hermitian_inner,
    operator_norm_sq,
    power_iteration,
    restrict_columns,
)

__all__ = [
    "LassoProblem",
    "DualCertificate",
    "ActiveSet",
    "TraceRow",
    "SolverTrace",
    "PfwConfig",
    "PfwState",
    "lasso_objective",
    "dual_certificate",
    "soft_threshold",
    "run_ista",
    "run_apgd",
    "vfw_direction",
    "run_vfw",
    "pfw_candidates",
    "run_pfw",
    "is_certified",
]


@dataclass(frozen=True, eq=False)
class LassoProblem:
    op: LinearOperator
    y: np.ndarray
    lam: float

    def __post_init__(self):
        y = np.asarray(self.y, dtype=complex)
        if y.shape != (self.op.L,):
            raise ValueError(f"y must have shape ({self.op.L},), got {y.shape}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be positive and finite, got {self.lam}")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def N(self) -> int:
        return self.op.N

    @cached_property
    def M(self) -> float:
        """Radius of the l1 ball that contains every LASSO minimizer."""
        return hermitian_inner(self.y, self.y) / (2.0 * self.lam)

    @cached_property
    def lipschitz(self) -> float:
        return operator_norm_sq(self.op)

    @cached_property
    def lambda_max(self) -> float:
        """Smallest ``lam`` for which ``x = 0`` is a minimizer."""
        return float(np.max(np.abs(self.op.adjoint(self.y))))


@dataclass
class DualCertificate:
    values: np.ndarray

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


@dataclass
class ActiveSet:
    """Monotone union of the polyatomic candidate sets."""

    indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    history: list = field(default_factory=list)

    def update(self, candidates: np.ndarray) -> np.ndarray:
        self.history.append(np.asarray(candidates, dtype=np.int64))
        self.indices = np.union1d(self.indices, candidates).astype(np.int64)
        return self.indices


@dataclass
class TraceRow:
    iter: int
    objective: float
    time_s: float
    forward_count: int
    adjoint_count: int
    support_size: int
    sub_forward_count: int = 0
    sub_adjoint_count: int = 0
    # full-application equivalents, restricted applications weighted by |S|/N
    work: float = 0.0


@dataclass
class SolverTrace:
    solver: str
    rows: list = field(default_factory=list)
    x: np.ndarray | None = None
    reason: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.rows])

    @property
    def iterations(self) -> int:
        return self.rows[-1].iter if self.rows else 0

    @property
    def final_objective(self) -> float:
        return self.rows[-1].objective


@dataclass
class PfwConfig:
    """Settings for :func:`run_pfw`.

    ``delta`` is the absolute exploration width; when ``None`` it is set at
    the first iteration to ``delta_factor * ||eta_1||_inf``. The run stops
    once ``||eta||_inf <= 1 + tol``; ``obj_tol`` is a fallback on the relative
    objective spread over the last ``window`` iterations.
    """

    delta: float | None = None
    delta_factor: float = 0.05
    eps0: float = 1e-2
    max_iter: int = 1000
    tol: float = 1e-4
    sub_iter_cap: int = 10_000
    window: int = 10
    obj_tol: float = 1e-10

    def __post_init__(self):
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.delta_factor > 0:
            raise ValueError("delta_factor must be positive")
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class PfwState:
    """Snapshot handed to the ``callback`` of :func:`run_pfw` after each iteration."""

    k: int
    x: np.ndarray
    eta: np.ndarray
    candidates: np.ndarray
    active: np.ndarray
    gamma: float
    eps: float
    objective: float


def lasso_objective(problem: LassoProblem, x) -> float:
    x = np.asarray(x, dtype=float)
    r = problem.y - problem.op.forward(x)
    return _objective(problem, x, r)


def _objective(problem, x, residual):
    return 0.5 * hermitian_inner(residual, residual) + problem.lam * float(np.abs(x).sum())


def dual_certificate(problem: LassoProblem, x) -> DualCertificate:
    x = np.asarray(x, dtype=float)
    r = problem.y - problem.op.forward(x)
    return DualCertificate(problem.op.adjoint(r) / problem.lam)


def soft_threshold(v, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def is_certified(eta: np.ndarray, x: np.ndarray, tol: float) -> bool:
    """LASSO optimality test: ``||eta||_inf <= 1 + tol`` and ``eta = sign(x)`` on the support."""
    if np.max(np.abs(eta), initial=0.0) > 1.0 + tol:
        return False
    on = x != 0
    return bool(np.all(np.abs(eta[on] - np.sign(x[on])) <= tol))


class _Clock:
    def __init__(self, budget):
        self.t0 = time.perf_counter()
        self.budget = budget

    def elapsed(self):
        return time.perf_counter() - self.t0

    def expired(self):
        return self.budget is not None and self.elapsed() >= self.budget


class _Recorder:
    """Accumulates trace rows for one solver run."""

    def __init__(self, name, op, clock):
        self.trace = SolverTrace(name)
        self.op = op
        self.clock = clock
        self.sub_forward = 0
        self.sub_adjoint = 0
        self.sub_work = 0.0

    def add_sub(self, n_fwd, n_adj, width):
        self.sub_forward += n_fwd
        self.sub_adjoint += n_adj
        self.sub_work += (n_fwd + n_adj) * width / self.op.N

    def record(self, k, objective, x):
        op = self.op
        self.trace.rows.append(
            TraceRow(
                iter=k,
                objective=float(objective),
                time_s=self.clock.elapsed(),
                forward_count=op.n_forward,
                adjoint_count=op.n_adjoint,
                support_size=int(np.count_nonzero(x)),
                sub_forward_count=self.sub_forward,
                sub_adjoint_count=self.sub_adjoint,
                work=op.n_forward + op.n_adjoint + self.sub_work,
            )
        )

    def finish(self, x, reason, **meta):
        self.trace.x = x
        self.trace.reason = reason
        self.trace.meta.update(meta)
        return self.trace


def _ista_restricted(problem, support, x_init, eps_rel, iter_cap, gx_init=None, op=None, warm=None):
    """Warm-started ISTA on the columns ``support``.

    Returns the zero-padded iterate, its image under the operator, the
    number of restricted forward/adjoint applications spent, and the
    zero-padded top singular vector of the restricted operator (pass it back
    as ``warm`` to speed up the next step-size estimate).
    """
    op = problem.op if op is None else op
    x = np.array(x_init, dtype=float)
    support = np.asarray(support, dtype=np.int64)
    if support.size == 0:
        gx = np.zeros(op.L, dtype=complex) if gx_init is None else gx_init
        return x, gx, (0, 0), warm
    sub = CountingOperator(restrict_columns(op, support))
    norm_sq, v = power_iteration(sub, x0=None if warm is None else warm[support])
    tau = 1.0 / norm_sq
    thresh = tau * problem.lam
    u = x[support]
    gu = sub.forward(u)
    for _ in range(iter_cap):
        u_new = soft_threshold(u - tau * sub.adjoint(gu - problem.y), thresh)
        step = np.linalg.norm(u_new - u)
        base = np.linalg.norm(u)
        u = u_new
        gu = sub.forward(u)
        if step <= eps_rel * base or step == 0.0:
            break
    out = np.zeros(op.N)
    out[support] = u
    vec = np.zeros(op.N)
    vec[support] = v
    return out, gu, (sub.n_forward, sub.n_adjoint), vec


def run_ista(problem: LassoProblem, support, x_init, eps_rel: float, iter_cap: int = 10_000) -> np.ndarray:
    """Solve the LASSO restricted to ``support`` by ISTA, warm-started at ``x_init``.

    Iterates soft-thresholded gradient steps of size ``1 / ||G_S||^2`` until
    the relative iterate change drops to ``eps_rel`` or ``iter_cap`` steps
    were taken, and returns the zero-padded full-length solution.
    """
    x_init = np.asarray(x_init, dtype=float)
    support = np.asarray(support, dtype=np.int64)
    outside = np.ones(problem.N, dtype=bool)
    outside[support] = False
    if np.any(x_init[outside] != 0):
        raise ValueError("x_init must be supported inside the given support")
    x, _, _, _ = _ista_restricted(problem, support, x_init, eps_rel, iter_cap)
    return x


def run_apgd(
    problem: LassoProblem,
    max_iter: int = 10_000,
    tol: float = 1e-10,
    accelerated: bool = True,
    time_budget: float | None = None,
) -> SolverTrace:
    """Proximal gradient descent on the full problem, with FISTA momentum by default.

    Stops after ``max_iter`` iterations or once the objective changes by at
    most ``tol`` relatively between consecutive iterations. The image of the
    momentum point is obtained by linearity, so each iteration costs one
    forward and one adjoint application.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    clock = _Clock(time_budget)
    G = CountingOperator(problem.op)
    rec = _Recorder("apgd" if accelerated else "ista", G, clock)
    tau = 1.0 / problem.lipschitz if problem.lipschitz > 0 else 1.0
    y, lam = problem.y, problem.lam

    x = np.zeros(problem.N)
    gx = np.zeros(problem.op.L, dtype=complex)
    z, gz = x, gx
    t = 1.0
    prev = _objective(problem, x, y - gx)
    rec.record(0, prev, x)
    reason = "max_iter"
    for k in range(1, max_iter + 1):
        x_new = soft_threshold(z - tau * G.adjoint(gz - y), tau * lam)
        gx_new = G.forward(x_new)
        obj = _objective(problem, x_new, y - gx_new)
        if accelerated:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_new
            t = t_new
            z = x_new + beta * (x_new - x)
            gz = gx_new + beta * (gx_new - gx)
        else:
            z, gz = x_new, gx_new
        x, gx = x_new, gx_new
        rec.record(k, obj, x)
        if abs(obj - prev) <= tol * abs(prev):
            reason = "tolerance"
            break
        prev = obj
        if clock.expired():
            reason = "time_budget"
            break
    return rec.finish(x, reason, step=tau)


def vfw_direction(eta, M: float) -> tuple[int, float]:
    """Frank-Wolfe atom ``sign(eta[i]) * M * e_i`` with ``i = argmax |eta|``.

    Ties go to the lowest index; a zero certificate yields ``(0, +M)``.
    """
    eta = np.asarray(eta.values if isinstance(eta, DualCertificate) else eta, dtype=float)
    i = int(np.argmax(np.abs(eta)))
    sign = -1.0 if eta[i] < 0 else 1.0
    return i, sign * M


def run_vfw(
    problem: LassoProblem,
    max_iter: int = 10_000,
    tol: float = 1e-8,
    window: int = 10,
    time_budget: float | None = None,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> SolverTrace:
    """Vanilla Frank-Wolfe over the l1 ball of radius ``M``, step ``2 / (k + 2)``.

    The linear minimization is taken over the lifted domain
    ``{(t, x): ||x||_1 <= t <= M}`` which absorbs the l1 penalty: the atom
    ``+-M e_i`` is used when ``|eta[i]| > 1`` and the zero atom otherwise.
    Stops when the iterate is certified optimal to ``tol``, when the
    objective varies by at most ``tol`` relatively over ``window``
    iterations, or after ``max_iter`` iterations.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    clock = _Clock(time_budget)
    G = CountingOperator(problem.op)
    rec = _Recorder("vfw", G, clock)
    y, lam, M = problem.y, problem.lam, problem.M

    x = np.zeros(problem.N)
    gx = np.zeros(problem.op.L, dtype=complex)
    obj = _objective(problem, x, y - gx)
    rec.record(0, obj, x)
    history = [obj]
    reason = "max_iter"
    gammas = []
    for k in range(1, max_iter + 1):
        eta = G.adjoint(y - gx) / lam
        if is_certified(eta, x, tol):
            rec.record(k, obj, x)
            reason = "converged"
            break
        i, val = vfw_direction(eta, M)
        gamma = 2.0 / (k + 2)
        gammas.append(gamma)
        x = (1.0 - gamma) * x
        if abs(eta[i]) > 1.0:
            x[i] += gamma * val
        gx = G.forward(x)
        obj = _objective(problem, x, y - gx)
        rec.record(k, obj, x)
        history.append(obj)
        if callback is not None:
            callback(k, x)
        if _stalled(history, window, tol):
            reason = "tolerance"
            break
        if clock.expired():
            reason = "time_budget"
            break
    return rec.finish(x, reason, M=M, gammas=gammas)


def _stalled(history, window, tol):
    if window < 1 or len(history) <= window:
        return False
    recent = history[-(window + 1):]
    return max(recent) - min(recent) <= tol * abs(recent[-1])


def pfw_candidates(eta, delta: float, gamma_k: float) -> np.ndarray:
    """Indices whose certificate magnitude is within ``delta * gamma_k`` of the maximum."""
    mag = np.abs(np.asarray(eta.values if isinstance(eta, DualCertificate) else eta, dtype=float))
    if not np.any(mag):
        return np.arange(mag.size)
    return np.flatnonzero(mag >= mag.max() - delta * gamma_k)


def run_pfw(
    problem: LassoProblem,
    config: PfwConfig | None = None,
    time_budget: float | None = None,
    callback: Callable[[PfwState], None] | None = None,
) -> SolverTrace:
    """Polyatomic Frank-Wolfe.

    Each iteration adds every index whose certificate is within
    ``delta * gamma_k`` of its sup-norm to the active set, then re-weights
    the active coordinates by warm-started ISTA stopped at relative
    precision ``eps0 * gamma_k``.
    """
    cfg = PfwConfig() if config is None else config
    clock = _Clock(time_budget)
    G = CountingOperator(problem.op)
    rec = _Recorder("pfw", G, clock)
    y, lam = problem.y, problem.lam

    x = np.zeros(problem.N)
    gx = np.zeros(problem.op.L, dtype=complex)
    active = ActiveSet()
    delta = cfg.delta
    warm = None
    obj = _objective(problem, x, y - gx)
    rec.record(0, obj, x)
    history = [obj]
    reason = "max_iter"
    eta_sup = math.nan
    for k in range(1, cfg.max_iter + 1):
        eta = G.adjoint(y - gx) / lam
        eta_sup = float(np.max(np.abs(eta)))
        if eta_sup <= 1.0 + cfg.tol:
            rec.record(k, obj, x)
            reason = "converged"
            break
        gamma = 2.0 / (k + 2)
        if delta is None:
            delta = cfg.delta_factor * eta_sup
        cand = pfw_candidates(eta, delta, gamma)
        S = active.update(cand)
        eps = cfg.eps0 * gamma
        x, gx, (nf, na), warm = _ista_restricted(problem, S, x, eps, cfg.sub_iter_cap, gx, op=G, warm=warm)
        rec.add_sub(nf, na, S.size)
        obj = _objective(problem, x, y - gx)
        rec.record(k, obj, x)
        history.append(obj)
        if callback is not None:
            callback(PfwState(k, x.copy(), eta, cand, S.copy(), gamma, eps, obj))
        if _stalled(history, cfg.window, cfg.obj_tol):
            reason = "tolerance"
            break
        if clock.expired():
            reason = "time_budget"
            break
    return rec.finish(x, reason, delta=delta, active_set=active, eta_sup=eta_sup)
