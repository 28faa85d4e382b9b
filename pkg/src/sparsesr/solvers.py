"""Sparse-recovery solvers behind one interface selectable by name.

All four algorithms estimate a sparse coefficient vector alpha such that
``x ~= D @ alpha`` for a dictionary D with atoms as columns:

* ``omp``  -- orthogonal matching pursuit, greedy atom selection plus a
  least-squares refit on the growing support.
* ``ista`` -- iterative soft thresholding on the l1-penalized objective
  ``0.5*||x - D a||^2 + lam*||a||_1``.
* ``sl0``  -- smoothed-l0 descent over a shrinking Gaussian width, with an
  exact feasibility projection after every gradient step.
* ``qp``   -- the same l1 objective rewritten as a nonnegative quadratic
  program via the split ``a = u - w`` and solved by projected gradient.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .linalg import SingularSystemError  # noqa: F401  (re-exported: callers catch it here)

SOLVER_NAMES = ("omp", "ista", "sl0", "qp")

# Entries smaller than these thresholds do not count as support.
PRUNE_ABS = 1e-12  # ista / qp, absolute
PRUNE_REL = 1e-9  # sl0, relative to max |alpha|


@dataclass(frozen=True)
class SparseCode:
    """Sparse coefficient vector: strictly increasing indices, nonzero values."""

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-D and equal length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim or np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing within [0, dim)")
            if np.any(val == 0.0):
                raise ValueError("stored values must be nonzero")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim)
        dense[self.indices] = self.values
        return dense

    @staticmethod
    def from_dense(vec, min_abs: float = 0.0) -> "SparseCode":
        vec = np.asarray(vec, dtype=np.float64)
        keep = np.flatnonzero(np.abs(vec) >= min_abs) if min_abs > 0.0 else np.flatnonzero(vec)
        keep = keep[vec[keep] != 0.0]
        return SparseCode(dim=vec.size, indices=keep, values=vec[keep])


@dataclass
class SolverConfig:
    """Knobs for all solvers; fields a given solver does not use are ignored."""

    kind: str = "omp"
    sparsity_k: int = 3
    lam: float = 0.1
    max_iters: int = 1000
    tol: float = 1e-6
    sl0_sigma_decay: float = 0.5
    sl0_inner_steps: int = 3
    sl0_mu: float = 2.0

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in SOLVER_NAMES:
            raise ValueError(f"unknown solver kind '{self.kind}': valid names are {', '.join(SOLVER_NAMES)}")
        if self.sparsity_k < 0:
            raise ValueError("sparsity_k must be >= 0")
        if self.lam < 0.0:
            raise ValueError("lambda must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0.0:
            raise ValueError("tol must be > 0")
        if not 0.0 < self.sl0_sigma_decay < 1.0:
            raise ValueError("sl0_sigma_decay must lie in (0, 1)")
        if self.sl0_inner_steps < 1:
            raise ValueError("sl0_inner_steps must be >= 1")
        if self.sl0_mu <= 0.0:
            raise ValueError("sl0_mu must be > 0")

    _DEFAULTS = {
        "omp": {"tol": 1e-6},
        "ista": {"lam": 0.1, "max_iters": 1000, "tol": 1e-8},
        "sl0": {"tol": 1e-6, "sl0_sigma_decay": 0.5, "sl0_inner_steps": 3, "sl0_mu": 2.0},
        "qp": {"lam": 0.1, "max_iters": 2000, "tol": 1e-8},
    }

    @classmethod
    def defaults(cls, kind: str, **overrides) -> "SolverConfig":
        """Canonical per-solver defaults, with keyword overrides."""
        kind = kind.lower()
        if kind not in cls._DEFAULTS:
            raise ValueError(f"unknown solver '{kind}': valid names are {', '.join(SOLVER_NAMES)}")
        kwargs = dict(cls._DEFAULTS[kind])
        kwargs.update(overrides)
        return cls(kind=kind, **kwargs)


@dataclass
class SolveStats:
    """Per-call diagnostics; objective_trace is populated by ista/qp only."""

    iterations_used: int
    final_residual_norm: float
    objective_trace: list = field(default=None)


def soft_threshold(v: float, t: float) -> float:
    """sign(v) * max(|v| - t, 0); the proximal map of t*|.|."""
    if t < 0.0:
        raise ValueError("threshold must be >= 0")
    mag = abs(v) - t
    if mag <= 0.0:
        return 0.0
    return mag if v > 0.0 else -mag


def _soft_vec(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _check_problem(d, x):
    d = linalg._as_matrix(d)
    x = linalg._as_vector(x)
    if d.shape[0] != x.shape[0]:
        raise ValueError(f"dimension mismatch: D is {d.shape}, x has {x.shape[0]} rows")
    return d, x


def solve_omp(d, x, cfg: SolverConfig):
    """Greedy pursuit: pick the atom most correlated with the residual,
    refit by least squares on the support, repeat.

    Correlations are scaled by atom norm so near-unit-norm dictionaries and
    the sub-unit LR halves of coupled dictionaries behave identically; ties
    break toward the lowest index. Stops at sparsity_k atoms or once the
    residual drops below tol * ||x||.
    """
    d, x = _check_problem(d, x)
    n, m = d.shape
    k = cfg.sparsity_k
    if k > min(n, m):
        raise ValueError(f"sparsity_k={k} exceeds min(D.rows, D.cols)={min(n, m)}")
    col_norms = np.sqrt((d * d).sum(axis=0))
    scale = np.where(col_norms > 0.0, col_norms, np.inf)
    x_norm = np.linalg.norm(x)
    residual = x.copy()
    support: list[int] = []
    coef = np.zeros(0)
    iterations = 0
    for _ in range(k):
        if np.linalg.norm(residual) <= cfg.tol * x_norm:
            break
        score = np.abs(d.T @ residual) / scale
        if support:
            score[support] = -np.inf
        j = int(np.argmax(score))
        support.append(j)
        coef = linalg.least_squares(d[:, support], x)
        residual = x - d[:, support] @ coef
        iterations += 1
    dense = np.zeros(m)
    dense[support] = coef
    stats = SolveStats(iterations, float(np.linalg.norm(residual)))
    return SparseCode.from_dense(dense), stats


def _lipschitz(d: np.ndarray) -> float:
    # safety factor keeps the estimate on the contractive side
    return linalg.spectral_norm_sq(d, iters=100, rng=linalg.Rng(0)) * (1.0 + 1e-3)


def solve_ista(d, x, cfg: SolverConfig):
    """Proximal gradient descent on 0.5*||x - D a||^2 + lam*||a||_1.

    Step size 1/L with L = (1 + 1e-3) * lambda_max(D^T D); stops when the
    iterate moves less than tol or after max_iters.
    """
    d, x = _check_problem(d, x)
    m = d.shape[1]
    lip = _lipschitz(d)
    if lip == 0.0:
        stats = SolveStats(0, float(np.linalg.norm(x)), [0.5 * float(x @ x)])
        return SparseCode(m, np.empty(0, np.int64), np.empty(0)), stats
    shrink = cfg.lam / lip
    alpha = np.zeros(m)
    residual = x.copy()
    trace = [0.5 * float(residual @ residual)]
    iterations = 0
    for _ in range(cfg.max_iters):
        new = _soft_vec(alpha + (d.T @ residual) / lip, shrink)
        residual = x - d @ new
        trace.append(0.5 * float(residual @ residual) + cfg.lam * float(np.abs(new).sum()))
        step = float(np.linalg.norm(new - alpha))
        alpha = new
        iterations += 1
        if step <= cfg.tol:
            break
    stats = SolveStats(iterations, float(np.linalg.norm(residual)), trace)
    return SparseCode.from_dense(alpha, min_abs=PRUNE_ABS), stats


def solve_sl0(d, x, cfg: SolverConfig):
    """Smoothed-l0 descent over a geometric sigma schedule.

    Starts at the minimum-l2 feasible point D^T (D D^T)^{-1} x, then for each
    sigma runs sl0_inner_steps of the shrink step
    ``a -= mu * a * exp(-a^2 / (2 sigma^2))`` followed by an exact projection
    back onto {a : D a = x}. The schedule stops once sigma < tol.

    Learned LR dictionaries routinely make D D^T rank-deficient (their atoms
    span only the feature subspace of upscaled images), so when the exact
    factorization fails the projection falls back to a ridge-regularized
    Gram, which acts as a pseudo-inverse onto the attainable range.
    """
    d, x = _check_problem(d, x)
    n, m = d.shape
    if n > m:
        raise ValueError(f"sl0 needs a wide dictionary (rows <= cols), got {d.shape}")
    gram = d @ d.T
    try:
        low = linalg.cholesky_spd(gram)
    except SingularSystemError:
        ridge = 1e-9 * float(np.max(np.diag(gram)))
        if ridge == 0.0:  # all-zero dictionary: zero is the only answer
            stats = SolveStats(0, float(np.linalg.norm(x)))
            return SparseCode(m, np.empty(0, np.int64), np.empty(0)), stats
        low = linalg.cholesky_spd(gram + ridge * np.eye(n))
    # explicit pseudo-inverse: one factorization, then pure matmuls below
    pinv = d.T @ linalg.cho_solve(low, np.eye(n))
    alpha = pinv @ x
    sigma = 2.0 * float(np.max(np.abs(alpha))) if alpha.size else 0.0
    steps = 0
    while sigma >= cfg.tol:
        for _ in range(cfg.sl0_inner_steps):
            alpha = alpha - cfg.sl0_mu * alpha * np.exp(-(alpha * alpha) / (2.0 * sigma * sigma))
            alpha = alpha - pinv @ (d @ alpha - x)
            steps += 1
        sigma *= cfg.sl0_sigma_decay
    residual = float(np.linalg.norm(d @ alpha - x))
    peak = float(np.max(np.abs(alpha))) if alpha.size else 0.0
    code = SparseCode.from_dense(alpha, min_abs=PRUNE_REL * peak if peak > 0.0 else 0.0)
    return code, SolveStats(steps, residual)


def solve_qp(d, x, cfg: SolverConfig):
    """Projected gradient on the nonnegative split of the l1 objective.

    With a = u - w, u >= 0, w >= 0, minimizes
    ``0.5*||x - D(u - w)||^2 + lam * sum(u + w)`` taking steps of 1/L (same L
    as ista) followed by clamping at zero.
    """
    d, x = _check_problem(d, x)
    m = d.shape[1]
    lip = _lipschitz(d)
    if lip == 0.0:
        stats = SolveStats(0, float(np.linalg.norm(x)), [0.5 * float(x @ x)])
        return SparseCode(m, np.empty(0, np.int64), np.empty(0)), stats
    u = np.zeros(m)
    w = np.zeros(m)
    residual = x.copy()
    trace = [0.5 * float(residual @ residual)]
    iterations = 0
    for _ in range(cfg.max_iters):
        g = d.T @ residual
        u_new = np.maximum(u + (g - cfg.lam) / lip, 0.0)
        w_new = np.maximum(w + (-g - cfg.lam) / lip, 0.0)
        residual = x - d @ (u_new - w_new)
        trace.append(
            0.5 * float(residual @ residual) + cfg.lam * float(u_new.sum() + w_new.sum())
        )
        step = float(np.sqrt(((u_new - u) ** 2).sum() + ((w_new - w) ** 2).sum()))
        u, w = u_new, w_new
        iterations += 1
        if step <= cfg.tol:
            break
    stats = SolveStats(iterations, float(np.linalg.norm(residual)), trace)
    return SparseCode.from_dense(u - w, min_abs=PRUNE_ABS), stats


_DISPATCH = {
    "omp": solve_omp,
    "ista": solve_ista,
    "sl0": solve_sl0,
    "qp": solve_qp,
}


def solve(name: str, d, x, cfg: SolverConfig):
    """Run the solver named `name` (case-insensitive) on (D, x)."""
    key = name.lower()
    if key not in _DISPATCH:
        raise ValueError(f"unknown solver '{name}': valid names are {', '.join(SOLVER_NAMES)}")
    return _DISPATCH[key](d, x, cfg)
