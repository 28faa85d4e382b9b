"""Small dense linear-algebra kernels shared by the solvers and trainers.

Everything operates on float64 numpy arrays: matrices are 2-D with atoms
stored as columns, vectors are 1-D. The kernels are deliberately minimal --
a pivot-guarded Cholesky, normal-equations least squares, a power-iteration
spectral estimate, column normalization -- plus a tiny deterministic RNG so
that every stochastic choice in the library reproduces from one integer seed.
"""

import numpy as np

__all__ = [
    "SingularSystemError",
    "Rng",
    "matvec",
    "cholesky_spd",
    "cho_solve",
    "least_squares",
    "spectral_norm_sq",
    "normalize_columns",
]

# Relative pivot floor below which a Gram matrix is treated as rank-deficient.
PIVOT_RTOL = 1e-12


class SingularSystemError(ValueError):
    """Raised when a Gram matrix turns out numerically rank-deficient."""


def _as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    return m


def _as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got ndim={v.ndim}")
    return v


def matvec(m, v) -> np.ndarray:
    """Matrix-vector product with an explicit dimension check."""
    m = _as_matrix(m)
    v = _as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {m.shape} @ ({v.shape[0]},)")
    return m @ v


def cholesky_spd(g) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    Raises SingularSystemError when a pivot falls below PIVOT_RTOL times the
    largest diagonal entry of the input, which is how rank deficiency shows
    up in the normal equations.
    """
    g = _as_matrix(g)
    n = g.shape[0]
    if g.shape[1] != n:
        raise ValueError(f"Gram matrix must be square, got {g.shape}")
    floor = PIVOT_RTOL * float(np.max(np.abs(np.diag(g)))) if n else 0.0
    low = np.zeros((n, n))
    for j in range(n):
        pivot = g[j, j] - low[j, :j] @ low[j, :j]
        if pivot <= 0.0 or pivot < floor:
            raise SingularSystemError(
                f"rank-deficient Gram matrix (pivot {pivot:.3e} at row {j})"
            )
        ljj = np.sqrt(pivot)
        low[j, j] = ljj
        if j + 1 < n:
            low[j + 1 :, j] = (g[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / ljj
    return low


def cho_solve(low, rhs) -> np.ndarray:
    """Solve (L L^T) z = rhs given the lower factor; rhs may be 1-D or 2-D."""
    low = _as_matrix(low)
    rhs = np.asarray(rhs, dtype=np.float64)
    n = low.shape[0]
    y = np.zeros_like(rhs)
    for i in range(n):
        y[i] = (rhs[i] - low[i, :i] @ y[:i]) / low[i, i]
    z = np.zeros_like(rhs)
    for i in range(n - 1, -1, -1):
        z[i] = (y[i] - low[i + 1 :, i] @ z[i + 1 :]) / low[i, i]
    return z


def least_squares(a, b) -> np.ndarray:
    """argmin_z ||A z - b||_2 via the normal equations.

    A must be tall (rows >= cols) with full column rank; a rank-deficient
    Gram matrix raises SingularSystemError.
    """
    a = _as_matrix(a)
    b = _as_vector(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: A is {a.shape}, b has {b.shape[0]} rows")
    if a.shape[0] < a.shape[1]:
        raise ValueError(f"A must have rows >= cols, got {a.shape}")
    low = cholesky_spd(a.T @ a)
    return cho_solve(low, a.T @ b)


def spectral_norm_sq(m, iters: int = 100, rng: "Rng | None" = None) -> float:
    """Largest eigenvalue of M^T M, estimated by power iteration."""
    m = _as_matrix(m)
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if not m.any():
        return 0.0
    if rng is None:
        rng = Rng(0)
    v = rng.normals(m.shape[1])
    nv = np.linalg.norm(v)
    while nv == 0.0:  # essentially impossible, but keeps the loop total
        v = rng.normals(m.shape[1])
        nv = np.linalg.norm(v)
    v /= nv
    est = 0.0
    for _ in range(iters):
        w = m.T @ (m @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector lay exactly in the null space; redraw and go on
            v = rng.normals(m.shape[1])
            v /= np.linalg.norm(v)
            continue
        est = float(v @ w)
        v = w / nw
    return est


def normalize_columns(m) -> np.ndarray:
    """Rescale every column to unit Euclidean norm, preserving direction."""
    m = _as_matrix(m)
    norms = np.sqrt((m * m).sum(axis=0))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"cannot normalize zero column at index {int(zero[0])}")
    return m / norms


_MASK64 = (1 << 64) - 1


class Rng:
    """Deterministic splitmix-style 64-bit generator.

    Equal seeds produce equal streams on any platform, which is what makes
    dictionary training and the synthetic benchmarks reproducible.
    """

    __slots__ = ("seed", "_state", "_spare")

    def __init__(self, seed: int = 0):
        self.seed = seed & _MASK64
        self._state = self.seed
        self._spare = None

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """One draw from [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self) -> float:
        """Standard normal draw (Box-Muller, pair cached)."""
        if self._spare is not None:
            z = self._spare
            self._spare = None
            return z
        # shift into (0, 1] so the log is always finite
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = self.uniform()
        r = np.sqrt(-2.0 * np.log(u1))
        self._spare = r * np.sin(2.0 * np.pi * u2)
        return r * np.cos(2.0 * np.pi * u2)

    def randint(self, n: int) -> int:
        """Integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def uniforms(self, *shape) -> np.ndarray:
        total = int(np.prod(shape)) if shape else 1
        return np.array([self.uniform() for _ in range(total)]).reshape(shape)

    def normals(self, *shape) -> np.ndarray:
        total = int(np.prod(shape)) if shape else 1
        return np.array([self.normal() for _ in range(total)]).reshape(shape)

    def sample_indices(self, n: int, count: int) -> list[int]:
        """`count` distinct indices from range(n), by partial Fisher-Yates."""
        if count > n:
            raise ValueError(f"cannot sample {count} distinct indices from {n}")
        pool = list(range(n))
        for i in range(count):
            j = i + self.randint(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:count]
