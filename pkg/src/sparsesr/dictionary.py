"""K-SVD dictionary training, coupled LR/HR training, and dictionary files.

Training alternates a sparse-coding stage (per-column OMP at fixed sparsity)
with per-atom rank-1 residual updates, the classic K-SVD scheme. Coupled
training runs the same loop on stacked, dimension-weighted HR/LR sample
pairs so both halves of every atom share one sparse code by construction.
"""

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .solvers import SolverConfig, solve_omp

MAGIC = b"CDL1"
VERSION = 1

# construction-time tolerance for stacked unit norms; files are checked
# against the looser LOAD_NORM_TOL because they may have travelled
NORM_TOL = 1e-10
LOAD_NORM_TOL = 1e-6


class DictionaryFormatError(ValueError):
    """File is not a readable CDL1 dictionary."""


class DictionaryCorruptionError(ValueError):
    """File parsed but its contents violate dictionary invariants."""


@dataclass
class Dictionary:
    """Learned dictionary with unit-norm atom columns."""

    atoms: np.ndarray
    sparsity_k: int
    train_iters: int
    seed: int
    error_trace: list = field(default_factory=list, compare=False)

    def __post_init__(self):
        norms = np.sqrt((self.atoms * self.atoms).sum(axis=0))
        if np.max(np.abs(norms - 1.0)) > NORM_TOL:
            raise ValueError("dictionary atoms must be unit-norm")
        n, m = self.atoms.shape
        if m < n:
            warnings.warn(f"dictionary is undercomplete ({m} atoms < {n} dims)", stacklevel=3)

    @property
    def num_atoms(self) -> int:
        return self.atoms.shape[1]


@dataclass
class CoupledDictionary:
    """Paired HR/LR dictionaries whose stacked, weighted atoms are unit-norm."""

    d_hr: np.ndarray
    d_lr: np.ndarray
    scale: int
    patch_size_hr: int
    overlap_hr: int
    sparsity_k: int
    feature_spec_id: str
    seed: int
    error_trace: list = field(default_factory=list, compare=False)

    def __post_init__(self):
        self.d_hr = np.asarray(self.d_hr, dtype=np.float64)
        self.d_lr = np.asarray(self.d_lr, dtype=np.float64)
        self.validate()

    @property
    def num_atoms(self) -> int:
        return self.d_hr.shape[1]

    @property
    def hr_weight(self) -> float:
        """Stacking weight for HR rows: 1/p."""
        return 1.0 / self.patch_size_hr

    @property
    def lr_weight(self) -> float:
        """Stacking weight for LR rows: 1/(2q) with 4q^2 LR rows."""
        q2 = self.d_lr.shape[0] / 4.0
        return 1.0 / (2.0 * np.sqrt(q2))

    def stacked_atoms(self) -> np.ndarray:
        return np.vstack([self.d_hr * self.hr_weight, self.d_lr * self.lr_weight])

    def validate(self, norm_tol: float = LOAD_NORM_TOL) -> None:
        if self.d_hr.ndim != 2 or self.d_lr.ndim != 2:
            raise ValueError("d_hr and d_lr must be 2-D")
        if self.d_hr.shape[1] != self.d_lr.shape[1]:
            raise ValueError(
                f"atom count mismatch: d_hr has {self.d_hr.shape[1]}, d_lr has {self.d_lr.shape[1]}"
            )
        if self.scale < 2:
            raise ValueError("scale must be >= 2")
        p = self.patch_size_hr
        if self.d_hr.shape[0] != p * p:
            raise ValueError(f"d_hr must have {p * p} rows for patch size {p}")
        if self.d_lr.shape[0] % 4 != 0:
            raise ValueError("d_lr row count must be 4*q^2")
        if not 0 <= self.overlap_hr < p:
            raise ValueError("overlap must lie in [0, patch_size)")
        norms = np.sqrt((self.stacked_atoms() ** 2).sum(axis=0))
        worst = float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0
        if worst > norm_tol:
            raise ValueError(f"stacked atom norms deviate from 1 by {worst:.3e}")


def _dominant_rank1(block: np.ndarray, start: np.ndarray, rtol: float = 1e-10, max_iters: int = 500):
    """Dominant singular triple of `block` by alternating power iteration."""
    u = start
    sigma_prev = -1.0
    sigma = 0.0
    v = None
    for _ in range(max_iters):
        v = block.T @ u
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return None
        v /= nv
        w = block @ v
        sigma = np.linalg.norm(w)
        if sigma == 0.0:
            return None
        u = w / sigma
        if abs(sigma - sigma_prev) <= rtol * sigma:
            break
        sigma_prev = sigma
    return u, float(sigma), v


def ksvd_train(samples, num_atoms: int, sparsity: int, iters: int, rng: linalg.Rng) -> Dictionary:
    """K-SVD: alternate per-column OMP coding and rank-1 atom updates.

    Init takes `num_atoms` distinct nonzero data columns (seeded choice),
    normalized. Atoms nobody uses are replaced by the worst-represented data
    column. The returned error_trace holds ||X - D A||_F per iteration,
    measured after the atom updates.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("training samples must be a 2-D matrix, one column per sample")
    n, n_samples = x.shape
    if num_atoms > n_samples:
        raise ValueError(f"cannot learn {num_atoms} atoms from {n_samples} samples")
    if sparsity > n:
        raise ValueError(f"sparsity {sparsity} exceeds sample dimension {n}")
    if iters < 1:
        raise ValueError("iters must be >= 1")

    col_norms = np.sqrt((x * x).sum(axis=0))
    nonzero_cols = int((col_norms > 0.0).sum())
    if nonzero_cols < num_atoms:
        raise ValueError(
            f"need {num_atoms} nonzero training columns for initialization, found {nonzero_cols}"
        )

    # seeded init: distinct data columns, resampling any zero column
    order = rng.sample_indices(n_samples, n_samples)
    chosen = [j for j in order if col_norms[j] > 0.0][:num_atoms]
    atoms = x[:, chosen] / col_norms[chosen]

    cfg = SolverConfig.defaults("omp", sparsity_k=sparsity)
    codes = np.zeros((num_atoms, n_samples))
    trace: list[float] = []
    for _ in range(iters):
        # sparse-coding stage; a column keeps its previous (refitted) code
        # when greedy re-selection would represent it worse, which is what
        # makes the error trace non-increasing
        for i in range(n_samples):
            code, stats = solve_omp(atoms, x[:, i], cfg)
            old_support = np.flatnonzero(codes[:, i])
            if old_support.size:
                old_resid = x[:, i] - atoms[:, old_support] @ codes[old_support, i]
                if float(np.linalg.norm(old_resid)) < stats.final_residual_norm:
                    continue
            codes[:, i] = 0.0
            codes[code.indices, i] = code.values

        # atom-update stage (Gauss-Seidel over atoms, residual kept current)
        resid = x - atoms @ codes
        claimed: set[int] = set()
        for j in range(num_atoms):
            users = np.flatnonzero(codes[j, :])
            if users.size == 0:
                worst = _worst_column(resid, col_norms, claimed)
                if worst is not None:
                    claimed.add(worst)
                    atoms[:, j] = x[:, worst] / col_norms[worst]
                continue
            block = resid[:, users] + np.outer(atoms[:, j], codes[j, users])
            triple = _dominant_rank1(block, atoms[:, j])
            if triple is None:  # residual block vanished; retire the atom
                codes[j, users] = 0.0
                resid[:, users] = block
                worst = _worst_column(resid, col_norms, claimed)
                if worst is not None:
                    claimed.add(worst)
                    atoms[:, j] = x[:, worst] / col_norms[worst]
                continue
            u, sigma, v = triple
            atoms[:, j] = u
            codes[j, users] = sigma * v
            resid[:, users] = block - np.outer(u, sigma * v)
        trace.append(float(np.sqrt((resid * resid).sum())))

    return Dictionary(atoms, sparsity, iters, rng.seed, error_trace=trace)


def _worst_column(resid: np.ndarray, col_norms: np.ndarray, claimed: set):
    """Index of the worst-represented nonzero data column not yet claimed."""
    res_norms = (resid * resid).sum(axis=0)
    candidates = np.flatnonzero(col_norms > 0.0)
    candidates = [j for j in candidates if j not in claimed]
    if not candidates:
        return None
    candidates = np.asarray(candidates)
    return int(candidates[np.argmax(res_norms[candidates])])


def coupled_train(
    hr_patches,
    lr_features,
    num_atoms: int,
    sparsity: int,
    iters: int,
    rng: linalg.Rng,
    *,
    scale: int = 2,
    overlap_hr: int | None = None,
    feature_spec_id: str = "grad4-v1",
) -> CoupledDictionary:
    """Joint K-SVD on stacked (hr/p ; lr/(2q)) sample pairs.

    The 1/sqrt(dim) weighting balances the HR and LR reconstruction errors,
    and because a single code is fit per stacked sample, the split halves
    share that code by construction.
    """
    hr = np.asarray(hr_patches, dtype=np.float64)
    lr = np.asarray(lr_features, dtype=np.float64)
    if hr.ndim != 2 or lr.ndim != 2:
        raise ValueError("training pools must be 2-D matrices")
    if hr.shape[1] != lr.shape[1]:
        raise ValueError(f"sample count mismatch: {hr.shape[1]} HR vs {lr.shape[1]} LR columns")
    p = int(round(np.sqrt(hr.shape[0])))
    if p * p != hr.shape[0]:
        raise ValueError(f"HR rows {hr.shape[0]} is not a square patch size")
    if lr.shape[0] % 4 != 0:
        raise ValueError(f"LR rows {lr.shape[0]} must be 4*q^2")
    q = int(round(np.sqrt(lr.shape[0] / 4.0)))
    if 4 * q * q != lr.shape[0]:
        raise ValueError(f"LR rows {lr.shape[0]} is not 4 times a square")
    if overlap_hr is None:
        overlap_hr = p // 2

    w_hr = 1.0 / p
    w_lr = 1.0 / (2.0 * q)
    stacked = np.vstack([hr * w_hr, lr * w_lr])
    learned = ksvd_train(stacked, num_atoms, sparsity, iters, rng)
    d_hr = learned.atoms[: p * p, :] / w_hr
    d_lr = learned.atoms[p * p :, :] / w_lr
    return CoupledDictionary(
        d_hr=d_hr,
        d_lr=d_lr,
        scale=scale,
        patch_size_hr=p,
        overlap_hr=overlap_hr,
        sparsity_k=sparsity,
        feature_spec_id=feature_spec_id,
        seed=rng.seed,
        error_trace=learned.error_trace,
    )


_HEADER = struct.Struct("<4sIIIIIIIIQ")


def save_dictionary(cd: CoupledDictionary, path) -> None:
    """Write the CDL1 binary format, bit-exact."""
    cd.validate()
    spec_bytes = cd.feature_spec_id.encode("utf-8")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        cd.num_atoms,
        cd.d_hr.shape[0],
        cd.d_lr.shape[0],
        cd.scale,
        cd.patch_size_hr,
        cd.overlap_hr,
        cd.sparsity_k,
        cd.seed,
    )
    body = (
        struct.pack("<I", len(spec_bytes))
        + spec_bytes
        + cd.d_hr.ravel(order="F").astype("<f8").tobytes()
        + cd.d_lr.ravel(order="F").astype("<f8").tobytes()
    )
    try:
        Path(path).write_bytes(header + body)
    except OSError as exc:
        raise OSError(f"cannot write dictionary to {path}: {exc}") from exc


def load_dictionary(path) -> CoupledDictionary:
    """Read a CDL1 file, validating format and the stacked-norm invariant."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DictionaryFormatError(f"{path}: file too short for CDL1 header")
    magic, version, m, hr_rows, lr_rows, scale, patch, overlap, sparsity, seed = _HEADER.unpack(
        data[: _HEADER.size]
    )
    if magic != MAGIC:
        raise DictionaryFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DictionaryFormatError(f"{path}: unsupported version {version}")
    pos = _HEADER.size
    if len(data) < pos + 4:
        raise DictionaryFormatError(f"{path}: truncated before feature spec")
    (spec_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if len(data) < pos + spec_len:
        raise DictionaryFormatError(f"{path}: truncated feature spec id")
    feature_spec_id = data[pos : pos + spec_len].decode("utf-8")
    pos += spec_len
    need = (hr_rows + lr_rows) * m * 8
    if len(data) < pos + need:
        raise DictionaryFormatError(f"{path}: pixel payload short by {pos + need - len(data)} bytes")
    flat = np.frombuffer(data, dtype="<f8", count=(hr_rows + lr_rows) * m, offset=pos)
    d_hr = flat[: hr_rows * m].reshape((hr_rows, m), order="F").copy()
    d_lr = flat[hr_rows * m :].reshape((lr_rows, m), order="F").copy()
    try:
        return CoupledDictionary(
            d_hr=d_hr,
            d_lr=d_lr,
            scale=scale,
            patch_size_hr=patch,
            overlap_hr=overlap,
            sparsity_k=sparsity,
            feature_spec_id=feature_spec_id,
            seed=seed,
        )
    except ValueError as exc:
        raise DictionaryCorruptionError(f"{path}: {exc}") from exc
