"""Shared oracles and instance builders for the test suite.

Everything here is deliberately independent from the library code paths it
checks: the eigensolver is a cyclic Jacobi sweep, sparse fits are exhaustive
enumerations refit with numpy's lstsq, and the oracle superresolution
instance is constructed from first principles.
"""

import numpy as np
from itertools import combinations

import sparsesr as ss
from sparsesr.dictionary import CoupledDictionary


def jacobi_eigenvalues(sym, max_sweeps: int = 100) -> np.ndarray:
    """All eigenvalues of a symmetric matrix via cyclic Jacobi rotations."""
    a = np.array(sym, dtype=np.float64, copy=True)
    n = a.shape[0]
    for _ in range(max_sweeps):
        off = np.sqrt((np.tril(a, -1) ** 2).sum())
        if off <= 1e-14 * max(1.0, float(np.abs(np.diag(a)).max())):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / a[p, q]
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return np.sort(np.diag(a))


def best_k_sparse(d, x, k):
    """Best k-sparse fit by enumerating every support, each refit by lstsq.

    Returns (residual_norm, support, coefficients).
    """
    best = (np.inf, None, None)
    for support in combinations(range(d.shape[1]), k):
        cols = d[:, list(support)]
        coef, *_ = np.linalg.lstsq(cols, x, rcond=None)
        r = float(np.linalg.norm(x - cols @ coef))
        if r < best[0]:
            best = (r, support, coef)
    return best


def greedy_match_count(learned, truth, threshold: float) -> int:
    """Greedy bipartite matching on |learned^T truth|; counts matches whose
    absolute correlation clears the threshold."""
    corr = np.abs(learned.T @ truth)
    count = 0
    work = corr.copy()
    for _ in range(min(work.shape)):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        if work[i, j] > threshold:
            count += 1
        work[i, :] = -1.0
        work[:, j] = -1.0
    return count


def texture(width: int, height: int, ox: int = 0, oy: int = 0) -> np.ndarray:
    """Procedural test pattern: two superposed hard-edged gratings."""
    x, y = np.meshgrid(np.arange(width) + ox, np.arange(height) + oy)
    g1 = np.sign(np.sin(0.39 * x + 0.23 * y))
    g2 = np.sign(np.sin(0.11 * x - 0.31 * y + 1.3))
    return 127.5 + 55.0 * g1 + 45.0 * g2


def planted_training_set(rs: np.random.RandomState, n: int, m: int, k: int, n_samples: int):
    """Ground-truth dictionary plus samples synthesized from k-sparse codes."""
    d0 = rs.randn(n, m)
    d0 /= np.sqrt((d0 * d0).sum(axis=0))
    codes = np.zeros((m, n_samples))
    for i in range(n_samples):
        idx = rs.choice(m, k, replace=False)
        codes[idx, i] = rs.randn(k) * (1.0 + rs.rand(k))
    return d0, codes, d0 @ codes


def oracle_sr_instance(seed: int = 11, lr_size: int = 16, patch: int = 8):
    """Superresolution instance that every solver must reconstruct exactly.

    One atom is planted per non-overlapping patch: its LR half is that
    patch's actual feature vector, its HR half is random zero-mean content.
    The remaining atoms form an orthonormal basis of the complement of the
    planted feature span with all-zero HR halves, so their coefficients stay
    at zero for every solver and the planted code is the unique exact fit.

    Returns (lr, coupled_dictionary, hr_truth).
    """
    rs = np.random.RandomState(seed)
    lr = rs.uniform(0.0, 255.0, size=(lr_size, lr_size))
    scale = 2
    p = patch
    out = lr_size * scale
    mid = ss.bicubic_resize(lr, out, out)
    feats = ss.lr_features(mid, p, p)
    grid = ss.extract_patches(mid, p, p)
    n_patch = feats.shape[1]
    w_h, w_l = 1.0 / p, 1.0 / (2 * p)

    hr_content = rs.randn(p * p, n_patch)
    hr_content -= hr_content.mean(axis=0, keepdims=True)
    hr_content *= (
        0.3 * np.linalg.norm(feats, axis=0) * (w_l / w_h) / np.linalg.norm(hr_content, axis=0)
    )
    planted = np.vstack([hr_content * w_h, feats * w_l])
    inv_vals = 1.0 / np.linalg.norm(planted, axis=0)
    planted *= inv_vals

    u, _, _ = np.linalg.svd(feats * w_l, full_matrices=True)
    complement = u[:, n_patch:]
    extras = np.vstack([np.zeros((p * p, complement.shape[1])), complement])
    atoms = np.hstack([planted, extras])

    d_hr = atoms[: p * p, :] / w_h
    d_lr = atoms[p * p :, :] / w_l
    cd = CoupledDictionary(
        d_hr=d_hr,
        d_lr=d_lr,
        scale=scale,
        patch_size_hr=p,
        overlap_hr=0,
        sparsity_k=1,
        feature_spec_id="grad4-v1",
        seed=seed,
    )
    hr_patches = d_hr[:, :n_patch] / inv_vals + grid.patches.mean(axis=0, keepdims=True)
    hr = ss.assemble_patches(ss.PatchGrid(p, p, grid.origins, hr_patches), out, out)
    return lr, cd, hr
