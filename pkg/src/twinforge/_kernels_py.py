"""Pure numpy implementations of the batched per-cell kernels.

These mirror ``_ckernels`` exactly and are used whenever the compiled
extension is unavailable (or ``TWINFORGE_PURE_PYTHON=1`` is set).
"""

from __future__ import annotations

from collections import deque

import numpy as np

BACKEND = "python"

_SIGN_TOL = 1e-12


def det_batch(M):
    M = np.asarray(M, dtype=float)
    return (
        M[:, 0, 0] * (M[:, 1, 1] * M[:, 2, 2] - M[:, 1, 2] * M[:, 2, 1])
        - M[:, 0, 1] * (M[:, 1, 0] * M[:, 2, 2] - M[:, 1, 2] * M[:, 2, 0])
        + M[:, 0, 2] * (M[:, 1, 0] * M[:, 2, 1] - M[:, 1, 1] * M[:, 2, 0])
    )


def cofactor_batch(M):
    M = np.asarray(M, dtype=float)
    C = np.empty_like(M)
    for i in range(3):
        i1, i2 = (i + 1) % 3, (i + 2) % 3
        for j in range(3):
            j1, j2 = (j + 1) % 3, (j + 2) % 3
            C[:, i, j] = M[:, i1, j1] * M[:, i2, j2] - M[:, i1, j2] * M[:, i2, j1]
    return C


def rank_one_fit_batch(M):
    """Factor each ``M[k]`` as ``a ⊗ n`` with unit ``n``.

    Returns ``(a, n, deviation)`` with ``deviation = ‖cof M‖_F``.
    """
    M = np.asarray(M, dtype=float)
    N = M.shape[0]
    g = np.einsum("nki,nkj->nij", M, M)
    diag = np.einsum("nii->ni", g)
    trace = diag.sum(axis=1)
    p = np.argmax(diag, axis=1)
    rows = g[np.arange(N), p, :]
    pivot = np.sqrt(diag[np.arange(N), p])
    zero = ~(trace > 0.0)
    pivot = np.where(zero, 1.0, pivot)
    n = rows / pivot[:, None]
    norm = np.linalg.norm(n, axis=1)
    norm = np.where(zero | (norm == 0.0), 1.0, norm)
    n = n / norm[:, None]
    n[zero] = (1.0, 0.0, 0.0)

    big = np.abs(n) > _SIGN_TOL
    first = np.argmax(big, axis=1)
    lead = n[np.arange(N), first]
    flip = np.where(lead < 0.0, -1.0, 1.0)
    n = n * flip[:, None]

    a = np.einsum("nij,nj->ni", M, n)
    cof = cofactor_batch(M)
    dev = np.sqrt(np.einsum("nij,nij->n", cof, cof))
    return a, n, dev


def orient_signs(n, active):
    """Greedy flood fill choosing signs so neighbouring normals agree.

    ``n`` has shape ``(nx, ny, nz, 3)``; ``active`` marks cells taking part.
    Seeds are taken in C index order, so the result is deterministic.
    """
    n = np.asarray(n, dtype=float)
    active = np.asarray(active, dtype=bool)
    nx, ny, nz = active.shape
    signs = np.ones((nx, ny, nz), dtype=np.int8)
    seen = np.zeros((nx, ny, nz), dtype=bool)
    steps = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))
    for seed in zip(*np.nonzero(active)):
        if seen[seed]:
            continue
        seen[seed] = True
        queue = deque([seed])
        while queue:
            i, j, k = queue.popleft()
            ref = n[i, j, k] * signs[i, j, k]
            for di, dj, dk in steps:
                a, b, c = i + di, j + dj, k + dk
                if not (0 <= a < nx and 0 <= b < ny and 0 <= c < nz):
                    continue
                if seen[a, b, c] or not active[a, b, c]:
                    continue
                seen[a, b, c] = True
                if float(ref @ n[a, b, c]) < 0.0:
                    signs[a, b, c] = -1
                queue.append((a, b, c))
    return signs
