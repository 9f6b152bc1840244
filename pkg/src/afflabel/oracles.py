"""Independent brute-force reference implementations for test verification.

These deliberately take the slow, literal route the production code avoids:
the projection oracle materializes the full D x D projector and cross-checks
it against a least-squares residual identity, and the angle oracle runs
dense untruncated SVDs with explicit diagonal matrices. They share no
intermediate logic with the production scoring paths.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalError, ValidationError


def oracle_projection(basis_vectors, vector) -> float:
    """Projection ratio via the explicit projector P = U U^T.

    Also solves min_x |U x - v| and checks the residual identity
    |P v|^2 = |v|^2 - |residual|^2 before returning; disagreement beyond
    1e-8 raises, since it would mean the basis is not orthonormal.
    """
    u = np.asarray(basis_vectors, dtype=float)
    if u.ndim != 2 or u.shape[1] == 0:
        raise ValidationError("oracle_projection needs a non-empty basis")
    v = np.asarray(vector, dtype=float).reshape(-1)
    if u.shape[0] != v.shape[0]:
        raise ValidationError(
            f"vector dimension {v.shape[0]} does not match basis rows {u.shape[0]}"
        )
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise NumericalError("projection ratio of the zero vector is undefined")
    projector = u @ u.T
    ratio_projector = float(np.linalg.norm(projector @ v) / norm)
    x, *_ = np.linalg.lstsq(u, v, rcond=None)
    residual = v - u @ x
    ratio_lstsq = math.sqrt(max(norm**2 - float(np.linalg.norm(residual)) ** 2, 0.0)) / norm
    if abs(ratio_projector - ratio_lstsq) > 1e-8:
        raise NumericalError(
            "projector and least-squares routes disagree "
            f"({ratio_projector} vs {ratio_lstsq}); basis not orthonormal?"
        )
    return ratio_projector


def oracle_angle(augmented, neighbors) -> float:
    """Weighted curvature angle via dense, untruncated SVDs.

    Keeps every singular value (zeros included) and forms the weighted
    alignment matrix with explicit diagonal factors.
    """
    m = np.asarray(augmented, dtype=float)
    mt = np.asarray(neighbors, dtype=float)
    if m.ndim != 2 or mt.ndim != 2 or m.size == 0 or mt.size == 0:
        raise ValidationError("oracle_angle needs two non-empty matrices")
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    ut, st, _ = np.linalg.svd(mt, full_matrices=False)
    if s[0] == 0.0 or st[0] == 0.0:
        raise NumericalError("degenerate all-zero neighborhood")
    weighted = (u @ np.diag(s)).T @ (ut @ np.diag(st))
    cross = np.linalg.svd(weighted, compute_uv=False)
    k = min(s.size, st.size)
    numerator = float(cross.sum())
    denominator = float((s[:k] * st[:k]).sum())
    return math.acos(min(1.0, max(-1.0, numerator / denominator)))
