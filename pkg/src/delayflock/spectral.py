"""Weighted graph Laplacian, dense symmetric eigensolver, connectivity scalars.

The eigensolver is a cyclic Jacobi rotation scheme: the matrices here are
small (a few dozen agents at most) and Jacobi yields an orthogonal eigenbasis
suitable for reconstruction checks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConnectivityWarning
from .model import ModelParams, weight_matrix


def laplacian(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Weighted Laplacian: off-diagonal -(lam/n)*psi_ij, rows summing to zero."""
    if params.variant == "normalized_nonsymmetric":
        raise ValueError("laplacian: defined for symmetric weight variants only")
    w = weight_matrix(params, x)
    lap = -(params.lam / params.n) * w
    np.fill_diagonal(lap, (params.lam / params.n) * w.sum(axis=1))
    return lap


def jacobi_eigh(a: np.ndarray, rel_tol: float = 1e-12, max_sweeps: int = 60):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps continue until the off-diagonal Frobenius norm drops below
    rel_tol times the Frobenius norm of the input. Returns eigenvalues in
    ascending order and the matching orthonormal eigenvector columns.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("jacobi_eigh: square matrix required")
    n = a.shape[0]
    scale = float(np.linalg.norm(a))
    if np.abs(a - a.T).max() > 1e-12 * max(1.0, scale):
        raise ValueError("jacobi_eigh: input is not symmetric")
    vecs = np.eye(n)
    if scale == 0.0:
        return np.zeros(n), vecs
    for _ in range(max_sweeps):
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        if np.sum(off * off) <= (rel_tol * scale) ** 2:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e100:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                a[p, q] = a[q, p] = 0.0
                rot_p = c * vecs[:, p] - s * vecs[:, q]
                rot_q = s * vecs[:, p] + c * vecs[:, q]
                vecs[:, p], vecs[:, q] = rot_p, rot_q
    else:
        raise RuntimeError("jacobi_eigh: rotations did not converge")
    vals = np.diag(a).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def eigenvalues_sym(lap: np.ndarray) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending."""
    vals, _ = jacobi_eigh(lap)
    return vals


def fiedler_number(lap: np.ndarray) -> float:
    """Second-smallest eigenvalue (algebraic connectivity).

    With strictly positive off-diagonal weights the kernel is the consensus
    line, so the second eigenvalue is the smallest positive one. A value
    indistinguishable from zero raises a degenerate-connectivity warning.
    """
    vals = eigenvalues_sym(lap)
    mu = float(vals[1])
    scale = float(np.linalg.norm(lap))
    if mu < 1e-10 * scale:
        warnings.warn("Fiedler number is numerically zero; connectivity is degenerate",
                      DegenerateConnectivityWarning, stacklevel=2)
    return mu


def augment_self_weights(a: np.ndarray) -> np.ndarray:
    """Set each diagonal entry to n minus the off-diagonal row sum."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(a, n - a.sum(axis=1))
    return a


def pairwise_mixing_min(a: np.ndarray) -> float:
    """Minimum over row pairs (p, q) of the mean min-product mixing term.

    For each pair this is (1/n^2) * sum_{i,j} min(a[q,i]*a[p,j],
    a[q,j]*a[p,i]). Brute-force O(n^4); fine at desk scale.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    best = np.inf
    for p in range(n):
        for q in range(p, n):
            prod = np.outer(a[q], a[p])
            val = float(np.minimum(prod, prod.T).sum()) / (n * n)
            if val < best:
                best = val
    return best


@dataclass
class ConnectivityCertificate:
    """Empirical minima of the connectivity scalars along a trajectory."""

    gamma_emp: float
    psi_star_emp: float
    times: np.ndarray


def connectivity_certificate(result) -> ConnectivityCertificate:
    """Scan a run's trajectory samples (seed segment included) for the
    minimum Fiedler number and minimum pairwise mixing value."""
    params = result.scenario.params
    mus = []
    mixes = []
    symmetric = params.variant != "normalized_nonsymmetric"
    for x in result.sample_x:
        if symmetric:
            mus.append(fiedler_number(laplacian(params, x)))
        mixes.append(pairwise_mixing_min(augment_self_weights(weight_matrix(params, x))))
    gamma = float(min(mus)) if mus else float("nan")
    return ConnectivityCertificate(gamma_emp=gamma,
                                   psi_star_emp=float(min(mixes)),
                                   times=np.asarray(result.sample_t))
