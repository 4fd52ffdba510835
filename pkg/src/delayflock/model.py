"""Communication potentials, weight matrices, and the delayed alignment fields.

Three right-hand-side variants are supported:

* ``main_delay``: each agent relaxes toward the delayed velocities of the
  others, weighted by the potential evaluated at delayed pairwise distances;
  the agent's own velocity enters undelayed.
* ``full_sum_baseline``: the comparison model whose sum runs over all indices
  (self included) with row-stochastic weights, leaving an undelayed damping
  term with a constant coefficient.
* ``normalized_nonsymmetric``: weights normalized per receiving agent, so the
  weight matrix is generally nonsymmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

VARIANTS = ("main_delay", "full_sum_baseline", "normalized_nonsymmetric")


@dataclass(frozen=True)
class PotentialSpec:
    """Distance-to-weight law. Evaluated weights must lie in (0, 1].

    Kinds:
      * ``cucker_smale``: psi(s) = (1 + s^2)^(-beta), beta >= 0.
      * ``constant``: psi(s) = psi0 with psi0 in (0, 1].
      * ``table``: piecewise-linear interpolation of (distance, weight)
        samples, constant beyond the last sample.
    """

    kind: str
    beta: float = 0.0
    psi0: float = 1.0
    distances: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "cucker_smale":
            if self.beta < 0:
                raise ConfigError(f"potential: beta must be >= 0, got {self.beta}")
        elif self.kind == "constant":
            if not 0.0 < self.psi0 <= 1.0:
                raise ConfigError(f"potential: psi0 must be in (0, 1], got {self.psi0}")
        elif self.kind == "table":
            d = np.asarray(self.distances, dtype=float)
            w = np.asarray(self.weights, dtype=float)
            if d.size == 0 or d.size != w.size:
                raise ConfigError("potential: table needs matching nonempty distance and weight lists")
            if np.any(np.diff(d) <= 0) or d[0] < 0:
                raise ConfigError("potential: table distances must be nonnegative and strictly increasing")
            if np.any(w <= 0) or np.any(w > 1.0):
                raise ConfigError("potential: table weights must lie in (0, 1]")
        else:
            raise ConfigError(f"potential: unknown kind {self.kind!r}")

    @classmethod
    def cucker_smale(cls, beta: float) -> "PotentialSpec":
        return cls(kind="cucker_smale", beta=float(beta))

    @classmethod
    def constant(cls, psi0: float) -> "PotentialSpec":
        return cls(kind="constant", psi0=float(psi0))

    @classmethod
    def table(cls, distances, weights) -> "PotentialSpec":
        return cls(kind="table", distances=tuple(float(s) for s in distances),
                   weights=tuple(float(w) for w in weights))

    @property
    def psi_min(self) -> float:
        """Infimum of psi over [0, inf); zero for decaying power-law tails."""
        if self.kind == "cucker_smale":
            return 1.0 if self.beta == 0 else 0.0
        if self.kind == "constant":
            return self.psi0
        return float(min(self.weights))

    @property
    def psi_max(self) -> float:
        if self.kind == "cucker_smale":
            return 1.0
        if self.kind == "constant":
            return self.psi0
        return float(max(self.weights))


def psi_eval(spec: PotentialSpec, s):
    """Evaluate the potential at distance(s) ``s`` (scalar or array, >= 0)."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise ValueError("psi_eval: distance must be nonnegative")
    if spec.kind == "cucker_smale":
        out = np.power(1.0 + arr * arr, -spec.beta)
    elif spec.kind == "constant":
        out = np.full_like(arr, spec.psi0)
    else:
        out = np.interp(arr, spec.distances, spec.weights)
    return out if arr.ndim else float(out)


@dataclass(frozen=True)
class ModelParams:
    """Agent count, dimension, coupling strength, model variant, potential."""

    n: int
    d: int
    lam: float
    variant: str
    potential: PotentialSpec

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise ConfigError(f"model: n must be an integer >= 2, got {self.n}")
        if not isinstance(self.d, int) or self.d < 1:
            raise ConfigError(f"model: d must be an integer >= 1, got {self.d}")
        if self.lam <= 0:
            raise ConfigError(f"model: lambda must be positive, got {self.lam}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"model: unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.variant == "normalized_nonsymmetric" and self.potential.psi_min <= 0:
            raise ConfigError(
                "model: normalized_nonsymmetric requires a potential with a strictly "
                "positive lower bound (constant or table kind)")


@dataclass
class PhaseState:
    """Positions and velocities of all agents at one instant."""

    x: np.ndarray
    v: np.ndarray
    t: float


def pairwise_distances(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def weight_matrix(params: ModelParams, x_delayed: np.ndarray) -> np.ndarray:
    """Communication weights evaluated at the given (delayed) positions.

    Symmetric variants return psi(|x_i - x_j|) with zero diagonal; the
    normalized variant divides row i by the full sum over k (self included)
    of psi(|x_k - x_i|) and rescales by n.
    """
    x_delayed = np.asarray(x_delayed, dtype=float)
    if not np.all(np.isfinite(x_delayed)):
        raise ValueError("weight_matrix: non-finite positions")
    psi = psi_eval(params.potential, pairwise_distances(x_delayed))
    if params.variant == "normalized_nonsymmetric":
        denom = psi.sum(axis=1)  # includes k == i, where psi(0) > 0
        a = params.n * psi / denom[:, None]
    else:
        a = psi
    np.fill_diagonal(a, 0.0)
    return a


def baseline_row_weights(params: ModelParams, x_delayed: np.ndarray) -> np.ndarray:
    """Row-stochastic weights (self term included) for the baseline variant."""
    x_delayed = np.asarray(x_delayed, dtype=float)
    if not np.all(np.isfinite(x_delayed)):
        raise ValueError("baseline_row_weights: non-finite positions")
    psi = psi_eval(params.potential, pairwise_distances(x_delayed))
    return psi / psi.sum(axis=1)[:, None]


def rhs(params: ModelParams, now: PhaseState, delayed: PhaseState):
    """Right-hand side of the delayed dynamics; returns (xdot, vdot).

    Weights are always evaluated at the delayed positions. The self velocity
    enters undelayed; for the baseline variant it carries the constant
    coefficient -lambda.
    """
    shape = (params.n, params.d)
    for arr in (now.x, now.v, delayed.x, delayed.v):
        if arr.shape != shape:
            raise ValueError(f"rhs: state shape {arr.shape} does not match {shape}")
    # Weighted sums of velocity differences, not difference of weighted sums:
    # consensus states then map to exact zeros.
    if params.variant == "full_sum_baseline":
        b = baseline_row_weights(params, delayed.x)
        diff = delayed.v[None, :, :] - now.v[:, None, :]
        vdot = params.lam * np.einsum("ij,ijk->ik", b, diff)
    else:
        a = weight_matrix(params, delayed.x)
        diff = delayed.v[None, :, :] - now.v[:, None, :]
        vdot = (params.lam / params.n) * np.einsum("ij,ijk->ik", a, diff)
    return now.v.copy(), vdot


def validate_normalization(params: ModelParams, x: np.ndarray):
    """Check the per-row mean coupling stays below one; returns (ok, margin)."""
    a = weight_matrix(params, x)
    margin = 1.0 - float(a.sum(axis=1).max()) / params.n
    return margin > 0.0, margin
