"""Composite function library: Huber losses, sparse-group regularizers,
closed-form proximal maps, and the minimum-norm subgradient residual used as
the distributed stopping test.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def sgn(x: np.ndarray) -> np.ndarray:
    """Componentwise sign with ``sgn(0) = 0`` exactly."""
    return np.sign(x)


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint cover of the coordinate indices ``[0, n)`` into K groups.

    Groups are stored as sorted 0-based index arrays; the file format is
    1-based (JSON array of arrays).
    """

    n: int
    groups: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        seen = np.zeros(self.n, dtype=bool)
        norm_groups = []
        for g in self.groups:
            idx = np.asarray(g, dtype=int)
            if idx.size == 0:
                raise ValueError("empty group")
            if idx.min() < 0 or idx.max() >= self.n:
                raise ValueError(f"group index out of range for n={self.n}")
            if seen[idx].any():
                raise ValueError("groups overlap")
            seen[idx] = True
            norm_groups.append(np.sort(idx))
        if not seen.all():
            missing = np.flatnonzero(~seen)
            raise ValueError(f"indices not covered by any group: {missing.tolist()}")
        object.__setattr__(self, "groups", tuple(norm_groups))

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    @classmethod
    def single_group(cls, n: int) -> "GroupPartition":
        return cls(n, (np.arange(n),))

    @classmethod
    def contiguous(cls, n: int, group_size: int) -> "GroupPartition":
        if n % group_size != 0:
            raise ValueError("group size must divide n")
        return cls(n, tuple(np.arange(k, k + group_size) for k in range(0, n, group_size)))

    @classmethod
    def from_json(cls, path: str) -> "GroupPartition":
        with open(path) as fh:
            raw = json.load(fh)
        groups = tuple(np.asarray(g, dtype=int) - 1 for g in raw)
        n = 1 + max(int(g.max()) for g in groups)
        return cls(n, groups)

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump([(g + 1).tolist() for g in self.groups], fh)


@dataclass(frozen=True)
class SparseGroupReg:
    """Sparse-group regularizer ``b1 * ||x||_1 + b2 * sum_k ||x_{g(k)}||_2``.

    Satisfies ``value(x) >= (b1 + b2) * ||x||_2``, so its coercivity constant
    is ``b1 + b2``; its subgradients are uniformly bounded by
    ``b1 * sqrt(n) + b2 * sqrt(K)``.
    """

    beta1: float
    beta2: float
    partition: GroupPartition

    def __post_init__(self) -> None:
        if self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("regularization weights must be nonnegative")

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def coercivity(self) -> float:
        """Lower-bound slope tau with ``value(x) >= tau * ||x||_2``."""
        return self.beta1 + self.beta2

    @property
    def subgrad_bound(self) -> float:
        """Uniform bound on subgradient norms (conservative closed form)."""
        return self.beta1 * np.sqrt(self.n) + self.beta2 * np.sqrt(
            self.partition.num_groups
        )

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        group_norms = sum(
            float(np.linalg.norm(x[g])) for g in self.partition.groups
        )
        return self.beta1 * float(np.abs(x).sum()) + self.beta2 * group_norms

    def prox(self, xbar: np.ndarray, t: float) -> np.ndarray:
        """Exact minimizer of ``t * value(y) + 0.5 * ||y - xbar||^2``.

        Soft-threshold at ``t*b1``, then shrink each group toward zero by the
        group-norm factor; a group whose thresholded norm is zero maps to the
        zero block.
        """
        if t <= 0:
            raise ValueError(f"prox step must be positive, got {t}")
        xbar = np.asarray(xbar, dtype=float)
        eta = sgn(xbar) * np.maximum(np.abs(xbar) - t * self.beta1, 0.0)
        out = np.zeros_like(eta)
        for g in self.partition.groups:
            norm = np.linalg.norm(eta[g])
            if norm > 0.0:
                out[g] = eta[g] * max(1.0 - t * self.beta2 / norm, 0.0)
        return out

    def min_norm_subgradient(
        self, lam: float, grad_f: np.ndarray, xbar: np.ndarray
    ) -> np.ndarray:
        """Minimum-norm element of ``lam * d(value)(xbar) + grad_f``.

        The zero/nonzero case split is on exact zeros; callers pass prox
        outputs (which produce exact zeros) or extrapolated points where the
        nonzero branch is safe.
        """
        grad_f = np.asarray(grad_f, dtype=float)
        xbar = np.asarray(xbar, dtype=float)
        lb1 = lam * self.beta1
        lb2 = lam * self.beta2
        eta = -sgn(grad_f) * np.minimum(np.abs(grad_f), lb1)
        out = np.empty_like(grad_f)
        for g in self.partition.groups:
            xg = xbar[g]
            if np.any(xg != 0.0):
                pi = lb1 * sgn(xg) + (1.0 - sgn(np.abs(xg))) * eta[g]
                omega = lb2 * xg / np.linalg.norm(xg)
                out[g] = pi + omega + grad_f[g]
            else:
                pi = eta[g]
                v = pi + grad_f[g]
                vnorm = np.linalg.norm(v)
                if vnorm > 0.0:
                    omega = -v * min(1.0, lb2 / vnorm)
                else:
                    omega = np.zeros_like(v)
                out[g] = v + omega
        return out

    def subgrad_residual(
        self, lam: float, grad_f: np.ndarray, xbar: np.ndarray
    ) -> float:
        """Norm of the minimum-norm composite subgradient at ``xbar``."""
        return float(np.linalg.norm(self.min_norm_subgradient(lam, grad_f, xbar)))


def huber_scalar(r: np.ndarray, delta: float) -> np.ndarray:
    """Huber penalty: quadratic within ``delta`` of zero, linear beyond."""
    a = np.abs(r)
    return np.where(a <= delta, 0.5 * r * r, delta * a - 0.5 * delta * delta)


@dataclass(frozen=True)
class HuberLoss:
    """Robust data-fit term ``sum_j huber(a_j @ x - b_j)``.

    The gradient is Lipschitz with constant ``sigma_max(A)^2`` and uniformly
    bounded by ``delta * sigma_max(A) * sqrt(m)``.
    """

    A: np.ndarray
    b: np.ndarray
    delta: float = 1.0
    _sigma_max: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "_sigma_max", _sigma_max_power(A))

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def value_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected x of shape ({self.n},), got {x.shape}")
        r = self.A @ x - self.b
        value = float(huber_scalar(r, self.delta).sum())
        grad = self.A.T @ np.clip(r, -self.delta, self.delta)
        return value, grad

    def value(self, x: np.ndarray) -> float:
        return self.value_grad(x)[0]

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.value_grad(x)[1]

    @property
    def lipschitz(self) -> float:
        """Gradient Lipschitz constant ``sigma_max(A)^2``."""
        return self._sigma_max ** 2

    @property
    def grad_bound(self) -> float:
        """Uniform bound on ``||grad||_2`` over all of R^n."""
        return self.delta * self._sigma_max * np.sqrt(self.num_rows)


def _sigma_max_power(A: np.ndarray, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on ``A^T A``."""
    n = A.shape[1]
    if A.size == 0:
        return 0.0
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    # warm start from the dominant row scale to avoid unlucky orthogonality
    lam = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        w /= norm
        lam_new = float(w @ (A.T @ (A @ w)))
        if abs(lam_new - lam) <= tol * max(lam_new, 1e-30):
            return float(np.sqrt(lam_new))
        lam, v = lam_new, w
    return float(np.sqrt(lam))


@dataclass(frozen=True)
class NodeProblem:
    """One node's private composite objective: regularizer plus smooth loss."""

    reg: SparseGroupReg
    loss: HuberLoss

    def __post_init__(self) -> None:
        if self.reg.n != self.loss.n:
            raise ValueError("regularizer and loss dimensions disagree")

    @property
    def n(self) -> int:
        return self.reg.n

    def value(self, x: np.ndarray) -> float:
        return self.reg.value(x) + self.loss.value(x)


def composite_value(problem: NodeProblem, x: np.ndarray) -> float:
    return problem.value(x)
