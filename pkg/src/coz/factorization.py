"""Numerical check that the two-step-history chain factorization is exact.

The chain's joint over (x0, x1, c2, x2) factors as

    p(x0, x1) * p(c2 | x0, x1) * p(x2 | x0, x1, c2)

and marginalizing the prompt c2 must reproduce the directly-computed
conditional chain without the latent.  The verifier evaluates both sides on
explicit probability tables over small finite spaces and reports the largest
absolute discrepancy.  Route one builds the full joint tensor and sums the
latent axis with plain Python loops; route two contracts the latent first
with vectorized arithmetic, so agreement is evidence rather than tautology.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ToyFactorizationInstance:
    """Explicit tables p(x0,x1), p(c2|x0,x1), p(x2|x0,x1,c2) on small spaces."""

    p_x0x1: np.ndarray  # (A, B), sums to 1
    p_c2: np.ndarray    # (A, B, C), last axis sums to 1
    p_x2: np.ndarray    # (A, B, C, D), last axis sums to 1

    def sizes(self) -> tuple[int, int, int, int]:
        a, b = self.p_x0x1.shape
        c = self.p_c2.shape[2]
        d = self.p_x2.shape[3]
        return a, b, c, d

    def validate(self) -> None:
        a, b, c, d = self.sizes()
        if self.p_c2.shape != (a, b, c) or self.p_x2.shape != (a, b, c, d):
            raise ValueError(
                f"inconsistent table shapes {self.p_x0x1.shape} {self.p_c2.shape} {self.p_x2.shape}"
            )
        for name, table in (("p_x0x1", self.p_x0x1), ("p_c2", self.p_c2), ("p_x2", self.p_x2)):
            if np.any(np.asarray(table) < 0):
                raise ValueError(f"{name} has negative entries")
        if abs(self.p_x0x1.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"p_x0x1 sums to {self.p_x0x1.sum()!r}, not 1")
        if np.max(np.abs(self.p_c2.sum(axis=2) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("p_c2 rows do not sum to 1")
        if np.max(np.abs(self.p_x2.sum(axis=3) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("p_x2 rows do not sum to 1")


def random_instance(rng: np.random.Generator, max_size: int = 8) -> ToyFactorizationInstance:
    """Dirichlet-flat random tables; c2 size may be 1 (degenerate latent)."""
    a = int(rng.integers(2, max_size + 1))
    b = int(rng.integers(2, max_size + 1))
    c = int(rng.integers(1, max_size + 1))
    d = int(rng.integers(2, max_size + 1))
    joint = rng.random((a, b)) + 1e-3
    joint /= joint.sum()
    if c == 1:
        p_c2 = np.ones((a, b, 1))  # exactly deterministic latent
    else:
        p_c2 = rng.random((a, b, c)) + 1e-3
        p_c2 /= p_c2.sum(axis=2, keepdims=True)
    p_x2 = rng.random((a, b, c, d)) + 1e-3
    p_x2 /= p_x2.sum(axis=3, keepdims=True)
    inst = ToyFactorizationInstance(p_x0x1=joint, p_c2=p_c2, p_x2=p_x2)
    inst.validate()
    return inst


def latent_free_x2_table(inst: ToyFactorizationInstance) -> np.ndarray:
    """p(x2|x0,x1) with the prompt integrated out (vectorized contraction)."""
    return np.einsum("abc,abcd->abd", inst.p_c2, inst.p_x2)


def verify_ar2_factorization(inst: ToyFactorizationInstance) -> float:
    """Max abs gap between the marginalized product form and the direct chain."""
    inst.validate()
    a, b, c, d = inst.sizes()

    # Route one: explicit joint over (x0, x1, c2, x2), latent summed in loops.
    marginal = np.zeros((a, b, d))
    for i in range(a):
        for j in range(b):
            for l in range(d):
                total = 0.0
                for k in range(c):
                    total += inst.p_x0x1[i, j] * inst.p_c2[i, j, k] * inst.p_x2[i, j, k, l]
                marginal[i, j, l] = total

    # Route two: contract the latent inside the conditional, then multiply.
    direct = inst.p_x0x1[:, :, None] * latent_free_x2_table(inst)

    return float(np.max(np.abs(marginal - direct)))
