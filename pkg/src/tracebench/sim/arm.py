"""3-link planar arm: forward kinematics, position Jacobian, damped-least-squares IK."""

from __future__ import annotations

import numpy as np


def forward_kinematics(q: np.ndarray, links: np.ndarray, base: np.ndarray) -> np.ndarray:
    """End-effector position for link-relative joint angles."""
    angles = np.cumsum(q)
    x = base[0] + np.sum(links * np.cos(angles))
    y = base[1] + np.sum(links * np.sin(angles))
    return np.array([x, y])


def position_jacobian(q: np.ndarray, links: np.ndarray) -> np.ndarray:
    """2 x n Jacobian of the end-effector position w.r.t. joint angles."""
    n = len(q)
    angles = np.cumsum(q)
    J = np.zeros((2, n))
    for i in range(n):
        # joint i moves every link from i onward
        J[0, i] = -np.sum(links[i:] * np.sin(angles[i:]))
        J[1, i] = np.sum(links[i:] * np.cos(angles[i:]))
    return J


def solve_ik(
    target: np.ndarray,
    q0: np.ndarray,
    links: np.ndarray,
    base: np.ndarray,
    damping: float = 0.01,
    tol: float = 1e-9,
    max_iters: int = 200,
) -> np.ndarray:
    """Damped least squares IK starting from q0 (prefers the nearby solution)."""
    q = np.asarray(q0, dtype=float).copy()
    lam2 = damping * damping
    for _ in range(max_iters):
        err = target - forward_kinematics(q, links, base)
        if float(err @ err) < tol * tol:
            break
        J = position_jacobian(q, links)
        JJt = J @ J.T + lam2 * np.eye(2)
        q += J.T @ np.linalg.solve(JJt, err)
    return q
