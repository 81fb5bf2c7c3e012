"""Minimal spin-1/2 state-vector helpers (hbar = 1)."""

from __future__ import annotations

import numpy as np

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def bloch_axis(theta: float, phi: float) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def bloch_state(theta: float, phi: float) -> np.ndarray:
    """Spin-up state along the Bloch direction ``(theta, phi)``."""
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], dtype=complex)


def spin_operator(n: np.ndarray) -> np.ndarray:
    return n[0] * SX + n[1] * SY + n[2] * SZ


def eigenbasis(n: np.ndarray) -> np.ndarray:
    """Rows are the ``-1`` and ``+1`` eigenvectors of ``sigma . n``."""
    vals, vecs = np.linalg.eigh(spin_operator(np.asarray(n, dtype=float)))
    return vecs.T[np.argsort(vals)]


def singlet() -> np.ndarray:
    """``(|01> - |10>) / sqrt(2)`` in the basis ``|00>, |01>, |10>, |11>``."""
    return np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


def precession(omega: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i dt (omega . sigma) / 2)``: rotation by ``|omega| dt`` about ``omega``."""
    omega = np.asarray(omega, dtype=float)
    w = float(np.linalg.norm(omega))
    if w == 0.0 or dt == 0.0:
        return I2.copy()
    n = omega / w
    half = w * dt / 2
    return np.cos(half) * I2 - 1j * np.sin(half) * spin_operator(n)
