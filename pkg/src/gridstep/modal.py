"""Eigen-analysis of the swing model and closed-form orbit geometry.

The state matrix has the block form ``[[0, w_s I], [-1/2 H^-1 B, 0]]`` whose
spectrum is purely imaginary. Rather than calling a general nonsymmetric
eigensolver, the machine-space pencil ``(w_s/2) H^-1 B`` is symmetrized with
``H^(1/2)`` and solved with ``eigh``, which makes the decomposition
deterministic and yields exactly conjugate eigenvector pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateSpectrumError, DimensionError
from .network import ReducedModel

# Pairs closer than this (rad/s) count as repeated.
FREQ_SEPARATION_TOL = 1e-6


@dataclass(frozen=True)
class Mode:
    pair: int                 # conjugate-pair index
    frequency: float          # rad/s (positive member of the pair)
    participation: np.ndarray  # per-machine participation magnitude, sums to 1


@dataclass(frozen=True)
class ModalBasis:
    a: np.ndarray             # state matrix the basis diagonalizes
    m: np.ndarray             # 2m x 2m complex eigenvector matrix
    m_inv: np.ndarray
    eigenvalues: np.ndarray   # 2m complex, conjugate pairs adjacent (+j first)
    d: np.ndarray             # real positive definite
    e: np.ndarray             # real positive definite
    modes: tuple[Mode, ...]

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    @property
    def n_pairs(self) -> int:
        return len(self.modes)

    def modal_coords(self, center: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self.m_inv @ (np.asarray(x, dtype=float) - center)

    def pair_amplitudes(self, center: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Euclidean norm of the modal coordinates of each conjugate pair."""
        z = self.modal_coords(center, x)
        return np.sqrt(np.abs(z[0::2]) ** 2 + np.abs(z[1::2]) ** 2)


def analyze(model: ReducedModel) -> ModalBasis:
    """Diagonalize the swing model's state matrix.

    Raises :class:`DegenerateSpectrumError` when two modal frequencies are
    closer than ``FREQ_SEPARATION_TOL`` or any frequency is (numerically)
    zero: the closed-form orbit expressions require a distinct nonzero
    spectrum.
    """
    m = model.n_machines
    w_s = model.omega_s
    h_sqrt = np.sqrt(model.h)
    k_sym = 0.5 * w_s * (model.b_red / h_sqrt[:, None] / h_sqrt[None, :])
    sigma, w = scipy.linalg.eigh(k_sym)

    if sigma[0] <= 0.0 or np.sqrt(max(sigma[0], 0.0)) < FREQ_SEPARATION_TOL:
        raise DegenerateSpectrumError(
            f"zero (or negative) modal frequency: sigma_min = {sigma[0]:.3e}"
        )
    freqs = np.sqrt(sigma)
    gaps = np.diff(freqs)
    if np.any(gaps < FREQ_SEPARATION_TOL):
        k = int(np.argmin(gaps))
        raise DegenerateSpectrumError(
            f"repeated modal frequency near {freqs[k]:.6f} rad/s "
            f"(separation {gaps[k]:.3e} rad/s)"
        )

    # Machine-space eigenvectors of H^-1 B, deterministic sign.
    u = w / h_sqrt[:, None]
    for i in range(m):
        col = u[:, i]
        lead = np.flatnonzero(np.abs(col) > 1e-12 * np.abs(col).max())[0]
        if col[lead] < 0.0:
            u[:, i] = -col

    big_m = np.empty((2 * m, 2 * m), dtype=complex)
    eigvals = np.empty(2 * m, dtype=complex)
    modes = []
    for i in range(m):
        wi = freqs[i]
        q = np.concatenate([u[:, i], 1j * wi / w_s * u[:, i]])
        q = q / np.linalg.norm(q)
        big_m[:, 2 * i] = q
        big_m[:, 2 * i + 1] = q.conj()
        eigvals[2 * i] = 1j * wi
        eigvals[2 * i + 1] = -1j * wi

    m_inv = np.linalg.inv(big_m)

    d = (m_inv.conj().T @ m_inv)
    lam_inv_sq = 1.0 / np.abs(eigvals) ** 2
    e = (m_inv.conj().T @ (lam_inv_sq[:, None] * m_inv))
    d = _project_real(d)
    e = _project_real(e)

    for i in range(m):
        # Participation magnitude per machine, angle and speed rows combined.
        p = np.abs(big_m[:m, 2 * i] * m_inv[2 * i, :m]) + np.abs(
            big_m[m:, 2 * i] * m_inv[2 * i, m:]
        )
        total = p.sum()
        modes.append(Mode(pair=i, frequency=freqs[i], participation=p / total))

    return ModalBasis(
        a=model.a,
        m=big_m,
        m_inv=m_inv,
        eigenvalues=eigvals,
        d=d,
        e=e,
        modes=tuple(modes),
    )


def _project_real(mat: np.ndarray) -> np.ndarray:
    imag = np.abs(mat.imag).max()
    scale = max(np.abs(mat.real).max(), 1.0)
    if imag > 1e-9 * scale:
        raise DegenerateSpectrumError(
            f"orbit matrix has non-negligible imaginary part ({imag:.3e})"
        )
    return np.ascontiguousarray(mat.real)


def propagate(basis: ModalBasis, center: np.ndarray, x_start: np.ndarray, dt: float) -> np.ndarray:
    """Exact state ``dt`` seconds ahead for dynamics centered at ``center``."""
    z = basis.m_inv @ (np.asarray(x_start, dtype=float) - center)
    x = basis.m @ (np.exp(basis.eigenvalues * dt) * z)
    return x.real + center


def propagate_batch(
    basis: ModalBasis, center: np.ndarray, x_start: np.ndarray, dts: np.ndarray
) -> np.ndarray:
    """Closed-form states at many offsets; returns (len(dts), 2m)."""
    dts = np.asarray(dts, dtype=float)
    z = basis.m_inv @ (np.asarray(x_start, dtype=float) - center)
    phases = np.exp(np.outer(dts, basis.eigenvalues)) * z  # (k, 2m)
    return (phases @ basis.m.T).real + center


def orbit_value(basis: ModalBasis, center: np.ndarray, x: np.ndarray) -> float:
    """Conserved orbit amplitude ``(x-c)^T D (x-c) + xdot^T E xdot``.

    ``xdot`` is recomputed internally as ``A (x - center)`` so the two terms
    are always consistent; along any trajectory of the centered dynamics the
    value is constant and equals ``2 (x0-c)^T D (x0-c)``.
    """
    dx = np.asarray(x, dtype=float) - center
    if dx.shape != (basis.n_states,):
        raise DimensionError(f"state has shape {dx.shape}, expected ({basis.n_states},)")
    xdot = basis.a @ dx
    return float(dx @ basis.d @ dx + xdot @ basis.e @ xdot)


def orbit_value_batch(basis: ModalBasis, center: np.ndarray, xs: np.ndarray) -> np.ndarray:
    dx = np.asarray(xs, dtype=float) - center
    xdot = dx @ basis.a.T
    return np.einsum("ij,jk,ik->i", dx, basis.d, dx) + np.einsum(
        "ij,jk,ik->i", xdot, basis.e, xdot
    )


def modal_report(model: ReducedModel, basis: ModalBasis) -> dict:
    """JSON-friendly eigenvalue/participation summary."""
    pairs = []
    for mode in basis.modes:
        pairs.append(
            {
                "pair": mode.pair,
                "frequency_rad_s": mode.frequency,
                "frequency_hz": mode.frequency / (2.0 * np.pi),
                "eigenvalues": [f"+{mode.frequency:.6f}j", f"-{mode.frequency:.6f}j"],
                "participation": {
                    str(bus): float(p)
                    for bus, p in zip(model.machine_buses, mode.participation)
                },
            }
        )
    return {
        "n_machines": model.n_machines,
        "machine_buses": list(model.machine_buses),
        "modes": pairs,
    }
