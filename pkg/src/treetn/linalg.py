"""Dense linear-algebra kernels: SVD with degeneracy-aware truncation,
Hermitian diagonalization, and a Lanczos lowest-eigenpair solver.

All routines are pure functions of their inputs and safe to call
concurrently on distinct data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import NumericalError

__all__ = [
    "SingularSpectrum",
    "EigenSpectrum",
    "full_svd",
    "truncate_spectrum",
    "full_eigh",
    "lanczos_lowest",
    "entanglement_entropy",
]

DEFAULT_MAX_KRYLOV = 200
DEFAULT_LANCZOS_TOL = 1e-12
ZERO_FLOOR = 1e-14  # relative size below which singular values count as rank noise


@dataclass
class SingularSpectrum:
    """Result of a full SVD: A = left_vectors @ diag(values) @ right_vectors.

    ``values`` is sorted descending; the columns of ``left_vectors`` and the
    rows of ``right_vectors`` are orthonormal.
    """

    values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.values)

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.values) @ self.right_vectors


@dataclass
class EigenSpectrum:
    """Result of a full Hermitian diagonalization, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def full_svd(matrix: np.ndarray) -> SingularSpectrum:
    """Full singular value decomposition of a 2-index array."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={matrix.ndim}")
    if not np.all(np.isfinite(matrix)):
        raise NumericalError("non-finite entries in SVD input")
    u, s, vh = np.linalg.svd(matrix, full_matrices=False)
    return SingularSpectrum(values=s, left_vectors=u, right_vectors=vh)


def degenerate_cut(values: np.ndarray, keep: int, delta: float) -> int:
    """Move a cut boundary down so it does not split a degenerate multiplet.

    ``values`` are sorted descending. The boundary sits between index
    ``keep - 1`` (last kept) and ``keep`` (first dropped); while the relative
    gap there is below ``delta`` the last kept value is dropped as well.
    Returns 0 when the walk exhausts the spectrum (multiplet does not fit).
    """
    if keep >= len(values):
        return len(values)
    while keep > 0:
        prev = values[keep - 1]
        if prev == 0.0:
            keep -= 1
            continue
        if abs(values[keep] - prev) / abs(prev) < delta:
            keep -= 1
        else:
            break
    return keep


def truncate_spectrum(
    spec: SingularSpectrum,
    chi_max: int,
    sigma: float = 0.0,
    delta_s: float = 0.0,
) -> tuple[SingularSpectrum, float]:
    """Truncate a singular spectrum to at most ``chi_max`` values.

    Values with ``D_i / D_1 <= sigma`` are dropped. If the cut would split a
    multiplet whose relative internal gaps are below ``delta_s``, the cut
    moves down so the whole multiplet is discarded together; when the
    multiplet cannot be kept whole under ``chi_max`` the hard cap wins and a
    warning is emitted. Kept values are rescaled to unit sum of squares.

    Returns the truncated spectrum and the truncation error
    ``1 - sum(kept D^2)`` evaluated on the pre-rescaling values.
    """
    if chi_max < 1:
        raise ValueError(f"chi_max must be positive, got {chi_max}")
    values = spec.values
    n = len(values)
    keep = min(chi_max, n)
    # numerical zeros (relative ~1e-14) are rank noise and always dropped
    cutoff = max(sigma, ZERO_FLOOR) * values[0]
    above = np.count_nonzero(values > cutoff)
    keep = min(keep, max(above, 1))

    if delta_s > 0.0 and keep < n:
        walked = degenerate_cut(values, keep, delta_s)
        if walked == 0:
            warnings.warn(
                "degenerate multiplet straddles the bond-dimension cap; "
                f"keeping {keep} of a tied group",
                RuntimeWarning,
                stacklevel=2,
            )
        else:
            keep = walked

    kept = values[:keep]
    weight = float(np.sum(kept**2))
    error = 1.0 - weight
    if weight > 0.0:
        rescaled = kept / np.sqrt(weight)
    else:
        rescaled = kept
    truncated = SingularSpectrum(
        values=rescaled,
        left_vectors=spec.left_vectors[:, :keep],
        right_vectors=spec.right_vectors[:keep, :],
    )
    return truncated, error


def full_eigh(hermitian: np.ndarray, tol: float = 1e-10) -> EigenSpectrum:
    """Full diagonalization of a Hermitian matrix, eigenvalues ascending."""
    hermitian = np.asarray(hermitian)
    if hermitian.ndim != 2 or hermitian.shape[0] != hermitian.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {hermitian.shape}")
    if not np.all(np.isfinite(hermitian.real)) or (
        np.iscomplexobj(hermitian) and not np.all(np.isfinite(hermitian.imag))
    ):
        raise NumericalError("non-finite entries in eigh input")
    scale = max(1.0, float(np.max(np.abs(hermitian))))
    if np.max(np.abs(hermitian - hermitian.conj().T)) > tol * scale:
        raise NumericalError("matrix is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh(hermitian)
    return EigenSpectrum(eigenvalues=vals, eigenvectors=vecs)


def entanglement_entropy(singular_values: np.ndarray) -> float:
    """Von Neumann entropy -sum(D^2 ln D^2) of a Schmidt spectrum.

    Zero values contribute nothing (0 ln 0 := 0).
    """
    w = np.asarray(singular_values, dtype=float) ** 2
    w = w[w > 0.0]
    if w.size == 0:
        return 0.0
    return float(-np.sum(w * np.log(w)))


def lanczos_lowest(
    apply: Callable[[np.ndarray], np.ndarray],
    init: np.ndarray,
    max_krylov: int = DEFAULT_MAX_KRYLOV,
    tol: float = DEFAULT_LANCZOS_TOL,
    max_restarts: int = 10,
) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of a Hermitian operator given by its action.

    ``apply`` maps an array to an array of the same shape; ``init`` must be
    normalized. The Krylov basis is fully reorthogonalized, so results are
    deterministic. A breakdown with a small residual signals an exact
    invariant subspace and returns the current best pair. Restarts from the
    current best vector until the residual satisfies
    ``|H v - E v| <= tol * max(1, |E|)``.
    """
    vec = np.asarray(init)
    dim = vec.size
    if dim == 0:
        raise ValueError("empty initial vector")
    nrm = np.linalg.norm(vec)
    if not np.isfinite(nrm) or nrm == 0.0:
        raise ValueError("initial vector must be normalized and finite")
    vec = vec / nrm

    if dim == 1:
        h = apply(vec)
        energy = float(np.vdot(vec, h).real)
        return energy, vec

    energy = None
    for _ in range(max_restarts):
        energy, vec, residual = _lanczos_cycle(apply, vec, min(max_krylov, dim), tol)
        if residual <= tol * max(1.0, abs(energy)):
            return energy, vec
    warnings.warn(
        f"Lanczos residual {residual:.3e} above tolerance after "
        f"{max_restarts} restarts",
        RuntimeWarning,
        stacklevel=2,
    )
    return energy, vec


def _lanczos_cycle(apply, v0, max_krylov, tol):
    """One restarted Lanczos pass; returns (energy, vector, residual norm)."""
    shape = v0.shape
    basis = [v0]
    alphas: list[float] = []
    betas: list[float] = []

    w = _apply_checked(apply, v0)
    alpha = float(np.vdot(v0, w).real)
    alphas.append(alpha)
    w = w - alpha * v0

    theta = alpha
    s = np.array([1.0])
    for _ in range(1, max_krylov):
        # full reorthogonalization keeps the basis numerically orthonormal
        for b in basis:
            w = w - np.vdot(b, w) * b
        beta = float(np.linalg.norm(w))
        if beta < 1e-14:
            # invariant subspace: the tridiagonal problem is exact
            theta, s = _tridiag_ground(alphas, betas)
            break
        v = w / beta
        betas.append(beta)
        basis.append(v)
        w = _apply_checked(apply, v)
        alpha = float(np.vdot(v, w).real)
        alphas.append(alpha)
        w = w - alpha * v - beta * basis[-2]

        theta, s = _tridiag_ground(alphas, betas)
        est = beta_next_estimate(w, s)
        if est <= 0.5 * tol * max(1.0, abs(theta)):
            break

    vec = np.zeros(shape, dtype=basis[0].dtype)
    for coeff, b in zip(s, basis):
        vec = vec + coeff * b
    vec = vec / np.linalg.norm(vec)
    hv = _apply_checked(apply, vec)
    energy = float(np.vdot(vec, hv).real)
    residual = float(np.linalg.norm(hv - energy * vec))
    return energy, vec, residual


def beta_next_estimate(w: np.ndarray, s: np.ndarray) -> float:
    """Residual estimate |beta_{j+1} * s_j| for the current Ritz pair."""
    return float(np.linalg.norm(w) * abs(s[-1]))


def _tridiag_ground(alphas, betas):
    if len(alphas) == 1:
        return alphas[0], np.array([1.0])
    vals, vecs = eigh_tridiagonal(
        np.asarray(alphas), np.asarray(betas), select="i", select_range=(0, 0)
    )
    return float(vals[0]), vecs[:, 0]


def _apply_checked(apply, v):
    out = apply(v)
    out = np.asarray(out)
    if out.shape != v.shape:
        raise ValueError(f"operator changed shape {v.shape} -> {out.shape}")
    if not np.all(np.isfinite(out.real)) or (
        np.iscomplexobj(out) and not np.all(np.isfinite(out.imag))
    ):
        raise NumericalError("operator application produced non-finite values")
    return out
