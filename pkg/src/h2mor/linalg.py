"""Shifted sparse factorizations with cost accounting, plus dense kernels.

The dense kernels (generalized eigensolver, generalized Lyapunov, stable-part
extraction) are only meant for reduced/surrogate orders, guarded by
``DENSE_THRESHOLD``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla
import scipy.sparse as sps
from scipy.sparse.linalg import splu

from .errors import (
    DefectiveSpectrum,
    OrderTooLarge,
    RankCollapse,
    SingularEr,
    SingularShift,
    StructurallySingularE,
    UnstablePencil,
)
from .model import DENSE_THRESHOLD, StateSpaceModel, make_model

log = logging.getLogger(__name__)


@dataclass
class CostCounters:
    """Factorization and iteration counters for one reduction run.

    ``full_lu`` counts factorizations at the full order n, ``surrogate_lu`` at
    the model-function order.  The ``*_norecycle`` variants count what the run
    would have cost without sharing factorizations between conjugate shifts
    and between direct/transposed solves.
    """

    full_lu: int = 0
    full_lu_norecycle: int = 0
    surrogate_lu: int = 0
    surrogate_lu_norecycle: int = 0
    irka_steps_total: int = 0
    cirka_steps: int = 0
    wall_times: dict = field(default_factory=dict)

    def add_time(self, phase: str, seconds: float) -> None:
        self.wall_times[phase] = self.wall_times.get(phase, 0.0) + seconds

    @property
    def total_time(self) -> float:
        return sum(self.wall_times.values())


class ShiftedSolver:
    """Factorization session for (A - sigma E) x = b over one model.

    Factorizations are cached by exact shift value.  With
    ``recycle_conjugates`` (default) a conjugate pair of shifts shares one LU
    (solutions for the pair are exact conjugates of each other), and direct
    and transposed solves at the same shift share it too.  ``lu_count``
    increments exactly once per factorization actually computed;
    ``lu_count_norecycle`` counts distinct (shift, mode) requests, i.e. the
    worst-case number of factorizations without any recycling.
    """

    def __init__(self, model: StateSpaceModel, recycle_conjugates: bool = True):
        self.model = model
        self.recycle_conjugates = recycle_conjugates
        self.lu_count = 0
        self.lu_count_norecycle = 0
        self._cache = {}
        self._requested = set()

    def solve(self, sigma: complex, rhs: np.ndarray, transposed: bool = False) -> np.ndarray:
        """Return (A - sigma E)^{-1} rhs, or the transposed solve."""
        sigma = complex(sigma)
        if self.recycle_conjugates and sigma.imag < 0.0:
            key, flip = complex(sigma.real, -sigma.imag), True
        else:
            key, flip = sigma, False
        lu = self._cache.get(key)
        if lu is None:
            lu = self._factorize(key)
            self._cache[key] = lu
            self.lu_count += 1
        if (sigma, transposed) not in self._requested:
            self._requested.add((sigma, transposed))
            self.lu_count_norecycle += 1

        rhs = np.asarray(rhs, dtype=complex)
        single = rhs.ndim == 1
        R = rhs.reshape(-1, 1) if single else rhs
        if flip:
            R = R.conj()
        X = lu.solve(R, trans="T" if transposed else "N")
        if flip:
            X = X.conj()
        return X[:, 0] if single else X

    def _factorize(self, sigma):
        M = (self.model.A - sigma * self.model.E).astype(complex).tocsc()
        try:
            return splu(M)
        except RuntimeError as exc:
            raise SingularShift(f"A - sigma E singular at sigma = {sigma}", sigma=sigma) from exc

    def drop_factorizations(self) -> None:
        """Release cached factorizations; all counters keep their values."""
        self._cache.clear()


def generalized_eig(Ar: np.ndarray, Er: np.ndarray):
    """Dense generalized eigendecomposition with normalized left eigenvectors.

    Returns ``(lam, X, Y)`` with ``Ar X = Er X diag(lam)``,
    ``Y^H Ar = diag(lam) Y^H Er`` and ``Y^H Er X = I``.
    """
    Ar = np.atleast_2d(np.asarray(Ar))
    Er = np.atleast_2d(np.asarray(Er))
    r = Ar.shape[0]
    if Ar.shape != Er.shape or Ar.shape[1] != r:
        raise SingularEr(f"need square matrices of equal size, got {Ar.shape}, {Er.shape}")
    if r > DENSE_THRESHOLD:
        raise OrderTooLarge(f"dense eigensolver limited to order {DENSE_THRESHOLD}, got {r}")
    sv = np.linalg.svd(Er, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] < 1e-14 * sv[0]:
        raise SingularEr("Er is numerically singular")

    lam, Y, X = spla.eig(Ar, Er, left=True, right=True)
    if not np.all(np.isfinite(lam)):
        raise SingularEr("pencil has infinite eigenvalues")
    if np.linalg.cond(X) > 1e12:
        raise DefectiveSpectrum("right eigenvector matrix has condition number > 1e12")
    d = np.einsum("ij,ij->j", Y.conj(), Er @ X)
    if np.any(np.abs(d) < 1e-14 * np.abs(lam).max(initial=1.0)):
        raise DefectiveSpectrum("left/right eigenvectors nearly E-orthogonal (defective pencil)")
    Y = Y / d.conj()
    return lam, X, Y


def orthonormalize_real(Vprim: np.ndarray, data, drop_tol: float = 1e-12) -> np.ndarray:
    """Fold a conjugate-closed complex basis into a real orthonormal one.

    Conjugate column pairs are replaced by (real part, imaginary part), then a
    column-pivoted QR orthonormalizes.  Columns below ``drop_tol`` times the
    leading diagonal of R are dropped (logged); the result spans the same real
    subspace as the primitive basis.
    """
    Vreal = realify_columns(Vprim, data)
    return _qr_trim(Vreal, drop_tol)


def realify_columns(Vprim: np.ndarray, data) -> np.ndarray:
    """Replace conjugate column pairs by real/imaginary parts (span preserved)."""
    Vprim = np.asarray(Vprim)
    offsets = data.column_offsets
    out = np.empty(Vprim.shape, dtype=float)
    for kind, *idx in data.conjugate_pairing():
        if kind == "real":
            (i,) = idx
            b = data.blocks[i]
            cols = slice(offsets[i], offsets[i] + b.length)
            out[:, cols] = Vprim[:, cols].real
        else:
            i, j = idx
            b = data.blocks[i]
            for k in range(b.length):
                col = Vprim[:, offsets[i] + k]
                out[:, offsets[i] + k] = col.real
                out[:, offsets[j] + k] = col.imag
    return out


def _qr_trim(M: np.ndarray, drop_tol: float) -> np.ndarray:
    Q, R, _ = spla.qr(M, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        raise RankCollapse("basis has numerical rank zero")
    rank = int(np.sum(diag > drop_tol * diag[0]))
    if rank == 0:
        raise RankCollapse("basis has numerical rank zero")
    if rank < M.shape[1]:
        log.debug("orthonormalization dropped %d dependent column(s) (rank %d of %d)",
                  M.shape[1] - rank, rank, M.shape[1])
    return Q[:, :rank]


def pencil_eigenvalues(model: StateSpaceModel) -> np.ndarray:
    """Generalized eigenvalues of (A, E) for a dense-convertible model."""
    if model.n > DENSE_THRESHOLD:
        raise OrderTooLarge(f"dense eigenvalues limited to order {DENSE_THRESHOLD}, got {model.n}")
    lam = spla.eigvals(model.A.toarray(), model.E.toarray())
    if not np.all(np.isfinite(lam)):
        raise StructurallySingularE("E is numerically singular (infinite eigenvalues)")
    return lam


def is_stable(model: StateSpaceModel) -> bool:
    return bool(np.max(pencil_eigenvalues(model).real) < 0.0)


def solve_generalized_lyapunov(A, E, B) -> np.ndarray:
    """Solve A P E^T + E P A^T + B B^T = 0 for symmetric P >= 0.

    The pencil (A, E) must be stable.  E is factored once to transform to a
    standard continuous Lyapunov equation, solved by the Schur (Bartels-
    Stewart) method.  Dense path only.
    """
    Ad = A.toarray() if sps.issparse(A) else np.atleast_2d(np.asarray(A, dtype=float))
    Ed = E.toarray() if sps.issparse(E) else np.atleast_2d(np.asarray(E, dtype=float))
    Bd = np.asarray(B, dtype=float)
    if Bd.ndim == 1:
        Bd = Bd.reshape(-1, 1)
    n = Ad.shape[0]
    if n > DENSE_THRESHOLD:
        raise OrderTooLarge(f"dense Lyapunov limited to order {DENSE_THRESHOLD}, got {n}")

    lam = spla.eigvals(Ad, Ed)
    if not np.all(np.isfinite(lam)):
        raise StructurallySingularE("E is numerically singular")
    if np.max(lam.real) >= 0.0:
        raise UnstablePencil(f"pencil not stable: max Re(lambda) = {np.max(lam.real):.3e}")

    F = spla.solve(Ed, Ad)
    Q = spla.solve(Ed, Bd)
    P = spla.solve_continuous_lyapunov(F, -Q @ Q.T)
    return (P + P.T) / 2.0


def stable_part(model: StateSpaceModel) -> StateSpaceModel:
    """Discard modes with Re(lambda) >= 0; returns a real model of the stable modes.

    The input must be dense-convertible with simple eigenvalues.  A fully
    stable model is returned unchanged.
    """
    lam, X, Y = generalized_eig(model.A.toarray(), model.E.toarray())
    stable = lam.real < 0.0
    if np.all(stable):
        return model
    b_rows = Y.conj().T @ model.B
    c_cols = model.C @ X

    blocks_a, rows_b, cols_c = [], [], []
    used = np.zeros(len(lam), dtype=bool)
    order = np.lexsort((lam.imag, lam.real))
    for i in order:
        if used[i] or not stable[i]:
            continue
        used[i] = True
        li = lam[i]
        if abs(li.imag) <= 1e-10 * (1.0 + abs(li)):
            blocks_a.append(np.array([[li.real]]))
            rows_b.append(b_rows[i].real.reshape(1, -1))
            cols_c.append(c_cols[:, i].real.reshape(-1, 1))
            continue
        # find the conjugate partner
        cand = [j for j in range(len(lam)) if not used[j] and j != i]
        if not cand:
            raise DefectiveSpectrum("unpaired complex eigenvalue in a real pencil")
        j = min(cand, key=lambda j: abs(lam[j] - li.conjugate()))
        if abs(lam[j] - li.conjugate()) > 1e-8 * (1.0 + abs(li)):
            raise DefectiveSpectrum(f"no conjugate partner for eigenvalue {li}")
        used[j] = True
        a, b = li.real, li.imag
        blocks_a.append(np.array([[a, -b], [b, a]]))
        bt = b_rows[i]
        c = c_cols[:, i]
        rows_b.append(np.vstack([bt.real, bt.imag]))
        cols_c.append(np.column_stack([2.0 * c.real, -2.0 * c.imag]))

    if not blocks_a:
        raise UnstablePencil("model has no stable modes")
    Ak = spla.block_diag(*blocks_a)
    Bk = np.vstack(rows_b)
    Ck = np.hstack(cols_c)
    return make_model(None, sps.csc_matrix(Ak), Bk, Ck, model.D)
