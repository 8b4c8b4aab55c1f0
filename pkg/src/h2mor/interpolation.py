"""Tangential interpolation data, primitive Krylov bases, and Hermite reduction.

Interpolation data is a conjugate-closed set of (shift, right tangent, left
tangent) triplets, organized in blocks.  A block of length q > 1 is a Jordan
chain: its columns match derivatives of G up to order q-1 at the shift.  The
block matrices are

    S = blkdiag of Jordan blocks (shift on the diagonal, ones above),
    R = [r_1, 0, ..., r_2, 0, ...]   (tangent on each chain's first column),
    L = likewise for the left tangents,

and the primitive bases solve the sparse-dense Sylvester equations
A V - E V S - B R = 0 and A^T W - E^T W S - C^T L = 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import NotConjugateClosed, SingularShift
from .linalg import ShiftedSolver, orthonormalize_real
from .model import StateSpaceModel, eval_transfer, eval_transfer_derivative, project

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class InterpolationBlock:
    """One interpolation node: shift, tangent pair, and chain length."""

    sigma: complex
    right: np.ndarray
    left: np.ndarray
    length: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sigma", complex(self.sigma))
        object.__setattr__(self, "right", np.asarray(self.right, dtype=complex).reshape(-1))
        object.__setattr__(self, "left", np.asarray(self.left, dtype=complex).reshape(-1))
        if self.length < 1:
            raise ValueError("chain length must be >= 1")

    def conjugate(self) -> "InterpolationBlock":
        return InterpolationBlock(self.sigma.conjugate(), self.right.conj(),
                                  self.left.conj(), self.length)

    def is_self_conjugate(self) -> bool:
        if abs(self.sigma.imag) > 1e-12 * (1.0 + abs(self.sigma)):
            return False
        for t in (self.right, self.left):
            nt = np.linalg.norm(t)
            if nt > 0 and np.linalg.norm(t.imag) > 1e-12 * nt:
                return False
        return True

    def is_conjugate_of(self, other: "InterpolationBlock", rtol: float = 1e-9) -> bool:
        if self.length != other.length:
            return False
        if abs(self.sigma - other.sigma.conjugate()) > rtol * (1.0 + abs(self.sigma)):
            return False
        for a, b in ((self.right, other.right), (self.left, other.left)):
            if np.linalg.norm(a - b.conj()) > rtol * max(np.linalg.norm(a), 1e-300):
                return False
        return True


@dataclass(frozen=True, eq=False)
class InterpolationData:
    """Conjugate-closed interpolation triplets with Jordan-chain structure."""

    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise ValueError("interpolation data needs at least one block")
        m, p = self.blocks[0].right.size, self.blocks[0].left.size
        for b in self.blocks:
            if b.right.size != m or b.left.size != p:
                raise ValueError("all blocks must share tangent dimensions")

    # -- constructors ------------------------------------------------------

    @classmethod
    def simple(cls, shifts, right_tangents, left_tangents) -> "InterpolationData":
        """Length-1 blocks from per-triplet shifts and tangent rows."""
        shifts = np.asarray(shifts, dtype=complex).reshape(-1)
        R = np.atleast_2d(np.asarray(right_tangents, dtype=complex))
        L = np.atleast_2d(np.asarray(left_tangents, dtype=complex))
        if R.shape[0] != len(shifts) or L.shape[0] != len(shifts):
            raise ValueError("one tangent row per shift required")
        return cls(tuple(InterpolationBlock(s, r, l) for s, r, l in zip(shifts, R, L)))

    @classmethod
    def zero_init(cls, r: int, m: int, p: int) -> "InterpolationData":
        """All shifts at 0 with all-ones tangents: one Jordan chain of length r."""
        return cls((InterpolationBlock(0.0, np.ones(m), np.ones(p), length=r),))

    # -- structure ---------------------------------------------------------

    @property
    def r(self) -> int:
        return sum(b.length for b in self.blocks)

    @property
    def m(self) -> int:
        return self.blocks[0].right.size

    @property
    def p(self) -> int:
        return self.blocks[0].left.size

    @property
    def column_offsets(self) -> tuple:
        offs, pos = [], 0
        for b in self.blocks:
            offs.append(pos)
            pos += b.length
        return tuple(offs)

    @property
    def shifts(self) -> np.ndarray:
        """Per-column shifts (repeated within a chain)."""
        return np.concatenate([np.full(b.length, b.sigma) for b in self.blocks])

    @property
    def right_tangents(self) -> np.ndarray:
        """Per-column right tangents, (r, m); zero rows on chain tails."""
        rows = np.zeros((self.r, self.m), dtype=complex)
        for off, b in zip(self.column_offsets, self.blocks):
            rows[off] = b.right
        return rows

    @property
    def left_tangents(self) -> np.ndarray:
        rows = np.zeros((self.r, self.p), dtype=complex)
        for off, b in zip(self.column_offsets, self.blocks):
            rows[off] = b.left
        return rows

    def S_matrix(self) -> np.ndarray:
        """Block-diagonal of Jordan blocks (sigma on diagonal, 1 above within a chain)."""
        S = np.zeros((self.r, self.r), dtype=complex)
        for off, b in zip(self.column_offsets, self.blocks):
            for k in range(b.length):
                S[off + k, off + k] = b.sigma
                if k + 1 < b.length:
                    S[off + k, off + k + 1] = 1.0
        return S

    def R_matrix(self) -> np.ndarray:
        return self.right_tangents.T.copy()

    def L_matrix(self) -> np.ndarray:
        return self.left_tangents.T.copy()

    # -- conjugate structure -------------------------------------------------

    def conjugate_pairing(self):
        """Pair blocks under conjugation: ('real', i) or ('pair', i, j) entries.

        Raises :class:`NotConjugateClosed` when a complex block has no partner.
        """
        unused = set(range(len(self.blocks)))
        pairing = []
        for i, b in enumerate(self.blocks):
            if i not in unused:
                continue
            if b.is_self_conjugate():
                unused.discard(i)
                pairing.append(("real", i))
                continue
            partner = None
            for j in sorted(unused):
                if j != i and b.is_conjugate_of(self.blocks[j]):
                    partner = j
                    break
            if partner is None:
                raise NotConjugateClosed(
                    f"block at sigma = {b.sigma} has no conjugate partner"
                )
            unused.discard(i)
            unused.discard(partner)
            pairing.append(("pair", i, partner))
        return pairing

    def validate(self, m: int | None = None, p: int | None = None) -> None:
        """Check tangent dimensions and conjugate closure."""
        if m is not None and self.m != m:
            raise ValueError(f"right tangents have size {self.m}, model has m = {m}")
        if p is not None and self.p != p:
            raise ValueError(f"left tangents have size {self.p}, model has p = {p}")
        for b in self.blocks:
            if not (np.all(np.isfinite(b.right)) and np.all(np.isfinite(b.left))
                    and np.isfinite(b.sigma)):
                raise ValueError("interpolation data contains non-finite values")
        self.conjugate_pairing()

    def to_jsonable(self) -> dict:
        """Plain-JSON form (complex numbers as [re, im] pairs)."""
        def c(z):
            return [z.real, z.imag]

        return {"blocks": [
            {"sigma": c(b.sigma), "right": [c(z) for z in b.right],
             "left": [c(z) for z in b.left], "length": b.length}
            for b in self.blocks]}

    @classmethod
    def from_jsonable(cls, payload: dict) -> "InterpolationData":
        def c(pair):
            return complex(pair[0], pair[1])

        blocks = tuple(
            InterpolationBlock(c(d["sigma"]), [c(z) for z in d["right"]],
                               [c(z) for z in d["left"]], int(d["length"]))
            for d in payload["blocks"])
        return cls(blocks)

    def perturbed(self, sigma: complex) -> "InterpolationData":
        """Perturb every block at the given shift by (1 + 1e-8)*sigma + 1e-8.

        Conjugate partners are perturbed symmetrically so closure is kept.
        """
        def bump(s):
            return (1.0 + 1e-8) * s + 1e-8

        new = []
        for b in self.blocks:
            if abs(b.sigma - sigma) <= 1e-14 * (1.0 + abs(sigma)):
                new.append(replace(b, sigma=bump(b.sigma)))
            elif abs(b.sigma - np.conj(sigma)) <= 1e-14 * (1.0 + abs(sigma)):
                new.append(replace(b, sigma=np.conj(bump(np.conj(b.sigma)))))
            else:
                new.append(b)
        return InterpolationData(tuple(new))


@dataclass(frozen=True, eq=False)
class ProjectionPair:
    """Primitive complex bases and their real orthonormal counterparts."""

    Vprim: np.ndarray
    Wprim: np.ndarray
    V: np.ndarray
    W: np.ndarray
    data: InterpolationData


def primitive_basis(model: StateSpaceModel, data: InterpolationData, side: str,
                    solver: ShiftedSolver) -> np.ndarray:
    """Raw tangential Krylov columns for one side.

    Input side: (A - sigma_i E)^{-1} B r_i; output side the transposed dual
    with C^T l_i.  A chain of length q continues with v_{k+1} =
    (A - sigma E)^{-1} E v_k (transposed analogue on the output side), which
    realizes the Sylvester equation with the Jordan block in S.
    """
    if side not in ("input", "output"):
        raise ValueError("side must be 'input' or 'output'")
    transposed = side == "output"
    Esp = model.E.T.tocsc() if transposed else model.E
    cols = []
    for b in data.blocks:
        rhs = model.C.T @ b.left if transposed else model.B @ b.right
        v = solver.solve(b.sigma, rhs, transposed=transposed)
        cols.append(v)
        for _ in range(b.length - 1):
            v = solver.solve(b.sigma, Esp @ v, transposed=transposed)
            cols.append(v)
    return np.column_stack(cols)


def sylvester_residual(model: StateSpaceModel, basis: np.ndarray,
                       data: InterpolationData, side: str) -> float:
    """Relative residual of the defining Sylvester equation for one side."""
    S = data.S_matrix()
    if side == "input":
        ref = model.B @ data.R_matrix()
        res = model.A @ basis - model.E @ basis @ S - ref
    elif side == "output":
        ref = model.C.T @ data.L_matrix()
        res = model.A.T @ basis - model.E.T @ basis @ S - ref
    else:
        raise ValueError("side must be 'input' or 'output'")
    nref = np.linalg.norm(ref)
    nres = np.linalg.norm(res)
    return nres / nref if nref > 0 else nres


def hermite_reduce(model: StateSpaceModel, data: InterpolationData,
                   solver: ShiftedSolver | None = None):
    """Bitangential Hermite interpolant of ``model`` at ``data``.

    Builds both primitive bases, folds them to real orthonormal form, and
    projects.  Returns ``(rom, ProjectionPair)``.  A singular shift is
    perturbed once ((1+1e-8)*sigma + 1e-8) before giving up; rank-deficient
    bases are trimmed jointly so V and W keep equal column counts.
    """
    if solver is None:
        solver = ShiftedSolver(model)
    data.validate(model.m, model.p)

    for attempt in (0, 1):
        try:
            Vp = primitive_basis(model, data, "input", solver)
            Wp = primitive_basis(model, data, "output", solver)
            break
        except SingularShift as exc:
            if attempt or exc.sigma is None:
                raise
            log.warning("shift %s hit the spectrum; retrying with perturbed data", exc.sigma)
            data = data.perturbed(exc.sigma)

    V = orthonormalize_real(Vp, data)
    W = orthonormalize_real(Wp, data)
    k = min(V.shape[1], W.shape[1])
    if k < max(V.shape[1], W.shape[1]):
        log.debug("trimming projection bases to joint rank %d", k)
        V, W = V[:, :k], W[:, :k]
    rom = project(model, V, W)
    return rom, ProjectionPair(Vprim=Vp, Wprim=Wp, V=V, W=W, data=data)


@dataclass(frozen=True)
class TripletResidual:
    sigma: complex
    rho_right: float
    rho_left: float
    rho_hermite: float

    @property
    def worst(self) -> float:
        return max(self.rho_right, self.rho_left, self.rho_hermite)


@dataclass(frozen=True)
class InterpolationReport:
    """Per-triplet relative interpolation residuals of a reduced model."""

    entries: tuple

    @property
    def max_residual(self) -> float:
        return max(e.worst for e in self.entries)

    def passed(self, tol: float) -> bool:
        return self.max_residual < tol


def _rel(num: float, den: float) -> float:
    return num / den if den > 0 else num


def verify_tangential_interpolation(full: StateSpaceModel, rom: StateSpaceModel,
                                    data: InterpolationData) -> InterpolationReport:
    """Evaluate the three tangential conditions at every block's node.

    For chains only the order-0/1 conditions at the chain shift are checked
    here; higher moments have their own finite-difference tests.
    """
    entries = []
    for b in data.blocks:
        G = eval_transfer(full, b.sigma)
        Gr = eval_transfer(rom, b.sigma)
        dG = eval_transfer_derivative(full, b.sigma)
        dGr = eval_transfer_derivative(rom, b.sigma)
        right = _rel(np.linalg.norm((G - Gr) @ b.right), np.linalg.norm(G @ b.right))
        left = _rel(np.linalg.norm(b.left @ (G - Gr)), np.linalg.norm(b.left @ G))
        herm = _rel(abs(b.left @ (dG - dGr) @ b.right), abs(b.left @ dG @ b.right))
        entries.append(TripletResidual(b.sigma, right, left, herm))
    return InterpolationReport(tuple(entries))
