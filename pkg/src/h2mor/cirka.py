"""Confined IRKA: surrogate H2 optimization over an updated model function.

The model function is a mid-sized Hermite interpolant of the full model.  The
outer loop alternates (i) updating the model function so it interpolates the
full model at the latest optimal data with (ii) running IRKA on the surrogate
only.  At convergence the optimality conditions transfer to the full model
because every optimal triplet is interpolated by the surrogate (the update
condition).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from .errors import ModelOrderExceeded, UnstableRom
from .interpolation import (
    InterpolationBlock,
    InterpolationData,
    hermite_reduce,
    primitive_basis,
)
from .irka import IrkaOptions, IrkaResult, irka, shift_convergence
from .linalg import (
    CostCounters,
    ShiftedSolver,
    is_stable,
    orthonormalize_real,
    pencil_eigenvalues,
    stable_part,
)
from .metrics import h2_error
from .model import (
    StateSpaceModel,
    eval_transfer,
    eval_transfer_derivative,
    pole_residue,
    project,
)

log = logging.getLogger(__name__)

INIT_STRATEGIES = ("I1", "I2")
UPDATE_STRATEGIES = ("U1", "U2", "U3")


@dataclass
class CirkaOptions:
    """Outer-loop controls; defaults match the reference experiments (I.2 + U.2)."""

    inner: IrkaOptions = field(default_factory=IrkaOptions)
    init_strategy: str = "I2"
    update_strategy: str = "U2"
    initial_nM: int | None = None        # default 2r
    outer_tol: float = 1e-3
    outer_max_iter: int = 15
    max_model_order: int | None = None   # default n // 2
    new_triplet_shift_tol: float = 1e-6
    new_triplet_angle_tol: float = 1e-6
    stop_criterion: str = "shifts_and_tangents"
    compute_error_estimate: bool = True
    verify_optimality: bool = True

    def __post_init__(self):
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValueError(f"init_strategy must be one of {INIT_STRATEGIES}")
        if self.update_strategy not in UPDATE_STRATEGIES:
            raise ValueError(f"update_strategy must be one of {UPDATE_STRATEGIES}")
        if self.outer_tol <= 0:
            raise ValueError("outer_tol must be positive")
        if self.outer_max_iter < 1:
            raise ValueError("outer_max_iter must be >= 1")


@dataclass(eq=False)
class ModelFunction:
    """Surrogate model with its generating bases and interpolation history.

    ``history`` holds every triplet the primitive bases realize (chains
    included), column-aligned with ``Vprim``/``Wprim``.  The surrogate is the
    projection of the full model onto the real orthonormal folds VM, WM.
    """

    surrogate: StateSpaceModel
    VM: np.ndarray
    WM: np.ndarray
    Vprim: np.ndarray
    Wprim: np.ndarray
    history: InterpolationData
    updates: int = 0

    @property
    def order(self) -> int:
        return self.surrogate.n


# -- growing block-of-columns state ------------------------------------------


class _BasisState:
    """Interpolation blocks with their primitive columns, grown in place."""

    def __init__(self, model, solver):
        self.model = model
        self.solver = solver
        self.entries = []    # [block, Vcols (n x length), Wcols (n x length)]

    @classmethod
    def from_model_function(cls, mf: ModelFunction, model, solver):
        state = cls(model, solver)
        offs = mf.history.column_offsets
        for off, b in zip(offs, mf.history.blocks):
            cols = slice(off, off + b.length)
            state.entries.append([b, mf.Vprim[:, cols].copy(), mf.Wprim[:, cols].copy()])
        return state

    @property
    def total_columns(self) -> int:
        return sum(e[0].length for e in self.entries)

    def find_match(self, block: InterpolationBlock, shift_tol: float, angle_tol: float):
        from .irka import _angle_distance

        for idx, (b, _, _) in enumerate(self.entries):
            scale = abs(b.sigma)
            d = abs(block.sigma - b.sigma) / scale if scale > 0 else abs(block.sigma)
            if d > shift_tol:
                continue
            if _angle_distance(block.right, b.right) > angle_tol:
                continue
            if _angle_distance(block.left, b.left) > angle_tol:
                continue
            return idx
        return None

    def _fresh_columns(self, block: InterpolationBlock):
        sub = InterpolationData((block,))
        V = primitive_basis(self.model, sub, "input", self.solver)
        W = primitive_basis(self.model, sub, "output", self.solver)
        return V, W

    def append_block(self, block: InterpolationBlock) -> None:
        V, W = self._fresh_columns(block)
        self.entries.append([block, V, W])

    def extend_block(self, idx: int, extra: int) -> None:
        """Grow a chain: each new column is (A - sigma E)^{-1} E times the last."""
        b, V, W = self.entries[idx]
        Et = self.model.E.T.tocsc()
        for _ in range(extra):
            v = self.solver.solve(b.sigma, self.model.E @ V[:, -1])
            w = self.solver.solve(b.sigma, Et @ W[:, -1], transposed=True)
            V = np.column_stack([V, v])
            W = np.column_stack([W, w])
        self.entries[idx] = [InterpolationBlock(b.sigma, b.right, b.left, b.length + extra),
                             V, W]

    def history(self) -> InterpolationData:
        return InterpolationData(tuple(e[0] for e in self.entries))

    def assemble(self, updates: int) -> ModelFunction:
        history = self.history()
        Vprim = np.hstack([e[1] for e in self.entries])
        Wprim = np.hstack([e[2] for e in self.entries])
        VM = orthonormalize_real(Vprim, history)
        WM = orthonormalize_real(Wprim, history)
        k = min(VM.shape[1], WM.shape[1])
        VM, WM = VM[:, :k], WM[:, :k]
        surrogate = project(self.model, VM, WM)
        return ModelFunction(surrogate=surrogate, VM=VM, WM=WM, Vprim=Vprim,
                             Wprim=Wprim, history=history, updates=updates)


# -- initialization and update strategies ------------------------------------


def init_model_function(model: StateSpaceModel, data0: InterpolationData,
                        strategy: str = "I2", n_model: int | None = None,
                        solver: ShiftedSolver | None = None, *,
                        shift_tol: float = 1e-6, angle_tol: float = 1e-6,
                        max_model_order: int | None = None) -> ModelFunction:
    """Build the initial model function around the starting data.

    I.1 keeps ``data0`` and adds a Jordan chain of length ``n_model - r`` at 0
    with all-ones tangents (repeated nodes extend existing chains).  I.2
    doubles every chain of ``data0`` (Hermite doubling), which fixes
    ``n_model = 2 r``.
    """
    if strategy not in INIT_STRATEGIES:
        raise ValueError(f"strategy must be one of {INIT_STRATEGIES}")
    if solver is None:
        solver = ShiftedSolver(model)
    data0.validate(model.m, model.p)
    r = data0.r
    if strategy == "I2":
        if n_model is not None and n_model != 2 * r:
            raise ValueError(f"I.2 fixes the model-function order to 2r = {2 * r}")
        n_model = 2 * r
    else:
        n_model = 2 * r if n_model is None else n_model
    if n_model <= r:
        raise ValueError(f"model-function order {n_model} must exceed r = {r}")
    if n_model > model.n:
        raise ValueError(f"model-function order {n_model} exceeds model order {model.n}")
    if max_model_order is not None and n_model > max_model_order:
        raise ModelOrderExceeded(
            f"model-function order {n_model} exceeds the cap {max_model_order}")

    state = _BasisState(model, solver)
    if strategy == "I2":
        for b in data0.blocks:
            state.append_block(InterpolationBlock(b.sigma, b.right, b.left, 2 * b.length))
    else:
        for b in data0.blocks:
            state.append_block(b)
        ones = InterpolationBlock(0.0, np.ones(model.m), np.ones(model.p))
        for _ in range(n_model - r):
            idx = state.find_match(ones, shift_tol, angle_tol)
            if idx is None:
                state.append_block(ones)
            else:
                state.extend_block(idx, 1)
    return state.assemble(updates=0)


def update_model_function(model: StateSpaceModel, mf: ModelFunction,
                          opt_data: InterpolationData, strategy: str = "U2",
                          opts: CirkaOptions | None = None,
                          solver: ShiftedSolver | None = None,
                          max_model_order: int | None = None):
    """Grow or rebuild the model function around new optimal data.

    U.1 appends all triplets (repeats extend chains to higher derivatives);
    U.2 appends only triplets that are new within the shift/angle tolerances;
    U.3 rebuilds from scratch around ``opt_data`` at constant order.  Returns
    ``(model_function, columns_added)``.  In every case the resulting history
    interpolates all of ``opt_data``, which is the update condition that
    transfers optimality to the full model.
    """
    if strategy not in UPDATE_STRATEGIES:
        raise ValueError(f"strategy must be one of {UPDATE_STRATEGIES}")
    opts = opts or CirkaOptions()
    if solver is None:
        solver = ShiftedSolver(model)
    stol, atol = opts.new_triplet_shift_tol, opts.new_triplet_angle_tol

    if strategy == "U3":
        keep = mf.history.r if opts.init_strategy == "I1" else None
        new_mf = init_model_function(model, opt_data, opts.init_strategy, keep, solver,
                                     shift_tol=stol, angle_tol=atol,
                                     max_model_order=max_model_order)
        new_mf.updates = mf.updates + 1
        return new_mf, new_mf.history.r

    state = _BasisState.from_model_function(mf, model, solver)
    # decide before solving anything so the order cap can veto the update
    actions = []
    added = 0
    for b in opt_data.blocks:
        idx = state.find_match(b, stol, atol)
        if idx is not None and strategy == "U2":
            continue
        actions.append((idx, b))
        added += b.length
    new_total = state.total_columns + added
    if max_model_order is not None and new_total > max_model_order:
        raise ModelOrderExceeded(
            f"update would grow the model function to {new_total} > {max_model_order}")

    for idx, b in actions:
        if idx is None:
            state.append_block(b)
        else:
            state.extend_block(idx, b.length)
    new_mf = state.assemble(updates=mf.updates + 1)
    return new_mf, added


# -- verification and estimation ----------------------------------------------


@dataclass(frozen=True)
class PoleResidualEntry:
    pole: complex
    mirror: complex
    rho_right: float
    rho_left: float
    rho_hermite: float
    skipped_unstable: bool = False

    @property
    def worst(self) -> float:
        if self.skipped_unstable:
            return 0.0
        return max(self.rho_right, self.rho_left, self.rho_hermite)


@dataclass(frozen=True)
class OptimalityReport:
    """First-order H2 optimality residuals of a reduced model against a full model."""

    entries: tuple
    skipped_unstable: bool

    @property
    def max_residual(self) -> float:
        checked = [e.worst for e in self.entries if not e.skipped_unstable]
        return max(checked) if checked else math.inf

    def passed(self, tol: float) -> bool:
        return not self.skipped_unstable and self.max_residual < tol


def verify_h2_optimality(full_model: StateSpaceModel,
                         rom: StateSpaceModel) -> OptimalityReport:
    """Check the interpolatory optimality conditions at the mirrored rom poles.

    For each simple pole lambda_i of the rom with residue directions b_i^T,
    c_i, evaluates the relative residuals of G(-conj(lambda_i)) b_i,
    c_i^T G(-conj(lambda_i)) and c_i^T G'(-conj(lambda_i)) b_i between full
    and reduced model.  Unstable poles are skipped and flagged; a rom with no
    stable poles at all raises :class:`UnstableRom`.
    """
    prf = pole_residue(rom)
    entries = []
    any_skipped = False
    for lam, brow, crow in zip(prf.poles, prf.input_residues, prf.output_residues):
        if lam.real >= 0.0:
            any_skipped = True
            entries.append(PoleResidualEntry(lam, -lam.conjugate(), math.nan, math.nan,
                                             math.nan, skipped_unstable=True))
            continue
        s = -lam.conjugate()
        G = eval_transfer(full_model, s)
        Gr = eval_transfer(rom, s)
        dG = eval_transfer_derivative(full_model, s)
        dGr = eval_transfer_derivative(rom, s)
        b = brow  # b_i^T as a vector; c_i likewise
        c = crow

        def rel(num, den):
            return num / den if den > 0 else num

        rho_r = rel(np.linalg.norm((G - Gr) @ b), np.linalg.norm(G @ b))
        rho_l = rel(np.linalg.norm(c @ (G - Gr)), np.linalg.norm(c @ G))
        rho_h = rel(abs(c @ (dG - dGr) @ b), abs(c @ dG @ b))
        entries.append(PoleResidualEntry(lam, s, rho_r, rho_l, rho_h))
    if any_skipped and all(e.skipped_unstable for e in entries):
        raise UnstableRom("reduced model has no stable poles to check")
    return OptimalityReport(tuple(entries), skipped_unstable=any_skipped)


def estimate_error(mf: ModelFunction, rom: StateSpaceModel):
    """Surrogate-based estimate of the relative H2 reduction error.

    Returns ``(estimate, used_stable_part)`` with
    estimate = ||G_mf - G_rom||_H2 / ||G_mf||_H2, where the stable part of
    the surrogate is substituted when the surrogate is unstable.
    """
    surrogate = mf.surrogate
    used_stable = False
    if np.max(pencil_eigenvalues(surrogate).real) >= 0.0:
        surrogate = stable_part(surrogate)
        used_stable = True
    if not is_stable(rom):
        raise UnstableRom("error estimate needs a stable reduced model")
    _, rel = h2_error(surrogate, rom)
    return rel, used_stable


@dataclass(frozen=True)
class EquivalenceReport:
    """Transfer-function deviation between a surrogate-derived rom and direct projection."""

    max_deviation: float
    points: tuple
    conclusive: bool

    def passed(self, tol: float) -> bool:
        return self.conclusive and self.max_deviation < tol


def verify_realization_equivalence(full_model: StateSpaceModel,
                                   opt_data: InterpolationData,
                                   mf_rom: StateSpaceModel,
                                   solver: ShiftedSolver | None = None,
                                   converged: bool = True,
                                   seed: int = 0) -> EquivalenceReport:
    """Compare the CIRKA rom against direct full-model projection at the same data.

    Realizations are compared by transfer function (20 logarithmically spaced
    points on the imaginary axis plus 5 random complex points), not by
    matrices.  With ``converged=False`` the report is marked inconclusive.
    """
    direct, _ = hermite_reduce(full_model, opt_data, solver)
    mags = np.abs(opt_data.shifts)
    mags = mags[mags > 0]
    lo = mags.min() / 10 if mags.size else 1e-2
    hi = mags.max() * 10 if mags.size else 1e2
    points = [1j * w for w in np.logspace(np.log10(lo), np.log10(hi), 20)]
    rng = np.random.default_rng(seed)
    scale = math.sqrt(lo * hi)
    for _ in range(5):
        points.append(complex(rng.uniform(0.1, 2.0) * scale,
                              rng.uniform(-2.0, 2.0) * scale))
    worst = 0.0
    for s in points:
        Gd = eval_transfer(direct, s)
        Gm = eval_transfer(mf_rom, s)
        den = np.linalg.norm(Gd)
        dev = np.linalg.norm(Gd - Gm) / den if den > 0 else np.linalg.norm(Gd - Gm)
        worst = max(worst, dev)
    return EquivalenceReport(max_deviation=float(worst), points=tuple(points),
                             conclusive=converged)


# -- the outer loop -----------------------------------------------------------


@dataclass
class CirkaResult:
    rom: StateSpaceModel
    model_function: ModelFunction | None
    optimal_data: InterpolationData
    outer_iterations: int
    inner_iterations: list
    counters: CostCounters
    error_estimate: float | None
    estimate_used_stable_part: bool | None
    optimality_report: OptimalityReport | None
    converged: bool
    fallback_direct: bool = False
    new_columns_per_step: list = field(default_factory=list)
    inner_results: list = field(default_factory=list)


def cirka(model: StateSpaceModel, init: InterpolationData,
          opts: CirkaOptions | None = None,
          solver: ShiftedSolver | None = None) -> CirkaResult:
    """Confined IRKA outer loop.

    Alternates model-function updates on the full model with IRKA runs on the
    surrogate, warm-starting each inner run with the previous optimal data,
    until the optimal data stops moving (``outer_tol``) or ``outer_max_iter``
    is hit.  If an update would exceed ``max_model_order``, the run falls
    back to direct IRKA on the full model and flags it.
    """
    opts = opts or CirkaOptions()
    if solver is None:
        solver = ShiftedSolver(model, opts.inner.recycle_conjugates)
    init.validate(model.m, model.p)
    r = init.r
    max_nM = opts.max_model_order if opts.max_model_order is not None else model.n // 2
    lu0, lu0n = solver.lu_count, solver.lu_count_norecycle

    counters = CostCounters()
    data = init
    mf = None
    inner_results: list[IrkaResult] = []
    new_cols: list[int] = []
    converged = False
    fallback = False
    k = 0
    for k in range(1, opts.outer_max_iter + 1):
        t0 = perf_counter()
        try:
            if mf is None:
                mf = init_model_function(model, data, opts.init_strategy,
                                         opts.initial_nM, solver,
                                         shift_tol=opts.new_triplet_shift_tol,
                                         angle_tol=opts.new_triplet_angle_tol,
                                         max_model_order=max_nM)
                new_cols.append(mf.history.r)
            else:
                mf, added = update_model_function(model, mf, data, opts.update_strategy,
                                                  opts, solver, max_nM)
                new_cols.append(added)
        except ModelOrderExceeded as exc:
            log.warning("model function order cap hit (%s); falling back to direct IRKA", exc)
            fallback = True
            break
        finally:
            counters.add_time("reduction", perf_counter() - t0)

        t0 = perf_counter()
        inner_solver = ShiftedSolver(mf.surrogate, opts.inner.recycle_conjugates)
        inner = irka(mf.surrogate, data, opts.inner, inner_solver)
        counters.add_time("optimization", perf_counter() - t0)
        counters.surrogate_lu += inner.counters.full_lu
        counters.surrogate_lu_norecycle += inner.counters.full_lu_norecycle
        counters.irka_steps_total += inner.iterations
        inner_results.append(inner)

        if inner.optimal_data.r == data.r:
            dist = shift_convergence(data, inner.optimal_data, opts.stop_criterion)
        else:
            dist = np.inf
        data = inner.optimal_data
        log.debug("cirka outer step %d: data distance %.3e (n_M = %d)", k, dist, mf.order)
        if dist <= opts.outer_tol:
            converged = True
            break

    if fallback:
        direct = irka(model, data, opts.inner, solver)
        rom = direct.rom
        data = direct.optimal_data
        converged = direct.converged
        counters.irka_steps_total += direct.iterations
        inner_results.append(direct)
    else:
        rom = inner_results[-1].rom

    counters.full_lu = solver.lu_count - lu0
    counters.full_lu_norecycle = solver.lu_count_norecycle - lu0n
    counters.cirka_steps = k

    estimate = None
    used_stable = None
    if opts.compute_error_estimate and mf is not None and not fallback:
        try:
            estimate, used_stable = estimate_error(mf, rom)
        except UnstableRom:
            log.warning("reduced model unstable; error estimate skipped")
    report = None
    if opts.verify_optimality:
        try:
            report = verify_h2_optimality(model, rom)
        except UnstableRom:
            log.warning("reduced model has no stable poles; optimality check skipped")

    return CirkaResult(rom=rom, model_function=mf, optimal_data=data,
                       outer_iterations=k, inner_iterations=[ir.iterations for ir in inner_results],
                       counters=counters, error_estimate=estimate,
                       estimate_used_stable_part=used_stable,
                       optimality_report=report, converged=converged,
                       fallback_direct=fallback, new_columns_per_step=new_cols,
                       inner_results=inner_results)
