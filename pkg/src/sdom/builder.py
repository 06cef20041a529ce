"""Constructive stopping-time builder for sparse families.

Starting from a root cube that carries the inputs, each node measures a
normalized level function on its cells: the pointwise product of the
inputs and the localized grand maximal truncation gap, both divided by
the product of r-averages over the tripled cube.  An adaptive threshold
keeps the exceptional set no larger than a 2^-(n+2) fraction of the
node, the exceptional cells are swallowed by a dyadic selection at
density 2^-(n+1), and the remainder of the node becomes its witness;
selected cubes recurse.  Counting alone then forces the selected cubes
to cover at most half the node, so witnesses are dense and pairwise
disjoint by construction, and the emitted family is 1/2-sparse with no
tuning knobs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import (
    DyadicCube,
    cell_box,
    children,
    cube_cell_count,
    cube_flat_indices,
    local_average,
    support_in,
    triple_cube,
)
from .maximal import DYADIC, CubeFamilyMode, _PrefixSums, local_grand_maximal
from .operators import OperatorSpec, _check_inputs, apply
from .sparse import InvariantViolation, SparseEntry, SparseFamily, sparse_eval


def adaptive_threshold(s_values: np.ndarray, n: int) -> float:
    """The (B+1)-th largest of the level values, B = floor(count / 2^{n+2}).

    Cells strictly above the threshold number at most B, so the
    exceptional set automatically fits the 2^-(n+2) budget; constant
    input (and any node smaller than 2^{n+2} cells) gets an empty
    exceptional set.
    """
    s = np.asarray(s_values, dtype=float).reshape(-1)
    if s.size == 0:
        raise ValueError("threshold needs at least one value")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("level values must be finite and nonnegative")
    budget = s.size >> (n + 2)
    return float(np.sort(s)[::-1][budget])


def cz_select(grid, q0: DyadicCube, e_cells, lam: float | None = None) -> list:
    """Maximal dyadic strict subcubes of ``q0`` whose share of ``e_cells``
    exceeds ``lam`` (default 2^-(n+1)).

    Preconditions: the exceptional cells lie in ``q0`` and number at
    most a 2^-(n+2) fraction of it, which keeps ``q0`` itself below the
    selection density.  Every exceptional cell ends up covered, because
    a bare cell has density one.  Returned cubes are pairwise disjoint
    (selection stops descent) and sorted by (level, index).
    """
    n = grid.n
    if lam is None:
        lam = 0.5 ** (n + 1)
    if not (0.0 < lam < 1.0):
        raise ValueError("selection density must lie in (0, 1)")
    e_idx = np.asarray(sorted(set(int(c) for c in e_cells)), dtype=int)
    q0_cells = set(cube_flat_indices(grid, q0).tolist())
    if e_idx.size and not set(e_idx.tolist()) <= q0_cells:
        raise ValueError("exceptional cells must lie inside the node cube")
    if e_idx.size << (n + 2) > len(q0_cells):
        raise ValueError("exceptional set exceeds its 2^-(n+2) budget")
    if e_idx.size == 0 or q0.level >= grid.L:
        return []
    mask = np.zeros(grid.num_cells)
    mask[e_idx] = 1.0
    table = _PrefixSums(grid, mask)
    out = []

    def visit(cube):
        lo, hi = cell_box(grid, cube)
        cnt = table.box_sum(lo, hi)
        if cnt == 0.0:
            return
        if cnt > lam * cube_cell_count(grid, cube):
            out.append(cube)
            return
        if cube.level < grid.L:
            for ch in children(grid, cube):
                visit(ch)

    for ch in children(grid, q0):
        visit(ch)
    out.sort(key=lambda c: c.sort_key())
    return out


@dataclass(frozen=True, eq=False)
class BuilderNodeStats:
    """Per-node trace of the construction."""

    cube: DyadicCube
    scale: float
    tau: float
    e_count: int
    selected_count: int
    sum_pj_ratio: float
    witness_count: int

    def to_json_dict(self) -> dict:
        return {
            "cube": self.cube.to_json_dict(),
            "A": self.scale,
            "tau": self.tau,
            "E_cells": self.e_count,
            "selected": self.selected_count,
            "sum_Pj_ratio": self.sum_pj_ratio,
            "witness_cells": self.witness_count,
        }


def build_sparse_family(
    op: OperatorSpec,
    fs,
    root: DyadicCube,
    r: float,
    mode: CubeFamilyMode = DYADIC,
) -> tuple:
    """Run the stopping construction; returns (family, node stats).

    Requires every input supported inside ``root`` and the tripled root
    contained in the domain, so no truncation is ever cut by the
    boundary.  The family's entries come out sorted by (level, index);
    the stats keep traversal (parent before child) order.
    """
    fs = _check_inputs(op, fs)
    grid = op.grid
    if not (r >= 1 and math.isfinite(r)):
        raise ValueError("averaging exponent r must satisfy r >= 1")
    if not isinstance(root, DyadicCube):
        raise TypeError("the root must be a dyadic cube")
    if triple_cube(grid, root).clipped:
        raise ValueError("the tripled root must fit inside the domain")
    for i, f in enumerate(fs):
        if not support_in(f, root):
            raise ValueError(f"input {i} is not supported inside the root cube")

    prod_vals = np.abs(fs[0].values.copy())
    for f in fs[1:]:
        prod_vals = prod_vals * np.abs(f.values)

    entries = []
    stats = []
    depth_cap = 2 * grid.L  # recursion strictly shrinks cubes, so hitting this means a bug

    def visit(q0: DyadicCube, depth: int = 0):
        if depth > depth_cap:
            raise InvariantViolation("builder recursion exceeded its depth cap")
        tq = triple_cube(grid, q0)
        scale = 1.0
        for f in fs:
            scale *= local_average(f, tq, r)
        if scale == 0.0:
            return
        idx = cube_flat_indices(grid, q0)
        s = prod_vals[idx].copy()
        if idx.size > 1:
            lgm = local_grand_maximal(op, fs, q0, mode).values
            np.maximum(s, lgm[idx], out=s)
        s /= scale
        tau = adaptive_threshold(s, grid.n)
        e_cells = idx[s > tau]
        selected = cz_select(grid, q0, e_cells)
        sel_cells = (
            np.concatenate([cube_flat_indices(grid, p) for p in selected])
            if selected
            else np.zeros(0, dtype=int)
        )
        if 2 * sel_cells.size > idx.size:
            raise InvariantViolation("selected cubes cover more than half their node")
        witness = np.setdiff1d(idx, sel_cells, assume_unique=True)
        entries.append(SparseEntry(cube=q0, witness=tuple(int(c) for c in witness), tau=tau))
        stats.append(
            BuilderNodeStats(
                cube=q0,
                scale=scale,
                tau=tau,
                e_count=int(e_cells.size),
                selected_count=len(selected),
                sum_pj_ratio=sel_cells.size / idx.size,
                witness_count=int(witness.size),
            )
        )
        for p in selected:
            visit(p, depth + 1)

    visit(root)
    entries.sort(key=lambda e: e.cube.sort_key())
    family = SparseFamily(grid=grid, root=root, gamma=0.5, entries=tuple(entries))
    return family, stats


@dataclass(frozen=True, eq=False)
class LemmaReport:
    """Empirical constant of the localized pointwise bound.

    On the node's cells the truncated operator must be controlled by the
    pointwise input product plus the localized grand maximal gap; c_emp
    is the largest ratio of the leftover (gap already subtracted) to the
    input product, and the flag marks cells where the leftover survives
    with nothing in the denominator.
    """

    c_emp: float
    infinite_flag: bool
    argmax_cell: int | None

    def to_json_dict(self) -> dict:
        return {
            "c_emp": self.c_emp,
            "infinite_flag": self.infinite_flag,
            "argmax_cell": self.argmax_cell,
        }


def lemma_pointwise_check(
    op: OperatorSpec, fs, q0: DyadicCube, mode: CubeFamilyMode = DYADIC
) -> LemmaReport:
    """Measure max over cells x of Q0 of
    (|T(f chi_3Q0)(x)| - M_{T,Q0}(f)(x))_+ / |prod_i f_i(x)|."""
    fs = _check_inputs(op, fs)
    grid = op.grid
    if triple_cube(grid, q0).clipped:
        raise ValueError("the tripled node must fit inside the domain")
    idx = cube_flat_indices(grid, q0)
    tq = np.abs(_truncated_on_cells(op, fs, q0))
    if idx.size > 1:
        gap = local_grand_maximal(op, fs, q0, mode).values[idx]
    else:
        gap = np.zeros(1)
    num = np.maximum(tq - gap, 0.0)
    den = np.abs(fs[0].values[idx].copy())
    for f in fs[1:]:
        den *= np.abs(f.values[idx])
    scale = float(np.max(tq)) if idx.size else 0.0
    flag = bool(np.any((den == 0.0) & (num > 1e-12 * scale)))
    ratios = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
    best = int(np.argmax(ratios)) if ratios.size else None
    c_emp = float(ratios[best]) if ratios.size else 0.0
    return LemmaReport(
        c_emp=c_emp,
        infinite_flag=flag,
        argmax_cell=int(idx[best]) if best is not None else None,
    )


def _truncated_on_cells(op, fs, cube):
    from .operators import _apply_core

    xs = cube_flat_indices(op.grid, cube)
    return _apply_core(op, fs, xs, triple_cube(op.grid, cube))


@dataclass(frozen=True, eq=False)
class DominationReport:
    """Empirical sparse domination constant on the root cells."""

    c_emp: float
    argmax_cell: int
    support_flag: bool

    def to_json_dict(self) -> dict:
        return {"c_emp": self.c_emp, "argmax_cell": self.argmax_cell, "support_flag": self.support_flag}


def domination_constant(op: OperatorSpec, fs, family: SparseFamily, r: float) -> DominationReport:
    """Smallest constant with |T f| <= C * sparse form on the root cells.

    The support flag trips when the sparse form vanishes on a root cell
    where |T f| is not negligible (1e-12 of its largest value on the
    root), which would mean the family fails to see part of the output.
    An empty family yields zero with the flag set only if the operator
    output is itself nonzero.
    """
    fs = _check_inputs(op, fs)
    grid = op.grid
    tf = np.abs(apply(op, fs).values)
    sp = sparse_eval(family, fs, r).values
    idx = cube_flat_indices(grid, family.root)
    tf_root, sp_root = tf[idx], sp[idx]
    scale = float(np.max(tf_root)) if idx.size else 0.0
    covered = sp_root > 0.0
    flag = bool(np.any(~covered & (tf_root > 1e-12 * scale) & (tf_root > 0.0)))
    if np.any(covered):
        ratios = np.where(covered, tf_root / np.where(covered, sp_root, 1.0), 0.0)
        arg = int(np.argmax(ratios))
        return DominationReport(c_emp=float(ratios[arg]), argmax_cell=int(idx[arg]), support_flag=flag)
    return DominationReport(c_emp=0.0, argmax_cell=-1, support_flag=flag)
