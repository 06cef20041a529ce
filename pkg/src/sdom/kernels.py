"""Kernel families and the regularity functionals measured on them.

A kernel is a pointwise formula ``K(x, y_1 .. y_m)`` on the grid's
ambient space.  The module ships a fixed set of variants (a zero
kernel, an x-independent smooth kernel, an odd homogeneous bilinear
kernel, a boundary-logarithmic convolution kernel with its comb-like
truncations, and a synthetic family built from a prescribed modulus of
continuity), plus a hook for custom callables.

On top of evaluation it provides the three regularity measurements the
rest of the package consumes: an annulus-sum smoothness constant taken
as a supremum over sampled cubes and point pairs, a shell-decay
constant with an explicit decay exponent, and the logarithmic integral
of a modulus of continuity.  Both cube-based estimators share one
sampling plan format and one report format, and both replace integrals
by midpoint-lattice sums at the grid's own resolution, so every
reported number is a finite, reproducible quadrature value, a lower
bound for the continuum quantity that sharpens as the grid refines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import GridSpec
from .parallel import parallel_map

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_LN2 = math.log(2.0)

# Product point sets are evaluated in fixed-size blocks: constant chunking
# keeps summation order independent of memory pressure and thread count.
_CHUNK = 1 << 18
_MAX_PRODUCT_POINTS = 1 << 24


class SingularPointError(ValueError):
    """A kernel was evaluated exactly on its singular set."""


@dataclass(frozen=True)
class Modulus:
    """A modulus of continuity on [0, 1].

    ``power`` is c * t**eps; ``log`` is c * log(e/t)**-(1+eps), the
    borderline-integrable family.  ``custom`` wraps a vectorized
    callable.  All three vanish at t = 0.
    """

    kind: str
    c: float = 1.0
    eps: float = 1.0
    fn: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("power", "log", "custom"):
            raise ValueError(f"unknown modulus kind {self.kind!r}")
        if self.kind == "custom":
            if self.fn is None:
                raise ValueError("custom modulus needs a callable")
        else:
            if not (self.c > 0 and math.isfinite(self.c)):
                raise ValueError("modulus scale c must be positive and finite")
            if not (self.eps > 0 and math.isfinite(self.eps)):
                raise ValueError("modulus exponent eps must be positive and finite")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "custom":
            return np.asarray(self.fn(t), dtype=float)
        if self.kind == "power":
            with np.errstate(divide="ignore"):
                out = self.c * t ** self.eps
            return np.where(t > 0, out, 0.0)
        # log(e/t) written as 1 - log(t) so tiny t cannot overflow e/t
        u = 1.0 - np.log(np.where(t > 0, t, 1.0))
        out = self.c * u ** -(1.0 + self.eps)
        return np.where(t > 0, out, 0.0)

    def at_neg_log(self, s):
        """omega(e^-s) for s >= 0, stable for s far beyond the range
        where e^-s itself underflows."""
        s = np.asarray(s, dtype=float)
        if self.kind == "custom":
            return np.asarray(self.fn(np.exp(-s)), dtype=float)
        if self.kind == "power":
            with np.errstate(under="ignore"):
                return self.c * np.exp(-self.eps * s)
        return self.c * (1.0 + s) ** -(1.0 + self.eps)

    def to_json_dict(self) -> dict:
        if self.kind == "custom":
            raise ValueError("custom moduli are not serializable")
        return {"kind": self.kind, "c": self.c, "eps": self.eps}

    @classmethod
    def from_json_dict(cls, d: dict) -> "Modulus":
        return cls(kind=d["kind"], c=float(d.get("c", 1.0)), eps=float(d.get("eps", 1.0)))


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A kernel variant with its parameters.

    ``m`` is the number of input slots.  ``r_param`` is the exponent
    baked into the boundary-logarithmic formula itself; the estimators
    below take their own integrability exponent as an argument.
    """

    variant: str
    m: int
    beta: float | None = None
    r_param: float | None = None
    ell: int | None = None
    modulus: Modulus | None = None
    amplitude: float = 1.0
    fn: Callable | None = None
    support: tuple | None = None

    def to_json_dict(self) -> dict:
        if self.variant == "custom":
            raise ValueError("custom kernels are not serializable")
        d = {"variant": self.variant, "m": self.m}
        if self.variant in ("mpt", "mpt_truncated"):
            d["beta"] = self.beta
            d["r"] = self.r_param
        if self.variant == "mpt_truncated":
            d["ell"] = self.ell
        if self.variant == "dini_synthetic":
            d["modulus"] = self.modulus.to_json_dict()
            d["amplitude"] = self.amplitude
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "KernelSpec":
        variant = d["variant"]
        m = int(d["m"])
        if variant == "zero":
            return zero_kernel(m)
        if variant == "x_independent":
            return x_independent_kernel(m)
        if variant == "bilinear_odd":
            return bilinear_odd_kernel()
        if variant == "mpt":
            return mpt_kernel(float(d["beta"]), float(d["r"]))
        if variant == "mpt_truncated":
            return mpt_truncated_kernel(float(d["beta"]), float(d["r"]), int(d["ell"]))
        if variant == "dini_synthetic":
            return dini_synthetic_kernel(
                Modulus.from_json_dict(d["modulus"]), m, float(d.get("amplitude", 1.0))
            )
        raise ValueError(f"unknown kernel variant {variant!r}")


def zero_kernel(m: int) -> KernelSpec:
    _check_m(m)
    return KernelSpec("zero", m)


def x_independent_kernel(m: int) -> KernelSpec:
    """A smooth kernel with no x dependence, so every difference
    K(x, .) - K(z, .) vanishes identically."""
    _check_m(m)
    return KernelSpec("x_independent", m)


def bilinear_odd_kernel() -> KernelSpec:
    """K(x, y1, y2) = ((x-y1) + (x-y2)) / (|x-y1|^2 + |x-y2|^2)^{3/2}.

    Odd, homogeneous of degree -2, singular only at y1 = y2 = x.  One
    ambient dimension, two slots.
    """
    return KernelSpec("bilinear_odd", 2)


def mpt_kernel(beta: float, r: float) -> KernelSpec:
    """Convolution kernel |t-4|^{-1/r'} log(e/|t-4|)^{-(1+beta)/r'} on 3<t<5.

    ``t`` is x - y in one dimension.  The blowup sits on the sphere
    |t| = 4 away from the diagonal, tuned so the annulus-sum constant at
    exponent r is finite while stronger pointwise bounds fail.
    """
    _check_mpt(beta, r)
    return KernelSpec("mpt", 1, beta=float(beta), r_param=float(r))


def mpt_truncated_kernel(beta: float, r: float, ell: int) -> KernelSpec:
    """The boundary-logarithmic kernel restricted to a comb of 2^{ell+1}
    teeth: t in (3 + k 2^-ell, 3 + (3k+1)/(3 2^ell)] for 0 <= k < 2^{ell+1}.

    Each tooth keeps the left third of its dyadic slot, left-open and
    right-closed.  The comb oscillates at scale 2^-ell, which drives the
    shell-decay constant up while the annulus-sum constant stays level.
    """
    _check_mpt(beta, r)
    if not isinstance(ell, int) or ell < 0:
        raise ValueError("truncation index ell must be a nonnegative integer")
    return KernelSpec("mpt_truncated", 1, beta=float(beta), r_param=float(r), ell=ell)


def dini_synthetic_kernel(modulus: Modulus, m: int, amplitude: float = 1.0) -> KernelSpec:
    """A kernel whose x-oscillation follows a prescribed modulus.

    K(x, y) = amplitude * omega(tent(log2 D)) / D^{mn} where D is the
    sum of slot distances and tent is the 1-periodic tent map, so the
    kernel has size D^{-mn} and smoothness exactly of order omega.
    """
    _check_m(m)
    if not isinstance(modulus, Modulus):
        raise TypeError("modulus must be a Modulus")
    if not (amplitude > 0 and math.isfinite(amplitude)):
        raise ValueError("amplitude must be positive and finite")
    return KernelSpec("dini_synthetic", m, modulus=modulus, amplitude=float(amplitude))


def custom_kernel(fn: Callable, m: int, support: tuple | None = None) -> KernelSpec:
    """Wrap a callable ``fn(x, Y) -> values`` evaluated pointwise.

    ``x`` is a length-n array and ``Y`` an (m, n) array.  Non-finite
    return values are treated as singular points.  ``support`` may give
    a per-slot y-box (lo, hi) outside which the kernel vanishes.
    """
    _check_m(m)
    if not callable(fn):
        raise TypeError("custom kernel needs a callable")
    return KernelSpec("custom", m, fn=fn, support=support)


def _check_m(m):
    if m not in (1, 2):
        raise ValueError("only 1 or 2 input slots are supported")


def _check_mpt(beta, r):
    if not (beta > 0 and math.isfinite(beta)):
        raise ValueError("beta must be positive and finite")
    if not (r >= 1 and math.isfinite(r)):
        raise ValueError("kernel exponent r must satisfy r >= 1")


def eval_batch(spec: KernelSpec, x: np.ndarray, Y: np.ndarray):
    """Evaluate K(x, .) on a batch of slot tuples.

    Parameters
    ----------
    x : (n,) point.
    Y : (batch, m, n) slot tuples.

    Returns
    -------
    vals : (batch,) float array, zero where invalid.
    valid : (batch,) bool array, False exactly on singular set hits
        (any slot equal to x), kernel-specific singularities, and
        non-finite evaluations.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 3 or Y.shape[1] != spec.m or Y.shape[2] != x.size:
        raise ValueError("Y must have shape (batch, m, n) matching x")
    vals, valid = _eval_values(spec, x, Y)
    diag = np.any(np.all(Y == x[None, None, :], axis=2), axis=1)
    valid = valid & ~diag
    return np.where(valid, vals, 0.0), valid


def _eval_values(spec: KernelSpec, x: np.ndarray, Y: np.ndarray):
    batch = Y.shape[0]
    if spec.variant == "zero":
        return np.zeros(batch), np.ones(batch, dtype=bool)
    if spec.variant == "x_independent":
        vals = np.exp(-np.sum(Y * Y, axis=(1, 2)))
        return vals, np.ones(batch, dtype=bool)
    if spec.variant == "bilinear_odd":
        if x.size != 1:
            raise ValueError("the odd bilinear kernel lives in one ambient dimension")
        u = x[0] - Y[:, :, 0]
        den = np.sum(u * u, axis=1)
        valid = den > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.sum(u, axis=1) / den ** 1.5
        return np.where(valid, vals, 0.0), valid
    if spec.variant in ("mpt", "mpt_truncated"):
        if x.size != 1:
            raise ValueError("the boundary-logarithmic kernel lives in one ambient dimension")
        t = x[0] - Y[:, 0, 0]
        return _mpt_values(spec, t)
    if spec.variant == "dini_synthetic":
        diff = x[None, None, :] - Y
        D = np.sum(np.sqrt(np.sum(diff * diff, axis=2)), axis=1)
        valid = D > 0.0
        Dsafe = np.where(valid, D, 1.0)
        frac = np.log2(Dsafe)
        frac -= np.floor(frac)
        tent = 2.0 * np.minimum(frac, 1.0 - frac)
        mn = spec.m * x.size
        vals = spec.amplitude * spec.modulus(tent) / Dsafe ** mn
        return np.where(valid, vals, 0.0), valid
    if spec.variant == "custom":
        vals = np.empty(batch)
        for i in range(batch):
            vals[i] = spec.fn(x, Y[i])
        valid = np.isfinite(vals)
        return np.where(valid, vals, 0.0), valid
    raise ValueError(f"unknown kernel variant {spec.variant!r}")


def _mpt_values(spec: KernelSpec, t: np.ndarray):
    s = np.abs(t - 4.0)
    live = (t > 3.0) & (t < 5.0)
    if spec.variant == "mpt_truncated":
        # tooth k keeps (3 + k/2^ell, 3 + (3k+1)/(3 2^ell)]; the floor
        # lands on k, and the left-open end drops out automatically
        # because t = 3 + k/2^ell fails the strict lower comparison.
        # t = 4 sits on an open tooth endpoint, so the comb removes the
        # singular point and the truncation is bounded.
        scale = float(1 << spec.ell)
        k = np.floor((t - 3.0) * scale)
        in_tooth = (t > 3.0 + k / scale) & (t <= 3.0 + (3.0 * k + 1.0) / (3.0 * scale))
        in_tooth &= (k >= 0) & (k < 2 * scale)
        live &= in_tooth
    valid = ~(live & (s == 0.0))
    live &= valid
    rp_inv = 1.0 - 1.0 / spec.r_param  # 1/r'
    ssafe = np.where(live, s, 1.0)
    vals = ssafe ** -rp_inv * np.log(np.e / ssafe) ** (-(1.0 + spec.beta) * rp_inv)
    return np.where(live, vals, 0.0), valid


def eval_kernel(spec: KernelSpec, x, ys) -> float:
    """Evaluate at one point, raising ``SingularPointError`` on the
    singular set.  ``ys`` is a sequence of m points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    Y = np.asarray([np.atleast_1d(np.asarray(y, dtype=float)) for y in ys], dtype=float)
    vals, valid = eval_batch(spec, x, Y[None, :, :])
    if not valid[0]:
        raise SingularPointError(f"kernel is singular at x={x.tolist()}, y={Y.tolist()}")
    return float(vals[0])


def y_support_box(spec: KernelSpec, grid: GridSpec):
    """Per-slot box (lo, hi) outside which K(x, .) vanishes for every x
    in the domain, or None when no bounded support is declared."""
    if spec.variant in ("mpt", "mpt_truncated"):
        o, side = grid.origin[0], grid.side
        return (np.array([o - 5.0]), np.array([o + side - 3.0]))
    if spec.variant == "zero":
        lo = np.array(grid.origin)
        return (lo, lo)  # empty-for-all-purposes box, any point works
    if spec.variant == "custom" and spec.support is not None:
        lo, hi = spec.support
        return (np.atleast_1d(np.asarray(lo, dtype=float)), np.atleast_1d(np.asarray(hi, dtype=float)))
    return None


def has_bounded_support(spec: KernelSpec) -> bool:
    return spec.variant in ("zero", "mpt", "mpt_truncated") or (
        spec.variant == "custom" and spec.support is not None
    )


@dataclass(frozen=True)
class SamplePlan:
    """Where a cube-based estimator looks.

    Either ``levels`` enumerates whole dyadic generations (with point
    pairs drawn from a depth-``pair_depth`` sublattice of each half
    cube, widest separations first, at most ``max_pairs`` per cube), or
    ``cubes`` and ``pairs`` give explicit (center, side) cubes zipped
    with explicit (x, z) pairs.
    """

    levels: tuple | None = None
    pair_depth: int = 2
    max_pairs: int = 16
    cubes: tuple | None = None
    pairs: tuple | None = None

    def __post_init__(self):
        if (self.levels is None) == (self.cubes is None):
            raise ValueError("exactly one of levels / explicit cubes must be given")
        if self.levels is not None:
            object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
            if len(self.levels) == 0:
                raise ValueError("levels must be nonempty")
            if self.pair_depth < 1 or self.max_pairs < 1:
                raise ValueError("pair_depth and max_pairs must be at least 1")
        else:
            if self.pairs is None or len(self.pairs) != len(self.cubes) or len(self.cubes) == 0:
                raise ValueError("explicit mode needs equal-length nonempty cubes and pairs")

    def to_json_dict(self) -> dict:
        if self.levels is not None:
            return {"levels": list(self.levels), "pair_depth": self.pair_depth, "max_pairs": self.max_pairs}
        return {
            "cubes": [[list(np.atleast_1d(c)), s] for c, s in self.cubes],
            "pairs": [[list(np.atleast_1d(x)), list(np.atleast_1d(z))] for x, z in self.pairs],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SamplePlan":
        if "levels" in d and d["levels"] is not None:
            return cls(
                levels=tuple(d["levels"]),
                pair_depth=int(d.get("pair_depth", 2)),
                max_pairs=int(d.get("max_pairs", 16)),
            )
        cubes = tuple((tuple(c), float(s)) for c, s in d["cubes"])
        pairs = tuple((tuple(x), tuple(z)) for x, z in d["pairs"])
        return cls(cubes=cubes, pairs=pairs)


@dataclass(frozen=True, eq=False)
class EstimateReport:
    """Result of a cube-based regularity estimate.

    ``value`` equals the sum of ``terms`` (the per-scale series of the
    maximizing sample).  ``k_max`` is the number of scales that carried
    mass there.  ``tail_flag`` records that the kernel support is
    unbounded so the quadrature stopped at the domain.  ``skipped``
    counts lattice evaluations discarded for landing on the singular
    set, plus degenerate x = z samples.
    """

    value: float
    terms: tuple
    k_max: int
    tail_flag: bool
    skipped: int
    samples: dict

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "terms": list(self.terms),
            "k_max": self.k_max,
            "tail_flag": self.tail_flag,
            "skipped": self.skipped,
            "samples": dict(self.samples),
        }


def enumerate_plan(plan: SamplePlan, grid: GridSpec) -> list:
    """Expand a plan into (center, side, x, z) sample configurations."""
    configs = []
    if plan.cubes is not None:
        for (c, side), (x, z) in zip(plan.cubes, plan.pairs):
            center = np.atleast_1d(np.asarray(c, dtype=float))
            x = np.atleast_1d(np.asarray(x, dtype=float))
            z = np.atleast_1d(np.asarray(z, dtype=float))
            if center.size != grid.n or x.size != grid.n or z.size != grid.n:
                raise ValueError("explicit cube/pair dimension does not match the grid")
            side = float(side)
            if side <= 0:
                raise ValueError("explicit cube side must be positive")
            for p in (x, z):
                if np.any(np.abs(p - center) > side / 4 + 1e-12 * side):
                    raise ValueError("sample points must lie in the concentric half cube")
            configs.append((center, side, x, z))
        return configs
    for lam in plan.levels:
        if not 0 <= lam <= grid.L:
            raise ValueError(f"plan level {lam} outside [0, {grid.L}]")
        side = grid.side / (1 << lam)
        sub = 1 << plan.pair_depth
        # candidate points: centers of the depth-d sublattice of the
        # concentric half cube
        offsets = -side / 4 + (np.arange(sub) + 0.5) * side / (2 * sub)
        for idx in np.ndindex(*(1 << lam,) * grid.n):
            center = np.array([grid.origin[a] + (idx[a] + 0.5) * side for a in range(grid.n)])
            pts = [center + np.array([offsets[o[a]] for a in range(grid.n)]) for o in np.ndindex(*(sub,) * grid.n)]
            cand = []
            for i in range(len(pts)):
                for j in range(i + 1, len(pts)):
                    d2 = float(np.sum((pts[i] - pts[j]) ** 2))
                    cand.append((-d2, tuple(pts[i]), tuple(pts[j])))
            cand.sort()
            for _, px, pz in cand[: plan.max_pairs]:
                configs.append((center, side, np.array(px), np.array(pz)))
    return configs


def _lattice_axis(grid: GridSpec, axis: int, lo: float, hi: float) -> np.ndarray:
    """Midpoint-lattice coordinates origin + h (i + 1/2) inside [lo, hi),
    extending beyond the domain when the box does."""
    o, h = grid.origin[axis], grid.h
    i_lo = math.ceil((lo - o) / h - 0.5)
    i_hi = math.ceil((hi - o) / h - 0.5)
    return o + h * (np.arange(i_lo, i_hi) + 0.5)


def _quad_points(spec: KernelSpec, grid: GridSpec):
    """Quadrature lattice: the grid domain, extended to the kernel's
    declared support box when there is one.  Returns (points (N, n),
    covers_all) where covers_all is False for unbounded supports."""
    sup = y_support_box(spec, grid)
    los = list(grid.origin)
    his = [grid.origin[a] + grid.side for a in range(grid.n)]
    if sup is not None:
        lo, hi = sup
        los = [min(los[a], float(lo[a])) for a in range(grid.n)]
        his = [max(his[a], float(hi[a])) for a in range(grid.n)]
    axes = [_lattice_axis(grid, a, los[a], his[a]) for a in range(grid.n)]
    if grid.n == 1:
        pts = axes[0][:, None]
    else:
        A, B = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.column_stack([A.ravel(), B.ravel()])
    return pts, has_bounded_support(spec)


def _box_mask(pts: np.ndarray, center: np.ndarray, half: float) -> np.ndarray:
    """Half-open membership in center +- half per axis."""
    return np.all((pts >= center - half) & (pts < center + half), axis=1)


def _delta_single(spec, x, z, pts):
    """(K(x,.) - K(z,.), valid) on a point set for m = 1."""
    Y = pts[:, None, :]
    vx, okx = eval_batch(spec, x, Y)
    vz, okz = eval_batch(spec, z, Y)
    ok = okx & okz
    return np.where(ok, vx - vz, 0.0), ok


def _delta_matrix(spec, x, z, pts):
    """Full |ΔK| matrix over pts x pts for m = 2, chunked row blocks."""
    N = pts.shape[0]
    if N * N > _MAX_PRODUCT_POINTS:
        raise ValueError("two-slot quadrature lattice too large; reduce grid depth")
    dk = np.empty((N, N))
    ok = np.empty((N, N), dtype=bool)
    rows = max(1, _CHUNK // max(N, 1))
    for i0 in range(0, N, rows):
        i1 = min(N, i0 + rows)
        blk = i1 - i0
        Y = np.empty((blk * N, 2, pts.shape[1]))
        Y[:, 0, :] = np.repeat(pts[i0:i1], N, axis=0)
        Y[:, 1, :] = np.tile(pts, (blk, 1))
        vx, okx = eval_batch(spec, x, Y)
        vz, okz = eval_batch(spec, z, Y)
        good = okx & okz
        dk[i0:i1] = np.where(good, vx - vz, 0.0).reshape(blk, N)
        ok[i0:i1] = good.reshape(blk, N)
    return dk, ok


def _series_one_config(spec, grid, r, cfg, pts):
    """Annulus series for one (center, side, x, z) sample.

    Returns (terms, skipped).  Scale k covers the dilate 2^k Q minus
    2^{k-1} Q in every slot jointly; the loop stops once the inner
    dilate swallows the whole quadrature box.
    """
    center, side, x, z = cfg
    rp = r / (r - 1.0) if r > 1 else None
    hvol = grid.cell_volume()
    terms = []
    skipped = 0
    if spec.m == 2:
        dk, ok = _delta_matrix(spec, x, z, pts)
        absdk = np.abs(dk)
    k = 1
    while True:
        inner_half = 2.0 ** (k - 2) * side
        inner = _box_mask(pts, center, inner_half)
        if inner.all():
            break
        outer = _box_mask(pts, center, 2.0 ** (k - 1) * side)
        measure = (2.0 ** k * side) ** grid.n
        if spec.m == 1:
            region = outer & ~inner
            if region.any():
                dkr, okr = _delta_single(spec, x, z, pts[region])
                skipped += int(np.count_nonzero(~okr))
                if r > 1:
                    integral = float(np.sum(np.abs(dkr) ** rp)) * hvol
                    terms.append(measure ** (1.0 / r) * integral ** (1.0 / rp))
                else:
                    terms.append(measure * (float(np.max(np.abs(dkr))) if dkr.size else 0.0))
            else:
                terms.append(0.0)
        else:
            region = (outer[:, None] & outer[None, :]) & ~(inner[:, None] & inner[None, :])
            skipped += int(np.count_nonzero(region & ~ok))
            sel = region & ok
            if r > 1:
                integral = float(np.sum(absdk[sel] ** rp)) * hvol ** 2
                terms.append(measure ** (2.0 / r) * integral ** (1.0 / rp))
            else:
                terms.append(measure ** 2 * (float(np.max(absdk[sel])) if sel.any() else 0.0))
        k += 1
        if k > 80:
            raise RuntimeError("annulus series failed to terminate")
    while terms and terms[-1] == 0.0:
        terms.pop()
    return terms, skipped


def hormander_constant(spec: KernelSpec, grid: GridSpec, r: float, plan: SamplePlan) -> EstimateReport:
    """Annulus-sum smoothness constant at exponent r.

    For each sampled cube Q and pair x, z in the concentric half cube
    the series sums, over dilation scales k >= 1, the measure of 2^k Q
    to the power m/r times the r'-norm of K(x,.) - K(z,.) over the
    k-th annulus of slot tuples; at r = 1 the norm becomes an essential
    supremum and the measure power becomes m.  The report holds the
    largest series over all samples.

    Integrals are midpoint-lattice sums at the grid resolution over the
    domain extended to the kernel's declared support box, so the value
    is a quadrature approximation from below of the continuum constant.
    """
    if not (r >= 1 and math.isfinite(r)):
        raise ValueError("integrability exponent r must satisfy r >= 1")
    configs = enumerate_plan(plan, grid)
    if not configs:
        raise ValueError("sampling plan produced no samples")
    pts, bounded = _quad_points(spec, grid)

    kept = []
    skipped_pairs = 0
    for cfg in configs:
        if np.array_equal(cfg[2], cfg[3]):
            skipped_pairs += 1
        else:
            kept.append(cfg)
    if not kept:
        raise ValueError("all sampled pairs were degenerate (x = z)")

    results = parallel_map(lambda cfg: _series_one_config(spec, grid, r, cfg, pts), kept)
    best_i = 0
    best_v = -1.0
    skipped = skipped_pairs
    for i, (terms, sk) in enumerate(results):
        skipped += sk
        v = float(np.sum(np.array(terms))) if terms else 0.0
        if v > best_v:
            best_i, best_v = i, v
    terms = tuple(results[best_i][0])
    n_cubes = len({(tuple(c), s) for c, s, _, _ in configs})
    return EstimateReport(
        value=max(best_v, 0.0),
        terms=terms,
        k_max=len(terms),
        tail_flag=not bounded,
        skipped=skipped,
        samples={"cubes": n_cubes, "pairs": len(configs)},
    )


def _shells_one_config(spec, grid, r, delta, cfg, pts):
    """Largest normalized shell value for one sample; see h2_constant."""
    center, side, x, z = cfg
    n = grid.n
    rp = r / (r - 1.0) if r > 1 else None
    hvol = grid.cell_volume()
    dist = float(np.sqrt(np.sum((x - z) ** 2)))
    qmeasure = side ** n

    # shell j = 0 is Q itself; j >= 1 is the dyadic annulus
    shells = []
    j = 0
    while True:
        if j == 0:
            mask = _box_mask(pts, center, side / 2)
        else:
            inner_half = 2.0 ** (j - 2) * side
            if _box_mask(pts, center, inner_half).all():
                break
            mask = _box_mask(pts, center, 2.0 ** (j - 1) * side) & ~_box_mask(pts, center, inner_half)
        shells.append(mask)
        j += 1
        if j > 80:
            raise RuntimeError("shell enumeration failed to terminate")

    best = 0.0
    best_j0 = 0
    skipped = 0
    if spec.m == 1:
        for j in range(1, len(shells)):
            if not shells[j].any():
                continue
            dkr, okr = _delta_single(spec, x, z, pts[shells[j]])
            skipped += int(np.count_nonzero(~okr))
            if r > 1:
                lhs = (float(np.sum(np.abs(dkr) ** rp)) * hvol) ** (1.0 / rp)
            else:
                lhs = float(np.max(np.abs(dkr))) if dkr.size else 0.0
            val = lhs * qmeasure ** (delta / n) * 2.0 ** (delta * j) / dist ** (delta - n / r)
            if val > best:
                best, best_j0 = val, j
    else:
        dk, ok = _delta_matrix(spec, x, z, pts)
        absdk = np.abs(dk)
        J = len(shells)
        for j1 in range(J):
            for j2 in range(J):
                if j1 == 0 and j2 == 0:
                    continue
                sel = shells[j1][:, None] & shells[j2][None, :]
                skipped += int(np.count_nonzero(sel & ~ok))
                sel &= ok
                if r > 1:
                    lhs = (float(np.sum(absdk[sel] ** rp)) * hvol ** 2) ** (1.0 / rp)
                else:
                    lhs = float(np.max(absdk[sel])) if sel.any() else 0.0
                j0 = max(j1, j2)
                val = (
                    lhs
                    * qmeasure ** (2.0 * delta / n)
                    * 2.0 ** (2.0 * delta * j0)
                    / dist ** (2.0 * (delta - n / r))
                )
                if val > best:
                    best, best_j0 = val, j0
    return best, best_j0, skipped


def h2_constant(spec: KernelSpec, grid: GridSpec, r: float, delta: float, plan: SamplePlan) -> EstimateReport:
    """Shell-decay constant at exponent r and decay order delta.

    For each sampled cube, pair, and nonzero shell multi-index the
    r'-norm of K(x,.) - K(z,.) over the product of shells is divided by
    |x-z|^{m(delta - n/r)} |Q|^{-m delta/n} 2^{-m delta j0}, with j0 the
    deepest shell involved; the reported value is the largest quotient,
    the smallest constant making the shell-decay bound hold on the
    sampled set.  ``delta`` must exceed n/r for the bound to be
    meaningful, and at r = 1 the norm is an essential supremum.
    """
    if not (r >= 1 and math.isfinite(r)):
        raise ValueError("integrability exponent r must satisfy r >= 1")
    if not (delta > grid.n / r):
        raise ValueError("decay order delta must exceed n/r")
    configs = enumerate_plan(plan, grid)
    if not configs:
        raise ValueError("sampling plan produced no samples")
    pts, bounded = _quad_points(spec, grid)

    kept = []
    skipped_pairs = 0
    for cfg in configs:
        if np.array_equal(cfg[2], cfg[3]):
            skipped_pairs += 1
        else:
            kept.append(cfg)
    if not kept:
        raise ValueError("all sampled pairs were degenerate (x = z)")

    results = parallel_map(lambda cfg: _shells_one_config(spec, grid, r, delta, cfg, pts), kept)
    best = 0.0
    best_j0 = 0
    skipped = skipped_pairs
    for v, j0, sk in results:
        skipped += sk
        if v > best:
            best, best_j0 = v, j0
    n_cubes = len({(tuple(c), s) for c, s, _, _ in configs})
    return EstimateReport(
        value=best,
        terms=(best,),
        k_max=best_j0,
        tail_flag=not bounded,
        skipped=skipped,
        samples={"cubes": n_cubes, "pairs": len(configs)},
    )


def omega_profile(spec: KernelSpec, grid: GridSpec, x, z, t_grid: Sequence[float]) -> list:
    """Oscillation profile of the kernel between two fixed points.

    For each t the value is the largest |K(x, y) - K(z, y)| times
    (sum of slot distances)^{mn} over grid-cell-center tuples y in the
    shell t/2 <= |x-z| / sum_i |x-y_i| <= t, zero when the shell holds
    no tuple.  Requires x != z and t in (0, 1].
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    dist = float(np.sqrt(np.sum((x - z) ** 2)))
    if dist == 0.0:
        raise ValueError("profile requires two distinct points")
    t_arr = [float(t) for t in t_grid]
    if any(not (0.0 < t <= 1.0) for t in t_arr):
        raise ValueError("profile scales must lie in (0, 1]")
    axes = [grid.axis_centers(a) for a in range(grid.n)]
    if grid.n == 1:
        pts = axes[0][:, None]
    else:
        A, B = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.column_stack([A.ravel(), B.ravel()])
    N = pts.shape[0]
    mn = spec.m * grid.n
    if spec.m == 1:
        dk, ok = _delta_single(spec, x, z, pts)
        D = np.sqrt(np.sum((pts - x[None, :]) ** 2, axis=1))
        osc = np.abs(dk) * D ** mn
    else:
        if N * N > _MAX_PRODUCT_POINTS:
            raise ValueError("profile lattice too large; reduce grid depth")
        dk, ok = _delta_matrix(spec, x, z, pts)
        d1 = np.sqrt(np.sum((pts - x[None, :]) ** 2, axis=1))
        D = d1[:, None] + d1[None, :]
        osc = np.abs(dk) * D ** mn
    out = []
    for t in t_arr:
        shell = (D >= dist / t) & (D <= 2.0 * dist / t) & ok
        out.append(float(np.max(osc[shell])) if shell.any() else 0.0)
    return out


def dini_norm(modulus, tol: float = 1e-7, max_brackets: int = 400000) -> float:
    """Logarithmic integral of a modulus over (0, 1).

    Integrates omega(t)/t with 16-point Gauss-Legendre quadrature on
    each dyadic bracket [2^-(k+1), 2^-k] in log coordinates, stopping
    once the single-bracket bound omega(2^-K) log 2 falls below ``tol``
    times the running sum.  A modulus that decays too slowly for the
    rule to fire within ``max_brackets`` brackets raises ValueError
    (the integral is judged divergent).  The modulus must vanish at 0
    and be nonnegative and nondecreasing; violations raise ValueError.

    Parametric ``Modulus`` instances are evaluated in log coordinates,
    so the bracket depth is not limited by floating-point underflow of
    t itself.  A bare callable is sampled at t = e^-s and must let the
    stop rule fire before t leaves the positive float range; otherwise
    the tail cannot be certified and ValueError is raised.
    """
    om = modulus if callable(modulus) else None
    if om is None:
        raise TypeError("modulus must be callable")
    v0 = float(np.asarray(om(0.0)))
    if v0 != 0.0:
        raise ValueError("modulus must vanish at t = 0")
    stable = isinstance(modulus, Modulus) and modulus.kind != "custom"

    def at_sigma(sig):
        # (values, evaluable) at t = e^-sig
        if stable:
            return modulus.at_neg_log(sig), np.ones(sig.shape, dtype=bool)
        with np.errstate(under="ignore"):
            t = np.exp(-sig)
        return np.asarray(om(t), dtype=float), t > 0.0

    first = float(np.asarray(om(1.0)))
    if not np.isfinite(first) or first < 0:
        raise ValueError("modulus must be finite and nonnegative on (0, 1]")
    chunk = 2048
    total = 0.0
    k = 0
    while k < max_brackets:
        ks = np.arange(k, min(k + chunk, max_brackets))
        sig = (ks[:, None] + 0.5) * _LN2 - (_LN2 / 2.0) * _GL_NODES[None, :]
        vals, ok = at_sigma(sig)
        ends, ok_e = at_sigma((ks + 1.0) * _LN2)
        starts, ok_s = at_sigma(ks.astype(float) * _LN2)
        good = ok.all(axis=1) & ok_e & ok_s
        limit = len(ks) if bool(good.all()) else int(np.argmin(good))
        vals, ends, starts = vals[:limit], ends[:limit], starts[:limit]
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("modulus must be finite and nonnegative on (0, 1]")
        # monotonicity spot check at bracket endpoints
        if np.any(ends > starts * (1.0 + 1e-12) + 1e-300):
            raise ValueError("modulus must be nondecreasing on (0, 1]")
        sums = (vals * _GL_WEIGHTS[None, :]).sum(axis=1) * (_LN2 / 2.0)
        running = total + np.cumsum(sums)
        stop = ends * _LN2 < tol * running
        if np.any(stop):
            i = int(np.argmax(stop))
            return float(running[i])
        if limit < len(ks):
            raise ValueError(
                "modulus tail cannot be evaluated below the floating-point range"
            )
        total = float(running[-1])
        k += len(ks)
    raise ValueError("modulus is not integrable against dt/t (tail did not converge)")
