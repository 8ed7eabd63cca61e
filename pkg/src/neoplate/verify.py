"""Empirical verification: multiplicity histograms, modulus-of-continuity
profiling, the injectivity threshold sweep, and branch-set area reports.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import cantor as cantor_mod
from .analytic_maps import (AnalyticMap, MobiusMap, PinchParams,
                            feasible_params, q_threshold)
from .energy import EnergyParams, QuadratureSpec, energy_analytic, eval_plmap_many
from .geometry import PLMap, Rect


def _map_domain(mapping):
    if isinstance(mapping, MobiusMap):
        return Rect(-1.0, 1.0, -1.0, 1.0), "disk"
    if isinstance(mapping, AnalyticMap):
        return mapping.domain, "rect"
    if isinstance(mapping, cantor_mod.BranchMap):
        s = mapping.domain if mapping.domain is not None else mapping.squares[0]
        return Rect(s.xmin, s.xmax, s.ymin, s.ymax), "rect"
    if isinstance(mapping, PLMap):
        return mapping.mesh.rect, "rect"
    raise TypeError(f"unsupported map type {type(mapping)!r}")


def _eval_many(mapping, xs, ys):
    if isinstance(mapping, PLMap):
        return eval_plmap_many(mapping, xs, ys)
    return mapping.eval_many(xs, ys)


@dataclass
class MultiplicityHistogram:
    source_samples: int
    target_cells: int
    counts: dict = field(default_factory=dict)  # multiplicity -> cell count
    fraction_N1: float = 0.0

    @property
    def covered_cells(self) -> int:
        return sum(c for n, c in self.counts.items() if n >= 1)


def injectivity_count(mapping, source_samples: int, target_cells: int) -> MultiplicityHistogram:
    """Forward-rasterized multiplicity histogram.

    A source grid is pushed forward and binned into target cells; the
    multiplicity of a cell is the number of grid-adjacency-connected
    preimage components among the samples landing in it.
    """
    if source_samples < 2 * target_cells:
        raise ValueError("need source resolution >= 2x the target cells")
    rect, shape = _map_domain(mapping)
    ns, nc = source_samples, target_cells
    xs = rect.xmin + (np.arange(ns) + 0.5) * rect.width / ns
    ys = rect.ymin + (np.arange(ns) + 0.5) * rect.height / ns
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    X, Y = X.ravel(), Y.ravel()
    valid = np.ones(X.shape, bool)
    if shape == "disk":
        valid = X * X + Y * Y <= 1.0
    U = np.full_like(X, np.nan)
    V = np.full_like(Y, np.nan)
    U[valid], V[valid] = _eval_many(mapping, X[valid], Y[valid])

    ci = np.clip(((U - rect.xmin) / rect.width * nc).astype(int), 0, nc - 1)
    cj = np.clip(((V - rect.ymin) / rect.height * nc).astype(int), 0, nc - 1)
    cell = np.where(valid, ci * nc + cj, -1)
    cell_grid = cell.reshape(ns, ns)

    # edges between adjacent samples with the same (valid) cell id
    idx = np.arange(ns * ns).reshape(ns, ns)
    rows, cols = [], []
    hm = (cell_grid[:-1, :] == cell_grid[1:, :]) & (cell_grid[:-1, :] >= 0)
    rows.append(idx[:-1, :][hm])
    cols.append(idx[1:, :][hm])
    vm = (cell_grid[:, :-1] == cell_grid[:, 1:]) & (cell_grid[:, :-1] >= 0)
    rows.append(idx[:, :-1][vm])
    cols.append(idx[:, 1:][vm])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    g = coo_matrix((np.ones(len(rows), bool), (rows, cols)), shape=(ns * ns, ns * ns))
    ncomp, labels = connected_components(g, directed=False)

    occupied = cell >= 0
    comp_cell = np.full(ncomp, -1, dtype=np.int64)
    comp_cell[labels[occupied]] = cell[occupied]
    live = comp_cell >= 0
    per_cell = np.bincount(comp_cell[live], minlength=nc * nc)
    mult, freq = np.unique(per_cell[per_cell > 0], return_counts=True)
    counts = {int(m): int(f) for m, f in zip(mult, freq)}
    covered = int(freq.sum())
    counts[0] = nc * nc - covered  # cells the image misses
    frac = counts.get(1, 0) / covered if covered else 0.0
    return MultiplicityHistogram(
        source_samples=ns, target_cells=nc, counts=counts, fraction_N1=frac)


@dataclass
class ModulusReport:
    pair_count: int
    table: list                       # (delta, empirical omega(delta)) rows
    fitted_constant: float
    dirichlet_energy: float


def modulus_profile(mapping, pair_samples: int = 20000, delta_bins: int = 20,
                    seed: int = 0, dirichlet: float | None = None) -> ModulusReport:
    """Empirical modulus of continuity and the smallest constant C making
    |h(x1)-h(x2)|^2 <= C * Dirichlet / log(1 + diam/|x1-x2|) hold on the sample."""
    rect, shape = _map_domain(mapping)
    rng = np.random.default_rng(seed)
    n = 2 * pair_samples
    if shape == "disk":
        r = np.sqrt(rng.uniform(0.0, 1.0, n))
        th = rng.uniform(0.0, 2.0 * np.pi, n)
        px, py = r * np.cos(th), r * np.sin(th)
        diam = 2.0
    else:
        px = rng.uniform(rect.xmin, rect.xmax, n)
        py = rng.uniform(rect.ymin, rect.ymax, n)
        diam = rect.diameter
    u, v = _eval_many(mapping, px, py)
    d = np.hypot(px[0::2] - px[1::2], py[0::2] - py[1::2])
    D = np.hypot(u[0::2] - u[1::2], v[0::2] - v[1::2])
    keep = d > 0
    d, D = d[keep], D[keep]
    if len(d) == 0:
        raise ValueError("degenerate sampling: no distinct pairs")

    order = np.argsort(d)
    d_sorted = d[order]
    omega_sorted = np.maximum.accumulate(D[order])
    deltas = np.quantile(d_sorted, np.linspace(0.02, 1.0, delta_bins))
    table = []
    for delta in deltas:
        k = np.searchsorted(d_sorted, delta, side="right")
        if k == 0:
            continue
        table.append((float(delta), float(omega_sorted[k - 1])))

    if dirichlet is None:
        dirichlet = energy_analytic(
            mapping, EnergyParams(p=2.0, q=1.0), QuadratureSpec()).gradient_term
    C = float(np.max(D ** 2 * np.log1p(diam / d)) / dirichlet)
    return ModulusReport(pair_count=len(d), table=table,
                         fitted_constant=C, dirichlet_energy=dirichlet)


@dataclass
class ThresholdRow:
    p: float
    q: float
    q_threshold: float
    feasible: bool
    witness: PinchParams | None
    energy_status: str = ""       # converged/divergent at the witness
    probe_status: str = ""        # status just across the boundary


def infeasible_probe(p: float, q: float, margin: float = 0.05) -> PinchParams:
    """Pinch parameters with a + b = 1/q + margin (barrier non-integrable)."""
    a = -1.0 / p + 0.25 * (1.0 / p)
    b = 1.0 / q + margin - a
    return PinchParams(a=a, b=b, p=p, q=q)


def threshold_sweep(ps, qs, with_energy: bool = False,
                    spec: QuadratureSpec = QuadratureSpec()) -> list:
    """Feasibility table over a (p, q) grid; optional quadrature statuses."""
    from .analytic_maps import PinchMap
    rows = []
    for p in ps:
        if p <= 2:
            raise ValueError(f"threshold sweep requires p > 2, got {p}")
        for q in qs:
            thr = q_threshold(p)
            witness = feasible_params(p, q)
            row = ThresholdRow(p=p, q=q, q_threshold=thr,
                               feasible=witness is not None, witness=witness)
            if with_energy and witness is not None:
                rep = energy_analytic(PinchMap(witness), EnergyParams(p, q), spec)
                row.energy_status = "converged" if rep.converged else (
                    "divergent" if rep.diverged else "inconclusive")
                probe = infeasible_probe(p, q)
                prep = energy_analytic(PinchMap(probe), EnergyParams(p, q), spec)
                row.probe_status = "divergent" if prep.diverged else (
                    "converged" if prep.converged else "inconclusive")
            rows.append(row)
    return rows


@dataclass
class BranchAreaReport:
    depth: int
    measure_lower_bound: float
    sampled_points: int
    fixed_point_failures: int
    witness_pairs: list  # (point1, point2, common image) per gen-1 centersquare


def branch_area_report(cfg: cantor_mod.CantorConfig, params: PinchParams,
                       depth: int, samples: int = 10_000,
                       seed: int = 0, map_depth: int | None = None) -> BranchAreaReport:
    """Finite-depth branch-set evidence: area lower bound, exact fixed
    points on the surviving cornersquares, and collapsed-pair witnesses.

    The lower bound uses the full ``depth``; the square family grows as
    4^n, so the sampled map is truncated at ``map_depth`` (default
    min(depth, 5)).
    """
    if depth > cfg.max_depth:
        raise ValueError("depth exceeds configured max")
    lower = 1.0
    for k in range(1, depth + 1):
        lower *= (1.0 - cfg.eps_at(k)) ** 2

    if map_depth is None:
        map_depth = min(depth, 5)
    if map_depth > depth:
        raise ValueError("map_depth cannot exceed depth")
    bmap = cantor_mod.cantor_branch_map(cfg, params, map_depth)
    fam = cantor_mod.generation(map_depth, cfg)
    rng = np.random.default_rng(seed)
    sq_idx = rng.integers(0, len(fam.squares), samples)
    ux = rng.uniform(0.0, 1.0, samples)
    uy = rng.uniform(0.0, 1.0, samples)
    xs = np.array([fam.squares[i].xmin for i in sq_idx]) \
        + ux * np.array([fam.squares[i].side for i in sq_idx])
    ys = np.array([fam.squares[i].ymin for i in sq_idx]) \
        + uy * np.array([fam.squares[i].side for i in sq_idx])
    us, vs = bmap.eval_many(xs, ys)
    failures = int(np.sum((us != xs) | (vs != ys)))

    witnesses = []
    gen1 = cantor_mod.centersquares_up_to(1, cfg)
    for s in gen1:
        i = next(j for j, t in enumerate(bmap.squares)
                 if t.center == s.center and t.side == s.side)
        p1, p2 = bmap.pinch_segment(i)
        # stay strictly inside the collapsed segment
        p1 = 0.5 * (p1 + np.asarray(s.center))
        p2 = 0.5 * (p2 + np.asarray(s.center))
        im1 = bmap.eval(p1)
        im2 = bmap.eval(p2)
        if not np.allclose(im1, im2, atol=1e-12):
            raise AssertionError("expected a collapsed pair in the centersquare")
        witnesses.append((p1, p2, im1))
    return BranchAreaReport(
        depth=depth,
        measure_lower_bound=lower,
        sampled_points=samples,
        fixed_point_failures=failures,
        witness_pairs=witnesses,
    )
