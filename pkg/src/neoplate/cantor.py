"""Cornersquare Cantor construction and the branch map built on it.

Starting from a base square, each generation removes a concentric
centersquare (relative size eps_n) and a cross-shaped frame from every
square, keeping the four corner-touching subsquares.  The limit set has
positive area; the branch map acts as a rescaled model map inside every
removed centersquare and as the identity elsewhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .analytic_maps import BIG_SQUARE, ModelPhi, PinchParams, RescaledMap


def default_eps(n: int) -> float:
    """Default shrink parameters eps_n = 4^{-n} (n >= 1)."""
    return 4.0 ** (-n)


@dataclass(frozen=True)
class Square:
    """Closed axis-aligned square; multi_index records the corner choices
    ('++', '+-', ...) made at each generation."""

    center: tuple
    side: float
    multi_index: str = ""

    def __post_init__(self):
        if self.side <= 0:
            raise ValueError("square side must be positive")

    @property
    def area(self) -> float:
        return self.side * self.side

    @property
    def xmin(self):
        return self.center[0] - self.side / 2.0

    @property
    def xmax(self):
        return self.center[0] + self.side / 2.0

    @property
    def ymin(self):
        return self.center[1] - self.side / 2.0

    @property
    def ymax(self):
        return self.center[1] + self.side / 2.0

    def contains_halfopen(self, x, y) -> bool:
        """Half-open membership [xmin, xmax) x [ymin, ymax) for dispatch."""
        return self.xmin <= x < self.xmax and self.ymin <= y < self.ymax

    def contains_closed(self, x, y) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def overlaps(self, other: "Square") -> bool:
        return (self.xmin < other.xmax and other.xmin < self.xmax
                and self.ymin < other.ymax and other.ymin < self.ymax)


@dataclass(frozen=True)
class CantorConfig:
    eps: Callable[[int], float] = default_eps
    base: Square = Square(center=(0.5, 0.5), side=1.0)
    max_depth: int = 30

    def eps_at(self, n: int) -> float:
        e = self.eps(n)
        if not 0.0 <= e < 1.0:
            raise ValueError(f"eps_{n} = {e} outside [0, 1)")
        return e


@dataclass
class SquareFamily:
    generation: int
    squares: list

    @property
    def total_area(self) -> float:
        return sum(s.area for s in self.squares)


def cornersquares(sq: Square, eps: float):
    """Four corner subsquares plus the concentric centersquare.

    Corner squares have side (1-eps)/2 * side and touch the corners of
    ``sq``; the centersquare is concentric with side eps * side.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    s = 0.5 * (1.0 - eps) * sq.side
    off = 0.5 * sq.side - 0.5 * s
    cx, cy = sq.center
    corners = [
        Square((cx + off, cy + off), s, sq.multi_index + "++"),
        Square((cx - off, cy + off), s, sq.multi_index + "-+"),
        Square((cx - off, cy - off), s, sq.multi_index + "--"),
        Square((cx + off, cy - off), s, sq.multi_index + "+-"),
    ]
    center = Square(sq.center, eps * sq.side, sq.multi_index + "cc")
    return corners, center


def generation(n: int, cfg: CantorConfig) -> SquareFamily:
    """Family F_n: 4^n cornersquares of side 2^{-n} prod_{k<=n}(1 - eps_k)."""
    if n > cfg.max_depth:
        raise ValueError(f"depth {n} exceeds configured max {cfg.max_depth}")
    squares = [cfg.base]
    for k in range(1, n + 1):
        eps = cfg.eps_at(k)
        nxt = []
        for sq in squares:
            corners, _ = cornersquares(sq, eps)
            nxt.extend(corners)
        squares = nxt
    return SquareFamily(generation=n, squares=squares)


def centersquares_up_to(n: int, cfg: CantorConfig) -> list:
    """All centersquares of generations 1..n (4^{k-1} at generation k)."""
    if n > cfg.max_depth:
        raise ValueError(f"depth {n} exceeds configured max {cfg.max_depth}")
    out = []
    squares = [cfg.base]
    for k in range(1, n + 1):
        eps = cfg.eps_at(k)
        nxt = []
        for sq in squares:
            corners, center = cornersquares(sq, eps)
            out.append(center)
            nxt.extend(corners)
        squares = nxt
    return out


def cantor_measure(cfg: CantorConfig, tol: float = 1e-12, max_terms: int = 10_000) -> float:
    """Partial product prod (1 - eps_k)^2, iterated until the increment < tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    prod = 1.0
    for k in range(1, max_terms + 1):
        e = cfg.eps_at(k)
        nxt = prod * (1.0 - e) ** 2
        if prod - nxt < tol:
            if nxt < tol:
                break  # the product itself collapsed, not the increments
            return nxt
        prod = nxt
    raise ValueError("eps sequence decays too slowly; the product vanishes")


class BranchMap:
    """Map equal to a rescaled model map inside each square of a disjoint
    family and the identity outside.  Dispatch uses half-open boxes."""

    def __init__(self, squares: Sequence[Square], params: PinchParams,
                 domain: Square | None = None):
        squares = list(squares)
        for i, a in enumerate(squares):
            for b in squares[i + 1:]:
                if a.overlaps(b):
                    raise ValueError("branch-map squares must be pairwise disjoint")
        self.squares = squares
        self.params = params
        self.domain = domain
        self.phi = ModelPhi(params)
        self._locals = [RescaledMap(self.phi, s.center, s.side) for s in squares]

    def find_square(self, x: float, y: float) -> int | None:
        for i, s in enumerate(self.squares):
            if s.contains_halfopen(x, y):
                return i
        return None

    def eval(self, pt) -> np.ndarray:
        x, y = float(pt[0]), float(pt[1])
        if self.domain is not None and not self.domain.contains_closed(x, y):
            raise ValueError(f"point ({x}, {y}) outside the base square")
        i = self.find_square(x, y)
        if i is None:
            return np.array([x, y])
        return self._locals[i].eval((x, y))

    def eval_many(self, xs, ys):
        """Vectorized evaluation; identity outside all squares."""
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        us = xs.copy()
        vs = ys.copy()
        for s, local in zip(self.squares, self._locals):
            mask = (xs >= s.xmin) & (xs < s.xmax) & (ys >= s.ymin) & (ys < s.ymax)
            if mask.any():
                u, v = local.eval_many(xs[mask], ys[mask])
                us[mask] = u
                vs[mask] = v
        return us, vs

    def local_maps(self) -> list:
        return list(self._locals)

    def pinch_segment(self, i: int):
        """Endpoint pair of the collapsed vertical segment inside square i."""
        s = self.squares[i]
        half = s.side / BIG_SQUARE.width  # image of {0} x [-1, 1]
        cx, cy = s.center
        return np.array([cx, cy - half]), np.array([cx, cy + half])


def cantor_branch_map(cfg: CantorConfig, params: PinchParams, depth: int) -> BranchMap:
    """Branch map of the Cantor construction truncated at ``depth``."""
    return BranchMap(centersquares_up_to(depth, cfg), params, domain=cfg.base)


def cantor_map_eval(pt, cfg: CantorConfig, params: PinchParams, depth: int) -> np.ndarray:
    return cantor_branch_map(cfg, params, depth).eval(pt)


def general_branch_map(squares: Sequence[Square], params: PinchParams) -> BranchMap:
    """The construction for an arbitrary disjoint square family."""
    return BranchMap(squares, params)
