"""Closed-form planar maps: the pinch family, its boundary-identity
extension, the model map on the big square, square-to-square rescaling,
and the Mobius family on the unit disk.

All maps expose a vectorized interface (``eval_many`` / ``grad_many`` on
flat coordinate arrays) used by the quadrature code, plus scalar
``eval`` / ``grad`` wrappers that enforce domain preconditions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Rect

PINCH_RECT = Rect(-1.0, 1.0, -2.0, 2.0)
EXTENSION_RECT = Rect(-1.0, 1.0, -3.0, 3.0)
BIG_SQUARE = Rect(-4.0, 4.0, -4.0, 4.0)


def q_threshold(p: float) -> float:
    """Barrier exponent below which a non-injective finite-energy map exists."""
    if p <= 2:
        raise ValueError("threshold requires p > 2")
    return p / (p - 2.0)


@dataclass(frozen=True)
class PinchParams:
    """Exponents of the pinch map.

    a > -1/p and b > 1 - 1/p are hard requirements (the map must have
    p-integrable gradient).  a + b < 1/q decides finiteness of the barrier
    term; it is exposed as ``feasible`` rather than enforced, so the
    divergent side of the threshold stays constructible.
    """

    a: float
    b: float
    p: float
    q: float

    def __post_init__(self):
        if self.p <= 1 or self.q <= 0:
            raise ValueError("require p > 1 and q > 0")
        if self.a <= -1.0 / self.p:
            raise ValueError(f"a = {self.a} violates a > -1/p = {-1.0 / self.p}")
        if self.b <= 1.0 - 1.0 / self.p:
            raise ValueError(f"b = {self.b} violates b > 1 - 1/p = {1.0 - 1.0 / self.p}")

    @property
    def feasible(self) -> bool:
        return self.a + self.b < 1.0 / self.q


def feasible_params(p: float, q: float) -> PinchParams | None:
    """Canonical feasible (a, b) for given (p, q), or None.

    The feasible region is the open triangle {a > -1/p, b > 1 - 1/p,
    a + b < 1/q}; it is nonempty exactly when q < p/(p-2).  The witness
    returned is the triangle's centroid.
    """
    if p <= 2:
        raise ValueError("feasible_params requires p > 2")
    if q <= 0:
        raise ValueError("feasible_params requires q > 0")
    if q >= q_threshold(p):
        return None
    a_min = -1.0 / p
    b_min = 1.0 - 1.0 / p
    a = (2.0 * a_min + (1.0 / q - b_min)) / 3.0
    b = (2.0 * b_min + (1.0 / q - a_min)) / 3.0
    return PinchParams(a=a, b=b, p=p, q=q)


class AnalyticMap:
    """Base class; subclasses fill in kind, domain and the evaluators."""

    kind = "abstract"
    domain: Rect | None = None

    def eval_many(self, xs, ys):
        raise NotImplementedError

    def grad_many(self, xs, ys):
        raise NotImplementedError

    def eval(self, pt) -> np.ndarray:
        x, y = float(pt[0]), float(pt[1])
        self._check_domain(x, y)
        us, vs = self.eval_many(np.array([x]), np.array([y]))
        return np.array([us[0], vs[0]])

    def grad(self, pt) -> np.ndarray:
        x, y = float(pt[0]), float(pt[1])
        self._check_domain(x, y)
        ux, uy, vx, vy = self.grad_many(np.array([x]), np.array([y]))
        return np.array([[ux[0], uy[0]], [vx[0], vy[0]]])

    def _check_domain(self, x, y):
        if self.domain is not None and not self.domain.contains(x, y):
            raise ValueError(f"point ({x}, {y}) outside the domain of {self.kind}")

    def quadrature_plan(self) -> dict:
        return {"type": "rect", "rect": self.domain}


class IdentityMap(AnalyticMap):
    kind = "identity"

    def __init__(self, domain: Rect | None = None):
        self.domain = domain if domain is not None else Rect(0.0, 1.0, 0.0, 1.0)

    def eval_many(self, xs, ys):
        return np.asarray(xs, float).copy(), np.asarray(ys, float).copy()

    def grad_many(self, xs, ys):
        one = np.ones_like(np.asarray(xs, float))
        zero = np.zeros_like(one)
        return one, zero, zero.copy(), one.copy()


class AffineMap(AnalyticMap):
    """x -> M x + c on a rectangle; constant gradient M."""

    kind = "affine"

    def __init__(self, matrix, offset=(0.0, 0.0), domain: Rect | None = None):
        self.matrix = np.asarray(matrix, float).reshape(2, 2)
        self.offset = np.asarray(offset, float).reshape(2)
        self.domain = domain if domain is not None else Rect(0.0, 1.0, 0.0, 1.0)

    def eval_many(self, xs, ys):
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        m, c = self.matrix, self.offset
        return (m[0, 0] * xs + m[0, 1] * ys + c[0],
                m[1, 0] * xs + m[1, 1] * ys + c[1])

    def grad_many(self, xs, ys):
        one = np.ones_like(np.asarray(xs, float))
        m = self.matrix
        return m[0, 0] * one, m[0, 1] * one, m[1, 0] * one, m[1, 1] * one


def _pinch_uv(xs, ys, a, b):
    ax = np.abs(xs)
    sx = np.sign(xs)
    sy = np.sign(ys)
    ay = np.abs(ys)
    u = sx * ax ** (a + 1.0)
    axb = ax ** b
    inner = ay <= 1.0
    v = np.where(inner, ys * axb, sy * ((2.0 - axb) * ay + 2.0 * (axb - 1.0)))
    return u, v


def _pinch_grad(xs, ys, a, b):
    ax = np.abs(xs)
    sx = np.sign(xs)
    sy = np.sign(ys)
    ay = np.abs(ys)
    ux = (a + 1.0) * ax ** a
    uy = np.zeros_like(ux)
    axb = ax ** b
    axb1 = ax ** (b - 1.0)
    inner = ay <= 1.0
    vx = np.where(inner, sx * b * axb1 * ys, sx * sy * b * axb1 * (2.0 - ay))
    vy = np.where(inner, axb, 2.0 - axb)
    return ux, uy, vx, vy


class PinchMap(AnalyticMap):
    """The non-injective pinch on [-1,1] x [-2,2]: collapses {0} x [-1,1]
    to the origin while fixing the vertical sides."""

    kind = "pinch"

    def __init__(self, params: PinchParams):
        self.params = params
        self.domain = PINCH_RECT

    def eval_many(self, xs, ys):
        return _pinch_uv(np.asarray(xs, float), np.asarray(ys, float),
                         self.params.a, self.params.b)

    def grad_many(self, xs, ys):
        return _pinch_grad(np.asarray(xs, float), np.asarray(ys, float),
                           self.params.a, self.params.b)

    def grad(self, pt):
        x, y = float(pt[0]), float(pt[1])
        self._check_domain(x, y)
        if x == 0.0:
            raise ValueError("gradient undefined on the singular line x = 0")
        if abs(y) in (1.0, 2.0):
            raise ValueError(f"gradient undefined on the kink line |y| = {abs(y)}")
        return super().grad(pt)

    def inverse(self, pt) -> np.ndarray:
        """Exact inverse, defined away from the collapsed point (0, 0)."""
        u, v = float(pt[0]), float(pt[1])
        self._check_domain(u, v)
        if u == 0.0 and v == 0.0:
            raise ValueError("(0, 0) has a segment as preimage; inverse undefined")
        a, b = self.params.a, self.params.b
        au = abs(u)
        x = np.sign(u) * au ** (1.0 / (1.0 + a))
        t = au ** (b / (1.0 + a))  # = |x|^b
        if abs(v) <= t:
            y = v / t if t > 0 else 0.0
        else:
            y = np.sign(v) * (abs(v) + 2.0 * (1.0 - t)) / (2.0 - t)
        return np.array([x, y])

    def quadrature_plan(self):
        pr = self.params
        return {
            "type": "quadrant",
            "center": (0.0, 0.0),
            "graded_x": 1.0,
            "xbreaks": [1.0],
            "ybreaks": [0.0, 1.0, 2.0],
            "alpha": lambda p, q: min(pr.a * p, (pr.b - 1.0) * p, -(pr.a + pr.b) * q),
        }


def _extension_uv(xs, ys, a, b):
    ax = np.abs(xs)
    xa1 = np.sign(xs) * ax ** (a + 1.0)  # x|x|^a
    u_p, v_p = _pinch_uv(xs, ys, a, b)
    up_mask = ys > 2.0
    dn_mask = ys < -2.0
    u = np.where(up_mask, xa1 * (3.0 - ys) + xs * (ys - 2.0), u_p)
    u = np.where(dn_mask, xa1 * (3.0 + ys) - xs * (ys + 2.0), u)
    v = np.where(up_mask | dn_mask, ys, v_p)
    return u, v


def _extension_grad(xs, ys, a, b):
    ax = np.abs(xs)
    xa1 = np.sign(xs) * ax ** (a + 1.0)
    axa = ax ** a
    ux_p, uy_p, vx_p, vy_p = _pinch_grad(xs, ys, a, b)
    up_mask = ys > 2.0
    dn_mask = ys < -2.0
    outer = up_mask | dn_mask
    ux = np.where(up_mask, (a + 1.0) * axa * (3.0 - ys) + (ys - 2.0), ux_p)
    ux = np.where(dn_mask, (a + 1.0) * axa * (3.0 + ys) - (ys + 2.0), ux)
    uy = np.where(up_mask, xs - xa1, uy_p)
    uy = np.where(dn_mask, xa1 - xs, uy)
    vx = np.where(outer, 0.0, vx_p)
    vy = np.where(outer, 1.0, vy_p)
    return ux, uy, vx, vy


class PinchExtension(AnalyticMap):
    """Pinch extended to [-1,1] x [-3,3]; identity on the outer boundary."""

    kind = "pinch_extension"

    def __init__(self, params: PinchParams):
        self.params = params
        self.domain = EXTENSION_RECT

    def eval_many(self, xs, ys):
        return _extension_uv(np.asarray(xs, float), np.asarray(ys, float),
                             self.params.a, self.params.b)

    def grad_many(self, xs, ys):
        return _extension_grad(np.asarray(xs, float), np.asarray(ys, float),
                               self.params.a, self.params.b)

    def quadrature_plan(self):
        pr = self.params
        return {
            "type": "quadrant",
            "center": (0.0, 0.0),
            "graded_x": 1.0,
            "xbreaks": [1.0],
            "ybreaks": [0.0, 1.0, 2.0, 3.0],
            "alpha": lambda p, q: min(pr.a * p, (pr.b - 1.0) * p, -(pr.a + pr.b) * q),
        }


class ModelPhi(AnalyticMap):
    """The model map on S = [-4,4]^2: the extension inside [-1,1] x [-3,3],
    the identity elsewhere.  Fixes 0 and is the identity near the boundary."""

    kind = "model_phi"

    def __init__(self, params: PinchParams):
        self.params = params
        self.domain = BIG_SQUARE

    def _inside(self, xs, ys):
        return (np.abs(xs) <= 1.0) & (np.abs(ys) <= 3.0)

    def eval_many(self, xs, ys):
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        u_e, v_e = _extension_uv(xs, ys, self.params.a, self.params.b)
        inside = self._inside(xs, ys)
        return np.where(inside, u_e, xs), np.where(inside, v_e, ys)

    def grad_many(self, xs, ys):
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        ux, uy, vx, vy = _extension_grad(xs, ys, self.params.a, self.params.b)
        inside = self._inside(xs, ys)
        one = np.ones_like(xs)
        zero = np.zeros_like(xs)
        return (np.where(inside, ux, one), np.where(inside, uy, zero),
                np.where(inside, vx, zero), np.where(inside, vy, one))

    def quadrature_plan(self):
        pr = self.params
        return {
            "type": "quadrant",
            "center": (0.0, 0.0),
            "graded_x": 1.0,
            "xbreaks": [1.0, 4.0],
            "ybreaks": [0.0, 1.0, 2.0, 3.0, 4.0],
            "alpha": lambda p, q: min(pr.a * p, (pr.b - 1.0) * p, -(pr.a + pr.b) * q),
        }


class RescaledMap(AnalyticMap):
    """h_Q(x) = a + (l/L) inner(L/l (x - a)) for a square Q of side l
    centered at a; the gradient is the inner gradient, unscaled."""

    kind = "rescaled"

    def __init__(self, inner: AnalyticMap, center, side: float):
        if side <= 0:
            raise ValueError("square side must be positive")
        if inner.domain is None:
            raise ValueError("inner map must carry a square domain")
        L = inner.domain.width
        if inner.domain.height != L or abs(inner.domain.xmin + inner.domain.xmax) > 1e-15:
            raise ValueError("inner map must live on a square centered at 0")
        fixed = inner.eval((0.0, 0.0))
        if abs(fixed[0]) > 1e-14 or abs(fixed[1]) > 1e-14:
            raise ValueError("inner map must fix the origin")
        self.inner = inner
        self.center = np.asarray(center, float).reshape(2)
        self.side = float(side)
        self.scale = self.side / L
        cx, cy = self.center
        h = self.side / 2.0
        self.domain = Rect(cx - h, cx + h, cy - h, cy + h)

    def _pull(self, xs, ys):
        return ((np.asarray(xs, float) - self.center[0]) / self.scale,
                (np.asarray(ys, float) - self.center[1]) / self.scale)

    def eval_many(self, xs, ys):
        u, v = self.inner.eval_many(*self._pull(xs, ys))
        return self.center[0] + self.scale * u, self.center[1] + self.scale * v

    def grad_many(self, xs, ys):
        return self.inner.grad_many(*self._pull(xs, ys))

    def grad_offset(self, dxs, dys):
        """Gradient at center + (dx, dy) without the cancellation of
        forming center + dx first (graded quadrature nodes can be far
        below the center's floating-point spacing)."""
        return self.inner.grad_many(np.asarray(dxs, float) / self.scale,
                                    np.asarray(dys, float) / self.scale)

    def quadrature_plan(self):
        plan = self.inner.quadrature_plan()
        if plan["type"] == "rect":
            return {"type": "rect", "rect": self.domain}
        s = self.scale
        return {
            "type": "quadrant",
            "center": tuple(self.center),
            "graded_x": s * plan["graded_x"],
            "xbreaks": [s * x for x in plan["xbreaks"]],
            "ybreaks": [s * y for y in plan["ybreaks"]],
            "alpha": plan["alpha"],
        }


def rescale_map(inner: AnalyticMap, center, side: float) -> RescaledMap:
    return RescaledMap(inner, center, side)


class MobiusMap(AnalyticMap):
    """z -> (z + a)/(1 + a z) on the closed unit disk, 0 < a < 1."""

    kind = "mobius"

    def __init__(self, ak: float):
        if not 0.0 < ak < 1.0:
            raise ValueError("mobius parameter must lie in (0, 1)")
        self.ak = float(ak)
        self.domain = None
        self.radius = 1.0

    def _check_domain(self, x, y):
        if np.hypot(x, y) > self.radius + 1e-12:
            raise ValueError(f"point ({x}, {y}) outside the closed unit disk")

    def eval_many(self, xs, ys):
        z = np.asarray(xs, float) + 1j * np.asarray(ys, float)
        w = (z + self.ak) / (1.0 + self.ak * z)
        return w.real, w.imag

    def grad_many(self, xs, ys):
        z = np.asarray(xs, float) + 1j * np.asarray(ys, float)
        dw = (1.0 - self.ak ** 2) / (1.0 + self.ak * z) ** 2
        # holomorphic: Dh = [[Re w', -Im w'], [Im w', Re w']]
        return dw.real, -dw.imag, dw.imag, dw.real.copy()

    def quadrature_plan(self):
        return {"type": "disk", "radius": self.radius, "ak": self.ak}


def mobius_sequence(count: int) -> list[float]:
    """Default degeneration parameters a_k = 1 - 2^{-k}, k = 1..count."""
    return [1.0 - 2.0 ** (-k) for k in range(1, count + 1)]


# Convenience wrappers matching the operation-level API.

def pinch_eval(pt, params: PinchParams) -> np.ndarray:
    return PinchMap(params).eval(pt)


def pinch_grad(pt, params: PinchParams) -> np.ndarray:
    return PinchMap(params).grad(pt)


def pinch_inverse(pt, params: PinchParams) -> np.ndarray:
    return PinchMap(params).inverse(pt)


def extend_pinch(pt, params: PinchParams) -> np.ndarray:
    return PinchExtension(params).eval(pt)


def model_phi(pt, params: PinchParams) -> np.ndarray:
    return ModelPhi(params).eval(pt)


def mobius_eval(pt, ak: float) -> np.ndarray:
    return MobiusMap(ak).eval(pt)


def parse_map(spec: str, default_p: float = 3.0, default_q: float = 2.0) -> AnalyticMap:
    """Build a map from a CLI name like 'pinch:a=-0.3,b=0.75'.

    Recognized kinds: identity, pinch, pinch-ext, phi, mobius.  Pinch-type
    kinds accept a, b, p, q; omitted (a, b) fall back to the feasible-region
    centroid for (p, q).
    """
    name, _, argstr = spec.partition(":")
    kwargs = {}
    if argstr:
        for item in argstr.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise ValueError(f"malformed map argument {item!r}")
            kwargs[key.strip()] = float(val)
    if name == "identity":
        return IdentityMap()
    if name == "mobius":
        if "ak" not in kwargs:
            raise ValueError("mobius requires ak=<value in (0,1)>")
        return MobiusMap(kwargs["ak"])
    if name in ("pinch", "pinch-ext", "phi"):
        p = kwargs.get("p", default_p)
        q = kwargs.get("q", default_q)
        if "a" in kwargs and "b" in kwargs:
            params = PinchParams(a=kwargs["a"], b=kwargs["b"], p=p, q=q)
        else:
            params = feasible_params(p, q)
            if params is None:
                raise ValueError(f"no feasible pinch parameters for p={p}, q={q}")
        cls = {"pinch": PinchMap, "pinch-ext": PinchExtension, "phi": ModelPhi}[name]
        return cls(params)
    raise ValueError(f"unknown map name {name!r}")
