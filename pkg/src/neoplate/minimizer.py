"""Projected-gradient minimization of the stored energy over
orientation-preserving piecewise-affine mesh deformations.

Boundary vertices slide along their side of the target rectangle
(frictionless constraint); the four corners are pinned.  Every accepted
iterate keeps all triangle jacobians strictly positive via a
fraction-to-boundary step cap followed by backtracking.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyParams, energy_pl, identity_energy
from .geometry import PLMap, Rect, TriangleMesh


class MinimizerError(RuntimeError):
    pass


@dataclass(frozen=True)
class MinimizerConfig:
    params: EnergyParams
    max_iters: int = 2000
    grad_tol: float = 1e-6
    backtrack_factor: float = 0.5
    sufficient_decrease: float = 1e-4
    boundary_fraction: float = 0.9  # tau: keep J >= (1 - tau) J_current
    min_step: float = 1e-16
    min_jacobian_abort: float = 1e-14

    def __post_init__(self):
        if not 0.0 < self.boundary_fraction < 1.0:
            raise ValueError("boundary fraction must lie in (0, 1)")
        if self.grad_tol <= 0 or self.min_step <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class MinimizerState:
    plmap: PLMap
    target: Rect
    bindings: list            # per vertex: '' (free), side tags, or pin (2 tags)
    iteration: int = 0
    energy_history: list = field(default_factory=list)

    @property
    def positions(self) -> np.ndarray:
        return self.plmap.target


@dataclass
class MinimizeReport:
    final_energy: float
    iterations: int
    min_jacobian: float
    grad_norm: float
    converged: bool
    stalled: bool
    identity_lower_bound: float | None


def _side_value(rect: Rect, tag: str) -> float:
    return {"L": rect.xmin, "R": rect.xmax, "B": rect.ymin, "T": rect.ymax}[tag]


def _infer_bindings(mesh: TriangleMesh, positions: np.ndarray, target: Rect) -> list:
    tol = 1e-9 * max(target.width, target.height)
    bindings = []
    for v, flags in enumerate(mesh.boundary_flags):
        if not flags:
            bindings.append("")
            continue
        x, y = positions[v]
        tags = ""
        if abs(x - target.xmin) <= tol:
            tags += "L"
        if abs(x - target.xmax) <= tol:
            tags += "R"
        if abs(y - target.ymin) <= tol:
            tags += "B"
        if abs(y - target.ymax) <= tol:
            tags += "T"
        if not tags:
            raise MinimizerError(
                f"boundary vertex {v} at ({x}, {y}) does not lie on the target boundary")
        bindings.append(tags)
    return bindings


def init_minimizer(mesh: TriangleMesh, target: Rect, initial="identity",
                   perturb_sigma: float = 0.0, seed: int | None = None,
                   params: EnergyParams | None = None) -> MinimizerState:
    """Feasible starting state.

    ``initial`` is a PLMap, "identity" (requires the mesh rectangle to
    equal the target) or "bilinear" (the affine map of the mesh rectangle
    onto the target).  With perturb_sigma > 0, interior vertices get a
    seeded uniform displacement in [-sigma, sigma]^2, halved until all
    triangles stay positively oriented.
    """
    if isinstance(initial, PLMap):
        plmap = PLMap(mesh, initial.target.copy())
    elif initial == "identity":
        plmap = PLMap(mesh, mesh.vertices.copy())
    elif initial == "bilinear":
        src = mesh.rect
        if src is None:
            raise MinimizerError("bilinear start needs the mesh rectangle")
        sx = target.width / src.width
        sy = target.height / src.height
        pos = np.empty_like(mesh.vertices)
        pos[:, 0] = target.xmin + sx * (mesh.vertices[:, 0] - src.xmin)
        pos[:, 1] = target.ymin + sy * (mesh.vertices[:, 1] - src.ymin)
        plmap = PLMap(mesh, pos)
    else:
        raise MinimizerError(f"unknown initial map {initial!r}")

    if perturb_sigma > 0.0:
        rng = np.random.default_rng(seed)
        disp = perturb_sigma * rng.uniform(-1.0, 1.0, size=plmap.target.shape)
        disp[mesh.is_boundary()] = 0.0
        while True:
            trial = plmap.target + disp
            if np.all(mesh.signed_areas(trial) > 0):
                plmap = PLMap(mesh, trial)
                break
            disp *= 0.5

    dets = plmap.image_signed_areas()
    if np.any(dets <= 0):
        bad = int(np.argmin(dets))
        raise MinimizerError(f"initial map inverts triangle {bad}")
    bindings = _infer_bindings(mesh, plmap.target, target)
    state = MinimizerState(plmap=plmap, target=target, bindings=bindings)
    state.energy_history.append(energy_value(state, _require(params)))
    return state


def _require(params):
    if params is None:
        raise MinimizerError("energy parameters are required")
    return params


def energy_value(state: MinimizerState, params: EnergyParams) -> float:
    return energy_pl(state.plmap, params).total


def energy_gradient(state: MinimizerState, params: EnergyParams) -> np.ndarray:
    """Exact gradient of the discrete energy in vertex positions,
    projected onto the boundary bindings (tangential sliding, pinned corners)."""
    mesh = state.plmap.mesh
    A = state.plmap.gradients()
    dets = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    if np.any(dets <= 0):
        raise MinimizerError("infeasible state: nonpositive jacobian")
    hs2 = (A * A).sum(axis=(1, 2))
    p, q = params.p, params.q
    areas = mesh.signed_areas()
    # dW/dA = p |A|^{p-2} A - q det^{-q-1} cof(A), cofactor paired with <.,.>_F
    cof = np.empty_like(A)
    cof[:, 0, 0] = A[:, 1, 1]
    cof[:, 0, 1] = -A[:, 1, 0]
    cof[:, 1, 0] = -A[:, 0, 1]
    cof[:, 1, 1] = A[:, 0, 0]
    dWdA = (p * hs2 ** ((p - 2.0) / 2.0))[:, None, None] * A \
        - (q * dets ** (-q - 1.0))[:, None, None] * cof
    invE = np.linalg.inv(mesh.edge_matrices())
    G = areas[:, None, None] * (dWdA @ np.transpose(invE, (0, 2, 1)))
    grad = np.zeros_like(state.plmap.target)
    tri = mesh.triangles
    np.add.at(grad, tri[:, 1], G[:, :, 0])
    np.add.at(grad, tri[:, 2], G[:, :, 1])
    np.add.at(grad, tri[:, 0], -(G[:, :, 0] + G[:, :, 1]))
    return project_directions(grad, state.bindings)


def project_directions(vectors: np.ndarray, bindings: list) -> np.ndarray:
    out = vectors.copy()
    for v, tags in enumerate(bindings):
        if not tags:
            continue
        if len(tags) >= 2:       # corner: pinned
            out[v] = 0.0
        elif tags in ("L", "R"):
            out[v, 0] = 0.0      # slide vertically
        else:
            out[v, 1] = 0.0      # slide horizontally
    return out


def _fraction_to_boundary_cap(state: MinimizerState, direction: np.ndarray,
                              tau: float) -> float:
    """Largest step keeping every triangle jacobian >= (1 - tau) * current."""
    mesh = state.plmap.mesh
    F = mesh.edge_matrices(state.plmap.target)
    D = mesh.edge_matrices(direction)  # direction treated as vertex vectors
    detF = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    # det(F + s D) = detF + s * mixed + s^2 * detD
    mixed = (F[:, 0, 0] * D[:, 1, 1] + D[:, 0, 0] * F[:, 1, 1]
             - F[:, 0, 1] * D[:, 1, 0] - D[:, 0, 1] * F[:, 1, 0])
    detD = D[:, 0, 0] * D[:, 1, 1] - D[:, 0, 1] * D[:, 1, 0]
    c = tau * detF  # c > 0 at a feasible state
    # smallest positive root of detD s^2 + mixed s + c = 0, per triangle
    cap = np.inf
    lin = np.abs(detD) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        lin_roots = np.where(lin & (mixed < 0), -c / mixed, np.inf)
        disc = mixed * mixed - 4.0 * detD * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        r1 = (-mixed - sq) / (2.0 * detD)
        r2 = (-mixed + sq) / (2.0 * detD)
    quad_ok = (~lin) & (disc >= 0)
    r1 = np.where(quad_ok & (r1 > 0), r1, np.inf)
    r2 = np.where(quad_ok & (r2 > 0), r2, np.inf)
    cap = float(np.min(np.concatenate([lin_roots, r1, r2])))
    return cap


def line_search_step(state: MinimizerState, direction: np.ndarray,
                     config: MinimizerConfig, grad: np.ndarray | None = None):
    """Fraction-to-boundary cap, then backtracking for sufficient decrease.

    Returns (new_state, step).  A zero direction returns the state
    unchanged with step 0; failure to find a feasible decreasing step
    above config.min_step raises MinimizerError (stall).
    """
    params = config.params
    direction = project_directions(direction, state.bindings)
    if not np.any(direction):
        return state, 0.0
    if grad is None:
        grad = energy_gradient(state, params)
    slope = float((grad * direction).sum())
    e0 = energy_value(state, params)
    cap = _fraction_to_boundary_cap(state, direction, config.boundary_fraction)
    step = min(1.0, cap)
    while step >= config.min_step:
        trial = state.plmap.target + step * direction
        dets = state.plmap.mesh.signed_areas(trial)
        if np.all(dets > 0):
            if float(dets.min()) < config.min_jacobian_abort:
                raise MinimizerError(
                    f"barrier degeneration: min jacobian {dets.min():.3e}")
            e1 = energy_pl(PLMap(state.plmap.mesh, trial), params).total
            if e1 <= e0 + config.sufficient_decrease * step * slope:
                new = MinimizerState(
                    plmap=PLMap(state.plmap.mesh, trial),
                    target=state.target,
                    bindings=state.bindings,
                    iteration=state.iteration + 1,
                    energy_history=state.energy_history + [e1],
                )
                return new, step
        step *= config.backtrack_factor
    raise MinimizerError("line search stalled: no feasible decreasing step")


def check_orientation(state: MinimizerState):
    dets = state.plmap.image_signed_areas()
    return bool(np.all(dets > 0)), float(dets.min())


def minimize(state: MinimizerState, config: MinimizerConfig,
             callback=None):
    """Projected gradient descent until the gradient tolerance or iteration cap."""
    params = config.params
    if not state.energy_history:
        state.energy_history.append(energy_value(state, params))
    converged = False
    stalled = False
    grad = energy_gradient(state, params)
    for _ in range(config.max_iters):
        gnorm = float(np.abs(grad).max())
        if gnorm <= config.grad_tol:
            converged = True
            break
        try:
            state, _ = line_search_step(state, -grad, config, grad=grad)
        except MinimizerError:
            stalled = True
            break
        grad = energy_gradient(state, params)
        if callback is not None:
            callback(state, grad)
    ok, min_j = check_orientation(state)
    if not ok:
        raise MinimizerError("accepted iterate lost orientation")
    lower = None
    mesh_rect = state.plmap.mesh.rect
    if (mesh_rect is not None and params.q == 1.0 and params.p >= 2.0
            and abs(mesh_rect.area - state.target.area) < 1e-12):
        lower = identity_energy(state.target.area, params)
    report = MinimizeReport(
        final_energy=state.energy_history[-1],
        iterations=state.iteration,
        min_jacobian=min_j,
        grad_norm=float(np.abs(energy_gradient(state, params)).max()),
        converged=converged,
        stalled=stalled,
        identity_lower_bound=lower,
    )
    return state, report
