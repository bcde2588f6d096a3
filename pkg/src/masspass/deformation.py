"""Second-order descent machinery on discrete maps into the mass sphere.

A discrete map carries parameter points in R^n (n = 1 for paths, n = 2 for
surfaces of parameters) and one sphere node per parameter.  The operations
below realize, node by node, the quantitative descent toolkit: lattice
covers with audited multiplicity, certified descent steps along transported
negative frames, the local homotopy deformation, its iterated version over
a finite subcover, the first-order deformation driven by the sphere
gradient, and the certification loop that either returns an approximate
critical point with small approximate Morse index or produces a strictly
lower competitor, contradicting the input level.

Every deformation is value-non-increasing node-wise, never moves boundary
nodes, and reports measured decreases against the certified bounds; misses
beyond a 1e-12 slack are flagged loudly instead of silently accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (BudgetExceeded, CoverFailure, FrameDimensionTooSmall,
                     FrameTransportFailure, AntipodalPoint, PreconditionOutOfBall,
                     SlowDecrease, UnsupportedDimension, HypothesisViolated)
from .functional import (ConstrainedFunctional, approx_morse_index,
                         constrained_dual_norm, negative_frame, sphere_gradient)
from .geometry import Geodesic, GeometryConstants, exp_map, log_map, transport_frame
from .hilbert import HilbertPair, SpherePoint, TangentVector

SLACK = 1e-12
ZERO_DIRECTION = 1e-12


# ---------------------------------------------------------------------------
# discrete maps
# ---------------------------------------------------------------------------

@dataclass
class DiscreteMap:
    """Nodes on the mass sphere indexed by parameters in R^n."""

    pair: HilbertPair
    params: np.ndarray      # (m, n)
    nodes: np.ndarray       # (m, d), rows on the sphere
    mu: float
    boundary: np.ndarray    # (m,) bool, fixed nodes

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        if self.params.ndim == 1:
            self.params = self.params[:, None]
        if self.params.shape[0] != self.nodes.shape[0]:
            raise ValueError("params and nodes must have matching lengths")

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def ndim_params(self) -> int:
        return self.params.shape[1]

    def point(self, i: int) -> SpherePoint:
        return self.pair.sphere_point(self.nodes[i], self.mu)

    def values(self, f: ConstrainedFunctional) -> np.ndarray:
        return np.array([f.value(self.nodes[i]) for i in range(self.size)])

    def copy(self) -> "DiscreteMap":
        return DiscreteMap(self.pair, self.params.copy(), self.nodes.copy(),
                           self.mu, self.boundary.copy())


# ---------------------------------------------------------------------------
# covering with audited multiplicity
# ---------------------------------------------------------------------------

@dataclass
class CoverReport:
    """Lattice cover of a compact parameter set with brute-force audit."""

    centers: np.ndarray          # (k, n)
    eps: float
    inner_radius: float          # eps / 4, covering balls
    outer_radius: float          # eps / 2, multiplicity balls
    multiplicity_bound: int      # audited max count of closed outer balls at a point
    theory_bound: int            # ceil((2 sqrt(n+1) + 2)^n)
    coverage_checked: bool


def build_cover(domain, eps: float) -> CoverReport:
    """Shifted-lattice cover of a compact subset of R^n, n in {1, 2}.

    ``domain`` is a point cloud of shape (m, n) or a list of n (lo, hi)
    intervals.  Lattice spacing is eps / (2 sqrt(n)), so the quarter-eps
    balls around retained lattice points cover the set while staying inside
    its half-eps neighborhood.  The multiplicity of the closed half-eps
    balls is audited on a fine grid.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if isinstance(domain, (list, tuple)) and domain and isinstance(domain[0], (list, tuple)):
        box = np.asarray(domain, dtype=float)
        n = box.shape[0]
        if n > 2:
            raise UnsupportedDimension(f"parameter dimension {n} not supported")
        grids = [np.linspace(lo, hi, max(2, int(np.ceil((hi - lo) / (eps / 8))) + 1))
                 for lo, hi in box]
        mesh = np.meshgrid(*grids, indexing="ij")
        cloud = np.column_stack([m.ravel() for m in mesh])
    else:
        cloud = np.asarray(domain, dtype=float)
        if cloud.ndim == 1:
            cloud = cloud[:, None]
        if cloud.shape[1] > 2:
            raise UnsupportedDimension(f"parameter dimension {cloud.shape[1]} not supported")
        n = cloud.shape[1]

    spacing = eps / (2.0 * math.sqrt(n))
    lo = cloud.min(axis=0) - eps
    hi = cloud.max(axis=0) + eps
    axes = [np.arange(math.floor(l / spacing) - 1, math.ceil(h / spacing) + 2)
            for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    lattice = spacing * np.column_stack([m.ravel() for m in mesh])

    # Keep lattice points within eps/4 of the set: they cover it and their
    # quarter-balls stay inside the half-eps neighborhood.
    d2 = ((lattice[:, None, :] - cloud[None, :, :]) ** 2).sum(axis=2)
    keep = d2.min(axis=1) <= (eps / 4.0) ** 2 * (1.0 + 1e-12)
    centers = lattice[keep]
    if centers.shape[0] == 0:
        raise CoverFailure("no lattice point close enough to the set")

    # Coverage audit: every cloud point within eps/4 of some center.
    cover_d2 = ((cloud[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    covered = bool(np.all(cover_d2.min(axis=1) <= (eps / 4.0) ** 2 * (1.0 + 1e-12)))
    if not covered:
        raise CoverFailure("lattice cover failed the coverage audit")

    # Multiplicity audit on a fine grid spanning centers plus margin.
    glo = centers.min(axis=0) - 0.6 * eps
    ghi = centers.max(axis=0) + 0.6 * eps
    per_axis = [np.linspace(l, h, min(161, max(9, int(np.ceil((h - l) / (eps / 16))) + 1)))
                for l, h in zip(glo, ghi)]
    gmesh = np.meshgrid(*per_axis, indexing="ij")
    gpts = np.column_stack([m.ravel() for m in gmesh])
    counts = np.zeros(gpts.shape[0], dtype=int)
    r2 = (eps / 2.0) ** 2 * (1.0 + 1e-12)
    for base in range(0, centers.shape[0], 256):
        block = centers[base:base + 256]
        dd = ((gpts[:, None, :] - block[None, :, :]) ** 2).sum(axis=2)
        counts += (dd <= r2).sum(axis=1)
    mult = int(counts.max())

    theory = math.ceil((2.0 * math.sqrt(n + 1.0) + 2.0) ** n)
    return CoverReport(centers=centers, eps=eps, inner_radius=eps / 4.0,
                       outer_radius=eps / 2.0, multiplicity_bound=mult,
                       theory_bound=theory, coverage_checked=covered)


# ---------------------------------------------------------------------------
# certified descent steps
# ---------------------------------------------------------------------------

@dataclass
class DescentCertificate:
    """Measured decrease of one arc step against its certified bound."""

    t: float
    beta: float
    case: str                 # "gradient" or "frame"
    decrease: float
    bound: float
    valid: bool
    margin: float
    direction: np.ndarray = field(repr=False, default=None)


def descent_direction(f: ConstrainedFunctional, point: SpherePoint, frame):
    """Normalized steepest-descent direction inside the frame span.

    Returns None when the frame-projected gradient vanishes (below 1e-12),
    in which case every unit frame direction is already second-order
    descending.
    """
    pair = point.pair
    grad = sphere_gradient(f, point)
    proj = np.zeros_like(grad.v)
    for w in frame:
        proj += pair.inner_e(grad.v, w.v) * w.v
    nrm = pair.norm_e(proj)
    if nrm <= ZERO_DIRECTION:
        return None
    return TangentVector(point, -proj / nrm)


def descent_step(f: ConstrainedFunctional, origin: SpherePoint, point: SpherePoint,
                 frame, beta: float, t: float, radius: float) -> DescentCertificate:
    """One certified arc step from ``point`` along the frame machinery.

    ``origin`` anchors the descent radius; the step is only guaranteed for
    points within half that radius and times below the travel cap.  The
    certificate records the measured decrease against beta t^2 / 12 and is
    marked invalid only when the measurement misses the bound by more than
    the 1e-12 slack.
    """
    pair = point.pair
    n = len(frame) - 1
    constants = GeometryConstants(radius, point.mu,
                                  max(1.0, f.bound_k(radius, point.mu)))
    delta3 = constants.descent_radius(beta, n, f.alpha, f.holder_m(radius))
    dist = pair.norm_e(point.u - origin.u)
    if dist >= 0.5 * delta3 * (1.0 + 1e-12):
        raise PreconditionOutOfBall(
            f"point at distance {dist:.3e} from the anchor, radius/2 = {0.5 * delta3:.3e}"
        )
    t_cap = constants.travel_cap(delta3)
    if not 0.0 < t < t_cap:
        raise PreconditionOutOfBall(f"step time {t:.3e} outside (0, {t_cap:.3e})")

    direction = descent_direction(f, point, frame)
    if direction is None:
        case = "frame"
        w = frame[0]
        nrm = pair.norm_e(w.v)
        direction = TangentVector(point, w.v / nrm)
    else:
        case = "gradient"

    before = f.value(point.u)
    after = f.value(exp_map(point, TangentVector(point, t * direction.v)).u)
    decrease = before - after
    bound = beta * t * t / 12.0
    return DescentCertificate(t=t, beta=beta, case=case, decrease=decrease,
                              bound=bound, valid=decrease > bound - SLACK,
                              margin=decrease - bound, direction=direction.v)


# ---------------------------------------------------------------------------
# local homotopy deformation
# ---------------------------------------------------------------------------

def _cutoff(dist: np.ndarray, nu: float) -> np.ndarray:
    return np.clip(1.0 - dist / nu, 0.0, 1.0)


def _param_dist(params: np.ndarray, subset: np.ndarray) -> np.ndarray:
    if subset.shape[0] == 0:
        return np.full(params.shape[0], np.inf)
    d2 = ((params[:, None, :] - subset[None, :, :]) ** 2).sum(axis=2)
    return np.sqrt(d2.min(axis=1))


def _extend_unit_field(params: np.ndarray, coeffs: dict, active: np.ndarray,
                       size: int) -> np.ndarray:
    """Continuous-at-mesh-scale unit coefficient field on the active nodes.

    Nodes with a defined coefficient vector keep it; gaps take the nearest
    defined value, with spherical interpolation across one-dimensional gaps.
    """
    out = np.zeros((params.shape[0], size))
    defined = sorted(coeffs)
    if not defined:
        out[active, 0] = 1.0     # no anchor anywhere: any constant unit field
        return out
    one_d = params.shape[1] == 1
    def_params = params[defined]
    for i in np.nonzero(active)[0]:
        if i in coeffs:
            out[i] = coeffs[i]
            continue
        if one_d:
            x = params[i, 0]
            left = [j for j in defined if params[j, 0] <= x]
            right = [j for j in defined if params[j, 0] >= x]
            if left and right:
                a, b = left[-1], right[0]
                xa, xb = params[a, 0], params[b, 0]
                lam = 0.0 if xb == xa else (x - xa) / (xb - xa)
                ca, cb = coeffs[a], coeffs[b]
                dot = float(np.clip(ca @ cb, -1.0, 1.0))
                omega = math.acos(dot)
                if omega < 1e-9 or abs(math.sin(omega)) < 1e-9:
                    vec = (1.0 - lam) * ca + lam * cb
                else:
                    vec = (math.sin((1.0 - lam) * omega) * ca
                           + math.sin(lam * omega) * cb) / math.sin(omega)
                nrm = np.linalg.norm(vec)
                out[i] = vec / nrm if nrm > 0 else ca
                continue
            nearest = left[-1] if left else right[0]
            out[i] = coeffs[nearest]
        else:
            d2 = ((def_params - params[i]) ** 2).sum(axis=1)
            out[i] = coeffs[defined[int(np.argmin(d2))]]
    return out


@dataclass
class HomotopyDeformation:
    """Direction field for the local deformation, evaluable at any time."""

    dmap: DiscreteMap
    cutoff: np.ndarray        # g(x) per node
    field: np.ndarray         # (m, d) unit tangent directions (zero off support)
    t_cap: float
    t_floor: float
    beta: float

    def apply(self, t: float) -> DiscreteMap:
        if not 0.0 <= t <= self.t_cap:
            raise ValueError(f"time {t:.3e} outside [0, {self.t_cap:.3e}]")
        out = self.dmap.copy()
        for i in range(out.size):
            amp = t * self.cutoff[i]
            if amp == 0.0 or not self.field[i].any():
                continue
            point = self.dmap.point(i)
            out.nodes[i] = exp_map(point, TangentVector(point, amp * self.field[i])).u
        return out


def homotopy_deform(f: ConstrainedFunctional, dmap: DiscreteMap, anchor: SpherePoint,
                    frame_at_anchor, k1_mask: np.ndarray, beta: float, nu: float,
                    radius: float, t0: float | None = None) -> HomotopyDeformation:
    """Local deformation pushing a compact parameter set downhill.

    The anchor carries a strongly orthonormal frame on which the constrained
    second form is below -beta.  Frames are transported radially to every
    node within the cutoff support; where the frame-projected gradient
    vanishes the unit coefficient field is extended continuously.  The
    returned object evaluates the deformation at any time up to the travel
    cap: supported nodes never increase the value, the compact set decreases
    by beta t^2 / 24 for t past the floor, and no node moves farther than 3t.
    """
    pair = dmap.pair
    n = len(frame_at_anchor) - 1
    constants = GeometryConstants(radius, dmap.mu,
                                  max(1.0, f.bound_k(radius, dmap.mu)))
    delta3 = constants.descent_radius(beta, n, f.alpha, f.holder_m(radius))
    t_cap = constants.travel_cap(delta3)
    if t0 is None:
        t0 = t_cap / 8.0
    if not 0.0 < t0 < t_cap:
        raise ValueError("t0 must lie strictly inside (0, travel cap)")
    if np.any(k1_mask & dmap.boundary):
        raise ValueError("the deformed compact set must avoid boundary nodes")

    dist = _param_dist(dmap.params, dmap.params[k1_mask])
    cutoff = _cutoff(dist, nu)
    cutoff[dmap.boundary] = 0.0
    support = cutoff > 0.0

    # The decrease estimate holds on the anchor ball, so every node that can
    # move must lie inside it, not just the compact set itself.
    for i in np.nonzero(support)[0]:
        gap = pair.norm_e(dmap.nodes[i] - anchor.u)
        if gap >= 0.5 * delta3 * (1.0 + 1e-9):
            raise PreconditionOutOfBall(
                f"node {i} at distance {gap:.3e} from the anchor, radius/2 = {0.5 * delta3:.3e}"
            )

    size = len(frame_at_anchor)
    coeffs: dict[int, np.ndarray] = {}
    frames: dict[int, list] = {}
    for i in np.nonzero(support)[0]:
        point = dmap.point(i)
        try:
            frames[i] = transport_frame(anchor, frame_at_anchor, point)
        except AntipodalPoint as exc:
            raise FrameTransportFailure(f"node {i} near the anchor antipode") from exc
        direction = descent_direction(f, point, frames[i])
        if direction is not None:
            coeffs[i] = np.array([pair.inner_e(w.v, direction.v) for w in frames[i]])
            nrm = np.linalg.norm(coeffs[i])
            coeffs[i] = coeffs[i] / nrm

    coeff_field = _extend_unit_field(dmap.params, coeffs, support, size)
    field = np.zeros_like(dmap.nodes)
    for i in np.nonzero(support)[0]:
        vec = np.zeros(pair.dim)
        for cj, w in zip(coeff_field[i], frames[i]):
            vec += cj * w.v
        nrm = pair.norm_e(vec)
        if nrm > 0:
            field[i] = vec / nrm

    return HomotopyDeformation(dmap=dmap, cutoff=cutoff, field=field,
                               t_cap=t_cap, t_floor=t0, beta=beta)


# ---------------------------------------------------------------------------
# iterated deformation over a finite subcover
# ---------------------------------------------------------------------------

@dataclass
class StageTrace:
    stage: int
    anchor_index: int
    moved: int
    min_decrease_on_ball: float
    max_displacement: float


@dataclass
class IterateReport:
    cover_eps: float
    multiplicity: int
    stages: list
    decrease_bound: float
    displacement_bound: float
    min_decrease_on_set: float
    max_displacement: float


def iterate_deform(f: ConstrainedFunctional, dmap: DiscreteMap, k2_mask: np.ndarray,
                   beta: float, delta: float, nu: float, radius: float,
                   *, max_halving: int = 40, trace=None):
    """Iterated local deformations decreasing the value on a compact set.

    Every node of the set must carry a negative frame of dimension n + 1 at
    level beta.  A lattice cover of the set's parameters is shrunk until the
    image of each covering ball (and of its safety hull) is verified to sit
    inside the anchor ball required by the local deformation; one stage per
    covering ball then applies the local deformation with step delta / (6 N),
    where N is the audited multiplicity.  The composite map decreases the
    value on the set by at least beta delta^2 / (864 N^2) while moving no
    node farther than delta / 2.
    """
    pair = dmap.pair
    n = dmap.ndim_params
    if n > 2:
        raise UnsupportedDimension(f"parameter dimension {n} not supported")
    if not np.any(k2_mask):
        return dmap.copy(), IterateReport(cover_eps=0.0, multiplicity=0, stages=[],
                                          decrease_bound=0.0, displacement_bound=0.0,
                                          min_decrease_on_set=0.0, max_displacement=0.0)
    if np.any(k2_mask & dmap.boundary):
        raise ValueError("the deformed compact set must avoid boundary nodes")

    constants = GeometryConstants(radius, dmap.mu,
                                  max(1.0, f.bound_k(radius, dmap.mu)))
    for i in np.nonzero(k2_mask)[0]:
        if pair.norm_e(dmap.nodes[i]) > radius - 1.0 + 1e-9:
            raise PreconditionOutOfBall(f"node {i} outside the radius - 1 ball")

    frames: dict[int, list] = {}
    for i in np.nonzero(k2_mask)[0]:
        frame = negative_frame(f, dmap.point(i), beta, n + 1)
        if frame is None:
            raise FrameDimensionTooSmall(
                f"node {i} has no {n + 1}-dimensional subspace below -beta"
            )
        frames[i] = frame

    delta3 = constants.descent_radius(beta, n, f.alpha, f.holder_m(radius))
    if delta > delta3:
        raise HypothesisViolated(
            f"delta {delta:.3e} exceeds the descent radius {delta3:.3e}"
        )
    t_cap = constants.travel_cap(delta3)

    k2_params = dmap.params[k2_mask]
    eps_cov = min(4.0 * nu / 3.0, float(np.ptp(k2_params, axis=0).max()) + nu)
    chosen = None
    for _ in range(max_halving):
        cover = build_cover(k2_params, eps_cov)
        mult = max(cover.multiplicity_bound, 1)
        step = delta / (6.0 * mult)
        if step >= t_cap:
            eps_cov *= 0.5
            continue
        # Snap each center to its nearest set node; that node anchors the stage.
        ok = True
        stages = []
        for center in cover.centers:
            d2 = ((k2_params - center) ** 2).sum(axis=1)
            anchor_idx = int(np.nonzero(k2_mask)[0][int(np.argmin(d2))])
            pdist = np.sqrt(((dmap.params - center) ** 2).sum(axis=1))
            ball = (pdist <= eps_cov / 4.0 + 1e-15) & k2_mask
            hull = (pdist <= eps_cov / 2.0 + 1e-15) & ~dmap.boundary
            anchor_u = dmap.nodes[anchor_idx]
            ball_gap = max((pair.norm_e(dmap.nodes[j] - anchor_u)
                            for j in np.nonzero(ball)[0]), default=0.0)
            hull_gap = max((pair.norm_e(dmap.nodes[j] - anchor_u)
                            for j in np.nonzero(hull)[0]), default=0.0)
            if ball_gap > delta / (8.0 * mult) or hull_gap > delta / (4.0 * mult):
                ok = False
                break
            stages.append((anchor_idx, ball, hull, center))
        if ok:
            chosen = (cover, mult, step, stages)
            break
        eps_cov *= 0.5
    if chosen is None:
        raise CoverFailure(
            "could not shrink the cover until ball images fit the anchor radius; "
            "the node mesh is too coarse for this delta"
        )

    cover, mult, step, stages = chosen
    t0 = step / 2.0
    values_start = dmap.values(f)
    current = dmap.copy()
    stage_traces = []
    for s, (anchor_idx, ball, hull, center) in enumerate(stages):
        before = current.values(f)
        anchor_point = dmap.point(anchor_idx)
        deform = homotopy_deform(f, current, anchor_point, frames[anchor_idx],
                                 ball, beta, nu=eps_cov / 4.0, radius=radius, t0=t0)
        new = deform.apply(step)
        after = new.values(f)
        moved = np.nonzero([pair.norm_e(new.nodes[i] - current.nodes[i]) > 0
                            for i in range(new.size)])[0]
        disp = max((pair.norm_e(new.nodes[i] - current.nodes[i]) for i in moved),
                   default=0.0)
        ball_dec = min((before[i] - after[i] for i in np.nonzero(ball)[0]),
                       default=np.inf)
        st = StageTrace(stage=s, anchor_index=anchor_idx, moved=len(moved),
                        min_decrease_on_ball=float(ball_dec),
                        max_displacement=float(disp))
        stage_traces.append(st)
        if trace is not None:
            for i in moved:
                trace({"stage": s, "node": int(i), "value_before": float(before[i]),
                       "value_after": float(after[i]),
                       "displacement": float(pair.norm_e(new.nodes[i] - current.nodes[i]))})
        current = new

    values_end = current.values(f)
    k2_idx = np.nonzero(k2_mask)[0]
    min_dec = float(min(values_start[i] - values_end[i] for i in k2_idx))
    max_disp = float(max(pair.norm_e(current.nodes[i] - dmap.nodes[i])
                         for i in range(dmap.size)))
    report = IterateReport(
        cover_eps=cover.eps, multiplicity=mult, stages=stage_traces,
        decrease_bound=beta * delta * delta / (864.0 * mult * mult),
        displacement_bound=delta / 2.0,
        min_decrease_on_set=min_dec, max_displacement=max_disp,
    )
    return current, report


# ---------------------------------------------------------------------------
# first-order deformation
# ---------------------------------------------------------------------------

@dataclass
class FirstOrderReport:
    moved: int
    total_travel: float
    min_sampled_dual: float
    hypothesis_ok: bool


def first_order_deform(f: ConstrainedFunctional, dmap: DiscreteMap, k3_mask: np.ndarray,
                       c_level: float, eps_level: float, travel_radius: float,
                       *, rng: np.random.Generator | None = None,
                       ball_samples: int = 6, step_fraction: float = 0.25,
                       trace=None):
    """Normalized gradient flow pushing near-level nodes below the level.

    Hypotheses: values on the set lie within eps of the level and the
    constrained dual norm stays above 8 eps / travel_radius on twice the
    travel radius around each set node (verified on random ball samples).
    Nodes already below level - 2 eps are untouched; set nodes are flowed
    along minus the normalized sphere gradient, with total arc length capped
    at twice the travel radius, until their value drops to level - eps.
    """
    pair = dmap.pair
    if np.any(k3_mask & dmap.boundary):
        raise ValueError("the deformed compact set must avoid boundary nodes")
    rng = np.random.default_rng(0) if rng is None else rng
    grad_floor = 8.0 * eps_level / travel_radius

    min_sample = np.inf
    for i in np.nonzero(k3_mask)[0]:
        point = dmap.point(i)
        min_sample = min(min_sample, constrained_dual_norm(f, point))
        for _ in range(ball_samples):
            direction = pair.project_tangent_h(point, rng.standard_normal(pair.dim))
            nrm = pair.norm_e(direction.v)
            if nrm == 0.0:
                continue
            span = rng.uniform(0.0, 1.9 * travel_radius)
            probe = exp_map(point, TangentVector(point, (span / nrm) * direction.v))
            if pair.norm_e(probe.u - point.u) <= 2.0 * travel_radius:
                min_sample = min(min_sample, constrained_dual_norm(f, probe))
    hypothesis_ok = bool(min_sample >= grad_floor)

    out = dmap.copy()
    values = out.values(f)
    moved = 0
    worst_travel = 0.0
    for i in np.nonzero(k3_mask)[0]:
        if values[i] <= c_level - 2.0 * eps_level:
            continue
        u = out.point(i)
        val = values[i]
        travel = 0.0
        budget = 2.0 * travel_radius
        step = step_fraction * travel_radius
        iterations = 0
        while val > c_level - eps_level:
            iterations += 1
            if iterations > 400:
                raise SlowDecrease(f"node {i} stalled in the gradient flow")
            if travel >= budget:
                raise SlowDecrease(
                    f"node {i} exhausted the travel budget {budget:.3e} at value {val:.6e}"
                )
            grad = sphere_gradient(f, u)
            nrm = pair.norm_e(grad.v)
            if nrm <= ZERO_DIRECTION:
                raise SlowDecrease(f"node {i} hit a vanishing gradient during the flow")
            s = min(step, budget - travel)
            cand = exp_map(u, TangentVector(u, (-s / nrm) * grad.v))
            cand_val = f.value(cand.u)
            while cand_val > val and s > 1e-6 * step:
                s *= 0.5
                cand = exp_map(u, TangentVector(u, (-s / nrm) * grad.v))
                cand_val = f.value(cand.u)
            if cand_val > val:
                raise SlowDecrease(f"node {i} cannot decrease along the gradient")
            u, val = cand, cand_val
            travel += s
        if trace is not None:
            trace({"stage": "first-order", "node": int(i),
                   "value_before": float(values[i]), "value_after": float(val),
                   "displacement": float(pair.norm_e(u.u - dmap.nodes[i]))})
        out.nodes[i] = u.u
        moved += 1
        worst_travel = max(worst_travel, travel)

    report = FirstOrderReport(moved=moved, total_travel=worst_travel,
                              min_sampled_dual=float(min_sample),
                              hypothesis_ok=hypothesis_ok)
    return out, report


# ---------------------------------------------------------------------------
# min-max certification
# ---------------------------------------------------------------------------

@dataclass
class CertifiedPoint:
    """Node passing both first- and second-order minimax tests."""

    index: int
    point: SpherePoint
    value: float
    dual_norm: float
    morse_count: int
    morse_threshold: float
    eps: float


@dataclass
class DeformationWitness:
    """Strictly lower competitor contradicting the input level."""

    dmap: DiscreteMap
    max_value: float
    c: float
    eps: float
    diagnostics: dict


def certify_minimax_point(f: ConstrainedFunctional, dmap: DiscreteMap, c: float,
                          eps: float, alpha1: float, radius: float, n: int = 1,
                          *, rng: np.random.Generator | None = None, trace=None):
    """Either an approximate critical node or a strictly lower competitor.

    Scans the nodes at level c - eps and above.  A node whose constrained
    dual norm is at most 3 eps^alpha1 and whose approximate Morse count at
    threshold eps^alpha1 is at most n certifies the level.  If every node
    escapes through one of the two alternatives (large gradient, or an
    (n+1)-dimensional strongly negative subspace), the two-stage deformation
    is attempted; on success the witness has maximum value at most c - eps,
    flagging the input level as inconsistent.
    """
    if not 0.0 < alpha1 <= f.alpha / (2.0 * (f.alpha + 2.0)):
        raise ValueError("alpha1 must lie in (0, alpha / (2 (alpha + 2))]")
    rng = np.random.default_rng(0) if rng is None else rng
    pair = dmap.pair
    theta = eps ** alpha1

    values = dmap.values(f)
    k_mask = (values >= c - eps) & ~dmap.boundary
    k_idx = np.nonzero(k_mask)[0]
    if k_idx.size == 0:
        raise BudgetExceeded("no node reaches level c - eps; the level input is stale")
    if np.any(values[dmap.boundary] > c - 2.0 * eps):
        raise BudgetExceeded("boundary values too close to the level; shrink eps")
    for i in k_idx:
        if pair.norm_e(dmap.nodes[i]) > radius - 1.0 + 1e-9:
            raise PreconditionOutOfBall(f"high node {i} escapes the radius - 1 ball")

    duals = {int(i): constrained_dual_norm(f, dmap.point(i)) for i in k_idx}
    eligible = []
    morse_counts = {}
    for i in sorted(k_idx, key=lambda j: duals[int(j)]):
        if duals[int(i)] <= 3.0 * theta:
            report = approx_morse_index(f, dmap.point(i), theta)
            morse_counts[int(i)] = report.count
            if report.count <= n:
                eligible.append((int(i), report))
    if eligible:
        i, report = eligible[0]
        return CertifiedPoint(index=i, point=dmap.point(i), value=float(values[i]),
                              dual_norm=duals[i], morse_count=report.count,
                              morse_threshold=theta, eps=eps)

    # Deformation route: split the high set by which alternative holds.
    holder_m = f.holder_m(radius)
    constants = GeometryConstants(radius, dmap.mu,
                                  max(1.0, f.bound_k(radius, dmap.mu)))
    delta3 = constants.descent_radius(theta, n, f.alpha, holder_m)
    half_width = np.inf if holder_m == 0.0 else theta / holder_m
    delta = 0.5 * min(half_width, delta3)

    t2_mask = np.zeros(dmap.size, dtype=bool)
    for i in k_idx:
        if int(i) not in morse_counts:
            morse_counts[int(i)] = approx_morse_index(f, dmap.point(i), theta).count
        if morse_counts[int(i)] >= n + 1:
            t2_mask[i] = True
    t1_mask = k_mask & ~t2_mask

    bmask = dmap.boundary
    bparams = dmap.params[bmask]
    nu = 0.5 * float(np.min(_param_dist(dmap.params[k_mask], bparams))) \
        if bparams.size else 1.0
    if nu <= 0.0:
        raise BudgetExceeded("high set touches the boundary in parameter space")

    diagnostics = {"theta": theta, "delta": delta, "nu": nu,
                   "t1": int(t1_mask.sum()), "t2": int(t2_mask.sum())}
    if np.any(t1_mask) and theta < 16.0 * eps / delta:
        raise BudgetExceeded(
            f"eps too large for the first-order route: theta {theta:.3e} < "
            f"16 eps / delta = {16.0 * eps / delta:.3e}"
        )

    current = dmap
    if np.any(t2_mask):
        n_guess = math.ceil((2.0 * math.sqrt(n + 1.0) + 2.0) ** n)
        if theta * delta * delta / (864.0 * n_guess * n_guess) <= 2.0 * eps:
            raise BudgetExceeded(
                "eps too large for the second-order route: the certified decrease "
                "cannot clear 2 eps at these constants"
            )
        current, it_report = iterate_deform(f, current, t2_mask, theta, delta, nu,
                                            radius, trace=trace)
        diagnostics["iterate"] = {
            "min_decrease": it_report.min_decrease_on_set,
            "bound": it_report.decrease_bound,
            "max_displacement": it_report.max_displacement,
        }
    if np.any(t1_mask):
        current, fo_report = first_order_deform(f, current, t1_mask, c, eps,
                                                delta / 2.0, rng=rng, trace=trace)
        diagnostics["first_order"] = {
            "moved": fo_report.moved,
            "min_sampled_dual": fo_report.min_sampled_dual,
            "hypothesis_ok": fo_report.hypothesis_ok,
        }

    new_values = current.values(f)
    max_val = float(new_values[~current.boundary].max())
    if max_val > c - eps + SLACK:
        raise BudgetExceeded(
            f"deformation left max value {max_val:.6e} above c - eps = {c - eps:.6e}"
        )
    return DeformationWitness(dmap=current, max_value=max_val, c=c, eps=eps,
                              diagnostics=diagnostics)
