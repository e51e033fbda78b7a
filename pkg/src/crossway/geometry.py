"""Intersection geometry: lane frames, the 12 movement trajectories, conflict graph.

Layout is the canonical two-way single-lane crossing: four approaches at 90
degree increments, right-hand traffic, entry/exit lane centerlines offset
lane_width/2 from the road axis. Turning trajectories are parametrized from a
lane frame anchored entry_len before the stop line; straight trajectories span
the full control-range diameter. All arc-length/heading case formulas are
closed-form and continuous at case boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import (
    EntryAreaTooShort,
    GeometryInconsistent,
    OffPath,
    OutOfRange,
    ZeroDeceleration,
)

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi

ON_PATH_TOL = 0.05    # lateral tolerance for "point lies on trajectory" [m]
_TOL = 1e-9           # algebraic tolerance for case/domain boundaries
_TANGENT_TOL = 1e-7   # circle tangency rejection threshold [m]


class Movement(Enum):
    RIGHT = "right"
    STRAIGHT = "straight"
    LEFT = "left"


_MOVEMENT_SLOT = {Movement.RIGHT: 0, Movement.STRAIGHT: 1, Movement.LEFT: 2}

# Approach index -> travel direction [rad]. Opposing approaches are paired
# (1: east, 2: west, 3: north, 4: south) so that the right turn of approach 1
# and the left turn of approach 2 share an exit lane (Fig. 4 coloring) and the
# right turn of approach 2 merges with the straight of approach 3.
APPROACH_AXIS = {1: 0.0, 2: math.pi, 3: HALF_PI, 4: -HALF_PI}


def trajectory_id(approach: int, movement: Movement) -> int:
    """Trajectory numbering: rights 0/3/6/9, straights 1/4/7/10, lefts 2/5/8/11."""
    return 3 * (approach - 1) + _MOVEMENT_SLOT[movement]


def entry_area_min_length(speed_limit: float, comfort_decel: float) -> float:
    """Minimum entry-area length to stop gracefully from the speed limit."""
    if comfort_decel == 0.0:
        raise ZeroDeceleration("comfort deceleration must be nonzero")
    return abs(speed_limit * speed_limit / (2.0 * comfort_decel))


def _wrap_pi(a: float) -> float:
    return (a + math.pi) % TWO_PI - math.pi


@dataclass
class _Seg:
    """Straight primitive with its arc-length anchor on the trajectory."""

    p0: tuple[float, float]
    p1: tuple[float, float]
    s0: float

    def __post_init__(self):
        dx = self.p1[0] - self.p0[0]
        dy = self.p1[1] - self.p0[1]
        self.length = math.hypot(dx, dy)
        self.ux = dx / self.length
        self.uy = dy / self.length

    def point_at(self, t: float) -> tuple[float, float]:
        return (self.p0[0] + t * self.ux, self.p0[1] + t * self.uy)

    def heading(self) -> float:
        return math.atan2(self.uy, self.ux)


@dataclass
class _Arc:
    """Circular primitive; sweep > 0 is counterclockwise."""

    center: tuple[float, float]
    radius: float
    ang0: float
    sweep: float
    s0: float

    def __post_init__(self):
        self.length = self.radius * abs(self.sweep)

    def param_of(self, x: float, y: float) -> Optional[float]:
        """Sweep fraction in [0, 1] of a point known to lie on the circle."""
        ang = math.atan2(y - self.center[1], x - self.center[0])
        if self.sweep >= 0.0:
            rel = (ang - self.ang0) % TWO_PI
        else:
            rel = (self.ang0 - ang) % TWO_PI
        span = abs(self.sweep)
        if rel <= span + 1e-9:
            return min(rel / span, 1.0)
        if rel >= TWO_PI - 1e-9:
            return 0.0
        return None

    def point_at(self, frac: float) -> tuple[float, float]:
        ang = self.ang0 + self.sweep * frac
        return (
            self.center[0] + self.radius * math.cos(ang),
            self.center[1] + self.radius * math.sin(ang),
        )

    def heading_at(self, frac: float) -> float:
        ang = self.ang0 + self.sweep * frac
        return _wrap_pi(ang + (HALF_PI if self.sweep >= 0 else -HALF_PI))


@dataclass
class TrajectoryPath:
    """One movement path: entry straight, optional core arc, exit straight.

    Arc length s runs over [0, total_length] with the paper parametrization
    (turns anchored entry_len before the stop line; straights spanning the
    control diameter). Drive coordinates add entry/exit extensions so every
    movement covers control boundary to control boundary; the stop line sits
    at control_radius - lane_width in drive coordinates for all movements.
    """

    traj_id: int
    movement: Movement
    approach: int
    axis: float                      # travel direction of the entry lane [rad]
    origin: tuple[float, float]      # lane-frame origin (global)
    entry_len: float                 # straight run before the turn starts
    control_radius: float
    lane_width: float
    turn_radius: Optional[float]     # None for straight movements

    def __post_init__(self):
        self._cos = math.cos(self.axis)
        self._sin = math.sin(self.axis)
        L, lw = self.control_radius, self.lane_width
        if self.movement is Movement.STRAIGHT:
            self.total_length = 2.0 * L
            self.entry_extension = 0.0
            self.stopline_s = L - lw
            self.exit_start_s = L + lw
            self.segments = [_Seg(self.origin, self.lane_to_global(self.total_length, 0.0), 0.0)]
        else:
            R = self.turn_radius
            side = 1.0 if self.movement is Movement.LEFT else -1.0
            l = self.entry_len
            self.total_length = 2.0 * l + HALF_PI * R
            self.entry_extension = L - lw - l
            self.stopline_s = l
            self.exit_start_s = l + HALF_PI * R
            center = self.lane_to_global(l, side * R)
            ang0 = _wrap_pi(self.axis - side * HALF_PI)
            arc = _Arc(center, R, ang0, side * HALF_PI, l)
            exit0 = self.lane_to_global(l + R, side * (R + 0.0))
            exit1 = self.lane_to_global(l + R, side * (R + l))
            self.segments = [
                _Seg(self.origin, self.lane_to_global(l, 0.0), 0.0),
                arc,
                _Seg(exit0, exit1, self.exit_start_s),
            ]
        self.exit_extension = self.entry_extension
        self.drive_length = self.entry_extension + self.total_length + self.exit_extension
        ex, ey, eh = self.position_heading_at(self.total_length)
        self._end_pose = (ex, ey, eh)
        self.exit_heading = eh
        # exit lane identity: final travel direction, rounded to a quadrant key
        self.exit_key = int(round(math.degrees(eh))) % 360
        self.stopline_drive_s = self.entry_extension + self.stopline_s

    # ---- frames -----------------------------------------------------------

    def lane_to_global(self, alpha: float, beta: float) -> tuple[float, float]:
        return (
            self.origin[0] + alpha * self._cos - beta * self._sin,
            self.origin[1] + alpha * self._sin + beta * self._cos,
        )

    def global_to_lane(self, x: float, y: float) -> tuple[float, float]:
        dx = x - self.origin[0]
        dy = y - self.origin[1]
        return (dx * self._cos + dy * self._sin, -dx * self._sin + dy * self._cos)

    # ---- arc-length / heading maps ---------------------------------------

    def arc_length_heading(self, alpha: float, beta: float) -> tuple[float, float]:
        """(s, heading-deg-in-lane-frame) of a lane-frame point on the path."""
        if self.movement is Movement.STRAIGHT:
            if abs(beta) > ON_PATH_TOL or alpha < -ON_PATH_TOL or alpha > self.total_length + ON_PATH_TOL:
                raise OffPath(f"({alpha:.3f}, {beta:.3f}) not on straight trajectory {self.traj_id}")
            return (min(max(alpha, 0.0), self.total_length), 0.0)

        R = self.turn_radius
        side = 1.0 if self.movement is Movement.LEFT else -1.0
        l = self.entry_len
        b = side * beta  # mirrored ordinate: turns look like left turns
        candidates = []
        if alpha <= l + ON_PATH_TOL:
            candidates.append(("entry", abs(beta)))
        phi = math.atan2(alpha - l, R - b)
        if -1e-6 <= phi <= HALF_PI + 1e-6:
            candidates.append(("arc", abs(math.hypot(alpha - l, R - b) - R)))
        if b >= R - ON_PATH_TOL:
            candidates.append(("exit", abs(alpha - (l + R))))
        case, dist = min(candidates, key=lambda c: c[1], default=("entry", float("inf")))
        if dist > ON_PATH_TOL:
            raise OffPath(f"({alpha:.3f}, {beta:.3f}) is {dist:.3f} m off trajectory {self.traj_id}")
        if case == "entry":
            return (min(max(alpha, 0.0), l), 0.0)
        if case == "arc":
            phi = min(max(phi, 0.0), HALF_PI)
            return (l + R * phi, side * math.degrees(phi))
        b = min(max(b, R), R + l)
        return (l + HALF_PI * R + b - R, side * 90.0)

    def position_heading_at(self, s: float) -> tuple[float, float, float]:
        """Global (x, y, heading-rad) at arc length s in [0, total_length]."""
        if s < -1e-9 or s > self.total_length + 1e-9:
            raise OutOfRange(f"s={s:.6f} outside [0, {self.total_length:.6f}] on trajectory {self.traj_id}")
        s = min(max(s, 0.0), self.total_length)
        if self.movement is Movement.STRAIGHT:
            x, y = self.lane_to_global(s, 0.0)
            return (x, y, _wrap_pi(self.axis))
        R = self.turn_radius
        side = 1.0 if self.movement is Movement.LEFT else -1.0
        l = self.entry_len
        arc_end = l + HALF_PI * R
        if s <= l:
            x, y = self.lane_to_global(s, 0.0)
            return (x, y, _wrap_pi(self.axis))
        if s <= arc_end:
            phi = (s - l) / R
            x, y = self.lane_to_global(l + R * math.sin(phi), side * R * (1.0 - math.cos(phi)))
            return (x, y, _wrap_pi(self.axis + side * phi))
        x, y = self.lane_to_global(l + R, side * (R + (s - arc_end)))
        return (x, y, _wrap_pi(self.axis + side * HALF_PI))

    # ---- drive coordinates (control boundary to control boundary) --------

    def drive_s(self, traj_s: float) -> float:
        return traj_s + self.entry_extension

    def traj_s(self, drive_s: float) -> float:
        return drive_s - self.entry_extension

    def pose_at_drive(self, s: float) -> tuple[float, float, float]:
        if s < -1e-9 or s > self.drive_length + 1e-9:
            raise OutOfRange(f"drive s={s:.6f} outside [0, {self.drive_length:.6f}]")
        s = min(max(s, 0.0), self.drive_length)
        if s < self.entry_extension:
            x, y = self.lane_to_global(s - self.entry_extension, 0.0)
            return (x, y, _wrap_pi(self.axis))
        inner = s - self.entry_extension
        if inner <= self.total_length:
            return self.position_heading_at(inner)
        ex, ey, eh = self._end_pose
        t = inner - self.total_length
        return (ex + t * math.cos(eh), ey + t * math.sin(eh), eh)

    def nearest_on_path(self, x: float, y: float) -> tuple[float, float, tuple[float, float]]:
        """(drive_s, tangent heading, point) of the closest centerline point.

        Projection covers the drive extensions so controllers stay defined
        over the whole control range.
        """
        best = None
        ext = self.entry_extension
        for prim in self.segments:
            if isinstance(prim, _Seg):
                t = (x - prim.p0[0]) * prim.ux + (y - prim.p0[1]) * prim.uy
                lo = -ext if prim.s0 == 0.0 else 0.0
                hi = prim.length + (ext if prim.s0 + prim.length >= self.total_length - 1e-9 else 0.0)
                t = min(max(t, lo), hi)
                px, py = prim.point_at(t)
                d = math.hypot(x - px, y - py)
                cand = (d, ext + prim.s0 + t, prim.heading(), (px, py))
            else:
                ang = math.atan2(y - prim.center[1], x - prim.center[0])
                if prim.sweep >= 0.0:
                    rel = (ang - prim.ang0) % TWO_PI
                else:
                    rel = (prim.ang0 - ang) % TWO_PI
                span = abs(prim.sweep)
                frac = rel / span if rel <= span else (0.0 if rel - span > (TWO_PI - span) / 2.0 else 1.0)
                frac = min(max(frac, 0.0), 1.0)
                px, py = prim.point_at(frac)
                d = math.hypot(x - px, y - py)
                cand = (d, ext + prim.s0 + prim.length * frac, prim.heading_at(frac), (px, py))
            if best is None or cand[0] < best[0]:
                best = cand
        _, s_drive, heading, point = best
        return (s_drive, heading, point)


@dataclass(frozen=True)
class ConflictPoint:
    """A shared point of two trajectories with its per-trajectory arc positions."""

    s_on: dict            # traj_id -> arc length (paper parametrization)
    xy: tuple[float, float]
    kind: str             # "crossing" | "double" | "merging"


@dataclass
class ConflictGraph:
    """Pairwise conflict relations among the 12 movement trajectories.

    crossing: single transversal (side-exchange) intersections - the edges of
    the classic 16-edge diagram. double: pairs whose centerlines intersect
    twice (opposing left turns); still treated as conflicts by the scheduler.
    merging: pairs entering the same exit lane, keyed to the merge point.
    """

    nodes: list
    crossing: dict
    double: dict
    merging: dict

    def __post_init__(self):
        n = max(self.nodes) + 1
        self._adj = [[False] * n for _ in range(n)]
        self._points = {}
        for store in (self.crossing, self.double, self.merging):
            for (a, b), pts in store.items():
                self._adj[a][b] = self._adj[b][a] = True
                plist = pts if isinstance(pts, list) else [pts]
                self._points[(a, b)] = plist
                self._points[(b, a)] = plist
        self._last_s = {}
        for t in self.nodes:
            s_max = 0.0
            for (a, b), plist in self._points.items():
                if a == t:
                    for p in plist:
                        s_max = max(s_max, p.s_on[t])
            self._last_s[t] = s_max

    @property
    def crossing_pairs(self) -> set:
        return set(self.crossing.keys())

    @property
    def merging_pairs(self) -> set:
        return set(self.merging.keys())

    @property
    def double_pairs(self) -> set:
        return set(self.double.keys())

    def conflicts(self, a: int, b: int) -> bool:
        """True when the trajectories cross, double-cross, or merge."""
        return self._adj[a][b]

    def points_between(self, a: int, b: int) -> list:
        return list(self._points.get((a, b), []))

    def first_point_for(self, ego: int, partner: int) -> ConflictPoint:
        """Conflict point the ego reaches first (its safest virtual anchor)."""
        pts = self._points.get((ego, partner))
        if not pts:
            from .errors import NoConflictPoint

            raise NoConflictPoint(f"trajectories {ego} and {partner} do not conflict")
        return min(pts, key=lambda p: p.s_on[ego])

    def last_conflict_s(self, traj: int, default: float = 0.0) -> float:
        """Largest conflict arc position on a trajectory (S1 promotion gate)."""
        s = self._last_s.get(traj, 0.0)
        return s if s > 0.0 else default


@dataclass
class IntersectionModel:
    """Validated intersection dimensions plus the 12 derived trajectories."""

    entry_len: float          # entry-area length [m]
    lane_width: float         # [m]
    control_radius: float     # registration/control range [m]
    left_radius: float        # left-turn radius [m]
    right_radius: float       # right-turn radius [m]
    speed_limit: float        # [m/s]
    comfort_decel: float      # magnitude [m/s^2]
    trajectories: list = field(default_factory=list)

    def trajectory(self, approach: int, movement: Movement) -> TrajectoryPath:
        return self.trajectories[trajectory_id(approach, movement)]

    def stopline_drive_s(self) -> float:
        return self.control_radius - self.lane_width


def build_intersection(
    entry_len: float = 70.0,
    lane_width: float = 3.5,
    control_radius: float = 100.0,
    left_radius: float = 5.25,
    right_radius: float = 1.75,
    speed_limit: float = 13.8,
    comfort_decel: float = 2.0,
) -> IntersectionModel:
    """Build and validate the canonical four-approach model."""
    for name, v in (
        ("entry_len", entry_len),
        ("lane_width", lane_width),
        ("control_radius", control_radius),
        ("left_radius", left_radius),
        ("right_radius", right_radius),
        ("speed_limit", speed_limit),
    ):
        if v < 0.0 or (v == 0.0 and name != "speed_limit"):
            raise GeometryInconsistent(f"{name} must be positive, got {v}")
    rsum = left_radius + right_radius
    if abs(rsum - 2.0 * lane_width) > 1e-9 * max(rsum, 2.0 * lane_width):
        raise GeometryInconsistent(
            f"turn radii must satisfy left+right = 2*lane_width: {rsum} != {2.0 * lane_width}"
        )
    min_len = entry_area_min_length(speed_limit, comfort_decel)
    if entry_len < min_len - 1e-9:
        raise EntryAreaTooShort(
            f"entry area {entry_len} m < braking requirement {min_len:.2f} m"
        )
    if control_radius <= entry_len + lane_width:
        raise GeometryInconsistent(
            f"control radius {control_radius} must exceed entry_len + lane_width = {entry_len + lane_width}"
        )

    model = IntersectionModel(
        entry_len,
        lane_width,
        control_radius,
        left_radius,
        right_radius,
        speed_limit,
        comfort_decel,
    )
    half = 0.5 * lane_width
    for approach, axis in APPROACH_AXIS.items():
        c, s = math.cos(axis), math.sin(axis)
        rx, ry = s, -c  # unit normal to the right of travel
        for movement in (Movement.RIGHT, Movement.STRAIGHT, Movement.LEFT):
            if movement is Movement.STRAIGHT:
                anchor = control_radius
                radius = None
            else:
                anchor = entry_len + lane_width
                radius = left_radius if movement is Movement.LEFT else right_radius
            origin = (-anchor * c + half * rx, -anchor * s + half * ry)
            model.trajectories.append(
                TrajectoryPath(
                    traj_id=trajectory_id(approach, movement),
                    movement=movement,
                    approach=approach,
                    axis=axis,
                    origin=origin,
                    entry_len=entry_len,
                    control_radius=control_radius,
                    lane_width=lane_width,
                    turn_radius=radius,
                )
            )
    model.trajectories.sort(key=lambda t: t.traj_id)
    return model


# ---- analytic pairwise intersections --------------------------------------


def _seg_seg(a: _Seg, b: _Seg) -> list:
    denom = a.ux * b.uy - a.uy * b.ux
    if abs(denom) < 1e-12:
        return []
    dx = b.p0[0] - a.p0[0]
    dy = b.p0[1] - a.p0[1]
    ta = (dx * b.uy - dy * b.ux) / denom
    tb = (dx * a.uy - dy * a.ux) / denom
    if -_TOL <= ta <= a.length + _TOL and -_TOL <= tb <= b.length + _TOL:
        return [(a.s0 + ta, b.s0 + tb, a.point_at(ta))]
    return []


def _seg_arc(seg: _Seg, arc: _Arc) -> list:
    cx = arc.center[0] - seg.p0[0]
    cy = arc.center[1] - seg.p0[1]
    proj = cx * seg.ux + cy * seg.uy
    perp = cx * -seg.uy + cy * seg.ux
    if abs(abs(perp) - arc.radius) < _TANGENT_TOL:
        return []  # tangential contact, not a transversal crossing
    disc = arc.radius * arc.radius - perp * perp
    if disc <= 0.0:
        return []
    root = math.sqrt(disc)
    hits = []
    for t in (proj - root, proj + root):
        if t < -_TOL or t > seg.length + _TOL:
            continue
        px, py = seg.point_at(t)
        frac = arc.param_of(px, py)
        if frac is None:
            continue
        hits.append((seg.s0 + t, arc.s0 + arc.length * frac, (px, py)))
    return hits


def _arc_arc(a: _Arc, b: _Arc) -> list:
    dx = b.center[0] - a.center[0]
    dy = b.center[1] - a.center[1]
    d = math.hypot(dx, dy)
    if d < 1e-12:
        return []
    if abs(d - (a.radius + b.radius)) < _TANGENT_TOL or abs(d - abs(a.radius - b.radius)) < _TANGENT_TOL:
        return []  # tangency (external or internal)
    if d > a.radius + b.radius or d < abs(a.radius - b.radius):
        return []
    ca = (a.radius * a.radius - b.radius * b.radius + d * d) / (2.0 * d)
    h2 = a.radius * a.radius - ca * ca
    if h2 <= 0.0:
        return []
    h = math.sqrt(h2)
    mx = a.center[0] + ca * dx / d
    my = a.center[1] + ca * dy / d
    hits = []
    for sgn in (1.0, -1.0):
        px = mx + sgn * h * -dy / d
        py = my + sgn * h * dx / d
        fa = a.param_of(px, py)
        fb = b.param_of(px, py)
        if fa is None or fb is None:
            continue
        hits.append((a.s0 + a.length * fa, b.s0 + b.length * fb, (px, py)))
    return hits


def _pair_intersections(ta: TrajectoryPath, tb: TrajectoryPath) -> list:
    pts = []
    for pa in ta.segments:
        for pb in tb.segments:
            if isinstance(pa, _Seg) and isinstance(pb, _Seg):
                hits = _seg_seg(pa, pb)
            elif isinstance(pa, _Seg):
                hits = _seg_arc(pa, pb)
            elif isinstance(pb, _Seg):
                hits = [(sa, sb, p) for sb, sa, p in _seg_arc(pb, pa)]
            else:
                hits = _arc_arc(pa, pb)
            pts.extend(hits)
    # collapse duplicates at primitive junctions
    out = []
    for sa, sb, p in sorted(pts):
        if any(abs(sa - q[0]) < 1e-6 and abs(sb - q[1]) < 1e-6 for q in out):
            continue
        out.append((sa, sb, p))
    return out


def compute_conflict_graph(model: IntersectionModel) -> ConflictGraph:
    """Derive crossing edges, double-crossing pairs, and merging pairs.

    Merges are identified by shared exit lane; remaining pairs are classified
    by the parity of their transversal centerline intersections (odd = a true
    crossing, even = the opposing-left double crossing).
    """
    trajs = model.trajectories
    crossing = {}
    double = {}
    merging = {}
    for i in range(len(trajs)):
        for j in range(i + 1, len(trajs)):
            a, b = trajs[i], trajs[j]
            if a.approach == b.approach:
                continue
            if a.exit_key == b.exit_key:
                pt = a.position_heading_at(a.exit_start_s)
                merging[(a.traj_id, b.traj_id)] = ConflictPoint(
                    s_on={a.traj_id: a.exit_start_s, b.traj_id: b.exit_start_s},
                    xy=(pt[0], pt[1]),
                    kind="merging",
                )
                continue
            pts = _pair_intersections(a, b)
            if not pts:
                continue
            if len(pts) % 2 == 1:
                sa, sb, p = pts[0]
                crossing[(a.traj_id, b.traj_id)] = ConflictPoint(
                    s_on={a.traj_id: sa, b.traj_id: sb}, xy=p, kind="crossing"
                )
            else:
                double[(a.traj_id, b.traj_id)] = [
                    ConflictPoint(s_on={a.traj_id: sa, b.traj_id: sb}, xy=p, kind="double")
                    for sa, sb, p in pts
                ]
    return ConflictGraph(
        nodes=[t.traj_id for t in trajs],
        crossing=crossing,
        double=double,
        merging=merging,
    )
