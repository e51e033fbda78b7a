"""ICU-side right-of-way management: FCFS priorities, vehicle sets, HPQ grants.

Vehicles register on entering the control range and join their lane queue in
set S3 with the next priority value. Each control cycle grants at most one
vehicle: a CHV needs zero trajectory conflicts against granted (S2) and
higher-priority waiting (S3) vehicles; a CAV tolerates a single S2 conflict,
recorded as its conflict partner. Granting moves the vehicle to S2 and
compacts the remaining priorities; passing the last conflict point promotes
it to S1 and stops it from blocking anyone.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .errors import DuplicateId, NonpositiveSpeed, NotInS3
from .geometry import ConflictGraph


@dataclass
class VehicleRecord:
    vid: str
    chv: bool                 # True = human-driven (C(V) == 1)
    traj: int                 # trajectory id 0-11
    lane: int                 # entry approach 1-4
    t_enter: float
    priority: Optional[int] = None   # distinct positive ints within S3
    group: str = "S3"                # S3 -> S2 -> S1
    granted_at: Optional[float] = None


@dataclass
class GrantDecision:
    granted: str = ""         # vehicle id, empty = no grant this cycle
    conflicting: str = ""     # the at-most-one S2 conflict of a granted CAV
    candidates: list = field(default_factory=list)  # (vid, n1, n2) diagnostics

    def __bool__(self) -> bool:
        return bool(self.granted)


@dataclass
class SafetyGate:
    """Entry-time separation of two vehicles sharing a conflict point."""

    front_entry_t: float      # when the prior vehicle entered the intersection
    headway: float            # minimum time headway
    front_dist: float         # stop line -> conflict point, prior vehicle [m]
    ego_dist: float           # stop line -> conflict point, ego [m]
    front_speed: float
    ego_speed: float
    ego_entry_t: float = 0.0


def earliest_entry_time(gate: SafetyGate) -> float:
    """Earliest ego entry time that keeps the conflict-point gap >= headway."""
    if gate.front_speed <= 0.0 or gate.ego_speed <= 0.0:
        raise NonpositiveSpeed("safety gate needs positive speeds")
    return (
        gate.front_entry_t
        + gate.headway
        + gate.front_dist / gate.front_speed
        - gate.ego_dist / gate.ego_speed
    )


def detect_abnormal(record: VehicleRecord, t_now: float, entry_len: float,
                    speed_limit: float, sigma: float) -> bool:
    """True when a granted vehicle has been passing for implausibly long."""
    if record.granted_at is None:
        return False
    elapsed = t_now - record.granted_at
    return elapsed > entry_len / (speed_limit / 2.0) + sigma


def control_cycle_for_flow(flow_pcuh: float, slow_cycle: float = 1.0,
                           fast_cycle: float = 0.2, slow_flow: float = 400.0,
                           fast_flow: float = 1600.0) -> float:
    """Optional linear cycle-length schedule (off by default in configs)."""
    if flow_pcuh <= slow_flow:
        return slow_cycle
    if flow_pcuh >= fast_flow:
        return fast_cycle
    frac = (flow_pcuh - slow_flow) / (fast_flow - slow_flow)
    return slow_cycle + frac * (fast_cycle - slow_cycle)


class AllocatorState:
    """Mutable scheduling state; one instance per simulation run."""

    def __init__(self, graph: ConflictGraph, lanes: int = 4):
        self.graph = graph
        self.vehicles: dict[str, VehicleRecord] = {}
        self.queues: dict[int, deque] = {i: deque() for i in range(1, lanes + 1)}
        self.s2: list[str] = []   # grant order
        self.s1: list[str] = []

    # ---- membership -------------------------------------------------------

    def s3_ids(self) -> list:
        return [vid for q in self.queues.values() for vid in q]

    def register(self, vid: str, chv: bool, traj: int, t_enter: float) -> VehicleRecord:
        if vid in self.vehicles:
            raise DuplicateId(vid)
        lane = traj // 3 + 1
        rec = VehicleRecord(
            vid=vid, chv=chv, traj=traj, lane=lane, t_enter=t_enter,
            priority=len(self.s3_ids()) + 1,
        )
        self.vehicles[vid] = rec
        self.queues[lane].append(vid)
        return rec

    def heads(self) -> list:
        """Queue heads (Qp) in ascending priority order."""
        hs = [self.vehicles[q[0]] for q in self.queues.values() if q]
        hs.sort(key=lambda r: r.priority)
        return hs

    def queue_snapshot(self) -> dict:
        return {lane: list(q) for lane, q in self.queues.items()}

    # ---- the HPQ cycle ------------------------------------------------------

    def hpq_step(self) -> GrantDecision:
        """One cycle over the queue heads; read-only, at most one grant."""
        conflicts = self.graph.conflicts
        s3 = self.s3_ids()
        diag = []
        for cand in self.heads():
            n1 = 0
            ic = ""
            for vid2 in self.s2:
                other = self.vehicles[vid2]
                if conflicts(cand.traj, other.traj):
                    n1 += 1
                    ic = vid2
            n2 = 0
            for vid3 in s3:
                other = self.vehicles[vid3]
                if other.priority >= cand.priority:
                    continue
                if conflicts(cand.traj, other.traj):
                    n2 += 1
            diag.append((cand.vid, n1, n2))
            if cand.chv:
                if n1 + n2 == 0:
                    return GrantDecision(cand.vid, "", diag)
            elif n1 <= 1 and n2 == 0:
                return GrantDecision(cand.vid, ic if n1 == 1 else "", diag)
        return GrantDecision("", "", diag)

    def apply_grant(self, decision: GrantDecision, t_now: float) -> VehicleRecord:
        rec = self.vehicles.get(decision.granted)
        if rec is None or rec.group != "S3":
            raise NotInS3(decision.granted)
        self.queues[rec.lane].remove(rec.vid)
        granted_priority = rec.priority
        for vid in self.s3_ids():
            other = self.vehicles[vid]
            if other.priority > granted_priority:
                other.priority -= 1
        rec.priority = None
        rec.group = "S2"
        rec.granted_at = t_now
        self.s2.append(rec.vid)
        return rec

    def promote_to_s1(self, vid: str) -> None:
        rec = self.vehicles[vid]
        if rec.group != "S2":
            return
        self.s2.remove(vid)
        rec.group = "S1"
        self.s1.append(vid)

    def remove(self, vid: str) -> None:
        """Purge a departed vehicle from all scheduling structures."""
        rec = self.vehicles.pop(vid, None)
        if rec is None:
            return
        if vid in self.s2:
            self.s2.remove(vid)
        if vid in self.s1:
            self.s1.remove(vid)
        q = self.queues[rec.lane]
        if vid in q:
            pri = rec.priority
            q.remove(vid)
            for other_id in self.s3_ids():
                other = self.vehicles[other_id]
                if other.priority > pri:
                    other.priority -= 1

    def handle_abnormal(self, vid: str) -> None:
        """Kick a stuck vehicle out of scheduling and demote its lane mates.

        Same-lane S3 vehicles move behind everything else, keeping their
        relative order; other lanes keep their order with compacted values.
        """
        rec = self.vehicles.pop(vid)
        if vid in self.s2:
            self.s2.remove(vid)
        if vid in self.s1:
            self.s1.remove(vid)
        if vid in self.queues[rec.lane]:
            self.queues[rec.lane].remove(vid)
        same_lane = list(self.queues[rec.lane])
        others = [v for v in self.s3_ids() if v not in same_lane]
        others.sort(key=lambda v: self.vehicles[v].priority)
        p = 0
        for other in others:
            p += 1
            self.vehicles[other].priority = p
        for mate in same_lane:
            p += 1
            self.vehicles[mate].priority = p
