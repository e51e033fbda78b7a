"""Per-CAV decision layer: control-mode switching and reference generation.

Modes follow the right-of-way flag and the surrounding traffic: without right
of way a vehicle follows its leader, waits near the stop line, or cruises;
with right of way it follows, resolves its assigned conflict through a
virtual leader mapped into its own lane frame, or cruises. References feed
the longitudinal MPC as (s_ref, v_ref) plus the mode's headway term and the
partner acceleration used as the disturbance forecast.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import MissingNeighbor, NoConflictPoint


class ControlMode(Enum):
    CAR_FOLLOWING = "car_following"
    CRUISE = "cruise"
    WAITING = "waiting"
    CONFLICT_SOLVING = "conflict_solving"


@dataclass(frozen=True)
class NeighborState:
    """Another vehicle expressed in the ego frame (position already mapped)."""

    vid: str
    s: float        # position along the ego path [m]
    speed: float
    accel: float
    chv: bool = False


@dataclass(frozen=True)
class Reference:
    s_ref: float
    v_ref: float


@dataclass(frozen=True)
class ModePlan:
    """Reference plus the MPC coupling terms implied by the mode."""

    reference: Reference
    headway: float    # h-bar of the error model: h, H, or 0
    omega: float      # partner/leader acceleration forecast


@dataclass
class PlannerInputs:
    granted: bool
    s: float                 # ego position along its path [m]
    speed: float
    stopline_s: float
    leader: Optional[NeighborState] = None    # I_f, mapped into the ego frame
    partner: Optional[NeighborState] = None   # I_c as the virtual leader
    stop_zone: float = 30.0                   # waiting-mode trigger distance
    min_gap: float = 2.0                      # bumper gap floor d_min
    follow_headway: float = 1.5               # h
    conflict_headway_chv: float = 2.0         # H against a CHV partner
    conflict_headway_cav: float = 1.5         # H against a CAV partner
    target_speed: float = 13.8
    vehicle_len: float = 4.5
    stop_offset: float = 3.0                  # stop-line standoff l_tar

    def conflict_headway(self, partner: NeighborState) -> float:
        return self.conflict_headway_chv if partner.chv else self.conflict_headway_cav


def virtual_map(ego_conflict_s: float, partner_conflict_s: float, partner_s: float) -> float:
    """Map a conflicting vehicle into the ego frame, preserving its distance
    to the shared conflict point."""
    if ego_conflict_s is None or partner_conflict_s is None:
        raise NoConflictPoint("no shared conflict point to map through")
    return ego_conflict_s - (partner_conflict_s - partner_s)


def switch_mode(inputs: PlannerInputs) -> ControlMode:
    """Control-mode switching for one CAV snapshot."""
    if not inputs.granted:
        if inputs.leader is not None:
            return ControlMode.CAR_FOLLOWING
        if inputs.stopline_s - inputs.s < inputs.stop_zone:
            return ControlMode.WAITING
        return ControlMode.CRUISE
    leader, partner = inputs.leader, inputs.partner
    d_leader = leader.s - inputs.s if leader is not None else None
    d_partner = partner.s - inputs.s if partner is not None else None
    if leader is not None and (partner is None or d_leader < d_partner):
        return ControlMode.CAR_FOLLOWING
    if partner is not None:
        return ControlMode.CONFLICT_SOLVING
    return ControlMode.CRUISE


def reference_for(mode: ControlMode, inputs: PlannerInputs) -> ModePlan:
    """Reference position/speed and MPC coupling for the selected mode."""
    if mode is ControlMode.CAR_FOLLOWING:
        leader = inputs.leader
        if leader is None:
            raise MissingNeighbor("car following needs a leader")
        s_ref = leader.s - inputs.min_gap - inputs.vehicle_len - inputs.follow_headway * inputs.speed
        return ModePlan(Reference(s_ref, leader.speed), inputs.follow_headway, leader.accel)
    if mode is ControlMode.CRUISE:
        return ModePlan(Reference(inputs.s, inputs.target_speed), 0.0, 0.0)
    if mode is ControlMode.WAITING:
        return ModePlan(Reference(inputs.stopline_s - inputs.stop_offset, 0.0), 0.0, 0.0)
    partner = inputs.partner
    if partner is None:
        raise MissingNeighbor("conflict solving needs a partner")
    headway = inputs.conflict_headway(partner)
    s_ref = partner.s - inputs.min_gap - inputs.vehicle_len - headway * inputs.speed
    return ModePlan(Reference(s_ref, partner.speed), headway, partner.accel)
