"""OCEAN personality traits mapped to agent behaviors and group features."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scenario import OceanVector

LEADERSHIP_WEIGHT = 0.5
EXTRAVERSION_WEIGHT = 0.1
AC_WEIGHT = 0.45
LEADER_THRESHOLD = 0.9
MAX_COHESION = 3.0
MAX_DESIRED_SPEED = 1.2
RADIUS_BASE = 2.0
RADIUS_PER_COHESION = -0.4


@dataclass(frozen=True)
class Behaviors:
    walking_speed: float  # psi, [1, 2]
    leadership: float  # omega, [0, 1]
    impatience: float  # beta, [0, 1]


@dataclass(frozen=True)
class GroupProfile:
    cohesion: float  # zeta_g, [0, 3]
    desired_speed: float  # Psi_g, m/s, [0, 1.2]
    leader: int | None
    walking_speed: float
    impatience: float

    @property
    def personal_radius(self) -> float:
        return cohesion_radius(self.cohesion)


def walking_speed(ocean: OceanVector) -> float:
    return ocean.e + 1.0


def leadership(ocean: OceanVector, weight: float = LEADERSHIP_WEIGHT) -> float:
    return weight * ocean.e + (1.0 - weight) * (1.0 - ocean.n)


def extraversion_term(e: float) -> float:
    return 2.0 * e - 1.0 if e >= 0.5 else 0.0


def impatience(ocean: OceanVector, w_e: float = EXTRAVERSION_WEIGHT, w_ac: float = AC_WEIGHT) -> float:
    return w_e * extraversion_term(ocean.e) + w_ac * (1.0 - ocean.a) + w_ac * (1.0 - ocean.c)


def behaviors(ocean: OceanVector) -> Behaviors:
    return Behaviors(walking_speed(ocean), leadership(ocean), impatience(ocean))


def cohesion(beta: float) -> float:
    return (1.0 - beta) * MAX_COHESION


def desired_speed(psi: float) -> float:
    return MAX_DESIRED_SPEED * (psi - 1.0)


def cohesion_radius(zeta: float) -> float:
    """Personal (marker-reach) radius in meters for a group with cohesion ``zeta``."""
    return RADIUS_BASE + RADIUS_PER_COHESION * zeta


def group_features(members: Sequence[Behaviors], rng: np.random.Generator | None = None,
                   member_ids: Sequence[int] | None = None) -> GroupProfile:
    """Elect a leader and derive the group's cohesion and desired speed.

    Members with leadership >= 0.9 qualify; one is drawn uniformly with
    ``rng`` (the lowest-index qualifier when no generator is given). With a
    leader the group takes the leader's walking speed and impatience,
    otherwise the member means.
    """
    if not members:
        raise ValueError("group has no members")
    ids = list(member_ids) if member_ids is not None else list(range(len(members)))
    qualified = [i for i, b in enumerate(members) if b.leadership >= LEADER_THRESHOLD]
    leader = None
    if qualified:
        pick = qualified[int(rng.integers(len(qualified)))] if rng is not None else qualified[0]
        leader = ids[pick]
        psi = members[pick].walking_speed
        beta = members[pick].impatience
    else:
        psi = float(np.mean([b.walking_speed for b in members]))
        beta = float(np.mean([b.impatience for b in members]))
    return GroupProfile(
        cohesion=cohesion(beta),
        desired_speed=desired_speed(psi),
        leader=leader,
        walking_speed=psi,
        impatience=beta,
    )


def apply_features(state) -> None:
    """Write per-agent max speed and personal radius from each group's profile.

    Groups without OCEAN traits keep the engine defaults. Idempotent.
    """
    for gid, profile in state.profiles.items():
        if profile is None:
            continue
        for agent in state.agents:
            if agent.group_id == gid:
                agent.max_speed = profile.desired_speed
                agent.personal_radius = profile.personal_radius


def profile_groups(scenario, agents, rng: np.random.Generator) -> dict[int, GroupProfile | None]:
    out: dict[int, GroupProfile | None] = {}
    for gid, grp in enumerate(scenario.groups):
        if grp.ocean is None:
            out[gid] = None
            continue
        members = [a for a in agents if a.group_id == gid]
        # every member of a group shares the group's OCEAN vector
        beh = [behaviors(grp.ocean) for _ in members]
        out[gid] = group_features(beh, rng, [a.id for a in members])
    return out
