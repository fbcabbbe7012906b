"""Scripted policies for batch rollouts."""

from __future__ import annotations

import numpy as np

from .dynamics import ActionTable


class RandomMaskedPolicy:
    """Uniform choice over the currently allowed actions."""

    name = "random-masked"
    needs_mask = True

    def __init__(self, table: ActionTable, seed: int):
        self.rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0x5AFE)))

    def __call__(self, observation, mask) -> int:
        ids = np.flatnonzero(mask)
        return int(self.rng.choice(ids))


class RandomUnmaskedPolicy:
    """Uniform choice over the regular action grid, ignoring the mask."""

    name = "random-unmasked"
    needs_mask = False

    def __init__(self, table: ActionTable, seed: int):
        self.table = table
        self.rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0xF4EE)))

    def __call__(self, observation, mask) -> int:
        return int(self.rng.integers(0, self.table.n_regular))


class KeepCoursePolicy:
    """Holds course and speed; under masking it defers to the mandated action,
    preferring the mildest allowed control when keeping course is barred."""

    name = "keep-course"
    needs_mask = False

    def __init__(self, table: ActionTable, seed: int):
        self.table = table
        self.keep_id = table.keep.id

    def __call__(self, observation, mask) -> int:
        if mask[self.keep_id]:
            return self.keep_id
        allowed = np.flatnonzero(mask)
        regular = [self.table.by_id(int(i)) for i in allowed
                   if self.table.by_id(int(i)).kind == "regular"]
        if not regular:
            return int(allowed[0])
        controls = [(abs(self.table.control(a).turn_rate),
                     abs(self.table.control(a).accel), a.id) for a in regular]
        return min(controls)[2]


POLICIES = {
    "random-masked": RandomMaskedPolicy,
    "random-unmasked": RandomUnmaskedPolicy,
    "keep-course": KeepCoursePolicy,
}


def make_policy(name: str, table: ActionTable, seed: int):
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}")
    return cls(table, seed)
