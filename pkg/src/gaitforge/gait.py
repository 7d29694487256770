"""Gait phase bookkeeping and contact scheduling.

A single master phase drives all four legs; each leg adds a fixed offset.
A leg is in swing while its wrapped phase is below the switching threshold
2*pi*swing_ratio, and in stance from the threshold to the end of the cycle,
so the stance duty factor is exactly 1 - swing_ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gaitforge.geometry import wrap_two_pi

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class GaitParams:
    """The five gait quantities a policy controls.

    frequency_hz: cycle rate of the master phase, (0, 4].
    swing_ratio: fraction of the cycle each leg spends in swing, [0, 1);
        zero means the legs never lift (standing).
    phase_offsets: offsets of legs FL, RR, RL relative to FR, each [0, 2*pi].
    """

    frequency_hz: float = 2.0
    swing_ratio: float = 0.5
    phase_offsets: tuple = (np.pi, np.pi, np.pi)

    def __post_init__(self):
        if not (0.0 < self.frequency_hz <= 4.0):
            raise ValueError(f"frequency_hz {self.frequency_hz} not in (0, 4]")
        if not (0.0 <= self.swing_ratio < 1.0):
            raise ValueError(f"swing_ratio {self.swing_ratio} not in [0, 1)")
        off = tuple(float(x) for x in self.phase_offsets)
        if len(off) != 3:
            raise ValueError("phase_offsets must have 3 entries (FL, RR, RL)")
        for x in off:
            if not (0.0 <= x <= TWO_PI):
                raise ValueError(f"phase offset {x} not in [0, 2*pi]")
        object.__setattr__(self, "phase_offsets", off)

    def as_array(self) -> np.ndarray:
        """[frequency_hz, swing_ratio, offsets...] for the compiled core."""
        return np.array([self.frequency_hz, self.swing_ratio,
                         *self.phase_offsets])


@dataclass(frozen=True)
class GaitState:
    """Master phase of the front-right leg; other legs derive from it."""

    phase_leg1: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.phase_leg1 < TWO_PI):
            raise ValueError(f"phase_leg1 {self.phase_leg1} not in [0, 2*pi)")

    def leg_phases(self, params: GaitParams) -> np.ndarray:
        """Wrapped phases of [FR, FL, RR, RL]."""
        offs = np.array([0.0, *params.phase_offsets])
        ph = np.mod(self.phase_leg1 + offs, TWO_PI)
        ph[ph >= TWO_PI] = 0.0
        return ph


@dataclass(frozen=True)
class ContactSchedule:
    """Stance flags per leg, order [FR, FL, RR, RL]."""

    in_stance: tuple

    def __post_init__(self):
        st = tuple(bool(x) for x in self.in_stance)
        if len(st) != 4:
            raise ValueError("in_stance must have 4 entries")
        object.__setattr__(self, "in_stance", st)

    def stance_legs(self) -> tuple:
        return tuple(i for i, s in enumerate(self.in_stance) if s)


def advance_phase(state: GaitState, frequency_hz: float,
                  dt: float) -> GaitState:
    """Integrate the master phase by one step and wrap into [0, 2*pi)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if not (0.0 < frequency_hz <= 4.0):
        raise ValueError(f"frequency_hz {frequency_hz} not in (0, 4]")
    return GaitState(wrap_two_pi(state.phase_leg1
                                 + TWO_PI * frequency_hz * dt))


def contact_schedule(state: GaitState, params: GaitParams) -> ContactSchedule:
    """Legs at or past the swing/stance switching phase are in stance."""
    threshold = TWO_PI * params.swing_ratio
    phases = state.leg_phases(params)
    return ContactSchedule(tuple(ph >= threshold for ph in phases))
