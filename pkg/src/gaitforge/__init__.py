"""Quadruped gait search stack: centroidal simulator, force-based stance
control, swing leg control, and evolution-strategy training of a gait policy.
"""

from gaitforge.robot import LEG_NAMES, OutOfReachError, RobotParams

__all__ = ["LEG_NAMES", "OutOfReachError", "RobotParams"]

__version__ = "0.1.0"
