"""Gait policy network: observation -> gait parameters.

A small fully connected net (2 -> 256 tanh -> 5 tanh) whose outputs are
mapped affinely onto the legal gait parameter ranges and clamped. Parameters
travel as one flat float64 vector so black-box optimizers can treat the
policy as a point in R^n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gaitforge.gait import GaitParams

TWO_PI = 2.0 * np.pi


class DimensionMismatch(ValueError):
    """Flat parameter vector length does not match the architecture."""


@dataclass(frozen=True)
class PolicyArch:
    """Network shape; the flat layout is [W1, b1, W2, b2], row-major."""

    n_obs: int = 2
    n_hidden: int = 256
    n_out: int = 5

    @property
    def n_params(self) -> int:
        return (self.n_hidden * self.n_obs + self.n_hidden
                + self.n_out * self.n_hidden + self.n_out)

    def split(self, flat: np.ndarray):
        """Views of W1 (h, obs), b1 (h,), W2 (out, h), b2 (out,)."""
        h, o, u = self.n_hidden, self.n_obs, self.n_out
        if flat.ndim != 1 or flat.shape[0] != self.n_params:
            raise DimensionMismatch(
                f"expected {self.n_params} parameters, got {flat.shape}")
        i = 0
        w1 = flat[i:i + h * o].reshape(h, o)
        i += h * o
        b1 = flat[i:i + h]
        i += h
        w2 = flat[i:i + u * h].reshape(u, h)
        i += u * h
        b2 = flat[i:i + u]
        return w1, b1, w2, b2


DEFAULT_ARCH = PolicyArch()


def zero_params(arch: PolicyArch = DEFAULT_ARCH) -> np.ndarray:
    return np.zeros(arch.n_params)


def raw_to_gait(raw: np.ndarray) -> GaitParams:
    """Affine map from the net's (-1, 1)^5 output onto gait bounds.

    Zero maps to the neutral gait (2 Hz, 0.5 duty split, all offsets pi).
    Clamps keep the result strictly inside the legal ranges even at the tanh
    saturation limits.
    """
    f = float(np.clip(2.0 + 2.0 * raw[0], 0.2, 4.0))
    p = float(np.clip(0.5 + 0.5 * raw[1], 0.05, 0.95))
    th = np.clip(np.pi + np.pi * raw[2:5], 0.0, TWO_PI)
    return GaitParams(f, p, tuple(float(x) for x in th))


def policy_forward(params: np.ndarray, obs: np.ndarray,
                   arch: PolicyArch = DEFAULT_ARCH) -> GaitParams:
    """Evaluate the gait policy. obs = [desired_speed, measured_speed]."""
    params = np.asarray(params, dtype=np.float64)
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (arch.n_obs,):
        raise DimensionMismatch(
            f"expected obs of shape ({arch.n_obs},), got {obs.shape}")
    if not np.all(np.isfinite(obs)):
        raise ValueError("observation must be finite")
    w1, b1, w2, b2 = arch.split(params)
    hid = np.tanh(w1 @ obs + b1)
    raw = np.tanh(w2 @ hid + b2)
    return raw_to_gait(raw)


def save_checkpoint(path, params: np.ndarray, arch: PolicyArch = DEFAULT_ARCH,
                    meta: dict | None = None) -> None:
    """Write a checkpoint: one JSON header line, then raw float64 bytes."""
    params = np.ascontiguousarray(params, dtype=np.float64)
    if params.shape != (arch.n_params,):
        raise DimensionMismatch(
            f"expected {arch.n_params} parameters, got {params.shape}")
    header = {
        "format": "gaitforge-policy-v1",
        "n_obs": arch.n_obs,
        "n_hidden": arch.n_hidden,
        "n_out": arch.n_out,
        "dtype": "float64",
        "count": int(arch.n_params),
    }
    if meta:
        header["meta"] = meta
    blob = json.dumps(header, sort_keys=True).encode() + b"\n"
    Path(path).write_bytes(blob + params.tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (params, arch, meta)."""
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode())
    if header.get("format") != "gaitforge-policy-v1":
        raise ValueError(f"not a policy checkpoint: {path}")
    arch = PolicyArch(header["n_obs"], header["n_hidden"], header["n_out"])
    params = np.frombuffer(raw[nl + 1:], dtype=np.float64).copy()
    if params.shape[0] != header["count"] or params.shape[0] != arch.n_params:
        raise DimensionMismatch(
            f"checkpoint holds {params.shape[0]} values, "
            f"expected {arch.n_params}")
    return params, arch, header.get("meta", {})
