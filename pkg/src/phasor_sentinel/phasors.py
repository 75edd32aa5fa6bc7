"""Phasor domain types and symmetrical-component math.

Angles are radians internally, normalized to (-pi, pi]. Degrees appear only
at CSV boundaries (see storage module).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

# Rotation operator a = 1 angle 120 degrees
_A = cmath.exp(2j * math.pi / 3)
_A2 = _A * _A


def wrap_angle(theta: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def wrap_angle_array(theta: np.ndarray) -> np.ndarray:
    """Vectorized wrap into (-pi, pi]."""
    wrapped = np.remainder(theta + np.pi, 2.0 * np.pi) - np.pi
    # remainder maps -pi to -pi; fold the open end onto +pi
    wrapped = np.where(wrapped == -np.pi, np.pi, wrapped)
    return wrapped


@dataclass(frozen=True)
class Phasor:
    """A magnitude/angle pair. Voltages are per-unit; angle in radians."""

    magnitude: float
    angle: float

    def __post_init__(self):
        if not (math.isfinite(self.magnitude) and math.isfinite(self.angle)):
            raise ValueError("phasor components must be finite")
        if self.magnitude < 0:
            raise ValueError("phasor magnitude must be nonnegative")
        object.__setattr__(self, "angle", wrap_angle(self.angle))

    @classmethod
    def from_complex(cls, z: complex) -> "Phasor":
        return cls(abs(z), cmath.phase(z) if z != 0 else 0.0)

    def to_complex(self) -> complex:
        return cmath.rect(self.magnitude, self.angle)

    def rotated(self, theta: float) -> "Phasor":
        return Phasor(self.magnitude, wrap_angle(self.angle + theta))

    def scaled(self, k: float) -> "Phasor":
        if k < 0:
            raise ValueError("scale factor must be nonnegative")
        return Phasor(self.magnitude * k, self.angle)

    def isclose(self, other: "Phasor", tol: float = 1e-12) -> bool:
        return abs(self.to_complex() - other.to_complex()) <= tol


@dataclass(frozen=True)
class SequenceSet:
    """Positive, negative and zero sequence voltage phasors."""

    v_pos: Phasor
    v_neg: Phasor
    v_zero: Phasor


class ParameterId(IntEnum):
    """The eight per-PMU analysis channels, in fixed order."""

    V_POS_MAG = 0
    V_POS_ANG = 1
    V_NEG_MAG = 2
    V_NEG_ANG = 3
    V_ZERO_MAG = 4
    V_ZERO_ANG = 5
    FREQ = 6
    ROCOF = 7

    @property
    def is_angle(self) -> bool:
        return self in (ParameterId.V_POS_ANG, ParameterId.V_NEG_ANG, ParameterId.V_ZERO_ANG)

    @property
    def short_name(self) -> str:
        return _PARAM_NAMES[self]


_PARAM_NAMES = {
    ParameterId.V_POS_MAG: "v_pos_mag",
    ParameterId.V_POS_ANG: "v_pos_ang",
    ParameterId.V_NEG_MAG: "v_neg_mag",
    ParameterId.V_NEG_ANG: "v_neg_ang",
    ParameterId.V_ZERO_MAG: "v_zero_mag",
    ParameterId.V_ZERO_ANG: "v_zero_ang",
    ParameterId.FREQ: "freq",
    ParameterId.ROCOF: "rocof",
}

PARAM_BY_NAME = {name: pid for pid, name in _PARAM_NAMES.items()}


@dataclass(frozen=True)
class PhasorFrame:
    """One PMU's measurements for one cycle (60 frames/s)."""

    pmu_id: int
    cycle: int
    va: Phasor
    vb: Phasor
    vc: Phasor
    freq: float
    rocof: float

    def __post_init__(self):
        if self.pmu_id < 0:
            raise ValueError("pmu_id must be nonnegative")
        if self.cycle < 0:
            raise ValueError("cycle must be nonnegative")

    def sequence(self) -> SequenceSet:
        return fortescue(self.va, self.vb, self.vc)


def fortescue(va: Phasor, vb: Phasor, vc: Phasor) -> SequenceSet:
    """Symmetrical-component transform of a three-phase voltage set.

    V0 = (Va + Vb + Vc)/3
    V+ = (Va + a*Vb + a^2*Vc)/3
    V- = (Va + a^2*Vb + a*Vc)/3,  a = 1 angle 120 deg
    """
    za, zb, zc = va.to_complex(), vb.to_complex(), vc.to_complex()
    v_zero = (za + zb + zc) / 3.0
    v_pos = (za + _A * zb + _A2 * zc) / 3.0
    v_neg = (za + _A2 * zb + _A * zc) / 3.0
    return SequenceSet(
        v_pos=Phasor.from_complex(v_pos),
        v_neg=Phasor.from_complex(v_neg),
        v_zero=Phasor.from_complex(v_zero),
    )


def inverse_fortescue(seq: SequenceSet) -> tuple[Phasor, Phasor, Phasor]:
    """Reconstruct phase voltages from sequence components."""
    zp, zn, z0 = seq.v_pos.to_complex(), seq.v_neg.to_complex(), seq.v_zero.to_complex()
    va = z0 + zp + zn
    vb = z0 + _A2 * zp + _A * zn
    vc = z0 + _A * zp + _A2 * zn
    return Phasor.from_complex(va), Phasor.from_complex(vb), Phasor.from_complex(vc)


def extract_channel(frame: PhasorFrame, param: ParameterId) -> float:
    """Scalar value of one analysis channel for one frame."""
    if param is ParameterId.FREQ:
        return frame.freq
    if param is ParameterId.ROCOF:
        return frame.rocof
    seq = frame.sequence()
    if param is ParameterId.V_POS_MAG:
        return seq.v_pos.magnitude
    if param is ParameterId.V_POS_ANG:
        return seq.v_pos.angle
    if param is ParameterId.V_NEG_MAG:
        return seq.v_neg.magnitude
    if param is ParameterId.V_NEG_ANG:
        return seq.v_neg.angle
    if param is ParameterId.V_ZERO_MAG:
        return seq.v_zero.magnitude
    if param is ParameterId.V_ZERO_ANG:
        return seq.v_zero.angle
    raise ValueError(f"unknown parameter {param!r}")


def fortescue_arrays(
    va_mag: np.ndarray,
    va_ang: np.ndarray,
    vb_mag: np.ndarray,
    vb_ang: np.ndarray,
    vc_mag: np.ndarray,
    vc_ang: np.ndarray,
) -> tuple[np.ndarray, ...]:
    """Vectorized Fortescue transform over arrays of phase phasors.

    Returns (pos_mag, pos_ang, neg_mag, neg_ang, zero_mag, zero_ang) with
    angles wrapped into (-pi, pi].
    """
    za = va_mag * np.exp(1j * va_ang)
    zb = vb_mag * np.exp(1j * vb_ang)
    zc = vc_mag * np.exp(1j * vc_ang)
    z0 = (za + zb + zc) / 3.0
    zp = (za + _A * zb + _A2 * zc) / 3.0
    zn = (za + _A2 * zb + _A * zc) / 3.0
    out = []
    for z in (zp, zn, z0):
        out.append(np.abs(z))
        out.append(wrap_angle_array(np.where(z == 0, 0.0, np.angle(z))))
    return tuple(out)
