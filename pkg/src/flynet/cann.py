"""1-d continuous attractor network over place units.

Unit p + 1 represents reference place p; units 0 and R + 1 are boundary pads.
Each step applies shift-and-copy, local gaussian excitation, input
injection, global inhibition and renormalisation, in that order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

PAD = 1


@dataclass(frozen=True)
class CannConfig:
    num_units: int | None = None  # None: R + 2
    kernel_radius: int = 3
    kernel_sigma: float = 1.5
    input_gain: float = 0.1
    inhibition: float = 0.1
    shift_per_step: int = 1
    wraparound: bool = False

    def __post_init__(self):
        if self.kernel_radius < 0 or self.kernel_sigma <= 0:
            raise ValueError("kernel_radius must be >= 0 and kernel_sigma > 0")
        if self.input_gain <= 0:
            raise ValueError("input_gain must be > 0")
        if self.inhibition < 0:
            raise ValueError("inhibition must be >= 0")
        if self.num_units is not None and self.num_units < 2 * self.kernel_radius + 1:
            raise ValueError("num_units must be at least 2 * kernel_radius + 1")

    def units_for(self, R: int) -> int:
        units = R + 2 * PAD
        if self.num_units is not None and self.num_units != units:
            raise ValueError(f"num_units={self.num_units} but {R} places need {units}")
        if units < 2 * self.kernel_radius + 1:
            raise ValueError("too few units for the excitation kernel")
        return units

    def kernel(self) -> np.ndarray:
        d = np.arange(-self.kernel_radius, self.kernel_radius + 1)
        w = np.exp(-d ** 2 / (2.0 * self.kernel_sigma ** 2))
        return w / w.sum()


@dataclass(frozen=True)
class CannState:
    activity: np.ndarray

    @property
    def R(self) -> int:
        return len(self.activity) - 2 * PAD

    def readout(self) -> tuple[int, float]:
        places = self.activity[PAD:len(self.activity) - PAD]
        best = int(np.argmax(places))
        return best, float(places[best])


def _inject(scores, units: int) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    I = np.zeros(units)
    I[PAD:PAD + len(scores)] = np.maximum(scores, 0.0)
    total = I.sum()
    return I / total if total > 0 else I


def _normalise(a: np.ndarray) -> np.ndarray | None:
    total = a.sum()
    return a / total if total > 0 else None


def cann_init(cfg: CannConfig, first_input) -> CannState:
    units = cfg.units_for(len(first_input))
    a = _normalise(_inject(first_input, units))
    if a is None:
        a = _uniform_places(units)
    return CannState(a)


def _uniform_places(units: int) -> np.ndarray:
    a = np.zeros(units)
    a[PAD:units - PAD] = 1.0 / (units - 2 * PAD)
    return a


def shift(a: np.ndarray, k: int, wrap: bool) -> np.ndarray:
    if wrap:
        return np.roll(a, k)
    out = np.zeros_like(a)
    if k >= 0:
        out[k:] = a[:len(a) - k] if k < len(a) else 0.0
    else:
        out[:k] = a[-k:]
    return out


def excite(a: np.ndarray, kernel: np.ndarray, wrap: bool) -> np.ndarray:
    r = len(kernel) // 2
    padded = np.pad(a, r, mode="wrap" if wrap else "edge")
    # symmetric kernel, so correlation == convolution
    return np.convolve(padded, kernel, mode="valid")


def cann_step(state: CannState, scores, cfg: CannConfig) -> CannState:
    units = len(state.activity)
    if units != cfg.units_for(len(scores)):
        raise ValueError("input length does not match the network size")
    a = shift(state.activity, cfg.shift_per_step, cfg.wraparound)
    a = excite(a, cfg.kernel(), cfg.wraparound)
    injected = _inject(scores, units)
    a = a + cfg.input_gain * injected
    a = np.maximum(0.0, a - cfg.inhibition * a.mean())
    out = _normalise(a)
    if out is None:
        out = _normalise(injected)
    if out is None:
        out = _uniform_places(units)
    return CannState(out)


def cann_run(R: int, scores, cfg: CannConfig = CannConfig(), trace: list | None = None):
    """Filter a (T, R) score sequence; per step (best place, peak activity).

    ``trace``, when given, receives every state's activity vector.
    """
    S = np.asarray(scores, dtype=np.float64)
    if S.ndim != 2 or len(S) == 0:
        raise ValueError("need a nonempty (T, R) score sequence")
    if S.shape[1] != R:
        raise ValueError(f"score vectors have {S.shape[1]} entries, expected {R}")
    state = cann_init(cfg, S[0])
    out = [state.readout()]
    if trace is not None:
        trace.append(state.activity)
    for s in S[1:]:
        state = cann_step(state, s, cfg)
        out.append(state.readout())
        if trace is not None:
            trace.append(state.activity)
    return out


def write_trace(path, trace, header: str | None = None) -> None:
    """CSV of (step, unit, activity) rows."""
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "unit", "activity"])
        for step, activity in enumerate(trace):
            for unit, value in enumerate(activity):
                writer.writerow([step, unit, repr(float(value))])
