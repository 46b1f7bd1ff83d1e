"""Photon plus object-particle: two single-excitation subsystems.

Amplitudes live on a 2-D array indexed ``[mode_a, mode_b]``. Local elements
act on one factor for every fixed mode of the other. The only coupling is
coincidence absorption: the amplitude on one shared (photon mode, object
mode) pair is moved to the ledger, which is the "explosion when both are
in the working area".
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Union

import numpy as np

from .amplitude import AbsorptionRecord, ModeSpace, PureState, explosion_measure, make_state
from .optics import (
    BeamSplitter,
    CircuitError,
    DetectorSet,
    Mirror,
    OpticalElement,
    act_on_axis,
)
from .tsvf import _abl, two_state

Factor = Literal["A", "B"]


@dataclass(frozen=True, eq=False)
class CompositeState:
    space_a: ModeSpace
    space_b: ModeSpace
    amplitudes: np.ndarray
    ledger: tuple[AbsorptionRecord, ...] = field(default=())

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.space_a.size, self.space_b.size):
            raise ValueError(f"amplitude grid shape {amps.shape} does not match the mode spaces")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "ledger", tuple(self.ledger))

    @property
    def live_probability(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def amplitude(self, mode_a: str, mode_b: str) -> complex:
        return complex(self.amplitudes[self.space_a.index(mode_a), self.space_b.index(mode_b)])

    def marginal(self, which: Factor) -> dict[str, float]:
        p = np.abs(self.amplitudes) ** 2
        if which == "A":
            return dict(zip(self.space_a.labels, p.sum(axis=1).tolist()))
        return dict(zip(self.space_b.labels, p.sum(axis=0).tolist()))


def tensor(sa: PureState, sb: PureState) -> CompositeState:
    if sa.ledger or sb.ledger:
        raise ValueError("tensor product needs states with empty ledgers")
    return CompositeState(sa.space, sb.space, np.outer(sa.amplitudes, sb.amplitudes))


def apply_local(state: CompositeState, which: Factor, element: OpticalElement, step: int) -> CompositeState:
    if which not in ("A", "B"):
        raise ValueError(f"factor must be 'A' or 'B', not {which!r}")
    axis = 0 if which == "A" else 1
    space = state.space_a if which == "A" else state.space_b
    other = state.space_b if which == "A" else state.space_a
    amps, absorbed = act_on_axis(state.amplitudes, element, space, axis=axis)
    ledger = state.ledger
    if absorbed is not None:
        new = []
        for k, amp in enumerate(absorbed):
            if amp != 0:
                pair = (element.mode, other.labels[k]) if which == "A" else (other.labels[k], element.mode)
                new.append(AbsorptionRecord(element.id, step, complex(amp), "|".join(pair)))
        ledger = ledger + tuple(new)
    return CompositeState(state.space_a, state.space_b, amps, ledger)


def coincidence_absorb(state: CompositeState, overlap: tuple[str, str], step: int, element_id: str = "coincidence") -> CompositeState:
    i, j = state.space_a.index(overlap[0]), state.space_b.index(overlap[1])
    amp = complex(state.amplitudes[i, j])
    if amp == 0:
        return state
    amps = state.amplitudes.copy()
    amps[i, j] = 0.0
    rec = AbsorptionRecord(element_id, step, amp, "|".join(overlap))
    return CompositeState(state.space_a, state.space_b, amps, state.ledger + (rec,))


@dataclass(frozen=True)
class Local:
    """An optical element placed on factor ``which``."""

    which: Factor
    element: OpticalElement

    @property
    def touched(self):
        return [(self.which, m) for m in self.element.modes]


@dataclass(frozen=True)
class Coincidence:
    id: str
    mode_a: str
    mode_b: str

    @property
    def touched(self):
        return [("A", self.mode_a), ("B", self.mode_b)]


CompositeOp = Union[Local, Coincidence]


@dataclass(frozen=True, eq=False)
class CompositeCircuit:
    space_a: ModeSpace
    space_b: ModeSpace
    steps: tuple[tuple[CompositeOp, ...], ...] = ()
    detectors_a: DetectorSet | None = None
    detectors_b: DetectorSet | None = None
    source: tuple[str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(tuple(s) for s in self.steps))
        for name in ("detectors_a", "detectors_b"):
            det = getattr(self, name)
            if isinstance(det, Mapping):
                object.__setattr__(self, name, DetectorSet(det))
        for j, step in enumerate(self.steps):
            seen = set()
            for op in step:
                for which, mode in op.touched:
                    (self.space_a if which == "A" else self.space_b).index(mode)
                    if (which, mode) in seen:
                        raise CircuitError(f"step {j}: mode {mode!r} of factor {which} used twice")
                    seen.add((which, mode))
        if self.source is not None:
            object.__setattr__(self, "source", tuple(self.source))
            self.space_a.index(self.source[0])
            self.space_b.index(self.source[1])

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def input_state(self) -> CompositeState:
        if self.source is None:
            raise CircuitError("composite circuit declares no source modes")
        return tensor(make_state(self.space_a, self.source[0]), make_state(self.space_b, self.source[1]))

    def forward_slices(self, input_state: CompositeState) -> list[np.ndarray]:
        _, trajectory = run_composite(self, input_state)
        return [input_state.amplitudes] + [s.amplitudes for s in trajectory]

    def adjoint_step(self, arr: np.ndarray, j: int) -> np.ndarray:
        for op in reversed(self.steps[j]):
            if isinstance(op, Coincidence):
                arr = np.array(arr)
                arr[self.space_a.index(op.mode_a), self.space_b.index(op.mode_b)] = 0.0
            else:
                axis, space = (0, self.space_a) if op.which == "A" else (1, self.space_b)
                arr, _ = act_on_axis(arr, op.element, space, axis=axis, adjoint=True)
        return arr

    def postselection_vector(self, detectors: tuple[str, str]) -> np.ndarray:
        if self.detectors_a is None or self.detectors_b is None:
            raise CircuitError("both factors need detectors to post-select")
        da, db = detectors
        grid = np.zeros((self.space_a.size, self.space_b.size), dtype=complex)
        grid[self.space_a.index(self.detectors_a[da]), self.space_b.index(self.detectors_b[db])] = 1.0
        return grid

    def projector_mask(self, projector: Iterable[tuple[str, str]]) -> np.ndarray:
        mask = np.zeros((self.space_a.size, self.space_b.size), dtype=bool)
        for a, b in projector:
            mask[self.space_a.index(a), self.space_b.index(b)] = True
        return mask

    def pairs(self, mode_a: str | None = None, mode_b: str | None = None) -> list[tuple[str, str]]:
        """All pairs with the given mode(s) fixed, for building projectors."""
        return [
            (a, b)
            for a in self.space_a.labels
            for b in self.space_b.labels
            if (mode_a is None or a == mode_a) and (mode_b is None or b == mode_b)
        ]

    @property
    def slice_labels(self) -> list:
        return [list(self.space_a.labels), list(self.space_b.labels)]


def run_composite(circuit: CompositeCircuit, state: CompositeState) -> tuple[CompositeState, list[CompositeState]]:
    trajectory = []
    for j, step in enumerate(circuit.steps):
        for op in step:
            if isinstance(op, Coincidence):
                state = coincidence_absorb(state, (op.mode_a, op.mode_b), j, op.id)
            else:
                state = apply_local(state, op.which, op.element, j)
        trajectory.append(state)
    return state, trajectory


@dataclass(frozen=True)
class JointOutcome:
    probs: dict[tuple[str, str], float]
    explosion_prob: float
    residual_prob: float = 0.0

    @property
    def total(self) -> float:
        return sum(self.probs.values()) + self.explosion_prob + self.residual_prob

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["detector_a", "detector_b", "probability"])
        for (da, db), p in self.probs.items():
            w.writerow([da, db, f"{p:.12g}"])
        w.writerow(["explosion", "", f"{self.explosion_prob:.12g}"])
        w.writerow(["residual", "", f"{self.residual_prob:.12g}"])
        return buf.getvalue()


def measure_joint(state: CompositeState, detectors_a: DetectorSet, detectors_b: DetectorSet) -> JointOutcome:
    p = np.abs(state.amplitudes) ** 2
    probs = {}
    for da, ma in detectors_a.items():
        for db, mb in detectors_b.items():
            probs[(da, db)] = float(p[state.space_a.index(ma), state.space_b.index(mb)])
    residual = state.live_probability - sum(probs.values())
    return JointOutcome(probs, explosion_measure(state), max(0.0, residual))


@dataclass(frozen=True)
class NestedReport:
    joint: JointOutcome
    postselection: tuple[str, str]
    p_postselection: float
    abl_object: float
    abl_photon: float
    abl_both: float


def nested_circuit(R: float = 0.5, interaction: bool = True) -> CompositeCircuit:
    """Two matched interferometers; the photon's lower arm and the object's
    lower arm cross in one shared working area."""
    space = ModeSpace(["upper", "lower"])
    steps = []
    steps.append([Local(w, BeamSplitter(f"bs1_{w}", "upper", "lower", R)) for w in "AB"])
    steps.append([Local(w, Mirror(f"mirror_{m}_{w}", m)) for w in "AB" for m in ("upper", "lower")])
    steps.append([Coincidence("working_area", "lower", "lower")] if interaction else [])
    steps.append([Local(w, BeamSplitter(f"bs2_{w}", "upper", "lower", 1.0 - R)) for w in "AB"])
    det = DetectorSet({"D1": "lower", "D2": "upper"})
    return CompositeCircuit(space, space, steps, det, det, source=("upper", "upper"))


WORKING_AREA_SLICE = 2


def nested_ifm(R: float = 0.5, interaction: bool = True) -> NestedReport:
    """Joint statistics of the nested measurement, and ABL probabilities
    (given both dark ports fire) for object / photon / both being found in
    the working area just before they would meet."""
    if not 0.0 < R < 1.0:
        raise ValueError(f"R = {R} must lie in (0, 1)")
    circuit = nested_circuit(R, interaction)
    final, _ = run_composite(circuit, circuit.input_state())
    joint = measure_joint(final, circuit.detectors_a, circuit.detectors_b)
    post = ("D2", "D2")
    p_post = joint.probs[post]
    abl = [math.nan, math.nan, math.nan]
    if p_post > 1e-15:
        rec = two_state(circuit, circuit.input_state(), post)
        fwd, bwd = rec.forward[WORKING_AREA_SLICE], rec.backward[WORKING_AREA_SLICE]
        projectors = (
            circuit.pairs(mode_b="lower"),
            circuit.pairs(mode_a="lower"),
            [("lower", "lower")],
        )
        abl = [_abl(fwd, bwd, circuit.projector_mask(p)) for p in projectors]
    return NestedReport(joint, post, p_post, *abl)
