"""Optical elements and the circuit stepper.

Conventions (fixed once, used everywhere):

* Beam splitter of reflectivity ``R`` acting on ``(a, b)``::

      a' = sqrt(1-R) a + i sqrt(R) b
      b' = i sqrt(R) a + sqrt(1-R) b

* Mirror multiplies its mode by ``i``; a phase shift by ``exp(i phi)``.
* An absorber multiplies its mode by the transmission amplitude ``t`` and
  books the removed amplitude ``a * sqrt(1 - |t|^2)`` in the ledger.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .amplitude import (
    CONSERVATION_TOL,
    AbsorptionRecord,
    ModeSpace,
    PureState,
    UnknownModeError,
    explosion_measure,
    make_state,
)


class CircuitError(ValueError):
    """Structural problem with a circuit or detector layout."""


@dataclass(frozen=True)
class BeamSplitter:
    id: str
    mode_a: str
    mode_b: str
    reflectivity: float = 0.5

    def __post_init__(self):
        if self.mode_a == self.mode_b:
            raise CircuitError(f"beam splitter {self.id!r} needs two distinct modes")
        if not 0.0 <= self.reflectivity <= 1.0:
            raise CircuitError(
                f"beam splitter {self.id!r}: reflectivity {self.reflectivity} outside [0, 1]"
            )

    @property
    def modes(self) -> tuple[str, ...]:
        return (self.mode_a, self.mode_b)

    def matrix(self) -> np.ndarray:
        c = math.sqrt(1.0 - self.reflectivity)
        s = math.sqrt(self.reflectivity)
        return np.array([[c, 1j * s], [1j * s, c]])


@dataclass(frozen=True)
class Mirror:
    id: str
    mode: str

    @property
    def modes(self) -> tuple[str, ...]:
        return (self.mode,)


@dataclass(frozen=True)
class PhaseShift:
    id: str
    mode: str
    phase: float

    @property
    def modes(self) -> tuple[str, ...]:
        return (self.mode,)


@dataclass(frozen=True)
class Absorber:
    """Object in a mode. ``transmission=0`` is the opaque object / bomb."""

    id: str
    mode: str
    transmission: complex = 0.0

    def __post_init__(self):
        t = complex(self.transmission)
        if abs(t) > 1.0 + 1e-15:
            raise CircuitError(f"absorber {self.id!r}: |t| = {abs(t)} exceeds 1")
        object.__setattr__(self, "transmission", t)

    @property
    def modes(self) -> tuple[str, ...]:
        return (self.mode,)


@dataclass(frozen=True)
class DetectorSet:
    """Detector name -> watched mode."""

    detectors: Mapping[str, str]
    id: str = "detectors"

    def __post_init__(self):
        object.__setattr__(self, "detectors", dict(self.detectors))
        modes = list(self.detectors.values())
        if len(set(modes)) != len(modes):
            raise CircuitError(f"detectors share a mode: {self.detectors}")

    @property
    def modes(self) -> tuple[str, ...]:
        return tuple(self.detectors.values())

    def __getitem__(self, name: str) -> str:
        try:
            return self.detectors[name]
        except KeyError:
            raise CircuitError(
                f"unknown detector {name!r}; have {sorted(self.detectors)}"
            ) from None

    def __iter__(self):
        return iter(self.detectors)

    def items(self):
        return self.detectors.items()

    def __hash__(self):
        return hash((self.id, tuple(sorted(self.detectors.items()))))


OpticalElement = Union[BeamSplitter, Mirror, PhaseShift, Absorber, DetectorSet]


def act_on_axis(
    arr: np.ndarray,
    element: OpticalElement,
    space: ModeSpace,
    axis: int = 0,
    adjoint: bool = False,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Apply ``element`` along ``axis`` of an amplitude array.

    Returns the new array and, for absorbers acting forward, the array of
    absorbed amplitudes taken from the element's mode (shape of ``arr``
    with ``axis`` removed). ``adjoint=True`` applies the adjoint of the
    live-sector map and never absorbs into a ledger.
    """
    out = np.array(arr, dtype=complex)
    if axis:
        out = np.moveaxis(out, axis, 0)
    absorbed = None
    if isinstance(element, BeamSplitter):
        ia, ib = space.index(element.mode_a), space.index(element.mode_b)
        c = math.sqrt(1.0 - element.reflectivity)
        s = (-1j if adjoint else 1j) * math.sqrt(element.reflectivity)
        a, b = out[ia].copy(), out[ib].copy()
        out[ia] = c * a + s * b
        out[ib] = s * a + c * b
    elif isinstance(element, Mirror):
        i = space.index(element.mode)
        out[i] *= -1j if adjoint else 1j
    elif isinstance(element, PhaseShift):
        i = space.index(element.mode)
        out[i] *= cmath.exp((-1j if adjoint else 1j) * element.phase)
    elif isinstance(element, Absorber):
        i = space.index(element.mode)
        t = element.transmission
        if adjoint:
            out[i] *= t.conjugate()
        else:
            absorbed = out[i] * math.sqrt(max(0.0, 1.0 - abs(t) ** 2))
            out[i] *= t
    elif isinstance(element, DetectorSet):
        space.indices(element.modes)
    else:
        raise TypeError(f"not an optical element: {element!r}")
    if axis:
        out = np.moveaxis(out, 0, axis)
    return out, absorbed


def apply_element(state: PureState, element: OpticalElement, time_step: int) -> PureState:
    """Evolve ``state`` through one element.

    >>> s = make_state(ModeSpace(["a", "b"]), "a")
    >>> apply_element(s, BeamSplitter("bs", "a", "b", 0.5), 0).amplitudes.round(4)
    array([0.7071+0.j    , 0.    +0.7071j])
    """
    amps, absorbed = act_on_axis(state.amplitudes, element, state.space)
    ledger = state.ledger
    if absorbed is not None and absorbed != 0:
        ledger = ledger + (AbsorptionRecord(element.id, time_step, complex(absorbed), element.mode),)
    return PureState._trusted(state.space, amps, ledger)


@dataclass(frozen=True, eq=False)
class Circuit:
    """Timed list of steps; elements inside one step touch disjoint modes."""

    space: ModeSpace
    steps: tuple[tuple[OpticalElement, ...], ...] = ()
    detectors: DetectorSet | None = None
    source: str | None = None

    def __post_init__(self):
        steps = tuple(tuple(step) for step in self.steps)
        object.__setattr__(self, "steps", steps)
        if isinstance(self.detectors, Mapping):
            object.__setattr__(self, "detectors", DetectorSet(self.detectors))
        for j, step in enumerate(steps):
            touched: set[str] = set()
            for el in step:
                for mode in el.modes:
                    self.space.index(mode)
                    if mode in touched:
                        raise CircuitError(f"step {j}: mode {mode!r} is used by two elements")
                    touched.add(mode)
        if self.detectors is not None:
            self.space.indices(self.detectors.modes)
        if self.source is not None:
            self.space.index(self.source)

    def __len__(self) -> int:
        return len(self.steps)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.space != self.space:
            raise CircuitError("cannot concatenate circuits over different mode spaces")
        return Circuit(
            self.space,
            self.steps + other.steps,
            other.detectors or self.detectors,
            self.source,
        )

    def input_state(self) -> PureState:
        if self.source is None:
            raise CircuitError("circuit declares no source mode")
        return make_state(self.space, self.source)

    def element(self, element_id: str) -> tuple[int, OpticalElement]:
        for j, step in enumerate(self.steps):
            for el in step:
                if el.id == element_id:
                    return j, el
        raise CircuitError(f"no element with id {element_id!r}")

    # hooks used by the two-state analysis

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def forward_slices(self, input_state: PureState) -> list[np.ndarray]:
        _, trajectory = run_circuit(self, input_state)
        return [input_state.amplitudes] + [s.amplitudes for s in trajectory]

    def adjoint_step(self, arr: np.ndarray, j: int) -> np.ndarray:
        for el in reversed(self.steps[j]):
            arr, _ = act_on_axis(arr, el, self.space, adjoint=True)
        return arr

    def postselection_vector(self, detector: str) -> np.ndarray:
        if self.detectors is None:
            raise CircuitError("circuit has no detectors to post-select on")
        vec = np.zeros(self.space.size, dtype=complex)
        vec[self.space.index(self.detectors[detector])] = 1.0
        return vec

    def projector_mask(self, projector: Iterable[str]) -> np.ndarray:
        mask = np.zeros(self.space.size, dtype=bool)
        mask[self.space.indices(projector)] = True
        return mask

    @property
    def slice_labels(self) -> list[str]:
        return list(self.space.labels)


def run_circuit(circuit: Circuit, input_state: PureState) -> tuple[PureState, list[PureState]]:
    """Step through ``circuit``; the trajectory holds the state after every step."""
    if input_state.space != circuit.space:
        raise CircuitError("input state and circuit live on different mode spaces")
    state = input_state
    trajectory = []
    for j, step in enumerate(circuit.steps):
        for el in step:
            state = apply_element(state, el, j)
        trajectory.append(state)
    return state, trajectory


@dataclass(frozen=True)
class OutcomeDistribution:
    detector_probs: dict[str, float]
    explosion_prob: float
    residual_prob: float

    def __getitem__(self, name: str) -> float:
        if name == "explosion":
            return self.explosion_prob
        if name == "residual":
            return self.residual_prob
        return self.detector_probs[name]

    @property
    def total(self) -> float:
        return sum(self.detector_probs.values()) + self.explosion_prob + self.residual_prob

    def as_dict(self) -> dict[str, float]:
        return {**self.detector_probs, "explosion": self.explosion_prob, "residual": self.residual_prob}


def measure(final: PureState, detectors: DetectorSet | Mapping[str, str]) -> OutcomeDistribution:
    if not isinstance(detectors, DetectorSet):
        detectors = DetectorSet(detectors)
    probs = final.probabilities()
    detector_probs = {}
    for name, mode in detectors.items():
        if mode not in final.space:
            raise UnknownModeError(f"detector {name!r} watches unknown mode {mode!r}")
        detector_probs[name] = probs[mode]
    watched = set(detectors.modes)
    residual = sum(p for mode, p in probs.items() if mode not in watched)
    return OutcomeDistribution(detector_probs, explosion_measure(final), float(residual))


@dataclass(frozen=True)
class MZIMatching:
    """How the interferometer was tuned.

    ``phase`` is the compensating phase on the lower arm and
    ``dark_leakage`` the empty-interferometer probability at the dark port
    (zero when matched).
    """

    R1: float
    R2: float
    phase: float
    dark_leakage: float
    dark_detector: str = "D2"
    bright_detector: str = "D1"

    @property
    def matched(self) -> bool:
        return self.dark_leakage <= CONSERVATION_TOL


def build_mzi(
    R1: float = 0.5,
    R2: float | None = None,
    object_t: complex | None = None,
    *,
    object_position: int = 1,
    arm_segments: int = 4,
    second_splitter: bool = True,
) -> tuple[Circuit, MZIMatching]:
    """Mach-Zehnder interferometer on the two rails ``upper``/``lower``.

    The photon enters on ``upper``. The first splitter sends amplitude
    ``i sqrt(R1)`` into the lower arm, where an optional absorber with
    transmission ``object_t`` sits in arm segment ``object_position``.
    ``R2=None`` picks the matched value ``1 - R1``. After the second
    splitter, D2 watches ``upper`` (dark when matched) and D1 watches
    ``lower``. ``second_splitter=False`` gives Wheeler's open layout.

    Timeline: splitter, ``arm_segments`` free segments with the mirrors
    between the two halves, compensating phase, splitter.
    """
    if R2 is None:
        R2 = 1.0 - R1
    for name, val in (("R1", R1), ("R2", R2)):
        if not 0.0 <= val <= 1.0:
            raise CircuitError(f"{name} = {val} outside [0, 1]")
    if arm_segments < 1:
        raise CircuitError("need at least one arm segment")
    if object_t is not None and not 0 <= object_position < arm_segments:
        raise CircuitError(f"object_position must be in [0, {arm_segments})")

    # dark amplitude ~ c1 c2 - s1 s2 exp(i phi): only phi = 0 can cancel it
    c1, s1 = math.sqrt(1 - R1), math.sqrt(R1)
    c2, s2 = math.sqrt(1 - R2), math.sqrt(R2)
    phase = 0.0
    leakage = (c1 * c2 - s1 * s2) ** 2 if second_splitter else c1 * c1

    space = ModeSpace(["upper", "lower"])
    steps: list[list[OpticalElement]] = [[BeamSplitter("bs1", "upper", "lower", R1)]]
    half = (arm_segments + 1) // 2
    for k in range(arm_segments):
        if k == half:
            steps.append([Mirror("mirror_upper", "upper"), Mirror("mirror_lower", "lower")])
        seg = []
        if object_t is not None and k == object_position:
            seg.append(Absorber("object", "lower", object_t))
        steps.append(seg)
    if arm_segments == half:
        steps.append([Mirror("mirror_upper", "upper"), Mirror("mirror_lower", "lower")])
    steps.append([PhaseShift("compensator", "lower", phase)])
    if second_splitter:
        steps.append([BeamSplitter("bs2", "upper", "lower", R2)])
    circuit = Circuit(space, steps, DetectorSet({"D1": "lower", "D2": "upper"}), source="upper")
    return circuit, MZIMatching(R1, R2, phase, leakage)


def lower_arm_slices(circuit: Circuit) -> range:
    """Slice indices (0 = before the first step) during which the photon is inside the arms."""
    last = circuit.n_steps
    if circuit.steps and any(el.id == "bs2" for el in circuit.steps[-1]):
        last -= 1
    return range(1, last + 1)
