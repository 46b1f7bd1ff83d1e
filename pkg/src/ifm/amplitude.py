"""Single-excitation amplitude states with an absorption ledger.

A :class:`PureState` holds one complex amplitude per live mode. Amplitude
removed by absorbers is not thrown away: it is appended to the ledger as an
:class:`AbsorptionRecord`, so live probability plus ledger measure stays 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

CONSERVATION_TOL = 1e-12
MEASURE_ZERO = 1e-15


class UnknownModeError(KeyError):
    """A mode label is not part of the declared mode space."""

    def __str__(self) -> str:
        return self.args[0] if self.args else "unknown mode"


class ConditioningError(ValueError):
    """Conditioning on an event of (numerically) zero probability."""


@dataclass(frozen=True)
class ModeSpace:
    labels: tuple[str, ...]

    def __init__(self, labels: Iterable[str]):
        labels = tuple(str(lab) for lab in labels)
        if not labels:
            raise ValueError("a mode space needs at least one mode")
        if len(set(labels)) != len(labels):
            dupes = sorted({lab for lab in labels if labels.count(lab) > 1})
            raise ValueError(f"duplicate mode labels: {dupes}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    @property
    def size(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self._index

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownModeError(
                f"unknown mode {label!r}; declared modes are {list(self.labels)}"
            ) from None

    def indices(self, labels: Iterable[str]) -> list[int]:
        return [self.index(lab) for lab in labels]


@dataclass(frozen=True)
class AbsorptionRecord:
    element_id: str
    time_step: int
    amplitude: complex
    location: str = ""

    @property
    def measure(self) -> float:
        return abs(self.amplitude) ** 2


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PureState:
    """One photon spread over the modes of ``space``.

    ``amplitudes`` is a read-only complex vector indexed like
    ``space.labels``. Operations return new states.
    """

    space: ModeSpace
    amplitudes: np.ndarray
    ledger: tuple[AbsorptionRecord, ...] = field(default=())

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.shape != (self.space.size,):
            raise ValueError(
                f"expected {self.space.size} amplitudes, got shape {amps.shape}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "ledger", tuple(self.ledger))

    @classmethod
    def from_amplitudes(cls, space: ModeSpace, amplitudes: Sequence[complex] | dict) -> "PureState":
        """Build a state from raw amplitudes (a sequence or a label -> amplitude map)."""
        if isinstance(amplitudes, dict):
            vec = np.zeros(space.size, dtype=complex)
            for label, amp in amplitudes.items():
                vec[space.index(label)] = amp
            amplitudes = vec
        return cls(space, amplitudes)

    @classmethod
    def _trusted(cls, space: ModeSpace, amplitudes: np.ndarray, ledger: tuple) -> "PureState":
        # skips validation; only for arrays produced by element maps from a valid state
        obj = object.__new__(cls)
        amplitudes.setflags(write=False)
        object.__setattr__(obj, "space", space)
        object.__setattr__(obj, "amplitudes", amplitudes)
        object.__setattr__(obj, "ledger", ledger)
        return obj

    def amplitude(self, label: str) -> complex:
        return complex(self.amplitudes[self.space.index(label)])

    def probabilities(self) -> dict[str, float]:
        return {lab: float(abs(a) ** 2) for lab, a in zip(self.space.labels, self.amplitudes)}

    @property
    def live_probability(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def replace(self, amplitudes=None, ledger=None) -> "PureState":
        return PureState(
            self.space,
            self.amplitudes if amplitudes is None else amplitudes,
            self.ledger if ledger is None else ledger,
        )

    def __repr__(self) -> str:
        amps = ", ".join(f"{lab}: {a:.6g}" for lab, a in zip(self.space.labels, self.amplitudes))
        return f"PureState({{{amps}}}, ledger={len(self.ledger)} entries)"


def make_state(space: ModeSpace, occupied: str) -> PureState:
    """Basis state with the photon in ``occupied``."""
    vec = np.zeros(space.size, dtype=complex)
    vec[space.index(occupied)] = 1.0
    return PureState(space, vec)


def total_probability(state) -> float:
    """Live probability plus everything recorded in the ledger."""
    return state.live_probability + explosion_measure(state)


def explosion_measure(state) -> float:
    return float(sum(rec.measure for rec in state.ledger))


def renormalize_live(state: PureState) -> tuple[PureState, float]:
    """Condition on "nothing was absorbed".

    Returns the rescaled live state (ledger cleared) and the probability of
    the conditioning event, live / (live + ledger).
    """
    live = state.live_probability
    if live <= MEASURE_ZERO:
        raise ConditioningError("conditioning on measure-zero event: no live amplitude left")
    p = live / (live + explosion_measure(state))
    return PureState(state.space, state.amplitudes / np.sqrt(live), ()), p
