"""Forward/backward state pairs, ABL probabilities and weak-trace maps.

Everything here works on *time slices*: slice ``s`` is the moment after
the first ``s`` steps of a circuit, so slice 0 is the input and slice
``n_steps`` is the final state. The forward state at a slice is the live
amplitude vector; the backward state is the post-selected detector basis
state pulled back through the adjoints of the later steps. Absorbers go
backward through ``conj(t)``: a detector click already excludes every
absorbed branch.

The functions accept any circuit-like object exposing ``n_steps``,
``forward_slices``, ``adjoint_step``, ``postselection_vector`` and
``projector_mask`` (both :class:`ifm.optics.Circuit` and
:class:`ifm.composite.CompositeCircuit` do).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .amplitude import MEASURE_ZERO

PROBABILITY_FLOOR = 1e-15


class PostselectionError(ValueError):
    """The requested detector can never fire for this input."""


class ABLUndefinedError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TwoStateRecord:
    """``forward[s]`` and ``backward[s]`` are amplitude arrays at slice ``s``."""

    forward: np.ndarray
    backward: np.ndarray
    overlap: complex

    def overlap_at(self, s: int) -> complex:
        return complex(np.vdot(self.backward[s], self.forward[s]))

    @property
    def postselection_probability(self) -> float:
        return abs(self.overlap) ** 2


@dataclass(frozen=True, eq=False)
class TraceMap:
    """``values[s, ...] = |forward * backward|`` per slice and mode."""

    values: np.ndarray
    labels: list

    def at(self, mode, s: int) -> float:
        return float(self.values[s][self._index(mode)])

    def _index(self, mode):
        if isinstance(mode, tuple):
            a, b = mode
            return self.labels[0].index(a), self.labels[1].index(b)
        return self.labels.index(mode)

    def mode_row(self, mode) -> np.ndarray:
        idx = self._index(mode)
        return np.array([v[idx] for v in self.values])

    def to_csv(self) -> str:
        """Grid with one row per mode and one column per slice."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        n_slices = len(self.values)
        writer.writerow(["mode"] + [f"slice_{s}" for s in range(n_slices)])
        if self.values.ndim == 2:
            rows = [(lab, self.values[:, i]) for i, lab in enumerate(self.labels)]
        else:
            rows = [
                (f"{a}|{b}", self.values[:, i, j])
                for i, a in enumerate(self.labels[0])
                for j, b in enumerate(self.labels[1])
            ]
        for lab, row in rows:
            writer.writerow([lab] + [f"{x:.12g}" for x in row])
        return buf.getvalue()


def backward_propagate(circuit, postselected, input_state=None) -> np.ndarray:
    """Backward-evolving state at every slice, stacked along axis 0.

    When ``input_state`` is given, an impossible post-selection (zero
    amplitude at the detector) raises :class:`PostselectionError`; otherwise
    the circuit's own source is used for that check when it has one.
    """
    if input_state is None and getattr(circuit, "source", None) is not None:
        input_state = circuit.input_state()
    vec = circuit.postselection_vector(postselected)
    grid = [vec]
    for j in reversed(range(circuit.n_steps)):
        vec = circuit.adjoint_step(vec, j)
        grid.append(vec)
    grid = np.array(grid[::-1])
    if input_state is not None:
        overlap = np.vdot(grid[0], input_state.amplitudes)
        if abs(overlap) ** 2 <= PROBABILITY_FLOOR:
            raise PostselectionError(
                f"post-selection impossible: detector {postselected!r} has zero amplitude"
            )
    return grid


def two_state(circuit, input_state, postselected) -> TwoStateRecord:
    forward = np.array(circuit.forward_slices(input_state))
    backward = backward_propagate(circuit, postselected, input_state)
    overlap = complex(np.vdot(backward[-1], forward[-1]))
    return TwoStateRecord(forward, backward, overlap)


def trace_map(circuit, input_state, postselected) -> TraceMap:
    """Weak-trace map: zero entries mark places the photon leaves no trace."""
    rec = two_state(circuit, input_state, postselected)
    return TraceMap(np.abs(rec.forward * rec.backward), circuit.slice_labels)


def abl_probability(circuit, input_state, postselected, step: int, projector) -> float:
    """ABL probability that an ideal projective test of ``projector`` at
    slice ``step`` would succeed, given the pre- and post-selection."""
    rec = two_state(circuit, input_state, postselected)
    if not 0 <= step < len(rec.forward):
        raise IndexError(f"slice {step} outside [0, {len(rec.forward) - 1}]")
    return _abl(rec.forward[step], rec.backward[step], circuit.projector_mask(projector))


def _abl(forward: np.ndarray, backward: np.ndarray, mask: np.ndarray) -> float:
    terms = np.conj(backward) * forward
    inside = abs(terms[mask].sum()) ** 2
    outside = abs(terms[~mask].sum()) ** 2
    if inside + outside < MEASURE_ZERO:
        raise ABLUndefinedError("ABL undefined for this selection: both alternatives have zero weight")
    return float(inside / (inside + outside))
