"""Plain-text (YAML) scenario files for circuits.

Single-photon circuit::

    modes: [upper, lower]
    source: upper                      # optional input mode
    detectors: {D1: lower, D2: upper}  # optional
    postselect: D2                     # optional, used by `ifm trace`
    steps:
      - [{type: beam_splitter, id: bs1, modes: [upper, lower], reflectivity: 0.5}]
      - []                             # free propagation
      - [{type: absorber, id: bomb, mode: lower, transmission: 0.0}]
      - [{type: mirror, id: m1, mode: upper}, {type: phase, id: p, mode: lower, phase: 0.25}]

Complex transmissions are written ``[re, im]``. A two-particle scenario adds a
``partner`` block (``modes``, ``source``, ``detectors``) and an ``overlap``
list of ``{id, modes: [photon_mode, partner_mode], step}``; elements on the
partner carry ``particle: partner``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml

from .amplitude import ModeSpace
from .composite import Coincidence, CompositeCircuit, Local
from .optics import Absorber, BeamSplitter, Circuit, DetectorSet, Mirror, PhaseShift


class ScenarioError(ValueError):
    """Malformed scenario file."""


def _complex_out(z: complex):
    z = complex(z)
    return float(z.real) if z.imag == 0 else [float(z.real), float(z.imag)]


def _complex_in(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ScenarioError(f"complex value must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def element_to_dict(el) -> dict[str, Any]:
    # plain builtins only, so numpy scalars never reach the YAML dumper
    if isinstance(el, BeamSplitter):
        return {
            "type": "beam_splitter",
            "id": str(el.id),
            "modes": [str(el.mode_a), str(el.mode_b)],
            "reflectivity": float(el.reflectivity),
        }
    if isinstance(el, Mirror):
        return {"type": "mirror", "id": str(el.id), "mode": str(el.mode)}
    if isinstance(el, PhaseShift):
        return {"type": "phase", "id": str(el.id), "mode": str(el.mode), "phase": float(el.phase)}
    if isinstance(el, Absorber):
        return {"type": "absorber", "id": str(el.id), "mode": str(el.mode), "transmission": _complex_out(el.transmission)}
    raise ScenarioError(f"cannot serialize {el!r}")


def element_from_dict(d: dict):
    try:
        kind = d["type"]
        eid = str(d.get("id", kind))
        if kind == "beam_splitter":
            a, b = d["modes"]
            return BeamSplitter(eid, a, b, float(d.get("reflectivity", 0.5)))
        if kind == "mirror":
            return Mirror(eid, d["mode"])
        if kind == "phase":
            return PhaseShift(eid, d["mode"], float(d["phase"]))
        if kind == "absorber":
            return Absorber(eid, d["mode"], _complex_in(d.get("transmission", 0.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad element {d!r}: {exc}") from exc
    raise ScenarioError(f"unknown element type {kind!r}")


def circuit_to_dict(circuit: Circuit) -> dict[str, Any]:
    out: dict[str, Any] = {"modes": [str(m) for m in circuit.space.labels]}
    if circuit.source is not None:
        out["source"] = str(circuit.source)
    if circuit.detectors is not None:
        out["detectors"] = {str(k): str(v) for k, v in circuit.detectors.items()}
    out["steps"] = [[element_to_dict(el) for el in step] for step in circuit.steps]
    return out


def circuit_from_dict(d: dict) -> Circuit:
    if not isinstance(d, dict) or "modes" not in d:
        raise ScenarioError("scenario needs a 'modes' list")
    steps = d.get("steps") or []
    if not isinstance(steps, list) or not all(isinstance(s, list) for s in steps):
        raise ScenarioError("'steps' must be a list of lists of elements")
    parsed = [[element_from_dict(el) for el in step if el.get("particle", "photon") == "photon"] for step in steps]
    return Circuit(ModeSpace(d["modes"]), parsed, d.get("detectors"), d.get("source"))


def composite_to_dict(circuit: CompositeCircuit) -> dict[str, Any]:
    out: dict[str, Any] = {"modes": list(circuit.space_a.labels)}
    if circuit.source is not None:
        out["source"] = circuit.source[0]
    if circuit.detectors_a is not None:
        out["detectors"] = dict(circuit.detectors_a.items())
    partner: dict[str, Any] = {"modes": list(circuit.space_b.labels)}
    if circuit.source is not None:
        partner["source"] = circuit.source[1]
    if circuit.detectors_b is not None:
        partner["detectors"] = dict(circuit.detectors_b.items())
    out["partner"] = partner
    steps, overlap = [], []
    for j, step in enumerate(circuit.steps):
        row = []
        for op in step:
            if isinstance(op, Coincidence):
                overlap.append({"id": op.id, "modes": [op.mode_a, op.mode_b], "step": j})
            else:
                d = element_to_dict(op.element)
                if op.which == "B":
                    d["particle"] = "partner"
                row.append(d)
        steps.append(row)
    out["steps"] = steps
    out["overlap"] = overlap
    return out


def composite_from_dict(d: dict) -> CompositeCircuit:
    try:
        partner = d["partner"]
        steps_in = d.get("steps") or []
        steps: list[list] = [[] for _ in steps_in]
        for j, step in enumerate(steps_in):
            for el in step:
                which = "B" if el.get("particle", "photon") == "partner" else "A"
                steps[j].append(Local(which, element_from_dict(el)))
        for ov in d.get("overlap") or []:
            j = int(ov["step"])
            while len(steps) <= j:
                steps.append([])
            a, b = ov["modes"]
            steps[j].append(Coincidence(str(ov.get("id", "coincidence")), a, b))
        source = None
        if "source" in d and "source" in partner:
            source = (d["source"], partner["source"])
        return CompositeCircuit(
            ModeSpace(d["modes"]),
            ModeSpace(partner["modes"]),
            steps,
            d.get("detectors"),
            partner.get("detectors"),
            source,
        )
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"bad two-particle scenario: {exc}") from exc


def load_scenario(path: str | Path):
    """Read a scenario file; returns a Circuit or a CompositeCircuit."""
    data = parse_yaml(Path(path).read_text())
    if isinstance(data, dict) and "partner" in data:
        return composite_from_dict(data)
    return circuit_from_dict(data)


def dump_scenario(circuit, path: str | Path | None = None) -> str:
    data = composite_to_dict(circuit) if isinstance(circuit, CompositeCircuit) else circuit_to_dict(circuit)
    text = yaml.safe_dump(data, sort_keys=False, default_flow_style=None)
    if path is not None:
        Path(path).write_text(text)
    return text


def parse_yaml(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"not valid YAML: {exc}") from exc
