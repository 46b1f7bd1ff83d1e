"""``ifm`` command line.

    ifm run ev --R 0.5 --bomb
    ifm sweep zeno --N 1..200 --format csv --output zeno.csv
    ifm trace scenario.yaml --postselect D2
    ifm nested --R 0.5

Parameter flags mirror the keys of a YAML config file one to one
(``--config run.yaml``); flags override file values. Output files default
to the directory named by ``IFM_OUTPUT_DIR`` when ``--output`` is omitted.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from . import protocols as P
from .amplitude import ConditioningError, ModeSpace
from .composite import CompositeCircuit, nested_ifm
from .output import OutputError, emit_csv, emit_svg, fmt, rows_to_csv
from .scenario import ScenarioError, load_scenario, parse_yaml
from .tsvf import PostselectionError, trace_map

EXIT_OK = 0
EXIT_VALIDATION = 3
EXIT_UNKNOWN_PROTOCOL = 4
EXIT_MALFORMED = 5
EXIT_POSTSELECTION = 6
EXIT_CONDITIONING = 7
EXIT_OUTPUT = 8

OUTPUT_DIR_ENV = "IFM_OUTPUT_DIR"


class ValidationError(ValueError):
    pass


class UnknownProtocolError(KeyError):
    pass


class MalformedConfigError(ValueError):
    pass


# --- parameter schemas -------------------------------------------------------


def _unit(name, v):
    if not 0.0 <= v <= 1.0:
        raise ValidationError(f"{name} = {v} outside [0, 1]")


def _open_unit(name, v):
    if not 0.0 < v < 1.0:
        raise ValidationError(f"{name} = {v} outside (0, 1)")


def _positive(name, v):
    if v < 1:
        raise ValidationError(f"{name} = {v} must be at least 1")


def _half_open_unit(name, v):
    if not 0.0 <= v < 1.0:
        raise ValidationError(f"{name} = {v} outside [0, 1)")


def _transmission(name, v):
    if abs(v) > 1.0:
        raise ValidationError(f"|{name}| = {abs(v)} exceeds 1")


@dataclass
class Param:
    kind: type
    default: Any
    check: Callable | None = None
    help: str = ""


@dataclass
class Protocol:
    params: dict[str, Param]
    run: Callable[[dict, int], dict]
    summary: tuple[str, ...]
    plot: tuple[str, ...]


def _ev(p, seed):
    t = p["t"] if p["t"] is not None else (0.0 if p["bomb"] else None)
    out = P.ev_single_shot(p["R"], t)
    return {
        "R": p["R"],
        "object_t": "none" if t is None else complex(t),
        "D1": out["D1"],
        "D2": out["D2"],
        "explosion": out.explosion_prob,
        "residual": out.residual_prob,
    }


def _ev_iterated(p, seed):
    rep = P.ev_iterated(p["R"])
    row = {
        "R": p["R"],
        "p_success": rep.p_success,
        "p_explosion": rep.p_explosion,
        "p_inconclusive": rep.p_inconclusive,
        "efficiency": rep.efficiency,
    }
    if p["trials"] > 0:
        mc = P.ev_iterated_monte_carlo(p["R"], p["trials"], seed)
        row.update(trials=p["trials"], mc_p_success=mc.p_success, mc_efficiency=mc.efficiency)
    return row


def _zeno(p, seed):
    res = P.zeno_ifm(P.ZenoConfig(p["N"], not p["empty"], p["t"]))
    rep = res.report
    return {
        "N": p["N"],
        "object": "none" if p["empty"] else complex(p["t"]),
        "p_success": rep.p_success,
        "p_explosion": rep.p_explosion,
        "p_inconclusive": rep.p_inconclusive,
        "efficiency": rep.efficiency,
    }


def _cavity(p, seed):
    out = P.paul_pavicic(P.CavityConfig(p["r"], p["M"], p["bomb"]))
    return {
        "r": p["r"],
        "M": p["M"],
        "object": p["bomb"],
        "p_reflect": out.p_reflect,
        "p_transmit": out.p_transmit,
        "p_absorb": out.p_absorb,
    }


def _renninger(p, seed):
    if p["covered"] >= p["sectors"]:
        raise ValidationError("covered must be smaller than sectors")
    space = ModeSpace([f"sector_{k}" for k in range(p["sectors"])])
    state, p_null = P.negative_result_update(P.uniform_state(space), space.labels[: p["covered"]])
    return {
        "sectors": p["sectors"],
        "covered": p["covered"],
        "p_null": p_null,
        "p_detect": 1.0 - p_null,
        "survivor_prob": state.probabilities()[space.labels[-1]],
    }


def _dicke(p, seed):
    res = P.dicke_energy_shift(p["n_basis"])
    return {
        "n_basis": p["n_basis"],
        "e_before": res.e_before,
        "e_after": res.e_after,
        "captured_weight": res.captured_weight,
        "resolved": res.resolved,
    }


def _irradiation(p, seed):
    res = P.irradiation_metric(p["backend"], p["t"], R=p["R"], N=p["N"])
    return {
        "backend": p["backend"],
        "object_t": complex(p["t"]),
        "R": p["R"],
        "N": p["N"],
        "absorbed": res.absorbed,
        "detected": res.detected,
        "absorbed_per_detection": res.value if res.defined else "undefined",
    }


def _backend(name, v):
    if v not in ("ev", "zeno"):
        raise ValidationError(f"backend must be 'ev' or 'zeno', not {v!r}")


PROTOCOLS: dict[str, Protocol] = {
    "ev": Protocol(
        {
            "R": Param(float, 0.5, _unit, "first splitter reflectivity"),
            "bomb": Param(bool, False, None, "opaque object in the lower arm"),
            "t": Param(complex, None, _transmission, "object transmission amplitude"),
        },
        _ev,
        ("D1", "D2", "explosion"),
        ("D1", "D2", "explosion"),
    ),
    "ev-iterated": Protocol(
        {
            "R": Param(float, 0.5, _open_unit),
            "trials": Param(int, 0, None, "Monte Carlo photons (0 = closed form only)"),
        },
        _ev_iterated,
        ("p_success", "p_explosion", "efficiency"),
        ("p_success", "p_explosion", "efficiency"),
    ),
    "zeno": Protocol(
        {
            "N": Param(int, 10, _positive, "coupling cycles"),
            "empty": Param(bool, False, None, "no object in the right cavity"),
            "t": Param(complex, 0.0, _transmission),
        },
        _zeno,
        ("p_success", "p_explosion", "efficiency"),
        ("p_success", "p_explosion"),
    ),
    "cavity": Protocol(
        {
            "r": Param(float, 0.9, _half_open_unit, "mirror amplitude reflectivity"),
            "M": Param(int, 3, _positive, "round trips spanned by the pulse"),
            "bomb": Param(bool, False),
        },
        _cavity,
        ("p_reflect", "p_transmit", "p_absorb"),
        ("p_reflect", "p_transmit", "p_absorb"),
    ),
    "renninger": Protocol(
        {"sectors": Param(int, 8, _positive), "covered": Param(int, 4, _positive)},
        _renninger,
        ("p_null", "survivor_prob"),
        ("p_null",),
    ),
    "dicke": Protocol(
        {"n_basis": Param(int, 50, _positive)},
        _dicke,
        ("e_before", "e_after", "captured_weight"),
        ("e_after",),
    ),
    "irradiation": Protocol(
        {
            "backend": Param(str, "ev", _backend),
            "t": Param(complex, 0.0, _transmission),
            "R": Param(float, 0.5, _unit),
            "N": Param(int, 10, _positive),
        },
        _irradiation,
        ("absorbed", "detected", "absorbed_per_detection"),
        ("absorbed", "detected"),
    ),
}


def _coerce(name: str, param: Param, raw):
    if raw is None:
        return None
    try:
        if param.kind is bool:
            if isinstance(raw, bool):
                return raw
            s = str(raw).lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if param.kind is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw) if not isinstance(raw, str) else int(raw, 10)
        if param.kind is complex:
            if isinstance(raw, (list, tuple)):
                return complex(float(raw[0]), float(raw[1]))
            return complex(str(raw).replace(" ", "")) if isinstance(raw, str) else complex(raw)
        if param.kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        return param.kind(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"parameter {name}: cannot read {raw!r} as {param.kind.__name__}") from None


def validate(protocol: str, raw: dict) -> dict:
    """Fill defaults, coerce and range-check the parameters of ``protocol``."""
    proto = get_protocol(protocol)
    unknown = sorted(set(raw) - set(proto.params))
    if unknown:
        raise ValidationError(f"unknown parameter(s) for {protocol}: {unknown}; valid: {sorted(proto.params)}")
    out = {}
    for name, param in proto.params.items():
        value = _coerce(name, param, raw.get(name, param.default))
        if value is not None and param.check is not None:
            param.check(name, value)
        out[name] = value
    return out


def get_protocol(name: str) -> Protocol:
    try:
        return PROTOCOLS[name]
    except KeyError:
        raise UnknownProtocolError(f"unknown protocol {name!r}; available: {', '.join(PROTOCOLS)}") from None


def parse_range(name: str, text: str, kind: type) -> list:
    """``a..b`` (integers, inclusive), ``a..b:step`` or ``v1,v2,...``."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, rest = text.split("..", 1)
            hi, _, step = rest.partition(":")
            if kind is int:
                s = int(step) if step else 1
                if s < 1:
                    raise ValueError
                return list(range(int(lo), int(hi) + 1, s))
            lo_f, hi_f = float(lo), float(hi)
            s = float(step) if step else (hi_f - lo_f) / 10
            if s <= 0:
                raise ValueError
            n = int(math.floor((hi_f - lo_f) / s + 1e-9))
            return [round(lo_f + k * s, 12) for k in range(n + 1)]
        return [kind(v) for v in text.split(",") if v]
    except ValueError:
        raise ValidationError(f"cannot read sweep range {text!r} for {name}") from None


# --- scenario configs ---------------------------------------------------------


@dataclass
class ScenarioConfig:
    protocol: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    output: str | None = None
    format: str = "text"


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MalformedConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = parse_yaml(text)
    except ScenarioError as exc:
        raise MalformedConfigError(str(exc)) from exc
    if not isinstance(data, dict):
        raise MalformedConfigError(f"config {path} must be a mapping")
    allowed = {"protocol", "params", "seed", "output"}
    extra = set(data) - allowed
    if extra:
        raise MalformedConfigError(f"config {path}: unexpected keys {sorted(extra)}")
    if "params" in data and not isinstance(data["params"], dict):
        raise MalformedConfigError("config 'params' must be a mapping")
    out = data.get("output") or {}
    if not isinstance(out, dict):
        raise MalformedConfigError("config 'output' must be a mapping with path/format")
    return data


def _split_flags(extra: list[str]) -> dict:
    """Turn leftover ``--key value`` / ``--flag`` tokens into a dict."""
    params: dict[str, Any] = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) < 3:
            raise ValidationError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            params[key] = value
            i += 1
        elif i + 1 < len(extra) and not extra[i + 1].startswith("--"):
            params[key] = extra[i + 1]
            i += 2
        else:
            params[key] = True
            i += 1
    return params


def _resolve(args, extra) -> ScenarioConfig:
    file_cfg = load_config(args.config) if args.config else {}
    protocol = args.protocol or file_cfg.get("protocol")
    if not protocol:
        raise MalformedConfigError("no protocol given on the command line or in the config")
    get_protocol(protocol)
    params = dict(file_cfg.get("params") or {})
    params.update(_split_flags(extra))
    out = file_cfg.get("output") or {}
    seed = args.seed if args.seed is not None else file_cfg.get("seed", 0)
    try:
        seed = int(seed)
    except (TypeError, ValueError):
        raise ValidationError(f"seed must be an integer, not {seed!r}") from None
    return ScenarioConfig(
        protocol,
        params,
        seed,
        args.output or out.get("path"),
        args.format or out.get("format", "text"),
    )


def _default_path(name: str, fmt_: str) -> str | None:
    base = os.environ.get(OUTPUT_DIR_ENV)
    if not base:
        return None
    return str(Path(base) / f"{name}.{fmt_}")


def _emit(rows, cfg: ScenarioConfig, name: str, x: str, ys, title: str):
    if cfg.format not in ("text", "csv", "svg"):
        raise ValidationError(f"unknown output format {cfg.format!r}; use csv, svg or text")
    path = cfg.output or (_default_path(name, cfg.format) if cfg.format != "text" else None)
    if cfg.format == "csv":
        if path is None:
            sys.stdout.write(rows_to_csv(rows))
        else:
            emit_csv(rows, path)
    elif cfg.format == "svg":
        if not rows:
            raise ValidationError("refusing to write an SVG for an empty result")
        if path is None:
            raise ValidationError("SVG output needs --output or IFM_OUTPUT_DIR")
        emit_svg(rows, x, ys, path, title)
    elif path is not None:
        Path(path).write_text(rows_to_csv(rows))
    return path


def run_scenario(cfg: ScenarioConfig) -> list[dict]:
    proto = get_protocol(cfg.protocol)
    params = validate(cfg.protocol, cfg.params)
    try:
        row = proto.run(params, cfg.seed)
    except ValueError as exc:
        if isinstance(exc, (ConditioningError, ValidationError)):
            raise
        raise ValidationError(str(exc)) from exc
    return [row]


def _summary(protocol: str, row: dict, keys) -> str:
    parts = [f"{k} {fmt(row[k])}" for k in keys if k in row]
    return f"{protocol}: " + ", ".join(parts)


def cmd_run(args, extra) -> int:
    cfg = _resolve(args, extra)
    rows = run_scenario(cfg)
    proto = PROTOCOLS[cfg.protocol]
    first_key = next(iter(rows[0]))
    _emit(rows, cfg, cfg.protocol, first_key, proto.plot, cfg.protocol)
    print(_summary(cfg.protocol, rows[0], proto.summary))
    return EXIT_OK


def cmd_sweep(args, extra) -> int:
    cfg = _resolve(args, extra)
    proto = PROTOCOLS[cfg.protocol]
    swept = [
        k for k, v in cfg.params.items()
        if isinstance(v, str) and (".." in v or "," in v) and k in proto.params
    ]
    if len(swept) != 1:
        raise ValidationError("a sweep needs exactly one parameter given as a range (a..b[:step] or v1,v2,...)")
    key = swept[0]
    values = parse_range(key, cfg.params[key], proto.params[key].kind)
    rows = []
    for v in values:
        point = ScenarioConfig(cfg.protocol, {**cfg.params, key: v}, cfg.seed)
        rows.extend(run_scenario(point))
    if not rows and cfg.format == "svg":
        raise ValidationError("refusing to write an SVG for an empty sweep")
    path = _emit(rows, cfg, f"{cfg.protocol}_sweep", key, proto.plot, f"{cfg.protocol} sweep over {key}")
    if cfg.format == "text" and path is None:
        sys.stdout.write(rows_to_csv(rows))
    print(f"{cfg.protocol} sweep over {key}: {len(rows)} points", file=sys.stderr if cfg.format == "csv" and path is None else sys.stdout)
    return EXIT_OK


def _postselect_name(circuit, raw):
    if isinstance(circuit, CompositeCircuit):
        if isinstance(raw, str):
            raw = tuple(s.strip() for s in raw.split(","))
        if not isinstance(raw, (list, tuple)) or len(raw) != 2:
            raise MalformedConfigError("two-particle post-selection must name two detectors, e.g. D2,D2")
        return tuple(raw)
    return raw


def cmd_trace(args, extra) -> int:
    if extra:
        raise ValidationError(f"unexpected arguments {extra}")
    try:
        circuit = load_scenario(args.scenario)
        raw = parse_yaml(Path(args.scenario).read_text())
    except OSError as exc:
        raise MalformedConfigError(f"cannot read scenario {args.scenario}: {exc.strerror}") from exc
    except (ScenarioError, ValueError) as exc:
        raise MalformedConfigError(str(exc)) from exc
    post = args.postselect or raw.get("postselect")
    if post is None:
        raise MalformedConfigError("no post-selected detector (use --postselect or a 'postselect' key)")
    post = _postselect_name(circuit, post)
    try:
        tmap = trace_map(circuit, circuit.input_state(), post)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, PostselectionError):
            raise
        raise MalformedConfigError(str(exc)) from exc
    text = tmap.to_csv()
    path = args.output or _default_path(f"{Path(args.scenario).stem}_trace", "csv")
    if path is None:
        sys.stdout.write(text)
    else:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc.strerror}") from exc
        zeros = int((tmap.values <= 1e-12).sum())
        print(f"trace map written to {path} ({zeros} zero-trace cells)")
    return EXIT_OK


def cmd_nested(args, extra) -> int:
    params = _split_flags(extra)
    unknown = set(params) - {"R", "no_interaction"}
    if unknown:
        raise ValidationError(f"unknown parameter(s) for nested: {sorted(unknown)}")
    R = _coerce("R", Param(float, 0.5), params.get("R", 0.5))
    _open_unit("R", R)
    interaction = not _coerce("no_interaction", Param(bool, False), params.get("no_interaction", False))
    rep = nested_ifm(R, interaction)
    row = {"R": R, "interaction": interaction}
    for (da, db), p in rep.joint.probs.items():
        row[f"p_{da}_{db}"] = p
    row.update(
        explosion=rep.joint.explosion_prob,
        abl_object=rep.abl_object,
        abl_photon=rep.abl_photon,
        abl_both=rep.abl_both,
    )
    cfg = ScenarioConfig("nested", {}, 0, args.output, args.format or "text")
    _emit([row], cfg, "nested", "R", ("p_D2_D2",), "nested IFM")
    print(
        f"nested: P(D2,D2) {fmt(rep.p_postselection)}, explosion {fmt(rep.joint.explosion_prob)}, "
        f"ABL object {fmt(rep.abl_object)}, photon {fmt(rep.abl_photon)}, both {fmt(rep.abl_both)}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ifm",
        description="Single-photon interaction-free measurement simulator.",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    protos = ", ".join(PROTOCOLS)
    for name, helptext in (("run", "run one protocol"), ("sweep", "sweep one protocol parameter")):
        p = sub.add_parser(
            name,
            help=helptext,
            allow_abbrev=False,
            usage=f"ifm {name} [PROTOCOL] [--config FILE] [--seed N] [--output PATH] [--format FMT] [--KEY VALUE ...]",
            description=f"{helptext}. Protocols: {protos}. Protocol parameters are passed as --KEY VALUE.",
        )
        p.set_defaults(protocol=None)
        p.add_argument("--config", help="YAML config with protocol/params/seed/output")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--output", help="output path")
        p.add_argument("--format", choices=("csv", "svg", "text"), default=None)
    p = sub.add_parser("trace", help="weak-trace map of a scenario file", allow_abbrev=False)
    p.add_argument("scenario")
    p.add_argument("--postselect", help="detector name (two particles: D2,D2)")
    p.add_argument("--output")
    p = sub.add_parser("nested", help="nested IFM report (--R, --no_interaction)", allow_abbrev=False)
    p.add_argument("--output")
    p.add_argument("--format", choices=("csv", "svg", "text"), default=None)
    return parser


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "trace": cmd_trace, "nested": cmd_nested}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # the protocol name may only sit right after the subcommand; anything later is a flag value
    protocol = None
    if len(argv) >= 2 and argv[0] in ("run", "sweep") and not argv[1].startswith("-"):
        protocol = argv.pop(1)
    args, extra = parser.parse_known_args(argv)
    if args.command in ("run", "sweep"):
        args.protocol = protocol
    try:
        return COMMANDS[args.command](args, extra)
    except UnknownProtocolError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_UNKNOWN_PROTOCOL
    except MalformedConfigError as exc:
        print(f"error: malformed config: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except PostselectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_POSTSELECTION
    except ConditioningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONDITIONING
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except ValidationError as exc:
        print(f"error: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
