"""Loader for the line-oriented system description format.

Grammar::

    file     := (blank | comment | section | entry)*
    comment  := ('#' | ';') text          # whole lines only
    section  := '[' name ']'
    entry    := key '=' value

Sections: ``[system]``, ``[constants]``, ``[form.NAME]``, ``[field.NAME]``
and ``[check.NAME]``.  Every error carries the line and column where it was
detected; semantic errors also name the offending key.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import expr as _expr
from .diffcalc import Box, ScalarField
from .errors import ConfigError, ExprSyntaxError, UnknownFunctionError
from .exterior import KForm, VectorField
from .models import ThermoSystem, ideal_gas, van_der_waals

MODELS = ("ideal_gas", "van_der_waals", "custom")
MODEL_CONSTANTS = {
    "ideal_gas": ("c", "K1", "R"),
    "van_der_waals": ("a", "b", "c", "K2", "R"),
}
CHECK_KINDS = {
    # kind: (required keys, optional keys)
    "extensive_function": ((), ("function", "field", "scaling_tol")),
    "extensive_form": ((), ("form", "field")),
    "integrable": ((), ("form",)),
    "transversal": ((), ("form", "field")),
    "scaling_law": (("times",), ("form", "field", "point")),
    "entropy_recovery": ((), ("form", "field", "function", "base", "targets", "random_targets",
                              "via")),
    "first_law": ((), ()),
    "work_wedge": (("expect",), ("point", "points")),
    "metric_scaling": (("metric",), ("function", "beta", "field")),
    "null_direction": ((), ("function", "field")),
    "level_set": (("value",), ("function", "field", "band")),
    "potential_degree": (("beta",), ("function", "field")),
}
COMMON_CHECK_KEYS = ("kind", "tol", "samples", "seed", "box")
SYSTEM_KEYS = ("name", "model", "variables", "fundamental_equation", "domain", "sample_box", "seed")


@dataclass(frozen=True)
class Entry:
    value: str
    line: int
    column: int

    def error(self, message: str, key: str | None = None, offset: int = 0) -> ConfigError:
        return ConfigError(message, self.line, self.column + offset, key)


@dataclass
class Section:
    name: str
    line: int
    entries: dict[str, Entry] = field(default_factory=dict)


@dataclass(frozen=True)
class CheckSpec:
    name: str
    kind: str
    tol: float
    samples: int
    params: Mapping[str, Entry]
    line: int
    seed: int | None = None
    box: Box | None = None


@dataclass
class SystemConfig:
    name: str
    model: str
    variables: tuple[str, ...]
    constants: dict[str, float]
    equation: str | None
    domain: Box
    sample_box: Box | None
    seed: int | None
    system: ThermoSystem | None
    forms: dict[str, KForm]
    fields: dict[str, VectorField]
    checks: list[CheckSpec]
    path: str = ""

    @property
    def n(self) -> int:
        return len(self.variables)


# -- lexical layer --------------------------------------------------------------

_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_][\w.\-]*)\s*\]\s*$")
_KEY_RE = re.compile(r"^([A-Za-z_][\w^\-]*)\s*=")


def read_sections(text: str) -> list[Section]:
    sections: list[Section] = []
    current: Section | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped[0] in "#;":
            continue
        indent = len(raw) - len(raw.lstrip())
        if stripped.startswith("["):
            m = _SECTION_RE.match(stripped)
            if not m:
                raise ConfigError("malformed section header", lineno, indent + 1)
            name = m.group(1)
            if any(s.name == name for s in sections):
                raise ConfigError(f"duplicate section [{name}]", lineno, indent + 1)
            current = Section(name, lineno)
            sections.append(current)
            continue
        m = _KEY_RE.match(stripped)
        if not m:
            raise ConfigError("expected 'key = value'", lineno, indent + 1)
        if current is None:
            raise ConfigError("entry outside of any section", lineno, indent + 1)
        key = m.group(1)
        if key in current.entries:
            raise ConfigError(f"duplicate key {key!r} in [{current.name}]", lineno, indent + 1, key)
        after = stripped[m.end():]
        value = after.strip()
        col = indent + m.end() + (len(after) - len(after.lstrip())) + 1
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno, col, key)
        current.entries[key] = Entry(value, lineno, col)
    return sections


# -- value parsers ----------------------------------------------------------------

def _number(entry: Entry, key: str) -> float:
    try:
        return float(entry.value)
    except ValueError:
        pass
    try:
        e = _expr.parse(entry.value)
        if _expr.free_vars(e):
            raise entry.error(f"{key} must be a constant number", key)
        return _expr.evaluate_jets(e, {}, {}).value
    except (ExprSyntaxError, UnknownFunctionError) as exc:
        raise entry.error(f"invalid number for {key}: {exc}", key) from None


def _integer(entry: Entry, key: str) -> int:
    try:
        return int(entry.value)
    except ValueError:
        raise entry.error(f"{key} must be an integer", key) from None


def _names(entry: Entry, key: str) -> tuple[str, ...]:
    out = tuple(s.strip() for s in entry.value.split(","))
    for nm in out:
        if not re.fullmatch(r"[A-Za-z_]\w*", nm):
            raise entry.error(f"invalid name {nm!r} in {key}", key)
    if len(set(out)) != len(out):
        raise entry.error(f"repeated name in {key}", key)
    return out


def _point(text: str, entry: Entry, key: str, n: int) -> tuple[float, ...]:
    try:
        pt = tuple(float(s) for s in text.split(","))
    except ValueError:
        raise entry.error(f"{key} must be a comma-separated list of numbers", key) from None
    if len(pt) != n:
        raise entry.error(f"{key} needs {n} coordinates, got {len(pt)}", key)
    return pt


def _points(entry: Entry, key: str, n: int) -> list[tuple[float, ...]]:
    return [_point(chunk, entry, key, n) for chunk in entry.value.split(";") if chunk.strip()]


def _box(entry: Entry, key: str, n: int) -> Box:
    parts = [s.strip() for s in entry.value.split(",")]
    if len(parts) != n:
        raise entry.error(f"{key} needs {n} intervals 'lo..hi', got {len(parts)}", key)
    bounds = []
    for part in parts:
        lo, sep, hi = part.partition("..")
        try:
            if not sep:
                raise ValueError
            bounds.append((float(lo), float(hi)))
        except ValueError:
            raise entry.error(f"malformed interval {part!r} in {key}", key) from None
    try:
        return Box.of(bounds)
    except ValueError as exc:
        raise entry.error(f"{key}: {exc}", key) from None


def _expression(entry: Entry, key: str, variables, constants) -> ScalarField:
    try:
        e = _expr.parse(entry.value)
    except ExprSyntaxError as exc:
        raise entry.error(f"syntax error in {key}: {exc}", key, exc.offset) from None
    except UnknownFunctionError as exc:
        raise entry.error(f"in {key}: {exc}", key, exc.offset) from None
    unknown = _expr.free_vars(e) - set(variables) - set(constants)
    if unknown:
        first = sorted(unknown)[0]
        hit = re.search(rf"(?<![\w.]){re.escape(first)}(?![\w(])", entry.value)
        raise entry.error(f"undeclared name(s) {', '.join(sorted(unknown))} in {key}", key,
                          hit.start() if hit else 0)
    return ScalarField.from_expression(e, variables, constants)


# -- semantic layer -----------------------------------------------------------------

def load_config(path: str | Path) -> SystemConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    cfg = parse_config(text)
    cfg.path = str(path)
    return cfg


def parse_config(text: str) -> SystemConfig:
    sections = read_sections(text)
    by_name = {s.name: s for s in sections}
    for s in sections:
        head = s.name.split(".", 1)[0]
        if s.name not in ("system", "constants") and head not in ("form", "field", "check"):
            raise ConfigError(f"unknown section [{s.name}]", s.line, 1)
        if head in ("form", "field", "check") and "." not in s.name:
            raise ConfigError(f"section [{s.name}] needs a name, e.g. [{head}.NAME]", s.line, 1)
    if "system" not in by_name:
        raise ConfigError("missing [system] section", 1, 1)
    sysec = by_name["system"]
    _reject_unknown(sysec, SYSTEM_KEYS)
    e = sysec.entries

    model = e["model"].value if "model" in e else "custom"
    if model not in MODELS:
        raise e["model"].error(f"unknown model {model!r}; choose from {', '.join(MODELS)}", "model")
    name = e["name"].value if "name" in e else model

    constants: dict[str, float] = {}
    if "constants" in by_name:
        for key, entry in by_name["constants"].entries.items():
            constants[key] = _number(entry, key)

    if model == "custom":
        if "variables" not in e:
            raise ConfigError("custom model needs 'variables'", sysec.line, 1, "variables")
        variables = _names(e["variables"], "variables")
    else:
        variables = ("U", "V", "N")
        if "variables" in e and _names(e["variables"], "variables") != variables:
            raise e["variables"].error(f"model {model} uses variables U, V, N", "variables")
        if "fundamental_equation" in e:
            raise e["fundamental_equation"].error(
                f"model {model} fixes its fundamental equation; use model = custom", "fundamental_equation")
        missing = [k for k in MODEL_CONSTANTS[model] if k not in constants]
        if missing:
            raise ConfigError(f"model {model} needs constant(s) {', '.join(missing)}",
                              by_name.get("constants", sysec).line, 1, missing[0])
    n = len(variables)
    domain = _box(e["domain"], "domain", n) if "domain" in e else Box.positive(n)
    sample_box = _box(e["sample_box"], "sample_box", n) if "sample_box" in e else None
    seed = _integer(e["seed"], "seed") if "seed" in e else None

    system: ThermoSystem | None = None
    equation = None
    if model == "ideal_gas":
        system = ideal_gas(constants["c"], constants["K1"], constants["R"])
    elif model == "van_der_waals":
        k = constants
        system = van_der_waals(k["a"], k["b"], k["c"], k["K2"], k["R"], domain)
    elif "fundamental_equation" in e:
        entry = e["fundamental_equation"]
        equation = entry.value
        S = _expression(entry, "fundamental_equation", variables, constants)
        system = ThermoSystem.from_entropy(name, variables, ScalarField(n, S.rule, domain, S.label),
                                           domain, constants)

    forms: dict[str, KForm] = {}
    fields: dict[str, VectorField] = {}
    if system is not None:
        forms["theta"] = system.theta
        forms["epsilon"] = system.epsilon
        fields["rho"] = system.rho
    else:
        fields["rho"] = VectorField.radial(n, domain)
    for s in sections:
        head, _, label = s.name.partition(".")
        if head == "form":
            if label in forms:
                raise ConfigError(f"form {label!r} already defined", s.line, 1)
            forms[label] = _read_form(s, variables, constants, domain)
        elif head == "field":
            if label in fields:
                raise ConfigError(f"field {label!r} already defined", s.line, 1)
            fields[label] = _read_field(s, variables, constants, domain)

    checks = [_read_check(s, variables, constants, forms, fields, system)
              for s in sections if s.name.startswith("check.")]
    return SystemConfig(name, model, variables, constants, equation, domain, sample_box, seed,
                        system, forms, fields, checks)


def _reject_unknown(section: Section, allowed) -> None:
    for key, entry in section.entries.items():
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{section.name}]", entry.line,
                              entry.column, key)


def _read_form(s: Section, variables, constants, domain) -> KForm:
    """Keys are ``degree`` and basis monomials like ``dU`` or ``dU^dV``."""
    n = len(variables)
    entries = dict(s.entries)
    degree = _integer(entries.pop("degree"), "degree") if "degree" in entries else None
    coeffs = {}
    for key, entry in entries.items():
        pieces = key.split("^")
        idx = []
        for piece in pieces:
            if not piece.startswith("d") or piece[1:] not in variables:
                raise entry.error(f"form key {key!r} must be d<var> or d<var>^d<var>...", key)
            idx.append(variables.index(piece[1:]))
        if len(set(idx)) != len(idx):
            raise entry.error(f"repeated differential in {key!r}", key)
        order = sorted(idx)
        inversions = sum(1 for a in range(len(idx)) for b in range(a + 1, len(idx)) if idx[a] > idx[b])
        I = tuple(order)
        if I in coeffs:
            raise entry.error(f"basis element {key!r} given twice", key)
        f = _expression(entry, key, variables, constants)
        coeffs[I] = -f if inversions % 2 else f
    degrees = {len(I) for I in coeffs}
    if len(degrees) > 1:
        raise ConfigError(f"form [{s.name}] mixes degrees {sorted(degrees)}", s.line, 1)
    k = degrees.pop() if degrees else (degree if degree is not None else 0)
    if degree is not None and degree != k:
        raise ConfigError(f"form [{s.name}] declares degree {degree} but has degree-{k} terms",
                          s.line, 1, "degree")
    return KForm(n, k, coeffs, domain)


def _read_field(s: Section, variables, constants, domain) -> VectorField:
    for key, entry in s.entries.items():
        if key not in variables:
            raise entry.error(f"field component {key!r} is not a variable", key)
    comps = []
    for v in variables:
        if v in s.entries:
            comps.append(_expression(s.entries[v], v, variables, constants))
        else:
            comps.append(ScalarField.constant(len(variables), 0.0))
    return VectorField(comps, domain=domain, label=s.name.partition(".")[2])


def _read_check(s: Section, variables, constants, forms, fields, system) -> CheckSpec:
    e = s.entries
    if "kind" not in e:
        raise ConfigError(f"check [{s.name}] needs a 'kind'", s.line, 1, "kind")
    kind = e["kind"].value
    if kind not in CHECK_KINDS:
        raise e["kind"].error(f"unknown check kind {kind!r}", "kind")
    required, optional = CHECK_KINDS[kind]
    _reject_unknown(s, COMMON_CHECK_KEYS + required + optional)
    for key in required:
        if key not in e:
            raise ConfigError(f"check [{s.name}] needs {key!r}", s.line, 1, key)
    if "tol" not in e:
        raise ConfigError(f"check [{s.name}] needs 'tol'", s.line, 1, "tol")
    tol = _number(e["tol"], "tol")
    if not tol > 0 or not math.isfinite(tol):
        raise e["tol"].error("tol must be a positive number", "tol")
    if "scaling_tol" in e and not _number(e["scaling_tol"], "scaling_tol") > 0:
        raise e["scaling_tol"].error("scaling_tol must be a positive number", "scaling_tol")
    samples = _integer(e["samples"], "samples") if "samples" in e else 50
    if samples < 1:
        raise e["samples"].error("samples must be at least 1", "samples")
    n = len(variables)
    box = _box(e["box"], "box", n) if "box" in e else None
    seed = _integer(e["seed"], "seed") if "seed" in e else None

    for key, pool in (("form", forms), ("field", fields)):
        if key in e and e[key].value not in pool:
            raise e[key].error(f"unknown {key} {e[key].value!r}", key)
    if kind in ("extensive_form", "integrable", "transversal", "scaling_law",
                "entropy_recovery", "first_law", "work_wedge") and system is None and "form" not in e:
        raise ConfigError(f"check [{s.name}] needs a thermodynamic system or a 'form'", s.line, 1, "form")
    if "function" in e and e["function"].value != "S":
        _expression(e["function"], "function", variables, constants)
    elif kind in ("extensive_function", "null_direction", "level_set", "potential_degree",
                  "metric_scaling", "entropy_recovery") and system is None:
        raise ConfigError(f"check [{s.name}] needs 'function' (no fundamental equation)",
                          s.line, 1, "function")
    if kind == "work_wedge" and e["expect"].value not in ("zero", "nonzero"):
        raise e["expect"].error("expect must be 'zero' or 'nonzero'", "expect")
    if kind == "metric_scaling" and e["metric"].value not in ("ruppeiner", "quevedo"):
        raise e["metric"].error("metric must be 'ruppeiner' or 'quevedo'", "metric")
    if kind == "level_set" and _number(e["value"], "value") == 0:
        raise e["value"].error("level value must be nonzero", "value")
    for key in ("point", "base"):
        if key in e:
            _point(e[key].value, e[key], key, n)
    for key in ("points", "targets", "via"):
        if key in e:
            _points(e[key], key, n)
    if "times" in e:
        try:
            [float(t) for t in e["times"].value.split(",")]
        except ValueError:
            raise e["times"].error("times must be a comma-separated list of numbers", "times") from None
    return CheckSpec(s.name.partition(".")[2], kind, tol, samples, dict(e), s.line, seed, box)


def parse_point(entry: Entry, key: str, n: int) -> np.ndarray:
    return np.array(_point(entry.value, entry, key, n))


def parse_points(entry: Entry, key: str, n: int) -> list[np.ndarray]:
    return [np.array(p) for p in _points(entry, key, n)]


def resolve_function(cfg: SystemConfig, entry: Entry | None) -> ScalarField:
    if entry is None or entry.value == "S":
        if cfg.system is None:
            raise ConfigError("no fundamental equation to use as 'S'")
        return cfg.system.S
    f = _expression(entry, "function", cfg.variables, cfg.constants)
    return ScalarField(f.n, f.rule, cfg.domain, f.label)
