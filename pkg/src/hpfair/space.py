"""Hyperparameter domains, space files, sampling and unit mutation.

Space files are INI-like text preceded by a version line::

    hpfair-space 1

    [space]
    learner = decision_tree

    [param max_depth]
    kind = integer
    lo = 1
    hi = 32
    default = 8

    [param criterion]
    kind = categorical
    categories = gini, entropy
    default = gini

``kind`` is one of ``boolean``, ``categorical``, ``integer``, ``real``.
Numeric parameters accept an optional ``step`` (integer default 1, real
default ``(hi - lo) / 100``). A configuration is a plain ``dict`` mapping
every parameter name to a value of the matching Python type.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path

from .exceptions import MutationImpossibleError, SpaceValidationError

FORMAT_HEADER = "hpfair-space"
FORMAT_VERSION = 1
KINDS = ("boolean", "categorical", "integer", "real")
_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


@dataclass(frozen=True)
class ParamDomain:
    name: str
    kind: str
    default: object
    lo: float = None
    hi: float = None
    step: float = None
    categories: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpaceValidationError(
                f"parameter {self.name!r}: unknown kind {self.kind!r}", param=self.name
            )
        if self.kind in ("integer", "real"):
            if self.lo is None or self.hi is None:
                raise SpaceValidationError(
                    f"parameter {self.name!r}: numeric kinds need lo and hi", param=self.name
                )
            if self.lo > self.hi:
                raise SpaceValidationError(
                    f"parameter {self.name!r}: lo {self.lo} > hi {self.hi}", param=self.name
                )
            if self.step is None:
                step = 1 if self.kind == "integer" else (self.hi - self.lo) / 100
                object.__setattr__(self, "step", step)
            if self.kind == "integer":
                object.__setattr__(self, "lo", int(self.lo))
                object.__setattr__(self, "hi", int(self.hi))
                object.__setattr__(self, "step", int(self.step))
            if not self.step > 0 and not (self.kind == "real" and self.lo == self.hi):
                raise SpaceValidationError(
                    f"parameter {self.name!r}: step must be positive", param=self.name
                )
        elif self.kind == "categorical":
            if not self.categories:
                raise SpaceValidationError(
                    f"parameter {self.name!r}: categorical needs categories", param=self.name
                )
            if len(set(self.categories)) != len(self.categories):
                raise SpaceValidationError(
                    f"parameter {self.name!r}: repeated category", param=self.name
                )
            object.__setattr__(self, "categories", tuple(self.categories))
        if not self.contains(self.default):
            raise SpaceValidationError(
                f"parameter {self.name!r}: default {self.default!r} outside its domain",
                param=self.name,
            )

    @property
    def values(self):
        """Finite value list for boolean/categorical kinds."""
        if self.kind == "boolean":
            return (False, True)
        if self.kind == "categorical":
            return self.categories
        raise TypeError(f"{self.kind} domain is not enumerable")

    def contains(self, value):
        if self.kind == "boolean":
            return isinstance(value, bool)
        if self.kind == "categorical":
            return value in self.categories
        if isinstance(value, bool):
            return False
        if self.kind == "integer":
            return isinstance(value, int) and self.lo <= value <= self.hi
        return isinstance(value, (int, float)) and self.lo <= value <= self.hi

    def can_mutate(self):
        if self.kind in ("boolean", "categorical"):
            return len(self.values) > 1
        return self.hi > self.lo

    def sample(self, rng):
        if self.kind == "boolean":
            return bool(rng.integers(2))
        if self.kind == "categorical":
            return self.categories[int(rng.integers(len(self.categories)))]
        if self.kind == "integer":
            return int(rng.integers(self.lo, self.hi + 1))
        return float(rng.uniform(self.lo, self.hi))

    def mutate(self, value, rng):
        if self.kind in ("boolean", "categorical"):
            others = [v for v in self.values if v != value]
            return others[int(rng.integers(len(others)))]
        direction = 1 if rng.integers(2) else -1
        moved = self._clamp(value + direction * self.step)
        if moved == value:
            moved = self._clamp(value - direction * self.step)
        return moved

    def _clamp(self, v):
        v = min(max(v, self.lo), self.hi)
        return int(v) if self.kind == "integer" else float(v)


@dataclass(frozen=True)
class HyperparameterSpace:
    params: tuple
    learner: str = None

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        seen = set()
        for p in self.params:
            if p.name in seen:
                raise SpaceValidationError(f"duplicate parameter {p.name!r}", param=p.name)
            seen.add(p.name)

    @property
    def names(self):
        return [p.name for p in self.params]

    def __getitem__(self, name):
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def __len__(self):
        return len(self.params)

    def default(self):
        return {p.name: p.default for p in self.params}

    def validate(self, config):
        """Raise :class:`SpaceValidationError` unless ``config`` lies in the space."""
        if set(config) != set(self.names):
            missing = set(self.names) - set(config)
            extra = set(config) - set(self.names)
            raise SpaceValidationError(
                f"configuration keys differ from space (missing {sorted(missing)}, "
                f"unexpected {sorted(extra)})"
            )
        for p in self.params:
            if not p.contains(config[p.name]):
                raise SpaceValidationError(
                    f"{p.name}={config[p.name]!r} outside its domain", param=p.name
                )
        return config


def sample_uniform(space, rng):
    """Draw every parameter independently and uniformly from its domain."""
    return {p.name: p.sample(rng) for p in space.params}


def mutate_config(config, space, rng):
    """Return a copy of ``config`` with one randomly chosen parameter nudged.

    Numeric values move one ``step`` up or down (bouncing off the bounds),
    boolean and categorical values are redrawn among the other values.
    """
    mutable = [p for p in space.params if p.can_mutate()]
    if not mutable:
        raise MutationImpossibleError("no parameter of the space can take a second value")
    p = mutable[int(rng.integers(len(mutable)))]
    child = dict(config)
    child[p.name] = p.mutate(config[p.name], rng)
    return child


def _parse_value(kind, text, name):
    text = text.strip()
    try:
        if kind == "boolean":
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if kind == "integer":
            return int(text)
        if kind == "real":
            return float(text)
    except ValueError:
        raise SpaceValidationError(
            f"parameter {name!r}: cannot read {text!r} as {kind}", param=name
        ) from None
    return text


def parse_space_text(text, source="<string>"):
    lines = text.splitlines()
    body_start = 0
    while body_start < len(lines) and not lines[body_start].strip():
        body_start += 1
    head = lines[body_start].split() if body_start < len(lines) else []
    if len(head) != 2 or head[0] != FORMAT_HEADER:
        raise SpaceValidationError(f"{source}: first line must be '{FORMAT_HEADER} <version>'")
    if head[1] != str(FORMAT_VERSION):
        raise SpaceValidationError(f"{source}: unsupported space format version {head[1]}")

    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string("\n".join(lines[body_start + 1 :]), source=str(source))
    except configparser.DuplicateSectionError as exc:
        name = exc.section.split(None, 1)[-1]
        raise SpaceValidationError(f"duplicate parameter {name!r}", param=name) from None
    except configparser.Error as exc:
        raise SpaceValidationError(f"{source}: {exc}") from None

    learner = parser.get("space", "learner", fallback=None)
    params = []
    for section in parser.sections():
        if section == "space":
            continue
        kw, _, name = section.partition(" ")
        if kw != "param" or not name.strip():
            raise SpaceValidationError(f"{source}: unexpected section [{section}]")
        name = name.strip()
        opts = parser[section]
        kind = opts.get("kind", "").strip()
        if kind not in KINDS:
            raise SpaceValidationError(f"parameter {name!r}: unknown kind {kind!r}", param=name)
        if "default" not in opts:
            raise SpaceValidationError(f"parameter {name!r}: missing default", param=name)
        fields = {"name": name, "kind": kind}
        if kind == "categorical":
            cats = tuple(c.strip() for c in opts.get("categories", "").split(",") if c.strip())
            fields["categories"] = cats
            fields["default"] = opts["default"].strip()
        else:
            fields["default"] = _parse_value(kind, opts["default"], name)
        if kind in ("integer", "real"):
            for key in ("lo", "hi", "step"):
                if key in opts:
                    fields[key] = _parse_value(kind, opts[key], name)
        params.append(ParamDomain(**fields))
    return HyperparameterSpace(params=params, learner=learner)


def parse_space(config_path):
    """Read and validate a space-definition file."""
    path = Path(config_path)
    return parse_space_text(path.read_text(encoding="utf-8"), source=path)


def format_space(space):
    """Render ``space`` back into the file format understood by :func:`parse_space`."""
    out = [f"{FORMAT_HEADER} {FORMAT_VERSION}", ""]
    if space.learner:
        out += ["[space]", f"learner = {space.learner}", ""]
    for p in space.params:
        out.append(f"[param {p.name}]")
        out.append(f"kind = {p.kind}")
        if p.kind == "categorical":
            out.append("categories = " + ", ".join(p.categories))
        if p.kind in ("integer", "real"):
            out += [f"lo = {p.lo!r}", f"hi = {p.hi!r}", f"step = {p.step!r}"]
        default = str(p.default).lower() if p.kind == "boolean" else p.default
        out += [f"default = {default}", ""]
    return "\n".join(out)


def builtin_space(learner):
    """Load the space file bundled for one of the built-in learners."""
    from .learners import canonical_name

    name = canonical_name(learner)
    path = Path(__file__).parent / "spaces" / f"{name}.space"
    return parse_space(path)


def is_close_config(a, b, tol=1e-12):
    """Equality of two configurations with a tolerance on real values."""
    if set(a) != set(b):
        return False
    for k in a:
        x, y = a[k], b[k]
        if isinstance(x, float) or isinstance(y, float):
            if not math.isclose(x, y, rel_tol=0, abs_tol=tol):
                return False
        elif x != y:
            return False
    return True
