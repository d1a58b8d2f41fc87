"""JSON model / query / result files.

Number strings follow one grammar: optional sign, then a decimal ("0.1") or a
fraction of integers ("1/10").  Both are converted exactly; scientific
notation is rejected.

Model file::

    {
        "states": ["q0", "q1", "q2"],
        "actions": ["a", "b"],
        "transitions": {
            "a": [["0", "1/2", "1/2"], ["0", "1", "0"], ["0", "0", "1"]],
            "b": [["0", "0.1", "0.9"], ["0", "1", "0"], ["0", "0", "1"]]
        }
    }

Query file::

    {
        "initial": ["1", "0", "0"],
        "semantics": "csmt",
        "target": {"kind": "up", "generators": [["0", "0", "7/10"]]},
        "threshold": "9/10",
        "scheduler": {"kind": "constant", "weights": {"a": "2/5", "b": "3/5"}},
        "options": {"K": 3, "L": 1, "loop_limit": 100, "seed": 0}
    }
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from confmc.core import (
    ActionWord,
    Configuration,
    ConstantMixed,
    Dist,
    HistoryTable,
    LinearFractional,
    MdpModel,
    Scheduler,
    dist_new,
    mdp_validate,
)
from confmc.errors import ConfmcError, DimensionMismatch, InvalidInput, ParseError
from confmc.explorer import (
    DownwardGenerators,
    ExplicitConfigs,
    LinearThreshold,
    TargetSet,
    UpwardGenerators,
)
from confmc.semantics import SemanticsId

_NUMBER_RE = re.compile(r"^[+-]?(?:\d+/\d+|\d+(?:\.\d*)?|\.\d+)$")

NumStr = Union[str, int, float]


def parse_rational(text: Any) -> Fraction:
    """Exact rational from a number string ("1/2", "0.1", "-3")."""
    if isinstance(text, bool):
        raise InvalidInput(f"not a number: {text!r}")
    if isinstance(text, (int, float)):
        text = repr(text) if isinstance(text, float) else str(text)
    s = str(text).strip()
    if not _NUMBER_RE.match(s):
        raise InvalidInput(f"not a number string: {text!r} (use a decimal or p/q)")
    try:
        return Fraction(s)
    except ZeroDivisionError:
        raise InvalidInput(f"zero denominator in {text!r}") from None


def _vector(values: List[NumStr]) -> tuple:
    return tuple(parse_rational(v) for v in values)


def _weights(m: MdpModel, spec: Dict[str, NumStr]) -> Dist:
    return dist_new([(m.action_id(name), parse_rational(v)) for name, v in spec.items()])


# ---------------------------------------------------------------------------
# Schemas
# ---------------------------------------------------------------------------

class ModelFile(BaseModel):
    states: List[str]
    actions: List[str]
    transitions: Dict[str, List[List[NumStr]]]


class TargetSpec(BaseModel):
    kind: Literal["up", "down", "explicit", "linear"]
    generators: Optional[List[List[NumStr]]] = None
    configs: Optional[List[List[NumStr]]] = None
    alpha: Optional[List[NumStr]] = None
    bound: Optional[NumStr] = None
    strict: bool = False

    def build(self, n_states: int) -> TargetSet:
        if self.kind in ("up", "down"):
            if not self.generators:
                raise InvalidInput(f"target kind '{self.kind}' needs 'generators'")
            gens = tuple(_vector(g) for g in self.generators)
            target = UpwardGenerators(gens) if self.kind == "up" else DownwardGenerators(gens)
        elif self.kind == "explicit":
            if not self.configs:
                raise InvalidInput("target kind 'explicit' needs 'configs'")
            target = ExplicitConfigs(tuple(Configuration(_vector(c)) for c in self.configs))
        else:
            if self.alpha is None or self.bound is None:
                raise InvalidInput("target kind 'linear' needs 'alpha' and 'bound'")
            target = LinearThreshold(_vector(self.alpha), parse_rational(self.bound), self.strict)
        if target.dimension != n_states:
            raise DimensionMismatch(f"target of dimension {target.dimension} for {n_states} states")
        return target

    @classmethod
    def from_target(cls, H: TargetSet) -> "TargetSpec":
        if isinstance(H, (UpwardGenerators, DownwardGenerators)):
            return cls(kind=H.kind, generators=[g.as_strings() for g in H.generators])
        if isinstance(H, ExplicitConfigs):
            return cls(kind="explicit", configs=[c.as_strings() for c in H.configs])
        if isinstance(H, LinearThreshold):
            return cls(kind="linear", alpha=[str(v) for v in H.alpha], bound=str(H.bound), strict=H.strict)
        raise InvalidInput(f"cannot serialize target of kind '{H.kind}'")


class HistoryEntrySpec(BaseModel):
    prefix: List[List[NumStr]]
    weights: Dict[str, NumStr]


class SchedulerSpec(BaseModel):
    kind: Literal["constant", "word", "linear_fractional", "history"]
    weights: Optional[Dict[str, NumStr]] = None
    word: Optional[List[str]] = None
    default: Optional[str] = None
    theta: Optional[Dict[str, List[NumStr]]] = None
    s: Optional[List[NumStr]] = None
    table: Optional[List[HistoryEntrySpec]] = None

    def build(self, m: MdpModel) -> Scheduler:
        if self.kind == "constant":
            if not self.weights:
                raise InvalidInput("constant scheduler needs 'weights'")
            return ConstantMixed(_weights(m, self.weights))
        if self.kind == "word":
            if self.word is None:
                raise InvalidInput("word scheduler needs 'word'")
            default = self.default if self.default is not None else (self.word[-1] if self.word else None)
            if default is None:
                raise InvalidInput("word scheduler needs 'default' when the word is empty")
            return ActionWord(tuple(m.action_id(a) for a in self.word), m.action_id(default))
        if self.kind == "linear_fractional":
            if self.theta is None or self.s is None:
                raise InvalidInput("linear_fractional scheduler needs 'theta' and 's'")
            theta = []
            for name in m.action_names:
                row = self.theta.get(name)
                theta.append(_vector(row) if row is not None else (Fraction(0),) * (m.n_states + 1))
            unknown = set(self.theta) - set(m.action_names)
            if unknown:
                raise InvalidInput(f"theta names unknown actions {sorted(unknown)}")
            sigma = LinearFractional(tuple(theta), _vector(self.s))
            if len(sigma.s) != m.n_states + 1:
                raise DimensionMismatch(f"'s' needs {m.n_states + 1} entries")
            sigma.check_vertices(m.n_states)
            return sigma
        if not self.weights:
            raise InvalidInput("history scheduler needs default 'weights'")
        table = tuple(
            (tuple(Configuration(_vector(c)) for c in e.prefix), _weights(m, e.weights))
            for e in (self.table or [])
        )
        return HistoryTable(table, _weights(m, self.weights))

    @classmethod
    def from_scheduler(cls, sigma: Scheduler, m: MdpModel) -> "SchedulerSpec":
        def _w(d: Dist) -> Dict[str, str]:
            return {m.action_names[a]: str(p) for a, p in d.items()}

        if isinstance(sigma, ConstantMixed):
            return cls(kind="constant", weights=_w(sigma.weights))
        if isinstance(sigma, ActionWord):
            return cls(kind="word", word=[m.action_names[a] for a in sigma.word],
                       default=m.action_names[sigma.default])
        if isinstance(sigma, LinearFractional):
            return cls(
                kind="linear_fractional",
                theta={m.action_names[a]: [str(v) for v in row] for a, row in enumerate(sigma.theta)},
                s=[str(v) for v in sigma.s],
            )
        if isinstance(sigma, HistoryTable):
            return cls(
                kind="history",
                weights=_w(sigma.default),
                table=[
                    HistoryEntrySpec(prefix=[c.as_strings() for c in prefix], weights=_w(d))
                    for prefix, d in sigma.table
                ],
            )
        raise InvalidInput(f"cannot serialize scheduler {type(sigma).__name__}")


class QueryOptions(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    k: int = Field(3, alias="K", ge=1)
    l: int = Field(1, alias="L", ge=1)
    loop_limit: int = Field(100, ge=1)
    gamma: NumStr = "99999/100000"
    degree: int = Field(4, ge=1)
    seed: int = 0
    depth: int = Field(10, ge=0)
    runs: int = Field(1000, ge=1)
    step_cap: int = Field(50, ge=1)


class QueryFile(BaseModel):
    initial: List[NumStr]
    semantics: str = "msct"
    target: Optional[TargetSpec] = None
    threshold: Optional[NumStr] = None
    scheduler: Optional[SchedulerSpec] = None
    options: QueryOptions = Field(default_factory=QueryOptions)

    @field_validator("semantics")
    @classmethod
    def _known_semantics(cls, v: str) -> str:
        return SemanticsId.parse(v).value


class ResultRecord(BaseModel):
    """Machine-readable outcome of one CLI / batch / server run."""

    command: str
    verdict: str
    semantics: Optional[str] = None
    witness: Optional[List[str]] = None
    certificate: Optional[Dict[str, Any]] = None
    probabilities: Dict[str, str] = Field(default_factory=dict)
    details: Dict[str, Any] = Field(default_factory=dict)
    options: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    runtime_s: float = 0.0
    version: str = ""


# ---------------------------------------------------------------------------
# Parse / serialize
# ---------------------------------------------------------------------------

@dataclass
class Query:
    initial: Configuration
    semantics: SemanticsId
    target: Optional[TargetSet]
    threshold: Optional[Fraction]
    scheduler: Optional[Scheduler]
    options: QueryOptions


def _load_json(text: str, path: Optional[str]):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None


def _schema_error(exc: ValidationError, path: Optional[str]) -> ParseError:
    first = exc.errors()[0]
    where = ".".join(str(p) for p in first.get("loc", ()))
    return ParseError(f"{where or 'file'}: {first.get('msg', 'invalid value')}", path)


def parse_model(text: str, path: Optional[str] = None) -> MdpModel:
    try:
        spec = ModelFile.model_validate(_load_json(text, path))
    except ValidationError as exc:
        raise _schema_error(exc, path) from None
    return model_from_spec(spec, path)


def model_from_spec(spec: ModelFile, path: Optional[str] = None) -> MdpModel:
    missing = [a for a in spec.actions if a not in spec.transitions]
    extra = [a for a in spec.transitions if a not in spec.actions]
    if missing or extra:
        raise ParseError(f"transitions do not match actions (missing {missing}, unknown {extra})", path)
    try:
        matrices = tuple(
            tuple(_vector(row) for row in spec.transitions[a]) for a in spec.actions
        )
    except InvalidInput as exc:
        raise ParseError(str(exc), path) from None
    m = MdpModel(tuple(spec.states), tuple(spec.actions), matrices)
    mdp_validate(m)
    return m


def load_model(path: Union[str, Path]) -> MdpModel:
    p = Path(path)
    return parse_model(p.read_text(encoding="utf-8"), str(p))


def model_to_spec(m: MdpModel) -> ModelFile:
    return ModelFile(
        states=list(m.state_names),
        actions=list(m.action_names),
        transitions={
            name: [[str(v) for v in row] for row in m.matrices[a]]
            for a, name in enumerate(m.action_names)
        },
    )


def serialize_model(m: MdpModel) -> str:
    return json.dumps(model_to_spec(m).model_dump(), indent=2) + "\n"


def parse_query(text: str, m: MdpModel, path: Optional[str] = None) -> Query:
    try:
        spec = QueryFile.model_validate(_load_json(text, path))
    except ValidationError as exc:
        raise _schema_error(exc, path) from None
    return query_from_spec(spec, m, path)


def query_from_spec(spec: QueryFile, m: MdpModel, path: Optional[str] = None) -> Query:
    try:
        initial = Configuration(_vector(spec.initial))
        if len(initial) != m.n_states:
            raise DimensionMismatch(f"initial configuration has {len(initial)} entries for {m.n_states} states")
        threshold = parse_rational(spec.threshold) if spec.threshold is not None else None
        if threshold is not None and not 0 <= threshold <= 1:
            raise InvalidInput(f"threshold {threshold} outside [0, 1]")
        target = spec.target.build(m.n_states) if spec.target is not None else None
        sigma = spec.scheduler.build(m) if spec.scheduler is not None else None
    except ParseError:
        raise
    except ConfmcError as exc:
        raise ParseError(str(exc), path) from None
    return Query(initial, SemanticsId(spec.semantics), target, threshold, sigma, spec.options)


def load_query(path: Union[str, Path], m: MdpModel) -> Query:
    p = Path(path)
    return parse_query(p.read_text(encoding="utf-8"), m, str(p))


def query_to_spec(q: Query, m: MdpModel) -> QueryFile:
    return QueryFile(
        initial=q.initial.as_strings(),
        semantics=q.semantics.value,
        target=TargetSpec.from_target(q.target) if q.target is not None else None,
        threshold=str(q.threshold) if q.threshold is not None else None,
        scheduler=SchedulerSpec.from_scheduler(q.scheduler, m) if q.scheduler is not None else None,
        options=q.options,
    )


def serialize_query(q: Query, m: MdpModel) -> str:
    data = query_to_spec(q, m).model_dump(by_alias=True, exclude_none=True)
    return json.dumps(data, indent=2) + "\n"
