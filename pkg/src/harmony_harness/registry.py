"""Tool inventory: canonical schemas, alias tools, alias parameters.

The registry resolves a message recipient (``repo_browser.list_files``) to
its canonical ToolSpec and turns the raw JSON argument text into a
validated ToolCall with canonical parameter names.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import yaml

from .exceptions import ToolCallArgParsingError, UnknownToolCallArg, UnknownToolCalled


class RegistryError(ValueError):
    pass


class ParamKind(str, enum.Enum):
    REQUIRED = "required"
    OPTIONAL = "optional"
    ALIAS = "alias"


class ValueType(str, enum.Enum):
    STRING = "string"
    INTEGER = "integer"
    STRING_LIST = "string_list"


_TS_TYPES = {
    ValueType.STRING: "string",
    ValueType.INTEGER: "number",
    ValueType.STRING_LIST: "string[]",
}


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: ParamKind
    value_type: ValueType = ValueType.STRING
    alias_of: str | None = None

    def check(self, value: Any) -> Any:
        """Return the value if it has the right type (strings promote to one-item lists)."""
        t = self.value_type
        if t is ValueType.STRING and isinstance(value, str):
            return value
        if t is ValueType.INTEGER and isinstance(value, int) and not isinstance(value, bool) and value >= 0:
            return value
        if t is ValueType.STRING_LIST:
            if isinstance(value, str):
                return [value]
            if isinstance(value, list) and value and all(isinstance(v, str) for v in value):
                return value
        expected = "non-negative integer" if t is ValueType.INTEGER else t.value
        raise ToolCallArgParsingError(
            f"argument {self.name!r} must be a {expected}, got {json.dumps(value)}",
            subtype="type",
            param=self.name,
        )


@dataclass(frozen=True)
class ToolSpec:
    name: str
    namespace: str | None = None
    params: tuple[ParamSpec, ...] = ()
    aliases: tuple[str, ...] = ()
    description: str = ""

    @property
    def qualified_name(self) -> str:
        return f"{self.namespace}.{self.name}" if self.namespace else self.name

    @property
    def canonical_params(self) -> tuple[ParamSpec, ...]:
        return tuple(p for p in self.params if p.kind is not ParamKind.ALIAS)

    @property
    def required(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params if p.kind is ParamKind.REQUIRED)

    def param(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def qualify(self, name: str) -> str:
        return f"{self.namespace}.{name}" if self.namespace else name


@dataclass(frozen=True)
class ToolCall:
    spec: ToolSpec
    args: Mapping[str, Any]
    raw: str
    recipient: str = ""
    via_alias: bool = False


@dataclass(frozen=True)
class Resolution:
    spec: ToolSpec
    via_alias: bool


def validate_args(spec: ToolSpec, raw: str, *, permissive: bool = False) -> ToolCall:
    """Parse and validate raw JSON arguments against ``spec``.

    Unknown keys raise UnknownToolCallArg (or are dropped when
    ``permissive``); bad JSON, alias/canonical collisions, missing required
    parameters and wrong value types raise ToolCallArgParsingError.
    """
    try:
        obj = json.loads(raw)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ToolCallArgParsingError(f"arguments are not valid JSON: {exc}", subtype="json") from None
    if not isinstance(obj, dict):
        raise ToolCallArgParsingError("arguments must be a JSON object", subtype="json")

    unknown = [k for k in obj if spec.param(k) is None]
    if unknown and not permissive:
        raise UnknownToolCallArg(
            f"unknown argument(s) for {spec.qualified_name}: {', '.join(sorted(unknown))}",
            args=sorted(unknown),
        )

    args: dict[str, Any] = {}
    for key, value in obj.items():
        p = spec.param(key)
        if p is None:
            continue
        canonical = spec.param(p.alias_of) if p.kind is ParamKind.ALIAS else p
        if canonical.name in args:
            raise ToolCallArgParsingError(
                f"argument {canonical.name!r} given more than once (via alias {key!r})",
                subtype="duplicate",
            )
        args[canonical.name] = canonical.check(value)

    missing = [name for name in spec.required if name not in args]
    if missing:
        raise ToolCallArgParsingError(
            f"missing required argument(s) for {spec.qualified_name}: {', '.join(missing)}",
            subtype="missing-required",
            missing=missing,
        )
    return ToolCall(spec=spec, args=args, raw=raw, recipient=spec.qualified_name)


def _ts_block(spec: ToolSpec) -> list[str]:
    lines = []
    if spec.description:
        lines.append(f"// {spec.description}")
    lines.append(f"type {spec.name} = (_: {{")
    for p in spec.canonical_params:
        opt = "?" if p.kind is ParamKind.OPTIONAL else ""
        lines.append(f"{p.name}{opt}: {_TS_TYPES[p.value_type]},")
    lines.append("}) => any;")
    return lines


def render_tool_defs(tools: Sequence[ToolSpec], placement: str = "system") -> str:
    """Render tool declarations as a TypeScript-like ``# Tools`` block.

    ``placement`` only documents where the caller will embed the block; the
    text is the same for the system and developer message.
    """
    if placement not in ("system", "developer"):
        raise RegistryError(f"unknown placement {placement!r}")
    if not tools:
        raise RegistryError("cannot render an empty tool list")
    seen: set[str] = set()
    groups: dict[str | None, list[ToolSpec]] = {}
    for t in tools:
        if t.qualified_name in seen:
            raise RegistryError(f"duplicate tool {t.qualified_name!r}")
        seen.add(t.qualified_name)
        groups.setdefault(t.namespace, []).append(t)

    out = ["# Tools"]
    for ns, specs in groups.items():
        out += ["", f"## {ns or 'functions'}", ""]
        if ns:
            out += [f"namespace {ns} {{", ""]
        for i, spec in enumerate(specs):
            if i:
                out.append("")
            out += _ts_block(spec)
        if ns:
            out += ["", f"}} // namespace {ns}"]
    return "\n".join(out)


class ToolRegistry:
    """Immutable tool inventory with alias-aware lookup."""

    def __init__(self, tools: Iterable[ToolSpec], *, permissive: bool = False):
        self.tools: tuple[ToolSpec, ...] = tuple(tools)
        self.permissive = permissive
        self._index: dict[str, Resolution] = {}
        for spec in self.tools:
            self._add(spec.qualified_name, Resolution(spec, via_alias=False))
        for spec in self.tools:
            for alias in spec.aliases:
                self._add(spec.qualify(alias), Resolution(spec, via_alias=True))

    def _add(self, name: str, res: Resolution) -> None:
        if name in self._index:
            raise RegistryError(f"duplicate tool name {name!r}")
        self._index[name] = res

    def __iter__(self):
        return iter(self.tools)

    def __len__(self) -> int:
        return len(self.tools)

    @property
    def namespaces(self) -> list[str]:
        return list(dict.fromkeys(t.namespace for t in self.tools if t.namespace))

    def resolve(self, recipient: str) -> Resolution:
        try:
            return self._index[recipient]
        except KeyError:
            raise UnknownToolCalled(f"unknown tool {recipient!r}", recipient=recipient) from None

    def resolve_tool(self, recipient: str) -> ToolSpec:
        return self.resolve(recipient).spec

    def is_alias(self, name: str, namespace: str | None = None) -> bool:
        qualified = f"{namespace}.{name}" if namespace and "." not in name else name
        res = self._index.get(qualified)
        return bool(res and res.via_alias)

    def validate_args(self, spec: ToolSpec, raw: str) -> ToolCall:
        return validate_args(spec, raw, permissive=self.permissive)

    def parse_call(self, recipient: str, raw: str) -> ToolCall:
        res = self.resolve(recipient)
        call = self.validate_args(res.spec, raw)
        return ToolCall(call.spec, call.args, raw, recipient=recipient, via_alias=res.via_alias)

    def render_tool_defs(self, placement: str = "system") -> str:
        return render_tool_defs(self.tools, placement)

    def without(self, *qualified_names: str) -> "ToolRegistry":
        """Copy of the registry with some tools removed (for ablations)."""
        drop = set(qualified_names)
        return ToolRegistry([t for t in self.tools if t.qualified_name not in drop], permissive=self.permissive)

    # -- loading -------------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], *, permissive: bool = False) -> "ToolRegistry":
        tools = []
        for ns in doc.get("namespaces", []):
            ns_name = ns.get("name") or None
            for t in ns.get("tools", []):
                params: list[ParamSpec] = []
                for p in t.get("params", []):
                    kind = ParamKind.REQUIRED if p.get("required", True) else ParamKind.OPTIONAL
                    vtype = ValueType(p.get("type", "string"))
                    params.append(ParamSpec(p["name"], kind, vtype))
                    params += [ParamSpec(a, ParamKind.ALIAS, vtype, alias_of=p["name"]) for a in p.get("aliases", [])]
                names = [p.name for p in params]
                if len(set(names)) != len(names):
                    raise RegistryError(f"duplicate parameter names in {t['name']!r}")
                tools.append(
                    ToolSpec(
                        name=t["name"],
                        namespace=ns_name,
                        params=tuple(params),
                        aliases=tuple(t.get("aliases", [])),
                        description=t.get("description", ""),
                    )
                )
        return cls(tools, permissive=permissive)

    @classmethod
    def from_file(cls, path: str | Path, *, permissive: bool = False) -> "ToolRegistry":
        text = Path(path).read_text()
        doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
        return cls.from_dict(doc, permissive=permissive)


def default_registry(*, permissive: bool = False) -> ToolRegistry:
    text = resources.files("harmony_harness").joinpath("data/inventory.yaml").read_text()
    return ToolRegistry.from_dict(yaml.safe_load(text), permissive=permissive)
