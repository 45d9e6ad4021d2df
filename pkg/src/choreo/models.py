"""Offering, recipe and runtime-configuration records with their JSON wire forms."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Optional
from urllib.parse import urlsplit

from .errors import UnsupportedProtocolError, ValidationError
from .osr import TRUE, OsrExpr, parse_osr, serialize_osr

PLACEHOLDER_RE = re.compile(r"@@([^@\s]+)@@")

ENDPOINT_TYPES = ("HTTP_GET", "HTTP_POST", "HTTP_PUT")
_KNOWN_OD_KEYS = {
    "localId",
    "category",
    "endpoints",
    "requestTemplate",
    "responseMapping",
    "inputData",
    "outputData",
}

Scalar = (str, int, float, bool)


def flatten_properties(obj: dict, prefix: str = "") -> dict[str, Any]:
    """``{"extent": {"city": "Munich"}}`` -> ``{"extent.city": "Munich"}``."""
    flat: dict[str, Any] = {}
    for key, value in obj.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten_properties(value, path + "."))
        elif isinstance(value, Scalar):
            flat[path] = value
        else:
            raise ValidationError(path, f"non-functional property must be a scalar or object, got {type(value).__name__}")
    return flat


def unflatten_properties(flat: dict[str, Any]) -> dict[str, Any]:
    nested: dict[str, Any] = {}
    for path, value in flat.items():
        node = nested
        *parents, leaf = path.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    return nested


@dataclass(frozen=True)
class DataField:
    name: str
    value_type: str

    def __post_init__(self):
        if not self.name:
            raise ValidationError("name", "port name must be nonempty")
        if not self.value_type:
            raise ValidationError(self.name, "valueType must be nonempty")

    @classmethod
    def from_dict(cls, d: dict) -> "DataField":
        try:
            return cls(d["name"], d["valueType"])
        except (KeyError, TypeError) as exc:
            raise ValidationError("dataField", f"expected {{name, valueType}}, got {d!r}") from exc

    def to_dict(self) -> dict:
        return {"name": self.name, "valueType": self.value_type}


def _ports(raw, field_name: str) -> tuple[DataField, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ValidationError(field_name, "expected a list")
    ports = tuple(DataField.from_dict(p) for p in raw)
    names = [p.name for p in ports]
    if len(set(names)) != len(names):
        raise ValidationError(field_name, f"duplicate port names in {names}")
    return ports


@dataclass(frozen=True)
class Endpoint:
    uri: str
    endpoint_type: str = "HTTP_POST"
    accept_type: str = "application/json"
    content_type: str = "application/json"

    def __post_init__(self):
        if self.endpoint_type.startswith("COAP_"):
            raise UnsupportedProtocolError("endpoints", f"unsupported protocol {self.endpoint_type}")
        if self.endpoint_type not in ENDPOINT_TYPES:
            raise ValidationError("endpoints", f"unknown endpointType {self.endpoint_type!r}")
        parts = urlsplit(self.uri)
        if parts.scheme not in ("http", "https") or not parts.netloc:
            if parts.scheme == "coap":
                raise UnsupportedProtocolError("endpoints", f"unsupported protocol in {self.uri}")
            raise ValidationError("endpoints", f"not an absolute http URI: {self.uri!r}")

    @property
    def method(self) -> str:
        return self.endpoint_type.split("_", 1)[1]

    @property
    def base(self) -> str:
        parts = urlsplit(self.uri)
        return f"{parts.scheme}://{parts.netloc}"

    @classmethod
    def from_dict(cls, d: dict) -> "Endpoint":
        if not isinstance(d, dict) or "uri" not in d:
            raise ValidationError("endpoints", f"endpoint needs a uri: {d!r}")
        return cls(
            d["uri"],
            d.get("endpointType", "HTTP_POST"),
            d.get("acceptType", "application/json"),
            d.get("contentType", "application/json"),
        )

    def to_dict(self) -> dict:
        return {
            "uri": self.uri,
            "endpointType": self.endpoint_type,
            "acceptType": self.accept_type,
            "contentType": self.content_type,
        }


@dataclass
class OfferingDescription:
    local_id: str
    category: str
    endpoints: tuple[Endpoint, ...] = ()
    request_template: Optional[str] = None
    response_mapping: Optional[dict[str, str]] = None
    input_data: tuple[DataField, ...] = ()
    output_data: tuple[DataField, ...] = ()
    non_functional: dict[str, Any] = field(default_factory=dict)
    registered_at: Optional[int] = None

    def __post_init__(self):
        self.endpoints = tuple(self.endpoints)
        self.input_data = tuple(self.input_data)
        self.output_data = tuple(self.output_data)
        self.validate()

    # convenience for OSR evaluation, which reads the flat property map
    @property
    def nonFunctional(self) -> dict[str, Any]:
        return self.non_functional

    def validate(self) -> None:
        if not isinstance(self.local_id, str) or not self.local_id:
            raise ValidationError("localId", "must be a nonempty string")
        if not isinstance(self.category, str) or not self.category:
            raise ValidationError("category", "must be a nonempty string")
        for direction, ports in (("inputData", self.input_data), ("outputData", self.output_data)):
            names = [p.name for p in ports]
            if len(set(names)) != len(names):
                raise ValidationError(direction, f"duplicate port names in {names}")
        inputs = {p.name for p in self.input_data}
        if self.request_template is not None:
            if not isinstance(self.request_template, str):
                raise ValidationError("requestTemplate", "must be a string")
            for name in PLACEHOLDER_RE.findall(self.request_template):
                if name not in inputs:
                    raise ValidationError("requestTemplate", f"placeholder @@{name}@@ names no input port")
        if self.response_mapping is not None:
            outputs = {p.name for p in self.output_data}
            for key in self.response_mapping:
                if key not in outputs:
                    raise ValidationError("responseMapping", f"{key!r} names no output port")
        for path, value in self.non_functional.items():
            if not isinstance(value, Scalar):
                raise ValidationError(path, "non-functional property must be a scalar")

    def input(self, name: str) -> DataField:
        return next(p for p in self.input_data if p.name == name)

    def output(self, name: str) -> DataField:
        return next(p for p in self.output_data if p.name == name)

    @property
    def receive_uri(self) -> Optional[str]:
        return self.endpoints[0].uri if self.endpoints else None

    @classmethod
    def from_dict(cls, d: dict) -> "OfferingDescription":
        """Build from the wire format; unknown keys become non-functional properties."""
        if not isinstance(d, dict):
            raise ValidationError("offering", "expected a JSON object")
        for key in ("localId", "category"):
            if key not in d:
                raise ValidationError(key, "missing")
        endpoints = d.get("endpoints") or []
        if not isinstance(endpoints, list):
            raise ValidationError("endpoints", "expected a list")
        mapping = d.get("responseMapping")
        if mapping is not None and not isinstance(mapping, dict):
            raise ValidationError("responseMapping", "expected an object")
        extra = {k: v for k, v in d.items() if k not in _KNOWN_OD_KEYS}
        return cls(
            local_id=d["localId"],
            category=d["category"],
            endpoints=tuple(Endpoint.from_dict(e) for e in endpoints),
            request_template=d.get("requestTemplate"),
            response_mapping=dict(mapping) if mapping is not None else None,
            input_data=_ports(d.get("inputData"), "inputData"),
            output_data=_ports(d.get("outputData"), "outputData"),
            non_functional=flatten_properties(extra),
        )

    def to_dict(self) -> dict:
        d = {
            "localId": self.local_id,
            "category": self.category,
            "endpoints": [e.to_dict() for e in self.endpoints],
            "requestTemplate": self.request_template,
            "responseMapping": self.response_mapping,
            "inputData": [p.to_dict() for p in self.input_data],
            "outputData": [p.to_dict() for p in self.output_data],
        }
        d.update(unflatten_properties(self.non_functional))
        return d

    def to_record(self) -> dict:
        """Snapshot form: flat property map kept verbatim."""
        d = self.to_dict()
        for key in list(d):
            if key not in _KNOWN_OD_KEYS:
                del d[key]
        d["nonFunctional"] = dict(self.non_functional)
        d["registeredAt"] = self.registered_at
        return d

    @classmethod
    def from_record(cls, d: dict) -> "OfferingDescription":
        base = {k: v for k, v in d.items() if k in _KNOWN_OD_KEYS}
        od = cls.from_dict(base)
        od.non_functional = dict(d.get("nonFunctional", {}))
        od.registered_at = d.get("registeredAt")
        od.validate()
        return od


@dataclass(frozen=True)
class Ingredient:
    id: str
    category: str
    inputs: tuple[DataField, ...] = ()
    outputs: tuple[DataField, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if not self.id or "." in self.id:
            raise ValidationError("ingredients", f"ingredient id must be nonempty and dot-free: {self.id!r}")
        for direction, ports in (("inputs", self.inputs), ("outputs", self.outputs)):
            names = [p.name for p in ports]
            if len(set(names)) != len(names):
                raise ValidationError(f"{self.id}.{direction}", f"duplicate port names in {names}")

    @classmethod
    def from_dict(cls, d: dict) -> "Ingredient":
        try:
            return cls(
                d["id"],
                d["category"],
                _ports(d.get("inputs"), "inputs"),
                _ports(d.get("outputs"), "outputs"),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError("ingredients", f"malformed ingredient {d!r}") from exc

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "inputs": [p.to_dict() for p in self.inputs],
            "outputs": [p.to_dict() for p in self.outputs],
        }


@dataclass(frozen=True)
class Interaction:
    source_ingredient: str
    source_output: str
    target_ingredient: str
    target_input: str

    def __post_init__(self):
        if self.source_ingredient == self.target_ingredient:
            raise ValidationError("interactions", f"self-loop on ingredient {self.source_ingredient!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "Interaction":
        try:
            src_ing, src_port = d["from"].split(".", 1)
            dst_ing, dst_port = d["to"].split(".", 1)
        except (KeyError, ValueError, AttributeError) as exc:
            raise ValidationError("interactions", f"expected {{from: 'ing.port', to: 'ing.port'}}, got {d!r}") from exc
        return cls(src_ing, src_port, dst_ing, dst_port)

    def to_dict(self) -> dict:
        return {
            "from": f"{self.source_ingredient}.{self.source_output}",
            "to": f"{self.target_ingredient}.{self.target_input}",
        }


@dataclass(frozen=True)
class Recipe:
    id: str
    ingredients: tuple[Ingredient, ...]
    interactions: tuple[Interaction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ingredients", tuple(self.ingredients))
        object.__setattr__(self, "interactions", tuple(self.interactions))
        ids = [i.id for i in self.ingredients]
        if len(set(ids)) != len(ids):
            raise ValidationError("ingredients", f"duplicate ingredient ids in {ids}")
        by_id = {i.id: i for i in self.ingredients}
        for it in self.interactions:
            src = by_id.get(it.source_ingredient)
            dst = by_id.get(it.target_ingredient)
            if src is None or dst is None:
                raise ValidationError("interactions", f"unknown ingredient in {it.to_dict()}")
            if it.source_output not in {p.name for p in src.outputs}:
                raise ValidationError("interactions", f"{src.id} has no output {it.source_output!r}")
            if it.target_input not in {p.name for p in dst.inputs}:
                raise ValidationError("interactions", f"{dst.id} has no input {it.target_input!r}")

    def ingredient(self, ingredient_id: str) -> Ingredient:
        for ing in self.ingredients:
            if ing.id == ingredient_id:
                return ing
        raise KeyError(ingredient_id)

    def check_types(self, graph) -> None:
        """Every interaction must carry a subtype of the target input's type."""
        for it in self.interactions:
            src = next(p for p in self.ingredient(it.source_ingredient).outputs if p.name == it.source_output)
            dst = next(p for p in self.ingredient(it.target_ingredient).inputs if p.name == it.target_input)
            if not graph.is_subclass_of(src.value_type, dst.value_type):
                raise ValidationError(
                    "interactions",
                    f"{it.source_ingredient}.{it.source_output} ({src.value_type}) is not compatible "
                    f"with {it.target_ingredient}.{it.target_input} ({dst.value_type})",
                )

    @classmethod
    def from_dict(cls, d: dict) -> "Recipe":
        if not isinstance(d, dict) or "id" not in d:
            raise ValidationError("recipe", "expected an object with an id")
        return cls(
            d["id"],
            tuple(Ingredient.from_dict(i) for i in d.get("ingredients", [])),
            tuple(Interaction.from_dict(i) for i in d.get("interactions", [])),
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "ingredients": [i.to_dict() for i in self.ingredients],
            "interactions": [i.to_dict() for i in self.interactions],
        }


@dataclass(frozen=True)
class PortBinding:
    """Offering port -> ingredient port, per direction."""

    input_map: dict[str, str] = field(default_factory=dict)
    output_map: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"inputMap": dict(self.input_map), "outputMap": dict(self.output_map)}

    @classmethod
    def from_dict(cls, d: dict) -> "PortBinding":
        return cls(dict(d.get("inputMap", {})), dict(d.get("outputMap", {})))


@dataclass
class IngredientRuntimeConfiguration:
    id: str
    ingredient_id: str
    osr: OsrExpr = TRUE
    min_cardinality: int = 0
    max_cardinality: Optional[int] = None  # None = unbounded
    members: list[tuple[str, PortBinding]] = field(default_factory=list)

    def __post_init__(self):
        if not isinstance(self.min_cardinality, int) or self.min_cardinality < 0:
            raise ValidationError("min", f"must be a non-negative integer, got {self.min_cardinality!r}")
        if self.max_cardinality is not None:
            if not isinstance(self.max_cardinality, int) or self.max_cardinality < 1:
                raise ValidationError("max", f"must be a positive integer, got {self.max_cardinality!r}")
            if self.min_cardinality > self.max_cardinality:
                raise ValidationError(
                    "min", f"min {self.min_cardinality} exceeds max {self.max_cardinality} for {self.ingredient_id}"
                )

    @property
    def member_ids(self) -> list[str]:
        return [m for m, _ in self.members]

    def binding(self, offering_id: str) -> PortBinding:
        for m, b in self.members:
            if m == offering_id:
                return b
        raise KeyError(offering_id)

    def has_capacity(self) -> bool:
        return self.max_cardinality is None or len(self.members) < self.max_cardinality

    @property
    def satisfied(self) -> bool:
        return len(self.members) >= self.min_cardinality

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "ingredientId": self.ingredient_id,
            "osr": serialize_osr(self.osr),
            "min": self.min_cardinality,
            "max": self.max_cardinality,
            "members": [{"offering": m, "binding": b.to_dict()} for m, b in self.members],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IngredientRuntimeConfiguration":
        return cls(
            d["id"],
            d["ingredientId"],
            parse_osr(d.get("osr", "")),
            d.get("min", 0),
            d.get("max"),
            [(m["offering"], PortBinding.from_dict(m["binding"])) for m in d.get("members", [])],
        )


@dataclass
class RecipeRuntimeConfiguration:
    id: str
    recipe_id: str
    ircs: list[IngredientRuntimeConfiguration]
    active: bool = False

    def recompute_active(self) -> bool:
        self.active = all(irc.satisfied for irc in self.ircs)
        return self.active

    def irc_for(self, ingredient_id: str) -> IngredientRuntimeConfiguration:
        for irc in self.ircs:
            if irc.ingredient_id == ingredient_id:
                return irc
        raise KeyError(ingredient_id)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "recipeId": self.recipe_id,
            "active": self.active,
            "ircs": [irc.to_dict() for irc in self.ircs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RecipeRuntimeConfiguration":
        return cls(
            d["id"],
            d["recipeId"],
            [IngredientRuntimeConfiguration.from_dict(i) for i in d["ircs"]],
            bool(d.get("active", False)),
        )


@dataclass
class InteractionDescriptor:
    """Per-offering wiring for one RRC.

    ``outputs``: own output port -> {target endpoint URI -> target input port}.
    ``inputs``: source offering id -> own input ports fed by it.
    """

    offering: str
    rrc: str
    outputs: dict[str, dict[str, str]] = field(default_factory=dict)
    inputs: dict[str, list[str]] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not self.outputs and not self.inputs

    def to_dict(self) -> dict:
        return {
            "offering": self.offering,
            "recipeRuntimeConfiguration": self.rrc,
            "outputs": {p: dict(t) for p, t in self.outputs.items()},
            "inputs": {s: list(ps) for s, ps in self.inputs.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InteractionDescriptor":
        try:
            return cls(
                d["offering"],
                d["recipeRuntimeConfiguration"],
                {p: dict(t) for p, t in (d.get("outputs") or {}).items()},
                {s: list(ps) for s, ps in (d.get("inputs") or {}).items()},
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValidationError("indes", f"malformed interaction descriptor: {exc}") from exc
