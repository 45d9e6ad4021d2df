"""Distributed, dynamic IoT choreographies.

Recipes describe dataflows between typed ingredients. Runtime
configurations bind offerings (devices and services) to ingredients via
subclass-based matchmaking plus offering selection rules; the controller
turns memberships into interaction descriptors that engines use to route
data among themselves.
"""

from .controller import Controller, generate_indes
from .engine import Engine, RemoteCall
from .matchmaker import bind_ports, find_matching_ircs, matches
from .models import (
    DataField,
    Endpoint,
    Ingredient,
    Interaction,
    InteractionDescriptor,
    OfferingDescription,
    PortBinding,
    Recipe,
)
from .ontology import TypeGraph, is_subclass_of, load_type_graph
from .osr import And, Comparison, Op, Or, evaluate, parse_osr, serialize_osr
from .registry import Registry

__all__ = [
    "And",
    "Comparison",
    "Controller",
    "DataField",
    "Endpoint",
    "Engine",
    "Ingredient",
    "Interaction",
    "InteractionDescriptor",
    "OfferingDescription",
    "Op",
    "Or",
    "PortBinding",
    "Recipe",
    "Registry",
    "RemoteCall",
    "TypeGraph",
    "bind_ports",
    "evaluate",
    "find_matching_ircs",
    "generate_indes",
    "is_subclass_of",
    "load_type_graph",
    "matches",
    "parse_osr",
    "serialize_osr",
]
