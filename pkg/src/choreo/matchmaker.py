"""Offering/ingredient matchmaking and port binding."""

from __future__ import annotations

from typing import Sequence

from .errors import ChoreoError
from .models import DataField, Ingredient, OfferingDescription, PortBinding
from .ontology import TypeGraph
from .osr import evaluate


def matches(o: OfferingDescription, i: Ingredient, g: TypeGraph) -> bool:
    """True iff offering ``o`` can replace ingredient ``i``.

    The offering's category must specialise the ingredient's; every offering
    input needs an ingredient input of the same or a more specific type, and
    every offering output an ingredient output of the same or a more general
    type. Extra ingredient ports are ignored.
    """
    if not g.is_subclass_of(o.category, i.category):
        return False
    for in_o in o.input_data:
        if not any(g.is_subclass_of(in_i.value_type, in_o.value_type) for in_i in i.inputs):
            return False
    for out_o in o.output_data:
        if not any(g.is_subclass_of(out_o.value_type, out_i.value_type) for out_i in i.outputs):
            return False
    return True


def _greedy_bind(
    own: Sequence[DataField],
    theirs: Sequence[DataField],
    witness,
    specificity,
) -> dict[str, str]:
    bound: dict[str, str] = {}
    used: set[str] = set()
    for port in sorted(own, key=lambda p: p.name):
        cands = [t for t in theirs if witness(t, port)]
        if not cands:
            raise ChoreoError(f"no witness for port {port.name!r}")
        # unbound first, then most specific, then smallest name
        best = min(cands, key=lambda t: (t.name in used, -specificity(t, port), t.name))
        bound[port.name] = best.name
        used.add(best.name)
    return bound


def bind_ports(o: OfferingDescription, i: Ingredient, g: TypeGraph) -> PortBinding:
    """Choose which ingredient port each offering port stands for.

    Inputs bind to the deepest satisfying ingredient input (longest subclass
    path down from the offering's type); outputs bind to the closest
    satisfying ingredient output (shortest path up). Offering ports are
    processed in name order and prefer ingredient ports not yet taken, so the
    binding is injective whenever the greedy pass allows it.
    """
    if not matches(o, i, g):
        raise ChoreoError(f"offering {o.local_id!r} cannot replace ingredient {i.id!r}")
    input_map = _greedy_bind(
        o.input_data,
        i.inputs,
        lambda t, p: g.is_subclass_of(t.value_type, p.value_type),
        lambda t, p: g.longest_path(t.value_type, p.value_type),
    )
    output_map = _greedy_bind(
        o.output_data,
        i.outputs,
        lambda t, p: g.is_subclass_of(p.value_type, t.value_type),
        lambda t, p: -g.shortest_path(p.value_type, t.value_type),
    )
    return PortBinding(input_map, output_map)


def admissible(o: OfferingDescription, ingredient: Ingredient, irc, g: TypeGraph) -> bool:
    """Type match and OSR, ignoring capacity."""
    return matches(o, ingredient, g) and evaluate(irc.osr, o)


def find_matching_ircs(o: OfferingDescription, registry, g: TypeGraph | None = None) -> list[tuple[str, str]]:
    """(RRC id, IRC id) pairs that would admit ``o`` now, in RRC then ingredient order.

    IRCs already at their maximum cardinality and IRCs ``o`` already belongs
    to are skipped.
    """
    g = g if g is not None else registry.graph
    out = []
    recipes: dict[str, object] = {}
    for rrc, irc in registry.iter_ircs():
        if not irc.has_capacity():
            continue
        if o.local_id in irc.member_ids:
            continue
        recipe = recipes.get(rrc.recipe_id)
        if recipe is None:
            recipe = recipes[rrc.recipe_id] = registry.get_recipe(rrc.recipe_id)
        if admissible(o, recipe.ingredient(irc.ingredient_id), irc, g):
            out.append((rrc.id, irc.id))
    return out
