"""In-memory store for offerings, recipes and runtime configurations."""

from __future__ import annotations

import copy
import json
import threading
from typing import Callable, Iterable, Optional, Union

from .errors import DuplicateError, NotFoundError, SnapshotError, ValidationError
from .models import (
    IngredientRuntimeConfiguration,
    OfferingDescription,
    Recipe,
    RecipeRuntimeConfiguration,
)
from .ontology import TypeGraph
from .osr import TRUE, OsrExpr, evaluate, parse_osr

FORMAT_VERSION = 1

Predicate = Union[OsrExpr, Callable[[OfferingDescription], bool], None]


def irc_id(rrc_id: str, ingredient_id: str) -> str:
    return f"{rrc_id}:{ingredient_id}"


class Registry:
    """Holds every persistent description and the relations between them.

    Offerings are kept in registration order, so iteration order is
    ``registered_at`` order. Mutations are expected to come from a single
    writer (the controller); ``lock`` lets readers take a consistent view.
    """

    def __init__(self, graph: Optional[TypeGraph] = None):
        self.graph = graph or TypeGraph()
        self.lock = threading.RLock()
        self._offerings: dict[str, OfferingDescription] = {}
        self._recipes: dict[str, Recipe] = {}
        self._rrcs: dict[str, RecipeRuntimeConfiguration] = {}
        self._ircs: dict[str, tuple[RecipeRuntimeConfiguration, IngredientRuntimeConfiguration]] = {}
        self._seq = 0
        self._rrc_seq = 0

    # -- offerings ---------------------------------------------------------

    def put_offering(self, od: Union[OfferingDescription, dict]) -> OfferingDescription:
        if isinstance(od, dict):
            od = OfferingDescription.from_dict(od)
        else:
            od = copy.deepcopy(od)
            od.validate()
        with self.lock:
            if od.local_id in self._offerings:
                raise DuplicateError(f"offering {od.local_id!r} already registered")
            self._seq += 1
            od.registered_at = self._seq
            self._offerings[od.local_id] = od
            return od

    def remove_offering(self, local_id: str) -> OfferingDescription:
        with self.lock:
            try:
                return self._offerings.pop(local_id)
            except KeyError:
                raise NotFoundError(f"unknown offering {local_id!r}") from None

    def get_offering(self, local_id: str) -> OfferingDescription:
        try:
            return self._offerings[local_id]
        except KeyError:
            raise NotFoundError(f"unknown offering {local_id!r}") from None

    def has_offering(self, local_id: str) -> bool:
        return local_id in self._offerings

    def offerings(self) -> list[OfferingDescription]:
        return list(self._offerings.values())

    def query_offerings(self, predicate: Predicate = None, category: Optional[str] = None) -> list[OfferingDescription]:
        """Stored offerings satisfying ``predicate`` (an OSR or a callable), by registration order.

        ``category`` additionally restricts to offerings whose category is a
        subclass of it.
        """
        if isinstance(predicate, str):
            predicate = parse_osr(predicate)
        with self.lock:
            pool = list(self._offerings.values())
        out = []
        for od in pool:
            if category is not None and not self.graph.is_subclass_of(od.category, category):
                continue
            if predicate is None:
                ok = True
            elif callable(predicate):
                ok = predicate(od)
            else:
                ok = evaluate(predicate, od)
            if ok:
                out.append(od)
        return out

    # -- recipes -----------------------------------------------------------

    def put_recipe(self, recipe: Union[Recipe, dict]) -> Recipe:
        if isinstance(recipe, dict):
            recipe = Recipe.from_dict(recipe)
        recipe.check_types(self.graph)
        with self.lock:
            if recipe.id in self._recipes:
                raise DuplicateError(f"recipe {recipe.id!r} already stored")
            self._recipes[recipe.id] = recipe
        return recipe

    def get_recipe(self, recipe_id: str) -> Recipe:
        try:
            return self._recipes[recipe_id]
        except KeyError:
            raise NotFoundError(f"unknown recipe {recipe_id!r}") from None

    def recipes(self) -> list[Recipe]:
        return list(self._recipes.values())

    # -- runtime configurations ---------------------------------------------

    def create_rrc(
        self,
        recipe_id: str,
        ingredients: Optional[dict[str, dict]] = None,
        rrc_id: Optional[str] = None,
    ) -> RecipeRuntimeConfiguration:
        """Instantiate a recipe.

        ``ingredients`` maps ingredient id to ``{"osr", "min", "max"}``; the
        OSR may be given as text or as an expression. Missing entries mean
        no constraint, min 0 and unbounded max.
        """
        recipe = self.get_recipe(recipe_id)
        ingredients = dict(ingredients or {})
        unknown = set(ingredients) - {i.id for i in recipe.ingredients}
        if unknown:
            raise ValidationError("ingredients", f"not in recipe {recipe_id}: {sorted(unknown)}")
        with self.lock:
            if rrc_id is None:
                while True:
                    self._rrc_seq += 1
                    rrc_id = f"rrc{self._rrc_seq}"
                    if rrc_id not in self._rrcs:
                        break
            elif rrc_id in self._rrcs:
                raise DuplicateError(f"RRC {rrc_id!r} already exists")
            ircs = []
            for ing in recipe.ingredients:
                spec = ingredients.get(ing.id) or {}
                osr = spec.get("osr", TRUE)
                if isinstance(osr, str):
                    osr = parse_osr(osr)
                ircs.append(
                    IngredientRuntimeConfiguration(
                        irc_id(rrc_id, ing.id),
                        ing.id,
                        osr,
                        spec.get("min", 0) or 0,
                        spec.get("max"),
                    )
                )
            rrc = RecipeRuntimeConfiguration(rrc_id, recipe_id, ircs)
            rrc.recompute_active()
            self._rrcs[rrc_id] = rrc
            for irc in ircs:
                self._ircs[irc.id] = (rrc, irc)
            return rrc

    def get_rrc(self, rrc_id: str) -> RecipeRuntimeConfiguration:
        try:
            return self._rrcs[rrc_id]
        except KeyError:
            raise NotFoundError(f"unknown RRC {rrc_id!r}") from None

    def rrcs(self) -> list[RecipeRuntimeConfiguration]:
        return list(self._rrcs.values())

    def get_irc(self, irc_id_: str) -> tuple[RecipeRuntimeConfiguration, IngredientRuntimeConfiguration]:
        try:
            return self._ircs[irc_id_]
        except KeyError:
            raise NotFoundError(f"unknown IRC {irc_id_!r}") from None

    def iter_ircs(self) -> Iterable[tuple[RecipeRuntimeConfiguration, IngredientRuntimeConfiguration]]:
        """All IRCs in RRC creation order, then ingredient order."""
        for rrc in self._rrcs.values():
            for irc in rrc.ircs:
                yield rrc, irc

    # -- persistence -------------------------------------------------------

    def snapshot(self) -> dict:
        with self.lock:
            return {
                "formatVersion": FORMAT_VERSION,
                "sequence": self._seq,
                "rrcSequence": self._rrc_seq,
                "offerings": [od.to_record() for od in self._offerings.values()],
                "recipes": [r.to_dict() for r in self._recipes.values()],
                "rrcs": [r.to_dict() for r in self._rrcs.values()],
            }

    def dumps(self) -> str:
        return json.dumps(self.snapshot(), indent=2)

    def restore(self, document: Union[dict, str]) -> None:
        """Replace the whole state with a snapshot document."""
        try:
            if isinstance(document, str):
                document = json.loads(document)
            if not isinstance(document, dict):
                raise SnapshotError("snapshot must be a JSON object")
            version = document.get("formatVersion")
            if version != FORMAT_VERSION:
                raise SnapshotError(f"unsupported formatVersion {version!r}")
            offerings = [OfferingDescription.from_record(d) for d in document.get("offerings", [])]
            recipes = [Recipe.from_dict(d) for d in document.get("recipes", [])]
            rrcs = [RecipeRuntimeConfiguration.from_dict(d) for d in document.get("rrcs", [])]
            seq = int(document.get("sequence", 0))
            rrc_seq = int(document.get("rrcSequence", 0))
        except SnapshotError:
            raise
        except (ValueError, KeyError, TypeError, AttributeError, ValidationError) as exc:
            raise SnapshotError(f"malformed snapshot: {exc}") from exc
        with self.lock:
            offerings.sort(key=lambda od: od.registered_at or 0)
            self._offerings = {od.local_id: od for od in offerings}
            self._recipes = {r.id: r for r in recipes}
            self._rrcs = {r.id: r for r in rrcs}
            self._ircs = {irc.id: (rrc, irc) for rrc in rrcs for irc in rrc.ircs}
            self._seq = max([seq] + [od.registered_at or 0 for od in offerings])
            self._rrc_seq = rrc_seq

    @classmethod
    def from_snapshot(cls, document: Union[dict, str], graph: Optional[TypeGraph] = None) -> "Registry":
        reg = cls(graph)
        reg.restore(document)
        return reg

    def __eq__(self, other) -> bool:
        if not isinstance(other, Registry):
            return NotImplemented
        return self.snapshot() == other.snapshot()
