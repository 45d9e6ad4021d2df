"""Choreography controller: admission, activation and interaction-descriptor distribution."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import ConfigurationError, ControllerStopped, NotFoundError
from .matchmaker import admissible, bind_ports, find_matching_ircs
from .models import (
    IngredientRuntimeConfiguration,
    InteractionDescriptor,
    OfferingDescription,
    Recipe,
    RecipeRuntimeConfiguration,
)
from .ontology import TypeGraph
from .osr import OsrExpr, parse_osr
from .registry import Registry

log = logging.getLogger(__name__)


def generate_indes(
    rrc: RecipeRuntimeConfiguration, registry: Registry, g: Optional[TypeGraph] = None
) -> dict[str, InteractionDescriptor]:
    """Build one interaction descriptor per member offering of ``rrc``.

    For each recipe interaction ``A.out -> B.in`` every member of A whose
    binding maps an offering output onto ``A.out`` sends to the first
    endpoint of every member of B whose binding maps an offering input onto
    ``B.in``.
    """
    recipe = registry.get_recipe(rrc.recipe_id)
    outputs: dict[str, dict[str, dict[str, str]]] = {}
    inputs: dict[str, dict[str, set[str]]] = {}
    for irc in rrc.ircs:
        for member in irc.member_ids:
            outputs.setdefault(member, {})
            inputs.setdefault(member, {})

    for it in recipe.interactions:
        src_irc = rrc.irc_for(it.source_ingredient)
        dst_irc = rrc.irc_for(it.target_ingredient)
        for a, a_bind in src_irc.members:
            a_ports = sorted(p for p, ing_p in a_bind.output_map.items() if ing_p == it.source_output)
            if not a_ports:
                continue
            for b, b_bind in dst_irc.members:
                b_ports = sorted(p for p, ing_p in b_bind.input_map.items() if ing_p == it.target_input)
                if not b_ports:
                    continue
                uri = registry.get_offering(b).receive_uri
                if uri is None:
                    raise ConfigurationError(f"offering {b!r} has no endpoint to receive {it.target_input!r}")
                for p_a in a_ports:
                    targets = outputs[a].setdefault(p_a, {})
                    # one target port per endpoint; keep the smallest for determinism
                    if uri not in targets or b_ports[0] < targets[uri]:
                        targets[uri] = b_ports[0]
                inputs[b].setdefault(a, set()).update(b_ports)

    result = {}
    for member in outputs:
        outs = {p: dict(sorted(t.items())) for p, t in sorted(outputs[member].items())}
        ins = {s: sorted(ps) for s, ps in sorted(inputs[member].items())}
        result[member] = InteractionDescriptor(member, rrc.id, outs, ins)
    return result


@dataclass
class RegistrationOutcome:
    offering_id: str
    joined: list[tuple[str, str]] = field(default_factory=list)
    activated_rrcs: list[str] = field(default_factory=list)
    pushed_to: list[str] = field(default_factory=list)
    push_failures: list[tuple[str, str]] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    decision_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "offeringId": self.offering_id,
            "joined": [list(j) for j in self.joined],
            "activatedRrcs": self.activated_rrcs,
            "pushedTo": self.pushed_to,
            "pushFailures": [list(f) for f in self.push_failures],
            "errors": self.errors,
        }


@dataclass
class RemovalOutcome:
    offering_id: str
    left: list[tuple[str, str]] = field(default_factory=list)
    deactivated_rrcs: list[str] = field(default_factory=list)
    replacements: list[tuple[str, str]] = field(default_factory=list)
    pushed_to: list[str] = field(default_factory=list)
    push_failures: list[tuple[str, str]] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "offeringId": self.offering_id,
            "left": [list(x) for x in self.left],
            "deactivatedRrcs": self.deactivated_rrcs,
            "replacements": [list(r) for r in self.replacements],
            "pushedTo": self.pushed_to,
            "pushFailures": [list(f) for f in self.push_failures],
            "errors": self.errors,
        }


@dataclass
class ChangeReport:
    """Result of seeding an RRC or replacing an IRC's selection rule."""

    joined: list[tuple[str, str]] = field(default_factory=list)
    evicted: list[tuple[str, str]] = field(default_factory=list)
    activated_rrcs: list[str] = field(default_factory=list)
    deactivated_rrcs: list[str] = field(default_factory=list)
    pushed_to: list[str] = field(default_factory=list)
    push_failures: list[tuple[str, str]] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "joined": [list(x) for x in self.joined],
            "evicted": [list(x) for x in self.evicted],
            "activatedRrcs": self.activated_rrcs,
            "deactivatedRrcs": self.deactivated_rrcs,
            "pushedTo": self.pushed_to,
            "pushFailures": [list(f) for f in self.push_failures],
            "errors": self.errors,
        }


class NullPusher:
    def push_many(self, pushes):
        return []


class CallbackPusher:
    """Deliver descriptors by calling ``fn(offering, descriptor)`` in order."""

    def __init__(self, fn):
        self.fn = fn

    def push_many(self, pushes):
        failures = []
        for od, ind in pushes:
            try:
                self.fn(od, ind)
            except Exception as exc:  # surfaced in the outcome, never rolls back state
                log.warning("push to %s failed: %s", od.local_id, exc)
                failures.append((od.local_id, str(exc)))
        return failures


class Controller:
    """Serializes every mutating event and keeps engines' wiring current.

    Each event commits its state change first, then pushes changed
    interaction descriptors. Failed pushes are reported, not rolled back.
    """

    def __init__(self, registry: Optional[Registry] = None, pusher=None, snapshot_path=None):
        self.registry = registry if registry is not None else Registry()
        self.pusher = pusher if pusher is not None else NullPusher()
        self.snapshot_path = snapshot_path
        self._lock = threading.RLock()
        self._stopped = False
        # last descriptor sent to each (offering, rrc)
        self._pushed: dict[tuple[str, str], InteractionDescriptor] = {}

    @property
    def graph(self) -> TypeGraph:
        return self.registry.graph

    def stop(self) -> None:
        self._stopped = True

    @property
    def stopped(self) -> bool:
        return self._stopped

    def _check_running(self) -> None:
        if self._stopped:
            raise ControllerStopped("controller is stopped")

    # -- membership helpers --------------------------------------------------

    def _recipe(self, rrc: RecipeRuntimeConfiguration) -> Recipe:
        return self.registry.get_recipe(rrc.recipe_id)

    def _admit(self, rrc, irc: IngredientRuntimeConfiguration, od: OfferingDescription) -> None:
        binding = bind_ports(od, self._recipe(rrc).ingredient(irc.ingredient_id), self.graph)
        irc.members.append((od.local_id, binding))
        order = {o.local_id: o.registered_at for o in self.registry.offerings()}
        irc.members.sort(key=lambda m: order.get(m[0], 0))

    def _recompute_irc(self, rrc, irc) -> tuple[list[str], list[str]]:
        """Rebuild membership as the first admissible offerings in registration order."""
        ingredient = self._recipe(rrc).ingredient(irc.ingredient_id)
        before = irc.member_ids
        members = []
        for od in self.registry.offerings():
            if irc.max_cardinality is not None and len(members) >= irc.max_cardinality:
                break
            if admissible(od, ingredient, irc, self.graph):
                members.append((od.local_id, bind_ports(od, ingredient, self.graph)))
        irc.members = members
        after = irc.member_ids
        return [m for m in after if m not in before], [m for m in before if m not in after]

    def _fill_vacancy(self, rrc, irc) -> Optional[str]:
        if not irc.has_capacity():
            return None
        ingredient = self._recipe(rrc).ingredient(irc.ingredient_id)
        current = set(irc.member_ids)
        for od in self.registry.offerings():
            if od.local_id not in current and admissible(od, ingredient, irc, self.graph):
                self._admit(rrc, irc, od)
                return od.local_id
        return None

    # -- descriptor distribution -----------------------------------------------

    def _refresh(self, rrc_ids, report) -> tuple[list[str], list[str]]:
        """Recompute activation and descriptors; push what changed.

        Returns (activated, deactivated) RRC ids.
        """
        activated, deactivated = [], []
        plan: list[tuple[OfferingDescription, InteractionDescriptor]] = []
        seen = set()
        for rrc_id in rrc_ids:
            if rrc_id in seen:
                continue
            seen.add(rrc_id)
            rrc = self.registry.get_rrc(rrc_id)
            was = rrc.active
            now = rrc.recompute_active()
            if now and not was:
                activated.append(rrc_id)
            if was and not now:
                deactivated.append(rrc_id)
            members = []
            for irc in rrc.ircs:
                for m in irc.member_ids:
                    if m not in members:
                        members.append(m)
            desired: dict[str, InteractionDescriptor] = {}
            if now:
                try:
                    desired = generate_indes(rrc, self.registry, self.graph)
                except ConfigurationError as exc:
                    log.error("%s", exc)
                    report.errors.append(str(exc))
                    continue
            for m in members:
                key = (m, rrc_id)
                last = self._pushed.get(key)
                if now:
                    d = desired[m]
                    if last is None or last != d:
                        plan.append((self.registry.get_offering(m), d))
                        self._pushed[key] = d
                elif last is not None and not last.empty:
                    d = InteractionDescriptor(m, rrc_id)
                    plan.append((self.registry.get_offering(m), d))
                    self._pushed[key] = d
            # offerings that left this RRC but are still alive get a tear-down
            for key in [k for k in self._pushed if k[1] == rrc_id and k[0] not in members]:
                last = self._pushed.pop(key)
                if self.registry.has_offering(key[0]) and not last.empty:
                    plan.append((self.registry.get_offering(key[0]), InteractionDescriptor(key[0], rrc_id)))

        if plan:
            report.push_failures.extend(self.pusher.push_many(plan))
            for od, _ in plan:
                if od.local_id not in report.pushed_to:
                    report.pushed_to.append(od.local_id)
        return activated, deactivated

    def _persist(self) -> None:
        if self.snapshot_path:
            from pathlib import Path

            Path(self.snapshot_path).write_text(self.registry.dumps(), encoding="utf-8")

    # -- events ------------------------------------------------------------------

    def put_recipe(self, recipe: Union[Recipe, dict]) -> Recipe:
        with self._lock:
            self._check_running()
            r = self.registry.put_recipe(recipe)
            self._persist()
            return r

    def create_rrc(self, recipe_id: str, ingredients=None, rrc_id=None) -> RecipeRuntimeConfiguration:
        """Instantiate a recipe; populate it right away when no ingredient has a minimum."""
        with self._lock:
            self._check_running()
            rrc = self.registry.create_rrc(recipe_id, ingredients, rrc_id)
            if all(irc.min_cardinality == 0 for irc in rrc.ircs):
                rrc.active = False  # let the seed report the activation
                self.seed_rrc(rrc.id)
            self._persist()
            return rrc

    def register_offering(self, od: Union[OfferingDescription, dict]) -> RegistrationOutcome:
        with self._lock:
            self._check_running()
            t0 = time.perf_counter()
            stored = self.registry.put_offering(od)
            candidates = find_matching_ircs(stored, self.registry, self.graph)
            decision = time.perf_counter() - t0
            outcome = RegistrationOutcome(stored.local_id, decision_seconds=decision)
            for rrc_id, irc_id_ in candidates:
                rrc, irc = self.registry.get_irc(irc_id_)
                self._admit(rrc, irc, stored)
                outcome.joined.append((rrc_id, irc_id_))
            activated, _ = self._refresh([r for r, _ in outcome.joined], outcome)
            outcome.activated_rrcs = activated
            self._persist()
            return outcome

    def deregister_offering(self, offering_id: str, replace: bool = False) -> RemovalOutcome:
        with self._lock:
            self._check_running()
            self.registry.remove_offering(offering_id)
            outcome = RemovalOutcome(offering_id)
            vacated = []
            for rrc, irc in self.registry.iter_ircs():
                if offering_id in irc.member_ids:
                    irc.members = [m for m in irc.members if m[0] != offering_id]
                    outcome.left.append((rrc.id, irc.id))
                    vacated.append((rrc, irc))
            if replace:
                for rrc, irc in vacated:
                    repl = self._fill_vacancy(rrc, irc)
                    if repl is not None:
                        outcome.replacements.append((irc.id, repl))
            for key in [k for k in self._pushed if k[0] == offering_id]:
                del self._pushed[key]
            _, deactivated = self._refresh([rrc.id for rrc, _ in vacated], outcome)
            outcome.deactivated_rrcs = deactivated
            self._persist()
            return outcome

    def seed_rrc(self, rrc_id: str) -> ChangeReport:
        """Populate every IRC of an RRC from the offerings already known."""
        with self._lock:
            self._check_running()
            rrc = self.registry.get_rrc(rrc_id)
            report = ChangeReport()
            for irc in rrc.ircs:
                joined, evicted = self._recompute_irc(rrc, irc)
                report.joined += [(irc.id, m) for m in joined]
                report.evicted += [(irc.id, m) for m in evicted]
            report.activated_rrcs, report.deactivated_rrcs = self._refresh([rrc_id], report)
            self._persist()
            return report

    def replace_osr(self, irc_id_: str, new_osr: Union[OsrExpr, str]) -> ChangeReport:
        """Swap an IRC's selection rule and re-derive its members from the pool."""
        if isinstance(new_osr, str):
            new_osr = parse_osr(new_osr)
        with self._lock:
            self._check_running()
            rrc, irc = self.registry.get_irc(irc_id_)
            irc.osr = new_osr
            report = ChangeReport()
            joined, evicted = self._recompute_irc(rrc, irc)
            report.joined = [(irc.id, m) for m in joined]
            report.evicted = [(irc.id, m) for m in evicted]
            report.activated_rrcs, report.deactivated_rrcs = self._refresh([rrc.id], report)
            self._persist()
            return report

    # -- queries -------------------------------------------------------------------

    def indes_for(self, offering_id: str) -> list[InteractionDescriptor]:
        if not self.registry.has_offering(offering_id):
            raise NotFoundError(f"unknown offering {offering_id!r}")
        with self._lock:
            return [d for (o, _), d in self._pushed.items() if o == offering_id]

    def resync(self) -> None:
        """Forget what was pushed; the next refresh re-sends every descriptor."""
        with self._lock:
            self._pushed.clear()
