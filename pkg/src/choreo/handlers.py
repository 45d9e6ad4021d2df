"""Named local handlers that scenario files attach to devices."""

from __future__ import annotations

from typing import Any, Callable

from .engine import InputView, LocalHandler

_FACTORIES: dict[str, Callable[..., LocalHandler]] = {}


def handler(name: str):
    def register(factory):
        _FACTORIES[name] = factory
        return factory

    return register


def make_handler(name: str | None, **args: Any) -> LocalHandler | None:
    if name is None or name == "sink":
        return None
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise KeyError(f"unknown handler {name!r}; known: {sorted(_FACTORIES)}") from None
    return factory(**args)


def available() -> list[str]:
    return sorted(_FACTORIES) + ["sink"]


@handler("any-motion-and-any-switch")
def any_motion_and_any_switch(motion="sensorin", switch="switchin", output="brightness", value=1.0):
    """Emit ``value`` when motion is reported while at least one switch is on."""

    def fire(view: InputView):
        if view.trigger != motion or not view.latest.get(motion):
            return None
        switches = view.by_source.get(switch, {})
        if any(bool(v) for v in switches.values()):
            return {output: value}
        return None

    return fire


@handler("average")
def average(output="out"):
    """Mean of the latest value from every source across all inputs."""

    def fire(view: InputView):
        vals = [v for srcs in view.by_source.values() for v in srcs.values() if isinstance(v, (int, float))]
        if not vals:
            return None
        return {output: sum(vals) / len(vals)}

    return fire


@handler("passthrough")
def passthrough(mapping=None):
    """Copy the triggering input to the output named in ``mapping`` (default: same name)."""
    mapping = dict(mapping or {})

    def fire(view: InputView):
        out = mapping.get(view.trigger, view.trigger)
        return {out: view.latest[view.trigger]}

    return fire
