"""Controller scaling benchmark: admission-decision latency against the number of RRCs."""

from __future__ import annotations

import csv
import gc
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .controller import Controller
from .models import OfferingDescription
from .ontology import load_type_graph
from .registry import Registry
from .scenario import shipped

# Seven rule templates over three synthetic properties (room, floor, power).
# ``{n}`` is the instance number, so every instance of a template selects a
# different room.
OSR_TEMPLATES: tuple[str, ...] = (
    'room = "R{n}"',
    "floor >= 2",
    'room = "R{n}" AND floor <= 3',
    'room = "R{n}" OR power < 60',
    '(floor = 2 AND power <= 100) OR room = "R{n}"',
    'power > 10 AND (room = "R{n}" OR floor != 1)',
    'room != "R{n}" AND floor >= 0',
)


def reference_series() -> dict[int, float]:
    """Latencies (ms) reported for the original implementation; hardware bound, for comparison only."""
    with open(shipped("reference-series.csv"), newline="") as f:
        return {int(r["rrcCount"]): float(r["medianMs"]) for r in csv.DictReader(f)}


@dataclass
class BenchmarkSpec:
    rrc_counts: Sequence[int] = tuple(range(7, 701, 7))
    repetitions: int = 20
    templates: Sequence[str] = OSR_TEMPLATES
    output: Optional[Path] = None
    warmup: int = 3
    rounds: int = 1

    def __post_init__(self):
        k = len(self.templates)
        for n in self.rrc_counts:
            if n % k:
                raise ValueError(f"rrcCount {n} is not a multiple of the template-set size {k}")
        if self.repetitions < 1 or self.rounds < 1:
            raise ValueError("repetitions and rounds must be positive")


@dataclass
class BenchmarkRow:
    rrc_count: int
    median_ms: float
    p95_ms: float
    samples_ms: list[float] = field(default_factory=list, repr=False)


def _probe(i: int) -> OfferingDescription:
    return OfferingDescription.from_dict(
        {
            "localId": f"probe-{i}",
            "category": "ex:DimmableLight",
            "endpoints": [{"uri": f"http://probe{i}/input", "endpointType": "HTTP_POST"}],
            "inputData": [{"name": "on_off", "valueType": "xsd:float"}],
            "outputData": [],
            "room": "R3",
            "floor": 2,
            "power": 40,
        }
    )


def build_controller(rrc_count: int, templates: Sequence[str] = OSR_TEMPLATES) -> Controller:
    """Controller holding ``rrc_count`` lighting RRCs, ``rrc_count / 7`` instances of each template."""
    graph = load_type_graph(shipped("lighting.onto").read_text(encoding="utf-8"))
    controller = Controller(Registry(graph))
    controller.put_recipe(json.loads(shipped("lighting-recipe.json").read_text(encoding="utf-8")))
    recipe = controller.registry.get_recipe("lighting")
    for n in range(rrc_count // len(templates)):
        for j, template in enumerate(templates):
            osr = template.format(n=n)
            controller.create_rrc(
                "lighting",
                {ing.id: {"osr": osr} for ing in recipe.ingredients},
                rrc_id=f"rrc-{n}-{j}",
            )
    return controller


def _timed_admission(controller: Controller, i: int) -> float:
    outcome = controller.register_offering(_probe(i))
    controller.deregister_offering(outcome.offering_id, replace=False)
    return outcome.decision_seconds * 1000.0


def _row(rrc_count: int, samples: list[float]) -> BenchmarkRow:
    return BenchmarkRow(rrc_count, statistics.median(samples), float(np.percentile(samples, 95)), samples)


def measure_point(rrc_count: int, repetitions: int, templates=OSR_TEMPLATES, warmup: int = 3) -> BenchmarkRow:
    """Register a fresh probe ``repetitions`` times and time the admission decision.

    The probe is removed after each repetition, so every measurement sees
    the same RRC set.
    """
    return measure_interleaved([rrc_count], repetitions, templates, warmup)[0]


def measure_interleaved(
    rrc_counts: Sequence[int], repetitions: int, templates=OSR_TEMPLATES, warmup: int = 3, rounds: int = 1
) -> list[BenchmarkRow]:
    """Measure several sizes in ``rounds`` sweeps of ``repetitions`` samples each.

    Within a sweep each size gets a warm, uninterrupted block (as in
    :func:`measure_point`); repeating the sweep spreads slow phases of the
    host over every size instead of skewing whichever size was measured at
    the time. Statistics pool all ``rounds * repetitions`` samples.
    """
    controllers = [build_controller(n, templates) for n in rrc_counts]
    samples: list[list[float]] = [[] for _ in rrc_counts]
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        i = 0
        for _ in range(rounds):
            for k, controller in enumerate(controllers):
                for j in range(warmup + repetitions):
                    ms = _timed_admission(controller, i)
                    i += 1
                    if j >= warmup:
                        samples[k].append(ms)
    finally:
        if gc_was_enabled:
            gc.enable()
    return [_row(n, s) for n, s in zip(rrc_counts, samples)]


def run_benchmark(spec: BenchmarkSpec) -> list[BenchmarkRow]:
    if spec.rounds > 1:
        rows = measure_interleaved(spec.rrc_counts, spec.repetitions, spec.templates, spec.warmup, spec.rounds)
    else:
        rows = [measure_point(n, spec.repetitions, spec.templates, spec.warmup) for n in spec.rrc_counts]
    if spec.output is not None:
        write_csv(rows, spec.output)
    return rows


def write_csv(rows: Sequence[BenchmarkRow], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["rrcCount", "medianMs", "p95Ms"])
        for r in rows:
            w.writerow([r.rrc_count, f"{r.median_ms:.6f}", f"{r.p95_ms:.6f}"])


def series(rows: Sequence[BenchmarkRow]) -> dict:
    """Plot-ready columns."""
    return {
        "rrcCount": [r.rrc_count for r in rows],
        "medianMs": [r.median_ms for r in rows],
        "p95Ms": [r.p95_ms for r in rows],
    }


@dataclass
class TrendFit:
    quadratic: np.ndarray  # highest power first
    linear: np.ndarray
    quadratic_residual: float
    linear_residual: float


def fit_trend(x: Sequence[float], y: Sequence[float]) -> TrendFit:
    """Least-squares quadratic and linear fits with their residual norms."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    q = np.polyfit(x, y, 2)
    lin = np.polyfit(x, y, 1)
    return TrendFit(
        q,
        lin,
        float(np.linalg.norm(np.polyval(q, x) - y)),
        float(np.linalg.norm(np.polyval(lin, x) - y)),
    )


def nondecreasing_within(values: Sequence[float], band: float = 0.2) -> bool:
    """Each value is at least ``(1 - band)`` times the running maximum before it."""
    peak = -np.inf
    for v in values:
        if v < (1.0 - band) * peak:
            return False
        peak = max(peak, v)
    return True
