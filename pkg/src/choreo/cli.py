"""Command line interface.

Exit status: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path
from typing import Any, Optional

from .errors import ChoreoError, TransportError

log = logging.getLogger("choreo")


def _hostport(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def _json_arg(text: str) -> Any:
    try:
        return json.loads(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not valid JSON: {exc}") from exc


# -- admin client --------------------------------------------------------------


class _HttpAdmin:
    def __init__(self, url: str):
        self.url = url.rstrip("/")

    def _call(self, method, path, payload=None, ok=(200, 201)):
        from .transport import http_json

        status, body = http_json(method, self.url + path, payload)
        if status not in ok:
            msg = body.get("error") if isinstance(body, dict) else body
            raise ChoreoError(f"HTTP {status}: {msg}")
        return body

    def add_recipe(self, doc):
        return self._call("POST", "/recipes", doc)

    def create_rrc(self, body):
        return self._call("POST", "/rrcs", body)

    def seed(self, rrc_id):
        return self._call("POST", f"/rrcs/{rrc_id}/seed")

    def set_osr(self, irc_id, osr):
        return self._call("PUT", f"/ircs/{irc_id}/osr", {"osr": osr})

    def dump(self):
        return self._call("GET", "/snapshot")


class _LocalAdmin:
    """Apply admin commands directly to a snapshot file."""

    def __init__(self, snapshot: Path, ontology: Optional[Path]):
        from .controller import Controller
        from .ontology import TypeGraph, load_type_graph_file
        from .registry import Registry

        graph = load_type_graph_file(ontology) if ontology else TypeGraph()
        registry = Registry(graph)
        if snapshot.exists():
            registry.restore(snapshot.read_text(encoding="utf-8"))
        self.controller = Controller(registry, snapshot_path=snapshot)

    def add_recipe(self, doc):
        return self.controller.put_recipe(doc).to_dict()

    def create_rrc(self, body):
        return self.controller.create_rrc(body["recipeId"], body.get("ingredients"), body.get("id")).to_dict()

    def seed(self, rrc_id):
        return self.controller.seed_rrc(rrc_id).to_dict()

    def set_osr(self, irc_id, osr):
        return self.controller.replace_osr(irc_id, osr).to_dict()

    def dump(self):
        return self.controller.registry.snapshot()


def _admin(args):
    if args.controller:
        return _HttpAdmin(args.controller)
    if args.snapshot:
        return _LocalAdmin(Path(args.snapshot), Path(args.ontology) if args.ontology else None)
    args.parser.error("one of --controller or --snapshot is required")


def _print(obj) -> None:
    print(json.dumps(obj, indent=2), flush=True)


# -- commands ---------------------------------------------------------------------


def cmd_controller_serve(args) -> int:
    from .controller import Controller
    from .ontology import TypeGraph, load_type_graph_file
    from .registry import Registry
    from .server import server_url, start_controller_server
    from .transport import HttpPusher

    graph = load_type_graph_file(args.ontology) if args.ontology else TypeGraph()
    registry = Registry(graph)
    if args.snapshot and Path(args.snapshot).exists():
        registry.restore(Path(args.snapshot).read_text(encoding="utf-8"))
    controller = Controller(registry, HttpPusher(), snapshot_path=args.snapshot)
    host, port = args.listen
    server = start_controller_server(controller, host, port)
    print(f"controller listening on {server_url(server)}", flush=True)
    _wait_forever()
    return 0


def cmd_engine_run(args) -> int:
    from .engine import Engine, RemoteCall
    from .handlers import make_handler
    from .models import OfferingDescription
    from .server import bind_engine_server, register_engine, server_url, start_engine_server
    from .transport import HttpTransport

    od_doc = json.loads(Path(args.offering).read_text(encoding="utf-8"))
    host, port = args.listen
    server = bind_engine_server(host, port)
    url = server_url(server)
    if not od_doc.get("endpoints"):
        od_doc["endpoints"] = [{"uri": url + "/inputs", "endpointType": "HTTP_POST"}]
    od = OfferingDescription.from_dict(od_doc)
    impl = RemoteCall() if args.handler == "remote" else make_handler(args.handler, **(args.handler_args or {}))
    engine = Engine(od, impl, HttpTransport())
    start_engine_server(server, engine)
    print(f"engine {od.local_id} listening on {url}", flush=True)
    if args.controller:
        _print(register_engine(engine, args.controller))
    _wait_forever()
    return 0


def _wait_forever() -> None:
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        stop.wait()
    except KeyboardInterrupt:
        pass


def cmd_recipe_add(args) -> int:
    doc = json.loads(Path(args.file).read_text(encoding="utf-8"))
    _print(_admin(args).add_recipe(doc))
    return 0


def _rrc_body(args) -> dict:
    body = json.loads(Path(args.file).read_text(encoding="utf-8")) if args.file else {}
    if args.recipe:
        body["recipeId"] = args.recipe
    if args.id:
        body["id"] = args.id
    if "recipeId" not in body:
        args.parser.error("--recipe is required (or a --file containing recipeId)")
    ingredients = body.setdefault("ingredients", {})
    for item in args.set or []:
        key, sep, value = item.partition("=")
        ing, dot, fld = key.partition(".")
        if not sep or not dot or fld not in ("osr", "min", "max"):
            args.parser.error(f"--set expects ING.(osr|min|max)=VALUE, got {item!r}")
        if fld == "osr":
            ingredients.setdefault(ing, {})[fld] = value
        else:
            try:
                ingredients.setdefault(ing, {})[fld] = None if value in ("", "unbounded") else int(value)
            except ValueError:
                args.parser.error(f"--set {key}: expected an integer, got {value!r}")
    return body


def cmd_rrc_create(args) -> int:
    _print(_admin(args).create_rrc(_rrc_body(args)))
    return 0


def cmd_rrc_seed(args) -> int:
    _print(_admin(args).seed(args.rrc_id))
    return 0


def cmd_osr_set(args) -> int:
    from .osr import parse_osr

    parse_osr(args.osr)  # fail fast with a position
    _print(_admin(args).set_osr(args.irc_id, args.osr))
    return 0


def cmd_registry_dump(args) -> int:
    _print(_admin(args).dump())
    return 0


def cmd_scenario_run(args) -> int:
    from .scenario import run_scenario, shipped

    path = Path(args.file)
    if not path.exists() and (shipped(args.file)).exists():
        path = shipped(args.file)
    transcript = run_scenario(path)
    if args.transcript:
        Path(args.transcript).write_text(json.dumps(transcript.to_dict(), indent=2), encoding="utf-8")
    for f in transcript.failures:
        print(f"FAIL step {f['step']}: expected {f.get('expected')} actual {f.get('actual', f.get('error'))}")
    n_assert = sum(1 for e in transcript.entries if e["kind"] == "assert")
    print(f"{path.name}: {n_assert} assertions, {len(transcript.failures)} failures, "
          f"{len(transcript.deliveries())} deliveries")
    return 0 if transcript.ok else 1


def cmd_bench_run(args) -> int:
    from .bench import BenchmarkSpec, run_benchmark, series

    counts = list(range(args.step, args.rrcs + 1, args.step))
    if args.counts:
        counts = args.counts
    spec = BenchmarkSpec(counts, args.reps, output=Path(args.out) if args.out else None, rounds=args.rounds)
    rows = run_benchmark(spec)
    print("rrcCount,medianMs,p95Ms")
    for r in rows:
        print(f"{r.rrc_count},{r.median_ms:.4f},{r.p95_ms:.4f}")
    if args.series:
        Path(args.series).write_text(json.dumps(series(rows)), encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="choreo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="group", required=True)

    def admin_flags(sp):
        sp.add_argument("--controller", help="controller base URL")
        sp.add_argument("--snapshot", help="operate on a snapshot file instead of a running controller")
        sp.add_argument("--ontology", help="ontology file (with --snapshot)")

    ctl = sub.add_parser("controller").add_subparsers(dest="cmd", required=True)
    sp = ctl.add_parser("serve")
    sp.add_argument("--listen", type=_hostport, default=("127.0.0.1", 8080))
    sp.add_argument("--snapshot")
    sp.add_argument("--ontology")
    sp.set_defaults(func=cmd_controller_serve)

    eng = sub.add_parser("engine").add_subparsers(dest="cmd", required=True)
    sp = eng.add_parser("run")
    sp.add_argument("--offering", required=True)
    sp.add_argument("--controller")
    sp.add_argument("--listen", type=_hostport, default=("127.0.0.1", 0))
    sp.add_argument("--handler", help="local handler name, 'sink', or 'remote'")
    sp.add_argument("--handler-args", type=_json_arg)
    sp.set_defaults(func=cmd_engine_run)

    rec = sub.add_parser("recipe").add_subparsers(dest="cmd", required=True)
    sp = rec.add_parser("add")
    sp.add_argument("file")
    admin_flags(sp)
    sp.set_defaults(func=cmd_recipe_add)

    rrc = sub.add_parser("rrc").add_subparsers(dest="cmd", required=True)
    sp = rrc.add_parser("create")
    sp.add_argument("--recipe")
    sp.add_argument("--id")
    sp.add_argument("--file", help="JSON body {recipeId, ingredients}")
    sp.add_argument("--set", action="append", metavar="ING.FIELD=VALUE")
    admin_flags(sp)
    sp.set_defaults(func=cmd_rrc_create)
    sp = rrc.add_parser("seed")
    sp.add_argument("rrc_id")
    admin_flags(sp)
    sp.set_defaults(func=cmd_rrc_seed)

    osr = sub.add_parser("osr").add_subparsers(dest="cmd", required=True)
    sp = osr.add_parser("set")
    sp.add_argument("irc_id")
    sp.add_argument("osr")
    admin_flags(sp)
    sp.set_defaults(func=cmd_osr_set)

    sc = sub.add_parser("scenario").add_subparsers(dest="cmd", required=True)
    sp = sc.add_parser("run")
    sp.add_argument("file")
    sp.add_argument("--transcript")
    sp.set_defaults(func=cmd_scenario_run)

    bn = sub.add_parser("bench").add_subparsers(dest="cmd", required=True)
    sp = bn.add_parser("run")
    sp.add_argument("--rrcs", type=int, default=700)
    sp.add_argument("--step", type=int, default=7)
    sp.add_argument("--reps", type=int, default=20)
    sp.add_argument("--rounds", type=int, default=1, help="repeat the sweep, pooling samples per size")
    sp.add_argument("--counts", type=int, nargs="+", help="explicit RRC counts instead of --rrcs/--step")
    sp.add_argument("--out")
    sp.add_argument("--series", help="write plot-ready JSON columns here")
    sp.set_defaults(func=cmd_bench_run)

    reg = sub.add_parser("registry").add_subparsers(dest="cmd", required=True)
    sp = reg.add_parser("dump")
    admin_flags(sp)
    sp.set_defaults(func=cmd_registry_dump)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.parser = parser
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ChoreoError, ValueError, OSError) as exc:
        if isinstance(exc, TransportError):
            print(f"error: cannot reach peer: {exc}", file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
