"""Command-line front end. Each invocation loads the domain file, operates, and saves atomically."""

from __future__ import annotations

import argparse
import contextlib
import fcntl
import os
import socket
import sys
import tempfile
import threading
import time
from pathlib import Path
from typing import Iterator, Sequence

from . import gc, interchange, micromodel, revision, structure, sync
from .core import (
    DocumentId,
    Payload,
    constant_id,
    constant_table,
    parse_id,
    render_id,
)
from .errors import GilError, MalformedId
from .store import Domain

DEFAULT_DOMAIN = "domain.gilt"
EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- persistence ----------------------------------------------------------


def load(path: Path) -> Domain:
    if not path.exists():
        raise GilError(f"no domain at {path}; run 'gil init' first")
    domain = interchange.import_canonical(path.read_bytes())
    domain.source = path.stem.replace(" ", "_") or "-"
    return domain


def save(domain: Domain, path: Path) -> None:
    """Write the canonical export next to ``path`` and rename it into place."""
    data = interchange.export_canonical(domain)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


@contextlib.contextmanager
def locked(path: Path) -> Iterator[None]:
    """Exclusive writer lock on ``<path>.lock``; blocks until available."""
    lock_path = path.with_name(path.name + ".lock")
    with open(lock_path, "a") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


# -- argument helpers -----------------------------------------------------


def doc_arg(text: str) -> DocumentId:
    """A rendered id, or ``@Label`` for a bootstrap constant."""
    if text.startswith("@") and len(text) > 1:
        return constant_id(text[1:])
    try:
        return parse_id(text)
    except MalformedId as exc:
        raise UsageError(str(exc)) from None


def payload_arg(kind: str, value: str | None) -> Payload:
    kind = kind.lower()
    try:
        if kind in ("empty", "e"):
            if value:
                raise ValueError("empty documents take no value")
            return Payload.empty()
        if value is None:
            raise ValueError(f"{kind} needs a value")
        if kind in ("integer", "int", "i"):
            return Payload.integer(int(value))
        if kind in ("real", "r"):
            return Payload.real(value)
        if kind in ("complex", "c"):
            re_part, _, im_part = value.partition(",")
            return Payload.complex(re_part, im_part)
        if kind in ("text", "t"):
            return Payload.text(value)
        if kind in ("blob", "b"):
            return Payload.blob(bytes.fromhex(value))
    except ValueError as exc:
        raise UsageError(f"bad {kind} value: {exc}") from None
    raise UsageError(f"unknown payload kind {kind!r}")


def actor_for(domain: Domain, name: str) -> DocumentId:
    rec = domain.find_actor(name)
    if rec is None:
        rec = domain.register_actor({"name": name})
    return rec.actor_id


def describe(domain: Domain, d: DocumentId) -> str:
    p = domain.documents.get(d)
    if p is None:
        return f"{render_id(d)} ?"
    label = domain.labels.get(d)
    text = f"{render_id(d)} {p.kind.value}"
    if p.display():
        text += f" {p.display()}"
    if label:
        text += f" @{label}"
    return text


# -- commands -------------------------------------------------------------


def cmd_init(args, path: Path) -> int:
    if path.exists() and not args.force:
        raise GilError(f"{path} already exists (use --force to overwrite)")
    save(Domain.bootstrapped(), path)
    print(f"initialized {path}")
    return EXIT_OK


def cmd_add(args, domain: Domain) -> int:
    print(render_id(domain.create(payload_arg(args.kind, args.value))))
    return EXIT_OK


def cmd_put(args, domain: Domain) -> int:
    structure.dict_put(domain, doc_arg(args.owner), doc_arg(args.key), doc_arg(args.value))
    return EXIT_OK


def cmd_append(args, domain: Domain) -> int:
    print(structure.list_append(domain, doc_arg(args.owner), doc_arg(args.value)))
    return EXIT_OK


def cmd_sadd(args, domain: Domain) -> int:
    structure.set_add(domain, doc_arg(args.owner), doc_arg(args.member))
    return EXIT_OK


def cmd_relate(args, domain: Domain) -> int:
    handle = structure.assert_relation(domain, doc_arg(args.marker), [doc_arg(a) for a in args.args])
    print(render_id(handle))
    return EXIT_OK


def cmd_show(args, domain: Domain) -> int:
    d = doc_arg(args.id)
    if d not in domain.documents:
        raise GilError(f"unknown document {render_id(d)}")
    print(describe(domain, d))
    for b in structure.anchors_of(domain, d):
        kind = b.container_kind
        if kind is structure.ContainerKind.DICTIONARY:
            for k, v in sorted(structure.dict_items(domain, d).items()):
                print(f"  dict {render_id(k)} -> {describe(domain, v)}")
        elif kind is structure.ContainerKind.LIST:
            for i, v in enumerate(structure.list_items(domain, d)):
                print(f"  list {i} -> {describe(domain, v)}")
        else:
            for v in structure.set_members(domain, d):
                print(f"  set {describe(domain, v)}")
    return EXIT_OK


def cmd_tree(args, domain: Domain) -> int:
    root = doc_arg(args.id)
    if root not in domain.documents:
        raise GilError(f"unknown document {render_id(root)}")
    seen: set[DocumentId] = set()

    def walk(d: DocumentId, depth: int, via: str) -> None:
        pad = "  " * depth
        if d in seen:
            print(f"{pad}{via}{render_id(d)} (seen)")
            return
        seen.add(d)
        print(f"{pad}{via}{describe(domain, d)}")
        for b in structure.anchors_of(domain, d):
            for t in structure.bindings(domain, b.anchor):
                if b.container_kind is structure.ContainerKind.DICTIONARY:
                    tag = f"[{render_id(t.marker)}] "
                elif b.container_kind is structure.ContainerKind.LIST:
                    tag = "- "
                else:
                    tag = "* "
                walk(t.first, depth + 1, tag)

    walk(root, 0, "")
    sub = structure.reconstruct(domain, root)
    print(f"({len(sub.documents)} documents, {len(sub.triples)} triples)")
    return EXIT_OK


def cmd_curve(args, domain: Domain) -> int:
    for d in revision.world_curve(domain, doc_arg(args.id)):
        print(describe(domain, d))
    return EXIT_OK


def cmd_revise(args, domain: Domain) -> int:
    target = doc_arg(args.target)
    ctx = revision.RevisionContext(actor_for(domain, args.actor), domain.now(), args.place)
    if args.payload:
        result = revision.revise_payload(domain, target, payload_arg(*_kind_value(args.payload)), ctx)
    elif args.key and args.value:
        result = revision.revise_attribute(domain, target, doc_arg(args.key), doc_arg(args.value), ctx)
    else:
        raise UsageError("revise needs --payload KIND [VALUE] or --key K --value V")
    for old, new in sorted(result.mapping.items()):
        print(f"{render_id(old)} -> {render_id(new)}")
    print(f"record {render_id(result.record)}")
    return EXIT_OK


def _kind_value(parts: list[str]) -> tuple[str, str | None]:
    if len(parts) > 2:
        raise UsageError("--payload takes KIND and at most one VALUE")
    return parts[0], parts[1] if len(parts) > 1 else None


def cmd_observe(args, domain: Domain) -> int:
    actor = actor_for(domain, args.actor)
    target = doc_arg(args.id)
    records = gc.observe_curve(domain, actor, target) if args.curve else [gc.observe(domain, actor, target)]
    for rec in records:
        print(f"{render_id(rec.observation_id)} {render_id(rec.target)}")
    return EXIT_OK


def cmd_release(args, domain: Domain) -> int:
    gc.release(domain, doc_arg(args.obs))
    return EXIT_OK


def cmd_gc(args, domain: Domain) -> int:
    print(gc.collect(domain))
    return EXIT_OK


def cmd_validate(args, domain: Domain) -> int:
    checks = list(micromodel.BUILTIN_CHECKS) if args.all else None
    report = micromodel.validate(domain, checks)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_DOMAIN


def cmd_micromodel(args, domain: Domain) -> int:
    model = micromodel.register_micromodel(domain, args.label, args.checks)
    print(render_id(model.model_doc))
    return EXIT_OK


def cmd_export(args, domain: Domain) -> int:
    data = interchange.export_canonical(domain)
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return EXIT_OK


def cmd_import(args, path: Path) -> int:
    domain = interchange.import_canonical(Path(args.file).read_bytes())
    with locked(path):
        save(domain, path)
    print(f"imported {len(domain.documents)} documents, {len(domain.triples)} triples")
    return EXIT_OK


def cmd_merge(args, domain: Domain) -> int:
    other = interchange.import_canonical(Path(args.file).read_bytes())
    other.source = Path(args.file).stem.replace(" ", "_") or "-"
    docs, triples = interchange.absorb(domain, other)
    print(f"merged {docs} new documents, {triples} new triples")
    return EXIT_OK


def cmd_digest(args, domain: Domain) -> int:
    print(interchange.domain_digest(domain).hex())
    return EXIT_OK


def cmd_serve(args, path: Path) -> int:
    endpoint = _endpoint(args.endpoint)
    state = {"domain": load(path), "mtime": path.stat().st_mtime_ns, "checked": time.monotonic()}
    guard = threading.Lock()

    def current() -> Domain:
        with guard:
            if time.monotonic() - state["checked"] >= args.reload:
                state["checked"] = time.monotonic()
                mtime = path.stat().st_mtime_ns
                if mtime != state["mtime"]:
                    state["domain"], state["mtime"] = load(path), mtime
            return state["domain"]

    server = sync.serve(current, endpoint)
    host, port = server.address
    print(f"serving {path} on {host}:{port}", flush=True)
    try:
        server.wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return EXIT_OK


def cmd_pull(args, domain: Domain) -> int:
    print(sync.pull(_endpoint(args.endpoint), domain))
    return EXIT_OK


def cmd_constants(args, _path: Path) -> int:
    for label, cid in constant_table(args.ints).items():
        print(f"{render_id(cid)} {label}")
    return EXIT_OK


def _endpoint(text: str) -> tuple[str, int]:
    try:
        return sync.parse_endpoint(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# (handler, mutates the domain file); None means the handler manages the file itself.
COMMANDS = {
    "init": (cmd_init, None),
    "add": (cmd_add, True),
    "put": (cmd_put, True),
    "append": (cmd_append, True),
    "sadd": (cmd_sadd, True),
    "relate": (cmd_relate, True),
    "show": (cmd_show, False),
    "tree": (cmd_tree, False),
    "curve": (cmd_curve, False),
    "revise": (cmd_revise, True),
    "observe": (cmd_observe, True),
    "release": (cmd_release, True),
    "gc": (cmd_gc, True),
    "validate": (cmd_validate, False),
    "micromodel": (cmd_micromodel, True),
    "export": (cmd_export, False),
    "import": (cmd_import, None),
    "merge": (cmd_merge, True),
    "digest": (cmd_digest, False),
    "serve": (cmd_serve, None),
    "pull": (cmd_pull, True),
    "constants": (cmd_constants, None),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gil", description="Append-only knowledge-graph domain tool.")
    p.add_argument(
        "--domain",
        default=os.environ.get("GIL_DOMAIN", DEFAULT_DOMAIN),
        help="domain file (default: $GIL_DOMAIN or ./domain.gilt)",
    )
    p.add_argument(
        "--actor",
        default=os.environ.get("USER") or "anonymous",
        help="actor name recorded on revisions and observations",
    )
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("init", help="create a domain holding the bootstrap constants")
    s.add_argument("--force", action="store_true")
    s = sub.add_parser("add", help="create a document; prints its id")
    s.add_argument("kind", help="empty|integer|real|complex|text|blob")
    s.add_argument("value", nargs="?")
    s = sub.add_parser("put", help="bind a dictionary key")
    s.add_argument("owner")
    s.add_argument("key")
    s.add_argument("value")
    s = sub.add_parser("append", help="append to a document's list")
    s.add_argument("owner")
    s.add_argument("value")
    s = sub.add_parser("sadd", help="add to a document's set")
    s.add_argument("owner")
    s.add_argument("member")
    s = sub.add_parser("relate", help="assert a marked relation instance")
    s.add_argument("marker")
    s.add_argument("args", nargs="+")
    for name, help_ in (("show", "print a document and its containers"), ("tree", "print the reconstructed document"), ("curve", "print the world curve")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("id")
    s = sub.add_parser("revise", help="revise a document and its ancestors")
    s.add_argument("target")
    s.add_argument("--payload", nargs="+", metavar="KIND [VALUE]")
    s.add_argument("--key")
    s.add_argument("--value")
    s.add_argument("--place", default=socket.gethostname())
    s = sub.add_parser("observe", help="pin a document against collection")
    s.add_argument("id")
    s.add_argument("--curve", action="store_true", help="observe the whole world curve")
    s = sub.add_parser("release", help="drop an observation")
    s.add_argument("obs")
    sub.add_parser("gc", help="collect unobserved documents")
    s = sub.add_parser("validate", help="run registered micro-model checks")
    s.add_argument("--all", action="store_true", help="run every built-in check")
    s = sub.add_parser("micromodel", help="register a micro-model")
    s.add_argument("label")
    s.add_argument("checks", nargs="*", choices=sorted(micromodel.BUILTIN_CHECKS))
    s = sub.add_parser("export", help="write the canonical GILT export")
    s.add_argument("-o", "--output")
    s = sub.add_parser("import", help="replace the domain with a GILT file")
    s.add_argument("file")
    s = sub.add_parser("merge", help="merge a GILT file into the domain")
    s.add_argument("file")
    sub.add_parser("digest", help="print the graph digest")
    s = sub.add_parser("serve", help="serve the domain for pulls")
    s.add_argument("endpoint", help="host:port")
    s.add_argument("--reload", type=float, default=2.0, help="seconds between file change checks")
    s = sub.add_parser("pull", help="pull missing content from a served domain")
    s.add_argument("endpoint", help="host:port")
    s = sub.add_parser("constants", help="print the bootstrap constant manifest")
    s.add_argument("--ints", type=int, default=16, help="number of int:k keys to list")
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    path = Path(args.domain)
    handler, mutates = COMMANDS[args.command]
    try:
        if mutates is None:
            return handler(args, path)
        if not mutates:
            return handler(args, load(path))
        with locked(path):
            domain = load(path)
            code = handler(args, domain)
            save(domain, path)
            return code
    except UsageError as exc:
        print(f"gil: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GilError as exc:
        print(f"gil: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ConnectionError, OSError) as exc:
        print(f"gil: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main() -> None:
    sys.exit(run())

