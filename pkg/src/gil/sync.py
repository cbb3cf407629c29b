"""Pull-based reconciliation between two domain nodes.

Line protocol (UTF-8, LF)::

    C: HELLO 1              S: HELLO 1
    C: IDS                  S: D <id> ... TH <sha256 of T line> ... END
    C: DIGEST               S: DIGEST <hex>
    C: WANT                 S: D/T lines in GILT encoding ... END
       D <id> | T <m> <f> <s> | TH <hash>
       END
    C: BYE                  (server closes)

Failures are answered with ``ERR <token>`` and the connection stays open.
"""

from __future__ import annotations

import hashlib
import logging
import socket
import socketserver
import threading
from dataclasses import dataclass
from typing import Callable, Union

from .core import Payload, Triple, parse_id, render_id
from .errors import BindFailure, GilError, ProtocolError
from .interchange import absorb, document_line, domain_digest
from .store import Domain

log = logging.getLogger(__name__)

PROTOCOL_VERSION = "1"
DomainSource = Union[Domain, Callable[[], Domain]]


def triple_hash(t: Triple) -> str:
    return hashlib.sha256(t.render().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SyncReport:
    documents_received: int
    triples_received: int
    remote_digest: bytes
    converged: bool

    def __str__(self) -> str:
        state = "converged" if self.converged else "diverged"
        return (
            f"received {self.documents_received} documents, {self.triples_received} triples; "
            f"remote {self.remote_digest.hex()} ({state})"
        )


# -- server ---------------------------------------------------------------


class _Handler(socketserver.StreamRequestHandler):
    server: _Server

    def send(self, *lines: str) -> None:
        self.wfile.write("".join(line + "\n" for line in lines).encode("utf-8"))
        self.wfile.flush()

    def readline(self) -> str | None:
        raw = self.rfile.readline()
        if not raw:
            return None
        return raw.decode("utf-8", errors="replace").rstrip("\r\n")

    def handle(self) -> None:
        log.debug("sync client %s connected", self.client_address)
        greeted = False
        while True:
            line = self.readline()
            if line is None:
                return
            verb, _, arg = line.partition(" ")
            if verb == "BYE":
                return
            if verb == "HELLO":
                if arg == PROTOCOL_VERSION:
                    greeted = True
                    self.send(f"HELLO {PROTOCOL_VERSION}")
                else:
                    self.send("ERR unsupported-version")
            elif verb not in ("IDS", "DIGEST", "WANT"):
                self.send("ERR unknown-verb")
            elif not greeted:
                if verb == "WANT":
                    self._drain()
                self.send("ERR hello-required")
            elif verb == "IDS":
                snap = self.server.snapshot()
                out = [f"D {render_id(d)}" for d in sorted(snap.documents)]
                out += [f"TH {h}" for h in sorted(triple_hash(t) for t in snap.triples)]
                self.send(*out, "END")
            elif verb == "DIGEST":
                self.send(f"DIGEST {domain_digest(self.server.snapshot()).hex()}")
            else:
                self._want()

    def _drain(self) -> list[str] | None:
        lines = []
        while True:
            line = self.readline()
            if line is None:
                return None
            if line == "END":
                return lines
            lines.append(line)

    def _want(self) -> None:
        request = self._drain()
        if request is None:
            return
        snap = self.server.snapshot()
        by_hash = None
        out = []
        try:
            for line in request:
                tag, _, rest = line.partition(" ")
                if tag == "D":
                    d = parse_id(rest)
                    if d in snap.documents:
                        out.append(document_line(d, snap.documents[d]))
                elif tag == "T":
                    m, f, s = (parse_id(p) for p in rest.split(" "))
                    t = Triple(m, f, s)
                    if t in snap.triples:
                        out.append(t.render())
                elif tag == "TH":
                    if by_hash is None:
                        by_hash = {triple_hash(t): t for t in snap.triples}
                    t = by_hash.get(rest)
                    if t is not None:
                        out.append(t.render())
                else:
                    raise ValueError(tag)
        except (ValueError, GilError):
            self.send("ERR malformed-request")
            return
        self.send(*out, "END")


class _Server(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, source: DomainSource):
        self.source = source
        super().__init__(address, _Handler)

    def snapshot(self) -> Domain:
        dom = self.source() if callable(self.source) else self.source
        return dom.snapshot()


class SyncServer:
    """Handle on a running service; usable as a context manager."""

    def __init__(self, server: _Server):
        self._server = server
        self._thread = threading.Thread(target=server.serve_forever, name="gil-sync", daemon=True)
        self._thread.start()

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return host, port

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join()

    def wait(self) -> None:
        self._thread.join()

    def __enter__(self) -> SyncServer:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def serve(source: DomainSource, address: tuple[str, int] = ("127.0.0.1", 0)) -> SyncServer:
    """Serve ``source`` read-only. ``source`` may be a domain or a loader returning one."""
    try:
        server = _Server(address, source)
    except OSError as exc:
        raise BindFailure(f"cannot bind {address[0]}:{address[1]}: {exc}") from exc
    return SyncServer(server)


def parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


# -- client ---------------------------------------------------------------


class _Client:
    def __init__(self, sock: socket.socket):
        self.file = sock.makefile("rwb")

    def send(self, *lines: str) -> None:
        self.file.write("".join(line + "\n" for line in lines).encode("utf-8"))
        self.file.flush()

    def recv(self) -> str:
        raw = self.file.readline()
        if not raw:
            raise ConnectionError("remote closed the connection")
        line = raw.decode("utf-8").rstrip("\n")
        if line.startswith("ERR "):
            raise ProtocolError(f"remote error: {line[4:]}")
        return line

    def until_end(self) -> list[str]:
        lines = []
        while (line := self.recv()) != "END":
            lines.append(line)
        return lines


def pull(endpoint: tuple[str, int], local: Domain, timeout: float = 30.0) -> SyncReport:
    """Copy everything the remote has and ``local`` lacks, then apply it atomically."""
    try:
        with socket.create_connection(endpoint, timeout=timeout) as sock:
            client = _Client(sock)
            client.send(f"HELLO {PROTOCOL_VERSION}")
            if client.recv() != f"HELLO {PROTOCOL_VERSION}":
                raise ProtocolError("unexpected greeting")
            client.send("IDS")
            remote_ids, remote_hashes = set(), set()
            for line in client.until_end():
                tag, _, rest = line.partition(" ")
                if tag == "D":
                    remote_ids.add(parse_id(rest))
                elif tag == "TH":
                    remote_hashes.add(rest)
                else:
                    raise ProtocolError(f"unexpected IDS line {line[:40]!r}")
            client.send("DIGEST")
            tag, _, hex_digest = client.recv().partition(" ")
            if tag != "DIGEST":
                raise ProtocolError("expected DIGEST reply")
            remote_digest = bytes.fromhex(hex_digest)

            snap = local.snapshot()
            want_docs = sorted(remote_ids - snap.documents.keys())
            have = {triple_hash(t) for t in snap.triples}
            want_triples = sorted(remote_hashes - have)
            received: list[str] = []
            if want_docs or want_triples:
                client.send(
                    "WANT",
                    *(f"D {render_id(d)}" for d in want_docs),
                    *(f"TH {h}" for h in want_triples),
                    "END",
                )
                received = client.until_end()
            client.send("BYE")
    except OSError as exc:
        if isinstance(exc, ConnectionError):
            raise
        raise ConnectionError(f"cannot reach {endpoint[0]}:{endpoint[1]}: {exc}") from exc

    staging = _stage(received, snap, source=f"pull@{endpoint[0]}:{endpoint[1]}")
    docs, triples = absorb(local, staging)
    return SyncReport(docs, triples, remote_digest, domain_digest(local) == remote_digest)


def _stage(lines: list[str], local: Domain, source: str) -> Domain:
    """Build a self-contained domain from received records, borrowing endpoints from ``local``."""
    staging = Domain(source=source)
    pending = []
    for line in lines:
        tag, _, rest = line.partition(" ")
        try:
            if tag == "D":
                id_s, kind, *payload = rest.split(" ")
                staging.insert_document(parse_id(id_s), Payload.decode(kind, payload[0] if payload else ""))
            elif tag == "T":
                pending.append(Triple(*(parse_id(p) for p in rest.split(" "))))
            else:
                raise ProtocolError(f"unexpected record {line[:40]!r}")
        except ValueError as exc:
            raise ProtocolError(f"bad record {line[:40]!r}: {exc}") from exc
    for t in pending:
        for d in (t.marker, t.first, t.second):
            if d in staging.documents:
                continue
            if d not in local.documents:
                raise ProtocolError(f"remote sent a triple referencing unknown {render_id(d)}")
            staging.insert_document(d, local.documents[d])
        staging.insert_triple(t)
    return staging
