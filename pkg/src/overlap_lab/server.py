"""HTTP backend for the hard-image triage workflow.

Read endpoints are side-effect free; POST /api/annotation is the only
mutating route.  Annotation writes are funneled through a single lock and
each accepted annotation is durably appended to the journal before the
response is sent.  All analysis inputs are immutable snapshots, so
concurrent reads need no coordination.

Endpoints:
    GET  /api/manifest            dataset summary
    GET  /api/queue?group=hard|overlap-K   ordered triage items
    GET  /api/image/{image_id}    image bytes
    GET  /api/annotations         resolved annotation map
    POST /api/annotation          submit one annotation (server stamps the time)
    GET  /api/prevalence          prevalence over the hard subset
    GET  /, /assets/*             static UI bundle
"""

from __future__ import annotations

import errno
import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Sequence
from urllib.parse import parse_qs, unquote, urlparse

import numpy as np

from overlap_lab import report as report_mod
from overlap_lab import store
from overlap_lab.ensemble import softmax_rows
from overlap_lab.errors import (
    InvalidErrorClass,
    MalformedJson,
    MissingImagesRoot,
    PortInUse,
)
from overlap_lab.model import (
    DatasetManifest,
    ErrorAnnotation,
    OverlapPartition,
    PredictionSet,
    utc_now_ms,
)
from overlap_lab.overlap import aligned_rows

log = logging.getLogger(__name__)

_CONTENT_TYPES = {
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".png": "image/png",
    ".svg": "image/svg+xml",
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json; charset=utf-8",
    ".map": "application/json; charset=utf-8",
}

_FALLBACK_PAGE = """<!DOCTYPE html>
<html><head><meta charset="utf-8"><title>overlap-lab triage</title></head>
<body><h1>overlap-lab triage server</h1>
<p>No UI bundle configured (start with --assets-dir to serve one).</p>
<p>API: /api/manifest, /api/queue, /api/image/&lt;id&gt;, /api/annotations,
/api/annotation (POST), /api/prevalence</p></body></html>
"""


class TriageServer:
    """Owns the HTTP server, the analysis snapshot, and the journal state."""

    def __init__(
        self,
        manifest: DatasetManifest,
        partition: OverlapPartition,
        runs: Sequence[PredictionSet],
        images_root: Path | str,
        annotations_path: Path | str,
        *,
        port: int = 8710,
        host: str = "127.0.0.1",
        assets_dir: Path | str | None = None,
    ) -> None:
        self.manifest = manifest
        self.partition = partition
        self.runs = list(runs)
        self.images_root = Path(images_root)
        if not self.images_root.is_dir():
            raise MissingImagesRoot(str(images_root))
        self.annotations_path = Path(annotations_path)
        self.assets_dir = Path(assets_dir) if assets_dir is not None else None

        self._queue_items = self._build_queue_items()
        self._write_lock = threading.Lock()
        self._entries: list[ErrorAnnotation] = store.read_annotations(self.annotations_path)
        self._resolved = report_mod.resolve_annotations(self._entries)

        handler = _make_handler(self)
        try:
            self._httpd = ThreadingHTTPServer((host, port), handler)
        except OSError as exc:
            if exc.errno in (errno.EADDRINUSE, errno.EACCES):
                raise PortInUse(port) from exc
            raise
        self._httpd.daemon_threads = True

    # -- lifecycle ---------------------------------------------------------

    @property
    def port(self) -> int:
        return int(self._httpd.server_address[1])

    def serve_forever(self, poll_interval: float = 0.5) -> None:
        self._httpd.serve_forever(poll_interval=poll_interval)

    def shutdown(self) -> None:
        self._httpd.shutdown()

    def close(self) -> None:
        self._httpd.server_close()

    # -- analysis snapshot ---------------------------------------------------

    def _build_queue_items(self) -> dict[str, dict[str, Any]]:
        """Static triage payload per image: truth, overlap, member top-3."""
        ids = sorted(self.partition.labels)
        per_run_top3: list[list[list[dict[str, Any]]]] = []
        for run in self.runs:
            probs = softmax_rows(aligned_rows(run, ids))
            # stable sort: equal probabilities keep ascending class order
            order = np.argsort(-probs, axis=1, kind="stable")[:, :3]
            run_items = []
            for i in range(len(ids)):
                run_items.append(
                    [
                        {
                            "index": int(c),
                            "name": self.manifest.vocabulary.name_of(int(c)),
                            "prob": float(probs[i, c]),
                        }
                        for c in order[i]
                    ]
                )
            per_run_top3.append(run_items)
        items: dict[str, dict[str, Any]] = {}
        for i, image_id in enumerate(ids):
            truth_index = self.manifest.label_of(image_id)
            items[image_id] = {
                "image_id": image_id,
                "truth": {
                    "index": truth_index,
                    "name": self.manifest.vocabulary.name_of(truth_index),
                },
                "overlap": self.partition.labels[image_id],
                "members": [
                    {"method_id": run.method_id, "top3": per_run_top3[k][i]}
                    for k, run in enumerate(self.runs)
                ],
            }
        return items

    # -- request-facing operations -------------------------------------------

    def manifest_summary(self) -> dict[str, Any]:
        return {
            "dataset_id": self.manifest.dataset_id,
            "num_classes": self.manifest.vocabulary.size,
            "splits": self.manifest.split_counts(),
        }

    def queue(self, group: str) -> list[dict[str, Any]]:
        if group == "hard":
            overlap = 0
        elif group.startswith("overlap-"):
            try:
                overlap = int(group[len("overlap-"):])
            except ValueError:
                raise ValueError(f"bad group {group!r}") from None
            if not 0 <= overlap <= self.partition.n_runs:
                raise ValueError(f"bad group {group!r}")
        else:
            raise ValueError(f"bad group {group!r}")
        resolved = self._resolved
        ids = self.partition.ids_with_overlap(overlap)
        pending = [i for i in ids if i not in resolved]
        done = [i for i in ids if i in resolved]
        out = []
        for image_id in pending + done:
            item = dict(self._queue_items[image_id])
            if image_id in resolved:
                item["annotation"] = store.annotation_payload(resolved[image_id])
            out.append(item)
        return out

    def accept_annotation(self, body: dict[str, Any]) -> dict[str, Any]:
        image_id = body.get("image_id")
        error_class = body.get("error_class")
        annotator = body.get("annotator")
        note = body.get("note")
        if (
            not isinstance(image_id, str)
            or not isinstance(error_class, str)
            or not isinstance(annotator, str)
            or (note is not None and not isinstance(note, str))
        ):
            raise MalformedJson("annotation body must carry image_id, error_class, annotator")
        if not self.manifest.has_image(image_id):
            raise KeyError(image_id)
        annotation = ErrorAnnotation(
            image_id=image_id,
            error_class=error_class,
            annotator=annotator,
            timestamp=utc_now_ms(),
            note=note,
        )
        with self._write_lock:
            store.append_annotation(self.annotations_path, annotation)
            self._entries.append(annotation)
            self._resolved = report_mod.resolve_annotations(self._entries)
        return store.annotation_payload(annotation)

    def annotations_map(self) -> dict[str, Any]:
        return report_mod.resolved_annotation_payload(self._resolved)

    def prevalence_payload(self) -> dict[str, Any]:
        entries = self._entries
        prev = report_mod.prevalence(self._resolved, self.partition.hard_ids)
        return report_mod.prevalence_payload(
            prev, report_mod.conflicting_annotations(entries)
        )

    def image_file(self, image_id: str) -> Path | None:
        if not self.manifest.has_image(image_id):
            return None
        rel = self.manifest.record(image_id).image_path
        if not rel:
            return None
        path = (self.images_root / rel).resolve()
        root = self.images_root.resolve()
        if root not in path.parents and path != root:
            return None  # refuse paths escaping the images root
        return path if path.is_file() else None

    def asset_file(self, rel: str) -> Path | None:
        if self.assets_dir is None:
            return None
        path = (self.assets_dir / rel).resolve()
        root = self.assets_dir.resolve()
        if root not in path.parents and path != root:
            return None
        return path if path.is_file() else None


def _make_handler(app: TriageServer) -> type[BaseHTTPRequestHandler]:
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt: str, *args: Any) -> None:
            log.debug("%s %s", self.address_string(), fmt % args)

        # -- response helpers ----------------------------------------------

        def _send_json(self, payload: Any, status: int = 200) -> None:
            blob = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(blob)))
            self.end_headers()
            self.wfile.write(blob)

        def _send_error_json(self, status: int, code: str) -> None:
            self._send_json({"error": code}, status=status)

        def _send_file(self, path: Path) -> None:
            try:
                blob = path.read_bytes()
            except OSError:
                self._send_error_json(404, "not_found")
                return
            content_type = _CONTENT_TYPES.get(path.suffix.lower(), "application/octet-stream")
            self.send_response(200)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(blob)))
            self.end_headers()
            self.wfile.write(blob)

        # -- routing ---------------------------------------------------------

        def do_GET(self) -> None:  # noqa: N802 (http.server API)
            url = urlparse(self.path)
            route = unquote(url.path)
            if route == "/api/manifest":
                self._send_json(app.manifest_summary())
            elif route == "/api/queue":
                params = parse_qs(url.query)
                group = params.get("group", ["hard"])[0]
                try:
                    items = app.queue(group)
                except ValueError:
                    self._send_error_json(400, "invalid_group")
                    return
                self._send_json(items)
            elif route.startswith("/api/image/"):
                image_id = route[len("/api/image/"):]
                path = app.image_file(image_id)
                if path is None:
                    self._send_error_json(404, "not_found")
                else:
                    self._send_file(path)
            elif route == "/api/annotations":
                self._send_json(app.annotations_map())
            elif route == "/api/prevalence":
                self._send_json(app.prevalence_payload())
            elif route == "/" or route == "/index.html":
                path = app.asset_file("index.html")
                if path is None:
                    blob = _FALLBACK_PAGE.encode("utf-8")
                    self.send_response(200)
                    self.send_header("Content-Type", "text/html; charset=utf-8")
                    self.send_header("Content-Length", str(len(blob)))
                    self.end_headers()
                    self.wfile.write(blob)
                else:
                    self._send_file(path)
            elif route.startswith("/assets/"):
                path = app.asset_file(route.lstrip("/"))
                if path is None:
                    self._send_error_json(404, "not_found")
                else:
                    self._send_file(path)
            else:
                self._send_error_json(404, "not_found")

        def do_POST(self) -> None:  # noqa: N802
            route = unquote(urlparse(self.path).path)
            if route != "/api/annotation":
                self._send_error_json(404, "not_found")
                return
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length) if length else b""
            try:
                body = json.loads(raw.decode("utf-8"))
                if not isinstance(body, dict):
                    raise MalformedJson("annotation body must be a JSON object")
                stored = app.accept_annotation(body)
            except InvalidErrorClass:
                self._send_error_json(400, "invalid_error_class")
                return
            except KeyError:
                self._send_error_json(400, "unknown_image_id")
                return
            except (MalformedJson, json.JSONDecodeError, UnicodeDecodeError):
                self._send_error_json(400, "invalid_request")
                return
            self._send_json(stored)

    return Handler
