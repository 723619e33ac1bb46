"""Document store with deterministic chunking, embedding, and exact retrieval.

Chunking is paragraph-first: each blank-line-separated paragraph becomes one
chunk, and a paragraph longer than ``max_chars`` is hard-split into windows of
``max_chars`` advancing by ``max_chars - overlap_chars`` (so consecutive
windows share ``overlap_chars`` characters; the final window is clamped to the
paragraph end). Chunk ids are ``doc_id:NNNN`` ordinals.

The shipped embedder is a seeded feature-hashing bag-of-words map: each token
hashes (FNV-1a over ``seed:token``) to a dimension index and a sign, counts
accumulate, and the vector is L2-normalized. Text with no tokens embeds as the
unit vector along dimension 0. Any embedder with ``dim``, ``identifier`` and
``embed(text)`` can replace it.

Search is an exhaustive exact cosine scan — at the target scale (thousands of
chunks) exactness is cheap and reproducibility is worth more than speed. Ties
break by ascending chunk_id. The score is defined canonically so independent
implementations agree bit-for-bit: embeddings are L2-normalized once at ingest
(norm = sqrt of the ascending-index sum of squares, each component divided by
it), the query embedding is normalized the same way at search time, and the
score is the ascending-index sequential dot product of the two unit vectors.

Persistence is an append-only log (``log``) of ingest/delete events with full
chunk payloads plus a ``meta`` file (dimension, embedder identifier, chunking
params); the in-memory index is rebuilt by replay on open. Corrupt trailing
log lines (torn writes) are skipped. Writes serialize against reads via an
internal lock; reads may otherwise proceed concurrently.
"""

from __future__ import annotations

import json
import math
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .canon import fnv1a64
from .errors import DimensionMismatch, DuplicateDocument, EmbedderFailure

META_VERSION = "1"

_TOKEN = re.compile(r"[a-z0-9]+")
_PARA_BREAK = re.compile(r"\n[ \t\r]*\n")
_WS = " \t\r\n"


@dataclass(frozen=True)
class KbDocument:
    doc_id: str
    title: str
    body: str
    source_path: str = ""
    tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class KbChunk:
    chunk_id: str
    doc_id: str
    ordinal: int
    text: str
    char_span: tuple[int, int]
    embedding: tuple[float, ...]


@dataclass(frozen=True)
class Citation:
    doc_id: str
    title: str
    char_span: tuple[int, int]


@dataclass(frozen=True)
class RetrievalHit:
    chunk_id: str
    score: float
    citation: Citation


class HashingEmbedder:
    """Seeded feature-hashing bag-of-words embedder; pure integer hashing
    keeps it bit-identical across platforms."""

    def __init__(self, dim: int = 64, seed: int = 1):
        if dim < 2:
            raise ValueError("embedding dimension must be >= 2")
        self.dim = dim
        self.seed = seed

    @property
    def identifier(self) -> str:
        return f"fnv1a-bow-v1:d{self.dim}:s{self.seed}"

    def embed(self, text: str) -> tuple[float, ...]:
        counts = [0.0] * self.dim
        for token in _TOKEN.findall(text.lower()):
            h = fnv1a64(f"{self.seed}:{token}".encode("utf-8"))
            index = h % self.dim
            sign = 1.0 if (h >> 32) & 1 == 0 else -1.0
            counts[index] += sign
        norm = math.sqrt(sum(c * c for c in counts))
        if norm == 0.0:
            counts[0] = 1.0
            return tuple(counts)
        return tuple(c / norm for c in counts)


def paragraph_spans(body: str) -> list[tuple[int, int]]:
    """Whitespace-trimmed (start, end) spans of blank-line-separated paragraphs."""
    spans = []
    i, n = 0, len(body)
    while i < n:
        while i < n and body[i] in _WS:
            i += 1
        if i >= n:
            break
        m = _PARA_BREAK.search(body, i)
        stop = m.start() if m else n
        end = stop
        while end > i and body[end - 1] in _WS:
            end -= 1
        if end > i:
            spans.append((i, end))
        i = stop + 1 if m else n
    return spans


def chunk_spans(body: str, max_chars: int, overlap_chars: int) -> list[tuple[int, int]]:
    """Paragraph chunks, oversized paragraphs hard-split with overlap."""
    if not max_chars > overlap_chars >= 0:
        raise ValueError("require max_chars > overlap_chars >= 0")
    out = []
    stride = max_chars - overlap_chars
    for start, end in paragraph_spans(body):
        if end - start <= max_chars:
            out.append((start, end))
            continue
        pos = start
        while True:
            stop = min(pos + max_chars, end)
            out.append((pos, stop))
            if stop == end:
                break
            pos += stride
    return out


def l2_normalize(vec) -> tuple[float, ...]:
    """Canonical normalization: ascending-index sum of squares, then divide."""
    norm = 0.0
    for x in vec:
        norm += x * x
    norm = math.sqrt(norm)
    if norm == 0.0:
        raise EmbedderFailure("embedding is all-zero")
    return tuple(x / norm for x in vec)


def dot(a, b) -> float:
    """Canonical score: ascending-index sequential dot product."""
    total = 0.0
    for x, y in zip(a, b):
        total += x * y
    return total


def cosine(a, b) -> float:
    na = math.sqrt(dot(a, a))
    nb = math.sqrt(dot(b, b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot(a, b) / (na * nb)


class KbStore:
    def __init__(
        self,
        root,
        embedder: HashingEmbedder | None = None,
        max_chars: int = 800,
        overlap_chars: int = 80,
    ):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.embedder = embedder or HashingEmbedder()
        self._lock = threading.RLock()
        self._chunks: dict[str, KbChunk] = {}
        self._docs: dict[str, KbDocument] = {}
        meta_path = self.root / "meta"
        if meta_path.exists():
            meta = json.loads(meta_path.read_text("utf-8"))
            self.max_chars = int(meta["max_chars"])
            self.overlap_chars = int(meta["overlap_chars"])
            self.dim = int(meta["dimension"])
            self.embedder_id = str(meta["embedder"])
        else:
            self.max_chars = max_chars
            self.overlap_chars = overlap_chars
            self.dim = self.embedder.dim
            self.embedder_id = self.embedder.identifier
            meta_path.write_text(
                json.dumps(
                    {
                        "version": META_VERSION,
                        "dimension": self.dim,
                        "embedder": self.embedder_id,
                        "max_chars": self.max_chars,
                        "overlap_chars": self.overlap_chars,
                    },
                    sort_keys=True,
                )
                + "\n",
                encoding="utf-8",
            )
        self._log_path = self.root / "log"
        self._replay()

    def _replay(self) -> None:
        if not self._log_path.exists():
            return
        with open(self._log_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn trailing write
                self._apply(record)

    def _apply(self, record: dict) -> None:
        if record.get("event") == "ingest":
            doc = KbDocument(
                doc_id=record["doc_id"],
                title=record["title"],
                body=record.get("body", ""),
                source_path=record.get("source_path", ""),
                tags=tuple(record.get("tags", ())),
            )
            self._docs[doc.doc_id] = doc
            for c in record["chunks"]:
                chunk = KbChunk(
                    chunk_id=c["chunk_id"],
                    doc_id=doc.doc_id,
                    ordinal=int(c["ordinal"]),
                    text=c["text"],
                    char_span=(int(c["span"][0]), int(c["span"][1])),
                    embedding=tuple(float(v) for v in c["embedding"]),
                )
                self._chunks[chunk.chunk_id] = chunk
        elif record.get("event") == "delete":
            doc_id = record["doc_id"]
            self._docs.pop(doc_id, None)
            for cid in [cid for cid, c in self._chunks.items() if c.doc_id == doc_id]:
                del self._chunks[cid]

    def _append(self, record: dict) -> None:
        with open(self._log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            fh.flush()

    def ingest(self, doc: KbDocument, chunking: dict | None = None, embedder=None) -> int:
        """Chunk, embed, and store a document atomically; returns chunk count."""
        embedder = embedder or self.embedder
        if embedder.dim != self.dim:
            raise DimensionMismatch(
                f"embedder dimension {embedder.dim} != store dimension {self.dim}"
            )
        max_chars = (chunking or {}).get("max_chars", self.max_chars)
        overlap = (chunking or {}).get("overlap_chars", self.overlap_chars)
        with self._lock:
            if doc.doc_id in self._docs:
                raise DuplicateDocument(f"doc_id {doc.doc_id!r} already ingested")
            chunks = []
            for ordinal, (start, end) in enumerate(chunk_spans(doc.body, max_chars, overlap)):
                text = doc.body[start:end]
                try:
                    embedding = tuple(float(v) for v in embedder.embed(text))
                except EmbedderFailure:
                    raise
                except Exception as exc:
                    raise EmbedderFailure(f"embedder raised {type(exc).__name__}: {exc}") from exc
                if len(embedding) != self.dim:
                    raise EmbedderFailure(
                        f"embedder returned {len(embedding)} dims, store expects {self.dim}"
                    )
                embedding = l2_normalize(embedding)
                if abs(dot(embedding, embedding) - 1.0) > 1e-12:
                    raise EmbedderFailure("stored embedding failed the self-similarity check")
                chunks.append(
                    KbChunk(f"{doc.doc_id}:{ordinal:04d}", doc.doc_id, ordinal, text, (start, end), embedding)
                )
            record = {
                "event": "ingest",
                "doc_id": doc.doc_id,
                "title": doc.title,
                "source_path": doc.source_path,
                "tags": list(doc.tags),
                "body": doc.body,
                "chunks": [
                    {
                        "chunk_id": c.chunk_id,
                        "ordinal": c.ordinal,
                        "text": c.text,
                        "span": list(c.char_span),
                        "embedding": list(c.embedding),
                    }
                    for c in chunks
                ],
            }
            self._append(record)
            self._apply(record)
            return len(chunks)

    def delete(self, doc_id: str) -> int:
        with self._lock:
            removed = sum(1 for c in self._chunks.values() if c.doc_id == doc_id)
            if removed or doc_id in self._docs:
                record = {"event": "delete", "doc_id": doc_id}
                self._append(record)
                self._apply(record)
            return removed

    def search(self, query: str, k: int, embedder=None) -> list[RetrievalHit]:
        """Exact top-k cosine hits, descending score, ties by ascending chunk_id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        embedder = embedder or self.embedder
        if embedder.dim != self.dim:
            raise DimensionMismatch(
                f"embedder dimension {embedder.dim} != store dimension {self.dim}"
            )
        q = l2_normalize(tuple(float(v) for v in embedder.embed(query)))
        with self._lock:
            scored = [(dot(q, c.embedding), c) for c in self._chunks.values()]
        scored.sort(key=lambda sc: (-sc[0], sc[1].chunk_id))
        hits = []
        for score, chunk in scored[:k]:
            doc = self._docs[chunk.doc_id]
            hits.append(
                RetrievalHit(chunk.chunk_id, score, Citation(doc.doc_id, doc.title, chunk.char_span))
            )
        return hits

    def get_chunk(self, chunk_id: str) -> KbChunk | None:
        return self._chunks.get(chunk_id)

    def get_document(self, doc_id: str) -> KbDocument | None:
        return self._docs.get(doc_id)

    def list_documents(self) -> list[dict]:
        with self._lock:
            out = []
            for doc_id in sorted(self._docs):
                n = sum(1 for c in self._chunks.values() if c.doc_id == doc_id)
                out.append({"doc_id": doc_id, "title": self._docs[doc_id].title, "chunks": n})
            return out

    @property
    def chunk_count(self) -> int:
        return len(self._chunks)


def ingest_default_docs(store: KbStore) -> int:
    """Load the package's bundled reference notes into a store.

    Idempotent: documents whose doc_id (the file stem) is already present are
    skipped, so calling this on every startup is safe. Returns the number of
    documents actually ingested.
    """
    from importlib import resources

    added = 0
    folder = resources.files("slopeagent") / "data" / "kb"
    for entry in sorted(folder.iterdir(), key=lambda e: e.name):
        if not entry.name.endswith(".md"):
            continue
        doc_id = entry.name[:-3]
        if store.get_document(doc_id) is not None:
            continue
        body = entry.read_text(encoding="utf-8")
        first = body.split("\n", 1)[0]
        title = first.lstrip("# ").strip() or doc_id
        store.ingest(KbDocument(doc_id=doc_id, title=title, body=body,
                                source_path=f"data/kb/{entry.name}"))
        added += 1
    return added
