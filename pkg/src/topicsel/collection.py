"""TREC run and qrels I/O, validation, and per-topic document pools.

Run format (6 columns)::

    topic Q0 docid rank score tag

Qrels format (4 columns)::

    topic 0 docid grade

Lists are ordered by descending score; ties keep input order. Graded qrels are
binarized at grade >= 1. Files ending in ``.gz`` (or starting with the gzip
magic bytes) are read transparently.
"""

from __future__ import annotations

import gzip
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class DataError(ValueError):
    """Malformed or inconsistent input data."""

    def __init__(self, message: str, path: str | os.PathLike | None = None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where = f"{self.path}:{line}: " if line is not None else f"{self.path}: "
        super().__init__(where + message)


@dataclass
class ValidationReport:
    """Anomalies found while loading; serializable as JSON."""

    anomalies: list[dict] = field(default_factory=list)

    def add(self, kind: str, **details) -> None:
        self.anomalies.append({"kind": kind, **details})

    def count(self, kind: str) -> int:
        return sum(1 for a in self.anomalies if a["kind"] == kind)

    def extend(self, other: "ValidationReport") -> None:
        self.anomalies.extend(other.anomalies)

    def to_dict(self) -> dict:
        kinds: dict[str, int] = {}
        for a in self.anomalies:
            kinds[a["kind"]] = kinds.get(a["kind"], 0) + 1
        return {"n_anomalies": len(self.anomalies), "by_kind": dict(sorted(kinds.items())), "anomalies": self.anomalies}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def open_text(path: str | os.PathLike) -> io.TextIOBase:
    """Open a text file, decompressing gzip transparently."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


@dataclass(frozen=True)
class SystemRun:
    system_id: str
    lists: Mapping[str, tuple[tuple[str, float], ...]]

    def docs(self, topic: str, depth: int | None = None) -> tuple[str, ...]:
        items = self.lists.get(topic, ())
        if depth is not None:
            items = items[:depth]
        return tuple(d for d, _ in items)


@dataclass(frozen=True)
class Pool:
    topic: str
    depth: int
    docs: frozenset[str]


@dataclass(frozen=True)
class TopicIndex:
    """Integer encoding of one topic's top-``depth`` lists over its pool.

    ``lists[s, k]`` is the pool index of the document system ``s`` ranks at
    ``k + 1`` (``-1`` past ``lengths[s]``). Pool order is first appearance
    scanning systems in RunSet order, then rank.
    """

    topic: str
    depth: int
    docs: tuple[str, ...]
    lists: np.ndarray
    lengths: np.ndarray

    @property
    def pool_size(self) -> int:
        return len(self.docs)


class RunSet:
    """All systems' ranked lists over a common topic set.

    Systems are kept sorted by ``system_id``; that order is the deterministic
    tie-break everywhere downstream. Treat instances as immutable.
    """

    def __init__(self, runs: Iterable[SystemRun], topics: Iterable[str] | None = None,
                 report: ValidationReport | None = None):
        runs = sorted(runs, key=lambda r: r.system_id)
        ids = [r.system_id for r in runs]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise DataError(f"duplicate system ids: {dup}")
        if topics is None:
            topics = {t for r in runs for t in r.lists}
        self.runs: tuple[SystemRun, ...] = tuple(runs)
        self.topics: tuple[str, ...] = tuple(sorted(set(topics)))
        self.report = report if report is not None else ValidationReport()
        self._index_cache: dict[tuple[str, int], TopicIndex] = {}
        for r in self.runs:
            for t in self.topics:
                if not r.lists.get(t):
                    self.report.add("missing_topic", system=r.system_id, topic=t)

    def __repr__(self) -> str:
        return f"RunSet(systems={len(self.runs)}, topics={len(self.topics)})"

    @property
    def system_ids(self) -> tuple[str, ...]:
        return tuple(r.system_id for r in self.runs)

    @property
    def n_systems(self) -> int:
        return len(self.runs)

    def subset(self, system_ids: Iterable[str]) -> "RunSet":
        keep = set(system_ids)
        return RunSet([r for r in self.runs if r.system_id in keep], self.topics, ValidationReport())

    def topic_index(self, topic: str, depth: int) -> TopicIndex:
        key = (topic, depth)
        idx = self._index_cache.get(key)
        if idx is None:
            idx = _index_topic(self, topic, depth)
            self._index_cache[key] = idx
        return idx


def _index_topic(runs: RunSet, topic: str, depth: int) -> TopicIndex:
    if topic not in runs.topics:
        raise KeyError(f"unknown topic {topic!r}")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    pos: dict[str, int] = {}
    docs: list[str] = []
    lists = np.full((runs.n_systems, depth), -1, dtype=np.int64)
    lengths = np.zeros(runs.n_systems, dtype=np.int64)
    for s, run in enumerate(runs.runs):
        top = run.docs(topic, depth)
        lengths[s] = len(top)
        for k, d in enumerate(top):
            p = pos.get(d)
            if p is None:
                p = pos[d] = len(docs)
                docs.append(d)
            lists[s, k] = p
    return TopicIndex(topic, depth, tuple(docs), lists, lengths)


def _iter_fields(path, n_fields: int) -> Iterator[tuple[int, list[str]]]:
    with open_text(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != n_fields:
                raise DataError(f"expected {n_fields} fields, got {len(parts)}", path, lineno)
            yield lineno, parts


def _parse_run_file(path, max_depth: int) -> tuple[SystemRun, ValidationReport]:
    report = ValidationReport()
    raw: dict[str, list[tuple[str, float]]] = {}
    seen: dict[str, set[str]] = {}
    tag: str | None = None
    for lineno, (topic, q0, doc, rank, score, run_tag) in _iter_fields(path, 6):
        if q0 != "Q0":
            raise DataError(f"second field must be 'Q0', got {q0!r}", path, lineno)
        try:
            int(rank)
            score_f = float(score)
        except ValueError:
            raise DataError(f"bad rank/score {rank!r}/{score!r}", path, lineno) from None
        if not np.isfinite(score_f):
            raise DataError(f"non-finite score {score!r}", path, lineno)
        if tag is None:
            tag = run_tag
        elif run_tag != tag:
            report.add("mixed_tags", file=str(path), line=lineno, tag=run_tag, kept=tag)
        docs_seen = seen.setdefault(topic, set())
        if doc in docs_seen:
            raise DataError(f"duplicate document {doc!r} for topic {topic}", path, lineno)
        docs_seen.add(doc)
        raw.setdefault(topic, []).append((doc, score_f))
    if tag is None:
        raise DataError("empty run file", path)
    lists = {}
    for topic, items in raw.items():
        ordered = sorted(items, key=lambda x: -x[1])  # stable: input order on ties
        if ordered != items:
            report.add("resorted", system=tag, topic=topic)
        if len(ordered) > max_depth:
            report.add("truncated", system=tag, topic=topic, length=len(ordered), max_depth=max_depth)
            ordered = ordered[:max_depth]
        lists[topic] = tuple(ordered)
    return SystemRun(tag, lists), report


def parse_runs(paths: Sequence[str | os.PathLike], max_depth: int = 1000, threads: int | None = None) -> RunSet:
    """Load one system per run file.

    Raises:
        DataError: on malformed lines, duplicate documents within a topic,
            or two files sharing a run tag.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    paths = list(paths)
    if not paths:
        raise DataError("no run files given")
    with ThreadPoolExecutor(max_workers=threads or 1) as ex:
        parsed = list(ex.map(lambda p: _parse_run_file(p, max_depth), paths))
    report = ValidationReport()
    tags: dict[str, str] = {}
    for p, (run, rep) in zip(paths, parsed):
        if run.system_id in tags:
            raise DataError(f"run tag {run.system_id!r} also used by {tags[run.system_id]}", p)
        tags[run.system_id] = str(p)
        report.extend(rep)
    return RunSet([r for r, _ in parsed], report=report)


def run_paths(directory: str | os.PathLike) -> list[Path]:
    """Regular files in ``directory`` in name order (hidden files skipped)."""
    d = Path(directory)
    if not d.is_dir():
        raise DataError("not a directory", d)
    return sorted(p for p in d.iterdir() if p.is_file() and not p.name.startswith("."))


class Qrels:
    """Binary judgments keyed by (topic, doc). Unjudged means non-relevant."""

    def __init__(self, judgments: Mapping[tuple[str, str], int] | None = None,
                 report: ValidationReport | None = None):
        self._by_topic: dict[str, dict[str, int]] = {}
        for (t, d), rel in (judgments or {}).items():
            if rel not in (0, 1):
                raise ValueError(f"relevance must be 0 or 1, got {rel!r}")
            self._by_topic.setdefault(t, {})[d] = int(rel)
        self.report = report if report is not None else ValidationReport()

    def __len__(self) -> int:
        return sum(len(v) for v in self._by_topic.values())

    def __eq__(self, other) -> bool:
        return isinstance(other, Qrels) and self._by_topic == other._by_topic

    def __repr__(self) -> str:
        return f"Qrels(topics={len(self._by_topic)}, judgments={len(self)})"

    @property
    def topics(self) -> tuple[str, ...]:
        return tuple(sorted(self._by_topic))

    def get(self, topic: str, doc: str) -> int:
        return self._by_topic.get(topic, {}).get(doc, 0)

    def topic_judgments(self, topic: str) -> Mapping[str, int]:
        return self._by_topic.get(topic, {})

    def relevant_count(self, topic: str) -> int:
        return sum(self._by_topic.get(topic, {}).values())

    def items(self) -> Iterator[tuple[tuple[str, str], int]]:
        for t in sorted(self._by_topic):
            for d, rel in self._by_topic[t].items():
                yield (t, d), rel

    def relevance(self, topic: str, docs: Sequence[str]) -> np.ndarray:
        judged = self._by_topic.get(topic, {})
        return np.fromiter((judged.get(d, 0) for d in docs), dtype=np.float64, count=len(docs))


def parse_qrels(path: str | os.PathLike) -> Qrels:
    report = ValidationReport()
    judgments: dict[tuple[str, str], int] = {}
    for lineno, (topic, _, doc, grade) in _iter_fields(path, 4):
        try:
            g = int(grade)
        except ValueError:
            raise DataError(f"grade must be an integer, got {grade!r}", path, lineno) from None
        if g < 0:
            logger.warning("%s:%d: negative grade %d read as non-relevant", path, lineno, g)
            report.add("negative_grade", topic=topic, doc=doc, grade=g, line=lineno)
        key = (topic, doc)
        if key in judgments:
            logger.warning("%s:%d: duplicate judgment for %s/%s, keeping last", path, lineno, topic, doc)
            report.add("duplicate_judgment", topic=topic, doc=doc, line=lineno)
        judgments[key] = 1 if g >= 1 else 0
    return Qrels(judgments, report)


def build_pool(runs: RunSet, topic: str, depth: int) -> Pool:
    """Union of every system's top-``depth`` documents for ``topic``."""
    if topic not in runs.topics:
        raise KeyError(f"unknown topic {topic!r}")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    docs = set()
    for run in runs.runs:
        docs.update(run.docs(topic, depth))
    return Pool(topic, depth, frozenset(docs))


def validate(runs: RunSet, qrels: Qrels | None = None) -> ValidationReport:
    """Combined report: load anomalies plus run/qrels topic coverage."""
    report = ValidationReport()
    report.extend(runs.report)
    if qrels is not None:
        report.extend(qrels.report)
        judged = set(qrels.topics)
        for t in runs.topics:
            if t not in judged:
                report.add("topic_without_qrels", topic=t)
            elif qrels.relevant_count(t) == 0:
                report.add("topic_without_relevant", topic=t)
        for t in sorted(judged - set(runs.topics)):
            report.add("qrels_topic_not_in_runs", topic=t)
    return report


def write_run(run: SystemRun, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for topic in sorted(run.lists):
            for rank, (doc, score) in enumerate(run.lists[topic], start=1):
                fh.write(f"{topic} Q0 {doc} {rank} {score!r} {run.system_id}\n")


def write_runs(runs: RunSet, directory: str | os.PathLike) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for run in runs.runs:
        p = d / f"{run.system_id}.run"
        write_run(run, p)
        paths.append(p)
    return paths


def write_qrels(qrels: Qrels, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (topic, doc), rel in qrels.items():
            fh.write(f"{topic} 0 {doc} {rel}\n")


def read_groups(path: str | os.PathLike | None, runs: RunSet) -> dict[str, str]:
    """Two-column CSV ``system_id,group_id``; default is one group per system."""
    if path is None:
        return {s: s for s in runs.system_ids}
    groups: dict[str, str] = {}
    with open_text(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise DataError("expected 'system_id,group_id'", path, lineno)
            if lineno == 1 and parts == ["system_id", "group_id"]:
                continue
            groups[parts[0]] = parts[1]
    missing = [s for s in runs.system_ids if s not in groups]
    if missing:
        raise DataError(f"systems without a group: {missing}", path)
    return {s: groups[s] for s in runs.system_ids}
