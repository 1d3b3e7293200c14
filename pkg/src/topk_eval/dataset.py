"""The three-part retrieval-response dataset: query-texts, ranked and graded samples.

Each part is stored as JSON Lines using the published key names verbatim
(``"E"``, ``"Nc"``, ``"inK"``, ``"answer_topK"`` ...). Loading is strict about
required keys and keeps unknown keys in ``extra`` so records round-trip.
"""

from __future__ import annotations

import enum
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Iterable, Iterator

from .errors import CorruptRankError, CrossLinkError, ParseError, SchemaError

SUBSET_PREFIXES = ("A", "Hp-e", "Hp-h", "Hp-m", "Hs-e", "Hs-h", "Hs-m", "M", "N")
EMBEDDING_TAGS = ("AM", "EM", "ES", "QM")

# stored P/R are compared against recomputed values at this absolute tolerance
PR_TOLERANCE = 1e-12


class Part(enum.Enum):
    QUERY_TEXTS = "query_texts"
    RANKED = "ranked"
    GRADED = "graded"


@dataclass
class QueryTextsSample:
    id: str
    q: str
    p: list[str]
    n: list[str]
    c1: str | None = None
    c2: str | None = None
    q2: str | None = None
    extra: dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def subset(self) -> str:
        return subset_of(self.id)


@dataclass
class RankedSample:
    id: str
    e: str
    nc: int
    np: int
    ks: list[int]
    ps: list[float]
    rs: list[float]
    rank: list[int]
    extra: dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def key(self) -> tuple[str, str, int, int]:
        return (self.id, self.e, self.nc, self.np)


@dataclass
class GradedSample:
    id: str
    e: str
    nc: int
    np: int
    k: int
    rank: list[int]
    in_k: list[int]
    answer_ideal: str
    answer_topk: str
    grade: int
    p: float
    r: float
    extra: dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def key(self) -> tuple[str, str, int, int, int]:
        return (self.id, self.e, self.nc, self.np, self.k)

    @property
    def ranked_key(self) -> tuple[str, str, int, int]:
        return (self.id, self.e, self.nc, self.np)


# (record key, attribute name, type check)
_SCHEMAS: dict[Part, list[tuple[str, str, str]]] = {
    Part.QUERY_TEXTS: [
        ("id", "id", "str"),
        ("q", "q", "str"),
        ("p", "p", "strs"),
        ("n", "n", "strs"),
    ],
    Part.RANKED: [
        ("id", "id", "str"),
        ("E", "e", "str"),
        ("Nc", "nc", "int"),
        ("Np", "np", "int"),
        ("K", "ks", "ints"),
        ("P", "ps", "floats"),
        ("R", "rs", "floats"),
        ("rank", "rank", "ints"),
    ],
    Part.GRADED: [
        ("id", "id", "str"),
        ("E", "e", "str"),
        ("Nc", "nc", "int"),
        ("Np", "np", "int"),
        ("K", "k", "int"),
        ("rank", "rank", "ints"),
        ("inK", "in_k", "ints"),
        ("answer_ideal", "answer_ideal", "str"),
        ("answer_topK", "answer_topk", "str"),
        ("grade", "grade", "int"),
        ("P", "p", "float"),
        ("R", "r", "float"),
    ],
}
_OPTIONAL = {Part.QUERY_TEXTS: ("c1", "c2", "q2")}
_CLASSES = {Part.QUERY_TEXTS: QueryTextsSample, Part.RANKED: RankedSample, Part.GRADED: GradedSample}


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v: Any) -> bool:
    return (_is_int(v) or isinstance(v, float)) and not isinstance(v, bool)


def _coerce(key: str, value: Any, kind: str, line: int | None):
    ok = {
        "str": lambda v: isinstance(v, str),
        "int": _is_int,
        "float": _is_number,
        "strs": lambda v: isinstance(v, list) and all(isinstance(x, str) for x in v),
        "ints": lambda v: isinstance(v, list) and all(_is_int(x) for x in v),
        "floats": lambda v: isinstance(v, list) and all(_is_number(x) for x in v),
    }[kind](value)
    if not ok:
        raise SchemaError(key, f"wrong type ({type(value).__name__}) for", line)
    if kind == "float":
        return float(value)
    if kind == "floats":
        return [float(x) for x in value]
    if kind in ("strs", "ints"):
        return list(value)
    return value


def sample_from_record(record: dict[str, Any], part: Part, line: int | None = None):
    """Build a typed sample from one decoded JSON object."""
    part = Part(part)
    if not isinstance(record, dict):
        raise SchemaError("<record>", "expected a JSON object for", line)
    kwargs: dict[str, Any] = {}
    for key, attr, kind in _SCHEMAS[part]:
        if key not in record:
            raise SchemaError(key, line=line)
        kwargs[attr] = _coerce(key, record[key], kind, line)
    known = {key for key, _, _ in _SCHEMAS[part]}
    for key in _OPTIONAL.get(part, ()):
        known.add(key)
        if record.get(key) is not None:
            kwargs[key] = _coerce(key, record[key], "str", line)
    kwargs["extra"] = {k: v for k, v in record.items() if k not in known}
    return _CLASSES[part](**kwargs)


def sample_to_record(sample) -> dict[str, Any]:
    """Inverse of :func:`sample_from_record`; unknown keys are written back."""
    part = part_of(sample)
    record = {key: getattr(sample, attr) for key, attr, _ in _SCHEMAS[part]}
    for key in _OPTIONAL.get(part, ()):
        value = getattr(sample, key)
        if value is not None:
            record[key] = value
    record.update(sample.extra)
    return record


def part_of(sample) -> Part:
    for part, cls in _CLASSES.items():
        if isinstance(sample, cls):
            return part
    raise TypeError(f"not a dataset sample: {type(sample).__name__}")


def iter_part(source: IO[bytes] | IO[str], part: Part) -> Iterator:
    part = Part(part)
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(lineno, f"invalid UTF-8 ({exc.reason})") from exc
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, exc.msg) from exc
        yield sample_from_record(record, part, lineno)


def load_part(source: IO[bytes] | IO[str] | bytes | str | Path, part: Part) -> list:
    """Parse one dataset part from a JSON Lines stream, bytes, or path.

    A ``str`` is treated as a path, not as content; wrap text in
    ``io.StringIO`` instead.
    """
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return list(iter_part(fh, part))
    return list(iter_part(source, part))


def dump_part(samples: Iterable, dest: IO[str] | str | Path) -> None:
    """Write samples as JSON Lines with stable key order."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            dump_part(samples, fh)
        return
    for sample in samples:
        dest.write(json.dumps(sample_to_record(sample), ensure_ascii=False) + "\n")


def subset_of(sample_id: str) -> str:
    """Dataset tag of an id: ``"Hs-m-17"`` -> ``"Hs"``, ``"N-5"`` -> ``"N"``."""
    prefix = sample_id.rsplit("-", 1)[0]
    return prefix.split("-", 1)[0]


def labels_from_rank(rank: Iterable[int], np: int) -> list[int]:
    """Map candidate indices to relevance flags: positives are indices below ``np``."""
    return [1 if i < np else 0 for i in rank]


def ranked_texts(s_r: RankedSample, s_q: QueryTextsSample) -> list[str]:
    """Candidate texts in rank order for a ranked sample."""
    if s_r.id != s_q.id:
        raise CrossLinkError(f"ranked sample {s_r.id!r} joined to query-texts {s_q.id!r}")
    texts = []
    for i in s_r.rank:
        if not 0 <= i < s_r.nc:
            raise CorruptRankError(f"{s_r.id}: rank index {i} outside [0, {s_r.nc})")
        if i < s_r.np:
            if i >= len(s_q.p):
                raise CorruptRankError(f"{s_r.id}: positive index {i} beyond {len(s_q.p)} positives")
            texts.append(s_q.p[i])
        else:
            j = i - s_r.np
            if j >= len(s_q.n):
                raise CorruptRankError(f"{s_r.id}: negative index {j} beyond {len(s_q.n)} negatives")
            texts.append(s_q.n[j])
    return texts


def positive_texts(s_r: RankedSample, s_q: QueryTextsSample) -> list[str]:
    """The positives placed in the ranked sample's pool (the first Np of ``p``)."""
    return list(s_q.p[: s_r.np])


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    part: str
    key: tuple
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict[str, Any]:
        return {"part": self.part, "key": list(self.key), "failures": list(self.failures)}


def _prefix_counts(rank: list[int], np: int, ks: Iterable[int]) -> list[int] | None:
    labels = labels_from_rank(rank, np)
    counts = []
    for k in ks:
        if not 1 <= k <= len(labels):
            return None
        counts.append(sum(labels[:k]))
    return counts


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=0.0, abs_tol=PR_TOLERANCE)


def validate_query_texts(s_q: QueryTextsSample) -> ValidationReport:
    report = ValidationReport("query_texts", (s_q.id,))
    if len(s_q.p) < 1:
        report.failures.append("len(p)>=1")
    if len(s_q.n) < 1:
        report.failures.append("len(n)>=1")
    if s_q.id.rsplit("-", 1)[0] not in SUBSET_PREFIXES:
        report.failures.append("id prefix")
    return report


def validate_ranked(s_r: RankedSample, s_q: QueryTextsSample) -> ValidationReport:
    """Run every ranked-vs-query-texts assertion; returns the failed check names."""
    if s_r.id != s_q.id:
        raise CrossLinkError(f"ranked sample {s_r.id!r} checked against query-texts {s_q.id!r}")
    report = ValidationReport("ranked", s_r.key)
    fail = report.failures.append
    if len(s_r.ps) != len(s_r.ks):
        fail("len(P)==len(K)")
    if len(s_r.rs) != len(s_r.ks):
        fail("len(R)==len(K)")
    if len(s_r.rank) != s_r.nc:
        fail("len(rank)==Nc")
    if s_r.nc > len(s_q.p) + len(s_q.n):
        fail("Nc<=len(p)+len(n)")
    if s_r.np > len(s_q.p):
        fail("Np<=len(p)")
    if not s_r.np < s_r.nc:
        fail("Np<Nc")
    if s_r.nc < 2:
        fail("Nc>=2")
    if s_r.np < 2:
        fail("Np>=2")
    if len(set(s_r.rank)) != len(s_r.rank) or any(not 0 <= i < s_r.nc for i in s_r.rank):
        fail("rank entries")
    if any(b <= a for a, b in zip(s_r.ks, s_r.ks[1:])):
        fail("K increasing")
    if any(not 1 <= k <= len(s_r.rank) for k in s_r.ks):
        fail("K range")
        return report
    if s_r.np < 1:
        return report
    counts = _prefix_counts(s_r.rank, s_r.np, s_r.ks)
    p_expected = [c / k for c, k in zip(counts, s_r.ks)]
    r_expected = [c / s_r.np for c in counts]
    if len(s_r.ps) != len(p_expected) or not all(map(_close, s_r.ps, p_expected)):
        fail("P recomputation")
    if len(s_r.rs) != len(r_expected) or not all(map(_close, s_r.rs, r_expected)):
        fail("R recomputation")
    return report


def validate_graded(s_g: GradedSample, s_r: RankedSample) -> ValidationReport:
    """Run every graded-vs-ranked assertion; returns the failed check names."""
    if s_g.ranked_key != s_r.key:
        raise CrossLinkError(f"graded sample {s_g.key} checked against ranked {s_r.key}")
    report = ValidationReport("graded", s_g.key)
    fail = report.failures.append
    if len(s_g.rank) != s_g.k:
        fail("len(rank)==K")
    if len(s_g.in_k) != s_g.k:
        fail("len(inK)==K")
    if sum(s_g.in_k) > s_g.np:
        fail("sum(inK)<=Np")
    if s_g.k not in s_r.ks:
        fail("K in Sr[K]")
    if s_g.rank != s_r.rank[: s_g.k]:
        fail("rank prefix")
    if s_g.in_k != labels_from_rank(s_g.rank, s_g.np):
        fail("inK consistency")
    if s_g.grade not in (1, 2, 3, 4, 5):
        fail("grade range")
    if s_g.k >= 1 and s_g.np >= 1 and len(s_g.in_k) == s_g.k:
        n_p = sum(s_g.in_k)
        if not _close(s_g.p, n_p / s_g.k):
            fail("P recomputation")
        if not _close(s_g.r, n_p / s_g.np):
            fail("R recomputation")
    return report


def validate_collection(
    query_texts: list[QueryTextsSample] | None = None,
    ranked: list[RankedSample] | None = None,
    graded: list[GradedSample] | None = None,
) -> list[ValidationReport]:
    """Validate whichever parts are given, cross-linking where both sides exist.

    Returns one report per sample (passing samples included). Samples that
    cannot be joined get a ``"cross-link"`` failure instead of raising.
    """
    reports: list[ValidationReport] = []
    q_by_id: dict[str, QueryTextsSample] = {}
    for s_q in query_texts or []:
        report = validate_query_texts(s_q)
        if s_q.id in q_by_id:
            report.failures.append("id unique")
        q_by_id.setdefault(s_q.id, s_q)
        reports.append(report)

    r_by_key: dict[tuple, RankedSample] = {}
    for s_r in ranked or []:
        duplicate = s_r.key in r_by_key
        r_by_key.setdefault(s_r.key, s_r)
        if query_texts is not None:
            s_q = q_by_id.get(s_r.id)
            if s_q is None:
                report = ValidationReport("ranked", s_r.key, ["cross-link"])
            else:
                report = validate_ranked(s_r, s_q)
        else:
            report = ValidationReport("ranked", s_r.key)
        if duplicate:
            report.failures.append("key unique")
        reports.append(report)

    seen: set[tuple] = set()
    for s_g in graded or []:
        if ranked is not None:
            s_r = r_by_key.get(s_g.ranked_key)
            if s_r is None:
                report = ValidationReport("graded", s_g.key, ["cross-link"])
            else:
                report = validate_graded(s_g, s_r)
        else:
            report = ValidationReport("graded", s_g.key)
            if s_g.in_k != labels_from_rank(s_g.rank, s_g.np):
                report.failures.append("inK consistency")
        if s_g.key in seen:
            report.failures.append("key unique")
        seen.add(s_g.key)
        reports.append(report)
    return reports


def subset_counts(ranked: Iterable[RankedSample]) -> dict[tuple[str, str], dict[str, int]]:
    """Per (subset, embedding) sample counts.

    ``n_r`` ranked samples, ``n_g`` graded samples they expand to (one per K),
    and the narrow (K < Np) / wide (K >= Np) split of the graded count.
    """
    table: dict[tuple[str, str], dict[str, int]] = defaultdict(
        lambda: {"n_r": 0, "n_g": 0, "n_gn": 0, "n_gw": 0}
    )
    for s_r in ranked:
        row = table[(subset_of(s_r.id), s_r.e)]
        row["n_r"] += 1
        row["n_g"] += len(s_r.ks)
        narrow = sum(1 for k in s_r.ks if k < s_r.np)
        row["n_gn"] += narrow
        row["n_gw"] += len(s_r.ks) - narrow
    return dict(sorted(table.items()))
