"""Shared corpus builders for the test suite."""

from __future__ import annotations

import io
import json

import pytest

from fieldimpact.corpus import Corpus, parse_corpus


def jsonl(pubs: list[dict]) -> str:
    return "".join(json.dumps(p) + "\n" for p in pubs)


def journals_csv(rows: list[tuple]) -> str:
    out = "journal_id,name,impact_factor,fields\n"
    for jid, name, impact, fields in rows:
        out += f"{jid},{name},{impact},{';'.join(fields)}\n"
    return out


def orgs_csv(rows: list[tuple]) -> str:
    out = "org_id,name,org_type,parent_id\n"
    for oid, name, org_type, parent in rows:
        out += f"{oid},{name},{org_type},{parent or ''}\n"
    return out


def scheme_csv(mapping: dict[str, str]) -> str:
    return "field_id,discipline_id\n" + "".join(f"{f},{d}\n" for f, d in mapping.items())


def mk_corpus(
    pubs: list[dict],
    journals: list[tuple] | None = None,
    orgs: list[tuple] | None = None,
    scheme: dict[str, str] | None = None,
    census_date=None,
) -> Corpus:
    """Build a validated corpus from in-memory pieces.

    Defaults derive a permissive journal registry (IF 1.0) and field
    scheme (one discipline) from the publications themselves.
    """
    if scheme is None:
        fields = sorted({f for p in pubs for f in p["fields"]})
        scheme = {f: "Physics" for f in fields}
    if journals is None:
        jfields: dict[str, set] = {}
        for p in pubs:
            jfields.setdefault(p["journal"], set()).update(p["fields"])
        journals = [(j, f"Journal {j}", 1.0, sorted(fs)) for j, fs in sorted(jfields.items())]
    if orgs is None:
        orgs = [("ORG_A", "Org Alpha", "U", None)]
    return parse_corpus(
        io.StringIO(jsonl(pubs)),
        io.StringIO(journals_csv(journals)),
        io.StringIO(orgs_csv(orgs)),
        io.StringIO(scheme_csv(scheme)),
        census_date=census_date,
    )


def pub(
    id: str,
    year: int = 2003,
    doc_type: str = "article",
    journal: str = "J1",
    fields: list[str] | None = None,
    citations: int = 0,
    addresses: list[str] | None = None,
    **extra,
) -> dict:
    record = {
        "id": id,
        "year": year,
        "doc_type": doc_type,
        "journal": journal,
        "fields": fields or ["F1"],
        "citations": citations,
        "addresses": addresses or [],
    }
    record.update(extra)
    return record


@pytest.fixture
def tiny_corpus_files(tmp_path):
    """The three-record fixture used by CLI-facing tests."""
    pubs = [
        pub("p1", citations=0, addresses=["Univ. Alpha, Dept of X"]),
        pub("p2", citations=2, addresses=["Universita Alpha"]),
        pub("p3", doc_type="review", journal="J2", fields=["F1", "F2"], citations=7,
            addresses=["Inst. Beta", "univ alpha"]),
    ]
    (tmp_path / "p.jsonl").write_text(jsonl(pubs), encoding="utf-8")
    (tmp_path / "j.csv").write_text(
        journals_csv([("J1", "Journal One", 2.5, ["F1"]), ("J2", "Journal Two", 1.0, ["F1", "F2"])]),
        encoding="utf-8",
    )
    (tmp_path / "o.csv").write_text(
        orgs_csv([("A", "University Alpha", "U", None), ("B", "Institute Beta", "RI", None)]),
        encoding="utf-8",
    )
    (tmp_path / "f.csv").write_text(
        scheme_csv({"F1": "Physics", "F2": "Biology"}), encoding="utf-8"
    )
    (tmp_path / "rules.tsv").write_text(
        "univ alpha\tA\nuniversita alpha\tA\ninst beta\tB\n", encoding="utf-8"
    )
    return {
        "pubs": tmp_path / "p.jsonl",
        "journals": tmp_path / "j.csv",
        "orgs": tmp_path / "o.csv",
        "fields": tmp_path / "f.csv",
        "rules": tmp_path / "rules.tsv",
        "dir": tmp_path,
    }
