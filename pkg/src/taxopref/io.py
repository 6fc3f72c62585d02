"""Schema configuration files and dataset CSV files."""

from __future__ import annotations

import csv
import os
from typing import TextIO

from .errors import InputError, MalformedLine, UnknownValue
from .formula import Relation, Schema
from .taxonomy import check_identifier, load_taxonomy


def load_schema(path: str) -> Schema:
    """Read ``attribute = taxonomy-path`` lines; relative paths resolve next to the file."""
    base = os.path.dirname(os.path.abspath(path))
    bindings = []
    cache = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read schema: {e.strerror}", source=path) from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            attr, sep, target = line.partition("=")
            attr, target = attr.strip(), target.strip()
            if not sep or not attr or not target:
                raise MalformedLine("expected 'attribute = taxonomy-file'", source=path, line=lineno)
            if not check_identifier(attr):
                raise MalformedLine(f"invalid attribute name {attr!r}", source=path, line=lineno)
            if any(a == attr for a, _ in bindings):
                raise MalformedLine(f"attribute {attr!r} declared twice", source=path, line=lineno)
            tpath = target if os.path.isabs(target) else os.path.join(base, target)
            if tpath not in cache:
                try:
                    cache[tpath] = load_taxonomy(tpath, name=os.path.basename(tpath))
                except OSError as e:
                    raise InputError(f"cannot read taxonomy {target!r}: {e.strerror}", source=path, line=lineno) from None
            bindings.append((attr, cache[tpath]))
    if not bindings:
        raise MalformedLine("schema declares no attributes", source=path)
    return Schema(bindings)


def read_relation(source: TextIO | str, schema: Schema, name: str = "") -> Relation:
    """Read a CSV whose header names schema attributes (any column order)."""
    if isinstance(source, str):
        try:
            with open(source, encoding="utf-8", newline="") as fh:
                return read_relation(fh, schema, name or source)
        except OSError as e:
            raise InputError(f"cannot read data: {e.strerror}", source=source) from None
    label = name or getattr(source, "name", "") or None
    reader = csv.reader(source)
    header = None
    rows = []
    for lineno, rec in enumerate(reader, 1):
        if not rec or all(not c.strip() for c in rec):
            continue
        rec = [c.strip() for c in rec]
        if header is None:
            header = rec
            missing = [a for a in schema.attributes if a not in header]
            extra = [h for h in header if h not in schema.attributes]
            if missing or extra or len(set(header)) != len(header):
                raise MalformedLine(
                    f"header {header} does not match schema attributes {list(schema.attributes)}",
                    source=label, line=lineno)
            perm = [header.index(a) for a in schema.attributes]
            continue
        if len(rec) != len(header):
            raise MalformedLine(f"expected {len(header)} fields, got {len(rec)}", source=label, line=lineno)
        row = tuple(rec[i] for i in perm)
        for a, v, tax in zip(schema.attributes, row, schema.taxonomies):
            if v not in tax:
                raise UnknownValue(f"value {v!r} is not in the taxonomy of {a}", source=label, line=lineno)
        rows.append(row)
    return Relation(schema, rows)


def write_relation(rel: Relation, out: TextIO, indices=None) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(rel.schema.attributes)
    for i in (range(len(rel)) if indices is None else indices):
        w.writerow(rel.rows[i])
