"""Transaction CSV and flat key-value config files."""

from __future__ import annotations

import csv
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .features import Transaction, TransactionLog

CSV_HEADER = ("subject_id", "process_id", "t", "value", "quantity")


class ParseError(ValueError):
    pass


def read_transactions(path) -> TransactionLog:
    """Parse ``subject_id,process_id,t,value,quantity`` rows.

    Errors name the 1-based line number of the offending row.
    """
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ParseError(f"{path}: line 1: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"{path}: line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            subject, process, t, value, qty = (c.strip() for c in row)
            try:
                rec = Transaction(subject, process, int(t), float(Decimal(value)), int(qty))
            except (ValueError, InvalidOperation) as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            records.append(rec)
    return TransactionLog(records)


def write_transactions(path, log: TransactionLog):
    rows = sorted(log.records, key=lambda r: (r.subject, r.process, r.t))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([r.subject, r.process, r.t, f"{r.value:.2f}", r.quantity])


def write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}: line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError(f"{path}: line {lineno}: empty key")
        out[key] = value
    return out
