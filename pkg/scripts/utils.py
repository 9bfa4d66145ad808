import csv
import json
import math
import sys

SIGNIFICANT_DIGITS = 12


def fmt(value):
    """Cell text: floats with 12 significant digits, None as blank."""
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.{SIGNIFICANT_DIGITS}g}"
    return str(value)


def round_value(value):
    """JSON value with floats rounded to 12 significant digits (nested lists and dicts too)."""
    if isinstance(value, float):
        return None if math.isnan(value) else float(fmt(value))
    if isinstance(value, dict):
        return {k: round_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_value(v) for v in value]
    return value


def _open(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def write_csv(rows, path=None, columns=None):
    rows = list(rows)
    columns = columns or (list(rows[0]) if rows else [])
    handle, close = _open(path)
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row.get(c)) for c in columns])
    finally:
        if close:
            handle.close()


def write_json(records, path=None, config=None):
    """One JSON array; each record embeds the resolved config when given."""
    records = [dict(record, config=config) if config is not None else dict(record) for record in records]
    handle, close = _open(path)
    try:
        json.dump(round_value(records), handle, indent=2)
        handle.write("\n")
    finally:
        if close:
            handle.close()


def write_table(rows, path=None, fmt_name="csv", config=None, columns=None):
    if fmt_name == "json":
        write_json(rows, path, config)
    else:
        write_csv(rows, path, columns)
