import csv
import io
import json
import math
import os

import numpy as np
from terminaltables import AsciiTable

from .errors import ReportError


def format_float(value):
    """Shortest round-tripping text of a float; ``nan``/``inf`` spelled out."""
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return 'nan'
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return repr(value)


def table_writing(header, rows, title=None):
    """Render rows as an ASCII table for the console."""
    data = [list(header)]
    for row in rows:
        data.append([format_float(v) if not isinstance(v, str) else v for v in row])
    table = AsciiTable(data, title)
    return table.table


def csv_writing(path, header, rows):
    """Write a CSV table: comma separator, header row, LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([v if isinstance(v, str) else format_float(v) for v in row])
    _write_text(path, buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value) or math.isinf(value):
            return format_float(value)
        return value
    return obj


def json_writing(path, payload):
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2) + '\n'
    _write_text(path, text)


def _write_text(path, text):
    directory = os.path.dirname(path)
    try:
        if directory and not os.path.isdir(directory):
            os.makedirs(directory)
        with open(path, 'w', newline='\n') as f:
            f.write(text)
    except OSError as exc:
        raise ReportError('cannot write {}: {}'.format(path, exc))
