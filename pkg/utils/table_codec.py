"""Serialization of sweep tables to CSV and JSON."""
import csv
import io
import json
from typing import Any, Dict, List, Optional

from exceptions import ValidationError
from logger import setup_logger
from models import EMPIRICAL_COLUMNS, THEORY_COLUMNS, AsymptoticConfig, SweepRow, SweepTable

logger = setup_logger(__name__)

HEADER_PREFIX = "# "
_INT_COLUMNS = {"n_seeds"}


class TableCodec:
    """
    Reads and writes SweepTables.

    CSV layout: one `# {json}` header line carrying config and provenance,
    a column-name line, then one line per row. Floats use 17 significant
    digits so parse -> dump reproduces the bytes.
    """

    @staticmethod
    def format_value(value: Any) -> str:
        if value is None:
            return ""
        if isinstance(value, int) and not isinstance(value, bool):
            return str(value)
        return format(float(value), ".17g")

    @staticmethod
    def header(table: SweepTable) -> Dict[str, Any]:
        return {
            "schema_version": table.schema_version,
            "label": table.label,
            "axis_name": table.axis_name,
            "config": table.config.to_dict(),
            "provenance": table.provenance,
            "skipped": list(table.skipped),
            "columns": list(table.columns),
        }

    @staticmethod
    def dumps(table: SweepTable) -> str:
        """
        Serialize one table to CSV text.

        Args:
            table: Table to serialize

        Returns:
            CSV text ending in a newline
        """
        buffer = io.StringIO()
        header = json.dumps(TableCodec.header(table), sort_keys=True, separators=(",", ":"))
        buffer.write(HEADER_PREFIX + header + "\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([TableCodec.format_value(getattr(row, c)) for c in table.columns])
        return buffer.getvalue()

    @staticmethod
    def dumps_many(tables: List[SweepTable]) -> str:
        return "".join(TableCodec.dumps(t) for t in tables)

    @staticmethod
    def loads(text: str) -> SweepTable:
        """
        Parse CSV text produced by dumps.

        Raises:
            ValidationError: If the header or columns are malformed
        """
        tables = TableCodec.loads_many(text)
        if len(tables) != 1:
            raise ValidationError(f"expected one table, found {len(tables)}")
        return tables[0]

    @staticmethod
    def loads_many(text: str) -> List[SweepTable]:
        """Parse a concatenation of CSV tables, split at header lines."""
        blocks: List[List[str]] = []
        for line in text.splitlines():
            if line.startswith(HEADER_PREFIX.strip()):
                blocks.append([line])
            elif line.strip():
                if not blocks:
                    raise ValidationError("table text must start with a header line")
                blocks[-1].append(line)
        return [TableCodec._parse_block(block) for block in blocks]

    @staticmethod
    def _parse_block(lines: List[str]) -> SweepTable:
        try:
            header = json.loads(lines[0][1:].strip())
        except json.JSONDecodeError as e:
            raise ValidationError(f"malformed table header: {e}")

        reader = csv.reader(lines[1:])
        try:
            columns = next(reader)
        except StopIteration:
            raise ValidationError("table has no column line")
        if columns != header.get("columns"):
            raise ValidationError(f"column line {columns} does not match header {header.get('columns')}")
        if tuple(columns) not in (THEORY_COLUMNS, THEORY_COLUMNS + EMPIRICAL_COLUMNS):
            raise ValidationError(f"unknown column layout {columns}")

        rows = [SweepRow(**TableCodec._parse_row(columns, record)) for record in reader]
        return TableCodec._build(header, rows)

    @staticmethod
    def _parse_row(columns: List[str], record: List[str]) -> Dict[str, Optional[float]]:
        if len(record) != len(columns):
            raise ValidationError(f"row has {len(record)} fields, expected {len(columns)}")
        parsed: Dict[str, Optional[float]] = {}
        for name, raw in zip(columns, record):
            if raw == "":
                parsed[name] = None
            elif name in _INT_COLUMNS:
                parsed[name] = int(raw)
            else:
                parsed[name] = float(raw)
        return parsed

    @staticmethod
    def _build(header: Dict[str, Any], rows: List[SweepRow]) -> SweepTable:
        return SweepTable(
            schema_version=header["schema_version"],
            config=AsymptoticConfig.from_dict(header["config"]),
            axis_name=header["axis_name"],
            rows=rows,
            provenance=header["provenance"],
            skipped=list(header.get("skipped", [])),
            label=header.get("label", ""),
        )

    @staticmethod
    def to_json(tables: List[SweepTable]) -> str:
        """The same tables as a single JSON document."""
        document = {
            "tables": [
                dict(
                    TableCodec.header(t),
                    rows=[{c: getattr(r, c) for c in t.columns} for r in t.rows],
                )
                for t in tables
            ]
        }
        return json.dumps(document, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> List[SweepTable]:
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"malformed JSON table document: {e}")
        tables = []
        for entry in document.get("tables", []):
            rows = [SweepRow(**row) for row in entry["rows"]]
            tables.append(TableCodec._build(entry, rows))
        return tables
