"""Verification report containers and deterministic tabular output."""

from dataclasses import dataclass, field
import csv
import io


@dataclass
class VerificationReport:
    """Per-check numeric evidence: fitted constants, per-sample rows and a
    pass/fail verdict against the configured tolerances."""

    name: str
    passed: bool = True
    fitted: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    notes: str = ""

    def summary_line(self):
        verdict = "PASS" if self.passed else "FAIL"
        fits = " ".join(f"{k}={_fmt(v)}" for k, v in sorted(self.fitted.items()))
        tail = f" ({self.notes})" if self.notes else ""
        return f"[{verdict}] {self.name}: {fits}{tail}".rstrip()


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".10g")
    if isinstance(v, (tuple, list)):
        return "/".join(_fmt(x) for x in v)
    return str(v)


def rows_to_csv(rows, columns=None):
    """Render a list of dict rows as CSV text (period decimals, no locale)."""
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c, "")) for c in columns])
    return buf.getvalue()


def write_report_csv(report, path, columns=None):
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(report.rows, columns))
