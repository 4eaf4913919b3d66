"""Verification reports and their serialization.

A report is a list of :class:`CaseResult` rows plus metadata.  JSON is the
full record (schema ``hsm-report/1``); CSV flattens one case per row in the
fixed column order :data:`CSV_COLUMNS`; text is a human summary.  All three
are written atomically through a temporary file in the target directory.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

SCHEMA = "hsm-report/1"
STATUSES = ("pass", "fail", "error")
CSV_COLUMNS = (
    "suite", "case", "anchor", "status", "expected", "got",
    "tolerance", "margin", "error_budget", "parameters",
)


@dataclass
class CaseResult:
    """One checked statement.

    ``margin`` is signed: positive means the check holds with room to spare
    (for equalities, ``tolerance - |got - expected|``; for strict
    inequalities, the gap minus the quadrature error budget).
    """

    name: str
    anchor: str
    status: str
    expected: object = None
    got: object = None
    tolerance: float | None = None
    margin: float | None = None
    error_budget: float | None = None
    parameters: dict = field(default_factory=dict)
    message: str = ""

    def __post_init__(self):
        if not self.anchor:
            raise ValueError(f"case {self.name!r} needs an anchor or the tag 'plumbing'")
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}, got {self.status!r}")

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass
class VerificationReport:
    suite: str
    anchor: str
    cases: list[CaseResult] = field(default_factory=list)
    environment: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)

    def add(self, case: CaseResult) -> CaseResult:
        self.cases.append(case)
        return case

    def extend(self, other: "VerificationReport"):
        self.cases.extend(other.cases)
        self.artifacts.update(other.artifacts)

    @property
    def summary(self) -> dict:
        counts = {s: 0 for s in STATUSES}
        for c in self.cases:
            counts[c.status] += 1
        counts["total"] = len(self.cases)
        return counts

    @property
    def exit_code(self) -> int:
        """0 if every case passed, 3 if any errored, else 2."""
        s = self.summary
        if s["error"]:
            return 3
        if s["fail"]:
            return 2
        return 0

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "suite": self.suite,
            "anchor": self.anchor,
            "summary": self.summary,
            "config": self.config,
            "environment": self.environment,
            "artifacts": self.artifacts,
            "cases": [_jsonable(asdict(c)) for c in self.cases],
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }


def _jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return str(obj)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (dict, list, tuple)):
        return json.dumps(_jsonable(v), sort_keys=True)
    return str(_jsonable(v))


def render_json(report: VerificationReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def render_csv(report: VerificationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in report.cases:
        w.writerow([report.suite, c.name, c.anchor, c.status, _cell(c.expected), _cell(c.got),
                    _cell(c.tolerance), _cell(c.margin), _cell(c.error_budget), _cell(c.parameters)])
    return buf.getvalue()


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return "-" if v is None else str(v)


def render_text(report: VerificationReport) -> str:
    s = report.summary
    lines = [f"suite {report.suite}: {s['pass']} pass, {s['fail']} fail, {s['error']} error "
             f"({s['total']} cases)"]
    for c in report.cases:
        line = (f"  [{c.status.upper():5s}] {c.name}: got {_short(c.got)}, expected {_short(c.expected)}"
                f", tol {_short(c.tolerance)}")
        if c.margin is not None or c.error_budget is not None:
            # margin and quadrature budget side by side, so a violated
            # inequality can be told apart from a tolerance that is too tight
            line += f", margin {_short(c.margin)} vs budget {_short(c.error_budget)}"
        if c.message:
            line += f" ({c.message})"
        lines.append(line)
    for k, v in sorted(report.artifacts.items()):
        lines.append(f"  artifact {k}: {v}")
    return "\n".join(lines) + "\n"


RENDERERS = {"json": render_json, "csv": render_csv, "text": render_text}


def write_atomic(path: str, text: str):
    """Write ``text`` to ``path`` via a temp file and rename."""
    path = os.path.abspath(path)
    folder = os.path.dirname(path)
    try:
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=folder)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def emit_report(report: VerificationReport, format: str = "json", path: str | None = None) -> str:
    """Render ``report`` and write it to ``path`` (if given).  Returns the text."""
    if format not in RENDERERS:
        raise ValueError(f"format must be one of {sorted(RENDERERS)}, got {format!r}")
    text = RENDERERS[format](report)
    if path is not None:
        write_atomic(path, text)
    return text
