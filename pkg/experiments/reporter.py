"""
Artifact writer for experiment runs.

Every table goes out as CSV with a header row plus a .meta.json sidecar;
structured results as canonical JSON; each run closes with a Markdown summary.
Nothing time-dependent is written, so identical configs give identical bytes.
"""

from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

import structlog
from jinja2 import Template

from services.serialization import (
    TRACE_REPORT_COLUMNS,
    config_hash,
    digits_for,
    to_jsonable,
    trace_report_json,
    trace_report_rows,
    write_csv,
    write_json,
    write_sidecar,
    write_text,
)
from services.verify import TraceReport

from .models import AcceptanceSummary, ExperimentConfig, RunResult

logger = structlog.get_logger()

RUN_SUMMARY_TEMPLATE = """# rrlab {{ subcommand }}

| field | value |
|---|---|
| status | {{ "PASSED" if passed else "FAILED" }} |
| precision bits | {{ bits }} |
| seed | {{ seed }} |
| config hash | `{{ config_hash[:16] }}` |

{% if reports %}## Bound checks

| experiment | records | failures | worst margin |
|---|---|---|---|
{% for r in reports %}| {{ r.experiment }} | {{ r.records }} | {{ r.failures|length }} | {{ r.worst_margin or "-" }} |
{% endfor %}{% endif %}
{% if summary %}## Summary

{% for key, value in summary|dictsort %}- **{{ key }}**: {{ value }}
{% endfor %}{% endif %}
{% if errors %}## Errors

{% for error in errors %}- {{ error }}
{% endfor %}{% endif %}
## Artifacts

{% for name, path in artifacts|dictsort %}- {{ name }}: `{{ path }}`
{% endfor %}"""

ACCEPTANCE_TEMPLATE = """# rrlab acceptance ({{ profile }})

Overall: **{{ "PASSED" if passed else "FAILED" }}**

| # | criterion | result | detail |
|---|---|---|---|
{% for c in criteria %}| {{ c.number }} | {{ c.title }} | {{ "pass" if c.passed else "FAIL" }} | {{ c.detail }} |
{% endfor %}"""


class ArtifactWriter:
    """Writes the files of one experiment run under <output_dir>/<subcommand>/"""

    def __init__(self, config: ExperimentConfig, root: Optional[Path] = None):
        self.config = config
        # where the files go is not part of what was computed
        self.config_data = config.model_dump(mode="json", exclude={"output_dir"})
        self.bits = config.precision_bits
        self.digits = digits_for(self.bits)
        self.directory = (root or Path(config.output_dir)) / config.subcommand.value
        self.directory.mkdir(parents=True, exist_ok=True)

    def table(self, name: str, columns: Sequence[str], rows: Iterable[Sequence[Any]],
              extra: Optional[Dict[str, Any]] = None) -> Path:
        path = write_csv(self.directory / f"{name}.csv", columns, rows)
        write_sidecar(path, self.config_data, self.bits, columns, extra)
        return path

    def document(self, name: str, data: Any) -> Path:
        return write_json(self.directory / f"{name}.json", to_jsonable(data, self.digits))

    def text(self, name: str, text: str) -> Path:
        return write_text(self.directory / name, text)

    def report(self, report: TraceReport, name: Optional[str] = None) -> Dict[str, Path]:
        name = name or report.experiment
        csv_path = self.table(name, TRACE_REPORT_COLUMNS, trace_report_rows(report, self.digits),
                              extra={"experiment": report.experiment})
        json_path = write_json(self.directory / f"{name}.json", trace_report_json(report, self.digits))
        if not report.all_pass:
            logger.warning("report has failed bound checks", experiment=report.experiment,
                           failures=len(report.failures))
        return {f"{name}.csv": csv_path, f"{name}.json": json_path}

    def summary(self, result: RunResult) -> Path:
        reports = [trace_report_json(report, 12) for report in result.reports]
        rendered = Template(RUN_SUMMARY_TEMPLATE).render(
            subcommand=self.config.subcommand.value,
            passed=result.passed,
            bits=self.bits,
            seed=self.config.seed,
            config_hash=config_hash(self.config_data),
            reports=reports,
            summary={key: str(value) for key, value in result.summary.items()},
            errors=result.errors,
            artifacts={name: path.name for name, path in result.artifacts.items()},
        )
        return write_text(self.directory / "SUMMARY.md", rendered)


def write_acceptance_summary(summary: AcceptanceSummary, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    data = {
        "profile": summary.profile.value,
        "passed": summary.passed,
        "criteria": [
            {"number": c.number, "title": c.title, "passed": c.passed, "detail": c.detail}
            for c in summary.criteria
        ],
    }
    write_json(directory / "acceptance.json", data)
    rendered = Template(ACCEPTANCE_TEMPLATE).render(
        profile=summary.profile.value, passed=summary.passed, criteria=summary.criteria
    )
    return write_text(directory / "ACCEPTANCE.md", rendered)
