"""
Report Renderer
Human-readable text reports rendered from the pydantic report models through
Jinja2 templates.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from ..models.schemas import CheckReport, ComparisonReport, ReductionReport
from ..utils import format_timestamp

logger = logging.getLogger(__name__)


def _sci(value: Optional[float], digits: int = 2) -> str:
    if value is None:
        return "n/a"
    return f"{value:.{digits}e}"


def _blocks(blocks) -> str:
    """Run-length summary such as '4 x (2,1)'."""
    if not blocks:
        return "none"
    groups = []
    for block in blocks:
        block = tuple(block)
        if groups and groups[-1][0] == block:
            groups[-1][1] += 1
        else:
            groups.append([block, 1])
    return ", ".join(f"{count} x ({dF},{dG})" for (dF, dG), count in groups)


class ReportRenderer:
    """Text reports for the reduce, compare and check workflows."""

    def __init__(self, templates_dir: Optional[str] = None):
        self.templates_dir = Path(templates_dir) if templates_dir else Path(__file__).parent.parent / "templates"
        self.jinja_env = Environment(
            loader=FileSystemLoader(str(self.templates_dir)),
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
            undefined=StrictUndefined
        )
        self.jinja_env.filters["sci"] = _sci
        self.jinja_env.filters["blocks"] = _blocks
        self._rendered = 0
        logger.debug(f"Report renderer using templates in {self.templates_dir}")

    def render(self, template_name: str, **context: Any) -> str:
        template = self.jinja_env.get_template(template_name)
        self._rendered += 1
        return template.render(generated_at=format_timestamp(), **context)

    def render_reduction(self, report: ReductionReport) -> str:
        failed = [c for c in report.certificates if not c.passed]
        return self.render("reduce_report.txt.j2", report=report, failed=failed)

    def render_comparison(self, report: ComparisonReport, max_rows: int = 10) -> str:
        worst = sorted(report.entries, key=lambda e: e.max_deviation, reverse=True)[:max_rows]
        return self.render("compare_report.txt.j2", report=report, worst=worst)

    def render_check(self, report: CheckReport) -> str:
        return self.render("check_report.txt.j2", report=report)

    def get_service_stats(self) -> Dict[str, Any]:
        """Get service statistics."""
        return {
            "service": "report_renderer",
            "stats": {
                "reports_rendered": self._rendered,
                "templates_directory": str(self.templates_dir),
                "templates_available": len(list(self.templates_dir.glob("*.j2"))) if self.templates_dir.exists() else 0
            }
        }


# Service instance
_report_renderer = None


def get_report_renderer() -> ReportRenderer:
    """Get or create the report renderer instance."""
    global _report_renderer
    if _report_renderer is None:
        _report_renderer = ReportRenderer()
    return _report_renderer
