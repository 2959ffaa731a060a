# -*- coding: utf-8 -*-
"""SVG plots of evaluation reports."""
import os
import matplotlib
from matplotlib.figure import Figure
import popnet.settings as settings
from popnet.exceptions import ValidationError
from popnet.metrics import MetricsReport


def plot_reports(reports, out, labels=None):
    """Draw one line per report through its four mean measures and save the figure as SVG.

    Parameters
    ----------
    reports : list
        ``MetricsReport`` objects or paths of report files.
    out : str
        SVG file to write.
    labels : list
        Legend labels (Default value = None, the report file stems or ``report <i>``)

    Returns
    -------
    Figure
        The drawn figure. The SVG bytes only depend on the reports and labels.

    Raises
    ------
    ValidationError
        If no report is given.
    DataError
        If a report file is malformed (the message names its path).
    """
    reports = list(reports)
    if not reports:
        raise ValidationError("At least one report is needed to plot")
    if labels is None:
        labels = [os.path.splitext(os.path.basename(str(r)))[0] if not isinstance(r, MetricsReport)
                  else "report %d" % i for i, r in enumerate(reports)]
    reports = [r if isinstance(r, MetricsReport) else MetricsReport.read(r) for r in reports]
    metric_names = list(settings.METRIC_NAMES)
    figure = Figure(figsize=(6.0, 4.0))
    axes = figure.add_subplot(1, 1, 1)
    for report, label in zip(reports, labels):
        axes.plot(range(len(metric_names)), [report.mean.get(name, float("nan")) for name in metric_names],
                  marker="o", label=label)
    axes.set_xticks(range(len(metric_names)))
    axes.set_xticklabels(metric_names)
    axes.set_ylim(0.0, 1.0)
    axes.set_ylabel("dataset mean")
    axes.grid(True, alpha=0.3)
    axes.legend(loc="best")
    os.makedirs(os.path.dirname(os.path.abspath(str(out))), exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "popnet", "svg.fonttype": "none"}):
        figure.savefig(str(out), format="svg", metadata={"Date": None})
    return figure
