"""CSV tables and SVG plots for a comparison report."""
from pathlib import Path
from typing import Dict, List, Optional, Union
import logging

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from models import SPLIT_LABELS, EvalReport, ModelEvaluation  # noqa: E402

logger = logging.getLogger(__name__)

FIGURE_NAMES = ("fig5_series", "fig6_comparison", "fig7_bel_scatter", "fig8_mlp_scatter")
SPLIT_COLORS = {"train": "tab:blue", "validation": "tab:orange", "test": "tab:green"}
FLOAT_FORMAT = "%.6f"

plt.rcParams["svg.hashsalt"] = "oz-sentinel"


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")


def _save_svg(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _usable(report: EvalReport, kind: str) -> Optional[ModelEvaluation]:
    try:
        evaluation = report.evaluation(kind)
    except KeyError:
        return None
    return None if evaluation.failed or not evaluation.predictions else evaluation


def series_table(report: EvalReport) -> pd.DataFrame:
    """One row per target date: observed o3 and every model's prediction."""
    frame: Optional[pd.DataFrame] = None
    for evaluation in report.models:
        if evaluation.failed or not evaluation.predictions:
            continue
        part = pd.DataFrame(
            [(p.date.isoformat(), p.split, p.target, p.predicted) for p in evaluation.predictions],
            columns=["date", "split", "target", evaluation.kind],
        )
        frame = part if frame is None else frame.merge(part, on=["date", "split", "target"], how="outer")
    if frame is None:
        return pd.DataFrame(columns=["date", "split", "target"])
    return frame.sort_values("date").reset_index(drop=True)


def comparison_table(report: EvalReport) -> pd.DataFrame:
    rows = []
    for evaluation in report.models:
        for split in SPLIT_LABELS:
            metrics = evaluation.splits.get(split)
            rows.append({
                "model": evaluation.kind,
                "split": split,
                "count": metrics.count if metrics else 0,
                "cor": metrics.cor if metrics else None,
                "rmse": metrics.rmse if metrics else None,
                "mae": metrics.mae if metrics else None,
                "failed": evaluation.failed,
            })
    return pd.DataFrame(rows, columns=["model", "split", "count", "cor", "rmse", "mae", "failed"])


def scatter_table(evaluation: Optional[ModelEvaluation]) -> pd.DataFrame:
    columns = ["date", "split", "target", "predicted"]
    if evaluation is None:
        return pd.DataFrame(columns=columns)
    return pd.DataFrame(
        [(p.date.isoformat(), p.split, p.target, p.predicted) for p in evaluation.predictions], columns=columns)


def _plot_series(frame: pd.DataFrame, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(10, 4))
    x = pd.to_datetime(frame["date"]) if len(frame) else []
    if len(frame):
        ax.plot(x, frame["target"], color="black", lw=0.8, label="observed")
        for kind in [c for c in frame.columns if c not in ("date", "split", "target")]:
            ax.plot(x, frame[kind], lw=0.6, alpha=0.8, label=kind)
        ax.legend(loc="upper right")
    ax.set_xlabel("date")
    ax.set_ylabel("O3")
    ax.set_title("Observed and predicted O3")
    ax.grid(axis="both", color="grey", linestyle="--", lw=0.5, alpha=0.5)
    _save_svg(fig, path)


def _plot_comparison(frame: pd.DataFrame, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    kinds = list(dict.fromkeys(frame["model"]))
    width = 0.8 / len(SPLIT_LABELS)
    for offset, split in enumerate(SPLIT_LABELS):
        rows = frame[frame["split"] == split].set_index("model").reindex(kinds)
        heights = rows["cor"].astype(float).fillna(0.0)
        ax.bar([i + (offset - 1) * width for i in range(len(kinds))], heights, width,
               color=SPLIT_COLORS[split], label=split)
    ax.set_xticks(range(len(kinds)))
    ax.set_xticklabels(kinds)
    ax.set_ylim(-1.0, 1.0)
    ax.set_ylabel("COR")
    ax.set_title("Correlation by model and split")
    ax.legend(loc="lower right")
    _save_svg(fig, path)


def _plot_scatter(frame: pd.DataFrame, title: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    for split in SPLIT_LABELS:
        rows = frame[frame["split"] == split]
        if len(rows):
            ax.scatter(rows["target"], rows["predicted"], s=4, color=SPLIT_COLORS[split], label=split)
    if len(frame):
        lo = float(min(frame["target"].min(), frame["predicted"].min()))
        hi = float(max(frame["target"].max(), frame["predicted"].max()))
        ax.plot([lo, hi], [lo, hi], color="grey", lw=0.8, linestyle="--")
        ax.legend(loc="upper left")
    ax.set_xlabel("observed O3")
    ax.set_ylabel("predicted O3")
    ax.set_title(title)
    _save_svg(fig, path)


def figure_files() -> List[str]:
    """File names `write_figures` produces, in write order."""
    return [f"{name}.{ext}" for name in FIGURE_NAMES for ext in ("csv", "svg")]


def write_figures(report: EvalReport, out_dir: Union[str, Path]) -> Dict[str, List[Path]]:
    """Write `<name>.csv` and `<name>.svg` for the four comparison figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series, comparison, bel_scatter, mlp_scatter = FIGURE_NAMES
    tables = {
        series: series_table(report),
        comparison: comparison_table(report),
        bel_scatter: scatter_table(_usable(report, "bel")),
        mlp_scatter: scatter_table(_usable(report, "mlp")),
    }
    written: Dict[str, List[Path]] = {}
    for name, frame in tables.items():
        csv_path, svg_path = out_dir / f"{name}.csv", out_dir / f"{name}.svg"
        _write_csv(frame, csv_path)
        if name == series:
            _plot_series(frame, svg_path)
        elif name == comparison:
            _plot_comparison(frame, svg_path)
        else:
            _plot_scatter(frame, "BEL" if name == bel_scatter else "MLP", svg_path)
        written[name] = [csv_path, svg_path]
    logger.info(f"Wrote {len(written)} figures to {out_dir}")
    return written
