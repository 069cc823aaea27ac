from __future__ import annotations

from typing import TYPE_CHECKING, Any

from tabulate import tabulate

from unickit.metrics_calculation import acc_key_label

if TYPE_CHECKING:
    from unickit.metrics_calculation import MetricsReport

FLOAT_FORMAT = ".4f"


def generate_report_table(report: MetricsReport) -> str:
    """Acc(K/N) rows per threshold, followed by the top-1 averages."""
    thresholds = sorted({eps for _, _, eps in report.acc})
    pairs = sorted({(k, n) for k, n, _ in report.acc})
    headers = ["Acc", *(f"eps={eps:g}" for eps in thresholds)]
    rows: list[list[Any]] = [
        [f"{k}/{n}", *(report.acc[(k, n, eps)] for eps in thresholds)]
        for k, n in pairs
    ]
    acc_table = tabulate(
        rows,
        headers=headers,
        tablefmt="pretty",
        floatfmt=FLOAT_FORMAT,
    )
    summary = tabulate(
        [
            ["images", report.image_count],
            ["mean IoU (top-1)", f"{report.mean_iou:{FLOAT_FORMAT}}"],
            ["mean Disp (top-1)", f"{report.mean_disp:{FLOAT_FORMAT}}"],
        ],
        tablefmt="pretty",
    )
    lines = [acc_table, summary]
    if report.short_gt_images:
        lines.append(
            "images with fewer annotated views than the largest N: "
            + ", ".join(report.short_gt_images),
        )
    return "\n".join(lines)


def report_labels(report: MetricsReport) -> dict[str, float]:
    """Acc values keyed the way report files key them."""
    return {
        acc_key_label(key): value for key, value in sorted(report.acc.items())
    }


def generate_match_table(images: list[dict[str, Any]]) -> str:
    headers = ["Image", "Matched", "Total Cost", "Reg", "GIoU", "Focal"]
    rows = [
        [
            image["id"],
            image["matched_views"],
            image["total_cost"],
            image["loss"]["reg"],
            image["loss"]["giou"],
            image["loss"]["focal"],
        ]
        for image in images
    ]
    return tabulate(
        rows,
        headers=headers,
        tablefmt="pretty",
        floatfmt=FLOAT_FORMAT,
    )
