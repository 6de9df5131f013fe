"""File emission: CSV/JSON score tables and dependency-free SVG charts.

All writers are atomic (write to a temp file, then rename) and
deterministic: rerunning with identical inputs reproduces identical
bytes.  Charts carry no timestamps.
"""

from __future__ import annotations

import io
import json
import os

BAR_HEIGHT = 24
CHART_WIDTH = 800


def _fmt(value: float) -> str:
    return repr(float(value))


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def scores_csv(rows: list[dict]) -> str:
    """Rows with keys model, bundle, metric, value, wall_time_s."""
    out = io.StringIO()
    out.write("model,bundle,metric,value,wall_time_s\n")
    for row in rows:
        out.write(
            f"{row['model']},{row['bundle']},{row['metric']},"
            f"{_fmt(row['value'])},{_fmt(row['wall_time_s'])}\n"
        )
    return out.getvalue()


def scores_json(rows: list[dict]) -> str:
    return json.dumps(rows, indent=2) + "\n"


def distances_csv(rows: list[dict]) -> str:
    """Rows with keys source, target, metric, value, wall_time_s."""
    out = io.StringIO()
    out.write("source,target,metric,value,wall_time_s\n")
    for row in rows:
        out.write(
            f"{row['source']},{row['target']},{row['metric']},"
            f"{_fmt(row['value'])},{_fmt(row['wall_time_s'])}\n"
        )
    return out.getvalue()


def sweep_csv(points: list[tuple[int, float]]) -> str:
    out = io.StringIO()
    out.write("k,score\n")
    for k, score in points:
        out.write(f"{k},{_fmt(score)}\n")
    return out.getvalue()


def rtp_csv(rows: list[dict]) -> str:
    """Rows with keys candidate, perf_p, perf_ri, rtp, tg, optional rtp_p."""
    has_rtp_p = any("rtp_p" in row for row in rows)
    out = io.StringIO()
    out.write("candidate,perf_p,perf_ri,rtp,tg" + (",rtp_p" if has_rtp_p else "") + "\n")
    for row in rows:
        line = (
            f"{row['candidate']},{_fmt(row['perf_p'])},{_fmt(row['perf_ri'])},"
            f"{_fmt(row['rtp'])},{_fmt(row['tg'])}"
        )
        if has_rtp_p:
            value = row.get("rtp_p")
            line += "," + ("" if value is None else _fmt(value))
        out.write(line + "\n")
    return out.getvalue()


def _svg_header(width: int, height: int, title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<text x="8" y="16" font-family="sans-serif" font-size="14">{title}</text>',
    ]


def svg_bar_chart(items: list[tuple[str, float]], title: str = "") -> str:
    """Horizontal bar chart, one 24px bar per item, numeric label at bar end."""
    height = 40 + BAR_HEIGHT * len(items)
    label_zone = 140
    plot_w = CHART_WIDTH - label_zone - 80
    scale = max((abs(v) for _, v in items), default=1.0) or 1.0
    zero_x = label_zone + (plot_w / 2 if any(v < 0 for _, v in items) else 0)
    px_per_unit = (plot_w / 2 if any(v < 0 for _, v in items) else plot_w) / scale

    parts = _svg_header(CHART_WIDTH, height, title)
    parts.append(
        f'<line x1="{zero_x}" y1="28" x2="{zero_x}" y2="{height - 4}" stroke="#888"/>'
    )
    for i, (label, value) in enumerate(items):
        y = 32 + i * BAR_HEIGHT
        w = abs(value) * px_per_unit
        x = zero_x if value >= 0 else zero_x - w
        color = "#4878a8" if value >= 0 else "#b05050"
        parts.append(
            f'<text x="{label_zone - 6}" y="{y + 15}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12">{label}</text>'
        )
        parts.append(
            f'<rect x="{x:.2f}" y="{y + 3}" width="{w:.2f}" height="{BAR_HEIGHT - 8}" fill="{color}"/>'
        )
        lx = zero_x + (w + 4 if value >= 0 else -(w + 4))
        anchor = "start" if value >= 0 else "end"
        parts.append(
            f'<text x="{lx:.2f}" y="{y + 15}" text-anchor="{anchor}" '
            f'font-family="sans-serif" font-size="11">{value:.3f}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def svg_line_chart(points: list[tuple[float, float]], title: str = "",
                   x_label: str = "k", y_label: str = "score") -> str:
    """Single-series line chart with point markers and value labels."""
    width, height = CHART_WIDTH, 320
    pad_l, pad_r, pad_t, pad_b = 60, 30, 40, 40
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x_min, x_max = min(xs), max(xs)
    y_min, y_max = min(0.0, min(ys)), max(1.0, max(ys))
    x_span = (x_max - x_min) or 1.0
    y_span = (y_max - y_min) or 1.0

    def sx(x):
        return pad_l + (x - x_min) / x_span * (width - pad_l - pad_r)

    def sy(y):
        return height - pad_b - (y - y_min) / y_span * (height - pad_t - pad_b)

    parts = _svg_header(width, height, title)
    parts.append(
        f'<line x1="{pad_l}" y1="{height - pad_b}" x2="{width - pad_r}" '
        f'y2="{height - pad_b}" stroke="#888"/>'
    )
    parts.append(f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{height - pad_b}" stroke="#888"/>')
    parts.append(
        f'<text x="{width // 2}" y="{height - 8}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{x_label}</text>'
    )
    parts.append(
        f'<text x="14" y="{height // 2}" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {height // 2})">{y_label}</text>'
    )
    path = " ".join(
        f"{'M' if i == 0 else 'L'}{sx(x):.2f},{sy(y):.2f}" for i, (x, y) in enumerate(points)
    )
    parts.append(f'<path d="{path}" fill="none" stroke="#4878a8" stroke-width="2"/>')
    for x, y in points:
        parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="#4878a8"/>')
        parts.append(
            f'<text x="{sx(x):.2f}" y="{sy(y) - 8:.2f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{y:.3f}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
