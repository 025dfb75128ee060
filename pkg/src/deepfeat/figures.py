"""Self-contained SVG confusion-matrix heatmaps (byte-deterministic)."""

from xml.sax.saxutils import escape

CELL = 72
MARGIN_LEFT = 140
MARGIN_TOP = 90


def _shade(frac):
    # white -> dark blue; integer channels keep output deterministic
    r = round(247 - frac * (247 - 8))
    g = round(251 - frac * (251 - 48))
    b = round(255 - frac * (255 - 107))
    return f"#{r:02x}{g:02x}{b:02x}"


def confusion_svg(cm, title=None):
    counts = cm.counts.tolist()
    k = len(counts)
    width = MARGIN_LEFT + k * CELL + 20
    height = MARGIN_TOP + k * CELL + 50
    peak = max(max(row) for row in counts) or 1
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="13">',
    ]
    if title:
        out.append(f'<text class="title" x="{width // 2}" y="22" text-anchor="middle" '
                   f'font-size="15">{escape(title)}</text>')
    out.append(f'<text x="{MARGIN_LEFT + k * CELL // 2}" y="{MARGIN_TOP - 40}" '
               f'text-anchor="middle">Predicted</text>')
    out.append(f'<text x="16" y="{MARGIN_TOP + k * CELL // 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN_TOP + k * CELL // 2})">True</text>')
    for j, name in enumerate(cm.class_names):
        x = MARGIN_LEFT + j * CELL + CELL // 2
        out.append(f'<text class="col-label" x="{x}" y="{MARGIN_TOP - 12}" '
                   f'text-anchor="middle">{escape(name)}</text>')
    for i, name in enumerate(cm.class_names):
        y = MARGIN_TOP + i * CELL + CELL // 2 + 5
        out.append(f'<text class="row-label" x="{MARGIN_LEFT - 10}" y="{y}" '
                   f'text-anchor="end">{escape(name)}</text>')
    for i, row in enumerate(counts):
        for j, value in enumerate(row):
            frac = value / peak
            x = MARGIN_LEFT + j * CELL
            y = MARGIN_TOP + i * CELL
            ink = "#ffffff" if frac > 0.5 else "#000000"
            out.append(f'<rect class="cell" x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                       f'fill="{_shade(frac)}" stroke="#888888"/>')
            out.append(f'<text class="cell-text" x="{x + CELL // 2}" y="{y + CELL // 2 + 5}" '
                       f'text-anchor="middle" fill="{ink}">{value}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_confusion_svg(cm, path, title=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(confusion_svg(cm, title))
