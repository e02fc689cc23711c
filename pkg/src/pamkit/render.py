"""Dependency-free image output: binary PGM rasters and small SVG documents.

All renderers are deterministic: numbers are written with fixed precision
and elements are emitted in input order, so equal inputs give equal bytes.
"""
from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import EmptyInput, EmptySpectrogram, EventOutOfRange

MARKER_SHAPES = ("circle", "square", "triangle", "diamond", "cross")
_MARGIN = 40  # px around scatter/ROC plot areas
_TEXT_BAND = 16  # px reserved above the overlay raster for probability labels


@dataclass(frozen=True)
class ImageSpec:
    width_px: int = 800
    height_px: int = 300
    db_floor: float = -80.0
    format: str = "pgm"

    def __post_init__(self):
        if self.width_px < 16 or self.height_px < 16:
            raise ValueError("images must be at least 16x16 pixels")
        if self.db_floor >= 0:
            raise ValueError("db_floor must be negative")
        if self.format not in ("pgm", "svg"):
            raise ValueError("format must be 'pgm' or 'svg'")


def encode_pgm(gray: np.ndarray) -> bytes:
    """P5 encoding of an 8-bit ``[height, width]`` array."""
    gray = np.asarray(gray, dtype=np.uint8)
    h, w = gray.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + gray.tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5" or int(parts[3]) != 255:
        raise ValueError("not an 8-bit P5 image")
    w, h = int(parts[1]), int(parts[2])
    payload = parts[4]
    if len(payload) != w * h:
        raise ValueError("PGM payload size does not match header")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w)


def _band_rows(spec, band_hz):
    if band_hz is None:
        return 0, spec.n_bins
    freqs = spec.bin_freqs_hz
    lo = int(np.searchsorted(freqs, band_hz[0], side="left"))
    hi = int(np.searchsorted(freqs, band_hz[1], side="right"))
    return lo, max(hi, lo + 1)


def spectrogram_gray(spec, width: int, height: int, db_floor: float = -80.0,
                     band_hz=None) -> np.ndarray:
    """Grayscale raster, ``[height, width]``: time left to right, low frequencies at the bottom."""
    if spec.n_frames == 0 or spec.n_bins == 0:
        raise EmptySpectrogram("spectrogram has no frames")
    lo, hi = _band_rows(spec, band_hz)
    power = spec.power[:, lo:hi]
    peak = float(power.max())
    if peak <= 0.0:
        db = np.full(power.shape, db_floor)
    else:
        with np.errstate(divide="ignore"):
            db = 10.0 * np.log10(power / peak)
        db = np.maximum(db, db_floor)
    level = np.round((db - db_floor) / -db_floor * 255.0).astype(np.uint8)
    cols = (np.arange(width) * power.shape[0]) // width
    rows = ((height - 1 - np.arange(height)) * power.shape[1]) // height
    return level[cols][:, rows].T


def _num(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


class _Svg:
    def __init__(self, width, height):
        self.width, self.height = width, height
        self.parts = []

    def add(self, tag, **attrs):
        body = attrs.pop("text", None)
        a = " ".join(f'{k.rstrip("_").replace("_", "-")}="{v}"' for k, v in attrs.items())
        if body is None:
            self.parts.append(f"<{tag} {a}/>")
        else:
            self.parts.append(f"<{tag} {a}>{escape(str(body))}</{tag}>")

    def raw(self, text):
        self.parts.append(text)

    def bytes(self) -> bytes:
        head = ('<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
                f'width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        return "\n".join([head, *self.parts, "</svg>", ""]).encode("utf-8")


def _raster_lines(svg, gray, y0=0):
    """Draw a grayscale raster as run-length horizontal ``line`` strokes."""
    svg.raw('<g class="raster" stroke-linecap="butt" stroke-width="1">')
    for y, row in enumerate(gray):
        edges = np.flatnonzero(np.diff(row.astype(np.int16))) + 1
        starts = np.concatenate([[0], edges])
        ends = np.concatenate([edges, [row.size]])
        for a, b in zip(starts, ends):
            g = int(row[a])
            svg.add("line", x1=a, y1=_num(y0 + y + 0.5), x2=b, y2=_num(y0 + y + 0.5),
                    stroke=f"rgb({g},{g},{g})")
    svg.raw("</g>")


def render_spectrogram(spec, img: ImageSpec = ImageSpec(), band_hz=None) -> bytes:
    gray = spectrogram_gray(spec, img.width_px, img.height_px, img.db_floor, band_hz)
    if img.format == "pgm":
        return encode_pgm(gray)
    svg = _Svg(img.width_px, img.height_px)
    _raster_lines(svg, gray)
    return svg.bytes()


def render_events_overlay(spec, events, img: ImageSpec = ImageSpec(format="svg"),
                          band_hz=(400.0, 1500.0), view_band_hz=None) -> bytes:
    """Spectrogram with one outlined box per event and its probability above it.

    ``band_hz`` is the detection band the boxes span; ``view_band_hz``
    optionally crops the displayed frequency range.
    """
    t0, t1 = spec.start_offset_s, spec.end_s
    eps = 1e-6
    for ev in events:
        if ev.start_s < t0 - eps or ev.end_s > t1 + eps:
            raise EventOutOfRange(f"event [{ev.start_s}, {ev.end_s}] outside [{t0}, {t1}] s")
    h = img.height_px
    gray = spectrogram_gray(spec, img.width_px, h, img.db_floor, view_band_hz)
    svg = _Svg(img.width_px, h + _TEXT_BAND)
    _raster_lines(svg, gray, y0=_TEXT_BAND)
    lo_bin, hi_bin = _band_rows(spec, view_band_hz)
    f_lo = lo_bin * spec.bin_hz
    f_hi = (hi_bin - 1) * spec.bin_hz if hi_bin - 1 > lo_bin else f_lo + spec.bin_hz

    def fy(f):
        frac = np.clip((f - f_lo) / (f_hi - f_lo), 0.0, 1.0)
        return _TEXT_BAND + (1.0 - frac) * h

    for ev in sorted(events, key=lambda e: (e.start_s, e.end_s)):
        x0 = (ev.start_s - t0) / (t1 - t0) * img.width_px
        x1 = (ev.end_s - t0) / (t1 - t0) * img.width_px
        ytop, ybot = fy(band_hz[1]), fy(band_hz[0])
        svg.add("rect", class_="event", x=_num(x0), y=_num(ytop), width=_num(max(x1 - x0, 0.5)),
                height=_num(max(ybot - ytop, 0.5)), fill="none", stroke="rgb(255,255,255)",
                stroke_width=2)
        if ev.probability is not None:
            svg.add("text", x=_num(x0), y=_num(max(ytop - 3.0, 12.0)), font_size=12,
                    fill="black", text=f"{ev.probability:.2f}")
    return svg.bytes()


def _axis_range(values):
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi - lo <= 0.0:
        return lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _marker(svg, shape, x, y, r, css, gray):
    fill = f"rgb({gray},{gray},{gray})"
    if shape == "circle":
        svg.add("circle", class_=css, cx=_num(x), cy=_num(y), r=_num(r), fill=fill)
    elif shape == "square":
        svg.add("rect", class_=css, x=_num(x - r), y=_num(y - r), width=_num(2 * r),
                height=_num(2 * r), fill=fill)
    else:
        if shape == "triangle":
            pts = [(x, y - r), (x + r, y + r), (x - r, y + r), (x, y - r)]
        elif shape == "diamond":
            pts = [(x, y - r), (x + r, y), (x, y + r), (x - r, y), (x, y - r)]
        else:
            pts = [(x - r, y - r), (x + r, y + r), (x, y), (x + r, y - r), (x - r, y + r)]
        svg.add("polyline", class_=css, points=" ".join(f"{_num(a)},{_num(b)}" for a, b in pts),
                fill="none" if shape == "cross" else fill, stroke=fill, stroke_width=1.5)


def render_scatter(points, xlabel: str = "x", ylabel: str = "y",
                   img: ImageSpec = ImageSpec(600, 600, format="svg")) -> bytes:
    """2-D scatter of ``(x, y, class)`` triples with a per-class marker legend."""
    points = list(points)
    if not points:
        raise EmptyInput("nothing to plot")
    xs = np.array([p[0] for p in points], dtype=float)
    ys = np.array([p[1] for p in points], dtype=float)
    classes = sorted({str(p[2]) for p in points})
    shape_of = {c: MARKER_SHAPES[i % len(MARKER_SHAPES)] for i, c in enumerate(classes)}
    gray_of = {c: (i * 160) // max(len(classes) - 1, 1) for i, c in enumerate(classes)}
    (x_lo, x_hi), (y_lo, y_hi) = _axis_range(xs), _axis_range(ys)
    W, H = img.width_px, img.height_px
    left, right, top, bottom = _MARGIN, W - _MARGIN, _MARGIN, H - _MARGIN
    svg = _Svg(W, H)
    svg.add("line", class_="axis", x1=left, y1=bottom, x2=right, y2=bottom, stroke="black")
    svg.add("line", class_="axis", x1=left, y1=bottom, x2=left, y2=top, stroke="black")
    svg.add("text", x=_num((left + right) / 2), y=H - 8, font_size=12, text_anchor="middle",
            text=xlabel)
    svg.add("text", x=12, y=_num((top + bottom) / 2), font_size=12, text_anchor="middle",
            transform=f"rotate(-90 12 {_num((top + bottom) / 2)})", text=ylabel)
    for x, y, c in zip(xs, ys, (str(p[2]) for p in points)):
        px = left + (x - x_lo) / (x_hi - x_lo) * (right - left)
        py = bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top)
        _marker(svg, shape_of[c], px, py, 4.0, "marker", gray_of[c])
    for i, c in enumerate(classes):
        ly = top + 14 * i
        svg.raw('<g class="legend-entry">')
        _marker(svg, shape_of[c], right - 90, ly, 4.0, "legend-marker", gray_of[c])
        svg.add("text", x=right - 80, y=_num(ly + 4), font_size=11, text=c)
        svg.raw("</g>")
    return svg.bytes()


def roc_pixel(fpr: float, tpr: float, img: ImageSpec) -> tuple:
    """Pixel position of an ROC coordinate in :func:`render_roc` output."""
    left, right = _MARGIN, img.width_px - _MARGIN
    top, bottom = _MARGIN, img.height_px - _MARGIN
    return left + fpr * (right - left), bottom - tpr * (bottom - top)


def render_roc(points, img: ImageSpec = ImageSpec(400, 400, format="svg")) -> bytes:
    points = sorted(points, key=lambda p: p.threshold)
    if not points:
        raise EmptyInput("no ROC points")
    svg = _Svg(img.width_px, img.height_px)
    (x0, y0), (x1, y1) = roc_pixel(0, 0, img), roc_pixel(1, 1, img)
    svg.add("line", class_="axis", x1=_num(x0), y1=_num(y0), x2=_num(x1), y2=_num(y0), stroke="black")
    svg.add("line", class_="axis", x1=_num(x0), y1=_num(y0), x2=_num(x0), y2=_num(y1), stroke="black")
    svg.add("line", class_="chance", x1=_num(x0), y1=_num(y0), x2=_num(x1), y2=_num(y1),
            stroke="gray", stroke_dasharray="4 3")
    coords = [roc_pixel(p.fpr, p.tpr, img) for p in points]
    svg.add("polyline", class_="roc", points=" ".join(f"{_num(a)},{_num(b)}" for a, b in coords),
            fill="none", stroke="black", stroke_width=2)
    for p, (a, b) in zip(points, coords):
        svg.add("circle", class_="roc-point", cx=_num(a), cy=_num(b), r=3, fill="black")
        svg.add("text", x=_num(a + 5), y=_num(b - 5), font_size=10, text=f"{p.threshold:.2f}")
    svg.add("text", x=_num((x0 + x1) / 2), y=img.height_px - 8, font_size=12,
            text_anchor="middle", text="False positive rate")
    svg.add("text", x=12, y=_num((y0 + y1) / 2), font_size=12, text_anchor="middle",
            transform=f"rotate(-90 12 {_num((y0 + y1) / 2)})", text="True positive rate")
    return svg.bytes()


def render_heatmap(grid, img: ImageSpec = ImageSpec(500, 500, format="svg")) -> bytes:
    """Grid cells as gray rectangles (darker is denser) with site markers on top."""
    vals = np.asarray(grid.values, dtype=float)
    if vals.size == 0:
        raise EmptyInput("empty density grid")
    nx, ny = vals.shape
    lo, hi = float(vals.min()), float(vals.max())
    levels = np.full(vals.shape, 255, dtype=int) if hi <= lo else \
        np.round(255.0 - (vals - lo) / (hi - lo) * 255.0).astype(int)
    W, H = img.width_px, img.height_px
    cw, ch = W / nx, H / ny
    svg = _Svg(W, H)
    for i in range(nx):
        for j in range(ny):
            g = int(levels[i, j])
            svg.add("rect", class_="cell", x=_num(i * cw), y=_num(H - (j + 1) * ch),
                    width=_num(cw), height=_num(ch), fill=f"rgb({g},{g},{g})")
    spec = grid.spec
    # grid nodes sit at cell centres
    for s in grid.sites:
        px = ((s.x_m - spec.x0) / spec.cell_m + 0.5) / nx * W
        py = H - ((s.y_m - spec.y0) / spec.cell_m + 0.5) / ny * H
        svg.add("circle", class_="site", cx=_num(px), cy=_num(py), r=4, fill="black")
        svg.add("text", x=_num(px + 6), y=_num(py - 6), font_size=10, fill="black",
                text=f"{s.name} ({s.call_count})")
    return svg.bytes()
