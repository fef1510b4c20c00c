"""Deterministic picture output: SVG (vector) and binary PGM (raster).

Two styles: the tilted product-set picture (surviving squares drawn as
diamonds over the projection range [-1, 1], column grid optional) and the
stacked bar picture of a single realization's levels.  Output bytes depend
only on the inputs, so repeated runs are byte-identical.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import limits
from .errors import ParameterOutOfRangeError, ResourceLimitExceededError
from .simulate import Realization

_GRID_LIMIT = 81  # draw the column grid only while it stays readable


def _f(x: float) -> str:
    return f"{x:.6f}"


def _pgm_bytes(img: np.ndarray) -> bytes:
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + img.astype(np.uint8).tobytes()


def _pair_arrays(r1: Realization, r2: Realization, n: int) -> tuple[np.ndarray, np.ndarray]:
    a = r1.level(n)
    b = r2.level(n)
    xs = np.repeat(a, b.size)
    ys = np.tile(b, a.size)
    return xs, ys


def product_svg(r1: Realization, r2: Realization, n: int,
                square_cap: int | None = None) -> bytes:
    """Tilted product-set picture: one diamond per surviving square."""
    cap = limits.square_cap() if square_cap is None else square_cap
    pairs = r1.survivors(n) * r2.survivors(n)
    if pairs > cap:
        raise ResourceLimitExceededError(f"{pairs} squares exceed SVG cap {cap}")
    span = r1.alphabet_size**n
    xs, ys = _pair_arrays(r1, r2, n)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="-1.05 -0.05 2.1 2.1">',
        '<rect x="-1.05" y="-0.05" width="2.1" height="2.1" fill="white"/>',
    ]
    half = 1.0 / span
    for x, y in zip(xs.tolist(), ys.tolist()):
        u = (x - y) / span
        v = (x + y + 1) / span
        yc = 2.0 - v
        pts = " ".join(
            f"{_f(px)},{_f(py)}"
            for px, py in (
                (u - half, yc),
                (u, yc - half),
                (u + half, yc),
                (u, yc + half),
            )
        )
        lines.append(f'<polygon points="{pts}" fill="#707070" stroke="none"/>')
    if 2 * span <= _GRID_LIMIT:
        for c in range(-span, span + 1):
            u = c / span
            lines.append(
                f'<line x1="{_f(u)}" y1="{_f(2.0)}" x2="{_f(u)}" y2="{_f(0.0)}" '
                'stroke="#c0c0c0" stroke-width="0.004"/>'
            )
    lines.append(
        '<line x1="-1" y1="2" x2="1" y2="2" stroke="black" stroke-width="0.006"/>'
    )
    lines.append("</svg>")
    return ("\n".join(lines) + "\n").encode("ascii")


def product_pgm(r1: Realization, r2: Realization, n: int, width: int = 512,
                pixel_cap: int | None = None) -> bytes:
    """Raster version of the tilted product-set picture."""
    cap = limits.pixel_cap() if pixel_cap is None else pixel_cap
    span = r1.alphabet_size**n
    if span > cap or width * width > cap:
        raise ResourceLimitExceededError(f"raster for span {span} exceeds pixel cap {cap}")
    in1 = np.zeros(span, dtype=bool)
    in2 = np.zeros(span, dtype=bool)
    in1[r1.level(n)] = True
    in2[r2.level(n)] = True
    px = (np.arange(width) + 0.5) / width
    u = -1.0 + 2.0 * px  # horizontal: projection coordinate
    v = 2.0 - 2.0 * px[:, None]  # vertical: row 0 at the top (v = 2)
    xcoord = (v + u[None, :]) / 2.0
    ycoord = (v - u[None, :]) / 2.0
    inside = (xcoord >= 0) & (xcoord < 1) & (ycoord >= 0) & (ycoord < 1)
    xi = np.clip((xcoord * span).astype(np.int64), 0, span - 1)
    yi = np.clip((ycoord * span).astype(np.int64), 0, span - 1)
    shaded = inside & in1[xi] & in2[yi]
    img = np.where(shaded, 64, 255).astype(np.uint8)
    return _pgm_bytes(img)


def bars_svg(r: Realization) -> bytes:
    """Stacked bar picture of the surviving intervals, one row per level."""
    rows = r.depth + 1
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 1 {rows}">',
        f'<rect x="0" y="0" width="1" height="{rows}" fill="white"/>',
    ]
    for n in range(rows):
        span = r.alphabet_size**n
        addrs = r.level(n)
        if addrs.size:
            # merge adjacent addresses into single rectangles
            breaks = np.flatnonzero(np.diff(addrs) > 1)
            starts = np.concatenate(([0], breaks + 1))
            ends = np.concatenate((breaks, [addrs.size - 1]))
            for s, e in zip(starts.tolist(), ends.tolist()):
                x0 = addrs[s] / span
                w = (addrs[e] + 1 - addrs[s]) / span
                lines.append(
                    f'<rect x="{_f(x0)}" y="{_f(n + 0.1)}" width="{_f(w)}" '
                    f'height="0.8" fill="#404040"/>'
                )
    lines.append("</svg>")
    return ("\n".join(lines) + "\n").encode("ascii")


def bars_pgm(r: Realization, width: int = 729, row_px: int = 16,
             pixel_cap: int | None = None) -> bytes:
    """Raster version of the stacked bar picture."""
    cap = limits.pixel_cap() if pixel_cap is None else pixel_cap
    rows = r.depth + 1
    if r.alphabet_size**r.depth > cap or width * rows * row_px > cap:
        raise ResourceLimitExceededError("raster exceeds pixel cap")
    img = np.full((rows * row_px, width), 255, dtype=np.uint8)
    cols = np.arange(width)
    for n in range(rows):
        span = r.alphabet_size**n
        member = np.zeros(span, dtype=bool)
        member[r.level(n)] = True
        addr = (cols * span) // width
        band = np.where(member[addr], 64, 255).astype(np.uint8)
        img[n * row_px : (n + 1) * row_px - 1, :] = band[None, :]
    return _pgm_bytes(img)


def render(
    r1: Realization,
    r2: Realization | None,
    n: int,
    fmt: str,
    style: str = "product",
    width: int = 512,
) -> bytes:
    """Dispatch to a renderer; ``style='bars'`` uses only the first realization."""
    if style == "product":
        if r2 is None:
            raise ParameterOutOfRangeError("product style needs two realizations")
        if fmt == "svg":
            return product_svg(r1, r2, n)
        if fmt == "pgm":
            return product_pgm(r1, r2, n, width=width)
    elif style == "bars":
        if fmt == "svg":
            return bars_svg(r1)
        if fmt == "pgm":
            return bars_pgm(r1, width=width)
    else:
        raise ParameterOutOfRangeError(f"unknown style {style!r}")
    raise ParameterOutOfRangeError(f"unknown format {fmt!r}")
