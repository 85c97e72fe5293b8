"""CSV, PGM and SVG output."""
import csv
import math
from xml.sax.saxutils import escape

import numpy as np

from ..errors import ContractViolation


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows):
    """RFC 4180 CSV with a header row; floats are written with ``repr`` so they round-trip."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def write_samples_csv(path, samples):
    """One row per retained iterate, columns ``x_0 .. x_{d-1}``."""
    s = np.asarray(samples, dtype=float)
    s = s.reshape(s.shape[0], -1)
    write_csv(path, [f"x_{i}" for i in range(s.shape[1])], s.tolist())


# -- PGM ---------------------------------------------------------------------

def _pgm_tokens(data):
    """Yield header tokens and the offset just past the last one."""
    tokens, i, n = [], 0, len(data)
    while len(tokens) < 4:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
            j += 1
        if j == i:
            raise ContractViolation("truncated PGM header")
        tokens.append(data[i:j])
        i = j
    return tokens, i


def read_pgm(path):
    """Read an ASCII (P2) or binary (P5) PGM with maxval <= 255 into floats in [0, 1]."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ContractViolation(f"cannot read image {path}: {exc.strerror}") from exc
    tokens, off = _pgm_tokens(data)
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise ContractViolation(f"{path}: malformed PGM header") from exc
    if width < 1 or height < 1 or not 0 < maxval <= 255:
        raise ContractViolation(f"{path}: unsupported PGM geometry or maxval {maxval}")
    if magic == b"P5":
        raw = data[off + 1: off + 1 + width * height]
        if len(raw) != width * height:
            raise ContractViolation(f"{path}: truncated P5 pixel data")
        pix = np.frombuffer(raw, dtype=np.uint8).astype(float)
    elif magic == b"P2":
        vals = data[off:].split()
        if len(vals) < width * height:
            raise ContractViolation(f"{path}: truncated P2 pixel data")
        pix = np.array([int(v) for v in vals[: width * height]], dtype=float)
    else:
        raise ContractViolation(f"{path}: not a P2/P5 PGM file")
    if pix.max(initial=0) > maxval:
        raise ContractViolation(f"{path}: pixel above maxval")
    return pix.reshape(height, width) / maxval


def to_uint8(image):
    return np.clip(np.rint(np.asarray(image, dtype=float) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, image):
    """Binary P5 PGM, maxval 255, from floats in [0, 1] (clipped)."""
    img = to_uint8(image)
    if img.ndim != 2:
        raise ContractViolation("PGM images are 2D")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_pgm_ascii(path, image):
    img = to_uint8(image)
    h, w = img.shape
    lines = [f"P2\n{w} {h}\n255"] + [" ".join(str(int(v)) for v in row) for row in img]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


# -- marching squares and SVG ------------------------------------------------

# edges: 0 bottom (c00-c10), 1 right (c10-c11), 2 top (c01-c11), 3 left (c00-c01)
_CASES = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 6: [(0, 2)], 7: [(3, 2)],
    8: [(2, 3)], 9: [(2, 0)], 11: [(2, 1)], 12: [(1, 3)], 13: [(1, 0)], 14: [(0, 3)],
}


def marching_squares(values, level, xs, ys):
    """Line segments of the ``level`` set of ``values[i, j]`` sampled at ``(xs[i], ys[j])``.

    Saddle cells are split according to the cell-centre average.
    """
    v = np.asarray(values, dtype=float)
    segs = []
    nx, ny = v.shape

    def point(edge, i, j):
        a, b = {0: ((i, j), (i + 1, j)), 1: ((i + 1, j), (i + 1, j + 1)),
                2: ((i, j + 1), (i + 1, j + 1)), 3: ((i, j), (i, j + 1))}[edge]
        va, vb = v[a], v[b]
        t = 0.5 if vb == va else (level - va) / (vb - va)
        return (xs[a[0]] + t * (xs[b[0]] - xs[a[0]]), ys[a[1]] + t * (ys[b[1]] - ys[a[1]]))

    above = v >= level
    for i in range(nx - 1):
        for j in range(ny - 1):
            idx = (int(above[i, j]) | int(above[i + 1, j]) << 1
                   | int(above[i + 1, j + 1]) << 2 | int(above[i, j + 1]) << 3)
            if idx in (0, 15):
                continue
            if idx in (5, 10):
                centre = 0.25 * (v[i, j] + v[i + 1, j] + v[i + 1, j + 1] + v[i, j + 1]) >= level
                pairs = {(5, True): [(3, 2), (1, 0)], (5, False): [(3, 0), (1, 2)],
                         (10, True): [(0, 3), (2, 1)], (10, False): [(0, 1), (2, 3)]}[(idx, bool(centre))]
            else:
                pairs = _CASES[idx]
            for e1, e2 in pairs:
                segs.append((point(e1, i, j), point(e2, i, j)))
    return segs


def write_scatter_svg(path, points, bounds, density=None, levels=(), title="", size=800):
    """Static scatter of iterates over contour lines of a gridded density."""
    (x0, x1), (y0, y1) = bounds

    def px(x, y):
        return ((x - x0) / (x1 - x0) * size, (y1 - y) / (y1 - y0) * size)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>']
    if title:
        out.append(f'<title>{escape(title)}</title>')
    if density is not None:
        xs, ys = density.grid.centers()
        for level in levels:
            d = []
            for (ax, ay), (bx, by) in marching_squares(density.values, level, xs, ys):
                pa, pb = px(ax, ay), px(bx, by)
                d.append(f"M{pa[0]:.2f},{pa[1]:.2f}L{pb[0]:.2f},{pb[1]:.2f}")
            if d:
                out.append(f'<path d="{"".join(d)}" stroke="black" stroke-width="1" fill="none"/>')
    pts = np.asarray(points, dtype=float)
    for x, y in pts:
        if x0 <= x <= x1 and y0 <= y <= y1:
            cx, cy = px(x, y)
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="1.5" fill="steelblue" fill-opacity="0.5"/>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
