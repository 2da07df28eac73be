"""AXF1 field files.

Layout: the magic ``AXF1``, a u8 axis count, then per axis an i64 count
and two f64 bounds (min, max), then the row-major little-endian f64
payload.  The format carries no type tag, so the container kind is read
off the axis layout: radial fields and cone data end in a half-line axis
with min 0 (cell-centred), while full fields have ``2(n-1)`` axes whose
trailing block is symmetric about 0.
"""

import struct
from pathlib import Path

import numpy as np

from .fields import Axis, ConeData, FullField, GridSpec, RadialField

MAGIC = b"AXF1"
_AXIS = struct.Struct("<qdd")


class AxfError(ValueError):
    """Malformed file, or a file whose layout does not match the requested kind."""


def write_axf(path, axes, values) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    axes = tuple(axes)
    if values.shape != tuple(a.count for a in axes):
        raise AxfError(f"payload shape {values.shape} does not match the axes")
    if len(axes) > 255:
        raise AxfError("too many axes")
    parts = [MAGIC, struct.pack("<B", len(axes))]
    parts += [_AXIS.pack(a.count, a.min, a.max) for a in axes]
    parts.append(values.tobytes(order="C"))
    Path(path).write_bytes(b"".join(parts))


def read_raw(path) -> tuple[list[tuple[int, float, float]], np.ndarray]:
    """Axis triples ``(count, min, max)`` and the payload array."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise AxfError(f"{path}: not an AXF1 file")
    if len(data) < 5:
        raise AxfError(f"{path}: truncated header")
    nax = data[4]
    off = 5
    axes = []
    for _ in range(nax):
        if off + _AXIS.size > len(data):
            raise AxfError(f"{path}: truncated header")
        axes.append(_AXIS.unpack_from(data, off))
        off += _AXIS.size
    shape = tuple(int(c) for c, _, _ in axes)
    if any(c < 0 for c in shape):
        raise AxfError(f"{path}: negative axis count")
    expected = 8 * int(np.prod(shape, dtype=np.int64))
    if len(data) - off != expected:
        raise AxfError(f"{path}: payload has {len(data) - off} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f8", offset=off).reshape(shape).astype(float)
    return axes, values


def layout_kind(axes) -> tuple[str, int]:
    """``("half", n)`` or ``("full", n)`` from the axis triples alone."""
    k = len(axes)
    half = k in (2, 3) and axes[-1][1] == 0.0
    if half:
        return "half", k
    if k in (2, 4):
        n = k // 2 + 1
        if all(lo < 0 < hi for _, lo, hi in axes[n - 1:]):
            return "full", n
    raise AxfError(f"axis layout {[(c, lo, hi) for c, lo, hi in axes]} is neither "
                   "a half-space field nor a full field")


def write_field(path, f) -> None:
    write_axf(path, f.grid.axes, f.values)


def read_field(path, kind: str | None = None):
    """Read a RadialField, ConeData or FullField.

    ``kind`` is ``"radial"``, ``"cone"`` or ``"full"``; by default a
    half-space layout is returned as a RadialField.
    """
    axes, values = read_raw(path)
    layout, n = layout_kind(axes)
    if kind is None:
        kind = "radial" if layout == "half" else "full"
    want = "full" if kind == "full" else "half"
    if want != layout:
        raise AxfError(f"{path}: expected a {kind} field, found a {layout}-layout file")
    try:
        if layout == "full":
            d = n - 1
            built = [Axis(lo, hi, c, centered=i >= d) for i, (c, lo, hi) in enumerate(axes)]
            return FullField(n, GridSpec(built), values)
        base = GridSpec([Axis(lo, hi, c) for c, lo, hi in axes[:-1]])
        c, lo, hi = axes[-1]
        half = GridSpec((Axis(lo, hi, c, centered=True),))
        cls = ConeData if kind == "cone" else RadialField
        return cls(n, base, half, values)
    except ValueError as exc:
        raise AxfError(f"{path}: {exc}") from exc


__all__ = ["AxfError", "MAGIC", "layout_kind", "read_field", "read_raw",
           "write_axf", "write_field"]
