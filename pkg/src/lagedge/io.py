"""File formats: LEVOL volumes, dataset bundles, ridge CSV and 16-bit PGM heatmaps.

A LEVOL volume is a small text header plus a detached raw body of
little-endian float32 values.  Nodes are stored x-fastest, then y, then z;
components are interleaved per node and frames follow each other.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .exceptions import DataError, DegenerateRange, IoFailure, MalformedHeader, MalformedRow, SizeMismatch
from .grid import GridSpec, MultifieldDataset, TimeAxis
from .ridge import RidgeLine

MAGIC = "LEVOL 1"
ENCODING = "float32le"
_DTYPE = np.dtype("<f4")
_KINDS = ("scalar", "vector")
_REQUIRED = ("dims", "spacing", "origin", "t_start", "t_step", "frame_count", "kind", "name",
             "encoding", "data_file")


@dataclass(frozen=True)
class VolumeHeader:
    dims: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...]
    t_start: float = 0.0
    t_step: float = 1.0
    frame_count: int = 1
    kind: str = "scalar"
    components: int = 1
    name: str = "field"
    encoding: str = ENCODING
    data_file: str = ""

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise MalformedHeader(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if self.kind == "scalar" and self.components != 1:
            raise MalformedHeader(f"scalar volume with {self.components} components")
        if self.components < 1:
            raise MalformedHeader(f"components must be >= 1, got {self.components}")
        if self.frame_count < 1:
            raise MalformedHeader(f"frame_count must be >= 1, got {self.frame_count}")
        if self.encoding != ENCODING:
            raise MalformedHeader(f"encoding must be {ENCODING!r}, got {self.encoding!r}")
        if not (len(self.dims) == len(self.spacing) == len(self.origin)):
            raise MalformedHeader("dims, spacing and origin must have the same length")
        if any(n < 1 for n in self.dims):
            raise MalformedHeader(f"dims must be positive, got {self.dims}")
        if any(c in self.name for c in "\r\n") or not self.name:
            raise MalformedHeader(f"invalid attribute name {self.name!r}")

    @property
    def frame_shape(self) -> tuple[int, ...]:
        """In-memory shape of one frame, ``(*dims)`` or ``(*dims, components)``."""
        return tuple(self.dims) + ((self.components,) if self.kind == "vector" else ())

    @property
    def body_bytes(self) -> int:
        return int(np.prod(self.dims)) * self.components * self.frame_count * _DTYPE.itemsize

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.dims, self.spacing, self.origin)

    @property
    def time(self) -> TimeAxis:
        return TimeAxis(self.t_start, self.t_step, self.frame_count)

    @classmethod
    def for_field(cls, grid: GridSpec, time: TimeAxis, name: str, vector: bool = False,
                  data_file: str = "") -> "VolumeHeader":
        return cls(tuple(grid.dims), tuple(grid.spacing), tuple(grid.origin), time.t_start,
                   time.t_step, time.frame_count, "vector" if vector else "scalar",
                   grid.ndim if vector else 1, name, ENCODING, data_file)


def _fmt(v) -> str:
    return repr(float(v))


def emit_header(h: VolumeHeader) -> str:
    kind = f"vector {h.components}" if h.kind == "vector" else "scalar"
    rows = [
        MAGIC,
        "dims: " + " ".join(str(n) for n in h.dims),
        "spacing: " + " ".join(_fmt(v) for v in h.spacing),
        "origin: " + " ".join(_fmt(v) for v in h.origin),
        f"t_start: {_fmt(h.t_start)}",
        f"t_step: {_fmt(h.t_step)}",
        f"frame_count: {h.frame_count}",
        f"kind: {kind}",
        f"name: {h.name}",
        f"encoding: {h.encoding}",
        f"data_file: {h.data_file}",
    ]
    return "\n".join(rows) + "\n"


def parse_header(text: str, source: str = "<header>") -> VolumeHeader:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        found = lines[0].strip() if lines else ""
        raise MalformedHeader(f"{source}: expected magic {MAGIC!r}, found {found!r}")
    fields = {}
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise MalformedHeader(f"{source}:{n}: expected 'key: value', found {line!r}")
        key = key.strip()
        if key in fields:
            raise MalformedHeader(f"{source}:{n}: duplicate key {key!r}")
        fields[key] = value.strip()
    missing = [k for k in _REQUIRED if k not in fields]
    if missing:
        raise MalformedHeader(f"{source}: missing keys {missing}")
    try:
        dims = tuple(int(v) for v in fields["dims"].split())
        spacing = tuple(float(v) for v in fields["spacing"].split())
        origin = tuple(float(v) for v in fields["origin"].split())
        t_start, t_step = float(fields["t_start"]), float(fields["t_step"])
        frame_count = int(fields["frame_count"])
        kind_parts = fields["kind"].split()
        kind = kind_parts[0] if kind_parts else ""
        components = int(kind_parts[1]) if kind == "vector" and len(kind_parts) == 2 else 1
        if kind == "vector" and len(kind_parts) != 2 or kind == "scalar" and len(kind_parts) != 1:
            raise ValueError(f"kind {fields['kind']!r}")
    except ValueError as exc:
        raise MalformedHeader(f"{source}: unparsable value ({exc})") from None
    return VolumeHeader(dims, spacing, origin, t_start, t_step, frame_count, kind, components,
                        fields["name"], fields["encoding"], fields["data_file"])


def _body_path(path: Path, h: VolumeHeader) -> Path:
    return path.parent / (h.data_file or path.with_suffix(".raw").name)


def _to_disk(frames: np.ndarray, h: VolumeHeader) -> np.ndarray:
    """Reorder ``(F, i, j[, k][, c])`` into x-fastest disk order."""
    d = len(h.dims)
    spatial = tuple(range(d, 0, -1))
    tail = (d + 1,) if h.kind == "vector" else ()
    return np.ascontiguousarray(np.transpose(frames, (0, *spatial, *tail)), dtype=_DTYPE)


def _from_disk(flat: np.ndarray, h: VolumeHeader) -> np.ndarray:
    d = len(h.dims)
    tail = (h.components,) if h.kind == "vector" else ()
    disk = flat.reshape(h.frame_count, *h.dims[::-1], *tail)
    spatial = tuple(range(d, 0, -1))
    return np.transpose(disk, (0, *spatial, *(((d + 1),) if tail else ())))


def write_volume(path, header: VolumeHeader, frames) -> Path:
    """Write header to ``path`` and the body next to it; returns the body path.

    ``frames`` has shape ``(frame_count, *frame_shape)`` in memory order
    (axis 0 is x).  Values are stored as float32.
    """
    path = Path(path)
    if not header.data_file:
        header = replace(header, data_file=path.with_suffix(".raw").name)
    frames = np.asarray(frames)
    expected = (header.frame_count, *header.frame_shape)
    if frames.shape != expected:
        raise DataError(f"frames have shape {frames.shape}, header describes {expected}")
    body = _body_path(path, header)
    try:
        body.write_bytes(_to_disk(frames, header).tobytes())
        path.write_text(emit_header(header))
    except OSError as exc:
        raise IoFailure(f"cannot write volume {path}: {exc.strerror or exc}") from exc
    return body


def read_header(path) -> VolumeHeader:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read(65536)
    except OSError as exc:
        raise IoFailure(f"cannot read volume header {path}: {exc.strerror or exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise MalformedHeader(f"{path}: header is not UTF-8 text") from None
    return parse_header(text, str(path))


def read_volume(path):
    """Return ``(header, frames)`` with frames as float32 in memory order."""
    path = Path(path)
    h = read_header(path)
    body = _body_path(path, h)
    try:
        data = body.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read volume body {body}: {exc.strerror or exc}") from exc
    if len(data) != h.body_bytes:
        raise SizeMismatch(f"{body}: expected {h.body_bytes} bytes, found {len(data)}")
    flat = np.frombuffer(data, dtype=_DTYPE)
    return h, _from_disk(flat, h)


# dataset bundles -----------------------------------------------------------

VELOCITY_FILE = "velocity.levol"


def _scalar_file(name: str) -> str:
    return f"scalar_{name}.levol"


def save_dataset(directory, ds: MultifieldDataset) -> Path:
    """Write ``ds`` as one velocity volume plus one volume per scalar."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create dataset directory {directory}: {exc.strerror or exc}") from exc
    for name in ds.names:
        if not name or any(c in name for c in "/\\\r\n"):
            raise DataError(f"attribute name {name!r} cannot be used as a file name")
    h = VolumeHeader.for_field(ds.grid, ds.time, "velocity", vector=True, data_file="velocity.raw")
    write_volume(directory / VELOCITY_FILE, h, ds.velocity)
    for name, values in zip(ds.names, ds.scalars):
        h = VolumeHeader.for_field(ds.grid, ds.time, name, data_file=f"scalar_{name}.raw")
        write_volume(directory / _scalar_file(name), h, values)
    return directory


def load_dataset(path) -> MultifieldDataset:
    """Load a bundle directory, or a single velocity volume file."""
    path = Path(path)
    vel_path = path / VELOCITY_FILE if path.is_dir() else path
    if not vel_path.exists():
        raise IoFailure(f"no velocity volume at {vel_path}")
    hv, vel = read_volume(vel_path)
    if hv.kind != "vector" or hv.components != len(hv.dims):
        raise MalformedHeader(
            f"{vel_path}: velocity must be a vector volume with {len(hv.dims)} components, "
            f"found {hv.kind} with {hv.components}"
        )
    scalars, names = [], []
    if path.is_dir():
        for p in sorted(path.glob("scalar_*.levol")):
            hs, values = read_volume(p)
            if (hs.dims, hs.spacing, hs.origin, hs.time) != (hv.dims, hv.spacing, hv.origin, hv.time):
                raise DataError(f"{p}: grid or time axis differs from {vel_path}")
            if hs.kind != "scalar":
                raise MalformedHeader(f"{p}: expected a scalar volume, found {hs.kind}")
            scalars.append(values)
            names.append(hs.name)
    return MultifieldDataset(hv.grid, hv.time, vel, tuple(scalars), tuple(names))


def import_raw(raw_path, out_path, dims, spacing, origin=None, frames: int = 1,
               components: int = 1, name: str = "field", t_start: float = 0.0,
               t_step: float = 1.0) -> VolumeHeader:
    """Wrap an external float32le file (x-fastest, frame-major) in a LEVOL header."""
    raw_path, out_path = Path(raw_path), Path(out_path)
    origin = tuple(origin) if origin is not None else (0.0,) * len(dims)
    kind = "vector" if components > 1 else "scalar"
    h = VolumeHeader(tuple(dims), tuple(float(s) for s in spacing), tuple(float(o) for o in origin),
                     float(t_start), float(t_step), int(frames), kind, int(components), name,
                     ENCODING, raw_path.name)
    try:
        size = raw_path.stat().st_size
    except OSError as exc:
        raise IoFailure(f"cannot read raw file {raw_path}: {exc.strerror or exc}") from exc
    if size != h.body_bytes:
        raise SizeMismatch(f"{raw_path}: expected {h.body_bytes} bytes, found {size}")
    if out_path.parent.resolve() != raw_path.parent.resolve():
        h = replace(h, data_file=out_path.with_suffix(".raw").name)
        try:
            (out_path.parent / h.data_file).write_bytes(raw_path.read_bytes())
        except OSError as exc:
            raise IoFailure(f"cannot copy {raw_path}: {exc.strerror or exc}") from exc
    try:
        out_path.write_text(emit_header(h))
    except OSError as exc:
        raise IoFailure(f"cannot write {out_path}: {exc.strerror or exc}") from exc
    return h


# ridge CSV -----------------------------------------------------------------

CSV_COLUMNS = ("line_id", "vertex_id", "x", "y", "strength")


def _g17(v: float) -> str:
    return format(float(v), ".17g")


def write_ridges_csv(path, lines) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for lid, line in enumerate(lines):
                for vid, ((x, y), s) in enumerate(zip(line.vertices, line.strengths)):
                    w.writerow((lid, vid, _g17(x), _g17(y), _g17(s)))
    except OSError as exc:
        raise IoFailure(f"cannot write ridge file {path}: {exc.strerror or exc}") from exc


def read_ridges_csv(path) -> list[RidgeLine]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read ridge file {path}: {exc.strerror or exc}") from exc
    if not rows or tuple(c.strip() for c in rows[0]) != CSV_COLUMNS:
        found = ",".join(rows[0]) if rows else "<empty file>"
        raise MalformedRow(f"{path}:1: expected header {','.join(CSV_COLUMNS)}, found {found}")
    lines, verts, strengths = [], [], []
    cur = -1
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise MalformedRow(f"{path}:{n}: expected {len(CSV_COLUMNS)} columns, found {len(row)}")
        try:
            lid, vid = int(row[0]), int(row[1])
            x, y, s = float(row[2]), float(row[3]), float(row[4])
        except ValueError:
            raise MalformedRow(f"{path}:{n}: non-numeric field in {row}") from None
        if lid != cur:
            if lid != cur + 1 or vid != 0:
                raise MalformedRow(f"{path}:{n}: expected line {cur + 1} vertex 0, found line {lid} vertex {vid}")
            if verts:
                lines.append((verts, strengths, n))
            cur, verts, strengths = lid, [], []
        elif vid != len(verts):
            raise MalformedRow(f"{path}:{n}: expected vertex {len(verts)}, found {vid}")
        verts.append((x, y))
        strengths.append(s)
    if verts:
        lines.append((verts, strengths, len(rows)))
    out = []
    for verts, strengths, n in lines:
        try:
            out.append(RidgeLine(np.array(verts), np.array(strengths)))
        except DataError as exc:
            raise MalformedRow(f"{path}: line ending near row {n}: {exc}") from None
    return out


# PGM heatmaps --------------------------------------------------------------

def heatmap_samples(field, vmin: float, vmax: float) -> np.ndarray:
    """16-bit gray levels ``round_half_up(65535 * clamp((v - min) / (max - min)))``."""
    if not vmax > vmin:
        raise DegenerateRange(f"heatmap range needs max > min, got min={vmin!r} max={vmax!r}")
    v = np.asarray(field, dtype=np.float64)
    u = np.clip((v - vmin) / (vmax - vmin), 0.0, 1.0)
    return np.floor(65535.0 * u + 0.5).astype(np.uint16)


def write_heatmap_pgm(path, field, vmin: float, vmax: float) -> None:
    """Binary P5 image of a 2D field; rows run from high y to low y."""
    v = np.asarray(field, dtype=np.float64)
    if v.ndim != 2:
        raise DataError(f"heatmap needs a 2D field, got shape {v.shape}")
    img = heatmap_samples(v, vmin, vmax).T[::-1]
    nx, ny = v.shape
    head = f"P5\n# min={_g17(vmin)} max={_g17(vmax)}\n{nx} {ny}\n65535\n".encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(head)
            fh.write(img.astype(">u2").tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write heatmap {path}: {exc.strerror or exc}") from exc


def read_heatmap_pgm(path):
    """Return ``(samples (nx, ny) uint16, vmin, vmax)`` from a file written above."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read heatmap {path}: {exc.strerror or exc}") from exc
    parts, pos, comment = [], 0, {}
    while len(parts) < 4:
        end = data.index(b"\n", pos)
        line = data[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            for item in line[1:].split():
                k, _, val = item.partition("=")
                comment[k] = float(val)
            continue
        parts.extend(line.split())
    if parts[0] != "P5" or parts[3] != "65535":
        raise MalformedHeader(f"{path}: not a 16-bit P5 image")
    nx, ny = int(parts[1]), int(parts[2])
    body = data[pos:]
    if len(body) != 2 * nx * ny:
        raise SizeMismatch(f"{path}: expected {2 * nx * ny} bytes of samples, found {len(body)}")
    img = np.frombuffer(body, dtype=">u2").reshape(ny, nx)
    return img[::-1].T.astype(np.uint16), comment.get("min"), comment.get("max")


def ensure_parent(path) -> None:
    parent = Path(path).parent
    if str(parent) and not parent.exists():
        try:
            os.makedirs(parent, exist_ok=True)
        except OSError as exc:
            raise IoFailure(f"cannot create directory {parent}: {exc.strerror or exc}") from exc
