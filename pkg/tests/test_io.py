import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lagedge.exceptions import (DataError, DegenerateRange, IoFailure, MalformedHeader,
                                MalformedRow, SizeMismatch)
from lagedge.flows import AnalyticFlow, ScalarGenSpec, attach_scalar, double_gyre_grid, rasterize_flow
from lagedge.grid import GridSpec, TimeAxis
from lagedge.io import (VolumeHeader, emit_header, heatmap_samples, import_raw, load_dataset,
                        parse_header, read_header, read_heatmap_pgm, read_ridges_csv, read_volume,
                        save_dataset, write_heatmap_pgm, write_ridges_csv, write_volume)
from lagedge.ridge import RidgeLine, ridge_dissimilarity


@pytest.fixture
def gyre():
    ds = rasterize_flow(AnalyticFlow("double_gyre"), double_gyre_grid(17, 9), TimeAxis(0.0, 0.5, 3))
    return attach_scalar(ds, ScalarGenSpec("stream_function", flow=AnalyticFlow("double_gyre")), "psi")


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.lists(st.integers(1, 50), min_size=2, max_size=3), st.data())
def test_header_round_trip(dims, data):
    d = len(dims)
    h = VolumeHeader(tuple(dims), tuple(data.draw(st.lists(st.floats(1e-6, 1e6), min_size=d, max_size=d))),
                     tuple(data.draw(st.lists(finite, min_size=d, max_size=d))),
                     data.draw(finite), data.draw(st.floats(1e-6, 1e6)), data.draw(st.integers(1, 500)),
                     "vector", d, data.draw(st.sampled_from(["velocity", "a b", "T:mu2"])),
                     data_file="x.raw")
    assert parse_header(emit_header(h)) == h


def test_header_errors():
    good = emit_header(VolumeHeader((4, 3), (1.0, 1.0), (0.0, 0.0), frame_count=2))
    with pytest.raises(MalformedHeader, match="frame_count"):
        parse_header(good.replace("frame_count: 2", "frame_count: 0"))
    with pytest.raises(MalformedHeader):
        parse_header(good.replace("LEVOL 1", "LEVOL 2"))
    with pytest.raises(MalformedHeader):
        parse_header(good.replace("float32le", "float64be"))
    with pytest.raises(MalformedHeader):
        parse_header("\n".join(ln for ln in good.splitlines() if not ln.startswith("dims")))
    with pytest.raises(MalformedHeader):
        VolumeHeader((4, 3), (1.0,), (0.0, 0.0))


def test_volume_round_trip_bitwise(tmp_path, gyre):
    h = VolumeHeader.for_field(gyre.grid, gyre.time, "velocity", vector=True)
    body = write_volume(tmp_path / "v.levol", h, gyre.velocity)
    h2, frames = read_volume(tmp_path / "v.levol")
    assert h2.dims == (17, 9) and h2.frame_count == 3 and h2.data_file == body.name
    assert np.array_equal(frames, gyre.velocity.astype(np.float32))
    # re-writing what was read reproduces the bytes exactly
    body2 = write_volume(tmp_path / "w.levol", h2.__class__(**{**h2.__dict__, "data_file": ""}), frames)
    assert body.read_bytes() == body2.read_bytes()


def test_body_is_x_fastest(tmp_path):
    g = GridSpec((3, 2), (1.0, 1.0))
    vals = np.arange(6.0).reshape(1, 3, 2)
    write_volume(tmp_path / "s.levol", VolumeHeader.for_field(g, TimeAxis(), "s"), vals)
    raw = np.frombuffer((tmp_path / "s.raw").read_bytes(), dtype="<f4")
    assert raw.tolist() == [vals[0, i, j] for j in range(2) for i in range(3)]


def test_truncated_body(tmp_path, gyre):
    h = VolumeHeader.for_field(gyre.grid, gyre.time, "psi")
    body = write_volume(tmp_path / "s.levol", h, gyre.scalars[0])
    body.write_bytes(body.read_bytes()[:-4])
    with pytest.raises(SizeMismatch, match=f"expected {h.body_bytes} bytes, found {h.body_bytes - 4}"):
        read_volume(tmp_path / "s.levol")


def test_missing_files(tmp_path):
    with pytest.raises(IoFailure):
        read_header(tmp_path / "nope.levol")
    with pytest.raises(IoFailure):
        load_dataset(tmp_path)


def test_dataset_bundle(tmp_path, gyre):
    save_dataset(tmp_path / "b", gyre)
    back = load_dataset(tmp_path / "b")
    assert back.names == ("psi",)
    assert np.array_equal(back.velocity, gyre.velocity.astype(np.float32))
    assert np.array_equal(back.scalars[0], gyre.scalars[0].astype(np.float32))
    assert back.grid == gyre.grid and back.time == gyre.time


def test_import_raw(tmp_path):
    vals = np.random.default_rng(0).random((2, 4, 3)).astype("<f4")
    src = tmp_path / "ext" / "data.bin"
    src.parent.mkdir()
    src.write_bytes(np.transpose(vals, (0, 2, 1)).tobytes())
    import_raw(src, tmp_path / "imp.levol", (4, 3), (0.5, 0.5), frames=2, name="ext")
    h, frames = read_volume(tmp_path / "imp.levol")
    assert np.array_equal(frames, vals) and h.name == "ext"
    with pytest.raises(SizeMismatch):
        import_raw(src, tmp_path / "bad.levol", (4, 4), (0.5, 0.5), frames=2)


def _line(pts, s=None):
    pts = np.asarray(pts, dtype=float)
    return RidgeLine(pts, np.zeros(len(pts)) if s is None else s)


def test_csv_examples(tmp_path):
    p = tmp_path / "r.csv"
    write_ridges_csv(p, [_line([(0.1, 0.2), (0.3, 0.4)], [1.0, 2.0])])
    rows = p.read_text().splitlines()
    assert rows[0] == "line_id,vertex_id,x,y,strength" and len(rows) == 3
    write_ridges_csv(p, [])
    assert p.read_text().splitlines() == ["line_id,vertex_id,x,y,strength"]
    assert read_ridges_csv(p) == []


@settings(max_examples=50)
@given(st.lists(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=2, max_size=6)
                .filter(lambda v: all(a != b for a, b in zip(v, v[1:]))), min_size=2, max_size=4))
def test_csv_round_trip(tmp_path_factory, lines):
    p = tmp_path_factory.mktemp("csv") / "r.csv"
    orig = [_line(v, np.arange(len(v)) / 7.0) for v in lines]
    write_ridges_csv(p, orig)
    back = read_ridges_csv(p)
    for a, b in zip(orig, back):
        assert np.array_equal(a.vertices, b.vertices) and np.array_equal(a.strengths, b.strengths)
    for i in range(len(orig)):
        for j in range(len(orig)):
            assert abs(ridge_dissimilarity(orig[i], orig[j]) - ridge_dissimilarity(back[i], back[j])) <= 1e-12


@pytest.mark.parametrize("body", [
    "line_id,vertex_id,x,y,strength\n0,0,1,2\n",
    "line_id,vertex_id,x,y,strength\n0,0,a,2,3\n",
    "line_id,vertex_id,x,y,strength\n0,1,1,2,3\n0,0,1,3,3\n",
    "line_id,vertex_id,x,y,strength\n0,0,1,2,3\n",
    "id,x,y\n",
])
def test_csv_malformed(tmp_path, body):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises((MalformedRow, DataError)):
        read_ridges_csv(p)


def test_pgm_samples():
    assert np.all(heatmap_samples(np.full((3, 3), -1.0), -1.0, 2.0) == 0)
    assert heatmap_samples(np.array([2.0]), -1.0, 2.0)[0] == 65535
    assert heatmap_samples(np.array([0.5]), 0.0, 1.0)[0] == 32768
    assert heatmap_samples(np.array([-5.0, 9.0]), 0.0, 1.0).tolist() == [0, 65535]
    for hi in (1.0, 0.5):
        with pytest.raises(DegenerateRange):
            heatmap_samples(np.zeros(2), 1.0, hi)


def test_pgm_round_trip(tmp_path):
    f = np.linspace(0, 1, 12).reshape(4, 3)
    write_heatmap_pgm(tmp_path / "h.pgm", f, 0.0, 1.0)
    data = (tmp_path / "h.pgm").read_bytes()
    assert data.startswith(b"P5\n# min=0 max=1\n4 3\n65535\n")
    img, lo, hi = read_heatmap_pgm(tmp_path / "h.pgm")
    assert (lo, hi) == (0.0, 1.0)
    assert np.array_equal(img, heatmap_samples(f, 0.0, 1.0))
    # first stored row is the top (highest y) row, big-endian
    first = int.from_bytes(data[len(b"P5\n# min=0 max=1\n4 3\n65535\n"):][:2], "big")
    assert first == heatmap_samples(f, 0.0, 1.0)[0, 2]
