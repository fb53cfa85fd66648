import numpy as np
import pytest

from rac.nn import ArchSpec, init_params, load_params, save_params


def test_round_trip_bit_exact(tmp_path):
    arch = ArchSpec(
        in_ch=5, in_h=16, in_w=16, out_ch=3, enc_widths=(6, 8), bottleneck_width=8,
        tile_dim=4, dec_widths=(6, 4),
    )
    params = init_params(arch, seed=123)
    path = tmp_path / "model.racw"
    save_params(params, path)
    loaded = load_params(path)
    assert loaded.names() == params.names()
    for name in params.names():
        assert loaded.values[name].tobytes() == params.values[name].tobytes()
        assert loaded.values[name].shape == params.values[name].shape

    # save -> load -> save yields identical bytes
    path2 = tmp_path / "model2.racw"
    save_params(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_header_layout(tmp_path):
    params = init_params(ArchSpec(in_ch=1, in_h=2, in_w=2, out_ch=1, head="linear", act="linear"), seed=0)
    path = tmp_path / "m.racw"
    save_params(params, path)
    blob = path.read_bytes()
    assert blob[:4] == b"RACW"
    assert int.from_bytes(blob[4:8], "little") == 1
    assert int.from_bytes(blob[8:12], "little") == 2  # head.w and head.b


def test_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.racw"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="not a RACW"):
        load_params(path)


def test_rejects_trailing_bytes(tmp_path):
    params = init_params(ArchSpec(in_ch=1, in_h=2, in_w=2, out_ch=1, head="linear", act="linear"), seed=0)
    path = tmp_path / "m.racw"
    save_params(params, path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(ValueError, match="trailing"):
        load_params(path)
