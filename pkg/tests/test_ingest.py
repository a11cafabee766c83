import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from organoquant.imaging import ChannelImage
from organoquant.ingest import (
    CziError,
    DimensionMismatch,
    EmptyInput,
    MalformedHeader,
    MissingChannel,
    TruncatedFile,
    UnknownMarker,
    UnsupportedCompression,
    UnsupportedPixelType,
    ZeroDimension,
    extract_channel,
    parse_container,
    write_fixture,
)
from organoquant.ingest import pgm
from organoquant.ingest.czi import ENTRY_DV, SEGMENT_HEADER, _segment

MAPPING = {"N-cad": 0, "PAX6": 1, "E-cad": 2, "DAPI": 3}

# byte offsets inside the first subblock of a write_fixture container
SUB0 = 32 + 512
ENTRY0 = SUB0 + 32 + 16
PIXEL_TYPE_AT = ENTRY0 + 2
COMPRESSION_AT = ENTRY0 + 2 + 4 + 8 + 4


def planes(n=4, h=16, w=24, depth=16, seed=0):
    rng = np.random.default_rng(seed)
    hi = 2**depth
    return [ChannelImage(rng.integers(0, hi, (h, w)), depth) for _ in range(n)]


def test_index_of_four_plane_fixture():
    data = write_fixture(planes())
    idx = parse_container(data)
    assert len(idx.subblocks) == 4
    assert [sb.channel_index for sb in idx.subblocks] == [0, 1, 2, 3]
    assert [s.segment_id for s in idx.segments] == (
        ["ZISRAWFILE"] + ["ZISRAWSUBBLOCK"] * 4 + ["ZISRAWDIRECTORY"]
    )
    assert idx.file_version == (1, 0)
    assert all((sb.width, sb.height, sb.pixel_type) == (24, 16, "Gray16") for sb in idx.subblocks)


def test_extract_round_trip_64():
    ps = planes(4, 64, 64)
    data = write_fixture(ps)
    idx = parse_container(data)
    for marker, i in MAPPING.items():
        got = extract_channel(idx, data, marker, MAPPING)
        assert got.marker == marker and got.bit_depth == 16
        assert np.array_equal(got.pixels, ps[i].pixels)


def test_extract_with_swapped_mapping_and_stream():
    ps = planes(4)
    data = write_fixture(ps)
    idx = parse_container(io.BytesIO(data))
    got = extract_channel(idx, data, "N-cad", {"N-cad": 1})
    assert np.array_equal(got.pixels, ps[1].pixels)


def test_extract_preserves_full_range():
    p = ChannelImage(np.array([[0, 65535], [1, 65534]]), 16)
    data = write_fixture([p])
    got = extract_channel(parse_container(data), data, "N-cad", {"N-cad": 0})
    assert got.pixels.tolist() == [[0, 65535], [1, 65534]]


def test_gray8_round_trip():
    ps = planes(2, depth=8)
    data = write_fixture(ps)
    idx = parse_container(data)
    assert idx.subblocks[0].pixel_type == "Gray8"
    got = extract_channel(idx, data, "b", {"b": 1})
    assert got.bit_depth == 8 and np.array_equal(got.pixels, ps[1].pixels)


def test_unknown_marker_and_missing_channel():
    data = write_fixture(planes(2))
    idx = parse_container(data)
    with pytest.raises(UnknownMarker):
        extract_channel(idx, data, "SOX2", MAPPING)
    with pytest.raises(MissingChannel):
        extract_channel(idx, data, "DAPI", MAPPING)


def test_writer_is_deterministic_and_validates():
    ps = planes(3)
    assert write_fixture(ps) == write_fixture(ps)
    with pytest.raises(EmptyInput):
        write_fixture([])
    with pytest.raises(DimensionMismatch):
        write_fixture([ps[0], ChannelImage(np.zeros((3, 3), np.uint16), 16)])
    with pytest.raises(ZeroDimension):
        write_fixture([ChannelImage(np.zeros((4, 0), np.uint16), 16)])


def test_short_and_bad_header():
    with pytest.raises(TruncatedFile):
        parse_container(b"ZISRAWFILE")
    data = bytearray(write_fixture(planes(1)))
    data[0:6] = b"XXXXXX"
    with pytest.raises(MalformedHeader):
        parse_container(bytes(data))


def test_every_truncation_is_rejected():
    data = write_fixture(planes(2, 4, 5))
    for cut in range(len(data)):
        with pytest.raises(CziError):
            parse_container(data[:cut])


def test_unsupported_pixel_type_and_compression():
    data = bytearray(write_fixture(planes(1)))
    struct.pack_into("<i", data, PIXEL_TYPE_AT, 12)
    with pytest.raises(UnsupportedPixelType):
        parse_container(bytes(data))
    data = bytearray(write_fixture(planes(1)))
    struct.pack_into("<i", data, COMPRESSION_AT, 4)
    with pytest.raises(UnsupportedCompression):
        parse_container(bytes(data))
    assert struct.unpack_from("<2si", write_fixture(planes(1)), ENTRY0) == (b"DV", 1)


def test_unsupported_dimension():
    from organoquant.ingest import UnsupportedDimension

    data = bytearray(write_fixture(planes(1)))
    # third dimension entry (C) of the subblock: size field -> 2
    c_entry = ENTRY0 + ENTRY_DV.size + 2 * 20
    assert data[c_entry:c_entry + 1] == b"C"
    struct.pack_into("<i", data, c_entry + 8, 2)
    struct.pack_into("<i", data, c_entry + 16, 2)
    with pytest.raises(UnsupportedDimension):
        parse_container(bytes(data))


def test_unknown_segments_are_indexed_and_skipped():
    ps = planes(2)
    data = write_fixture(ps) + _segment(b"VENDORBLOB", b"\x01" * 40) + _segment(b"DELETED", b"")
    idx = parse_container(data)
    assert [s.segment_id for s in idx.segments[-2:]] == ["unknown", "DELETED"]
    assert idx.segments[-2].raw_id == b"VENDORBLOB"
    got = extract_channel(idx, data, "PAX6", MAPPING)
    assert np.array_equal(got.pixels, ps[1].pixels)


def test_header_pointer_beyond_eof():
    data = bytearray(write_fixture(planes(1)))
    # directory_position sits after version(8), reserved(8), GUIDs(32), file_part(4)
    struct.pack_into("<q", data, SEGMENT_HEADER.size + 52, len(data) + 100)
    with pytest.raises(TruncatedFile):
        parse_container(bytes(data))


def test_random_fixture_round_trips():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(1, 9))
        h, w = int(rng.integers(1, 40)), int(rng.integers(1, 40))
        depth = int(rng.choice([8, 16]))
        ps = [ChannelImage(rng.integers(0, 2**depth, (h, w)), depth) for _ in range(n)]
        data = write_fixture(ps)
        idx = parse_container(data)
        mapping = {f"m{i}": i for i in range(n)}
        for m, i in mapping.items():
            assert extract_channel(idx, data, m, mapping) == ChannelImage(ps[i].pixels, depth, m)


# graymaps

def test_pgm_hand_built():
    img = pgm.ingest_raster_fallback(b"P5\n2 2\n255\n\x00\x01\x02\x03", "DAPI")
    assert img.bit_depth == 8 and img.marker == "DAPI"
    assert img.pixels.tolist() == [[0, 1], [2, 3]]


def test_pgm_16bit_is_big_endian_and_comments():
    img = pgm.ingest_raster_fallback(b"P5 # c\n1 2\n# x\n65535\n\x01\x02\xff\xff")
    assert img.bit_depth == 16 and img.pixels.tolist() == [[0x0102], [65535]]


def test_pgm_errors():
    with pytest.raises(pgm.BadMaxval):
        pgm.ingest_raster_fallback(b"P5\n2 2\n1023\n" + b"\x00" * 8)
    with pytest.raises(pgm.BadMagic):
        pgm.ingest_raster_fallback(b"P6\n2 2\n255\n" + b"\x00" * 12)
    with pytest.raises(pgm.TruncatedPixels):
        pgm.ingest_raster_fallback(b"P5\n2 2\n255\n\x00\x01")


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.sampled_from([8, 16]), st.integers(0, 2**32 - 1))
def test_pgm_round_trip(h, w, depth, seed):
    rng = np.random.default_rng(seed)
    img = ChannelImage(rng.integers(0, 2**depth, (h, w)), depth)
    assert pgm.ingest_raster_fallback(pgm.write_pgm(img)) == img
