"""Writes the NIfTI-1 test fixtures with the standard library only."""
import gzip
import struct


def header(dims, datatype, bitpix, slope=0.0, inter=0.0, endian="<", sizeof_hdr=348,
           magic=b"n+1\0", vox_offset=352.0):
    h = bytearray(348)
    struct.pack_into(endian + "i", h, 0, sizeof_hdr)
    dim = [len(dims)] + list(dims) + [1] * (7 - len(dims))
    struct.pack_into(endian + "8h", h, 40, *dim)
    struct.pack_into(endian + "h", h, 70, datatype)
    struct.pack_into(endian + "h", h, 72, bitpix)
    struct.pack_into(endian + "8f", h, 76, *([1.0] * 8))
    struct.pack_into(endian + "f", h, 108, vox_offset)
    struct.pack_into(endian + "f", h, 112, slope)
    struct.pack_into(endian + "f", h, 116, inter)
    h[344:348] = magic
    return bytes(h) + b"\0" * 4


def save(name, data, compress=False):
    if compress:
        data = gzip.compress(data, mtime=0)
    with open(name, "wb") as f:
        f.write(data)


def f32_volume():
    dims = (3, 4, 5)
    values = [0.5 * i - 3.0 for i in range(60)]
    return dims, values


dims, values = f32_volume()
f32 = header(dims, 16, 32) + struct.pack("<60f", *values)
save("f32_3x4x5.nii", f32)
save("f32_3x4x5.nii.gz", f32, compress=True)

u8 = header((2, 3, 4), 2, 8, slope=2.0, inter=-1.0) + bytes(range(24))
save("u8_scaled_2x3x4.nii", u8)

i16 = header((4, 2, 2), 4, 16) + struct.pack("<16h", *[-100 * k + 7 for k in range(16)])
save("i16_4x2x2.nii.gz", i16, compress=True)

save("bad_big_endian.nii", header((3, 4, 5), 16, 32, endian=">") + struct.pack(">60f", *values))
save("bad_magic.nii", header((3, 4, 5), 16, 32, magic=b"ni1\0") + struct.pack("<60f", *values))
save("bad_datatype.nii", header((3, 4, 5), 64, 64) + b"\0" * 480)
save("bad_bitpix.nii", header((3, 4, 5), 16, 16) + struct.pack("<60f", *values))
save("bad_frames.nii", header((3, 4, 5, 2), 16, 32) + b"\0" * 480)
save("truncated_voxels.nii", f32[:-9])
save("truncated_header.nii", f32[:100])
