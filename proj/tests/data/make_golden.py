"""Writes the golden binary files with Python's struct module, independently of the C++ encoders."""
import struct

def dataset():
    names = ["ring", "tri"]
    counts = [1, 2]
    h, w, c = 2, 3, 1
    out = b"SFDS" + struct.pack("<5I", 1, len(counts), h, w, c)
    out += struct.pack(f"<{len(counts)}I", *counts)
    for n in names:
        b = n.encode("utf-8")
        out += struct.pack("<H", len(b)) + b
    out += bytes((i * 13) % 256 for i in range(sum(counts) * h * w * c))
    return out

def checkpoint():
    entries = [
        ("w", [2, 3], [0.5, -1.25, 3.0, 0.0, 2.0, -8.0]),
        ("b", [3], [1.0, 2.0, 3.0]),
        ("s", [], [7.5]),
    ]
    out = b"SFWT" + struct.pack("<2I", 1, len(entries))
    for name, shape, values in entries:
        b = name.encode("utf-8")
        out += struct.pack("<H", len(b)) + b + struct.pack("<B", len(shape))
        out += b"".join(struct.pack("<I", d) for d in shape)
        out += b"".join(struct.pack("<f", v) for v in values)
    return out

if __name__ == "__main__":
    open("tiny.sfds", "wb").write(dataset())
    open("tiny.sfwt", "wb").write(checkpoint())
