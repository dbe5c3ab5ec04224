#!/usr/bin/env python3
"""Regenerates src/unicode_tables.inc from the Python unicodedata database.

Emits three kinds of tables:
  - codepoint ranges for Alphabetic-ish (L*), Uppercase (Lu), and decimal digits (Nd)
  - a lowercase mapping table (codepoint -> up to 3 codepoints)
Run:  python3 scripts/gen_unicode_tables.py > src/unicode_tables.inc
"""
import sys
import unicodedata


def ranges(pred):
    out = []
    start = None
    for cp in range(0x110000):
        if pred(cp):
            if start is None:
                start = cp
        else:
            if start is not None:
                out.append((start, cp - 1))
                start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def cat(cp):
    return unicodedata.category(chr(cp))


def emit_ranges(name, rs):
    print(f"static const CodepointRange {name}[] = {{")
    for i in range(0, len(rs), 4):
        row = ", ".join(f"{{0x{a:X}, 0x{b:X}}}" for a, b in rs[i:i + 4])
        print(f"    {row},")
    print("};")
    print(f"static const size_t {name}_len = {len(rs)};")
    print()


def main():
    alpha = ranges(lambda cp: cat(cp).startswith("L"))
    upper = ranges(lambda cp: cat(cp) == "Lu")
    digit = ranges(lambda cp: cat(cp) == "Nd")

    lower_map = []
    for cp in range(0x110000):
        c = chr(cp)
        low = c.lower()
        if low != c:
            cps = [ord(x) for x in low]
            assert len(cps) <= 3, hex(cp)
            while len(cps) < 3:
                cps.append(0)
            lower_map.append((cp, cps))

    print("// Generated by scripts/gen_unicode_tables.py; do not edit by hand.")
    print()
    emit_ranges("kAlphaRanges", alpha)
    emit_ranges("kUpperRanges", upper)
    emit_ranges("kDigitRanges", digit)

    print("static const LowerMapEntry kLowerMap[] = {")
    for i in range(0, len(lower_map), 3):
        row = ", ".join(
            f"{{0x{cp:X}, {{0x{a:X}, 0x{b:X}, 0x{c:X}}}}}"
            for cp, (a, b, c) in lower_map[i:i + 3])
        print(f"    {row},")
    print("};")
    print(f"static const size_t kLowerMap_len = {len(lower_map)};")


if __name__ == "__main__":
    main()
