#!/usr/bin/env python3
"""Regenerate src/core/unicode_tables.inc from Python's unicodedata."""
import sys
import unicodedata


def ranges(pred):
    out, start, prev = [], None, None
    for cp in range(0x110000):
        if pred(cp):
            if start is None:
                start = cp
            prev = cp
        elif start is not None:
            out.append((start, prev))
            start = None
    if start is not None:
        out.append((start, prev))
    return out


def main():
    punct = ranges(lambda cp: unicodedata.category(chr(cp)).startswith("P"))
    space = ranges(lambda cp: chr(cp).isspace())
    lower = []
    for cp in range(0x110000):
        ch = chr(cp)
        lo = ch.lower()
        if len(lo) == 1 and lo != ch:
            lower.append((cp, ord(lo)))
    w = sys.stdout.write
    w("// Generated by tools/gen_unicode_tables.py (unicodedata %s). Do not edit.\n"
      % unicodedata.unidata_version)
    w("static constexpr CodeRange kPunctuationRanges[] = {\n")
    for a, b in punct:
        w("    {0x%X, 0x%X},\n" % (a, b))
    w("};\n\nstatic constexpr CodeRange kWhitespaceRanges[] = {\n")
    for a, b in space:
        w("    {0x%X, 0x%X},\n" % (a, b))
    w("};\n\nstatic constexpr CodeMap kLowercaseMap[] = {\n")
    for a, b in lower:
        w("    {0x%X, 0x%X},\n" % (a, b))
    w("};\n")


if __name__ == "__main__":
    main()
