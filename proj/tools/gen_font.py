#!/usr/bin/env python3
"""Rasterize DejaVu Sans Mono into the 8x16 bitmap table used by src/font8x16.cpp."""
import sys
from PIL import Image, ImageDraw, ImageFont

FONT = "/usr/share/fonts/truetype/dejavu/DejaVuSansMono.ttf"
W, H = 8, 16


def glyph_rows(font, ch):
    img = Image.new("L", (W, H), 0)
    draw = ImageDraw.Draw(img)
    draw.text((0, -1), ch, fill=255, font=font)
    rows = []
    for y in range(H):
        bits = 0
        for x in range(W):
            if img.getpixel((x, y)) >= 110:
                bits |= 0x80 >> x
        rows.append(bits)
    return rows


def main(out):
    font = ImageFont.truetype(FONT, 13)
    lines = [
        "// Generated by tools/gen_font.py from DejaVu Sans Mono. Do not edit.",
        "",
        '#include "kbound/font8x16.hpp"',
        "",
        "namespace kbound::font {",
        "",
        "const std::array<std::array<std::uint8_t, kGlyphHeight>, kGlyphCount> kGlyphs = {{",
    ]
    for code in range(32, 127):
        rows = glyph_rows(font, chr(code))
        body = ", ".join(f"0x{r:02x}" for r in rows)
        label = chr(code) if chr(code) not in "\\" else "backslash"
        lines.append(f"    {{{{{body}}}}},  // {code:3d} {label}")
    lines += ["}};", "", "}  // namespace kbound::font", ""]
    with open(out, "w") as f:
        f.write("\n".join(lines))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/font8x16.cpp")
