#pragma once

#include <array>
#include <cstdint>

namespace kbound::font {

inline constexpr int kGlyphWidth = 8;
inline constexpr int kGlyphHeight = 16;
inline constexpr int kFirstCode = 32;  // ' '
inline constexpr int kGlyphCount = 95; // ' ' .. '~'

/// Bit 7 of each row byte is the leftmost pixel.
extern const std::array<std::array<std::uint8_t, kGlyphHeight>, kGlyphCount> kGlyphs;

}  // namespace kbound::font
