// Generated by tools/gen_font.py from DejaVu Sans Mono. Do not edit.

#include "kbound/font8x16.hpp"

namespace kbound::font {

const std::array<std::array<std::uint8_t, kGlyphHeight>, kGlyphCount> kGlyphs = {{
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},  //  32  
    {{0x00, 0x00, 0x00, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x00, 0x18, 0x18, 0x00, 0x00, 0x00, 0x00}},  //  33 !
    {{0x00, 0x00, 0x00, 0x24, 0x24, 0x24, 0x24, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},  //  34 "
    {{0x00, 0x00, 0x12, 0x16, 0x14, 0x7f, 0x24, 0x24, 0xfe, 0x68, 0x48, 0x48, 0x00, 0x00, 0x00, 0x00}},  //  35 #
    {{0x00, 0x00, 0x00, 0x00, 0x3c, 0x68, 0x40, 0x38, 0x1c, 0x02, 0x46, 0x3c, 0x00, 0x00, 0x00, 0x00}},  //  36 $
    {{0x00, 0x00, 0x00, 0x70, 0x90, 0x90, 0x76, 0x18, 0x6e, 0x0b, 0x0b, 0x0e, 0x00, 0x00, 0x00, 0x00}},  //  37 %
    {{0x00, 0x00, 0x00, 0x3c, 0x60, 0x20, 0x30, 0x59, 0xcb, 0xc6, 0x46, 0x3a, 0x00, 0x00, 0x00, 0x00}},  //  38 &
    {{0x00, 0x00, 0x00, 0x18, 0x18, 0x18, 0x18, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},  //  39 '
    {{0x00, 0x08, 0x08, 0x18, 0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x18, 0x08, 0x08, 0x00, 0x00, 0x00}},  //  40 (
    {{0x00, 0x30, 0x10, 0x18, 0x18, 0x08, 0x08, 0x08, 0x08, 0x08, 0x18, 0x10, 0x30, 0x00, 0x00, 0x00}},  //  41 )
    {{0x00, 0x00, 0x00, 0x10, 0x52, 0x38, 0x38, 0x52, 0x10, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},  //  42 *
    {{0x00, 0x00, 0x00, 0x00, 0x18, 0x18, 0x18, 0xfe, 0x18, 0x18, 0x18, 0x00, 0x00, 0x00, 0x00, 0x00}},  //  43 +
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x18, 0x18, 0x10, 0x10, 0x00, 0x00}},  //  44 ,
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x3c, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},  //  45 -
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x18, 0x18, 0x00, 0x00, 0x00, 0x00}},  //  46 .
    {{0x00, 0x00, 0x00, 0x06, 0x04, 0x0c, 0x08, 0x08, 0x10, 0x10, 0x30, 0x20, 0x60, 0x40, 0x00, 0x00}},  //  47 /
    {{0x00, 0x00, 0x00, 0x3c, 0x64, 0x46, 0x42, 0x5a, 0x42, 0x46, 0x64, 0x3c, 0x00, 0x00, 0x00, 0x00}},  //  48 0
    {{0x00, 0x00, 0x00, 0x78, 0x08, 0x08, 0x08, 0x08, 0x08, 0x08, 0x08, 0x3e, 0x00, 0x00, 0x00, 0x00}},  //  49 1
    {{0x00, 0x00, 0x00, 0x3c, 0x44, 0x06, 0x04, 0x0c, 0x18, 0x30, 0x60, 0x7e, 0x00, 0x00, 0x00, 0x00}},  //  50 2
    {{0x00, 0x00, 0x00, 0x3c, 0x44, 0x06, 0x04, 0x3c, 0x06, 0x06, 0x46, 0x3c, 0x00, 0x00, 0x00, 0x00}},  //  51 3
    {{0x00, 0x00, 0x00, 0x0c, 0x1c, 0x14, 0x24, 0x64, 0x44, 0x7e, 0x04, 0x04, 0x00, 0x00, 0x00, 0x00}},  //  52 4
    {{0x00, 0x00, 0x00, 0x7c, 0x60, 0x60, 0x7c, 0x04, 0x06, 0x06, 0x44, 0x38, 0x00, 0x00, 0x00, 0x00}},  //  53 5
    {{0x00, 0x00, 0x00, 0x3c, 0x60, 0x40, 0x7c, 0x66, 0x42, 0x42, 0x66, 0x3c, 0x00, 0x00, 0x00, 0x00}},  //  54 6
    {{0x00, 0x00, 0x00, 0x7e, 0x06, 0x04, 0x0c, 0x08, 0x18, 0x18, 0x10, 0x30, 0x00, 0x00, 0x00, 0x00}},  //  55 7
    {{0x00, 0x00, 0x00, 0x3c, 0x66, 0x46, 0x64, 0x3c, 0x66, 0x42, 0x66, 0x3c, 0x00, 0x00, 0x00, 0x00}},  //  56 8
    {{0x00, 0x00, 0x00, 0x3c, 0x64, 0x46, 0x46, 0x66, 0x3e, 0x06, 0x04, 0x38, 0x00, 0x00, 0x00, 0x00}},  //  57 9
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x18, 0x18, 0x00, 0x00, 0x00, 0x18, 0x18, 0x00, 0x00, 0x00, 0x00}},  //  58 :
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x18, 0x18, 0x00, 0x00, 0x00, 0x18, 0x18, 0x10, 0x10, 0x00, 0x00}},  //  59 ;
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x02, 0x1c, 0x60, 0x60, 0x1c, 0x02, 0x00, 0x00, 0x00, 0x00, 0x00}},  //  60 <
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xfe, 0x00, 0x00, 0xfe, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},  //  61 =
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x40, 0x38, 0x0e, 0x0e, 0x38, 0x40, 0x00, 0x00, 0x00, 0x00, 0x00}},  //  62 >
    {{0x00, 0x00, 0x00, 0x3c, 0x06, 0x06, 0x0c, 0x18, 0x10, 0x00, 0x10, 0x10, 0x00, 0x00, 0x00, 0x00}},  //  63 ?
    {{0x00, 0x00, 0x00, 0x3c, 0x62, 0x42, 0xcf, 0x93, 0x93, 0x93, 0xcf, 0x40, 0x60, 0x1c, 0x00, 0x00}},  //  64 @
    {{0x00, 0x00, 0x00, 0x18, 0x18, 0x3c, 0x2c, 0x24, 0x66, 0x7e, 0x42, 0xc3, 0x00, 0x00, 0x00, 0x00}},  //  65 A
    {{0x00, 0x00, 0x00, 0x7c, 0x46, 0x46, 0x46, 0x7c, 0x46, 0x42, 0x46, 0x7c, 0x00, 0x00, 0x00, 0x00}},  //  66 B
    {{0x00, 0x00, 0x00, 0x1c, 0x22, 0x60, 0x40, 0x40, 0x40, 0x60, 0x22, 0x1c, 0x00, 0x00, 0x00, 0x00}},  //  67 C
    {{0x00, 0x00, 0x00, 0x78, 0x44, 0x46, 0x42, 0x42, 0x42, 0x46, 0x44, 0x78, 0x00, 0x00, 0x00, 0x00}},  //  68 D
    {{0x00, 0x00, 0x00, 0x7e, 0x60, 0x60, 0x60, 0x7e, 0x60, 0x60, 0x60, 0x7e, 0x00, 0x00, 0x00, 0x00}},  //  69 E
    {{0x00, 0x00, 0x00, 0x7e, 0x60, 0x60, 0x60, 0x7e, 0x60, 0x60, 0x60, 0x60, 0x00, 0x00, 0x00, 0x00}},  //  70 F
    {{0x00, 0x00, 0x00, 0x3c, 0x62, 0x40, 0x40, 0x4e, 0x42, 0x42, 0x62, 0x3c, 0x00, 0x00, 0x00, 0x00}},  //  71 G
    {{0x00, 0x00, 0x00, 0x42, 0x42, 0x42, 0x42, 0x7e, 0x42, 0x42, 0x42, 0x42, 0x00, 0x00, 0x00, 0x00}},  //  72 H
    {{0x00, 0x00, 0x00, 0x7e, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x7e, 0x00, 0x00, 0x00, 0x00}},  //  73 I
    {{0x00, 0x00, 0x00, 0x3c, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04, 0x4c, 0x78, 0x00, 0x00, 0x00, 0x00}},  //  74 J
    {{0x00, 0x00, 0x00, 0x42, 0x44, 0x48, 0x70, 0x78, 0x48, 0x4c, 0x46, 0x42, 0x00, 0x00, 0x00, 0x00}},  //  75 K
    {{0x00, 0x00, 0x00, 0x60, 0x60, 0x60, 0x60, 0x60, 0x60, 0x60, 0x60, 0x7e, 0x00, 0x00, 0x00, 0x00}},  //  76 L
    {{0x00, 0x00, 0x00, 0xe6, 0xe6, 0xe6, 0xfa, 0xda, 0xda, 0xc2, 0xc2, 0xc2, 0x00, 0x00, 0x00, 0x00}},  //  77 M
    {{0x00, 0x00, 0x00, 0x62, 0x62, 0x72, 0x52, 0x5a, 0x4a, 0x4e, 0x46, 0x46, 0x00, 0x00, 0x00, 0x00}},  //  78 N
    {{0x00, 0x00, 0x00, 0x3c, 0x66, 0x46, 0x42, 0x42, 0x42, 0x46, 0x66, 0x3c, 0x00, 0x00, 0x00, 0x00}},  //  79 O
    {{0x00, 0x00, 0x00, 0x7c, 0x66, 0x62, 0x62, 0x66, 0x7c, 0x60, 0x60, 0x60, 0x00, 0x00, 0x00, 0x00}},  //  80 P
    {{0x00, 0x00, 0x00, 0x3c, 0x66, 0x46, 0x42, 0x42, 0x42, 0x46, 0x66, 0x3c, 0x0c, 0x04, 0x00, 0x00}},  //  81 Q
    {{0x00, 0x00, 0x00, 0x7c, 0x46, 0x46, 0x46, 0x7c, 0x4c, 0x46, 0x42, 0x43, 0x00, 0x00, 0x00, 0x00}},  //  82 R
    {{0x00, 0x00, 0x00, 0x3c, 0x60, 0x40, 0x60, 0x3c, 0x06, 0x02, 0x46, 0x3c, 0x00, 0x00, 0x00, 0x00}},  //  83 S
    {{0x00, 0x00, 0x00, 0xff, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x00, 0x00, 0x00, 0x00}},  //  84 T
    {{0x00, 0x00, 0x00, 0x42, 0x42, 0x42, 0x42, 0x42, 0x42, 0x42, 0x66, 0x3c, 0x00, 0x00, 0x00, 0x00}},  //  85 U
    {{0x00, 0x00, 0x00, 0xc2, 0x42, 0x46, 0x64, 0x24, 0x24, 0x3c, 0x18, 0x18, 0x00, 0x00, 0x00, 0x00}},  //  86 V
    {{0x00, 0x00, 0x00, 0x83, 0xc3, 0xc3, 0xda, 0x5a, 0x5a, 0x6e, 0x66, 0x66, 0x00, 0x00, 0x00, 0x00}},  //  87 W
    {{0x00, 0x00, 0x00, 0x42, 0x66, 0x3c, 0x18, 0x18, 0x3c, 0x24, 0x66, 0xc2, 0x00, 0x00, 0x00, 0x00}},  //  88 X
    {{0x00, 0x00, 0x00, 0xc2, 0x66, 0x24, 0x3c, 0x18, 0x18, 0x18, 0x18, 0x18, 0x00, 0x00, 0x00, 0x00}},  //  89 Y
    {{0x00, 0x00, 0x00, 0x7e, 0x06, 0x04, 0x0c, 0x18, 0x10, 0x20, 0x60, 0x7e, 0x00, 0x00, 0x00, 0x00}},  //  90 Z
    {{0x00, 0x1c, 0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1c, 0x00, 0x00, 0x00}},  //  91 [
    {{0x00, 0x00, 0x00, 0x40, 0x60, 0x20, 0x30, 0x10, 0x10, 0x08, 0x08, 0x0c, 0x04, 0x06, 0x00, 0x00}},  //  92 backslash
    {{0x00, 0x38, 0x08, 0x08, 0x08, 0x08, 0x08, 0x08, 0x08, 0x08, 0x08, 0x08, 0x38, 0x00, 0x00, 0x00}},  //  93 ]
    {{0x00, 0x00, 0x00, 0x18, 0x3c, 0x64, 0x42, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},  //  94 ^
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xff, 0x00}},  //  95 _
    {{0x00, 0x00, 0x30, 0x10, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},  //  96 `
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x3c, 0x44, 0x06, 0x3e, 0x46, 0x46, 0x3e, 0x00, 0x00, 0x00, 0x00}},  //  97 a
    {{0x00, 0x40, 0x40, 0x40, 0x40, 0x7c, 0x66, 0x62, 0x42, 0x62, 0x66, 0x7c, 0x00, 0x00, 0x00, 0x00}},  //  98 b
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x1c, 0x22, 0x60, 0x60, 0x60, 0x22, 0x1c, 0x00, 0x00, 0x00, 0x00}},  //  99 c
    {{0x00, 0x06, 0x06, 0x06, 0x06, 0x3e, 0x66, 0x46, 0x46, 0x46, 0x66, 0x3e, 0x00, 0x00, 0x00, 0x00}},  // 100 d
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x3c, 0x66, 0x42, 0x7e, 0x40, 0x62, 0x3c, 0x00, 0x00, 0x00, 0x00}},  // 101 e
    {{0x00, 0x0e, 0x18, 0x10, 0x10, 0x7e, 0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x00, 0x00, 0x00, 0x00}},  // 102 f
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x3e, 0x66, 0x46, 0x46, 0x46, 0x66, 0x3e, 0x06, 0x04, 0x38, 0x00}},  // 103 g
    {{0x00, 0x40, 0x40, 0x40, 0x40, 0x7c, 0x66, 0x66, 0x46, 0x46, 0x46, 0x46, 0x00, 0x00, 0x00, 0x00}},  // 104 h
    {{0x00, 0x18, 0x00, 0x00, 0x00, 0x38, 0x18, 0x18, 0x18, 0x18, 0x18, 0x7e, 0x00, 0x00, 0x00, 0x00}},  // 105 i
    {{0x00, 0x08, 0x00, 0x00, 0x00, 0x38, 0x08, 0x08, 0x08, 0x08, 0x08, 0x08, 0x08, 0x18, 0x70, 0x00}},  // 106 j
    {{0x00, 0x60, 0x60, 0x60, 0x60, 0x66, 0x6c, 0x78, 0x78, 0x6c, 0x66, 0x62, 0x00, 0x00, 0x00, 0x00}},  // 107 k
    {{0x00, 0x70, 0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x0e, 0x00, 0x00, 0x00, 0x00}},  // 108 l
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x7e, 0x5a, 0x5a, 0x5a, 0x5a, 0x5a, 0x5a, 0x00, 0x00, 0x00, 0x00}},  // 109 m
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x7c, 0x66, 0x66, 0x46, 0x46, 0x46, 0x46, 0x00, 0x00, 0x00, 0x00}},  // 110 n
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x3c, 0x66, 0x42, 0x42, 0x42, 0x66, 0x3c, 0x00, 0x00, 0x00, 0x00}},  // 111 o
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x7c, 0x66, 0x62, 0x42, 0x62, 0x66, 0x7c, 0x40, 0x40, 0x40, 0x00}},  // 112 p
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x3e, 0x66, 0x46, 0x46, 0x46, 0x66, 0x3e, 0x06, 0x06, 0x06, 0x00}},  // 113 q
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x3e, 0x30, 0x30, 0x30, 0x30, 0x30, 0x30, 0x00, 0x00, 0x00, 0x00}},  // 114 r
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x3c, 0x64, 0x60, 0x3c, 0x04, 0x44, 0x3c, 0x00, 0x00, 0x00, 0x00}},  // 115 s
    {{0x00, 0x00, 0x00, 0x10, 0x10, 0x7e, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1e, 0x00, 0x00, 0x00, 0x00}},  // 116 t
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x46, 0x46, 0x46, 0x46, 0x66, 0x66, 0x3e, 0x00, 0x00, 0x00, 0x00}},  // 117 u
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x42, 0x46, 0x64, 0x24, 0x2c, 0x18, 0x18, 0x00, 0x00, 0x00, 0x00}},  // 118 v
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x83, 0xc3, 0x5a, 0x5a, 0x7e, 0x66, 0x64, 0x00, 0x00, 0x00, 0x00}},  // 119 w
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x46, 0x24, 0x18, 0x18, 0x3c, 0x24, 0x42, 0x00, 0x00, 0x00, 0x00}},  // 120 x
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x42, 0x66, 0x24, 0x24, 0x3c, 0x18, 0x18, 0x18, 0x10, 0x60, 0x00}},  // 121 y
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x7e, 0x04, 0x08, 0x18, 0x30, 0x20, 0x7e, 0x00, 0x00, 0x00, 0x00}},  // 122 z
    {{0x00, 0x0c, 0x18, 0x18, 0x18, 0x10, 0x70, 0x10, 0x18, 0x18, 0x18, 0x18, 0x0c, 0x00, 0x00, 0x00}},  // 123 {
    {{0x00, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x18, 0x00, 0x00}},  // 124 |
    {{0x00, 0x70, 0x10, 0x18, 0x18, 0x18, 0x0c, 0x18, 0x18, 0x18, 0x10, 0x10, 0x70, 0x00, 0x00, 0x00}},  // 125 }
    {{0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x70, 0x0e, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},  // 126 ~
}};

}  // namespace kbound::font
