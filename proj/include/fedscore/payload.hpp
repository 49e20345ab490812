#pragma once

// FSCR score payload, little-endian:
//   "FSCR" | u16 version | u32 rows | u16 cols | cols x u8 label index |
//   zero pad to a 4-byte boundary | rows*cols f32, row-major

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedscore/core.hpp"

namespace fedscore {

inline constexpr std::uint16_t kScorePayloadVersion = 1;
inline constexpr std::size_t kScorePayloadHeaderBytes = 12;

std::size_t score_payload_size(std::size_t rows, std::size_t cols) noexcept;
/// float32 weights, matching the score encoding.
std::size_t weight_payload_size(std::size_t parameter_count) noexcept;

std::vector<std::uint8_t> encode_score_payload(const ScoreMatrix& scores);
/// Throws ParseError on malformed input.
ScoreMatrix decode_score_payload(std::span<const std::uint8_t> bytes);

/// The matrix as it looks after a float32 round trip.
ScoreMatrix quantize_f32(const ScoreMatrix& scores);

}  // namespace fedscore
