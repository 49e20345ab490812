#include "fedscore/payload.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <string>

namespace fedscore {
namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'S', 'C', 'R'};

std::size_t padded_columns(std::size_t cols) noexcept {
  return (kScorePayloadHeaderBytes + cols + 3) / 4 * 4 - kScorePayloadHeaderBytes;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}

float to_f32(double v) {
  const float f = static_cast<float>(v);
  if (!std::isfinite(f)) throw Error(ErrorKind::InvalidArgument, "score outside float32 range");
  return f;
}

}  // namespace

std::size_t score_payload_size(std::size_t rows, std::size_t cols) noexcept {
  return kScorePayloadHeaderBytes + padded_columns(cols) + 4 * rows * cols;
}

std::size_t weight_payload_size(std::size_t parameter_count) noexcept { return 4 * parameter_count; }

std::vector<std::uint8_t> encode_score_payload(const ScoreMatrix& scores) {
  if (scores.rows() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorKind::InvalidArgument, "too many rows for the score payload");
  }
  for (auto c : scores.cols()) {
    if (c.value > std::numeric_limits<std::uint8_t>::max()) {
      throw Error(ErrorKind::InvalidArgument, "label index does not fit the payload column byte");
    }
  }
  std::vector<std::uint8_t> out;
  out.reserve(score_payload_size(scores.rows(), scores.n_cols()));
  for (std::uint8_t b : kMagic) out.push_back(b);
  put_u16(out, kScorePayloadVersion);
  put_u32(out, static_cast<std::uint32_t>(scores.rows()));
  put_u16(out, static_cast<std::uint16_t>(scores.n_cols()));
  for (auto c : scores.cols()) out.push_back(static_cast<std::uint8_t>(c.value));
  out.resize(kScorePayloadHeaderBytes + padded_columns(scores.n_cols()), 0);
  for (double v : scores.values()) put_u32(out, std::bit_cast<std::uint32_t>(to_f32(v)));
  return out;
}

ScoreMatrix decode_score_payload(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kScorePayloadHeaderBytes) throw Error(ErrorKind::ParseError, "payload shorter than header");
  for (std::size_t k = 0; k < 4; ++k) {
    if (bytes[k] != kMagic[k]) throw Error(ErrorKind::ParseError, "bad payload magic");
  }
  const std::uint16_t version = get_u16(bytes, 4);
  if (version != kScorePayloadVersion) {
    throw Error(ErrorKind::ParseError, "unsupported payload version " + std::to_string(version));
  }
  const std::size_t rows = get_u32(bytes, 6);
  const std::size_t cols = get_u16(bytes, 10);
  if (bytes.size() != score_payload_size(rows, cols)) {
    throw Error(ErrorKind::ParseError, "payload length does not match its header");
  }
  LabelSet labels;
  for (std::size_t c = 0; c < cols; ++c) {
    labels.push_back(LabelId{bytes[kScorePayloadHeaderBytes + c]});
  }
  const std::size_t data_start = kScorePayloadHeaderBytes + padded_columns(cols);
  for (std::size_t k = kScorePayloadHeaderBytes + cols; k < data_start; ++k) {
    if (bytes[k] != 0) throw Error(ErrorKind::ParseError, "non-zero payload padding");
  }
  std::vector<double> values(rows * cols);
  for (std::size_t k = 0; k < values.size(); ++k) {
    values[k] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, data_start + 4 * k)));
  }
  try {
    return ScoreMatrix(rows, std::move(labels), std::move(values));
  } catch (const Error& e) {
    throw Error(ErrorKind::ParseError, e.message());
  }
}

ScoreMatrix quantize_f32(const ScoreMatrix& scores) {
  std::vector<double> values(scores.values().size());
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = static_cast<double>(to_f32(scores.values()[k]));
  return ScoreMatrix(scores.rows(), scores.cols(), std::move(values));
}

}  // namespace fedscore
