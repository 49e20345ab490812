#include <cstring>

#include "doctest.h"
#include "fedscore/payload.hpp"
#include "support.hpp"

using namespace fedscore;
using fedscore::testing::kind_of;
using fedscore::testing::random_scores;

TEST_CASE("payload sizes") {
  CHECK(score_payload_size(2000, 2) == 16016);  // 12 header + 2 columns + 2 pad + 16000
  CHECK(score_payload_size(1, 1) == 20);
  CHECK(score_payload_size(1, 4) == 32);
  CHECK(score_payload_size(1, 5) == 40);
  CHECK(weight_payload_size(690) == 2760);
  // Linear in rows x cols once the column list is padded.
  CHECK(score_payload_size(10, 4) - score_payload_size(5, 4) == 4 * 5 * 4);
}

TEST_CASE("encoding layout is little-endian FSCR") {
  const ScoreMatrix s(1, {LabelId{1}, LabelId{3}}, {1.0, -2.0});
  const auto bytes = encode_score_payload(s);
  REQUIRE(bytes.size() == 24);
  CHECK(std::memcmp(bytes.data(), "FSCR", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 1);
  CHECK(bytes[10] == 2);
  CHECK(bytes[12] == 1);
  CHECK(bytes[13] == 3);
  CHECK(bytes[14] == 0);
  CHECK(bytes[15] == 0);
  // 1.0f = 0x3F800000
  CHECK(bytes[16] == 0x00);
  CHECK(bytes[19] == 0x3F);
  CHECK(encode_score_payload(ScoreMatrix(2000, {LabelId{0}, LabelId{1}}, std::vector<double>(4000, 0.5))).size() ==
        16016);
}

TEST_CASE("round trip equals float32 quantization") {
  Xoshiro256 rng(31);
  for (int t = 0; t < 100; ++t) {
    LabelSet cols;
    for (std::uint16_t k = 0; k < 12; ++k) {
      if (rng.uniform() < 0.4) cols.push_back(LabelId{k});
    }
    if (cols.empty()) cols.push_back(LabelId{7});
    const ScoreMatrix s = random_scores(rng, 1 + rng.below(40), cols, -1e3, 1e3);
    const auto bytes = encode_score_payload(s);
    CHECK(bytes.size() == score_payload_size(s.rows(), s.n_cols()));
    CHECK(decode_score_payload(bytes) == quantize_f32(s));
  }
}

TEST_CASE("encode and decode errors") {
  CHECK(kind_of([] { encode_score_payload(ScoreMatrix(1, {LabelId{0}}, {1e300})); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { encode_score_payload(ScoreMatrix(1, {LabelId{256}}, {1.0})); }) == ErrorKind::InvalidArgument);

  const auto good = encode_score_payload(ScoreMatrix(2, {LabelId{0}, LabelId{2}}, {1, 2, 3, 4}));
  auto corrupt = [&](auto&& edit) {
    auto b = good;
    edit(b);
    return kind_of([&] { decode_score_payload(b); });
  };
  CHECK(corrupt([](auto& b) { b[0] = 'X'; }) == ErrorKind::ParseError);
  CHECK(corrupt([](auto& b) { b[4] = 2; }) == ErrorKind::ParseError);
  CHECK(corrupt([](auto& b) { b.pop_back(); }) == ErrorKind::ParseError);
  CHECK(corrupt([](auto& b) { b.push_back(0); }) == ErrorKind::ParseError);
  CHECK(corrupt([](auto& b) { b[14] = 1; }) == ErrorKind::ParseError);
  CHECK(corrupt([](auto& b) { b.resize(8); }) == ErrorKind::ParseError);
  CHECK(corrupt([](auto& b) { b[13] = 0; }) == ErrorKind::ParseError);  // columns not ascending
}
