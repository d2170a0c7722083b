#include <gtest/gtest.h>

#include "featvid/external_codec.hpp"

using namespace featvid;

namespace {

std::vector<QuantizedFrame> noisy_frames(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<QuantizedFrame> out;
  for (int i = 0; i < count; ++i) {
    QuantizedFrame f(16, 8, 13);
    for (auto& b : f.planes) b = std::uint8_t(rng.below(256));
    out.push_back(f);
  }
  return out;
}

QuantizationProfile unit_profile(int ch) {
  QuantizationProfile p;
  p.min.assign(std::size_t(ch), 0.0f);
  p.max.assign(std::size_t(ch), 1.0f);
  return p;
}

const ExternalToolSpec kGzip{"gzip -9 -c {input} > {output}", "gzip -d -c {input} > {output}"};
const ExternalToolSpec kMissing{"featvid-no-such-encoder {input} {output}", "featvid-no-such-encoder -d {input} {output}"};

}  // namespace

TEST(TilePacking, ThreeChannelsPerStackedTile) {
  EXPECT_EQ(tile_count(13), 5);
  EXPECT_EQ(tile_count(3), 1);
  const auto f = noisy_frames(1, 4)[0];
  const auto packed = pack_tiles(f);
  ASSERT_EQ(packed.size(), std::size_t(16 * 8 * 5 * 3));
  // channel 7 -> tile 2, color 1; pixel (u=3, v=5)
  EXPECT_EQ(packed[(2 * 16 * 8 + 5 * 16 + 3) * 3 + 1], f.plane(7)[5 * 16 + 3]);
  // unused color of the last tile stays zero
  EXPECT_EQ(packed[(4 * 16 * 8 + 9) * 3 + 1], 0);
  EXPECT_EQ(unpack_tiles(packed, 16, 8, 13), f);
}

TEST(ExternalCodec, LosslessToolRoundTripIsExact) {
  const auto frames = noisy_frames(3, 1);
  const auto enc = external_encode(frames, kGzip);
  EXPECT_EQ(enc.frame_count, 3);
  EXPECT_EQ(external_decode(enc, kGzip), frames);
}

TEST(ExternalCodec, ConstantStreamIsSmallerThanOneRawFrame) {
  QuantizedFrame gray(64, 64, 13);
  std::fill(gray.planes.begin(), gray.planes.end(), std::uint8_t(128));
  const std::vector<QuantizedFrame> frames(10, gray);
  const auto enc = external_encode(frames, kGzip);
  EXPECT_LT(enc.bytes.size(), gray.planes.size());
}

TEST(ExternalCodec, MissingToolIsUnavailable) {
  try {
    external_encode(noisy_frames(1, 2), kMissing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unavailable);
  }
}

TEST(ExternalCodec, MissingToolFallsBackToBuiltinCodec) {
  const auto frames = noisy_frames(2, 3);
  const auto r = encode_gof_preferring(frames, kMissing, {1, true}, unit_profile(13));
  EXPECT_FALSE(r.external);
  ASSERT_TRUE(r.builtin);
  EXPECT_NE(r.fallback_reason.find("not found"), std::string::npos);
  EXPECT_EQ(decode_gof(*r.builtin), frames);
  const auto used = encode_gof_preferring(frames, kGzip, {1, true}, unit_profile(13));
  EXPECT_TRUE(used.external);
  EXPECT_EQ(used.size_bytes(), used.external->bytes.size());
}

TEST(ExternalCodec, FailingToolIsAnIoError) {
  const ExternalToolSpec failing{"false {input}", "false {input}"};
  try {
    external_encode(noisy_frames(1, 2), failing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::io);
  }
}

TEST(ExternalCodec, SpecFromJson) {
  const auto s = external_tool_from_json(nlohmann::json{{"encode", "a {input}"}, {"decode", "b {output}"}});
  EXPECT_EQ(s.encode_command, "a {input}");
  EXPECT_EQ(s.decode_command, "b {output}");
}
