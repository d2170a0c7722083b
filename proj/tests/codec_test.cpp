#include <gtest/gtest.h>

#include <map>

#include "test_support.hpp"
#include "featvid/codec.hpp"
#include "featvid/sequence.hpp"

using namespace featvid;
using featvid::testing::max_abs_error;
using featvid::testing::test_gof;
using featvid::testing::unit_profile;

TEST(RangeCoder, BitsRoundTripWithSkewedSource) {
  Rng rng(3);
  std::vector<int> bits;
  for (int i = 0; i < 20000; ++i) bits.push_back(rng.uniform(0, 1) < 0.9 ? 0 : 1);
  std::vector<std::uint32_t> raw;
  for (int i = 0; i < 500; ++i) raw.push_back(std::uint32_t(rng.uniform(0, 1 << 20)));
  RangeEncoder enc;
  std::uint16_t p = kProbInit;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    enc.encode_bit(p, bits[i]);
    if (i < raw.size()) enc.encode_direct(raw[i], 20);
  }
  const auto stream = enc.finish();
  // 20000 bits at H(0.9) ~ 0.47 plus 10000 raw bits
  EXPECT_LT(stream.size() * 8, 0.47 * 20000 * 1.05 + 10000 + 64);
  RangeDecoder dec(stream);
  std::uint16_t q = kProbInit;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    ASSERT_EQ(dec.decode_bit(q), bits[i]) << i;
    if (i < raw.size()) {
      ASSERT_EQ(dec.decode_direct(20), raw[i]);
    }
  }
  EXPECT_EQ(dec.overrun(), 0u);
}

TEST(RangeCoder, ArbitraryBytesRoundTrip) {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = std::size_t(rng.uniform(0, 5000));
    std::vector<std::uint8_t> data(n);
    const int mode = trial % 4;
    for (auto& b : data) {
      if (mode == 0) {
        b = std::uint8_t(rng.uniform(0, 256));
      } else if (mode == 1) {
        b = 0xFF;
      } else if (mode == 2) {
        b = std::uint8_t(rng.uniform(0, 1) < 0.98 ? 0 : rng.uniform(0, 256));
      } else {
        b = std::uint8_t(rng.uniform(250, 256));
      }
    }
    EXPECT_EQ(decode_bytes(encode_bytes(data)), data) << "trial " << trial;
  }
}

TEST(RangeCoder, ConstantInputCompresses) {
  const std::vector<std::uint8_t> zeros(100000, 0);
  const auto coded = encode_bytes(zeros);
  EXPECT_LT(coded.size(), 3000u);
  EXPECT_EQ(decode_bytes(coded), zeros);
}

TEST(Quantize, EndpointsAndMidpoint) {
  EXPECT_EQ(quantize_value(-2.0, -2.0, 6.0), 0);
  EXPECT_EQ(quantize_value(6.0, -2.0, 6.0), 255);
  // 127.5 rounds away from zero
  EXPECT_EQ(quantize_value(2.0, -2.0, 6.0), 128);
  EXPECT_EQ(quantize_value(-9.0, -2.0, 6.0), 0);
  EXPECT_EQ(quantize_value(90.0, -2.0, 6.0), 255);
  try {
    quantize_value(1.0, 3.0, 3.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::range);
  }
}

TEST(Quantize, DequantizeBound) {
  Rng rng(5);
  FeatureImage img(16, 8, kFeatureChannels);
  for (std::size_t p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < img.channels; ++c) img.pixel(p)[c] = float(rng.uniform(-3.0 - c, 2.0 + c));
  const std::vector<FeatureImage> one{img};
  const auto prof = compute_profile(one);
  const auto back = dequantize(quantize(img, prof), prof);
  for (std::size_t p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < img.channels; ++c) {
      const double span = prof.max[std::size_t(c)] - prof.min[std::size_t(c)];
      EXPECT_LE(std::abs(back.pixel(p)[c] - img.pixel(p)[c]), span / 255.0 / 2.0 + 1e-5);
    }
}

TEST(Quantize, ConstantChannelIsWidened) {
  FeatureImage img(8, 8, 2);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    img.pixel(p)[0] = 0.25f;
    img.pixel(p)[1] = float(p);
  }
  const std::vector<FeatureImage> one{img};
  const auto prof = compute_profile(one);
  EXPECT_GT(prof.max[0], prof.min[0]);
  EXPECT_EQ(prof.min[1], 0.0f);
  EXPECT_EQ(prof.max[1], 63.0f);
  EXPECT_EQ(quantize(img, prof).plane(0)[5], 0);
}

TEST(Dct, OrthonormalAgainstDirectSum) {
  Rng rng(9);
  std::array<double, 64> x{};
  for (auto& v : x) v = rng.uniform(-128, 128);
  const auto f = dct8x8(x);
  // oracle: textbook double sum with C(0) = 1/sqrt(2)
  for (int k = 0; k < 8; ++k)
    for (int l = 0; l < 8; ++l) {
      double s = 0;
      for (int yy = 0; yy < 8; ++yy)
        for (int xx = 0; xx < 8; ++xx)
          s += x[std::size_t(yy * 8 + xx)] * std::cos((2 * xx + 1) * l * M_PI / 16) * std::cos((2 * yy + 1) * k * M_PI / 16);
      const double ck = k == 0 ? 1 / std::sqrt(2.0) : 1.0, cl = l == 0 ? 1 / std::sqrt(2.0) : 1.0;
      EXPECT_NEAR(f[std::size_t(k * 8 + l)], 0.25 * ck * cl * s, 1e-9);
    }
  const auto back = idct8x8(f);
  for (int i = 0; i < 64; ++i) EXPECT_NEAR(back[std::size_t(i)], x[std::size_t(i)], 1e-9);
}

TEST(Dct, ZigzagIsAPermutationOfIncreasingDiagonals) {
  std::array<bool, 64> seen{};
  int last_diag = 0;
  for (int k = 0; k < 64; ++k) {
    const int idx = kZigzag[std::size_t(k)];
    ASSERT_FALSE(seen[std::size_t(idx)]);
    seen[std::size_t(idx)] = true;
    const int diag = idx / 8 + idx % 8;
    EXPECT_GE(diag, last_diag);
    last_diag = diag;
  }
}

TEST(Symbols, MagnitudeBitsRoundTrip) {
  for (int v = -2047; v <= 2047; ++v) {
    const int cat = magnitude_category(v);
    ASSERT_EQ(from_magnitude_bits(magnitude_bits(v, cat), cat), v);
    if (v != 0) {
      ASSERT_LT(magnitude_bits(v, cat), 1u << cat);
    }
  }
}

TEST(Codec, LosslessIsBitExact) {
  for (std::uint64_t seed : {1u, 2u}) {
    auto frames = test_gof(24, 16, 13, 5, seed);
    frames[3] = frames[2];  // exercise the zero-residual marker
    const auto g = encode_gof(frames, {1, true}, unit_profile(13));
    EXPECT_EQ(decode_gof(g), frames);
    EXPECT_EQ(decode_gof(parse_gof(serialize_gof(g))), frames);
  }
}

TEST(Codec, LossyDecodeMatchesEncoderReconstruction) {
  const auto frames = test_gof(20, 12, 3, 4, 7);  // partial blocks on both axes
  for (int q : {1, 3}) {
    const auto g = encode_gof(frames, {q, false}, unit_profile(3));
    const auto dec = decode_gof(g);
    // closed loop: re-running the encoder's analysis on decoded frames is stable
    GofModels models;
    QuantizedFrame prev;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      auto [bytes, rec] = encode_frame(frames[i], i == 0 ? nullptr : &prev, {q, false}, models);
      EXPECT_EQ(rec, dec[i]) << "q " << q << " frame " << i;
      prev = rec;
    }
  }
}

// Measured once on test_gof(32, 32, 13, 6, seed 21) and pinned.
TEST(Codec, LossyErrorWithinPinnedBound) {
  const std::map<int, int> pinned = {{1, 15}, {2, 22}, {4, 29}, {8, 45}};
  const auto frames = test_gof(32, 32, 13, 6, 21);
  for (const auto& [q, bound] : pinned) {
    const auto dec = decode_gof(encode_gof(frames, {q, false}, unit_profile(13)));
    const int err = max_abs_error(frames, dec);
    EXPECT_LE(err, bound) << "q " << q;
  }
}

TEST(Codec, RateIsMonotoneInQ) {
  const auto frames = test_gof(32, 32, 13, 4, 4);
  std::size_t last = std::numeric_limits<std::size_t>::max();
  for (int q = 1; q <= 16; q *= 2) {
    const auto bytes = encode_gof(frames, {q, false}, unit_profile(13)).payload_bytes();
    EXPECT_LE(bytes, last) << "q " << q;
    last = bytes;
  }
}

TEST(Codec, ConstantGrayGofIsTiny) {
  std::vector<QuantizedFrame> frames;
  for (int t = 0; t < 10; ++t) {
    QuantizedFrame f(64, 64, 13);
    std::fill(f.planes.begin(), f.planes.end(), std::uint8_t(128));
    frames.push_back(f);
  }
  const std::size_t raw = 10 * frames[0].planes.size();
  for (bool lossless : {false, true}) {
    const auto g = encode_gof(frames, {1, lossless}, unit_profile(13));
    EXPECT_LT(double(serialize_gof(g).size()), 0.02 * double(raw)) << lossless;
    EXPECT_EQ(decode_gof(g), frames);
  }
}

TEST(Codec, IdenticalFramesGiveMinimalInterStreams) {
  // minimal stream: one marker bit then the coder flush
  RangeEncoder rc;
  std::uint16_t p = kProbInit;
  rc.encode_bit(p, 1);
  const auto minimal = rc.finish().size();

  // lossless: any content
  auto frames = test_gof(32, 16, 13, 1, 8);
  for (int i = 0; i < 4; ++i) frames.push_back(frames[0]);
  const auto exact = encode_gof(frames, {1, true}, unit_profile(13));
  for (int i = 1; i < 5; ++i) EXPECT_EQ(exact.frames[std::size_t(i)].size(), minimal);
  EXPECT_EQ(decode_gof(exact), frames);

  // lossy: residuals are taken against the reconstruction, so use a keyframe
  // the quantizer reproduces exactly (block-constant, DC on the q=2 grid)
  QuantizedFrame block_flat(32, 16, 13);
  Rng rng(2);
  for (int c = 0; c < 13; ++c)
    for (int b = 0; b < 8; ++b) {
      const auto level = std::uint8_t(128 + 4 * int(rng.uniform(-20, 20)));
      for (int v = (b / 4) * 8; v < (b / 4) * 8 + 8; ++v)
        for (int u = (b % 4) * 8; u < (b % 4) * 8 + 8; ++u) block_flat.plane(c)[std::size_t(v * 32 + u)] = level;
    }
  const std::vector<QuantizedFrame> same(5, block_flat);
  const auto g = encode_gof(same, {2, false}, unit_profile(13));
  for (int i = 1; i < 5; ++i) EXPECT_EQ(g.frames[std::size_t(i)].size(), minimal);
  EXPECT_EQ(decode_gof(g), same);
}

TEST(Codec, SizeMismatchIsRejected) {
  std::vector<QuantizedFrame> frames{QuantizedFrame(16, 16, 2), QuantizedFrame(8, 16, 2)};
  try {
    encode_gof(frames, {1, false}, unit_profile(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape);
  }
}

TEST(Codec, CorruptChunkIsAChecksumError) {
  const auto g = encode_gof(test_gof(16, 16, 13, 2, 3), {2, false}, unit_profile(13));
  auto chunk = serialize_gof(g);
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto bad = chunk;
    bad[std::size_t(rng.uniform(4, double(bad.size())))] ^= std::uint8_t(1 + trial);
    try {
      parse_gof(bad);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::checksum);
    }
  }
}

TEST(Vrfs, SeekDecodesFromByteRangeSlices) {
  std::vector<EncodedGof> gofs;
  std::vector<std::vector<QuantizedFrame>> sources;
  for (int g = 0; g < 3; ++g) {
    sources.push_back(test_gof(16 + 8 * g, 16, 13, 2 + g, std::uint64_t(g)));
    gofs.push_back(encode_gof(sources.back(), {2, false}, unit_profile(13), g, 10 * g));
  }
  const auto file = write_vrfs(gofs);
  const auto idx = read_vrfs_index(std::span(file).first(64 * 1024 < file.size() ? 64 * 1024 : file.size()));
  ASSERT_EQ(idx.gofs.size(), 3u);
  EXPECT_EQ(idx.width, 32);
  EXPECT_EQ(idx.channels, 13);
  for (std::size_t g = 0; g < 3; ++g) {
    const auto& e = idx.gofs[g];
    EXPECT_EQ(e.descriptor.group_id, int(g));
    EXPECT_EQ(e.descriptor.first_frame, 10 * int(g));
    // decode from only this group's bytes; everything else zeroed out
    std::vector<std::uint8_t> sparse(file.size(), 0);
    std::copy_n(file.begin() + std::ptrdiff_t(e.offset), e.length, sparse.begin() + std::ptrdiff_t(e.offset));
    EXPECT_EQ(decode_gof(read_vrfs_gof(sparse, idx, g)), decode_gof(gofs[g]));
    const auto slice = std::span(file).subspan(std::size_t(e.offset), std::size_t(e.length));
    EXPECT_EQ(decode_gof(parse_gof(slice)), decode_gof(gofs[g]));
  }
  EXPECT_EQ(idx.gofs.back().offset + idx.gofs.back().length, file.size());
}

TEST(Vrfs, TruncatedHeaderIsAFormatError) {
  const auto g = encode_gof(test_gof(8, 8, 13, 1, 1), {1, false}, unit_profile(13));
  const std::vector<EncodedGof> one{g};
  const auto file = write_vrfs(one);
  try {
    read_vrfs_index(std::span(file).first(30));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::format);
  }
}

TEST(Stream, SequenceRoundTripKeepsGroupsAndFrames) {
  const auto seq = prepare_sequence(translating_sphere_scene(24, 6), 2000);
  const auto frames = bake_sequence(seq);
  const auto lossless = encode_stream(frames, {1, true}, 1);
  EXPECT_EQ(lossless.gofs.size(), seq.groups.size());
  const auto back = decode_stream(lossless);
  ASSERT_EQ(back.size(), frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    EXPECT_EQ(back[t].frame_index, int(t));
    EXPECT_EQ(back[t].group_id, frames[t].group_id);
    const auto& prof = lossless.gofs[std::size_t(frames[t].group_id)].profile;
    for (std::size_t p = 0; p < frames[t].pixel_count(); ++p)
      for (int c = 0; c < frames[t].channels; ++c) {
        const double span = prof.max[std::size_t(c)] - prof.min[std::size_t(c)];
        ASSERT_LE(std::abs(back[t].pixel(p)[c] - frames[t].pixel(p)[c]), span / 510.0 + 1e-5);
      }
  }
  const auto threaded = encode_stream(frames, {4, false}, 3);
  const auto single = encode_stream(frames, {4, false}, 1);
  for (std::size_t g = 0; g < single.gofs.size(); ++g) EXPECT_EQ(threaded.gofs[g].frames, single.gofs[g].frames);
}
