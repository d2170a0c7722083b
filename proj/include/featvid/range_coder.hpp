#pragma once

// Binary adaptive range coder (11-bit probabilities, carry propagation via a
// cached byte) with bit-tree models for multi-symbol alphabets.

#include "featvid/core.hpp"

namespace featvid {

inline constexpr int kProbBits = 11;
inline constexpr std::uint16_t kProbInit = 1u << (kProbBits - 1);
inline constexpr int kAdaptShift = 5;

class RangeEncoder {
 public:
  void encode_bit(std::uint16_t& prob, int bit) {
    const std::uint32_t bound = (range_ >> kProbBits) * prob;
    if (bit == 0) {
      range_ = bound;
      prob = std::uint16_t(prob + (((1u << kProbBits) - prob) >> kAdaptShift));
    } else {
      low_ += bound;
      range_ -= bound;
      prob = std::uint16_t(prob - (prob >> kAdaptShift));
    }
    normalize();
  }

  /// Equiprobable bits, most significant first.
  void encode_direct(std::uint32_t value, int bits) {
    for (int i = bits - 1; i >= 0; --i) {
      range_ >>= 1;
      if ((value >> i) & 1u) low_ += range_;
      normalize();
    }
  }

  /// Flushes pending state and returns the stream; the encoder resets.
  std::vector<std::uint8_t> finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    std::vector<std::uint8_t> out = std::move(out_);
    *this = RangeEncoder{};
    return out;
  }

 private:
  void normalize() {
    while (range_ < (1u << 24)) {
      range_ <<= 8;
      shift_low();
    }
  }
  void shift_low() {
    if (std::uint32_t(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      const auto carry = std::uint8_t(low_ >> 32);
      std::uint8_t temp = cache_;
      do {
        out_.push_back(std::uint8_t(temp + carry));
        temp = 0xFF;
      } while (--cache_size_ != 0);
      cache_ = std::uint8_t(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ & 0x00FFFFFFu) << 8;
  }

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> in) : in_(in) {
    for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next();
  }

  int decode_bit(std::uint16_t& prob) {
    const std::uint32_t bound = (range_ >> kProbBits) * prob;
    int bit;
    if (code_ < bound) {
      range_ = bound;
      prob = std::uint16_t(prob + (((1u << kProbBits) - prob) >> kAdaptShift));
      bit = 0;
    } else {
      code_ -= bound;
      range_ -= bound;
      prob = std::uint16_t(prob - (prob >> kAdaptShift));
      bit = 1;
    }
    normalize();
    return bit;
  }

  std::uint32_t decode_direct(int bits) {
    std::uint32_t v = 0;
    for (int i = 0; i < bits; ++i) {
      range_ >>= 1;
      int bit = 0;
      if (code_ >= range_) {
        code_ -= range_;
        bit = 1;
      }
      v = (v << 1) | std::uint32_t(bit);
      normalize();
    }
    return v;
  }

  /// Bytes consumed beyond the end of the input (zero-padded reads).
  std::size_t overrun() const { return overrun_; }

 private:
  std::uint8_t next() {
    if (pos_ < in_.size()) return in_[pos_++];
    ++overrun_;
    return 0;
  }
  void normalize() {
    while (range_ < (1u << 24)) {
      range_ <<= 8;
      code_ = (code_ << 8) | next();
    }
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::size_t overrun_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

/// Adaptive model over symbols in [0, 2^Bits).
template <int Bits>
struct BitTreeModel {
  std::array<std::uint16_t, std::size_t(1) << Bits> probs;
  BitTreeModel() { probs.fill(kProbInit); }

  void encode(RangeEncoder& rc, std::uint32_t symbol) {
    std::uint32_t m = 1;
    for (int i = Bits - 1; i >= 0; --i) {
      const int bit = int((symbol >> i) & 1u);
      rc.encode_bit(probs[m], bit);
      m = (m << 1) | std::uint32_t(bit);
    }
  }
  std::uint32_t decode(RangeDecoder& rc) {
    std::uint32_t m = 1;
    for (int i = 0; i < Bits; ++i) m = (m << 1) | std::uint32_t(rc.decode_bit(probs[m]));
    return m - (1u << Bits);
  }
};

/// Order-0 adaptive byte coder: u64 length, then the coded bytes.
inline std::vector<std::uint8_t> encode_bytes(std::span<const std::uint8_t> data) {
  RangeEncoder rc;
  BitTreeModel<8> model;
  for (std::uint8_t b : data) model.encode(rc, b);
  ByteWriter w;
  w.put<std::uint64_t>(data.size());
  w.bytes(rc.finish());
  return w.take();
}

inline std::vector<std::uint8_t> decode_bytes(std::span<const std::uint8_t> coded) {
  ByteReader r(coded);
  const auto n = r.get<std::uint64_t>();
  const auto body = r.bytes(r.remaining());
  if (n > body.size() * 64 + 64) fail(Errc::format, "coded byte stream length is implausible");
  RangeDecoder rc(body);
  BitTreeModel<8> model;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(n));
  for (auto& b : out) b = std::uint8_t(model.decode(rc));
  return out;
}

}  // namespace featvid
