#pragma once

// Adapter for a system encoder driven through shell command templates.
// Channels are packed three per RGB tile, tiles stacked vertically, and the
// frames are written as one raw rgb24 stream.

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <map>
#include <sstream>

#include "json.hpp"
#include "featvid/codec.hpp"

namespace featvid {

/// Placeholders: {input} {output} {width} {height} {frames}.
struct ExternalToolSpec {
  std::string encode_command;
  std::string decode_command;
};

inline ExternalToolSpec external_tool_from_json(const nlohmann::json& j) {
  ExternalToolSpec s;
  s.encode_command = j.at("encode").get<std::string>();
  s.decode_command = j.at("decode").get<std::string>();
  return s;
}

inline int tile_count(int channels) { return (channels + 2) / 3; }

/// Packed frame: width x (tiles * height) x 3, row-major interleaved rgb.
inline std::vector<std::uint8_t> pack_tiles(const QuantizedFrame& f) {
  const int tiles = tile_count(f.channels);
  std::vector<std::uint8_t> out(std::size_t(tiles) * f.plane_size() * 3, 0);
  for (int c = 0; c < f.channels; ++c) {
    const std::size_t tile_base = std::size_t(c / 3) * f.plane_size() * 3;
    const std::uint8_t* src = f.plane(c);
    for (std::size_t p = 0; p < f.plane_size(); ++p) out[tile_base + p * 3 + std::size_t(c % 3)] = src[p];
  }
  return out;
}

inline QuantizedFrame unpack_tiles(std::span<const std::uint8_t> packed, int w, int h, int ch) {
  QuantizedFrame f(w, h, ch);
  if (packed.size() != std::size_t(tile_count(ch)) * f.plane_size() * 3) fail(Errc::shape, "packed frame size mismatch");
  for (int c = 0; c < ch; ++c) {
    const std::size_t tile_base = std::size_t(c / 3) * f.plane_size() * 3;
    std::uint8_t* dst = f.plane(c);
    for (std::size_t p = 0; p < f.plane_size(); ++p) dst[p] = packed[tile_base + p * 3 + std::size_t(c % 3)];
  }
  return f;
}

struct ExternalEncoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  int frame_count = 0;
  std::vector<std::uint8_t> bytes;
};

namespace detail {

inline std::string substitute(std::string s, const std::map<std::string, std::string>& vars) {
  for (const auto& [k, v] : vars) {
    const std::string key = "{" + k + "}";
    for (std::size_t at = s.find(key); at != std::string::npos; at = s.find(key, at + v.size())) s.replace(at, key.size(), v);
  }
  return s;
}

inline std::string first_word(const std::string& s) {
  std::istringstream in(s);
  std::string w;
  in >> w;
  return w;
}

inline bool on_path(const std::string& tool) {
  if (tool.empty()) return false;
  if (tool.find('/') != std::string::npos) return ::access(tool.c_str(), X_OK) == 0;
  const char* path = std::getenv("PATH");
  if (!path) return false;
  std::istringstream dirs(path);
  std::string dir;
  while (std::getline(dirs, dir, ':'))
    if (!dir.empty() && ::access((std::filesystem::path(dir) / tool).c_str(), X_OK) == 0) return true;
  return false;
}

/// Scratch directory removed on scope exit.
class ScratchDir {
 public:
  ScratchDir() {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("featvid-ext-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void run_tool(const std::string& templ, const std::map<std::string, std::string>& vars) {
  const std::string tool = first_word(templ);
  if (!on_path(tool)) fail(Errc::unavailable, "external encoder '" + tool + "' not found");
  const std::string cmd = substitute(templ, vars);
  const int rc = std::system(cmd.c_str());
  if (rc != 0) {
    const int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    if (code == 127) fail(Errc::unavailable, "external encoder could not be started: " + cmd);
    fail(Errc::io, "external command failed with status " + std::to_string(code) + ": " + cmd);
  }
}

}  // namespace detail

inline ExternalEncoded external_encode(std::span<const QuantizedFrame> frames, const ExternalToolSpec& spec) {
  if (frames.empty()) fail(Errc::shape, "external_encode: no frames");
  ExternalEncoded out;
  out.width = frames[0].width;
  out.height = frames[0].height;
  out.channels = frames[0].channels;
  out.frame_count = int(frames.size());
  std::vector<std::uint8_t> raw;
  for (const auto& f : frames) {
    if (f.width != out.width || f.height != out.height || f.channels != out.channels)
      fail(Errc::shape, "external_encode: frame size differs within the group");
    const auto packed = pack_tiles(f);
    raw.insert(raw.end(), packed.begin(), packed.end());
  }
  detail::ScratchDir dir;
  const auto in = dir.path() / "frames.rgb", enc = dir.path() / "frames.enc";
  write_file(in, raw);
  detail::run_tool(spec.encode_command, {{"input", in.string()},
                                         {"output", enc.string()},
                                         {"width", std::to_string(out.width)},
                                         {"height", std::to_string(out.height * tile_count(out.channels))},
                                         {"frames", std::to_string(out.frame_count)}});
  out.bytes = read_file(enc);
  return out;
}

inline std::vector<QuantizedFrame> external_decode(const ExternalEncoded& e, const ExternalToolSpec& spec) {
  detail::ScratchDir dir;
  const auto enc = dir.path() / "frames.enc", raw = dir.path() / "frames.rgb";
  write_file(enc, e.bytes);
  detail::run_tool(spec.decode_command, {{"input", enc.string()},
                                         {"output", raw.string()},
                                         {"width", std::to_string(e.width)},
                                         {"height", std::to_string(e.height * tile_count(e.channels))},
                                         {"frames", std::to_string(e.frame_count)}});
  const auto bytes = read_file(raw);
  const std::size_t frame_bytes = std::size_t(tile_count(e.channels)) * std::size_t(e.width) * std::size_t(e.height) * 3;
  if (bytes.size() != frame_bytes * std::size_t(e.frame_count)) fail(Errc::format, "external decoder returned the wrong size");
  std::vector<QuantizedFrame> out;
  for (int i = 0; i < e.frame_count; ++i)
    out.push_back(unpack_tiles(std::span(bytes).subspan(std::size_t(i) * frame_bytes, frame_bytes), e.width, e.height,
                               e.channels));
  return out;
}

/// External tool when configured and present, the built-in codec otherwise.
struct GofEncoding {
  std::optional<ExternalEncoded> external;
  std::optional<EncodedGof> builtin;
  std::string fallback_reason;

  std::size_t size_bytes() const { return external ? external->bytes.size() : builtin->payload_bytes(); }
};

inline GofEncoding encode_gof_preferring(std::span<const QuantizedFrame> frames, const std::optional<ExternalToolSpec>& tool,
                                         const CodecSettings& s, const QuantizationProfile& prof) {
  GofEncoding out;
  if (tool) {
    try {
      out.external = external_encode(frames, *tool);
      return out;
    } catch (const Error& e) {
      if (e.code() != Errc::unavailable) throw;
      out.fallback_reason = e.what();
    }
  }
  out.builtin = encode_gof(frames, s, prof);
  return out;
}

}  // namespace featvid
