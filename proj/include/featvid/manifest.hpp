#pragma once

// Streaming manifest: one entry per group of frames plus the globals a
// player needs to decode and render. Serialized as canonical JSON (sorted
// keys, fixed indentation) so serialize -> parse -> serialize is stable.

#include "json.hpp"
#include "featvid/codec.hpp"
#include "featvid/renderer.hpp"

namespace featvid {

inline constexpr int kManifestVersion = 1;

struct AssetRef {
  std::string uri;  // relative to the asset root; also the HTTP path
  std::uint64_t bytes = 0;
  friend bool operator==(const AssetRef&, const AssetRef&) = default;
};

struct ManifestGroup {
  int id = 0;
  int first_frame = 0;
  int frame_count = 0;
  int width = 0;
  int height = 0;
  AssetRef stream;
  AssetRef mapping;
  AssetRef occupancy;
  QuantizationProfile quantization;

  int last_frame() const { return first_frame + frame_count - 1; }
  friend bool operator==(const ManifestGroup&, const ManifestGroup&) = default;
};

/// Bytes by storage component.
struct StorageBreakdown {
  std::uint64_t feature_images = 0;
  std::uint64_t mapping = 0;
  std::uint64_t occupancy = 0;
  std::uint64_t mlp = 0;

  std::uint64_t sum() const { return feature_images + mapping + occupancy + mlp; }
  friend bool operator==(const StorageBreakdown&, const StorageBreakdown&) = default;
};

struct GofManifest {
  std::string sequence_id;
  int frame_count = 0;
  Grid3 grid;
  int feature_channels = kFeatureChannels;
  double density_shift = DensityActivation{}.shift;
  int encoding_frequencies = kEncodingFrequencies;
  Background background = Background::white;
  CodecSettings codec;
  AssetRef mlp;
  int mlp_inputs = 0;
  int mlp_hidden = 0;
  std::vector<ManifestGroup> groups;
  StorageBreakdown storage;
  std::uint64_t total_bytes = 0;

  const ManifestGroup& group_for_frame(int t) const {
    for (const auto& g : groups)
      if (t >= g.first_frame && t <= g.last_frame()) return g;
    fail(Errc::range, "frame " + std::to_string(t) + " is outside the sequence");
  }
  const ManifestGroup* find_group(int id) const {
    for (const auto& g : groups)
      if (g.id == id) return &g;
    return nullptr;
  }
  friend bool operator==(const GofManifest&, const GofManifest&) = default;
};

/// Structural invariants: groups tile [0, frame_count) in order, every asset
/// is referenced with its size, and the accounting adds up.
inline void validate_manifest(const GofManifest& m) {
  auto bad = [](const std::string& msg) { fail(Errc::format, "manifest: " + msg); };
  if (m.frame_count <= 0) bad("frame_count must be positive");
  if (m.groups.empty()) bad("no groups");
  if (m.grid.nx < 2 || m.grid.ny < 2 || m.grid.nz < 2) bad("grid must be at least 2 per axis");
  int next = 0;
  StorageBreakdown s;
  for (const auto& g : m.groups) {
    if (g.first_frame != next) bad("group " + std::to_string(g.id) + " does not start at frame " + std::to_string(next));
    if (g.frame_count <= 0) bad("group " + std::to_string(g.id) + " is empty");
    if (g.quantization.channels() != m.feature_channels + 1) bad("group " + std::to_string(g.id) + " quantization size");
    for (int c = 0; c < g.quantization.channels(); ++c)
      if (!(g.quantization.max[std::size_t(c)] > g.quantization.min[std::size_t(c)])) bad("degenerate quantization range");
    for (const auto* a : {&g.stream, &g.mapping, &g.occupancy})
      if (a->uri.empty()) bad("group " + std::to_string(g.id) + " has an empty asset uri");
    next += g.frame_count;
    s.feature_images += g.stream.bytes;
    s.mapping += g.mapping.bytes;
    s.occupancy += g.occupancy.bytes;
  }
  if (next != m.frame_count) bad("groups cover " + std::to_string(next) + " of " + std::to_string(m.frame_count) + " frames");
  if (m.mlp.uri.empty()) bad("missing mlp uri");
  s.mlp = m.mlp.bytes;
  if (!(s == m.storage)) bad("storage breakdown does not match the referenced assets");
  if (m.storage.sum() != m.total_bytes) bad("storage breakdown does not sum to total_bytes");
}

inline nlohmann::json asset_json(const AssetRef& a) { return {{"uri", a.uri}, {"bytes", a.bytes}}; }

inline nlohmann::json manifest_to_json(const GofManifest& m) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : m.groups)
    groups.push_back({{"id", g.id},
                      {"first_frame", g.first_frame},
                      {"frame_count", g.frame_count},
                      {"width", g.width},
                      {"height", g.height},
                      {"stream", asset_json(g.stream)},
                      {"mapping", asset_json(g.mapping)},
                      {"occupancy", asset_json(g.occupancy)},
                      {"quantization", {{"bit_depth", 8}, {"min", g.quantization.min}, {"max", g.quantization.max}}}});
  return {{"format", "featvid-manifest"},
          {"version", kManifestVersion},
          {"sequence_id", m.sequence_id},
          {"frame_count", m.frame_count},
          {"grid", {m.grid.nx, m.grid.ny, m.grid.nz}},
          {"feature_channels", m.feature_channels},
          {"density_activation", {{"kind", "softplus"}, {"shift", m.density_shift}}},
          {"encoding_frequencies", m.encoding_frequencies},
          {"background", std::string(background_name(m.background))},
          {"codec", {{"q", m.codec.q}, {"lossless", m.codec.lossless}}},
          {"mlp", {{"uri", m.mlp.uri}, {"bytes", m.mlp.bytes}, {"inputs", m.mlp_inputs}, {"hidden", m.mlp_hidden}, {"outputs", 3}}},
          {"groups", groups},
          {"storage",
           {{"feature_images", m.storage.feature_images},
            {"mapping", m.storage.mapping},
            {"occupancy", m.storage.occupancy},
            {"mlp", m.storage.mlp}}},
          {"total_bytes", m.total_bytes}};
}

inline AssetRef asset_from_json(const nlohmann::json& j) {
  return {j.at("uri").get<std::string>(), j.at("bytes").get<std::uint64_t>()};
}

inline GofManifest manifest_from_json(const nlohmann::json& j) {
  GofManifest m;
  try {
    if (j.at("format").get<std::string>() != "featvid-manifest") fail(Errc::format, "manifest: wrong format tag");
    if (j.at("version").get<int>() != kManifestVersion) fail(Errc::format, "manifest: unsupported version");
    m.sequence_id = j.at("sequence_id").get<std::string>();
    m.frame_count = j.at("frame_count").get<int>();
    const auto grid = j.at("grid").get<std::vector<int>>();
    if (grid.size() != 3) fail(Errc::format, "manifest: grid must have 3 entries");
    m.grid = Grid3{grid[0], grid[1], grid[2]};
    m.feature_channels = j.at("feature_channels").get<int>();
    const auto& act = j.at("density_activation");
    if (act.at("kind").get<std::string>() != "softplus") fail(Errc::format, "manifest: unknown density activation");
    m.density_shift = act.at("shift").get<double>();
    m.encoding_frequencies = j.at("encoding_frequencies").get<int>();
    const auto bg = j.at("background").get<std::string>();
    if (bg != "white" && bg != "decoded") fail(Errc::format, "manifest: unknown background " + bg);
    m.background = bg == "white" ? Background::white : Background::decoded;
    m.codec.q = j.at("codec").at("q").get<int>();
    m.codec.lossless = j.at("codec").at("lossless").get<bool>();
    const auto& mlp = j.at("mlp");
    m.mlp = asset_from_json(mlp);
    m.mlp_inputs = mlp.at("inputs").get<int>();
    m.mlp_hidden = mlp.at("hidden").get<int>();
    for (const auto& g : j.at("groups")) {
      ManifestGroup mg;
      mg.id = g.at("id").get<int>();
      mg.first_frame = g.at("first_frame").get<int>();
      mg.frame_count = g.at("frame_count").get<int>();
      mg.width = g.at("width").get<int>();
      mg.height = g.at("height").get<int>();
      mg.stream = asset_from_json(g.at("stream"));
      mg.mapping = asset_from_json(g.at("mapping"));
      mg.occupancy = asset_from_json(g.at("occupancy"));
      mg.quantization.min = g.at("quantization").at("min").get<std::vector<float>>();
      mg.quantization.max = g.at("quantization").at("max").get<std::vector<float>>();
      if (mg.quantization.min.size() != mg.quantization.max.size()) fail(Errc::format, "manifest: quantization min/max sizes differ");
      m.groups.push_back(std::move(mg));
    }
    const auto& s = j.at("storage");
    m.storage.feature_images = s.at("feature_images").get<std::uint64_t>();
    m.storage.mapping = s.at("mapping").get<std::uint64_t>();
    m.storage.occupancy = s.at("occupancy").get<std::uint64_t>();
    m.storage.mlp = s.at("mlp").get<std::uint64_t>();
    m.total_bytes = j.at("total_bytes").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, std::string("manifest: ") + e.what());
  }
  validate_manifest(m);
  return m;
}

/// Canonical text: keys sorted, two-space indent, trailing newline.
inline std::string dump_manifest(const GofManifest& m) { return manifest_to_json(m).dump(2) + "\n"; }

inline GofManifest parse_manifest(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, std::string("manifest: ") + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace featvid
