#pragma once

// Asset directory for streaming. Layout (paths double as manifest URIs and
// HTTP paths):
//   manifest.json
//   mlp.json
//   gof/<id>/stream         single-group .vrfs file
//   gof/<id>/mapping.png    RGBA inverse mapping, alpha = occupied
//   gof/<id>/occupancy.bin  skip pyramid, finest level first

#include "featvid/manifest.hpp"
#include "featvid/sequence.hpp"

namespace featvid {

struct BundleInput {
  const PreparedSequence* sequence = nullptr;
  const std::vector<FeatureImage>* frames = nullptr;  // indexed by frame
  const TinyMlp* mlp = nullptr;
  CodecSettings codec;
  std::string sequence_id = "sequence";
  Background background = Background::white;
};

inline std::string gof_uri(int id, std::string_view leaf) { return "gof/" + std::to_string(id) + "/" + std::string(leaf); }

namespace detail {

inline void check_bundle_input(const BundleInput& in) {
  auto missing = [](const std::string& what) { fail(Errc::bundle, "missing component: " + what); };
  if (!in.sequence || in.sequence->groups.empty()) missing("group plan and mapping tables");
  if (!in.frames || in.frames->empty()) missing("feature images");
  if (!in.mlp || in.mlp->parameter_count() == 0) missing("decoder weights");
  const auto& seq = *in.sequence;
  if (int(in.frames->size()) != seq.frame_count())
    fail(Errc::bundle, "missing component: " + std::to_string(seq.frame_count()) + " frames planned but " +
                           std::to_string(in.frames->size()) + " feature images given");
  for (const auto& g : seq.groups)
    for (int t = g.frames.start_frame; t <= g.frames.end_frame; ++t) {
      const auto& img = (*in.frames)[std::size_t(t)];
      if (img.width != g.map.width() || img.height != g.map.height() || img.channels != kImageChannels)
        fail(Errc::bundle, "feature image for frame " + std::to_string(t) + " does not match group " +
                               std::to_string(g.group_id) + "'s mapping");
    }
  in.mlp->check_shapes();
  in.codec.validate();
}

inline AssetRef put_asset(const std::filesystem::path& root, std::string uri, std::span<const std::uint8_t> bytes) {
  write_file(root / uri, bytes);
  return {std::move(uri), bytes.size()};
}

}  // namespace detail

/// Encodes every group, writes all assets under `root` and returns the
/// manifest (also written to root/manifest.json).
inline GofManifest bundle(const BundleInput& in, const std::filesystem::path& root, unsigned workers = default_workers()) {
  detail::check_bundle_input(in);
  const auto& seq = *in.sequence;
  const auto encoded = encode_stream(*in.frames, in.codec, workers);
  if (encoded.gofs.size() != seq.groups.size()) fail(Errc::bundle, "encoded groups do not match the plan");

  GofManifest m;
  m.sequence_id = in.sequence_id;
  m.frame_count = seq.frame_count();
  m.grid = seq.groups.front().map.grid();
  m.background = in.background;
  m.codec = in.codec;
  m.mlp_inputs = in.mlp->inputs;
  m.mlp_hidden = in.mlp->hidden;
  const std::string mlp_text = mlp_to_json(*in.mlp).dump();
  m.mlp = detail::put_asset(root, "mlp.json", std::span(reinterpret_cast<const std::uint8_t*>(mlp_text.data()), mlp_text.size()));
  for (std::size_t i = 0; i < seq.groups.size(); ++i) {
    const auto& g = seq.groups[i];
    const auto& e = encoded.gofs[i];
    ManifestGroup mg;
    mg.id = g.group_id;
    mg.first_frame = g.frames.start_frame;
    mg.frame_count = g.frame_count();
    mg.width = g.map.width();
    mg.height = g.map.height();
    mg.quantization = e.profile;
    const std::vector<EncodedGof> one{e};
    mg.stream = detail::put_asset(root, gof_uri(g.group_id, "stream"), write_vrfs(one));
    mg.mapping = detail::put_asset(root, gof_uri(g.group_id, "mapping.png"), encode_mapping_png(g.map));
    mg.occupancy = detail::put_asset(root, gof_uri(g.group_id, "occupancy.bin"), encode_pyramid(g.pyramid));
    m.storage.feature_images += mg.stream.bytes;
    m.storage.mapping += mg.mapping.bytes;
    m.storage.occupancy += mg.occupancy.bytes;
    m.groups.push_back(std::move(mg));
  }
  m.storage.mlp = m.mlp.bytes;
  m.total_bytes = m.storage.sum();
  validate_manifest(m);
  write_text(root / "manifest.json", dump_manifest(m));
  return m;
}

// ---------------------------------------------------------------------------
// loading

inline GofManifest load_manifest(const std::filesystem::path& root) {
  if (!std::filesystem::exists(root / "manifest.json")) fail(Errc::load, "no manifest.json under " + root.string());
  return parse_manifest(read_text(root / "manifest.json"));
}

inline TinyMlp load_bundle_mlp(const std::filesystem::path& root, const GofManifest& m) {
  try {
    return mlp_from_json(nlohmann::json::parse(read_text(root / m.mlp.uri)));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, std::string("mlp.json: ") + e.what());
  }
}

/// Reads only group `id`'s three assets.
inline LoadedGroup load_bundle_group(const std::filesystem::path& root, const GofManifest& m, int id) {
  const ManifestGroup* mg = m.find_group(id);
  if (!mg) fail(Errc::load, "no group " + std::to_string(id) + " in the manifest");
  const auto stream = read_file(root / mg->stream.uri);
  const auto idx = read_vrfs_index(stream);
  if (idx.gofs.size() != 1) fail(Errc::format, "group stream must hold exactly one group");
  const auto gof = read_vrfs_gof(stream, idx, 0);
  if (gof.group_id != id || gof.first_frame != mg->first_frame || gof.frame_count() != mg->frame_count)
    fail(Errc::format, "group stream does not match its manifest entry");
  LoadedGroup out;
  out.group_id = id;
  out.start_frame = mg->first_frame;
  out.map = decode_mapping_png(read_file(root / mg->mapping.uri), m.grid);
  out.pyramid = decode_pyramid(read_file(root / mg->occupancy.uri));
  const auto frames = decode_gof(gof);
  for (std::size_t i = 0; i < frames.size(); ++i)
    out.frames.push_back(dequantize(frames[i], gof.profile, mg->first_frame + int(i), id));
  return out;
}

inline RenderOptions bundle_render_options(const GofManifest& m, unsigned workers = default_workers()) {
  RenderOptions opt;
  opt.background = m.background;
  opt.frequencies = m.encoding_frequencies;
  opt.workers = workers;
  return opt;
}

/// Renders frame `t` touching only the manifest, the MLP and the group that
/// holds `t`.
inline Image render_bundle_frame(const std::filesystem::path& root, int t, const Camera& cam,
                                 unsigned workers = default_workers()) {
  const auto m = load_manifest(root);
  const auto& mg = m.group_for_frame(t);
  const std::vector<LoadedGroup> groups{load_bundle_group(root, m, mg.id)};
  return render(groups, load_bundle_mlp(root, m), cam, t, bundle_render_options(m, workers),
                DensityActivation{m.density_shift});
}

}  // namespace featvid
