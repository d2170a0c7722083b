#include <gtest/gtest.h>

#include <cstdlib>

#include "featvid/server.hpp"

using namespace featvid;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("featvid-stream-test-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Fixture {
  PreparedSequence seq;
  std::vector<FeatureImage> frames;
  TinyMlp mlp = reference_mlp();
};

// Translating sphere split into two groups by a tight vertex budget.
const Fixture& two_groups() {
  static const Fixture f = [] {
    Fixture x;
    const auto scene = translating_sphere_scene(16, 4, 0.2, 2.0);
    auto probe = prepare_sequence(scene, 1u << 20);
    std::size_t theta = 0;
    for (const auto& o : probe.occupancy) theta = std::max(theta, o.occupied_count());
    do {
      x.seq = prepare_sequence(scene, theta);
      theta += 16;
    } while (x.seq.groups.size() > 2);
    x.frames = bake_sequence(x.seq);
    return x;
  }();
  return f;
}

GofManifest make_bundle(const fs::path& root, CodecSettings s = {2, false}) {
  const auto& f = two_groups();
  BundleInput in{&f.seq, &f.frames, &f.mlp, s, "translating-sphere", Background::white};
  return bundle(in, root, 1);
}

}  // namespace

TEST(Bundle, FixtureHasTwoGroups) { EXPECT_EQ(two_groups().seq.groups.size(), 2u); }

TEST(Bundle, OneGroupSequenceHasOneEntry) {
  const auto seq = prepare_sequence(translating_sphere_scene(12, 3), 1u << 20);
  const auto frames = bake_sequence(seq);
  const auto mlp = reference_mlp();
  const auto m = bundle({&seq, &frames, &mlp, {1, true}, "one", Background::white}, fresh_dir("one"), 1);
  ASSERT_EQ(m.groups.size(), 1u);
  EXPECT_EQ(m.groups[0].first_frame, 0);
  EXPECT_EQ(m.groups[0].frame_count, 3);
  EXPECT_EQ(m.groups[0].last_frame(), 2);
}

TEST(Bundle, BreakdownSumsToTotalAndMatchesFiles) {
  const auto root = fresh_dir("breakdown");
  const auto m = make_bundle(root);
  EXPECT_EQ(m.storage.feature_images + m.storage.mapping + m.storage.occupancy + m.storage.mlp, m.total_bytes);
  std::uint64_t on_disk = fs::file_size(root / m.mlp.uri);
  for (const auto& g : m.groups) {
    EXPECT_EQ(g.stream.bytes, fs::file_size(root / g.stream.uri));
    EXPECT_EQ(g.mapping.bytes, fs::file_size(root / g.mapping.uri));
    EXPECT_EQ(g.occupancy.bytes, fs::file_size(root / g.occupancy.uri));
    on_disk += g.stream.bytes + g.mapping.bytes + g.occupancy.bytes;
  }
  EXPECT_EQ(on_disk, m.total_bytes);
  const auto j = manifest_to_json(m);
  for (const char* k : {"feature_images", "mapping", "occupancy", "mlp"}) EXPECT_TRUE(j.at("storage").contains(k)) << k;
  EXPECT_EQ(j.at("storage").size(), 4u);
}

TEST(Bundle, GroupsTileTheSequence) {
  const auto m = make_bundle(fresh_dir("tile"));
  int next = 0;
  for (const auto& g : m.groups) {
    EXPECT_EQ(g.first_frame, next);
    next += g.frame_count;
  }
  EXPECT_EQ(next, m.frame_count);
  EXPECT_EQ(m.group_for_frame(3).id, m.groups.back().id);
}

TEST(Manifest, CanonicalRoundTripIsByteIdentical) {
  const auto root = fresh_dir("canonical");
  const auto m = make_bundle(root);
  const auto text = read_text(root / "manifest.json");
  EXPECT_EQ(text, dump_manifest(m));
  const auto parsed = parse_manifest(text);
  EXPECT_EQ(parsed, m);
  EXPECT_EQ(dump_manifest(parsed), text);
}

TEST(Manifest, BrokenAccountingIsRejected) {
  auto m = make_bundle(fresh_dir("broken"));
  auto j = manifest_to_json(m);
  j["total_bytes"] = m.total_bytes + 1;
  EXPECT_THROW(manifest_from_json(j), Error);
  j = manifest_to_json(m);
  j["groups"][1]["first_frame"] = 0;
  EXPECT_THROW(manifest_from_json(j), Error);
  try {
    parse_manifest("{ not json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::format);
  }
}

TEST(Bundle, MissingComponentIsBundleError) {
  const auto& f = two_groups();
  const auto root = fresh_dir("missing");
  auto expect_bundle_error = [&](BundleInput in) {
    try {
      bundle(in, root, 1);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::bundle) << e.what();
    }
  };
  expect_bundle_error({nullptr, &f.frames, &f.mlp, {1, false}, "x", Background::white});
  expect_bundle_error({&f.seq, nullptr, &f.mlp, {1, false}, "x", Background::white});
  expect_bundle_error({&f.seq, &f.frames, nullptr, {1, false}, "x", Background::white});
  auto short_frames = f.frames;
  short_frames.pop_back();
  expect_bundle_error({&f.seq, &short_frames, &f.mlp, {1, false}, "x", Background::white});
}

TEST(Bundle, LosslessGroupsRenderLikeTheLibrary) {
  const auto root = fresh_dir("lossless");
  const auto m = make_bundle(root, {1, true});
  const auto& f = two_groups();
  const auto cam = orbit_camera(0.7, 0.2, 1.6, 24, 24);
  const RenderOptions opt = bundle_render_options(m, 1);
  for (int t : {0, 3}) {
    const auto lg = load_bundle_group(root, m, m.group_for_frame(t).id);
    // the lossless path reproduces the dequantized frames exactly
    const auto prof = m.group_for_frame(t).quantization;
    const auto expected = dequantize(quantize(f.frames[std::size_t(t)], prof), prof, t, lg.group_id);
    EXPECT_EQ(lg.frames[std::size_t(t - lg.start_frame)].data, expected.data);
    const std::vector<LoadedGroup> direct{lg};
    EXPECT_EQ(render_bundle_frame(root, t, cam, 1).rgb, render(direct, f.mlp, cam, t, opt).rgb);
  }
}

TEST(Bundle, PartialCopyRendersItsOwnFrames) {
  const auto full = fresh_dir("full");
  const auto m = make_bundle(full);
  const auto cam = orbit_camera(2.0, 0.3, 1.6, 20, 20);
  for (const auto& g : m.groups) {
    const auto part = fresh_dir("part" + std::to_string(g.id));
    for (const auto& uri : {std::string("manifest.json"), m.mlp.uri, g.stream.uri, g.mapping.uri, g.occupancy.uri}) {
      fs::create_directories((part / uri).parent_path());
      fs::copy_file(full / uri, part / uri);
    }
    for (int t = g.first_frame; t <= g.last_frame(); ++t)
      EXPECT_EQ(render_bundle_frame(part, t, cam, 1).rgb, render_bundle_frame(full, t, cam, 1).rgb) << t;
    const auto& other = m.groups[g.id == 0 ? 1 : 0];
    EXPECT_THROW(render_bundle_frame(part, other.first_frame, cam, 1), Error);
  }
}

// ---------------------------------------------------------------------------
// HTTP

class ServerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(fresh_dir("serve"));
    manifest_ = new GofManifest(make_bundle(*root_));
  }
  static void TearDownTestSuite() {
    delete root_;
    delete manifest_;
  }
  void SetUp() override {
    ServeConfig cfg;
    cfg.port = 0;
    cfg.asset_root = *root_;
    server_ = std::make_unique<StreamServer>(cfg);
    port_ = server_->start();
  }
  void TearDown() override { server_->stop(); }

  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

  static fs::path* root_;
  static GofManifest* manifest_;
  std::unique_ptr<StreamServer> server_;
  int port_ = 0;
};

fs::path* ServerTest::root_ = nullptr;
GofManifest* ServerTest::manifest_ = nullptr;

TEST_F(ServerTest, ManifestIsServedAndValid) {
  auto res = client().Get("/manifest.json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(parse_manifest(res->body), *manifest_);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_NE(res->get_header_value("Cache-Control").find("immutable"), std::string::npos);
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
}

TEST_F(ServerTest, EveryReferencedAssetResolves) {
  auto c = client();
  auto mlp = c.Get("/mlp.json");
  ASSERT_TRUE(mlp);
  EXPECT_EQ(mlp->status, 200);
  EXPECT_EQ(mlp_from_json(nlohmann::json::parse(mlp->body)), reference_mlp());
  for (const auto& g : manifest_->groups)
    for (const auto* a : {&g.stream, &g.mapping, &g.occupancy}) {
      auto res = c.Get("/" + a->uri);
      ASSERT_TRUE(res);
      EXPECT_EQ(res->status, 200) << a->uri;
      EXPECT_EQ(res->body.size(), a->bytes) << a->uri;
    }
  auto png = c.Get("/gof/0/mapping.png");
  EXPECT_EQ(png->get_header_value("Content-Type"), "image/png");
}

TEST_F(ServerTest, RangedStreamGetReturnsExactSlice) {
  const auto& g = manifest_->groups[1];
  const auto file = read_file(*root_ / g.stream.uri);
  const auto idx = read_vrfs_index(file);
  const auto& e = idx.gofs[0];
  auto res = client().Get("/gof/1/stream", {{"Range", "bytes=" + std::to_string(e.offset) + "-" +
                                                          std::to_string(e.offset + e.length - 1)}});
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 206);
  ASSERT_EQ(res->body.size(), e.length);
  EXPECT_EQ(res->get_header_value("Content-Range"), "bytes " + std::to_string(e.offset) + "-" + std::to_string(e.offset + e.length - 1) + "/" + std::to_string(file.size()));
  const auto chunk = std::vector<std::uint8_t>(res->body.begin(), res->body.end());
  EXPECT_TRUE(std::equal(chunk.begin(), chunk.end(), file.begin() + std::ptrdiff_t(e.offset)));
  // the slice alone decodes the group
  EXPECT_EQ(decode_gof(parse_gof(chunk)), decode_gof(read_vrfs_gof(file, idx, 0)));

  auto head = client().Get("/gof/1/stream", {{"Range", "bytes=0-9"}});
  EXPECT_EQ(head->status, 206);
  EXPECT_EQ(head->body, std::string(file.begin(), file.begin() + 10));
}

TEST_F(ServerTest, UnknownGroupIs404) {
  auto c = client();
  EXPECT_EQ(c.Get("/gof/999/stream")->status, 404);
  EXPECT_EQ(c.Get("/gof/999/mapping.png")->status, 404);
  EXPECT_EQ(c.Get("/gof/0/other.bin")->status, 404);
  EXPECT_NE(c.Get("/../manifest.json")->status, 200);
}

TEST_F(ServerTest, MalformedRangeIs416) {
  const auto size = manifest_->groups[0].stream.bytes;
  auto c = client();
  EXPECT_EQ(c.Get("/gof/0/stream", {{"Range", "bytes=" + std::to_string(size + 10) + "-" + std::to_string(size + 20)}})->status, 416);
  EXPECT_EQ(c.Get("/gof/0/stream", {{"Range", "bytes=9-2"}})->status, 416);
  EXPECT_EQ(c.Get("/gof/0/stream", {{"Range", "lines=0-3"}})->status, 416);
}

TEST_F(ServerTest, WritesAreRefused) {
  auto c = client();
  const auto before = read_text(*root_ / "manifest.json");
  EXPECT_EQ(c.Post("/manifest.json", "{}", "application/json")->status, 405);
  EXPECT_EQ(c.Put("/gof/0/stream", "x", "application/octet-stream")->status, 405);
  EXPECT_EQ(c.Delete("/mlp.json")->status, 405);
  EXPECT_EQ(read_text(*root_ / "manifest.json"), before);
}

TEST(ServeConfig, EnvironmentOverridesAssetRoot) {
  ServeConfig cfg;
  cfg.asset_root = "/nonexistent";
  ::setenv(kAssetRootEnv, "/tmp", 1);
  EXPECT_EQ(apply_env_overrides(cfg).asset_root, fs::path("/tmp"));
  ::unsetenv(kAssetRootEnv);
  EXPECT_EQ(apply_env_overrides(cfg).asset_root, fs::path("/nonexistent"));
  try {
    cfg.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::io);
  }
  cfg.asset_root = "/tmp";
  cfg.port = 70000;
  EXPECT_THROW(cfg.validate(), Error);
}
