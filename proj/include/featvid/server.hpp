#pragma once

// Read-only HTTP service over a bundle directory. Byte ranges (206/416) are
// handled by httplib on every 200 response.

#include <cstdlib>
#include <memory>
#include <thread>

#include "httplib.h"
#include "featvid/bundle.hpp"

namespace featvid {

inline constexpr const char* kAssetRootEnv = "FEATVID_ASSET_ROOT";

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path asset_root = ".";
  std::string cache_control = "public, max-age=31536000, immutable";
  std::string cors_origin = "*";  // empty disables CORS headers

  void validate() const {
    if (port < 0 || port > 65535) fail(Errc::range, "port must be in [0, 65535]");
    if (!std::filesystem::is_directory(asset_root)) fail(Errc::io, "asset root " + asset_root.string() + " is not a directory");
  }
};

/// The environment variable wins over the configured asset root.
inline ServeConfig apply_env_overrides(ServeConfig cfg) {
  if (const char* root = std::getenv(kAssetRootEnv); root && *root) cfg.asset_root = root;
  return cfg;
}

class StreamServer {
 public:
  explicit StreamServer(ServeConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    manifest_ = load_manifest(cfg_.asset_root);
    routes();
  }
  ~StreamServer() { stop(); }
  StreamServer(const StreamServer&) = delete;
  StreamServer& operator=(const StreamServer&) = delete;

  /// Binds the socket; returns the bound port.
  int bind() {
    if (cfg_.port == 0) {
      port_ = http_.bind_to_any_port(cfg_.host);
    } else {
      port_ = http_.bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1;
    }
    if (port_ < 0) fail(Errc::io, "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    return port_;
  }

  /// Blocks until stop().
  void run() {
    if (port_ < 0) bind();
    http_.listen_after_bind();
  }

  /// Binds and serves on a background thread.
  int start() {
    const int p = bind();
    thread_ = std::thread([this] { http_.listen_after_bind(); });
    http_.wait_until_ready();
    return p;
  }

  void stop() {
    http_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  const GofManifest& manifest() const { return manifest_; }

 private:
  void headers(httplib::Response& res) const {
    if (!cfg_.cors_origin.empty()) {
      res.set_header("Access-Control-Allow-Origin", cfg_.cors_origin);
      res.set_header("Access-Control-Expose-Headers", "Content-Length, Content-Range, Accept-Ranges");
    }
  }

  void send_file(const std::string& uri, const char* type, httplib::Response& res) const {
    std::vector<std::uint8_t> bytes;
    try {
      bytes = read_file(cfg_.asset_root / uri);
    } catch (const Error&) {
      res.status = 404;
      return;
    }
    res.set_header("Cache-Control", cfg_.cache_control);
    res.set_header("Accept-Ranges", "bytes");
    res.set_content(std::string(bytes.begin(), bytes.end()), type);
  }

  void routes() {
    http_.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) { headers(res); });
    http_.Get("/manifest.json", [this](const httplib::Request&, httplib::Response& res) {
      send_file("manifest.json", "application/json", res);
    });
    http_.Get("/mlp.json", [this](const httplib::Request&, httplib::Response& res) {
      send_file(manifest_.mlp.uri, "application/json", res);
    });
    http_.Get(R"(/gof/(\d{1,9})/(stream|mapping\.png|occupancy\.bin))",
              [this](const httplib::Request& req, httplib::Response& res) {
                const ManifestGroup* g = manifest_.find_group(std::stoi(req.matches[1].str()));
                if (!g) {
                  res.status = 404;
                  return;
                }
                const std::string leaf = req.matches[2].str();
                if (leaf == "stream") send_file(g->stream.uri, "application/octet-stream", res);
                else if (leaf == "mapping.png") send_file(g->mapping.uri, "image/png", res);
                else send_file(g->occupancy.uri, "application/octet-stream", res);
              });
    http_.Options(".*", [this](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, HEAD, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Range");
      res.status = 204;
    });
    // read-only
    auto refuse = [](const httplib::Request&, httplib::Response& res) { res.status = 405; };
    http_.Post(".*", refuse);
    http_.Put(".*", refuse);
    http_.Patch(".*", refuse);
    http_.Delete(".*", refuse);
  }

  ServeConfig cfg_;
  GofManifest manifest_;
  httplib::Server http_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace featvid
