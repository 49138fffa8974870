// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// HTTP API used by the ROI editor and batch tools. All bodies are JSON.
//
//   GET  /scenes                      -> [{"id", "scene_type", "bounds": {"min", "max"}, "camera"}]
//   GET  /render?scene=ID&pose=JSON&res=N[xM]&seed=S
//        -> {"width", "height", "png_base64", "depth_base64", "disparity_base64",
//            "transmittance_base64", "mean_transmittance"}   (maps: raw f32 LE)
//   POST /roi {"scene", "box", "pose", "res", "samples_per_edge"}
//        -> {"width", "height", "samples": [{"edge", "x", "y", "visible"}]}
//   POST /edits {"edit": EditDescriptor, "train": {...overrides}, "scorer": {...}}
//        -> 202 {"id"}; 409 when a job with that id is still running
//   GET  /edits/{id}/status -> {"id", "state", "step", "total", "losses": {...}}
//   GET  /edits/{id}/render?pose=JSON&res=N -> same body as /render
//
// Invalid boxes/poses answer 400, unknown ids 404.

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "roiblend/descriptors.hpp"

namespace httplib {
class Server;
}

namespace roiblend {

struct ServiceConfig {
  int max_resolution = 512;
  std::filesystem::path work_dir = "edits";
  int samples_per_edge = 32;
};

class EditService {
 public:
  EditService(std::vector<SceneDescriptor> scenes, ServiceConfig config = {});
  ~EditService();

  EditService(const EditService&) = delete;
  EditService& operator=(const EditService&) = delete;

  void register_routes(httplib::Server& server);

  // Blocking; returns when stop() is called.
  void listen(const std::string& host, int port);
  void stop();
  int bind_any_port(const std::string& host);
  void listen_after_bind();

  // Waits for all training jobs to finish.
  void join_jobs();

 private:
  struct Scene;
  struct Job;

  const Scene* find_scene(const std::string& id) const;
  nlohmann::json render_body(const RenderOutput& out) const;
  Resolution parse_resolution(const std::string& text, Resolution fallback) const;

  ServiceConfig config_;
  std::map<std::string, std::unique_ptr<Scene>> scenes_;
  std::mutex jobs_mutex_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::atomic<int> next_job_{1};
  std::unique_ptr<httplib::Server> server_;
};

std::vector<SceneDescriptor> load_scene_directory(const std::filesystem::path& dir);

}  // namespace roiblend
