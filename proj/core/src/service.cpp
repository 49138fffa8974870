// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/service.hpp"

#include <algorithm>
#include <charconv>

#include "httplib.h"

#include "roiblend/external_scorer.hpp"
#include "roiblend/image_io.hpp"

namespace roiblend {

using nlohmann::json;

struct EditService::Scene {
  SceneDescriptor desc;
  std::unique_ptr<RadianceField> field;
};

struct EditService::Job {
  std::string id;
  std::thread thread;
  std::atomic<bool> cancel{false};
  std::shared_ptr<const Scorer> scorer;

  mutable std::mutex mutex;
  std::string state = "queued";
  int step = 0;
  int total = 0;
  std::optional<LossRecord> last;
  std::string error;
  EditDescriptor edit;
  std::shared_ptr<const EditedScene> fields;  // set once training finished
};

namespace {

class HttpError : public std::runtime_error {
 public:
  HttpError(int status, const std::string& message) : std::runtime_error(message), status(status) {}
  int status;
};

class Cancelled : public std::runtime_error {
 public:
  Cancelled() : std::runtime_error("cancelled") {}
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Uniform error mapping for every route.
template <typename F>
httplib::Server::Handler guarded(F body) {
  return [body](const httplib::Request& req, httplib::Response& res) {
    try {
      body(req, res);
    } catch (const HttpError& e) {
      send_json(res, e.status, {{"error", e.what()}});
    } catch (const DescriptorError& e) {
      send_json(res, 400, {{"error", e.what()}});
    } catch (const InvalidArgument& e) {
      send_json(res, 400, {{"error", e.what()}});
    } catch (const json::exception& e) {
      send_json(res, 400, {{"error", std::string("malformed request: ") + e.what()}});
    } catch (const ScorerError& e) {
      send_json(res, 502, {{"error", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", e.what()}});
    }
  };
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw HttpError(400, std::string("body is not valid JSON: ") + e.what());
  }
}

std::uint64_t seed_param(const httplib::Request& req) {
  if (!req.has_param("seed")) return 0;
  const std::string text = req.get_param_value("seed");
  std::uint64_t seed = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    throw HttpError(400, "seed must be a nonnegative integer");
  }
  return seed;
}

CameraPose pose_param(const httplib::Request& req, const CameraPose& fallback) {
  if (!req.has_param("pose")) return fallback;
  return pose_from_json(json::parse(req.get_param_value("pose")));
}

json loss_json(const LossRecord& r) {
  return {{"l_sim", r.l_sim}, {"l_t", r.l_t}, {"l_d", r.l_d}, {"lambda_t", r.lambda_t}, {"lambda_d", r.lambda_d},
          {"total", r.total}};
}

std::shared_ptr<const Scorer> make_scorer(const json& spec) {
  const std::string kind = spec.value("kind", std::string("mock"));
  if (kind == "external") return std::make_shared<HttpScorer>(spec.at("url").get<std::string>());
  if (kind != "mock") throw HttpError(400, "unknown scorer kind: " + kind);
  const int side = spec.value("resolution", 32);
  auto scorer = std::make_shared<MockScorer>(Resolution{side, side}, spec.value("seed", std::uint64_t{7}));
  if (spec.contains("target_png_base64")) {
    const Image target = decode_png_rgb(base64_decode(spec["target_png_base64"].get<std::string>()));
    scorer->register_caption(spec.at("caption").get<std::string>(), target);
  }
  return scorer;
}

}  // namespace

EditService::EditService(std::vector<SceneDescriptor> scenes, ServiceConfig config)
    : config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
  for (SceneDescriptor& desc : scenes) {
    auto scene = std::make_unique<Scene>();
    scene->field = desc.load_field();
    scene->desc = std::move(desc);
    const std::string id = scene->desc.id;
    if (!scenes_.emplace(id, std::move(scene)).second) throw DescriptorError("duplicate scene id: " + id);
  }
}

EditService::~EditService() {
  stop();
  {
    std::lock_guard lock(jobs_mutex_);
    for (auto& [id, job] : jobs_) job->cancel = true;
  }
  join_jobs();
}

const EditService::Scene* EditService::find_scene(const std::string& id) const {
  const auto it = scenes_.find(id);
  return it == scenes_.end() ? nullptr : it->second.get();
}

Resolution EditService::parse_resolution(const std::string& text, Resolution fallback) const {
  if (text.empty()) return fallback;
  Resolution r;
  try {
    const auto x = text.find('x');
    r.width = std::stoi(text.substr(0, x));
    r.height = x == std::string::npos ? r.width : std::stoi(text.substr(x + 1));
  } catch (const std::exception&) {
    throw HttpError(400, "res must be N or WxH");
  }
  if (r.width <= 0 || r.height <= 0) throw HttpError(400, "res must be positive");
  r.width = std::min(r.width, config_.max_resolution);
  r.height = std::min(r.height, config_.max_resolution);
  return r;
}

json EditService::render_body(const RenderOutput& out) const {
  return {{"width", out.rgb.width()},
          {"height", out.rgb.height()},
          {"png_base64", base64_encode(encode_png_rgb8(out.rgb))},
          {"depth_base64", base64_encode(encode_f32_sidecar(occlusion_depth(out)))},
          {"disparity_base64", base64_encode(encode_f32_sidecar(out.disparity))},
          {"transmittance_base64", base64_encode(encode_f32_sidecar(out.final_transmittance))},
          {"mean_transmittance", out.mean_transmittance}};
}

void EditService::register_routes(httplib::Server& server) {
  server.Get("/scenes", guarded([this](const httplib::Request&, httplib::Response& res) {
    json list = json::array();
    for (const auto& [id, scene] : scenes_) {
      const SceneDescriptor& d = scene->desc;
      list.push_back({{"id", id},
                      {"scene_type", to_string(d.scene_type)},
                      {"bounds", {{"min", vec_to_json(d.bounds_min)}, {"max", vec_to_json(d.bounds_max)}}},
                      {"camera", pose_to_json(d.default_camera)},
                      {"resolution", {d.render.resolution.width, d.render.resolution.height}}});
    }
    send_json(res, 200, list);
  }));

  server.Get("/render", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const Scene* scene = find_scene(req.get_param_value("scene"));
    if (!scene) throw HttpError(404, "unknown scene: " + req.get_param_value("scene"));
    const CameraPose pose = pose_param(req, scene->desc.default_camera);
    const Resolution r = parse_resolution(req.get_param_value("res"), scene->desc.render.resolution);
    send_json(res, 200, render_body(render_scene(scene->desc, *scene->field, pose, r, seed_param(req))));
  }));

  server.Post("/roi", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const std::string scene_id = body.at("scene").get<std::string>();
    const Scene* scene = find_scene(scene_id);
    if (!scene) throw HttpError(404, "unknown scene: " + scene_id);
    const RoiBox box = box_from_json(body.at("box"));
    const CameraPose pose = body.contains("pose") ? pose_from_json(body["pose"]) : scene->desc.default_camera;
    std::string res_text;
    if (body.contains("res")) res_text = body["res"].is_string() ? body["res"].get<std::string>() : body["res"].dump();
    const Resolution r = parse_resolution(res_text, scene->desc.render.resolution);
    const int per_edge = body.value("samples_per_edge", config_.samples_per_edge);
    const RenderOutput out = render_scene(scene->desc, *scene->field, pose, r, body.value("seed", std::uint64_t{0}));
    json samples = json::array();
    for (const EdgeSample& s : project_box_edges(box, pose, occlusion_depth(out), per_edge)) {
      samples.push_back({{"edge", s.edge}, {"x", s.pixel.x()}, {"y", s.pixel.y()}, {"visible", s.visible}});
    }
    send_json(res, 200, {{"width", r.width}, {"height", r.height}, {"samples", samples}});
  }));

  server.Post("/edits", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    EditDescriptor edit = edit_from_json(body.at("edit"), {});
    const Scene* scene = find_scene(edit.scene_id);
    if (!scene) throw HttpError(404, "unknown scene: " + edit.scene_id);
    edit.validate(&scene->desc);
    if (edit.id.empty()) edit.id = "edit-" + std::to_string(next_job_++);
    TrainConfig cfg = train_config_from_json(body.value("train", json()));
    json scorer_spec = body.value("scorer", json::object());
    if (!scorer_spec.contains("caption")) scorer_spec["caption"] = edit.caption;
    auto scorer = make_scorer(scorer_spec);

    std::shared_ptr<Job> previous;
    auto job = std::make_shared<Job>();
    job->id = edit.id;
    job->scorer = std::move(scorer);
    job->edit = edit;
    job->total = cfg.steps;
    {
      std::lock_guard lock(jobs_mutex_);
      if (auto it = jobs_.find(edit.id); it != jobs_.end()) {
        std::lock_guard job_lock(it->second->mutex);
        if (it->second->state == "queued" || it->second->state == "running") {
          throw HttpError(409, "edit '" + edit.id + "' is already training");
        }
        previous = it->second;
      }
      jobs_[edit.id] = job;
    }
    if (previous && previous->thread.joinable()) previous->thread.join();

    const std::filesystem::path out_dir = config_.work_dir / edit.id;
    job->thread = std::thread([job, scene, edit, cfg, out_dir] {
      {
        std::lock_guard lock(job->mutex);
        job->state = "running";
      }
      try {
        TrainOptions options;
        options.on_step = [job](const TrainState& s) {
          {
            std::lock_guard lock(job->mutex);
            job->step = s.step;
            job->last = s.history.back();
          }
          if (job->cancel) throw Cancelled();
        };
        EditRunResult result = run_edit(scene->desc, edit, cfg, *job->scorer, out_dir, std::move(options));
        auto fields = std::make_shared<EditedScene>(load_edited_scene(scene->desc, result.edit));
        std::lock_guard lock(job->mutex);
        job->edit = result.edit;
        job->fields = std::move(fields);
        job->state = "done";
      } catch (const Cancelled&) {
        std::lock_guard lock(job->mutex);
        job->state = "cancelled";
      } catch (const std::exception& e) {
        std::lock_guard lock(job->mutex);
        job->state = "failed";
        job->error = e.what();
      }
    });
    send_json(res, 202, {{"id", edit.id}});
  }));

  auto find_job = [this](const std::string& id) {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw HttpError(404, "unknown edit: " + id);
    return it->second;
  };

  server.Get(R"(/edits/([^/]+)/status)", guarded([find_job](const httplib::Request& req, httplib::Response& res) {
    const std::shared_ptr<Job> job = find_job(req.matches[1]);
    json body;
    {
      std::lock_guard lock(job->mutex);
      body = {{"id", job->id}, {"state", job->state}, {"step", job->step}, {"total", job->total}};
      body["losses"] = job->last ? loss_json(*job->last) : json::object();
      if (!job->error.empty()) body["error"] = job->error;
      if (job->edit.center) body["center"] = vec_to_json(*job->edit.center);
    }
    send_json(res, 200, body);
  }));

  server.Get(R"(/edits/([^/]+)/render)",
             guarded([this, find_job](const httplib::Request& req, httplib::Response& res) {
               const std::shared_ptr<Job> job = find_job(req.matches[1]);
               std::shared_ptr<const EditedScene> fields;
               EditDescriptor edit;
               {
                 std::lock_guard lock(job->mutex);
                 fields = job->fields;
                 edit = job->edit;
               }
               if (!fields) throw HttpError(409, "edit '" + job->id + "' has not finished training");
               const Scene* scene = find_scene(edit.scene_id);
               if (!scene) throw HttpError(404, "unknown scene: " + edit.scene_id);
               const CameraPose pose = pose_param(req, scene->desc.default_camera);
               const Resolution r = parse_resolution(req.get_param_value("res"), scene->desc.render.resolution);
               send_json(res, 200, render_body(render_edit(scene->desc, edit, *fields, pose, r, seed_param(req))));
             }));
}

void EditService::listen(const std::string& host, int port) {
  register_routes(*server_);
  if (!server_->listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

int EditService::bind_any_port(const std::string& host) {
  register_routes(*server_);
  const int port = server_->bind_to_any_port(host);
  if (port < 0) throw std::runtime_error("cannot bind " + host);
  return port;
}

void EditService::listen_after_bind() { server_->listen_after_bind(); }

void EditService::stop() {
  if (server_) server_->stop();
}

void EditService::join_jobs() {
  std::vector<std::shared_ptr<Job>> jobs;
  {
    std::lock_guard lock(jobs_mutex_);
    for (auto& [id, job] : jobs_) jobs.push_back(job);
  }
  for (auto& job : jobs) {
    if (job->thread.joinable()) job->thread.join();
  }
}

std::vector<SceneDescriptor> load_scene_directory(const std::filesystem::path& dir) {
  std::vector<SceneDescriptor> scenes;
  if (!std::filesystem::is_directory(dir)) throw DescriptorError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "scene.json") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) scenes.push_back(load_scene(p));
  return scenes;
}

}  // namespace roiblend
