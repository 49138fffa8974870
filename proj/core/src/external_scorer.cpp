// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/external_scorer.hpp"

#include <cmath>
#include <mutex>

#include "httplib.h"

namespace roiblend {

using nlohmann::json;

namespace {

json pixels_json(const Image& image) { return json(std::vector<double>(image.data().begin(), image.data().end())); }

Image image_from_json(const json& j, int width, int height) {
  if (width <= 0 || height <= 0) throw ScorerError("image dimensions must be positive");
  const auto& pixels = j.get_ref<const json::array_t&>();
  if (pixels.size() != static_cast<std::size_t>(width) * height * 3) throw ScorerError("pixel count mismatch");
  Image image(width, height, 3);
  for (std::size_t i = 0; i < pixels.size(); ++i) image.data()[i] = pixels[i].get<double>();
  return image;
}

Eigen::VectorXd vector_from_json(const json& j, int expected) {
  if (!j.is_array() || static_cast<int>(j.size()) != expected) throw ScorerError("vector length mismatch");
  Eigen::VectorXd v(expected);
  for (int i = 0; i < expected; ++i) v[i] = j[i].get<double>();
  if (!v.allFinite()) throw ScorerError("non-finite values in scorer response");
  return v;
}

json vector_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

struct HttpScorer::Client {
  explicit Client(const std::string& url) : http(url) {
    http.set_connection_timeout(5);
    http.set_read_timeout(120);
  }

  std::mutex mutex;
  httplib::Client http;
};

HttpScorer::HttpScorer(const std::string& url) : client_(std::make_unique<Client>(url)) {
  if (!client_->http.is_valid()) throw ScorerError("invalid scorer url: " + url);
  const auto res = client_->http.Get("/info");
  if (!res) throw ScorerError("scorer unreachable at " + url + ": " + httplib::to_string(res.error()));
  if (res->status != 200) throw ScorerError("scorer /info answered " + std::to_string(res->status));
  try {
    const json info = json::parse(res->body);
    dim_ = info.at("dim").get<int>();
    input_ = {info.at("width").get<int>(), info.at("height").get<int>()};
  } catch (const json::exception& e) {
    throw ScorerError(std::string("malformed /info response: ") + e.what());
  }
  if (dim_ <= 0 || input_.width <= 0 || input_.height <= 0) throw ScorerError("scorer reported empty dimensions");
}

HttpScorer::~HttpScorer() = default;

json HttpScorer::post(const json& body) const {
  std::lock_guard lock(client_->mutex);
  const auto res = client_->http.Post("/embed", body.dump(), "application/json");
  if (!res) throw ScorerError("scorer request failed: " + httplib::to_string(res.error()));
  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::exception& e) {
    throw ScorerError(std::string("malformed scorer response: ") + e.what());
  }
  if (res->status != 200) throw ScorerError("scorer error " + std::to_string(res->status) + ": " + reply.value("error", ""));
  return reply;
}

Embedding HttpScorer::embed_text(std::string_view text) const {
  return vector_from_json(post({{"op", "embed_text"}, {"text", std::string(text)}}).at("embedding"), dim_);
}

Embedding HttpScorer::embed_image(const Image& image) const {
  const Image fitted = resize_bilinear(image, input_);
  return vector_from_json(post({{"op", "embed_image"},
                                {"width", input_.width},
                                {"height", input_.height},
                                {"pixels", pixels_json(fitted)}})
                              .at("embedding"),
                          dim_);
}

Image HttpScorer::embed_image_vjp(const Image& image, const Embedding& cotangent) const {
  if (cotangent.size() != dim_) throw InvalidArgument("HttpScorer: cotangent dimension mismatch");
  const Image fitted = resize_bilinear(image, input_);
  const json reply = post({{"op", "embed_image_vjp"},
                           {"width", input_.width},
                           {"height", input_.height},
                           {"pixels", pixels_json(fitted)},
                           {"cotangent", vector_json(cotangent)}});
  const Eigen::VectorXd grad = vector_from_json(reply.at("grad"), 3 * input_.pixels());
  Image g(input_, 3);
  std::copy(grad.data(), grad.data() + grad.size(), g.data().begin());
  return resize_bilinear_adjoint(g, image.resolution());
}

json scorer_info(const Scorer& scorer) {
  return {{"dim", scorer.dim()}, {"width", scorer.input_resolution().width}, {"height", scorer.input_resolution().height}};
}

json handle_scorer_request(const Scorer& scorer, const json& request) {
  try {
    const std::string op = request.at("op").get<std::string>();
    if (op == "embed_text") return {{"embedding", vector_json(scorer.embed_text(request.at("text").get<std::string>()))}};
    const Image image =
        image_from_json(request.at("pixels"), request.at("width").get<int>(), request.at("height").get<int>());
    if (op == "embed_image") return {{"embedding", vector_json(scorer.embed_image(image))}};
    if (op == "embed_image_vjp") {
      const Image grad = scorer.embed_image_vjp(image, vector_from_json(request.at("cotangent"), scorer.dim()));
      return {{"grad", pixels_json(grad)}};
    }
    throw ScorerError("unknown op: " + op);
  } catch (const json::exception& e) {
    throw ScorerError(std::string("malformed scorer request: ") + e.what());
  }
}

}  // namespace roiblend
