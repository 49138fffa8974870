// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Adapter for an out-of-process image-text model reached over HTTP. Protocol
// (JSON bodies, UTF-8):
//
//   GET  /info   -> {"dim": K, "width": W, "height": H}
//   POST /embed  {"op": "embed_text", "text": "..."}                -> {"embedding": [K floats]}
//   POST /embed  {"op": "embed_image", "width": W, "height": H,
//                 "pixels": [W*H*3 floats, row-major RGB in [0,1]]} -> {"embedding": [K floats]}
//   POST /embed  {"op": "embed_image_vjp", "width", "height", "pixels",
//                 "cotangent": [K floats]}                          -> {"grad": [W*H*3 floats]}
//
// Errors are non-2xx responses with {"error": "..."}.

#include <memory>
#include <string>

#include "json.hpp"

#include "roiblend/guidance.hpp"

namespace roiblend {

class ScorerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HttpScorer final : public Scorer {
 public:
  // url like "http://127.0.0.1:8765"
  explicit HttpScorer(const std::string& url);
  ~HttpScorer() override;

  Resolution input_resolution() const override { return input_; }
  int dim() const override { return dim_; }
  Embedding embed_image(const Image& image) const override;
  Embedding embed_text(std::string_view text) const override;
  Image embed_image_vjp(const Image& image, const Embedding& cotangent) const override;

 private:
  nlohmann::json post(const nlohmann::json& body) const;

  struct Client;
  std::unique_ptr<Client> client_;
  Resolution input_;
  int dim_ = 0;
};

// Server side of the protocol, answering with any in-process scorer.
nlohmann::json handle_scorer_request(const Scorer& scorer, const nlohmann::json& request);
nlohmann::json scorer_info(const Scorer& scorer);

}  // namespace roiblend
