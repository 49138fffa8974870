// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <string_view>

#include "roiblend/image_io.hpp"

namespace roiblend {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

using nlohmann::json;

constexpr std::string_view kFieldMagic("RBFIELD\0", 8);
constexpr std::string_view kStateMagic("RBSTATE\0", 8);

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw CheckpointError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json arch_json(const MlpArchitecture& a) {
  return {{"depth", a.depth}, {"width", a.width}, {"pos_frequencies", a.pos_frequencies},
          {"dir_frequencies", a.dir_frequencies}};
}

MlpArchitecture json_arch(const json& j) {
  MlpArchitecture a;
  a.depth = j.at("depth").get<int>();
  a.width = j.at("width").get<int>();
  a.pos_frequencies = j.at("pos_frequencies").get<int>();
  a.dir_frequencies = j.at("dir_frequencies").get<int>();
  a.validate();
  return a;
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view view(std::size_t n) {
    need(n);
    std::string_view v(reinterpret_cast<const char*>(bytes_.data()) + pos_, n);
    pos_ += n;
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> encode_container(std::string_view magic, const json& header,
                                           std::initializer_list<const Eigen::VectorXd*> arrays) {
  std::vector<std::uint8_t> out(magic.begin(), magic.end());
  const std::string text = header.dump();
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  std::uint64_t count = 0;
  for (const Eigen::VectorXd* a : arrays) count += static_cast<std::uint64_t>(a->size());
  put<std::uint64_t>(out, count);
  for (const Eigen::VectorXd* a : arrays) {
    for (Eigen::Index i = 0; i < a->size(); ++i) put<float>(out, static_cast<float>((*a)[i]));
  }
  return out;
}

struct Container {
  json header;
  std::vector<double> values;
};

Container decode_container(std::string_view magic, const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.view(magic.size()) != magic) throw CheckpointError("not a roiblend checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = r.get<std::uint32_t>();
  Container c;
  try {
    c.header = json::parse(r.view(header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  if (count > bytes.size()) throw CheckpointError("checkpoint truncated");
  c.values.resize(count);
  for (auto& v : c.values) v = r.get<float>();
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload");
  return c;
}

Eigen::VectorXd slice(const std::vector<double>& values, std::size_t offset, std::size_t n) {
  return Eigen::Map<const Eigen::VectorXd>(values.data() + offset, static_cast<Eigen::Index>(n));
}

MlpField mlp_from(const json& header, const std::vector<double>& values, std::size_t offset) {
  const MlpArchitecture arch = json_arch(header.at("architecture"));
  const Eigen::Index expected = MlpField::initialize(arch, 0).param_count();
  if (values.size() < offset + static_cast<std::size_t>(expected)) {
    throw CheckpointError("parameter count does not match the architecture");
  }
  return MlpField(arch, slice(values, offset, expected));
}

}  // namespace

json field_descriptor(const RadianceField& field) {
  if (const auto* mlp = dynamic_cast<const MlpField*>(&field)) {
    return {{"kind", "mlp"}, {"architecture", arch_json(mlp->architecture())}};
  }
  if (const auto* analytic = dynamic_cast<const AnalyticField*>(&field)) {
    const AnalyticField::Params& p = analytic->params();
    return {{"kind", "analytic"},
            {"type", to_string(p.kind)},
            {"center", vec_json(p.center)},
            {"radius", p.radius},
            {"dims", vec_json(p.dims)},
            {"raw_density", p.raw_density},
            {"raw_color", vec_json(p.raw_color)},
            {"alt_raw_color", vec_json(p.alt_raw_color)},
            {"cell_size", p.cell_size}};
  }
  throw CheckpointError("field type cannot be serialized");
}

std::unique_ptr<RadianceField> field_from_descriptor(const json& d) {
  try {
    const std::string kind = d.at("kind").get<std::string>();
    if (kind != "analytic") throw CheckpointError("descriptor kind '" + kind + "' needs a checkpoint");
    AnalyticField::Params p;
    p.kind = analytic_kind_from_string(d.at("type").get<std::string>());
    if (d.contains("center")) p.center = json_vec(d["center"]);
    if (d.contains("radius")) p.radius = d["radius"].get<double>();
    if (d.contains("dims")) p.dims = json_vec(d["dims"]);
    if (d.contains("raw_density")) p.raw_density = d["raw_density"].get<double>();
    if (d.contains("raw_color")) p.raw_color = json_vec(d["raw_color"]);
    if (d.contains("alt_raw_color")) p.alt_raw_color = json_vec(d["alt_raw_color"]);
    if (d.contains("cell_size")) p.cell_size = d["cell_size"].get<double>();
    return std::make_unique<AnalyticField>(p);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed field descriptor: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CheckpointError(std::string("invalid field descriptor: ") + e.what());
  }
}

std::vector<std::uint8_t> encode_field(const RadianceField& field, const json& metadata) {
  json header = field_descriptor(field);
  if (!metadata.is_null()) header["metadata"] = metadata;
  if (const auto* mlp = dynamic_cast<const MlpField*>(&field)) {
    return encode_container(kFieldMagic, header, {&mlp->params()});
  }
  const Eigen::VectorXd none;
  return encode_container(kFieldMagic, header, {&none});
}

std::unique_ptr<RadianceField> decode_field(const std::vector<std::uint8_t>& bytes, json* metadata) {
  const Container c = decode_container(kFieldMagic, bytes);
  if (metadata) *metadata = c.header.value("metadata", json());
  try {
    if (c.header.at("kind") == "mlp") {
      MlpField field = mlp_from(c.header, c.values, 0);
      if (static_cast<std::size_t>(field.param_count()) != c.values.size()) {
        throw CheckpointError("parameter count does not match the architecture");
      }
      return std::make_unique<MlpField>(std::move(field));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (!c.values.empty()) throw CheckpointError("analytic checkpoint carries parameters");
  return field_from_descriptor(c.header);
}

void save_field(const std::filesystem::path& path, const RadianceField& field, const json& metadata) {
  write_file_bytes(path, encode_field(field, metadata));
}

std::unique_ptr<RadianceField> load_field(const std::filesystem::path& path, json* metadata) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const ImageIoError& e) {
    throw CheckpointError(e.what());
  }
  return decode_field(bytes, metadata);
}

void save_train_state(const std::filesystem::path& path, const TrainState& state) {
  json history = json::array();
  for (const LossRecord& r : state.history) {
    history.push_back({r.step, r.l_sim, r.l_t, r.l_d, r.lambda_t, r.lambda_d, r.total});
  }
  const json header = {{"kind", "mlp"},
                       {"architecture", arch_json(state.generator.architecture())},
                       {"step", state.step},
                       {"tracker",
                        {{"center", vec_json(state.tracker.center())},
                         {"initialized", state.tracker.initialized()},
                         {"decay", state.tracker.decay()}}},
                       {"history", history}};
  const auto bytes = encode_container(kStateMagic, header,
                                      {&state.generator.params(), &state.moments.m, &state.moments.v});
  // Write-then-rename so an interrupted save never clobbers the last good state.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  write_file_bytes(tmp, bytes);
  std::filesystem::rename(tmp, path);
}

TrainState load_train_state(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const ImageIoError& e) {
    throw CheckpointError(e.what());
  }
  const Container c = decode_container(kStateMagic, bytes);
  try {
    MlpField generator = mlp_from(c.header, c.values, 0);
    const auto n = static_cast<std::size_t>(generator.param_count());
    if (c.values.size() != 3 * n) throw CheckpointError("state payload does not hold params and two moments");
    const json& t = c.header.at("tracker");
    CenterTracker tracker(t.at("decay").get<double>());
    tracker.restore(json_vec(t.at("center")), t.at("initialized").get<bool>());
    std::vector<LossRecord> history;
    for (const json& r : c.header.at("history")) {
      history.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>(),
                         r.at(4).get<double>(), r.at(5).get<double>(), r.at(6).get<double>()});
    }
    const int step = c.header.at("step").get<int>();
    if (static_cast<std::size_t>(step) != history.size()) throw CheckpointError("state history length != step");
    return TrainState{step, std::move(generator), AdamMoments{slice(c.values, n, n), slice(c.values, 2 * n, n)},
                      tracker, std::move(history)};
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed state header: ") + e.what());
  }
}

}  // namespace roiblend
