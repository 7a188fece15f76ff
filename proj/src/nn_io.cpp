#include <bit>
#include <cstring>
#include <fstream>

#include "mmfusion/error.hpp"
#include "mmfusion/nn.hpp"
#include "nn_json.hpp"

namespace mmf {
namespace detail {

json head_to_json(const nn::Head& head) {
  return json{{"kind", nn::to_string(head.kind)}, {"classes", head.classes}};
}

nn::Head head_from_json(const json& j) {
  nn::Head h;
  h.kind = nn::parse_head_kind(require<std::string>(j, "kind"));
  if (j.contains("classes")) h.classes = require<std::size_t>(j, "classes");
  return h;
}

json spec_to_json(const nn::ModelSpec& s) {
  return json{{"architecture", nn::to_string(s.architecture)},
              {"input_dim", s.input_dim},
              {"hidden", s.hidden},
              {"kernel_size", s.kernel_size},
              {"n_filters", s.n_filters},
              {"lstm_hidden", s.lstm_hidden},
              {"head", head_to_json(s.head)},
              {"activation", nn::to_string(s.activation)}};
}

nn::ModelSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("model spec must be an object");
  nn::ModelSpec s;
  s.architecture = nn::parse_architecture(require<std::string>(j, "architecture"));
  s.input_dim = require<std::size_t>(j, "input_dim");
  if (j.contains("hidden")) s.hidden = require<std::vector<std::size_t>>(j, "hidden");
  if (j.contains("kernel_size")) s.kernel_size = require<std::size_t>(j, "kernel_size");
  if (j.contains("n_filters")) s.n_filters = require<std::size_t>(j, "n_filters");
  if (j.contains("lstm_hidden")) s.lstm_hidden = require<std::size_t>(j, "lstm_hidden");
  if (j.contains("head")) s.head = head_from_json(j.at("head"));
  if (j.contains("activation")) s.activation = nn::parse_activation(require<std::string>(j, "activation"));
  nn::validate_spec(s);
  return s;
}

}  // namespace detail

namespace nn {
namespace {

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

void write_le(std::ofstream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

double read_le(const unsigned char* buf) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& stem) {
  using detail::json;
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream bin(with_ext(stem, ".bin"), std::ios::binary);
  if (!bin) throw DataError("cannot write checkpoint " + with_ext(stem, ".bin").string());
  json table = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : model.parameters) {
    table.push_back(json{{"name", name}, {"shape", t.shape}, {"offset", offset}, {"count", t.values.size()}});
    for (double v : t.values) write_le(bin, v);
    offset += t.values.size();
  }
  bin.close();
  json manifest{{"spec", detail::spec_to_json(model.spec)},
                {"seed", model.seed},
                {"train_history", model.train_history},
                {"dev_history", model.dev_history},
                {"best_epoch", model.best_epoch},
                {"checksum", parameter_checksum(model.parameters)},
                {"parameters", table}};
  std::ofstream js(with_ext(stem, ".json"));
  if (!js) throw DataError("cannot write checkpoint " + with_ext(stem, ".json").string());
  js << manifest.dump(2) << "\n";
}

TrainedModel load_checkpoint(const std::filesystem::path& stem) {
  using detail::json;
  using detail::require;
  std::ifstream js(with_ext(stem, ".json"));
  if (!js) throw DataError("cannot read checkpoint " + with_ext(stem, ".json").string());
  json manifest;
  try {
    manifest = json::parse(js);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint manifest: ") + e.what());
  }
  std::ifstream bin(with_ext(stem, ".bin"), std::ios::binary);
  if (!bin) throw DataError("cannot read checkpoint " + with_ext(stem, ".bin").string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (blob.size() % 8 != 0) throw ValidationError("checkpoint blob size is not a multiple of 8");
  const std::size_t total = blob.size() / 8;

  TrainedModel m;
  m.spec = detail::spec_from_json(manifest.at("spec"));
  m.seed = require<std::uint64_t>(manifest, "seed");
  m.train_history = require<std::vector<double>>(manifest, "train_history");
  m.dev_history = require<std::vector<double>>(manifest, "dev_history");
  m.best_epoch = require<std::size_t>(manifest, "best_epoch");
  for (const auto& entry : manifest.at("parameters")) {
    Tensor t;
    t.shape = require<std::vector<std::size_t>>(entry, "shape");
    const auto offset = require<std::size_t>(entry, "offset");
    const auto count = require<std::size_t>(entry, "count");
    if (offset + count > total) throw ValidationError("checkpoint parameter table exceeds blob");
    t.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) t.values[i] = read_le(blob.data() + 8 * (offset + i));
    m.parameters.emplace(require<std::string>(entry, "name"), std::move(t));
  }
  const TrainedModel fresh = init_model(m.spec, m.seed);
  for (const auto& [name, t] : fresh.parameters) {
    auto it = m.parameters.find(name);
    if (it == m.parameters.end() || it->second.shape != t.shape)
      throw ValidationError("checkpoint parameter '" + name + "' missing or mis-shaped");
  }
  if (m.parameters.size() != fresh.parameters.size())
    throw ValidationError("checkpoint has unexpected parameters");
  if (manifest.contains("checksum") &&
      manifest.at("checksum").get<std::uint64_t>() != parameter_checksum(m.parameters))
    throw ValidationError("checkpoint checksum mismatch");
  return m;
}

}  // namespace nn
}  // namespace mmf
