#include "mmfusion/embeddings.hpp"

#include <httplib.h>

#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include "json_util.hpp"
#include "mmfusion/random.hpp"

namespace mmf {

using detail::json;

std::vector<double> deterministic_embed(std::string_view content, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ParameterError("deterministic_embed: dim must be >= 1");
  Rng rng(fnv1a64(content) ^ splitmix64(seed));
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

EmbeddingStore::EmbeddingStore(std::size_t dim, std::string provider)
    : dim_(dim), provider_(std::move(provider)) {
  if (dim_ == 0) throw ValidationError("EmbeddingStore: dim must be >= 1");
}

void EmbeddingStore::insert(std::string key, std::vector<double> vector) {
  if (vector.size() != dim_)
    throw ValidationError("EmbeddingStore: vector for '" + key + "' has width " +
                          std::to_string(vector.size()) + ", store width " + std::to_string(dim_));
  for (double x : vector)
    if (!std::isfinite(x)) throw ValidationError("EmbeddingStore: non-finite value for '" + key + "'");
  auto [it, inserted] = entries_.try_emplace(std::move(key), std::move(vector));
  if (!inserted && it->second != vector)
    throw ValidationError("EmbeddingStore: conflicting vector for '" + it->first + "'");
}

const std::vector<double>* EmbeddingStore::find(std::string_view key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embedding store " + path.string());
  out << json{{"dim", dim_}, {"provider", provider_}}.dump() << '\n';
  for (const auto& [key, vec] : entries_) out << json{{"key", key}, {"vector", vec}}.dump() << '\n';
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding store " + path.string());
  std::string line;
  std::size_t line_number = 1;
  if (!std::getline(in, line)) throw ParseError("empty store file", line_number);
  std::optional<EmbeddingStore> store;
  try {
    const json header = json::parse(line);
    store.emplace(header.at("dim").get<std::size_t>(), header.value("provider", "unknown"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad store header: ") + e.what(), line_number);
  }
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      store->insert(j.at("key").get<std::string>(), j.at("vector").get<std::vector<double>>());
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_number);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_number);
    }
  }
  return std::move(*store);
}

DeterministicProvider::DeterministicProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw ValidationError("provider dim must be >= 1");
}

std::vector<double> DeterministicProvider::embed(std::string_view content) const {
  return deterministic_embed(content, dim_, seed_);
}

StoreProvider::StoreProvider(std::shared_ptr<const EmbeddingStore> store) : store_(std::move(store)) {
  if (!store_) throw ValidationError("StoreProvider: null store");
}

std::vector<double> StoreProvider::embed(std::string_view content) const {
  const auto* v = store_->find(content);
  if (!v) throw LookupError("embedding store has no entry for key '" + std::string(content) + "'");
  return *v;
}

struct RemoteProvider::Limiter {
  std::mutex mu;
  std::condition_variable cv;
  std::size_t in_flight = 0;
  std::size_t limit = 1;
};

RemoteProvider::RemoteProvider(ProviderConfig config)
    : config_(std::move(config)), limiter_(std::make_unique<Limiter>()) {
  if (config_.dim == 0) throw ValidationError("provider dim must be >= 1");
  if (config_.endpoint.empty()) throw ValidationError("remote provider needs an endpoint");
  limiter_->limit = std::max<std::size_t>(1, config_.max_in_flight);
}

RemoteProvider::~RemoteProvider() = default;

std::vector<double> RemoteProvider::embed(std::string_view content) const {
  // Split "scheme://host[:port]/path" for httplib.
  const auto scheme_end = config_.endpoint.find("://");
  const auto path_start =
      config_.endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string base = config_.endpoint.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);

  httplib::Headers headers;
  if (!config_.auth_token_env.empty()) {
    if (const char* token = std::getenv(config_.auth_token_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const std::string body = json{{"input", content}}.dump();

  {
    std::unique_lock lock(limiter_->mu);
    limiter_->cv.wait(lock, [&] { return limiter_->in_flight < limiter_->limit; });
    ++limiter_->in_flight;
  }
  struct Release {
    Limiter& l;
    ~Release() {
      {
        std::lock_guard lock(l.mu);
        --l.in_flight;
      }
      l.cv.notify_one();
    }
  } release{*limiter_};

  std::string last_error;
  auto delay = config_.backoff;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client client(base);
    client.set_connection_timeout(5);
    client.set_read_timeout(30);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "request to " + config_.endpoint + " failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "embedding service returned HTTP " + std::to_string(res->status);
      continue;
    }
    std::vector<double> v;
    try {
      v = json::parse(res->body).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
      last_error = std::string("malformed embedding response: ") + e.what();
      continue;
    }
    if (v.size() != config_.dim)
      throw ValidationError("embedding service returned width " + std::to_string(v.size()) +
                            ", expected " + std::to_string(config_.dim));
    return v;
  }
  throw TransportError(last_error, config_.retries);
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config) {
  switch (config.kind) {
    case ProviderKind::Deterministic:
      return std::make_unique<DeterministicProvider>(config.dim, config.seed);
    case ProviderKind::Store: {
      auto store = std::make_shared<const EmbeddingStore>(EmbeddingStore::load(config.store_path));
      if (store->dim() != config.dim)
        throw ValidationError("store " + config.store_path + " has dim " + std::to_string(store->dim()) +
                              ", config says " + std::to_string(config.dim));
      return std::make_unique<StoreProvider>(std::move(store));
    }
    case ProviderKind::Remote:
      return std::make_unique<RemoteProvider>(config);
  }
  throw ValidationError("unknown provider kind");
}

std::vector<double> embed(const EmbeddingProvider& provider, std::string_view content) {
  if (content.empty()) throw ParameterError("embed: content must be non-empty");
  auto v = provider.embed(content);
  if (v.size() != provider.dim()) throw ShapeError("embed: provider returned the wrong width");
  return v;
}

std::vector<double> embed(const ProviderConfig& config, std::string_view content) {
  return embed(*make_provider(config), content);
}

void validate_embedding_matrix(const EmbeddingMatrix& m) {
  if (m.rows.rows() == 0)
    throw ValidationError("embedding matrix for session " + std::to_string(m.session_id) + " has no rows");
  for (double x : m.rows.data())
    if (!std::isfinite(x))
      throw ValidationError("embedding matrix for session " + std::to_string(m.session_id) +
                            " has non-finite values");
}

NormalizationStats fit_normalizer(std::span<const EmbeddingMatrix> train_matrices, double floor) {
  if (train_matrices.empty()) throw ValidationError("fit_normalizer: no training matrices");
  const std::size_t dim = train_matrices.front().dim();
  std::size_t n = 0;
  for (const auto& m : train_matrices) {
    if (m.dim() != dim) throw ValidationError("fit_normalizer: matrices have different dims");
    n += m.rows.rows();
  }
  if (n < 2) throw ValidationError("fit_normalizer: need at least 2 rows");

  NormalizationStats stats{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0), floor};
  for (const auto& m : train_matrices)
    for (std::size_t r = 0; r < m.rows.rows(); ++r)
      for (std::size_t d = 0; d < dim; ++d) stats.mean[d] += m.rows(r, d);
  for (auto& x : stats.mean) x /= static_cast<double>(n);
  for (const auto& m : train_matrices)
    for (std::size_t r = 0; r < m.rows.rows(); ++r)
      for (std::size_t d = 0; d < dim; ++d) {
        const double c = m.rows(r, d) - stats.mean[d];
        stats.std[d] += c * c;
      }
  for (auto& x : stats.std) x = std::max(std::sqrt(x / static_cast<double>(n)), floor);
  return stats;
}

EmbeddingMatrix apply_normalizer(const NormalizationStats& stats, const EmbeddingMatrix& m) {
  if (m.dim() != stats.mean.size())
    throw ValidationError("apply_normalizer: matrix dim " + std::to_string(m.dim()) + " vs stats dim " +
                          std::to_string(stats.mean.size()));
  EmbeddingMatrix out = m;
  for (std::size_t r = 0; r < out.rows.rows(); ++r)
    for (std::size_t d = 0; d < out.dim(); ++d)
      out.rows(r, d) = (m.rows(r, d) - stats.mean[d]) / stats.std[d];
  return out;
}

EmbeddingMatrix invert_normalizer(const NormalizationStats& stats, const EmbeddingMatrix& m) {
  if (m.dim() != stats.mean.size()) throw ValidationError("invert_normalizer: dim mismatch");
  EmbeddingMatrix out = m;
  for (std::size_t r = 0; r < out.rows.rows(); ++r)
    for (std::size_t d = 0; d < out.dim(); ++d)
      out.rows(r, d) = m.rows(r, d) * stats.std[d] + stats.mean[d];
  return out;
}

std::string embedding_to_line(const EmbeddingMatrix& m) {
  return json{{"session_id", m.session_id},
              {"format_name", m.format_name},
              {"rows", detail::matrix_to_json(m.rows)}}
      .dump();
}

EmbeddingMatrix parse_embedding_line(std::string_view line, std::size_t line_number) {
  try {
    const json j = json::parse(line);
    EmbeddingMatrix m;
    m.session_id = j.at("session_id").get<std::int64_t>();
    m.format_name = j.at("format_name").get<std::string>();
    m.rows = detail::matrix_from_json(j.at("rows"), "rows");
    validate_embedding_matrix(m);
    return m;
  } catch (const json::exception& e) {
    throw ParseError(e.what(), line_number);
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line_number);
  }
}

void save_embeddings(const std::filesystem::path& path, std::span<const EmbeddingMatrix> matrices) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& m : matrices) out << embedding_to_line(m) << '\n';
}

std::vector<EmbeddingMatrix> load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<EmbeddingMatrix> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty()) out.push_back(parse_embedding_line(line, n));
  }
  return out;
}

}  // namespace mmf
