#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmfusion/matrix.hpp"

namespace mmf {

enum class ProviderKind { Deterministic, Store, Remote };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::Deterministic;
  std::size_t dim = 256;
  std::uint64_t seed = 0;                // Deterministic
  std::string store_path;                // Store
  std::string endpoint;                  // Remote, e.g. https://host/v1/embed
  std::string auth_token_env;            // Remote: environment variable holding a bearer token
  int retries = 1;                       // Remote
  std::chrono::milliseconds backoff{100};  // Remote: first retry delay, doubled per retry
  std::size_t max_in_flight = 4;         // Remote
};

// Unit vector of `dim` standard-normal draws. The stream is seeded with
// splitmix64(fnv1a64(content) ^ splitmix64(seed)) and driven by mmf::Rng.
std::vector<double> deterministic_embed(std::string_view content, std::size_t dim, std::uint64_t seed);

// Key/vector table with a fixed width. File layout: a header line
// {"dim": D, "provider": "..."} followed by one {"key": ..., "vector": [...]} per line.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dim, std::string provider = "unknown");

  // Re-inserting an identical vector is a no-op; a different one is a ValidationError.
  void insert(std::string key, std::vector<double> vector);
  const std::vector<double>* find(std::string_view key) const;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::string& provider() const noexcept { return provider_; }
  const std::map<std::string, std::vector<double>, std::less<>>& entries() const noexcept { return entries_; }

  void save(const std::filesystem::path& path) const;
  static EmbeddingStore load(const std::filesystem::path& path);

 private:
  std::size_t dim_;
  std::string provider_;
  std::map<std::string, std::vector<double>, std::less<>> entries_;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(std::string_view content) const = 0;
};

class DeterministicProvider final : public EmbeddingProvider {
 public:
  DeterministicProvider(std::size_t dim, std::uint64_t seed);
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(std::string_view content) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

class StoreProvider final : public EmbeddingProvider {
 public:
  explicit StoreProvider(std::shared_ptr<const EmbeddingStore> store);
  std::size_t dim() const override { return store_->dim(); }
  // Throws LookupError naming the key on a miss.
  std::vector<double> embed(std::string_view content) const override;

 private:
  std::shared_ptr<const EmbeddingStore> store_;
};

// POSTs {"input": content} and expects {"embedding": [...]}. No caching.
class RemoteProvider final : public EmbeddingProvider {
 public:
  explicit RemoteProvider(ProviderConfig config);
  ~RemoteProvider() override;
  std::size_t dim() const override { return config_.dim; }
  std::vector<double> embed(std::string_view content) const override;

 private:
  struct Limiter;
  ProviderConfig config_;
  std::unique_ptr<Limiter> limiter_;
};

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config);

// Checks the content is non-empty and the output width matches the provider.
std::vector<double> embed(const EmbeddingProvider& provider, std::string_view content);
std::vector<double> embed(const ProviderConfig& config, std::string_view content);

struct EmbeddingMatrix {
  std::int64_t session_id = 0;
  std::string format_name;
  Matrix rows;  // n_chunks x dim

  std::size_t dim() const noexcept { return rows.cols(); }
  bool operator==(const EmbeddingMatrix&) const = default;
};

void validate_embedding_matrix(const EmbeddingMatrix& m);

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> std;
  double floor = 1e-8;
};

// Per-dimension mean and population standard deviation over every row, std clamped to floor.
// Callers pass Train-split matrices only.
NormalizationStats fit_normalizer(std::span<const EmbeddingMatrix> train_matrices, double floor = 1e-8);
EmbeddingMatrix apply_normalizer(const NormalizationStats& stats, const EmbeddingMatrix& m);
EmbeddingMatrix invert_normalizer(const NormalizationStats& stats, const EmbeddingMatrix& m);

std::string embedding_to_line(const EmbeddingMatrix& m);
EmbeddingMatrix parse_embedding_line(std::string_view line, std::size_t line_number = 1);
void save_embeddings(const std::filesystem::path& path, std::span<const EmbeddingMatrix> matrices);
std::vector<EmbeddingMatrix> load_embeddings(const std::filesystem::path& path);

}  // namespace mmf
