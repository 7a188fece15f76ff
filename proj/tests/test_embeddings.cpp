#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "mmfusion/embeddings.hpp"
#include "mmfusion/error.hpp"
#include "mmfusion/random.hpp"

using namespace mmf;
namespace fs = std::filesystem;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

EmbeddingMatrix make(std::int64_t id, Matrix rows) {
  EmbeddingMatrix m;
  m.session_id = id;
  m.format_name = "utterances_10_overlap_4";
  m.rows = std::move(rows);
  return m;
}

}  // namespace

TEST_CASE("deterministic embeddings") {
  DeterministicProvider p(8, 7);
  CHECK(p.embed("hello") == p.embed("hello"));
  CHECK(std::abs(dot(p.embed("hello"), p.embed("hello")) - 1.0) < 1e-9);
  CHECK_FALSE(deterministic_embed("hello", 8, 7) == deterministic_embed("hello", 8, 8));
  CHECK_THROWS_AS(embed(p, ""), ParameterError);
}

TEST_CASE("distinct contents are nearly orthogonal at dim 256") {
  Rng rng(1);
  auto random_string = [&] {
    std::string s;
    for (int i = 0; i < 40; ++i) s.push_back(static_cast<char>('a' + rng.below(26)));
    return s;
  };
  double worst = 0.0, sum_sq = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double c = dot(deterministic_embed(random_string(), 256, 0), deterministic_embed(random_string(), 256, 0));
    worst = std::max(worst, std::abs(c));
    sum_sq += c * c;
  }
  CHECK(worst < 0.9);
  // Cosine of independent directions has variance 1/dim.
  CHECK(sum_sq / 1000.0 == doctest::Approx(1.0 / 256).epsilon(0.25));
}

TEST_CASE("store lookup, conflicts and persistence") {
  auto store = std::make_shared<EmbeddingStore>(2, "test");
  store->insert("hello", {1, 0});
  CHECK_NOTHROW(store->insert("hello", {1, 0}));
  CHECK_THROWS_AS(store->insert("hello", {0, 1}), ValidationError);
  CHECK_THROWS_AS(store->insert("bad", {1, 2, 3}), ValidationError);
  StoreProvider p(store);
  CHECK(p.embed("hello") == std::vector<double>{1, 0});
  try {
    p.embed("missing");
    FAIL("expected LookupError");
  } catch (const LookupError& e) {
    CHECK(std::string(e.what()).find("missing") != std::string::npos);
  }
  const auto path = fs::temp_directory_path() / "mmfusion_store.jsonl";
  store->save(path);
  const auto back = EmbeddingStore::load(path);
  CHECK(back.dim() == 2);
  CHECK(back.entries() == store->entries());
}

TEST_CASE("remote provider reports transport failures") {
  ProviderConfig c;
  c.kind = ProviderKind::Remote;
  c.endpoint = "http://127.0.0.1:1/embed";
  c.dim = 4;
  c.retries = 1;
  c.backoff = std::chrono::milliseconds(1);
  CHECK_THROWS_AS(embed(c, "hello"), TransportError);
}

TEST_CASE("normalizer fit") {
  std::vector<EmbeddingMatrix> train = {make(1, Matrix::from_rows({{0, 2}, {2, 4}}))};
  auto stats = fit_normalizer(train);
  CHECK(stats.mean == std::vector<double>{1, 3});
  CHECK(stats.std == std::vector<double>{1, 1});
  CHECK(apply_normalizer(stats, train[0]).rows == Matrix::from_rows({{-1, -1}, {1, 1}}));

  train = {make(1, Matrix::from_rows({{5, 1}, {5, 3}}))};
  stats = fit_normalizer(train);
  CHECK(stats.std[0] == 1e-8);

  train = {make(1, Matrix::from_rows({{2, 3}, {2, 3}}))};
  stats = fit_normalizer(train);
  CHECK(stats.mean == std::vector<double>{2, 3});
  CHECK(stats.std == std::vector<double>{1e-8, 1e-8});

  CHECK_THROWS_AS(fit_normalizer({}), ValidationError);
}

TEST_CASE("normalizer apply and invert") {
  NormalizationStats identity{{0, 0}, {1, 1}, 1e-8};
  const auto m = make(4, Matrix::from_rows({{0.5, -2}, {3, 7}}));
  CHECK(apply_normalizer(identity, m) == m);

  Rng rng(2);
  Matrix x(20, 3);
  for (auto& v : x.data()) v = 4.0 + 3.0 * rng.normal();
  const auto train = make(5, x);
  const auto stats = fit_normalizer(std::span(&train, 1));
  const auto z = apply_normalizer(stats, train);
  const auto back = invert_normalizer(stats, z);
  for (std::size_t i = 0; i < x.data().size(); ++i) CHECK(back.rows.data()[i] == doctest::Approx(x.data()[i]));
  CHECK_THROWS_AS(apply_normalizer(stats, make(1, Matrix(1, 2))), ValidationError);
}

TEST_CASE("embedding matrix serialization") {
  const auto m = make(12, Matrix::from_rows({{0.1, 1.0 / 3.0}, {-2, 1e-300}}));
  CHECK(parse_embedding_line(embedding_to_line(m)) == m);
  const auto path = fs::temp_directory_path() / "mmfusion_emb.jsonl";
  std::vector<EmbeddingMatrix> all = {m, make(13, Matrix::from_rows({{1, 2}}))};
  save_embeddings(path, all);
  CHECK(load_embeddings(path) == all);
  CHECK_THROWS_AS(parse_embedding_line("{\"session_id\": 1}", 3), ParseError);
  CHECK_THROWS_AS(validate_embedding_matrix(make(1, Matrix(0, 2))), ValidationError);
}
