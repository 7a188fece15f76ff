#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mmfusion/error.hpp"
#include "mmfusion/metrics.hpp"
#include "mmfusion/random.hpp"
#include "mmfusion/svm.hpp"

using namespace mmf;

namespace {

const KernelSpec kLinear{KernelKind::Linear, {}};

struct Dataset {
  Matrix x;
  std::vector<int> y;
};

// Gaussian blobs centred on a circle of radius 4.
Dataset blobs(Rng& rng, std::size_t per_class, std::size_t classes, double spread) {
  Dataset d;
  d.x = Matrix(per_class * classes, 2);
  for (std::size_t c = 0; c < classes; ++c) {
    const double angle = 2.0 * M_PI * double(c) / double(classes);
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::size_t r = c * per_class + i;
      d.x(r, 0) = 4.0 * std::cos(angle) + spread * rng.normal();
      d.x(r, 1) = 4.0 * std::sin(angle) + spread * rng.normal();
      d.y.push_back(static_cast<int>(c));
    }
  }
  return d;
}

std::vector<int> to_pm(const std::vector<int>& y) {
  std::vector<int> out;
  for (int v : y) out.push_back(v ? 1 : -1);
  return out;
}

}  // namespace

TEST_CASE("two-point dual solved by hand") {
  const Matrix x = Matrix::from_rows({{-1.0}, {1.0}});
  const std::vector<int> y = {-1, 1};
  const auto fit = solve_svm_binary(x, y, kLinear, 10.0);
  CHECK(fit.alphas[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(fit.alphas[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::abs(fit.model.bias) < 1e-6);
  CHECK(fit.model.support_vectors.rows() == 2);
  const auto p = predict(fit.model, Matrix::from_rows({{0.0}, {-1.0}, {1.0}}));
  CHECK(p.values[0] == doctest::Approx(0.0));
  CHECK(p.labels[0] == 1);  // tie goes positive
  CHECK(p.values[1] == doctest::Approx(-1.0));
  CHECK(p.values[2] == doctest::Approx(1.0));
}

TEST_CASE("XOR with an RBF kernel") {
  const Matrix x = Matrix::from_rows({{0, 0}, {1, 1}, {0, 1}, {1, 0}});
  const std::vector<int> y = {-1, -1, 1, 1};
  const auto m = train_svm_binary(x, y, KernelSpec{KernelKind::RBF, 1.0}, 10.0);
  CHECK(predict(m, x).labels == y);
}

TEST_CASE("duplicating the data leaves the decision function unchanged") {
  Rng rng(2);
  auto d = blobs(rng, 15, 2, 1.5);
  const auto y = to_pm(d.y);
  Matrix x2 = d.x;
  std::vector<int> y2 = y;
  for (std::size_t r = 0; r < d.x.rows(); ++r) {
    x2.append_row(d.x.row(r));
    y2.push_back(y[r]);
  }
  for (auto kind : {KernelKind::Linear, KernelKind::RBF}) {
    const KernelSpec k{kind, 0.5};
    const auto a = train_svm_binary(d.x, y, k, 1.0, 1e-8);
    const auto b = train_svm_binary(x2, y2, k, 1.0, 1e-8);
    Matrix probe(0, 2);
    for (double u = -3; u <= 6; u += 0.75)
      for (double v = -3; v <= 6; v += 0.75) probe.append_row(std::vector<double>{u, v});
    const auto fa = decision_values(a, probe), fb = decision_values(b, probe);
    double worst = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) worst = std::max(worst, std::abs(fa[i] - fb[i]));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("KKT properties and objective trace") {
  Rng rng(3);
  auto d = blobs(rng, 20, 2, 2.0);
  const auto y = to_pm(d.y);
  const double C = 1.0, tol = 1e-3;
  const auto fit = solve_svm_binary(d.x, y, KernelSpec{KernelKind::RBF, {}}, C, tol);
  CHECK(fit.kkt_residual < tol);
  CHECK(kkt_residual(fit.model, fit.alphas, d.x, y) == doctest::Approx(fit.kkt_residual));
  for (std::size_t i = 1; i < fit.objective_trace.size(); ++i)
    CHECK(fit.objective_trace[i] >= fit.objective_trace[i - 1] - 1e-12);
  const auto f = decision_values(fit.model, d.x);
  for (std::size_t i = 0; i < y.size(); ++i)
    if (fit.alphas[i] > 1e-8 && fit.alphas[i] < C - 1e-8) CHECK(std::abs(std::abs(f[i]) - 1.0) < tol);
}

TEST_CASE("separable data is predicted perfectly") {
  Rng rng(4);
  auto d = blobs(rng, 20, 2, 0.3);
  const auto y = to_pm(d.y);
  CHECK(predict(train_svm_binary(d.x, y, kLinear, 10.0), d.x).labels == y);
}

TEST_CASE("solver errors") {
  const Matrix x = Matrix::from_rows({{0.0}, {1.0}});
  CHECK_THROWS_AS(solve_svm_binary(x, std::vector<int>{1, 1}, kLinear, 1.0), DegenerateDataError);
  CHECK_THROWS_AS(solve_svm_binary(Matrix::from_rows({{1.0}, {1.0}}), std::vector<int>{1, -1}, kLinear, 1.0),
                  DegenerateDataError);
  CHECK_THROWS_AS(solve_svm_binary(x, std::vector<int>{1, -1}, kLinear, 0.0), ParameterError);
  CHECK_THROWS_AS(solve_svm_binary(x, std::vector<int>{1, 0}, kLinear, 1.0), ValidationError);
  Rng rng(5);
  auto d = blobs(rng, 30, 2, 3.0);
  CHECK_THROWS_AS(solve_svm_binary(d.x, to_pm(d.y), KernelSpec{KernelKind::RBF, {}}, 100.0, 1e-9, 2),
                  ConvergenceError);
}

TEST_CASE("one-vs-rest multiclass") {
  Rng rng(6);
  auto d = blobs(rng, 20, 3, 0.8);
  const auto m = train_svm_multiclass(d.x, d.y, KernelSpec{KernelKind::RBF, {}}, 1.0);
  const auto p = predict(m, d.x);
  CHECK(balanced_accuracy_multiclass(p.labels, d.y) >= 0.95);
  CHECK(p.values.cols() == 3);

  auto b = blobs(rng, 15, 2, 1.5);
  const auto mc = train_svm_multiclass(b.x, b.y, kLinear, 1.0);
  const auto bin = train_svm_binary(b.x, to_pm(b.y), kLinear, 1.0);
  std::vector<int> expected;
  for (int l : predict(bin, b.x).labels) expected.push_back(l > 0 ? 1 : 0);
  CHECK(predict(mc, b.x).labels == expected);

  CHECK_THROWS_AS(train_svm_multiclass(b.x, std::vector<int>(b.y.size(), 1), kLinear, 1.0), DegenerateDataError);

  // A class absent from training never wins.
  const auto m4 = train_svm_multiclass(d.x, d.y, kLinear, 1.0, 1e-3, 4);
  CHECK_FALSE(m4.models[3].has_value());
  for (int l : predict(m4, d.x).labels) CHECK(l != 3);
}

TEST_CASE("hyperparameter search") {
  Rng rng(7);
  auto tr = blobs(rng, 20, 2, 2.5);
  auto dev = blobs(rng, 10, 2, 2.5);
  SearchSpace one;
  one.C = {3.0};
  one.trials = 1;
  auto r = tune(tr.x, tr.y, dev.x, dev.y, KernelKind::Linear, one, "balanced_accuracy");
  CHECK(r.C == 3.0);
  CHECK(r.trials.size() == 1);

  SearchSpace grid;
  grid.C = {0.01, 1.0, 100.0};
  grid.gamma = {0.01, 0.5, 20.0};
  grid.trials = 9;
  r = tune(tr.x, tr.y, dev.x, dev.y, KernelKind::RBF, grid, "balanced_accuracy");
  double best = -1.0;
  for (double C : grid.C)
    for (double g : grid.gamma) {
      const auto m = train_svm_multiclass(tr.x, tr.y, KernelSpec{KernelKind::RBF, g}, C);
      best = std::max(best, balanced_accuracy_multiclass(predict(m, dev.x).labels, dev.y));
    }
  CHECK(r.score == best);
  CHECK(r.trials.size() == 9);

  grid.trials = 4;
  grid.seed = 11;
  const auto s1 = tune(tr.x, tr.y, dev.x, dev.y, KernelKind::RBF, grid, "accuracy");
  const auto s2 = tune(tr.x, tr.y, dev.x, dev.y, KernelKind::RBF, grid, "accuracy");
  CHECK(s1.trials.size() == 4);
  CHECK(s1.C == s2.C);
  CHECK(s1.gamma == s2.gamma);
  for (const auto& t : s1.trials) CHECK(t.score <= s1.score);
  CHECK_THROWS(tune(tr.x, tr.y, dev.x, dev.y, KernelKind::RBF, grid, "auc"));
}

TEST_CASE("svm persistence") {
  Rng rng(8);
  auto d = blobs(rng, 10, 3, 1.0);
  const auto m = train_svm_multiclass(d.x, d.y, KernelSpec{KernelKind::RBF, {}}, 2.0);
  const auto stem = std::filesystem::temp_directory_path() / "mmfusion_svm";
  save_svm(m, stem);
  CHECK(load_svm(stem) == m);
}
