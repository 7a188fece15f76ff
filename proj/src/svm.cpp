#include "mmfusion/svm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "json_util.hpp"
#include "mmfusion/error.hpp"
#include "mmfusion/metrics.hpp"
#include "mmfusion/random.hpp"

namespace mmf {

std::string_view to_string(KernelKind k) { return k == KernelKind::Linear ? "linear" : "rbf"; }

KernelKind parse_kernel_kind(std::string_view s) {
  if (s == "linear") return KernelKind::Linear;
  if (s == "rbf") return KernelKind::RBF;
  throw ValidationError("unknown kernel '" + std::string(s) + "' (expected linear or rbf)");
}

double kernel_value(const KernelSpec& k, std::span<const double> a, std::span<const double> b) {
  if (k.kind == KernelKind::Linear) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-k.gamma.value() * d2);
}

namespace {

void check_features(const Matrix& x, const char* what) {
  for (double v : x.data())
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + ": non-finite feature value");
}

KernelSpec resolve_kernel(const KernelSpec& k, const Matrix& x) {
  KernelSpec r = k;
  if (k.kind == KernelKind::Linear) {
    r.gamma.reset();
    return r;
  }
  if (k.gamma) {
    if (!(*k.gamma > 0.0) || !std::isfinite(*k.gamma)) throw ParameterError("RBF gamma must be > 0");
    return r;
  }
  const auto& v = x.data();
  double mean = 0.0;
  for (double d : v) mean += d;
  mean /= double(v.size());
  double var = 0.0;
  for (double d : v) var += (d - mean) * (d - mean);
  var /= double(v.size());
  if (!(var > 0.0)) throw DegenerateDataError("svm: all feature values are identical");
  r.gamma = 1.0 / (double(x.cols()) * var);
  return r;
}

bool rows_identical(const Matrix& x) {
  for (std::size_t r = 1; r < x.rows(); ++r)
    if (!std::equal(x.row(r).begin(), x.row(r).end(), x.row(0).begin())) return false;
  return true;
}

}  // namespace

SvmFit solve_svm_binary(const Matrix& x, std::span<const int> y, const KernelSpec& kernel, double C, double tol,
                        std::size_t max_iterations) {
  const std::size_t n = x.rows();
  if (y.size() != n) throw ValidationError("svm: label count does not match row count");
  if (n == 0 || x.cols() == 0) throw ValidationError("svm: empty training data");
  if (!(C > 0.0) || !std::isfinite(C)) throw ParameterError("svm: C must be > 0");
  if (!(tol > 0.0)) throw ParameterError("svm: tol must be > 0");
  check_features(x, "svm");
  std::size_t pos = 0;
  for (int v : y) {
    if (v != 1 && v != -1) throw ValidationError("svm: binary labels must be -1 or +1");
    pos += v == 1;
  }
  if (pos == 0 || pos == n) throw DegenerateDataError("svm: training labels contain a single class");
  if (rows_identical(x)) throw DegenerateDataError("svm: all training rows are identical");

  const KernelSpec k = resolve_kernel(kernel, x);
  std::vector<double> Q(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = double(y[i] * y[j]) * kernel_value(k, x.row(i), x.row(j));
      Q[i * n + j] = v;
      Q[j * n + i] = v;
    }

  std::vector<double> alpha(n, 0.0), G(n, -1.0);
  SvmFit fit;
  auto in_up = [&](std::size_t t) { return y[t] == 1 ? alpha[t] < C : alpha[t] > 0.0; };
  auto in_low = [&](std::size_t t) { return y[t] == 1 ? alpha[t] > 0.0 : alpha[t] < C; };
  auto objective = [&] {
    double f = 0.0;
    for (std::size_t t = 0; t < n; ++t) f += alpha[t] * (G[t] - 1.0);
    return -0.5 * f;
  };
  constexpr double tau = 1e-12;

  double gap = std::numeric_limits<double>::infinity();
  for (;;) {
    double m = -std::numeric_limits<double>::infinity(), M = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -double(y[t]) * G[t];
      if (in_up(t) && v > m) {
        m = v;
        i = t;
      }
      if (in_low(t) && v < M) {
        M = v;
        j = t;
      }
    }
    gap = m - M;
    if (i == n || j == n || gap < tol) break;
    if (fit.iterations >= max_iterations)
      throw ConvergenceError("svm: SMO hit the iteration cap of " + std::to_string(max_iterations), gap);
    ++fit.iterations;

    const double old_i = alpha[i], old_j = alpha[j];
    const double* Qi = &Q[i * n];
    const double* Qj = &Q[j * n];
    if (y[i] != y[j]) {
      double quad = Qi[i] + Qj[j] + 2.0 * Qi[j];
      if (quad <= 0.0) quad = tau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = Qi[i] + Qj[j] - 2.0 * Qi[j];
      if (quad <= 0.0) quad = tau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) G[t] += Qi[t] * di + Qj[t] * dj;
    fit.objective_trace.push_back(objective());
  }

  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yG = double(y[t]) * G[t];
    if (alpha[t] >= C) {
      if (y[t] == -1) ub = std::min(ub, yG);
      else lb = std::max(lb, yG);
    } else if (alpha[t] <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yG);
      else lb = std::max(lb, yG);
    } else {
      ++n_free;
      sum_free += yG;
    }
  }
  const double rho = n_free > 0 ? sum_free / double(n_free) : 0.5 * (ub + lb);

  SvmModel& model = fit.model;
  model.kernel = k;
  model.C = C;
  model.bias = -rho;
  model.support_vectors = Matrix(0, x.cols());
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] <= 0.0) continue;
    model.support_vectors.append_row(x.row(t));
    model.alphas_signed.push_back(alpha[t] * double(y[t]));
  }
  fit.alphas = std::move(alpha);
  fit.kkt_residual = kkt_residual(model, fit.alphas, x, y);
  return fit;
}

SvmModel train_svm_binary(const Matrix& x, std::span<const int> y, const KernelSpec& kernel, double C, double tol) {
  return solve_svm_binary(x, y, kernel, C, tol).model;
}

std::vector<double> decision_values(const SvmModel& model, const Matrix& x) {
  if (x.cols() != model.support_vectors.cols())
    throw ValidationError("svm: feature width " + std::to_string(x.cols()) + " does not match model width " +
                          std::to_string(model.support_vectors.cols()));
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < model.alphas_signed.size(); ++i)
      s += model.alphas_signed[i] * kernel_value(model.kernel, model.support_vectors.row(i), x.row(r));
    out[r] = s + model.bias;
  }
  return out;
}

SvmPrediction predict(const SvmModel& model, const Matrix& x) {
  SvmPrediction p;
  p.values = decision_values(model, x);
  p.labels.reserve(p.values.size());
  for (double v : p.values) p.labels.push_back(v >= 0.0 ? 1 : -1);
  return p;
}

double kkt_residual(const SvmModel& model, std::span<const double> alphas, const Matrix& x, std::span<const int> y) {
  const auto f = decision_values(model, x);
  double worst = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double m = double(y[i]) * f[i];
    double v;
    if (alphas[i] <= 0.0) v = std::max(0.0, 1.0 - m);
    else if (alphas[i] >= model.C) v = std::max(0.0, m - 1.0);
    else v = std::abs(m - 1.0);
    worst = std::max(worst, v);
  }
  return worst;
}

MulticlassSvm train_svm_multiclass(const Matrix& x, std::span<const int> y, const KernelSpec& kernel, double C,
                                   double tol, std::size_t k) {
  if (y.size() != x.rows()) throw ValidationError("svm: label count does not match row count");
  if (y.empty()) throw ValidationError("svm: empty training data");
  int hi = 0;
  for (int v : y) {
    if (v < 0) throw ValidationError("svm: class labels must be >= 0");
    hi = std::max(hi, v);
  }
  if (k == 0) k = std::size_t(hi) + 1;
  if (std::size_t(hi) >= k) throw ValidationError("svm: label " + std::to_string(hi) + " outside class range");
  if (k < 2) throw DegenerateDataError("svm: need at least two classes");
  std::vector<std::size_t> support(k, 0);
  for (int v : y) ++support[v];
  const auto present = std::count_if(support.begin(), support.end(), [](std::size_t s) { return s > 0; });
  if (present < 2) throw DegenerateDataError("svm: training labels contain a single class");
  check_features(x, "svm");
  const KernelSpec resolved = resolve_kernel(kernel, x);

  MulticlassSvm out;
  out.classes = k;
  std::vector<int> yb(y.size());
  if (k == 2) {
    for (std::size_t i = 0; i < y.size(); ++i) yb[i] = y[i] == 1 ? 1 : -1;
    out.models.emplace_back(train_svm_binary(x, yb, resolved, C, tol));
    return out;
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (support[c] == 0) {
      out.models.emplace_back(std::nullopt);
      continue;
    }
    for (std::size_t i = 0; i < y.size(); ++i) yb[i] = std::size_t(y[i]) == c ? 1 : -1;
    out.models.emplace_back(train_svm_binary(x, yb, resolved, C, tol));
  }
  return out;
}

MulticlassPrediction predict(const MulticlassSvm& model, const Matrix& x) {
  MulticlassPrediction p;
  if (model.classes == 2 && model.models.size() == 1) {
    const auto bp = predict(*model.models[0], x);
    p.values = Matrix(x.rows(), 1);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      p.values(r, 0) = bp.values[r];
      p.labels.push_back(bp.labels[r] == 1 ? 1 : 0);
    }
    return p;
  }
  p.values = Matrix(x.rows(), model.classes, -std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < model.models.size(); ++c) {
    if (!model.models[c]) continue;
    const auto v = decision_values(*model.models[c], x);
    for (std::size_t r = 0; r < x.rows(); ++r) p.values(r, c) = v[r];
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = p.values.row(r);
    p.labels.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return p;
}

TuneResult tune(const Matrix& x_train, std::span<const int> y_train, const Matrix& x_dev, std::span<const int> y_dev,
                KernelKind kernel, const SearchSpace& space, std::string_view objective, std::size_t k, double tol) {
  if (space.C.empty()) throw ParameterError("tune: empty C candidate set");
  if (objective != "balanced_accuracy" && objective != "accuracy" && objective != "macro_f1")
    throw ParameterError("tune: unknown objective '" + std::string(objective) + "'");
  if (k == 0) {
    int hi = 0;
    for (int v : y_train) hi = std::max(hi, v);
    for (int v : y_dev) hi = std::max(hi, v);
    k = std::size_t(hi) + 1;
  }

  std::vector<std::pair<double, std::optional<double>>> grid;
  for (double c : space.C) {
    if (kernel == KernelKind::RBF && !space.gamma.empty()) {
      for (double g : space.gamma) grid.emplace_back(c, g);
    } else {
      grid.emplace_back(c, std::nullopt);
    }
  }
  std::vector<std::size_t> picks(grid.size());
  std::iota(picks.begin(), picks.end(), 0);
  if (space.trials < grid.size()) {
    Rng rng(space.seed);
    rng.shuffle(picks);
    picks.resize(std::max<std::size_t>(space.trials, 1));
    std::sort(picks.begin(), picks.end());
  }

  TuneResult result;
  result.score = -std::numeric_limits<double>::infinity();
  bool have = false;
  for (std::size_t idx : picks) {
    TuneTrial trial{grid[idx].first, grid[idx].second, -std::numeric_limits<double>::infinity()};
    try {
      const auto model = train_svm_multiclass(x_train, y_train, KernelSpec{kernel, trial.gamma}, trial.C, tol, k);
      const auto pred = predict(model, x_dev);
      if (objective == "accuracy") trial.score = accuracy(pred.labels, y_dev);
      else if (objective == "macro_f1") trial.score = classification_report(pred.labels, y_dev, k).macro_f1;
      else trial.score = k == 2 ? balanced_accuracy_binary(pred.labels, y_dev)
                                : balanced_accuracy_multiclass(pred.labels, y_dev, k);
    } catch (const Error&) {
      trial.score = -std::numeric_limits<double>::infinity();
    }
    if (!have || trial.score > result.score) {
      have = true;
      result.C = trial.C;
      result.gamma = trial.gamma;
      result.score = trial.score;
    }
    result.trials.push_back(trial);
  }
  return result;
}

namespace {

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

}  // namespace

void save_svm(const MulticlassSvm& model, const std::filesystem::path& stem) {
  using detail::json;
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream bin(with_ext(stem, ".bin"), std::ios::binary);
  if (!bin) throw DataError("cannot write " + with_ext(stem, ".bin").string());
  json models = json::array();
  std::size_t offset = 0;
  for (const auto& m : model.models) {
    if (!m) {
      models.push_back(nullptr);
      continue;
    }
    json j{{"kernel", to_string(m->kernel.kind)},
           {"C", m->C},
           {"bias", m->bias},
           {"alphas_signed", m->alphas_signed},
           {"n_sv", m->support_vectors.rows()},
           {"dim", m->support_vectors.cols()},
           {"offset", offset}};
    if (m->kernel.gamma) j["gamma"] = *m->kernel.gamma;
    for (double v : m->support_vectors.data()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      char buf[8];
      for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
      bin.write(buf, 8);
    }
    offset += m->support_vectors.data().size();
    models.push_back(std::move(j));
  }
  std::ofstream js(with_ext(stem, ".json"));
  if (!js) throw DataError("cannot write " + with_ext(stem, ".json").string());
  js << json{{"classes", model.classes}, {"models", models}}.dump(2) << "\n";
}

MulticlassSvm load_svm(const std::filesystem::path& stem) {
  using detail::json;
  using detail::require;
  std::ifstream js(with_ext(stem, ".json"));
  if (!js) throw DataError("cannot read " + with_ext(stem, ".json").string());
  json j;
  try {
    j = json::parse(js);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("svm manifest: ") + e.what());
  }
  std::ifstream bin(with_ext(stem, ".bin"), std::ios::binary);
  if (!bin) throw DataError("cannot read " + with_ext(stem, ".bin").string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  MulticlassSvm out;
  out.classes = require<std::size_t>(j, "classes");
  for (const auto& e : j.at("models")) {
    if (e.is_null()) {
      out.models.emplace_back(std::nullopt);
      continue;
    }
    SvmModel m;
    m.kernel.kind = parse_kernel_kind(require<std::string>(e, "kernel"));
    if (e.contains("gamma")) m.kernel.gamma = require<double>(e, "gamma");
    m.C = require<double>(e, "C");
    m.bias = require<double>(e, "bias");
    m.alphas_signed = require<std::vector<double>>(e, "alphas_signed");
    const auto n_sv = require<std::size_t>(e, "n_sv");
    const auto dim = require<std::size_t>(e, "dim");
    const auto offset = require<std::size_t>(e, "offset");
    if (m.alphas_signed.size() != n_sv) throw ValidationError("svm manifest: alpha count does not match n_sv");
    if ((offset + n_sv * dim) * 8 > blob.size()) throw ValidationError("svm manifest: support vectors exceed blob");
    m.support_vectors = Matrix(n_sv, dim);
    for (std::size_t i = 0; i < n_sv * dim; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= std::uint64_t(blob[8 * (offset + i) + b]) << (8 * b);
      m.support_vectors.data()[i] = std::bit_cast<double>(bits);
    }
    out.models.emplace_back(std::move(m));
  }
  return out;
}

}  // namespace mmf
