#pragma once

// Regression models from environment features to one component of the
// performance vector: ordinary least squares, elastic net (coordinate
// descent) and Gaussian-process regression, with k-fold cross-validation.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "mapbench/dataset.hpp"
#include "mapbench/error.hpp"
#include "mapbench/trajectory.hpp"

namespace mapbench {

using FeatureMap = std::map<std::string, double>;

namespace detail {

inline Eigen::MatrixXd design(const Dataset& d, const std::vector<std::string>& features) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(features.size()));
  for (std::size_t j = 0; j < features.size(); ++j) {
    const std::size_t col = d.feature_index(features[j]);
    for (std::size_t i = 0; i < d.size(); ++i) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d.rows[i].features[col];
  }
  return x;
}

inline Eigen::VectorXd response(const Dataset& d, Target t) {
  const auto y = d.target(t);
  return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
}

inline std::vector<double> lookup(const FeatureMap& f, const std::vector<std::string>& names) {
  std::vector<double> out;
  out.reserve(names.size());
  for (const auto& n : names) {
    const auto it = f.find(n);
    if (it == f.end()) throw ValidationError("missing feature '" + n + "'");
    out.push_back(it->second);
  }
  return out;
}

/// Column means and population standard deviations (zero spread -> scale 1).
inline void standardization(const Eigen::MatrixXd& x, std::vector<double>& mean, std::vector<double>& scale) {
  const double n = static_cast<double>(x.rows());
  mean.assign(static_cast<std::size_t>(x.cols()), 0.0);
  scale.assign(static_cast<std::size_t>(x.cols()), 1.0);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double m = x.col(j).sum() / n;
    const double var = (x.col(j).array() - m).square().sum() / n;
    mean[static_cast<std::size_t>(j)] = m;
    scale[static_cast<std::size_t>(j)] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ordinary least squares

struct LinearModel {
  std::vector<std::string> features;
  std::vector<double> coefficients;
  double intercept = 0.0;
  Target target = Target::MeanEpsT;

  double evaluate(const std::vector<double>& x) const {
    double v = intercept;
    for (std::size_t j = 0; j < coefficients.size(); ++j) v += coefficients[j] * x[j];
    return v;
  }
  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

/// Least squares with an intercept, on raw feature units.
inline LinearModel fit_ols(const Dataset& data, Target target, const std::vector<std::string>& features) {
  const auto p = static_cast<Eigen::Index>(features.size());
  if (data.size() < features.size() + 1) {
    throw SingularDesignError("need at least " + std::to_string(features.size() + 1) + " rows for " +
                              std::to_string(features.size()) + " feature(s), got " + std::to_string(data.size()));
  }
  Eigen::MatrixXd x = detail::design(data, features);
  const Eigen::VectorXd y = detail::response(data, target);
  const Eigen::RowVectorXd xm = x.colwise().mean();
  const double ym = y.mean();
  x.rowwise() -= xm;

  LinearModel m;
  m.features = features;
  m.target = target;
  if (p > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-12);
    if (qr.rank() < p) throw SingularDesignError("singular design: features are constant or collinear");
    const Eigen::VectorXd beta = qr.solve((y.array() - ym).matrix());
    m.coefficients.assign(beta.data(), beta.data() + p);
    m.intercept = ym - xm.dot(beta);
  } else {
    m.intercept = ym;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Univariate F-test feature ranking

/// F statistic of a one-feature linear regression: r^2 / (1 - r^2) * (n - 2).
inline double f_score(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  const double r2 = (sxy * sxy) / (sxx * syy);
  if (r2 >= 1.0) return std::numeric_limits<double>::infinity();
  return r2 / (1.0 - r2) * (n - 2.0);
}

/// The K highest-scoring features; ties are broken by name.
inline std::vector<std::string> f_select(const Dataset& data, Target target, std::size_t k) {
  if (k < 1 || k > data.feature_names.size()) throw ValidationError("K must lie in [1, feature count]");
  const auto y = data.target(target);
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& name : data.feature_names) scored.push_back({f_score(data.column(name), y), name});
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(scored[i].second);
  return out;
}

// ---------------------------------------------------------------------------
// Elastic net

struct ElasticNetModel {
  std::vector<std::string> features;
  std::vector<double> coefficients;  // original units
  double intercept = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  std::vector<double> feature_means;
  std::vector<double> feature_scales;
  std::size_t iterations = 0;
  Target target = Target::MeanEpsT;

  double evaluate(const std::vector<double>& x) const {
    double v = intercept;
    for (std::size_t j = 0; j < coefficients.size(); ++j) v += coefficients[j] * x[j];
    return v;
  }
  /// Coefficients on the standardized scale the penalty acts on.
  std::vector<double> standardized_coefficients() const {
    std::vector<double> b(coefficients.size());
    for (std::size_t j = 0; j < b.size(); ++j) b[j] = coefficients[j] * feature_scales[j];
    return b;
  }
  friend bool operator==(const ElasticNetModel&, const ElasticNetModel&) = default;
};

struct ElasticNetOptions {
  double l1 = 0.0;
  double l2 = 0.0;
  double tolerance = 1e-12;
  std::size_t max_iterations = 200000;
};

/// (1/2n)||y - ybar - Z b||^2 + l1 |b|_1 + (l2/2) |b|^2 on standardized Z.
inline double elastic_net_objective(const Dataset& data, Target target, const std::vector<std::string>& features,
                                    const std::vector<double>& std_coefficients, double l1, double l2) {
  Eigen::MatrixXd x = detail::design(data, features);
  const Eigen::VectorXd y = detail::response(data, target);
  std::vector<double> mean, scale;
  detail::standardization(x, mean, scale);
  const double n = static_cast<double>(x.rows());
  double loss = 0.0;
  const double ym = y.mean();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < features.size(); ++j)
      pred += (x(i, static_cast<Eigen::Index>(j)) - mean[j]) / scale[j] * std_coefficients[j];
    loss += (y(i) - ym - pred) * (y(i) - ym - pred);
  }
  double pen1 = 0.0, pen2 = 0.0;
  for (const double b : std_coefficients) {
    pen1 += std::abs(b);
    pen2 += b * b;
  }
  return loss / (2.0 * n) + l1 * pen1 + 0.5 * l2 * pen2;
}

/// Cyclic coordinate descent on standardized features; stops once the largest
/// coefficient update falls below the tolerance.
inline ElasticNetModel fit_elastic_net(const Dataset& data, Target target, const std::vector<std::string>& features,
                                       const ElasticNetOptions& opt = {}) {
  if (opt.l1 < 0.0 || opt.l2 < 0.0) throw ValidationError("elastic net penalties must be >= 0");
  if (data.size() == 0) throw ValidationError("cannot fit on an empty dataset");
  const Eigen::MatrixXd x = detail::design(data, features);
  const Eigen::VectorXd y = detail::response(data, target);
  ElasticNetModel m;
  m.features = features;
  m.target = target;
  m.l1 = opt.l1;
  m.l2 = opt.l2;
  detail::standardization(x, m.feature_means, m.feature_scales);

  const Eigen::Index n = x.rows(), p = x.cols();
  Eigen::MatrixXd z(n, p);
  std::vector<bool> constant(static_cast<std::size_t>(p), false);
  for (Eigen::Index j = 0; j < p; ++j) {
    z.col(j) = (x.col(j).array() - m.feature_means[static_cast<std::size_t>(j)]) / m.feature_scales[static_cast<std::size_t>(j)];
    constant[static_cast<std::size_t>(j)] = z.col(j).squaredNorm() == 0.0;
  }
  const double ym = y.mean();
  Eigen::VectorXd r = (y.array() - ym).matrix();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  const double nd = static_cast<double>(n);
  auto soft = [](double v, double t) { return v > t ? v - t : (v < -t ? v + t : 0.0); };

  std::size_t it = 0;
  for (; it < opt.max_iterations; ++it) {
    double max_step = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (constant[static_cast<std::size_t>(j)]) continue;
      const double zz = z.col(j).squaredNorm() / nd;
      const double rho = z.col(j).dot(r) / nd + zz * b(j);
      const double nb = soft(rho, opt.l1) / (zz + opt.l2);
      const double step = nb - b(j);
      if (step != 0.0) {
        r -= step * z.col(j);
        b(j) = nb;
      }
      max_step = std::max(max_step, std::abs(step));
    }
    if (max_step < opt.tolerance) break;
  }
  if (it == opt.max_iterations) throw ConvergenceError("elastic net did not converge", it);
  m.iterations = it + 1;

  m.coefficients.resize(static_cast<std::size_t>(p));
  m.intercept = ym;
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    m.coefficients[ju] = b(j) / m.feature_scales[ju];
    m.intercept -= m.coefficients[ju] * m.feature_means[ju];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Gaussian process

struct GPParams {
  std::optional<double> length_scale;     // standardized feature units; default 1 (= one feature std)
  std::optional<double> signal_variance;  // default: target variance
  std::optional<double> noise_variance;   // default: 0.1 * target variance
  /// Pick length scale and noise from a small grid by log marginal likelihood.
  bool optimize = false;
};

struct GPModel {
  std::vector<std::string> features;
  Target target = Target::MeanEpsT;
  double length_scale = 1.0;
  double signal_variance = 1.0;
  double noise_variance = 0.1;
  std::vector<double> feature_means;
  std::vector<double> feature_scales;
  double y_mean = 0.0;
  Eigen::MatrixXd train_x;  // raw units, one row per training point
  Eigen::VectorXd train_y;  // raw units
  Eigen::MatrixXd train_z;  // standardized
  Eigen::VectorXd alpha;    // (K + noise I)^-1 (y - y_mean)
  double log_marginal_likelihood = 0.0;

  double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return signal_variance * std::exp(-(a - b).squaredNorm() / (2.0 * length_scale * length_scale));
  }

  double evaluate(const std::vector<double>& x) const {
    Eigen::VectorXd q(static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) q(static_cast<Eigen::Index>(j)) = (x[j] - feature_means[j]) / feature_scales[j];
    double v = y_mean;
    for (Eigen::Index i = 0; i < train_z.rows(); ++i) v += kernel(train_z.row(i).transpose(), q) * alpha(i);
    return v;
  }
};

/// Posterior mean fit with fixed hyperparameters.
inline GPModel fit_gp_fixed(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::string>& features,
                            Target target, double length_scale, double signal_variance, double noise_variance) {
  if (x.rows() == 0) throw ValidationError("cannot fit a Gaussian process on an empty dataset");
  if (!(length_scale > 0.0) || !(signal_variance > 0.0) || noise_variance < 0.0) {
    throw ValidationError("GP hyperparameters must be positive (noise >= 0)");
  }
  GPModel m;
  m.features = features;
  m.target = target;
  m.length_scale = length_scale;
  m.signal_variance = signal_variance;
  m.noise_variance = noise_variance;
  m.train_x = x;
  m.train_y = y;
  detail::standardization(x, m.feature_means, m.feature_scales);
  m.train_z = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    m.train_z.col(j) = (x.col(j).array() - m.feature_means[static_cast<std::size_t>(j)]) / m.feature_scales[static_cast<std::size_t>(j)];
  m.y_mean = y.mean();
  const Eigen::VectorXd yc = (y.array() - m.y_mean).matrix();

  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = m.kernel(m.train_z.row(i).transpose(), m.train_z.row(j).transpose());
  k.diagonal().array() += noise_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    throw Error("GP kernel matrix is not positive definite (Cholesky failed); use a larger noise variance");
  }
  m.alpha = llt.solve(yc);
  const Eigen::MatrixXd l = llt.matrixL();
  m.log_marginal_likelihood = -0.5 * yc.dot(m.alpha) - l.diagonal().array().log().sum() -
                              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  return m;
}

inline GPModel fit_gp(const Dataset& data, Target target, const std::vector<std::string>& features, const GPParams& params = {}) {
  const Eigen::MatrixXd x = detail::design(data, features);
  const Eigen::VectorXd y = detail::response(data, target);
  if (x.rows() == 0) throw ValidationError("cannot fit a Gaussian process on an empty dataset");
  double var = (y.array() - y.mean()).square().mean();
  if (!(var > 0.0)) var = 1.0;
  const double sf2 = params.signal_variance.value_or(var);
  if (!params.optimize) {
    return fit_gp_fixed(x, y, features, target, params.length_scale.value_or(1.0), sf2,
                        params.noise_variance.value_or(0.1 * var));
  }
  std::optional<GPModel> best;
  for (const double ls : {0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0}) {
    for (const double nf : {1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.5}) {
      const double l = params.length_scale.value_or(ls);
      const double nv = params.noise_variance.value_or(nf * var);
      try {
        GPModel m = fit_gp_fixed(x, y, features, target, l, sf2, nv);
        if (!best || m.log_marginal_likelihood > best->log_marginal_likelihood) best = std::move(m);
      } catch (const Error&) {
      }
    }
  }
  if (!best) throw Error("GP hyperparameter search failed for every grid point");
  return *best;
}

// ---------------------------------------------------------------------------
// Generic model interface

using Model = std::variant<LinearModel, ElasticNetModel, GPModel>;

inline const char* model_type(const Model& m) {
  return std::visit(
      [](const auto& v) -> const char* {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, LinearModel>) return "ols";
        else if constexpr (std::is_same_v<T, ElasticNetModel>) return "enet";
        else return "gp";
      },
      m);
}

inline Target model_target(const Model& m) {
  return std::visit([](const auto& v) { return v.target; }, m);
}

inline const std::vector<std::string>& model_features(const Model& m) {
  return std::visit([](const auto& v) -> const std::vector<std::string>& { return v.features; }, m);
}

struct Prediction {
  double value = 0.0;
  Target target = Target::MeanEpsT;
};

inline Prediction predict(const Model& m, const FeatureMap& features) {
  const auto x = detail::lookup(features, model_features(m));
  return {std::visit([&](const auto& v) { return v.evaluate(x); }, m), model_target(m)};
}

/// Bundles one model per target into a full performance prediction.
inline std::array<double, 4> predict_performance(const std::vector<Model>& models, const FeatureMap& features) {
  std::array<double, 4> out{};
  std::array<bool, 4> have{};
  for (const auto& m : models) {
    const Prediction p = predict(m, features);
    out[static_cast<std::size_t>(p.target)] = p.value;
    have[static_cast<std::size_t>(p.target)] = true;
  }
  for (const Target t : kAllTargets)
    if (!have[static_cast<std::size_t>(t)]) throw ValidationError(std::string("no model for target ") + to_string(t));
  return out;
}

enum class ModelKind { Ols, ElasticNet, GaussianProcess };

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "ols") return ModelKind::Ols;
  if (s == "enet") return ModelKind::ElasticNet;
  if (s == "gp") return ModelKind::GaussianProcess;
  throw ValidationError("unknown model '" + s + "' (expected ols|enet|gp)");
}

struct ModelSpec {
  ModelKind kind = ModelKind::Ols;
  std::vector<std::string> features{"vtd_m"};
  ElasticNetOptions enet;
  GPParams gp;
};

inline Model fit_model(const Dataset& data, Target target, const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::Ols: return fit_ols(data, target, spec.features);
    case ModelKind::ElasticNet: return fit_elastic_net(data, target, spec.features, spec.enet);
    case ModelKind::GaussianProcess: return fit_gp(data, target, spec.features, spec.gp);
  }
  throw ValidationError("unknown model kind");
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CVReport {
  double r2 = 0.0;     // mean of per-fold R^2
  double rmse = 0.0;   // over pooled out-of-fold predictions
  double nrmse = 0.0;  // rmse / (y_max - y_min) over the whole dataset
  std::vector<double> fold_r2;
  std::vector<double> fold_rmse;
  std::vector<double> predictions;  // out-of-fold, in dataset row order
  std::size_t k = 0;
  std::uint64_t seed = 0;
};

inline double r_squared(const std::vector<double>& y, const std::vector<double>& pred) {
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - pred[i]) * (y[i] - pred[i]);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

inline double rmse(const std::vector<double>& y, const std::vector<double>& pred) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - pred[i]) * (y[i] - pred[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

/// Seeded Fisher-Yates permutation of 0..n-1, split into k near-equal folds
/// (the first n % k folds get one extra row).
inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[detail::uniform_below(rng, i)]);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos), perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return folds;
}

/// Requested fold count capped so every test fold holds at least two rows.
inline std::size_t effective_folds(std::size_t n, std::size_t k) {
  return std::max<std::size_t>(2, std::min(k, n / 2));
}

inline CVReport kfold_cv(const Dataset& data, Target target, const ModelSpec& spec, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("cross-validation needs k >= 2");
  if (k > data.size()) throw ValidationError("k = " + std::to_string(k) + " exceeds the " + std::to_string(data.size()) + " rows");
  const auto folds = kfold_split(data.size(), k, seed);
  const auto y = data.target(target);
  CVReport rep;
  rep.k = k;
  rep.seed = seed;
  rep.predictions.assign(data.size(), 0.0);
  for (const auto& test : folds) {
    std::vector<bool> in_test(data.size(), false);
    for (const auto i : test) in_test[i] = true;
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!in_test[i]) train.push_back(i);
    const Model m = fit_model(data.subset(train), target, spec);
    std::vector<double> fy, fp;
    for (const auto i : test) {
      FeatureMap fm;
      for (std::size_t j = 0; j < data.feature_names.size(); ++j) fm[data.feature_names[j]] = data.rows[i].features[j];
      const double p = predict(m, fm).value;
      rep.predictions[i] = p;
      fy.push_back(y[i]);
      fp.push_back(p);
    }
    rep.fold_r2.push_back(r_squared(fy, fp));
    rep.fold_rmse.push_back(rmse(fy, fp));
  }
  rep.r2 = std::accumulate(rep.fold_r2.begin(), rep.fold_r2.end(), 0.0) / static_cast<double>(k);
  rep.rmse = rmse(y, rep.predictions);
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  rep.nrmse = *hi > *lo ? rep.rmse / (*hi - *lo) : 0.0;
  return rep;
}

}  // namespace mapbench
