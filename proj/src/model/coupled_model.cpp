#include "sgdlm/model/coupled_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "sgdlm/core/errors.hpp"
#include "sgdlm/core/parallel.hpp"
#include "sgdlm/core/special_functions.hpp"

namespace sgdlm {

namespace {

// Draws are generated in fixed-size chunks, each with its own stream, so the
// sample is the same whatever the thread count.
constexpr Eigen::Index kChunk = 250;

template <typename Fn>
void for_each_chunk(Eigen::Index total, Fn&& fn) {
  const Eigen::Index chunks = (total + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](Eigen::Index c) { fn(c, c * kChunk, std::min(total, (c + 1) * kChunk)); });
}

void check_inputs(const NormalGammaSet& set, const ParentStructure& structure, const char* who) {
  structure.validate();
  if (static_cast<int>(set.size()) != structure.m) {
    throw DimensionError(std::string(who) + ": " + std::to_string(set.size()) +
                         " factors for m = " + std::to_string(structure.m));
  }
  for (const auto& ng : set) {
    if (ng.dim() != structure.state_dim()) {
      throw DimensionError(std::string(who) + ": factor dimension " + std::to_string(ng.dim()) +
                           " != k + 1 = " + std::to_string(structure.state_dim()));
    }
  }
}

std::vector<NormalGammaSampler> make_samplers(const NormalGammaSet& set) {
  std::vector<NormalGammaSampler> samplers;
  samplers.reserve(set.size());
  for (const auto& ng : set) samplers.emplace_back(ng);
  return samplers;
}

// Fills `system` with I - Gamma for draw n of `sample`.
void fill_system(Matrix& system, const std::vector<SeriesSample>& sample,
                 const ParentStructure& structure, Eigen::Index n) {
  system.setIdentity();
  for (int i = 0; i < structure.m; ++i) {
    const auto& sp = structure.parents[static_cast<std::size_t>(i)];
    const auto& theta = sample[static_cast<std::size_t>(i)].theta;
    for (int j = 0; j < structure.k; ++j) system(i, sp[static_cast<std::size_t>(j)]) = -theta(j + 1, n);
  }
}

std::vector<SeriesSample> allocate_sample(const ParentStructure& structure, Eigen::Index count) {
  std::vector<SeriesSample> sample(static_cast<std::size_t>(structure.m));
  for (auto& s : sample) {
    s.theta.resize(structure.state_dim(), count);
    s.lambda.resize(count);
  }
  return sample;
}

void draw_joint(std::vector<SeriesSample>& sample, const std::vector<NormalGammaSampler>& samplers,
                Engine& rng, Eigen::Index n) {
  for (std::size_t i = 0; i < samplers.size(); ++i) {
    sample[i].lambda[n] = samplers[i].draw(rng, sample[i].theta.col(n));
  }
}

bool usable_determinant(double det) {
  return std::isfinite(det) && std::abs(det) >= kSingularDeterminant;
}

// Weighted moment matching of one series' sample onto a normal-gamma factor.
NormalGamma fit_series(const SeriesSample& s, const Vector& w, Eigen::Index p, int series) {
  if (s.theta.rows() != p) throw DimensionError("decouple: theta has the wrong dimension");
  const Vector wl = w.cwiseProduct(s.lambda);
  const double e_lambda = wl.sum();
  const double e_log_lambda = w.dot(s.lambda.array().log().matrix());
  const Vector mean = s.theta * wl / e_lambda;
  const Matrix centered = s.theta.colwise() - mean;
  Matrix v = centered * wl.asDiagonal() * centered.transpose();
  v = 0.5 * (v + v.transpose()).eval();

  const double trace = v.trace();
  // Spread at rounding level relative to the raw second moment counts as none.
  const double raw = (s.theta.array().square().matrix() * wl).sum() / e_lambda;
  Eigen::LLT<Matrix> llt(v);
  bool singular = !(trace > 1e-24 * raw) || !std::isfinite(trace) || llt.info() != Eigen::Success;
  if (!singular && p > 1) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(v, Eigen::EigenvaluesOnly);
    singular = eig.eigenvalues().minCoeff() < 1e-12 * trace;
  }
  if (singular) {
    throw DegenerateSampleError("decouple: weighted covariance V is singular for series " +
                                std::to_string(series));
  }
  const Matrix solved = llt.solve(centered);
  const double d = centered.cwiseProduct(solved).colwise().sum().dot(wl.transpose());
  const double p_minus_d = static_cast<double>(p) - d;
  const double n = solve_mfvb_dof(e_lambda, e_log_lambda, p_minus_d);
  const double s_hat = (n + p_minus_d) / (n * e_lambda);

  NormalGamma ng;
  ng.location = mean;
  ng.scale_matrix = s_hat * v;
  ng.dof = n;
  ng.variance_estimate = s_hat;
  return ng;
}

}  // namespace

JointDraw WeightedPosterior::draw(Eigen::Index n, const ParentStructure& structure) const {
  JointDraw out;
  out.series.reserve(series.size());
  for (const auto& s : series) out.series.push_back({s.theta.col(n), s.lambda[n]});
  out.gamma = assemble_gamma(out.series, structure);
  return out;
}

void WeightedPosterior::validate() const {
  const auto n = weights.size();
  if (n == 0) throw DimensionError("WeightedPosterior: empty sample");
  for (const auto& s : series) {
    if (s.theta.cols() != n || s.lambda.size() != n) {
      throw DimensionError("WeightedPosterior: series sample size does not match the weights");
    }
  }
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-12) {
    throw DomainError("WeightedPosterior: weights must be nonnegative and sum to 1");
  }
}

SparseMatrix assemble_gamma(const std::vector<StateDraw>& draws, const ParentStructure& structure) {
  structure.validate();
  if (static_cast<int>(draws.size()) != structure.m) {
    throw DimensionError("assemble_gamma: expected one draw per series");
  }
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(structure.m * structure.k));
  for (int i = 0; i < structure.m; ++i) {
    const auto& theta = draws[static_cast<std::size_t>(i)].theta;
    if (theta.size() != structure.state_dim()) {
      throw DimensionError("assemble_gamma: series " + std::to_string(i) + " has theta of length " +
                           std::to_string(theta.size()));
    }
    const auto& sp = structure.parents[static_cast<std::size_t>(i)];
    for (int j = 0; j < structure.k; ++j) {
      entries.emplace_back(i, sp[static_cast<std::size_t>(j)], theta[j + 1]);
    }
  }
  SparseMatrix gamma(structure.m, structure.m);
  gamma.setFromTriplets(entries.begin(), entries.end());
  return gamma;
}

DayDiagnostics normalize_weights(Vector& weights) {
  const auto n = weights.size();
  if (n == 0) throw DegenerateRecouplingError("normalize_weights: empty sample");
  if ((weights.array() < 0.0).any() || !weights.allFinite()) {
    throw DomainError("normalize_weights: raw weights must be finite and nonnegative");
  }
  const double total = weights.sum();
  if (!(total > 0.0)) throw DegenerateRecouplingError("recouple: every importance weight is zero");

  const double big_n = static_cast<double>(n);
  // Rescaled by the largest weight so tiny raw weights do not underflow when squared.
  const double top = weights.maxCoeff();
  DayDiagnostics diag;
  diag.sample_size = n;
  diag.kl_bound = std::log(big_n);
  // Computed from the raw weights so that equal weights give ESS = N and
  // KL = 0 with no rounding residue.
  diag.ess = (total / top) * (total / top) / (weights / top).squaredNorm();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = weights[i];
    if (u > 0.0) kl += (u / total) * std::log(big_n * u / total);
  }
  diag.kl = std::clamp(kl, 0.0, diag.kl_bound);
  diag.ess = std::clamp(diag.ess, 1.0, big_n);
  weights /= total;
  return diag;
}

double factorized_log_density(const Vector& y, const std::vector<StateDraw>& draws,
                              const ParentStructure& structure) {
  const SparseMatrix gamma = assemble_gamma(draws, structure);
  if (y.size() != structure.m) throw DimensionError("factorized_log_density: y has wrong length");
  Eigen::PartialPivLU<Matrix> lu(Matrix(Matrix::Identity(structure.m, structure.m) - Matrix(gamma)));
  double total = std::log(std::abs(lu.determinant()));
  for (int i = 0; i < structure.m; ++i) {
    const auto& d = draws[static_cast<std::size_t>(i)];
    const double mean = regressor_for(y, structure, i).dot(d.theta);
    total += normal_log_density(y[i], mean, 1.0 / d.lambda);
  }
  return total;
}

Vector regressor_for(const Vector& y, const ParentStructure& structure, int series) {
  Vector f(structure.state_dim());
  f[0] = 1.0;
  const auto& sp = structure.parents[static_cast<std::size_t>(series)];
  for (int j = 0; j < structure.k; ++j) f[j + 1] = y[sp[static_cast<std::size_t>(j)]];
  return f;
}

ForecastSummary forecast_day(const NormalGammaSet& priors, const ParentStructure& structure,
                             int num_draws, StreamKey key) {
  check_inputs(priors, structure, "forecast_day");
  if (num_draws < 1) throw DomainError("forecast_day: K must be positive");
  const int m = structure.m;
  const Eigen::Index count = num_draws;
  const auto samplers = make_samplers(priors);

  Matrix means(count, m);
  Matrix simulated(count, m);
  std::vector<char> valid(static_cast<std::size_t>(count), 0);
  const Eigen::Index chunks = (count + kChunk - 1) / kChunk;
  std::vector<Matrix> conditional(static_cast<std::size_t>(chunks), Matrix::Zero(m, m));

  for_each_chunk(count, [&](Eigen::Index c, Eigen::Index begin, Eigen::Index end) {
    Engine rng = key.derive(static_cast<std::uint64_t>(c)).engine();
    std::normal_distribution<double> normal(0.0, 1.0);
    auto sample = allocate_sample(structure, 1);
    Matrix system(m, m);
    Matrix scaled = Matrix::Zero(m, m);
    Vector phi(m);
    Vector eps(m);
    Eigen::PartialPivLU<Matrix> lu(m);
    Matrix& acc = conditional[static_cast<std::size_t>(c)];
    for (Eigen::Index r = begin; r < end; ++r) {
      draw_joint(sample, samplers, rng, 0);
      for (int i = 0; i < m; ++i) eps[i] = normal(rng);
      fill_system(system, sample, structure, 0);
      lu.compute(system);
      if (!usable_determinant(lu.determinant())) continue;
      scaled.setZero();
      for (int i = 0; i < m; ++i) {
        phi[i] = sample[static_cast<std::size_t>(i)].theta(0, 0);
        scaled(i, i) = 1.0 / std::sqrt(sample[static_cast<std::size_t>(i)].lambda[0]);
      }
      const Vector mean = lu.solve(phi);
      const Matrix b = lu.solve(scaled);  // A Lambda^{-1/2}
      acc.selfadjointView<Eigen::Lower>().rankUpdate(b);
      means.row(r) = mean.transpose();
      simulated.row(r) = (mean + b * eps).transpose();
      valid[static_cast<std::size_t>(r)] = 1;
    }
  });

  Eigen::Index good = 0;
  for (char v : valid) good += v;
  ForecastSummary out;
  out.singular_draws = count - good;
  if (good == 0 || static_cast<double>(out.singular_draws) > 0.01 * static_cast<double>(count)) {
    throw DegeneratePriorError("forecast_day: " + std::to_string(out.singular_draws) + " of " +
                               std::to_string(count) + " draws have singular I - Gamma");
  }
  Matrix kept_means(good, m);
  out.draws.resize(good, m);
  for (Eigen::Index r = 0, row = 0; r < count; ++r) {
    if (!valid[static_cast<std::size_t>(r)]) continue;
    kept_means.row(row) = means.row(r);
    out.draws.row(row) = simulated.row(r);
    ++row;
  }
  Matrix lower = Matrix::Zero(m, m);
  for (const auto& acc : conditional) lower += acc;
  const Matrix sum_conditional = lower.selfadjointView<Eigen::Lower>();

  const double g = static_cast<double>(good);
  out.y_hat = kept_means.colwise().mean().transpose();
  const Matrix centered = kept_means.rowwise() - out.y_hat.transpose();
  out.covariance = sum_conditional / g + (centered.transpose() * centered) / g;
  return out;
}

NormalGammaSet naive_update(const NormalGammaSet& priors, const Vector& observations,
                            const ParentStructure& structure) {
  check_inputs(priors, structure, "naive_update");
  if (observations.size() != structure.m || !observations.allFinite()) {
    throw DomainError("naive_update: observations must be a finite m-vector");
  }
  NormalGammaSet out;
  out.reserve(priors.size());
  for (int i = 0; i < structure.m; ++i) {
    out.push_back(dlm::kalman_update(priors[static_cast<std::size_t>(i)],
                                     regressor_for(observations, structure, i), observations[i])
                      .posterior);
  }
  return out;
}

RecoupleResult recouple(const NormalGammaSet& naive_posteriors, const ParentStructure& structure,
                        int sample_size, StreamKey key) {
  check_inputs(naive_posteriors, structure, "recouple");
  if (sample_size < 2) throw DomainError("recouple: N must be at least 2");
  const int m = structure.m;
  const Eigen::Index count = sample_size;
  const auto samplers = make_samplers(naive_posteriors);

  RecoupleResult out;
  out.posterior.series = allocate_sample(structure, count);
  out.posterior.weights.resize(count);
  auto& sample = out.posterior.series;
  auto& weights = out.posterior.weights;

  for_each_chunk(count, [&](Eigen::Index c, Eigen::Index begin, Eigen::Index end) {
    Engine rng = key.derive(static_cast<std::uint64_t>(c)).engine();
    Matrix system(m, m);
    Eigen::PartialPivLU<Matrix> lu(m);
    for (Eigen::Index n = begin; n < end; ++n) {
      draw_joint(sample, samplers, rng, n);
      if (structure.k == 0) {
        weights[n] = 1.0;
        continue;
      }
      fill_system(system, sample, structure, n);
      lu.compute(system);
      const double det = lu.determinant();
      // Singular draws keep weight zero.
      weights[n] = usable_determinant(det) ? std::abs(det) : 0.0;
    }
  });
  out.diagnostics = normalize_weights(weights);
  return out;
}

NormalGammaSet decouple(const WeightedPosterior& posterior, const ParentStructure& structure,
                        double ess_floor) {
  structure.validate();
  posterior.validate();
  if (static_cast<int>(posterior.series.size()) != structure.m) {
    throw DimensionError("decouple: sample does not match the parent structure");
  }
  const double ess = 1.0 / posterior.weights.squaredNorm();
  if (ess < ess_floor) {
    throw DegenerateSampleError("decouple: effective sample size " + std::to_string(ess) +
                                " below floor " + std::to_string(ess_floor));
  }
  NormalGammaSet out;
  out.reserve(posterior.series.size());
  for (int i = 0; i < structure.m; ++i) {
    out.push_back(fit_series(posterior.series[static_cast<std::size_t>(i)], posterior.weights,
                             structure.state_dim(), i));
  }
  return out;
}

DayResult step_day(const NormalGammaSet& priors, const Vector& observations,
                   const ParentStructure& structure, const dlm::DiscountSet& discounts,
                   int num_forecast_draws, int sample_size, StreamKey key,
                   const StepOptions& options) {
  discounts.validate();
  DayResult out;
  if (options.forecast) {
    out.forecast = forecast_day(priors, structure, num_forecast_draws, derive(key, StreamTag::kForecast));
  }
  const NormalGammaSet naive = naive_update(priors, observations, structure);
  auto recoupled = recouple(naive, structure, sample_size, derive(key, StreamTag::kRecouple));
  out.diagnostics = recoupled.diagnostics;
  out.posteriors = decouple(recoupled.posterior, structure, options.ess_floor);
  out.next_priors.reserve(out.posteriors.size());
  for (const auto& post : out.posteriors) out.next_priors.push_back(dlm::evolve_block(post, discounts));
  return out;
}

}  // namespace sgdlm
