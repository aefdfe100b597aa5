#include "sgdlm/data/synthetic.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "sgdlm/core/errors.hpp"

namespace sgdlm::data {

namespace {

ParentStructure draw_structure(const SyntheticSpec& spec, Engine& rng) {
  if (spec.m < 1) throw GenerationError("simulate: m must be positive");
  if (spec.k < 0 || spec.k > spec.m - 1) throw GenerationError("simulate: k must be in [0, m - 1]");
  if (spec.k == 0) return ParentStructure::none(spec.m);
  ParentStructure s;
  s.m = spec.m;
  s.k = spec.k;
  s.parents.resize(static_cast<std::size_t>(spec.m));
  if (spec.parent_mode == ParentMode::kPairs) {
    if (spec.k != 1 || spec.m % 2 != 0) {
      throw GenerationError("simulate: paired parents need k = 1 and an even m");
    }
    std::vector<int> order(static_cast<std::size_t>(spec.m));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); i += 2) {
      s.parents[static_cast<std::size_t>(order[i])] = {order[i + 1]};
      s.parents[static_cast<std::size_t>(order[i + 1])] = {order[i]};
    }
  } else {
    for (int i = 0; i < spec.m; ++i) {
      std::vector<int> others;
      for (int j = 0; j < spec.m; ++j) {
        if (j != i) others.push_back(j);
      }
      std::shuffle(others.begin(), others.end(), rng);
      s.parents[static_cast<std::size_t>(i)].assign(others.begin(), others.begin() + spec.k);
    }
  }
  s.validate();
  return s;
}

double reflect(double x, double cap) {
  while (x > cap || x < -cap) x = x > cap ? 2.0 * cap - x : -2.0 * cap - x;
  return x;
}

}  // namespace

Matrix TruthPaths::gamma_at(long t) const {
  const int m = structure.m;
  Matrix g = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < structure.k; ++j) {
      g(i, structure.parents[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) =
          gamma(t, i * structure.k + j);
    }
  }
  return g;
}

void TruthPaths::validate() const {
  structure.validate();
  const auto m = structure.m;
  if (phi.cols() != m || lambda.cols() != m || gamma.cols() != m * structure.k ||
      lambda.rows() != phi.rows() || gamma.rows() != phi.rows()) {
    throw DimensionError("TruthPaths: path shapes disagree");
  }
  if (phi.rows() < 2) throw RangeError("TruthPaths: fewer than two days");
  if (!(lambda.array() > 0.0).all() || !lambda.allFinite()) {
    throw GenerationError("TruthPaths: precisions must be positive");
  }
}

double spectral_radius(const Matrix& gamma) {
  if (gamma.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(gamma, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

TruthPaths generate_truth(const SyntheticSpec& spec, StreamKey key) {
  if (spec.days < 2) throw RangeError("simulate: fewer than two days");
  if (!(spec.lambda > 0.0)) throw GenerationError("simulate: lambda must be positive");
  Engine rng = key.derive(1).engine();
  TruthPaths truth;
  truth.structure = draw_structure(spec, rng);
  const int m = spec.m;
  const int k = spec.k;
  const auto T = static_cast<Eigen::Index>(spec.days);
  truth.phi.resize(T, m);
  truth.gamma.resize(T, m * k);
  truth.lambda.resize(T, m);

  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const double cap = k > 0 ? std::max(spec.gamma_cap / k, std::abs(spec.coupling)) : 0.0;
  const double log_l0 = std::log(spec.lambda);
  for (int i = 0; i < m; ++i) {
    truth.phi(0, i) = spec.phi_mean + spec.phi_sd * normal(rng);
    truth.lambda(0, i) = spec.lambda;
    for (int j = 0; j < k; ++j) {
      const double sign = spec.random_sign && coin(rng) ? -1.0 : 1.0;
      truth.gamma(0, i * k + j) = sign * spec.coupling;
    }
  }
  for (Eigen::Index t = 1; t < T; ++t) {
    for (int i = 0; i < m; ++i) {
      truth.phi(t, i) = truth.phi(t - 1, i) + spec.phi_drift_sd * normal(rng);
      const double dev = std::log(truth.lambda(t - 1, i)) - log_l0;
      truth.lambda(t, i) = std::exp(log_l0 + spec.log_lambda_persistence * dev +
                                    spec.log_lambda_drift_sd * normal(rng));
      for (int j = 0; j < k; ++j) {
        const double g = truth.gamma(t - 1, i * k + j) + spec.gamma_drift_sd * normal(rng);
        truth.gamma(t, i * k + j) = reflect(g, cap);
      }
    }
  }
  truth.validate();
  return truth;
}

SyntheticPanel simulate_synthetic(const TruthPaths& truth, StreamKey key,
                                  const std::string& start_date) {
  truth.validate();
  const int m = truth.structure.m;
  const long T = truth.days();
  SyntheticPanel out;
  out.truth = truth;
  out.panel.tickers = default_tickers(m);
  out.panel.dates = weekday_calendar(start_date, T);
  out.panel.values.resize(T, m);

  Engine rng = key.derive(2).engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix identity = Matrix::Identity(m, m);
  Vector rhs(m);
  for (long t = 0; t < T; ++t) {
    const Matrix g = truth.gamma_at(t);
    if (truth.structure.k > 0) {
      const double rho = spectral_radius(g);
      if (!(rho < 1.0)) {
        throw GenerationError("simulate: spectral radius " + std::to_string(rho) +
                              " >= 1 on day " + std::to_string(t));
      }
    }
    Eigen::PartialPivLU<Matrix> lu(identity - g);
    if (!(std::abs(lu.determinant()) > 1e-300)) {
      throw GenerationError("simulate: I - Gamma singular on day " + std::to_string(t));
    }
    for (int i = 0; i < m; ++i) {
      rhs[i] = truth.phi(t, i) + normal(rng) / std::sqrt(truth.lambda(t, i));
    }
    out.panel.values.row(t) = lu.solve(rhs).transpose();
  }
  out.panel.validate();
  return out;
}

SyntheticPanel simulate_synthetic(const SyntheticSpec& spec, StreamKey key) {
  return simulate_synthetic(generate_truth(spec, key), key, spec.start_date);
}

std::vector<std::string> weekday_calendar(const std::string& start, long count) {
  if (!is_iso_date(start)) throw GenerationError("simulate: bad start date '" + start + "'");
  using namespace std::chrono;
  const int y = std::stoi(start.substr(0, 4));
  const auto mo = static_cast<unsigned>(std::stoi(start.substr(5, 2)));
  const auto d = static_cast<unsigned>(std::stoi(start.substr(8, 2)));
  sys_days day{year{y} / month{mo} / std::chrono::day{d}};
  std::vector<std::string> dates;
  dates.reserve(static_cast<std::size_t>(std::max(count, 0L)));
  while (static_cast<long>(dates.size()) < count) {
    const weekday wd{day};
    if (wd != Saturday && wd != Sunday) {
      const year_month_day ymd{day};
      char buf[16];
      std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                    static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
      dates.emplace_back(buf);
    }
    day += days{1};
  }
  return dates;
}

std::vector<std::string> default_tickers(int m) {
  std::vector<std::string> out;
  for (int i = 0; i < m; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%02d", i + 1);
    out.emplace_back(buf);
  }
  return out;
}

}  // namespace sgdlm::data
