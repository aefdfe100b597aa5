#pragma once

#include <string>
#include <vector>

#include "sgdlm/core/normal_gamma.hpp"
#include "sgdlm/core/random.hpp"
#include "sgdlm/data/panel.hpp"
#include "sgdlm/model/linear_algebra.hpp"
#include "sgdlm/model/parent_structure.hpp"

namespace sgdlm::data {

// True parameter paths of a simulated SGDLM.
struct TruthPaths {
  ParentStructure structure;
  Matrix phi;     // T x m
  Matrix gamma;   // T x (m k); column i k + j couples series i to parents[i][j]
  Matrix lambda;  // T x m, observational precisions

  [[nodiscard]] long days() const { return static_cast<long>(phi.rows()); }
  [[nodiscard]] Matrix gamma_at(long t) const;  // dense m x m
  void validate() const;
};

enum class ParentMode {
  kPairs,   // random perfect matching, each series is its partner's parent (k = 1)
  kRandom,  // k distinct parents drawn uniformly from the other series
};

struct SyntheticSpec {
  int m = 5;
  int k = 1;
  long days = 1000;
  ParentMode parent_mode = ParentMode::kPairs;

  double phi_mean = 0.0;
  double phi_sd = 0.0;        // spread of the initial levels
  double phi_drift_sd = 0.0;  // random-walk step

  double coupling = 0.6;    // initial gamma for every parent link
  bool random_sign = false;
  double gamma_drift_sd = 0.0;
  double gamma_cap = 0.9;  // drifting |gamma| reflected at gamma_cap / k

  double lambda = 1.0;
  double log_lambda_drift_sd = 0.0;  // AR(1) innovation on log lambda
  double log_lambda_persistence = 0.99;

  std::string start_date = "2014-01-02";
};

TruthPaths generate_truth(const SyntheticSpec& spec, StreamKey key);

struct SyntheticPanel {
  ReturnsPanel panel;
  TruthPaths truth;
};

// y_t = (I - Gamma_t)^{-1} (phi_t + v_t), v_t ~ N(0, diag(1 / lambda_t)). Throws
// GenerationError when any Gamma_t has spectral radius >= 1.
SyntheticPanel simulate_synthetic(const TruthPaths& truth, StreamKey key,
                                  const std::string& start_date = "2014-01-02");
SyntheticPanel simulate_synthetic(const SyntheticSpec& spec, StreamKey key);

// `count` consecutive Monday-to-Friday dates from `start` (inclusive if a weekday).
std::vector<std::string> weekday_calendar(const std::string& start, long count);

std::vector<std::string> default_tickers(int m);

double spectral_radius(const Matrix& gamma);

}  // namespace sgdlm::data
