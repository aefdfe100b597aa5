#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sgdlm/data/config.hpp"
#include "sgdlm/data/panel.hpp"
#include "sgdlm/data/state_io.hpp"
#include "sgdlm/selection/selection.hpp"

namespace sgdlm::data {

inline constexpr const char* kVersion = "0.1.0";

// Artifact names inside RunConfig::output_dir.
namespace artifact {
inline constexpr const char* kParents = "parents.csv";
inline constexpr const char* kDiscounts = "discounts.csv";
inline constexpr const char* kPhase2State = "phase2_state.jsonl";
inline constexpr const char* kPhase3State = "phase3_state.jsonl";
inline constexpr const char* kForecasts = "forecasts.csv";
inline constexpr const char* kDiagnostics = "diagnostics.csv";
inline constexpr const char* kCoverage = "coverage.csv";
inline constexpr const char* kErrors = "errors.csv";
inline constexpr const char* kSma = "sma.csv";
inline constexpr const char* kDlmForecasts = "dlm_forecasts.csv";
inline constexpr const char* kDlmDiscounts = "dlm_discounts.csv";
inline constexpr const char* kManifest = "manifest.txt";
inline constexpr const char* kReturns = "returns.csv";
inline constexpr const char* kPrices = "prices.csv";
inline constexpr const char* kTruth = "truth.csv";
inline constexpr const char* kTruthParents = "truth_parents.csv";
}  // namespace artifact

// Returns from input.returns, or log-returns of input.prices.
ReturnsPanel load_panel(const RunConfig& config);

// Long-format forecast table: T x m matrices aligned with dates and tickers.
struct ForecastTable {
  std::vector<std::string> dates;
  std::vector<std::string> tickers;
  Matrix y_hat;
  Matrix variance;
  Matrix observed;
};

void write_forecasts(const std::filesystem::path& path, const ForecastTable& table);
ForecastTable read_forecasts(const std::filesystem::path& path);

void write_parents(const std::filesystem::path& path, const std::vector<std::string>& tickers,
                   const std::vector<selection::ParentReport>& reports);
ParentStructure read_parents(const std::filesystem::path& path,
                             const std::vector<std::string>& tickers, int k);

void run_simulate(const RunConfig& config);
std::vector<selection::ParentReport> run_phase1(const RunConfig& config);
Phase2State run_phase2(const RunConfig& config);

struct Phase3Options {
  long max_days = -1;  // stop after this many new days; -1 runs to the end
  bool fresh = false;  // discard an existing journal
};

struct Phase3Status {
  long completed_days = 0;
  long total_days = 0;
  [[nodiscard]] bool finished() const { return completed_days == total_days; }
};

Phase3Status run_phase3(const RunConfig& config, const Phase3Options& options = {});
void run_evaluate(const RunConfig& config);
void run_dlm_baseline(const RunConfig& config);

}  // namespace sgdlm::data
