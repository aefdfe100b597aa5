#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sgdlm/data/panel.hpp"
#include "sgdlm/data/synthetic.hpp"
#include "sgdlm/dlm/filter.hpp"
#include "sgdlm/eval/eval.hpp"
#include "sgdlm/selection/selection.hpp"

namespace sgdlm::data {

struct RunConfig {
  int k = 1;
  int big_k = 2000;  // forecast draws per day
  int big_n = 2000;  // recoupling sample size
  std::uint64_t seed = 1;

  dlm::DiscountSet provisional;
  std::vector<selection::Factor> search_order{selection::Factor::kDeltaGamma,
                                              selection::Factor::kDeltaPhi,
                                              selection::Factor::kBeta};
  int search_iterations = 1;
  std::vector<double> grid_beta = selection::default_grid(selection::Factor::kBeta);
  std::vector<double> grid_delta_phi = selection::default_grid(selection::Factor::kDeltaPhi);
  std::vector<double> grid_delta_gamma = selection::default_grid(selection::Factor::kDeltaGamma);

  DateRange phase1;
  DateRange phase2;
  DateRange phase3;

  selection::PriorSpec prior;
  std::vector<eval::IntervalSpec> levels = eval::rounded_levels();
  int sma_window = 100;
  double ess_floor = kDefaultEssFloor;
  double ess_flag_fraction = eval::kEssFlagFraction;

  std::filesystem::path prices;
  std::filesystem::path returns;
  MissingPolicy missing = MissingPolicy::kDropRow;
  std::filesystem::path output_dir = ".";

  SyntheticSpec simulate;

  // Normalized key = value entries the config was parsed from.
  std::map<std::string, std::string> entries;

  [[nodiscard]] std::uint64_t hash() const;
  [[nodiscard]] selection::SweepOptions sweep_options() const;
  void validate() const;
};

// Parses `key = value` lines; `#` starts a comment and lists are written
// `[a, b, c]`. Relative paths resolve against `base_dir`. Throws ConfigError
// naming the offending key.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace sgdlm::data
