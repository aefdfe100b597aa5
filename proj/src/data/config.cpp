#include "sgdlm/data/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "sgdlm/core/errors.hpp"

namespace sgdlm::data {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw ConfigError("config key '" + key + "': " + what);
}

bool is_list(const std::string& value) {
  return value.size() >= 2 && value.front() == '[' && value.back() == ']';
}

std::vector<std::string> list_items(const std::string& key, const std::string& value) {
  if (!is_list(value)) fail(key, "expected a list [..], got '" + value + "'");
  std::vector<std::string> items;
  const std::string inner = trim(std::string_view(value).substr(1, value.size() - 2));
  if (inner.empty()) return items;
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(trim(item));
    if (item.empty()) fail(key, "empty list item");
    items.push_back(item);
  }
  return items;
}

double as_double(const std::string& key, const std::string& value) {
  const char* b = value.data();
  const char* e = b + value.size();
  if (b != e && *b == '+') ++b;
  double v = 0.0;
  auto [p, ec] = std::from_chars(b, e, v);
  if (value.empty() || ec != std::errc() || p != e || !std::isfinite(v)) {
    fail(key, "expected a number, got '" + value + "'");
  }
  return v;
}

long long as_integer(const std::string& key, const std::string& value) {
  long long v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || p != value.data() + value.size()) {
    fail(key, "expected an integer, got '" + value + "'");
  }
  return v;
}

int as_int(const std::string& key, const std::string& value) {
  const long long v = as_integer(key, value);
  if (v < -2147483647LL || v > 2147483647LL) fail(key, "integer out of range");
  return static_cast<int>(v);
}

bool as_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  fail(key, "expected true or false, got '" + value + "'");
}

std::vector<double> as_doubles(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : list_items(key, value)) out.push_back(as_double(key, item));
  return out;
}

DateRange as_range(const std::string& key, const std::string& value) {
  const auto items = list_items(key, value);
  if (items.size() != 2) fail(key, "expected [first_date, last_date]");
  for (const auto& d : items) {
    if (!is_iso_date(d)) fail(key, "'" + d + "' is not an ISO-8601 date");
  }
  if (items[1] < items[0]) fail(key, "range ends before it starts");
  return {items[0], items[1]};
}

std::filesystem::path as_path(const std::string& value, const std::filesystem::path& base) {
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

double rounded_z(double level) {
  for (const auto& spec : eval::rounded_levels()) {
    if (std::abs(spec.level - level) < 1e-12) return spec.z;
  }
  return std::nan("");
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t RunConfig::hash() const {
  std::string canonical;
  for (const auto& [key, value] : entries) canonical += key + '=' + value + '\n';
  return fnv1a64(canonical);
}

selection::SweepOptions RunConfig::sweep_options() const {
  selection::SweepOptions options;
  options.order = search_order;
  options.iterations = search_iterations;
  options.beta_grid = grid_beta;
  options.delta_phi_grid = grid_delta_phi;
  options.delta_gamma_grid = grid_delta_gamma;
  options.provisional = provisional;
  return options;
}

void RunConfig::validate() const {
  if (k < 0) fail("k", "must be nonnegative");
  if (big_k < 2) fail("big_k", "must be at least 2");
  if (big_n < 2) fail("big_n", "must be at least 2");
  try {
    provisional.validate();
  } catch (const Error& e) {
    fail("beta/delta_phi/delta_gamma", e.what());
  }
  if (search_iterations < 1) fail("search.iterations", "must be at least 1");
  if (!(prior.r0 > 0.0)) fail("prior.r0", "must be positive");
  if (!(prior.c0 > 0.0)) fail("prior.c0", "must be positive");
  if (!(prior.r_phi > 0.0)) fail("prior.R_phi", "must be positive");
  if (!(prior.r_gamma > 0.0)) fail("prior.R_gamma", "must be positive");
  if (sma_window < 1) fail("sma.window", "must be positive");
  if (!(ess_floor >= 1.0)) fail("ess.floor", "must be at least 1");
  const std::pair<const char*, const std::vector<double>*> grids[] = {
      {"grid.beta", &grid_beta}, {"grid.delta_phi", &grid_delta_phi},
      {"grid.delta_gamma", &grid_delta_gamma}};
  for (const auto& [name, grid] : grids) {
    selection::DiscountGrid g;
    g.values = *grid;
    try {
      g.validate();
    } catch (const Error& e) {
      fail(name, e.what());
    }
  }
  const std::pair<const char*, const DateRange*> ranges[] = {
      {"phase1.range", &phase1}, {"phase2.range", &phase2}, {"phase3.range", &phase3}};
  for (std::size_t i = 1; i < 3; ++i) {
    const DateRange& prev = *ranges[i - 1].second;
    const DateRange& cur = *ranges[i].second;
    if (!prev.last.empty() && !cur.first.empty() && !(prev.last < cur.first)) {
      fail(ranges[i].first, std::string("must start after ") + ranges[i - 1].first + " ends");
    }
  }
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  long line_no = 0;
  std::vector<double> z_values;
  bool have_levels = false;
  std::string z_mode = "rounded";
  std::vector<double> level_values;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"k", [&](auto& k, auto& v) { cfg.k = as_int(k, v); }},
      {"big_k", [&](auto& k, auto& v) { cfg.big_k = as_int(k, v); }},
      {"big_n", [&](auto& k, auto& v) { cfg.big_n = as_int(k, v); }},
      {"seed",
       [&](auto& k, auto& v) {
         const long long s = as_integer(k, v);
         if (s < 0) fail(k, "must be nonnegative");
         cfg.seed = static_cast<std::uint64_t>(s);
       }},
      {"beta", [&](auto& k, auto& v) { cfg.provisional.beta = as_double(k, v); }},
      {"delta_phi", [&](auto& k, auto& v) { cfg.provisional.delta_phi = as_double(k, v); }},
      {"delta_gamma", [&](auto& k, auto& v) { cfg.provisional.delta_gamma = as_double(k, v); }},
      {"grid.beta", [&](auto& k, auto& v) { cfg.grid_beta = as_doubles(k, v); }},
      {"grid.delta_phi", [&](auto& k, auto& v) { cfg.grid_delta_phi = as_doubles(k, v); }},
      {"grid.delta_gamma", [&](auto& k, auto& v) { cfg.grid_delta_gamma = as_doubles(k, v); }},
      {"search.order",
       [&](auto& k, auto& v) {
         cfg.search_order.clear();
         for (const auto& item : list_items(k, v)) {
           try {
             cfg.search_order.push_back(selection::parse_factor(item));
           } catch (const ConfigError&) {
             fail(k, "unknown factor '" + item + "'");
           }
         }
         if (cfg.search_order.empty()) fail(k, "must name at least one factor");
       }},
      {"search.iterations", [&](auto& k, auto& v) { cfg.search_iterations = as_int(k, v); }},
      {"phase1.range", [&](auto& k, auto& v) { cfg.phase1 = as_range(k, v); }},
      {"phase2.range", [&](auto& k, auto& v) { cfg.phase2 = as_range(k, v); }},
      {"phase3.range", [&](auto& k, auto& v) { cfg.phase3 = as_range(k, v); }},
      {"prior.r0", [&](auto& k, auto& v) { cfg.prior.r0 = as_double(k, v); }},
      {"prior.c0", [&](auto& k, auto& v) { cfg.prior.c0 = as_double(k, v); }},
      {"prior.R_phi", [&](auto& k, auto& v) { cfg.prior.r_phi = as_double(k, v); }},
      {"prior.R_gamma", [&](auto& k, auto& v) { cfg.prior.r_gamma = as_double(k, v); }},
      {"levels",
       [&](auto& k, auto& v) {
         level_values = as_doubles(k, v);
         have_levels = true;
       }},
      {"z_values", [&](auto& k, auto& v) { z_values = as_doubles(k, v); }},
      {"z_mode",
       [&](auto& k, auto& v) {
         if (v != "rounded" && v != "exact") fail(k, "expected rounded or exact");
         z_mode = v;
       }},
      {"sma.window", [&](auto& k, auto& v) { cfg.sma_window = as_int(k, v); }},
      {"ess.floor", [&](auto& k, auto& v) { cfg.ess_floor = as_double(k, v); }},
      {"ess.flag_fraction", [&](auto& k, auto& v) { cfg.ess_flag_fraction = as_double(k, v); }},
      {"input.prices", [&](auto&, auto& v) { cfg.prices = as_path(v, base_dir); }},
      {"input.returns", [&](auto&, auto& v) { cfg.returns = as_path(v, base_dir); }},
      {"input.missing",
       [&](auto& k, auto& v) {
         if (v == "drop") {
           cfg.missing = MissingPolicy::kDropRow;
         } else if (v == "ffill") {
           cfg.missing = MissingPolicy::kForwardFill;
         } else {
           fail(k, "expected drop or ffill");
         }
       }},
      {"output.dir", [&](auto&, auto& v) { cfg.output_dir = as_path(v, base_dir); }},
      {"simulate.m", [&](auto& k, auto& v) { cfg.simulate.m = as_int(k, v); }},
      {"simulate.k", [&](auto& k, auto& v) { cfg.simulate.k = as_int(k, v); }},
      {"simulate.days", [&](auto& k, auto& v) { cfg.simulate.days = as_integer(k, v); }},
      {"simulate.parents",
       [&](auto& k, auto& v) {
         if (v == "pairs") {
           cfg.simulate.parent_mode = ParentMode::kPairs;
         } else if (v == "random") {
           cfg.simulate.parent_mode = ParentMode::kRandom;
         } else {
           fail(k, "expected pairs or random");
         }
       }},
      {"simulate.phi_mean", [&](auto& k, auto& v) { cfg.simulate.phi_mean = as_double(k, v); }},
      {"simulate.phi_sd", [&](auto& k, auto& v) { cfg.simulate.phi_sd = as_double(k, v); }},
      {"simulate.phi_drift_sd",
       [&](auto& k, auto& v) { cfg.simulate.phi_drift_sd = as_double(k, v); }},
      {"simulate.coupling", [&](auto& k, auto& v) { cfg.simulate.coupling = as_double(k, v); }},
      {"simulate.random_sign", [&](auto& k, auto& v) { cfg.simulate.random_sign = as_bool(k, v); }},
      {"simulate.gamma_drift_sd",
       [&](auto& k, auto& v) { cfg.simulate.gamma_drift_sd = as_double(k, v); }},
      {"simulate.gamma_cap", [&](auto& k, auto& v) { cfg.simulate.gamma_cap = as_double(k, v); }},
      {"simulate.lambda", [&](auto& k, auto& v) { cfg.simulate.lambda = as_double(k, v); }},
      {"simulate.log_lambda_drift_sd",
       [&](auto& k, auto& v) { cfg.simulate.log_lambda_drift_sd = as_double(k, v); }},
      {"simulate.log_lambda_persistence",
       [&](auto& k, auto& v) { cfg.simulate.log_lambda_persistence = as_double(k, v); }},
      {"simulate.start_date",
       [&](auto& k, auto& v) {
         if (!is_iso_date(v)) fail(k, "'" + v + "' is not an ISO-8601 date");
         cfg.simulate.start_date = v;
       }},
  };

  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = unquote(trim(std::string_view(body).substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    const auto it = setters.find(key);
    if (it == setters.end()) fail(key, "unknown key (line " + std::to_string(line_no) + ")");
    if (cfg.entries.count(key) != 0) fail(key, "given twice (line " + std::to_string(line_no) + ")");
    it->second(key, value);
    cfg.entries[key] = value;
  }

  if (!z_values.empty() && !have_levels) fail("z_values", "given without levels");
  if (have_levels) {
    cfg.levels.clear();
    if (level_values.empty()) fail("levels", "must list at least one level");
    if (!z_values.empty() && z_values.size() != level_values.size()) {
      fail("z_values", "must have one entry per level");
    }
    for (std::size_t i = 0; i < level_values.size(); ++i) {
      // Levels are written as percentages.
      const double level = level_values[i] / 100.0;
      if (!(level > 0.0 && level < 1.0)) fail("levels", "each level must be in (0, 100)");
      double z;
      if (!z_values.empty()) {
        z = z_values[i];
        if (!(z > 0.0)) fail("z_values", "must be positive");
      } else if (z_mode == "exact") {
        z = eval::critical_value(level);
      } else {
        z = rounded_z(level);
        if (std::isnan(z)) {
          fail("levels", "no rounded z for level " + format_double(level_values[i]) +
                             "; give z_values or z_mode = exact");
        }
      }
      cfg.levels.push_back({level, z});
    }
  } else if (z_mode == "exact") {
    cfg.levels = eval::exact_levels();
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

}  // namespace sgdlm::data
