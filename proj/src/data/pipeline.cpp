#include "sgdlm/data/pipeline.hpp"

#include <Eigen/Core>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <sstream>

#include "sgdlm/core/errors.hpp"
#include "sgdlm/core/parallel.hpp"
#include "sgdlm/dlm/filter.hpp"
#include "sgdlm/eval/eval.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sgdlm::data {

namespace fs = std::filesystem;

namespace {

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Appends one block per command to manifest.txt.
class Manifest {
 public:
  Manifest(const RunConfig& config, std::string command)
      : config_(config), command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  void add(const std::string& artifact) { artifacts_.push_back(artifact); }
  void note(const std::string& key, const std::string& value) { notes_.emplace_back(key, value); }

  void write() const {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream out(config_.output_dir / artifact::kManifest, std::ios::app);
    if (!out) throw PipelineError("cannot write manifest in " + config_.output_dir.string());
    out << "[" << command_ << "]\n";
    out << "version = " << kVersion << '\n';
    out << "config_hash = " << hex64(config_.hash()) << '\n';
    out << "seed = " << config_.seed << '\n';
    out << "eigen = " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
        << EIGEN_MINOR_VERSION << '\n';
    out << "compiler = " << __VERSION__ << '\n';
    out << "threads = " << thread_count() << '\n';
    for (const auto& [k, v] : notes_) out << k << " = " << v << '\n';
    out << "elapsed_seconds = " << format_double(std::round(elapsed * 1000.0) / 1000.0) << '\n';
    out << "artifacts =";
    for (const auto& a : artifacts_) out << ' ' << a;
    out << "\n\n";
  }

 private:
  const RunConfig& config_;
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> artifacts_;
  std::vector<std::pair<std::string, std::string>> notes_;
};

std::ofstream open_artifact(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PipelineError("cannot write " + path.string());
  return out;
}

void ensure_output_dir(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw PipelineError("cannot create " + config.output_dir.string() + ": " + ec.message());
}

void require_file(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw PipelineError("missing " + path.string() + "; run " + producer + " first");
  }
}

selection::RowRange require_rows(const ReturnsPanel& panel, const DateRange& range,
                                 const std::string& key, long min_rows) {
  if (range.first.empty() || range.last.empty()) {
    throw ConfigError("config key '" + key + "': required for this command");
  }
  const auto rows = rows_in(panel, range);
  if (rows.size() < min_rows) {
    throw RangeError(key + " [" + range.first + ", " + range.last + "] selects " +
                     std::to_string(std::max(0L, rows.size())) + " rows; need at least " +
                     std::to_string(min_rows));
  }
  return rows;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw PipelineError(path.string() + " is empty");
  return rows;
}

std::string fmt(double v) { return format_double(v); }

// First-max argmax of ll over grid, via the shared discount chooser.
double best_on_grid(selection::Factor factor, const std::vector<double>& grid,
                    const std::vector<double>& ll) {
  selection::DiscountGrid g;
  g.factor = factor;
  g.values = grid;
  return selection::choose_discount(g, {ll}).per_series.front();
}

}  // namespace

ReturnsPanel load_panel(const RunConfig& config) {
  if (!config.returns.empty() && !config.prices.empty()) {
    throw ConfigError("config keys 'input.prices' and 'input.returns': give only one");
  }
  if (!config.returns.empty()) return read_returns(config.returns);
  if (config.prices.empty()) {
    throw ConfigError("config key 'input.prices': required (or give input.returns)");
  }
  auto ingested = ingest_prices(config.prices, {}, config.missing);
  for (const auto& w : ingested.warnings) std::cerr << "warning: " << w << '\n';
  std::cerr << "ingested " << ingested.price_rows << " price rows -> " << ingested.panel.rows()
            << " return rows (" << ingested.dropped_rows << " dropped)\n";
  return std::move(ingested.panel);
}

void write_forecasts(const fs::path& path, const ForecastTable& table) {
  auto out = open_artifact(path);
  out << "date,ticker,y_hat,variance,observed\n";
  for (std::size_t t = 0; t < table.dates.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    for (std::size_t i = 0; i < table.tickers.size(); ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      out << table.dates[t] << ',' << table.tickers[i] << ',' << fmt(table.y_hat(r, c)) << ','
          << fmt(table.variance(r, c)) << ',' << fmt(table.observed(r, c)) << '\n';
    }
  }
}

ForecastTable read_forecasts(const fs::path& path) {
  const auto rows = read_csv(path);
  if (rows[0] != std::vector<std::string>{"date", "ticker", "y_hat", "variance", "observed"}) {
    throw PipelineError(path.string() + ": unexpected header");
  }
  ForecastTable table;
  std::map<std::string, std::size_t> ticker_index;
  std::vector<std::array<double, 3>> cells;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 5) throw PipelineError(path.string() + ": bad row " + std::to_string(r + 1));
    if (table.dates.empty() || table.dates.back() != row[0]) table.dates.push_back(row[0]);
    if (table.dates.size() == 1 && ticker_index.count(row[1]) == 0) {
      ticker_index[row[1]] = table.tickers.size();
      table.tickers.push_back(row[1]);
    }
    const std::size_t expect = (r - 1) % std::max<std::size_t>(table.tickers.size(), 1);
    if (table.dates.size() > 1 && (ticker_index.count(row[1]) == 0 || ticker_index[row[1]] != expect)) {
      throw PipelineError(path.string() + ": tickers out of order at row " + std::to_string(r + 1));
    }
    cells.push_back({parse_double(row[2]), parse_double(row[3]), parse_double(row[4])});
  }
  const auto T = static_cast<Eigen::Index>(table.dates.size());
  const auto m = static_cast<Eigen::Index>(table.tickers.size());
  if (static_cast<Eigen::Index>(cells.size()) != T * m || T == 0) {
    throw PipelineError(path.string() + ": incomplete forecast table");
  }
  table.y_hat.resize(T, m);
  table.variance.resize(T, m);
  table.observed.resize(T, m);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& c = cells[static_cast<std::size_t>(t * m + i)];
      table.y_hat(t, i) = c[0];
      table.variance(t, i) = c[1];
      table.observed(t, i) = c[2];
    }
  }
  return table;
}

void write_parents(const fs::path& path, const std::vector<std::string>& tickers,
                   const std::vector<selection::ParentReport>& reports) {
  auto out = open_artifact(path);
  out << "series,rank,candidate,effect_size,chosen\n";
  for (const auto& report : reports) {
    for (std::size_t r = 0; r < report.ranked.size(); ++r) {
      const auto& c = report.ranked[r];
      const bool chosen = r < report.chosen.size();
      out << tickers[static_cast<std::size_t>(report.series)] << ',' << r + 1 << ','
          << tickers[static_cast<std::size_t>(c.candidate)] << ',' << fmt(c.effect_size) << ','
          << (chosen ? 1 : 0) << '\n';
    }
  }
}

ParentStructure read_parents(const fs::path& path, const std::vector<std::string>& tickers, int k) {
  require_file(path, "phase1");
  const auto rows = read_csv(path);
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < tickers.size(); ++i) index[tickers[i]] = static_cast<int>(i);
  ParentStructure s;
  s.m = static_cast<int>(tickers.size());
  s.k = k;
  s.parents.resize(tickers.size());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 5 || index.count(row[0]) == 0 || index.count(row[2]) == 0) {
      throw PipelineError(path.string() + ": row " + std::to_string(r + 1) +
                          " does not match the panel tickers");
    }
    if (row[4] == "1") s.parents[static_cast<std::size_t>(index[row[0]])].push_back(index[row[2]]);
  }
  for (std::size_t i = 0; i < s.parents.size(); ++i) {
    if (static_cast<int>(s.parents[i].size()) != k) {
      throw PipelineError(path.string() + ": " + tickers[i] + " has " +
                          std::to_string(s.parents[i].size()) + " chosen parents but k = " +
                          std::to_string(k) + "; rerun phase1");
    }
  }
  s.validate();
  return s;
}

void run_simulate(const RunConfig& config) {
  ensure_output_dir(config);
  Manifest manifest(config, "simulate");
  SyntheticSpec spec = config.simulate;
  const auto truth = generate_truth(spec, derive(StreamKey(config.seed), StreamTag::kSimulate));
  // One extra calendar day serves as the base date of the price file.
  const auto calendar = weekday_calendar(spec.start_date, truth.days() + 1);
  const auto sim =
      simulate_synthetic(truth, derive(StreamKey(config.seed), StreamTag::kSimulate), calendar[1]);
  const auto& panel = sim.panel;

  write_returns(config.output_dir / artifact::kReturns, panel);
  write_prices(config.output_dir / artifact::kPrices, panel, calendar[0]);
  {
    auto out = open_artifact(config.output_dir / artifact::kTruthParents);
    out << "series,parent,gamma_first_day\n";
    for (int i = 0; i < truth.structure.m; ++i) {
      for (int j = 0; j < truth.structure.k; ++j) {
        out << panel.tickers[static_cast<std::size_t>(i)] << ','
            << panel.tickers[static_cast<std::size_t>(
                   truth.structure.parents[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])]
            << ',' << fmt(truth.gamma(0, i * truth.structure.k + j)) << '\n';
      }
    }
  }
  {
    auto out = open_artifact(config.output_dir / artifact::kTruth);
    out << "date,ticker,phi,lambda";
    for (int j = 0; j < truth.structure.k; ++j) out << ",gamma_" << j + 1;
    out << '\n';
    for (long t = 0; t < truth.days(); ++t) {
      for (int i = 0; i < truth.structure.m; ++i) {
        out << panel.dates[static_cast<std::size_t>(t)] << ',' << panel.tickers[static_cast<std::size_t>(i)]
            << ',' << fmt(truth.phi(t, i)) << ',' << fmt(truth.lambda(t, i));
        for (int j = 0; j < truth.structure.k; ++j) out << ',' << fmt(truth.gamma(t, i * truth.structure.k + j));
        out << '\n';
      }
    }
  }
  for (const char* a : {artifact::kReturns, artifact::kPrices, artifact::kTruthParents, artifact::kTruth}) {
    manifest.add(a);
  }
  manifest.write();
}

std::vector<selection::ParentReport> run_phase1(const RunConfig& config) {
  const auto panel = load_panel(config);
  const auto rows = require_rows(panel, config.phase1, "phase1.range", 2);
  ensure_output_dir(config);
  Manifest manifest(config, "phase1");
  auto reports = selection::select_parents(panel.values, rows, config.k, config.prior, config.provisional);
  write_parents(config.output_dir / artifact::kParents, panel.tickers, reports);
  manifest.add(artifact::kParents);
  manifest.note("rows", std::to_string(rows.size()));
  manifest.write();
  return reports;
}

Phase2State run_phase2(const RunConfig& config) {
  const auto panel = load_panel(config);
  const auto structure = read_parents(config.output_dir / artifact::kParents, panel.tickers, config.k);
  const auto rows = require_rows(panel, config.phase2, "phase2.range", 2);
  Manifest manifest(config, "phase2");

  const auto sweep = selection::select_discounts(panel.values, structure, config.prior, rows,
                                                 config.sweep_options());
  {
    auto out = open_artifact(config.output_dir / artifact::kDiscounts);
    out << "series,factor,value\n";
    for (const auto& choice : sweep.choices) {
      for (std::size_t i = 0; i < choice.per_series.size(); ++i) {
        out << panel.tickers[i] << ',' << selection::factor_name(choice.factor) << ','
            << fmt(choice.per_series[i]) << '\n';
      }
      out << "mean," << selection::factor_name(choice.factor) << ',' << fmt(choice.mean) << '\n';
    }
  }

  const auto learned = selection::run_phase2(
      panel.values, structure, sweep.discounts, config.prior.build_set(structure), config.big_n,
      derive(StreamKey(config.seed), StreamTag::kPhase2), rows, config.ess_floor);

  Phase2State state;
  state.config_hash = config.hash();
  state.tickers = panel.tickers;
  state.structure = structure;
  state.discounts = sweep.discounts;
  state.last_row = rows.last;
  state.last_date = panel.dates[static_cast<std::size_t>(rows.last)];
  state.priors = learned.priors;
  write_phase2_state(config.output_dir / artifact::kPhase2State, state);

  manifest.add(artifact::kDiscounts);
  manifest.add(artifact::kPhase2State);
  manifest.note("discounts", "beta=" + fmt(state.discounts.beta) + " delta_phi=" +
                                 fmt(state.discounts.delta_phi) + " delta_gamma=" +
                                 fmt(state.discounts.delta_gamma));
  manifest.write();
  return state;
}

namespace {

void write_diagnostics(const fs::path& path, const std::vector<DayRecord>& days, double fraction) {
  std::vector<std::string> dates;
  std::vector<DayDiagnostics> diag;
  for (const auto& d : days) {
    dates.push_back(d.date);
    diag.push_back(d.diagnostics);
  }
  auto out = open_artifact(path);
  out << "date,ess,kl,kl_bound,sample_size,flagged\n";
  const auto rows = eval::diagnostics_series(dates, diag, fraction);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    out << rows[t].date << ',' << fmt(rows[t].ess) << ',' << fmt(rows[t].kl) << ','
        << fmt(rows[t].kl_bound) << ',' << diag[t].sample_size << ',' << (rows[t].flagged ? 1 : 0)
        << '\n';
  }
}

ForecastTable table_from(const std::vector<DayRecord>& days, const std::vector<std::string>& tickers) {
  ForecastTable table;
  table.tickers = tickers;
  const auto T = static_cast<Eigen::Index>(days.size());
  const auto m = static_cast<Eigen::Index>(tickers.size());
  table.y_hat.resize(T, m);
  table.variance.resize(T, m);
  table.observed.resize(T, m);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& d = days[static_cast<std::size_t>(t)];
    table.dates.push_back(d.date);
    table.y_hat.row(t) = d.y_hat.transpose();
    table.variance.row(t) = d.variance.transpose();
    table.observed.row(t) = d.observed.transpose();
  }
  return table;
}

}  // namespace

Phase3Status run_phase3(const RunConfig& config, const Phase3Options& options) {
  const auto p2_path = config.output_dir / artifact::kPhase2State;
  require_file(p2_path, "phase2");
  const auto p2 = read_phase2_state(p2_path);
  if (p2.config_hash != config.hash()) {
    std::cerr << "warning: phase2 state was written under a different configuration\n";
  }
  const auto panel = load_panel(config);
  if (panel.tickers != p2.tickers) throw PipelineError("phase3: panel tickers differ from phase2 state");
  const auto rows = require_rows(panel, config.phase3, "phase3.range", 1);
  if (rows.first <= p2.last_row) {
    throw PipelineError("phase3: range starts before the end of phase 2 (" + p2.last_date + ")");
  }
  if (rows.first > p2.last_row + 1) {
    std::cerr << "warning: " << rows.first - p2.last_row - 1
              << " rows between phase 2 and phase 3 are not assimilated\n";
  }
  Manifest manifest(config, "phase3");
  const auto journal_path = config.output_dir / artifact::kPhase3State;
  if (options.fresh) fs::remove(journal_path);
  StateJournal journal(journal_path, {config.hash(), config.seed, p2.structure.m, p2.structure.k});

  const auto& done = journal.days();
  for (std::size_t i = 0; i < done.size(); ++i) {
    if (done[i].row != rows.first + static_cast<long>(i)) {
      throw PipelineError(journal_path.string() + " does not match phase3.range; rerun with --fresh");
    }
  }
  if (static_cast<long>(done.size()) > rows.size()) {
    throw PipelineError(journal_path.string() + " has more days than phase3.range");
  }

  NormalGammaSet priors;
  if (done.empty()) {
    priors = p2.priors;
  } else {
    for (const auto& post : done.back().posteriors) priors.push_back(dlm::evolve_block(post, p2.discounts));
  }
  const StreamKey key = derive(StreamKey(config.seed), StreamTag::kPhase3);
  const StepOptions step_options{.forecast = true, .ess_floor = config.ess_floor};
  const long resumed_at = static_cast<long>(done.size());
  long new_days = 0;
  for (long t = rows.first + resumed_at; t <= rows.last; ++t) {
    if (options.max_days >= 0 && new_days >= options.max_days) break;
    const auto& date = panel.dates[static_cast<std::size_t>(t)];
    const Vector y = panel.values.row(t).transpose();
    DayResult day;
    try {
      day = step_day(priors, y, p2.structure, p2.discounts, config.big_k, config.big_n,
                     key.derive(static_cast<std::uint64_t>(t)), step_options);
    } catch (const Error& e) {
      std::cerr << "phase3 failed on " << date << ": " << e.what() << '\n';
      throw;
    }
    DayRecord rec;
    rec.row = t;
    rec.date = date;
    rec.posteriors = std::move(day.posteriors);
    rec.diagnostics = day.diagnostics;
    rec.y_hat = day.forecast.y_hat;
    rec.variance = day.forecast.covariance.diagonal();
    rec.observed = y;
    journal.append(rec);
    priors = std::move(day.next_priors);
    ++new_days;
  }

  write_forecasts(config.output_dir / artifact::kForecasts, table_from(journal.days(), panel.tickers));
  write_diagnostics(config.output_dir / artifact::kDiagnostics, journal.days(), config.ess_flag_fraction);

  Phase3Status status{static_cast<long>(journal.days().size()), rows.size()};
  manifest.add(artifact::kPhase3State);
  manifest.add(artifact::kForecasts);
  manifest.add(artifact::kDiagnostics);
  manifest.note("days", std::to_string(status.completed_days) + "/" + std::to_string(status.total_days));
  manifest.note("resumed_at_day", std::to_string(resumed_at));
  manifest.write();
  return status;
}

void run_evaluate(const RunConfig& config) {
  const auto fc_path = config.output_dir / artifact::kForecasts;
  require_file(fc_path, "phase3");
  const auto fc = read_forecasts(fc_path);
  Manifest manifest(config, "evaluate");

  const auto cov = eval::coverage(fc.observed, fc.y_hat, fc.variance, config.big_k, config.levels);
  {
    auto out = open_artifact(config.output_dir / artifact::kCoverage);
    out << "ticker";
    for (const auto& l : cov.levels) out << ",cov_" << fmt(std::round(l.level * 1e6) / 1e4) << "_z" << fmt(l.z);
    out << '\n';
    for (std::size_t i = 0; i < fc.tickers.size(); ++i) {
      out << fc.tickers[i];
      for (Eigen::Index l = 0; l < cov.aggregate.size(); ++l) {
        out << ',' << fmt(cov.per_series(static_cast<Eigen::Index>(i), l));
      }
      out << '\n';
    }
    out << "aggregate";
    for (Eigen::Index l = 0; l < cov.aggregate.size(); ++l) out << ',' << fmt(cov.aggregate[l]);
    out << '\n';
  }

  std::optional<ForecastTable> dlm;
  const auto dlm_path = config.output_dir / artifact::kDlmForecasts;
  if (fs::exists(dlm_path)) {
    dlm = read_forecasts(dlm_path);
    if (dlm->dates != fc.dates || dlm->tickers != fc.tickers) {
      throw PipelineError(dlm_path.string() + " is not aligned with " + fc_path.string());
    }
  }
  auto col = [](const Matrix& m, Eigen::Index i) {
    return std::span<const double>(m.col(i).data(), static_cast<std::size_t>(m.rows()));
  };
  {
    auto out = open_artifact(config.output_dir / artifact::kErrors);
    out << "ticker,rmse_sgdlm,mad_sgdlm,rmse_dlm,mad_dlm\n";
    for (std::size_t i = 0; i < fc.tickers.size(); ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      const auto e = eval::rmse_mad(col(fc.observed, c), col(fc.y_hat, c));
      out << fc.tickers[i] << ',' << fmt(e.rmse) << ',' << fmt(e.mad) << ',';
      if (dlm) {
        const auto d = eval::rmse_mad(col(dlm->observed, c), col(dlm->y_hat, c));
        out << fmt(d.rmse) << ',' << fmt(d.mad);
      } else {
        out << ',';
      }
      out << '\n';
    }
  }
  {
    auto out = open_artifact(config.output_dir / artifact::kSma);
    out << "date,ticker,observed_sma,forecast_sma\n";
    const auto w = config.sma_window;
    if (static_cast<long>(fc.dates.size()) < w) {
      std::cerr << "warning: fewer forecast days than sma.window; sma.csv is empty\n";
    } else {
      std::vector<std::vector<double>> obs;
      std::vector<std::vector<double>> pred;
      for (std::size_t i = 0; i < fc.tickers.size(); ++i) {
        obs.push_back(eval::sma(col(fc.observed, static_cast<Eigen::Index>(i)), w));
        pred.push_back(eval::sma(col(fc.y_hat, static_cast<Eigen::Index>(i)), w));
      }
      for (std::size_t t = 0; t < obs.front().size(); ++t) {
        for (std::size_t i = 0; i < fc.tickers.size(); ++i) {
          out << fc.dates[t + static_cast<std::size_t>(w) - 1] << ',' << fc.tickers[i] << ','
              << fmt(obs[i][t]) << ',' << fmt(pred[i][t]) << '\n';
        }
      }
    }
  }
  manifest.add(artifact::kCoverage);
  manifest.add(artifact::kErrors);
  manifest.add(artifact::kSma);
  const auto journal_path = config.output_dir / artifact::kPhase3State;
  if (fs::exists(journal_path)) {
    write_diagnostics(config.output_dir / artifact::kDiagnostics, StateJournal::read(journal_path),
                      config.ess_flag_fraction);
    manifest.add(artifact::kDiagnostics);
  }
  manifest.write();
}

void run_dlm_baseline(const RunConfig& config) {
  const auto panel = load_panel(config);
  const auto train = require_rows(panel, config.phase2, "phase2.range", 2);
  const auto test = require_rows(panel, config.phase3, "phase3.range", 1);
  if (test.first <= train.last) throw ConfigError("config key 'phase3.range': must follow phase2.range");
  ensure_output_dir(config);
  Manifest manifest(config, "dlm-baseline");

  const int m = panel.cols();
  const NormalGamma prior = config.prior.build(1);
  const Matrix ones = Matrix::Ones(panel.rows(), 1);
  std::vector<dlm::DiscountSet> chosen(static_cast<std::size_t>(m), config.provisional);
  ForecastTable table;
  table.tickers = panel.tickers;
  for (long t = test.first; t <= test.last; ++t) table.dates.push_back(panel.dates[static_cast<std::size_t>(t)]);
  table.y_hat.resize(test.size(), m);
  table.variance.resize(test.size(), m);
  table.observed = panel.values.middleRows(test.first, test.size());

  parallel_for(m, [&](int i) {
    const std::span<const double> y(panel.values.col(i).data(), static_cast<std::size_t>(panel.rows()));
    auto& d = chosen[static_cast<std::size_t>(i)];
    for (auto factor : config.search_order) {
      if (factor == selection::Factor::kDeltaGamma) continue;
      const auto& grid = factor == selection::Factor::kBeta ? config.grid_beta : config.grid_delta_phi;
      std::vector<double> ll;
      for (double g : grid) {
        dlm::DiscountSet trial = d;
        selection::factor_ref(trial, factor) = g;
        try {
          ll.push_back(dlm::log_likelihood(y, ones, prior, trial, train.first, train.last));
        } catch (const NumericalDegeneracyError&) {
          ll.push_back(std::nan(""));
        }
      }
      selection::factor_ref(d, factor) = best_on_grid(factor, grid, ll);
    }
    dlm::Filter filter(prior, d, train.first);
    const Vector f = Vector::Ones(1);
    for (long t = train.first; t <= train.last; ++t) filter.step(f, y[static_cast<std::size_t>(t)]);
    for (long t = test.first; t <= test.last; ++t) {
      const auto pred = dlm::one_step_predictive(filter.prior(), f);
      table.y_hat(t - test.first, i) = pred.mode;
      table.variance(t - test.first, i) =
          pred.dof > 2.0 ? pred.scale * pred.dof / (pred.dof - 2.0) : pred.scale;
      filter.step(f, y[static_cast<std::size_t>(t)]);
    }
  });

  write_forecasts(config.output_dir / artifact::kDlmForecasts, table);
  {
    auto out = open_artifact(config.output_dir / artifact::kDlmDiscounts);
    out << "ticker,delta,beta\n";
    for (int i = 0; i < m; ++i) {
      const auto& d = chosen[static_cast<std::size_t>(i)];
      out << panel.tickers[static_cast<std::size_t>(i)] << ',' << fmt(d.delta_phi) << ','
          << fmt(d.beta) << '\n';
    }
  }
  manifest.add(artifact::kDlmForecasts);
  manifest.add(artifact::kDlmDiscounts);
  manifest.write();
}

}  // namespace sgdlm::data
