#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgdlm/core/normal_gamma.hpp"
#include "sgdlm/selection/selection.hpp"

namespace sgdlm::data {

// Dated T x m matrix of log-returns.
struct ReturnsPanel {
  std::vector<std::string> dates;  // ISO-8601, strictly increasing
  std::vector<std::string> tickers;
  Matrix values;                   // T x m

  [[nodiscard]] long rows() const { return static_cast<long>(values.rows()); }
  [[nodiscard]] int cols() const { return static_cast<int>(values.cols()); }

  void validate() const;
};

// Inclusive ISO date bounds; an empty bound is open.
struct DateRange {
  std::string first;
  std::string last;

  [[nodiscard]] bool contains(const std::string& date) const;
};

// Rows of `panel` whose dates fall in `range`. Empty result when none do.
selection::RowRange rows_in(const ReturnsPanel& panel, const DateRange& range);

bool is_iso_date(const std::string& text);

enum class MissingPolicy { kDropRow, kForwardFill };

struct IngestResult {
  ReturnsPanel panel;
  long price_rows = 0;    // price rows inside the date range, before dropping
  long dropped_rows = 0;  // rows removed for missing prices
  std::vector<std::string> warnings;
};

// Reads `date,TICKER1,...` closing prices and returns ln(P_t / P_{t-1}).
IngestResult ingest_prices(std::istream& in, const DateRange& range = {},
                           MissingPolicy policy = MissingPolicy::kDropRow);
IngestResult ingest_prices(const std::filesystem::path& path, const DateRange& range = {},
                           MissingPolicy policy = MissingPolicy::kDropRow);

// Returns CSV with the same header layout; values written with shortest
// round-trip formatting.
void write_returns(std::ostream& out, const ReturnsPanel& panel);
void write_returns(const std::filesystem::path& path, const ReturnsPanel& panel);
ReturnsPanel read_returns(std::istream& in, const DateRange& range = {});
ReturnsPanel read_returns(const std::filesystem::path& path, const DateRange& range = {});

// Price path starting at `start` for every ticker: P_t = P_{t-1} exp(r_t),
// with one extra leading row dated `first_date`.
void write_prices(const std::filesystem::path& path, const ReturnsPanel& panel,
                  const std::string& first_date, double start = 100.0);

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);
// Parses a full decimal field; throws DataError on junk.
double parse_double(const std::string& text);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace sgdlm::data
