#include "sgdlm/data/panel.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "sgdlm/core/errors.hpp"

namespace sgdlm::data {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& field) {
  return field.empty() || field == "NA" || field == "NaN" || field == "nan" || field == "null";
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> line_numbers;
};

CsvTable read_table(std::istream& in) {
  CsvTable table;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      if (table.header.size() < 2 || table.header[0] != "date") {
        throw DataError("line " + std::to_string(line_no) + ": header must be date,<ticker>,...");
      }
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    if (!is_iso_date(fields[0])) {
      throw DataError("line " + std::to_string(line_no) + ": '" + fields[0] +
                      "' is not an ISO-8601 date");
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (table.header.empty()) throw DataError("empty file");
  return table;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

void ReturnsPanel::validate() const {
  if (values.rows() != static_cast<Eigen::Index>(dates.size()) ||
      values.cols() != static_cast<Eigen::Index>(tickers.size())) {
    throw DimensionError("ReturnsPanel: values do not match dates/tickers");
  }
  if (values.rows() < 2) throw RangeError("ReturnsPanel: fewer than two rows");
  for (std::size_t t = 1; t < dates.size(); ++t) {
    if (!(dates[t - 1] < dates[t])) {
      throw DataError("ReturnsPanel: dates not strictly increasing at " + dates[t]);
    }
  }
  if (!values.allFinite()) throw DataError("ReturnsPanel: missing or non-finite cells");
}

bool DateRange::contains(const std::string& date) const {
  return (first.empty() || first <= date) && (last.empty() || date <= last);
}

selection::RowRange rows_in(const ReturnsPanel& panel, const DateRange& range) {
  selection::RowRange rows{0, -1};
  bool found = false;
  for (long t = 0; t < panel.rows(); ++t) {
    if (!range.contains(panel.dates[static_cast<std::size_t>(t)])) continue;
    if (!found) rows.first = t;
    rows.last = t;
    found = true;
  }
  if (!found) return {0, -1};
  return rows;
}

bool is_iso_date(const std::string& text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  int y = 0;
  unsigned mo = 0;
  unsigned d = 0;
  auto ok = [&](int from, int len, auto& v) {
    const char* b = text.data() + from;
    auto [p, ec] = std::from_chars(b, b + len, v);
    return ec == std::errc() && p == b + len;
  };
  if (!ok(0, 4, y) || !ok(5, 2, mo) || !ok(8, 2, d)) return false;
  return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{mo},
                                     std::chrono::day{d}}
      .ok();
}

std::string format_double(double value) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw DataError("format_double failed");
  return std::string(buf, p);
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  const char* b = t.data();
  const char* e = b + t.size();
  if (!t.empty() && *b == '+') ++b;
  double v = 0.0;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || t.empty()) throw DataError("'" + text + "' is not a number");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  out.push_back(trim(field));
  return out;
}

IngestResult ingest_prices(std::istream& in, const DateRange& range, MissingPolicy policy) {
  const CsvTable table = read_table(in);
  const std::size_t m = table.header.size() - 1;
  IngestResult result;
  result.panel.tickers.assign(table.header.begin() + 1, table.header.end());

  std::vector<std::string> kept_dates;
  std::vector<std::vector<double>> kept_prices;
  std::vector<std::optional<double>> last_seen(m);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (!range.contains(row[0])) continue;
    ++result.price_rows;
    std::vector<double> prices(m);
    bool complete = true;
    for (std::size_t j = 0; j < m; ++j) {
      const std::string& field = row[j + 1];
      if (is_missing(field)) {
        if (policy == MissingPolicy::kForwardFill && last_seen[j]) {
          prices[j] = *last_seen[j];
        } else {
          complete = false;
        }
        continue;
      }
      double p;
      try {
        p = parse_double(field);
      } catch (const DataError&) {
        throw DataError("line " + std::to_string(table.line_numbers[r]) + ", ticker " +
                        result.panel.tickers[j] + ": '" + field + "' is not a price");
      }
      if (!(p > 0.0) || !std::isfinite(p)) {
        throw DataError("line " + std::to_string(table.line_numbers[r]) + ", ticker " +
                        result.panel.tickers[j] + ": nonpositive price " + field);
      }
      prices[j] = p;
      last_seen[j] = p;
    }
    if (!complete) {
      ++result.dropped_rows;
      result.warnings.push_back("dropped " + row[0] + ": missing price");
      continue;
    }
    if (!kept_dates.empty() && !(kept_dates.back() < row[0])) {
      throw DataError("line " + std::to_string(table.line_numbers[r]) +
                      ": dates must be strictly increasing");
    }
    kept_dates.push_back(row[0]);
    kept_prices.push_back(std::move(prices));
  }
  if (kept_dates.size() < 3) {
    throw RangeError("ingest_prices: fewer than two usable return rows (" +
                     std::to_string(kept_dates.size()) + " complete price rows)");
  }
  const auto rows = static_cast<Eigen::Index>(kept_dates.size()) - 1;
  result.panel.values.resize(rows, static_cast<Eigen::Index>(m));
  for (Eigen::Index t = 0; t < rows; ++t) {
    result.panel.dates.push_back(kept_dates[static_cast<std::size_t>(t) + 1]);
    for (std::size_t j = 0; j < m; ++j) {
      result.panel.values(t, static_cast<Eigen::Index>(j)) =
          std::log(kept_prices[static_cast<std::size_t>(t) + 1][j] /
                   kept_prices[static_cast<std::size_t>(t)][j]);
    }
  }
  result.panel.validate();
  return result;
}

IngestResult ingest_prices(const std::filesystem::path& path, const DateRange& range,
                           MissingPolicy policy) {
  auto in = open_input(path);
  return ingest_prices(in, range, policy);
}

void write_returns(std::ostream& out, const ReturnsPanel& panel) {
  out << "date";
  for (const auto& t : panel.tickers) out << ',' << t;
  out << '\n';
  for (long t = 0; t < panel.rows(); ++t) {
    out << panel.dates[static_cast<std::size_t>(t)];
    for (int j = 0; j < panel.cols(); ++j) out << ',' << format_double(panel.values(t, j));
    out << '\n';
  }
}

void write_returns(const std::filesystem::path& path, const ReturnsPanel& panel) {
  auto out = open_output(path);
  write_returns(out, panel);
}

ReturnsPanel read_returns(std::istream& in, const DateRange& range) {
  const CsvTable table = read_table(in);
  ReturnsPanel panel;
  panel.tickers.assign(table.header.begin() + 1, table.header.end());
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (range.contains(table.rows[r][0])) keep.push_back(r);
  }
  panel.values.resize(static_cast<Eigen::Index>(keep.size()),
                      static_cast<Eigen::Index>(panel.tickers.size()));
  for (std::size_t t = 0; t < keep.size(); ++t) {
    const auto& row = table.rows[keep[t]];
    panel.dates.push_back(row[0]);
    for (std::size_t j = 0; j < panel.tickers.size(); ++j) {
      try {
        panel.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) =
            parse_double(row[j + 1]);
      } catch (const DataError&) {
        throw DataError("line " + std::to_string(table.line_numbers[keep[t]]) + ", ticker " +
                        panel.tickers[j] + ": '" + row[j + 1] + "' is not a return");
      }
    }
  }
  panel.validate();
  return panel;
}

ReturnsPanel read_returns(const std::filesystem::path& path, const DateRange& range) {
  auto in = open_input(path);
  return read_returns(in, range);
}

void write_prices(const std::filesystem::path& path, const ReturnsPanel& panel,
                  const std::string& first_date, double start) {
  auto out = open_output(path);
  out << "date";
  for (const auto& t : panel.tickers) out << ',' << t;
  out << '\n';
  std::vector<double> price(static_cast<std::size_t>(panel.cols()), start);
  out << first_date;
  for (double p : price) out << ',' << format_double(p);
  out << '\n';
  for (long t = 0; t < panel.rows(); ++t) {
    out << panel.dates[static_cast<std::size_t>(t)];
    for (int j = 0; j < panel.cols(); ++j) {
      price[static_cast<std::size_t>(j)] *= std::exp(panel.values(t, j));
      out << ',' << format_double(price[static_cast<std::size_t>(j)]);
    }
    out << '\n';
  }
}

}  // namespace sgdlm::data
