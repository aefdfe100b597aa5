#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgdlm/dlm/filter.hpp"
#include "sgdlm/model/coupled_model.hpp"
#include "sgdlm/model/parent_structure.hpp"

namespace sgdlm::data {

// Both state files are JSON lines; every line carries "version" and "type".
inline constexpr int kStateVersion = 1;

// Everything phase 3 needs from phase 2.
struct Phase2State {
  std::uint64_t config_hash = 0;
  std::vector<std::string> tickers;
  ParentStructure structure;
  dlm::DiscountSet discounts;
  long last_row = -1;  // panel row of the final phase-2 day
  std::string last_date;
  NormalGammaSet priors;  // priors for the day after last_row
};

void write_phase2_state(const std::filesystem::path& path, const Phase2State& state);
Phase2State read_phase2_state(const std::filesystem::path& path);

// One forecasting day: the decoupled posteriors plus the forecast and
// recoupling diagnostics.
struct DayRecord {
  long row = 0;
  std::string date;
  NormalGammaSet posteriors;
  DayDiagnostics diagnostics;
  Vector y_hat;
  Vector variance;
  Vector observed;
};

struct JournalHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  int m = 0;
  int k = 0;
};

// Append-only day log for phase 3. A day counts only once its closing "day"
// line is on disk, so a run killed mid-write loses at most that day.
class StateJournal {
 public:
  // Opens `path`, keeping the committed days when it exists and its header
  // matches; otherwise starts a new file.
  StateJournal(std::filesystem::path path, const JournalHeader& header);

  [[nodiscard]] const std::vector<DayRecord>& days() const { return days_; }
  void append(const DayRecord& day);

  static std::vector<DayRecord> read(const std::filesystem::path& path, JournalHeader* header = nullptr);

 private:
  std::filesystem::path path_;
  JournalHeader header_;
  std::vector<DayRecord> days_;
};

std::string hex64(std::uint64_t value);

}  // namespace sgdlm::data
