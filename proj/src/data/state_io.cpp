#include "sgdlm/data/state_io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "sgdlm/core/errors.hpp"

namespace sgdlm::data {

using nlohmann::json;

namespace {

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

json ng_json(const NormalGamma& ng) {
  json r = json::array();
  for (Eigen::Index i = 0; i < ng.scale_matrix.rows(); ++i) {
    r.push_back(vector_json(ng.scale_matrix.row(i).transpose()));
  }
  return {{"a", vector_json(ng.location)}, {"R", r}, {"r", ng.dof}, {"c", ng.variance_estimate}};
}

NormalGamma ng_from(const json& j) {
  NormalGamma ng;
  ng.location = vector_from(j.at("a"));
  const auto& r = j.at("R");
  const auto p = static_cast<Eigen::Index>(r.size());
  ng.scale_matrix.resize(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto& row = r[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != p) throw DimensionError("state: R is not square");
    for (Eigen::Index k = 0; k < p; ++k) ng.scale_matrix(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  ng.dof = j.at("r").get<double>();
  ng.variance_estimate = j.at("c").get<double>();
  ng.validate();
  return ng;
}

json line(const char* type) { return {{"version", kStateVersion}, {"type", type}}; }

void check_version(const json& j, const std::filesystem::path& path) {
  if (!j.contains("version") || j.at("version").get<int>() != kStateVersion) {
    throw PipelineError(path.string() + ": unsupported state version");
  }
}

std::uint64_t parse_hex(const std::string& s) { return std::stoull(s, nullptr, 16); }

std::string dump(const json& j) { return j.dump() + '\n'; }

}  // namespace

std::string hex64(std::uint64_t value) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

void write_phase2_state(const std::filesystem::path& path, const Phase2State& state) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw PipelineError("cannot write " + tmp);
    json head = line("phase2");
    head["config_hash"] = hex64(state.config_hash);
    head["tickers"] = state.tickers;
    head["m"] = state.structure.m;
    head["k"] = state.structure.k;
    head["parents"] = state.structure.parents;
    head["beta"] = state.discounts.beta;
    head["delta_phi"] = state.discounts.delta_phi;
    head["delta_gamma"] = state.discounts.delta_gamma;
    head["last_row"] = state.last_row;
    head["last_date"] = state.last_date;
    out << dump(head);
    for (std::size_t i = 0; i < state.priors.size(); ++i) {
      json rec = line("prior");
      rec["series"] = i;
      rec.update(ng_json(state.priors[i]));
      out << dump(rec);
    }
    if (!out) throw PipelineError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Phase2State read_phase2_state(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("missing " + path.string() + "; run phase2 first");
  Phase2State state;
  std::string text;
  bool have_head = false;
  try {
    while (std::getline(in, text)) {
      if (text.empty()) continue;
      const json j = json::parse(text);
      check_version(j, path);
      const auto type = j.at("type").get<std::string>();
      if (type == "phase2") {
        state.config_hash = parse_hex(j.at("config_hash").get<std::string>());
        state.tickers = j.at("tickers").get<std::vector<std::string>>();
        state.structure.m = j.at("m").get<int>();
        state.structure.k = j.at("k").get<int>();
        state.structure.parents = j.at("parents").get<std::vector<std::vector<int>>>();
        state.discounts = {j.at("beta").get<double>(), j.at("delta_phi").get<double>(),
                           j.at("delta_gamma").get<double>()};
        state.last_row = j.at("last_row").get<long>();
        state.last_date = j.at("last_date").get<std::string>();
        have_head = true;
      } else if (type == "prior") {
        if (j.at("series").get<std::size_t>() != state.priors.size()) {
          throw PipelineError(path.string() + ": priors out of order");
        }
        state.priors.push_back(ng_from(j));
      }
    }
  } catch (const json::exception& e) {
    throw PipelineError(path.string() + ": malformed state (" + e.what() + ")");
  }
  if (!have_head || static_cast<int>(state.priors.size()) != state.structure.m) {
    throw PipelineError(path.string() + ": incomplete phase-2 state");
  }
  state.structure.validate();
  state.discounts.validate();
  return state;
}

std::vector<DayRecord> StateJournal::read(const std::filesystem::path& path, JournalHeader* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();

  std::vector<DayRecord> days;
  JournalHeader head;
  bool have_head = false;
  std::map<int, NormalGamma> pending;
  long pending_row = -1;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) break;  // torn final line
    const std::string text = content.substr(pos, nl - pos);
    pos = nl + 1;
    if (text.empty()) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception&) {
      if (pos >= content.size()) break;
      throw PipelineError(path.string() + ": corrupt line in state journal");
    }
    try {
      check_version(j, path);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        head.config_hash = parse_hex(j.at("config_hash").get<std::string>());
        head.seed = j.at("seed").get<std::uint64_t>();
        head.m = j.at("m").get<int>();
        head.k = j.at("k").get<int>();
        have_head = true;
      } else if (type == "series") {
        const long row = j.at("row").get<long>();
        if (row != pending_row) {
          pending.clear();
          pending_row = row;
        }
        pending[j.at("series").get<int>()] = ng_from(j);
      } else if (type == "day") {
        DayRecord day;
        day.row = j.at("row").get<long>();
        day.date = j.at("date").get<std::string>();
        if (day.row != pending_row || static_cast<int>(pending.size()) != head.m) {
          throw PipelineError(path.string() + ": day " + day.date + " lacks series records");
        }
        for (auto& [i, ng] : pending) day.posteriors.push_back(std::move(ng));
        pending.clear();
        pending_row = -1;
        day.diagnostics.ess = j.at("ess").get<double>();
        day.diagnostics.kl = j.at("kl").get<double>();
        day.diagnostics.kl_bound = j.at("kl_bound").get<double>();
        day.diagnostics.sample_size = j.at("N").get<Eigen::Index>();
        day.y_hat = vector_from(j.at("y_hat"));
        day.variance = vector_from(j.at("variance"));
        day.observed = vector_from(j.at("observed"));
        days.push_back(std::move(day));
      }
    } catch (const json::exception& e) {
      throw PipelineError(path.string() + ": malformed record (" + e.what() + ")");
    }
  }
  if (!have_head) throw PipelineError(path.string() + ": journal has no header");
  if (header != nullptr) *header = head;
  return days;
}

StateJournal::StateJournal(std::filesystem::path path, const JournalHeader& header)
    : path_(std::move(path)), header_(header) {
  if (std::filesystem::exists(path_)) {
    JournalHeader found;
    days_ = read(path_, &found);
    if (found.config_hash != header.config_hash || found.seed != header.seed ||
        found.m != header.m || found.k != header.k) {
      throw PipelineError(path_.string() +
                          " was written by a different configuration; rerun with --fresh");
    }
  }
  // Rewrite the committed prefix so torn trailing lines are gone.
  const auto tmp = path_.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw PipelineError("cannot write " + tmp);
    json head = line("header");
    head["config_hash"] = hex64(header.config_hash);
    head["seed"] = header.seed;
    head["m"] = header.m;
    head["k"] = header.k;
    out << dump(head);
  }
  std::filesystem::rename(tmp, path_);
  const auto committed = std::move(days_);
  days_.clear();
  for (const auto& day : committed) append(day);
}

void StateJournal::append(const DayRecord& day) {
  std::string block;
  for (std::size_t i = 0; i < day.posteriors.size(); ++i) {
    json rec = line("series");
    rec["row"] = day.row;
    rec["date"] = day.date;
    rec["series"] = i;
    rec.update(ng_json(day.posteriors[i]));
    block += dump(rec);
  }
  json rec = line("day");
  rec["row"] = day.row;
  rec["date"] = day.date;
  rec["ess"] = day.diagnostics.ess;
  rec["kl"] = day.diagnostics.kl;
  rec["kl_bound"] = day.diagnostics.kl_bound;
  rec["N"] = day.diagnostics.sample_size;
  rec["y_hat"] = vector_json(day.y_hat);
  rec["variance"] = vector_json(day.variance);
  rec["observed"] = vector_json(day.observed);
  block += dump(rec);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw PipelineError("cannot append to " + path_.string());
  out << block;
  out.flush();
  if (!out) throw PipelineError("write failed: " + path_.string());
  days_.push_back(day);
}

}  // namespace sgdlm::data
