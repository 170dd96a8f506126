#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xrisk/common.hpp"
#include "xrisk/factor_model.hpp"

namespace xrisk {

enum class RiskClass { NonRisky = 0, Risky = 1, Excluded = 2 };

inline const char* to_string(RiskClass c) {
  switch (c) {
    case RiskClass::NonRisky: return "NonRisky";
    case RiskClass::Risky: return "Risky";
    default: return "Excluded";
  }
}

inline RiskClass risk_class_from_string(const std::string& s) {
  if (s == "Risky") return RiskClass::Risky;
  if (s == "NonRisky") return RiskClass::NonRisky;
  if (s == "Excluded") return RiskClass::Excluded;
  throw InputError("unknown risk label: " + s);
}

struct RiskLabel {
  std::string doc_id;
  RiskClass label = RiskClass::Excluded;
  int bin = 0;  // 1..5, 1 = lowest volatility
  double volatility = 0.0;
  std::size_t n_obs = 0;
};

namespace detail {

inline std::vector<VolatilityRecord> sorted_by_volatility(
    std::vector<VolatilityRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const VolatilityRecord& a, const VolatilityRecord& b) {
              if (a.volatility != b.volatility) return a.volatility < b.volatility;
              return a.doc_id < b.doc_id;  // deterministic tie-break
            });
  return records;
}

}  // namespace detail

// Ascending rank r (1-based) over n records gets bin = ceil(5r/n).
// Bin 5 is Risky, bin 1 NonRisky, bins 2-4 Excluded.
inline std::vector<RiskLabel> assign_quintile_labels(
    const std::vector<VolatilityRecord>& records) {
  if (records.size() < 5)
    throw ConfigError("quintile labeling needs at least 5 records, got " +
                      std::to_string(records.size()));
  auto sorted = detail::sorted_by_volatility(records);
  const std::size_t n = sorted.size();
  std::vector<RiskLabel> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t rank = i + 1;
    const int bin = static_cast<int>((5 * rank + n - 1) / n);  // ceil(5r/n)
    RiskClass label = bin == 5   ? RiskClass::Risky
                      : bin == 1 ? RiskClass::NonRisky
                                 : RiskClass::Excluded;
    out.push_back({sorted[i].doc_id, label, bin, sorted[i].volatility,
                   sorted[i].n_obs});
  }
  return out;
}

// Median split: ascending rank <= floor(n/2) is NonRisky, everything else
// Risky. No Excluded labels; bins are 1 and 5 so downstream filters agree.
inline std::vector<RiskLabel> assign_median_labels(
    const std::vector<VolatilityRecord>& records) {
  if (records.size() < 2)
    throw ConfigError("median labeling needs at least 2 records, got " +
                      std::to_string(records.size()));
  auto sorted = detail::sorted_by_volatility(records);
  const std::size_t n = sorted.size();
  const std::size_t cut = n / 2;
  std::vector<RiskLabel> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    bool low = (i + 1) <= cut;
    out.push_back({sorted[i].doc_id,
                   low ? RiskClass::NonRisky : RiskClass::Risky, low ? 1 : 5,
                   sorted[i].volatility, sorted[i].n_obs});
  }
  return out;
}

struct DatasetSplit {
  int test_year = 0;
  std::vector<std::string> train_doc_ids;
  std::vector<std::string> test_doc_ids;
};

struct LabeledDoc {
  std::string doc_id;
  int year = 0;
  RiskClass label = RiskClass::Excluded;
};

// Train = non-Excluded docs from the five years preceding test_year,
// test = non-Excluded docs from test_year. Doc ids come out sorted.
inline DatasetSplit build_year_splits(const std::vector<LabeledDoc>& corpus,
                                      int test_year) {
  std::set<int> years_present;
  for (const auto& d : corpus) years_present.insert(d.year);
  for (int y = test_year - 5; y <= test_year; ++y)
    if (!years_present.count(y))
      throw ConfigError("corpus does not cover year " + std::to_string(y) +
                        " required for test year " + std::to_string(test_year));

  DatasetSplit split;
  split.test_year = test_year;
  for (const auto& d : corpus) {
    if (d.label == RiskClass::Excluded) continue;
    if (d.year == test_year)
      split.test_doc_ids.push_back(d.doc_id);
    else if (d.year >= test_year - 5 && d.year < test_year)
      split.train_doc_ids.push_back(d.doc_id);
  }
  std::sort(split.train_doc_ids.begin(), split.train_doc_ids.end());
  std::sort(split.test_doc_ids.begin(), split.test_doc_ids.end());
  return split;
}

// ---- file interfaces ----------------------------------------------------
// Returns: CSV company_id,date,return
// Factors: CSV date,mkt_excess,smb,hml,rf
// Calendar: one YYYY-MM-DD per line
// Labels:  CSV doc_id,volatility,n_obs,bin,label

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("cannot parse " + what + " value: '" + s + "'");
  }
}

}  // namespace detail

inline std::map<std::string, DailyReturnSeries> load_returns_csv(
    const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read returns file: " + path);
  std::map<std::string, DailyReturnSeries> out;
  std::string line;
  bool header = true;
  while (std::getline(f, line)) {
    if (trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (header) {
      if (cells.size() != 3 || cells[0] != "company_id")
        throw InputError(path + ": expected header company_id,date,return");
      header = false;
      continue;
    }
    if (cells.size() != 3) throw InputError(path + ": bad returns row: " + line);
    auto& series = out[cells[0]];
    series.company_id = cells[0];
    series.observations.emplace_back(parse_date(cells[1]),
                                     detail::parse_double(cells[2], "return"));
  }
  for (auto& [id, series] : out) {
    std::sort(series.observations.begin(), series.observations.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < series.observations.size(); ++i)
      if (!(series.observations[i - 1].first < series.observations[i].first))
        throw InputError("duplicate return date for company " + id);
  }
  return out;
}

inline FactorSeries load_factors_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read factors file: " + path);
  FactorSeries out;
  std::string line;
  bool header = true;
  while (std::getline(f, line)) {
    if (trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (header) {
      if (cells.size() != 5 || cells[0] != "date")
        throw InputError(path + ": expected header date,mkt_excess,smb,hml,rf");
      header = false;
      continue;
    }
    if (cells.size() != 5) throw InputError(path + ": bad factors row: " + line);
    out.observations.push_back({parse_date(cells[0]),
                                detail::parse_double(cells[1], "mkt_excess"),
                                detail::parse_double(cells[2], "smb"),
                                detail::parse_double(cells[3], "hml"),
                                detail::parse_double(cells[4], "rf")});
  }
  std::sort(out.observations.begin(), out.observations.end(),
            [](const auto& a, const auto& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < out.observations.size(); ++i)
    if (!(out.observations[i - 1].date < out.observations[i].date))
      throw InputError(path + ": duplicate factor date");
  return out;
}

inline std::vector<CalendarDate> load_calendar(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read calendar file: " + path);
  std::vector<CalendarDate> out;
  std::string line;
  while (std::getline(f, line)) {
    std::string t = trim(line);
    if (!t.empty()) out.push_back(parse_date(t));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline void save_labels_csv(const std::vector<RiskLabel>& labels,
                            const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write labels file: " + path);
  f << "doc_id,volatility,n_obs,bin,label\n";
  for (const auto& l : labels) {
    std::ostringstream row;
    row.precision(17);
    row << l.doc_id << ',' << l.volatility << ',' << l.n_obs << ',' << l.bin
        << ',' << to_string(l.label);
    f << row.str() << '\n';
  }
}

inline std::vector<RiskLabel> load_labels_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read labels file: " + path);
  std::vector<RiskLabel> out;
  std::string line;
  bool header = true;
  while (std::getline(f, line)) {
    if (trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (header) {
      if (cells.size() != 5 || cells[0] != "doc_id")
        throw InputError(path +
                         ": expected header doc_id,volatility,n_obs,bin,label");
      header = false;
      continue;
    }
    if (cells.size() != 5) throw InputError(path + ": bad labels row: " + line);
    RiskLabel l;
    l.doc_id = cells[0];
    l.volatility = detail::parse_double(cells[1], "volatility");
    l.n_obs = static_cast<std::size_t>(
        detail::parse_double(cells[2], "n_obs"));
    l.bin = static_cast<int>(detail::parse_double(cells[3], "bin"));
    l.label = risk_class_from_string(cells[4]);
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace xrisk
