#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>

#include "xrisk/labeling.hpp"
#include "xrisk/reference_data.hpp"

using namespace xrisk;

namespace {

std::vector<VolatilityRecord> records_with(const std::vector<double>& vols) {
  std::vector<VolatilityRecord> out;
  for (std::size_t i = 0; i < vols.size(); ++i)
    out.push_back({"doc" + std::to_string(i), vols[i], 247});
  return out;
}

std::size_t count_label(const std::vector<RiskLabel>& labels, RiskClass c) {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(),
                    [&](const RiskLabel& l) { return l.label == c; }));
}

}  // namespace

TEST(QuintileLabels, EvenSplitOfTen) {
  auto labels = assign_quintile_labels(
      records_with({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}));
  EXPECT_EQ(count_label(labels, RiskClass::Risky), 2u);
  EXPECT_EQ(count_label(labels, RiskClass::NonRisky), 2u);
  EXPECT_EQ(count_label(labels, RiskClass::Excluded), 6u);
}

TEST(QuintileLabels, FiveRecordsOnePerBin) {
  auto labels = assign_quintile_labels(records_with({1, 2, 3, 4, 5}));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(labels[i].bin, int(i) + 1);
  EXPECT_EQ(count_label(labels, RiskClass::Risky), 1u);
  EXPECT_EQ(labels[4].label, RiskClass::Risky);
  EXPECT_EQ(labels[0].label, RiskClass::NonRisky);
}

TEST(QuintileLabels, TooFewRecordsRejected) {
  EXPECT_THROW(assign_quintile_labels(records_with({1, 2, 3, 4})), ConfigError);
}

TEST(QuintileLabels, BinSizesDifferByAtMostOne) {
  for (std::size_t n : {5u, 7u, 11u, 23u, 100u, 101u, 104u}) {
    std::vector<double> vols;
    for (std::size_t i = 0; i < n; ++i) vols.push_back(0.01 * double(i + 1));
    auto labels = assign_quintile_labels(records_with(vols));
    std::array<std::size_t, 6> bin_counts{};
    for (const auto& l : labels) bin_counts[static_cast<std::size_t>(l.bin)]++;
    std::size_t lo = n, hi = 0, total = 0;
    for (int b = 1; b <= 5; ++b) {
      lo = std::min(lo, bin_counts[b]);
      hi = std::max(hi, bin_counts[b]);
      total += bin_counts[b];
    }
    EXPECT_LE(hi - lo, 1u) << "n=" << n;
    EXPECT_EQ(total, n);
  }
}

TEST(QuintileLabels, ScaleCovariant) {
  std::vector<double> vols = {0.3, 0.11, 0.92, 0.4, 0.05, 0.66, 0.21};
  auto a = assign_quintile_labels(records_with(vols));
  for (auto& v : vols) v *= 37.5;
  auto b = assign_quintile_labels(records_with(vols));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].doc_id, b[i].doc_id);
    EXPECT_EQ(a[i].bin, b[i].bin);
    EXPECT_EQ(a[i].label, b[i].label);
  }
}

TEST(QuintileLabels, TieBreakByDocId) {
  std::vector<VolatilityRecord> recs;
  for (int i = 4; i >= 0; --i)
    recs.push_back({"doc" + std::to_string(i), 0.5, 100});
  auto labels = assign_quintile_labels(recs);
  // alphabetical doc ids get ascending ranks
  EXPECT_EQ(labels[0].doc_id, "doc0");
  EXPECT_EQ(labels[0].bin, 1);
  EXPECT_EQ(labels[4].doc_id, "doc4");
  EXPECT_EQ(labels[4].bin, 5);
}

TEST(MedianLabels, EvenCount) {
  auto labels = assign_median_labels(records_with({1, 2, 3, 4}));
  EXPECT_EQ(count_label(labels, RiskClass::NonRisky), 2u);
  EXPECT_EQ(count_label(labels, RiskClass::Risky), 2u);
  EXPECT_EQ(count_label(labels, RiskClass::Excluded), 0u);
}

TEST(MedianLabels, OddCountUsesFloor) {
  auto labels = assign_median_labels(records_with({1, 2, 3, 4, 5}));
  EXPECT_EQ(count_label(labels, RiskClass::NonRisky), 2u);
  EXPECT_EQ(count_label(labels, RiskClass::Risky), 3u);
}

TEST(MedianLabels, AllEqualIsDeterministic) {
  auto a = assign_median_labels(records_with({0.5, 0.5, 0.5, 0.5}));
  auto b = assign_median_labels(records_with({0.5, 0.5, 0.5, 0.5}));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].doc_id, b[i].doc_id);
    EXPECT_EQ(a[i].label, b[i].label);
  }
  EXPECT_EQ(count_label(a, RiskClass::NonRisky), 2u);
}

TEST(MedianLabels, TooFewRecordsRejected) {
  EXPECT_THROW(assign_median_labels(records_with({1})), ConfigError);
}

namespace {

// One LabeledDoc per company/year using the reference per-year counts.
std::vector<LabeledDoc> reference_corpus() {
  std::vector<LabeledDoc> corpus;
  for (const auto& row : kReferenceYearCounts) {
    for (int i = 0; i < row.non_risky; ++i)
      corpus.push_back({"y" + std::to_string(row.year) + "_nr_" + std::to_string(i),
                        row.year, RiskClass::NonRisky});
    for (int i = 0; i < row.risky; ++i)
      corpus.push_back({"y" + std::to_string(row.year) + "_r_" + std::to_string(i),
                        row.year, RiskClass::Risky});
  }
  return corpus;
}

}  // namespace

TEST(YearSplits, ReproducesReferenceSplitSizes) {
  auto corpus = reference_corpus();
  for (const auto& row : kReferenceSplitSizes) {
    auto split = build_year_splits(corpus, row.test_year);
    EXPECT_EQ(split.train_doc_ids.size(), static_cast<std::size_t>(row.n_train))
        << "test year " << row.test_year;
    EXPECT_EQ(split.test_doc_ids.size(), static_cast<std::size_t>(row.n_test))
        << "test year " << row.test_year;
  }
}

TEST(YearSplits, ReferenceTableArithmeticIsConsistent) {
  // the six split rows are exactly the rolling five-year sums of the
  // per-year counts
  auto total_for_year = [](int year) {
    for (const auto& row : kReferenceYearCounts)
      if (row.year == year) return row.non_risky + row.risky;
    return -1;
  };
  for (const auto& row : kReferenceSplitSizes) {
    int train = 0;
    for (int y = row.test_year - 5; y < row.test_year; ++y)
      train += total_for_year(y);
    EXPECT_EQ(train, row.n_train);
    EXPECT_EQ(total_for_year(row.test_year), row.n_test);
  }
}

TEST(YearSplits, ToyCorpusSingleCompany) {
  std::vector<LabeledDoc> corpus;
  for (int y = 2003; y <= 2008; ++y)
    corpus.push_back({"doc" + std::to_string(y), y, RiskClass::Risky});
  auto split = build_year_splits(corpus, 2008);
  EXPECT_EQ(split.train_doc_ids.size(), 5u);
  EXPECT_EQ(split.test_doc_ids.size(), 1u);
  EXPECT_EQ(split.test_doc_ids[0], "doc2008");
}

TEST(YearSplits, ExcludedDocsNeverAppear) {
  std::vector<LabeledDoc> corpus;
  for (int y = 2003; y <= 2008; ++y) {
    corpus.push_back({"r" + std::to_string(y), y, RiskClass::Risky});
    corpus.push_back({"x" + std::to_string(y), y, RiskClass::Excluded});
  }
  auto split = build_year_splits(corpus, 2008);
  EXPECT_EQ(split.train_doc_ids.size(), 5u);
  EXPECT_EQ(split.test_doc_ids.size(), 1u);
  for (const auto& id : split.train_doc_ids) EXPECT_EQ(id[0], 'r');
}

TEST(YearSplits, DisjointAndExhaustive) {
  auto corpus = reference_corpus();
  auto split = build_year_splits(corpus, 2010);
  std::set<std::string> train(split.train_doc_ids.begin(),
                              split.train_doc_ids.end());
  std::set<std::string> test(split.test_doc_ids.begin(),
                             split.test_doc_ids.end());
  for (const auto& id : test) EXPECT_EQ(train.count(id), 0u);
  std::size_t expected = 0;
  for (const auto& d : corpus)
    if (d.label != RiskClass::Excluded && d.year >= 2005 && d.year <= 2010)
      ++expected;
  EXPECT_EQ(train.size() + test.size(), expected);
}

TEST(YearSplits, MissingYearCoverageRejected) {
  std::vector<LabeledDoc> corpus;
  for (int y = 2004; y <= 2008; ++y)  // 2003 missing
    corpus.push_back({"doc" + std::to_string(y), y, RiskClass::Risky});
  EXPECT_THROW(build_year_splits(corpus, 2008), ConfigError);
}

TEST(LabelsCsv, RoundTrip) {
  namespace fs = std::filesystem;
  auto labels = assign_quintile_labels(
      records_with({0.011, 0.032, 0.023, 0.054, 0.045, 0.06, 0.07}));
  std::string path = fs::temp_directory_path() / "xrisk_labels_test.csv";
  save_labels_csv(labels, path);
  auto loaded = load_labels_csv(path);
  ASSERT_EQ(loaded.size(), labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    EXPECT_EQ(loaded[i].doc_id, labels[i].doc_id);
    EXPECT_EQ(loaded[i].label, labels[i].label);
    EXPECT_EQ(loaded[i].bin, labels[i].bin);
    EXPECT_DOUBLE_EQ(loaded[i].volatility, labels[i].volatility);
  }
  std::remove(path.c_str());
}
