#pragma once

#include <array>

namespace xrisk {

// Reference statistics of the full-scale 10-K risk dataset this system
// models. Desk-scale runs cannot reproduce them; they serve as fixtures for
// split arithmetic checks and as context rows in reports.

struct YearCounts {
  int year;
  int non_risky;
  int risky;
};

inline constexpr std::array<YearCounts, 11> kReferenceYearCounts = {{
    {2003, 860, 287},
    {2004, 859, 286},
    {2005, 810, 270},
    {2006, 769, 257},
    {2007, 749, 250},
    {2008, 753, 251},
    {2009, 770, 257},
    {2010, 732, 244},
    {2011, 725, 242},
    {2012, 722, 241},
    {2013, 701, 234},
}};

struct SplitSizes {
  int test_year;
  int n_train;
  int n_test;
};

inline constexpr std::array<SplitSizes, 6> kReferenceSplitSizes = {{
    {2008, 5397, 1004},
    {2009, 5254, 1027},
    {2010, 5136, 976},
    {2011, 5032, 967},
    {2012, 4973, 963},
    {2013, 4937, 935},
}};

// Full-scale benchmark scores (F1 on the risky class, Kendall tau, Spearman
// rho) for context when formatting desk-scale reports.
struct BenchmarkRow {
  int test_year;
  double f1;
  double tau;
  double rho;
};

inline constexpr std::array<BenchmarkRow, 6> kFullScaleMainModel = {{
    {2008, 0.65, 0.47, 0.58},
    {2009, 0.71, 0.52, 0.64},
    {2010, 0.74, 0.53, 0.65},
    {2011, 0.84, 0.56, 0.68},
    {2012, 0.81, 0.55, 0.67},
    {2013, 0.83, 0.54, 0.67},
}};

inline constexpr std::array<BenchmarkRow, 6> kFullScaleTfidfBaseline = {{
    {2008, 0.43, 0.44, 0.54},
    {2009, 0.48, 0.44, 0.54},
    {2010, 0.51, 0.47, 0.57},
    {2011, 0.55, 0.46, 0.56},
    {2012, 0.47, 0.44, 0.54},
    {2013, 0.44, 0.45, 0.55},
}};

}  // namespace xrisk
