#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "xrisk/common.hpp"
#include "xrisk/encode.hpp"

namespace xrisk {

struct DailyReturnSeries {
  std::string company_id;
  std::vector<std::pair<CalendarDate, double>> observations;
};

struct FactorObservation {
  CalendarDate date;
  double mkt_excess = 0.0;
  double smb = 0.0;
  double hml = 0.0;
  double rf = 0.0;
};

struct FactorSeries {
  std::vector<FactorObservation> observations;
};

struct ThreeFactorFit {
  double alpha = 0.0;
  double beta_mkt = 0.0;
  double beta_smb = 0.0;
  double beta_hml = 0.0;
  std::vector<double> residuals;
  double rmse = 0.0;
  std::size_t n_obs = 0;
};

namespace detail {

// Householder QR least squares for a skinny column-major matrix. Throws
// NumericError when the design matrix is rank deficient.
inline std::vector<double> qr_least_squares(std::vector<double>& a,
                                            std::vector<double>& y,
                                            std::size_t n, std::size_t k) {
  auto at = [&](std::size_t r, std::size_t c) -> double& { return a[c * n + r]; };
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) throw NumericError("singular design matrix: all zeros");

  for (std::size_t c = 0; c < k; ++c) {
    double norm = 0.0;
    for (std::size_t r = c; r < n; ++r) norm += at(r, c) * at(r, c);
    norm = std::sqrt(norm);
    if (norm <= 1e-12 * scale * std::sqrt(static_cast<double>(n)))
      throw NumericError("singular design matrix: rank deficient at column " +
                         std::to_string(c));
    if (at(c, c) > 0) norm = -norm;
    // Householder vector stored in place, v = x - norm*e1 normalized so v[0]=1
    double v0 = at(c, c) - norm;
    for (std::size_t r = c + 1; r < n; ++r) at(r, c) /= v0;
    at(c, c) = norm;
    double beta = -v0 / norm;
    // apply reflector to remaining columns and to y
    for (std::size_t cc = c + 1; cc < k; ++cc) {
      double s = at(c, cc);
      for (std::size_t r = c + 1; r < n; ++r) s += at(r, c) * at(r, cc);
      s *= beta;
      at(c, cc) -= s;
      for (std::size_t r = c + 1; r < n; ++r) at(r, cc) -= s * at(r, c);
    }
    double s = y[c];
    for (std::size_t r = c + 1; r < n; ++r) s += at(r, c) * y[r];
    s *= beta;
    y[c] -= s;
    for (std::size_t r = c + 1; r < n; ++r) y[r] -= s * at(r, c);
  }
  // back substitution on R (upper triangle, diagonal in at(c,c))
  std::vector<double> x(k, 0.0);
  for (std::size_t c = k; c-- > 0;) {
    double s = y[c];
    for (std::size_t cc = c + 1; cc < k; ++cc) s -= at(c, cc) * x[cc];
    x[c] = s / at(c, c);
  }
  return x;
}

}  // namespace detail

// OLS of excess returns on intercept + (mkt_excess, smb, hml).
// rmse = sqrt(mean of squared residuals), deliberately 1/n. Factor columns
// that are identically zero are dropped from the solve (their beta is 0);
// other rank deficiencies are an error.
inline ThreeFactorFit fit_three_factor(
    const std::vector<double>& excess_returns,
    const std::vector<std::array<double, 3>>& factors) {
  const std::size_t n = excess_returns.size();
  if (factors.size() != n)
    throw InputError("fit_three_factor: returns and factors lengths differ (" +
                     std::to_string(n) + " vs " + std::to_string(factors.size()) + ")");
  if (n < 5)
    throw InputError("fit_three_factor: need at least 5 observations, got " +
                     std::to_string(n));

  std::vector<std::size_t> live;  // factor columns with any signal
  for (std::size_t c = 0; c < 3; ++c) {
    bool nonzero = false;
    for (std::size_t r = 0; r < n && !nonzero; ++r) nonzero = factors[r][c] != 0.0;
    if (nonzero) live.push_back(c);
  }

  const std::size_t k = 1 + live.size();
  std::vector<double> design(n * k);
  for (std::size_t r = 0; r < n; ++r) design[r] = 1.0;
  for (std::size_t c = 0; c < live.size(); ++c)
    for (std::size_t r = 0; r < n; ++r)
      design[(c + 1) * n + r] = factors[r][live[c]];
  std::vector<double> rhs = excess_returns;
  std::vector<double> solved = detail::qr_least_squares(design, rhs, n, k);

  std::array<double, 4> coef = {solved[0], 0.0, 0.0, 0.0};
  for (std::size_t c = 0; c < live.size(); ++c) coef[live[c] + 1] = solved[c + 1];

  ThreeFactorFit fit;
  fit.alpha = coef[0];
  fit.beta_mkt = coef[1];
  fit.beta_smb = coef[2];
  fit.beta_hml = coef[3];
  fit.n_obs = n;
  fit.residuals.resize(n);
  double ss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double fitted = coef[0] + coef[1] * factors[r][0] + coef[2] * factors[r][1] +
                    coef[3] * factors[r][2];
    fit.residuals[r] = excess_returns[r] - fitted;
    ss += fit.residuals[r] * fit.residuals[r];
  }
  fit.rmse = std::sqrt(ss / static_cast<double>(n));
  if (!std::isfinite(fit.rmse))
    throw NumericError("fit_three_factor produced a non-finite rmse");
  return fit;
}

struct VolatilityRecord {
  std::string doc_id;
  double volatility = 0.0;
  std::size_t n_obs = 0;
};

inline constexpr int kWindowStartOffset = 6;
inline constexpr int kWindowEndOffset = 252;
inline constexpr std::size_t kMinObservations = 60;

// Post-event window: trading days at offsets +6..+252 after the filing date,
// offsets counted on the supplied trading calendar. The base index is the
// last trading day on or before the filing date. Returns nullopt (the
// insufficiency signal) when fewer than 60 aligned observations exist.
inline std::optional<VolatilityRecord> post_event_volatility(
    const std::string& doc_id, const CalendarDate& filing_date,
    const DailyReturnSeries& returns, const FactorSeries& factors,
    const std::vector<CalendarDate>& trading_calendar) {
  if (trading_calendar.empty())
    throw InputError("post_event_volatility: empty trading calendar");

  // base = last calendar index with date <= filing_date, or -1
  long base = -1;
  for (std::size_t i = 0; i < trading_calendar.size(); ++i) {
    if (trading_calendar[i] <= filing_date)
      base = static_cast<long>(i);
    else
      break;
  }

  std::map<CalendarDate, double> ret_by_date;
  for (const auto& [d, r] : returns.observations) ret_by_date[d] = r;
  std::map<CalendarDate, FactorObservation> fac_by_date;
  for (const auto& f : factors.observations) fac_by_date[f.date] = f;

  std::vector<double> excess;
  std::vector<std::array<double, 3>> design;
  for (int off = kWindowStartOffset; off <= kWindowEndOffset; ++off) {
    long idx = base + off;
    if (idx < 0 || idx >= static_cast<long>(trading_calendar.size())) continue;
    const CalendarDate& d = trading_calendar[static_cast<std::size_t>(idx)];
    auto r = ret_by_date.find(d);
    auto f = fac_by_date.find(d);
    if (r == ret_by_date.end() || f == fac_by_date.end()) continue;
    excess.push_back(r->second - f->second.rf);
    design.push_back({f->second.mkt_excess, f->second.smb, f->second.hml});
  }
  if (excess.size() < kMinObservations) return std::nullopt;

  ThreeFactorFit fit = fit_three_factor(excess, design);
  return VolatilityRecord{doc_id, fit.rmse, fit.n_obs};
}

}  // namespace xrisk
