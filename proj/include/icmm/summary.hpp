#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "icmm/data.hpp"
#include "icmm/gibbs.hpp"

namespace icmm {

// Posterior mean, sd and 95% central credibility interval (empirical 0.025
// and 0.975 quantiles) of one scalar parameter.
struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double cci_low = 0.0;
  double cci_high = 0.0;
};

namespace detail {

// Type-7 empirical quantile: linear interpolation between closest ranks.
inline double quantile_type7(std::vector<double>& sorted_scratch, double p) {
  std::sort(sorted_scratch.begin(), sorted_scratch.end());
  const std::size_t n = sorted_scratch.size();
  if (n == 1) return sorted_scratch[0];
  const double h = static_cast<double>(n - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted_scratch[lo] + frac * (sorted_scratch[hi] - sorted_scratch[lo]);
}

inline ParameterSummary summarize_column(std::string name,
                                         std::vector<double> values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double x : values) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : values) ss += (x - mean) * (x - mean);
  ParameterSummary s;
  s.name = std::move(name);
  s.mean = mean;
  s.sd = (values.size() > 1) ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.cci_low = quantile_type7(values, 0.025);
  s.cci_high = quantile_type7(values, 0.975);
  return s;
}

}  // namespace detail

// Per-parameter summaries: every coefficient, then sigma2, then the distinct
// entries of V reported as Var(u_r) / Cov(u_r,u_s).
inline std::vector<ParameterSummary> summarize(const SampleStore& store) {
  if (store.rows() < 1) throw ConfigError("summarize: empty store");
  std::vector<ParameterSummary> out;
  const long rows = store.rows();
  std::vector<double> col(rows);

  for (int p = 0; p < store.p(); ++p) {
    for (long i = 0; i < rows; ++i) col[i] = store.beta_draws()(i, p);
    out.push_back(detail::summarize_column(store.meta().coef_names[p], col));
  }
  for (long i = 0; i < rows; ++i) col[i] = store.sigma2_draws()(i);
  out.push_back(detail::summarize_column("sigma2", col));

  const auto vnames = v_entry_names(store.r_dim());
  for (std::size_t c = 0; c < vnames.size(); ++c) {
    for (long i = 0; i < rows; ++i)
      col[i] = store.v_draws_packed()(i, static_cast<int>(c));
    out.push_back(detail::summarize_column(vnames[c], col));
  }
  return out;
}

// Linear combination of coefficients, evaluated per stored draw.
struct DerivedExpression {
  std::string name;
  std::vector<std::pair<std::string, double>> weights;  // (coefficient, a_i)
  double constant = 0.0;
};

inline ParameterSummary summarize_expression(const SampleStore& store,
                                             const DerivedExpression& expr) {
  if (store.rows() < 1) throw ConfigError("summarize_expression: empty store");
  const auto& names = store.meta().coef_names;
  std::vector<std::pair<int, double>> idx;
  bool any_nonzero = false;
  for (const auto& [name, w] : expr.weights) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
      throw ConfigError("expression '" + expr.name + "': unknown coefficient '" +
                        name + "'");
    idx.emplace_back(static_cast<int>(it - names.begin()), w);
    any_nonzero |= (w != 0.0);
  }
  if (!any_nonzero)
    throw ConfigError("expression '" + expr.name + "' has no nonzero weight");

  const long rows = store.rows();
  std::vector<double> col(rows);
  for (long i = 0; i < rows; ++i) {
    double v = expr.constant;
    for (const auto& [p, w] : idx) v += w * store.beta_draws()(i, p);
    col[i] = v;
  }
  return detail::summarize_column(expr.name, col);
}

// Rescale a summary to original predictor units using the transform record
// frozen at build time: a scale2sd coefficient divides by 2*sd(source), an
// interaction of scaled terms by the product of its operands' factors.
// Indicator terms have no such mapping.
inline ParameterSummary back_transform(const ParameterSummary& summary,
                                       const TransformRecord& record) {
  if (!std::isfinite(record.slope))
    throw DataError("cannot back-transform '" + summary.name + "': " +
                    transform_kind_name(record.kind) +
                    " terms have no original-unit coefficient");
  ParameterSummary out = summary;
  out.mean *= record.slope;
  out.sd *= record.slope;
  out.cci_low *= record.slope;
  out.cci_high *= record.slope;
  if (out.cci_low > out.cci_high) std::swap(out.cci_low, out.cci_high);
  return out;
}

// Split-chain potential scale reduction, one value per stored scalar. Values
// near 1 indicate mixing; anything above ~1.05 deserves a longer run.
inline std::vector<std::pair<std::string, double>> psrf(
    const std::vector<SampleStore>& chains) {
  if (chains.size() < 2) throw ConfigError("psrf needs at least 2 chains");
  const long len = chains.front().rows();
  for (const auto& c : chains)
    if (c.rows() != len) throw ConfigError("psrf: mismatched chain lengths");
  if (len < 10) throw ConfigError("psrf: chains shorter than 10 draws");

  const int p = chains.front().p();
  const int vcols = static_cast<int>(chains.front().v_draws_packed().cols());
  const long half = len / 2;
  const long m = 2 * static_cast<long>(chains.size());

  std::vector<std::string> names = chains.front().meta().coef_names;
  names.push_back("sigma2");
  for (const auto& vn : v_entry_names(chains.front().r_dim()))
    names.push_back(vn);

  auto column = [&](const SampleStore& s, int k, long offset,
                    long count) -> VectorXd {
    if (k < p) return s.beta_draws().col(k).segment(offset, count);
    if (k == p) return s.sigma2_draws().segment(offset, count);
    return s.v_draws_packed().col(k - p - 1).segment(offset, count);
  };

  std::vector<std::pair<std::string, double>> out;
  for (int k = 0; k < p + 1 + vcols; ++k) {
    std::vector<double> seg_mean, seg_var;
    for (const auto& c : chains) {
      for (int half_id = 0; half_id < 2; ++half_id) {
        const VectorXd seg = column(c, k, half_id * half, half);
        const double mu = seg.mean();
        seg_mean.push_back(mu);
        seg_var.push_back((seg.array() - mu).square().sum() /
                          static_cast<double>(half - 1));
      }
    }
    double grand = 0.0;
    for (double x : seg_mean) grand += x;
    grand /= static_cast<double>(m);
    double b = 0.0;
    for (double x : seg_mean) b += (x - grand) * (x - grand);
    b *= static_cast<double>(half) / static_cast<double>(m - 1);
    double w = 0.0;
    for (double x : seg_var) w += x;
    w /= static_cast<double>(m);

    double rhat;
    const double var_plus =
        (static_cast<double>(half - 1) / static_cast<double>(half)) * w +
        b / static_cast<double>(half);
    if (w > 0.0)
      rhat = std::sqrt(var_plus / w);
    else
      rhat = (var_plus > 0.0) ? std::numeric_limits<double>::infinity() : 1.0;
    out.emplace_back(names[k], rhat);
  }
  return out;
}

struct HistogramBin {
  double left;
  double right;
  long count;
};

// Equal-width binned counts, the headless stand-in for posterior histograms.
inline std::vector<HistogramBin> histogram(const std::vector<double>& values,
                                           int nbins = 50) {
  if (values.empty()) throw ConfigError("histogram: no values");
  if (nbins < 1) throw ConfigError("histogram: nbins must be >= 1");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<HistogramBin> bins;
  if (lo == hi) {
    bins.push_back({lo, hi, static_cast<long>(values.size())});
    return bins;
  }
  const double width = (hi - lo) / nbins;
  bins.resize(nbins);
  for (int b = 0; b < nbins; ++b)
    bins[b] = {lo + b * width, lo + (b + 1) * width, 0};
  bins.back().right = hi;
  for (double v : values) {
    int b = static_cast<int>((v - lo) / width);
    if (b >= nbins) b = nbins - 1;
    ++bins[b].count;
  }
  return bins;
}

}  // namespace icmm
