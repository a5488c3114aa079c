#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "icmm/constraints.hpp"
#include "icmm/gibbs.hpp"

namespace icmm {

struct ProportionEstimate {
  std::string hypothesis;
  double proportion = 0.0;
  long n_draws = 0;
  double mc_se = 0.0;        // batch means for chain draws, binomial otherwise
  double mc_se_naive = 0.0;  // plain binomial
};

// Proportion of encompassing-prior beta draws satisfying each hypothesis
// (1/c_s). All hypotheses are evaluated on one shared draw stream, which
// makes nested proportions exactly monotone and reduces cross-hypothesis
// Monte Carlo noise. Draws come from sample_prior_beta in blocks.
inline std::vector<ProportionEstimate> prior_proportions(
    const EncompassingPrior& prior, const std::vector<ValidatedHypothesis>& hyps,
    long n, RngStream& rng) {
  if (n < 1) throw ConfigError("prior_proportions: n must be >= 1");
  std::vector<long> counts(hyps.size(), 0);
  constexpr long kBlock = 65536;
  long done = 0;
  while (done < n) {
    const long m = std::min(kBlock, n - done);
    const MatrixXd draws = sample_prior_beta(prior, m, rng);
    for (long i = 0; i < m; ++i) {
      const VectorXd beta = draws.row(i).transpose();
      for (std::size_t s = 0; s < hyps.size(); ++s)
        counts[s] += hyps[s].satisfies(beta) ? 1 : 0;
    }
    done += m;
  }
  std::vector<ProportionEstimate> out;
  out.reserve(hyps.size());
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    ProportionEstimate e;
    e.hypothesis = hyps[s].name();
    e.n_draws = n;
    e.proportion = static_cast<double>(counts[s]) / static_cast<double>(n);
    e.mc_se_naive =
        std::sqrt(e.proportion * (1.0 - e.proportion) / static_cast<double>(n));
    e.mc_se = e.mc_se_naive;  // draws are independent here
    out.push_back(std::move(e));
  }
  return out;
}

// Proportion of stored posterior beta rows satisfying each hypothesis
// (1/d_s). Gibbs draws are autocorrelated, so mc_se comes from batch means
// over 50 batches; the naive binomial value is reported alongside.
inline std::vector<ProportionEstimate> posterior_proportions(
    const SampleStore& store, const std::vector<ValidatedHypothesis>& hyps) {
  const long rows = store.rows();
  if (rows < 1) throw ConfigError("posterior_proportions: empty store");
  const MatrixXd& draws = store.beta_draws();

  std::vector<long> counts(hyps.size(), 0);
  std::vector<std::vector<char>> hits(hyps.size(), std::vector<char>(rows));
  for (long i = 0; i < rows; ++i) {
    const VectorXd beta = draws.row(i).transpose();
    for (std::size_t s = 0; s < hyps.size(); ++s) {
      const bool ok = hyps[s].satisfies(beta);
      counts[s] += ok ? 1 : 0;
      hits[s][i] = ok ? 1 : 0;
    }
  }

  std::vector<ProportionEstimate> out;
  out.reserve(hyps.size());
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    ProportionEstimate e;
    e.hypothesis = hyps[s].name();
    e.n_draws = rows;
    e.proportion = static_cast<double>(counts[s]) / static_cast<double>(rows);
    e.mc_se_naive = std::sqrt(e.proportion * (1.0 - e.proportion) /
                              static_cast<double>(rows));

    const long nb = std::min<long>(50, rows);
    const long bsize = rows / nb;
    if (nb >= 2 && bsize >= 1) {
      std::vector<double> bmeans(nb);
      for (long b = 0; b < nb; ++b) {
        long c = 0;
        for (long i = b * bsize; i < (b + 1) * bsize; ++i) c += hits[s][i];
        bmeans[b] = static_cast<double>(c) / static_cast<double>(bsize);
      }
      double m = 0.0;
      for (double x : bmeans) m += x;
      m /= static_cast<double>(nb);
      double ss = 0.0;
      for (double x : bmeans) ss += (x - m) * (x - m);
      e.mc_se = std::sqrt(ss / static_cast<double>(nb - 1) /
                          static_cast<double>(nb));
    } else {
      e.mc_se = e.mc_se_naive;
    }
    out.push_back(std::move(e));
  }
  return out;
}

struct HypothesisSelection {
  std::string hypothesis;
  double prior_prop;    // 1/c_s, complexity
  double post_prop;     // 1/d_s, fit
  double bayes_factor;  // BF_s1 = (1/d_s) / (1/c_s) = c_s/d_s
  double pmp;
  double mc_se_prior;
  double mc_se_post;        // batch means, accounts for chain autocorrelation
  double mc_se_post_naive;  // plain binomial, for comparison
};

struct SelectionReport {
  std::vector<HypothesisSelection> hypotheses;
  std::vector<double> prior_model_probs;
};

// Bayes factors against the encompassing model and posterior model
// probabilities. With equal prior model probabilities PMP_s = BF_s1 / sum BF;
// unequal priors reweight accordingly. BF for the encompassing model is 1 by
// construction.
inline SelectionReport compute_pmps(
    const std::vector<ProportionEstimate>& priors,
    const std::vector<ProportionEstimate>& posts,
    const std::vector<double>& prior_model_probs = {}) {
  if (priors.size() != posts.size() || priors.empty())
    throw ConfigError("compute_pmps: prior/posterior lists do not match");
  const std::size_t s = priors.size();
  for (std::size_t i = 0; i < s; ++i)
    if (priors[i].hypothesis != posts[i].hypothesis)
      throw ConfigError("compute_pmps: hypothesis lists do not match");

  bool has_encompassing = false;
  for (std::size_t i = 0; i < s; ++i)
    has_encompassing |=
        (priors[i].proportion == 1.0 && posts[i].proportion == 1.0);
  if (!has_encompassing)
    throw ConfigError("compute_pmps: encompassing model missing from the set");

  std::vector<double> pm = prior_model_probs;
  if (pm.empty()) {
    pm.assign(s, 1.0 / static_cast<double>(s));
  } else {
    if (pm.size() != s)
      throw ConfigError("compute_pmps: prior model probabilities must match "
                        "the hypothesis count");
    double total = 0.0;
    for (double x : pm) {
      if (!(x > 0.0))
        throw ConfigError("compute_pmps: prior model probabilities must be positive");
      total += x;
    }
    for (double& x : pm) x /= total;
  }

  SelectionReport report;
  report.prior_model_probs = pm;
  double norm = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    if (priors[i].proportion == 0.0)
      throw NumericalError("hypothesis '" + priors[i].hypothesis +
                           "' unsupported by prior sample; increase the number "
                           "of prior draws");
    HypothesisSelection row;
    row.hypothesis = priors[i].hypothesis;
    row.prior_prop = priors[i].proportion;
    row.post_prop = posts[i].proportion;
    row.bayes_factor = row.post_prop / row.prior_prop;
    row.mc_se_prior = priors[i].mc_se;
    row.mc_se_post = posts[i].mc_se;
    row.mc_se_post_naive = posts[i].mc_se_naive;
    norm += row.bayes_factor * pm[i];
    report.hypotheses.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < s; ++i)
    report.hypotheses[i].pmp = report.hypotheses[i].bayes_factor * pm[i] / norm;
  return report;
}

}  // namespace icmm
