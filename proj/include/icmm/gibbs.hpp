#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "icmm/constraints.hpp"
#include "icmm/data.hpp"
#include "icmm/distributions.hpp"
#include "icmm/linalg.hpp"
#include "icmm/rng.hpp"

namespace icmm {

// ---------------------------------------------------------------------------
// Prior and state

// Encompassing prior p(beta) x p(V) x p(sigma2): independent normals on each
// beta_p, scaled inverse chi-squared on sigma2, inverse Wishart on V.
struct EncompassingPrior {
  VectorXd beta_means;  // mu_p
  VectorXd beta_vars;   // tau_p^2
  double sigma2_df;     // gamma
  double sigma2_scale;  // omega^2
  double v_df;          // lambda
  MatrixXd v_scale;     // T, R x R SPD

  void validate(int p, int r) const {
    if (beta_means.size() != p || beta_vars.size() != p)
      throw ConfigError("prior: beta hyperparameters must have length P");
    if ((beta_vars.array() <= 0.0).any())
      throw ConfigError("prior: beta variances must be positive");
    if (!(sigma2_df > 0.0) || !(sigma2_scale > 0.0))
      throw ConfigError("prior: sigma2 df and scale must be positive");
    if (!(v_df > r - 1))
      throw ConfigError("prior: V df must exceed R - 1");
    if (v_scale.rows() != r || v_scale.cols() != r)
      throw ConfigError("prior: V scale must be R x R");
    SpdMatrix check(v_scale);  // throws if not SPD
  }
};

// Data-based default: beta_p ~ N(mean(y), 1e4), sigma2 ~ ScaledInvChisq(1,
// var(y)), V ~ InvWishart(R + 1, I_R). The R+1 degrees of freedom make the
// implied random-effect correlations uniform on [-1, 1].
inline EncompassingPrior default_prior(const TwoLevelDataset& ds) {
  const double mean = ds.y.mean();
  const double var =
      (ds.y.array() - mean).square().sum() / static_cast<double>(ds.n() - 1);
  EncompassingPrior prior;
  prior.beta_means = VectorXd::Constant(ds.p(), mean);
  prior.beta_vars = VectorXd::Constant(ds.p(), 1e4);
  prior.sigma2_df = 1.0;
  prior.sigma2_scale = var;
  prior.v_df = static_cast<double>(ds.r() + 1);
  prior.v_scale = MatrixXd::Identity(ds.r(), ds.r());
  return prior;
}

// One Gibbs state: fixed effects, group effects, V, sigma2.
struct ParameterState {
  VectorXd beta;  // P
  MatrixXd u;     // J x R
  MatrixXd v;     // R x R, SPD throughout a run
  double sigma2 = 1.0;
};

struct ChainConfig {
  int iterations = 20000;  // stored post-burn-in draws
  int burnin = 10000;
  int thin = 1;
  int chains = 1;
  std::uint64_t seed = 1234;
  bool store_u = false;  // keep running group-effect summaries

  void validate() const {
    if (iterations < 1) throw ConfigError("mcmc: iterations must be >= 1");
    if (burnin < 0) throw ConfigError("mcmc: burnin must be >= 0");
    if (thin < 1) throw ConfigError("mcmc: thin must be >= 1");
    if (chains < 1) throw ConfigError("mcmc: chains must be >= 1");
  }
};

// Stream id layout on a run's seed: 0 samples the prior, chain c uses 1 + c.
inline constexpr std::uint64_t kPriorStream = 0;
inline constexpr std::uint64_t kChainStreamBase = 1;

// ---------------------------------------------------------------------------
// Chain storage

struct StoreMeta {
  ChainConfig config;
  std::string hypothesis_name;
  std::vector<std::string> coef_names;
  std::vector<std::string> random_names;
  // (seed, stream) per chain, in chain order
  std::vector<std::pair<std::uint64_t, std::uint64_t>> chain_streams;
};

// Packed upper-triangle labels for V: Var(u1), Cov(u1,u2), Var(u2), ...
inline std::vector<std::string> v_entry_names(int r) {
  std::vector<std::string> names;
  for (int a = 0; a < r; ++a)
    for (int b = a; b < r; ++b) {
      if (a == b)
        names.push_back("Var(u" + std::to_string(a + 1) + ")");
      else
        names.push_back("Cov(u" + std::to_string(a + 1) + ",u" +
                        std::to_string(b + 1) + ")");
    }
  return names;
}

// Stored draws for one or more chains of equal length. Append-only while a
// run fills it, immutable afterward.
class SampleStore {
 public:
  SampleStore(StoreMeta meta, int p, int r)
      : meta_(std::move(meta)), p_(p), r_(r), vpack_(r * (r + 1) / 2) {}

  void reserve(int rows) {
    beta_.conservativeResize(rows, p_);
    sigma2_.conservativeResize(rows);
    v_.conservativeResize(rows, vpack_);
  }

  void append(const ParameterState& state) {
    if (next_ >= beta_.rows()) {
      const int grown = std::max<int>(16, static_cast<int>(beta_.rows()) * 2);
      reserve(grown);
    }
    beta_.row(next_) = state.beta.transpose();
    sigma2_(next_) = state.sigma2;
    int c = 0;
    for (int a = 0; a < r_; ++a)
      for (int b = a; b < r_; ++b) v_(next_, c++) = state.v(a, b);
    ++next_;
  }

  void accumulate_u(const MatrixXd& u) {
    if (u_count_ == 0) {
      u_sum_ = MatrixXd::Zero(u.rows(), u.cols());
      u_sumsq_ = MatrixXd::Zero(u.rows(), u.cols());
    }
    u_sum_ += u;
    u_sumsq_ += u.cwiseProduct(u);
    ++u_count_;
  }

  void finish() {
    beta_.conservativeResize(next_, p_);
    sigma2_.conservativeResize(next_);
    v_.conservativeResize(next_, vpack_);
    chain_rows_.push_back(next_);
  }

  // Deterministic merge in chain-id order; all chains must have equal length.
  static SampleStore merge(std::vector<SampleStore> chains) {
    if (chains.empty()) throw NumericalError("merge: no chains");
    SampleStore out(chains.front().meta_, chains.front().p_, chains.front().r_);
    long total = 0;
    for (const auto& c : chains) total += c.rows();
    out.reserve(static_cast<int>(total));
    out.meta_.chain_streams.clear();
    out.chain_rows_.clear();
    long at = 0;
    for (auto& c : chains) {
      if (c.rows() != chains.front().rows())
        throw NumericalError("merge: chains have different lengths");
      out.beta_.middleRows(at, c.rows()) = c.beta_;
      out.sigma2_.segment(at, c.rows()) = c.sigma2_;
      out.v_.middleRows(at, c.rows()) = c.v_;
      at += c.rows();
      out.chain_rows_.push_back(c.rows());
      for (auto s : c.meta_.chain_streams) out.meta_.chain_streams.push_back(s);
      if (c.u_count_ > 0) {
        if (out.u_count_ == 0) {
          out.u_sum_ = c.u_sum_;
          out.u_sumsq_ = c.u_sumsq_;
          out.u_count_ = c.u_count_;
        } else {
          out.u_sum_ += c.u_sum_;
          out.u_sumsq_ += c.u_sumsq_;
          out.u_count_ += c.u_count_;
        }
      }
    }
    out.next_ = static_cast<int>(total);
    return out;
  }

  const StoreMeta& meta() const { return meta_; }
  long rows() const { return next_; }
  int p() const { return p_; }
  int r_dim() const { return r_; }
  int chains() const { return static_cast<int>(chain_rows_.size()); }

  const MatrixXd& beta_draws() const { return beta_; }
  const VectorXd& sigma2_draws() const { return sigma2_; }
  const MatrixXd& v_draws_packed() const { return v_; }

  SpdMatrix v_at(long i) const {
    MatrixXd m(r_, r_);
    int c = 0;
    for (int a = 0; a < r_; ++a)
      for (int b = a; b < r_; ++b) {
        m(a, b) = v_(i, c);
        m(b, a) = v_(i, c);
        ++c;
      }
    return SpdMatrix(std::move(m));
  }

  bool has_u_summary() const { return u_count_ > 0; }
  MatrixXd u_mean() const { return u_sum_ / static_cast<double>(u_count_); }
  MatrixXd u_sd() const {
    const MatrixXd m = u_mean();
    const double n = static_cast<double>(u_count_);
    return ((u_sumsq_ / n - m.cwiseProduct(m)).cwiseMax(0.0) * (n / (n - 1.0)))
        .cwiseSqrt();
  }

 private:
  StoreMeta meta_;
  int p_;
  int r_;
  int vpack_;
  int next_ = 0;
  MatrixXd beta_;
  VectorXd sigma2_;
  MatrixXd v_;
  std::vector<long> chain_rows_;
  MatrixXd u_sum_;
  MatrixXd u_sumsq_;
  long u_count_ = 0;
};

// ---------------------------------------------------------------------------
// The sampler

struct BetaConditional {
  double mean;
  double var;
};

// Four-step Gibbs sweep over (u, sigma2, V, beta) with dataset-level sums
// precomputed per group, so one sweep costs O(J(R^2 + RP) + P^2) regardless
// of N. When a non-empty hypothesis is supplied, beta coordinates draw from
// conditionals truncated to the bounds the remaining state implies.
class GibbsSampler {
 public:
  GibbsSampler(const TwoLevelDataset& ds, const EncompassingPrior& prior,
               const ValidatedHypothesis* hypothesis = nullptr)
      : n_(ds.n()), p_(ds.p()), r_(ds.r()), j_(ds.j()), prior_(prior),
        hyp_(hypothesis && !hypothesis->empty() ? hypothesis : nullptr) {
    prior_.validate(p_, r_);

    xtx_ = ds.X.transpose() * ds.X;
    xty_ = ds.X.transpose() * ds.y;
    yty_ = ds.y.squaredNorm();
    ymean_ = ds.y.mean();
    yvar_ = (ds.y.array() - ymean_).square().sum() / (n_ - 1.0);

    zgram_.assign(j_, MatrixXd::Zero(r_, r_));
    zx_.assign(j_, MatrixXd::Zero(r_, p_));
    zy_.assign(j_, VectorXd::Zero(r_));
    for (int i = 0; i < n_; ++i) {
      const int g = ds.group[i];
      const auto z = ds.Z.row(i);
      zgram_[g].noalias() += z.transpose() * z;
      zx_[g].noalias() += z.transpose() * ds.X.row(i);
      zy_[g].noalias() += z.transpose() * ds.y(i);
    }
  }

  int p() const { return p_; }
  int r() const { return r_; }
  int j() const { return j_; }
  const ValidatedHypothesis* hypothesis() const { return hyp_; }

  // OLS-based start, repaired onto the constraint region; u = 0, V = I,
  // sigma2 = var(y).
  ParameterState init_state() const {
    ParameterState s;
    s.beta = xtx_.ldlt().solve(xty_);
    if (!s.beta.allFinite()) s.beta = prior_.beta_means;  // degenerate design
    if (hyp_) repair_feasible(s.beta);
    s.u = MatrixXd::Zero(j_, r_);
    s.v = MatrixXd::Identity(r_, r_);
    s.sigma2 = yvar_;
    return s;
  }

  // Step 1: u_j ~ N(Phi_j, Sigma_j) with
  //   Sigma_j = [sum_k z'z / sigma2 + V^{-1}]^{-1}
  //   Phi_j   = (Sigma_j / sigma2) sum_k z'(y - x beta')
  void step_u(ParameterState& state, RngStream& rng) const {
    MatrixXd vinv = chol_inverse(state.v, "V");
    MatrixXd m(r_, r_);
    VectorXd b(r_), z(r_);
    for (int g = 0; g < j_; ++g) {
      m = zgram_[g] / state.sigma2 + vinv;
      if (int minor = detail::cholesky_in_place(m); minor != 0)
        throw NumericalError(
            "step_u: conditional precision not positive definite (group " +
            std::to_string(g + 1) + ")");
      b.noalias() = (zy_[g] - zx_[g] * state.beta) / state.sigma2;
      // Sigma_j = L^{-T} L^{-1}; draw = Sigma_j b + L^{-T} z
      m.triangularView<Eigen::Lower>().solveInPlace(b);
      for (int k = 0; k < r_; ++k) z(k) = sample_normal(rng);
      b += z;
      m.transpose().triangularView<Eigen::Upper>().solveInPlace(b);
      state.u.row(g) = b.transpose();
    }
  }

  // Step 2: sigma2 ~ ScaledInvChisq with df = gamma + N and df*scale =
  // gamma*omega^2 + residual sum of squares.
  void step_sigma2(ParameterState& state, RngStream& rng) const {
    const double rss = residual_ss(state);
    const double df = prior_.sigma2_df + static_cast<double>(n_);
    const double total = prior_.sigma2_df * prior_.sigma2_scale + rss;
    state.sigma2 = total / sample_chisq(df, rng);
  }

  // Step 3: V ~ InvWishart(lambda + J, sum_j u_j u_j' + T).
  void step_v(ParameterState& state, RngStream& rng) const {
    MatrixXd scale = prior_.v_scale;
    scale.noalias() += state.u.transpose() * state.u;
    scale = ((scale + scale.transpose()) / 2.0).eval();
    const SpdMatrix draw =
        sample_inv_wishart(prior_.v_df + static_cast<double>(j_),
                           SpdMatrix(std::move(scale)), rng);
    state.v = draw.mat();
  }

  // Conditional for beta_p given everything else.
  BetaConditional beta_conditional(int p, const ParameterState& state) const {
    return beta_conditional_impl(p, state, u_cross(state));
  }

  // Step 4: systematic scan over beta in declaration order, truncated to the
  // hypothesis bounds when constraints are present.
  void step_beta(ParameterState& state, RngStream& rng) const {
    const VectorXd w = u_cross(state);
    for (int p = 0; p < p_; ++p) {
      const BetaConditional c = beta_conditional_impl(p, state, w);
      if (hyp_) {
        const auto [lo, hi] = hyp_->bounds_for(p, state.beta);
        if (lo == -kInf && hi == kInf)
          state.beta(p) = c.mean + std::sqrt(c.var) * sample_normal(rng);
        else
          state.beta(p) = sample_truncnormal(c.mean, c.var, lo, hi, rng);
      } else {
        state.beta(p) = c.mean + std::sqrt(c.var) * sample_normal(rng);
      }
    }
  }

  void sweep(ParameterState& state, RngStream& rng) const {
    step_u(state, rng);
    step_sigma2(state, rng);
    step_v(state, rng);
    step_beta(state, rng);
  }

  double residual_ss(const ParameterState& state) const {
    double rss = yty_ - 2.0 * state.beta.dot(xty_) +
                 state.beta.dot(xtx_ * state.beta);
    for (int g = 0; g < j_; ++g) {
      const VectorXd ug = state.u.row(g).transpose();
      rss -= 2.0 * ug.dot(zy_[g] - zx_[g] * state.beta);
      rss += ug.dot(zgram_[g] * ug);
    }
    return std::max(rss, 0.0);
  }

 private:
  VectorXd u_cross(const ParameterState& state) const {
    VectorXd w = VectorXd::Zero(p_);
    for (int g = 0; g < j_; ++g)
      w.noalias() += zx_[g].transpose() * state.u.row(g).transpose();
    return w;
  }

  BetaConditional beta_conditional_impl(int p, const ParameterState& state,
                                        const VectorXd& w) const {
    const double tau2 = prior_.beta_vars(p);
    const double mu = prior_.beta_means(p);
    const double prec = 1.0 / tau2 + xtx_(p, p) / state.sigma2;
    const double cross =
        xty_(p) - (xtx_.row(p).dot(state.beta) - xtx_(p, p) * state.beta(p)) -
        w(p);
    const double mean = (mu / tau2 + cross / state.sigma2) / prec;
    return {mean, 1.0 / prec};
  }

  static MatrixXd chol_inverse(const MatrixXd& m, const char* what) {
    MatrixXd l = m;
    if (int minor = detail::cholesky_in_place(l); minor != 0)
      throw NumericalError(std::string("matrix ") + what +
                           " is not positive definite");
    MatrixXd inv = MatrixXd::Identity(m.rows(), m.cols());
    l.triangularView<Eigen::Lower>().solveInPlace(inv);
    l.transpose().triangularView<Eigen::Upper>().solveInPlace(inv);
    return inv;
  }

  // Reverse-topological sweep: place each coefficient strictly above its
  // already-placed lesser neighbors, spacing by 1e-3 toward an open side.
  void repair_feasible(VectorXd& beta) const {
    const auto& order = hyp_->topo_order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int p = *it;
      double lo = hyp_->lower_const(p);
      for (int q : hyp_->lower_coefs(p)) lo = std::max(lo, beta(q));
      const double hi = hyp_->upper_const(p);
      if (beta(p) > lo && beta(p) < hi) continue;
      if (hi == kInf)
        beta(p) = (lo == -kInf) ? 0.0 : lo + 1e-3;
      else if (lo == -kInf)
        beta(p) = hi - 1e-3;
      else
        beta(p) = 0.5 * (lo + hi);
    }
    if (!hyp_->satisfies(beta))
      throw NumericalError("hypothesis '" + hyp_->name() +
                           "': could not construct a feasible start");
  }

  int n_, p_, r_, j_;
  EncompassingPrior prior_;
  const ValidatedHypothesis* hyp_;
  MatrixXd xtx_;
  VectorXd xty_;
  double yty_, ymean_, yvar_;
  std::vector<MatrixXd> zgram_;
  std::vector<MatrixXd> zx_;
  std::vector<VectorXd> zy_;
};

// Convenience entry point for a feasible initial state.
inline ParameterState init_state(const EncompassingPrior& prior,
                                 const TwoLevelDataset& ds,
                                 const ValidatedHypothesis* h = nullptr) {
  return GibbsSampler(ds, prior, h).init_state();
}

// ---------------------------------------------------------------------------
// Chain drivers

// Runs every chain of the config and returns per-chain stores (chain c draws
// from stream kChainStreamBase + c of the config seed). Chains run on
// separate threads; results are merged by chain id, so output is independent
// of scheduling.
inline std::vector<SampleStore> run_chains(const TwoLevelDataset& ds,
                                           const EncompassingPrior& prior,
                                           const ValidatedHypothesis* h,
                                           const ChainConfig& config) {
  config.validate();
  StoreMeta meta;
  meta.config = config;
  meta.hypothesis_name = h ? h->name() : "";
  meta.coef_names = ds.coef_names;
  meta.random_names = ds.random_names;

  std::vector<SampleStore> stores;
  stores.reserve(config.chains);
  for (int c = 0; c < config.chains; ++c) {
    StoreMeta m = meta;
    m.chain_streams = {{config.seed, kChainStreamBase + c}};
    stores.emplace_back(std::move(m), ds.p(), ds.r());
    stores.back().reserve(config.iterations);
  }

  auto run_one = [&](int c) {
    const GibbsSampler sampler(ds, prior, h);
    RngStream rng(config.seed, kChainStreamBase + c);
    ParameterState state = sampler.init_state();
    SampleStore& store = stores[c];
    for (int it = 0; it < config.burnin; ++it) sampler.sweep(state, rng);
    for (int kept = 0; kept < config.iterations; ++kept) {
      for (int t = 0; t < config.thin; ++t) sampler.sweep(state, rng);
      store.append(state);
      if (config.store_u) store.accumulate_u(state.u);
    }
    store.finish();
  };

  if (config.chains == 1) {
    run_one(0);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(config.chains);
    std::vector<std::exception_ptr> errors(config.chains);
    for (int c = 0; c < config.chains; ++c)
      workers.emplace_back([&, c] {
        try {
          run_one(c);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    for (auto& w : workers) w.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return stores;
}

// Burn-in plus iterations x thin sweeps in the order u -> sigma2 -> V ->
// beta; stores every thin-th post-burn-in state, chains concatenated.
inline SampleStore run_chain(const TwoLevelDataset& ds,
                             const EncompassingPrior& prior,
                             const ValidatedHypothesis* h,
                             const ChainConfig& config) {
  return SampleStore::merge(run_chains(ds, prior, h, config));
}

// n independent draws of beta from the factorized prior; row-major fill, one
// normal per cell. No MCMC is involved.
inline MatrixXd sample_prior_beta(const EncompassingPrior& prior, long n,
                                  RngStream& rng) {
  if (n < 1) throw ConfigError("sample_prior_beta: n must be >= 1");
  const int p = static_cast<int>(prior.beta_means.size());
  MatrixXd draws(n, p);
  for (long i = 0; i < n; ++i)
    for (int c = 0; c < p; ++c)
      draws(i, c) = prior.beta_means(c) +
                    std::sqrt(prior.beta_vars(c)) * sample_normal(rng);
  return draws;
}

}  // namespace icmm
