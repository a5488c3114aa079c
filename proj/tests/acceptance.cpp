// Acceptance suite: one line per criterion, PASS/FAIL/SKIP, nonzero exit on
// any failure. Criteria 6-8 need the full study datasets (see data/README.md)
// and skip with a message when the files are absent.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "icmm/icmm.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using icmm::ChainConfig;
using icmm::default_prior;
using icmm::EncompassingPrior;
using icmm::MatrixXd;
using icmm::normal_cdf;
using icmm::ordered_json;
using icmm::parse_hypothesis;
using icmm::RngStream;
using icmm::RunConfig;
using icmm::SampleStore;
using icmm::validate;
using icmm::ValidatedHypothesis;
using icmm::VectorXd;

namespace {

int g_failures = 0;

void report(int id, const std::string& outcome, const std::string& text) {
  std::cout << "criterion " << id << " [" << outcome << "] " << text << "\n";
  if (outcome == "FAIL") ++g_failures;
}

struct CheckSet {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << (detail.tellp() > 0 ? "; " : "") << what;
    }
  }

  void expect_near(double got, double want, double tol, const std::string& what) {
    std::ostringstream msg;
    msg << what << " = " << got << " (want " << want << " +- " << tol << ")";
    expect(std::fabs(got - want) <= tol, msg.str());
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, icmm::ParameterSummary> load_estimates(const fs::path& p) {
  const auto j = ordered_json::parse(slurp(p));
  std::map<std::string, icmm::ParameterSummary> out;
  for (const auto& row : j) {
    icmm::ParameterSummary s;
    s.name = row["name"].get<std::string>();
    s.mean = row["mean"].get<double>();
    s.sd = row["sd"].get<double>();
    s.cci_low = row["cci_low"].get<double>();
    s.cci_high = row["cci_high"].get<double>();
    out[s.name] = s;
  }
  return out;
}

std::map<std::string, double> load_pmps(const fs::path& p) {
  const auto j = ordered_json::parse(slurp(p));
  std::map<std::string, double> out;
  for (const auto& row : j["hypotheses"])
    out[row["hypothesis"].get<std::string>()] = row["pmp"].get<double>();
  return out;
}

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("icmm_acceptance_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------

void criterion1_prior_oracles() {
  CheckSet c;
  EncompassingPrior prior;
  prior.beta_means = VectorXd::Constant(7, 12.75);
  prior.beta_vars = VectorXd::Constant(7, 1e4);
  prior.sigma2_df = 1.0;
  prior.sigma2_scale = 47.0;
  prior.v_df = 3.0;
  prior.v_scale = MatrixXd::Identity(2, 2);

  const std::vector<std::string> names = {"b1", "b2", "b3", "b4",
                                          "b5", "b6", "b7"};
  std::vector<ValidatedHypothesis> hyps;
  hyps.push_back(validate(parse_hypothesis("pair", "b1 > b2"), names));
  hyps.push_back(validate(parse_hypothesis("order3", "b1 > b2 > b3"), names));
  hyps.push_back(validate(parse_hypothesis("negative", "b7 < 0"), names));

  RngStream rng(424242, 0);
  const auto est = icmm::prior_proportions(prior, hyps, 1000000, rng);
  c.expect_near(est[0].proportion, 0.5, 0.005, "P(b1>b2)");
  c.expect_near(est[1].proportion, 1.0 / 6.0, 0.005, "P(b1>b2>b3)");
  c.expect_near(est[2].proportion, normal_cdf(-0.1275), 0.005, "P(b7<0)");
  report(1, c.ok ? "PASS" : "FAIL",
         c.ok ? "prior-proportion oracles at 1e6 draws: 0.5, 1/6, Phi(-0.1275)"
              : c.detail.str());
}

void criterion2_distribution_moments() {
  CheckSet c;
  {
    RngStream rng(31, 0);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
      sum += icmm::sample_truncnormal(0.0, 1.0, 0.0, icmm::kInf, rng);
    const double target = std::sqrt(2.0 / M_PI);
    c.expect_near(sum / n, target, 0.01 * target, "half-normal mean");
  }
  {
    RngStream rng(32, 0);
    double sum = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) sum += icmm::sample_scaled_inv_chisq(10, 2, rng);
    c.expect_near(sum / n, 2.5, 0.025, "scaled-inv-chisq(10,2) mean");
  }
  {
    RngStream rng(33, 0);
    const auto scale = icmm::SpdMatrix::identity(2);
    MatrixXd sum = MatrixXd::Zero(2, 2);
    const int n = 100000;
    for (int i = 0; i < n; ++i)
      sum += icmm::sample_inv_wishart(10.0, scale, rng).mat();
    const MatrixXd mean = sum / n;
    const MatrixXd target = MatrixXd::Identity(2, 2) / 7.0;
    c.expect((mean - target).cwiseAbs().maxCoeff() <= 0.02 / 7.0,
             "inverse-Wishart(10, I2) mean off target");
  }
  {
    RngStream rng(34, 0);
    const auto scale = icmm::SpdMatrix::identity(2);
    const int n = 100000;
    std::vector<double> corr(n);
    for (int i = 0; i < n; ++i) {
      const auto v = icmm::sample_inv_wishart(3.0, scale, rng);
      corr[i] = v(0, 1) / std::sqrt(v(0, 0) * v(1, 1));
    }
    std::sort(corr.begin(), corr.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
      const double f = (corr[i] + 1.0) / 2.0;
      ks = std::max(ks, std::fabs(f - static_cast<double>(i) / n));
      ks = std::max(ks, std::fabs(static_cast<double>(i + 1) / n - f));
    }
    std::ostringstream msg;
    msg << "IW(R+1, I) correlation KS vs uniform = " << ks;
    c.expect(ks < 0.01, msg.str());
  }
  report(2, c.ok ? "PASS" : "FAIL",
         c.ok ? "distribution moment suite (truncated normal, scaled-inv-chisq, "
                "inverse Wishart, uniform correlation)"
              : c.detail.str());
}

void criterion3_posterior_recovery() {
  testutil::SyntheticTruth truth;
  truth.beta = VectorXd(4);
  truth.beta << 1.0, 0.5, -0.5, 0.25;
  truth.v = MatrixXd(2, 2);
  truth.v << 0.5, 0.1, 0.1, 0.3;
  truth.sigma2 = 1.0;

  int covered = 0, total = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto ds = testutil::make_synthetic(50, 20, truth, 1000 + rep);
    ChainConfig config;
    config.iterations = 3000;
    config.burnin = 800;
    config.seed = 500 + rep;
    const SampleStore store =
        icmm::run_chain(ds, default_prior(ds), nullptr, config);
    const auto rows = icmm::summarize(store);
    auto check = [&](const std::string& name, double target) {
      for (const auto& s : rows)
        if (s.name == name) {
          ++total;
          covered += (s.cci_low <= target && target <= s.cci_high) ? 1 : 0;
        }
    };
    for (int p = 0; p < 4; ++p)
      check("b" + std::to_string(p + 1), truth.beta(p));
    check("sigma2", truth.sigma2);
  }
  std::ostringstream msg;
  msg << "95% CCIs cover (beta, sigma2) truths in " << covered << "/" << total
      << " cells over 20 synthetic replications (need >= 90%)";
  const bool ok = total == 100 && covered >= 90;
  report(3, ok ? "PASS" : "FAIL", msg.str());
}

void criterion4_constrained_feasibility() {
  testutil::SyntheticTruth truth;
  truth.beta = VectorXd(4);
  truth.beta << 1.0, 0.5, -0.5, 0.25;
  truth.v = MatrixXd::Identity(2, 2) * 0.3;
  truth.sigma2 = 1.0;
  const auto ds = testutil::make_synthetic(30, 10, truth, 77);
  const auto h = validate(
      parse_hypothesis("H", "b2 > b3, b1 > 0, b4 < 1"), ds.coef_names);
  ChainConfig config;
  config.iterations = 2000;
  config.burnin = 500;
  config.seed = 99;
  const SampleStore store = icmm::run_chain(ds, default_prior(ds), &h, config);
  long bad = 0;
  for (long i = 0; i < store.rows(); ++i) {
    const VectorXd beta = store.beta_draws().row(i).transpose();
    bad += h.satisfies(beta) ? 0 : 1;
  }
  std::ostringstream msg;
  msg << "constrained chain feasibility: " << (store.rows() - bad) << "/"
      << store.rows() << " stored draws satisfy the hypothesis (exact)";
  report(4, bad == 0 ? "PASS" : "FAIL", msg.str());
}

void criterion5_pmp_algebra() {
  CheckSet c;
  testutil::SyntheticTruth truth;
  truth.beta = VectorXd(4);
  truth.beta << 1.0, 0.5, -0.5, 0.25;
  truth.v = MatrixXd::Identity(2, 2) * 0.3;
  truth.sigma2 = 1.0;
  const auto ds = testutil::make_synthetic(25, 10, truth, 31);

  std::vector<ValidatedHypothesis> hyps;
  hyps.push_back(validate(parse_hypothesis("H1", ""), ds.coef_names));
  hyps.push_back(validate(parse_hypothesis("A", "b2 > b3"), ds.coef_names));
  hyps.push_back(
      validate(parse_hypothesis("B", "b2 > b3, b1 > 0"), ds.coef_names));
  hyps.push_back(validate(
      parse_hypothesis("C", "b2 > b3, b1 > 0, b4 < 1"), ds.coef_names));

  const EncompassingPrior prior = default_prior(ds);
  RngStream rng(11, 0);
  const auto priors = icmm::prior_proportions(prior, hyps, 100000, rng);

  ChainConfig config;
  config.iterations = 1000;
  config.burnin = 300;
  config.seed = 13;
  const SampleStore store = icmm::run_chain(ds, prior, nullptr, config);
  const auto posts = icmm::posterior_proportions(store, hyps);

  // nesting monotonicity is exact on shared draws
  c.expect(priors[1].proportion >= priors[2].proportion &&
               priors[2].proportion >= priors[3].proportion,
           "prior proportions not monotone under nesting");
  c.expect(posts[1].proportion >= posts[2].proportion &&
               posts[2].proportion >= posts[3].proportion,
           "posterior proportions not monotone under nesting");

  const auto reportout = icmm::compute_pmps(priors, posts);
  double total = 0.0;
  for (const auto& h : reportout.hypotheses) total += h.pmp;
  c.expect(std::fabs(total - 1.0) <= 1e-12, "PMPs do not sum to 1 within 1e-12");
  c.expect(reportout.hypotheses[0].bayes_factor == 1.0,
           "encompassing Bayes factor is not exactly 1");
  for (const auto& h : reportout.hypotheses)
    c.expect(h.pmp >= 0.0 && h.pmp <= 1.0, "PMP outside [0,1]");

  report(5, c.ok ? "PASS" : "FAIL",
         c.ok ? "PMP algebra: sum 1 within 1e-12, encompassing BF = 1, exact "
                "nesting monotonicity"
              : c.detail.str());
}

// ---------------------------------------------------------------------------
// Golden reproductions

struct HsbRun {
  fs::path select_dir;
  fs::path fit_dir;
  RunConfig select_config;
  RunConfig fit_config;
};

RunConfig load_repo_config(const std::string& name) {
  const fs::path src(ICMM_SOURCE_DIR);
  RunConfig config = RunConfig::from_file((src / "configs" / name).string());
  if (!fs::path(config.data.csv).is_absolute())
    config.data.csv = (src / config.data.csv).string();
  return config;
}

bool dataset_present(const RunConfig& config) {
  return fs::exists(config.data.csv);
}

HsbRun run_hsb(const std::string& tag) {
  HsbRun run;
  run.select_config = load_repo_config("hsb.json");
  run.select_dir = temp_dir("hsb_select_" + tag);
  run.select_config.outputs.directory = run.select_dir.string();
  std::ostringstream sink;
  icmm::cmd_select(run.select_config, sink);

  run.fit_config = run.select_config;
  run.fit_config.mcmc.iterations = 20000;  // estimation protocol
  run.fit_config.mcmc.burnin = 10000;
  run.fit_dir = temp_dir("hsb_fit_" + tag);
  run.fit_config.outputs.directory = run.fit_dir.string();
  icmm::cmd_fit(run.fit_config, "H5", sink);
  return run;
}

void criterion6_school_effects() {
  RunConfig probe = load_repo_config("hsb.json");
  if (!dataset_present(probe)) {
    report(6, "SKIP",
           "school-effects reproduction: " + probe.data.csv +
               " not present (fetch instructions in data/README.md)");
    return;
  }
  CheckSet c;

  // ingestion sanity before the long run
  const auto table = icmm::load_csv(probe.data.csv, probe.data.types,
                                    probe.data.delimiter);
  const auto ds = icmm::build_dataset(table, probe.model);
  c.expect(ds.n() == 7185, "expected 7185 rows, got " + std::to_string(ds.n()));
  c.expect(ds.j() == 160, "expected 160 schools, got " + std::to_string(ds.j()));
  const auto mathach = icmm::summary_stats(table, "mathach");
  c.expect_near(mathach.mean, 12.75, 0.01, "mean(mathach)");
  c.expect_near(mathach.sd, 6.88, 0.01, "sd(mathach)");
  if (!c.ok) {
    report(6, "FAIL", c.detail.str());
    return;
  }

  const HsbRun run = run_hsb("a");
  const auto pmps = load_pmps(run.select_dir / "selection.json");
  const std::map<std::string, double> table1 = {
      {"H1", 0.059}, {"H2", 0.117}, {"H3", 0.118},
      {"H4", 0.235}, {"H5", 0.471}, {"H6", 0.0}};
  double max_pmp = 0.0;
  std::string max_name;
  for (const auto& [name, want] : table1) {
    const double got = pmps.at(name);
    c.expect_near(got, want, 0.03, "PMP(" + name + ")");
    if (got > max_pmp) {
      max_pmp = got;
      max_name = name;
    }
  }
  c.expect(max_name == "H5", "H5 is not the maximum-PMP hypothesis");
  c.expect(pmps.at("H6") <= 0.005, "PMP(H6) exceeds 0.005");

  const auto est = load_estimates(run.fit_dir / "estimates_H5.json");
  const std::map<std::string, double> table2 = {
      {"cat", 14.33},  {"pub", 12.67},     {"mses", 4.18},
      {"cat_ses", 1.16}, {"pub_ses", 2.64}, {"mses_ses", 0.98},
      {"min", -2.76},  {"Var(u1)", 1.99},  {"Var(u2)", 0.24},
      {"Cov(u1,u2)", -0.04}};
  for (const auto& [name, want] : table2)
    c.expect_near(est.at(name).mean, want, 0.15, "posterior mean " + name);
  c.expect_near(est.at("sigma2").mean, 35.88, 0.6, "posterior mean sigma2");
  // The Cov(u1,u2) CCI cell of the published table is internally inconsistent
  // (the interval cannot bracket its own mean) and is excluded here.

  // every stored draw of the constrained run satisfies H5
  const auto store = icmm::io::read_chain_dump(
      (run.fit_dir / "chain_H5.tsv").string());
  const auto h5 = validate(
      parse_hypothesis("H5", "cat > pub, cat_ses < pub_ses, min < 0"),
      store.meta().coef_names);
  long bad = 0;
  for (long i = 0; i < store.rows(); ++i) {
    const VectorXd beta = store.beta_draws().row(i).transpose();
    bad += h5.satisfies(beta) ? 0 : 1;
  }
  c.expect(bad == 0, "constrained H5 chain violates its hypothesis");

  report(6, c.ok ? "PASS" : "FAIL",
         c.ok ? "school-effects reproduction: PMP table within 0.03, H5 fit "
                "within stated tolerances"
              : c.detail.str());
}

void criterion7_individual_growth() {
  RunConfig probe = load_repo_config("alcohol.json");
  if (!dataset_present(probe)) {
    report(7, "SKIP",
           "alcohol-use reproduction: " + probe.data.csv +
               " not present (fetch instructions in data/README.md)");
    return;
  }
  CheckSet c;

  const auto table = icmm::load_csv(probe.data.csv, probe.data.types,
                                    probe.data.delimiter);
  const auto ds = icmm::build_dataset(table, probe.model);
  c.expect(ds.j() == 82, "expected 82 subjects, got " + std::to_string(ds.j()));
  c.expect(ds.n() == 246, "expected 246 rows, got " + std::to_string(ds.n()));
  const auto alcuse = icmm::summary_stats(table, "alcuse");
  const auto peer = icmm::summary_stats(table, "peer");
  c.expect_near(alcuse.mean, 0.92, 0.01, "mean(alcuse)");
  c.expect_near(alcuse.sd, 1.06, 0.01, "sd(alcuse)");
  c.expect_near(peer.sd, 0.73, 0.01, "sd(peer)");
  if (!c.ok) {
    report(7, "FAIL", c.detail.str());
    return;
  }

  RunConfig select_config = probe;
  const fs::path select_dir = temp_dir("alcohol_select");
  select_config.outputs.directory = select_dir.string();
  std::ostringstream sink;
  icmm::cmd_select(select_config, sink);

  const auto pmps = load_pmps(select_dir / "selection.json");
  const std::map<std::string, double> table3 = {
      {"H1", 0.208}, {"H2", 0.416}, {"H3", 0.000}, {"H4", 0.375}};
  double max_pmp = 0.0;
  std::string max_name;
  for (const auto& [name, want] : table3) {
    const double got = pmps.at(name);
    c.expect_near(got, want, 0.03, "PMP(" + name + ")");
    if (got > max_pmp) {
      max_pmp = got;
      max_name = name;
    }
  }
  c.expect(max_name == "H2", "H2 is not the maximum-PMP hypothesis");
  c.expect(pmps.at("H3") <= 0.005, "PMP(H3) exceeds 0.005");

  RunConfig fit_config = probe;
  fit_config.mcmc.iterations = 20000;
  fit_config.mcmc.burnin = 10000;
  const fs::path fit_dir = temp_dir("alcohol_fit");
  fit_config.outputs.directory = fit_dir.string();
  icmm::cmd_fit(fit_config, "H2", sink);

  const auto est = load_estimates(fit_dir / "estimates_H2.json");
  const std::map<std::string, double> table4 = {
      {"coa", 0.97},    {"ncoa", 0.39},    {"speer", 1.01},
      {"coa_t", 0.43},  {"ncoa_t", 0.45},  {"speer_t", -0.35},
      {"Var(u1)", 0.27}, {"Cov(u1,u2)", -0.01}, {"Var(u2)", 0.18},
      {"sigma2", 0.35}};
  for (const auto& [name, want] : table4)
    c.expect_near(est.at(name).mean, want, 0.08, "posterior mean " + name);

  const auto derived = load_estimates(fit_dir / "derived_H2.json");
  const auto& diff = derived.at("coa_minus_ncoa");
  c.expect_near(diff.mean, 0.58, 0.06, "coa - ncoa mean");
  c.expect_near(diff.cci_low, 0.28, 0.08, "coa - ncoa CCI low");
  c.expect_near(diff.cci_high, 0.88, 0.08, "coa - ncoa CCI high");

  // back-transformed coefficients in original predictor units
  std::map<std::string, double> original;
  {
    std::ifstream in(fit_dir / "original_units_H2.tsv");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      std::string name, field;
      std::getline(ss, name, '\t');
      std::getline(ss, field, '\t');
      original[name] = std::strtod(field.c_str(), nullptr);
    }
  }
  c.expect_near(original.at("speer"), 0.69, 0.05, "peer coefficient");
  c.expect_near(original.at("speer_t"), -0.15, 0.05, "peer x age coefficient");

  report(7, c.ok ? "PASS" : "FAIL",
         c.ok ? "alcohol-use reproduction: PMP table within 0.03, H2 fit and "
                "back-transforms within stated tolerances"
              : c.detail.str());
}

void criterion8_determinism() {
  RunConfig probe = load_repo_config("hsb.json");
  if (!dataset_present(probe)) {
    report(8, "SKIP",
           "determinism on the school-effects run: " + probe.data.csv +
           " not present (the synthetic-config byte-identity check runs in "
           "test_cli)");
    return;
  }
  const HsbRun a = run_hsb("da");
  const HsbRun b = run_hsb("db");
  CheckSet c;
  c.expect(slurp(a.select_dir / "selection.tsv") ==
               slurp(b.select_dir / "selection.tsv"),
           "selection.tsv differs between identically seeded runs");
  c.expect(slurp(a.select_dir / "selection.json") ==
               slurp(b.select_dir / "selection.json"),
           "selection.json differs between identically seeded runs");
  c.expect(slurp(a.select_dir / "chain_H1.tsv") ==
               slurp(b.select_dir / "chain_H1.tsv"),
           "encompassing chain dump differs between identically seeded runs");
  c.expect(slurp(a.fit_dir / "estimates_H5.tsv") ==
               slurp(b.fit_dir / "estimates_H5.tsv"),
           "H5 estimates differ between identically seeded runs");
  c.expect(slurp(a.fit_dir / "chain_H5.tsv") ==
               slurp(b.fit_dir / "chain_H5.tsv"),
           "H5 chain dump differs between identically seeded runs");
  report(8, c.ok ? "PASS" : "FAIL",
         c.ok ? "identically seeded school-effects runs are byte-identical"
              : c.detail.str());
}

}  // namespace

int main() {
  try {
    criterion1_prior_oracles();
    criterion2_distribution_moments();
    criterion3_posterior_recovery();
    criterion4_constrained_feasibility();
    criterion5_pmp_algebra();
    criterion6_school_effects();
    criterion7_individual_growth();
    criterion8_determinism();
  } catch (const std::exception& e) {
    std::cout << "acceptance suite aborted: " << e.what() << "\n";
    return 1;
  }
  std::cout << (g_failures == 0 ? "acceptance: all runnable criteria passed"
                                : "acceptance: FAILURES present")
            << "\n";
  return g_failures == 0 ? 0 : 1;
}
