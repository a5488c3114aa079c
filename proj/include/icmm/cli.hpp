#pragma once

#include <cctype>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "icmm/config.hpp"
#include "icmm/io.hpp"
#include "icmm/selection.hpp"
#include "icmm/summary.hpp"

namespace icmm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;   // usage / configuration
inline constexpr int kExitData = 2;     // data problems
inline constexpr int kExitNumeric = 3;  // numerical failure

namespace cli_detail {

inline std::string round4(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

inline std::string round6g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

inline std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
            c == '-' || c == '.')
               ? c
               : '_';
  return out.empty() ? std::string("unnamed") : out;
}

struct RunTimer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  long elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

inline void write_manifest(const RunConfig& config, const std::string& command,
                           const std::vector<std::string>& outputs,
                           long wall_ms,
                           const std::string& hypothesis = "") {
  ordered_json m;
  m["command"] = command;
  m["version"] = kVersion;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(
                    io::fnv1a64(config.to_json().dump())));
  m["config_hash"] = hash;
  m["seed"] = config.mcmc.seed;
  if (!hypothesis.empty()) m["hypothesis"] = hypothesis;
  m["outputs"] = outputs;
  m["wall_ms"] = wall_ms;
  auto out = io::open_output(std::filesystem::path(config.outputs.directory) /
                             "manifest.json");
  out << m.dump(2) << '\n';
}

inline std::vector<ValidatedHypothesis> validate_all(
    const std::vector<Hypothesis>& parsed, const TwoLevelDataset& ds) {
  std::vector<ValidatedHypothesis> out;
  out.reserve(parsed.size());
  for (const auto& h : parsed) out.push_back(validate(h, ds.coef_names));
  return out;
}

// Distinct raw table columns the model touches, response first.
inline std::vector<std::string> referenced_columns(const RunConfig& config,
                                                   const RawTable& table) {
  std::vector<std::string> cols = {config.model.response};
  std::set<std::string> seen = {config.model.response};
  std::set<std::string> term_names;
  for (const auto& t : config.model.terms) term_names.insert(t.name);
  auto add = [&](const std::string& name) {
    if (!name.empty() && !term_names.count(name) && table.has_column(name) &&
        seen.insert(name).second)
      cols.push_back(name);
  };
  for (const auto& t : config.model.terms) add(t.transform.source);
  return cols;
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// describe: dataset shape plus per-column summaries

inline void cmd_describe(const RunConfig& config, std::ostream& out) {
  using cli_detail::round6g;
  const RawTable table =
      load_csv(config.data.csv, config.data.types, config.data.delimiter);
  const TwoLevelDataset ds = build_dataset(table, config.model);

  out << "dataset: " << config.data.csv << "\n";
  out << "rows (N): " << ds.n() << "\n";
  out << "groups (J): " << ds.j() << "\n";
  int lo = ds.group_sizes[0], hi = ds.group_sizes[0];
  for (int s : ds.group_sizes) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  out << "group sizes: " << lo << " to " << hi << "\n";

  for (const auto& name : cli_detail::referenced_columns(config, table)) {
    const Column& col = table.column(name);
    if (col.numeric) {
      const SummaryStats s = summary_stats(table, name);
      out << "column " << name << ": mean " << round6g(s.mean) << ", sd "
          << round6g(s.sd) << ", range " << round6g(s.min) << " to "
          << round6g(s.max) << "\n";
    } else {
      std::map<std::string, long> counts;
      for (const auto& v : col.labels) ++counts[v];
      out << "column " << name << ":";
      for (const auto& [level, count] : counts)
        out << " " << level << " (" << count << ")";
      out << "\n";
    }
  }

  out << "fixed terms (P = " << ds.p() << "):";
  for (const auto& n : ds.coef_names) out << " " << n;
  out << "\nrandom terms (R = " << ds.r() << "):";
  for (const auto& n : ds.random_names) out << " " << n;
  out << "\n";
}

// ---------------------------------------------------------------------------
// select: encompassing chain + prior draws -> Bayes factors and PMPs

inline void cmd_select(const RunConfig& config, std::ostream& out) {
  cli_detail::RunTimer timer;

  const auto parsed = config.parsed_hypotheses();
  int constrained = 0;
  for (const auto& h : parsed) constrained += h.empty() ? 0 : 1;
  if (constrained == 0)
    throw ConfigError("nothing to select: configure at least one constrained "
                      "hypothesis");

  const RawTable table =
      load_csv(config.data.csv, config.data.types, config.data.delimiter);
  const TwoLevelDataset ds = build_dataset(table, config.model);
  const EncompassingPrior prior = config.resolve_prior(ds);
  const auto hyps = cli_detail::validate_all(parsed, ds);

  const ValidatedHypothesis* encompassing = nullptr;
  for (const auto& h : hyps)
    if (h.empty()) encompassing = &h;
  const std::string encompassing_name =
      encompassing ? encompassing->name() : "encompassing";

  const SampleStore store = run_chain(ds, prior, encompassing, config.mcmc);

  RngStream prior_rng(config.mcmc.seed, kPriorStream);
  const auto prior_props =
      prior_proportions(prior, hyps, config.effective_prior_draws(), prior_rng);
  const auto post_props = posterior_proportions(store, hyps);

  std::vector<double> model_probs;
  if (!config.prior_model_probs.empty()) {
    for (const auto& h : hyps) {
      bool found = false;
      for (const auto& [name, w] : config.prior_model_probs)
        if (name == h.name()) {
          model_probs.push_back(w);
          found = true;
        }
      if (!found)
        throw ConfigError("prior_model_probs: missing entry for hypothesis '" +
                          h.name() + "'");
    }
  }
  const SelectionReport report =
      compute_pmps(prior_props, post_props, model_probs);

  const std::filesystem::path dir(config.outputs.directory);
  std::vector<std::string> written;
  if (config.outputs.tsv) {
    auto f = io::open_output(dir / "selection.tsv");
    io::write_selection_tsv(report, f);
    written.push_back("selection.tsv");
  }
  if (config.outputs.json) {
    auto f = io::open_output(dir / "selection.json");
    f << io::selection_to_json(report).dump(2) << '\n';
    written.push_back("selection.json");
  }
  const std::string dump_name =
      "chain_" + cli_detail::sanitize(encompassing_name) + ".tsv";
  {
    auto f = io::open_output(dir / dump_name);
    io::write_chain_dump(store, f);
    written.push_back(dump_name);
  }
  cli_detail::write_manifest(config, "select", written, timer.elapsed_ms());

  out << "hypothesis\tprior_prop\tpost_prop\tBF\tPMP\n";
  for (const auto& h : report.hypotheses)
    out << h.hypothesis << '\t' << cli_detail::round4(h.prior_prop) << '\t'
        << cli_detail::round4(h.post_prop) << '\t'
        << cli_detail::round4(h.bayes_factor) << '\t'
        << cli_detail::round4(h.pmp) << '\n';
  out << "outputs in " << config.outputs.directory << "\n";
}

// ---------------------------------------------------------------------------
// fit: constrained (or encompassing) estimation run

inline void cmd_fit(const RunConfig& config, const std::string& hyp_name,
                    std::ostream& out) {
  cli_detail::RunTimer timer;

  const auto parsed = config.parsed_hypotheses();
  const Hypothesis* chosen = nullptr;
  for (const auto& h : parsed)
    if (h.name == hyp_name) chosen = &h;
  if (!chosen) {
    std::string known;
    for (const auto& h : parsed) known += (known.empty() ? "" : ", ") + h.name;
    throw ConfigError("unknown hypothesis '" + hyp_name + "' (configured: " +
                      known + ")");
  }

  const RawTable table =
      load_csv(config.data.csv, config.data.types, config.data.delimiter);
  const TwoLevelDataset ds = build_dataset(table, config.model);
  const EncompassingPrior prior = config.resolve_prior(ds);
  const ValidatedHypothesis vh = validate(*chosen, ds.coef_names);

  const auto chains = run_chains(ds, prior, &vh, config.mcmc);
  const SampleStore store = SampleStore::merge(chains);
  const auto summaries = summarize(store);

  const std::string tag = cli_detail::sanitize(hyp_name);
  const std::filesystem::path dir(config.outputs.directory);
  std::vector<std::string> written;

  if (config.outputs.tsv) {
    auto f = io::open_output(dir / ("estimates_" + tag + ".tsv"));
    io::write_summaries_tsv(summaries, f);
    written.push_back("estimates_" + tag + ".tsv");
  }
  if (config.outputs.json) {
    auto f = io::open_output(dir / ("estimates_" + tag + ".json"));
    f << io::summaries_to_json(summaries).dump(2) << '\n';
    written.push_back("estimates_" + tag + ".json");
  }
  {
    auto f = io::open_output(dir / ("chain_" + tag + ".tsv"));
    io::write_chain_dump(store, f);
    written.push_back("chain_" + tag + ".tsv");
  }

  if (!config.outputs.expressions.empty()) {
    std::vector<ParameterSummary> derived;
    for (const auto& expr : config.outputs.expressions)
      derived.push_back(summarize_expression(store, expr));
    if (config.outputs.tsv) {
      auto f = io::open_output(dir / ("derived_" + tag + ".tsv"));
      io::write_summaries_tsv(derived, f);
      written.push_back("derived_" + tag + ".tsv");
    }
    if (config.outputs.json) {
      auto f = io::open_output(dir / ("derived_" + tag + ".json"));
      f << io::summaries_to_json(derived).dump(2) << '\n';
      written.push_back("derived_" + tag + ".json");
    }
    for (const auto& d : derived)
      out << d.name << ": " << cli_detail::round4(d.mean) << " ("
          << cli_detail::round4(d.cci_low) << ", "
          << cli_detail::round4(d.cci_high) << ")\n";
  }

  if (!config.outputs.back_transform.empty()) {
    std::vector<ParameterSummary> original;
    for (const auto& term : config.outputs.back_transform) {
      const auto rec = ds.transform_log.find(term);
      if (rec == ds.transform_log.end())
        throw ConfigError("back_transform: unknown term '" + term + "'");
      for (const auto& s : summaries)
        if (s.name == term) original.push_back(back_transform(s, rec->second));
    }
    auto f = io::open_output(dir / ("original_units_" + tag + ".tsv"));
    io::write_summaries_tsv(original, f);
    written.push_back("original_units_" + tag + ".tsv");
  }

  if (chains.size() >= 2) {
    const auto rhat = psrf(chains);
    auto f = io::open_output(dir / ("psrf_" + tag + ".tsv"));
    io::write_psrf_tsv(rhat, f);
    written.push_back("psrf_" + tag + ".tsv");
    for (const auto& [name, value] : rhat)
      if (value > 1.05)
        out << "warning: psrf " << cli_detail::round4(value) << " for " << name
            << " (chains may not have converged)\n";
  }

  if (store.has_u_summary()) {
    auto f = io::open_output(dir / ("u_effects_" + tag + ".tsv"));
    f << "group";
    for (const auto& rn : ds.random_names) f << "\tmean(u:" << rn << ")";
    for (const auto& rn : ds.random_names) f << "\tsd(u:" << rn << ")";
    f << '\n';
    const MatrixXd um = store.u_mean();
    const MatrixXd usd = store.u_sd();
    for (int g = 0; g < ds.j(); ++g) {
      f << ds.group_labels[g];
      for (int r = 0; r < ds.r(); ++r) f << '\t' << io::fmt(um(g, r));
      for (int r = 0; r < ds.r(); ++r) f << '\t' << io::fmt(usd(g, r));
      f << '\n';
    }
    written.push_back("u_effects_" + tag + ".tsv");
  }

  if (!config.outputs.histograms.empty()) {
    std::vector<std::string> names = store.meta().coef_names;
    names.push_back("sigma2");
    for (const auto& vn : v_entry_names(store.r_dim())) names.push_back(vn);
    for (const auto& want : config.outputs.histograms) {
      const auto it = std::find(names.begin(), names.end(), want);
      if (it == names.end())
        throw ConfigError("histograms: unknown parameter '" + want + "'");
      const int k = static_cast<int>(it - names.begin());
      std::vector<double> values(store.rows());
      for (long i = 0; i < store.rows(); ++i) {
        if (k < store.p())
          values[i] = store.beta_draws()(i, k);
        else if (k == store.p())
          values[i] = store.sigma2_draws()(i);
        else
          values[i] = store.v_draws_packed()(i, k - store.p() - 1);
      }
      const auto bins = histogram(values, config.outputs.histogram_bins);
      const std::string fname =
          "hist_" + cli_detail::sanitize(want) + "_" + tag + ".tsv";
      auto f = io::open_output(dir / fname);
      io::write_histogram_tsv(bins, f);
      written.push_back(fname);
    }
  }

  cli_detail::write_manifest(config, "fit", written, timer.elapsed_ms(),
                             hyp_name);

  out << "name\tmean\tsd\tcci_low\tcci_high\n";
  for (const auto& s : summaries)
    out << s.name << '\t' << cli_detail::round4(s.mean) << '\t'
        << cli_detail::round4(s.sd) << '\t' << cli_detail::round4(s.cci_low)
        << '\t' << cli_detail::round4(s.cci_high) << '\n';
  out << "outputs in " << config.outputs.directory << "\n";
}

// ---------------------------------------------------------------------------
// summarize: recompute tables from an existing chain dump

inline void cmd_summarize(const std::string& dump_path,
                          const std::string& out_dir, std::ostream& out) {
  cli_detail::RunTimer timer;
  const SampleStore store = io::read_chain_dump(dump_path);
  const auto summaries = summarize(store);
  const std::filesystem::path dir(out_dir);
  {
    auto f = io::open_output(dir / "estimates.tsv");
    io::write_summaries_tsv(summaries, f);
  }
  {
    auto f = io::open_output(dir / "estimates.json");
    f << io::summaries_to_json(summaries).dump(2) << '\n';
  }
  {
    ordered_json m;
    m["command"] = "summarize";
    m["version"] = kVersion;
    m["dump"] = dump_path;
    m["rows"] = store.rows();
    m["outputs"] = {"estimates.tsv", "estimates.json"};
    m["wall_ms"] = timer.elapsed_ms();
    auto f = io::open_output(dir / "manifest.json");
    f << m.dump(2) << '\n';
  }
  out << "name\tmean\tsd\tcci_low\tcci_high\n";
  for (const auto& s : summaries)
    out << s.name << '\t' << cli_detail::round4(s.mean) << '\t'
        << cli_detail::round4(s.sd) << '\t' << cli_detail::round4(s.cci_low)
        << '\t' << cli_detail::round4(s.cci_high) << '\n';
  out << "outputs in " << out_dir << "\n";
}

// ---------------------------------------------------------------------------
// dispatch

inline int run_cli(int argc, const char* const* argv, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"Bayesian estimation and inequality-constrained model "
               "selection for two-level linear models"};
  app.require_subcommand(1);

  std::string config_path, hypothesis, dump_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> iters, burnin, chains;
  std::optional<std::string> out_dir;

  auto add_overrides = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override mcmc.seed");
    cmd->add_option("--iters", iters, "override mcmc.iterations");
    cmd->add_option("--burnin", burnin, "override mcmc.burnin");
    cmd->add_option("--chains", chains, "override mcmc.chains");
    cmd->add_option("--out", out_dir, "override outputs.directory");
  };

  CLI::App* describe =
      app.add_subcommand("describe", "ingest the data and print its shape");
  describe->add_option("config", config_path, "run configuration (JSON)")
      ->required();

  CLI::App* select = app.add_subcommand(
      "select", "estimate posterior model probabilities for all hypotheses");
  select->add_option("config", config_path, "run configuration (JSON)")
      ->required();
  add_overrides(select);

  CLI::App* fit = app.add_subcommand(
      "fit", "constrained estimation under one hypothesis");
  fit->add_option("config", config_path, "run configuration (JSON)")
      ->required();
  fit->add_option("hypothesis", hypothesis, "hypothesis name to fit")
      ->required();
  add_overrides(fit);

  CLI::App* summarize_cmd = app.add_subcommand(
      "summarize", "recompute summary tables from a chain dump");
  summarize_cmd->add_option("dump", dump_path, "chain dump (TSV)")->required();
  summarize_cmd->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (summarize_cmd->parsed()) {
      cmd_summarize(dump_path, out_dir.value_or("."), out);
      return kExitOk;
    }
    RunConfig config = RunConfig::from_file(config_path);
    if (seed) config.mcmc.seed = *seed;
    if (iters) config.mcmc.iterations = *iters;
    if (burnin) config.mcmc.burnin = *burnin;
    if (chains) config.mcmc.chains = *chains;
    if (out_dir) config.outputs.directory = *out_dir;
    config.mcmc.validate();

    if (describe->parsed())
      cmd_describe(config, out);
    else if (select->parsed())
      cmd_select(config, out);
    else if (fit->parsed())
      cmd_fit(config, hypothesis, out);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace icmm
