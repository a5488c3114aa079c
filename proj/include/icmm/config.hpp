#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "icmm/constraints.hpp"
#include "icmm/data.hpp"
#include "icmm/gibbs.hpp"
#include "icmm/io.hpp"
#include "icmm/summary.hpp"

namespace icmm {

// Optional replacements for individual default_prior fields.
struct PriorOverrides {
  std::optional<double> beta_mean;
  std::optional<double> beta_var;
  std::optional<double> sigma2_df;
  std::optional<double> sigma2_scale;
  std::optional<double> v_df;
};

struct DataOptions {
  std::string csv;
  char delimiter = ',';
  SchemaHints types;
};

struct OutputOptions {
  std::string directory = "out";
  bool tsv = true;
  bool json = true;
  std::vector<DerivedExpression> expressions;
  std::vector<std::string> back_transform;  // term names to map to original units
  std::vector<std::string> histograms;      // parameter names
  int histogram_bins = 50;
};

// One declarative run description: data source, model, prior tweaks,
// hypotheses, chain settings, output requests.
struct RunConfig {
  DataOptions data;
  ModelSpec model;
  PriorOverrides prior;
  std::vector<std::pair<std::string, std::string>> hypotheses;  // name -> text
  std::vector<std::pair<std::string, double>> prior_model_probs;  // optional
  ChainConfig mcmc;
  long prior_draws = 0;  // 0: use mcmc.iterations
  OutputOptions outputs;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_json(const ordered_json& j, const std::string& where);

  ordered_json to_json() const;

  long effective_prior_draws() const {
    return prior_draws > 0 ? prior_draws : mcmc.iterations;
  }

  // Parsed hypotheses in declaration order, with an encompassing entry
  // prepended when none was declared.
  std::vector<Hypothesis> parsed_hypotheses() const {
    std::vector<Hypothesis> out;
    bool has_encompassing = false;
    for (const auto& [name, text] : hypotheses) {
      out.push_back(parse_hypothesis(name, text));
      has_encompassing |= out.back().empty();
    }
    if (!has_encompassing) {
      bool h1_taken = false;
      for (const auto& h : out) h1_taken |= (h.name == "H1");
      Hypothesis enc;
      enc.name = h1_taken ? "encompassing" : "H1";
      out.insert(out.begin(), std::move(enc));
    }
    return out;
  }

  EncompassingPrior resolve_prior(const TwoLevelDataset& ds) const {
    EncompassingPrior p = default_prior(ds);
    if (prior.beta_mean) p.beta_means.setConstant(*prior.beta_mean);
    if (prior.beta_var) p.beta_vars.setConstant(*prior.beta_var);
    if (prior.sigma2_df) p.sigma2_df = *prior.sigma2_df;
    if (prior.sigma2_scale) p.sigma2_scale = *prior.sigma2_scale;
    if (prior.v_df) p.v_df = *prior.v_df;
    p.validate(ds.p(), ds.r());
    return p;
  }
};

namespace detail {

inline void check_keys(const ordered_json& obj,
                       const std::set<std::string>& allowed,
                       const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError(where + ": unknown key '" + key + "'");
}

inline double require_number(const ordered_json& obj, const std::string& key,
                             const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_number())
    throw ConfigError(where + ": '" + key + "' must be a number");
  return obj[key].get<double>();
}

inline std::string require_string(const ordered_json& obj, const std::string& key,
                                  const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_string())
    throw ConfigError(where + ": '" + key + "' must be a string");
  return obj[key].get<std::string>();
}

inline Transform parse_transform(const ordered_json& j, const std::string& where) {
  check_keys(j, {"name", "kind", "source", "level", "a", "b"}, where);
  const std::string kind = require_string(j, "kind", where);
  if (kind == "identity") return Transform::identity(require_string(j, "source", where));
  if (kind == "center") return Transform::center(require_string(j, "source", where));
  if (kind == "scale2sd") return Transform::scale2sd(require_string(j, "source", where));
  if (kind == "indicator")
    return Transform::indicator(require_string(j, "source", where),
                                require_string(j, "level", where));
  if (kind == "interaction")
    return Transform::interaction(require_string(j, "a", where),
                                  require_string(j, "b", where));
  throw ConfigError(where + ": unknown transform kind '" + kind + "'");
}

inline ordered_json transform_to_json(const TermDef& def) {
  ordered_json j;
  j["name"] = def.name;
  j["kind"] = transform_kind_name(def.transform.kind);
  switch (def.transform.kind) {
    case TransformKind::interaction:
      j["a"] = def.transform.a;
      j["b"] = def.transform.b;
      break;
    case TransformKind::indicator:
      j["source"] = def.transform.source;
      j["level"] = def.transform.level;
      break;
    default:
      j["source"] = def.transform.source;
  }
  return j;
}

}  // namespace detail

inline RunConfig RunConfig::from_json(const ordered_json& j,
                                      const std::string& where) {
  detail::check_keys(j,
                     {"data", "model", "prior", "hypotheses",
                      "prior_model_probs", "mcmc", "outputs"},
                     where);
  RunConfig config;

  if (!j.contains("data") || !j["data"].is_object())
    throw ConfigError(where + ": missing 'data' section");
  {
    const auto& d = j["data"];
    detail::check_keys(d, {"csv", "delimiter", "types"}, where + ".data");
    config.data.csv = detail::require_string(d, "csv", where + ".data");
    if (d.contains("delimiter")) {
      const std::string delim = d["delimiter"].get<std::string>();
      if (delim == "tab" || delim == "\t")
        config.data.delimiter = '\t';
      else if (delim.size() == 1)
        config.data.delimiter = delim[0];
      else
        throw ConfigError(where + ".data: bad delimiter '" + delim + "'");
    }
    if (d.contains("types")) {
      for (const auto& [col, type] : d["types"].items()) {
        const std::string t = type.get<std::string>();
        if (t == "numeric")
          config.data.types[col] = ColumnType::numeric;
        else if (t == "categorical")
          config.data.types[col] = ColumnType::categorical;
        else
          throw ConfigError(where + ".data.types: bad type '" + t + "' for '" +
                            col + "'");
      }
    }
  }

  if (!j.contains("model") || !j["model"].is_object())
    throw ConfigError(where + ": missing 'model' section");
  {
    const auto& m = j["model"];
    detail::check_keys(m, {"response", "group", "terms", "fixed", "random"},
                       where + ".model");
    config.model.response = detail::require_string(m, "response", where + ".model");
    config.model.group = detail::require_string(m, "group", where + ".model");
    if (m.contains("terms")) {
      if (!m["terms"].is_array())
        throw ConfigError(where + ".model.terms must be an array");
      for (const auto& t : m["terms"]) {
        const std::string tw = where + ".model.terms";
        TermDef def;
        def.name = detail::require_string(t, "name", tw);
        def.transform = detail::parse_transform(t, tw + "." + def.name);
        config.model.terms.push_back(std::move(def));
      }
    }
    if (!m.contains("fixed") || !m["fixed"].is_array() || m["fixed"].empty())
      throw ConfigError(where + ".model: 'fixed' must list at least one term");
    for (const auto& f : m["fixed"])
      config.model.fixed.push_back(f.get<std::string>());
    if (!m.contains("random") || !m["random"].is_array() || m["random"].empty())
      throw ConfigError(where + ".model: 'random' must list at least one term");
    for (const auto& r : m["random"])
      config.model.random.push_back(r.get<std::string>());
  }

  if (j.contains("prior")) {
    const auto& p = j["prior"];
    detail::check_keys(
        p, {"beta_mean", "beta_var", "sigma2_df", "sigma2_scale", "v_df"},
        where + ".prior");
    if (p.contains("beta_mean")) config.prior.beta_mean = p["beta_mean"].get<double>();
    if (p.contains("beta_var")) config.prior.beta_var = p["beta_var"].get<double>();
    if (p.contains("sigma2_df")) config.prior.sigma2_df = p["sigma2_df"].get<double>();
    if (p.contains("sigma2_scale"))
      config.prior.sigma2_scale = p["sigma2_scale"].get<double>();
    if (p.contains("v_df")) config.prior.v_df = p["v_df"].get<double>();
  }

  if (j.contains("hypotheses")) {
    if (!j["hypotheses"].is_object())
      throw ConfigError(where + ".hypotheses must map names to constraint text");
    for (const auto& [name, text] : j["hypotheses"].items()) {
      if (!text.is_string())
        throw ConfigError(where + ".hypotheses." + name + " must be a string");
      config.hypotheses.emplace_back(name, text.get<std::string>());
    }
  }

  if (j.contains("prior_model_probs")) {
    for (const auto& [name, w] : j["prior_model_probs"].items())
      config.prior_model_probs.emplace_back(name, w.get<double>());
  }

  if (j.contains("mcmc")) {
    const auto& m = j["mcmc"];
    detail::check_keys(m,
                       {"iterations", "burnin", "thin", "chains", "seed",
                        "prior_draws", "store_u"},
                       where + ".mcmc");
    if (m.contains("iterations"))
      config.mcmc.iterations = m["iterations"].get<int>();
    if (m.contains("burnin")) config.mcmc.burnin = m["burnin"].get<int>();
    if (m.contains("thin")) config.mcmc.thin = m["thin"].get<int>();
    if (m.contains("chains")) config.mcmc.chains = m["chains"].get<int>();
    if (m.contains("seed")) config.mcmc.seed = m["seed"].get<std::uint64_t>();
    if (m.contains("prior_draws")) config.prior_draws = m["prior_draws"].get<long>();
    if (m.contains("store_u")) config.mcmc.store_u = m["store_u"].get<bool>();
    config.mcmc.validate();
  }

  if (j.contains("outputs")) {
    const auto& o = j["outputs"];
    detail::check_keys(o,
                       {"directory", "formats", "expressions", "back_transform",
                        "histograms", "histogram_bins"},
                       where + ".outputs");
    if (o.contains("directory"))
      config.outputs.directory = o["directory"].get<std::string>();
    if (o.contains("formats")) {
      config.outputs.tsv = false;
      config.outputs.json = false;
      for (const auto& f : o["formats"]) {
        const std::string fmt = f.get<std::string>();
        if (fmt == "tsv")
          config.outputs.tsv = true;
        else if (fmt == "json")
          config.outputs.json = true;
        else
          throw ConfigError(where + ".outputs.formats: unknown format '" + fmt +
                            "'");
      }
      if (!config.outputs.tsv && !config.outputs.json)
        throw ConfigError(where + ".outputs.formats must not be empty");
    }
    if (o.contains("expressions")) {
      for (const auto& [name, weights] : o["expressions"].items()) {
        DerivedExpression expr;
        expr.name = name;
        for (const auto& [coef, w] : weights.items()) {
          if (coef == "_const")
            expr.constant = w.get<double>();
          else
            expr.weights.emplace_back(coef, w.get<double>());
        }
        config.outputs.expressions.push_back(std::move(expr));
      }
    }
    if (o.contains("back_transform"))
      for (const auto& n : o["back_transform"])
        config.outputs.back_transform.push_back(n.get<std::string>());
    if (o.contains("histograms"))
      for (const auto& n : o["histograms"])
        config.outputs.histograms.push_back(n.get<std::string>());
    if (o.contains("histogram_bins"))
      config.outputs.histogram_bins = o["histogram_bins"].get<int>();
  }

  return config;
}

inline RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return from_json(j, path);
}

// Canonical form of the effective configuration; hashed into run manifests.
inline ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["data"]["csv"] = data.csv;
  j["data"]["delimiter"] = std::string(1, data.delimiter);
  for (const auto& [col, type] : data.types)
    j["data"]["types"][col] =
        (type == ColumnType::numeric) ? "numeric" : "categorical";
  j["model"]["response"] = model.response;
  j["model"]["group"] = model.group;
  j["model"]["terms"] = ordered_json::array();
  for (const auto& t : model.terms)
    j["model"]["terms"].push_back(detail::transform_to_json(t));
  j["model"]["fixed"] = model.fixed;
  j["model"]["random"] = model.random;
  if (prior.beta_mean) j["prior"]["beta_mean"] = *prior.beta_mean;
  if (prior.beta_var) j["prior"]["beta_var"] = *prior.beta_var;
  if (prior.sigma2_df) j["prior"]["sigma2_df"] = *prior.sigma2_df;
  if (prior.sigma2_scale) j["prior"]["sigma2_scale"] = *prior.sigma2_scale;
  if (prior.v_df) j["prior"]["v_df"] = *prior.v_df;
  j["hypotheses"] = ordered_json::object();
  for (const auto& [name, text] : hypotheses) j["hypotheses"][name] = text;
  if (!prior_model_probs.empty())
    for (const auto& [name, w] : prior_model_probs)
      j["prior_model_probs"][name] = w;
  j["mcmc"]["iterations"] = mcmc.iterations;
  j["mcmc"]["burnin"] = mcmc.burnin;
  j["mcmc"]["thin"] = mcmc.thin;
  j["mcmc"]["chains"] = mcmc.chains;
  j["mcmc"]["seed"] = mcmc.seed;
  j["mcmc"]["prior_draws"] = effective_prior_draws();
  j["mcmc"]["store_u"] = mcmc.store_u;
  j["outputs"]["directory"] = outputs.directory;
  ordered_json formats = ordered_json::array();
  if (outputs.tsv) formats.push_back("tsv");
  if (outputs.json) formats.push_back("json");
  j["outputs"]["formats"] = formats;
  for (const auto& e : outputs.expressions) {
    ordered_json w;
    for (const auto& [coef, weight] : e.weights) w[coef] = weight;
    if (e.constant != 0.0) w["_const"] = e.constant;
    j["outputs"]["expressions"][e.name] = w;
  }
  if (!outputs.back_transform.empty())
    j["outputs"]["back_transform"] = outputs.back_transform;
  if (!outputs.histograms.empty()) {
    j["outputs"]["histograms"] = outputs.histograms;
    j["outputs"]["histogram_bins"] = outputs.histogram_bins;
  }
  return j;
}

}  // namespace icmm
