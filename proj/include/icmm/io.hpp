#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icmm/gibbs.hpp"
#include "icmm/selection.hpp"
#include "icmm/summary.hpp"

namespace icmm {

using ordered_json = nlohmann::ordered_json;

namespace io {

// Short exact decimal form; reparsing gives the identical double, and the
// same value always prints the same bytes.
inline std::string fmt(double x) {
  char buf[40];
  for (int prec : {15, 16, 17}) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Selection report

inline void write_selection_tsv(const SelectionReport& report,
                                std::ostream& out) {
  out << "hypothesis\tprior_prop\tpost_prop\tbf\tpmp\tmc_se_prior\tmc_se_post\n";
  for (const auto& h : report.hypotheses) {
    out << h.hypothesis << '\t' << fmt(h.prior_prop) << '\t'
        << fmt(h.post_prop) << '\t' << fmt(h.bayes_factor) << '\t'
        << fmt(h.pmp) << '\t' << fmt(h.mc_se_prior) << '\t'
        << fmt(h.mc_se_post) << '\n';
  }
}

inline ordered_json selection_to_json(const SelectionReport& report) {
  ordered_json j;
  j["hypotheses"] = ordered_json::array();
  for (std::size_t i = 0; i < report.hypotheses.size(); ++i) {
    const auto& h = report.hypotheses[i];
    ordered_json row;
    row["hypothesis"] = h.hypothesis;
    row["prior_prop"] = h.prior_prop;
    row["post_prop"] = h.post_prop;
    row["bf"] = h.bayes_factor;
    row["pmp"] = h.pmp;
    row["mc_se_prior"] = h.mc_se_prior;
    row["mc_se_post"] = h.mc_se_post;
    row["mc_se_post_naive"] = h.mc_se_post_naive;
    row["prior_model_prob"] = report.prior_model_probs[i];
    j["hypotheses"].push_back(std::move(row));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Parameter summaries

inline void write_summaries_tsv(const std::vector<ParameterSummary>& rows,
                                std::ostream& out) {
  out << "name\tmean\tsd\tcci_low\tcci_high\n";
  for (const auto& r : rows)
    out << r.name << '\t' << fmt(r.mean) << '\t' << fmt(r.sd) << '\t'
        << fmt(r.cci_low) << '\t' << fmt(r.cci_high) << '\n';
}

inline ordered_json summaries_to_json(const std::vector<ParameterSummary>& rows) {
  ordered_json j = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json row;
    row["name"] = r.name;
    row["mean"] = r.mean;
    row["sd"] = r.sd;
    row["cci_low"] = r.cci_low;
    row["cci_high"] = r.cci_high;
    j.push_back(std::move(row));
  }
  return j;
}

inline void write_psrf_tsv(
    const std::vector<std::pair<std::string, double>>& rows, std::ostream& out) {
  out << "name\tpsrf\n";
  for (const auto& [name, value] : rows)
    out << name << '\t' << fmt(value) << '\n';
}

inline void write_histogram_tsv(const std::vector<HistogramBin>& bins,
                                std::ostream& out) {
  out << "bin_left\tbin_right\tcount\n";
  for (const auto& b : bins)
    out << fmt(b.left) << '\t' << fmt(b.right) << '\t' << b.count << '\n';
}

// ---------------------------------------------------------------------------
// Chain dump: one row per stored iteration, columns named by coefficient,
// then sigma2, then the packed V entries. '#' lines carry run metadata.

inline void write_chain_dump(const SampleStore& store, std::ostream& out) {
  const auto& meta = store.meta();
  out << "# icmm chain dump v1\n";
  out << "# hypothesis: " << meta.hypothesis_name << "\n";
  out << "# seed: " << meta.config.seed << "\n";
  out << "chain\titer";
  for (const auto& n : meta.coef_names) out << '\t' << n;
  out << "\tsigma2";
  for (const auto& n : v_entry_names(store.r_dim())) out << '\t' << n;
  out << '\n';

  const long per_chain =
      store.chains() > 0 ? store.rows() / store.chains() : store.rows();
  for (long i = 0; i < store.rows(); ++i) {
    out << (per_chain > 0 ? i / per_chain : 0) << '\t'
        << (per_chain > 0 ? i % per_chain : i);
    for (int c = 0; c < store.p(); ++c)
      out << '\t' << fmt(store.beta_draws()(i, c));
    out << '\t' << fmt(store.sigma2_draws()(i));
    for (int c = 0; c < store.v_draws_packed().cols(); ++c)
      out << '\t' << fmt(store.v_draws_packed()(i, c));
    out << '\n';
  }
}

// Rebuild a store from a dump produced by write_chain_dump.
inline SampleStore read_chain_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open chain dump '" + path + "'");
  std::string line;
  std::string hypothesis;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string tag = "# hypothesis: ";
      if (line.rfind(tag, 0) == 0) hypothesis = line.substr(tag.size());
      continue;
    }
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) header.push_back(field);
    break;
  }
  if (header.size() < 4 || header[0] != "chain" || header[1] != "iter")
    throw DataError("'" + path + "' is not an icmm chain dump");

  // columns: chain, iter, coefs..., sigma2, packed V entries
  std::size_t sigma_at = 0;
  for (std::size_t i = 2; i < header.size(); ++i)
    if (header[i] == "sigma2") {
      sigma_at = i;
      break;
    }
  if (sigma_at == 0) throw DataError("'" + path + "': no sigma2 column");
  const int p = static_cast<int>(sigma_at - 2);
  const int vcols = static_cast<int>(header.size() - sigma_at - 1);
  int r = 0;
  while (r * (r + 1) / 2 < vcols) ++r;
  if (r * (r + 1) / 2 != vcols || p < 1 || r < 1)
    throw DataError("'" + path + "': malformed dump header");

  StoreMeta meta;
  meta.hypothesis_name = hypothesis;
  for (int i = 0; i < p; ++i) meta.coef_names.push_back(header[2 + i]);
  for (int i = 0; i < r; ++i)
    meta.random_names.push_back(i == 0 ? "1" : "z" + std::to_string(i + 1));

  SampleStore store(meta, p, r);
  ParameterState s;
  s.u = MatrixXd::Zero(1, r);
  s.beta.resize(p);
  s.v.resize(r, r);
  long rowno = 1;
  while (std::getline(in, line)) {
    ++rowno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<double> vals;
    while (std::getline(ss, field, '\t')) vals.push_back(std::strtod(field.c_str(), nullptr));
    if (vals.size() != header.size())
      throw DataError("'" + path + "': ragged dump row " + std::to_string(rowno));
    for (int c = 0; c < p; ++c) s.beta(c) = vals[2 + c];
    s.sigma2 = vals[sigma_at];
    int k = static_cast<int>(sigma_at) + 1;
    for (int a = 0; a < r; ++a)
      for (int b = a; b < r; ++b) {
        s.v(a, b) = vals[k];
        s.v(b, a) = vals[k];
        ++k;
      }
    store.append(s);
  }
  if (store.rows() < 1) throw DataError("'" + path + "': dump has no draws");
  store.finish();
  return store;
}

}  // namespace io
}  // namespace icmm
