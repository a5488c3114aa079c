#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "icmm/common.hpp"
#include "icmm/linalg.hpp"

namespace icmm {

// ---------------------------------------------------------------------------
// Raw tabular data

struct Column {
  std::string name;
  bool numeric = true;
  std::vector<double> values;       // populated when numeric
  std::vector<std::string> labels;  // populated when categorical

  std::size_t size() const { return numeric ? values.size() : labels.size(); }
};

class RawTable {
 public:
  explicit RawTable(std::vector<Column> columns) : columns_(std::move(columns)) {
    if (columns_.empty()) throw DataError("table has no columns");
    nrows_ = columns_.front().size();
    if (nrows_ < 1) throw DataError("no data rows");
    for (const auto& c : columns_) {
      if (c.name.empty()) throw DataError("column with empty name");
      if (c.size() != nrows_)
        throw DataError("column '" + c.name + "' has inconsistent length");
      if (index_.count(c.name))
        throw DataError("duplicate column name '" + c.name + "'");
      index_[c.name] = &c - columns_.data();
    }
  }

  std::size_t nrows() const { return nrows_; }
  std::size_t ncols() const { return columns_.size(); }

  bool has_column(const std::string& name) const { return index_.count(name) > 0; }

  const Column& column(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("unknown column '" + name + "'");
    return columns_[it->second];
  }

  const std::vector<Column>& columns() const { return columns_; }

 private:
  std::vector<Column> columns_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t nrows_ = 0;
};

enum class ColumnType { numeric, categorical };
using SchemaHints = std::map<std::string, ColumnType>;

namespace detail {

// RFC-4180 field splitting: quoted fields, doubled-quote escapes, CR/LF.
// Returns one row per record; quoted fields may span lines.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                       char delim) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      any = true;
    } else if (c == delim) {
      row.push_back(field);
      field.clear();
      any = true;
    } else if (c == '\n') {
      if (!field.empty() || !row.empty() || any) {
        row.push_back(field);
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else if (c == '\r') {
      // swallowed; LF handles the record break
    } else {
      field += c;
      any = true;
    }
  }
  if (!field.empty() || !row.empty() || any) {
    row.push_back(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline bool parse_double(const std::string& cell, double& out) {
  const char* s = cell.c_str();
  char* end = nullptr;
  out = std::strtod(s, &end);
  if (end == s) return false;
  while (*end == ' ' || *end == '\t') ++end;
  return *end == '\0' && std::isfinite(out);
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// Load a delimited text file (header row required). Numeric columns are
// parsed as floating point; categorical columns are kept as strings. Without
// a hint a column is numeric iff every cell parses; with a "numeric" hint any
// unparseable cell is an error naming its row and column.
inline RawTable load_csv(const std::string& path, const SchemaHints& hints = {},
                         char delim = ',') {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  const auto rows = detail::parse_csv(text, delim);
  if (rows.empty()) throw DataError("'" + path + "': empty file");
  const auto& header = rows.front();
  if (rows.size() < 2) throw DataError("'" + path + "': no data rows");

  const std::size_t ncols = header.size();
  const std::size_t ndata = rows.size() - 1;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != ncols)
      throw DataError("'" + path + "': row " + std::to_string(r + 1) + " has " +
                      std::to_string(rows[r].size()) + " fields, expected " +
                      std::to_string(ncols));
  }

  std::vector<Column> columns(ncols);
  for (std::size_t c = 0; c < ncols; ++c) {
    Column& col = columns[c];
    col.name = detail::trim(header[c]);
    const auto hint = hints.find(col.name);
    const bool forced_cat =
        hint != hints.end() && hint->second == ColumnType::categorical;
    const bool forced_num =
        hint != hints.end() && hint->second == ColumnType::numeric;

    bool all_numeric = !forced_cat;
    std::vector<double> values;
    values.reserve(ndata);
    for (std::size_t r = 1; all_numeric && r < rows.size(); ++r) {
      double v;
      const std::string cell = detail::trim(rows[r][c]);
      if (cell.empty() || !detail::parse_double(cell, v)) {
        if (forced_num)
          throw DataError("'" + path + "': cell '" + rows[r][c] + "' in column '" +
                          col.name + "', row " + std::to_string(r + 1) +
                          " is not numeric");
        all_numeric = false;
      } else {
        values.push_back(v);
      }
    }
    col.numeric = all_numeric;
    if (all_numeric) {
      col.values = std::move(values);
    } else {
      col.labels.reserve(ndata);
      for (std::size_t r = 1; r < rows.size(); ++r)
        col.labels.push_back(detail::trim(rows[r][c]));
    }
  }
  return RawTable(std::move(columns));
}

struct SummaryStats {
  double mean;
  double sd;  // divisor N-1
  double min;
  double max;
};

inline SummaryStats summary_stats(const RawTable& table, const std::string& name) {
  const Column& col = table.column(name);
  if (!col.numeric) throw DataError("column '" + name + "' is not numeric");
  const auto& v = col.values;
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = (v.size() > 1) ? std::sqrt(ss / (n - 1.0)) : 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {mean, sd, *lo, *hi};
}

// ---------------------------------------------------------------------------
// Model specification: named column transforms plus fixed/random term lists

enum class TransformKind { identity, center, scale2sd, indicator, interaction };

inline const char* transform_kind_name(TransformKind k) {
  switch (k) {
    case TransformKind::identity: return "identity";
    case TransformKind::center: return "center";
    case TransformKind::scale2sd: return "scale2sd";
    case TransformKind::indicator: return "indicator";
    case TransformKind::interaction: return "interaction";
  }
  return "?";
}

struct Transform {
  TransformKind kind = TransformKind::identity;
  std::string source;  // raw column or previously declared term
  std::string level;   // indicator only
  std::string a, b;    // interaction operands (declared term names)

  static Transform identity(std::string column) {
    return {TransformKind::identity, std::move(column), {}, {}, {}};
  }
  static Transform center(std::string source) {
    return {TransformKind::center, std::move(source), {}, {}, {}};
  }
  static Transform scale2sd(std::string source) {
    return {TransformKind::scale2sd, std::move(source), {}, {}, {}};
  }
  static Transform indicator(std::string column, std::string level) {
    return {TransformKind::indicator, std::move(column), std::move(level), {}, {}};
  }
  static Transform interaction(std::string a, std::string b) {
    return {TransformKind::interaction, {}, {}, std::move(a), std::move(b)};
  }
};

struct TermDef {
  std::string name;
  Transform transform;
};

// Term names in `fixed` are the coefficient identifiers used by the
// hypothesis language. Random terms are "1" (the constant) or declared terms.
struct ModelSpec {
  std::string response;
  std::string group;
  std::vector<TermDef> terms;
  std::vector<std::string> fixed;
  std::vector<std::string> random;
};

// What was done to produce a term column, with the constants needed to map a
// coefficient back to original predictor units. `slope` is d(term)/d(source
// variable) composed through the transform chain; NaN when the mapping is not
// a scaling (indicators).
struct TransformRecord {
  TransformKind kind = TransformKind::identity;
  double source_mean = std::numeric_limits<double>::quiet_NaN();
  double source_sd = std::numeric_limits<double>::quiet_NaN();
  double slope = 1.0;
};

// ---------------------------------------------------------------------------
// Assembled two-level design

// y_kj = x_kj b^T + z_kj u_j^T + e_kj, rows grouped by a 0-based group index
// (labels are preserved in first-appearance order).
struct TwoLevelDataset {
  VectorXd y;
  MatrixXd X;  // N x P
  MatrixXd Z;  // N x R
  std::vector<int> group;                // length N, values 0..J-1
  std::vector<int> group_sizes;          // length J
  std::vector<std::string> group_labels; // length J
  std::vector<std::string> coef_names;   // length P
  std::vector<std::string> random_names; // length R
  std::map<std::string, TransformRecord> transform_log;

  int n() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(X.cols()); }
  int r() const { return static_cast<int>(Z.cols()); }
  int j() const { return static_cast<int>(group_sizes.size()); }

  void validate() const {
    if (p() < 1 || r() < 1) throw DataError("dataset needs P >= 1 and R >= 1");
    if (j() < 2) throw DataError("dataset needs at least 2 groups");
    if (X.rows() != y.size() || Z.rows() != y.size() ||
        static_cast<int>(group.size()) != n())
      throw DataError("dataset row counts are inconsistent");
    long total = 0;
    for (int s : group_sizes) {
      if (s < 1) throw DataError("every group needs at least one row");
      total += s;
    }
    if (total != n()) throw DataError("group sizes do not sum to N");
    for (int g : group)
      if (g < 0 || g >= j()) throw DataError("group index out of range");
    if (!y.allFinite() || !X.allFinite() || !Z.allFinite())
      throw DataError("dataset contains non-finite values");
    if (static_cast<int>(coef_names.size()) != p() ||
        static_cast<int>(random_names.size()) != r())
      throw DataError("name lists do not match design dimensions");
  }
};

namespace detail {

struct TermColumn {
  std::vector<double> values;
  TransformRecord record;
};

inline std::string format_label(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Group labels in first-appearance order; works for numeric and categorical
// group columns alike.
inline void map_groups(const Column& col, std::vector<int>& index,
                       std::vector<std::string>& labels,
                       std::vector<int>& sizes) {
  std::unordered_map<std::string, int> seen;
  const std::size_t n = col.size();
  index.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string label =
        col.numeric ? format_label(col.values[i]) : col.labels[i];
    auto [it, inserted] = seen.emplace(label, static_cast<int>(labels.size()));
    if (inserted) {
      labels.push_back(label);
      sizes.push_back(0);
    }
    index[i] = it->second;
    ++sizes[it->second];
  }
}

}  // namespace detail

// Apply the declared transforms in order and assemble the design matrices.
// Transform constants (means, sds) come from the full table and are frozen in
// transform_log for later back-transformation.
inline TwoLevelDataset build_dataset(const RawTable& table, const ModelSpec& spec) {
  const std::size_t n = table.nrows();

  const Column& ycol = table.column(spec.response);
  if (!ycol.numeric)
    throw DataError("response column '" + spec.response + "' is not numeric");

  std::map<std::string, detail::TermColumn> built;
  std::vector<std::string> order;

  auto source_values = [&](const std::string& name,
                           const TransformRecord** rec) -> const std::vector<double>& {
    if (auto it = built.find(name); it != built.end()) {
      if (rec) *rec = &it->second.record;
      return it->second.values;
    }
    const Column& col = table.column(name);
    if (!col.numeric)
      throw DataError("column '" + name + "' is not numeric");
    if (rec) *rec = nullptr;
    return col.values;
  };

  for (const TermDef& def : spec.terms) {
    if (built.count(def.name))
      throw DataError("duplicate term name '" + def.name + "'");
    detail::TermColumn out;
    out.record.kind = def.transform.kind;
    switch (def.transform.kind) {
      case TransformKind::identity: {
        const TransformRecord* src = nullptr;
        out.values = source_values(def.transform.source, &src);
        out.record.slope = src ? src->slope : 1.0;
        break;
      }
      case TransformKind::center: {
        const TransformRecord* src = nullptr;
        const auto& v = source_values(def.transform.source, &src);
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(n);
        out.values.reserve(n);
        for (double x : v) out.values.push_back(x - mean);
        out.record.source_mean = mean;
        out.record.slope = src ? src->slope : 1.0;
        break;
      }
      case TransformKind::scale2sd: {
        const TransformRecord* src = nullptr;
        const auto& v = source_values(def.transform.source, &src);
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double sd =
            (n > 1) ? std::sqrt(ss / (static_cast<double>(n) - 1.0)) : 0.0;
        if (!(sd > 0.0))
          throw DataError("scale2sd on zero-variance source '" +
                          def.transform.source + "'");
        out.values.reserve(n);
        for (double x : v) out.values.push_back(x / (2.0 * sd));
        out.record.source_mean = mean;
        out.record.source_sd = sd;
        out.record.slope = (src ? src->slope : 1.0) / (2.0 * sd);
        break;
      }
      case TransformKind::indicator: {
        const Column& col = table.column(def.transform.source);
        out.values.reserve(n);
        if (col.numeric) {
          double lv;
          if (!detail::parse_double(def.transform.level, lv))
            throw DataError("indicator level '" + def.transform.level +
                            "' is not numeric but column '" +
                            def.transform.source + "' is");
          for (double x : col.values) out.values.push_back(x == lv ? 1.0 : 0.0);
        } else {
          for (const auto& s : col.labels)
            out.values.push_back(s == def.transform.level ? 1.0 : 0.0);
        }
        if (std::find(out.values.begin(), out.values.end(), 1.0) ==
            out.values.end())
          throw DataError("indicator level '" + def.transform.level +
                          "' absent from column '" + def.transform.source + "'");
        out.record.slope = std::numeric_limits<double>::quiet_NaN();
        break;
      }
      case TransformKind::interaction: {
        const auto ia = built.find(def.transform.a);
        const auto ib = built.find(def.transform.b);
        if (ia == built.end())
          throw DataError("interaction operand '" + def.transform.a +
                          "' is not a declared term");
        if (ib == built.end())
          throw DataError("interaction operand '" + def.transform.b +
                          "' is not a declared term");
        out.values.resize(n);
        for (std::size_t i = 0; i < n; ++i)
          out.values[i] = ia->second.values[i] * ib->second.values[i];
        out.record.slope = ia->second.record.slope * ib->second.record.slope;
        break;
      }
    }
    order.push_back(def.name);
    built.emplace(def.name, std::move(out));
  }

  TwoLevelDataset ds;
  ds.y = Eigen::Map<const VectorXd>(ycol.values.data(), n);

  const std::size_t p = spec.fixed.size();
  const std::size_t r = spec.random.size();
  if (p < 1) throw DataError("model needs at least one fixed term");
  if (r < 1) throw DataError("model needs at least one random term");

  ds.X.resize(n, p);
  for (std::size_t c = 0; c < p; ++c) {
    auto it = built.find(spec.fixed[c]);
    if (it == built.end())
      throw DataError("fixed term '" + spec.fixed[c] + "' is not declared");
    for (std::size_t i = 0; i < n; ++i) ds.X(i, c) = it->second.values[i];
    ds.coef_names.push_back(spec.fixed[c]);
    ds.transform_log[spec.fixed[c]] = it->second.record;
  }

  ds.Z.resize(n, r);
  for (std::size_t c = 0; c < r; ++c) {
    const std::string& name = spec.random[c];
    if (name == "1" || name == "intercept") {
      ds.Z.col(c).setOnes();
      ds.random_names.push_back("1");
      continue;
    }
    auto it = built.find(name);
    if (it == built.end())
      throw DataError("random term '" + name + "' is not declared");
    for (std::size_t i = 0; i < n; ++i) ds.Z(i, c) = it->second.values[i];
    ds.random_names.push_back(name);
    if (!ds.transform_log.count(name)) ds.transform_log[name] = it->second.record;
  }

  detail::map_groups(table.column(spec.group), ds.group, ds.group_labels,
                     ds.group_sizes);
  ds.validate();
  return ds;
}

}  // namespace icmm
