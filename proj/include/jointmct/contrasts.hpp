#pragma once

// Multiple-contrast families over the primary factor and their expansion into
// the joint per-stratum + pooled matrix over cells.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jointmct/csv.hpp"
#include "jointmct/dataset.hpp"
#include "jointmct/error.hpp"

namespace jointmct {

enum class Alternative { greater, less, two_sided };

inline const char* to_string(Alternative a) {
  switch (a) {
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
    case Alternative::two_sided: return "two.sided";
  }
  return "?";
}

inline Alternative parse_alternative(const std::string& s) {
  if (s == "greater") return Alternative::greater;
  if (s == "less") return Alternative::less;
  if (s == "two-sided" || s == "two.sided" || s == "two_sided") return Alternative::two_sided;
  throw DataError("unknown alternative '" + s + "' (greater, less, two-sided)");
}

struct RowTag {
  enum class Kind { stratum, pooled, global };
  Kind kind = Kind::pooled;
  std::string stratum;  // b level for Kind::stratum

  static RowTag for_stratum(std::string b) { return {Kind::stratum, std::move(b)}; }
  static RowTag pooled() { return {Kind::pooled, {}}; }
  static RowTag global() { return {Kind::global, {}}; }

  std::string str() const {
    switch (kind) {
      case Kind::stratum: return "stratum:" + stratum;
      case Kind::pooled: return "pooled";
      case Kind::global: return "global";
    }
    return "?";
  }
  bool operator==(const RowTag&) const = default;
};

struct ContrastMatrix {
  Eigen::MatrixXd coef;  // rows x columns (a levels for prototypes, cells for joint matrices)
  std::vector<std::string> labels;
  std::vector<RowTag> tags;
  std::vector<std::string> column_names;
  Alternative alternative = Alternative::two_sided;

  Eigen::Index rows() const { return coef.rows(); }
  Eigen::Index cols() const { return coef.cols(); }
};

enum class ContrastFamily { dunnett, williams, tukey, grand_mean };

inline ContrastFamily parse_family(const std::string& s) {
  if (s == "dunnett") return ContrastFamily::dunnett;
  if (s == "williams") return ContrastFamily::williams;
  if (s == "tukey") return ContrastFamily::tukey;
  if (s == "grand_mean" || s == "grand-mean" || s == "anom") return ContrastFamily::grand_mean;
  throw DataError("unknown contrast family '" + s + "' (dunnett, williams, tukey, grand_mean)");
}

struct FamilySpec {
  ContrastFamily family = ContrastFamily::dunnett;
  std::optional<std::string> control;  // defaults to the first level
  bool ordered = false;                // williams needs an explicit dose order
};

namespace detail {

inline std::string fmt_weight_label(const std::vector<std::string>& parts, std::size_t m) {
  std::string s = "(";
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) s += "+";
    s += parts[i];
  }
  return s + ")/" + std::to_string(m);
}

inline void dedupe_labels(std::vector<std::string>& labels) {
  std::map<std::string, int> seen;
  for (auto& l : labels) {
    int& count = seen[l];
    if (count++ > 0) l += "#" + std::to_string(count);
  }
}

}  // namespace detail

// Single-stratum prototype over the primary levels.
//   dunnett:    k rows  level_i - control
//   tukey:      k(k+1)/2 rows  level_j - level_i  (i < j)
//   grand_mean: one row per level, (1 - n_i/N) at i and -n_j/N elsewhere
//   williams:   top level - control, then size-weighted mean of the top m levels - control, m = 2..k
inline ContrastMatrix build_family(const FamilySpec& spec, const std::vector<std::string>& levels,
                                   std::span<const double> n) {
  const auto L = levels.size();
  if (L < 2) throw ModelError("a contrast family needs at least 2 primary levels");
  if (n.size() != L) throw ModelError("per-level sample sizes do not match the level count");
  std::size_t control = 0;
  if (spec.control) {
    auto it = std::find(levels.begin(), levels.end(), *spec.control);
    if (it == levels.end()) throw ModelError("unknown control level '" + *spec.control + "'");
    control = static_cast<std::size_t>(it - levels.begin());
  }

  std::vector<Eigen::RowVectorXd> rows;
  std::vector<std::string> labels;
  auto unit = [&](std::size_t i) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(L));
    r(static_cast<Eigen::Index>(i)) = 1.0;
    return r;
  };

  switch (spec.family) {
    case ContrastFamily::dunnett:
      for (std::size_t i = 0; i < L; ++i) {
        if (i == control) continue;
        rows.push_back(unit(i) - unit(control));
        labels.push_back(levels[i] + " - " + levels[control]);
      }
      break;
    case ContrastFamily::tukey:
      for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = i + 1; j < L; ++j) {
          rows.push_back(unit(j) - unit(i));
          labels.push_back(levels[j] + " - " + levels[i]);
        }
      break;
    case ContrastFamily::grand_mean: {
      double N = 0.0;
      for (double v : n) N += v;
      if (N <= 0) throw ModelError("grand-mean contrasts need positive sample sizes");
      for (std::size_t i = 0; i < L; ++i) {
        Eigen::RowVectorXd r(static_cast<Eigen::Index>(L));
        for (std::size_t j = 0; j < L; ++j) r(static_cast<Eigen::Index>(j)) = -n[j] / N;
        r(static_cast<Eigen::Index>(i)) += 1.0;
        rows.push_back(r);
        labels.push_back(levels[i] + " - mean");
      }
      break;
    }
    case ContrastFamily::williams: {
      if (!spec.ordered) throw ModelError("williams contrasts require an explicit dose order (control first)");
      if (control != 0) throw ModelError("williams contrasts require the control to be the first ordered level");
      std::vector<std::string> parts;
      for (std::size_t m = 1; m < L; ++m) {
        // top m levels: L-1, L-2, ..., L-m
        double total = 0.0;
        for (std::size_t j = L - m; j < L; ++j) total += n[j];
        if (total <= 0) throw ModelError("williams contrasts need positive sample sizes");
        Eigen::RowVectorXd r = -unit(0);
        for (std::size_t j = L - m; j < L; ++j) r(static_cast<Eigen::Index>(j)) += n[j] / total;
        parts.push_back(levels[L - m]);
        rows.push_back(r);
        labels.push_back((m == 1 ? levels[L - 1] : detail::fmt_weight_label(parts, m)) + "-" + levels[0]);
      }
      break;
    }
  }

  ContrastMatrix cm;
  cm.coef.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(L));
  for (std::size_t i = 0; i < rows.size(); ++i) cm.coef.row(static_cast<Eigen::Index>(i)) = rows[i];
  detail::dedupe_labels(labels);
  cm.labels = std::move(labels);
  cm.tags.assign(rows.size(), RowTag::pooled());
  cm.column_names = levels;
  return cm;
}

// Per-level sizes pooled over strata, the usual input to build_family.
inline std::vector<double> primary_level_sizes(const CellLayout& L) {
  std::vector<double> n(L.n_a(), 0.0);
  for (std::size_t b = 0; b < L.n_b(); ++b)
    for (std::size_t a = 0; a < L.n_a(); ++a) n[a] += L.n(a, b);
  return n;
}

struct JointBlocks {
  bool per_stratum = true;
  bool pooled = true;
};

// Per-stratum rows place the prototype in each stratum's columns ("b:label").
// Pooled rows ("p: label") spread each primary coefficient over strata with
// weights w_ab = n_ab / sum_b' n_ab'.
inline ContrastMatrix expand_joint(const ContrastMatrix& proto, const CellLayout& L, JointBlocks blocks = {}) {
  if (static_cast<std::size_t>(proto.cols()) != L.n_a())
    throw ModelError("prototype has " + std::to_string(proto.cols()) + " columns but the design has " +
                     std::to_string(L.n_a()) + " primary levels");
  if (!blocks.per_stratum && !blocks.pooled) throw ModelError("expand_joint: no blocks requested");
  const auto q = proto.rows();
  const auto ncells = static_cast<Eigen::Index>(L.n_cells());
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<std::string> labels;
  std::vector<RowTag> tags;

  if (blocks.per_stratum) {
    for (std::size_t b = 0; b < L.n_b(); ++b)
      for (Eigen::Index r = 0; r < q; ++r) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(ncells);
        for (std::size_t a = 0; a < L.n_a(); ++a) {
          const double c = proto.coef(r, static_cast<Eigen::Index>(a));
          if (c == 0.0) continue;
          if (L.n(a, b) <= 0)
            throw ModelError("contrast '" + proto.labels[static_cast<std::size_t>(r)] + "' in stratum '" +
                             L.b_levels[b] + "' touches empty cell '" + L.cell_name(L.cell(a, b)) + "'");
          row(static_cast<Eigen::Index>(L.cell(a, b))) = c;
        }
        rows.push_back(row);
        labels.push_back(L.b_levels[b] + ":" + proto.labels[static_cast<std::size_t>(r)]);
        tags.push_back(RowTag::for_stratum(L.b_levels[b]));
      }
  }
  if (blocks.pooled) {
    for (Eigen::Index r = 0; r < q; ++r) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(ncells);
      for (std::size_t a = 0; a < L.n_a(); ++a) {
        const double c = proto.coef(r, static_cast<Eigen::Index>(a));
        if (c == 0.0) continue;
        double total = 0.0;
        for (std::size_t b = 0; b < L.n_b(); ++b) total += L.n(a, b);
        if (total <= 0)
          throw ModelError("pooled contrast '" + proto.labels[static_cast<std::size_t>(r)] + "' needs level '" +
                           L.a_levels[a] + "' which has no observations");
        for (std::size_t b = 0; b < L.n_b(); ++b)
          row(static_cast<Eigen::Index>(L.cell(a, b))) = c * L.n(a, b) / total;
      }
      rows.push_back(row);
      labels.push_back("p: " + proto.labels[static_cast<std::size_t>(r)]);
      tags.push_back(RowTag::pooled());
    }
  }

  ContrastMatrix out;
  out.coef.resize(static_cast<Eigen::Index>(rows.size()), ncells);
  for (std::size_t i = 0; i < rows.size(); ++i) out.coef.row(static_cast<Eigen::Index>(i)) = rows[i];
  detail::dedupe_labels(labels);
  out.labels = std::move(labels);
  out.tags = std::move(tags);
  for (std::size_t c = 0; c < L.n_cells(); ++c) out.column_names.push_back(L.cell_name(c));
  out.alternative = proto.alternative;
  return out;
}

// Rejects joint matrices that touch empty cells or do not match the layout.
inline void check_against_layout(const ContrastMatrix& cm, const CellLayout& L) {
  if (static_cast<std::size_t>(cm.cols()) != L.n_cells())
    throw ModelError("contrast matrix has " + std::to_string(cm.cols()) + " columns, model has " +
                     std::to_string(L.n_cells()) + " cells");
  for (Eigen::Index r = 0; r < cm.rows(); ++r)
    for (Eigen::Index c = 0; c < cm.cols(); ++c)
      if (cm.coef(r, c) != 0.0 && L.cell_n[static_cast<std::size_t>(c)] <= 0)
        throw ModelError("contrast '" + cm.labels[static_cast<std::size_t>(r)] + "' touches empty cell '" +
                         L.cell_name(static_cast<std::size_t>(c)) + "'");
}

struct ContrastDiagnostics {
  std::vector<std::size_t> nonzero_sum_rows;
  std::vector<std::size_t> zero_rows;
  std::vector<std::size_t> unnormalized_rows;  // positive part != 1 or negative part != -1
  std::vector<std::pair<std::size_t, std::size_t>> duplicate_rows;
  Eigen::Index rank = 0;

  bool ok() const { return nonzero_sum_rows.empty() && zero_rows.empty() && duplicate_rows.empty(); }
};

inline ContrastDiagnostics validate(const ContrastMatrix& cm, double tol = 1e-12) {
  ContrastDiagnostics d;
  for (Eigen::Index r = 0; r < cm.rows(); ++r) {
    const auto row = cm.coef.row(r);
    const auto i = static_cast<std::size_t>(r);
    double pos = 0.0, neg = 0.0, scale = 0.0;
    for (Eigen::Index c = 0; c < cm.cols(); ++c) {
      const double v = row(c);
      (v > 0 ? pos : neg) += v;
      scale = std::max(scale, std::abs(v));
    }
    if (scale == 0.0) {
      d.zero_rows.push_back(i);
      continue;
    }
    if (std::abs(pos + neg) > tol * std::max(1.0, scale)) d.nonzero_sum_rows.push_back(i);
    if (std::abs(pos - 1.0) > 1e-9 || std::abs(neg + 1.0) > 1e-9) d.unnormalized_rows.push_back(i);
    for (Eigen::Index s = r + 1; s < cm.rows(); ++s)
      if ((cm.coef.row(s) - row).cwiseAbs().maxCoeff() <= tol * std::max(1.0, scale))
        d.duplicate_rows.emplace_back(i, static_cast<std::size_t>(s));
  }
  if (cm.rows() > 0 && cm.cols() > 0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(cm.coef);
    lu.setThreshold(1e-10);
    d.rank = lu.rank();
  }
  return d;
}

// CSV with the row label in the first column, an optional "tag" column, then
// one column per coefficient (primary levels or "a.b" cells).
inline void write_contrasts_csv(std::ostream& out, const ContrastMatrix& cm) {
  std::vector<std::string> header{"label", "tag"};
  header.insert(header.end(), cm.column_names.begin(), cm.column_names.end());
  csv::write_row(out, header);
  for (Eigen::Index r = 0; r < cm.rows(); ++r) {
    std::vector<std::string> f{cm.labels[static_cast<std::size_t>(r)], cm.tags[static_cast<std::size_t>(r)].str()};
    for (Eigen::Index c = 0; c < cm.cols(); ++c) f.push_back(csv::format_double(cm.coef(r, c)));
    csv::write_row(out, f);
  }
}

namespace detail {

inline RowTag parse_tag(const std::string& s, const std::string& label, const std::vector<std::string>& b_levels) {
  if (s == "pooled") return RowTag::pooled();
  if (s == "global") return RowTag::global();
  if (s.rfind("stratum:", 0) == 0) return RowTag::for_stratum(s.substr(8));
  if (!s.empty()) throw DataError("unknown contrast tag '" + s + "'");
  for (const auto& b : b_levels)
    if (label.rfind(b + ":", 0) == 0) return RowTag::for_stratum(b);
  return RowTag::pooled();
}

}  // namespace detail

// Columns are matched by name against `column_names` (primary levels for a
// prototype, "a.b" cell names for a joint matrix); missing columns are zero.
inline ContrastMatrix read_contrasts_csv(std::istream& in, const std::vector<std::string>& column_names,
                                         const std::vector<std::string>& b_levels = {}) {
  const auto t = csv::read(in);
  if (t.header.size() < 2) throw DataError("contrast file needs a label column and coefficient columns");
  const bool has_tag = t.header.size() > 1 && t.header[1] == "tag";
  const std::size_t first = has_tag ? 2 : 1;
  std::vector<std::size_t> target;
  for (std::size_t j = first; j < t.header.size(); ++j) {
    auto it = std::find(column_names.begin(), column_names.end(), csv::trim(t.header[j]));
    if (it == column_names.end()) throw DataError("contrast column '" + t.header[j] + "' does not name a level or cell");
    target.push_back(static_cast<std::size_t>(it - column_names.begin()));
  }
  ContrastMatrix cm;
  cm.coef = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(column_names.size()));
  cm.column_names = column_names;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    cm.labels.push_back(row[0]);
    cm.tags.push_back(detail::parse_tag(has_tag ? csv::trim(row[1]) : std::string{}, row[0], b_levels));
    for (std::size_t j = first; j < row.size(); ++j) {
      auto v = csv::parse_double(row[j]);
      if (!v) throw DataError("contrast row " + std::to_string(i + 1) + ": bad coefficient '" + row[j] + "'");
      cm.coef(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(target[j - first])) = *v;
    }
  }
  detail::dedupe_labels(cm.labels);
  return cm;
}

}  // namespace jointmct
