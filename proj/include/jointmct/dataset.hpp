#pragma once

// Two-factor data in long format (continuous response) or as binomial cell
// counts. Cells are indexed B-major, A-minor: cell = b * |A| + a, so for
// dose x gender the order is (0,m),(1,m),...,(4,m),(0,f),...,(4,f).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "jointmct/csv.hpp"
#include "jointmct/error.hpp"

namespace jointmct {

// Cell structure shared by datasets and fits.
struct CellLayout {
  std::vector<std::string> a_levels;
  std::vector<std::string> b_levels;
  std::vector<double> cell_n;  // size |A|*|B|, B-major

  std::size_t n_a() const { return a_levels.size(); }
  std::size_t n_b() const { return b_levels.size(); }
  std::size_t n_cells() const { return a_levels.size() * b_levels.size(); }
  std::size_t cell(std::size_t a, std::size_t b) const { return b * a_levels.size() + a; }
  double n(std::size_t a, std::size_t b) const { return cell_n[cell(a, b)]; }

  // "a.b", mirroring R's interaction(A, B) level names.
  std::string cell_name(std::size_t c) const {
    return a_levels[c % n_a()] + "." + b_levels[c / n_a()];
  }

  std::size_t nonempty_cells() const {
    return static_cast<std::size_t>(std::count_if(cell_n.begin(), cell_n.end(), [](double n) { return n > 0; }));
  }
};

struct CellKey {
  std::string a_level;
  std::string b_level;
  bool operator==(const CellKey&) const = default;
};

struct Observation {
  double response;
  std::size_t a;
  std::size_t b;
};

struct CellSummary {
  std::size_t a;
  std::size_t b;
  std::size_t n;
  double mean;                    // NaN when n == 0
  std::optional<double> variance;  // missing when n < 2
};

namespace detail {

inline std::size_t level_index(std::vector<std::string>& levels, const std::string& label, bool explicit_order,
                               const std::string& factor, std::size_t row) {
  auto it = std::find(levels.begin(), levels.end(), label);
  if (it != levels.end()) return static_cast<std::size_t>(it - levels.begin());
  if (explicit_order)
    throw DataError("row " + std::to_string(row) + ": level '" + label + "' of " + factor +
                    " is not in the supplied level order");
  levels.push_back(label);
  return levels.size() - 1;
}

inline void check_unique(const std::vector<std::string>& levels, const std::string& factor) {
  for (std::size_t i = 0; i < levels.size(); ++i)
    for (std::size_t j = i + 1; j < levels.size(); ++j)
      if (levels[i] == levels[j]) throw DataError("duplicate level '" + levels[i] + "' in order for " + factor);
}

}  // namespace detail

class LongDataset {
 public:
  LongDataset() = default;

  LongDataset(std::vector<std::string> a_levels, std::vector<std::string> b_levels, std::vector<Observation> rows,
              bool a_order_explicit = false)
      : a_order_explicit_(a_order_explicit), rows_(std::move(rows)) {
    layout_.a_levels = std::move(a_levels);
    layout_.b_levels = std::move(b_levels);
    detail::check_unique(layout_.a_levels, "primary factor");
    detail::check_unique(layout_.b_levels, "secondary factor");
    if (layout_.a_levels.empty() || layout_.b_levels.empty()) throw DataError("dataset has no factor levels");
    layout_.cell_n.assign(layout_.n_cells(), 0.0);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const auto& r = rows_[i];
      if (r.a >= layout_.n_a() || r.b >= layout_.n_b())
        throw DataError("observation " + std::to_string(i + 1) + " refers to an unknown level");
      if (!std::isfinite(r.response))
        throw DataError("observation " + std::to_string(i + 1) + " has a non-finite response");
      layout_.cell_n[layout_.cell(r.a, r.b)] += 1.0;
    }
  }

  const CellLayout& layout() const { return layout_; }
  const std::vector<std::string>& a_levels() const { return layout_.a_levels; }
  const std::vector<std::string>& b_levels() const { return layout_.b_levels; }
  const std::vector<Observation>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  bool a_order_explicit() const { return a_order_explicit_; }
  std::size_t cell_n(std::size_t a, std::size_t b) const { return static_cast<std::size_t>(layout_.n(a, b)); }

  std::vector<std::vector<double>> values_by_cell() const {
    std::vector<std::vector<double>> out(layout_.n_cells());
    for (const auto& r : rows_) out[layout_.cell(r.a, r.b)].push_back(r.response);
    return out;
  }

  std::size_t a_index(const std::string& label) const { return index_of(layout_.a_levels, label, "primary"); }
  std::size_t b_index(const std::string& label) const { return index_of(layout_.b_levels, label, "secondary"); }

  // Rows of one stratum, as a single-stratum dataset keeping all primary levels.
  LongDataset restrict_to_stratum(std::size_t b) const {
    if (b >= layout_.n_b()) throw DataError("stratum index out of range");
    std::vector<Observation> kept;
    for (const auto& r : rows_)
      if (r.b == b) kept.push_back({r.response, r.a, 0});
    return LongDataset(layout_.a_levels, {layout_.b_levels[b]}, std::move(kept), a_order_explicit_);
  }

  // All strata merged into one pseudo-stratum.
  LongDataset collapse_strata(std::string label = "all") const {
    std::vector<Observation> merged;
    merged.reserve(rows_.size());
    for (const auto& r : rows_) merged.push_back({r.response, r.a, 0});
    return LongDataset(layout_.a_levels, {std::move(label)}, std::move(merged), a_order_explicit_);
  }

  LongDataset scaled(double c) const {
    auto copy = *this;
    for (auto& r : copy.rows_) r.response *= c;
    return copy;
  }

 private:
  static std::size_t index_of(const std::vector<std::string>& levels, const std::string& label, const char* which) {
    auto it = std::find(levels.begin(), levels.end(), label);
    if (it == levels.end()) throw DataError(std::string("unknown ") + which + " level '" + label + "'");
    return static_cast<std::size_t>(it - levels.begin());
  }

  CellLayout layout_;
  bool a_order_explicit_ = false;
  std::vector<Observation> rows_;
};

struct LoadOptions {
  std::string response_col;
  std::string primary_col;
  std::optional<std::string> secondary_col;  // absent: single pseudo-stratum
  std::optional<std::vector<std::string>> primary_order;
  std::optional<std::vector<std::string>> secondary_order;
};

inline constexpr const char* kPseudoStratum = "all";

inline LongDataset long_dataset_from_table(const csv::Table& t, const LoadOptions& opt) {
  auto need = [&](const std::string& name, const char* role) {
    auto c = t.column(name);
    if (!c) throw DataError(std::string("missing ") + role + " column '" + name + "'");
    return *c;
  };
  const auto resp = need(opt.response_col, "response");
  const auto prim = need(opt.primary_col, "primary");
  std::optional<std::size_t> sec;
  if (opt.secondary_col) sec = need(*opt.secondary_col, "secondary");
  if (t.rows.empty()) throw DataError("no data rows");

  std::vector<std::string> a_levels = opt.primary_order.value_or(std::vector<std::string>{});
  std::vector<std::string> b_levels;
  if (sec) b_levels = opt.secondary_order.value_or(std::vector<std::string>{});
  else b_levels = {kPseudoStratum};
  detail::check_unique(a_levels, "primary factor");
  detail::check_unique(b_levels, "secondary factor");

  std::vector<Observation> obs;
  obs.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::size_t rowno = i + 1;
    auto y = csv::parse_double(row[resp]);
    if (!y || !std::isfinite(*y))
      throw DataError("row " + std::to_string(rowno) + ": response '" + row[resp] + "' is not a finite number");
    auto a = detail::level_index(a_levels, csv::trim(row[prim]), opt.primary_order.has_value(), "primary factor",
                                 rowno);
    std::size_t b = 0;
    if (sec)
      b = detail::level_index(b_levels, csv::trim(row[*sec]), opt.secondary_order.has_value(), "secondary factor",
                              rowno);
    obs.push_back({*y, a, b});
  }
  return LongDataset(std::move(a_levels), std::move(b_levels), std::move(obs), opt.primary_order.has_value());
}

inline LongDataset load_long_csv(const std::string& path, const LoadOptions& opt) {
  auto t = csv::read_file(path);
  try {
    return long_dataset_from_table(t, opt);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_long_csv(std::ostream& out, const LongDataset& ds, const std::string& response = "response",
                           const std::string& primary = "primary", const std::string& secondary = "secondary") {
  csv::write_row(out, {response, primary, secondary});
  for (const auto& r : ds.rows())
    csv::write_row(out, {csv::format_double(r.response), ds.a_levels()[r.a], ds.b_levels()[r.b]});
}

// Ordered (a_level, b_level) pairs defining the coefficient order of all fits.
inline std::vector<CellKey> cell_index(const LongDataset& ds) {
  if (ds.empty()) throw DataError("cell_index: dataset is empty");
  std::vector<CellKey> out;
  out.reserve(ds.layout().n_cells());
  for (const auto& b : ds.b_levels())
    for (const auto& a : ds.a_levels()) out.push_back({a, b});
  return out;
}

inline std::vector<CellSummary> summarize(const LongDataset& ds) {
  const auto& L = ds.layout();
  auto values = ds.values_by_cell();
  std::vector<CellSummary> out;
  out.reserve(L.n_cells());
  for (std::size_t c = 0; c < L.n_cells(); ++c) {
    const auto& v = values[c];
    CellSummary s{c % L.n_a(), c / L.n_a(), v.size(), std::nan(""), std::nullopt};
    if (!v.empty()) {
      // two-pass for accuracy
      double sum = 0.0;
      for (double x : v) sum += x;
      s.mean = sum / static_cast<double>(v.size());
      if (v.size() >= 2) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.variance = ss / static_cast<double>(v.size() - 1);
      }
    }
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct BinomialCell {
  std::size_t a;
  std::size_t b;
  long long successes;
  long long trials;
};

class BinomialDataset {
 public:
  BinomialDataset() = default;

  // Duplicate (a, b) entries are summed.
  BinomialDataset(std::vector<std::string> a_levels, std::vector<std::string> b_levels,
                  const std::vector<BinomialCell>& cells, bool a_order_explicit = false)
      : a_order_explicit_(a_order_explicit) {
    layout_.a_levels = std::move(a_levels);
    layout_.b_levels = std::move(b_levels);
    detail::check_unique(layout_.a_levels, "primary factor");
    detail::check_unique(layout_.b_levels, "secondary factor");
    layout_.cell_n.assign(layout_.n_cells(), 0.0);
    successes_.assign(layout_.n_cells(), 0);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      const auto where = "cell " + std::to_string(i + 1) + ": ";
      if (c.a >= layout_.n_a() || c.b >= layout_.n_b()) throw DataError(where + "unknown level");
      if (c.trials < 1) throw DataError(where + "trials must be >= 1");
      if (c.successes < 0 || c.successes > c.trials) throw DataError(where + "successes must lie in [0, trials]");
      const auto k = layout_.cell(c.a, c.b);
      layout_.cell_n[k] += static_cast<double>(c.trials);
      successes_[k] += c.successes;
    }
  }

  const CellLayout& layout() const { return layout_; }
  const std::vector<std::string>& a_levels() const { return layout_.a_levels; }
  const std::vector<std::string>& b_levels() const { return layout_.b_levels; }
  bool a_order_explicit() const { return a_order_explicit_; }
  long long successes(std::size_t cell) const { return successes_[cell]; }
  long long trials(std::size_t cell) const { return static_cast<long long>(layout_.cell_n[cell]); }

  BinomialDataset collapse_strata(std::string label = "all") const {
    std::vector<BinomialCell> merged;
    for (std::size_t c = 0; c < layout_.n_cells(); ++c)
      if (trials(c) > 0) merged.push_back({c % layout_.n_a(), 0, successes(c), trials(c)});
    return BinomialDataset(layout_.a_levels, {std::move(label)}, merged, a_order_explicit_);
  }

 private:
  CellLayout layout_;
  bool a_order_explicit_ = false;
  std::vector<long long> successes_;
};

struct BinomialLoadOptions {
  std::string primary_col = "a_level";
  std::string secondary_col = "b_level";
  std::string successes_col = "successes";
  std::string trials_col = "trials";
  std::optional<std::vector<std::string>> primary_order;
  std::optional<std::vector<std::string>> secondary_order;
};

inline BinomialDataset binomial_dataset_from_table(const csv::Table& t, const BinomialLoadOptions& opt) {
  auto need = [&](const std::string& name) {
    auto c = t.column(name);
    if (!c) throw DataError("missing column '" + name + "'");
    return *c;
  };
  const auto ca = need(opt.primary_col), cb = need(opt.secondary_col);
  const auto cs = need(opt.successes_col), ct = need(opt.trials_col);
  if (t.rows.empty()) throw DataError("no data rows");
  auto a_levels = opt.primary_order.value_or(std::vector<std::string>{});
  auto b_levels = opt.secondary_order.value_or(std::vector<std::string>{});
  std::vector<BinomialCell> cells;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const auto rowno = i + 1;
    auto s = csv::parse_integer(row[cs]);
    auto n = csv::parse_integer(row[ct]);
    if (!s || !n) throw DataError("row " + std::to_string(rowno) + ": successes/trials must be integers");
    auto a = detail::level_index(a_levels, csv::trim(row[ca]), opt.primary_order.has_value(), "primary factor", rowno);
    auto b =
        detail::level_index(b_levels, csv::trim(row[cb]), opt.secondary_order.has_value(), "secondary factor", rowno);
    cells.push_back({a, b, *s, *n});
  }
  return BinomialDataset(std::move(a_levels), std::move(b_levels), cells, opt.primary_order.has_value());
}

inline BinomialDataset load_binomial_csv(const std::string& path, const BinomialLoadOptions& opt = {}) {
  auto t = csv::read_file(path);
  try {
    return binomial_dataset_from_table(t, opt);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace jointmct
