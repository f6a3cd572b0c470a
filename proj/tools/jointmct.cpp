// jointmct: joint multiple contrast tests for factorial designs.
//
// Exit codes: 0 success, 2 usage error, 1 data or model error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "jointmct/jointmct.hpp"

namespace {

using namespace jointmct;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = csv::trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

struct DataArgs {
  std::string data;
  std::string fixture;
  std::string response = "resp";
  std::string primary;
  std::string secondary;
  std::string order;
  std::string secondary_order;
};

struct TestArgs {
  std::string family = "dunnett";
  std::string control;
  std::string include = "per-stratum,pooled";
  std::string covariance = "model";
  std::string alternative = "two-sided";
  std::string contrasts;
  std::string add_two = "auto";
  double alpha = 0.05;
  double precision = 1e-4;
  std::uint64_t seed = kDefaultSeed;
  unsigned threads = 1;
  std::string format = "text";
  std::string plot;
};

struct Include {
  bool per_stratum = false, pooled = false, global = false, separate = false;
};

Include parse_include(const std::string& s) {
  Include inc;
  for (const auto& item : split_list(s)) {
    if (item == "per-stratum" || item == "per_stratum") inc.per_stratum = true;
    else if (item == "pooled") inc.pooled = true;
    else if (item == "global") inc.global = true;
    else if (item == "separate") inc.separate = true;
    else throw UsageError("--include: unknown block '" + item + "' (per-stratum, pooled, global, separate)");
  }
  if (!(inc.per_stratum || inc.pooled || inc.global || inc.separate)) throw UsageError("--include: nothing selected");
  return inc;
}

void add_data_options(CLI::App* cmd, DataArgs& d, bool binomial) {
  auto* src = cmd->add_option("--data", d.data, "input CSV");
  auto* fix = cmd->add_option("--fixture", d.fixture, "bundled fixture name (see fixtures/MANIFEST.json)");
  src->excludes(fix);
  if (binomial) {
    d.primary = "a_level";
    d.secondary = "b_level";
  } else {
    cmd->add_option("--response", d.response, "response column")->capture_default_str()->excludes(fix);
  }
  // fixtures carry their own columns and level order
  cmd->add_option("--primary", d.primary, "primary factor column")->excludes(fix);
  cmd->add_option("--secondary", d.secondary, "secondary factor (strata) column; omit for one stratum")->excludes(fix);
  cmd->add_option("--order", d.order, "explicit primary level order, comma separated (control first)")->excludes(fix);
  cmd->add_option("--secondary-order", d.secondary_order, "explicit secondary level order, comma separated")->excludes(fix);
}

void add_test_options(CLI::App* cmd, TestArgs& t, bool covariance) {
  cmd->add_option("--family", t.family, "dunnett, williams, tukey or grand_mean")->capture_default_str();
  cmd->add_option("--control", t.control, "control level (default: first level)");
  cmd->add_option("--include", t.include, "blocks: per-stratum, pooled, global, separate")->capture_default_str();
  if (covariance) cmd->add_option("--covariance", t.covariance, "model, hc0, hc1 or hc3")->capture_default_str();
  cmd->add_option("--alternative", t.alternative, "greater, less or two-sided")->capture_default_str();
  cmd->add_option("--alpha", t.alpha, "familywise level")->capture_default_str();
  cmd->add_option("--contrasts", t.contrasts, "user-defined contrast CSV (levels or a.b cells as columns)");
  cmd->add_option("--precision", t.precision, "Monte Carlo precision of p-values")->capture_default_str();
  cmd->add_option("--seed", t.seed, "random seed")->capture_default_str();
  cmd->add_option("--threads", t.threads, "worker threads for integration")->capture_default_str();
  cmd->add_option("--format", t.format, "text, csv or json")->check(CLI::IsMember({"text", "csv", "json"}))->capture_default_str();
  cmd->add_option("--emit-ci-plot", t.plot, "write label,estimate,lower,upper rows to this file");
}

JointTestOptions joint_options(const TestArgs& t) {
  JointTestOptions o;
  if (!(t.alpha > 0.0 && t.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
  if (!(t.precision > 0.0)) throw UsageError("--precision must be positive");
  o.alpha = t.alpha;
  o.alternative = parse_alternative(t.alternative);
  o.seed = t.seed;
  o.mvt.precision = t.precision;
  o.mvt.threads = std::max(1u, t.threads);
  return o;
}

std::optional<std::vector<std::string>> order_of(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return split_list(s);
}

std::string fixture_dir_for(const DataArgs&) { return default_fixture_dir(); }

LongDataset load_long(const DataArgs& d) {
  if (!d.fixture.empty()) return load_long_fixture(d.fixture, fixture_dir_for(d));
  if (d.data.empty()) throw UsageError("one of --data or --fixture is required");
  if (d.primary.empty()) throw UsageError("--primary is required with --data");
  LoadOptions o;
  o.response_col = d.response;
  o.primary_col = d.primary;
  if (!d.secondary.empty()) o.secondary_col = d.secondary;
  o.primary_order = order_of(d.order);
  o.secondary_order = order_of(d.secondary_order);
  return load_long_csv(d.data, o);
}

BinomialDataset load_binomial(const DataArgs& d) {
  if (!d.fixture.empty()) return load_binomial_fixture(d.fixture, fixture_dir_for(d));
  if (d.data.empty()) throw UsageError("one of --data or --fixture is required");
  BinomialLoadOptions o;
  o.primary_col = d.primary;
  o.secondary_col = d.secondary;
  o.primary_order = order_of(d.order);
  o.secondary_order = order_of(d.secondary_order);
  return load_binomial_csv(d.data, o);
}

FamilySpec family_spec(const TestArgs& t, bool ordered) {
  FamilySpec spec;
  try {
    spec.family = parse_family(t.family);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  if (!t.control.empty()) spec.control = t.control;
  spec.ordered = ordered;
  if (spec.family == ContrastFamily::williams && !ordered)
    throw UsageError("--family williams requires --order (dose levels, control first)");
  return spec;
}

// A user contrast file is either a prototype over primary levels (expanded
// like a built-in family) or a full matrix over a.b cells (used as is).
struct UserContrasts {
  ContrastMatrix cm;
  bool joint = false;
};

UserContrasts read_user_contrasts(const std::string& path, const CellLayout& L) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open contrast file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const auto text = buf.str();
  std::istringstream probe(text);
  const auto t = csv::read(probe);
  bool levels = true;
  for (std::size_t j = 1; j < t.header.size(); ++j) {
    if (j == 1 && t.header[j] == "tag") continue;
    if (std::find(L.a_levels.begin(), L.a_levels.end(), csv::trim(t.header[j])) == L.a_levels.end()) levels = false;
  }
  std::istringstream again(text);
  UserContrasts u;
  if (levels) {
    u.cm = read_contrasts_csv(again, L.a_levels);
  } else {
    std::vector<std::string> cells;
    for (std::size_t c = 0; c < L.n_cells(); ++c) cells.push_back(L.cell_name(c));
    u.cm = read_contrasts_csv(again, cells, L.b_levels);
    u.joint = true;
  }
  const auto diag = validate(u.cm);
  if (!diag.zero_rows.empty() || !diag.nonzero_sum_rows.empty())
    throw DataError("contrast file '" + path + "' has rows that are zero or do not sum to zero");
  return u;
}

ContrastMatrix prototype_for(const TestArgs& t, const CellLayout& L, bool ordered) {
  if (!t.contrasts.empty()) {
    auto u = read_user_contrasts(t.contrasts, L);
    if (u.joint) throw UsageError("a contrast file over a.b cells cannot be combined with separate or global blocks");
    return u.cm;
  }
  return family_for(family_spec(t, ordered), L);
}

void emit(const std::vector<JointResult>& results, const TestArgs& t) {
  if (t.format == "json") report::write_json(std::cout, results);
  else if (t.format == "csv") report::write_csv(std::cout, results);
  else
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (i) std::cout << '\n';
      report::write_text(std::cout, results[i]);
    }
  if (!t.plot.empty()) {
    std::ofstream out(t.plot);
    if (!out) throw DataError("cannot write '" + t.plot + "'");
    report::write_plot_data(out, results);
  }
}

void print_notices(const std::vector<std::string>& notices) {
  for (const auto& n : notices) std::cerr << "note: " << n << '\n';
}

// Shared driver for the gaussian and rank-based tests. `run` analyses one
// dataset with a joint contrast matrix.
template <class Run>
std::vector<JointResult> run_blocks(const LongDataset& ds, const TestArgs& t, const Include& inc, Run run) {
  const bool ordered = ds.a_order_explicit();
  std::vector<JointResult> results;
  const auto& L = ds.layout();
  if (inc.per_stratum || inc.pooled) {
    ContrastMatrix cm;
    if (!t.contrasts.empty()) {
      auto u = read_user_contrasts(t.contrasts, L);
      cm = u.joint ? u.cm : expand_joint(u.cm, L, {inc.per_stratum, inc.pooled});
    } else {
      cm = expand_joint(family_for(family_spec(t, ordered), L), L, {inc.per_stratum, inc.pooled});
    }
    auto r = run(ds, cm);
    r.title = "joint";
    results.push_back(std::move(r));
  }
  if (inc.global) {
    const auto flat = ds.collapse_strata();
    const auto proto = prototype_for(t, flat.layout(), ordered);
    auto cm = expand_joint(proto, flat.layout(), {true, false});
    for (std::size_t i = 0; i < cm.labels.size(); ++i) {
      cm.labels[i] = "g: " + proto.labels[i];
      cm.tags[i] = RowTag::global();
    }
    auto r = run(flat, cm);
    r.title = "global (strata collapsed)";
    results.push_back(std::move(r));
  }
  if (inc.separate) {
    for (std::size_t b = 0; b < ds.b_levels().size(); ++b) {
      const auto sub = ds.restrict_to_stratum(b);
      const auto proto = prototype_for(t, sub.layout(), ordered);
      auto r = run(sub, expand_joint(proto, sub.layout(), {true, false}));
      r.title = "separate: " + ds.b_levels()[b] + " alone";
      results.push_back(std::move(r));
    }
  }
  return results;
}

int cmd_test(const DataArgs& d, const TestArgs& t) {
  const auto inc = parse_include(t.include);
  const auto ds = load_long(d);
  const auto opt = joint_options(t);
  CovarianceKind kind;
  try {
    kind = parse_covariance(t.covariance);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  auto results = run_blocks(ds, t, inc, [&](const LongDataset& sub, const ContrastMatrix& cm) {
    const auto fit = fit_gaussian_cell_means(sub);
    print_notices(fit.notices);
    return run_joint_test(fit, select_covariance(sub, fit, kind), cm, opt, to_string(kind));
  });
  emit(results, t);
  return 0;
}

int cmd_nonpar(const DataArgs& d, const TestArgs& t) {
  const auto inc = parse_include(t.include);
  const auto ds = load_long(d);
  const auto opt = joint_options(t);
  auto results = run_blocks(ds, t, inc, [&](const LongDataset& sub, const ContrastMatrix& cm) {
    return run_joint_nonpar(sub, cm, opt);
  });
  emit(results, t);
  return 0;
}

int cmd_glm(const DataArgs& d, const TestArgs& t) {
  const auto inc = parse_include(t.include);
  if (inc.separate) throw UsageError("--include separate is not available for binomial data");
  std::optional<bool> add_two;
  if (t.add_two == "on") add_two = true;
  else if (t.add_two == "off") add_two = false;
  else if (t.add_two != "auto") throw UsageError("--add-two must be auto, on or off");
  const auto ds = load_binomial(d);
  const auto opt = joint_options(t);
  const bool ordered = ds.a_order_explicit();
  std::vector<JointResult> results;
  if (inc.per_stratum || inc.pooled) {
    const auto fit = fit_binomial_logit(ds, add_two);
    print_notices(fit.notices);
    ContrastMatrix cm;
    if (!t.contrasts.empty()) {
      auto u = read_user_contrasts(t.contrasts, ds.layout());
      cm = u.joint ? u.cm : expand_joint(u.cm, ds.layout(), {inc.per_stratum, inc.pooled});
    } else {
      cm = expand_joint(family_for(family_spec(t, ordered), ds.layout()), ds.layout(), {inc.per_stratum, inc.pooled});
    }
    auto r = run_joint_test(fit, fit.vcov_model, cm, opt);
    r.title = "joint";
    results.push_back(std::move(r));
  }
  if (inc.global) {
    if (!t.contrasts.empty()) throw UsageError("--include global needs a built-in --family");
    results.push_back(run_global_test(ds, family_spec(t, ordered), add_two, opt));
  }
  emit(results, t);
  return 0;
}

struct QuantileArgs {
  std::size_t k = 1;
  double rho = 0.0;
  std::string corr;
  double df = kInf;
  double alpha = 0.05;
  bool one_sided = false;
  bool two_sided = false;
  double precision = 1e-4;
  std::uint64_t seed = kDefaultSeed;
  std::string format = "text";
};

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  const auto records = csv::parse_records(in);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::vector<double> r;
    for (const auto& f : records[i]) {
      auto v = csv::parse_double(f);
      if (!v) throw DataError(path + ": row " + std::to_string(i + 1) + ": '" + f + "' is not a number");
      r.push_back(*v);
    }
    if (!r.empty()) rows.push_back(std::move(r));
  }
  const auto q = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != q)
      throw DataError(path + ": correlation matrix must be square");
    for (Eigen::Index j = 0; j < q; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

int cmd_quantile(const QuantileArgs& a) {
  if (a.one_sided && a.two_sided) throw UsageError("choose one of --one-sided and --two-sided");
  if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
  Eigen::MatrixXd corr;
  if (!a.corr.empty()) {
    corr = read_matrix_csv(a.corr);
  } else {
    if (a.k < 1) throw UsageError("--k must be at least 1");
    corr = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(a.k), static_cast<Eigen::Index>(a.k), a.rho);
    corr.diagonal().setOnes();
  }
  const Tail tail = a.one_sided ? Tail::one_sided : Tail::two_sided;
  MvtOptions o;
  o.precision = a.precision;
  const auto r = equicoordinate_quantile(corr, a.df, a.alpha, tail, o, a.seed);
  if (a.format == "json") {
    nlohmann::json j{{"quantile", r.value},
                     {"coverage", r.coverage.value},
                     {"mc_error", r.coverage.mc_error},
                     {"dimension", corr.rows()},
                     {"df", report::number(a.df)},
                     {"alpha", a.alpha},
                     {"tail", a.one_sided ? "one-sided" : "two-sided"}};
    std::cout << j.dump(2) << '\n';
  } else if (a.format == "csv") {
    csv::write_row(std::cout, {"quantile", "coverage", "mc_error"});
    csv::write_row(std::cout, {csv::format_double(r.value), csv::format_double(r.coverage.value),
                               csv::format_double(r.coverage.mc_error)});
  } else {
    std::cout << report::fixed4(r.value) << '\n';
  }
  return 0;
}

struct SimulateArgs {
  std::string scenario;
  std::optional<std::size_t> replications;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string format = "text";
};

int cmd_simulate(const SimulateArgs& a) {
  auto kv = config::KeyValues::parse_file(a.scenario);
  auto s = load_scenario(kv);
  if (a.replications) s.replications = *a.replications;
  if (a.seed) s.seed = *a.seed;
  if (a.threads) s.threads = *a.threads;
  s.validate();
  const auto rep = run_scenario(s);
  if (a.format == "json") std::cout << report::to_json(rep).dump(2) << '\n';
  else if (a.format == "csv") report::write_csv(std::cout, rep);
  else report::write_text(std::cout, rep);
  return 0;
}

int cmd_pretest(const DataArgs& d, const std::string& format) {
  const auto ds = load_long(d);
  const auto f = interaction_f_test(ds);
  if (format == "json") {
    std::cout << nlohmann::json{{"F", f.F}, {"df1", f.df1}, {"df2", f.df2}, {"p", f.p}}.dump(2) << '\n';
  } else if (format == "csv") {
    csv::write_row(std::cout, {"F", "df1", "df2", "p"});
    csv::write_row(std::cout, {csv::format_double(f.F), csv::format_double(f.df1), csv::format_double(f.df2),
                               csv::format_double(f.p)});
  } else {
    std::cout << "interaction F test: F(" << f.df1 << ", " << f.df2 << ") = " << report::fixed4(f.F)
              << ", p = " << report::fixed4(f.p) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint multiple contrast tests for factorial designs"};
  app.require_subcommand(1);

  DataArgs data;
  TestArgs targs;

  auto* test = app.add_subcommand("test", "gaussian joint multiple contrast test");
  add_data_options(test, data, false);
  add_test_options(test, targs, true);

  DataArgs np_data;
  TestArgs np_args;
  auto* nonpar = app.add_subcommand("nonpar", "rank-based joint test on relative effects");
  add_data_options(nonpar, np_data, false);
  add_test_options(nonpar, np_args, false);

  DataArgs glm_data;
  TestArgs glm_args;
  auto* glm = app.add_subcommand("glm", "binomial-logit joint test on aggregated counts");
  add_data_options(glm, glm_data, true);
  add_test_options(glm, glm_args, false);
  glm->add_option("--add-two", glm_args.add_two, "add-two adjustment: auto, on or off")->capture_default_str();

  QuantileArgs qargs;
  auto* quantile = app.add_subcommand("quantile", "equicoordinate quantile of the multivariate t/normal");
  quantile->add_option("--k", qargs.k, "dimension (exchangeable correlation)")->capture_default_str();
  quantile->add_option("--rho", qargs.rho, "common correlation")->capture_default_str();
  quantile->add_option("--corr", qargs.corr, "correlation matrix CSV (no header); overrides --k/--rho");
  quantile->add_option("--df", qargs.df, "degrees of freedom (default: normal)");
  quantile->add_option("--alpha", qargs.alpha, "level")->capture_default_str();
  quantile->add_flag("--one-sided", qargs.one_sided, "P(max T <= q) = 1 - alpha");
  quantile->add_flag("--two-sided", qargs.two_sided, "P(max |T| <= q) = 1 - alpha (default)");
  quantile->add_option("--precision", qargs.precision, "Monte Carlo precision")->capture_default_str();
  quantile->add_option("--seed", qargs.seed, "random seed")->capture_default_str();
  quantile->add_option("--format", qargs.format, "text, csv or json")->check(CLI::IsMember({"text", "csv", "json"}));

  SimulateArgs sargs;
  auto* simulate = app.add_subcommand("simulate", "FWER and power of the joint test against pre-testing");
  simulate->add_option("--scenario", sargs.scenario, "scenario file (key = value)")->required();
  simulate->add_option("--replications", sargs.replications, "override replications");
  simulate->add_option("--seed", sargs.seed, "override seed");
  simulate->add_option("--threads", sargs.threads, "override worker threads");
  simulate->add_option("--format", sargs.format, "text, csv or json")->check(CLI::IsMember({"text", "csv", "json"}));

  DataArgs pre_data;
  std::string pre_format = "text";
  auto* pretest = app.add_subcommand("pretest", "classical A x B interaction F test");
  add_data_options(pretest, pre_data, false);
  pretest->add_option("--format", pre_format, "text, csv or json")->check(CLI::IsMember({"text", "csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*test) return cmd_test(data, targs);
    if (*nonpar) return cmd_nonpar(np_data, np_args);
    if (*glm) return cmd_glm(glm_data, glm_args);
    if (*quantile) return cmd_quantile(qargs);
    if (*simulate) return cmd_simulate(sargs);
    if (*pretest) return cmd_pretest(pre_data, pre_format);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const FixtureUnavailable& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
