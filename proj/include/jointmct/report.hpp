#pragma once

// Rendering of joint results and simulation reports: text tables (4
// decimals), CSV and JSON (full precision), and CI plot data.

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jointmct/csv.hpp"
#include "jointmct/inference.hpp"
#include "jointmct/simulate.hpp"

namespace jointmct::report {

inline std::string fixed4(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s = buf;
  if (s == "-0.0000") s = "0.0000";
  return s;
}

inline nlohmann::json number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  return v;
}

inline std::string tag_text(const RowTag& t) {
  switch (t.kind) {
    case RowTag::Kind::stratum: return t.stratum;
    case RowTag::Kind::pooled: return "Pooled";
    case RowTag::Kind::global: return "Global";
  }
  return "";
}

inline nlohmann::json to_json(const JointResult& r) {
  nlohmann::json j;
  j["title"] = r.title;
  j["alpha"] = r.alpha;
  j["alternative"] = to_string(r.alternative);
  j["df"] = number(r.df_used);
  j["covariance"] = r.covariance_kind;
  j["scale"] = r.scale;
  j["critical_value"] = number(r.critical_value);
  j["mc_error"] = r.mc_error;
  auto rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"label", row.label},
                    {"tag", row.tag.str()},
                    {"estimate", number(row.estimate)},
                    {"se", number(row.se)},
                    {"t", number(row.tstat)},
                    {"p_adj", number(row.p_adj)},
                    {"p_raw", number(row.p_raw)},
                    {"sci_lower", number(row.sci_lower)},
                    {"sci_upper", number(row.sci_upper)}});
  }
  j["rows"] = rows;
  auto corr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.corr_used.rows(); ++i) {
    auto line = nlohmann::json::array();
    for (Eigen::Index k = 0; k < r.corr_used.cols(); ++k) line.push_back(r.corr_used(i, k));
    corr.push_back(line);
  }
  j["correlation"] = corr;
  return j;
}

inline void write_json(std::ostream& out, const std::vector<JointResult>& results) {
  nlohmann::json j;
  j["results"] = nlohmann::json::array();
  for (const auto& r : results) j["results"].push_back(to_json(r));
  out << j.dump(2) << '\n';
}

inline void write_csv(std::ostream& out, const std::vector<JointResult>& results) {
  csv::write_row(out, {"block", "no", "label", "tag", "estimate", "se", "t", "p_adj", "p_raw", "sci_lower", "sci_upper",
                       "df", "covariance", "alternative"});
  for (const auto& r : results) {
    int no = 0;
    for (const auto& row : r.rows)
      csv::write_row(out, {r.title, std::to_string(++no), row.label, row.tag.str(), csv::format_double(row.estimate),
                           csv::format_double(row.se), csv::format_double(row.tstat), csv::format_double(row.p_adj),
                           csv::format_double(row.p_raw), csv::format_double(row.sci_lower),
                           csv::format_double(row.sci_upper), csv::format_double(r.df_used), r.covariance_kind,
                           to_string(r.alternative)});
  }
}

inline void write_text(std::ostream& out, const JointResult& r) {
  out << (r.title.empty() ? std::string("joint test") : r.title) << "  (alternative: " << to_string(r.alternative)
      << ", covariance: " << r.covariance_kind << ", df: " << (std::isinf(r.df_used) ? std::string("Inf") : fixed4(r.df_used))
      << ", scale: " << r.scale << ")\n";
  std::size_t wl = 10, wt = 4;
  for (const auto& row : r.rows) {
    wl = std::max(wl, row.label.size());
    wt = std::max(wt, tag_text(row.tag).size());
  }
  auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  auto rpad = [](const std::string& s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };
  out << rpad("No", 3) << "  " << pad("Type", wt) << "  " << pad("Comparison", wl) << rpad("estimate", 11)
      << rpad("se", 9) << rpad("t", 9) << rpad("p.adj", 9) << rpad("lower", 11) << rpad("upper", 11) << '\n';
  int no = 0;
  std::string last_tag;
  for (const auto& row : r.rows) {
    const auto tag = tag_text(row.tag);
    out << rpad(std::to_string(++no), 3) << "  " << pad(tag == last_tag ? "" : tag, wt) << "  " << pad(row.label, wl)
        << rpad(fixed4(row.estimate), 11) << rpad(fixed4(row.se), 9) << rpad(fixed4(row.tstat), 9)
        << rpad(fixed4(row.p_adj), 9) << rpad(fixed4(row.sci_lower), 11) << rpad(fixed4(row.sci_upper), 11) << '\n';
    last_tag = tag;
  }
  out << "critical value " << fixed4(r.critical_value) << " for " << std::lround((1.0 - r.alpha) * 100)
      << "% simultaneous intervals; Monte Carlo error of p-values <= " << std::setprecision(2) << r.mc_error << "\n";
}

inline void write_plot_data(std::ostream& out, const std::vector<JointResult>& results) {
  csv::write_row(out, {"label", "estimate", "lower", "upper"});
  for (const auto& r : results)
    for (const auto& row : r.rows)
      csv::write_row(out, {row.label, csv::format_double(row.estimate), csv::format_double(row.sci_lower),
                           csv::format_double(row.sci_upper)});
}

inline nlohmann::json to_json(const SimReport& s) {
  nlohmann::json j;
  j["replications"] = s.replications;
  j["fwer_joint"] = s.fwer_joint;
  j["fwer_pretest"] = s.fwer_pretest;
  j["mc_se_joint"] = s.mc_se_joint;
  j["mc_se_pretest"] = s.mc_se_pretest;
  j["pretest_significant_rate"] = s.pretest_significant_rate;
  auto joint = nlohmann::json::array();
  for (std::size_t i = 0; i < s.joint_labels.size(); ++i)
    joint.push_back({{"label", s.joint_labels[i]}, {"true_null", static_cast<bool>(s.joint_true_null[i])},
                     {"rejection_rate", s.power_joint[i]}});
  j["joint_rows"] = joint;
  auto pre = nlohmann::json::array();
  for (std::size_t i = 0; i < s.primary_labels.size(); ++i)
    pre.push_back({{"label", s.primary_labels[i]}, {"rejection_rate", s.power_pretest[i]}});
  j["pretest_rows"] = pre;
  return j;
}

inline void write_csv(std::ostream& out, const SimReport& s) {
  csv::write_row(out, {"strategy", "label", "true_null", "rejection_rate"});
  for (std::size_t i = 0; i < s.joint_labels.size(); ++i)
    csv::write_row(out, {"joint", s.joint_labels[i], s.joint_true_null[i] ? "1" : "0", csv::format_double(s.power_joint[i])});
  for (std::size_t i = 0; i < s.primary_labels.size(); ++i)
    csv::write_row(out, {"pretest", s.primary_labels[i], "", csv::format_double(s.power_pretest[i])});
  csv::write_row(out, {"joint", "FWER", "", csv::format_double(s.fwer_joint)});
  csv::write_row(out, {"pretest", "FWER", "", csv::format_double(s.fwer_pretest)});
  csv::write_row(out, {"joint", "mc_se", "", csv::format_double(s.mc_se_joint)});
  csv::write_row(out, {"pretest", "mc_se", "", csv::format_double(s.mc_se_pretest)});
}

inline void write_text(std::ostream& out, const SimReport& s) {
  out << "replications            " << s.replications << '\n'
      << "FWER joint              " << fixed4(s.fwer_joint) << "  (mc se " << fixed4(s.mc_se_joint) << ")\n"
      << "FWER pre-test strategy  " << fixed4(s.fwer_pretest) << "  (mc se " << fixed4(s.mc_se_pretest) << ")\n"
      << "pre-test significant    " << fixed4(s.pretest_significant_rate) << '\n'
      << "\nrejection rates, joint procedure\n";
  for (std::size_t i = 0; i < s.joint_labels.size(); ++i)
    out << "  " << s.joint_labels[i] << (s.joint_true_null[i] ? "  [null]  " : "          ") << fixed4(s.power_joint[i])
        << '\n';
  out << "\nrejection rates, pre-test strategy (by comparison, whichever analysis ran)\n";
  for (std::size_t i = 0; i < s.primary_labels.size(); ++i)
    out << "  " << s.primary_labels[i] << "  " << fixed4(s.power_pretest[i]) << '\n';
}

}  // namespace jointmct::report
