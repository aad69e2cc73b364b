#include "tsnca/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string_view>

namespace tsnca {
namespace {

std::string csv_field(std::string text) {
  std::replace_if(text.begin(), text.end(), [](char c) { return c == '\n' || c == '\r'; }, ' ');
  if (text.find_first_of(",\"") == std::string::npos) return text;
  std::string out = "\"";
  for (const char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_metric_fields(std::ostream& os, const metrics::MetricReport& r) {
  for (const double v : r.values()) os << ',' << format_number(v);
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  // %.17g always round-trips a double.
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

double parse_number(const std::string& text) {
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) throw std::invalid_argument("not a number: '" + text + "'");
  return v;
}

// Column labels carry units; SRER spells out its formula.
constexpr std::array<std::string_view, metrics::MetricReport::field_names.size()> kMetricColumns{
    "psnr_db", "ssim", "rmse", "uqi", "srer_db=20log10(|gt|/|gt-pred|)", "sam_deg",
    "angular_mean_deg", "angular_median_deg", "delta_e2000"};

void write_metric_csv(std::ostream& os, const EvaluationReport& report) {
  os << "name,status";
  for (const auto column : kMetricColumns) os << ',' << column;
  os << '\n';
  for (const auto& row : report.rows) {
    os << csv_field(row.name);
    if (row.report) {
      os << ",ok";
      write_metric_fields(os, *row.report);
    } else {
      os << ',' << csv_field("error: " + row.error);
      for (std::size_t i = 0; i < metrics::MetricReport::field_names.size(); ++i) os << ',';
    }
    os << '\n';
  }
  os << "mean,ok";
  write_metric_fields(os, report.aggregate);
  os << '\n';
}

void write_loss_log_header(std::ostream& os, const std::vector<std::string>& terms) {
  os << "step";
  for (const auto& t : terms) os << ',' << t;
  os << ",total\n";
}

void write_loss_log_row(std::ostream& os, const LossLogRow& row) {
  os << row.step;
  for (const auto& [name, v] : row.terms) os << ',' << format_number(v);
  os << ',' << format_number(row.total) << '\n';
}

void write_loss_log(std::ostream& os, const std::vector<LossLogRow>& rows) {
  if (rows.empty()) return;
  std::vector<std::string> names;
  for (const auto& [n, v] : rows.front().terms) names.push_back(n);
  write_loss_log_header(os, names);
  for (const auto& r : rows) write_loss_log_row(os, r);
}

}  // namespace tsnca
