#include "dynrisk/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace dynrisk {

namespace {

// JSON has no infinities; non-finite values become strings so they survive a round trip.
Json num(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

std::string verdict(Verdict v) { return std::string(to_string(v)); }

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Json to_json(const Estimate& e) { return Json{{"value", num(e.value)}, {"stderr", num(e.error)}}; }

Json to_json(const BoundFunction& l) {
  return Json{{"source", to_string(l.source)}, {"quad_coef", num(l.quad_coef)}, {"a_coef", num(l.a_coef)}};
}

Json to_json(const RiskProfile& p) {
  Json points = Json::array();
  for (const auto& q : p.points)
    points.push_back(Json{{"lambda", num(q.lambda)},
                          {"value", num(q.value.value)},
                          {"stderr", num(q.value.error)},
                          {"bound", num(q.bound)},
                          {"margin", num(q.margin)},
                          {"margin_stderr", num(q.error)},
                          {"bias", num(q.bias)},
                          {"scheme", q.scheme},
                          {"status", to_string(q.status)},
                          {"verdict", verdict(q.verdict)}});
  return Json{{"claim", p.claim},
              {"class", to_string(p.class_tag)},
              {"generator", p.generator},
              {"bound", to_json(p.l)},
              {"mean", to_json(p.mean)},
              {"convex", p.convex},
              {"dual_floor", p.dual_floor},
              {"verdict", verdict(p.verdict())},
              {"points", points}};
}

Json to_json(const DeviationReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back(Json{{"r", num(row.r)},
                        {"exceed", row.exceed},
                        {"tail", num(row.tail)},
                        {"tail_lower", num(row.ci.lower)},
                        {"tail_upper", num(row.ci.upper)},
                        {"bound", num(row.bound)},
                        {"verdict", verdict(row.verdict)}});
  return Json{{"claim", r.claim},
              {"bound", to_json(r.l)},
              {"samples", r.samples},
              {"median", num(r.median)},
              {"median_lower", num(r.median_ci.lower)},
              {"median_upper", num(r.median_ci.upper)},
              {"verdict", verdict(r.verdict())},
              {"rows", rows}};
}

Json to_json(const DimensionFreeReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back(Json{{"n", row.n},
                        {"value", num(row.value.value)},
                        {"stderr", num(row.value.error)},
                        {"bound", num(row.bound)},
                        {"margin", num(row.margin)},
                        {"margin_stderr", num(row.error)},
                        {"bias", num(row.bias)},
                        {"scheme", row.scheme},
                        {"verdict", verdict(row.verdict)}});
  return Json{{"claim", r.claim},
              {"lambda", num(r.lambda)},
              {"bound", to_json(r.l)},
              {"mean", to_json(r.mean)},
              {"bound_constant", r.bound_constant},
              {"verdict", verdict(r.bound_constant ? r.verdict() : Verdict::Violation)},
              {"rows", rows}};
}

Json to_json(const PdeReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json j{{"lambda", num(row.lambda)},   {"value", num(row.value)},   {"coarse", num(row.coarse)},
           {"fine", num(row.fine)},       {"budget", num(row.budget)}, {"reference", num(row.reference)},
           {"pass", row.pass}};
    if (row.monte_carlo) j["monte_carlo"] = to_json(*row.monte_carlo);
    rows.push_back(std::move(j));
  }
  return Json{{"generator", r.generator}, {"T", num(r.horizon)}, {"s", num(r.s)},  {"x", num(r.x)},
              {"pass", r.pass()},         {"rows", rows}};
}

Json to_json(const DualGapReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries)
    entries.push_back(Json{{"tilt", e.tilt},
                           {"dual", num(e.dual)},
                           {"stderr", num(e.error)},
                           {"alpha", num(e.alpha)},
                           {"gap", num(e.gap)},
                           {"pass", e.pass}});
  return Json{{"primal", to_json(r.primal)}, {"best_dual", num(r.best_dual)}, {"pass", r.pass}, {"entries", entries}};
}

Json to_json(const EntropyPenaltyCheck& c) {
  return Json{{"alpha", num(c.alpha)}, {"entropy", num(c.entropy)}, {"entropy_stderr", num(c.entropy_error)},
              {"lhs", num(c.lhs)},     {"rhs", num(c.rhs)},         {"margin", num(c.margin)},
              {"stderr", num(c.error)}, {"pass", c.pass}};
}

Json to_json(const T1Report& r) {
  return Json{{"w1", num(r.w1)},     {"h_w1", num(r.h_w1)},     {"kl", num(r.kl)},
              {"budget", num(r.budget)}, {"margin", num(r.margin)}, {"pass", r.pass}};
}

Json to_json(const KrReport& r) {
  return Json{{"family_sup", num(r.family_sup)}, {"argmax", r.argmax}, {"w1", num(r.w1)},
              {"gap", num(r.gap)},               {"lower_bound_holds", r.lower_bound_holds}};
}

Json to_json(const TransportReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries)
    entries.push_back(Json{{"tilt", e.tilt},
                           {"w1_lower", num(e.w1_lower)},
                           {"w1_stderr", num(e.w1_error)},
                           {"argmax", e.argmax},
                           {"lstar", num(e.lstar)},
                           {"alpha", num(e.alpha)},
                           {"margin", num(e.margin)},
                           {"stderr", num(e.error)},
                           {"pass", e.pass}});
  return Json{{"pass", r.pass}, {"entries", entries}};
}

Json to_json(const AxiomReport& r) {
  Json checks = Json::array();
  for (const auto& c : r.checks)
    checks.push_back(Json{{"name", c.name}, {"margin", num(c.margin)}, {"stderr", num(c.error)}, {"pass", c.pass}});
  return Json{{"generator", r.generator}, {"pass", r.pass()}, {"checks", checks}};
}

Json to_json(const DiscretizationStudy& s) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < s.levels.size(); ++i)
    rows.push_back(Json{{"n", s.levels[i]}, {"moment", num(s.moments[i].value)}, {"stderr", num(s.moments[i].error)}});
  return Json{{"p", num(s.p)}, {"reference_levels", s.fine_levels}, {"slope", num(s.slope)}, {"rows", rows}};
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw std::invalid_argument("csv: header row is mandatory");
}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw std::invalid_argument("csv: row width does not match the header");
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  std::string out;
  auto emit = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      const auto& f = row[i];
      if (f.find_first_of(",\"\r\n") == std::string::npos) {
        out += f;
      } else {
        out += '"';
        for (char c : f) {
          if (c == '"') out += '"';
          out += c;
        }
        out += '"';
      }
    }
    out += "\r\n";
  };
  emit(header_);
  for (const auto& r : rows_) emit(r);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace dynrisk
