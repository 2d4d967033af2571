#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "dynrisk/bsde_solver.hpp"
#include "dynrisk/concentration.hpp"
#include "dynrisk/duality.hpp"
#include "dynrisk/stochastics.hpp"
#include "dynrisk/transport.hpp"

namespace dynrisk {

using Json = nlohmann::ordered_json;

Json to_json(const Estimate& e);
Json to_json(const BoundFunction& l);
Json to_json(const RiskProfile& p);
Json to_json(const DeviationReport& r);
Json to_json(const DimensionFreeReport& r);
Json to_json(const PdeReport& r);
Json to_json(const DualGapReport& r);
Json to_json(const EntropyPenaltyCheck& c);
Json to_json(const T1Report& r);
Json to_json(const KrReport& r);
Json to_json(const TransportReport& r);
Json to_json(const AxiomReport& r);
Json to_json(const DiscretizationStudy& s);

/// RFC 4180 table: header row, CRLF line ends, fields quoted when they contain separators or quotes.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add(std::vector<std::string> row);
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Shortest decimal that round-trips; "inf", "-inf" and "nan" for non-finite values.
std::string format_number(double v);

/// Writes text atomically enough for report bundles: to a temporary file, then renamed.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace dynrisk
