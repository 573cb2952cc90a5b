// Calibrated linear area/power/energy estimator for composed processors.
// Areas are NAND2-equivalent gate counts; the shipped table is fit so the
// full 37-instruction design totals 3870. Power is affine in gate count with
// a flip-flop surcharge; energy is reported per retired instruction.
// This is an estimator, not a synthesis result: only the aggregate anchors
// recorded in the calibration metadata are externally grounded.
#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "risp/gen.hpp"

namespace risp::metrics {

struct MetricsError : std::runtime_error {
  enum class Code { MissingWeight, NonPositiveInput, BadTable, NoBaseline };
  Code code;
  MetricsError(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

struct FixedUnits {
  double fetch = 0;
  double switch_per_case = 0;
  double regfile = 0;
  double pc_register = 0;
};

struct CostTable {
  std::map<std::string, double> weights;  // mnemonic -> NAND2 gate equivalents
  FixedUnits fixed;
  double power_alpha = 0;    // mW per NAND2
  double power_beta_ff = 0;  // mW per flip-flop
  nlohmann::json calibration;
};

const CostTable& default_cost_table();
CostTable table_from_json(const nlohmann::json& j);
nlohmann::json table_to_json(const CostTable& t);

// Sum of per-block weights, switch-per-case overhead, and fixed units.
double estimate_area(const gen::RispDesign& design,
                     const CostTable& table = default_cost_table());

// Architectural state flops charged by the power surcharge: the PC register
// plus the trap/halt flags. Register-file flops are folded into the regfile
// fixed-unit area, so subsets share one sequential-overhead figure.
double flipflop_count(const gen::RispDesign& design);

double estimate_power_mw(double nand2_total, double flipflops,
                         const CostTable& table = default_cost_table());

// (power_mW x 1e-3 x cpi / (fmax_kHz x 1e3)) x 1e9, i.e. nanojoules per
// retired instruction.
double epi_nj(double power_mw, double fmax_khz, double cpi);

struct CostReport {
  std::string name;
  double nand2_total = 0;
  double flipflops = 0;
  double power_mW = 0;
  double fmax_kHz = 0;
  double cpi = 1;
  double epi_nJ = 0;
};

CostReport cost_report(const gen::RispDesign& design, double fmax_khz, double cpi = 1.0,
                       const CostTable& table = default_cost_table());

// Report for an externally characterized core (a baseline): power comes from
// the same affine model over the supplied gate and flop counts.
CostReport manual_report(const std::string& name, double nand2_total, double flipflops,
                         double fmax_khz, double cpi,
                         const CostTable& table = default_cost_table());

nlohmann::json report_to_json(const CostReport& r);
CostReport report_from_json(const nlohmann::json& j);

// Per-design deltas against every baseline (area %, power %, EPI x) plus a
// geometric-mean summary row per baseline.
nlohmann::json compare_report(const std::vector<CostReport>& designs,
                              const std::vector<CostReport>& baselines);
std::string compare_table(const nlohmann::json& report);

}  // namespace risp::metrics
