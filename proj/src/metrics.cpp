#include "risp/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace risp::metrics {
namespace {

// Power anchors: the full 37-instruction design (3870 NAND2, 34 flops) and a
// bit-serial reference core (1896 NAND2, 164 flops) both dissipate 1.3 mW.
// Solving the two affine equations gives alpha and beta below.
constexpr double kFullNand2 = 3870.0;
constexpr double kFullFf = 34.0;
constexpr double kSerialNand2 = 1896.0;
constexpr double kSerialFf = 164.0;
constexpr double kAnchorPowerMw = 1.3;

CostTable build_default_table() {
  CostTable t;
  t.weights = {
      {"add", 78},  {"sub", 78},   {"sll", 96},  {"slt", 46},  {"sltu", 46},
      {"xor", 38},  {"srl", 96},   {"sra", 96},  {"or", 38},   {"and", 38},
      {"addi", 72}, {"slli", 96},  {"slti", 46}, {"sltiu", 46}, {"xori", 38},
      {"srli", 96}, {"srai", 96},  {"ori", 38},  {"andi", 38},
      {"lb", 30},   {"lh", 32},    {"lw", 78},   {"lbu", 26},  {"lhu", 28},
      {"sb", 22},   {"sh", 24},    {"sw", 64},
      {"beq", 46},  {"bne", 46},   {"blt", 52},  {"bge", 52},  {"bltu", 50},
      {"bgeu", 50},
      {"lui", 18},  {"auipc", 46},
      {"jal", 56},  {"jalr", 64},
  };
  t.fixed = {1224.0, 9.0, 120.0, 193.0};

  const double det = kFullNand2 * kSerialFf - kSerialNand2 * kFullFf;
  t.power_alpha = kAnchorPowerMw * (kSerialFf - kFullFf) / det;
  t.power_beta_ff = kAnchorPowerMw * (kFullNand2 - kSerialNand2) / det;

  t.calibration = {
      {"anchors",
       {{{"name", "full_rv32e_subset"},
         {"nand2", kFullNand2},
         {"flipflops", kFullFf},
         {"power_mW", kAnchorPowerMw},
         {"fmax_khz_range", {1625, 1925}},
         {"cpi", 1}},
        {{"name", "serial_reference_core"},
         {"nand2", kSerialNand2},
         {"flipflops", kSerialFf},
         {"power_mW", kAnchorPowerMw},
         {"fmax_khz", 1950},
         {"cpi", 32}}}},
      {"note",
       "block weights are model estimates fit so the full design totals 3870 "
       "NAND2; alpha/beta solve both 1.3 mW power anchors"},
  };
  return t;
}

void require_positive_weights(const CostTable& t) {
  for (const auto& [m, w] : t.weights) {
    if (w <= 0) throw MetricsError(MetricsError::Code::BadTable, "non-positive weight for " + m);
  }
  if (t.fixed.fetch <= 0 || t.fixed.switch_per_case <= 0 || t.fixed.regfile <= 0 ||
      t.fixed.pc_register <= 0) {
    throw MetricsError(MetricsError::Code::BadTable, "fixed units must be positive");
  }
}

double geomean(const std::vector<double>& xs) {
  double acc = 0;
  for (double x : xs) acc += std::log(x);
  return std::exp(acc / double(xs.size()));
}

}  // namespace

const CostTable& default_cost_table() {
  static const CostTable table = [] {
    CostTable t = build_default_table();
    require_positive_weights(t);
    return t;
  }();
  return table;
}

CostTable table_from_json(const nlohmann::json& j) {
  CostTable t;
  try {
    for (const auto& [m, w] : j.at("weights").items()) t.weights[m] = w.get<double>();
    const auto& f = j.at("fixed");
    t.fixed.fetch = f.at("fetch").get<double>();
    t.fixed.switch_per_case = f.at("switch_per_case").get<double>();
    t.fixed.regfile = f.at("regfile").get<double>();
    t.fixed.pc_register = f.at("pc_register").get<double>();
    const auto& p = j.at("power");
    t.power_alpha = p.at("alpha").get<double>();
    t.power_beta_ff = p.at("beta_ff").get<double>();
    if (j.contains("calibration")) t.calibration = j.at("calibration");
  } catch (const nlohmann::json::exception& e) {
    throw MetricsError(MetricsError::Code::BadTable, std::string("malformed cost table: ") + e.what());
  }
  require_positive_weights(t);
  return t;
}

nlohmann::json table_to_json(const CostTable& t) {
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [m, w] : t.weights) weights[m] = w;
  return {
      {"weights", weights},
      {"fixed",
       {{"fetch", t.fixed.fetch},
        {"switch_per_case", t.fixed.switch_per_case},
        {"regfile", t.fixed.regfile},
        {"pc_register", t.fixed.pc_register}}},
      {"power", {{"alpha", t.power_alpha}, {"beta_ff", t.power_beta_ff}}},
      {"calibration", t.calibration},
  };
}

double estimate_area(const gen::RispDesign& design, const CostTable& table) {
  double total = table.fixed.fetch + table.fixed.regfile + table.fixed.pc_register;
  for (const auto& block : design.subset.mnemonics) {
    auto it = table.weights.find(block);
    if (it == table.weights.end()) {
      throw MetricsError(MetricsError::Code::MissingWeight, "no weight for " + block);
    }
    total += it->second + table.fixed.switch_per_case;
  }
  return total;
}

double flipflop_count(const gen::RispDesign& design) {
  (void)design;
  return 34.0;  // 32-bit PC plus trap/halt flags
}

double estimate_power_mw(double nand2_total, double flipflops, const CostTable& table) {
  if (nand2_total <= 0 || flipflops < 0) {
    throw MetricsError(MetricsError::Code::NonPositiveInput, "power model needs positive inputs");
  }
  return table.power_alpha * nand2_total + table.power_beta_ff * flipflops;
}

double epi_nj(double power_mw, double fmax_khz, double cpi) {
  if (power_mw <= 0 || fmax_khz <= 0 || cpi <= 0) {
    throw MetricsError(MetricsError::Code::NonPositiveInput, "epi needs positive inputs");
  }
  return (power_mw * 1e-3) * cpi / (fmax_khz * 1e3) * 1e9;
}

CostReport cost_report(const gen::RispDesign& design, double fmax_khz, double cpi,
                       const CostTable& table) {
  CostReport r;
  r.name = design.name;
  r.nand2_total = estimate_area(design, table);
  r.flipflops = flipflop_count(design);
  r.power_mW = estimate_power_mw(r.nand2_total, r.flipflops, table);
  r.fmax_kHz = fmax_khz;
  r.cpi = cpi;
  r.epi_nJ = epi_nj(r.power_mW, r.fmax_kHz, r.cpi);
  return r;
}

CostReport manual_report(const std::string& name, double nand2_total, double flipflops,
                         double fmax_khz, double cpi, const CostTable& table) {
  CostReport r;
  r.name = name;
  r.nand2_total = nand2_total;
  r.flipflops = flipflops;
  r.power_mW = estimate_power_mw(nand2_total, flipflops, table);
  r.fmax_kHz = fmax_khz;
  r.cpi = cpi;
  r.epi_nJ = epi_nj(r.power_mW, r.fmax_kHz, r.cpi);
  return r;
}

nlohmann::json report_to_json(const CostReport& r) {
  return {
      {"name", r.name},         {"nand2_total", r.nand2_total}, {"flipflops", r.flipflops},
      {"power_mW", r.power_mW}, {"fmax_kHz", r.fmax_kHz},       {"cpi", r.cpi},
      {"epi_nJ", r.epi_nJ},
  };
}

CostReport report_from_json(const nlohmann::json& j) {
  CostReport r;
  try {
    r.name = j.at("name").get<std::string>();
    r.nand2_total = j.at("nand2_total").get<double>();
    r.flipflops = j.value("flipflops", 0.0);
    r.fmax_kHz = j.at("fmax_kHz").get<double>();
    r.cpi = j.at("cpi").get<double>();
    if (j.contains("power_mW")) {
      r.power_mW = j.at("power_mW").get<double>();
    } else {
      r.power_mW = estimate_power_mw(r.nand2_total, r.flipflops);
    }
    r.epi_nJ = j.value("epi_nJ", 0.0);
    if (r.epi_nJ <= 0) r.epi_nJ = epi_nj(r.power_mW, r.fmax_kHz, r.cpi);
  } catch (const nlohmann::json::exception& e) {
    throw MetricsError(MetricsError::Code::BadTable, std::string("malformed report: ") + e.what());
  }
  return r;
}

nlohmann::json compare_report(const std::vector<CostReport>& designs,
                              const std::vector<CostReport>& baselines) {
  if (baselines.empty()) {
    throw MetricsError(MetricsError::Code::NoBaseline, "at least one baseline is required");
  }
  nlohmann::json rows = nlohmann::json::array();
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& base : baselines) {
    std::vector<double> area_ratios, power_ratios, epi_gains;
    for (const auto& d : designs) {
      const double area_ratio = d.nand2_total / base.nand2_total;
      const double power_ratio = d.power_mW / base.power_mW;
      const double epi_gain = base.epi_nJ / d.epi_nJ;
      area_ratios.push_back(area_ratio);
      power_ratios.push_back(power_ratio);
      epi_gains.push_back(epi_gain);
      rows.push_back({
          {"design", d.name},
          {"baseline", base.name},
          {"nand2_total", d.nand2_total},
          {"area_delta_pct", (area_ratio - 1.0) * 100.0},
          {"power_delta_pct", (power_ratio - 1.0) * 100.0},
          {"epi_ratio", epi_gain},
      });
    }
    if (!designs.empty()) {
      summary.push_back({
          {"baseline", base.name},
          {"area_delta_pct_geomean", (geomean(area_ratios) - 1.0) * 100.0},
          {"power_delta_pct_geomean", (geomean(power_ratios) - 1.0) * 100.0},
          {"epi_ratio_geomean", geomean(epi_gains)},
      });
    }
  }
  return {{"rows", rows}, {"summary", summary}};
}

std::string compare_table(const nlohmann::json& report) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-16s %-22s %12s %10s %11s %8s\n", "design", "baseline",
                "nand2", "area%", "power%", "epi_x");
  out += buf;
  for (const auto& row : report.at("rows")) {
    std::snprintf(buf, sizeof(buf), "%-16s %-22s %12.0f %+9.1f%% %+10.1f%% %7.1fx\n",
                  row.at("design").get<std::string>().c_str(),
                  row.at("baseline").get<std::string>().c_str(),
                  row.at("nand2_total").get<double>(), row.at("area_delta_pct").get<double>(),
                  row.at("power_delta_pct").get<double>(), row.at("epi_ratio").get<double>());
    out += buf;
  }
  for (const auto& row : report.at("summary")) {
    std::snprintf(buf, sizeof(buf), "%-16s %-22s %12s %+9.1f%% %+10.1f%% %7.1fx\n", "geomean",
                  row.at("baseline").get<std::string>().c_str(), "",
                  row.at("area_delta_pct_geomean").get<double>(),
                  row.at("power_delta_pct_geomean").get<double>(),
                  row.at("epi_ratio_geomean").get<double>());
    out += buf;
  }
  return out;
}

}  // namespace risp::metrics
