#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "risp/blocklib.hpp"
#include "risp/gen.hpp"
#include "risp/isa.hpp"
#include "risp/metrics.hpp"
#include "risp/profile.hpp"
#include "risp/retarget.hpp"
#include "risp/sim.hpp"

namespace {

namespace fs = std::filesystem;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

nlohmann::json read_json(const std::string& path) { return nlohmann::json::parse(read_text(path)); }

// --json targets: a path, or "-" for standard output.
void emit_json(const std::string& target, const nlohmann::json& j) {
  if (target == "-") {
    std::cout << j.dump(2) << "\n";
  } else {
    write_text(target, j.dump(2) + "\n");
  }
}

uint32_t parse_hex(const std::string& s) {
  size_t used = 0;
  const unsigned long v = std::stoul(s, &used, 16);
  if (used != s.size() || v > 0xFFFFFFFFul) throw std::runtime_error("bad hex value: " + s);
  return uint32_t(v);
}

std::pair<uint32_t, uint32_t> parse_region(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) {
    throw std::runtime_error("expected START:END hex range, got " + s);
  }
  return {parse_hex(s.substr(0, colon)), parse_hex(s.substr(colon + 1))};
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

risp::profile::InstructionSubset subset_from_file(const std::string& path) {
  return risp::profile::subset_from_json(read_json(path), fs::path(path).stem().string());
}

// Listing form round-trips sparse images exactly; .bin is a zero-filled
// flat dump from address zero.
void write_image(const risp::profile::ProgramImage& img, const std::string& path) {
  if (fs::path(path).extension() == ".bin") {
    uint32_t top = 0;
    for (const auto& [addr, word] : img.words) top = std::max(top, addr + 4);
    std::vector<uint8_t> bytes(top, 0);
    for (const auto& [addr, word] : img.words) {
      for (int b = 0; b < 4; ++b) bytes[addr + b] = uint8_t(word >> (8 * b));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    return;
  }
  std::ostringstream os;
  char buf[32];
  for (const auto& [addr, word] : img.words) {
    std::snprintf(buf, sizeof buf, "%x: %08x", addr, word);
    os << buf;
    try {
      os << "  " << risp::isa::decode(word).spec->mnemonic;
    } catch (const risp::isa::IsaError&) {
      os << "  .word";
    }
    os << "\n";
  }
  write_text(path, os.str());
}

struct ProfileArgs {
  std::string image;
  std::string format;
  std::string base = "0";
  std::string json_out;
};

int run_profile(const ProfileArgs& a) {
  std::optional<risp::profile::SourceFormat> fmt;
  if (a.format == "elf32") fmt = risp::profile::SourceFormat::elf32;
  if (a.format == "bin") fmt = risp::profile::SourceFormat::flat_binary;
  if (a.format == "listing") fmt = risp::profile::SourceFormat::disasm_listing;
  const auto img = risp::profile::load_image(a.image, fmt, parse_hex(a.base));
  const auto prof = risp::profile::profile(img);
  if (!a.json_out.empty()) {
    emit_json(a.json_out, risp::profile::profile_to_json(prof));
  }
  if (a.json_out != "-") std::cout << risp::profile::profile_to_table(prof);
  return 0;
}

struct GenArgs {
  std::string subset_from;
  std::string subset_list;
  std::string out_dir;
  std::string name = "risp";
  bool no_regfile = false;
  std::string with_tb;
  std::string sig = "2000:2020";
  std::string json_out;
};

int run_gen(const GenArgs& a) {
  const auto subset = !a.subset_from.empty()
                          ? subset_from_file(a.subset_from)
                          : risp::profile::make_subset(split_commas(a.subset_list));
  auto design = risp::gen::build_design(subset, a.name);
  risp::gen::EmitOptions opts;
  opts.no_regfile = a.no_regfile;
  auto manifest = risp::gen::emit_rtl(design, a.out_dir, opts);

  if (!a.with_tb.empty()) {
    const auto program = risp::profile::load_image(a.with_tb);
    const auto region = parse_region(a.sig);
    const std::string tb = risp::gen::emit_integration_testbench(design, program, region);
    const std::string tb_file = "tb_" + a.name + ".v";
    write_text((fs::path(a.out_dir) / tb_file).string(), tb);
    manifest["testbench"] = tb_file;
  }

  if (!a.json_out.empty()) emit_json(a.json_out, manifest);
  if (a.json_out != "-") {
    std::cout << a.name << ": " << design.blocks.size() << " instruction blocks, "
              << design.manifest.size() << " files in " << a.out_dir << "\n";
  }
  return 0;
}

struct SimArgs {
  std::string image;
  std::string subset_file;
  std::string sig;
  std::string trace_file;
  uint64_t max_cycles = 10'000'000;
  std::string json_out;
};

int run_sim(const SimArgs& a) {
  const auto img = risp::profile::load_image(a.image);
  risp::sim::SimConfig cfg;
  if (!a.subset_file.empty()) cfg.subset = subset_from_file(a.subset_file);
  if (!a.sig.empty()) cfg.signature_region = parse_region(a.sig);
  cfg.max_cycles = a.max_cycles;
  cfg.trace = !a.trace_file.empty();

  const auto res = risp::sim::run(img, cfg);
  if (!a.trace_file.empty()) write_text(a.trace_file, res.trace);
  if (!a.json_out.empty()) emit_json(a.json_out, risp::sim::run_result_to_json(res));

  if (a.json_out != "-") {
    std::cout << "status: " << risp::sim::run_status_name(res.status) << "\n"
              << "cycles: " << res.cycles << "\n";
    if (res.signature) std::cout << "signature:\n" << risp::sim::signature(res);
  }
  if (res.status == risp::sim::RunStatus::halted) return 0;

  char pc_buf[16];
  if (res.status == risp::sim::RunStatus::subset_violation) {
    std::snprintf(pc_buf, sizeof pc_buf, "%x", res.violation_pc);
    std::cerr << "subset violation: " << res.violation_mnemonic << " at pc 0x" << pc_buf << "\n";
  } else if (res.status == risp::sim::RunStatus::trapped) {
    std::snprintf(pc_buf, sizeof pc_buf, "%x", res.final_state.pc);
    std::cerr << "trap: " << risp::isa::trap_name(res.trap) << " at pc 0x" << pc_buf << "\n";
  } else {
    std::cerr << "run ended: " << risp::sim::run_status_name(res.status) << "\n";
  }
  return 1;
}

struct RetargetArgs {
  std::string image;
  std::string subset_file;
  std::string catalog_file;
  std::string emit_macros;
  std::string out;
  std::string json_out;
};

int run_retarget(const RetargetArgs& a) {
  const auto img = risp::profile::load_image(a.image);
  const auto subset = subset_from_file(a.subset_file);
  const auto catalog = a.catalog_file.empty()
                           ? risp::retarget::default_catalog()
                           : risp::retarget::catalog_from_json(read_json(a.catalog_file));

  const auto p = risp::retarget::plan(img, subset, catalog);
  const auto out_img = risp::retarget::apply(p);
  write_image(out_img, a.out);
  if (!a.emit_macros.empty()) {
    write_text(a.emit_macros, risp::retarget::emit_macro_file(catalog, subset));
  }
  if (!a.json_out.empty()) emit_json(a.json_out, risp::retarget::plan_to_json(p));
  if (a.json_out != "-") {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "%s: %zu rewrite sites, %llu -> %llu words (overhead %.1f%%), wrote %s\n",
                  img.name.c_str(), p.rewrites.size(),
                  static_cast<unsigned long long>(p.size_before),
                  static_cast<unsigned long long>(p.size_after),
                  100.0 * p.overhead_fraction(), a.out.c_str());
    std::cout << buf;
  }
  return 0;
}

struct VerifyArgs {
  std::string only;
  std::size_t vectors = 10000;
  bool mutations = false;
  std::string json_out;
};

int run_verify_blocks(const VerifyArgs& a) {
  std::vector<std::string> names;
  if (a.only.empty()) {
    for (const auto& block : risp::blocklib::library()) names.push_back(block.mnemonic);
  } else {
    names = split_commas(a.only);
  }

  nlohmann::json results = nlohmann::json::array();
  bool all_ok = true;
  for (const auto& name : names) {
    const auto& block = risp::blocklib::get_block(name);
    const auto vectors = risp::blocklib::gen_vectors(block, a.vectors);
    std::size_t failures = 0;
    for (const auto& v : vectors) {
      if (risp::blocklib::block_eval(block, v.stimulus) != v.expected) ++failures;
    }

    std::size_t killed = 0, total = 0;
    std::string surviving;
    if (a.mutations) {
      total = risp::blocklib::mutation_names(block).size();
      try {
        const auto report = risp::blocklib::mutation_smoke(block, vectors);
        for (const auto& o : report.outcomes) killed += o.killed ? 1 : 0;
      } catch (const risp::blocklib::BlockError& e) {
        surviving = e.what();
      }
    }

    const bool ok = failures == 0 && surviving.empty();
    all_ok = all_ok && ok;
    if (a.json_out != "-") {
      std::cout << (ok ? "ok   " : "FAIL ") << name << ": " << vectors.size()
                << " vectors, " << failures << " mismatches";
      if (a.mutations) std::cout << ", mutants killed " << killed << "/" << total;
      if (!surviving.empty()) std::cout << " (" << surviving << ")";
      std::cout << "\n";
    }
    nlohmann::json entry{{"mnemonic", name},
                         {"vectors", vectors.size()},
                         {"failures", failures},
                         {"ok", ok}};
    if (a.mutations) {
      entry["mutants_killed"] = killed;
      entry["mutants_total"] = total;
    }
    results.push_back(std::move(entry));
  }
  if (!a.json_out.empty()) emit_json(a.json_out, results);
  return all_ok ? 0 : 1;
}

struct ReportArgs {
  std::vector<std::string> designs;
  std::vector<std::string> baselines;
  std::string cost_table;
  std::string json_out;
};

int run_report(const ReportArgs& a) {
  const risp::metrics::CostTable table = a.cost_table.empty()
                                             ? risp::metrics::default_cost_table()
                                             : risp::metrics::table_from_json(read_json(a.cost_table));

  // Accepts either a saved cost report or the profiler's subset JSON; the
  // latter is costed through the model (fmax_kHz/cpi fields optional).
  auto load_report = [&](const std::string& path) {
    const auto j = read_json(path);
    if (j.contains("nand2_total")) return risp::metrics::report_from_json(j);
    auto subset = risp::profile::subset_from_json(j, fs::path(path).stem().string());
    auto design = risp::gen::build_design(subset, subset.label);
    const double fmax = j.value("fmax_kHz", 1800.0);
    const double cpi = j.value("cpi", 1.0);
    return risp::metrics::cost_report(design, fmax, cpi, table);
  };

  std::vector<risp::metrics::CostReport> designs, baselines;
  for (const auto& path : a.designs) designs.push_back(load_report(path));
  for (const auto& path : a.baselines) baselines.push_back(load_report(path));

  const auto cmp = risp::metrics::compare_report(designs, baselines);
  if (!a.json_out.empty()) emit_json(a.json_out, cmp);
  if (a.json_out != "-") std::cout << risp::metrics::compare_table(cmp);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RISC-V instruction subset processor toolchain"};
  app.require_subcommand(1);
  int rc = 0;

  ProfileArgs pa;
  auto* profile = app.add_subcommand("profile", "Static instruction profile of a program image");
  profile->add_option("image", pa.image, "program image (ELF32, flat binary, or listing)")
      ->required();
  profile->add_option("--format", pa.format, "image format")
      ->check(CLI::IsMember({"elf32", "bin", "listing"}));
  profile->add_option("--base", pa.base, "flat-binary load address (hex)");
  profile->add_option("--json", pa.json_out, "write JSON profile to file ('-' = stdout)");
  profile->callback([&] { rc = run_profile(pa); });

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "Compose a processor and emit its Verilog RTL");
  auto* src = gen->add_option_group("subset source");
  src->add_option("--subset-from", ga.subset_from, "subset JSON file (profiler output)");
  src->add_option("--subset", ga.subset_list, "comma-separated mnemonics");
  src->require_option(1);
  gen->add_option("--out", ga.out_dir, "output directory")->required();
  gen->add_option("--name", ga.name, "module name prefix");
  gen->add_flag("--no-regfile", ga.no_regfile, "expose register-file ports");
  gen->add_option("--with-tb", ga.with_tb, "program image for an integration testbench");
  gen->add_option("--sig", ga.sig, "testbench signature region START:END (hex)");
  gen->add_option("--json", ga.json_out, "write the emission manifest ('-' = stdout)");
  gen->callback([&] { rc = run_gen(ga); });

  SimArgs sa;
  auto* sim = app.add_subcommand("sim", "Run a program on the instruction-set simulator");
  sim->add_option("image", sa.image, "program image")->required();
  sim->add_option("--subset", sa.subset_file, "enforce a subset (JSON file)");
  sim->add_option("--sig", sa.sig, "signature region START:END (hex)");
  sim->add_option("--trace", sa.trace_file, "write an instruction trace to file");
  sim->add_option("--max-cycles", sa.max_cycles, "cycle budget");
  sim->add_option("--json", sa.json_out, "write the run result ('-' = stdout)");
  sim->callback([&] { rc = run_sim(sa); });

  RetargetArgs ra;
  auto* retarget = app.add_subcommand("retarget", "Rewrite a program onto a reduced subset");
  retarget->add_option("image", ra.image, "program image")->required();
  retarget->add_option("--subset", ra.subset_file, "target subset (JSON file)")->required();
  retarget->add_option("--catalog", ra.catalog_file, "rewrite-rule catalog (JSON file)");
  retarget->add_option("--emit-macros", ra.emit_macros, "write assembler macros to file");
  retarget->add_option("--out", ra.out, "rewritten image path (.bin = flat, else listing)")
      ->required();
  retarget->add_option("--json", ra.json_out, "write the rewrite plan ('-' = stdout)");
  retarget->callback([&] { rc = run_retarget(ra); });

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify-blocks", "Differentially check instruction blocks");
  verify->add_option("--only", va.only, "comma-separated mnemonics (default: all)");
  verify->add_option("--vectors", va.vectors, "vectors per block");
  verify->add_flag("--mutations", va.mutations, "also run the mutation adequacy check");
  verify->add_option("--json", va.json_out, "write per-block results ('-' = stdout)");
  verify->callback([&] { rc = run_verify_blocks(va); });

  ReportArgs rpa;
  auto* report = app.add_subcommand("report", "Area, power, and energy-per-instruction report");
  report->add_option("--designs", rpa.designs, "design report or subset JSON files")
      ->required()
      ->expected(-1);
  report->add_option("--baselines", rpa.baselines, "baseline report JSON files")
      ->required()
      ->expected(-1);
  report->add_option("--cost-table", rpa.cost_table, "cost table JSON file");
  report->add_option("--json", rpa.json_out, "write the comparison ('-' = stdout)");
  report->callback([&] { rc = run_report(rpa); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
