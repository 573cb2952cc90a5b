#include "risp/gen.hpp"

#include <algorithm>
#include <bitset>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "risp/sim.hpp"

namespace risp::gen {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail(GenError::Code code, const std::string& msg) {
  throw GenError(code, msg);
}

std::string hex32(uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

std::string case_pattern(const isa::InstructionSpec& s) {
  const std::string f7 =
      s.funct7 ? std::bitset<7>(*s.funct7).to_string() : std::string("???????");
  const std::string f3 =
      s.funct3 ? std::bitset<3>(*s.funct3).to_string() : std::string("???");
  return "17'b" + f7 + "_" + f3 + "_" + std::bitset<7>(s.opcode).to_string();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(GenError::Code::IoFailure, "cannot open " + path.string());
  out << text;
  out.flush();
  if (!out.good()) fail(GenError::Code::IoFailure, "write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(GenError::Code::StructureMismatch, "missing emitted file " + path.string());
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const char* ex_wire_names[8] = {
    "rd_value",         "rd_write_enable", "mem_addr",  "mem_wdata",
    "mem_write_enable", "byte_enables",    "next_pc_offset_or_target", "pc_select",
};

std::string modularex_text(const RispDesign& d) {
  std::ostringstream os;
  os << "// ModularEX: partial decoder dispatching to one block per instruction\n";
  os << "module modularex (\n";
  os << "  input  wire [31:0] insn,\n";
  os << "  input  wire [31:0] pc,\n";
  os << "  input  wire [31:0] rs1_value,\n";
  os << "  input  wire [31:0] rs2_value,\n";
  os << "  input  wire [31:0] mem_rdata,\n";
  os << "  output reg  [31:0] rd_value,\n";
  os << "  output reg         rd_write_enable,\n";
  os << "  output reg  [31:0] mem_addr,\n";
  os << "  output reg  [31:0] mem_wdata,\n";
  os << "  output reg         mem_write_enable,\n";
  os << "  output reg  [3:0]  byte_enables,\n";
  os << "  output reg  [31:0] next_pc_offset_or_target,\n";
  os << "  output reg         pc_select,\n";
  os << "  output reg         illegal\n";
  os << ");\n\n";
  for (const auto& b : d.blocks) {
    os << "  wire [31:0] " << b.mnemonic << "_rd_value;\n";
    os << "  wire        " << b.mnemonic << "_rd_write_enable;\n";
    os << "  wire [31:0] " << b.mnemonic << "_mem_addr;\n";
    os << "  wire [31:0] " << b.mnemonic << "_mem_wdata;\n";
    os << "  wire        " << b.mnemonic << "_mem_write_enable;\n";
    os << "  wire [3:0]  " << b.mnemonic << "_byte_enables;\n";
    os << "  wire [31:0] " << b.mnemonic << "_next_pc_offset_or_target;\n";
    os << "  wire        " << b.mnemonic << "_pc_select;\n";
    os << "  risp_block_" << b.mnemonic << " u_" << b.mnemonic << " (\n";
    os << "    .insn(insn), .pc(pc), .rs1_value(rs1_value), .rs2_value(rs2_value),\n";
    os << "    .mem_rdata(mem_rdata),\n";
    for (size_t i = 0; i < 8; ++i) {
      os << "    ." << ex_wire_names[i] << "(" << b.mnemonic << "_" << ex_wire_names[i]
         << ")" << (i + 1 < 8 ? "," : "") << "\n";
    }
    os << "  );\n\n";
  }
  os << "  always @* begin\n";
  os << "    rd_value = 32'd0;\n";
  os << "    rd_write_enable = 1'b0;\n";
  os << "    mem_addr = 32'd0;\n";
  os << "    mem_wdata = 32'd0;\n";
  os << "    mem_write_enable = 1'b0;\n";
  os << "    byte_enables = 4'd0;\n";
  os << "    next_pc_offset_or_target = 32'd0;\n";
  os << "    pc_select = 1'b0;\n";
  os << "    illegal = 1'b0;\n";
  os << "    casez ({insn[31:25], insn[14:12], insn[6:0]})\n";
  for (const auto& c : d.switch_cases) {
    os << "      " << c.pattern << ": begin\n";
    for (const auto* w : ex_wire_names) {
      os << "        " << w << " = " << c.mnemonic << "_" << w << ";\n";
    }
    os << "      end\n";
  }
  os << "      default: illegal = 1'b1;\n";
  os << "    endcase\n";
  os << "  end\n";
  os << "endmodule\n";
  return os.str();
}

std::string top_text(const EmitOptions& opt) {
  std::ostringstream os;
  os << "// Single-cycle processor top. Clocked state: PC register, trap/halt\n";
  os << "// flags" << (opt.no_regfile ? "" : ", register file array") << ".\n";
  os << "module risp_top #(\n";
  os << "  parameter RESET_PC = 32'h" << hex32(opt.reset_pc) << "\n";
  os << ") (\n";
  os << "  input  wire        clk,\n";
  os << "  input  wire        rst_n,\n";
  os << "  output wire [31:0] imem_addr,\n";
  os << "  input  wire [31:0] imem_rdata,\n";
  os << "  output wire [31:0] dmem_addr,\n";
  os << "  output wire [31:0] dmem_wdata,\n";
  os << "  input  wire [31:0] dmem_rdata,\n";
  os << "  output wire        dmem_we,\n";
  os << "  output wire [3:0]  dmem_be,\n";
  if (opt.no_regfile) {
    os << "  output wire [3:0]  rs1_index,\n";
    os << "  input  wire [31:0] rs1_rdata,\n";
    os << "  output wire [3:0]  rs2_index,\n";
    os << "  input  wire [31:0] rs2_rdata,\n";
    os << "  output wire [3:0]  rd_index,\n";
    os << "  output wire [31:0] rd_wdata,\n";
    os << "  output wire        rd_we,\n";
  }
  os << "  output wire        trap,\n";
  os << "  output wire        halted\n";
  os << ");\n\n";
  os << "  reg [31:0] pc;\n";
  os << "  reg        trap_r;\n";
  os << "  reg        halted_r;\n";
  if (!opt.no_regfile) os << "  reg [31:0] rf [0:15];\n";
  os << "\n";
  os << "  wire [31:0] insn = imem_rdata;\n";
  if (opt.no_regfile) {
    os << "  assign rs1_index = insn[18:15];\n";
    os << "  assign rs2_index = insn[23:20];\n";
    os << "  wire [31:0] rs1_value = rs1_rdata;\n";
    os << "  wire [31:0] rs2_value = rs2_rdata;\n";
  } else {
    os << "  wire [31:0] rs1_value = (insn[18:15] == 4'd0) ? 32'd0 : rf[insn[18:15]];\n";
    os << "  wire [31:0] rs2_value = (insn[23:20] == 4'd0) ? 32'd0 : rf[insn[23:20]];\n";
  }
  os << "\n";
  os << "  wire [31:0] ex_rd_value;\n";
  os << "  wire        ex_rd_write_enable;\n";
  os << "  wire [31:0] ex_mem_addr;\n";
  os << "  wire [31:0] ex_mem_wdata;\n";
  os << "  wire        ex_mem_write_enable;\n";
  os << "  wire [3:0]  ex_byte_enables;\n";
  os << "  wire [31:0] ex_next_pc_offset_or_target;\n";
  os << "  wire        ex_pc_select;\n";
  os << "  wire        ex_illegal;\n\n";
  os << "  modularex ex (\n";
  os << "    .insn(insn), .pc(pc), .rs1_value(rs1_value), .rs2_value(rs2_value),\n";
  os << "    .mem_rdata(dmem_rdata),\n";
  os << "    .rd_value(ex_rd_value), .rd_write_enable(ex_rd_write_enable),\n";
  os << "    .mem_addr(ex_mem_addr), .mem_wdata(ex_mem_wdata),\n";
  os << "    .mem_write_enable(ex_mem_write_enable), .byte_enables(ex_byte_enables),\n";
  os << "    .next_pc_offset_or_target(ex_next_pc_offset_or_target),\n";
  os << "    .pc_select(ex_pc_select), .illegal(ex_illegal)\n";
  os << "  );\n\n";
  os << "  wire is_halt = (insn == 32'h0000006f);\n";
  os << "  wire [31:0] next_pc = ex_pc_select ? ex_next_pc_offset_or_target"
        " : (pc + 32'd4);\n";
  os << "  wire misaligned_target = ex_pc_select &&"
        " (ex_next_pc_offset_or_target[1:0] != 2'b00);\n";
  os << "  wire trap_now = ex_illegal || misaligned_target;\n";
  os << "  wire running = !trap_r && !halted_r;\n\n";
  os << "  assign imem_addr = pc;\n";
  os << "  assign dmem_addr = ex_mem_addr;\n";
  os << "  assign dmem_wdata = ex_mem_wdata;\n";
  os << "  assign dmem_we = running && !is_halt && !trap_now && ex_mem_write_enable;\n";
  os << "  assign dmem_be = ex_byte_enables;\n";
  if (opt.no_regfile) {
    os << "  assign rd_index = insn[10:7];\n";
    os << "  assign rd_wdata = ex_rd_value;\n";
    os << "  assign rd_we = running && !is_halt && !trap_now &&"
          " ex_rd_write_enable && (insn[10:7] != 4'd0);\n";
  }
  os << "  assign trap = trap_r;\n";
  os << "  assign halted = halted_r;\n\n";
  if (!opt.no_regfile) os << "  integer i;\n";
  os << "  always @(posedge clk, negedge rst_n) begin\n";
  os << "    if (!rst_n) begin\n";
  os << "      pc <= RESET_PC;\n";
  os << "      trap_r <= 1'b0;\n";
  os << "      halted_r <= 1'b0;\n";
  if (!opt.no_regfile) {
    os << "      for (i = 0; i < 16; i = i + 1) rf[i] <= 32'd0;\n";
  }
  os << "    end else if (running) begin\n";
  os << "      if (is_halt) begin\n";
  os << "        halted_r <= 1'b1;\n";
  os << "      end else if (trap_now) begin\n";
  os << "        trap_r <= 1'b1;\n";
  os << "      end else begin\n";
  os << "        pc <= next_pc;\n";
  if (!opt.no_regfile) {
    os << "        if (ex_rd_write_enable && (insn[10:7] != 4'd0)) begin\n";
    os << "          rf[insn[10:7]] <= ex_rd_value;\n";
    os << "        end\n";
  }
  os << "      end\n";
  os << "    end\n";
  os << "  end\n";
  os << "endmodule\n";
  return os.str();
}

}  // namespace

RispDesign build_design(const profile::InstructionSubset& subset, std::string name) {
  if (subset.mnemonics.empty()) {
    fail(GenError::Code::EmptySubset, "cannot build a processor from an empty subset");
  }
  RispDesign d;
  d.name = std::move(name);
  std::vector<std::string> mnemonics = subset.mnemonics;
  std::sort(mnemonics.begin(), mnemonics.end());
  mnemonics.erase(std::unique(mnemonics.begin(), mnemonics.end()), mnemonics.end());
  for (const auto& m : mnemonics) {
    const auto* spec = isa::find_spec(m);
    if (!spec) {
      fail(GenError::Code::UnknownInstruction, "unknown instruction '" + m + "'");
    }
    d.blocks.push_back(blocklib::get_block(m));
    d.switch_cases.push_back({case_pattern(*spec), m});
  }
  d.subset = profile::make_subset(mnemonics, subset.label);
  d.fixed_units = {"fetch", "regfile", "pc_register"};
  return d;
}

nlohmann::json emit_rtl(RispDesign& design, const std::filesystem::path& outdir,
                        const EmitOptions& options) {
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) fail(GenError::Code::IoFailure, "cannot create " + outdir.string());

  std::vector<std::string> files;
  for (const auto& b : design.blocks) {
    const std::string fname = "risp_block_" + b.mnemonic + ".v";
    write_file(outdir / fname, blocklib::render_block_rtl(b));
    files.push_back(fname);
  }
  write_file(outdir / "modularex.v", modularex_text(design));
  files.push_back("modularex.v");
  write_file(outdir / "risp_top.v", top_text(options));
  files.push_back("risp_top.v");

  nlohmann::json manifest = {
      {"design_name", design.name},
      {"subset", design.subset.mnemonics},
      {"files", files},
      {"n_cases", design.switch_cases.size()},
      {"options",
       {{"reset_pc", options.reset_pc}, {"no_regfile", options.no_regfile}}},
  };
  write_file(outdir / "manifest.json", manifest.dump(2) + "\n");
  design.manifest = files;
  return manifest;
}

StructureReport validate_structure(const RispDesign& design,
                                   const std::filesystem::path& outdir) {
  StructureReport report;
  std::string all_text;

  for (const auto& b : design.blocks) {
    const std::string text = read_file(outdir / ("risp_block_" + b.mnemonic + ".v"));
    if (text.find("module risp_block_" + b.mnemonic) == std::string::npos) {
      fail(GenError::Code::StructureMismatch,
           "block file for " + b.mnemonic + " does not define its module");
    }
    all_text += text;
    ++report.block_count;
  }
  const std::string ex = read_file(outdir / "modularex.v");
  const std::string top = read_file(outdir / "risp_top.v");
  all_text += ex;
  all_text += top;

  const std::regex case_re(R"(^\s*17'b[01?_]+\s*:)");
  const std::regex default_re(R"(^\s*default\s*:)");
  std::istringstream lines(ex);
  std::string line;
  size_t defaults = 0;
  while (std::getline(lines, line)) {
    if (std::regex_search(line, case_re)) ++report.case_count;
    if (std::regex_search(line, default_re)) ++defaults;
  }
  report.default_case = defaults == 1;

  for (const auto& b : design.blocks) {
    size_t instances = 0, pos = 0;
    const std::string needle = "risp_block_" + b.mnemonic + " u_" + b.mnemonic;
    while ((pos = ex.find(needle, pos)) != std::string::npos) {
      ++instances;
      pos += needle.size();
    }
    if (instances != 1) {
      fail(GenError::Code::StructureMismatch,
           b.mnemonic + " instantiated " + std::to_string(instances) +
               " times in modularex");
    }
    report.instantiated.push_back(b.mnemonic);
  }

  if (report.case_count != design.blocks.size()) {
    fail(GenError::Code::StructureMismatch,
         "expected " + std::to_string(design.blocks.size()) + " switch cases, found " +
             std::to_string(report.case_count));
  }
  if (!report.default_case) {
    fail(GenError::Code::StructureMismatch,
         "expected exactly one default case, found " + std::to_string(defaults));
  }
  if (design.blocks.size() != design.subset.size() ||
      design.switch_cases.size() != design.subset.size()) {
    fail(GenError::Code::StructureMismatch, "design block/case/subset counts disagree");
  }

  for (const auto& spec : isa::registry()) {
    const std::string m(spec.mnemonic);
    if (design.subset.contains(m)) continue;
    const std::regex token(R"((^|[^A-Za-z0-9_]))" + m + R"(($|[^A-Za-z0-9_]))");
    if (std::regex_search(all_text, token)) {
      fail(GenError::Code::StructureMismatch,
           "emitted RTL references out-of-subset instruction '" + m + "'");
    }
  }

  std::sort(report.instantiated.begin(), report.instantiated.end());
  return report;
}

std::string emit_integration_testbench(const RispDesign& design,
                                       const profile::ProgramImage& program,
                                       std::pair<uint32_t, uint32_t> signature_region) {
  sim::SimConfig cfg;
  cfg.signature_region = signature_region;
  const sim::RunResult res = sim::run(program, cfg);

  std::vector<std::string> offending;
  for (const auto& [mnemonic, n] : res.dynamic_counts) {
    if (!design.subset.contains(mnemonic)) offending.push_back(mnemonic);
  }
  if (!offending.empty()) {
    std::string listing;
    for (const auto& m : offending) listing += (listing.empty() ? "" : " ") + m;
    fail(GenError::Code::SubsetViolation,
         "program executes instructions outside the subset: " + listing);
  }
  const std::string expected = sim::signature(res);  // throws unless halted
  const std::vector<uint32_t>& sig_words = *res.signature;

  uint32_t limit = signature_region.second;
  for (const auto& [addr, word] : program.words) {
    (void)word;
    limit = std::max(limit, addr + 4);
  }
  unsigned idx_bits = 10;
  while ((uint64_t(1) << (idx_bits + 2)) < limit) ++idx_bits;
  const uint64_t mem_words = uint64_t(1) << idx_bits;
  const uint64_t max_cycles = std::max<uint64_t>(1000, 2 * res.cycles + 200);

  std::ostringstream os;
  os << "`timescale 1ns / 1ps\n";
  os << "// Self-checking run of " << design.name << " on " << program.name << "\n";
  os << "// expected signature:\n";
  {
    std::istringstream sig(expected);
    std::string line;
    while (std::getline(sig, line)) os << "//   " << line << "\n";
  }
  os << "module tb_risp;\n";
  os << "  reg clk;\n";
  os << "  reg rst_n;\n";
  os << "  wire [31:0] imem_addr;\n";
  os << "  wire [31:0] dmem_addr;\n";
  os << "  wire [31:0] dmem_wdata;\n";
  os << "  wire [3:0]  dmem_be;\n";
  os << "  wire dmem_we;\n";
  os << "  wire trap;\n";
  os << "  wire halted;\n\n";
  os << "  reg [31:0] mem [0:" << (mem_words - 1) << "];\n";
  os << "  wire [31:0] imem_rdata = mem[imem_addr[" << (idx_bits + 1) << ":2]];\n";
  os << "  wire [31:0] dmem_rdata = mem[dmem_addr[" << (idx_bits + 1) << ":2]];\n\n";
  os << "  risp_top #(.RESET_PC(32'h" << hex32(program.entry) << ")) dut (\n";
  os << "    .clk(clk), .rst_n(rst_n),\n";
  os << "    .imem_addr(imem_addr), .imem_rdata(imem_rdata),\n";
  os << "    .dmem_addr(dmem_addr), .dmem_wdata(dmem_wdata), .dmem_rdata(dmem_rdata),\n";
  os << "    .dmem_we(dmem_we), .dmem_be(dmem_be),\n";
  os << "    .trap(trap), .halted(halted)\n";
  os << "  );\n\n";
  os << "  always @(posedge clk) begin\n";
  os << "    if (dmem_we) begin\n";
  os << "      if (dmem_be[0]) mem[dmem_addr[" << (idx_bits + 1)
     << ":2]][7:0] <= dmem_wdata[7:0];\n";
  os << "      if (dmem_be[1]) mem[dmem_addr[" << (idx_bits + 1)
     << ":2]][15:8] <= dmem_wdata[15:8];\n";
  os << "      if (dmem_be[2]) mem[dmem_addr[" << (idx_bits + 1)
     << ":2]][23:16] <= dmem_wdata[23:16];\n";
  os << "      if (dmem_be[3]) mem[dmem_addr[" << (idx_bits + 1)
     << ":2]][31:24] <= dmem_wdata[31:24];\n";
  os << "    end\n";
  os << "  end\n\n";
  os << "  initial clk = 1'b0;\n";
  os << "  always #5 clk = ~clk;\n\n";
  os << "  integer cycles;\n";
  os << "  integer errors;\n";
  os << "  integer fd;\n";
  os << "  integer i;\n";
  os << "  initial begin\n";
  os << "    for (i = 0; i < " << mem_words << "; i = i + 1) mem[i] = 32'd0;\n";
  for (const auto& [addr, word] : program.words) {
    os << "    mem['h" << std::hex << (addr >> 2) << std::dec << "] = 32'h"
       << hex32(word) << ";\n";
  }
  os << "    rst_n = 1'b0;\n";
  os << "    cycles = 0;\n";
  os << "    errors = 0;\n";
  os << "    repeat (4) @(posedge clk);\n";
  os << "    rst_n = 1'b1;\n";
  os << "    while (!halted && !trap && cycles < " << max_cycles << ") begin\n";
  os << "      @(posedge clk);\n";
  os << "      cycles = cycles + 1;\n";
  os << "    end\n";
  os << "    if (trap) begin\n";
  os << "      $display(\"trap raised at pc %08x\", imem_addr);\n";
  os << "      $display(\"TB_RESULT: FAIL\");\n";
  os << "      $finish;\n";
  os << "    end\n";
  os << "    if (!halted) begin\n";
  os << "      $display(\"cycle limit " << max_cycles << " reached\");\n";
  os << "      $display(\"TB_RESULT: FAIL\");\n";
  os << "      $finish;\n";
  os << "    end\n";
  os << "    fd = $fopen(\"signature.out\", \"w\");\n";
  os << "    for (i = 'h" << std::hex << (signature_region.first >> 2) << "; i < 'h"
     << (signature_region.second >> 2) << std::dec << "; i = i + 1) begin\n";
  os << "      $fdisplay(fd, \"%08x\", mem[i]);\n";
  os << "    end\n";
  os << "    $fclose(fd);\n";
  for (size_t k = 0; k < sig_words.size(); ++k) {
    const uint32_t addr = signature_region.first + uint32_t(k) * 4;
    os << "    if (mem['h" << std::hex << (addr >> 2) << std::dec << "] !== 32'h"
       << hex32(sig_words[k]) << ") begin\n";
    os << "      errors = errors + 1;\n";
    os << "      $display(\"signature word " << k << " mismatch: got %08x want "
       << hex32(sig_words[k]) << "\", mem['h" << std::hex << (addr >> 2) << std::dec
       << "]);\n";
    os << "    end\n";
  }
  os << "    if (errors == 0) $display(\"TB_RESULT: PASS\");\n";
  os << "    else $display(\"TB_RESULT: FAIL\");\n";
  os << "    $finish;\n";
  os << "  end\n";
  os << "endmodule\n";
  return os.str();
}

}  // namespace risp::gen

namespace risp::sim {

DiffVerdict differential_check(const profile::ProgramImage& image,
                               const gen::RispDesign& design,
                               const std::optional<std::string>& external_sim_cmd,
                               std::pair<uint32_t, uint32_t> signature_region) {
  SimConfig cfg;
  cfg.subset = design.subset;
  cfg.signature_region = signature_region;
  const RunResult res = run(image, cfg);
  DiffVerdict verdict;
  verdict.reference_signature = signature(res);  // throws unless halted

  if (!external_sim_cmd) {
    verdict.kind = DiffVerdict::Kind::iss_only;
    verdict.detail = "no external RTL simulator configured; reference signature only";
    return verdict;
  }

  namespace fs = std::filesystem;
  std::random_device rd;
  const fs::path dir = fs::temp_directory_path() /
                       ("risp_diff_" + std::to_string(uint64_t(rd()) << 16 | rd() % 0xFFFF));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw SimError(SimError::Code::ExternalToolFailure,
                   "cannot create work directory " + dir.string());
  }

  gen::RispDesign scratch = design;
  gen::EmitOptions opt;
  opt.reset_pc = image.entry;
  gen::emit_rtl(scratch, dir, opt);
  {
    std::ofstream tb(dir / "tb_risp.v", std::ios::binary);
    tb << gen::emit_integration_testbench(design, image, signature_region);
  }
  {
    std::ofstream ref(dir / "reference.sig", std::ios::binary);
    ref << verdict.reference_signature;
  }

  std::string rtl_files;
  for (const auto& f : scratch.manifest) {
    if (f.size() > 2 && f.substr(f.size() - 2) == ".v") {
      rtl_files += (rtl_files.empty() ? "" : " ") + f;
    }
  }
  std::string cmd = *external_sim_cmd;
  auto substitute = [&](const std::string& slot, const std::string& value) {
    size_t pos = 0;
    while ((pos = cmd.find(slot, pos)) != std::string::npos) {
      cmd.replace(pos, slot.size(), value);
      pos += value.size();
    }
  };
  substitute("{testbench}", "tb_risp.v");
  substitute("{rtl_files}", rtl_files);

  const std::string shell =
      "cd '" + dir.string() + "' && (" + cmd + ") > tool.out 2> tool.err";
  const int rc = std::system(shell.c_str());

  auto slurp = [&](const char* name) {
    std::ifstream in(dir / name, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  const std::string tool_out = slurp("tool.out");
  const bool tb_pass = tool_out.find("TB_RESULT: PASS") != std::string::npos;
  const bool tb_fail = tool_out.find("TB_RESULT: FAIL") != std::string::npos;
  if (!tb_pass && !tb_fail) {
    throw SimError(SimError::Code::ExternalToolFailure,
                   "external simulator produced no TB_RESULT (exit " +
                       std::to_string(rc) + "): " + slurp("tool.err"));
  }

  const std::string rtl_sig = slurp("signature.out");
  if (rtl_sig == verdict.reference_signature && tb_pass) {
    verdict.kind = DiffVerdict::Kind::match;
    verdict.detail = "RTL signature matches the reference";
    return verdict;
  }
  verdict.kind = DiffVerdict::Kind::mismatch;
  if (rtl_sig.empty()) {
    verdict.detail = "external run produced no signature.out";
  } else {
    std::istringstream got(rtl_sig), want(verdict.reference_signature);
    std::string g, w;
    size_t line = 0;
    while (true) {
      const bool hg = bool(std::getline(got, g));
      const bool hw = bool(std::getline(want, w));
      if (!hg && !hw) break;
      if (g != w || hg != hw) {
        verdict.detail = "first divergence at signature line " + std::to_string(line) +
                         ": got '" + (hg ? g : "<eof>") + "' want '" +
                         (hw ? w : "<eof>") + "'";
        break;
      }
      ++line;
    }
    if (verdict.detail.empty() && tb_fail) {
      verdict.detail = "external testbench reported FAIL";
    }
  }
  return verdict;
}

}  // namespace risp::sim
