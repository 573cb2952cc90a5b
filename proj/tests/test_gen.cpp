#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "risp/asmkit.hpp"
#include "risp/gen.hpp"
#include "risp/sim.hpp"

namespace fs = std::filesystem;
namespace isa = risp::isa;
using namespace risp;
using gen::build_design;
using gen::GenError;

namespace {

profile::InstructionSubset subset_of(std::vector<std::string> mnemonics) {
  return profile::make_subset(std::move(mnemonics));
}

profile::InstructionSubset full_subset() {
  std::vector<std::string> all;
  for (const auto& s : isa::registry()) all.emplace_back(s.mnemonic);
  return profile::make_subset(std::move(all), "rv32e");
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("risp_gen_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

size_t count_of(const std::string& text, const std::string& needle) {
  size_t n = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

// Store one word to the signature base and halt.
profile::ProgramImage store_word_program() {
  const auto a = asmkit::assemble(R"(
    lui x1, 0xDEADC
    addi x1, x1, -273
    lui x2, 0x2
    sw x1, 0(x2)
    jal x0, 0
  )");
  return asmkit::to_image(a, "store_word");
}

}  // namespace

TEST_CASE("build_design composes one block and one case per mnemonic") {
  SUBCASE("single instruction") {
    auto d = build_design(subset_of({"addi"}), "tiny");
    CHECK(d.name == "tiny");
    REQUIRE(d.blocks.size() == 1);
    CHECK(d.blocks[0].mnemonic == "addi");
    REQUIRE(d.switch_cases.size() == 1);
    CHECK(d.switch_cases[0].mnemonic == "addi");
    CHECK(d.switch_cases[0].pattern == "17'b???????_000_0010011");
    CHECK(d.fixed_units ==
          std::vector<std::string>{"fetch", "regfile", "pc_register"});
  }
  SUBCASE("six instructions, sorted regardless of input order") {
    auto d = build_design(subset_of({"sw", "add", "lw", "jal", "beq", "addi"}));
    REQUIRE(d.blocks.size() == 6);
    CHECK(d.blocks[0].mnemonic == "add");
    CHECK(d.blocks[1].mnemonic == "addi");
    CHECK(d.blocks[2].mnemonic == "beq");
    CHECK(d.blocks[3].mnemonic == "jal");
    CHECK(d.blocks[4].mnemonic == "lw");
    CHECK(d.blocks[5].mnemonic == "sw");
    CHECK(d.switch_cases.size() == 6);
  }
  SUBCASE("full registry is the baseline") {
    auto d = build_design(full_subset(), "rv32e");
    CHECK(d.blocks.size() == 37);
    std::set<std::string> patterns;
    for (const auto& c : d.switch_cases) patterns.insert(c.pattern);
    CHECK(patterns.size() == 37);  // partial decode keys never collide
  }
  SUBCASE("dispatch keys pin funct bits only where the format defines them") {
    auto d = build_design(subset_of({"add", "sub", "srai", "lw", "lui"}));
    std::map<std::string, std::string> pat;
    for (const auto& c : d.switch_cases) pat[c.mnemonic] = c.pattern;
    CHECK(pat["add"] == "17'b0000000_000_0110011");
    CHECK(pat["sub"] == "17'b0100000_000_0110011");
    CHECK(pat["srai"] == "17'b0100000_101_0010011");
    CHECK(pat["lw"] == "17'b???????_010_0000011");
    CHECK(pat["lui"] == "17'b???????_???_0110111");
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(build_design(profile::InstructionSubset{}), GenError);
    try {
      build_design(profile::InstructionSubset{});
    } catch (const GenError& e) {
      CHECK(e.code == GenError::Code::EmptySubset);
    }
    profile::InstructionSubset bogus;
    bogus.mnemonics = {"mul"};
    try {
      build_design(bogus);
      FAIL("expected UnknownInstruction");
    } catch (const GenError& e) {
      CHECK(e.code == GenError::Code::UnknownInstruction);
    }
  }
}

TEST_CASE("monotone composition: union of subsets instantiates union of blocks") {
  auto names = [](const gen::RispDesign& d) {
    std::set<std::string> s;
    for (const auto& b : d.blocks) s.insert(b.mnemonic);
    return s;
  };
  const auto s1 = subset_of({"add", "lw", "jal"});
  const auto s2 = subset_of({"add", "sw", "beq"});
  auto merged = s1.mnemonics;
  merged.insert(merged.end(), s2.mnemonics.begin(), s2.mnemonics.end());
  const auto u = names(build_design(profile::make_subset(merged)));
  auto expected = names(build_design(s1));
  for (const auto& m : names(build_design(s2))) expected.insert(m);
  CHECK(u == expected);
}

TEST_CASE("emit_rtl writes block files, modularex, top, and a manifest") {
  auto d = build_design(subset_of({"addi", "jal", "sw"}), "trio");
  const auto dir = fresh_dir("emit");
  const auto manifest = gen::emit_rtl(d, dir);

  CHECK(manifest["design_name"] == "trio");
  CHECK(manifest["n_cases"] == 3);
  CHECK(manifest["subset"] == std::vector<std::string>{"addi", "jal", "sw"});
  REQUIRE(manifest["files"].size() == 5);  // 3 blocks + modularex + top
  CHECK(manifest["options"]["reset_pc"] == 0);
  CHECK(manifest["options"]["no_regfile"] == false);
  CHECK(d.manifest.size() == 5);

  for (const auto& f : d.manifest) CHECK(fs::exists(dir / f));
  CHECK(fs::exists(dir / "manifest.json"));

  const std::string ex = slurp(dir / "modularex.v");
  CHECK(count_of(ex, "17'b") == 3);
  CHECK(count_of(ex, "default:") == 1);
  CHECK(ex.find("casez ({insn[31:25], insn[14:12], insn[6:0]})") != std::string::npos);
  CHECK(ex.find("risp_block_addi u_addi") != std::string::npos);
  CHECK(ex.find("illegal = 1'b1") != std::string::npos);

  SUBCASE("re-emission is byte-identical") {
    std::map<std::string, std::string> before;
    for (const auto& f : d.manifest) before[f] = slurp(dir / f);
    before["manifest.json"] = slurp(dir / "manifest.json");
    gen::emit_rtl(d, dir);
    for (const auto& [f, text] : before) CHECK(slurp(dir / f) == text);
  }
}

TEST_CASE("emitted top holds all state in a single clocked block") {
  auto d = build_design(subset_of({"add", "jal"}), "micro");
  const auto dir = fresh_dir("top");

  SUBCASE("default form with internal register file") {
    gen::emit_rtl(d, dir);
    const std::string top = slurp(dir / "risp_top.v");
    CHECK(count_of(top, "always @(posedge") == 1);
    CHECK(top.find("parameter RESET_PC = 32'h00000000") != std::string::npos);
    CHECK(top.find("reg [31:0] rf [0:15];") != std::string::npos);
    CHECK(top.find("(insn[18:15] == 4'd0) ? 32'd0") != std::string::npos);
    for (const char* port :
         {"clk", "rst_n", "imem_addr", "imem_rdata", "dmem_addr", "dmem_wdata",
          "dmem_rdata", "dmem_we", "dmem_be", "trap", "halted"}) {
      CAPTURE(port);
      CHECK(top.find(port) != std::string::npos);
    }
    CHECK(top.find("32'h0000006f") != std::string::npos);  // halt word detector
    CHECK(top.find("trap_r <= 1'b1") != std::string::npos);
  }
  SUBCASE("no-regfile form exposes register ports") {
    gen::EmitOptions opt;
    opt.no_regfile = true;
    opt.reset_pc = 0x80;
    gen::emit_rtl(d, dir, opt);
    const std::string top = slurp(dir / "risp_top.v");
    CHECK(count_of(top, "always @(posedge") == 1);
    CHECK(top.find("parameter RESET_PC = 32'h00000080") != std::string::npos);
    CHECK(top.find("rf [0:15]") == std::string::npos);
    for (const char* port : {"rs1_index", "rs1_rdata", "rs2_index", "rs2_rdata",
                             "rd_index", "rd_wdata", "rd_we"}) {
      CAPTURE(port);
      CHECK(top.find(port) != std::string::npos);
    }
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["options"]["no_regfile"] == true);
    CHECK(manifest["options"]["reset_pc"] == 0x80);
  }
}

TEST_CASE("validate_structure accepts fresh emissions and rejects tampering") {
  auto d = build_design(subset_of({"addi", "beq", "jal"}), "guard");
  const auto dir = fresh_dir("validate");
  gen::emit_rtl(d, dir);

  SUBCASE("fresh emission passes") {
    const auto report = gen::validate_structure(d, dir);
    CHECK(report.block_count == 3);
    CHECK(report.case_count == 3);
    CHECK(report.default_case);
    CHECK(report.instantiated == std::vector<std::string>{"addi", "beq", "jal"});
  }
  SUBCASE("deleting a switch case is caught") {
    std::string ex = slurp(dir / "modularex.v");
    const size_t pos = ex.find("17'b???????_000_1100011");  // beq key
    REQUIRE(pos != std::string::npos);
    ex.replace(pos, 4, "// x ");
    spit(dir / "modularex.v", ex);
    CHECK_THROWS_AS(gen::validate_structure(d, dir), GenError);
  }
  SUBCASE("deleting a block file is caught") {
    fs::remove(dir / "risp_block_beq.v");
    CHECK_THROWS_AS(gen::validate_structure(d, dir), GenError);
  }
  SUBCASE("duplicated instantiation is caught") {
    std::string ex = slurp(dir / "modularex.v");
    const std::string inst = "risp_block_beq u_beq";
    ex += "\n// risp_block_beq u_beq duplicate\n";
    (void)inst;
    spit(dir / "modularex.v", ex);
    CHECK_THROWS_AS(gen::validate_structure(d, dir), GenError);
  }
  SUBCASE("out-of-subset token is caught") {
    std::string ex = slurp(dir / "modularex.v");
    ex += "\n// wiring note: add\n";
    spit(dir / "modularex.v", ex);
    try {
      gen::validate_structure(d, dir);
      FAIL("expected StructureMismatch");
    } catch (const GenError& e) {
      CHECK(e.code == GenError::Code::StructureMismatch);
      CHECK(std::string(e.what()).find("add") != std::string::npos);
    }
  }
}

TEST_CASE("design built from a profile instantiates exactly its distinct set") {
  const auto image = store_word_program();
  const auto prof = profile::profile(image);
  auto d = build_design(prof.distinct, "profiled");
  const auto dir = fresh_dir("profiled");
  gen::emit_rtl(d, dir);
  const auto report = gen::validate_structure(d, dir);
  CHECK(report.instantiated == prof.distinct.mnemonics);
}

TEST_CASE("baseline identity: the full design validates with 37 cases") {
  auto d = build_design(full_subset(), "rv32e");
  const auto dir = fresh_dir("full");
  const auto manifest = gen::emit_rtl(d, dir);
  CHECK(manifest["files"].size() == 39);
  const auto report = gen::validate_structure(d, dir);
  CHECK(report.case_count == 37);
  CHECK(report.block_count == 37);
  CHECK(report.default_case);
}

TEST_CASE("integration testbench embeds program, protocol, and expected signature") {
  const auto image = store_word_program();
  auto d = build_design(subset_of({"addi", "jal", "lui", "sw"}), "sig");
  const std::string tb =
      gen::emit_integration_testbench(d, image, {0x2000, 0x2004});

  CHECK(tb.find("module tb_risp;") != std::string::npos);
  CHECK(tb.find("risp_top #(.RESET_PC(32'h00000000)) dut") != std::string::npos);
  CHECK(tb.find("$fopen(\"signature.out\"") != std::string::npos);
  CHECK(tb.find("TB_RESULT: PASS") != std::string::npos);
  CHECK(tb.find("TB_RESULT: FAIL") != std::string::npos);
  CHECK(tb.find("$finish") != std::string::npos);
  // program words preloaded at word granularity
  CHECK(tb.find("mem['h0] = 32'h") != std::string::npos);
  // ISS-computed expectation: 0xdeadbeef at the signature base
  CHECK(tb.find("//   deadbeef") != std::string::npos);
  CHECK(tb.find("32'hdeadbeef") != std::string::npos);
  // exactly one sticky outcome line pair
  CHECK(count_of(tb, "TB_RESULT: PASS") == 1);

  SUBCASE("programs outside the subset are refused with a listing") {
    auto narrow = build_design(subset_of({"addi", "jal"}), "narrow");
    try {
      gen::emit_integration_testbench(narrow, image, {0x2000, 0x2004});
      FAIL("expected SubsetViolation");
    } catch (const GenError& e) {
      CHECK(e.code == GenError::Code::SubsetViolation);
      CHECK(std::string(e.what()).find("lui") != std::string::npos);
      CHECK(std::string(e.what()).find("sw") != std::string::npos);
    }
  }
}

TEST_CASE("differential_check plumbs the external simulator protocol") {
  const auto image = store_word_program();
  auto d = build_design(subset_of({"addi", "jal", "lui", "sw"}), "diff");
  const std::pair<uint32_t, uint32_t> region{0x2000, 0x2004};

  SUBCASE("without an external tool the ISS signature stands alone") {
    const auto v = sim::differential_check(image, d, std::nullopt, region);
    CHECK(v.kind == sim::DiffVerdict::Kind::iss_only);
    CHECK(v.reference_signature == "deadbeef\n");
  }
  SUBCASE("agreeing external run reports match") {
    const std::string cmd =
        "test -f {testbench} && test -f risp_top.v && test -n '{rtl_files}' && "
        "cp reference.sig signature.out && echo 'TB_RESULT: PASS'";
    const auto v = sim::differential_check(image, d, cmd, region);
    CHECK(v.kind == sim::DiffVerdict::Kind::match);
    CHECK(v.reference_signature == "deadbeef\n");
  }
  SUBCASE("diverging external run reports mismatch with the first bad line") {
    const std::string cmd =
        "printf '00000000\\n' > signature.out && echo 'TB_RESULT: FAIL'";
    const auto v = sim::differential_check(image, d, cmd, region);
    CHECK(v.kind == sim::DiffVerdict::Kind::mismatch);
    CHECK(v.detail.find("line 0") != std::string::npos);
    CHECK(v.detail.find("deadbeef") != std::string::npos);
  }
  SUBCASE("tool that never reports a verdict is an external failure") {
    CHECK_THROWS_AS(sim::differential_check(image, d, std::string("true"), region),
                    sim::SimError);
  }
}
