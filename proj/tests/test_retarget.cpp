#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "risp/asmkit.hpp"
#include "risp/isa.hpp"
#include "risp/profile.hpp"
#include "risp/retarget.hpp"
#include "risp/samples.hpp"
#include "risp/sim.hpp"

namespace {

using risp::profile::InstructionSubset;
using risp::profile::ProgramImage;
using risp::retarget::MacroRule;
using risp::retarget::RetargetError;

const std::vector<std::string> kMinimalNames = {"addi", "add",  "and", "xori", "sll",  "sra",
                                                "jal",  "jalr", "blt", "bltu", "lw",   "sw"};

InstructionSubset minimal12() { return risp::profile::make_subset(kMinimalNames, "minimal12"); }

ProgramImage image_of(const std::string& source, const std::string& name) {
  return risp::asmkit::to_image(risp::asmkit::assemble(source, 0), name);
}

std::string mnemonic_at(const ProgramImage& img, size_t idx) {
  return std::string(risp::isa::decode(img.words.at(idx).second).spec->mnemonic);
}

}  // namespace

TEST_CASE("sub expands to exactly three instructions and grows the image by two words") {
  const auto img = image_of("sub x1, x2, x3\njal x0, 0\n", "one_sub");
  const auto p = risp::retarget::plan(img, minimal12());

  REQUIRE(p.rewrites.size() == 1);
  CHECK(p.rewrites[0].address == 0);
  CHECK(p.rewrites[0].mnemonic == "sub");
  REQUIRE(p.rules_used.count("sub") == 1);
  CHECK(p.rules_used.at("sub").length == 3);
  CHECK(p.size_before == 2);
  CHECK(p.size_after == 4);
  CHECK(p.overhead_fraction() == doctest::Approx(1.0));

  const auto out = risp::retarget::apply(p);
  REQUIRE(out.words.size() == 4);
  CHECK(mnemonic_at(out, 0) == "xori");
  CHECK(mnemonic_at(out, 1) == "addi");
  CHECK(mnemonic_at(out, 2) == "add");
  CHECK(out.words[3].second == risp::sim::halt_word);
}

TEST_CASE("expanded subtraction computes the same difference end to end") {
  const auto img = image_of(
      "addi x2, x0, 100\n"
      "addi x3, x0, 42\n"
      "sub x1, x2, x3\n"
      "addi x4, x0, 0x100\n"
      "sw x1, 0(x4)\n"
      "jal x0, 0\n",
      "sub_prog");
  risp::sim::SimConfig cfg;
  cfg.signature_region = {{0x100u, 0x104u}};
  const auto ref = risp::sim::run(img, cfg);
  REQUIRE(ref.status == risp::sim::RunStatus::halted);

  const auto out = risp::retarget::apply(risp::retarget::plan(img, minimal12()));
  auto cfg2 = cfg;
  cfg2.subset = minimal12();
  const auto got = risp::sim::run(out, cfg2);
  REQUIRE(got.status == risp::sim::RunStatus::halted);
  CHECK(risp::sim::signature(got) == risp::sim::signature(ref));
  REQUIRE(got.signature.has_value());
  CHECK(got.signature->at(0) == 58u);
}

TEST_CASE("or expansion matches bitwise or on directed operand pairs") {
  const auto img = image_of("or x1, x2, x3\njal x0, 0\n", "one_or");
  const auto subset = risp::profile::make_subset({"and", "xori", "addi", "add", "jal"});
  const auto out = risp::retarget::apply(risp::retarget::plan(img, subset));

  const std::vector<std::pair<uint32_t, uint32_t>> pairs = {
      {0u, 0u},
      {0xF0F0F0F0u, 0x0F0F0F0Fu},
      {0xFFFFFFFFu, 0xFFFFFFFFu},
      {0x80000000u, 1u},
      {123u, 456u},
      {0xDEADBEEFu, 0x12345678u},
  };
  for (const auto& [a, b] : pairs) {
    CAPTURE(a);
    CAPTURE(b);
    risp::sim::Simulator s(out, {});
    s.state().set_reg(2, a);
    s.state().set_reg(3, b);
    while (s.advance()) {
    }
    const auto res = s.take_result();
    REQUIRE(res.status == risp::sim::RunStatus::halted);
    CHECK(res.final_state.reg(1) == (a | b));
  }
}

TEST_CASE("every default catalog rule passes differential verification") {
  const auto& catalog = risp::retarget::default_catalog();
  REQUIRE(catalog.size() == 19);
  for (const auto& rule : catalog) {
    CAPTURE(rule.source_mnemonic);
    const auto out = risp::retarget::verify_rule(rule, 10000);
    INFO(out.counterexample);
    CHECK(out.verified);
    CHECK(out.counterexample.empty());
    CHECK(out.trials == 10000);
  }
}

TEST_CASE("a defective rule is rejected with a concrete counterexample") {
  MacroRule bad = *risp::retarget::find_rule(risp::retarget::default_catalog(), "sub");
  bad.template_lines[1] = "addi $t0, $t0, 2";
  const auto out = risp::retarget::verify_rule(bad, 10000);
  CHECK_FALSE(out.verified);
  CHECK(out.counterexample.find("sub") != std::string::npos);
  CHECK(out.trials < 10000);
}

TEST_CASE("rewritten samples keep their signatures under the minimal subset") {
  const auto subset = minimal12();
  for (const auto& sample : risp::samples::all()) {
    CAPTURE(sample.name);

    risp::sim::SimConfig ref_cfg;
    ref_cfg.signature_region = sample.signature_region;
    const auto ref = risp::sim::run(sample.image, ref_cfg);
    REQUIRE(ref.status == risp::sim::RunStatus::halted);

    const auto p = risp::retarget::plan(sample.image, subset);
    CHECK(p.size_after >= p.size_before);
    CHECK(p.overhead_fraction() >= 0.0);
    CHECK(p.overhead_fraction() <= 3.0);

    const auto out = risp::retarget::apply(p);
    CHECK(out.entry == sample.image.entry);

    for (const auto& m : risp::profile::profile(out).distinct.mnemonics) {
      CAPTURE(m);
      CHECK(subset.contains(m));
    }

    risp::sim::SimConfig cfg;
    cfg.subset = subset;
    cfg.signature_region = sample.signature_region;
    const auto got = risp::sim::run(out, cfg);
    REQUIRE(got.status == risp::sim::RunStatus::halted);
    CHECK(risp::sim::signature(got) == risp::sim::signature(ref));
  }
}

TEST_CASE("flat binaries keep data segments anchored across rewriting") {
  // A flat dump closes the address gap with zero words; those zeros must end
  // the code segment so the data keeps its addresses when the code grows.
  const auto& sample = risp::samples::get("crc32");
  uint32_t top = 0;
  for (const auto& [addr, word] : sample.image.words) top = std::max(top, addr + 4);
  std::vector<uint8_t> bytes(top, 0);
  for (const auto& [addr, word] : sample.image.words) {
    for (int b = 0; b < 4; ++b) bytes[addr + b] = uint8_t(word >> (8 * b));
  }
  const auto flat = risp::profile::image_from_flat("crc32_flat", bytes, 0);
  REQUIRE(flat.words.size() > sample.image.words.size());

  risp::sim::SimConfig ref_cfg;
  ref_cfg.signature_region = sample.signature_region;
  const auto ref = risp::sim::run(sample.image, ref_cfg);

  const auto p = risp::retarget::plan(flat, minimal12());
  const auto out = risp::retarget::apply(p);
  for (const auto& [addr, word] : sample.image.words) {
    if (addr < 0x1000) continue;
    const auto it = std::find_if(out.words.begin(), out.words.end(),
                                 [a = addr](const auto& w) { return w.first == a; });
    REQUIRE(it != out.words.end());
    CHECK(it->second == word);
  }

  auto cfg = ref_cfg;
  cfg.subset = minimal12();
  const auto got = risp::sim::run(out, cfg);
  REQUIRE(got.status == risp::sim::RunStatus::halted);
  CHECK(risp::sim::signature(got) == risp::sim::signature(ref));
}

TEST_CASE("a program already inside the subset is returned byte-identical") {
  const auto& sample = risp::samples::get("fib");
  const auto own = risp::profile::profile(sample.image).distinct;
  const auto p = risp::retarget::plan(sample.image, own);
  CHECK(p.rewrites.empty());
  CHECK(p.rules_used.empty());
  CHECK(p.size_after == p.size_before);
  CHECK(p.overhead_fraction() == 0.0);

  const auto out = risp::retarget::apply(p);
  CHECK(out.words == sample.image.words);
  CHECK(out.entry == sample.image.entry);
  CHECK(out.name == sample.image.name);
}

TEST_CASE("planning reports NoRuleFor when the catalog lacks a rewrite") {
  const auto img = image_of("lb x1, 0(x2)\njal x0, 0\n", "needs_lb");
  try {
    risp::retarget::plan(img, minimal12());
    FAIL("expected NoRuleFor");
  } catch (const RetargetError& e) {
    CHECK(e.code == RetargetError::Code::NoRuleFor);
    CHECK(std::string(e.what()).find("lb") != std::string::npos);
  }
}

TEST_CASE("scratch liveness blocks or admits rewrites correctly") {
  SUBCASE("a later read of x5 blocks the rewrite") {
    const auto img = image_of("sub x1, x2, x3\nadd x4, x5, x1\njal x0, 0\n", "reads_t0");
    try {
      risp::retarget::plan(img, minimal12());
      FAIL("expected ScratchUnavailable");
    } catch (const RetargetError& e) {
      CHECK(e.code == RetargetError::Code::ScratchUnavailable);
    }
  }
  SUBCASE("a read of x5 before the site is harmless") {
    const auto img = image_of("add x4, x5, x1\nsub x1, x2, x3\njal x0, 0\n", "reads_t0_early");
    const auto p = risp::retarget::plan(img, minimal12());
    CHECK(p.rewrites.size() == 1);
  }
  SUBCASE("an instruction naming x5 as an operand cannot be rewritten") {
    const auto img = image_of("sub x5, x2, x3\njal x0, 0\n", "writes_t0");
    try {
      risp::retarget::plan(img, minimal12());
      FAIL("expected ScratchUnavailable");
    } catch (const RetargetError& e) {
      CHECK(e.code == RetargetError::Code::ScratchUnavailable);
    }
  }
}

TEST_CASE("code growth that breaks a branch range raises OffsetOverflow") {
  std::string src = "blt x0, x1, 804\n";
  for (int i = 0; i < 200; ++i) src += "xor x1, x2, x3\n";
  src += "jal x0, 0\n";
  const auto img = image_of(src, "stretched_branch");

  CHECK_NOTHROW(risp::retarget::plan(img, risp::profile::profile(img).distinct));
  try {
    risp::retarget::plan(img, minimal12());
    FAIL("expected OffsetOverflow");
  } catch (const RetargetError& e) {
    CHECK(e.code == RetargetError::Code::OffsetOverflow);
  }
}

TEST_CASE("code growth into a following segment raises OffsetOverflow") {
  const auto img = image_of("sub x1, x2, x3\njal x0, 0\n.org 0xc\n.word 1234\n", "tight_data");
  try {
    risp::retarget::plan(img, minimal12());
    FAIL("expected OffsetOverflow");
  } catch (const RetargetError& e) {
    CHECK(e.code == RetargetError::Code::OffsetOverflow);
  }
}

TEST_CASE("macro file emission covers exactly the out-of-subset rules") {
  const auto text = risp::retarget::emit_macro_file(risp::retarget::default_catalog(), minimal12());
  CHECK(text.find(".macro sub rd, rs1, rs2") != std::string::npos);
  CHECK(text.find(".macro beq rs1, rs2, target") != std::string::npos);
  CHECK(text.find(".macro lui rd, imm") != std::string::npos);
  CHECK(text.find("xori x5, \\rs2, -1") != std::string::npos);
  CHECK(text.find("((\\imm >> 11) & 0x1ff)") != std::string::npos);
  CHECK(text.find("9990\\@") != std::string::npos);
  CHECK(text.find(".endm") != std::string::npos);
  CHECK(text.find(".macro add") == std::string::npos);
  CHECK(text.find(".macro blt") == std::string::npos);

  const auto empty = risp::retarget::emit_macro_file({}, minimal12());
  CHECK(empty.find(".macro") == std::string::npos);
  CHECK(empty.rfind("#", 0) == 0);
}

TEST_CASE("plan serialization carries sites, rules, and sizes") {
  const auto img = image_of("sub x1, x2, x3\nor x4, x1, x2\njal x0, 0\n", "two_sites");
  const auto p = risp::retarget::plan(img, minimal12());
  const auto j = risp::retarget::plan_to_json(p);

  CHECK(j.at("program") == "two_sites");
  CHECK(j.at("subset").size() == 12);
  REQUIRE(j.at("sites").size() == 2);
  CHECK(j.at("sites")[0].at("address") == 0);
  CHECK(j.at("sites")[0].at("mnemonic") == "sub");
  CHECK(j.at("sites")[1].at("address") == 4);
  CHECK(j.at("sites")[1].at("mnemonic") == "or");
  CHECK(j.at("rules_used").at("sub") == 3);
  CHECK(j.at("rules_used").at("or") == 5);
  CHECK(j.at("scratch") == std::vector<unsigned>({5, 6}));
  CHECK(j.at("size_before") == 3);
  CHECK(j.at("size_after") == 9);
  CHECK(j.at("overhead_fraction") == doctest::Approx(2.0));
}

TEST_CASE("rule catalogs survive a json round trip and reject malformed input") {
  const auto& catalog = risp::retarget::default_catalog();
  const auto j = risp::retarget::catalog_to_json(catalog);
  const auto back = risp::retarget::catalog_from_json(j);
  REQUIRE(back.size() == catalog.size());
  for (size_t i = 0; i < catalog.size(); ++i) {
    CHECK(back[i].source_mnemonic == catalog[i].source_mnemonic);
    CHECK(back[i].required_subset == catalog[i].required_subset);
    CHECK(back[i].template_lines == catalog[i].template_lines);
    CHECK(back[i].length == catalog[i].length);
  }

  const nlohmann::json missing_length = nlohmann::json::array(
      {{{"source", "sub"}, {"required", {"addi"}}, {"template", {"addi $rd, $rs1, 0"}}}});
  CHECK_THROWS_AS((void)risp::retarget::catalog_from_json(missing_length), RetargetError);

  const nlohmann::json unknown = nlohmann::json::array({{{"source", "frob"},
                                                         {"required", nlohmann::json::array()},
                                                         {"template", {"addi x1, x0, 0"}},
                                                         {"length", 1}}});
  try {
    (void)risp::retarget::catalog_from_json(unknown);
    FAIL("expected BadCatalog");
  } catch (const RetargetError& e) {
    CHECK(e.code == RetargetError::Code::BadCatalog);
  }
}

TEST_CASE("find_rule locates rules by source mnemonic") {
  const auto& catalog = risp::retarget::default_catalog();
  REQUIRE(risp::retarget::find_rule(catalog, "sub") != nullptr);
  CHECK(risp::retarget::find_rule(catalog, "sub")->source_mnemonic == "sub");
  CHECK(risp::retarget::find_rule(catalog, "lw") == nullptr);
  CHECK(risp::retarget::find_rule(catalog, "lb") == nullptr);
}
