#include <doctest.h>

#include "risp/asmkit.hpp"
#include "risp/isa.hpp"

using namespace risp::asmkit;
namespace isa = risp::isa;

namespace {
uint32_t enc(isa::Op op, unsigned rd, unsigned rs1, unsigned rs2, int32_t imm = 0) {
  return isa::encode(isa::make(op, rd, rs1, rs2, imm));
}
}  // namespace

TEST_CASE("assembles the core syntax forms") {
  const std::string src = R"(
    # counts down from 5
    start:
      addi x1, x0, 5      // counter
      lui  a0, 2          ; a0 = 0x2000
    loop:
      addi x1, x1, -1
      bne  x1, zero, loop
      sw   x1, 0(a0)
      lw   x2, 4(a0)
      jalr x3, 8(x2)
      jal  x0, 0
  )";
  auto a = assemble(src, 0);
  REQUIRE(a.words.size() == 8);
  CHECK(a.entry == 0);
  CHECK(a.labels.at("start") == 0);
  CHECK(a.labels.at("loop") == 8);
  CHECK(a.words[0].second == enc(isa::Op::addi, 1, 0, 0, 5));
  CHECK(a.words[1].second == enc(isa::Op::lui, 10, 0, 0, 0x2000));
  CHECK(a.words[2].second == enc(isa::Op::addi, 1, 1, 0, -1));
  CHECK(a.words[3].second == enc(isa::Op::bne, 0, 1, 0, -4));
  CHECK(a.words[4].second == enc(isa::Op::sw, 0, 10, 1, 0));
  CHECK(a.words[5].second == enc(isa::Op::lw, 2, 10, 0, 4));
  CHECK(a.words[6].second == enc(isa::Op::jalr, 3, 2, 0, 8));
  CHECK(a.words[7].second == enc(isa::Op::jal, 0, 0, 0, 0));
  CHECK(a.words[7].second == 0x0000006Fu);
}

TEST_CASE("forward labels and data directives") {
  const std::string src = R"(
      jal x1, helper
      beq x0, x0, done
    helper:
      jalr x0, 0(x1)
    done:
      jal x0, 0
      .org 0x100
    table:
      .word 0xDEADBEEF, 42
      .word done
  )";
  auto a = assemble(src, 0);
  CHECK(a.labels.at("helper") == 8);
  CHECK(a.labels.at("done") == 12);
  CHECK(a.labels.at("table") == 0x100);
  CHECK(a.words[0].second == enc(isa::Op::jal, 1, 0, 0, 8));
  CHECK(a.words[1].second == enc(isa::Op::beq, 0, 0, 0, 8));

  auto at = [&](uint32_t addr) {
    for (auto& [x, w] : a.words)
      if (x == addr) return w;
    FAIL("no word at address");
    return 0u;
  };
  CHECK(at(0x100) == 0xDEADBEEFu);
  CHECK(at(0x104) == 42u);
  CHECK(at(0x108) == 12u);
}

TEST_CASE("abi register names map to rv32e indices") {
  auto a = assemble("add s1, fp, t2\nadd a5, tp, gp\nadd ra, sp, t0\nadd x15, t1, a4\n");
  CHECK(a.words[0].second == enc(isa::Op::add, 9, 8, 7));
  CHECK(a.words[1].second == enc(isa::Op::add, 15, 4, 3));
  CHECK(a.words[2].second == enc(isa::Op::add, 1, 2, 5));
  CHECK(a.words[3].second == enc(isa::Op::add, 15, 6, 14));
}

TEST_CASE("origin drives entry and label addresses") {
  auto a = assemble("start: addi x1, x0, 1\n", 0x8000);
  CHECK(a.entry == 0x8000);
  CHECK(a.labels.at("start") == 0x8000);
  CHECK(a.words[0].first == 0x8000);

  auto b = assemble(".org 0x400\nmain: jal x0, main\n");
  CHECK(b.entry == 0x400);
  CHECK(b.words[0].first == 0x400);
  CHECK(b.words[0].second == enc(isa::Op::jal, 0, 0, 0, 0));
}

TEST_CASE("assembler rejects malformed input with line numbers") {
  auto line_of = [](const std::string& src) {
    try {
      assemble(src);
    } catch (const AsmError& e) {
      return e.line;
    }
    return -1;
  };
  CHECK(line_of("addi x1, x0, 5\nfrob x1\n") == 2);
  CHECK(line_of("addi x16, x0, 5\n") == 1);
  CHECK(line_of("addi x1, x0, 5000\n") == 1);
  CHECK(line_of("add x1, x0\n") == 1);
  CHECK(line_of("beq x1, x2, nowhere\n") == 1);
  CHECK(line_of("a: addi x1, x0, 1\na: addi x1, x0, 1\n") == 2);
  CHECK(line_of("lw x1, x2, 4\n") == 1);
  CHECK(line_of("lui x1, 0x100000\n") == 1);
  CHECK(line_of("nop\n") == 1);  // no pseudo-instructions
  CHECK(line_of("addi x1, x0, 1\n.org 0\naddi x2, x0, 2\n") == 0);  // overlap
}

TEST_CASE("assembled image round-trips through the profiler") {
  auto a = assemble(R"(
      addi a0, zero, 3
      addi a1, zero, 4
      add  a2, a0, a1
      jal  x0, 0
  )");
  auto img = to_image(a, "tiny");
  auto p = risp::profile::profile(img);
  CHECK(p.total_static == 4);
  CHECK(p.static_counts.at("addi") == 2);
  CHECK(p.distinct.mnemonics == std::vector<std::string>{"add", "addi", "jal"});
}
