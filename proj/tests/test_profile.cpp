#include <doctest.h>

#include <algorithm>
#include <random>

#include "risp/isa.hpp"
#include "risp/profile.hpp"

using namespace risp::profile;
namespace isa = risp::isa;

namespace {

void put16(std::vector<uint8_t>& b, size_t off, uint16_t v) {
  b[off] = v & 0xFF;
  b[off + 1] = v >> 8;
}

void put32(std::vector<uint8_t>& b, size_t off, uint32_t v) {
  for (int i = 0; i < 4; ++i) b[off + i] = (v >> (8 * i)) & 0xFF;
}

struct ElfSection {
  uint32_t type;
  uint32_t flags;
  uint32_t addr;
  std::vector<uint8_t> data;
};

// Hand-assembled ELF32 little-endian image: header, section payloads, then
// the section header table (entry 0 reserved as the null section).
std::vector<uint8_t> build_elf(uint16_t machine, uint32_t entry,
                               const std::vector<ElfSection>& sections) {
  const size_t ehsize = 52, shentsize = 40;
  size_t data_off = ehsize;
  std::vector<size_t> offsets;
  for (const auto& s : sections) {
    offsets.push_back(data_off);
    data_off += s.data.size();
  }
  const size_t shoff = data_off;
  const size_t shnum = sections.size() + 1;
  std::vector<uint8_t> b(shoff + shnum * shentsize, 0);

  b[0] = 0x7F; b[1] = 'E'; b[2] = 'L'; b[3] = 'F';
  b[4] = 1;  // ELFCLASS32
  b[5] = 1;  // little-endian
  b[6] = 1;
  put16(b, 16, 2);  // ET_EXEC
  put16(b, 18, machine);
  put32(b, 20, 1);
  put32(b, 24, entry);
  put32(b, 32, uint32_t(shoff));
  put16(b, 40, uint16_t(ehsize));
  put16(b, 46, uint16_t(shentsize));
  put16(b, 48, uint16_t(shnum));

  for (size_t i = 0; i < sections.size(); ++i) {
    const auto& s = sections[i];
    std::copy(s.data.begin(), s.data.end(), b.begin() + offsets[i]);
    const size_t sh = shoff + (i + 1) * shentsize;
    put32(b, sh + 4, s.type);
    put32(b, sh + 8, s.flags);
    put32(b, sh + 12, s.addr);
    put32(b, sh + 16, uint32_t(offsets[i]));
    put32(b, sh + 20, uint32_t(s.data.size()));
  }
  return b;
}

std::vector<uint8_t> words_to_bytes(const std::vector<uint32_t>& words) {
  std::vector<uint8_t> b;
  for (uint32_t w : words) {
    for (int i = 0; i < 4; ++i) b.push_back((w >> (8 * i)) & 0xFF);
  }
  return b;
}

ProgramImage image_of_words(const std::vector<uint32_t>& words, uint32_t base = 0) {
  ProgramImage img;
  img.name = "mem";
  img.entry = base;
  for (size_t i = 0; i < words.size(); ++i) {
    img.words.emplace_back(base + uint32_t(4 * i), words[i]);
  }
  return img;
}

uint32_t enc(isa::Op op, unsigned rd, unsigned rs1, unsigned rs2, int32_t imm = 0) {
  return isa::encode(isa::make(op, rd, rs1, rs2, imm));
}

}  // namespace

TEST_CASE("flat binary bytes assemble little-endian words") {
  const std::vector<uint8_t> bytes = {0x13, 0x00, 0x00, 0x00, 0x13, 0x00, 0x00, 0x00};
  auto img = image_from_flat("two_nops", bytes, 0);
  REQUIRE(img.words.size() == 2);
  CHECK(img.words[0] == std::pair<uint32_t, uint32_t>{0, 0x00000013u});
  CHECK(img.words[1] == std::pair<uint32_t, uint32_t>{4, 0x00000013u});
  CHECK(img.entry == 0);

  auto based = image_from_flat("based", bytes, 0x8000'0000u);
  CHECK(based.words[0].first == 0x8000'0000u);
  CHECK(based.entry == 0x8000'0000u);

  // Trailing partial word is zero-padded.
  auto padded = image_from_flat("padded", {0x13, 0x00, 0x00, 0x00, 0xEF}, 0);
  REQUIRE(padded.words.size() == 2);
  CHECK(padded.words[1].second == 0x000000EFu);

  CHECK_THROWS_AS(image_from_flat("empty", {}, 0), ProfileError);
}

TEST_CASE("elf loader extracts executable sections only") {
  const std::vector<uint32_t> text = {enc(isa::Op::addi, 1, 0, 0, 1),
                                      enc(isa::Op::add, 2, 1, 1)};
  const std::vector<uint32_t> more = {enc(isa::Op::jal, 0, 0, 0, 0)};
  const std::vector<uint32_t> rodata = {0xFFFFFFFFu, 0xFFFFFFFFu};

  auto bytes = build_elf(243, 0x200, {
      {1, 0x6, 0x200, words_to_bytes(text)},    // PROGBITS alloc|exec
      {1, 0x2, 0x1000, words_to_bytes(rodata)}, // PROGBITS alloc only
      {8, 0x3, 0x2000, {}},                     // NOBITS
      {1, 0x4, 0x400, words_to_bytes(more)},    // PROGBITS exec
  });
  auto img = image_from_elf("prog.elf", bytes);
  CHECK(img.entry == 0x200);
  REQUIRE(img.words.size() == 3);
  CHECK(img.words[0].first == 0x200);
  CHECK(img.words[1].first == 0x204);
  CHECK(img.words[2].first == 0x400);
  CHECK(img.words[2].second == 0x0000006Fu);

  auto p = profile(img);
  CHECK(p.total_static == 3);
  CHECK(p.distinct.mnemonics == std::vector<std::string>{"add", "addi", "jal"});
}

TEST_CASE("elf loader rejects foreign images") {
  auto wrong_machine = build_elf(62, 0, {{1, 0x6, 0, words_to_bytes({0x13})}});
  CHECK_THROWS_AS(image_from_elf("x86.elf", wrong_machine), ProfileError);
  try {
    image_from_elf("x86.elf", wrong_machine);
  } catch (const ProfileError& e) {
    CHECK(e.code == ProfileError::Code::UnsupportedFormat);
  }

  std::vector<uint8_t> not_elf = {0xDE, 0xAD, 0xBE, 0xEF};
  CHECK_THROWS_AS(image_from_elf("junk", not_elf), ProfileError);

  auto elf64_class = build_elf(243, 0, {{1, 0x6, 0, words_to_bytes({0x13})}});
  elf64_class[4] = 2;
  CHECK_THROWS_AS(image_from_elf("elf64", elf64_class), ProfileError);

  auto no_exec = build_elf(243, 0, {{1, 0x2, 0, words_to_bytes({0x13})}});
  CHECK_THROWS_AS(image_from_elf("noexec.elf", no_exec), ProfileError);
}

TEST_CASE("listing lines parse address and word fields") {
  const std::string text =
      "prog.elf:     file format elf32-littleriscv\n"
      "\n"
      "Disassembly of section .text:\n"
      "\n"
      "80000000 <_start>:\n"
      "80000000: 00a28293 addi t0,t0,10\n"
      "80000004:\t003100b3 \tadd\tx1,x2,x3\n"
      "  80000008: 0000006f jal x0,0\n";
  auto img = image_from_listing("prog.lst", text);
  REQUIRE(img.words.size() == 3);
  CHECK(img.words[0] == std::pair<uint32_t, uint32_t>{0x80000000u, 0x00A28293u});
  CHECK(img.words[1] == std::pair<uint32_t, uint32_t>{0x80000004u, 0x003100B3u});
  CHECK(img.entry == 0x80000000u);

  auto d = isa::decode(0x00A28293u);
  CHECK(d.spec->mnemonic == "addi");
  CHECK(d.rd == 5);
  CHECK(d.rs1 == 5);
  CHECK(d.imm == 10);
}

TEST_CASE("listing lines with a broken word field are rejected") {
  CHECK_THROWS_AS(image_from_listing("bad", "80000000: 0001 .short 1\n"), ProfileError);
  try {
    image_from_listing("bad", "80000000: 0001 .short 1\n");
  } catch (const ProfileError& e) {
    CHECK(e.code == ProfileError::Code::MalformedListing);
  }
  CHECK_THROWS_AS(image_from_listing("dup",
                                     "0: 00000013 nop\n"
                                     "0: 00000013 nop\n"),
                  ProfileError);
  CHECK_THROWS_AS(image_from_listing("hdr", "just prose, no code\n"), ProfileError);
}

TEST_CASE("profile counts mnemonics and buckets data words") {
  auto img = image_of_words({
      enc(isa::Op::addi, 1, 0, 0, 1),
      enc(isa::Op::addi, 2, 0, 0, 2),
      enc(isa::Op::add, 3, 1, 2),
      enc(isa::Op::lw, 4, 3, 0, 0),
  });
  auto p = profile(img);
  CHECK(p.total_static == 4);
  CHECK(p.static_counts.at("addi") == 2);
  CHECK(p.static_counts.at("add") == 1);
  CHECK(p.static_counts.at("lw") == 1);
  CHECK(p.distinct.mnemonics == std::vector<std::string>{"add", "addi", "lw"});
  CHECK(p.data_words == 0);
  CHECK(p.coverage_fraction == doctest::Approx(3.0 / 37.0));

  // Embedded constants are bucketed as data, never counted as instructions.
  auto mixed = image_of_words({enc(isa::Op::addi, 1, 0, 0, 1), 0xFFFFFFFFu, 0xDEADBEEFu});
  auto q = profile(mixed);
  CHECK(q.total_static == 1);
  CHECK(q.data_words == 2);
  CHECK(q.distinct.mnemonics == std::vector<std::string>{"addi"});
  for (const auto& [m, c] : q.static_counts) CHECK(m != "data");

  uint64_t sum = 0;
  for (const auto& [m, c] : q.static_counts) sum += c;
  CHECK(sum == q.total_static);
}

TEST_CASE("profile of pure data fails loudly") {
  auto img = image_of_words({0xFFFFFFFFu, 0xFFFFFFFFu, 0xFFFFFFFFu});
  CHECK_THROWS_AS(profile(img), ProfileError);
  try {
    profile(img);
  } catch (const ProfileError& e) {
    CHECK(e.code == ProfileError::Code::AllWordsUndecodable);
  }
}

TEST_CASE("eighteen distinct instructions cover about half the registry") {
  std::vector<uint32_t> words;
  const isa::Op ops[] = {isa::Op::add, isa::Op::sub, isa::Op::sll, isa::Op::slt,
                         isa::Op::sltu, isa::Op::xor_, isa::Op::srl, isa::Op::sra,
                         isa::Op::or_, isa::Op::and_, isa::Op::addi, isa::Op::andi,
                         isa::Op::ori, isa::Op::xori, isa::Op::slti, isa::Op::slli,
                         isa::Op::srli, isa::Op::srai};
  for (auto op : ops) words.push_back(enc(op, 1, 2, 3, 0));
  auto p = profile(image_of_words(words));
  CHECK(p.distinct.size() == 18);
  CHECK(p.coverage_fraction == doctest::Approx(18.0 / 37.0));
  CHECK(p.coverage_fraction == doctest::Approx(0.486).epsilon(0.01));
}

TEST_CASE("profile is independent of word order") {
  std::vector<uint32_t> words = {
      enc(isa::Op::addi, 1, 0, 0, 1), enc(isa::Op::add, 2, 1, 1),
      enc(isa::Op::beq, 0, 1, 2, 8),  enc(isa::Op::sw, 0, 1, 2, 4),
      enc(isa::Op::lw, 3, 1, 0, 4),   0xFFFFFFFFu,
      enc(isa::Op::addi, 4, 0, 0, 7),
  };
  auto base = profile(image_of_words(words));
  std::mt19937 rng(99);
  for (int i = 0; i < 16; ++i) {
    std::shuffle(words.begin(), words.end(), rng);
    auto p = profile(image_of_words(words));
    CHECK(p.static_counts == base.static_counts);
    CHECK(p.total_static == base.total_static);
    CHECK(p.data_words == base.data_words);
    CHECK(p.distinct.mnemonics == base.distinct.mnemonics);
  }
}

TEST_CASE("merge sums counts and unions subsets") {
  auto pa = profile(image_of_words({enc(isa::Op::add, 1, 2, 3)}));
  auto pb = profile(image_of_words({enc(isa::Op::addi, 1, 2, 0, 5)}));
  auto m = merge_profiles({pa, pb});
  CHECK(m.distinct.mnemonics == std::vector<std::string>{"add", "addi"});
  CHECK(m.total_static == 2);

  auto self = merge_profiles({pa, pa});
  CHECK(self.distinct.mnemonics == pa.distinct.mnemonics);
  CHECK(self.total_static == 2 * pa.total_static);

  // Three disjoint six-instruction profiles union to eighteen.
  auto mk = [&](std::vector<isa::Op> ops) {
    std::vector<uint32_t> ws;
    for (auto op : ops) ws.push_back(enc(op, 1, 2, 3, 0));
    return profile(image_of_words(ws));
  };
  auto p1 = mk({isa::Op::add, isa::Op::sub, isa::Op::sll, isa::Op::slt, isa::Op::sltu,
                isa::Op::xor_});
  auto p2 = mk({isa::Op::srl, isa::Op::sra, isa::Op::or_, isa::Op::and_, isa::Op::addi,
                isa::Op::andi});
  auto p3 = mk({isa::Op::ori, isa::Op::xori, isa::Op::slti, isa::Op::slli, isa::Op::srli,
                isa::Op::srai});
  CHECK(merge_profiles({p1, p2, p3}).distinct.size() == 18);

  // Merging never shrinks the distinct set.
  auto grown = merge_profiles({pa, pb, p1});
  for (const auto& m2 : pa.distinct.mnemonics) CHECK(grown.distinct.contains(m2));
  for (const auto& m2 : pb.distinct.mnemonics) CHECK(grown.distinct.contains(m2));

  CHECK_THROWS_AS(merge_profiles({}), ProfileError);
}

TEST_CASE("subset json accepts the interchange shapes") {
  auto a = subset_from_json(nlohmann::json::parse(R"(["add","addi","add"])"));
  CHECK(a.mnemonics == std::vector<std::string>{"add", "addi"});

  auto b = subset_from_json(nlohmann::json::parse(R"({"distinct":["lw","sw"]})"));
  CHECK(b.mnemonics == std::vector<std::string>{"lw", "sw"});

  auto c = subset_from_json(
      nlohmann::json::parse(R"({"label":"core","mnemonics":["jal","beq"]})"));
  CHECK(c.mnemonics == std::vector<std::string>{"beq", "jal"});
  CHECK(c.label == "core");

  CHECK_THROWS_AS(subset_from_json(nlohmann::json::parse(R"(["frobnicate"])")),
                  ProfileError);
  CHECK_THROWS_AS(subset_from_json(nlohmann::json::parse(R"({"other":1})")), ProfileError);

  auto round = subset_from_json(subset_to_json(c));
  CHECK(round.mnemonics == c.mnemonics);
}

TEST_CASE("profile json carries the report fields") {
  auto p = profile(image_of_words({enc(isa::Op::add, 1, 2, 3), 0xFFFFFFFFu}));
  auto j = profile_to_json(p);
  CHECK(j.at("total_static") == 1);
  CHECK(j.at("data_words") == 1);
  CHECK(j.at("distinct") == nlohmann::json::array({"add"}));
  CHECK(j.at("counts").at("add") == 1);
  CHECK(j.at("coverage_fraction").get<double>() == doctest::Approx(1.0 / 37.0));
  CHECK(j.at("registry_size") == 37);

  auto table = profile_to_table(p);
  CHECK(table.find("add") != std::string::npos);
  CHECK(table.find("37") != std::string::npos);
}
