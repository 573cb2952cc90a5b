#include "risp/retarget.hpp"

#include <algorithm>
#include <cassert>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "risp/asmkit.hpp"
#include "risp/isa.hpp"

namespace risp::retarget {
namespace {

using isa::DecodedInstruction;
using isa::Format;

std::vector<MacroRule> build_default_catalog() {
  std::vector<MacroRule> rules;
  auto add = [&](const char* source, std::vector<std::string> required,
                 std::vector<std::string> lines, std::size_t length) {
    rules.push_back({source, std::move(required), std::move(lines), length});
  };

  add("sub", {"xori", "addi", "add"},
      {"xori $t0, $rs2, -1", "addi $t0, $t0, 1", "add $rd, $rs1, $t0"}, 3);
  add("or", {"and", "xori", "addi", "add"},
      {"and $t0, $rs1, $rs2", "xori $t0, $t0, -1", "addi $t0, $t0, 1", "add $rd, $rs1, $rs2",
       "add $rd, $rd, $t0"},
      5);
  add("xor", {"and", "add", "xori", "addi"},
      {"and $t0, $rs1, $rs2", "add $t0, $t0, $t0", "xori $t0, $t0, -1", "addi $t0, $t0, 1",
       "add $t1, $rs1, $rs2", "add $rd, $t1, $t0"},
      6);
  add("slt", {"addi", "blt", "add"},
      {"addi $t0, x0, 1", "blt $rs1, $rs2, $L0", "addi $t0, x0, 0", "$L0:", "add $rd, x0, $t0"},
      4);
  add("sltu", {"addi", "bltu", "add"},
      {"addi $t0, x0, 1", "bltu $rs1, $rs2, $L0", "addi $t0, x0, 0", "$L0:", "add $rd, x0, $t0"},
      4);
  add("slti", {"addi", "blt", "add"},
      {"addi $t0, x0, $imm", "addi $t1, x0, 1", "blt $rs1, $t0, $L0", "addi $t1, x0, 0", "$L0:",
       "add $rd, x0, $t1"},
      5);
  add("sltiu", {"addi", "bltu", "add"},
      {"addi $t0, x0, $imm", "addi $t1, x0, 1", "bltu $rs1, $t0, $L0", "addi $t1, x0, 0", "$L0:",
       "add $rd, x0, $t1"},
      5);
  add("beq", {"blt", "jal"},
      {"blt $rs1, $rs2, $L0", "blt $rs2, $rs1, $L0", "jal x0, $target", "$L0:"}, 3);
  add("bne", {"blt"}, {"blt $rs1, $rs2, $target", "blt $rs2, $rs1, $target"}, 2);
  add("bge", {"blt", "jal"}, {"blt $rs1, $rs2, $L0", "jal x0, $target", "$L0:"}, 2);
  add("bgeu", {"bltu", "jal"}, {"bltu $rs1, $rs2, $L0", "jal x0, $target", "$L0:"}, 2);
  add("lui", {"addi", "sll"},
      {"addi $t0, x0, $lui_hi", "addi $t1, x0, 11", "sll $t0, $t0, $t1", "addi $t0, $t0, $lui_lo",
       "addi $t1, x0, 12", "sll $rd, $t0, $t1"},
      6);
  add("auipc", {"jal", "addi", "sll", "add"},
      {"jal $t0, $L0", "$L0:", "addi $t0, $t0, -4", "addi $t1, x0, $lui_hi", "addi $rd, x0, 11",
       "sll $t1, $t1, $rd", "addi $t1, $t1, $lui_lo", "addi $rd, x0, 12", "sll $t1, $t1, $rd",
       "add $rd, $t0, $t1"},
      9);
  add("slli", {"addi", "sll"}, {"addi $t0, x0, $imm", "sll $rd, $rs1, $t0"}, 2);
  add("srai", {"addi", "sra"}, {"addi $t0, x0, $imm", "sra $rd, $rs1, $t0"}, 2);
  add("srli", {"addi", "sll", "add", "xori", "sra", "and"},
      {"addi $t0, x0, -1", "addi $t1, x0, $imm31", "sll $t0, $t0, $t1", "add $t0, $t0, $t0",
       "xori $t0, $t0, -1", "addi $t1, x0, $imm", "sra $t1, $rs1, $t1", "and $rd, $t1, $t0"},
      8);
  add("srl", {"addi", "and", "xori", "add", "sll", "sra"},
      {"addi $t0, x0, 31", "and $t1, $rs2, $t0", "xori $t1, $t1, -1", "addi $t1, $t1, 1",
       "add $t1, $t1, $t0", "addi $t0, x0, -1", "sll $t0, $t0, $t1", "add $t0, $t0, $t0",
       "xori $t0, $t0, -1", "sra $t1, $rs1, $rs2", "and $rd, $t1, $t0"},
      11);
  add("andi", {"addi", "and"}, {"addi $t0, x0, $imm", "and $rd, $rs1, $t0"}, 2);
  add("ori", {"addi", "and", "xori", "add"},
      {"addi $t0, x0, $imm", "and $t1, $rs1, $t0", "xori $t1, $t1, -1", "addi $t1, $t1, 1",
       "add $t0, $rs1, $t0", "add $rd, $t0, $t1"},
      6);
  return rules;
}

void replace_all(std::string& text, std::string_view from, const std::string& to) {
  size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
}

bool label_only(const std::string& line) {
  const auto stripped = line.substr(0, line.find_last_not_of(" \t") + 1);
  return !stripped.empty() && stripped.back() == ':';
}

struct SiteContext {
  DecodedInstruction d;
  uint32_t new_address = 0;
  std::optional<uint32_t> new_target;  // absolute, for control-flow sources
  size_t site_index = 0;
};

std::string instantiate(const MacroRule& rule, const SiteContext& ctx) {
  const uint32_t shamt = uint32_t(ctx.d.imm) & 31u;
  const uint32_t imm20 = uint32_t(ctx.d.imm) >> 12;
  std::string text;
  uint32_t emitted = 0;
  for (const std::string& raw_line : rule.template_lines) {
    std::string line = raw_line;
    replace_all(line, "$imm31", std::to_string(31 - shamt));
    replace_all(line, "$lui_hi", std::to_string((imm20 >> 11) & 0x1FFu));
    replace_all(line, "$lui_lo", std::to_string(imm20 & 0x7FFu));
    if (line.find("$target") != std::string::npos) {
      if (!ctx.new_target) {
        throw RetargetError(RetargetError::Code::BadTemplate,
                            rule.source_mnemonic + ": $target used for a non-branch source");
      }
      const uint32_t line_addr = ctx.new_address + 4 * emitted;
      replace_all(line, "$target", std::to_string(int32_t(*ctx.new_target - line_addr)));
    }
    replace_all(line, "$rs1", "x" + std::to_string(ctx.d.rs1));
    replace_all(line, "$rs2", "x" + std::to_string(ctx.d.rs2));
    replace_all(line, "$rd", "x" + std::to_string(ctx.d.rd));
    replace_all(line, "$imm", std::to_string(ctx.d.imm));
    replace_all(line, "$t0", "x5");
    replace_all(line, "$t1", "x6");
    replace_all(line, "$L0", "rt" + std::to_string(ctx.site_index) + "_0");
    replace_all(line, "$L1", "rt" + std::to_string(ctx.site_index) + "_1");
    text += line;
    text += '\n';
    if (!label_only(line)) ++emitted;
  }
  return text;
}

std::vector<uint32_t> assemble_expansion(const MacroRule& rule, const SiteContext& ctx) {
  const std::string text = instantiate(rule, ctx);
  asmkit::Assembly a;
  try {
    a = asmkit::assemble(text, ctx.new_address);
  } catch (const asmkit::AsmError& e) {
    throw RetargetError(RetargetError::Code::OffsetOverflow,
                        rule.source_mnemonic + " expansion does not assemble: " + e.what());
  }
  if (a.words.size() != rule.length) {
    throw RetargetError(RetargetError::Code::BadTemplate,
                        rule.source_mnemonic + ": template emits " +
                            std::to_string(a.words.size()) + " words, declared " +
                            std::to_string(rule.length));
  }
  std::vector<uint32_t> words;
  for (const auto& [addr, word] : a.words) words.push_back(word);
  return words;
}

bool rule_uses_scratch(const MacroRule& rule, const char* slot) {
  for (const auto& line : rule.template_lines) {
    if (line.find(slot) != std::string::npos) return true;
  }
  return false;
}

bool reads_reg(const DecodedInstruction& d, unsigned r) {
  const Format f = d.spec->format;
  if (f != Format::U && f != Format::J && d.rs1 == r) return true;
  if ((f == Format::R || f == Format::S || f == Format::B) && d.rs2 == r) return true;
  return false;
}

bool writes_reg(const DecodedInstruction& d, unsigned r) {
  const Format f = d.spec->format;
  return (f == Format::R || f == Format::I || f == Format::U || f == Format::J) && d.rd == r;
}

bool defines_operand(const DecodedInstruction& d, unsigned r) {
  const Format f = d.spec->format;
  if ((f == Format::R || f == Format::I || f == Format::U || f == Format::J) && d.rd == r)
    return true;
  if (f != Format::U && f != Format::J && d.rs1 == r) return true;
  if ((f == Format::R || f == Format::S || f == Format::B) && d.rs2 == r) return true;
  return false;
}

constexpr uint32_t kHaltWord = 0x0000006Fu;

struct Segment {
  size_t lo = 0, hi = 0;           // index range [lo, hi) in program.words
  std::vector<uint32_t> addrs;
  std::vector<DecodedInstruction> decoded;  // spec == nullptr for data words
  std::vector<uint32_t> raw;
};

Segment code_segment(const profile::ProgramImage& program) {
  const auto& words = program.words;
  size_t at = words.size();
  for (size_t i = 0; i < words.size(); ++i) {
    if (words[i].first == program.entry) {
      at = i;
      break;
    }
  }
  if (at == words.size()) {
    throw std::invalid_argument("entry point 0x" + std::to_string(program.entry) +
                                " is not an image word");
  }
  auto decodable = [&](size_t i) {
    try {
      (void)isa::decode(words[i].second);
      return true;
    } catch (const isa::IsaError&) {
      return false;
    }
  };
  if (!decodable(at)) {
    throw std::invalid_argument("entry word does not decode as an instruction");
  }
  // The segment is the contiguous run of decodable words around the entry
  // point. The first undecodable word (inline data, or the zero fill of a
  // flat binary) ends it, so data keeps its addresses when code grows.
  size_t lo = at, hi = at + 1;
  while (lo > 0 && words[lo - 1].first + 4 == words[lo].first && decodable(lo - 1)) --lo;
  while (hi < words.size() && words[hi - 1].first + 4 == words[hi].first && decodable(hi)) ++hi;

  Segment seg;
  seg.lo = lo;
  seg.hi = hi;
  for (size_t i = lo; i < hi; ++i) {
    seg.addrs.push_back(words[i].first);
    seg.raw.push_back(words[i].second);
    DecodedInstruction d;
    try {
      d = isa::decode(words[i].second);
    } catch (const isa::IsaError&) {
      d.spec = nullptr;
    }
    seg.decoded.push_back(d);
  }
  return seg;
}

bool globally_unread(const profile::ProgramImage& program, unsigned r) {
  for (const auto& [addr, word] : program.words) {
    try {
      if (reads_reg(isa::decode(word), r)) return false;
    } catch (const isa::IsaError&) {
    }
  }
  return true;
}

// Forward scan from the word after `site`: the scratch register is free if
// it is overwritten before any use within the straight-line run. Control
// transfers, undecodable words, and the segment end all count as unsafe.
bool scratch_free_at(const Segment& seg, size_t site, unsigned r) {
  for (size_t i = site + 1; i < seg.addrs.size(); ++i) {
    const DecodedInstruction& d = seg.decoded[i];
    if (!d.spec) return false;
    if (seg.raw[i] == kHaltWord) return true;
    if (reads_reg(d, r)) return false;
    const Format f = d.spec->format;
    if (f == Format::B || f == Format::J || d.spec->mnemonic == "jalr") return false;
    if (writes_reg(d, r)) return true;
  }
  return false;
}

struct Layout {
  Segment seg;
  std::vector<const MacroRule*> rule;  // per segment word, null when kept
  std::vector<uint32_t> new_addr;
  uint64_t size_before = 0, size_after = 0;
};

Layout compute_layout(const profile::ProgramImage& program,
                      const profile::InstructionSubset& subset,
                      const std::vector<MacroRule>& catalog) {
  Layout lay;
  lay.seg = code_segment(program);
  const size_t n = lay.seg.addrs.size();
  lay.rule.assign(n, nullptr);
  lay.new_addr.assign(n, 0);

  const bool t0_unread = globally_unread(program, 5);
  const bool t1_unread = globally_unread(program, 6);

  uint32_t cursor = lay.seg.addrs.empty() ? program.entry : lay.seg.addrs.front();
  for (size_t i = 0; i < n; ++i) {
    lay.new_addr[i] = cursor;
    const DecodedInstruction& d = lay.seg.decoded[i];
    uint32_t len = 1;
    if (d.spec && !subset.contains(d.spec->mnemonic)) {
      const std::string mnemonic(d.spec->mnemonic);
      const MacroRule* rule = find_rule(catalog, mnemonic);
      if (!rule) {
        throw RetargetError(RetargetError::Code::NoRuleFor,
                            "no rewrite rule for " + mnemonic + " at address 0x" +
                                [&] { std::ostringstream os; os << std::hex << lay.seg.addrs[i]; return os.str(); }());
      }
      for (unsigned scratch : {5u, 6u}) {
        if (defines_operand(d, scratch)) {
          throw RetargetError(RetargetError::Code::ScratchUnavailable,
                              mnemonic + " at 0x" +
                                  [&] { std::ostringstream os; os << std::hex << lay.seg.addrs[i]; return os.str(); }() +
                                  " names the scratch register x" + std::to_string(scratch));
        }
      }
      const bool needs_t0 = rule_uses_scratch(*rule, "$t0");
      const bool needs_t1 = rule_uses_scratch(*rule, "$t1");
      if ((needs_t0 && !t0_unread && !scratch_free_at(lay.seg, i, 5)) ||
          (needs_t1 && !t1_unread && !scratch_free_at(lay.seg, i, 6))) {
        throw RetargetError(RetargetError::Code::ScratchUnavailable,
                            "scratch may be live across the " + mnemonic + " at 0x" +
                                [&] { std::ostringstream os; os << std::hex << lay.seg.addrs[i]; return os.str(); }());
      }
      lay.rule[i] = rule;
      len = uint32_t(rule->length);
    }
    cursor += 4 * len;
  }
  lay.size_before = n;
  lay.size_after = (cursor - (n ? lay.seg.addrs.front() : program.entry)) / 4;
  return lay;
}

std::optional<uint32_t> remap_address(const Layout& lay, uint32_t old_addr) {
  if (lay.seg.addrs.empty() || old_addr < lay.seg.addrs.front() || old_addr > lay.seg.addrs.back())
    return std::nullopt;
  const uint32_t off = old_addr - lay.seg.addrs.front();
  if (off % 4 != 0) return std::nullopt;
  return lay.new_addr[off / 4];
}

std::vector<std::pair<uint32_t, uint32_t>> emit_code(const Layout& lay) {
  std::vector<std::pair<uint32_t, uint32_t>> out;
  const size_t n = lay.seg.addrs.size();
  for (size_t i = 0; i < n; ++i) {
    const DecodedInstruction& d = lay.seg.decoded[i];
    const uint32_t at = lay.new_addr[i];
    if (lay.rule[i]) {
      SiteContext ctx;
      ctx.d = d;
      ctx.new_address = at;
      ctx.site_index = i;
      const Format f = d.spec->format;
      if (f == Format::B || f == Format::J) {
        const uint32_t old_target = lay.seg.addrs[i] + uint32_t(d.imm);
        ctx.new_target = remap_address(lay, old_target).value_or(old_target);
      }
      const auto words = assemble_expansion(*lay.rule[i], ctx);
      for (size_t k = 0; k < words.size(); ++k) out.emplace_back(at + 4 * uint32_t(k), words[k]);
      continue;
    }
    if (!d.spec) {
      out.emplace_back(at, lay.seg.raw[i]);
      continue;
    }
    const Format f = d.spec->format;
    if (f == Format::B || f == Format::J) {
      const uint32_t old_target = lay.seg.addrs[i] + uint32_t(d.imm);
      const uint32_t new_target = remap_address(lay, old_target).value_or(old_target);
      const int32_t new_imm = int32_t(new_target - at);
      try {
        const auto relinked = isa::make(d.op(), d.rd, d.rs1, d.rs2, new_imm);
        out.emplace_back(at, relinked.raw);
      } catch (const isa::IsaError&) {
        throw RetargetError(RetargetError::Code::OffsetOverflow,
                            std::string(d.spec->mnemonic) + " target moved out of range (offset " +
                                std::to_string(new_imm) + ")");
      }
      continue;
    }
    out.emplace_back(at, lay.seg.raw[i]);
  }
  return out;
}

// Keeps the target outside the expansion body and within branch range even
// after per-line address shifts inside the expansion.
int32_t random_branch_offset(std::mt19937& rng, size_t expansion_len) {
  const int32_t floor = int32_t(((expansion_len * 4 + 63) / 64) * 64);
  const int32_t magnitude = floor + int32_t(rng() % 480u) * 4;
  return (rng() & 1u) ? magnitude : -magnitude;
}

}  // namespace

const std::vector<MacroRule>& default_catalog() {
  static const std::vector<MacroRule> catalog = build_default_catalog();
  return catalog;
}

const MacroRule* find_rule(const std::vector<MacroRule>& catalog, std::string_view mnemonic) {
  for (const auto& rule : catalog) {
    if (rule.source_mnemonic == mnemonic) return &rule;
  }
  return nullptr;
}

RetargetPlan plan(const profile::ProgramImage& program, const profile::InstructionSubset& subset,
                  const std::vector<MacroRule>& catalog) {
  for (const auto& rule : catalog) {
    for (const auto& m : rule.required_subset) {
      if (!isa::find_spec(m)) {
        throw RetargetError(RetargetError::Code::BadCatalog,
                            rule.source_mnemonic + " requires unknown mnemonic " + m);
      }
    }
  }
  const Layout lay = compute_layout(program, subset, catalog);

  RetargetPlan p;
  p.program = program;
  p.subset = subset;
  for (size_t i = 0; i < lay.seg.addrs.size(); ++i) {
    if (!lay.rule[i]) continue;
    p.rewrites.push_back({lay.seg.addrs[i], lay.rule[i]->source_mnemonic});
    p.rules_used.emplace(lay.rule[i]->source_mnemonic, *lay.rule[i]);
    for (const auto& m : lay.rule[i]->required_subset) {
      if (!subset.contains(m)) {
        throw RetargetError(RetargetError::Code::NoRuleFor,
                            lay.rule[i]->source_mnemonic + " expands through " + m +
                                ", which the subset lacks");
      }
    }
  }
  p.size_before = lay.size_before;
  p.size_after = lay.size_after;

  // Dry-run emission so branch-range and segment-collision failures surface
  // at planning time. Zero words outside the segment are padding (the fill
  // of a flat binary) and may be consumed by the growing code; nonzero
  // words are data and must not move.
  const auto code = emit_code(lay);
  if (!code.empty()) {
    const uint32_t code_end = code.back().first + 4;
    for (size_t i = 0; i < program.words.size(); ++i) {
      if (i >= lay.seg.lo && i < lay.seg.hi) continue;
      if (program.words[i].second == 0) continue;
      const uint32_t a = program.words[i].first;
      if (a >= code.front().first && a < code_end) {
        std::ostringstream os;
        os << "expanded code reaches 0x" << std::hex << code_end
           << " and collides with the segment at 0x" << a;
        throw RetargetError(RetargetError::Code::OffsetOverflow, os.str());
      }
    }
  }
  return p;
}

profile::ProgramImage apply(const RetargetPlan& p) {
  std::vector<MacroRule> catalog;
  for (const auto& [name, rule] : p.rules_used) catalog.push_back(rule);
  const Layout lay = compute_layout(p.program, p.subset, catalog);
  auto code = emit_code(lay);

  profile::ProgramImage out;
  out.name = p.program.name;
  out.entry = p.program.entry;
  out.source_format = p.program.source_format;
  const uint32_t code_front = code.empty() ? 0 : code.front().first;
  const uint32_t code_end = code.empty() ? 0 : code.back().first + 4;
  auto keep = [&](const std::pair<uint32_t, uint32_t>& w) {
    // Zero padding overwritten by the grown code drops out of the image.
    return w.second != 0 || w.first < code_front || w.first >= code_end;
  };
  for (size_t i = 0; i < lay.seg.lo; ++i) {
    if (keep(p.program.words[i])) out.words.push_back(p.program.words[i]);
  }
  out.words.insert(out.words.end(), code.begin(), code.end());
  for (size_t i = lay.seg.hi; i < p.program.words.size(); ++i) {
    if (keep(p.program.words[i])) out.words.push_back(p.program.words[i]);
  }
  std::sort(out.words.begin(), out.words.end());
  for (size_t i = 1; i < out.words.size(); ++i) {
    if (out.words[i].first == out.words[i - 1].first) {
      throw RetargetError(RetargetError::Code::OffsetOverflow,
                          "expanded code collides with another segment at 0x" +
                              [&] { std::ostringstream os; os << std::hex << out.words[i].first; return os.str(); }());
    }
  }
  return out;
}

VerifyOutcome verify_rule(const MacroRule& rule, std::size_t trials, uint32_t seed) {
  const auto* spec = isa::find_spec(rule.source_mnemonic);
  if (!spec) {
    throw RetargetError(RetargetError::Code::BadCatalog,
                        "rule for unknown mnemonic " + rule.source_mnemonic);
  }
  const bool is_shift = rule.source_mnemonic == "slli" || rule.source_mnemonic == "srli" ||
                        rule.source_mnemonic == "srai";

  std::mt19937 rng(seed ^ 0x52455452u);
  auto r32 = [&] { return uint32_t(rng()); };
  constexpr uint32_t value_edges[] = {0u, 1u, 0xFFFFFFFFu, 0x7FFFFFFFu, 0x80000000u};
  auto pick_reg = [&] {
    const unsigned idx = r32() % 14;  // x0..x15 minus the two scratch registers
    return idx < 5 ? idx : idx + 2;
  };

  VerifyOutcome out;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    out.trials = trial + 1;
    const unsigned rd = pick_reg(), rs1 = pick_reg(), rs2 = (trial % 7 == 3) ? rs1 : pick_reg();
    const uint32_t pc = 0x1000u + (r32() % 64u) * 0x100u;

    int32_t imm = 0;
    switch (spec->format) {
      case Format::R:
        break;
      case Format::I:
        imm = is_shift ? (trial < 32 ? int32_t(trial) : int32_t(r32() % 32))
                       : int32_t(r32() << 20) >> 20;
        break;
      case Format::B:
        imm = random_branch_offset(rng, rule.length);
        break;
      case Format::U: {
        constexpr uint32_t imm20_edges[] = {0u, 1u, 0xFFFFFu, 0x7FFFFu, 0x80000u};
        const uint32_t imm20 = trial < 5 ? imm20_edges[trial] : r32() % 0x100000u;
        imm = int32_t(imm20 << 12);
        break;
      }
      case Format::S:
      case Format::J:
        imm = int32_t((r32() % 512u) * 4u);
        break;
    }

    isa::MachineState start;
    start.pc = pc;
    for (unsigned r = 1; r < 16; ++r) {
      start.regs[r] = (r32() % 3 == 0) ? value_edges[r32() % 5] : r32();
    }

    auto describe = [&](const std::string& what) {
      std::ostringstream os;
      os << rule.source_mnemonic << " trial " << trial << ": rd=x" << rd << " rs1=x" << rs1
         << "(0x" << std::hex << start.reg(rs1) << ") rs2=x" << rs2 << "(0x" << start.reg(rs2)
         << ")" << std::dec << " imm=" << imm << " pc=0x" << std::hex << pc << std::dec << ": "
         << what;
      return os.str();
    };

    DecodedInstruction src;
    try {
      src = isa::make(spec->semantic_id, rd, rs1, rs2, imm);
    } catch (const isa::IsaError&) {
      continue;  // operand draw outside the encodable range
    }
    const isa::MachineState want = isa::execute(src, start);
    if (want.status == isa::Status::trapped) continue;

    SiteContext ctx;
    ctx.d = src;
    ctx.new_address = pc;
    ctx.site_index = 0;
    if (spec->format == Format::B || spec->format == Format::J) {
      ctx.new_target = pc + uint32_t(imm);
    }
    std::vector<uint32_t> words;
    try {
      words = assemble_expansion(rule, ctx);
    } catch (const RetargetError& e) {
      out.counterexample = describe(std::string("expansion rejected: ") + e.what());
      return out;
    }

    isa::MachineState got = start;
    const uint32_t end = pc + 4 * uint32_t(words.size());
    size_t steps = 0;
    while (got.status == isa::Status::running && got.pc >= pc && got.pc < end) {
      if (++steps > words.size() + 16) break;
      isa::step(isa::decode(words[(got.pc - pc) / 4]), got);
    }
    if (steps > words.size() + 16) {
      out.counterexample = describe("expansion does not terminate");
      return out;
    }
    if (got.status != isa::Status::running) {
      out.counterexample = describe("expansion trapped or halted");
      return out;
    }

    for (unsigned r = 0; r < 16; ++r) {
      if (r == 5 || r == 6) continue;
      if (got.reg(r) != want.reg(r)) {
        std::ostringstream os;
        os << "x" << r << " is 0x" << std::hex << got.reg(r) << ", expected 0x" << want.reg(r);
        out.counterexample = describe(os.str());
        return out;
      }
    }
    if (!got.mem.same_contents(want.mem)) {
      out.counterexample = describe("memory diverged");
      return out;
    }
    const uint32_t want_pc = want.pc == pc + 4 ? end : want.pc;
    if (got.pc != want_pc) {
      std::ostringstream os;
      os << "pc is 0x" << std::hex << got.pc << ", expected 0x" << want_pc;
      out.counterexample = describe(os.str());
      return out;
    }
  }
  out.verified = true;
  return out;
}

std::string emit_macro_file(const std::vector<MacroRule>& catalog,
                            const profile::InstructionSubset& subset) {
  std::string out = "# rewrite macros for subset";
  if (!subset.label.empty()) out += " '" + subset.label + "'";
  out += "\n# scratch registers: x5 x6\n";

  std::vector<const MacroRule*> emitted;
  for (const auto& rule : catalog) {
    if (!subset.contains(rule.source_mnemonic)) emitted.push_back(&rule);
  }
  std::sort(emitted.begin(), emitted.end(), [](const MacroRule* a, const MacroRule* b) {
    return a->source_mnemonic < b->source_mnemonic;
  });

  for (const MacroRule* rule : emitted) {
    const auto* spec = isa::find_spec(rule->source_mnemonic);
    std::string args;
    if (spec) {
      switch (spec->format) {
        case Format::R: args = "rd, rs1, rs2"; break;
        case Format::I: args = "rd, rs1, imm"; break;
        case Format::S: args = "rs2, imm, rs1"; break;
        case Format::B: args = "rs1, rs2, target"; break;
        case Format::U: args = "rd, imm"; break;
        case Format::J: args = "rd, target"; break;
      }
    }
    out += "\n.macro " + rule->source_mnemonic + " " + args + "\n";
    for (const std::string& raw_line : rule->template_lines) {
      std::string line = raw_line;
      replace_all(line, "$imm31", "(31 - (\\imm & 31))");
      replace_all(line, "$lui_hi", "((\\imm >> 11) & 0x1ff)");
      replace_all(line, "$lui_lo", "(\\imm & 0x7ff)");
      replace_all(line, "$target", "\\target");
      replace_all(line, "$rs1", "\\rs1");
      replace_all(line, "$rs2", "\\rs2");
      replace_all(line, "$rd", "\\rd");
      replace_all(line, "$imm", "\\imm");
      replace_all(line, "$t0", "x5");
      replace_all(line, "$t1", "x6");
      replace_all(line, "$L0", "9990\\@");
      replace_all(line, "$L1", "9991\\@");
      out += label_only(line) ? line + "\n" : "        " + line + "\n";
    }
    out += ".endm\n";
  }
  return out;
}

nlohmann::json plan_to_json(const RetargetPlan& p) {
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& site : p.rewrites) {
    sites.push_back({{"address", site.address}, {"mnemonic", site.mnemonic}});
  }
  nlohmann::json rules = nlohmann::json::object();
  for (const auto& [name, rule] : p.rules_used) rules[name] = rule.length;
  return {
      {"program", p.program.name},
      {"subset", p.subset.mnemonics},
      {"sites", sites},
      {"rules_used", rules},
      {"scratch", p.scratch_policy},
      {"size_before", p.size_before},
      {"size_after", p.size_after},
      {"overhead_fraction", p.overhead_fraction()},
  };
}

std::vector<MacroRule> catalog_from_json(const nlohmann::json& j) {
  std::vector<MacroRule> catalog;
  try {
    for (const auto& entry : j) {
      MacroRule rule;
      rule.source_mnemonic = entry.at("source").get<std::string>();
      for (const auto& m : entry.at("required")) rule.required_subset.push_back(m.get<std::string>());
      for (const auto& line : entry.at("template")) {
        rule.template_lines.push_back(line.get<std::string>());
      }
      rule.length = entry.at("length").get<std::size_t>();
      if (!isa::find_spec(rule.source_mnemonic)) {
        throw RetargetError(RetargetError::Code::BadCatalog,
                            "catalog rule for unknown mnemonic " + rule.source_mnemonic);
      }
      if (rule.template_lines.empty() || rule.length == 0) {
        throw RetargetError(RetargetError::Code::BadCatalog,
                            rule.source_mnemonic + ": empty template");
      }
      catalog.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    throw RetargetError(RetargetError::Code::BadCatalog,
                        std::string("malformed catalog: ") + e.what());
  }
  return catalog;
}

nlohmann::json catalog_to_json(const std::vector<MacroRule>& catalog) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& rule : catalog) {
    out.push_back({
        {"source", rule.source_mnemonic},
        {"required", rule.required_subset},
        {"template", rule.template_lines},
        {"length", rule.length},
    });
  }
  return out;
}

}  // namespace risp::retarget
