// Macro-based rewriting of programs onto reduced instruction subsets. Each
// out-of-subset instruction in the code segment is replaced by a verified
// multi-instruction expansion drawn from a rule catalog; branches are
// relinked across the resulting address shifts in a second pass.
//
// Rewriting covers the contiguous run of decodable words around the entry
// point. An address gap or an undecodable word (inline data, zero fill in a
// flat binary) ends that run; everything outside it is preserved verbatim at
// its original address. Expansions may use x5/x6 as scratch, so a plan is
// refused when either register could be live at a rewrite site. Programs
// that leak the program counter into observable results keep only
// signature-level equivalence when code addresses shift.
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "risp/profile.hpp"

namespace risp::retarget {

struct RetargetError : std::runtime_error {
  enum class Code { NoRuleFor, ScratchUnavailable, OffsetOverflow, BadCatalog, BadTemplate };
  Code code;
  RetargetError(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

// Template lines use operand slots ($rd, $rs1, $rs2, $imm), scratch slots
// ($t0, $t1), local labels ($L0, $L1), a control-flow slot ($target) that is
// relinked to the rewritten program, and derived immediates ($imm31 = 31 -
// ($imm & 31); $lui_hi/$lui_lo = upper-immediate split at bit 11).
struct MacroRule {
  std::string source_mnemonic;
  std::vector<std::string> required_subset;
  std::vector<std::string> template_lines;
  std::size_t length = 0;  // instructions per expansion
};

struct RewriteSite {
  uint32_t address = 0;  // original word address
  std::string mnemonic;
};

struct RetargetPlan {
  profile::ProgramImage program;
  profile::InstructionSubset subset;
  std::vector<RewriteSite> rewrites;
  std::map<std::string, MacroRule> rules_used;
  std::vector<unsigned> scratch_policy = {5, 6};
  uint64_t size_before = 0;  // code-segment words
  uint64_t size_after = 0;

  double overhead_fraction() const {
    return size_before ? double(size_after) / double(size_before) - 1.0 : 0.0;
  }
};

const std::vector<MacroRule>& default_catalog();
const MacroRule* find_rule(const std::vector<MacroRule>& catalog, std::string_view mnemonic);

RetargetPlan plan(const profile::ProgramImage& program, const profile::InstructionSubset& subset,
                  const std::vector<MacroRule>& catalog = default_catalog());

profile::ProgramImage apply(const RetargetPlan& p);

struct VerifyOutcome {
  bool verified = false;
  std::string counterexample;  // empty when verified
  uint64_t trials = 0;
};

// Differential check of one rule against its source instruction: random and
// edge-case operands, executed on cloned machine states. Scratch registers
// and the exact final PC of straight-line expansions are excluded from the
// comparison.
VerifyOutcome verify_rule(const MacroRule& rule, std::size_t trials = 10000, uint32_t seed = 1);

// GNU assembler .macro/.endm definitions for every catalog rule whose source
// instruction is outside the subset.
std::string emit_macro_file(const std::vector<MacroRule>& catalog,
                            const profile::InstructionSubset& subset);

nlohmann::json plan_to_json(const RetargetPlan& p);
std::vector<MacroRule> catalog_from_json(const nlohmann::json& j);
nlohmann::json catalog_to_json(const std::vector<MacroRule>& catalog);

}  // namespace risp::retarget
