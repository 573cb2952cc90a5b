// Composition of instruction blocks into a single-cycle processor and
// emission of its Verilog-2005 RTL plus a self-checking testbench.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "risp/blocklib.hpp"
#include "risp/profile.hpp"

namespace risp::gen {

struct GenError : std::runtime_error {
  enum class Code {
    EmptySubset,
    UnknownInstruction,
    IoFailure,
    StructureMismatch,
    SubsetViolation,
  };
  Code code;
  GenError(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

// One dispatch entry: a 17-bit casez key over {funct7, funct3, opcode}
// selecting the block's outputs. Unconstrained funct bits are wildcards.
struct SwitchCase {
  std::string pattern;
  std::string mnemonic;
};

struct EmitOptions {
  uint32_t reset_pc = 0;
  bool no_regfile = false;  // expose register-file ports instead of an internal array
};

struct RispDesign {
  std::string name;
  profile::InstructionSubset subset;
  std::vector<blocklib::HardwareBlock> blocks;  // mnemonic-sorted, one per subset entry
  std::vector<SwitchCase> switch_cases;         // same order as blocks
  std::vector<std::string> fixed_units;         // fetch, regfile, pc_register
  std::vector<std::string> manifest;            // files written by the last emit_rtl
};

RispDesign build_design(const profile::InstructionSubset& subset,
                        std::string name = "risp");

// Writes risp_block_<m>.v per block, modularex.v, risp_top.v, and
// manifest.json into outdir. Returns the manifest and records the
// file list in design.manifest. Emission is deterministic.
nlohmann::json emit_rtl(RispDesign& design, const std::filesystem::path& outdir,
                        const EmitOptions& options = {});

struct StructureReport {
  std::size_t block_count = 0;
  std::size_t case_count = 0;
  bool default_case = false;
  std::vector<std::string> instantiated;  // mnemonics found in modularex, sorted
};

// Re-reads the emitted files and checks them against the design: N block
// files, N switch cases plus a default, every block instantiated exactly
// once, and no token referencing an instruction outside the subset.
StructureReport validate_structure(const RispDesign& design,
                                   const std::filesystem::path& outdir);

// Self-checking testbench: preloads the program into a unified memory, runs
// the top until halt, writes signature.out, and compares the signature region
// against the embedded expectation computed by the instruction-set simulator.
std::string emit_integration_testbench(const RispDesign& design,
                                       const profile::ProgramImage& program,
                                       std::pair<uint32_t, uint32_t> signature_region);

}  // namespace risp::gen
