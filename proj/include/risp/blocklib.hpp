// Per-instruction hardware block library: RTL templates, golden vectors,
// and mutation-based adequacy checks.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "risp/isa.hpp"

namespace risp::blocklib {

struct BlockError : std::runtime_error {
  enum class Code { UnknownInstruction, NoVectors, TooFewVectors, SurvivingMutant };
  Code code;
  BlockError(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

// Uniform port contract shared by every block.
struct Port {
  std::string_view name;
  int width;
  bool input;
};
const std::array<Port, 13>& block_ports();

struct BlockStimulus {
  uint32_t insn = 0;
  uint32_t pc = 0;
  uint32_t rs1_value = 0;
  uint32_t rs2_value = 0;
  uint32_t mem_rdata = 0;
  bool operator==(const BlockStimulus&) const = default;
};

struct BlockOutputs {
  uint32_t rd_value = 0;
  bool rd_write_enable = false;
  uint32_t mem_addr = 0;
  uint32_t mem_wdata = 0;
  bool mem_write_enable = false;
  uint8_t byte_enables = 0;
  uint32_t next_pc_offset_or_target = 0;
  bool pc_select = false;
  bool operator==(const BlockOutputs&) const = default;
};

struct TestVector {
  BlockStimulus stimulus;
  BlockOutputs expected;
};

struct HardwareBlock {
  std::string mnemonic;
  isa::Format format;
  isa::Op semantic_id;
  uint32_t vector_seed;
  std::string template_file;   // library-relative template name
  std::string rtl_template;    // text with {{...}} substitution slots
};

const std::vector<HardwareBlock>& library();
const HardwareBlock& get_block(std::string_view mnemonic);

// Substitutes the block's slots ({{MNEMONIC}}, {{OPCODE}}, {{FUNCT3}},
// {{FUNCT7}}, per-format expression slots) into its template.
std::string render_block_rtl(const HardwareBlock& block);

// Expected outputs derived from the isa execution semantics: rd results via
// execution with a surrogate destination, branch takenness via a sentinel
// offset, store lanes and load byte enables via memory probes.
BlockOutputs golden_outputs(const HardwareBlock& block, const BlockStimulus& stim);

// Independent C++ mirror of the rendered RTL dataflow (bit-slice field
// extraction, per-mnemonic expression). The second route of the differential.
BlockOutputs block_eval(const HardwareBlock& block, const BlockStimulus& stim);

// n vectors: fixed edge-value crosses first, pseudorandom remainder seeded by
// the block's vector_seed. Stimuli respect the machine constraints (x0 reads
// zero, matching source indices share a value, data addresses aligned,
// control-flow targets 4-aligned).
std::vector<TestVector> gen_vectors(const HardwareBlock& block, std::size_t n);

// Self-checking Verilog-2005 testbench: drives every stimulus, compares all
// eight outputs, prints one line per vector and a final TB_RESULT line.
std::string emit_block_testbench(const HardwareBlock& block,
                                 const std::vector<TestVector>& vectors);

struct MutationOutcome {
  std::string name;
  bool killed = false;
  std::size_t killing_vector = 0;
};

struct MutationReport {
  std::string mnemonic;
  std::vector<MutationOutcome> outcomes;
};

// Names of the fixed mutation catalog for a block (>= 5 entries each).
std::vector<std::string> mutation_names(const HardwareBlock& block);

// Applies one cataloged mutation to the block's evaluation.
BlockOutputs mutated_eval(const HardwareBlock& block, const std::string& mutation,
                          const BlockStimulus& stim);

// Checks that the vector set kills every cataloged mutant. Throws
// SurvivingMutant with a listing when any mutant's outputs match the
// expected outputs on all vectors.
MutationReport mutation_smoke(const HardwareBlock& block,
                              const std::vector<TestVector>& vectors);

nlohmann::json library_manifest();

}  // namespace risp::blocklib
