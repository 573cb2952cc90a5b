// Single-cycle golden-model simulator with subset enforcement and signatures.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "risp/isa.hpp"
#include "risp/profile.hpp"

namespace risp::gen {
struct RispDesign;
}

namespace risp::sim {

struct SimError : std::runtime_error {
  enum class Code { BadConfig, NotHalted, NoRegionConfigured, ExternalToolFailure };
  Code code;
  SimError(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

// jal x0, 0: jump-to-self, the halt marker.
inline constexpr uint32_t halt_word = 0x0000006Fu;

struct SimConfig {
  std::optional<profile::InstructionSubset> subset;  // none = full ISA
  uint64_t max_cycles = 10'000'000;
  std::optional<std::pair<uint32_t, uint32_t>> signature_region;  // [lo, hi), 4-aligned
  bool trace = false;
};

enum class RunStatus { halted, trapped, max_cycles_exceeded, subset_violation };
std::string_view run_status_name(RunStatus s);

struct RunResult {
  uint64_t cycles = 0;
  uint64_t retired = 0;
  RunStatus status = RunStatus::max_cycles_exceeded;
  isa::Trap trap = isa::Trap::none;
  std::string violation_mnemonic;
  uint32_t violation_pc = 0;
  std::map<std::string, uint64_t> dynamic_counts;
  std::optional<std::pair<uint32_t, uint32_t>> signature_region;
  std::optional<std::vector<uint32_t>> signature;  // engaged only for halted runs
  uint64_t unmapped_reads = 0;
  std::string trace;
  isa::MachineState final_state;
};

// Steps one instruction at a time so tests can inspect or perturb the state
// between instructions. run() drives this to completion.
class Simulator {
 public:
  Simulator(const profile::ProgramImage& image, SimConfig cfg);

  // Executes one instruction. Returns false once the run has ended.
  bool advance();
  bool ended() const { return ended_; }

  isa::MachineState& state() { return st_; }
  const isa::MachineState& state() const { return st_; }

  RunResult take_result();

 private:
  void end_run(RunStatus status);

  SimConfig cfg_;
  isa::MachineState st_;
  RunResult res_;
  bool ended_ = false;
};

RunResult run(const profile::ProgramImage& image, const SimConfig& cfg = {});

// One line per word: 8 lowercase hex digits, ascending address, LF.
std::string format_signature(const std::vector<uint32_t>& words);

// Signature text of a halted run. Throws NotHalted / NoRegionConfigured.
std::string signature(const RunResult& result);

nlohmann::json run_result_to_json(const RunResult& r);

struct DiffVerdict {
  enum class Kind { match, mismatch, iss_only };
  Kind kind;
  std::string reference_signature;
  std::string detail;
};

// Compares the ISS signature with an external RTL simulation of the design,
// when a command template ({testbench}, {rtl_files} placeholders) is given.
DiffVerdict differential_check(const profile::ProgramImage& image,
                               const gen::RispDesign& design,
                               const std::optional<std::string>& external_sim_cmd,
                               std::pair<uint32_t, uint32_t> signature_region);

}  // namespace risp::sim
