// Small two-pass assembler for building RV32E test programs.
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "risp/profile.hpp"

namespace risp::asmkit {

struct AsmError : std::runtime_error {
  int line;
  AsmError(int line_no, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + msg),
        line(line_no) {}
};

struct Assembly {
  std::vector<std::pair<uint32_t, uint32_t>> words;  // (address, word), ascending
  uint32_t entry = 0;
  std::map<std::string, uint32_t> labels;
};

// Grammar per line: [label:] [mnemonic operands | .word v,... | .org addr]
// with # and // comments. Registers accept x0..x15 and ABI names. Branch and
// jal targets may be labels or byte offsets. lui/auipc take the 20-bit
// immediate as written in assembly.
Assembly assemble(const std::string& source, uint32_t origin = 0);

profile::ProgramImage to_image(const Assembly& a, const std::string& name);

}  // namespace risp::asmkit
