// RV32E base ISA model: registry, decode/encode, executable semantics.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>

namespace risp::isa {

enum class Format { R, I, S, B, U, J };

// Registry order: B, R, I, S, U, J rows. The enum value is the semantic id.
enum class Op : uint8_t {
  beq, bne, blt, bge, bltu, bgeu,
  add, sub, sll, slt, sltu, xor_, srl, sra, or_, and_,
  lb, lh, lw, lbu, lhu, addi, slli, slti, sltiu, xori, srli, srai, ori, andi, jalr,
  sb, sh, sw,
  lui, auipc,
  jal,
};

inline constexpr std::size_t registry_size = 37;

struct InstructionSpec {
  std::string_view mnemonic;
  Format format;
  uint8_t opcode;                  // 7-bit major opcode
  std::optional<uint8_t> funct3;
  std::optional<uint8_t> funct7;
  Op semantic_id;
};

const std::array<InstructionSpec, registry_size>& registry();
const InstructionSpec& spec_of(Op op);
const InstructionSpec* find_spec(std::string_view mnemonic);  // nullptr if unknown

struct IsaError : std::runtime_error {
  enum class Code { IllegalEncoding, RegisterOutOfRange, FieldOverflow };
  Code code;
  IsaError(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

struct DecodedInstruction {
  const InstructionSpec* spec = nullptr;
  uint8_t rd = 0;
  uint8_t rs1 = 0;
  uint8_t rs2 = 0;
  int32_t imm = 0;   // sign-extended; U-type keeps the shifted value
  uint32_t raw = 0;

  Op op() const { return spec->semantic_id; }
};

// Structural equality: same spec and the fields the format defines.
bool structurally_equal(const DecodedInstruction& a, const DecodedInstruction& b);

DecodedInstruction decode(uint32_t word);
uint32_t encode(const DecodedInstruction& insn);

// Builder for tests and program construction. Fields not defined by the
// format are ignored. Sets raw via encode().
DecodedInstruction make(Op op, unsigned rd, unsigned rs1, unsigned rs2, int32_t imm = 0);

enum class Status { running, halted, trapped };

enum class Trap {
  none,
  illegal_instruction,
  register_out_of_range,
  misaligned_load,
  misaligned_store,
  misaligned_target,
};

std::string_view trap_name(Trap t);

// Byte-addressable sparse memory. Unwritten bytes read as zero.
class SparseMemory {
public:
  static constexpr uint32_t page_bytes = 4096;

  uint8_t load8(uint32_t addr) const;
  uint16_t load16(uint32_t addr) const;
  uint32_t load32(uint32_t addr) const;
  void store8(uint32_t addr, uint8_t v);
  void store16(uint32_t addr, uint16_t v);
  void store32(uint32_t addr, uint32_t v);

  // Zero bytes and absent bytes compare equal.
  bool same_contents(const SparseMemory& other) const;

  // True if the page holding addr has ever been written.
  bool page_mapped(uint32_t addr) const;

  std::size_t page_count() const { return pages_.size(); }

private:
  using Page = std::array<uint8_t, page_bytes>;
  std::unordered_map<uint32_t, Page> pages_;

  const Page* find_page(uint32_t addr) const;
  Page& touch_page(uint32_t addr);
};

struct MachineState {
  uint32_t pc = 0;
  std::array<uint32_t, 16> regs{};
  SparseMemory mem;
  Status status = Status::running;
  Trap trap = Trap::none;

  uint32_t reg(unsigned i) const { return i == 0 ? 0u : regs[i]; }
  void set_reg(unsigned i, uint32_t v) {
    if (i != 0) regs[i] = v;
  }
};

// Pure successor-state semantics. Requires state.status == running.
MachineState execute(const DecodedInstruction& insn, const MachineState& state);

// In-place variant used by the simulator's hot loop; same semantics.
void step(const DecodedInstruction& insn, MachineState& state);

}  // namespace risp::isa
