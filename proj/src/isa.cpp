#include "risp/isa.hpp"

#include <sstream>

namespace risp::isa {

namespace {

constexpr uint8_t op_branch = 0x63;
constexpr uint8_t op_reg = 0x33;
constexpr uint8_t op_imm = 0x13;
constexpr uint8_t op_load = 0x03;
constexpr uint8_t op_store = 0x23;
constexpr uint8_t op_jalr = 0x67;
constexpr uint8_t op_lui = 0x37;
constexpr uint8_t op_auipc = 0x17;
constexpr uint8_t op_jal = 0x6F;

int32_t sx(uint32_t v, int bits) {
  uint32_t m = 1u << (bits - 1);
  return static_cast<int32_t>((v ^ m) - m);
}

[[noreturn]] void illegal(uint32_t word) {
  std::ostringstream os;
  os << "illegal encoding 0x" << std::hex << word;
  throw IsaError(IsaError::Code::IllegalEncoding, os.str());
}

[[noreturn]] void reg_range(std::string_view field, unsigned idx) {
  std::ostringstream os;
  os << "register field " << field << " selects x" << idx << " (RV32E allows x0-x15)";
  throw IsaError(IsaError::Code::RegisterOutOfRange, os.str());
}

[[noreturn]] void overflow(std::string_view what) {
  throw IsaError(IsaError::Code::FieldOverflow, std::string(what));
}

}  // namespace

const std::array<InstructionSpec, registry_size>& registry() {
  static const std::array<InstructionSpec, registry_size> table = {{
      {"beq", Format::B, op_branch, uint8_t{0}, std::nullopt, Op::beq},
      {"bne", Format::B, op_branch, uint8_t{1}, std::nullopt, Op::bne},
      {"blt", Format::B, op_branch, uint8_t{4}, std::nullopt, Op::blt},
      {"bge", Format::B, op_branch, uint8_t{5}, std::nullopt, Op::bge},
      {"bltu", Format::B, op_branch, uint8_t{6}, std::nullopt, Op::bltu},
      {"bgeu", Format::B, op_branch, uint8_t{7}, std::nullopt, Op::bgeu},

      {"add", Format::R, op_reg, uint8_t{0}, uint8_t{0x00}, Op::add},
      {"sub", Format::R, op_reg, uint8_t{0}, uint8_t{0x20}, Op::sub},
      {"sll", Format::R, op_reg, uint8_t{1}, uint8_t{0x00}, Op::sll},
      {"slt", Format::R, op_reg, uint8_t{2}, uint8_t{0x00}, Op::slt},
      {"sltu", Format::R, op_reg, uint8_t{3}, uint8_t{0x00}, Op::sltu},
      {"xor", Format::R, op_reg, uint8_t{4}, uint8_t{0x00}, Op::xor_},
      {"srl", Format::R, op_reg, uint8_t{5}, uint8_t{0x00}, Op::srl},
      {"sra", Format::R, op_reg, uint8_t{5}, uint8_t{0x20}, Op::sra},
      {"or", Format::R, op_reg, uint8_t{6}, uint8_t{0x00}, Op::or_},
      {"and", Format::R, op_reg, uint8_t{7}, uint8_t{0x00}, Op::and_},

      {"lb", Format::I, op_load, uint8_t{0}, std::nullopt, Op::lb},
      {"lh", Format::I, op_load, uint8_t{1}, std::nullopt, Op::lh},
      {"lw", Format::I, op_load, uint8_t{2}, std::nullopt, Op::lw},
      {"lbu", Format::I, op_load, uint8_t{4}, std::nullopt, Op::lbu},
      {"lhu", Format::I, op_load, uint8_t{5}, std::nullopt, Op::lhu},
      {"addi", Format::I, op_imm, uint8_t{0}, std::nullopt, Op::addi},
      {"slli", Format::I, op_imm, uint8_t{1}, uint8_t{0x00}, Op::slli},
      {"slti", Format::I, op_imm, uint8_t{2}, std::nullopt, Op::slti},
      {"sltiu", Format::I, op_imm, uint8_t{3}, std::nullopt, Op::sltiu},
      {"xori", Format::I, op_imm, uint8_t{4}, std::nullopt, Op::xori},
      {"srli", Format::I, op_imm, uint8_t{5}, uint8_t{0x00}, Op::srli},
      {"srai", Format::I, op_imm, uint8_t{5}, uint8_t{0x20}, Op::srai},
      {"ori", Format::I, op_imm, uint8_t{6}, std::nullopt, Op::ori},
      {"andi", Format::I, op_imm, uint8_t{7}, std::nullopt, Op::andi},
      {"jalr", Format::I, op_jalr, uint8_t{0}, std::nullopt, Op::jalr},

      {"sb", Format::S, op_store, uint8_t{0}, std::nullopt, Op::sb},
      {"sh", Format::S, op_store, uint8_t{1}, std::nullopt, Op::sh},
      {"sw", Format::S, op_store, uint8_t{2}, std::nullopt, Op::sw},

      {"lui", Format::U, op_lui, std::nullopt, std::nullopt, Op::lui},
      {"auipc", Format::U, op_auipc, std::nullopt, std::nullopt, Op::auipc},

      {"jal", Format::J, op_jal, std::nullopt, std::nullopt, Op::jal},
  }};
  return table;
}

const InstructionSpec& spec_of(Op op) {
  return registry()[static_cast<std::size_t>(op)];
}

const InstructionSpec* find_spec(std::string_view mnemonic) {
  static const auto index = [] {
    std::unordered_map<std::string_view, const InstructionSpec*> m;
    for (const auto& s : registry()) m.emplace(s.mnemonic, &s);
    return m;
  }();
  auto it = index.find(mnemonic);
  return it == index.end() ? nullptr : it->second;
}

std::string_view trap_name(Trap t) {
  switch (t) {
    case Trap::none: return "none";
    case Trap::illegal_instruction: return "illegal_instruction";
    case Trap::register_out_of_range: return "register_out_of_range";
    case Trap::misaligned_load: return "misaligned_load";
    case Trap::misaligned_store: return "misaligned_store";
    case Trap::misaligned_target: return "misaligned_target";
  }
  return "?";
}

bool structurally_equal(const DecodedInstruction& a, const DecodedInstruction& b) {
  if (a.spec != b.spec) return false;
  switch (a.spec->format) {
    case Format::R: return a.rd == b.rd && a.rs1 == b.rs1 && a.rs2 == b.rs2;
    case Format::I: return a.rd == b.rd && a.rs1 == b.rs1 && a.imm == b.imm;
    case Format::S: return a.rs1 == b.rs1 && a.rs2 == b.rs2 && a.imm == b.imm;
    case Format::B: return a.rs1 == b.rs1 && a.rs2 == b.rs2 && a.imm == b.imm;
    case Format::U: return a.rd == b.rd && a.imm == b.imm;
    case Format::J: return a.rd == b.rd && a.imm == b.imm;
  }
  return false;
}

namespace {

const InstructionSpec* match(uint32_t word) {
  const uint8_t opcode = word & 0x7F;
  const uint8_t f3 = (word >> 12) & 0x7;
  const uint8_t f7 = (word >> 25) & 0x7F;
  for (const auto& s : registry()) {
    if (s.opcode != opcode) continue;
    if (s.funct3 && *s.funct3 != f3) continue;
    if (s.funct7 && *s.funct7 != f7) continue;
    return &s;
  }
  return nullptr;
}

void check_reg(std::string_view field, unsigned idx) {
  if (idx >= 16) reg_range(field, idx);
}

}  // namespace

DecodedInstruction decode(uint32_t word) {
  const InstructionSpec* s = match(word);
  if (!s) illegal(word);

  DecodedInstruction d;
  d.spec = s;
  d.raw = word;
  const unsigned rd = (word >> 7) & 0x1F;
  const unsigned rs1 = (word >> 15) & 0x1F;
  const unsigned rs2 = (word >> 20) & 0x1F;

  switch (s->format) {
    case Format::R:
      check_reg("rd", rd);
      check_reg("rs1", rs1);
      check_reg("rs2", rs2);
      d.rd = rd;
      d.rs1 = rs1;
      d.rs2 = rs2;
      break;
    case Format::I:
      check_reg("rd", rd);
      check_reg("rs1", rs1);
      d.rd = rd;
      d.rs1 = rs1;
      if (s->funct7) {
        d.imm = static_cast<int32_t>(rs2);  // shamt
      } else {
        d.imm = static_cast<int32_t>(word) >> 20;
      }
      break;
    case Format::S:
      check_reg("rs1", rs1);
      check_reg("rs2", rs2);
      d.rs1 = rs1;
      d.rs2 = rs2;
      d.imm = sx(((word >> 7) & 0x1F) | (((word >> 25) & 0x7F) << 5), 12);
      break;
    case Format::B:
      check_reg("rs1", rs1);
      check_reg("rs2", rs2);
      d.rs1 = rs1;
      d.rs2 = rs2;
      d.imm = sx((((word >> 8) & 0xF) << 1) | (((word >> 25) & 0x3F) << 5) |
                     (((word >> 7) & 0x1) << 11) | ((word >> 31) << 12),
                 13);
      break;
    case Format::U:
      check_reg("rd", rd);
      d.rd = rd;
      d.imm = static_cast<int32_t>(word & 0xFFFFF000u);
      break;
    case Format::J:
      check_reg("rd", rd);
      d.rd = rd;
      d.imm = sx((((word >> 21) & 0x3FF) << 1) | (((word >> 20) & 0x1) << 11) |
                     (((word >> 12) & 0xFF) << 12) | ((word >> 31) << 20),
                 21);
      break;
  }
  return d;
}

uint32_t encode(const DecodedInstruction& insn) {
  const InstructionSpec& s = *insn.spec;
  if (insn.rd >= 16) reg_range("rd", insn.rd);
  if (insn.rs1 >= 16) reg_range("rs1", insn.rs1);
  if (insn.rs2 >= 16) reg_range("rs2", insn.rs2);

  uint32_t w = s.opcode;
  const uint32_t f3 = s.funct3.value_or(0);
  const int64_t imm = insn.imm;

  switch (s.format) {
    case Format::R:
      w |= uint32_t(insn.rd) << 7 | f3 << 12 | uint32_t(insn.rs1) << 15 |
           uint32_t(insn.rs2) << 20 | uint32_t(*s.funct7) << 25;
      break;
    case Format::I: {
      uint32_t imm12;
      if (s.funct7) {
        if (imm < 0 || imm > 31) overflow("shift amount outside 0..31");
        imm12 = (uint32_t(*s.funct7) << 5) | uint32_t(imm);
      } else {
        if (imm < -2048 || imm > 2047) overflow("I-type immediate outside 12-bit range");
        imm12 = uint32_t(imm) & 0xFFF;
      }
      w |= uint32_t(insn.rd) << 7 | f3 << 12 | uint32_t(insn.rs1) << 15 | imm12 << 20;
      break;
    }
    case Format::S: {
      if (imm < -2048 || imm > 2047) overflow("S-type immediate outside 12-bit range");
      const uint32_t u = uint32_t(imm) & 0xFFF;
      w |= (u & 0x1F) << 7 | f3 << 12 | uint32_t(insn.rs1) << 15 | uint32_t(insn.rs2) << 20 |
           ((u >> 5) & 0x7F) << 25;
      break;
    }
    case Format::B: {
      if (imm & 1) overflow("B-type immediate must be even");
      if (imm < -4096 || imm > 4094) overflow("B-type immediate outside 13-bit range");
      const uint32_t u = uint32_t(imm);
      w |= ((u >> 11) & 0x1) << 7 | ((u >> 1) & 0xF) << 8 | f3 << 12 |
           uint32_t(insn.rs1) << 15 | uint32_t(insn.rs2) << 20 | ((u >> 5) & 0x3F) << 25 |
           ((u >> 12) & 0x1) << 31;
      break;
    }
    case Format::U:
      if (imm & 0xFFF) overflow("U-type immediate must have zero low 12 bits");
      w |= uint32_t(insn.rd) << 7 | (uint32_t(imm) & 0xFFFFF000u);
      break;
    case Format::J: {
      if (imm & 1) overflow("J-type immediate must be even");
      if (imm < -1048576 || imm > 1048574) overflow("J-type immediate outside 21-bit range");
      const uint32_t u = uint32_t(imm);
      w |= uint32_t(insn.rd) << 7 | ((u >> 12) & 0xFF) << 12 | ((u >> 11) & 0x1) << 20 |
           ((u >> 1) & 0x3FF) << 21 | ((u >> 20) & 0x1) << 31;
      break;
    }
  }
  return w;
}

DecodedInstruction make(Op op, unsigned rd, unsigned rs1, unsigned rs2, int32_t imm) {
  DecodedInstruction d;
  d.spec = &spec_of(op);
  switch (d.spec->format) {
    case Format::R:
      d.rd = rd;
      d.rs1 = rs1;
      d.rs2 = rs2;
      break;
    case Format::I:
      d.rd = rd;
      d.rs1 = rs1;
      d.imm = imm;
      break;
    case Format::S:
    case Format::B:
      d.rs1 = rs1;
      d.rs2 = rs2;
      d.imm = imm;
      break;
    case Format::U:
    case Format::J:
      d.rd = rd;
      d.imm = imm;
      break;
  }
  d.raw = encode(d);
  return d;
}

const SparseMemory::Page* SparseMemory::find_page(uint32_t addr) const {
  auto it = pages_.find(addr / page_bytes);
  return it == pages_.end() ? nullptr : &it->second;
}

SparseMemory::Page& SparseMemory::touch_page(uint32_t addr) {
  auto [it, inserted] = pages_.try_emplace(addr / page_bytes);
  if (inserted) it->second.fill(0);
  return it->second;
}

uint8_t SparseMemory::load8(uint32_t addr) const {
  const Page* p = find_page(addr);
  return p ? (*p)[addr % page_bytes] : 0;
}

uint16_t SparseMemory::load16(uint32_t addr) const {
  return uint16_t(load8(addr)) | uint16_t(load8(addr + 1)) << 8;
}

uint32_t SparseMemory::load32(uint32_t addr) const {
  return uint32_t(load8(addr)) | uint32_t(load8(addr + 1)) << 8 |
         uint32_t(load8(addr + 2)) << 16 | uint32_t(load8(addr + 3)) << 24;
}

void SparseMemory::store8(uint32_t addr, uint8_t v) {
  touch_page(addr)[addr % page_bytes] = v;
}

void SparseMemory::store16(uint32_t addr, uint16_t v) {
  store8(addr, v & 0xFF);
  store8(addr + 1, v >> 8);
}

void SparseMemory::store32(uint32_t addr, uint32_t v) {
  store8(addr, v & 0xFF);
  store8(addr + 1, (v >> 8) & 0xFF);
  store8(addr + 2, (v >> 16) & 0xFF);
  store8(addr + 3, (v >> 24) & 0xFF);
}

bool SparseMemory::page_mapped(uint32_t addr) const {
  return find_page(addr) != nullptr;
}

bool SparseMemory::same_contents(const SparseMemory& other) const {
  auto covered_by = [](const SparseMemory& a, const SparseMemory& b) {
    for (const auto& [page_no, page] : a.pages_) {
      const uint32_t base = page_no * page_bytes;
      for (uint32_t i = 0; i < page_bytes; ++i) {
        if (page[i] != b.load8(base + i)) return false;
      }
    }
    return true;
  };
  return covered_by(*this, other) && covered_by(other, *this);
}

namespace {

void trap_state(MachineState& st, Trap t) {
  st.status = Status::trapped;
  st.trap = t;
}

}  // namespace

void step(const DecodedInstruction& insn, MachineState& st) {
  if (st.status != Status::running) {
    throw std::logic_error("step on a non-running machine state");
  }
  const uint32_t pc = st.pc;
  const uint32_t a = st.reg(insn.rs1);
  const uint32_t b = st.reg(insn.rs2);
  const uint32_t imm = static_cast<uint32_t>(insn.imm);

  auto branch = [&](bool taken) {
    if (!taken) {
      st.pc = pc + 4;
      return;
    }
    const uint32_t target = pc + imm;
    if (target & 3) {
      trap_state(st, Trap::misaligned_target);
      return;
    }
    st.pc = target;
  };

  switch (insn.op()) {
    case Op::beq: branch(a == b); return;
    case Op::bne: branch(a != b); return;
    case Op::blt: branch(int32_t(a) < int32_t(b)); return;
    case Op::bge: branch(int32_t(a) >= int32_t(b)); return;
    case Op::bltu: branch(a < b); return;
    case Op::bgeu: branch(a >= b); return;

    case Op::add: st.set_reg(insn.rd, a + b); break;
    case Op::sub: st.set_reg(insn.rd, a - b); break;
    case Op::sll: st.set_reg(insn.rd, a << (b & 31)); break;
    case Op::slt: st.set_reg(insn.rd, int32_t(a) < int32_t(b) ? 1 : 0); break;
    case Op::sltu: st.set_reg(insn.rd, a < b ? 1 : 0); break;
    case Op::xor_: st.set_reg(insn.rd, a ^ b); break;
    case Op::srl: st.set_reg(insn.rd, a >> (b & 31)); break;
    case Op::sra: st.set_reg(insn.rd, uint32_t(int32_t(a) >> (b & 31))); break;
    case Op::or_: st.set_reg(insn.rd, a | b); break;
    case Op::and_: st.set_reg(insn.rd, a & b); break;

    case Op::addi: st.set_reg(insn.rd, a + imm); break;
    case Op::slti: st.set_reg(insn.rd, int32_t(a) < insn.imm ? 1 : 0); break;
    case Op::sltiu: st.set_reg(insn.rd, a < imm ? 1 : 0); break;
    case Op::xori: st.set_reg(insn.rd, a ^ imm); break;
    case Op::ori: st.set_reg(insn.rd, a | imm); break;
    case Op::andi: st.set_reg(insn.rd, a & imm); break;
    case Op::slli: st.set_reg(insn.rd, a << (imm & 31)); break;
    case Op::srli: st.set_reg(insn.rd, a >> (imm & 31)); break;
    case Op::srai: st.set_reg(insn.rd, uint32_t(int32_t(a) >> (imm & 31))); break;

    case Op::lb:
    case Op::lh:
    case Op::lw:
    case Op::lbu:
    case Op::lhu: {
      const uint32_t ea = a + imm;
      const Op op = insn.op();
      if ((op == Op::lw && (ea & 3)) || ((op == Op::lh || op == Op::lhu) && (ea & 1))) {
        trap_state(st, Trap::misaligned_load);
        return;
      }
      uint32_t v = 0;
      switch (op) {
        case Op::lb: v = uint32_t(sx(st.mem.load8(ea), 8)); break;
        case Op::lbu: v = st.mem.load8(ea); break;
        case Op::lh: v = uint32_t(sx(st.mem.load16(ea), 16)); break;
        case Op::lhu: v = st.mem.load16(ea); break;
        case Op::lw: v = st.mem.load32(ea); break;
        default: break;
      }
      st.set_reg(insn.rd, v);
      break;
    }

    case Op::sb:
    case Op::sh:
    case Op::sw: {
      const uint32_t ea = a + imm;
      const Op op = insn.op();
      if ((op == Op::sw && (ea & 3)) || (op == Op::sh && (ea & 1))) {
        trap_state(st, Trap::misaligned_store);
        return;
      }
      if (op == Op::sb) st.mem.store8(ea, b & 0xFF);
      if (op == Op::sh) st.mem.store16(ea, b & 0xFFFF);
      if (op == Op::sw) st.mem.store32(ea, b);
      break;
    }

    case Op::lui: st.set_reg(insn.rd, imm); break;
    case Op::auipc: st.set_reg(insn.rd, pc + imm); break;

    case Op::jal: {
      const uint32_t target = pc + imm;
      if (target & 3) {
        trap_state(st, Trap::misaligned_target);
        return;
      }
      st.set_reg(insn.rd, pc + 4);
      st.pc = target;
      return;
    }
    case Op::jalr: {
      const uint32_t target = (a + imm) & ~1u;
      if (target & 3) {
        trap_state(st, Trap::misaligned_target);
        return;
      }
      st.set_reg(insn.rd, pc + 4);
      st.pc = target;
      return;
    }
  }
  st.pc = pc + 4;
}

MachineState execute(const DecodedInstruction& insn, const MachineState& state) {
  MachineState next = state;
  step(insn, next);
  return next;
}

}  // namespace risp::isa
