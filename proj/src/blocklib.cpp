#include "risp/blocklib.hpp"

#include <bitset>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>

namespace risp::blocklib {

namespace {

[[noreturn]] void fail(BlockError::Code code, const std::string& msg) {
  throw BlockError(code, msg);
}

std::string hex32(uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

enum class BlockClass { r_alu, i_alu, load, jump_reg, store, branch, upper, jump };

BlockClass class_of(const isa::InstructionSpec& s) {
  switch (s.opcode) {
    case 0x33: return BlockClass::r_alu;
    case 0x13: return BlockClass::i_alu;
    case 0x03: return BlockClass::load;
    case 0x67: return BlockClass::jump_reg;
    case 0x23: return BlockClass::store;
    case 0x63: return BlockClass::branch;
    case 0x6F: return BlockClass::jump;
    default: return BlockClass::upper;  // 0x37 lui, 0x17 auipc
  }
}

BlockClass class_of(const HardwareBlock& b) {
  return class_of(isa::spec_of(b.semantic_id));
}

bool is_shift_imm(isa::Op op) {
  return op == isa::Op::slli || op == isa::Op::srli || op == isa::Op::srai;
}

uint32_t fnv1a(std::string_view s) {
  uint32_t h = 2166136261u;
  for (char c : s) {
    h ^= uint8_t(c);
    h *= 16777619u;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Templates. Every block exposes the same ports; each template decodes its
// own instruction and gates all outputs on the match, so no output is ever X.

const char* ports_text =
    "  input  wire [31:0] insn,\n"
    "  input  wire [31:0] pc,\n"
    "  input  wire [31:0] rs1_value,\n"
    "  input  wire [31:0] rs2_value,\n"
    "  input  wire [31:0] mem_rdata,\n"
    "  output wire [31:0] rd_value,\n"
    "  output wire        rd_write_enable,\n"
    "  output wire [31:0] mem_addr,\n"
    "  output wire [31:0] mem_wdata,\n"
    "  output wire        mem_write_enable,\n"
    "  output wire [3:0]  byte_enables,\n"
    "  output wire [31:0] next_pc_offset_or_target,\n"
    "  output wire        pc_select\n"
    ");\n";

std::string tmpl_header() {
  return std::string("// {{MNEMONIC}} execution block\n"
                     "module risp_block_{{MNEMONIC}} (\n") +
         ports_text;
}

std::string tmpl_r_alu() {
  return tmpl_header() + R"(  wire match = (insn[6:0] == 7'b{{OPCODE}}) && (insn[14:12] == 3'b{{FUNCT3}}) && (insn[31:25] == 7'b{{FUNCT7}});
  wire [31:0] result = {{EXPR}};
  assign rd_value = match ? result : 32'd0;
  assign rd_write_enable = match;
  assign mem_addr = 32'd0;
  assign mem_wdata = 32'd0;
  assign mem_write_enable = 1'b0;
  assign byte_enables = 4'd0;
  assign next_pc_offset_or_target = 32'd0;
  assign pc_select = 1'b0;
endmodule
)";
}

std::string tmpl_i_alu() {
  return tmpl_header() + R"(  wire match = (insn[6:0] == 7'b{{OPCODE}}) && (insn[14:12] == 3'b{{FUNCT3}}){{FUNCT7_CHECK}};
  wire [31:0] imm = {{20{insn[31]}}, insn[31:20]};
  wire [4:0] shamt = insn[24:20];
  wire [31:0] result = {{EXPR}};
  assign rd_value = match ? result : 32'd0;
  assign rd_write_enable = match;
  assign mem_addr = 32'd0;
  assign mem_wdata = 32'd0;
  assign mem_write_enable = 1'b0;
  assign byte_enables = 4'd0;
  assign next_pc_offset_or_target = 32'd0;
  assign pc_select = 1'b0;
endmodule
)";
}

std::string tmpl_load() {
  return tmpl_header() + R"(  wire match = (insn[6:0] == 7'b{{OPCODE}}) && (insn[14:12] == 3'b{{FUNCT3}});
  wire [31:0] imm = {{20{insn[31]}}, insn[31:20]};
  wire [31:0] ea = rs1_value + imm;
  wire [7:0]  lane8 = mem_rdata >> ({ea[1:0], 3'b000});
  wire [15:0] lane16 = mem_rdata >> ({ea[1], 4'b0000});
  wire [31:0] loaded = {{RESULT}};
  assign rd_value = match ? loaded : 32'd0;
  assign rd_write_enable = match;
  assign mem_addr = match ? ea : 32'd0;
  assign mem_wdata = 32'd0;
  assign mem_write_enable = 1'b0;
  assign byte_enables = match ? (4'b{{BE_BASE}} << ea[1:0]) : 4'd0;
  assign next_pc_offset_or_target = 32'd0;
  assign pc_select = 1'b0;
endmodule
)";
}

std::string tmpl_jump_reg() {
  return tmpl_header() + R"(  wire match = (insn[6:0] == 7'b{{OPCODE}}) && (insn[14:12] == 3'b{{FUNCT3}});
  wire [31:0] imm = {{20{insn[31]}}, insn[31:20]};
  wire [31:0] target = (rs1_value + imm) & 32'hFFFFFFFE;
  assign rd_value = match ? (pc + 32'd4) : 32'd0;
  assign rd_write_enable = match;
  assign mem_addr = 32'd0;
  assign mem_wdata = 32'd0;
  assign mem_write_enable = 1'b0;
  assign byte_enables = 4'd0;
  assign next_pc_offset_or_target = match ? target : 32'd0;
  assign pc_select = match;
endmodule
)";
}

std::string tmpl_store() {
  return tmpl_header() + R"(  wire match = (insn[6:0] == 7'b{{OPCODE}}) && (insn[14:12] == 3'b{{FUNCT3}});
  wire [31:0] imm = {{20{insn[31]}}, insn[31:25], insn[11:7]};
  wire [31:0] ea = rs1_value + imm;
  assign rd_value = 32'd0;
  assign rd_write_enable = 1'b0;
  assign mem_addr = match ? ea : 32'd0;
  assign mem_wdata = match ? ({{WDATA}} << ({ea[1:0], 3'b000})) : 32'd0;
  assign mem_write_enable = match;
  assign byte_enables = match ? (4'b{{BE_BASE}} << ea[1:0]) : 4'd0;
  assign next_pc_offset_or_target = 32'd0;
  assign pc_select = 1'b0;
endmodule
)";
}

std::string tmpl_branch() {
  return tmpl_header() + R"(  wire match = (insn[6:0] == 7'b{{OPCODE}}) && (insn[14:12] == 3'b{{FUNCT3}});
  wire [31:0] imm = {{19{insn[31]}}, insn[31], insn[7], insn[30:25], insn[11:8], 1'b0};
  wire cond = {{COND}};
  wire taken = match && cond;
  assign rd_value = 32'd0;
  assign rd_write_enable = 1'b0;
  assign mem_addr = 32'd0;
  assign mem_wdata = 32'd0;
  assign mem_write_enable = 1'b0;
  assign byte_enables = 4'd0;
  assign next_pc_offset_or_target = taken ? (pc + imm) : 32'd0;
  assign pc_select = taken;
endmodule
)";
}

std::string tmpl_upper() {
  return tmpl_header() + R"(  wire match = (insn[6:0] == 7'b{{OPCODE}});
  wire [31:0] imm = {insn[31:12], 12'b0};
  wire [31:0] result = {{EXPR}};
  assign rd_value = match ? result : 32'd0;
  assign rd_write_enable = match;
  assign mem_addr = 32'd0;
  assign mem_wdata = 32'd0;
  assign mem_write_enable = 1'b0;
  assign byte_enables = 4'd0;
  assign next_pc_offset_or_target = 32'd0;
  assign pc_select = 1'b0;
endmodule
)";
}

std::string tmpl_jump() {
  return tmpl_header() + R"(  wire match = (insn[6:0] == 7'b{{OPCODE}});
  wire [31:0] imm = {{11{insn[31]}}, insn[31], insn[19:12], insn[20], insn[30:21], 1'b0};
  assign rd_value = match ? (pc + 32'd4) : 32'd0;
  assign rd_write_enable = match;
  assign mem_addr = 32'd0;
  assign mem_wdata = 32'd0;
  assign mem_write_enable = 1'b0;
  assign byte_enables = 4'd0;
  assign next_pc_offset_or_target = match ? (pc + imm) : 32'd0;
  assign pc_select = match;
endmodule
)";
}

const std::string& template_for(BlockClass c) {
  static const std::string r = tmpl_r_alu();
  static const std::string i = tmpl_i_alu();
  static const std::string l = tmpl_load();
  static const std::string jr = tmpl_jump_reg();
  static const std::string s = tmpl_store();
  static const std::string b = tmpl_branch();
  static const std::string u = tmpl_upper();
  static const std::string j = tmpl_jump();
  switch (c) {
    case BlockClass::r_alu: return r;
    case BlockClass::i_alu: return i;
    case BlockClass::load: return l;
    case BlockClass::jump_reg: return jr;
    case BlockClass::store: return s;
    case BlockClass::branch: return b;
    case BlockClass::upper: return u;
    case BlockClass::jump: return j;
  }
  return r;
}

const char* template_name(BlockClass c) {
  switch (c) {
    case BlockClass::r_alu: return "templates/r_alu.v";
    case BlockClass::i_alu: return "templates/i_alu.v";
    case BlockClass::load: return "templates/load.v";
    case BlockClass::jump_reg: return "templates/jump_reg.v";
    case BlockClass::store: return "templates/store.v";
    case BlockClass::branch: return "templates/branch.v";
    case BlockClass::upper: return "templates/upper.v";
    case BlockClass::jump: return "templates/jump.v";
  }
  return "?";
}

// Per-mnemonic expression slots.
std::string expr_slot(isa::Op op) {
  using isa::Op;
  switch (op) {
    case Op::add: return "rs1_value + rs2_value";
    case Op::sub: return "rs1_value - rs2_value";
    case Op::sll: return "rs1_value << rs2_value[4:0]";
    case Op::slt: return "{31'd0, ($signed(rs1_value) < $signed(rs2_value))}";
    case Op::sltu: return "{31'd0, (rs1_value < rs2_value)}";
    case Op::xor_: return "rs1_value ^ rs2_value";
    case Op::srl: return "rs1_value >> rs2_value[4:0]";
    case Op::sra: return "$signed(rs1_value) >>> rs2_value[4:0]";
    case Op::or_: return "rs1_value | rs2_value";
    case Op::and_: return "rs1_value & rs2_value";
    case Op::addi: return "rs1_value + imm";
    case Op::slti: return "{31'd0, ($signed(rs1_value) < $signed(imm))}";
    case Op::sltiu: return "{31'd0, (rs1_value < imm)}";
    case Op::xori: return "rs1_value ^ imm";
    case Op::ori: return "rs1_value | imm";
    case Op::andi: return "rs1_value & imm";
    case Op::slli: return "rs1_value << shamt";
    case Op::srli: return "rs1_value >> shamt";
    case Op::srai: return "$signed(rs1_value) >>> shamt";
    case Op::lui: return "imm";
    case Op::auipc: return "pc + imm";
    default: return "";
  }
}

std::string cond_slot(isa::Op op) {
  using isa::Op;
  switch (op) {
    case Op::beq: return "rs1_value == rs2_value";
    case Op::bne: return "rs1_value != rs2_value";
    case Op::blt: return "$signed(rs1_value) < $signed(rs2_value)";
    case Op::bge: return "$signed(rs1_value) >= $signed(rs2_value)";
    case Op::bltu: return "rs1_value < rs2_value";
    case Op::bgeu: return "rs1_value >= rs2_value";
    default: return "";
  }
}

std::string load_result_slot(isa::Op op) {
  using isa::Op;
  switch (op) {
    case Op::lb: return "{{24{lane8[7]}}, lane8}";
    case Op::lbu: return "{24'd0, lane8}";
    case Op::lh: return "{{16{lane16[15]}}, lane16}";
    case Op::lhu: return "{16'd0, lane16}";
    case Op::lw: return "mem_rdata";
    default: return "";
  }
}

std::string wdata_slot(isa::Op op) {
  using isa::Op;
  switch (op) {
    case Op::sb: return "(rs2_value & 32'h000000FF)";
    case Op::sh: return "(rs2_value & 32'h0000FFFF)";
    case Op::sw: return "rs2_value";
    default: return "";
  }
}

std::string be_base_slot(isa::Op op) {
  using isa::Op;
  switch (op) {
    case Op::lb:
    case Op::lbu:
    case Op::sb: return "0001";
    case Op::lh:
    case Op::lhu:
    case Op::sh: return "0011";
    default: return "1111";  // lw, sw
  }
}

void replace_all(std::string& text, std::string_view slot, std::string_view value) {
  size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
}

}  // namespace

const std::array<Port, 13>& block_ports() {
  static const std::array<Port, 13> ports = {{
      {"insn", 32, true},
      {"pc", 32, true},
      {"rs1_value", 32, true},
      {"rs2_value", 32, true},
      {"mem_rdata", 32, true},
      {"rd_value", 32, false},
      {"rd_write_enable", 1, false},
      {"mem_addr", 32, false},
      {"mem_wdata", 32, false},
      {"mem_write_enable", 1, false},
      {"byte_enables", 4, false},
      {"next_pc_offset_or_target", 32, false},
      {"pc_select", 1, false},
  }};
  return ports;
}

const std::vector<HardwareBlock>& library() {
  static const std::vector<HardwareBlock> lib = [] {
    std::vector<HardwareBlock> v;
    for (const auto& s : isa::registry()) {
      HardwareBlock b;
      b.mnemonic = std::string(s.mnemonic);
      b.format = s.format;
      b.semantic_id = s.semantic_id;
      b.vector_seed = fnv1a(s.mnemonic);
      const BlockClass c = class_of(s);
      b.template_file = template_name(c);
      b.rtl_template = template_for(c);
      v.push_back(std::move(b));
    }
    return v;
  }();
  return lib;
}

const HardwareBlock& get_block(std::string_view mnemonic) {
  for (const auto& b : library()) {
    if (b.mnemonic == mnemonic) return b;
  }
  fail(BlockError::Code::UnknownInstruction,
       "no hardware block for '" + std::string(mnemonic) + "'");
}

std::string render_block_rtl(const HardwareBlock& block) {
  const auto& spec = isa::spec_of(block.semantic_id);
  std::string text = block.rtl_template;
  const bool shift = is_shift_imm(block.semantic_id);
  replace_all(text, "{{FUNCT7_CHECK}}",
              shift ? " && (insn[31:25] == 7'b{{FUNCT7}})" : "");
  replace_all(text, "{{EXPR}}", expr_slot(block.semantic_id));
  replace_all(text, "{{COND}}", cond_slot(block.semantic_id));
  replace_all(text, "{{RESULT}}", load_result_slot(block.semantic_id));
  replace_all(text, "{{WDATA}}", wdata_slot(block.semantic_id));
  replace_all(text, "{{BE_BASE}}", be_base_slot(block.semantic_id));
  replace_all(text, "{{MNEMONIC}}", block.mnemonic);
  replace_all(text, "{{OPCODE}}", std::bitset<7>(spec.opcode).to_string());
  if (spec.funct3) {
    replace_all(text, "{{FUNCT3}}", std::bitset<3>(*spec.funct3).to_string());
  }
  if (spec.funct7) {
    replace_all(text, "{{FUNCT7}}", std::bitset<7>(*spec.funct7).to_string());
  }
  return text;
}

// ---------------------------------------------------------------------------
// Golden outputs: derived from the isa execution semantics.

BlockOutputs golden_outputs(const HardwareBlock& block, const BlockStimulus& stim) {
  isa::DecodedInstruction d;
  try {
    d = isa::decode(stim.insn);
  } catch (const isa::IsaError&) {
    return {};  // a block presented with a foreign word drives all-zero outputs
  }
  if (d.spec->semantic_id != block.semantic_id) return {};

  const isa::Format f = block.format;
  isa::MachineState st;
  st.pc = stim.pc;
  if (f == isa::Format::R || f == isa::Format::I || f == isa::Format::S ||
      f == isa::Format::B) {
    st.set_reg(d.rs1, stim.rs1_value);
  }
  if (f == isa::Format::R || f == isa::Format::S || f == isa::Format::B) {
    st.set_reg(d.rs2, stim.rs2_value);
  }

  constexpr unsigned sur = 13;  // surrogate destination; reads happen first
  BlockOutputs o;
  using isa::Op;
  switch (class_of(block)) {
    case BlockClass::r_alu:
    case BlockClass::i_alu: {
      auto ins = isa::make(d.op(), sur, d.rs1, d.rs2, d.imm);
      o.rd_value = isa::execute(ins, st).regs[sur];
      o.rd_write_enable = true;
      break;
    }
    case BlockClass::load: {
      const uint32_t ea = stim.rs1_value + uint32_t(d.imm);
      auto ins = isa::make(d.op(), sur, d.rs1, 0, d.imm);
      auto rd_with = [&](uint32_t word) {
        auto st2 = st;
        st2.mem.store32(ea & ~3u, word);
        return isa::execute(ins, st2).regs[sur];
      };
      o.rd_value = rd_with(stim.mem_rdata);
      o.rd_write_enable = true;
      o.mem_addr = ea;
      const uint32_t rd_zero = rd_with(0);
      for (int k = 0; k < 4; ++k) {
        if (rd_with(uint32_t(0xFF) << (8 * k)) != rd_zero) o.byte_enables |= 1 << k;
      }
      break;
    }
    case BlockClass::jump_reg: {
      auto ins = isa::make(Op::jalr, sur, d.rs1, 0, d.imm);
      auto succ = isa::execute(ins, st);
      o.rd_value = succ.regs[sur];
      o.rd_write_enable = true;
      o.next_pc_offset_or_target = succ.pc;
      o.pc_select = true;
      break;
    }
    case BlockClass::store: {
      const uint32_t ea = stim.rs1_value + uint32_t(d.imm);
      const uint32_t base = ea & ~3u;
      auto mem_with = [&](uint32_t word) {
        auto st2 = st;
        st2.mem.store32(base, word);
        return isa::execute(d, st2).mem;
      };
      auto mem_a = mem_with(0);
      auto mem_b = mem_with(0xFFFFFFFFu);
      o.mem_wdata = mem_a.load32(base);
      for (int k = 0; k < 4; ++k) {
        if (mem_a.load8(base + k) == mem_b.load8(base + k)) o.byte_enables |= 1 << k;
      }
      o.mem_write_enable = true;
      o.mem_addr = ea;
      break;
    }
    case BlockClass::branch: {
      auto succ = isa::execute(d, st);
      auto sentinel = isa::make(d.op(), 0, d.rs1, d.rs2, 0x100);
      const bool cond = isa::execute(sentinel, st).pc == stim.pc + 0x100;
      o.pc_select = cond;
      o.next_pc_offset_or_target = cond ? succ.pc : 0;
      break;
    }
    case BlockClass::upper: {
      auto ins = isa::make(d.op(), sur, 0, 0, d.imm);
      o.rd_value = isa::execute(ins, st).regs[sur];
      o.rd_write_enable = true;
      break;
    }
    case BlockClass::jump: {
      auto ins = isa::make(Op::jal, sur, 0, 0, d.imm);
      auto succ = isa::execute(ins, st);
      o.rd_value = succ.regs[sur];
      o.rd_write_enable = true;
      o.next_pc_offset_or_target = succ.pc;
      o.pc_select = true;
      break;
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// block_eval: C++ mirror of the rendered RTL, field extraction by bit slices.

namespace {

struct Fields {
  uint32_t imm_i, imm_s, imm_b, imm_u, imm_j, shamt;
  bool match;
};

Fields extract(const HardwareBlock& blk, uint32_t w) {
  Fields f{};
  f.imm_i = uint32_t(int32_t(w) >> 20);
  f.imm_s = (uint32_t(int32_t(w) >> 20) & ~0x1Fu) | ((w >> 7) & 0x1F);
  uint32_t b = ((w >> 31) & 1) << 12 | ((w >> 7) & 1) << 11 | ((w >> 25) & 0x3F) << 5 |
               ((w >> 8) & 0xF) << 1;
  f.imm_b = (w & 0x80000000u) ? (b | 0xFFFFE000u) : b;
  f.imm_u = w & 0xFFFFF000u;
  uint32_t j = ((w >> 31) & 1) << 20 | ((w >> 12) & 0xFF) << 12 | ((w >> 20) & 1) << 11 |
               ((w >> 21) & 0x3FF) << 1;
  f.imm_j = (w & 0x80000000u) ? (j | 0xFFE00000u) : j;
  f.shamt = (w >> 20) & 0x1F;

  const auto& s = isa::spec_of(blk.semantic_id);
  f.match = (w & 0x7F) == s.opcode;
  if (s.funct3) f.match = f.match && ((w >> 12) & 7) == *s.funct3;
  if (s.funct7) f.match = f.match && ((w >> 25) & 0x7F) == *s.funct7;
  return f;
}

struct EvalTweaks {
  std::optional<isa::Op> op_override;
  int32_t imm_delta = 0;
  int force_cond = -1;  // -1 leave, 0 force false, 1 force true
  bool keep_lsb = false;
};

BlockOutputs eval_with(const HardwareBlock& blk, const BlockStimulus& s,
                       const EvalTweaks& t) {
  Fields f = extract(blk, s.insn);
  BlockOutputs o;
  if (!f.match) return o;

  if (t.imm_delta) {
    if (is_shift_imm(blk.semantic_id)) {
      f.shamt = (f.shamt + uint32_t(t.imm_delta)) & 31;
    } else {
      f.imm_i += uint32_t(t.imm_delta);
      f.imm_s += uint32_t(t.imm_delta);
      f.imm_b += uint32_t(t.imm_delta);
      f.imm_u += uint32_t(t.imm_delta);
      f.imm_j += uint32_t(t.imm_delta);
    }
  }

  const isa::Op op = t.op_override.value_or(blk.semantic_id);
  const uint32_t a = s.rs1_value, b = s.rs2_value, pc = s.pc;
  using isa::Op;
  auto set_rd = [&](uint32_t v) {
    o.rd_value = v;
    o.rd_write_enable = true;
  };

  switch (op) {
    case Op::add: set_rd(a + b); break;
    case Op::sub: set_rd(a - b); break;
    case Op::sll: set_rd(a << (b & 31)); break;
    case Op::slt: set_rd(int32_t(a) < int32_t(b) ? 1 : 0); break;
    case Op::sltu: set_rd(a < b ? 1 : 0); break;
    case Op::xor_: set_rd(a ^ b); break;
    case Op::srl: set_rd(a >> (b & 31)); break;
    case Op::sra: set_rd(uint32_t(int32_t(a) >> (b & 31))); break;
    case Op::or_: set_rd(a | b); break;
    case Op::and_: set_rd(a & b); break;

    case Op::addi: set_rd(a + f.imm_i); break;
    case Op::slti: set_rd(int32_t(a) < int32_t(f.imm_i) ? 1 : 0); break;
    case Op::sltiu: set_rd(a < f.imm_i ? 1 : 0); break;
    case Op::xori: set_rd(a ^ f.imm_i); break;
    case Op::ori: set_rd(a | f.imm_i); break;
    case Op::andi: set_rd(a & f.imm_i); break;
    case Op::slli: set_rd(a << f.shamt); break;
    case Op::srli: set_rd(a >> f.shamt); break;
    case Op::srai: set_rd(uint32_t(int32_t(a) >> f.shamt)); break;

    case Op::lb:
    case Op::lh:
    case Op::lw:
    case Op::lbu:
    case Op::lhu: {
      const uint32_t ea = a + f.imm_i;
      const uint32_t lane8 = (s.mem_rdata >> ((ea & 3) * 8)) & 0xFF;
      const uint32_t lane16 = (s.mem_rdata >> (((ea >> 1) & 1) * 16)) & 0xFFFF;
      uint32_t v = 0;
      uint8_t base = 0;
      switch (op) {
        case Op::lb: v = uint32_t(int32_t(lane8 << 24) >> 24); base = 0b0001; break;
        case Op::lbu: v = lane8; base = 0b0001; break;
        case Op::lh: v = uint32_t(int32_t(lane16 << 16) >> 16); base = 0b0011; break;
        case Op::lhu: v = lane16; base = 0b0011; break;
        default: v = s.mem_rdata; base = 0b1111; break;
      }
      set_rd(v);
      o.mem_addr = ea;
      o.byte_enables = uint8_t((base << (ea & 3)) & 0xF);
      break;
    }

    case Op::jalr: {
      uint32_t target = a + f.imm_i;
      if (!t.keep_lsb) target &= ~1u;
      set_rd(pc + 4);
      o.next_pc_offset_or_target = target;
      o.pc_select = true;
      break;
    }

    case Op::sb:
    case Op::sh:
    case Op::sw: {
      const uint32_t ea = a + f.imm_s;
      uint32_t w = b;
      uint8_t base = 0b1111;
      if (op == Op::sb) {
        w = b & 0xFF;
        base = 0b0001;
      } else if (op == Op::sh) {
        w = b & 0xFFFF;
        base = 0b0011;
      }
      o.mem_addr = ea;
      o.mem_wdata = w << ((ea & 3) * 8);
      o.mem_write_enable = true;
      o.byte_enables = uint8_t((base << (ea & 3)) & 0xF);
      break;
    }

    case Op::beq:
    case Op::bne:
    case Op::blt:
    case Op::bge:
    case Op::bltu:
    case Op::bgeu: {
      bool cond = false;
      switch (op) {
        case Op::beq: cond = a == b; break;
        case Op::bne: cond = a != b; break;
        case Op::blt: cond = int32_t(a) < int32_t(b); break;
        case Op::bge: cond = int32_t(a) >= int32_t(b); break;
        case Op::bltu: cond = a < b; break;
        default: cond = a >= b; break;
      }
      if (t.force_cond >= 0) cond = t.force_cond != 0;
      if (cond) {
        o.pc_select = true;
        o.next_pc_offset_or_target = pc + f.imm_b;
      }
      break;
    }

    case Op::lui: set_rd(f.imm_u); break;
    case Op::auipc: set_rd(pc + f.imm_u); break;

    case Op::jal:
      set_rd(pc + 4);
      o.next_pc_offset_or_target = pc + f.imm_j;
      o.pc_select = true;
      break;
  }
  return o;
}

}  // namespace

BlockOutputs block_eval(const HardwareBlock& block, const BlockStimulus& stim) {
  return eval_with(block, stim, {});
}

// ---------------------------------------------------------------------------
// Vector generation.

std::vector<TestVector> gen_vectors(const HardwareBlock& block, std::size_t n) {
  if (n < 1) fail(BlockError::Code::NoVectors, "vector count must be >= 1");
  std::mt19937 rng(block.vector_seed);
  auto r32 = [&] { return uint32_t(rng()); };
  std::vector<TestVector> out;
  out.reserve(n);

  auto push = [&](const BlockStimulus& s) {
    if (out.size() < n) out.push_back({s, golden_outputs(block, s)});
  };
  auto enc = [&](unsigned rd, unsigned rs1, unsigned rs2, int32_t imm) {
    return isa::encode(isa::make(block.semantic_id, rd, rs1, rs2, imm));
  };
  auto rnd_pc = [&] { return r32() & 0xFFFFFFFCu; };

  static const uint32_t value_edges[5] = {0, 1, 0xFFFFFFFFu, 0x7FFFFFFFu, 0x80000000u};
  static const int32_t imm_edges[5] = {0, 1, -1, 2047, -2048};
  static const int32_t shamt_edges[4] = {0, 1, 15, 31};
  static const uint32_t pc_edges[5] = {0x1000, 0, 0x80000000u, 0xFFFFF000u, 4};

  const BlockClass cls = class_of(block);
  const isa::Op op = block.semantic_id;

  // Edge phase.
  switch (cls) {
    case BlockClass::r_alu:
    case BlockClass::branch:
      for (uint32_t a : value_edges) {
        for (uint32_t b : value_edges) {
          const int32_t imm = cls == BlockClass::branch ? 8 : 0;
          push({enc(3, 1, 2, imm), 0x1000, a, b, r32()});
        }
      }
      break;
    case BlockClass::i_alu:
      if (is_shift_imm(op)) {
        for (uint32_t a : value_edges) {
          for (int32_t sh : shamt_edges) push({enc(3, 1, 0, sh), 0x1000, a, r32(), r32()});
        }
      } else {
        for (uint32_t a : value_edges) {
          for (int32_t imm : imm_edges) push({enc(3, 1, 0, imm), 0x1000, a, r32(), r32()});
        }
      }
      break;
    case BlockClass::load: {
      const uint32_t step = (op == isa::Op::lb || op == isa::Op::lbu) ? 1
                            : (op == isa::Op::lw)                     ? 4
                                                                      : 2;
      for (uint32_t rdata : value_edges) {
        for (uint32_t lane = 0; lane < 4; lane += step) {
          push({enc(3, 1, 0, 0), 0x1000, 0x2000 + lane, r32(), rdata});
        }
      }
      break;
    }
    case BlockClass::jump_reg:
      for (int k = 0; k < 10; ++k) {
        const int32_t imm = imm_edges[k % 5];
        const uint32_t ea = 0x4000 + (k >= 5 ? 1 : 0);
        push({enc(3, 1, 0, imm), 0x1000, ea - uint32_t(imm), r32(), r32()});
      }
      break;
    case BlockClass::store: {
      const uint32_t step = op == isa::Op::sb ? 1 : op == isa::Op::sw ? 4 : 2;
      for (uint32_t v : value_edges) {
        for (uint32_t lane = 0; lane < 4; lane += step) {
          push({enc(0, 1, 2, 0), 0x1000, 0x2000 + lane, v, r32()});
        }
      }
      break;
    }
    case BlockClass::upper: {
      static const uint32_t upper_edges[5] = {0, 1, 0xFFFFF, 0x7FFFF, 0x80000};
      for (uint32_t u : upper_edges) {
        for (uint32_t pc : pc_edges) {
          push({enc(3, 0, 0, int32_t(u << 12)), pc, r32(), r32(), r32()});
        }
      }
      break;
    }
    case BlockClass::jump: {
      static const int32_t jump_edges[5] = {0, 4, -4, 1048572, -1048576};
      for (int32_t imm : jump_edges) {
        for (uint32_t pc : pc_edges) push({enc(3, 0, 0, imm), pc, r32(), r32(), r32()});
      }
      break;
    }
  }

  // Random phase, constrained to machine-consistent stimuli.
  while (out.size() < n) {
    const unsigned rd = r32() % 16;
    BlockStimulus s{};
    s.pc = rnd_pc();
    s.mem_rdata = r32();
    switch (cls) {
      case BlockClass::r_alu:
      case BlockClass::branch: {
        const unsigned rs1 = r32() % 16, rs2 = r32() % 16;
        uint32_t a = rs1 ? r32() : 0;
        uint32_t b = rs2 == rs1 ? a : (rs2 ? r32() : 0);
        if (cls == BlockClass::branch && r32() % 4 == 0 && rs1 && rs2 && rs1 != rs2) {
          b = a;  // exercise the equal-operand path
        }
        const int32_t imm =
            cls == BlockClass::branch ? (int32_t(r32() << 20) >> 20) & ~3 : 0;
        s.insn = enc(cls == BlockClass::branch ? 0 : rd, rs1, rs2, imm);
        s.rs1_value = a;
        s.rs2_value = b;
        break;
      }
      case BlockClass::i_alu: {
        const unsigned rs1 = r32() % 16;
        const int32_t imm = is_shift_imm(op) ? int32_t(r32() & 31)
                                             : int32_t(int32_t(r32() << 20) >> 20);
        s.insn = enc(rd, rs1, 0, imm);
        s.rs1_value = rs1 ? r32() : 0;
        s.rs2_value = r32();
        break;
      }
      case BlockClass::load: {
        const unsigned rs1 = 1 + r32() % 15;
        const int32_t imm = int32_t(int32_t(r32() << 20) >> 20);
        const uint32_t align = (op == isa::Op::lb || op == isa::Op::lbu) ? 0
                               : (op == isa::Op::lw)                     ? 3
                                                                         : 1;
        const uint32_t ea = r32() & ~align;
        s.insn = enc(rd, rs1, 0, imm);
        s.rs1_value = ea - uint32_t(imm);
        s.rs2_value = r32();
        break;
      }
      case BlockClass::jump_reg: {
        const unsigned rs1 = 1 + r32() % 15;
        const int32_t imm = int32_t(int32_t(r32() << 20) >> 20);
        const uint32_t target = r32() & 0xFFFFFFFCu;
        const uint32_t ea = target + (r32() & 1);
        s.insn = enc(rd, rs1, 0, imm);
        s.rs1_value = ea - uint32_t(imm);
        s.rs2_value = r32();
        break;
      }
      case BlockClass::store: {
        const unsigned rs1 = 1 + r32() % 15;
        unsigned rs2 = r32() % 16;
        const int32_t imm = int32_t(int32_t(r32() << 20) >> 20);
        const uint32_t align = op == isa::Op::sb ? 0 : op == isa::Op::sw ? 3 : 1;
        const uint32_t ea = r32() & ~align;
        s.insn = enc(0, rs1, rs2, imm);
        s.rs1_value = ea - uint32_t(imm);
        s.rs2_value = rs2 == rs1 ? s.rs1_value : (rs2 ? r32() : 0);
        break;
      }
      case BlockClass::upper: {
        s.insn = enc(rd, 0, 0, int32_t(r32() & 0xFFFFF000u));
        s.rs1_value = r32();
        s.rs2_value = r32();
        break;
      }
      case BlockClass::jump: {
        const int32_t imm = (int32_t(r32() << 12) >> 12) & ~3;
        s.insn = enc(rd, 0, 0, imm);
        s.rs1_value = r32();
        s.rs2_value = r32();
        break;
      }
    }
    push(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Testbench emission.

std::string emit_block_testbench(const HardwareBlock& block,
                                 const std::vector<TestVector>& vectors) {
  if (vectors.empty()) {
    fail(BlockError::Code::NoVectors, "testbench needs at least one vector");
  }
  std::ostringstream os;
  os << "`timescale 1ns / 1ps\n";
  os << "module tb_risp_block_" << block.mnemonic << ";\n";
  for (const auto& p : block_ports()) {
    os << "  " << (p.input ? "reg " : "wire") << " ";
    if (p.width > 1) os << "[" << (p.width - 1) << ":0] ";
    os << p.name << ";\n";
  }
  for (const auto& p : block_ports()) {
    if (p.input) continue;
    os << "  reg ";
    if (p.width > 1) os << "[" << (p.width - 1) << ":0] ";
    os << "e_" << p.name << ";\n";
  }
  os << "  integer errors;\n\n";
  os << "  risp_block_" << block.mnemonic << " dut (\n";
  bool first = true;
  for (const auto& p : block_ports()) {
    os << (first ? "    ." : ",\n    .") << p.name << "(" << p.name << ")";
    first = false;
  }
  os << "\n  );\n\n";
  os << "  task check;\n";
  os << "    input integer idx;\n";
  os << "    begin\n";
  os << "      if (";
  first = true;
  for (const auto& p : block_ports()) {
    if (p.input) continue;
    if (!first) os << " &&\n          ";
    os << p.name << " === e_" << p.name;
    first = false;
  }
  os << ") begin\n";
  os << "        $display(\"vector %0d: PASS\", idx);\n";
  os << "      end else begin\n";
  os << "        $display(\"vector %0d: FAIL\", idx);\n";
  os << "        errors = errors + 1;\n";
  os << "      end\n";
  os << "    end\n";
  os << "  endtask\n\n";
  os << "  initial begin\n";
  os << "    errors = 0;\n";
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& s = vectors[i].stimulus;
    const auto& e = vectors[i].expected;
    os << "    insn = 32'h" << hex32(s.insn) << "; pc = 32'h" << hex32(s.pc)
       << "; rs1_value = 32'h" << hex32(s.rs1_value) << "; rs2_value = 32'h"
       << hex32(s.rs2_value) << "; mem_rdata = 32'h" << hex32(s.mem_rdata) << ";\n";
    os << "    e_rd_value = 32'h" << hex32(e.rd_value) << "; e_rd_write_enable = 1'b"
       << (e.rd_write_enable ? 1 : 0) << "; e_mem_addr = 32'h" << hex32(e.mem_addr)
       << "; e_mem_wdata = 32'h" << hex32(e.mem_wdata) << ";\n";
    os << "    e_mem_write_enable = 1'b" << (e.mem_write_enable ? 1 : 0)
       << "; e_byte_enables = 4'h" << std::hex << unsigned(e.byte_enables) << std::dec
       << "; e_next_pc_offset_or_target = 32'h" << hex32(e.next_pc_offset_or_target)
       << "; e_pc_select = 1'b" << (e.pc_select ? 1 : 0) << ";\n";
    os << "    #1; check(" << i << ");\n";
  }
  os << "    if (errors == 0) $display(\"TB_RESULT: PASS\");\n";
  os << "    else $display(\"TB_RESULT: FAIL\");\n";
  os << "    $finish;\n";
  os << "  end\n";
  os << "endmodule\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Mutation catalog.

namespace {

struct Mutation {
  std::string name;
  EvalTweaks tweaks;
  std::function<void(BlockOutputs&, const BlockStimulus&)> post;
};

isa::Op alt_partner(isa::Op op) {
  using isa::Op;
  switch (op) {
    case Op::add: return Op::sub;
    case Op::sub: return Op::add;
    case Op::sll: return Op::srl;
    case Op::slt: return Op::sltu;
    case Op::sltu: return Op::slt;
    case Op::xor_: return Op::or_;
    case Op::srl: return Op::sra;
    case Op::sra: return Op::srl;
    case Op::or_: return Op::and_;
    case Op::and_: return Op::or_;
    case Op::addi: return Op::ori;
    case Op::slti: return Op::sltiu;
    case Op::sltiu: return Op::slti;
    case Op::xori: return Op::ori;
    case Op::ori: return Op::andi;
    case Op::andi: return Op::ori;
    case Op::slli: return Op::srli;
    case Op::srli: return Op::srai;
    case Op::srai: return Op::srli;
    case Op::lb: return Op::lbu;
    case Op::lbu: return Op::lb;
    case Op::lh: return Op::lhu;
    case Op::lhu: return Op::lh;
    case Op::lw: return Op::lh;
    case Op::sb: return Op::sh;
    case Op::sh: return Op::sw;
    case Op::sw: return Op::sh;
    case Op::lui: return Op::auipc;
    case Op::auipc: return Op::lui;
    default: return op;
  }
}

isa::Op invert_partner(isa::Op op) {
  using isa::Op;
  switch (op) {
    case Op::beq: return Op::bne;
    case Op::bne: return Op::beq;
    case Op::blt: return Op::bge;
    case Op::bge: return Op::blt;
    case Op::bltu: return Op::bgeu;
    default: return Op::bltu;  // bgeu
  }
}

isa::Op sign_partner(isa::Op op) {
  using isa::Op;
  switch (op) {
    case Op::blt: return Op::bltu;
    case Op::bge: return Op::bgeu;
    case Op::bltu: return Op::blt;
    case Op::bgeu: return Op::bge;
    case Op::beq: return Op::blt;
    default: return Op::bge;  // bne
  }
}

std::vector<Mutation> build_catalog(const HardwareBlock& blk) {
  std::vector<Mutation> v;
  auto alt = [&](isa::Op partner, const std::string& label) {
    EvalTweaks t;
    t.op_override = partner;
    v.push_back({label + "_" + std::string(isa::spec_of(partner).mnemonic), t, nullptr});
  };
  auto immd = [&](const std::string& name, int32_t delta) {
    EvalTweaks t;
    t.imm_delta = delta;
    v.push_back({name, t, nullptr});
  };
  auto post = [&](const std::string& name, auto&& fn) {
    v.push_back({name, {}, std::forward<decltype(fn)>(fn)});
  };
  auto rd_plus_one = [](BlockOutputs& o, const BlockStimulus&) { o.rd_value += 1; };
  auto rd_msb_flip = [](BlockOutputs& o, const BlockStimulus&) {
    o.rd_value ^= 0x80000000u;
  };
  auto rd_we_drop = [](BlockOutputs& o, const BlockStimulus&) {
    o.rd_write_enable = false;
  };
  auto rd_we_stuck = [](BlockOutputs& o, const BlockStimulus&) {
    o.rd_write_enable = true;
  };
  auto mem_we_stuck = [](BlockOutputs& o, const BlockStimulus&) {
    o.mem_write_enable = true;
  };
  auto mem_we_drop = [](BlockOutputs& o, const BlockStimulus&) {
    o.mem_write_enable = false;
  };
  auto pc_select_stuck = [](BlockOutputs& o, const BlockStimulus&) {
    o.pc_select = true;
  };
  auto pc_select_drop = [](BlockOutputs& o, const BlockStimulus&) {
    o.pc_select = false;
    o.next_pc_offset_or_target = 0;
  };
  auto be_zero = [](BlockOutputs& o, const BlockStimulus&) { o.byte_enables = 0; };
  auto be_swap = [](BlockOutputs& o, const BlockStimulus&) {
    const uint8_t b = o.byte_enables;
    o.byte_enables = uint8_t(((b & 1) << 3) | ((b & 2) << 1) | ((b & 4) >> 1) |
                             ((b & 8) >> 3));
  };
  auto wdata_plus_one = [](BlockOutputs& o, const BlockStimulus&) { o.mem_wdata += 1; };
  auto link_off = [](BlockOutputs& o, const BlockStimulus& s) {
    o.rd_value = s.pc + 8;
  };

  using isa::Op;
  switch (class_of(blk)) {
    case BlockClass::r_alu:
      alt(alt_partner(blk.semantic_id), "alt_op");
      post("rd_plus_one", rd_plus_one);
      post("rd_msb_flip", rd_msb_flip);
      post("rd_we_drop", rd_we_drop);
      post("mem_we_stuck", mem_we_stuck);
      post("pc_select_stuck", pc_select_stuck);
      break;
    case BlockClass::i_alu:
      alt(alt_partner(blk.semantic_id), "alt_op");
      immd("imm_plus_one", 1);
      post("rd_plus_one", rd_plus_one);
      post("rd_we_drop", rd_we_drop);
      post("mem_we_stuck", mem_we_stuck);
      post("pc_select_stuck", pc_select_stuck);
      break;
    case BlockClass::load:
      alt(alt_partner(blk.semantic_id), "width_swap");
      immd("imm_plus_four", 4);
      post("rd_plus_one", rd_plus_one);
      post("rd_we_drop", rd_we_drop);
      post("be_zero", be_zero);
      post("mem_we_stuck", mem_we_stuck);
      break;
    case BlockClass::jump_reg: {
      post("link_off", link_off);
      immd("imm_plus_four", 4);
      post("pc_select_drop", pc_select_drop);
      post("rd_we_drop", rd_we_drop);
      post("rd_plus_one", rd_plus_one);
      EvalTweaks t;
      t.keep_lsb = true;
      v.push_back({"lsb_kept", t, nullptr});
      break;
    }
    case BlockClass::store:
      alt(alt_partner(blk.semantic_id), "width_swap");
      immd("imm_plus_four", 4);
      post("wdata_plus_one", wdata_plus_one);
      post("mem_we_drop", mem_we_drop);
      post("rd_we_stuck", rd_we_stuck);
      if (blk.semantic_id == Op::sw) {
        post("pc_select_stuck", pc_select_stuck);
      } else {
        post("be_swap", be_swap);
      }
      break;
    case BlockClass::branch: {
      alt(invert_partner(blk.semantic_id), "cond_invert");
      alt(sign_partner(blk.semantic_id), "alt_cond");
      immd("imm_plus_four", 4);
      EvalTweaks taken;
      taken.force_cond = 1;
      v.push_back({"always_taken", taken, nullptr});
      EvalTweaks never;
      never.force_cond = 0;
      v.push_back({"never_taken", never, nullptr});
      post("rd_we_stuck", rd_we_stuck);
      break;
    }
    case BlockClass::upper:
      alt(alt_partner(blk.semantic_id), "alt_op");
      immd("imm_plus_4096", 4096);
      post("rd_plus_one", rd_plus_one);
      post("rd_we_drop", rd_we_drop);
      post("pc_select_stuck", pc_select_stuck);
      break;
    case BlockClass::jump:
      post("link_off", link_off);
      immd("imm_plus_four", 4);
      post("pc_select_drop", pc_select_drop);
      post("rd_we_drop", rd_we_drop);
      post("rd_plus_one", rd_plus_one);
      post("mem_we_stuck", mem_we_stuck);
      break;
  }
  return v;
}

BlockOutputs apply_mutation(const HardwareBlock& blk, const Mutation& m,
                            const BlockStimulus& stim) {
  BlockOutputs o = eval_with(blk, stim, m.tweaks);
  if (m.post) m.post(o, stim);
  return o;
}

}  // namespace

std::vector<std::string> mutation_names(const HardwareBlock& block) {
  std::vector<std::string> names;
  for (const auto& m : build_catalog(block)) names.push_back(m.name);
  return names;
}

BlockOutputs mutated_eval(const HardwareBlock& block, const std::string& mutation,
                          const BlockStimulus& stim) {
  for (const auto& m : build_catalog(block)) {
    if (m.name == mutation) return apply_mutation(block, m, stim);
  }
  fail(BlockError::Code::UnknownInstruction,
       block.mnemonic + " has no mutation '" + mutation + "'");
}

MutationReport mutation_smoke(const HardwareBlock& block,
                              const std::vector<TestVector>& vectors) {
  if (vectors.empty()) fail(BlockError::Code::NoVectors, "no vectors supplied");
  if (vectors.size() < 100) {
    fail(BlockError::Code::TooFewVectors,
         "mutation smoke needs >= 100 vectors, got " + std::to_string(vectors.size()));
  }
  MutationReport report;
  report.mnemonic = block.mnemonic;
  std::vector<std::string> survivors;
  for (const auto& m : build_catalog(block)) {
    MutationOutcome outcome;
    outcome.name = m.name;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      if (apply_mutation(block, m, vectors[i].stimulus) != vectors[i].expected) {
        outcome.killed = true;
        outcome.killing_vector = i;
        break;
      }
    }
    if (!outcome.killed) survivors.push_back(m.name);
    report.outcomes.push_back(std::move(outcome));
  }
  if (!survivors.empty()) {
    std::string listing = block.mnemonic + ": surviving mutants:";
    for (const auto& s : survivors) listing += " " + s;
    fail(BlockError::Code::SurvivingMutant, listing);
  }
  return report;
}

nlohmann::json library_manifest() {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : library()) {
    const char* fmt = "?";
    switch (b.format) {
      case isa::Format::R: fmt = "R"; break;
      case isa::Format::I: fmt = "I"; break;
      case isa::Format::S: fmt = "S"; break;
      case isa::Format::B: fmt = "B"; break;
      case isa::Format::U: fmt = "U"; break;
      case isa::Format::J: fmt = "J"; break;
    }
    blocks.push_back({{"mnemonic", b.mnemonic},
                      {"format", fmt},
                      {"template_file", b.template_file},
                      {"vector_seed", b.vector_seed}});
  }
  return nlohmann::json{{"count", blocks.size()}, {"blocks", blocks}};
}

}  // namespace risp::blocklib
