#include "risp/sim.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace risp::sim {

namespace {

[[noreturn]] void fail(SimError::Code code, const std::string& msg) {
  throw SimError(code, msg);
}

std::string hex32(uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

bool is_load(isa::Op op) {
  return op == isa::Op::lb || op == isa::Op::lh || op == isa::Op::lw ||
         op == isa::Op::lbu || op == isa::Op::lhu;
}

bool is_store(isa::Op op) {
  return op == isa::Op::sb || op == isa::Op::sh || op == isa::Op::sw;
}

bool writes_rd(isa::Format f) {
  return f == isa::Format::R || f == isa::Format::I || f == isa::Format::U ||
         f == isa::Format::J;
}

}  // namespace

std::string_view run_status_name(RunStatus s) {
  switch (s) {
    case RunStatus::halted: return "halted";
    case RunStatus::trapped: return "trapped";
    case RunStatus::max_cycles_exceeded: return "max_cycles_exceeded";
    case RunStatus::subset_violation: return "subset_violation";
  }
  return "?";
}

Simulator::Simulator(const profile::ProgramImage& image, SimConfig cfg)
    : cfg_(std::move(cfg)) {
  if (cfg_.max_cycles < 1) fail(SimError::Code::BadConfig, "max_cycles must be >= 1");
  if (cfg_.signature_region) {
    auto [lo, hi] = *cfg_.signature_region;
    if ((lo & 3) || (hi & 3) || hi < lo) {
      fail(SimError::Code::BadConfig, "signature region must be 4-aligned and ordered");
    }
  }
  if (image.words.empty()) fail(SimError::Code::BadConfig, "empty program image");

  bool entry_present = false;
  for (const auto& [addr, word] : image.words) {
    st_.mem.store32(addr, word);
    if (addr == image.entry) entry_present = true;
  }
  if (!entry_present) {
    fail(SimError::Code::BadConfig,
         "entry 0x" + hex32(image.entry) + " is not inside the image");
  }
  st_.pc = image.entry;
  res_.signature_region = cfg_.signature_region;
}

void Simulator::end_run(RunStatus status) {
  res_.status = status;
  if (status == RunStatus::halted && cfg_.signature_region) {
    std::vector<uint32_t> words;
    for (uint32_t a = cfg_.signature_region->first; a < cfg_.signature_region->second;
         a += 4) {
      words.push_back(st_.mem.load32(a));
    }
    res_.signature = std::move(words);
  }
  ended_ = true;
}

bool Simulator::advance() {
  if (ended_) return false;
  if (res_.cycles >= cfg_.max_cycles) {
    end_run(RunStatus::max_cycles_exceeded);
    return false;
  }

  const uint32_t pc = st_.pc;
  const uint32_t word = st_.mem.load32(pc);
  std::ostringstream line;

  isa::DecodedInstruction insn;
  try {
    insn = isa::decode(word);
  } catch (const isa::IsaError& e) {
    res_.trap = e.code == isa::IsaError::Code::RegisterOutOfRange
                    ? isa::Trap::register_out_of_range
                    : isa::Trap::illegal_instruction;
    st_.status = isa::Status::trapped;
    st_.trap = res_.trap;
    res_.cycles = res_.retired + 1;
    if (cfg_.trace) {
      res_.trace += std::to_string(res_.cycles - 1) + "\t" + hex32(pc) + "\t" +
                    hex32(word) + "\t?\ttrap:" + std::string(isa::trap_name(res_.trap)) +
                    "\n";
    }
    end_run(RunStatus::trapped);
    return false;
  }

  const std::string mnemonic(insn.spec->mnemonic);
  if (cfg_.subset && !cfg_.subset->contains(mnemonic)) {
    res_.violation_mnemonic = mnemonic;
    res_.violation_pc = pc;
    end_run(RunStatus::subset_violation);
    return false;
  }

  if (is_load(insn.op())) {
    const uint32_t ea = st_.reg(insn.rs1) + uint32_t(insn.imm);
    if (!st_.mem.page_mapped(ea)) ++res_.unmapped_reads;
  }

  std::string writeback = "-";
  const bool halting = word == halt_word;
  if (halting) {
    st_.status = isa::Status::halted;
  } else {
    isa::step(insn, st_);
    if (st_.status == isa::Status::trapped) {
      res_.trap = st_.trap;
      res_.cycles = res_.retired + 1;
      if (cfg_.trace) {
        res_.trace += std::to_string(res_.cycles - 1) + "\t" + hex32(pc) + "\t" +
                      hex32(word) + "\t" + mnemonic +
                      "\ttrap:" + std::string(isa::trap_name(res_.trap)) + "\n";
      }
      end_run(RunStatus::trapped);
      return false;
    }
    if (cfg_.trace) {
      if (writes_rd(insn.spec->format) && insn.rd != 0) {
        writeback = "x" + std::to_string(insn.rd) + "=" + hex32(st_.regs[insn.rd]);
      } else if (is_store(insn.op())) {
        const uint32_t ea = st_.reg(insn.rs1) + uint32_t(insn.imm);
        uint32_t v = st_.reg(insn.rs2);
        if (insn.op() == isa::Op::sb) v &= 0xFF;
        if (insn.op() == isa::Op::sh) v &= 0xFFFF;
        writeback = "mem[" + hex32(ea) + "]=" + hex32(v);
      }
    }
  }

  ++res_.retired;
  res_.cycles = res_.retired;
  ++res_.dynamic_counts[mnemonic];
  if (cfg_.trace) {
    res_.trace += std::to_string(res_.cycles - 1) + "\t" + hex32(pc) + "\t" + hex32(word) +
                  "\t" + mnemonic + "\t" + writeback + "\n";
  }
  if (halting) {
    end_run(RunStatus::halted);
    return false;
  }
  return true;
}

RunResult Simulator::take_result() {
  res_.final_state = st_;
  return std::move(res_);
}

RunResult run(const profile::ProgramImage& image, const SimConfig& cfg) {
  Simulator s(image, cfg);
  while (s.advance()) {
  }
  return s.take_result();
}

std::string format_signature(const std::vector<uint32_t>& words) {
  std::string out;
  out.reserve(words.size() * 9);
  for (uint32_t w : words) {
    out += hex32(w);
    out += '\n';
  }
  return out;
}

std::string signature(const RunResult& result) {
  if (!result.signature_region) {
    fail(SimError::Code::NoRegionConfigured, "run had no signature region configured");
  }
  if (result.status != RunStatus::halted || !result.signature) {
    fail(SimError::Code::NotHalted,
         "signature requires a halted run, got " +
             std::string(run_status_name(result.status)));
  }
  return format_signature(*result.signature);
}

nlohmann::json run_result_to_json(const RunResult& r) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [m, c] : r.dynamic_counts) counts[m] = c;
  nlohmann::json j{
      {"status", std::string(run_status_name(r.status))},
      {"cycles", r.cycles},
      {"retired", r.retired},
      {"dynamic_counts", counts},
      {"unmapped_reads", r.unmapped_reads},
  };
  if (r.status == RunStatus::trapped) j["trap"] = std::string(isa::trap_name(r.trap));
  if (r.status == RunStatus::subset_violation) {
    j["violation"] = {{"mnemonic", r.violation_mnemonic},
                      {"pc", r.violation_pc}};
  }
  if (r.signature) j["signature"] = format_signature(*r.signature);
  return j;
}

}  // namespace risp::sim
