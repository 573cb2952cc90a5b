#include "risp/asmkit.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>

#include "risp/isa.hpp"

namespace risp::asmkit {

namespace {

struct Line {
  int no;
  uint32_t addr;
  std::string mnemonic;  // empty for .word
  std::vector<std::string> operands;
};

std::string strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string drop_comment(const std::string& s) {
  size_t pos = s.size();
  for (std::string_view marker : {"#", "//", ";"}) {
    size_t p = s.find(marker);
    if (p != std::string::npos) pos = std::min(pos, p);
  }
  return s.substr(0, pos);
}

bool label_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

bool is_label(const std::string& s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  if (s[0] == '-' || s[0] == '+') return false;
  return std::all_of(s.begin(), s.end(), label_char);
}

std::vector<std::string> split_operands(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(strip(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cur = strip(cur);
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::optional<unsigned> parse_reg(const std::string& tok) {
  static const std::map<std::string, unsigned> names = {
      {"zero", 0}, {"ra", 1},  {"sp", 2},  {"gp", 3},  {"tp", 4},  {"t0", 5},
      {"t1", 6},   {"t2", 7},  {"s0", 8},  {"fp", 8},  {"s1", 9},  {"a0", 10},
      {"a1", 11},  {"a2", 12}, {"a3", 13}, {"a4", 14}, {"a5", 15},
  };
  if (tok.size() >= 2 && tok[0] == 'x') {
    bool digits = std::all_of(tok.begin() + 1, tok.end(), [](char c) {
      return std::isdigit(static_cast<unsigned char>(c));
    });
    if (digits) {
      unsigned n = unsigned(std::stoul(tok.substr(1)));
      if (n < 16) return n;
      return std::nullopt;
    }
  }
  auto it = names.find(tok);
  if (it != names.end()) return it->second;
  return std::nullopt;
}

class Assembler {
 public:
  explicit Assembler(uint32_t origin) : loc_(origin) {
    out_.entry = origin;
  }

  void first_pass(const std::string& source) {
    std::istringstream in(source);
    std::string raw;
    int no = 0;
    while (std::getline(in, raw)) {
      ++no;
      std::string text = strip(drop_comment(raw));
      while (!text.empty()) {
        size_t colon = text.find(':');
        size_t space = text.find_first_of(" \t");
        if (colon != std::string::npos && (space == std::string::npos || colon < space)) {
          std::string label = strip(text.substr(0, colon));
          if (!is_label(label)) throw AsmError(no, "bad label: " + label);
          if (out_.labels.count(label)) throw AsmError(no, "duplicate label: " + label);
          out_.labels[label] = loc_;
          text = strip(text.substr(colon + 1));
          continue;
        }
        break;
      }
      if (text.empty()) continue;

      std::string head = text;
      std::string rest;
      size_t sp = text.find_first_of(" \t");
      if (sp != std::string::npos) {
        head = text.substr(0, sp);
        rest = strip(text.substr(sp + 1));
      }

      if (head == ".org") {
        const uint32_t target = uint32_t(parse_int(rest, no));
        if (target & 3) throw AsmError(no, ".org address must be word-aligned");
        loc_ = target;
        if (lines_.empty() && out_.words.empty()) out_.entry = target;
        continue;
      }
      if (head == ".word") {
        for (const auto& tok : split_operands(rest)) {
          lines_.push_back({no, loc_, "", {tok}});
          loc_ += 4;
        }
        continue;
      }
      lines_.push_back({no, loc_, head, split_operands(rest)});
      loc_ += 4;
    }
  }

  Assembly second_pass() {
    for (const auto& ln : lines_) {
      if (ln.mnemonic.empty()) {
        out_.words.emplace_back(ln.addr, uint32_t(resolve(ln.operands[0], ln.no)));
        continue;
      }
      out_.words.emplace_back(ln.addr, encode_line(ln));
    }
    std::sort(out_.words.begin(), out_.words.end());
    for (size_t i = 1; i < out_.words.size(); ++i) {
      if (out_.words[i].first == out_.words[i - 1].first) {
        throw AsmError(0, "overlapping words at address " +
                              std::to_string(out_.words[i].first));
      }
    }
    return std::move(out_);
  }

 private:
  int64_t parse_int(const std::string& tok, int no) const {
    if (tok.empty()) throw AsmError(no, "expected a number");
    try {
      size_t used = 0;
      const int64_t v = std::stoll(tok, &used, 0);
      if (used != tok.size()) throw AsmError(no, "bad number: " + tok);
      return v;
    } catch (const AsmError&) {
      throw;
    } catch (const std::exception&) {
      throw AsmError(no, "bad number: " + tok);
    }
  }

  int64_t resolve(const std::string& tok, int no) const {
    if (is_label(tok) && !parse_reg(tok)) {
      auto it = out_.labels.find(tok);
      if (it == out_.labels.end()) throw AsmError(no, "unknown label: " + tok);
      return it->second;
    }
    return parse_int(tok, no);
  }

  int32_t target_offset(const std::string& tok, uint32_t addr, int no) const {
    if (is_label(tok) && !parse_reg(tok)) {
      auto it = out_.labels.find(tok);
      if (it == out_.labels.end()) throw AsmError(no, "unknown label: " + tok);
      return int32_t(it->second - addr);
    }
    return int32_t(parse_int(tok, no));
  }

  unsigned reg_or_throw(const std::string& tok, int no) const {
    auto r = parse_reg(tok);
    if (!r) throw AsmError(no, "bad register: " + tok);
    return *r;
  }

  // "imm(rs)" memory operand.
  std::pair<int32_t, unsigned> mem_operand(const std::string& tok, int no) const {
    size_t open = tok.find('(');
    size_t close = tok.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
      throw AsmError(no, "expected offset(reg): " + tok);
    }
    std::string off = strip(tok.substr(0, open));
    if (off.empty()) off = "0";
    const std::string reg = strip(tok.substr(open + 1, close - open - 1));
    return {int32_t(parse_int(off, no)), reg_or_throw(reg, no)};
  }

  uint32_t encode_line(const Line& ln) const {
    const isa::InstructionSpec* spec = isa::find_spec(ln.mnemonic);
    if (!spec) throw AsmError(ln.no, "unknown mnemonic: " + ln.mnemonic);
    const auto& ops = ln.operands;
    auto need = [&](size_t n) {
      if (ops.size() != n) {
        throw AsmError(ln.no, ln.mnemonic + " expects " + std::to_string(n) +
                                  " operands, got " + std::to_string(ops.size()));
      }
    };
    try {
      switch (spec->format) {
        case isa::Format::R: {
          need(3);
          return isa::encode(isa::make(spec->semantic_id, reg_or_throw(ops[0], ln.no),
                                       reg_or_throw(ops[1], ln.no),
                                       reg_or_throw(ops[2], ln.no)));
        }
        case isa::Format::I: {
          const bool mem_form =
              spec->opcode == 0x03 ||
              (spec->semantic_id == isa::Op::jalr && ops.size() == 2 &&
               ops[1].find('(') != std::string::npos);
          if (mem_form) {
            need(2);
            auto [imm, rs1] = mem_operand(ops[1], ln.no);
            return isa::encode(
                isa::make(spec->semantic_id, reg_or_throw(ops[0], ln.no), rs1, 0, imm));
          }
          need(3);
          return isa::encode(isa::make(spec->semantic_id, reg_or_throw(ops[0], ln.no),
                                       reg_or_throw(ops[1], ln.no), 0,
                                       int32_t(parse_int(ops[2], ln.no))));
        }
        case isa::Format::S: {
          need(2);
          auto [imm, rs1] = mem_operand(ops[1], ln.no);
          return isa::encode(
              isa::make(spec->semantic_id, 0, rs1, reg_or_throw(ops[0], ln.no), imm));
        }
        case isa::Format::B: {
          need(3);
          return isa::encode(isa::make(spec->semantic_id, 0, reg_or_throw(ops[0], ln.no),
                                       reg_or_throw(ops[1], ln.no),
                                       target_offset(ops[2], ln.addr, ln.no)));
        }
        case isa::Format::U: {
          need(2);
          const int64_t v = parse_int(ops[1], ln.no);
          if (v < 0 || v > 0xFFFFF) {
            throw AsmError(ln.no, "upper immediate outside 0..0xFFFFF");
          }
          return isa::encode(isa::make(spec->semantic_id, reg_or_throw(ops[0], ln.no), 0,
                                       0, int32_t(uint32_t(v) << 12)));
        }
        case isa::Format::J: {
          need(2);
          return isa::encode(isa::make(spec->semantic_id, reg_or_throw(ops[0], ln.no), 0,
                                       0, target_offset(ops[1], ln.addr, ln.no)));
        }
      }
    } catch (const isa::IsaError& e) {
      throw AsmError(ln.no, e.what());
    }
    throw AsmError(ln.no, "unreachable");
  }

  uint32_t loc_;
  std::vector<Line> lines_;
  Assembly out_;
};

}  // namespace

Assembly assemble(const std::string& source, uint32_t origin) {
  Assembler a(origin);
  a.first_pass(source);
  return a.second_pass();
}

profile::ProgramImage to_image(const Assembly& a, const std::string& name) {
  profile::ProgramImage img;
  img.name = name;
  img.words = a.words;
  img.entry = a.entry;
  img.source_format = profile::SourceFormat::flat_binary;
  return img;
}

}  // namespace risp::asmkit
