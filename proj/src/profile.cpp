#include "risp/profile.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "risp/isa.hpp"

namespace risp::profile {

namespace {

[[noreturn]] void fail(ProfileError::Code code, const std::string& msg) {
  throw ProfileError(code, msg);
}

uint16_t rd16(const std::vector<uint8_t>& b, size_t off) {
  return uint16_t(b[off]) | uint16_t(b[off + 1]) << 8;
}

uint32_t rd32(const std::vector<uint8_t>& b, size_t off) {
  return uint32_t(b[off]) | uint32_t(b[off + 1]) << 8 | uint32_t(b[off + 2]) << 16 |
         uint32_t(b[off + 3]) << 24;
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ProfileError::Code::UnsupportedFormat, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

std::string basename_of(const std::string& path) {
  auto pos = path.find_last_of("/\\");
  return pos == std::string::npos ? path : path.substr(pos + 1);
}

bool looks_like_elf(const std::vector<uint8_t>& b) {
  return b.size() >= 4 && b[0] == 0x7F && b[1] == 'E' && b[2] == 'L' && b[3] == 'F';
}

void append_words(ProgramImage& img, uint32_t base, const uint8_t* data, size_t size) {
  for (size_t off = 0; off < size; off += 4) {
    uint32_t w = 0;
    for (size_t k = 0; k < 4 && off + k < size; ++k) w |= uint32_t(data[off + k]) << (8 * k);
    img.words.emplace_back(base + uint32_t(off), w);
  }
}

}  // namespace

bool InstructionSubset::contains(std::string_view m) const {
  return std::binary_search(mnemonics.begin(), mnemonics.end(), m);
}

InstructionSubset make_subset(std::vector<std::string> mnemonics, std::string label) {
  for (const auto& m : mnemonics) {
    if (!isa::find_spec(m)) {
      fail(ProfileError::Code::UnknownMnemonic, "unknown mnemonic: " + m);
    }
  }
  std::sort(mnemonics.begin(), mnemonics.end());
  mnemonics.erase(std::unique(mnemonics.begin(), mnemonics.end()), mnemonics.end());
  InstructionSubset s;
  s.mnemonics = std::move(mnemonics);
  s.label = std::move(label);
  return s;
}

InstructionSubset subset_from_json(const nlohmann::json& j, std::string label) {
  const nlohmann::json* arr = nullptr;
  if (j.is_array()) {
    arr = &j;
  } else if (j.is_object()) {
    if (j.contains("distinct")) arr = &j.at("distinct");
    else if (j.contains("mnemonics")) arr = &j.at("mnemonics");
    if (label.empty() && j.contains("label") && j.at("label").is_string()) {
      label = j.at("label").get<std::string>();
    }
    if (label.empty() && j.contains("name") && j.at("name").is_string()) {
      label = j.at("name").get<std::string>();
    }
  }
  if (!arr || !arr->is_array()) {
    fail(ProfileError::Code::UnknownMnemonic,
         "subset JSON must be an array or carry a distinct/mnemonics array");
  }
  std::vector<std::string> names;
  for (const auto& e : *arr) {
    if (!e.is_string()) {
      fail(ProfileError::Code::UnknownMnemonic, "subset entries must be strings");
    }
    names.push_back(e.get<std::string>());
  }
  return make_subset(std::move(names), std::move(label));
}

nlohmann::json subset_to_json(const InstructionSubset& s) {
  return nlohmann::json{{"label", s.label}, {"mnemonics", s.mnemonics}};
}

ProgramImage image_from_elf(const std::string& name, const std::vector<uint8_t>& bytes) {
  if (!looks_like_elf(bytes) || bytes.size() < 52) {
    fail(ProfileError::Code::UnsupportedFormat, name + ": not an ELF file");
  }
  if (bytes[4] != 1) fail(ProfileError::Code::UnsupportedFormat, name + ": not ELF32");
  if (bytes[5] != 1) {
    fail(ProfileError::Code::UnsupportedFormat, name + ": not little-endian");
  }
  if (rd16(bytes, 18) != 243) {
    fail(ProfileError::Code::UnsupportedFormat, name + ": machine is not RISC-V");
  }

  ProgramImage img;
  img.name = name;
  img.source_format = SourceFormat::elf32;
  img.entry = rd32(bytes, 24);

  const uint32_t shoff = rd32(bytes, 32);
  const uint16_t shentsize = rd16(bytes, 46);
  const uint16_t shnum = rd16(bytes, 48);
  if (shoff == 0 || shentsize < 40 || size_t(shoff) + size_t(shnum) * shentsize > bytes.size()) {
    fail(ProfileError::Code::UnsupportedFormat, name + ": bad section header table");
  }

  struct Section {
    uint32_t addr, offset, size;
  };
  std::vector<Section> code;
  for (uint16_t i = 0; i < shnum; ++i) {
    const size_t sh = shoff + size_t(i) * shentsize;
    const uint32_t type = rd32(bytes, sh + 4);
    const uint32_t flags = rd32(bytes, sh + 8);
    if (type != 1 || !(flags & 0x4)) continue;  // PROGBITS with EXECINSTR
    Section s{rd32(bytes, sh + 12), rd32(bytes, sh + 16), rd32(bytes, sh + 20)};
    if (size_t(s.offset) + s.size > bytes.size()) {
      fail(ProfileError::Code::UnsupportedFormat, name + ": section exceeds file");
    }
    if (s.size) code.push_back(s);
  }
  std::sort(code.begin(), code.end(), [](const Section& a, const Section& b) {
    return a.addr < b.addr;
  });
  for (const auto& s : code) append_words(img, s.addr, bytes.data() + s.offset, s.size);
  if (img.words.empty()) fail(ProfileError::Code::EmptyImage, name + ": no executable words");
  return img;
}

ProgramImage image_from_flat(const std::string& name, const std::vector<uint8_t>& bytes,
                             uint32_t base) {
  if (bytes.empty()) fail(ProfileError::Code::EmptyImage, name + ": empty file");
  ProgramImage img;
  img.name = name;
  img.source_format = SourceFormat::flat_binary;
  img.entry = base;
  append_words(img, base, bytes.data(), bytes.size());
  return img;
}

ProgramImage image_from_listing(const std::string& name, const std::string& text) {
  static const std::regex line_re(R"(^\s*([0-9a-fA-F]+):\s+([0-9a-fA-F]{8})\b.*$)");
  static const std::regex addr_prefix_re(R"(^\s*[0-9a-fA-F]+:)");

  ProgramImage img;
  img.name = name;
  img.source_format = SourceFormat::disasm_listing;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (std::regex_match(line, m, line_re)) {
      const uint32_t addr = uint32_t(std::stoul(m[1].str(), nullptr, 16));
      const uint32_t word = uint32_t(std::stoul(m[2].str(), nullptr, 16));
      img.words.emplace_back(addr, word);
    } else if (std::regex_search(line, addr_prefix_re)) {
      fail(ProfileError::Code::MalformedListing, name + ": malformed listing line: " + line);
    }
  }
  if (img.words.empty()) fail(ProfileError::Code::EmptyImage, name + ": no listing words");
  std::sort(img.words.begin(), img.words.end());
  for (size_t i = 1; i < img.words.size(); ++i) {
    if (img.words[i].first == img.words[i - 1].first) {
      fail(ProfileError::Code::MalformedListing,
           name + ": duplicate address in listing");
    }
  }
  img.entry = img.words.front().first;
  return img;
}

ProgramImage load_image(const std::string& path, std::optional<SourceFormat> format,
                        uint32_t base) {
  const std::string name = basename_of(path);
  if (format == SourceFormat::disasm_listing) {
    std::ifstream in(path);
    if (!in) fail(ProfileError::Code::UnsupportedFormat, "cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return image_from_listing(name, os.str());
  }

  const std::vector<uint8_t> bytes = read_file(path);
  if (format == SourceFormat::elf32) return image_from_elf(name, bytes);
  if (format == SourceFormat::flat_binary) return image_from_flat(name, bytes, base);

  if (looks_like_elf(bytes)) return image_from_elf(name, bytes);
  const bool textual = !bytes.empty() &&
                       std::all_of(bytes.begin(), bytes.end(), [](uint8_t c) {
                         return c == '\n' || c == '\r' || c == '\t' ||
                                (c >= 0x20 && c < 0x7F);
                       });
  if (textual) {
    std::string text(bytes.begin(), bytes.end());
    if (text.find(':') != std::string::npos) {
      return image_from_listing(name, text);
    }
  }
  return image_from_flat(name, bytes, base);
}

InstructionProfile profile(const ProgramImage& image) {
  if (image.words.empty()) {
    fail(ProfileError::Code::EmptyImage, image.name + ": empty image");
  }
  InstructionProfile p;
  p.name = image.name;
  for (const auto& [addr, word] : image.words) {
    (void)addr;
    try {
      auto d = isa::decode(word);
      ++p.static_counts[std::string(d.spec->mnemonic)];
      ++p.total_static;
    } catch (const isa::IsaError&) {
      ++p.data_words;
    }
  }
  if (p.total_static == 0) {
    fail(ProfileError::Code::AllWordsUndecodable,
         image.name + ": no word decodes; image is probably not code");
  }
  std::vector<std::string> names;
  names.reserve(p.static_counts.size());
  for (const auto& [m, c] : p.static_counts) names.push_back(m);
  p.distinct = make_subset(std::move(names), image.name);
  p.coverage_fraction = double(p.distinct.size()) / double(isa::registry_size);
  return p;
}

InstructionProfile merge_profiles(const std::vector<InstructionProfile>& profiles) {
  if (profiles.empty()) {
    fail(ProfileError::Code::EmptyProfileList, "merge of zero profiles");
  }
  InstructionProfile out;
  std::string label;
  for (const auto& p : profiles) {
    if (!label.empty()) label += "+";
    label += p.name;
    for (const auto& [m, c] : p.static_counts) out.static_counts[m] += c;
    out.data_words += p.data_words;
    out.total_static += p.total_static;
  }
  out.name = label;
  std::vector<std::string> names;
  for (const auto& [m, c] : out.static_counts) names.push_back(m);
  out.distinct = make_subset(std::move(names), label);
  out.coverage_fraction = double(out.distinct.size()) / double(isa::registry_size);
  return out;
}

nlohmann::json profile_to_json(const InstructionProfile& p) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [m, c] : p.static_counts) counts[m] = c;
  return nlohmann::json{
      {"name", p.name},
      {"total_static", p.total_static},
      {"data_words", p.data_words},
      {"distinct", p.distinct.mnemonics},
      {"counts", counts},
      {"coverage_fraction", p.coverage_fraction},
      {"registry_size", isa::registry_size},
  };
}

std::string profile_to_table(const InstructionProfile& p) {
  std::ostringstream os;
  os << "program: " << p.name << "\n";
  os << "total static instructions: " << p.total_static << "\n";
  os << "data words: " << p.data_words << "\n";
  os << "distinct: " << p.distinct.size() << " of " << isa::registry_size << " ("
     << std::fixed;
  os.precision(1);
  os << 100.0 * p.coverage_fraction << "%)\n";
  os << "----------------------\n";
  for (const auto& [m, c] : p.static_counts) {
    os << "  ";
    os << m;
    for (size_t i = m.size(); i < 8; ++i) os << ' ';
    os << c << "\n";
  }
  return os.str();
}

}  // namespace risp::profile
