// Static instruction profiling of RV32E program images.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace risp::profile {

enum class SourceFormat { elf32, flat_binary, disasm_listing };

struct ProfileError : std::runtime_error {
  enum class Code {
    UnsupportedFormat,
    EmptyImage,
    MalformedListing,
    AllWordsUndecodable,
    EmptyProfileList,
    UnknownMnemonic,
  };
  Code code;
  ProfileError(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

struct ProgramImage {
  std::string name;
  std::vector<std::pair<uint32_t, uint32_t>> words;  // (address, word), ascending
  SourceFormat source_format = SourceFormat::flat_binary;
  uint32_t entry = 0;
};

struct InstructionSubset {
  std::vector<std::string> mnemonics;  // sorted, deduplicated, registry-validated
  std::string label;

  bool contains(std::string_view m) const;
  std::size_t size() const { return mnemonics.size(); }
};

// Validates against the isa registry and normalizes order.
InstructionSubset make_subset(std::vector<std::string> mnemonics, std::string label = {});

// Accepts {"distinct":[...]}, {"mnemonics":[...]}, or a bare array.
InstructionSubset subset_from_json(const nlohmann::json& j, std::string label = {});
nlohmann::json subset_to_json(const InstructionSubset& s);

struct InstructionProfile {
  std::string name;
  std::map<std::string, uint64_t> static_counts;  // mnemonic -> occurrences
  uint64_t data_words = 0;                        // undecodable words (inline data)
  uint64_t total_static = 0;                      // sum of static_counts
  InstructionSubset distinct;
  double coverage_fraction = 0.0;                 // |distinct| / 37
};

// Parses an image file. With no format the loader sniffs: ELF magic, then
// text that matches the listing grammar, otherwise flat binary at `base`.
ProgramImage load_image(const std::string& path, std::optional<SourceFormat> format = {},
                        uint32_t base = 0);

// In-memory variants used by the loader and by tests.
ProgramImage image_from_elf(const std::string& name, const std::vector<uint8_t>& bytes);
ProgramImage image_from_flat(const std::string& name, const std::vector<uint8_t>& bytes,
                             uint32_t base);
ProgramImage image_from_listing(const std::string& name, const std::string& text);

InstructionProfile profile(const ProgramImage& image);
InstructionProfile merge_profiles(const std::vector<InstructionProfile>& profiles);

nlohmann::json profile_to_json(const InstructionProfile& p);
std::string profile_to_table(const InstructionProfile& p);

}  // namespace risp::profile
