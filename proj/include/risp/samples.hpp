// Bundled benchmark programs: assembly sources, assembled images, and their
// signature regions. Code starts at 0, data at 0x1000, signatures at 0x2000.
// The programs avoid x5/x6 (reserved as rewrite scratch) and byte/halfword
// memory access so they remain expressible over reduced subsets.
#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "risp/profile.hpp"

namespace risp::samples {

struct Sample {
  std::string name;
  std::string source;
  profile::ProgramImage image;
  std::pair<uint32_t, uint32_t> signature_region;
};

const std::vector<Sample>& all();
const Sample& get(std::string_view name);

}  // namespace risp::samples
