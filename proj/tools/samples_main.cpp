// Dumps the bundled benchmark programs as flat binaries, assembly sources,
// and a JSON manifest so external tools can replay them.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "risp/samples.hpp"
#include "risp/sim.hpp"

namespace {

std::vector<uint8_t> flatten(const risp::profile::ProgramImage& image) {
  uint32_t end = 0;
  for (const auto& [addr, word] : image.words) end = std::max(end, addr + 4);
  std::vector<uint8_t> bytes(end, 0);
  for (const auto& [addr, word] : image.words) {
    for (int i = 0; i < 4; ++i) bytes[addr + i] = uint8_t(word >> (8 * i));
  }
  return bytes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bundled benchmark program dumper"};
  std::string out_dir;
  bool list_only = false;
  app.add_option("--out", out_dir, "directory to write .bin/.s files plus samples.json");
  app.add_flag("--list", list_only, "print one line per sample");
  CLI11_PARSE(app, argc, argv);

  const auto& samples = risp::samples::all();
  if (list_only || out_dir.empty()) {
    for (const auto& s : samples) {
      std::cout << s.name << "  words=" << s.image.words.size() << "  signature=0x" << std::hex
                << s.signature_region.first << ":0x" << s.signature_region.second << std::dec
                << "\n";
    }
    return 0;
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "cannot create " << out_dir << ": " << ec.message() << "\n";
    return 1;
  }

  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& s : samples) {
    const auto bin_path = std::filesystem::path(out_dir) / (s.name + ".bin");
    const auto asm_path = std::filesystem::path(out_dir) / (s.name + ".s");
    {
      std::ofstream bin(bin_path, std::ios::binary);
      const auto bytes = flatten(s.image);
      bin.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    }
    {
      std::ofstream src(asm_path);
      src << s.source;
    }
    risp::sim::SimConfig cfg;
    cfg.signature_region = s.signature_region;
    const auto res = risp::sim::run(s.image, cfg);
    manifest.push_back({
        {"name", s.name},
        {"bin", s.name + ".bin"},
        {"source", s.name + ".s"},
        {"entry", s.image.entry},
        {"signature_lo", s.signature_region.first},
        {"signature_hi", s.signature_region.second},
        {"signature", res.signature ? risp::sim::signature(res) : ""},
        {"cycles", res.cycles},
    });
  }
  std::ofstream(std::filesystem::path(out_dir) / "samples.json") << manifest.dump(2) << "\n";
  std::cout << "wrote " << samples.size() << " samples to " << out_dir << "\n";
  return 0;
}
