#include "drivedit/rfdit/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "drivedit/error.hpp"

namespace drivedit::rfdit {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'R', 'V', 'D', 'C', 'K', 'P', 'T'};

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw InputError("checkpoint: truncated file");
  return v;
}

std::string get_string(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  if (n > (1u << 24)) throw InputError("checkpoint: implausible string length");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw InputError("checkpoint: truncated file");
  return s;
}

}  // namespace

void save_checkpoint(const ToyModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(fmt::format("cannot write checkpoint {}", path.string()));
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, kCheckpointVersion);
  put_string(os, model.config().to_json().dump());
  put_u32(os, static_cast<std::uint32_t>(model.parameters().size()));
  for (const Parameter& p : model.parameters()) {
    put_string(os, p.name);
    put_u32(os, static_cast<std::uint32_t>(p.value.rows()));
    put_u32(os, static_cast<std::uint32_t>(p.value.cols()));
    os.write(reinterpret_cast<const char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * 8));
  }
  if (!os) throw Error(fmt::format("failed writing checkpoint {}", path.string()));
}

ToyModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError(fmt::format("checkpoint not found: {}", path.string()));
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw InputError(fmt::format("{}: not a checkpoint file", path.string()));
  }
  const std::uint32_t version = get_u32(is);
  if (version != kCheckpointVersion) throw InputError(fmt::format("checkpoint: unsupported version {}", version));
  ModelConfig config;
  try {
    config = ModelConfig::from_json(nlohmann::json::parse(get_string(is)));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("checkpoint: bad config: {}", e.what()));
  }
  ToyModel model(config, 0);
  const std::uint32_t count = get_u32(is);
  if (count != model.parameters().size()) throw InputError("checkpoint: tensor count does not match config");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(is);
    Parameter& p = model.parameters()[model.parameter_index(name)];
    const std::uint32_t rows = get_u32(is), cols = get_u32(is);
    if (rows != p.value.rows() || cols != p.value.cols()) {
      throw InputError(fmt::format("checkpoint: tensor '{}' has shape {}x{}, expected {}x{}", name, rows, cols,
                                   p.value.rows(), p.value.cols()));
    }
    if (!is.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * 8))) {
      throw InputError("checkpoint: truncated file");
    }
  }
  return model;
}

}  // namespace drivedit::rfdit
