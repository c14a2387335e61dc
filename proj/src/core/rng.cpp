#include "capforge/core/rng.hpp"

#include <string>

#include "capforge/core/digest.hpp"

namespace capforge {

std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  const auto hex = sha256_hex(std::to_string(base) + ":" + std::string(label));
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

}  // namespace capforge
