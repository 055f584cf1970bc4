#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nkc {

struct PropertyResult {
  std::string name;
  bool pass;
  std::string detail;  // measured values
};

// Statistical and structural property suites behind `verify`.
std::vector<PropertyResult> verify_core(std::uint64_t seed);
std::vector<PropertyResult> verify_nested(std::uint64_t seed);
std::vector<PropertyResult> verify_rde(std::uint64_t seed);

}  // namespace nkc
