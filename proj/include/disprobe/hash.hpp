#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace disprobe {

std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_hex(const std::vector<uint8_t>& bytes);

}  // namespace disprobe
