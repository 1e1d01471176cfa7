#pragma once

#include <filesystem>
#include <iosfwd>

#include "simsec/mhacl.hpp"

namespace simsec::mhacl {

/// Versioned line-oriented text format. Floating-point values are written in
/// hexadecimal so that save → load reproduces the state exactly.
void save_checkpoint(std::ostream& out, const ContinualState& state);
[[nodiscard]] ContinualState load_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ContinualState& state);
[[nodiscard]] ContinualState load_checkpoint(const std::filesystem::path& path);

inline constexpr int kCheckpointVersion = 1;

}  // namespace simsec::mhacl
