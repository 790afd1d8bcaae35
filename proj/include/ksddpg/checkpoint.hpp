#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ksddpg/matrix.hpp"

namespace ksddpg {

/// Named matrices in a fixed order; what one agent's parameter file holds.
using NamedMatrices = std::vector<std::pair<std::string, Matrix>>;

inline constexpr const char* kCheckpointMagic = "KSDDPG-CKPT-1";

/// Binary dump: magic line, entry count, then per entry name + shape header + doubles.
void save_checkpoint(const std::string& path, const NamedMatrices& entries);

/// Loads a checkpoint; throws VersionError on magic mismatch, ParseError on truncation.
NamedMatrices load_checkpoint(const std::string& path);

/// Lookup helper; throws ConfigError when `name` is absent.
const Matrix& checkpoint_get(const NamedMatrices& entries, const std::string& name);

} // namespace ksddpg
