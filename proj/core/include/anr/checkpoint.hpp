#pragma once

#include <filesystem>
#include <stdexcept>

#include "anr/nn.hpp"

namespace anr {

inline constexpr const char* kCheckpointFormat = "anr-checkpoint/1";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `<stem>.json` (index: name, shape, offset, count) and `<stem>.bin`
/// (concatenated little-endian IEEE-754 doubles in index order).
void save_checkpoint(const std::filesystem::path& stem, const ParamList& params);

/// Restores every listed parameter by name. Shapes must match the index exactly;
/// entries in the file that are not requested are ignored.
void load_checkpoint(const std::filesystem::path& stem, const ParamList& params);

}  // namespace anr
