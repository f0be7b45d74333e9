#pragma once

#include <cstdint>
#include <vector>

#include "anr/spectral.hpp"

namespace anrlab {

struct SuiteEntry {
  anr::spectral::GradcheckReport report;
  double tolerance = 0.0;
};

inline constexpr double kGradcheckTolerance = 1e-5;
inline constexpr double kPipelineTolerance = 1e-4;

/// Finite-difference checks of every primitive op, the LAL, multi-head attention,
/// the ANR loss, one encoder and one decoder block, and the end-to-end
/// hypernetwork + ANR pipeline, all at tiny sizes.
std::vector<SuiteEntry> run_gradcheck_suite(std::uint64_t seed);

}  // namespace anrlab
