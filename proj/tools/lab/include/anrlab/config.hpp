#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace anrlab {

inline constexpr const char* kBundleFormat = "anrlab-bundle/1";

/// Everything that determines a run. Serialized verbatim into each result bundle.
struct ExperimentConfig {
  std::string experiment = "fit1d";
  std::uint64_t seed = 0;
  std::size_t steps = 400;
  std::string out;  // output root; not part of the run identity

  double lr = 1e-3;
  std::string sampler = "fixed";  // fixed | variational
  std::string clamp_target = "alpha-v";
  double shift_scale = 0.0;  // alpha; <= 0 selects the grid-derived default
  double m = 0.0015;
  std::string scope = "all";  // all | representation

  std::size_t pe_features = 64;
  double pe_sigma = 20.0;
  double pe_sigma_high = 40.0;  // continuity only
  std::size_t tokens = 64;      // N
  std::size_t token_dim = 32;   // d
  std::size_t depth = 5;
  std::size_t width = 256;

  // 1D line experiments
  std::size_t points = 100;
  std::size_t frequencies = 10;
  std::size_t max_bin = 16;
  std::size_t upsample = 4;

  // image experiments
  std::string image;  // PGM/PPM path; empty uses a synthetic card
  std::size_t size = 32;
  std::string model = "both";  // anr | mlp | both
  std::size_t sr = 1;
  std::size_t seeds = 5;

  // hypernetwork
  std::string data_dir;
  std::size_t synthetic = 64;
  std::size_t held_out = 16;
  std::size_t batch = 8;
  std::string arch = "encoder-decoder";
  std::size_t enc_depth = 2;
  std::size_t dec_depth = 2;
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  std::size_t ff_dim = 128;
  std::size_t patch = 4;

  /// Built-in settings for a named experiment.
  static ExperimentConfig defaults_for(const std::string& experiment);

  /// Checks value ranges and enumerations; throws std::invalid_argument.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Applies `patch` on top of `base`. Unknown keys and type mismatches throw std::invalid_argument.
ExperimentConfig merge(const ExperimentConfig& base, const nlohmann::json& patch);
ExperimentConfig load_config_file(const ExperimentConfig& base, const std::filesystem::path& path);

/// 64-bit FNV-1a of the canonical JSON (without `out`), as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// The configured `out` (flag or file), else $ANRLAB_OUT, else "results".
std::filesystem::path output_root(const ExperimentConfig& cfg);

}  // namespace anrlab
