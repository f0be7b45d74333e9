#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "anr/representation.hpp"
#include "anrlab/config.hpp"
#include "anrlab/image_io.hpp"

namespace anrlab {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Outcome {
  std::filesystem::path bundle;
  nlohmann::json summary;
  std::vector<Check> checks;

  [[nodiscard]] bool passed() const;
};

/// Two identical MLP-INRs fit the same random 1D wave set, one on the fixed grid
/// and one on shifted coordinates; compares out-of-band energy on a dense grid.
Outcome run_fit1d(const ExperimentConfig& cfg);
/// ANR and an MLP-INR with the same representation parameter count fit one image.
Outcome run_fit_image(const ExperimentConfig& cfg);
/// Paired ANR fits with threshold m and with 0 over `seeds` seeds.
Outcome run_ablate_threshold(const ExperimentConfig& cfg);
/// Hypernetwork + shared ANR trained on a dataset; held-out PSNR against the mean image.
Outcome run_hypernet_demo(const ExperimentConfig& cfg);
Outcome run_gradcheck(const ExperimentConfig& cfg);
/// Same 1D fit at pe_sigma and pe_sigma_high; compares dense-grid total variation.
Outcome run_continuity(const ExperimentConfig& cfg);

Outcome run_experiment(const ExperimentConfig& cfg);

/// The image named by cfg.image, or a synthetic card of cfg.size pixels.
ImageBuffer experiment_image(const ExperimentConfig& cfg);

/// Builders shared with tests and benchmarks.
anr::repr::AnrConfig anr_config(const ExperimentConfig& cfg, std::size_t coord_dims, std::size_t output_dim);
/// MLP-INR whose first layer carries exactly `repr_count` modulated weights.
anr::repr::MlpInrConfig matched_mlp_config(const ExperimentConfig& cfg, std::size_t coord_dims, std::size_t output_dim,
                                      std::size_t repr_count);

}  // namespace anrlab
