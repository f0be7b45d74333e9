#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "anr/spectral.hpp"
#include "anr/training.hpp"
#include "anrlab/config.hpp"
#include "anrlab/image_io.hpp"

namespace anrlab {

/// Shortest round-trip decimal form of a double ("%.17g"); inf and nan spelled out.
std::string format_double(double v);

/// Result directory <root>/<experiment>-<seed>/ holding config.json, metrics.csv,
/// optional spectrum.csv and images, and summary.json.
class Bundle {
 public:
  explicit Bundle(const ExperimentConfig& cfg);

  [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }
  [[nodiscard]] const std::string& hash() const { return hash_; }

  /// Appends one row per optimization step: run, step, loss, psnr.
  void add_losses(const std::string& run, std::span<const double> losses);
  /// Appends bin, energy rows for `run` to spectrum.csv.
  void add_spectrum(const std::string& run, const anr::spectral::SpectrumReport& report);
  void write_image(const std::string& name, const ImageBuffer& image) const;
  void write_text(const std::string& name, const std::string& content) const;
  /// Writes metrics.csv, spectrum.csv (when used) and summary.json with the format tag.
  void finish(nlohmann::json summary) const;

 private:
  ExperimentConfig config_;
  std::filesystem::path dir_;
  std::string hash_;
  std::string metrics_ = "run,step,loss,psnr\n";
  std::string spectrum_;
};

nlohmann::json report_json(const anr::train::FitReport& r);
nlohmann::json report_json(const anr::spectral::SpectrumReport& r);

}  // namespace anrlab
