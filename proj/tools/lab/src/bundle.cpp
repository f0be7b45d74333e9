#include "anrlab/bundle.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace anrlab {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Bundle::Bundle(const ExperimentConfig& cfg) : config_(cfg), hash_(config_hash(cfg)) {
  dir_ = output_root(cfg) / (cfg.experiment + "-" + std::to_string(cfg.seed));
  std::filesystem::create_directories(dir_);
  json c = to_json(cfg);
  c["format_version"] = kBundleFormat;
  c["config_hash"] = hash_;
  write_text("config.json", c.dump(2) + "\n");
}

void Bundle::add_losses(const std::string& run, std::span<const double> losses) {
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double p = losses[i] >= 0.0 ? anr::train::psnr(losses[i]) : std::nan("");
    metrics_ += run + "," + std::to_string(i) + "," + format_double(losses[i]) + "," + format_double(p) + "\n";
  }
}

void Bundle::add_spectrum(const std::string& run, const anr::spectral::SpectrumReport& report) {
  if (spectrum_.empty()) spectrum_ = "run,bin,energy\n";
  for (std::size_t k = 0; k < report.energy.size(); ++k)
    spectrum_ += run + "," + std::to_string(k) + "," + format_double(report.energy[k]) + "\n";
}

void Bundle::write_image(const std::string& name, const ImageBuffer& image) const { save_image(dir_ / name, image); }

void Bundle::write_text(const std::string& name, const std::string& content) const {
  std::ofstream out(dir_ / name, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
  out << content;
}

void Bundle::finish(json summary) const {
  write_text("metrics.csv", metrics_);
  if (!spectrum_.empty()) write_text("spectrum.csv", spectrum_);
  summary["format_version"] = kBundleFormat;
  summary["experiment"] = config_.experiment;
  summary["seed"] = config_.seed;
  summary["config_hash"] = hash_;
  write_text("summary.json", summary.dump(2) + "\n");
}

namespace {

json finite_or_text(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

}  // namespace

json report_json(const anr::train::FitReport& r) {
  return json{{"model", r.model_kind},
              {"steps", r.losses.size()},
              {"initial_loss", finite_or_text(r.initial_loss)},
              {"final_mse", finite_or_text(r.final_mse)},
              {"final_psnr", finite_or_text(r.final_psnr)},
              {"wall_seconds", r.wall_seconds},
              {"seed", r.seed},
              {"config_hash", r.config_hash}};
}

json report_json(const anr::spectral::SpectrumReport& r) {
  return json{{"samples", r.samples},
              {"max_target_bin", r.max_target_bin},
              {"total_energy", r.total},
              {"in_band_energy", r.in_band},
              {"out_of_band_energy", r.out_of_band},
              {"ratio", r.ratio}};
}

}  // namespace anrlab
