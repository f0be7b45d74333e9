#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "anr/hypernet.hpp"
#include "anr/representation.hpp"
#include "anr/sampling.hpp"

namespace anr::train {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list. Parameters without a
/// gradient buffer are treated as having zero gradient.
class Adam {
 public:
  Adam(ParamList params, AdamConfig config);

  /// Throws GradientError naming the parameter if any gradient is NaN.
  void step();
  void zero_grad() { zero_grads(params_); }

  [[nodiscard]] std::uint64_t step_count() const { return steps_; }
  [[nodiscard]] const ParamList& params() const { return params_; }
  [[nodiscard]] const AdamConfig& config() const { return config_; }
  [[nodiscard]] const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  [[nodiscard]] const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  ParamList params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t steps_ = 0;
};

Var mse(Var pred, Var target);
double mse(const Tensor& pred, const Tensor& target);
/// 10 log10(peak^2 / mse); +infinity when mse == 0.
double psnr(double mse_value, double peak = 1.0);
/// Dataset PSNR: the mean of per-instance PSNRs.
double mean_psnr(std::span<const double> per_instance_mse, double peak = 1.0);

struct FitReport {
  std::string model_kind;
  std::vector<double> losses;  // one per optimization step, measured before the update
  double initial_loss = 0.0;   // on the fixed grid before training
  double final_mse = 0.0;      // on the fixed grid after training
  double final_psnr = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, FitReport partial)
      : std::runtime_error(what), report(std::move(partial)) {}
  FitReport report;
};

/// Which parameters a single-instance fit updates. `representation` keeps the
/// shared weights at their current values and trains only the per-instance part.
enum class FitScope { all, representation };

std::string to_string(FitScope scope);
FitScope parse_fit_scope(const std::string& text);

struct FitOptions {
  std::size_t steps = 1000;
  FitScope scope = FitScope::all;
  AdamConfig adam;
  sampling::VariationalSampler sampler;
  /// Full-grid batches up to this many coordinates, random minibatches above.
  std::size_t full_batch_limit = 64 * 64;
  std::size_t minibatch = 4096;
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// Fits `model` to target values [q x S] at grid coordinates [q x C].
/// Coordinates are resampled every step; targets stay those of the grid points.
FitReport fit_instance(repr::CoordinateModel& model, const Tensor& coords, const Tensor& target,
                       const FitOptions& options);

/// Image [h x w x c] as per-pixel targets [(h w) x c], matching GridSpec::image ordering.
Tensor image_targets(const Tensor& image);

struct HyperTrainOptions {
  std::size_t steps = 2000;
  std::size_t batch = 8;
  AdamConfig adam;
  sampling::VariationalSampler sampler;
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// Mean over `images` of the per-image MSE of the end-to-end reconstruction at `coords`.
Var hypernet_batch_loss(hyper::HyperNet& net, repr::AnrModel& anr, Tape& tape, std::span<const Tensor> images,
                        std::span<const Tensor> coords);

/// Joint end-to-end training of the hypernetwork and the shared ANR parameters.
FitReport train_hypernet(hyper::HyperNet& net, repr::AnrModel& anr, std::span<const Tensor> dataset,
                         const HyperTrainOptions& options);

/// Per-instance MSE of end-to-end reconstructions on each image's pixel grid.
std::vector<double> hypernet_mse(hyper::HyperNet& net, repr::AnrModel& anr, std::span<const Tensor> images);
/// Per-instance MSE of predicting every image in `eval` by the mean image of `train`.
std::vector<double> mean_image_mse(std::span<const Tensor> train, std::span<const Tensor> eval);

}  // namespace anr::train
