#include "anr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace anr::train {

Adam::Adam(ParamList params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor->size(), 0.0);
    v_.emplace_back(p.tensor->size(), 0.0);
  }
}

void Adam::step() {
  for (const auto& p : params_) {
    if (!p.tensor->grad) continue;
    for (double g : *p.tensor->grad) {
      if (std::isnan(g)) throw GradientError("adam_step: NaN gradient in parameter '" + p.name + "'");
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i].tensor;
    auto& m = m_[i];
    auto& v = v_[i];
    if (m.size() != p.size()) throw DimensionError("adam_step: parameter '" + params_[i].name + "' changed size");
    const std::vector<double>* grad = p.grad ? &*p.grad : nullptr;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = grad ? (*grad)[k] : 0.0;
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g;
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p.data[k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

std::string to_string(FitScope scope) { return scope == FitScope::all ? "all" : "representation"; }

FitScope parse_fit_scope(const std::string& text) {
  if (text == "all") return FitScope::all;
  if (text == "representation") return FitScope::representation;
  throw std::invalid_argument("unknown fit scope '" + text + "' (expected all|representation)");
}

Var mse(Var pred, Var target) {
  if (pred.shape() != target.shape()) throw DimensionError("mse", pred.shape(), target.shape());
  return ops::mean(ops::square(ops::sub(pred, target)));
}

double mse(const Tensor& pred, const Tensor& target) {
  if (pred.shape != target.shape) throw DimensionError("mse", pred.shape, target.shape);
  if (pred.size() == 0) throw DimensionError("mse of empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

double psnr(double mse_value, double peak) {
  if (mse_value < 0.0 || std::isnan(mse_value)) throw std::domain_error("psnr: mse must be >= 0");
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse_value);
}

double mean_psnr(std::span<const double> per_instance_mse, double peak) {
  if (per_instance_mse.empty()) throw std::invalid_argument("mean_psnr: no instances");
  double acc = 0.0;
  for (double m : per_instance_mse) acc += psnr(m, peak);
  return acc / static_cast<double>(per_instance_mse.size());
}

namespace {

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows) {
  const std::size_t cols = t.cols();
  Tensor out(Shape{rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>(rows[i] * cols), cols,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * cols));
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

FitReport fit_instance(repr::CoordinateModel& model, const Tensor& coords, const Tensor& target,
                       const FitOptions& options) {
  if (coords.rows() != target.rows()) throw DimensionError("fit_instance coords/target", coords.shape, target.shape);
  if (coords.cols() != model.coord_dims()) throw DimensionError("fit_instance coords/model", coords.shape, Shape{model.coord_dims()});
  if (target.cols() != model.output_dim()) throw DimensionError("fit_instance target/model", target.shape, Shape{model.output_dim()});
  const auto start = std::chrono::steady_clock::now();

  FitReport report;
  report.model_kind = model.kind();
  report.seed = options.seed;
  report.config_hash = options.config_hash;
  report.initial_loss = mse(model.evaluate(coords), target);
  report.losses.reserve(options.steps);

  Prng root(options.seed);
  Prng sample_rng = root.split(1);
  Prng batch_rng = root.split(2);
  const bool repr_only = options.scope == FitScope::representation;
  const ParamList trained = repr_only ? model.representation_parameters() : model.parameters();
  ParamList frozen;
  if (repr_only) {
    for (const auto& p : model.parameters()) {
      const bool is_trained =
          std::any_of(trained.begin(), trained.end(), [&](const NamedParam& t) { return t.tensor == p.tensor; });
      if (!is_trained) frozen.push_back(p);
    }
  }
  Adam adam(trained, options.adam);

  const std::size_t q = coords.rows();
  const bool full = q <= options.full_batch_limit;
  std::vector<std::size_t> idx(full ? q : std::min(options.minibatch, q));
  if (full) std::iota(idx.begin(), idx.end(), std::size_t{0});

  for (std::size_t step = 0; step < options.steps; ++step) {
    if (!full)
      for (auto& i : idx) i = batch_rng.below(q);
    const Tensor batch_coords = full ? coords : gather_rows(coords, idx);
    const Tensor batch_target = full ? target : gather_rows(target, idx);
    const Tensor sampled = sampling::sample_variational(options.sampler, batch_coords, sample_rng);

    adam.zero_grad();
    Tape tape;
    for (const auto& p : frozen) tape.freeze(*p.tensor);
    Var loss = mse(model.forward(tape, sampled), tape.constant(batch_target));
    const double lv = loss.value().item();
    report.losses.push_back(lv);
    if (!std::isfinite(lv)) {
      report.final_mse = lv;
      report.final_psnr = std::numeric_limits<double>::quiet_NaN();
      report.wall_seconds = seconds_since(start);
      throw DivergenceError("fit_instance: loss became non-finite at step " + std::to_string(step), report);
    }
    tape.backward(loss);
    adam.step();
  }

  report.final_mse = options.steps == 0 ? report.initial_loss : mse(model.evaluate(coords), target);
  report.final_psnr = psnr(report.final_mse);
  report.wall_seconds = seconds_since(start);
  return report;
}

Tensor image_targets(const Tensor& image) {
  if (image.rank() != 3) throw DimensionError("image_targets expects [h x w x c], got " + anr::to_string(image.shape));
  return Tensor(Shape{image.shape[0] * image.shape[1], image.shape[2]}, image.data);
}

Var hypernet_batch_loss(hyper::HyperNet& net, repr::AnrModel& anr, Tape& tape, std::span<const Tensor> images,
                        std::span<const Tensor> coords) {
  if (images.empty() || images.size() != coords.size()) {
    throw std::invalid_argument("hypernet_batch_loss: need one coordinate set per image");
  }
  Var total;
  for (std::size_t i = 0; i < images.size(); ++i) {
    Var pred = hyper::end_to_end_forward(net, anr, tape, images[i], coords[i]);
    Var l = mse(pred, tape.constant(image_targets(images[i])));
    total = i == 0 ? l : ops::add(total, l);
  }
  return ops::scale(total, 1.0 / static_cast<double>(images.size()));
}

std::vector<double> hypernet_mse(hyper::HyperNet& net, repr::AnrModel& anr, std::span<const Tensor> images) {
  std::vector<double> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    const Tensor coords = sampling::make_grid(sampling::GridSpec::image(img.shape.at(0), img.shape.at(1)));
    Tape tape;
    out.push_back(mse(hyper::end_to_end_forward(net, anr, tape, img, coords).value(), image_targets(img)));
  }
  return out;
}

std::vector<double> mean_image_mse(std::span<const Tensor> train, std::span<const Tensor> eval) {
  if (train.empty()) throw std::invalid_argument("mean_image_mse: empty training set");
  Tensor mean(train.front().shape);
  for (const auto& img : train) {
    if (img.shape != mean.shape) throw DimensionError("mean_image_mse", mean.shape, img.shape);
    for (std::size_t i = 0; i < img.size(); ++i) mean.data[i] += img.data[i];
  }
  for (double& v : mean.data) v /= static_cast<double>(train.size());
  std::vector<double> out;
  for (const auto& img : eval) out.push_back(mse(mean, img));
  return out;
}

FitReport train_hypernet(hyper::HyperNet& net, repr::AnrModel& anr, std::span<const Tensor> dataset,
                         const HyperTrainOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("train_hypernet: empty dataset");
  for (const auto& img : dataset) {
    if (img.shape != dataset.front().shape) throw DimensionError("train_hypernet dataset", dataset.front().shape, img.shape);
  }
  if (options.batch == 0) throw std::invalid_argument("train_hypernet: batch must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t h = dataset.front().shape.at(0), w = dataset.front().shape.at(1);
  const Tensor grid = sampling::make_grid(sampling::GridSpec::image(h, w));

  FitReport report;
  report.model_kind = "hypernet+anr";
  report.seed = options.seed;
  report.config_hash = options.config_hash;
  {
    const auto init = hypernet_mse(net, anr, dataset);
    report.initial_loss = std::accumulate(init.begin(), init.end(), 0.0) / static_cast<double>(init.size());
  }

  ParamList params = net.parameters();
  anr.append_parameters(params);
  Adam adam(params, options.adam);
  Prng root(options.seed);
  Prng order_rng = root.split(1);
  Prng sample_rng = root.split(2);

  // Epoch-wise shuffled draw order.
  std::vector<std::size_t> order(dataset.size());
  std::size_t cursor = order.size();
  auto next_index = [&]() {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
      cursor = 0;
    }
    return order[cursor++];
  };

  std::vector<Tensor> images(options.batch), coords(options.batch);
  for (std::size_t step = 0; step < options.steps; ++step) {
    for (std::size_t b = 0; b < options.batch; ++b) {
      images[b] = dataset[next_index()];
      coords[b] = sampling::sample_variational(options.sampler, grid, sample_rng);
    }
    adam.zero_grad();
    Tape tape;
    Var loss = hypernet_batch_loss(net, anr, tape, images, coords);
    const double lv = loss.value().item();
    report.losses.push_back(lv);
    if (!std::isfinite(lv)) {
      report.wall_seconds = seconds_since(start);
      throw DivergenceError("train_hypernet: loss became non-finite at step " + std::to_string(step), report);
    }
    tape.backward(loss);
    adam.step();
  }

  const auto final_mse = hypernet_mse(net, anr, dataset);
  report.final_mse = std::accumulate(final_mse.begin(), final_mse.end(), 0.0) / static_cast<double>(final_mse.size());
  report.final_psnr = mean_psnr(final_mse);
  report.wall_seconds = seconds_since(start);
  return report;
}

}  // namespace anr::train
