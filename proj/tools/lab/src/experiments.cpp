#include "anrlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "anr/hypernet.hpp"
#include "anr/spectral.hpp"
#include "anr/training.hpp"
#include "anrlab/bundle.hpp"
#include "anrlab/gradcheck_suite.hpp"
#include "anrlab/synthetic.hpp"

namespace anrlab {

using nlohmann::json;
using namespace anr;

bool Outcome::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

namespace {

void log_line(const std::string& experiment, const std::string& message) {
  std::fprintf(stderr, "[%s] %s\n", experiment.c_str(), message.c_str());
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

sampling::VariationalSampler image_sampler(const ExperimentConfig& cfg, std::size_t h, std::size_t w) {
  if (cfg.sampler == "fixed") return sampling::VariationalSampler::fixed();
  auto s = sampling::VariationalSampler::for_image(h, w, sampling::parse_clamp_target(cfg.clamp_target));
  if (cfg.shift_scale > 0.0) s.alpha = cfg.shift_scale;
  return s;
}

train::FitOptions fit_options(const ExperimentConfig& cfg, sampling::VariationalSampler sampler) {
  train::FitOptions o;
  o.steps = cfg.steps;
  o.adam.lr = cfg.lr;
  o.sampler = sampler;
  o.scope = train::parse_fit_scope(cfg.scope);
  o.seed = cfg.seed;
  o.config_hash = config_hash(cfg);
  return o;
}

repr::MlpInrConfig line_mlp_config(const ExperimentConfig& cfg, double pe_sigma) {
  repr::MlpInrConfig c;
  c.coord_dims = 1;
  c.pe_features = cfg.pe_features;
  c.pe_sigma = pe_sigma;
  c.mlp.depth = cfg.depth;
  c.mlp.width = cfg.width;
  c.mlp.output_dim = 1;
  return c;
}

json check_json(const std::vector<Check>& checks) {
  json out = json::array();
  for (const auto& c : checks) out.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return out;
}

Outcome finish(Bundle& bundle, json summary, std::vector<Check> checks) {
  const bool ok = std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  summary["checks"] = check_json(checks);
  summary["passed"] = ok;
  bundle.finish(summary);
  return {bundle.dir(), std::move(summary), std::move(checks)};
}

ImageBuffer render(repr::CoordinateModel& model, std::size_t h, std::size_t w) {
  return ImageBuffer::from_rows(model.evaluate(sampling::make_grid(sampling::GridSpec::image(h, w))), h, w);
}

}  // namespace

repr::AnrConfig anr_config(const ExperimentConfig& cfg, std::size_t coord_dims, std::size_t output_dim) {
  repr::AnrConfig c;
  c.coord_dims = coord_dims;
  c.pe_features = cfg.pe_features;
  c.pe_sigma = cfg.pe_sigma;
  c.tokens = cfg.tokens;
  c.token_dim = cfg.token_dim;
  c.threshold = cfg.m;
  c.converter.depth = cfg.depth;
  c.converter.width = cfg.width;
  c.converter.output_dim = output_dim;
  return c;
}

repr::MlpInrConfig matched_mlp_config(const ExperimentConfig& cfg, std::size_t coord_dims, std::size_t output_dim,
                                      std::size_t repr_count) {
  repr::MlpInrConfig c;
  c.coord_dims = coord_dims;
  c.pe_features = cfg.pe_features;
  c.pe_sigma = cfg.pe_sigma;
  c.mlp.depth = cfg.depth;
  c.mlp.width = cfg.width;
  c.mlp.output_dim = output_dim;
  const std::size_t rows = cfg.depth == 0 ? output_dim : cfg.width;
  if (repr_count % rows != 0 || repr_count / rows == 0 || repr_count / rows > cfg.pe_features) {
    throw std::invalid_argument("cannot match " + std::to_string(repr_count) +
                                " representation parameters with whole columns of a " + std::to_string(rows) + "x" +
                                std::to_string(cfg.pe_features) + " first layer");
  }
  c.modulation = repr_count / rows;
  c.repr_layers = 1;
  return c;
}

ImageBuffer experiment_image(const ExperimentConfig& cfg) {
  if (!cfg.image.empty()) return load_image(cfg.image);
  return synthetic_image(cfg.size, cfg.size, Prng(cfg.seed).split(7).next_u64());
}

Outcome run_fit1d(const ExperimentConfig& cfg) {
  cfg.validate();
  Bundle bundle(cfg);
  Prng root(cfg.seed);
  Prng target_rng = root.split(1);
  const auto target = spectral::WaveSet::random_line(target_rng, cfg.frequencies, cfg.max_bin);
  const Tensor grid = sampling::make_grid(sampling::GridSpec::line(cfg.points));
  const Tensor values = spectral::synth_wave(target, grid);
  const Tensor dense = sampling::make_grid(sampling::GridSpec::line(cfg.points * cfg.upsample));
  const auto bins = target.bins();

  json summary;
  summary["target_bins"] = bins;
  std::string recon = "x,target";
  std::vector<Tensor> dense_values;
  const auto target_dense = spectral::synth_wave(target, dense);
  bundle.add_spectrum("target", spectral::spectrum_report(target_dense.data, bins));

  double ratio[2] = {0.0, 0.0};
  const char* names[2] = {"fixed", "variational"};
  for (int twin = 0; twin < 2; ++twin) {
    Prng init = root.split(2);  // identical initial weights for both twins
    repr::MlpInrModel model(line_mlp_config(cfg, cfg.pe_sigma), init);
    auto sampler = twin == 0 ? sampling::VariationalSampler::fixed() : sampling::VariationalSampler::for_line(cfg.points);
    if (twin == 1 && cfg.shift_scale > 0.0) sampler.alpha = cfg.shift_scale;
    const auto report = train::fit_instance(model, grid, values, fit_options(cfg, sampler));
    const auto spec = spectral::aliased_energy(model, cfg.points, cfg.upsample, target);
    ratio[twin] = spec.ratio;
    bundle.add_losses(names[twin], report.losses);
    bundle.add_spectrum(names[twin], spec);
    dense_values.push_back(model.evaluate(dense));
    recon += std::string(",") + names[twin];
    summary[names[twin]] = report_json(report);
    summary[names[twin]]["spectrum"] = report_json(spec);
    log_line("fit1d", std::string(names[twin]) + ": train mse " + fmt("%.3e", report.final_mse) +
                          ", out-of-band ratio " + fmt("%.4e", spec.ratio) + fmt(" (%.1f s)", report.wall_seconds));
  }
  recon += "\n";
  for (std::size_t i = 0; i < dense.rows(); ++i) {
    recon += format_double(dense.data[i]) + "," + format_double(target_dense.data[i]) + "," +
             format_double(dense_values[0].data[i]) + "," + format_double(dense_values[1].data[i]) + "\n";
  }
  bundle.write_text("reconstruction.csv", recon);

  const double factor = ratio[1] > 0.0 ? ratio[0] / ratio[1] : std::numeric_limits<double>::infinity();
  summary["suppression_factor"] = std::isfinite(factor) ? json(factor) : json("inf");
  std::vector<Check> checks{{"variational_ratio_below_fixed", ratio[1] < ratio[0],
                             "fixed " + fmt("%.4e", ratio[0]) + " vs variational " + fmt("%.4e", ratio[1]) +
                                 ", factor " + fmt("%.2f", factor)}};
  return finish(bundle, std::move(summary), std::move(checks));
}

Outcome run_fit_image(const ExperimentConfig& cfg) {
  cfg.validate();
  Bundle bundle(cfg);
  const ImageBuffer image = experiment_image(cfg);
  const std::size_t h = image.height, w = image.width, ch = image.channels;
  const Tensor coords = sampling::make_grid(sampling::GridSpec::image(h, w));
  const Tensor target = train::image_targets(image.to_tensor());
  bundle.write_image("target.ppm", image);
  Prng root(cfg.seed);

  const auto anr_cfg = anr_config(cfg, 2, ch);
  const std::size_t repr_count = cfg.tokens * cfg.token_dim;
  std::vector<std::pair<std::string, std::unique_ptr<repr::CoordinateModel>>> models;
  if (cfg.model != "mlp") {
    Prng init = root.split(2);
    models.emplace_back("anr", std::make_unique<repr::AnrInstance>(anr_cfg, init));
  }
  if (cfg.model != "anr") {
    Prng init = root.split(3);
    models.emplace_back("mlp_inr",
                        std::make_unique<repr::MlpInrModel>(matched_mlp_config(cfg, 2, ch, repr_count), init));
  }

  json summary;
  summary["image"] = {{"height", h}, {"width", w}, {"channels", ch}, {"source", cfg.image.empty() ? "synthetic" : cfg.image}};
  std::vector<double> psnr;
  for (auto& [name, model] : models) {
    const auto report = train::fit_instance(*model, coords, target, fit_options(cfg, image_sampler(cfg, h, w)));
    bundle.add_losses(name, report.losses);
    bundle.write_image("recon_" + name + ".ppm", render(*model, h, w));
    if (cfg.sr > 1) bundle.write_image("sr" + std::to_string(cfg.sr) + "_" + name + ".ppm", render(*model, h * cfg.sr, w * cfg.sr));
    summary[name] = report_json(report);
    summary[name]["repr_params"] = model->repr_param_count();
    summary[name]["total_params"] = count_parameters(model->parameters());
    psnr.push_back(report.final_psnr);
    log_line("fit-image", name + ": PSNR " + fmt("%.2f dB", report.final_psnr) + fmt(" (%.1f s)", report.wall_seconds));
  }
  std::vector<Check> checks;
  if (models.size() == 2) {
    checks.push_back({"anr_psnr_at_least_mlp_inr", psnr[0] >= psnr[1],
                      "ANR " + fmt("%.2f dB", psnr[0]) + " vs MLP-INR " + fmt("%.2f dB", psnr[1]) + " at " +
                          std::to_string(repr_count) + " representation parameters"});
  }
  return finish(bundle, std::move(summary), std::move(checks));
}

Outcome run_ablate_threshold(const ExperimentConfig& cfg) {
  cfg.validate();
  Bundle bundle(cfg);
  const ImageBuffer image = experiment_image(cfg);
  const std::size_t h = image.height, w = image.width;
  const Tensor coords = sampling::make_grid(sampling::GridSpec::image(h, w));
  const Tensor target = train::image_targets(image.to_tensor());

  std::string table = "seed,m,final_loss,final_psnr\n";
  std::vector<double> with, without;
  json runs = json::array();
  for (std::size_t i = 0; i < cfg.seeds; ++i) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + i;
    for (int arm = 0; arm < 2; ++arm) {
      const double m = arm == 0 ? cfg.m : 0.0;
      run_cfg.m = m;
      Prng init = Prng(run_cfg.seed).split(2);
      repr::AnrInstance model(anr_config(run_cfg, 2, image.channels), init);
      const auto report = train::fit_instance(model, coords, target, fit_options(run_cfg, image_sampler(cfg, h, w)));
      const std::string run = "seed" + std::to_string(run_cfg.seed) + "_m" + format_double(m);
      bundle.add_losses(run, report.losses);
      table += std::to_string(run_cfg.seed) + "," + format_double(m) + "," + format_double(report.final_mse) + "," +
               format_double(report.final_psnr) + "\n";
      (arm == 0 ? with : without).push_back(report.final_mse);
      json r = report_json(report);
      r["m"] = m;
      runs.push_back(r);
      log_line("ablate-threshold", run + ": loss " + fmt("%.4e", report.final_mse) + fmt(" (%.1f s)", report.wall_seconds));
    }
  }
  bundle.write_text("results.csv", table);
  const double med_with = median(with), med_without = median(without);
  json summary{{"runs", runs}, {"median_loss_with_threshold", med_with}, {"median_loss_without_threshold", med_without}};
  std::vector<Check> checks{{"median_loss_with_threshold_not_above_without", med_with <= med_without,
                             "m=" + format_double(cfg.m) + " median " + fmt("%.4e", med_with) + " vs m=0 median " +
                                 fmt("%.4e", med_without)}};
  return finish(bundle, std::move(summary), std::move(checks));
}

namespace {

std::vector<ImageBuffer> load_directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ImageBuffer> out;
  for (const auto& f : files) out.push_back(load_image(f));
  if (out.empty()) throw std::invalid_argument("no .pgm/.ppm images in " + dir.string());
  for (const auto& img : out) {
    if (img.width != out[0].width || img.height != out[0].height || img.channels != out[0].channels) {
      throw DimensionError("dataset images differ in size");
    }
  }
  return out;
}

}  // namespace

Outcome run_hypernet_demo(const ExperimentConfig& cfg) {
  cfg.validate();
  Bundle bundle(cfg);
  Prng root(cfg.seed);
  std::vector<ImageBuffer> train_set, held_out;
  if (!cfg.data_dir.empty()) {
    auto all = load_directory(cfg.data_dir);
    if (all.size() <= cfg.held_out) throw std::invalid_argument("dataset needs more images than held_out");
    held_out.assign(all.end() - static_cast<std::ptrdiff_t>(cfg.held_out), all.end());
    all.resize(all.size() - cfg.held_out);
    train_set = std::move(all);
  } else {
    auto all = synthetic_dataset(cfg.synthetic + cfg.held_out, cfg.size, root.split(1).next_u64());
    held_out.assign(all.begin() + static_cast<std::ptrdiff_t>(cfg.synthetic), all.end());
    all.resize(cfg.synthetic);
    train_set = std::move(all);
  }
  if (held_out.empty()) throw std::invalid_argument("hypernet-demo needs at least one held-out image");

  hyper::HyperNetConfig hc;
  hc.enc_depth = cfg.enc_depth;
  hc.dec_depth = cfg.dec_depth;
  hc.heads = cfg.heads;
  hc.head_dim = cfg.head_dim;
  hc.ff_dim = cfg.ff_dim;
  hc.patch_size = cfg.patch;
  hc.image_height = train_set[0].height;
  hc.image_width = train_set[0].width;
  hc.channels = train_set[0].channels;
  hc.rtokens = cfg.tokens;
  hc.token_dim = cfg.token_dim;
  hc.arch = cfg.arch == "encoder-only" ? attention::HyperArch::encoder_only : attention::HyperArch::encoder_decoder;
  Prng init = root.split(2);
  hyper::HyperNet net(hc, init);
  repr::AnrModel anr(anr_config(cfg, 2, hc.channels), init);

  std::vector<Tensor> train_t, held_t;
  for (const auto& img : train_set) train_t.push_back(img.to_tensor());
  for (const auto& img : held_out) held_t.push_back(img.to_tensor());

  std::vector<Check> checks;
  {
    attention::ScoreCounter counter;
    Tape tape;
    hyper::hypernet_forward(net, tape, train_t[0], &counter);
    const std::size_t expected = attention::attention_map_cost(hc.arch, hc.enc_depth, hc.dec_depth, hc.data_tokens(), hc.rtokens);
    checks.push_back({"attention_cost_matches_formula", counter.elements == expected,
                      "counted " + std::to_string(counter.elements) + ", formula " + std::to_string(expected)});
  }

  train::HyperTrainOptions opts;
  opts.steps = cfg.steps;
  opts.batch = cfg.batch;
  opts.adam.lr = cfg.lr;
  opts.sampler = image_sampler(cfg, hc.image_height, hc.image_width);
  opts.seed = cfg.seed;
  opts.config_hash = bundle.hash();
  const auto report = train::train_hypernet(net, anr, train_t, opts);
  bundle.add_losses("hypernet", report.losses);

  const auto held_mse = train::hypernet_mse(net, anr, held_t);
  const auto base_mse = train::mean_image_mse(train_t, held_t);
  const double held_psnr = train::mean_psnr(held_mse), base_psnr = train::mean_psnr(base_mse);
  log_line("hypernet-demo", "held-out PSNR " + fmt("%.2f dB", held_psnr) + " vs mean-image " + fmt("%.2f dB", base_psnr) +
                                fmt(" (%.1f s)", report.wall_seconds));
  checks.push_back({"held_out_psnr_beats_mean_image", held_psnr > base_psnr,
                    "hypernet " + fmt("%.2f dB", held_psnr) + " vs mean image " + fmt("%.2f dB", base_psnr)});

  for (std::size_t i = 0; i < std::min<std::size_t>(4, held_t.size()); ++i) {
    Tape tape;
    const Tensor coords = sampling::make_grid(sampling::GridSpec::image(hc.image_height, hc.image_width));
    const Tensor pred = hyper::end_to_end_forward(net, anr, tape, held_t[i], coords).value();
    bundle.write_image("heldout_" + std::to_string(i) + "_recon.ppm", ImageBuffer::from_rows(pred, hc.image_height, hc.image_width));
    bundle.write_image("heldout_" + std::to_string(i) + "_target.ppm", held_out[i]);
  }

  json summary;
  summary["train"] = report_json(report);
  summary["train_images"] = train_t.size();
  summary["held_out_images"] = held_t.size();
  summary["held_out_psnr"] = held_psnr;
  summary["mean_image_psnr"] = base_psnr;
  summary["arch"] = cfg.arch;
  summary["hypernet_params"] = count_parameters(net.parameters());
  return finish(bundle, std::move(summary), std::move(checks));
}

Outcome run_gradcheck(const ExperimentConfig& cfg) {
  cfg.validate();
  Bundle bundle(cfg);
  const auto entries = run_gradcheck_suite(cfg.seed);
  std::string table = "name,checked,excluded,max_rel_error,tolerance,passed\n";
  std::vector<Check> checks;
  json ops = json::array();
  for (const auto& e : entries) {
    const auto& r = e.report;
    table += r.name + "," + std::to_string(r.checked) + "," + std::to_string(r.excluded) + "," +
             format_double(r.max_rel_error) + "," + format_double(e.tolerance) + "," + (r.passed() ? "1" : "0") + "\n";
    std::string detail = "max rel. err " + fmt("%.3e", r.max_rel_error) + " over " + std::to_string(r.checked) + " elements";
    if (!r.failures.empty()) detail += "; first failure " + r.failures.front();
    checks.push_back({r.name, r.passed(), detail});
    ops.push_back({{"name", r.name}, {"max_rel_error", r.max_rel_error}, {"checked", r.checked}, {"excluded", r.excluded},
                   {"tolerance", e.tolerance}, {"failures", r.failures}});
  }
  bundle.write_text("gradcheck.csv", table);
  return finish(bundle, json{{"ops", ops}}, std::move(checks));
}

Outcome run_continuity(const ExperimentConfig& cfg) {
  cfg.validate();
  Bundle bundle(cfg);
  Prng root(cfg.seed);
  Prng target_rng = root.split(1);
  const auto target = spectral::WaveSet::random_line(target_rng, cfg.frequencies, cfg.max_bin);
  const auto grid_spec = sampling::GridSpec::line(cfg.points);
  const Tensor grid = sampling::make_grid(grid_spec);
  const Tensor values = spectral::synth_wave(target, grid);
  const Tensor dense = sampling::make_grid(grid_spec.dense(cfg.upsample));

  json summary;
  double tv[2];
  bool finite = true;
  const double sigmas[2] = {cfg.pe_sigma, cfg.pe_sigma_high};
  const char* names[2] = {"low_sigma", "high_sigma"};
  for (int i = 0; i < 2; ++i) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.pe_sigma = sigmas[i];
    Prng init = root.split(2);
    repr::AnrInstance model(anr_config(run_cfg, 1, 1), init);
    const auto report = train::fit_instance(model, grid, values, fit_options(cfg, sampling::VariationalSampler::fixed()));
    const auto cont = spectral::continuity_metric(model, grid_spec, cfg.upsample);
    const Tensor out = model.evaluate(dense);
    finite = finite && std::all_of(out.data.begin(), out.data.end(), [](double v) { return std::isfinite(v); });
    tv[i] = cont.total_variation;
    bundle.add_losses(names[i], report.losses);
    summary[names[i]] = report_json(report);
    summary[names[i]]["pe_sigma"] = sigmas[i];
    summary[names[i]]["max_jump"] = cont.max_jump;
    summary[names[i]]["total_variation"] = cont.total_variation;
    log_line("continuity", std::string(names[i]) + ": total variation " + fmt("%.4f", cont.total_variation) +
                               ", max jump " + fmt("%.4f", cont.max_jump));
  }
  std::vector<Check> checks{
      {"low_sigma_total_variation_smaller", tv[0] < tv[1],
       "sigma " + format_double(sigmas[0]) + ": " + fmt("%.4f", tv[0]) + " vs sigma " + format_double(sigmas[1]) + ": " +
           fmt("%.4f", tv[1])},
      {"dense_outputs_finite", finite, finite ? "all finite" : "non-finite output on the dense grid"}};
  return finish(bundle, std::move(summary), std::move(checks));
}

Outcome run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "fit1d") return run_fit1d(cfg);
  if (cfg.experiment == "fit-image") return run_fit_image(cfg);
  if (cfg.experiment == "ablate-threshold") return run_ablate_threshold(cfg);
  if (cfg.experiment == "hypernet-demo") return run_hypernet_demo(cfg);
  if (cfg.experiment == "gradcheck") return run_gradcheck(cfg);
  if (cfg.experiment == "continuity") return run_continuity(cfg);
  throw std::invalid_argument("unknown experiment '" + cfg.experiment + "'");
}

}  // namespace anrlab
