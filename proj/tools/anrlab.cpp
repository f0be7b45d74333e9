// anrlab: runs the named experiments and writes result bundles.
#include <cstdint>
#include <cstdio>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "anrlab/config.hpp"
#include "anrlab/experiments.hpp"
#include "anrlab/runtime.hpp"

namespace {

using nlohmann::json;

/// Flags land in a JSON patch so they override a --config file key by key.
class FlagSet {
 public:
  void add_string(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help,
                  std::vector<std::string> choices = {}) {
    auto& slot = strings_.emplace_back();
    CLI::Option* opt = app->add_option(flag, slot, help);
    if (!choices.empty()) opt->check(CLI::IsMember(choices));
    bind(opt, [&slot, key](json& j) { j[key] = slot; });
  }
  void add_uint(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = uints_.emplace_back();
    bind(app->add_option(flag, slot, help), [&slot, key](json& j) { j[key] = slot; });
  }
  void add_double(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = doubles_.emplace_back();
    bind(app->add_option(flag, slot, help), [&slot, key](json& j) { j[key] = slot; });
  }

  [[nodiscard]] json patch() const {
    json j = json::object();
    for (const auto& [opt, apply] : bindings_)
      if (opt->count() > 0) apply(j);
    return j;
  }

 private:
  void bind(CLI::Option* opt, std::function<void(json&)> apply) { bindings_.emplace_back(opt, std::move(apply)); }

  std::deque<std::string> strings_;
  std::deque<std::uint64_t> uints_;
  std::deque<double> doubles_;
  std::vector<std::pair<CLI::Option*, std::function<void(json&)>>> bindings_;
};

struct Command {
  CLI::App* app = nullptr;
  FlagSet flags;
  std::string config_path;
};

void add_shared(Command& c) {
  auto* a = c.app;
  a->add_option("--config", c.config_path, "JSON config file; flags override its keys")->check(CLI::ExistingFile);
  c.flags.add_uint(a, "--seed", "seed", "Root seed");
  c.flags.add_uint(a, "--steps", "steps", "Optimization steps");
  c.flags.add_string(a, "--out", "out", "Output root (default $ANRLAB_OUT or ./results)");
  c.flags.add_double(a, "--m", "m", "L-softmax threshold m");
  c.flags.add_string(a, "--sampler", "sampler", "Training coordinates", {"fixed", "variational"});
  c.flags.add_double(a, "--pe-sigma", "pe_sigma", "Positional-embedding frequency scale");
  c.flags.add_string(a, "--clamp-target", "clamp_target", "What the shift clamp bounds", {"v", "alpha-v", "none"});
  c.flags.add_double(a, "--shift-scale", "shift_scale", "Shift scale alpha (<= 0 uses the grid default)");
  c.flags.add_double(a, "--lr", "lr", "Adam learning rate");
  c.flags.add_uint(a, "--pe-features", "pe_features", "Positional-embedding features p");
  c.flags.add_uint(a, "--tokens", "tokens", "R-Token count N");
  c.flags.add_uint(a, "--token-dim", "token_dim", "R-Token dimension d");
  c.flags.add_uint(a, "--depth", "depth", "Hidden layers of the MLP / converter");
  c.flags.add_uint(a, "--width", "width", "Hidden width of the MLP / converter");
}

}  // namespace

int main(int argc, char** argv) {
  anrlab::tune_allocator();
  CLI::App app{"Localized-attention INR laboratory"};
  app.require_subcommand(1);

  std::deque<Command> commands;
  auto make = [&](const std::string& name, const std::string& help) -> Command& {
    Command& c = commands.emplace_back();
    c.app = app.add_subcommand(name, help);
    add_shared(c);
    return c;
  };

  Command& fit1d = make("fit1d", "1D aliasing experiment: fixed vs variational coordinates");
  fit1d.flags.add_uint(fit1d.app, "--points", "points", "Training samples n on [-1, 1)");
  fit1d.flags.add_uint(fit1d.app, "--frequencies", "frequencies", "Target wave components");
  fit1d.flags.add_uint(fit1d.app, "--max-bin", "max_bin", "Highest admissible target bin");
  fit1d.flags.add_uint(fit1d.app, "--upsample", "upsample", "Dense evaluation factor");

  Command& fit_image = make("fit-image", "Fit ANR and a matched MLP-INR to one image");
  fit_image.flags.add_string(fit_image.app, "--image", "image", "PGM/PPM input (default: synthetic card)");
  fit_image.flags.add_uint(fit_image.app, "--size", "size", "Synthetic image size");
  fit_image.flags.add_string(fit_image.app, "--model", "model", "Which models to fit", {"anr", "mlp", "both"});
  fit_image.flags.add_uint(fit_image.app, "--sr", "sr", "Also render at this super-resolution factor");
  fit_image.flags.add_string(fit_image.app, "--scope", "scope", "Trained parameters", {"all", "representation"});

  Command& ablate = make("ablate-threshold", "Paired fits with threshold m and without");
  ablate.flags.add_string(ablate.app, "--image", "image", "PGM/PPM input (default: synthetic card)");
  ablate.flags.add_uint(ablate.app, "--size", "size", "Synthetic image size");
  ablate.flags.add_uint(ablate.app, "--seeds", "seeds", "Number of consecutive seeds");

  Command& hyper = make("hypernet-demo", "Train a toy hypernetwork with a shared ANR");
  hyper.flags.add_string(hyper.app, "--data", "data_dir", "Directory of equal-size PGM/PPM images");
  hyper.flags.add_uint(hyper.app, "--synthetic", "synthetic", "Synthetic training images");
  hyper.flags.add_uint(hyper.app, "--held-out", "held_out", "Held-out images");
  hyper.flags.add_uint(hyper.app, "--size", "size", "Synthetic image size");
  hyper.flags.add_uint(hyper.app, "--batch", "batch", "Images per step");
  hyper.flags.add_string(hyper.app, "--arch", "arch", "Hypernetwork layout", {"encoder-decoder", "encoder-only"});
  hyper.flags.add_uint(hyper.app, "--enc-depth", "enc_depth", "Encoder blocks");
  hyper.flags.add_uint(hyper.app, "--dec-depth", "dec_depth", "Decoder blocks");
  hyper.flags.add_uint(hyper.app, "--heads", "heads", "Attention heads");
  hyper.flags.add_uint(hyper.app, "--head-dim", "head_dim", "Width per head");
  hyper.flags.add_uint(hyper.app, "--ff-dim", "ff_dim", "Feed-forward width");
  hyper.flags.add_uint(hyper.app, "--patch", "patch", "Patch size");

  make("gradcheck", "Finite-difference check of every differentiable op");

  Command& cont = make("continuity", "Dense-grid smoothness at low vs high positional-embedding scale");
  cont.flags.add_double(cont.app, "--pe-sigma-high", "pe_sigma_high", "Scale of the high-bandwidth run");
  cont.flags.add_uint(cont.app, "--upsample", "upsample", "Dense evaluation factor");

  CLI11_PARSE(app, argc, argv);

  for (auto& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      auto cfg = anrlab::ExperimentConfig::defaults_for(c.app->get_name());
      if (!c.config_path.empty()) cfg = anrlab::load_config_file(cfg, c.config_path);
      cfg = anrlab::merge(cfg, c.flags.patch());
      const auto outcome = anrlab::run_experiment(cfg);
      for (const auto& check : outcome.checks)
        std::printf("%s %s: %s\n", check.passed ? "PASS" : "FAIL", check.name.c_str(), check.detail.c_str());
      std::printf("bundle: %s\n", outcome.bundle.string().c_str());
      return outcome.passed() ? 0 : 1;
    } catch (const std::invalid_argument& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 2;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 3;
    }
  }
  return 2;
}
