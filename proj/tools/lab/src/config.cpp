#include "anrlab/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

namespace anrlab {

using nlohmann::json;

ExperimentConfig ExperimentConfig::defaults_for(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  if (experiment == "fit1d") return c;
  if (experiment == "fit-image" || experiment == "ablate-threshold") {
    c.steps = 2000;
    c.pe_sigma = 8.0;
    c.width = 64;
    c.size = 32;
    return c;
  }
  if (experiment == "hypernet-demo") {
    c.steps = 2000;
    c.pe_sigma = 4.0;
    c.tokens = 16;
    c.depth = 3;
    c.width = 64;
    c.size = 16;
    c.lr = 1e-4;
    return c;
  }
  if (experiment == "continuity") {
    c.steps = 300;
    c.pe_sigma = 2.0;
    c.pe_sigma_high = 40.0;
    c.depth = 3;
    c.width = 64;
    return c;
  }
  if (experiment == "gradcheck") {
    c.steps = 0;
    return c;
  }
  throw std::invalid_argument("unknown experiment '" + experiment + "'");
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("config: " + what);
}

}  // namespace

void ExperimentConfig::validate() const {
  require(sampler == "fixed" || sampler == "variational", "sampler must be fixed|variational, got '" + sampler + "'");
  require(clamp_target == "v" || clamp_target == "alpha-v" || clamp_target == "none",
          "clamp_target must be v|alpha-v|none, got '" + clamp_target + "'");
  require(scope == "all" || scope == "representation", "scope must be all|representation, got '" + scope + "'");
  require(model == "anr" || model == "mlp" || model == "both", "model must be anr|mlp|both, got '" + model + "'");
  require(arch == "encoder-decoder" || arch == "encoder-only", "arch must be encoder-decoder|encoder-only");
  require(m >= 0.0 && m < 1.0, "threshold m must lie in [0, 1)");
  require(lr > 0.0, "lr must be positive");
  require(tokens >= 1, "tokens (N) must be >= 1");
  require(token_dim >= 1, "token_dim (d) must be >= 1");
  require(pe_features >= 1 && width >= 1, "pe_features and width must be >= 1");
  require(pe_sigma > 0.0 && pe_sigma_high > 0.0, "pe_sigma must be positive");
  require(points >= 2, "points must be >= 2");
  require(frequencies >= 1 && frequencies <= max_bin, "need 1 <= frequencies <= max_bin");
  require(2 * max_bin < points, "max_bin must stay below the training Nyquist bin points/2");
  require(upsample >= 2, "upsample must be >= 2");
  require(size >= 1 && sr >= 1 && seeds >= 1, "size, sr and seeds must be >= 1");
  require(batch >= 1 && synthetic >= 1, "batch and synthetic must be >= 1");
}

json to_json(const ExperimentConfig& c) {
  return json{{"experiment", c.experiment},
              {"seed", c.seed},
              {"steps", c.steps},
              {"out", c.out},
              {"lr", c.lr},
              {"sampler", c.sampler},
              {"clamp_target", c.clamp_target},
              {"shift_scale", c.shift_scale},
              {"m", c.m},
              {"scope", c.scope},
              {"pe_features", c.pe_features},
              {"pe_sigma", c.pe_sigma},
              {"pe_sigma_high", c.pe_sigma_high},
              {"tokens", c.tokens},
              {"token_dim", c.token_dim},
              {"depth", c.depth},
              {"width", c.width},
              {"points", c.points},
              {"frequencies", c.frequencies},
              {"max_bin", c.max_bin},
              {"upsample", c.upsample},
              {"image", c.image},
              {"size", c.size},
              {"model", c.model},
              {"sr", c.sr},
              {"seeds", c.seeds},
              {"data_dir", c.data_dir},
              {"synthetic", c.synthetic},
              {"held_out", c.held_out},
              {"batch", c.batch},
              {"arch", c.arch},
              {"enc_depth", c.enc_depth},
              {"dec_depth", c.dec_depth},
              {"heads", c.heads},
              {"head_dim", c.head_dim},
              {"ff_dim", c.ff_dim},
              {"patch", c.patch}};
}

ExperimentConfig merge(const ExperimentConfig& base, const json& patch) {
  if (!patch.is_object()) throw std::invalid_argument("config: expected a JSON object");
  json full = to_json(base);
  for (const auto& [key, value] : patch.items()) {
    if (!full.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
    const json& old = full[key];
    const bool same_kind = (old.is_string() && value.is_string()) || (old.is_number() && value.is_number());
    if (!same_kind) throw std::invalid_argument("config: wrong type for '" + key + "'");
    if (old.is_number_unsigned() && !(value.is_number_unsigned() || (value.is_number_integer() && value.get<long long>() >= 0))) {
      throw std::invalid_argument("config: '" + key + "' must be a non-negative integer");
    }
    full[key] = value;
  }
  ExperimentConfig c;
  c.experiment = full["experiment"].get<std::string>();
  c.seed = full["seed"].get<std::uint64_t>();
  c.steps = full["steps"].get<std::size_t>();
  c.out = full["out"].get<std::string>();
  c.lr = full["lr"].get<double>();
  c.sampler = full["sampler"].get<std::string>();
  c.clamp_target = full["clamp_target"].get<std::string>();
  c.shift_scale = full["shift_scale"].get<double>();
  c.m = full["m"].get<double>();
  c.scope = full["scope"].get<std::string>();
  c.pe_features = full["pe_features"].get<std::size_t>();
  c.pe_sigma = full["pe_sigma"].get<double>();
  c.pe_sigma_high = full["pe_sigma_high"].get<double>();
  c.tokens = full["tokens"].get<std::size_t>();
  c.token_dim = full["token_dim"].get<std::size_t>();
  c.depth = full["depth"].get<std::size_t>();
  c.width = full["width"].get<std::size_t>();
  c.points = full["points"].get<std::size_t>();
  c.frequencies = full["frequencies"].get<std::size_t>();
  c.max_bin = full["max_bin"].get<std::size_t>();
  c.upsample = full["upsample"].get<std::size_t>();
  c.image = full["image"].get<std::string>();
  c.size = full["size"].get<std::size_t>();
  c.model = full["model"].get<std::string>();
  c.sr = full["sr"].get<std::size_t>();
  c.seeds = full["seeds"].get<std::size_t>();
  c.data_dir = full["data_dir"].get<std::string>();
  c.synthetic = full["synthetic"].get<std::size_t>();
  c.held_out = full["held_out"].get<std::size_t>();
  c.batch = full["batch"].get<std::size_t>();
  c.arch = full["arch"].get<std::string>();
  c.enc_depth = full["enc_depth"].get<std::size_t>();
  c.dec_depth = full["dec_depth"].get<std::size_t>();
  c.heads = full["heads"].get<std::size_t>();
  c.head_dim = full["head_dim"].get<std::size_t>();
  c.ff_dim = full["ff_dim"].get<std::size_t>();
  c.patch = full["patch"].get<std::size_t>();
  return c;
}

ExperimentConfig load_config_file(const ExperimentConfig& base, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: " + path.string() + ": " + e.what());
  }
  if (j.contains("experiment") && j["experiment"] != base.experiment) {
    throw std::invalid_argument("config: file is for experiment " + j["experiment"].dump() + ", running " +
                                base.experiment);
  }
  return merge(base, j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("out");
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path output_root(const ExperimentConfig& cfg) {
  if (!cfg.out.empty()) return cfg.out;
  if (const char* env = std::getenv("ANRLAB_OUT"); env && *env) return env;
  return "results";
}

}  // namespace anrlab
