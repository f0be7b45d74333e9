#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "anrlab/bundle.hpp"
#include "anrlab/config.hpp"
#include "anrlab/experiments.hpp"
#include "anrlab/image_io.hpp"
#include "anrlab/synthetic.hpp"

using namespace anrlab;
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> bytes_of(const std::string& header, std::initializer_list<unsigned char> payload) {
  std::vector<unsigned char> b(header.begin(), header.end());
  b.insert(b.end(), payload);
  return b;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("anrlab_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig quick_fit1d(const fs::path& out) {
  auto cfg = ExperimentConfig::defaults_for("fit1d");
  cfg.steps = 5;
  cfg.width = 16;
  cfg.depth = 2;
  cfg.pe_features = 16;
  cfg.out = out.string();
  return cfg;
}

}  // namespace

TEST_CASE("decode a 2x2 grayscale image") {
  const auto img = decode_pnm(bytes_of("P5\n# card\n2 2\n255\n", {0, 255, 128, 64}));
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  CHECK(img.channels == 1);
  CHECK(img.values == std::vector<double>{0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0});
  CHECK(img.to_tensor().shape == anr::Shape{2, 2, 1});
}

TEST_CASE("decode a single red pixel") {
  const auto img = decode_pnm(bytes_of("P6 1 1 255\n", {255, 0, 0}));
  CHECK(img.channels == 3);
  CHECK(img.at(0, 0, 0) == 1.0);
  CHECK(img.at(0, 0, 1) == 0.0);
  CHECK(img.at(0, 0, 2) == 0.0);
}

TEST_CASE("encode and decode round trip") {
  const auto img = synthetic_image(5, 7, 3);
  const auto back = decode_pnm(encode_pnm(img));
  REQUIRE(back.values.size() == img.values.size());
  for (std::size_t i = 0; i < img.values.size(); ++i) CHECK(std::abs(back.values[i] - img.values[i]) <= 0.5 / 255.0);
  const auto deep = decode_pnm(encode_pnm(img, 65535));
  for (std::size_t i = 0; i < img.values.size(); ++i) CHECK(std::abs(deep.values[i] - img.values[i]) <= 0.5 / 65535.0);

  const auto sixteen = decode_pnm(bytes_of("P5 1 1 65535\n", {0x80, 0x00}));
  CHECK(sixteen.values[0] == 32768.0 / 65535.0);
}

TEST_CASE("parse errors carry the byte offset") {
  auto fails_at = [](const std::vector<unsigned char>& b, std::size_t offset) {
    try {
      decode_pnm(b);
      return false;
    } catch (const ImageParseError& e) {
      return e.offset == offset && std::string(e.what()).find("at byte") != std::string::npos;
    }
  };
  CHECK(fails_at(bytes_of("P3 1 1 255\n", {1, 2, 3}), 0));
  CHECK(fails_at(bytes_of("P5 2 2 255\n", {1, 2, 3}), 14));
  CHECK_THROWS_AS(decode_pnm(bytes_of("P5 0 2 255\n", {})), ImageParseError);
  CHECK_THROWS_AS(decode_pnm(bytes_of("P5 1 1 1023\n", {0, 0})), ImageParseError);
  CHECK_THROWS_AS(load_image("/nonexistent/card.ppm"), std::runtime_error);
}

TEST_CASE("image buffers from model outputs are clamped") {
  anr::Tensor rows(anr::Shape{4, 3}, 1.5);
  rows.data[0] = -0.2;
  const auto img = ImageBuffer::from_rows(rows, 2, 2);
  CHECK(img.width == 2);
  CHECK(img.values[0] == 0.0);
  CHECK(img.values[1] == 1.0);
}

TEST_CASE("config precedence and strict merging") {
  const auto base = ExperimentConfig::defaults_for("fit-image");
  CHECK(base.steps == 2000);
  const auto file = merge(base, {{"steps", 50}, {"lr", 0.01}});
  const auto flags = merge(file, {{"steps", 7}});
  CHECK(flags.steps == 7);
  CHECK(flags.lr == 0.01);
  CHECK(flags.pe_sigma == base.pe_sigma);
  CHECK_THROWS_AS(merge(base, {{"stpes", 1}}), std::invalid_argument);
  CHECK_THROWS_AS(merge(base, {{"steps", "many"}}), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::defaults_for("fit3d"), std::invalid_argument);

  const fs::path dir = scratch_dir("config");
  std::ofstream(dir / "cfg.json") << R"({"experiment": "fit-image", "seed": 4})";
  CHECK(load_config_file(base, dir / "cfg.json").seed == 4);
  std::ofstream(dir / "other.json") << R"({"experiment": "fit1d"})";
  CHECK_THROWS_AS(load_config_file(base, dir / "other.json"), std::invalid_argument);
}

TEST_CASE("config validation") {
  auto cfg = ExperimentConfig::defaults_for("fit-image");
  cfg.tokens = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ExperimentConfig::defaults_for("fit1d");
  cfg.max_bin = 60;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ExperimentConfig::defaults_for("fit1d");
  cfg.sampler = "jitter";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  for (const char* name : {"fit1d", "fit-image", "ablate-threshold", "hypernet-demo", "gradcheck", "continuity"})
    CHECK_NOTHROW(ExperimentConfig::defaults_for(name).validate());
}

TEST_CASE("config hash ignores the output root") {
  auto a = ExperimentConfig::defaults_for("fit1d");
  auto b = a;
  b.out = "/elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("output root falls back to the environment") {
  ExperimentConfig cfg;
  ::setenv("ANRLAB_OUT", "/tmp/from_env", 1);
  CHECK(output_root(cfg) == fs::path("/tmp/from_env"));
  cfg.out = "/tmp/from_flag";
  CHECK(output_root(cfg) == fs::path("/tmp/from_flag"));
  ::unsetenv("ANRLAB_OUT");
  cfg.out.clear();
  CHECK(output_root(cfg) == fs::path("results"));
}

TEST_CASE("bundle layout") {
  const fs::path root = scratch_dir("bundle");
  const auto outcome = run_experiment(quick_fit1d(root));
  const fs::path dir = root / "fit1d-0";
  CHECK(outcome.bundle == dir);
  for (const char* f : {"config.json", "metrics.csv", "spectrum.csv", "summary.json", "reconstruction.csv"})
    CHECK(fs::exists(dir / f));
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["format_version"] == kBundleFormat);
  CHECK(summary["experiment"] == "fit1d");
  const auto config = nlohmann::json::parse(slurp(dir / "config.json"));
  CHECK(config["config_hash"] == summary["config_hash"]);
  const std::string metrics = slurp(dir / "metrics.csv");
  CHECK(metrics.rfind("run,step,loss,psnr\n", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 1 + 2 * 5);
}

TEST_CASE("runs are bit-reproducible") {
  const fs::path a = scratch_dir("repro_a"), b = scratch_dir("repro_b");
  auto cfg = quick_fit1d(a);
  cfg.sampler = "variational";
  run_experiment(cfg);
  cfg.out = b.string();
  run_experiment(cfg);
  CHECK(slurp(a / "fit1d-0" / "metrics.csv") == slurp(b / "fit1d-0" / "metrics.csv"));
  CHECK(slurp(a / "fit1d-0" / "summary.json").size() > 0);
}

TEST_CASE("super-resolved output has the requested size") {
  const fs::path root = scratch_dir("sr");
  auto cfg = ExperimentConfig::defaults_for("fit-image");
  cfg.steps = 2;
  cfg.size = 8;
  cfg.sr = 3;
  cfg.model = "anr";
  cfg.tokens = 8;
  cfg.token_dim = 8;
  cfg.width = 16;
  cfg.depth = 1;
  cfg.out = root.string();
  run_experiment(cfg);
  const auto img = load_image(root / "fit-image-0" / "sr3_anr.ppm");
  CHECK(img.width == 24);
  CHECK(img.height == 24);
}

TEST_CASE("command line entry point") {
  const fs::path root = scratch_dir("cli");
  const std::string bin = ANRLAB_BIN;
  const std::string base = bin + " fit1d --steps 3 --width 16 --depth 2 --pe-features 16 --out " + root.string();
  CHECK(std::system((base + " > /dev/null").c_str()) != -1);
  CHECK(fs::exists(root / "fit1d-0" / "summary.json"));
  const int bad = std::system((bin + " fit1d --tokens 0 --out " + root.string() + " > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(bad) == 2);
  const int unknown = std::system((bin + " fit1d --bogus > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(unknown) != 0);
}
