#include "anr/hypernet.hpp"

#include <stdexcept>

namespace anr::hyper {

HyperNetConfig HyperNetConfig::full_scale() {
  HyperNetConfig c;
  c.enc_depth = 6;
  c.dec_depth = 6;
  c.heads = 6;
  c.head_dim = 64;
  c.ff_dim = 3072;
  return c;
}

std::size_t HyperNetConfig::data_tokens() const {
  return (image_height / patch_size) * (image_width / patch_size);
}

void HyperNetConfig::validate() const {
  if (patch_size == 0 || image_height % patch_size != 0 || image_width % patch_size != 0) {
    throw std::invalid_argument("HyperNetConfig: image " + std::to_string(image_height) + "x" +
                                std::to_string(image_width) + " not divisible by patch size " +
                                std::to_string(patch_size));
  }
  if (heads == 0 || head_dim == 0 || ff_dim == 0 || rtokens == 0 || token_dim == 0 || channels == 0) {
    throw std::invalid_argument("HyperNetConfig: sizes must be >= 1");
  }
  if (enc_depth == 0 && arch == attention::HyperArch::encoder_only) {
    throw std::invalid_argument("HyperNetConfig: encoder-only architecture needs enc_depth >= 1");
  }
}

LayerNormParams::LayerNormParams(std::size_t width) : gain(Shape{width}, 1.0), bias(Shape{width}, 0.0) {}

void LayerNormParams::append_parameters(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".gain", &gain});
  out.push_back({prefix + ".bias", &bias});
}

Var layernorm_forward(LayerNormParams& ln, Var x) {
  Tape& t = x.tape();
  return nn::layernorm(x, t.leaf(ln.gain), t.leaf(ln.bias));
}

FeedForward::FeedForward(std::size_t width, std::size_t ff_dim, Prng& rng) : up(width, ff_dim), down(ff_dim, width) {
  nn::default_init(up, rng);
  nn::default_init(down, rng);
}

void FeedForward::append_parameters(ParamList& out, const std::string& prefix) {
  up.append_parameters(out, prefix + ".up");
  down.append_parameters(out, prefix + ".down");
}

namespace {

Var feed_forward(FeedForward& ff, Var x) {
  return nn::linear_forward(ff.down, ops::relu(nn::linear_forward(ff.up, x)));
}

}  // namespace

EncoderBlock::EncoderBlock(const HyperNetConfig& cfg, Prng& rng)
    : ln1(cfg.width()), ln2(cfg.width()), attn(cfg.width(), cfg.heads, cfg.head_dim, rng),
      ff(cfg.width(), cfg.ff_dim, rng) {}

void EncoderBlock::append_parameters(ParamList& out, const std::string& prefix) {
  ln1.append_parameters(out, prefix + ".ln1");
  attn.append_parameters(out, prefix + ".attn");
  ln2.append_parameters(out, prefix + ".ln2");
  ff.append_parameters(out, prefix + ".ff");
}

DecoderBlock::DecoderBlock(const HyperNetConfig& cfg, Prng& rng)
    : ln1(cfg.width()), ln2(cfg.width()), ln3(cfg.width()),
      self_attn(cfg.width(), cfg.heads, cfg.head_dim, rng), cross_attn(cfg.width(), cfg.heads, cfg.head_dim, rng),
      ff(cfg.width(), cfg.ff_dim, rng) {}

void DecoderBlock::append_parameters(ParamList& out, const std::string& prefix) {
  ln1.append_parameters(out, prefix + ".ln1");
  self_attn.append_parameters(out, prefix + ".self_attn");
  ln2.append_parameters(out, prefix + ".ln2");
  cross_attn.append_parameters(out, prefix + ".cross_attn");
  ln3.append_parameters(out, prefix + ".ln3");
  ff.append_parameters(out, prefix + ".ff");
}

Var encoder_block_forward(EncoderBlock& b, Var x, attention::ScoreCounter* counter) {
  Var h = layernorm_forward(b.ln1, x);
  x = ops::add(x, attention::mha_forward(b.attn, h, h, h, counter));
  return ops::add(x, feed_forward(b.ff, layernorm_forward(b.ln2, x)));
}

Var decoder_block_forward(DecoderBlock& b, Var y, Var memory, attention::ScoreCounter* counter) {
  Var h = layernorm_forward(b.ln1, y);
  y = ops::add(y, attention::mha_forward(b.self_attn, h, h, h, counter));
  y = ops::add(y, attention::mha_forward(b.cross_attn, layernorm_forward(b.ln2, y), memory, memory, counter));
  return ops::add(y, feed_forward(b.ff, layernorm_forward(b.ln3, y)));
}

Tensor patchify(const Tensor& image, std::size_t p) {
  if (image.rank() != 3) throw DimensionError("patchify expects [h x w x c], got " + to_string(image.shape));
  const std::size_t h = image.shape[0], w = image.shape[1], c = image.shape[2];
  if (p == 0 || h % p != 0 || w % p != 0) {
    throw DimensionError("patchify: image " + to_string(image.shape) + " not divisible by patch " + std::to_string(p));
  }
  const std::size_t ph = h / p, pw = w / p, feat = p * p * c;
  Tensor out(Shape{ph * pw, feat});
  for (std::size_t by = 0; by < ph; ++by)
    for (std::size_t bx = 0; bx < pw; ++bx)
      for (std::size_t dy = 0; dy < p; ++dy)
        for (std::size_t dx = 0; dx < p; ++dx)
          for (std::size_t ch = 0; ch < c; ++ch)
            out.data[(by * pw + bx) * feat + (dy * p + dx) * c + ch] =
                image.data[((by * p + dy) * w + (bx * p + dx)) * c + ch];
  return out;
}

Tensor unpatchify(const Tensor& patches, std::size_t h, std::size_t w, std::size_t c, std::size_t p) {
  if (p == 0 || h % p != 0 || w % p != 0) throw DimensionError("unpatchify: extents not divisible by patch size");
  const std::size_t ph = h / p, pw = w / p, feat = p * p * c;
  if (patches.shape != Shape{ph * pw, feat}) throw DimensionError("unpatchify", patches.shape, Shape{ph * pw, feat});
  Tensor out(Shape{h, w, c});
  for (std::size_t by = 0; by < ph; ++by)
    for (std::size_t bx = 0; bx < pw; ++bx)
      for (std::size_t dy = 0; dy < p; ++dy)
        for (std::size_t dx = 0; dx < p; ++dx)
          for (std::size_t ch = 0; ch < c; ++ch)
            out.data[((by * p + dy) * w + (bx * p + dx)) * c + ch] =
                patches.data[(by * pw + bx) * feat + (dy * p + dx) * c + ch];
  return out;
}

HyperNet::HyperNet(const HyperNetConfig& cfg, Prng& rng)
    : config(cfg), patch_proj(cfg.patch_features(), cfg.width()), final_ln(cfg.width()),
      head(cfg.width(), cfg.token_dim) {
  config.validate();
  nn::default_init(patch_proj, rng);
  pos_embed = Tensor(Shape{config.data_tokens(), config.width()});
  queries = Tensor(Shape{config.rtokens, config.width()});
  for (double& v : pos_embed.data) v = 0.02 * rng.normal();
  for (double& v : queries.data) v = rng.normal();
  for (std::size_t i = 0; i < config.enc_depth; ++i) encoder.emplace_back(config, rng);
  if (config.arch == attention::HyperArch::encoder_decoder)
    for (std::size_t i = 0; i < config.dec_depth; ++i) decoder.emplace_back(config, rng);
  nn::default_init(head, rng);
}

void HyperNet::append_parameters(ParamList& out, const std::string& prefix) {
  patch_proj.append_parameters(out, prefix + ".patch_proj");
  out.push_back({prefix + ".pos_embed", &pos_embed});
  out.push_back({prefix + ".queries", &queries});
  for (std::size_t i = 0; i < encoder.size(); ++i) encoder[i].append_parameters(out, prefix + ".enc" + std::to_string(i));
  for (std::size_t i = 0; i < decoder.size(); ++i) decoder[i].append_parameters(out, prefix + ".dec" + std::to_string(i));
  final_ln.append_parameters(out, prefix + ".final_ln");
  head.append_parameters(out, prefix + ".head");
}

ParamList HyperNet::parameters() {
  ParamList out;
  append_parameters(out);
  return out;
}

Var tokenize(HyperNet& net, Var patches) {
  Tape& t = patches.tape();
  const Tensor& p = patches.value();
  if (p.rank() != 2 || p.rows() != net.config.data_tokens() || p.cols() != net.config.patch_features()) {
    throw DimensionError("tokenize", p.shape, Shape{net.config.data_tokens(), net.config.patch_features()});
  }
  return ops::add(nn::linear_forward(net.patch_proj, patches), t.leaf(net.pos_embed));
}

Var tokenize_image(HyperNet& net, Tape& tape, const Tensor& image) {
  const auto& c = net.config;
  if (image.shape != Shape{c.image_height, c.image_width, c.channels}) {
    throw DimensionError("hypernet image", image.shape, Shape{c.image_height, c.image_width, c.channels});
  }
  return tokenize(net, tape.constant(patchify(image, c.patch_size)));
}

Var hypernet_forward_patches(HyperNet& net, Var patches, attention::ScoreCounter* counter) {
  Tape& t = patches.tape();
  Var x = tokenize(net, patches);
  Var q = t.leaf(net.queries);
  Var out;
  if (net.config.arch == attention::HyperArch::encoder_only) {
    const std::size_t l_d = x.value().rows();
    const Var both[] = {x, q};
    Var h = ops::concat_rows(both);
    for (auto& b : net.encoder) h = encoder_block_forward(b, h, counter);
    out = ops::slice_rows(h, l_d, l_d + net.config.rtokens);
  } else {
    for (auto& b : net.encoder) x = encoder_block_forward(b, x, counter);
    for (auto& b : net.decoder) q = decoder_block_forward(b, q, x, counter);
    out = q;
  }
  return nn::linear_forward(net.head, layernorm_forward(net.final_ln, out));
}

Var hypernet_forward(HyperNet& net, Tape& tape, const Tensor& image, attention::ScoreCounter* counter) {
  const auto& c = net.config;
  if (image.shape != Shape{c.image_height, c.image_width, c.channels}) {
    throw DimensionError("hypernet image", image.shape, Shape{c.image_height, c.image_width, c.channels});
  }
  return hypernet_forward_patches(net, tape.constant(patchify(image, c.patch_size)), counter);
}

Var end_to_end_forward(HyperNet& net, repr::AnrModel& anr, Tape& tape, const Tensor& image, const Tensor& coords,
                       attention::ScoreCounter* counter) {
  if (net.config.token_dim != anr.token_dim()) {
    throw DimensionError("end_to_end_forward: hypernet token_dim vs ANR token_dim", Shape{net.config.token_dim},
                         Shape{anr.token_dim()});
  }
  Var tokens = hypernet_forward(net, tape, image, counter);
  return repr::anr_forward(anr, tokens, tape.constant(coords));
}

}  // namespace anr::hyper
