#include "medic/model.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "medic/errors.h"
#include "medic/ops.h"

namespace medic {

void ModelConfig::validate() const {
  if (input_dim < 1) throw ConfigError("model: input_dim must be >= 1");
  if (hidden_dims.empty()) throw ConfigError("model: hidden_dims must be non-empty");
  for (std::size_t h : hidden_dims) {
    if (h < 1) throw ConfigError("model: hidden layer width must be >= 1");
  }
  if (num_known < 2) throw ConfigError("model: num_known must be >= 2");
}

namespace segment {
std::string extractor_weight(std::size_t layer) {
  return "extractor." + std::to_string(layer) + ".weight";
}
std::string extractor_bias(std::size_t layer) {
  return "extractor." + std::to_string(layer) + ".bias";
}
}  // namespace segment

ParamVector zero_params(const ModelConfig& config) {
  config.validate();
  ParamVector p;
  std::size_t fan_in = config.input_dim;
  for (std::size_t i = 0; i < config.hidden_dims.size(); ++i) {
    const std::size_t width = config.hidden_dims[i];
    p.add_segment(segment::extractor_weight(i), Matrix(width, fan_in));
    p.add_segment(segment::extractor_bias(i), Matrix(width, 1));
    fan_in = width;
  }
  const std::size_t h = config.feature_dim();
  const std::size_t c = config.num_known;
  p.add_segment(segment::kCloseWeight, Matrix(c, h));
  p.add_segment(segment::kCloseBias, Matrix(c, 1));
  if (!config.share_params) {
    p.add_segment(segment::kBinaryPosWeight, Matrix(c, h));
    p.add_segment(segment::kBinaryPosBias, Matrix(c, 1));
  }
  p.add_segment(segment::kBinaryNegWeight, Matrix(c, h));
  p.add_segment(segment::kBinaryNegBias, Matrix(c, 1));
  return p;
}

MedicNet init_model(const ModelConfig& config) {
  MedicNet net{config, zero_params(config)};
  std::mt19937_64 rng(config.init_seed);
  ParamVector& p = net.params;
  auto glorot = [&](Matrix& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : w.data()) v = dist(rng);
  };
  for (std::size_t i = 0; i < config.hidden_dims.size(); ++i) {
    glorot(p.at(segment::extractor_weight(i)));
  }
  glorot(p.at(segment::kCloseWeight));
  if (!config.share_params) glorot(p.at(segment::kBinaryPosWeight));
  glorot(p.at(segment::kBinaryNegWeight));
  return net;
}

namespace {

void require_input(const MedicNet& net, const Matrix& x) {
  if (x.cols() != net.config.input_dim) {
    throw DimensionError("forward: input has " + std::to_string(x.cols()) +
                         " features, model expects " +
                         std::to_string(net.config.input_dim));
  }
}

const Matrix& pos_weight(const MedicNet& net) {
  return net.params.at(net.config.share_params ? segment::kCloseWeight
                                               : segment::kBinaryPosWeight);
}
const Matrix& pos_bias(const MedicNet& net) {
  return net.params.at(net.config.share_params ? segment::kCloseBias
                                               : segment::kBinaryPosBias);
}

}  // namespace

ForwardCache forward(const MedicNet& net, const Matrix& x) {
  require_input(net, x);
  const ParamVector& p = net.params;
  ForwardCache cache;
  const std::size_t layers = net.config.hidden_dims.size();
  cache.layer_inputs.reserve(layers);
  cache.pre_activations.reserve(layers);

  Matrix h = x;
  for (std::size_t i = 0; i < layers; ++i) {
    Matrix pre = affine(h, p.at(segment::extractor_weight(i)),
                        p.at(segment::extractor_bias(i)));
    require_finite(pre, "affine " + segment::extractor_weight(i));
    cache.layer_inputs.push_back(std::move(h));
    h = relu(pre);
    cache.pre_activations.push_back(std::move(pre));
  }
  cache.features = std::move(h);

  cache.close_logits = affine(cache.features, p.at(segment::kCloseWeight),
                              p.at(segment::kCloseBias));
  require_finite(cache.close_logits, "affine close_head");
  if (net.config.share_params) {
    cache.pos_logits = cache.close_logits;
  } else {
    cache.pos_logits = affine(cache.features, pos_weight(net), pos_bias(net));
    require_finite(cache.pos_logits, "affine binary_pos");
  }
  cache.neg_logits = affine(cache.features, p.at(segment::kBinaryNegWeight),
                            p.at(segment::kBinaryNegBias));
  require_finite(cache.neg_logits, "affine binary_neg");
  return cache;
}

Matrix forward_close(const MedicNet& net, const Matrix& x) {
  return forward(net, x).close_logits;
}

BinaryProbs binary_probs_from_logits(const Matrix& pos_logits,
                                     const Matrix& neg_logits) {
  require_shape(neg_logits, pos_logits.rows(), pos_logits.cols(),
                "binary_probs negative logits");
  Matrix probs(pos_logits.rows(), pos_logits.cols());
  auto pos = pos_logits.data();
  auto neg = neg_logits.data();
  auto out = probs.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = std::max(pos[i], neg[i]);
    const double ep = std::exp(pos[i] - m);
    const double en = std::exp(neg[i] - m);
    out[i] = ep / (ep + en);
  }
  return {std::move(probs)};
}

BinaryProbs forward_binary(const MedicNet& net, const Matrix& x) {
  ForwardCache cache = forward(net, x);
  return binary_probs_from_logits(cache.pos_logits, cache.neg_logits);
}

GradVector backward(const MedicNet& net, const ForwardCache& cache,
                    const Matrix& d_close, const Matrix& d_pos,
                    const Matrix& d_neg) {
  const ParamVector& p = net.params;
  const std::size_t batch = cache.features.rows();
  const std::size_t c = net.config.num_known;
  require_shape(d_close, batch, c, "backward d_close");
  require_shape(d_pos, batch, c, "backward d_pos");
  require_shape(d_neg, batch, c, "backward d_neg");

  GradVector grad = GradVector::zeros_like(p);

  // With sharing, the close head also produces the positive logits, so both
  // upstream gradients flow into the same rows.
  Matrix d_close_total = d_close;
  if (net.config.share_params) {
    auto dst = d_close_total.data();
    auto src = d_pos.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  AffineGrad close = affine_backward(cache.features, p.at(segment::kCloseWeight),
                                     d_close_total);
  grad.at(segment::kCloseWeight) = std::move(close.d_weight);
  grad.at(segment::kCloseBias) = std::move(close.d_bias);
  Matrix d_features = std::move(close.d_input);

  auto accumulate = [](Matrix& dst, const Matrix& src) {
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  };

  if (!net.config.share_params) {
    AffineGrad pos = affine_backward(cache.features, pos_weight(net), d_pos);
    grad.at(segment::kBinaryPosWeight) = std::move(pos.d_weight);
    grad.at(segment::kBinaryPosBias) = std::move(pos.d_bias);
    accumulate(d_features, pos.d_input);
  }

  AffineGrad neg = affine_backward(cache.features, p.at(segment::kBinaryNegWeight), d_neg);
  grad.at(segment::kBinaryNegWeight) = std::move(neg.d_weight);
  grad.at(segment::kBinaryNegBias) = std::move(neg.d_bias);
  accumulate(d_features, neg.d_input);

  Matrix upstream = std::move(d_features);
  for (std::size_t i = net.config.hidden_dims.size(); i-- > 0;) {
    Matrix d_pre = relu_backward(cache.pre_activations[i], upstream);
    AffineGrad layer = affine_backward(cache.layer_inputs[i],
                                       p.at(segment::extractor_weight(i)), d_pre);
    grad.at(segment::extractor_weight(i)) = std::move(layer.d_weight);
    grad.at(segment::extractor_bias(i)) = std::move(layer.d_bias);
    upstream = std::move(layer.d_input);
  }
  return grad;
}

namespace {

constexpr const char* kMagic = "medic-checkpoint";
constexpr int kFormatVersion = 1;

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_double(const std::string& token) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw ParseError("checkpoint: bad number '" + token + "'", 0);
  }
  return v;
}

template <class T>
T expect_field(std::istream& in, const std::string& key) {
  std::string name;
  T value{};
  if (!(in >> name) || name != key || !(in >> value)) {
    throw ParseError("checkpoint: expected field '" + key + "'", 0);
  }
  return value;
}

}  // namespace

void write_checkpoint(const MedicNet& net, std::ostream& out) {
  const ModelConfig& cfg = net.config;
  out << kMagic << " " << kFormatVersion << "\n";
  out << "input_dim " << cfg.input_dim << "\n";
  out << "hidden_dims " << cfg.hidden_dims.size();
  for (std::size_t h : cfg.hidden_dims) out << " " << h;
  out << "\n";
  out << "num_known " << cfg.num_known << "\n";
  out << "share_params " << (cfg.share_params ? 1 : 0) << "\n";
  out << "init_seed " << cfg.init_seed << "\n";
  out << "segments " << net.params.segments().size() << "\n";
  for (const Segment& s : net.params.segments()) {
    out << "segment " << s.name << " " << s.values.rows() << " "
        << s.values.cols() << "\n";
    for (std::size_t r = 0; r < s.values.rows(); ++r) {
      auto row = s.values.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out << ' ';
        out << hex_double(row[c]);
      }
      out << "\n";
    }
  }
}

MedicNet read_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) {
    throw ParseError("checkpoint: missing header", 1);
  }
  if (version != kFormatVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version), 1);
  }
  ModelConfig cfg;
  cfg.input_dim = expect_field<std::size_t>(in, "input_dim");
  const auto layers = expect_field<std::size_t>(in, "hidden_dims");
  cfg.hidden_dims.resize(layers);
  for (auto& h : cfg.hidden_dims) {
    if (!(in >> h)) throw ParseError("checkpoint: truncated hidden_dims", 0);
  }
  cfg.num_known = expect_field<std::size_t>(in, "num_known");
  cfg.share_params = expect_field<int>(in, "share_params") != 0;
  cfg.init_seed = expect_field<std::uint64_t>(in, "init_seed");
  cfg.validate();

  ParamVector expected = zero_params(cfg);
  const auto count = expect_field<std::size_t>(in, "segments");
  if (count != expected.segments().size()) {
    throw ParseError("checkpoint: segment count does not match config", 0);
  }
  MedicNet net{cfg, {}};
  for (const Segment& want : expected.segments()) {
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> tag >> name >> rows >> cols) || tag != "segment") {
      throw ParseError("checkpoint: malformed segment header", 0);
    }
    if (name != want.name || rows != want.values.rows() || cols != want.values.cols()) {
      throw ParseError("checkpoint: segment " + name + " does not match config", 0);
    }
    std::vector<double> values(rows * cols);
    std::string token;
    for (double& v : values) {
      if (!(in >> token)) throw ParseError("checkpoint: truncated segment " + name, 0);
      v = parse_double(token);
    }
    net.params.add_segment(name, Matrix(rows, cols, std::move(values)));
  }
  return net;
}

void save_checkpoint(const MedicNet& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_checkpoint(net, out);
  if (!out) throw Error("write failed: " + path.string());
}

MedicNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace medic
