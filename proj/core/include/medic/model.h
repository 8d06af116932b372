#ifndef MEDIC_MODEL_H_
#define MEDIC_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "medic/matrix.h"
#include "medic/param_vector.h"

namespace medic {

struct ModelConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  // |C|, the number of known classes.
  std::size_t num_known = 0;
  // Reuse close-head row k as the positive channel of sub-classifier k.
  bool share_params = false;
  std::uint64_t init_seed = 0;

  void validate() const;
  std::size_t feature_dim() const { return hidden_dims.back(); }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Segment names used in MedicNet::params.
namespace segment {
std::string extractor_weight(std::size_t layer);
std::string extractor_bias(std::size_t layer);
inline constexpr const char* kCloseWeight = "close_head.weight";
inline constexpr const char* kCloseBias = "close_head.bias";
// Absent when share_params is set; the close head supplies these rows.
inline constexpr const char* kBinaryPosWeight = "binary_pos.weight";
inline constexpr const char* kBinaryPosBias = "binary_pos.bias";
inline constexpr const char* kBinaryNegWeight = "binary_neg.weight";
inline constexpr const char* kBinaryNegBias = "binary_neg.bias";
}  // namespace segment

// Feature extractor (affine + ReLU per hidden layer) feeding a close-set head
// with |C| logits and |C| one-vs-all sub-classifiers, each a (positive,
// negative) logit pair.
struct MedicNet {
  ModelConfig config;
  ParamVector params;
};

// Entry (b, k) is the positive-channel probability of sub-classifier k.
struct BinaryProbs {
  Matrix values;
};

// Glorot-uniform weights, zero biases, deterministic in config.init_seed.
MedicNet init_model(const ModelConfig& config);

// Parameter layout of a net built from `config`, all zeros.
ParamVector zero_params(const ModelConfig& config);

// Intermediate values kept for the reverse pass.
struct ForwardCache {
  std::vector<Matrix> layer_inputs;  // layer_inputs[0] is the batch itself
  std::vector<Matrix> pre_activations;
  Matrix features;
  Matrix close_logits;
  Matrix pos_logits;
  Matrix neg_logits;
};

ForwardCache forward(const MedicNet& net, const Matrix& x);

Matrix forward_close(const MedicNet& net, const Matrix& x);
BinaryProbs forward_binary(const MedicNet& net, const Matrix& x);

// Positive component of a 2-way softmax over (positive, negative) logits.
BinaryProbs binary_probs_from_logits(const Matrix& pos_logits, const Matrix& neg_logits);

// Reverse pass through the fixed layer sequence given loss gradients with
// respect to the three logit blocks (each B x |C|).
GradVector backward(const MedicNet& net, const ForwardCache& cache,
                    const Matrix& d_close, const Matrix& d_pos,
                    const Matrix& d_neg);

// Text checkpoint; doubles are written as hex floats so the round trip is
// bit-exact.
void write_checkpoint(const MedicNet& net, std::ostream& out);
MedicNet read_checkpoint(std::istream& in);
void save_checkpoint(const MedicNet& net, const std::filesystem::path& path);
MedicNet load_checkpoint(const std::filesystem::path& path);

}  // namespace medic

#endif  // MEDIC_MODEL_H_
