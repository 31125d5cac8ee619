#pragma once

#include "ifm/numerics.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ifm {

enum class Activation { relu, identity };

struct Layer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation act = Activation::relu;
};

/// Feed-forward encoder whose output is l2-normalized onto the unit sphere.
struct Encoder {
  std::vector<Layer> layers;

  int input_dim() const { return static_cast<int>(layers.front().weights.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().weights.rows()); }

  /// MLP with ReLU hidden layers and an identity output layer; He-style
  /// initialization drawn deterministically from rng.
  static Encoder make_mlp(const std::vector<int>& dims, SeededRng& rng);
};

/// Cached activations from one forward pass, sufficient for an exact backward.
struct ForwardTape {
  Vector input;
  std::vector<Vector> pre;   // pre-activation per layer
  std::vector<Vector> post;  // post-activation per layer
  double prenorm_norm = 0.0;
  Vector embedding;
};

struct ParamGrads {
  std::vector<Matrix> d_weights;
  std::vector<Vector> d_bias;
  Vector d_input;

  static ParamGrads zeros_like(const Encoder& enc);
  void accumulate(const ParamGrads& other);
  void scale(double s);
};

/// Embedding (unit norm within 1e-12) plus the tape. A zero pre-normalization
/// output is a degenerate-input error.
ForwardTape forward(const Encoder& enc, const Vector& x);

/// Backpropagates d_embedding through the normalization Jacobian
/// (I - uu^T)/|z| and the layers. The tape must come from a matching forward.
ParamGrads backward(const Encoder& enc, const ForwardTape& tape,
                    const Vector& d_embedding);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
  double weight_decay = 1e-6;
};

/// Per-parameter moment accumulators mirroring the encoder layout.
struct AdamState {
  AdamConfig cfg;
  long step = 0;
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_bias, v_bias;

  static AdamState init(const Encoder& enc, const AdamConfig& cfg);
};

/// One Adam update with bias correction; decoupled weight decay is applied
/// multiplicatively before the moment step.
void adam_step(AdamState& state, Encoder& enc, const ParamGrads& grads);

// Checkpoints: magic "IFMCKPT", u32 version, u32 layer count, then per layer
// u32 rows, u32 cols, u8 activation, row-major weight doubles, bias doubles.
// Little-endian throughout. Round-trips are bit-exact.
std::string save_checkpoint(const Encoder& enc);
Encoder load_checkpoint(const std::string& bytes);
void save_checkpoint_file(const Encoder& enc, const std::string& path);
Encoder load_checkpoint_file(const std::string& path);

}  // namespace ifm
