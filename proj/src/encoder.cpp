#include "ifm/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ifm {

namespace {
constexpr char kMagic[7] = {'I', 'F', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

Encoder Encoder::make_mlp(const std::vector<int>& dims, SeededRng& rng) {
  if (dims.size() < 2)
    throw std::invalid_argument("make_mlp: need at least input and output dims");
  Encoder enc;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const int in = dims[k];
    const int out = dims[k + 1];
    if (in < 1 || out < 1)
      throw std::invalid_argument("make_mlp: dims must be positive");
    Layer layer;
    layer.act = (k + 2 == dims.size()) ? Activation::identity : Activation::relu;
    const double scale = (layer.act == Activation::relu)
                             ? std::sqrt(2.0 / in)
                             : std::sqrt(1.0 / in);
    layer.weights = Matrix(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weights(r, c) = scale * rng.normal();
    layer.bias = Vector::Zero(out);
    enc.layers.push_back(std::move(layer));
  }
  return enc;
}

ForwardTape forward(const Encoder& enc, const Vector& x) {
  if (enc.layers.empty()) throw std::invalid_argument("forward: empty encoder");
  if (x.size() != enc.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");

  ForwardTape tape;
  tape.input = x;
  Vector h = x;
  for (const auto& layer : enc.layers) {
    Vector z = layer.weights * h + layer.bias;
    tape.pre.push_back(z);
    if (layer.act == Activation::relu) z = z.cwiseMax(0.0);
    tape.post.push_back(z);
    h = z;
  }
  const double n = norm(h);
  if (n == 0.0)
    throw std::domain_error("forward: zero pre-normalization output");
  tape.prenorm_norm = n;
  tape.embedding = h / n;
  return tape;
}

ParamGrads ParamGrads::zeros_like(const Encoder& enc) {
  ParamGrads g;
  for (const auto& layer : enc.layers) {
    g.d_weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    g.d_bias.push_back(Vector::Zero(layer.bias.size()));
  }
  g.d_input = Vector::Zero(enc.input_dim());
  return g;
}

void ParamGrads::accumulate(const ParamGrads& other) {
  for (std::size_t k = 0; k < d_weights.size(); ++k) {
    d_weights[k] += other.d_weights[k];
    d_bias[k] += other.d_bias[k];
  }
  d_input += other.d_input;
}

void ParamGrads::scale(double s) {
  for (std::size_t k = 0; k < d_weights.size(); ++k) {
    d_weights[k] *= s;
    d_bias[k] *= s;
  }
  d_input *= s;
}

ParamGrads backward(const Encoder& enc, const ForwardTape& tape,
                    const Vector& d_embedding) {
  const std::size_t L = enc.layers.size();
  if (tape.pre.size() != L || tape.post.size() != L ||
      tape.input.size() != enc.input_dim() ||
      tape.embedding.size() != enc.output_dim())
    throw std::invalid_argument("backward: tape does not match encoder");
  for (std::size_t k = 0; k < L; ++k)
    if (tape.pre[k].size() != enc.layers[k].weights.rows() ||
        tape.post[k].size() != enc.layers[k].weights.rows())
      throw std::invalid_argument("backward: stale tape (layer shape mismatch)");
  if (d_embedding.size() != enc.output_dim())
    throw std::invalid_argument("backward: d_embedding dimension mismatch");

  ParamGrads g;
  g.d_weights.resize(L);
  g.d_bias.resize(L);

  // Through u = z/|z|: dz = (d_u - u (u.d_u)) / |z|.
  const Vector& u = tape.embedding;
  Vector d = (d_embedding - u * dot(u, d_embedding)) / tape.prenorm_norm;

  for (std::size_t k = L; k-- > 0;) {
    const auto& layer = enc.layers[k];
    if (layer.act == Activation::relu) {
      for (Eigen::Index i = 0; i < d.size(); ++i)
        if (tape.pre[k][i] <= 0.0) d[i] = 0.0;
    }
    const Vector& in = (k == 0) ? tape.input : tape.post[k - 1];
    g.d_weights[k] = d * in.transpose();
    g.d_bias[k] = d;
    d = layer.weights.transpose() * d;
  }
  g.d_input = d;
  return g;
}

AdamState AdamState::init(const Encoder& enc, const AdamConfig& cfg) {
  AdamState s;
  s.cfg = cfg;
  for (const auto& layer : enc.layers) {
    s.m_weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    s.v_weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    s.m_bias.push_back(Vector::Zero(layer.bias.size()));
    s.v_bias.push_back(Vector::Zero(layer.bias.size()));
  }
  return s;
}

void adam_step(AdamState& state, Encoder& enc, const ParamGrads& grads) {
  if (state.m_weights.size() != enc.layers.size() ||
      grads.d_weights.size() != enc.layers.size())
    throw std::invalid_argument("adam_step: shape mismatch");

  const AdamConfig& c = state.cfg;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - c.lr * c.weight_decay;

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    param.array() = decay * param.array() -
                    c.lr * (m.array() / bc1) /
                        ((v.array() / bc2).sqrt() + c.eps_hat);
  };

  for (std::size_t k = 0; k < enc.layers.size(); ++k) {
    update(enc.layers[k].weights, state.m_weights[k], state.v_weights[k],
           grads.d_weights[k]);
    update(enc.layers[k].bias, state.m_bias[k], state.v_bias[k], grads.d_bias[k]);
  }
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

void put_f64(std::string& out, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void raw(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw std::runtime_error("checkpoint: truncated stream");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  double f64() {
    double v;
    raw(&v, 8);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string save_checkpoint(const Encoder& enc) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(enc.layers.size()));
  for (const auto& layer : enc.layers) {
    put_u32(out, static_cast<std::uint32_t>(layer.weights.rows()));
    put_u32(out, static_cast<std::uint32_t>(layer.weights.cols()));
    out.push_back(layer.act == Activation::relu ? 1 : 0);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
        put_f64(out, layer.weights(r, c));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
      put_f64(out, layer.bias[i]);
  }
  return out;
}

Encoder load_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  char magic[sizeof(kMagic)];
  in.raw(magic, sizeof(kMagic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic tag");
  const std::uint32_t version = in.u32();
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version) + ", expected " +
                             std::to_string(kVersion));
  const std::uint32_t n_layers = in.u32();
  if (n_layers == 0 || n_layers > 1024)
    throw std::runtime_error("checkpoint: implausible layer count");
  Encoder enc;
  for (std::uint32_t k = 0; k < n_layers; ++k) {
    const std::uint32_t rows = in.u32();
    const std::uint32_t cols = in.u32();
    if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
      throw std::runtime_error("checkpoint: implausible layer shape");
    const std::uint8_t act = in.u8();
    if (act > 1) throw std::runtime_error("checkpoint: unknown activation code");
    Layer layer;
    layer.act = act == 1 ? Activation::relu : Activation::identity;
    layer.weights = Matrix(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) layer.weights(r, c) = in.f64();
    layer.bias = Vector(rows);
    for (std::uint32_t i = 0; i < rows; ++i) layer.bias[i] = in.f64();
    enc.layers.push_back(std::move(layer));
  }
  if (!in.done()) throw std::runtime_error("checkpoint: trailing bytes");
  for (std::size_t k = 1; k < enc.layers.size(); ++k)
    if (enc.layers[k].weights.cols() != enc.layers[k - 1].weights.rows())
      throw std::runtime_error("checkpoint: layer dimensions do not chain");
  return enc;
}

void save_checkpoint_file(const Encoder& enc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  const std::string bytes = save_checkpoint(enc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Encoder load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_checkpoint(ss.str());
}

}  // namespace ifm
