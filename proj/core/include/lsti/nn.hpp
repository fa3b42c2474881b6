#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "lsti/autodiff.hpp"

namespace lsti {

/// Owns parameters in registration order; that order is the checkpoint
/// payload order.
class ParameterSet {
 public:
  Parameter& add(std::string name, std::size_t rows, std::size_t cols);
  Parameter& get(std::string_view name);
  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
  std::size_t scalar_count() const;

  void zero_grad();
  std::vector<double> flatten() const;
  /// Throws DimensionError when the length differs from scalar_count().
  void assign(std::span<const double> values);
  /// name -> [rows, cols], in order.
  nlohmann::json shapes() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

/// Uniform in ±sqrt(6/(fan_in+fan_out)) for weights; biases and LayerNorm
/// beta zero, gamma one. Parameters are classified by name suffix.
void glorot_init(ParameterSet& params, std::uint64_t seed);

struct Linear {
  Parameter* w = nullptr;  // in × out
  Parameter* b = nullptr;  // 1 × out

  static Linear make(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out);
  Var operator()(Tape& t, Var x) const;
};

struct LayerNorm {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;

  static LayerNorm make(ParameterSet& ps, const std::string& name, std::size_t width);
  Var operator()(Tape& t, Var x) const;
};

/// softmax(Q_h K_hᵀ / sqrt(d_h)) V_h per head, heads concatenated. No
/// projections. Throws DimensionError when the width is not divisible by
/// `heads`.
Var scaled_dot_product_attention(Var q, Var k, Var v, std::size_t heads);

struct MultiHeadAttention {
  Linear q, k, v, o;
  std::size_t heads = 1;

  static MultiHeadAttention make(ParameterSet& ps, const std::string& name, std::size_t d_model,
                                 std::size_t heads);
  Var operator()(Tape& t, Var query, Var memory) const;
};

struct FeedForward {
  Linear up, down;

  static FeedForward make(ParameterSet& ps, const std::string& name, std::size_t d_model,
                          std::size_t width);
  Var operator()(Tape& t, Var x) const;
};

/// Row i = sinusoidal encoding of position i.
Matrix sinusoidal_positions(std::size_t rows, std::size_t d_model);

struct EncoderDecoderConfig {
  std::size_t input_dim = 0;
  /// 0 selects a single learned query token instead of an input query.
  std::size_t query_dim = 0;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t ffn = 128;
  std::size_t max_len = 128;

  nlohmann::json to_json() const;
  static EncoderDecoderConfig from_json(const nlohmann::json& j);
};

/// One encoder layer (self-attention, feed-forward) and one decoder layer
/// (self-attention, cross-attention, feed-forward); post-norm residuals.
class EncoderDecoder {
 public:
  EncoderDecoder(ParameterSet& ps, const EncoderDecoderConfig& config, const std::string& prefix);

  const EncoderDecoderConfig& config() const { return config_; }
  /// input: n × input_dim; query: m × query_dim (ignored for a learned
  /// query). Returns m × d_model (1 × d_model for a learned query).
  Var forward(Tape& t, const Matrix& input, const Matrix& query) const;

 private:
  EncoderDecoderConfig config_;
  Matrix positions_;
  Linear in_proj_;
  Linear query_proj_;
  Parameter* learned_query_ = nullptr;
  MultiHeadAttention enc_self_;
  LayerNorm enc_norm1_, enc_norm2_;
  FeedForward enc_ffn_;
  MultiHeadAttention dec_self_, dec_cross_;
  LayerNorm dec_norm1_, dec_norm2_, dec_norm3_;
  FeedForward dec_ffn_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction.
class Adam {
 public:
  Adam(ParameterSet& params, AdamConfig config = {});

  /// Applies one update from the accumulated gradients. Throws TrainingError
  /// naming the parameter on a non-finite gradient, before touching any
  /// value.
  void step();
  std::int64_t steps() const { return t_; }

 private:
  ParameterSet* params_;
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// Compares backward() against central differences for every scalar of
/// every parameter. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult check_gradients(ParameterSet& params, const std::function<Var(Tape&)>& loss,
                                double h = 1e-5, double floor = 1e-5);

/// JSON header line, '\n', then the payload as little-endian float64.
std::string encode_checkpoint(const nlohmann::json& header, std::span<const double> payload);

struct DecodedCheckpoint {
  nlohmann::json header;
  std::vector<double> payload;
};

/// Throws FormatError on a malformed header or a payload whose length does
/// not match header["scalars"].
DecodedCheckpoint decode_checkpoint(std::string_view bytes);

}  // namespace lsti
