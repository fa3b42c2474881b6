#include "lsti/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>

#include "lsti/error.hpp"

namespace lsti {

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

// ---------------------------------------------------------- ParameterSet

Parameter& ParameterSet::add(std::string name, std::size_t rows, std::size_t cols) {
  for (const auto& p : params_) {
    if (p->name == name) throw ConfigError("duplicate parameter '" + name + "'");
  }
  params_.push_back(std::make_unique<Parameter>(std::move(name), rows, cols));
  return *params_.back();
}

Parameter& ParameterSet::get(std::string_view name) {
  for (const auto& p : params_) {
    if (p->name == name) return *p;
  }
  throw NotFoundError("no parameter '" + std::string(name) + "'");
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.data.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (const auto& p : params_) p->zero_grad();
}

std::vector<double> ParameterSet::flatten() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& p : params_) out.insert(out.end(), p->value.data.begin(), p->value.data.end());
  return out;
}

void ParameterSet::assign(std::span<const double> values) {
  if (values.size() != scalar_count()) {
    throw DimensionError("parameter payload has " + std::to_string(values.size()) +
                         " scalars, architecture needs " + std::to_string(scalar_count()));
  }
  auto it = values.begin();
  for (const auto& p : params_) {
    std::copy_n(it, p->value.data.size(), p->value.data.begin());
    it += static_cast<std::ptrdiff_t>(p->value.data.size());
  }
}

nlohmann::json ParameterSet::shapes() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : params_) out.push_back({p->name, p->value.rows, p->value.cols});
  return out;
}

void glorot_init(ParameterSet& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& p : params.all()) {
    auto& d = p->value.data;
    if (ends_with(p->name, ".b") || ends_with(p->name, ".beta")) {
      std::fill(d.begin(), d.end(), 0.0);
    } else if (ends_with(p->name, ".gamma")) {
      std::fill(d.begin(), d.end(), 1.0);
    } else {
      const double limit =
          std::sqrt(6.0 / static_cast<double>(p->value.rows + p->value.cols));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (double& x : d) x = u(rng);
    }
    p->zero_grad();
  }
}

// ---------------------------------------------------------------- layers

Linear Linear::make(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out) {
  return {&ps.add(name + ".w", in, out), &ps.add(name + ".b", 1, out)};
}

Var Linear::operator()(Tape& t, Var x) const { return add(matmul(x, t.param(*w)), t.param(*b)); }

LayerNorm LayerNorm::make(ParameterSet& ps, const std::string& name, std::size_t width) {
  return {&ps.add(name + ".gamma", 1, width), &ps.add(name + ".beta", 1, width)};
}

Var LayerNorm::operator()(Tape& t, Var x) const {
  return layer_norm(x, t.param(*gamma), t.param(*beta));
}

Var scaled_dot_product_attention(Var q, Var k, Var v, std::size_t heads) {
  const std::size_t d = q.cols();
  if (heads == 0 || d % heads != 0) {
    throw DimensionError("attention: width " + std::to_string(d) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) {
    throw DimensionError("attention: shape mismatch (" + std::to_string(q.rows()) + "x" +
                         std::to_string(d) + ") vs (" + std::to_string(k.rows()) + "x" +
                         std::to_string(k.cols()) + ")");
  }
  const std::size_t dh = d / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  if (heads == 1) return matmul(softmax_rows(scale(matmul_nt(q, k), inv)), v);
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Var qh = slice_cols(q, h * dh, dh);
    const Var kh = slice_cols(k, h * dh, dh);
    const Var vh = slice_cols(v, h * dh, dh);
    outs.push_back(matmul(softmax_rows(scale(matmul_nt(qh, kh), inv)), vh));
  }
  return concat_cols(outs);
}

MultiHeadAttention MultiHeadAttention::make(ParameterSet& ps, const std::string& name,
                                            std::size_t d_model, std::size_t heads) {
  if (heads == 0 || d_model % heads != 0) {
    throw DimensionError("attention: d_model " + std::to_string(d_model) +
                         " not divisible by " + std::to_string(heads) + " heads");
  }
  MultiHeadAttention m;
  m.q = Linear::make(ps, name + ".q", d_model, d_model);
  m.k = Linear::make(ps, name + ".k", d_model, d_model);
  m.v = Linear::make(ps, name + ".v", d_model, d_model);
  m.o = Linear::make(ps, name + ".o", d_model, d_model);
  m.heads = heads;
  return m;
}

Var MultiHeadAttention::operator()(Tape& t, Var query, Var memory) const {
  const Var a = scaled_dot_product_attention(q(t, query), k(t, memory), v(t, memory), heads);
  return o(t, a);
}

FeedForward FeedForward::make(ParameterSet& ps, const std::string& name, std::size_t d_model,
                              std::size_t width) {
  return {Linear::make(ps, name + ".up", d_model, width),
          Linear::make(ps, name + ".down", width, d_model)};
}

Var FeedForward::operator()(Tape& t, Var x) const { return down(t, relu(up(t, x))); }

Matrix sinusoidal_positions(std::size_t rows, std::size_t d_model) {
  Matrix pe(rows, d_model);
  for (std::size_t pos = 0; pos < rows; ++pos) {
    for (std::size_t i = 0; i < d_model; i += 2) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d_model));
      pe(pos, i) = std::sin(static_cast<double>(pos) * freq);
      if (i + 1 < d_model) pe(pos, i + 1) = std::cos(static_cast<double>(pos) * freq);
    }
  }
  return pe;
}

// -------------------------------------------------------- encoder-decoder

nlohmann::json EncoderDecoderConfig::to_json() const {
  return {{"input_dim", input_dim}, {"query_dim", query_dim}, {"d_model", d_model},
          {"heads", heads},         {"ffn", ffn},             {"max_len", max_len}};
}

EncoderDecoderConfig EncoderDecoderConfig::from_json(const nlohmann::json& j) {
  EncoderDecoderConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.query_dim = j.at("query_dim").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ffn = j.at("ffn").get<std::size_t>();
  c.max_len = j.value("max_len", std::size_t{128});
  return c;
}

EncoderDecoder::EncoderDecoder(ParameterSet& ps, const EncoderDecoderConfig& config,
                               const std::string& prefix)
    : config_(config), positions_(sinusoidal_positions(config.max_len, config.d_model)) {
  if (config.input_dim == 0) throw DimensionError("encoder-decoder: input_dim must be positive");
  const std::size_t d = config.d_model;
  in_proj_ = Linear::make(ps, prefix + "in", config.input_dim, d);
  if (config.query_dim > 0) {
    query_proj_ = Linear::make(ps, prefix + "query_in", config.query_dim, d);
  } else {
    learned_query_ = &ps.add(prefix + "query", 1, d);
  }
  enc_self_ = MultiHeadAttention::make(ps, prefix + "enc.self", d, config.heads);
  enc_norm1_ = LayerNorm::make(ps, prefix + "enc.norm1", d);
  enc_ffn_ = FeedForward::make(ps, prefix + "enc.ffn", d, config.ffn);
  enc_norm2_ = LayerNorm::make(ps, prefix + "enc.norm2", d);
  dec_self_ = MultiHeadAttention::make(ps, prefix + "dec.self", d, config.heads);
  dec_norm1_ = LayerNorm::make(ps, prefix + "dec.norm1", d);
  dec_cross_ = MultiHeadAttention::make(ps, prefix + "dec.cross", d, config.heads);
  dec_norm2_ = LayerNorm::make(ps, prefix + "dec.norm2", d);
  dec_ffn_ = FeedForward::make(ps, prefix + "dec.ffn", d, config.ffn);
  dec_norm3_ = LayerNorm::make(ps, prefix + "dec.norm3", d);
}

Var EncoderDecoder::forward(Tape& t, const Matrix& input, const Matrix& query) const {
  if (input.cols != config_.input_dim || input.rows == 0) {
    throw DimensionError("encoder-decoder: input (" + std::to_string(input.rows) + "x" +
                         std::to_string(input.cols) + ") vs expected width " +
                         std::to_string(config_.input_dim));
  }
  if (input.rows > config_.max_len) {
    throw DimensionError("encoder-decoder: sequence of " + std::to_string(input.rows) +
                         " exceeds max_len " + std::to_string(config_.max_len));
  }
  Matrix pe(input.rows, config_.d_model);
  std::copy_n(positions_.data.begin(), pe.data.size(), pe.data.begin());

  Var x = add(in_proj_(t, t.constant(input)), t.constant(std::move(pe)));
  x = enc_norm1_(t, add(x, enc_self_(t, x, x)));
  const Var memory = enc_norm2_(t, add(x, enc_ffn_(t, x)));

  Var y;
  if (learned_query_) {
    y = t.param(*learned_query_);
  } else {
    if (query.cols != config_.query_dim || query.rows == 0) {
      throw DimensionError("encoder-decoder: query (" + std::to_string(query.rows) + "x" +
                           std::to_string(query.cols) + ") vs expected width " +
                           std::to_string(config_.query_dim));
    }
    y = query_proj_(t, t.constant(query));
  }
  y = dec_norm1_(t, add(y, dec_self_(t, y, y)));
  y = dec_norm2_(t, add(y, dec_cross_(t, y, memory)));
  return dec_norm3_(t, add(y, dec_ffn_(t, y)));
}

// ------------------------------------------------------------------ Adam

Adam::Adam(ParameterSet& params, AdamConfig config) : params_(&params), config_(config) {
  for (const auto& p : params.all()) {
    m_.emplace_back(p->value.data.size(), 0.0);
    v_.emplace_back(p->value.data.size(), 0.0);
  }
}

void Adam::step() {
  const auto& ps = params_->all();
  for (const auto& p : ps) {
    for (double g : p->grad.data) {
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient in parameter '" + p->name + "'");
    }
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto& val = ps[i]->value.data;
    const auto& g = ps[i]->grad.data;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < val.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      val[j] -= config_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
    }
  }
}

GradCheckResult check_gradients(ParameterSet& params, const std::function<Var(Tape&)>& loss,
                                double h, double floor) {
  params.zero_grad();
  {
    Tape t;
    t.backward(loss(t));
  }
  GradCheckResult r;
  const auto eval = [&] {
    Tape t;
    return loss(t).value().data[0];
  };
  for (const auto& p : params.all()) {
    for (std::size_t i = 0; i < p->value.data.size(); ++i) {
      const double orig = p->value.data[i];
      p->value.data[i] = orig + h;
      const double up = eval();
      p->value.data[i] = orig - h;
      const double down = eval();
      p->value.data[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad.data[i];
      const double abs_err = std::abs(analytic - numeric);
      const double rel =
          abs_err / std::max({std::abs(analytic), std::abs(numeric), floor});
      r.max_abs_error = std::max(r.max_abs_error, abs_err);
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_parameter = p->name + "[" + std::to_string(i) + "]";
      }
      ++r.checked;
    }
  }
  return r;
}

// ------------------------------------------------------------ checkpoints

std::string encode_checkpoint(const nlohmann::json& header, std::span<const double> payload) {
  nlohmann::json h = header;
  h["scalars"] = payload.size();
  std::string out = h.dump();
  out.push_back('\n');
  const std::size_t off = out.size();
  out.resize(off + payload.size() * 8);
  for (std::size_t i = 0; i < payload.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(payload[i]);
    for (int b = 0; b < 8; ++b) {
      out[off + i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
  return out;
}

DecodedCheckpoint decode_checkpoint(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw FormatError("checkpoint: missing header line");
  DecodedCheckpoint out;
  try {
    out.header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (!out.header.is_object() || !out.header.contains("scalars")) {
    throw FormatError("checkpoint: header lacks 'scalars'");
  }
  const auto n = out.header["scalars"].get<std::size_t>();
  const auto body = bytes.substr(nl + 1);
  if (body.size() != n * 8) {
    throw FormatError("checkpoint: payload is " + std::to_string(body.size()) + " bytes, expected " +
                      std::to_string(n * 8));
  }
  out.payload.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(body[i * 8 + static_cast<std::size_t>(b)]))
              << (8 * b);
    }
    out.payload[i] = std::bit_cast<double>(bits);
  }
  return out;
}

}  // namespace lsti
