#include "lsti/encoding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "lsti/error.hpp"
#include "lsti/hash.hpp"
#include "json.hpp"

namespace lsti {

std::vector<double> binary_code(std::size_t index, std::size_t width) {
  if (width == 0 || width >= 64 || index >= (std::size_t{1} << width)) {
    throw EncodingError("index " + std::to_string(index) + " does not fit in " +
                        std::to_string(width) + " bits");
  }
  std::vector<double> bits(width);
  for (std::size_t i = 0; i < width; ++i) {
    bits[width - 1 - i] = static_cast<double>((index >> i) & 1U);
  }
  return bits;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

Embedding embed_intention(std::string_view text) {
  Embedding v{};
  const std::string norm_text = normalize_text(text);
  if (norm_text.empty()) return v;
  const std::string padded = "#" + norm_text + "#";
  std::uint64_t first_hash = 0;
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    const std::uint64_t h = fnv1a64(std::string_view(padded).substr(i, 3));
    if (i == 0) first_hash = h;
    v[h % kEmbeddingDim] += (h >> 63) == 0 ? 1.0 : -1.0;
  }
  // Trigrams may cancel each other out completely; the first trigram alone
  // then defines the direction so non-empty text stays unit-norm.
  if (norm(v) == 0.0) v[first_hash % kEmbeddingDim] = (first_hash >> 63) == 0 ? 1.0 : -1.0;
  return normalized(v);
}

double dot(const Embedding& a, const Embedding& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) s += a[i] * b[i];
  return s;
}

double norm(const Embedding& a) { return std::sqrt(dot(a, a)); }

double cosine(const Embedding& a, const Embedding& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

Embedding normalized(const Embedding& a) {
  const double n = norm(a);
  if (n == 0.0) return a;
  Embedding out;
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) out[i] = a[i] / n;
  return out;
}

FeatureLayout FeatureLayout::for_config(const WorldConfig& config) {
  FeatureLayout l;
  l.object_bits = static_cast<std::size_t>(
      std::ceil(std::log2(static_cast<double>(config.objects.size() + 1))));
  if (l.object_bits == 0) l.object_bits = 1;
  l.room = l.object + l.object_bits;
  l.duration = l.room + kRoomBits;
  l.post_state = l.duration + 1;
  l.base_width = l.post_state + kPostStateSlots;
  l.intention = l.base_width;
  return l;
}

std::string FeatureLayout::to_json() const {
  nlohmann::ordered_json j;
  const auto field = [&](const char* name, std::size_t offset, std::size_t width) {
    j["fields"][name] = {{"offset", offset}, {"width", width}};
  };
  j["v"] = 1;
  field("time_of_day", time_of_day, 1);
  field("date_index", date_index, 1);
  field("weekday", weekday, kWeekdays);
  field("action", action, kActionBits);
  field("object", object, object_bits);
  field("room", room, kRoomBits);
  field("duration", duration, 1);
  field("post_state", post_state, kPostStateSlots);
  field("intention", intention, kEmbeddingDim);
  j["base_width"] = base_width;
  j["width_with_intention"] = base_width + kEmbeddingDim;
  return j.dump(2);
}

std::string FeatureLayout::fingerprint() const { return hex64(fnv1a64(to_json())); }

std::array<double, kTimeFeatures> time_features(Instant t, const Horizon& horizon) {
  std::array<double, kTimeFeatures> f{};
  const Date date = instant_date(t);
  f[0] = static_cast<double>(instant_minute(t)) / kMinutesPerDay;
  const auto offset = static_cast<double>(date.to_days() - horizon.start_date.to_days());
  f[1] = std::clamp(offset / std::max(1, horizon.days), 0.0, 1.0);
  f[2 + static_cast<std::size_t>(date.weekday())] = 1.0;
  return f;
}

FeatureEncoder::FeatureEncoder(WorldConfig config)
    : config_(std::move(config)), layout_(FeatureLayout::for_config(config_)) {}

std::vector<double> FeatureEncoder::encode(const Observation& obs, const Horizon& horizon,
                                           bool with_intention) const {
  const int action = config_.action_index(obs.action);
  const int object = config_.object_index(obs.object_id);
  const int room = config_.room_index(obs.room);
  if (action < 0) throw EncodingError("unregistered action '" + obs.action + "'");
  if (object < 0) throw EncodingError("unregistered object '" + obs.object_id + "'");
  if (room < 0) throw EncodingError("unregistered room '" + obs.room + "'");
  if (obs.post_state.state < 0 || obs.post_state.state >= static_cast<int>(kPostStateSlots)) {
    throw EncodingError("post-state index out of range");
  }
  std::vector<double> v(layout_.width(with_intention), 0.0);
  const auto tf = time_features(obs.start(), horizon);
  std::copy(tf.begin(), tf.end(), v.begin());
  const auto put_bits = [&](std::size_t offset, std::size_t index, std::size_t width) {
    const auto bits = binary_code(index, width);
    std::copy(bits.begin(), bits.end(), v.begin() + static_cast<std::ptrdiff_t>(offset));
  };
  put_bits(layout_.action, static_cast<std::size_t>(action), kActionBits);
  put_bits(layout_.object, static_cast<std::size_t>(object), layout_.object_bits);
  put_bits(layout_.room, static_cast<std::size_t>(room), kRoomBits);
  v[layout_.duration] =
      static_cast<double>(std::clamp(obs.duration_min, 0, kDurationCapMin)) / kDurationCapMin;
  v[layout_.post_state + static_cast<std::size_t>(obs.post_state.state)] = 1.0;
  if (with_intention) {
    const Embedding e = embed_intention(obs.intention);
    std::copy(e.begin(), e.end(), v.begin() + static_cast<std::ptrdiff_t>(layout_.intention));
  }
  return v;
}

Matrix FeatureEncoder::encode_log(const ObservationLog& log, bool with_intention) const {
  const Horizon horizon = Horizon::of(log);
  Matrix m(log.events.size(), layout_.width(with_intention));
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto row = encode(log.events[i], horizon, with_intention);
    std::copy(row.begin(), row.end(), m.row(i).begin());
  }
  return m;
}

std::vector<double> encode_observation(const Observation& obs, const WorldConfig& config,
                                       const Horizon& horizon, bool with_intention) {
  return FeatureEncoder(config).encode(obs, horizon, with_intention);
}

std::vector<SequenceSample> build_sequences(const ObservationLog& log, const WorldConfig& config,
                                            int window, bool with_intention) {
  if (window < 2) throw Error("window must be at least 2");
  const auto w = static_cast<std::size_t>(window);
  if (log.events.size() < w) {
    throw Error("log has " + std::to_string(log.events.size()) + " events, window needs " +
                std::to_string(window));
  }
  const FeatureEncoder encoder(config);
  const Matrix rows = encoder.encode_log(log, with_intention);
  const Horizon horizon = Horizon::of(log);
  std::vector<SequenceSample> out;
  out.reserve(log.events.size() - w + 1);
  for (std::size_t target = w - 1; target < log.events.size(); ++target) {
    SequenceSample s;
    s.input = Matrix(w - 1, rows.cols);
    std::copy_n(rows.data.begin() + static_cast<std::ptrdiff_t>((target - (w - 1)) * rows.cols),
                (w - 1) * rows.cols, s.input.data.begin());
    const Observation& ev = log.events[target];
    s.query = time_features(ev.start(), horizon);
    s.action = config.action_index(ev.action);
    s.duration_min = ev.duration_min;
    s.intention = ev.intention;
    s.target_index = target;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace lsti
