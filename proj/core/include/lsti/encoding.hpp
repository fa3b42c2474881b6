#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "lsti/matrix.hpp"
#include "lsti/world.hpp"

namespace lsti {

inline constexpr std::size_t kEmbeddingDim = 64;
inline constexpr std::size_t kActionBits = 5;
inline constexpr std::size_t kRoomBits = 3;
inline constexpr std::size_t kWeekdays = 7;
inline constexpr std::size_t kPostStateSlots = 8;
/// time-of-day, date index, weekday one-hot.
inline constexpr std::size_t kTimeFeatures = 2 + kWeekdays;
inline constexpr int kDurationCapMin = 480;
inline constexpr int kShortWindow = 16;
inline constexpr int kLongWindow = 64;

using Embedding = std::array<double, kEmbeddingDim>;

/// Big-endian fixed-width base-2 code. Throws EncodingError when
/// index >= 2^width.
std::vector<double> binary_code(std::size_t index, std::size_t width);

/// Lowercase, trim, collapse internal whitespace.
std::string normalize_text(std::string_view text);

/// Hashed character-trigram embedding: '#'-padded normalized text, one
/// FNV-1a 64 hash per trigram, bucket = hash mod 64, sign from the top bit,
/// L2-normalized. Empty text maps to the zero vector.
Embedding embed_intention(std::string_view text);

double dot(const Embedding& a, const Embedding& b);
double norm(const Embedding& a);
/// 0 when either side is the zero vector.
double cosine(const Embedding& a, const Embedding& b);
Embedding normalized(const Embedding& a);

/// Column offsets of one serialized observation.
struct FeatureLayout {
  std::size_t object_bits = 0;
  std::size_t time_of_day = 0;
  std::size_t date_index = 1;
  std::size_t weekday = 2;
  std::size_t action = 9;
  std::size_t object = 14;
  std::size_t room = 0;
  std::size_t duration = 0;
  std::size_t post_state = 0;
  std::size_t intention = 0;
  std::size_t base_width = 0;  // without the intention block

  static FeatureLayout for_config(const WorldConfig& config);
  std::size_t width(bool with_intention) const {
    return base_width + (with_intention ? kEmbeddingDim : 0);
  }
  /// field -> {offset, width}, as written to layout.json.
  std::string to_json() const;
  std::string fingerprint() const;
};

/// Where an observation sits on the dataset horizon.
struct Horizon {
  Date start_date;
  int days = 28;

  static Horizon of(const ObservationLog& log) { return {log.start_date, log.days}; }
};

/// Time-of-day, date index and weekday one-hot for an instant.
std::array<double, kTimeFeatures> time_features(Instant t, const Horizon& horizon);

/// Serializes one observation (see FeatureLayout). Throws EncodingError for
/// vocabulary outside the config.
std::vector<double> encode_observation(const Observation& obs, const WorldConfig& config,
                                       const Horizon& horizon, bool with_intention);

/// Caches layout and vocabulary lookups for bulk encoding.
class FeatureEncoder {
 public:
  explicit FeatureEncoder(WorldConfig config);

  const FeatureLayout& layout() const { return layout_; }
  const WorldConfig& config() const { return config_; }
  std::vector<double> encode(const Observation& obs, const Horizon& horizon,
                             bool with_intention) const;
  /// Every event of the log, one row each.
  Matrix encode_log(const ObservationLog& log, bool with_intention) const;

 private:
  WorldConfig config_;
  FeatureLayout layout_;
};

struct SequenceSample {
  Matrix input;                              // W-1 rows
  std::array<double, kTimeFeatures> query{};  // target slot
  int action = 0;
  int duration_min = 0;
  std::string intention;
  std::size_t target_index = 0;
};

/// Sliding windows of length `window` (stride 1): first W-1 events are the
/// input, the W-th is the target. Throws Error when the log is shorter.
std::vector<SequenceSample> build_sequences(const ObservationLog& log, const WorldConfig& config,
                                            int window, bool with_intention);

}  // namespace lsti
