#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bls/events.hpp"

namespace bls {

enum class SensorKind { Distance, Gyro };

std::string_view to_string(SensorKind kind);

// Distance samples carry centimetres (chest top to ground), gyro samples head pitch in degrees.
struct SensorSample {
  SensorKind sensor = SensorKind::Distance;
  double value = 0.0;
  TimestampMs ts = 0;
};

struct ZeroLevel {
  double baseline_cm = 0.0;
  int sample_count = 0;
};

struct PushEvent {
  TimestampMs start_ts = 0;
  TimestampMs end_ts = 0;
  double depth_cm = 0.0;
  double min_distance_cm = 0.0;
  bool released_fully = false;
};

struct CprConfig {
  double push_threshold_cm = 3.0;
  double release_tolerance_cm = 0.5;
  int rolling_window = 4;
  double target_rate_per_min = 105.0;
  std::pair<double, double> rate_ok_band{95.0, 125.0};
  std::pair<double, double> depth_ok_band{5.0, 6.0};
  int min_calibration_samples = 10;
  TimestampMs min_calibration_span_ms = 500;

  // Throws Error(InvalidArgument) when the configuration violates its invariants.
  void validate() const;
};

struct CprSummary {
  int push_count = 0;
  std::optional<double> avg_rate_per_min;
  std::optional<double> avg_depth_cm;
  bool full_release_always = true;
  // One point per push after the first; the first push has no inter-push interval.
  std::vector<std::pair<TimestampMs, double>> rate_series;
  std::vector<std::pair<TimestampMs, double>> depth_series;
};

nlohmann::json to_json(const CprSummary& s);
CprSummary cpr_summary_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CprConfig& c);
CprConfig cpr_config_from_json(const nlohmann::json& j);

// Mean of the distance samples. Needs at least `min_samples` samples covering `min_span_ms`.
ZeroLevel calibrateZeroLevel(std::span<const SensorSample> samples, int min_samples = 10,
                             TimestampMs min_span_ms = 500);

double instantRate(const PushEvent& prev, const PushEvent& curr);

// Mean of the trailing `window` rates; nullopt when there is nothing to display.
std::optional<double> displayedRate(std::span<const double> recent, int window = 4);

CprSummary summarize(std::span<const PushEvent> events);

// Largest pitch held for at least `hold_ms`: the maximum over windows spanning `hold_ms`
// of the minimum within the window. Throws NoGyroSamples if no gyro sample is present and
// TooFewSamples if the gyro samples never span `hold_ms`.
double headTiltAngle(std::span<const SensorSample> samples, TimestampMs hold_ms = 500);

struct LiveMetrics {
  int push_count = 0;
  std::optional<double> displayed_rate;
  std::optional<double> last_depth_cm;
  bool in_push = false;
};

struct IngestResult {
  std::optional<PushEvent> push;
  LiveMetrics metrics;
};

// Streaming push detector for one distance stream. Single writer.
//
// A push starts at the first sample strictly below baseline - threshold and ends at the
// first sample strictly above that level. Depth is baseline minus the minimum seen in
// between. Full release is decided after the push ends: the chest must come back within
// release_tolerance of the baseline before the next push starts. That flag is back-filled
// on the stored event, so the copy returned from ingest() always reads false.
class PushTracker {
 public:
  explicit PushTracker(CprConfig config = {});

  void calibrate(const ZeroLevel& zero);
  bool calibrated() const { return zero_.has_value(); }
  const std::optional<ZeroLevel>& zero_level() const { return zero_; }

  IngestResult ingest(const SensorSample& sample);

  const std::vector<PushEvent>& events() const { return events_; }
  const std::vector<double>& rates() const { return rates_; }
  LiveMetrics metrics() const;
  const CprConfig& config() const { return config_; }

 private:
  CprConfig config_;
  std::optional<ZeroLevel> zero_;
  std::vector<PushEvent> events_;
  std::vector<double> rates_;
  std::optional<TimestampMs> last_ts_;
  bool in_push_ = false;
  bool awaiting_release_ = false;
  TimestampMs push_start_ = 0;
  double push_min_ = 0.0;
};

// Online sustained-tilt detector: reports the minimum pitch over the trailing window once
// the window spans hold_ms.
class TiltTracker {
 public:
  explicit TiltTracker(TimestampMs hold_ms = 500) : hold_ms_(hold_ms) {}

  // Returns the sustained angle once at least hold_ms of samples are buffered.
  std::optional<double> ingest(const SensorSample& sample);
  void reset() {
    window_.clear();
    minima_.clear();
  }

 private:
  struct Entry {
    std::uint64_t seq;
    SensorSample sample;
  };
  TimestampMs hold_ms_;
  std::uint64_t next_seq_ = 0;
  std::deque<Entry> window_;
  std::deque<Entry> minima_;  // values increase front to back
};

}  // namespace bls
