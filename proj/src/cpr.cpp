#include "bls/cpr.hpp"

#include <algorithm>
#include <numeric>

#include "bls/error.hpp"

namespace bls {

using nlohmann::json;

std::string_view to_string(SensorKind kind) {
  return kind == SensorKind::Distance ? "distance" : "gyro";
}

void CprConfig::validate() const {
  if (!(push_threshold_cm > 0.0)) throw Error(ErrorCode::InvalidArgument, "push_threshold must be > 0");
  if (!(release_tolerance_cm > 0.0 && release_tolerance_cm < push_threshold_cm)) {
    throw Error(ErrorCode::InvalidArgument, "release_tolerance must lie in (0, push_threshold)");
  }
  if (rolling_window < 1) throw Error(ErrorCode::InvalidArgument, "rolling_window must be >= 1");
}

ZeroLevel calibrateZeroLevel(std::span<const SensorSample> samples, int min_samples,
                             TimestampMs min_span_ms) {
  for (const auto& s : samples) {
    if (s.sensor != SensorKind::Distance) {
      throw Error(ErrorCode::WrongSensor, "calibration accepts distance samples only");
    }
  }
  if (static_cast<int>(samples.size()) < min_samples) {
    throw Error(ErrorCode::TooFewSamples, "need at least " + std::to_string(min_samples) +
                                              " samples, got " + std::to_string(samples.size()));
  }
  const TimestampMs span = samples.back().ts - samples.front().ts;
  if (span < min_span_ms) {
    throw Error(ErrorCode::TooFewSamples, "samples span " + std::to_string(span) + " ms, need " +
                                              std::to_string(min_span_ms) + " ms");
  }
  double sum = 0.0;
  for (const auto& s : samples) sum += s.value;
  const double mean = sum / static_cast<double>(samples.size());
  if (!(mean > 0.0)) throw Error(ErrorCode::InvalidArgument, "zero level must be positive");
  return ZeroLevel{mean, static_cast<int>(samples.size())};
}

double instantRate(const PushEvent& prev, const PushEvent& curr) {
  if (curr.start_ts <= prev.start_ts) {
    throw Error(ErrorCode::NonIncreasingTimestamps, "push starts must increase");
  }
  return 60000.0 / static_cast<double>(curr.start_ts - prev.start_ts);
}

std::optional<double> displayedRate(std::span<const double> recent, int window) {
  if (recent.empty() || window < 1) return std::nullopt;
  const std::size_t n = std::min(recent.size(), static_cast<std::size_t>(window));
  const auto tail = recent.last(n);
  return std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(n);
}

CprSummary summarize(std::span<const PushEvent> events) {
  CprSummary s;
  s.push_count = static_cast<int>(events.size());
  double depth_sum = 0.0;
  double rate_sum = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    depth_sum += e.depth_cm;
    s.depth_series.emplace_back(e.start_ts, e.depth_cm);
    s.full_release_always = s.full_release_always && e.released_fully;
    if (i > 0) {
      const double r = instantRate(events[i - 1], e);
      rate_sum += r;
      s.rate_series.emplace_back(e.start_ts, r);
    }
  }
  if (!events.empty()) s.avg_depth_cm = depth_sum / static_cast<double>(events.size());
  if (!s.rate_series.empty()) s.avg_rate_per_min = rate_sum / static_cast<double>(s.rate_series.size());
  return s;
}

std::optional<double> TiltTracker::ingest(const SensorSample& sample) {
  const Entry entry{next_seq_++, sample};
  while (!minima_.empty() && minima_.back().sample.value >= sample.value) minima_.pop_back();
  minima_.push_back(entry);
  window_.push_back(entry);
  const TimestampMs boundary = sample.ts - hold_ms_;
  // Keep exactly one sample at or before the boundary: the value in force when the hold began.
  while (window_.size() >= 2 && window_[1].sample.ts <= boundary) {
    if (minima_.front().seq == window_.front().seq) minima_.pop_front();
    window_.pop_front();
  }
  if (window_.front().sample.ts > boundary) return std::nullopt;
  return minima_.front().sample.value;
}

double headTiltAngle(std::span<const SensorSample> samples, TimestampMs hold_ms) {
  TiltTracker tracker(hold_ms);
  std::optional<double> best;
  bool any_gyro = false;
  for (const auto& s : samples) {
    if (s.sensor != SensorKind::Gyro) continue;
    any_gyro = true;
    if (auto v = tracker.ingest(s)) best = best ? std::max(*best, *v) : *v;
  }
  if (!any_gyro) throw Error(ErrorCode::NoGyroSamples, "no gyro samples");
  if (!best) throw Error(ErrorCode::TooFewSamples, "gyro samples never span the hold time");
  return *best;
}

PushTracker::PushTracker(CprConfig config) : config_(std::move(config)) { config_.validate(); }

void PushTracker::calibrate(const ZeroLevel& zero) {
  if (!(zero.baseline_cm > 0.0)) throw Error(ErrorCode::InvalidArgument, "zero level must be positive");
  zero_ = zero;
  in_push_ = false;
  awaiting_release_ = false;
}

LiveMetrics PushTracker::metrics() const {
  LiveMetrics m;
  m.push_count = static_cast<int>(events_.size());
  m.displayed_rate = displayedRate(rates_, config_.rolling_window);
  if (!events_.empty()) m.last_depth_cm = events_.back().depth_cm;
  m.in_push = in_push_;
  return m;
}

IngestResult PushTracker::ingest(const SensorSample& sample) {
  if (sample.sensor != SensorKind::Distance) {
    throw Error(ErrorCode::WrongSensor, "push tracker accepts distance samples only");
  }
  if (!zero_) throw Error(ErrorCode::Uncalibrated, "push tracker has no zero level");
  if (last_ts_ && sample.ts < *last_ts_) {
    throw Error(ErrorCode::TimestampRegression,
                "sample ts " + std::to_string(sample.ts) + " < " + std::to_string(*last_ts_));
  }
  last_ts_ = sample.ts;

  const double baseline = zero_->baseline_cm;
  const double level = baseline - config_.push_threshold_cm;
  IngestResult result;

  if (in_push_) {
    if (sample.value > level) {
      PushEvent e;
      e.start_ts = push_start_;
      e.end_ts = sample.ts;
      e.min_distance_cm = push_min_;
      e.depth_cm = baseline - push_min_;
      if (!events_.empty()) rates_.push_back(instantRate(events_.back(), e));
      events_.push_back(e);
      result.push = e;
      in_push_ = false;
      awaiting_release_ = true;
    } else {
      push_min_ = std::min(push_min_, sample.value);
    }
  } else if (sample.value < level) {
    in_push_ = true;
    awaiting_release_ = false;
    push_start_ = sample.ts;
    push_min_ = sample.value;
  }

  if (!in_push_ && awaiting_release_ && sample.value >= baseline - config_.release_tolerance_cm) {
    events_.back().released_fully = true;
    awaiting_release_ = false;
  }

  result.metrics = metrics();
  return result;
}

namespace {

json series_json(const std::vector<std::pair<TimestampMs, double>>& series) {
  json arr = json::array();
  for (const auto& [ts, v] : series) arr.push_back(json::array({ts, v}));
  return arr;
}

std::vector<std::pair<TimestampMs, double>> series_from(const json& arr) {
  std::vector<std::pair<TimestampMs, double>> out;
  for (const auto& p : arr) out.emplace_back(p.at(0).get<TimestampMs>(), p.at(1).get<double>());
  return out;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const CprSummary& s) {
  return {{"push_count", s.push_count},
          {"avg_rate", opt(s.avg_rate_per_min)},
          {"avg_depth_cm", opt(s.avg_depth_cm)},
          {"full_release_always", s.full_release_always},
          {"rate_series", series_json(s.rate_series)},
          {"depth_series", series_json(s.depth_series)}};
}

CprSummary cpr_summary_from_json(const json& j) {
  CprSummary s;
  s.push_count = j.at("push_count").get<int>();
  if (!j.at("avg_rate").is_null()) s.avg_rate_per_min = j.at("avg_rate").get<double>();
  if (!j.at("avg_depth_cm").is_null()) s.avg_depth_cm = j.at("avg_depth_cm").get<double>();
  s.full_release_always = j.at("full_release_always").get<bool>();
  s.rate_series = series_from(j.at("rate_series"));
  s.depth_series = series_from(j.at("depth_series"));
  return s;
}

json to_json(const CprConfig& c) {
  return {{"push_threshold_cm", c.push_threshold_cm},
          {"release_tolerance_cm", c.release_tolerance_cm},
          {"rolling_window", c.rolling_window},
          {"target_rate", c.target_rate_per_min},
          {"rate_ok_band", json::array({c.rate_ok_band.first, c.rate_ok_band.second})},
          {"depth_ok_band", json::array({c.depth_ok_band.first, c.depth_ok_band.second})},
          {"min_calibration_samples", c.min_calibration_samples},
          {"min_calibration_span_ms", c.min_calibration_span_ms}};
}

CprConfig cpr_config_from_json(const json& j) {
  CprConfig c;
  c.push_threshold_cm = j.value("push_threshold_cm", c.push_threshold_cm);
  c.release_tolerance_cm = j.value("release_tolerance_cm", c.release_tolerance_cm);
  c.rolling_window = j.value("rolling_window", c.rolling_window);
  c.target_rate_per_min = j.value("target_rate", c.target_rate_per_min);
  if (j.contains("rate_ok_band")) {
    c.rate_ok_band = {j["rate_ok_band"].at(0).get<double>(), j["rate_ok_band"].at(1).get<double>()};
  }
  if (j.contains("depth_ok_band")) {
    c.depth_ok_band = {j["depth_ok_band"].at(0).get<double>(), j["depth_ok_band"].at(1).get<double>()};
  }
  c.min_calibration_samples = j.value("min_calibration_samples", c.min_calibration_samples);
  c.min_calibration_span_ms = j.value("min_calibration_span_ms", c.min_calibration_span_ms);
  c.validate();
  return c;
}

}  // namespace bls
