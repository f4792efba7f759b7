#include <doctest.h>

#include <random>

#include "bls/cpr.hpp"
#include "bls/error.hpp"
#include "oracles/oracles.hpp"
#include "oracles/waveforms.hpp"

using namespace bls;

namespace {

std::vector<SensorSample> flat(double value, int n, TimestampMs step = 50, TimestampMs t0 = 50) {
  std::vector<SensorSample> out;
  for (int i = 0; i < n; ++i) out.push_back({SensorKind::Distance, value, t0 + i * step});
  return out;
}

PushTracker calibrated_tracker(double baseline = 20.0) {
  PushTracker t;
  t.calibrate(ZeroLevel{baseline, 20});
  return t;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("calibrateZeroLevel") {
  SUBCASE("constant") {
    const auto z = calibrateZeroLevel(flat(20.0, 20));
    CHECK(z.baseline_cm == doctest::Approx(20.0));
    CHECK(z.sample_count == 20);
  }
  SUBCASE("noisy mean") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    std::vector<SensorSample> s;
    std::vector<double> values;
    for (int i = 0; i < 100; ++i) {
      values.push_back(20.0 + u(rng));
      s.push_back({SensorKind::Distance, values.back(), 50 + 50 * i});
    }
    const auto z = calibrateZeroLevel(s);
    CHECK(z.baseline_cm == doctest::Approx(oracle::mean(values)).epsilon(1e-12));
    CHECK(z.baseline_cm >= 19.95);
    CHECK(z.baseline_cm <= 20.05);
  }
  SUBCASE("too few samples") {
    CHECK(code_of([] { calibrateZeroLevel(flat(20.0, 3)); }) == ErrorCode::TooFewSamples);
  }
  SUBCASE("too short a span") {
    CHECK(code_of([] { calibrateZeroLevel(flat(20.0, 10, 10)); }) == ErrorCode::TooFewSamples);
  }
  SUBCASE("gyro samples are rejected") {
    auto s = flat(20.0, 20);
    s[4].sensor = SensorKind::Gyro;
    CHECK(code_of([&] { calibrateZeroLevel(s); }) == ErrorCode::WrongSensor);
  }
}

TEST_CASE("push detection on hand-built streams") {
  SUBCASE("descent to 14.5 and back gives depth 5.5") {
    auto t = calibrated_tracker();
    const double values[] = {20.0, 18.0, 16.5, 15.0, 14.5, 15.5, 17.0, 18.0, 20.0};
    std::optional<PushEvent> got;
    TimestampMs ts = 0;
    for (double v : values) {
      auto r = t.ingest({SensorKind::Distance, v, ts += 50});
      if (r.push) got = r.push;
    }
    REQUIRE(got);
    CHECK(got->depth_cm == doctest::Approx(5.5));
    CHECK(got->min_distance_cm == doctest::Approx(14.5));
    CHECK(got->start_ts == 150);  // 16.5 is the first value below 17.0
    CHECK(got->end_ts == 400);    // 18.0 is the first value above 17.0
    CHECK_FALSE(got->released_fully);  // not known yet when emitted
    REQUIRE(t.events().size() == 1);
    CHECK(t.events()[0].released_fully);  // back-filled once 20.0 arrived
  }
  SUBCASE("flat stream") {
    auto t = calibrated_tracker();
    for (const auto& s : flat(20.0, 100)) CHECK_FALSE(t.ingest(s).push);
    CHECK(t.events().empty());
  }
  SUBCASE("shallow press below threshold") {
    auto t = calibrated_tracker();
    TimestampMs ts = 0;
    for (double v : {20.0, 19.0, 18.0, 17.5, 18.0, 20.0}) t.ingest({SensorKind::Distance, v, ts += 50});
    CHECK(t.events().empty());
  }
  SUBCASE("sample exactly at the level neither starts nor ends a push") {
    auto t = calibrated_tracker();
    TimestampMs ts = 0;
    for (double v : {20.0, 17.0, 20.0}) t.ingest({SensorKind::Distance, v, ts += 50});
    CHECK(t.events().empty());
    for (double v : {16.0, 17.0, 15.0, 17.0, 17.1}) t.ingest({SensorKind::Distance, v, ts += 50});
    REQUIRE(t.events().size() == 1);
    CHECK(t.events()[0].depth_cm == doctest::Approx(5.0));
  }
  SUBCASE("incomplete release") {
    auto t = calibrated_tracker();
    TimestampMs ts = 0;
    for (double v : {20.0, 15.0, 19.0, 19.2, 15.0, 19.6, 20.0}) t.ingest({SensorKind::Distance, v, ts += 50});
    REQUIRE(t.events().size() == 2);
    CHECK_FALSE(t.events()[0].released_fully);  // 19.2 < 19.5
    CHECK(t.events()[1].released_fully);
    CHECK_FALSE(summarize(t.events()).full_release_always);
  }
  SUBCASE("errors") {
    PushTracker raw;
    CHECK(code_of([&] { raw.ingest({SensorKind::Distance, 20.0, 0}); }) == ErrorCode::Uncalibrated);
    auto t = calibrated_tracker();
    t.ingest({SensorKind::Distance, 20.0, 100});
    CHECK(code_of([&] { t.ingest({SensorKind::Distance, 20.0, 99}); }) == ErrorCode::TimestampRegression);
    CHECK(code_of([&] { t.ingest({SensorKind::Gyro, 20.0, 200}); }) == ErrorCode::WrongSensor);
  }
}

TEST_CASE("instantRate") {
  PushEvent a{1000, 1200, 5.0, 15.0, true};
  PushEvent b = a;
  b.start_ts = 1600;
  CHECK(instantRate(a, b) == doctest::Approx(100.0));
  b.start_ts = 1500;
  CHECK(instantRate(a, b) == doctest::Approx(120.0));
  b.start_ts = 1000;
  CHECK(code_of([&] { instantRate(a, b); }) == ErrorCode::NonIncreasingTimestamps);
}

TEST_CASE("displayedRate") {
  const std::vector<double> a{100, 104, 108, 112};
  CHECK(*displayedRate(a) == doctest::Approx(106.0));
  const std::vector<double> b{100};
  CHECK(*displayedRate(b) == doctest::Approx(100.0));
  const std::vector<double> c{90, 90, 90, 90, 150};
  CHECK(*displayedRate(c) == doctest::Approx(105.0));
  CHECK_FALSE(displayedRate(std::vector<double>{}).has_value());
}

TEST_CASE("displayedRate matches the trailing-mean oracle on every prefix") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> r(40.0, 200.0);
  std::vector<double> rates;
  for (int i = 0; i < 200; ++i) {
    rates.push_back(r(rng));
    const auto got = displayedRate(rates);
    const auto want = oracle::trailing_mean(rates, 4);
    REQUIRE(got);
    CHECK(*got == doctest::Approx(*want).epsilon(1e-12));
  }
}

TEST_CASE("summarize") {
  SUBCASE("30 pushes 571 ms apart") {
    std::vector<PushEvent> e;
    for (int i = 0; i < 30; ++i) e.push_back({1000 + 571 * i, 1250 + 571 * i, 5.5, 14.5, true});
    const auto s = summarize(e);
    CHECK(s.push_count == 30);
    CHECK(*s.avg_rate_per_min == doctest::Approx(60000.0 / 571.0));
    CHECK(*s.avg_rate_per_min == doctest::Approx(105.1).epsilon(0.001));
    CHECK(*s.avg_depth_cm == doctest::Approx(5.5));
    CHECK(s.depth_series.size() == 30);
    CHECK(s.rate_series.size() == 29);
    CHECK(s.full_release_always);
  }
  SUBCASE("empty") {
    const auto s = summarize({});
    CHECK(s.push_count == 0);
    CHECK_FALSE(s.avg_rate_per_min);
    CHECK_FALSE(s.avg_depth_cm);
  }
  SUBCASE("one push not released") {
    std::vector<PushEvent> e{{0, 200, 5.0, 15.0, true}, {600, 800, 5.0, 15.0, false}};
    CHECK_FALSE(summarize(e).full_release_always);
  }
  SUBCASE("serialization is deterministic and round-trips") {
    std::vector<PushEvent> e{{0, 200, 5.3, 14.7, true}, {577, 800, 5.1, 14.9, true}};
    const auto j = to_json(summarize(e));
    CHECK(j.dump() == to_json(summarize(e)).dump());
    CHECK(to_json(cpr_summary_from_json(j)).dump() == j.dump());
  }
}

TEST_CASE("headTiltAngle") {
  auto gyro = [](std::vector<double> values, TimestampMs step = 50) {
    std::vector<SensorSample> s;
    for (std::size_t i = 0; i < values.size(); ++i) {
      s.push_back({SensorKind::Gyro, values[i], static_cast<TimestampMs>(50 + step * i)});
    }
    return s;
  };
  SUBCASE("constant 25 degrees for 1 s") { CHECK(headTiltAngle(gyro(std::vector<double>(21, 25.0))) == 25.0); }
  SUBCASE("single-sample spike is not sustained") {
    std::vector<double> v(30, 0.0);
    v[15] = 30.0;
    CHECK(headTiltAngle(gyro(v)) == 0.0);
  }
  SUBCASE("empty") { CHECK(code_of([] { headTiltAngle({}); }) == ErrorCode::NoGyroSamples); }
  SUBCASE("shorter than the hold") {
    CHECK(code_of([&] { headTiltAngle(gyro({10, 10, 10})); }) == ErrorCode::TooFewSamples);
  }
  SUBCASE("exactly the hold time is enough") {
    CHECK(headTiltAngle(gyro(std::vector<double>(11, 22.0))) == 22.0);
  }
  SUBCASE("random series agree with the sliding-window oracle") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> deg(-10.0, 40.0);
    std::uniform_int_distribution<int> dt(1, 120);
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<SensorSample> s;
      std::vector<TimestampMs> ts;
      std::vector<double> v;
      TimestampMs t = 0;
      const int n = 5 + trial % 60;
      for (int i = 0; i < n; ++i) {
        t += dt(rng);
        ts.push_back(t);
        v.push_back(std::round(deg(rng) * 10.0) / 10.0);
        s.push_back({SensorKind::Gyro, v.back(), t});
      }
      const auto want = oracle::sustained_max(ts, v, 500);
      if (want) {
        CHECK(headTiltAngle(s) == *want);
      } else {
        CHECK(code_of([&] { headTiltAngle(s); }) == ErrorCode::TooFewSamples);
      }
    }
  }
}

TEST_CASE("tracker agrees with the segmentation oracle on random waveforms") {
  std::size_t total = 0;
  std::size_t unreleased = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto w = waveform::random_trace(seed);
    std::vector<SensorSample> cal;
    std::vector<double> cal_values;
    for (std::size_t i = 0; i < w.calibration_count; ++i) {
      cal.push_back({SensorKind::Distance, w.d[i], w.ts[i]});
      cal_values.push_back(w.d[i]);
    }
    const double baseline = oracle::mean(cal_values);
    PushTracker t;
    t.calibrate(calibrateZeroLevel(cal));
    std::vector<std::int64_t> ts(w.ts.begin() + static_cast<long>(w.calibration_count), w.ts.end());
    std::vector<double> d(w.d.begin() + static_cast<long>(w.calibration_count), w.d.end());
    for (std::size_t i = 0; i < ts.size(); ++i) t.ingest({SensorKind::Distance, d[i], ts[i]});
    const auto want = oracle::segment(ts, d, baseline, 3.0, 0.5);
    CAPTURE(seed);
    REQUIRE(t.events().size() == want.size());
    total += want.size();
    for (const auto& p : want) unreleased += p.released ? 0 : 1;
    for (std::size_t k = 0; k < want.size(); ++k) {
      CHECK(t.events()[k].start_ts == want[k].start_ts);
      CHECK(t.events()[k].end_ts == want[k].end_ts);
      CHECK(t.events()[k].depth_cm == doctest::Approx(want[k].depth).epsilon(1e-9));
      CHECK(t.events()[k].released_fully == want[k].released);
      CHECK(t.events()[k].depth_cm > 3.0);
    }
  }
  // The generator must exercise both outcomes of the release check.
  CHECK(total > 300);
  CHECK(unreleased > 10);
}

TEST_CASE("live metrics track the latest push") {
  auto t = calibrated_tracker();
  TimestampMs ts = 0;
  std::vector<double> rates;
  for (int p = 0; p < 6; ++p) {
    for (double v : {20.0, 15.0, 14.5, 20.0, 20.0, 20.0}) t.ingest({SensorKind::Distance, v, ts += 100});
  }
  const auto m = t.metrics();
  CHECK(m.push_count == 6);
  CHECK(*m.last_depth_cm == doctest::Approx(5.5));
  CHECK(*m.displayed_rate == doctest::Approx(100.0));
  CHECK(t.rates().size() == 5);
}

TEST_CASE("CprConfig validation") {
  CprConfig c;
  CHECK_NOTHROW(c.validate());
  c.release_tolerance_cm = 3.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = CprConfig{};
  c.rolling_window = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}
