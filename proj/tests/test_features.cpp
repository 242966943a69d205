#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "surgnn/features.hpp"

using namespace surgnn;

namespace {

constexpr std::size_t kMeanSpeed = 1, kIdle = 7, kDuration = 9, kVisibility = 10, kTurning = 11,
                      kCurvature = 12;

InstrumentTrack track_from(const std::vector<double>& t, const std::vector<std::vector<double>>& p) {
  InstrumentTrack tr{"c", "g", {}};
  for (std::size_t i = 0; i < t.size(); ++i) tr.samples.push_back({static_cast<long>(i), t[i], p[i], true});
  return tr;
}

std::vector<double> features_of(const InstrumentTrack& tr) {
  return summarize_unit(compute_kinematics(tr), visibility_fraction(tr)).features;
}

// Unit circle sampled at 1 kHz for one revolution: speed 1, turning rate 1 rad/s.
InstrumentTrack circle(double t0 = 0.0, double dt = 1e-3, std::vector<double> offset = {0, 0}) {
  std::vector<double> t;
  std::vector<std::vector<double>> p;
  const int n = static_cast<int>(std::round(2 * std::numbers::pi / dt));
  for (int i = 0; i <= n; ++i) {
    const double s = i * dt;
    t.push_back(t0 + s);
    p.push_back({offset[0] + std::cos(s), offset[1] + std::sin(s)});
  }
  return track_from(t, p);
}

}  // namespace

TEST(Kinematics, LineHasConstantVelocityAndZeroHigherDerivatives) {
  auto k = compute_kinematics({0, 1, 2, 3}, {{0, 0}, {1, 0}, {2, 0}, {3, 0}});
  ASSERT_EQ(k.velocity.size(), 3u);
  ASSERT_EQ(k.acceleration.size(), 2u);
  ASSERT_EQ(k.jerk.size(), 1u);
  for (double s : k.speed) EXPECT_DOUBLE_EQ(s, 1.0);
  for (const auto& a : k.acceleration) EXPECT_DOUBLE_EQ(a[0], 0.0);
}

TEST(Kinematics, ErrorCases) {
  EXPECT_THROW(compute_kinematics({0}, {{0, 0}}), ValidationError);
  EXPECT_THROW(compute_kinematics({0, 0}, {{0, 0}, {1, 1}}), ValidationError);
  try {
    compute_kinematics({0, 1, 1}, {{0, 0}, {1, 1}, {2, 2}});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "zero dt");
  }
  EXPECT_THROW(compute_kinematics(track_from({0, 1, 2}, {{0, 0}, {1, 1}, {2, 2}})), ValidationError);
}

TEST(Features, StationaryInstrumentIsFullyIdle) {
  auto f = features_of(track_from({0, 1, 2, 3, 4}, {{1, 1}, {1, 1}, {1, 1}, {1, 1}, {1, 1}}));
  EXPECT_DOUBLE_EQ(f[0], 0.0);
  EXPECT_DOUBLE_EQ(f[kMeanSpeed], 0.0);
  EXPECT_DOUBLE_EQ(f[kIdle], 1.0);
  EXPECT_DOUBLE_EQ(f[kCurvature], 10.0);
  EXPECT_TRUE(all_finite(f));
}

TEST(Features, CircleSpeedAndTurningRate) {
  auto f = features_of(circle());
  ASSERT_EQ(f.size(), 14u);
  EXPECT_NEAR(f[kMeanSpeed], 1.0, 0.02);
  EXPECT_NEAR(f[kTurning], 1.0, 0.02);
  EXPECT_NEAR(f[0], 2 * std::numbers::pi, 0.02 * 2 * std::numbers::pi);
  EXPECT_NEAR(f[kDuration], 2 * std::numbers::pi, 1e-2);
}

TEST(Features, TranslationAndTimeShiftInvariance) {
  const auto base = features_of(circle(0.0, 0.01));
  const auto moved = features_of(circle(0.0, 0.01, {5.0, -3.0}));
  const auto shifted = features_of(circle(100.0, 0.01));
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_NEAR(base[i], moved[i], 1e-6 * std::max(1.0, std::abs(base[i]))) << i;
    EXPECT_NEAR(base[i], shifted[i], 1e-6 * std::max(1.0, std::abs(base[i]))) << i;
  }
}

TEST(Features, SamplingRateChangesSpeedLittle) {
  const auto fine = features_of(circle(0.0, 1e-3));
  const auto coarse = features_of(circle(0.0, 2e-3));
  EXPECT_NEAR(fine[kMeanSpeed], coarse[kMeanSpeed], 0.01);
  EXPECT_NEAR(fine[0], coarse[0], 0.01 * fine[0]);
  EXPECT_NEAR(fine[kTurning], coarse[kTurning], 0.02);
}

TEST(Features, ShortGapIsInterpolatedLongGapSplits) {
  InstrumentTrack tr{"c", "g", {}};
  for (int i = 0; i < 20; ++i) tr.samples.push_back({i, i * 0.1, {i * 1.0, 0.0}, !(i >= 5 && i < 8)});
  auto segs = usable_segments(tr, 5);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].first.size(), 20u);
  EXPECT_DOUBLE_EQ(segs[0].second[6][0], 6.0);
  EXPECT_NEAR(visibility_fraction(tr), 17.0 / 20.0, 1e-15);

  for (int i = 5; i < 12; ++i) tr.samples[i].visible = false;
  segs = usable_segments(tr, 5);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].first.size(), 5u);
  EXPECT_EQ(segs[1].first.size(), 8u);
}

TEST(Features, FullyInvisibleTrackIsTooShort) {
  InstrumentTrack tr{"c", "g", {}};
  for (int i = 0; i < 10; ++i) tr.samples.push_back({i, i * 0.1, {0.0, 0.0}, false});
  EXPECT_THROW(compute_kinematics(tr), ValidationError);
}

TEST(Features, VisibilityFractionFeature) {
  InstrumentTrack tr{"c", "g", {}};
  for (int i = 0; i < 10; ++i) tr.samples.push_back({i, i * 0.1, {i * 0.1, 0.0}, i != 4});
  EXPECT_DOUBLE_EQ(features_of(tr)[kVisibility], 0.9);
}

TEST(Scaler, TwoPointExample) {
  const auto s = fit_scaler(std::vector<std::vector<double>>{{1.0, 7.0}, {3.0, 7.0}});
  auto a = s.apply(std::vector<double>{1.0, 7.0});
  auto b = s.apply(std::vector<double>{3.0, 7.0});
  EXPECT_DOUBLE_EQ(a[0], -1.0);
  EXPECT_DOUBLE_EQ(b[0], 1.0);
  EXPECT_DOUBLE_EQ(s.apply(std::vector<double>{5.0, 7.0})[0], 3.0);
  EXPECT_TRUE(s.constant[1]);
  EXPECT_DOUBLE_EQ(a[1], 0.0);
  EXPECT_DOUBLE_EQ(s.apply(std::vector<double>{5.0, 100.0})[1], 0.0);
}

TEST(Scaler, JsonRoundTripAndErrors) {
  const auto s = fit_scaler(std::vector<std::vector<double>>{{1.0, 2.0}, {2.0, 5.0}, {4.0, 1.0}});
  const auto back = scaler_from_json(nlohmann::json::parse(scaler_to_json(s).dump()));
  EXPECT_EQ(back.mean, s.mean);
  EXPECT_EQ(back.std, s.std);
  EXPECT_EQ(back.constant, s.constant);
  EXPECT_THROW(fit_scaler(std::vector<std::vector<double>>{}), ValidationError);
  EXPECT_THROW(s.apply(std::vector<double>{1.0}), Error);
}

TEST(FeatureTable, RoundTrip) {
  NodeFeatureVector v{"c1", "hook", "calot", {}, default_feature_names()};
  for (int i = 0; i < 14; ++i) v.features.push_back(i * 0.1 + 1.0 / 3.0);
  const auto text = format_feature_table({v, v});
  const auto rows = parse_feature_table(text);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].features, v.features);
  EXPECT_EQ(rows[0].feature_names, v.feature_names);
  EXPECT_EQ(format_feature_table(rows), text);
  EXPECT_THROW(parse_feature_table("a,b,c\n"), ValidationError);
}

TEST(Features, ClipExtractionOrderAndErrorContext) {
  ClipRecord clip;
  clip.clip_id = "c";
  clip.num_frames = 20;
  clip.phases = {{"p1", 0, 10}, {"p2", 10, 20}};
  for (const std::string id : {"b", "a"}) {
    InstrumentTrack tr{"c", id, {}};
    for (int i = 0; i < 20; ++i) tr.samples.push_back({i, i * 0.1, {std::sin(i * 0.3), i * 0.05}, true});
    clip.tracks.push_back(tr);
  }
  auto rows = extract_clip_features(clip);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].phase_name, "p1");
  EXPECT_EQ(rows[2].phase_name, "p2");

  clip.phases = {{"p1", 0, 3}};
  try {
    extract_clip_features(clip);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("track too short"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("phase 'p1'"), std::string::npos);
  }
}
