#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "surgnn/core.hpp"
#include "surgnn/dataio.hpp"

namespace surgnn {

/// Identifier of the 14-feature kinematic schema. Bump when the feature list changes.
inline constexpr const char* kFeatureSchemaId = "kinematic-v1";

inline const std::vector<std::string>& default_feature_names() {
  static const std::vector<std::string> names = {
      "path_length",         "mean_speed",          "std_speed",
      "max_speed",           "mean_accel_magnitude", "std_accel_magnitude",
      "mean_jerk_magnitude", "idle_fraction",       "bbox_area",
      "duration_s",          "visibility_fraction", "turning_rate_mean",
      "curvature_proxy",     "motion_smoothness"};
  return names;
}

struct FeatureOptions {
  double idle_speed = 0.01;      // units/s
  long max_interp_gap = 5;       // invisible frames bridged by linear interpolation
  double curvature_cap = 10.0;
  std::size_t min_samples = 4;   // usable samples required per unit
};

/// Forward-difference kinematics of one contiguous segment.
struct KinematicSeries {
  std::vector<double> t;
  std::vector<std::vector<double>> position;
  std::vector<std::vector<double>> velocity;
  std::vector<double> speed;
  std::vector<std::vector<double>> acceleration;
  std::vector<std::vector<double>> jerk;
};

struct NodeFeatureVector {
  std::string clip_id;
  std::string instrument_id;
  std::string phase_name;
  std::vector<double> features;
  std::vector<std::string> feature_names;
};

namespace detail {

inline double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline std::vector<std::vector<double>> difference(const std::vector<std::vector<double>>& v,
                                                   const std::vector<double>& t) {
  std::vector<std::vector<double>> out;
  if (v.size() < 2) return out;
  out.reserve(v.size() - 1);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double dt = t[i + 1] - t[i];
    std::vector<double> d(v[i].size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = (v[i + 1][k] - v[i][k]) / dt;
    out.push_back(std::move(d));
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double pop_std(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace detail

/// Differences a contiguous sample run. Velocity, acceleration and jerk come out 1, 2 and 3
/// entries shorter than the positions (empty when too few samples).
inline KinematicSeries compute_kinematics(const std::vector<double>& t,
                                          const std::vector<std::vector<double>>& position) {
  if (t.size() != position.size()) throw Error("compute_kinematics: t/position length mismatch");
  if (t.size() < 2) throw ValidationError("track too short");
  for (std::size_t i = 0; i + 1 < t.size(); ++i)
    if (!(t[i + 1] > t[i])) throw ValidationError("zero dt");
  for (const auto& p : position)
    if (!all_finite(p)) throw ValidationError("non-finite position");
  KinematicSeries s;
  s.t = t;
  s.position = position;
  s.velocity = detail::difference(position, t);
  // Higher derivatives use the interval start times of the previous level.
  std::vector<double> tv(t.begin(), t.end() - 1);
  s.acceleration = detail::difference(s.velocity, tv);
  if (!s.acceleration.empty()) {
    std::vector<double> ta(t.begin(), t.end() - 2);
    s.jerk = detail::difference(s.acceleration, ta);
  }
  for (const auto& v : s.velocity) s.speed.push_back(detail::norm(v));
  return s;
}

/// Splits a track into contiguous usable segments. Invisible runs of at most max_interp_gap
/// frames between visible samples are linearly interpolated (in t); longer runs split the track.
/// Leading and trailing invisible samples are dropped.
inline std::vector<std::pair<std::vector<double>, std::vector<std::vector<double>>>>
usable_segments(const InstrumentTrack& track, long max_interp_gap) {
  std::vector<std::pair<std::vector<double>, std::vector<std::vector<double>>>> segments;
  const auto& s = track.samples;
  std::size_t i = 0;
  while (i < s.size() && !s[i].visible) ++i;
  if (i == s.size()) return segments;
  segments.emplace_back();
  segments.back().first.push_back(s[i].t);
  segments.back().second.push_back(s[i].position);
  std::size_t last_visible = i;
  for (std::size_t j = i + 1; j < s.size(); ++j) {
    if (!s[j].visible) continue;
    const auto& a = s[last_visible];
    const auto& b = s[j];
    const long missing = static_cast<long>(j - last_visible - 1);
    const long frame_gap = b.frame - a.frame - 1;
    const long gap = std::max(missing, frame_gap);
    if (gap > max_interp_gap) {
      segments.emplace_back();
    } else {
      for (std::size_t k = last_visible + 1; k < j; ++k) {
        const double w = (b.t > a.t) ? (s[k].t - a.t) / (b.t - a.t) : 0.0;
        std::vector<double> p(a.position.size());
        for (std::size_t d = 0; d < p.size(); ++d)
          p[d] = a.position[d] + w * (b.position[d] - a.position[d]);
        segments.back().first.push_back(s[k].t);
        segments.back().second.push_back(std::move(p));
      }
    }
    segments.back().first.push_back(b.t);
    segments.back().second.push_back(b.position);
    last_visible = j;
  }
  return segments;
}

/// Kinematics of every usable segment of a track. Segments with a single sample are skipped
/// (they contribute nothing to any difference).
inline std::vector<KinematicSeries> compute_kinematics(const InstrumentTrack& track,
                                                       const FeatureOptions& opt = {}) {
  std::vector<KinematicSeries> out;
  std::size_t usable = 0;
  for (const auto& [t, p] : usable_segments(track, opt.max_interp_gap)) {
    if (t.size() < 2) continue;
    usable += t.size();
    out.push_back(compute_kinematics(t, p));
  }
  if (usable < opt.min_samples)
    throw ValidationError("track too short (" + track.clip_id + "/" + track.instrument_id + ": " +
                          std::to_string(usable) + " usable samples)");
  return out;
}

/// Fraction of samples flagged visible.
inline double visibility_fraction(const InstrumentTrack& track) {
  if (track.samples.empty()) return 0.0;
  std::size_t v = 0;
  for (const auto& s : track.samples) v += s.visible ? 1 : 0;
  return static_cast<double>(v) / static_cast<double>(track.samples.size());
}

/// Collapses the kinematics of one (instrument, phase) unit into the 14-feature schema.
inline NodeFeatureVector summarize_unit(const std::vector<KinematicSeries>& segments,
                                        double visible_fraction = 1.0,
                                        const FeatureOptions& opt = {}) {
  std::size_t samples = 0;
  for (const auto& s : segments) samples += s.t.size();
  if (samples == 0) throw ValidationError("empty series");

  double path_length = 0.0;
  std::vector<double> speeds, accel, jerk, turning;
  double jerk_sq_integral = 0.0;
  double duration = 0.0;
  const std::size_t dim = segments.front().position.front().size();
  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());

  for (const auto& s : segments) {
    for (std::size_t i = 0; i + 1 < s.t.size(); ++i) path_length += s.speed[i] * (s.t[i + 1] - s.t[i]);
    speeds.insert(speeds.end(), s.speed.begin(), s.speed.end());
    for (const auto& a : s.acceleration) accel.push_back(detail::norm(a));
    for (std::size_t i = 0; i < s.jerk.size(); ++i) {
      const double m = detail::norm(s.jerk[i]);
      jerk.push_back(m);
      jerk_sq_integral += m * m * (s.t[i + 1] - s.t[i]);
    }
    for (const auto& p : s.position)
      for (std::size_t d = 0; d < dim; ++d) {
        lo[d] = std::min(lo[d], p[d]);
        hi[d] = std::max(hi[d], p[d]);
      }
    duration += s.t.back() - s.t.front();
    for (std::size_t i = 0; i + 1 < s.velocity.size(); ++i) {
      if (s.speed[i] < opt.idle_speed || s.speed[i + 1] < opt.idle_speed) continue;
      const auto& a = s.velocity[i];
      const auto& b = s.velocity[i + 1];
      const double ab = dot(a, b);
      const double cross_sq = std::max(0.0, dot(a, a) * dot(b, b) - ab * ab);
      turning.push_back(std::atan2(std::sqrt(cross_sq), ab) / (s.t[i + 1] - s.t[i]));
    }
  }

  const auto& first = segments.front().position.front();
  const auto& last = segments.back().position.back();
  double disp_sq = 0.0;
  for (std::size_t d = 0; d < dim; ++d) disp_sq += (last[d] - first[d]) * (last[d] - first[d]);
  const double displacement = std::sqrt(disp_sq);

  double extent = 1.0;
  for (std::size_t d = 0; d < dim; ++d) extent *= (hi[d] - lo[d]);

  std::size_t idle = 0;
  for (double v : speeds) idle += v < opt.idle_speed ? 1 : 0;

  double curvature = opt.curvature_cap;
  if (displacement > 0.0) curvature = std::min(path_length / displacement, opt.curvature_cap);

  double smoothness = 0.0;
  if (path_length > 1e-12 && duration > 0.0) {
    const double dimensionless_jerk =
        std::pow(duration, 5) / (path_length * path_length) * jerk_sq_integral;
    smoothness = -std::log(dimensionless_jerk + 1e-12);
  }

  NodeFeatureVector out;
  out.feature_names = default_feature_names();
  out.features = {path_length,
                  detail::mean_of(speeds),
                  detail::pop_std(speeds),
                  speeds.empty() ? 0.0 : *std::max_element(speeds.begin(), speeds.end()),
                  detail::mean_of(accel),
                  detail::pop_std(accel),
                  detail::mean_of(jerk),
                  speeds.empty() ? 1.0 : static_cast<double>(idle) / static_cast<double>(speeds.size()),
                  std::log(extent + 1e-6),
                  duration,
                  visible_fraction,
                  detail::mean_of(turning),
                  curvature,
                  smoothness};
  return out;
}

/// Restricts a track to the frames of one phase.
inline InstrumentTrack slice_track(const InstrumentTrack& track, const PhaseAnnotation& phase) {
  InstrumentTrack out{track.clip_id, track.instrument_id, {}};
  for (const auto& s : track.samples)
    if (s.frame >= phase.start_frame && s.frame < phase.end_frame) out.samples.push_back(s);
  return out;
}

/// One feature vector per (instrument, phase) unit of a clip, ordered by phase then instrument.
inline std::vector<NodeFeatureVector> extract_clip_features(const ClipRecord& clip,
                                                            const FeatureOptions& opt = {}) {
  std::vector<NodeFeatureVector> out;
  for (const auto& phase : clip.phases) {
    for (const auto& track : clip.tracks) {
      auto unit = slice_track(track, phase);
      if (unit.samples.empty()) continue;
      try {
        auto v = summarize_unit(compute_kinematics(unit, opt), visibility_fraction(unit), opt);
        v.clip_id = clip.clip_id;
        v.instrument_id = track.instrument_id;
        v.phase_name = phase.phase_name;
        out.push_back(std::move(v));
      } catch (const ValidationError& e) {
        throw ValidationError("clip '" + clip.clip_id + "', instrument '" + track.instrument_id +
                              "', phase '" + phase.phase_name + "': " + e.what());
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<bool> constant;

  std::vector<double> apply(std::span<const double> v) const {
    if (v.size() != mean.size()) throw Error("FeatureScaler: feature length mismatch");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      out[i] = constant[i] ? 0.0 : (v[i] - mean[i]) / std[i];
    return out;
  }
};

inline FeatureScaler fit_scaler(const std::vector<std::vector<double>>& train) {
  if (train.empty()) throw ValidationError("fit_scaler: empty training set");
  const std::size_t f = train.front().size();
  FeatureScaler s;
  s.mean.assign(f, 0.0);
  s.std.assign(f, 0.0);
  s.constant.assign(f, false);
  for (const auto& v : train) {
    if (v.size() != f) throw ValidationError("fit_scaler: ragged feature vectors");
    for (std::size_t i = 0; i < f; ++i) s.mean[i] += v[i];
  }
  const double n = static_cast<double>(train.size());
  for (auto& m : s.mean) m /= n;
  for (const auto& v : train)
    for (std::size_t i = 0; i < f; ++i) s.std[i] += (v[i] - s.mean[i]) * (v[i] - s.mean[i]);
  for (std::size_t i = 0; i < f; ++i) {
    s.std[i] = std::sqrt(s.std[i] / n);
    if (s.std[i] <= 1e-12 * std::max(1.0, std::abs(s.mean[i]))) {
      s.constant[i] = true;
      s.std[i] = 1.0;
    }
  }
  return s;
}

inline FeatureScaler fit_scaler(const std::vector<NodeFeatureVector>& train) {
  std::vector<std::vector<double>> rows;
  for (const auto& v : train) rows.push_back(v.features);
  return fit_scaler(rows);
}

inline NodeFeatureVector apply_scaler(const FeatureScaler& s, NodeFeatureVector v) {
  v.features = s.apply(v.features);
  return v;
}

inline nlohmann::json scaler_to_json(const FeatureScaler& s) {
  nlohmann::json j;
  j["mean"] = s.mean;
  j["std"] = s.std;
  j["constant"] = s.constant;
  return j;
}

inline FeatureScaler scaler_from_json(const nlohmann::json& j) {
  FeatureScaler s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  s.constant = j.at("constant").get<std::vector<bool>>();
  return s;
}

// ---------------------------------------------------------------------------
// Feature table CSV
// ---------------------------------------------------------------------------

inline std::string format_feature_table(const std::vector<NodeFeatureVector>& rows) {
  const auto& names = rows.empty() ? default_feature_names() : rows.front().feature_names;
  std::string out = "clip_id,instrument_id,phase_name";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  for (const auto& r : rows) {
    if (r.features.size() != names.size())
      throw ValidationError("feature table: vector length differs from schema");
    out += r.clip_id + "," + r.instrument_id + "," + r.phase_name;
    for (double v : r.features) out += "," + detail::fmt_double(v);
    out += "\n";
  }
  return out;
}

inline std::vector<NodeFeatureVector> parse_feature_table(const std::string& text,
                                                          const std::string& source = "<features>") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(source + ": empty feature table");
  auto header = detail::split_csv_line(line);
  if (header.size() < 4 || header[0] != "clip_id" || header[1] != "instrument_id" ||
      header[2] != "phase_name")
    throw ValidationError(source + ": bad feature table header");
  std::vector<std::string> names(header.begin() + 3, header.end());
  std::vector<NodeFeatureVector> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    const std::string where = source + " row " + std::to_string(row);
    if (f.size() != header.size()) throw ValidationError(where + ": wrong field count");
    NodeFeatureVector v{f[0], f[1], f[2], {}, names};
    for (std::size_t i = 3; i < f.size(); ++i) v.features.push_back(detail::parse_double(f[i], where));
    if (!all_finite(v.features)) throw ValidationError(where + ": non-finite feature");
    rows.push_back(std::move(v));
  }
  return rows;
}

}  // namespace surgnn
