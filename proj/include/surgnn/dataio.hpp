#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "surgnn/core.hpp"

namespace surgnn {

enum class Mode { k2D, k3D };

inline std::string to_string(Mode m) { return m == Mode::k2D ? "2D" : "3D"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "2D") return Mode::k2D;
  if (s == "3D") return Mode::k3D;
  throw ValidationError("unknown mode '" + s + "' (expected 2D or 3D)");
}

enum class SkillClass { kNovice, kIntermediate, kExpert };

inline std::string to_string(SkillClass c) {
  switch (c) {
    case SkillClass::kNovice: return "novice";
    case SkillClass::kIntermediate: return "intermediate";
    case SkillClass::kExpert: return "expert";
  }
  return "?";
}

inline SkillClass parse_skill_class(const std::string& s) {
  if (s == "novice") return SkillClass::kNovice;
  if (s == "intermediate") return SkillClass::kIntermediate;
  if (s == "expert") return SkillClass::kExpert;
  throw ValidationError("unknown skill_class '" + s + "'");
}

enum class Split { kTrain, kVal, kTest };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ValidationError("unknown split '" + s + "' (expected train, val or test)");
}

struct TrackSample {
  long frame = 0;
  double t = 0.0;
  std::vector<double> position;  // 2 or 3 coordinates
  bool visible = true;
};

struct InstrumentTrack {
  std::string clip_id;
  std::string instrument_id;
  std::vector<TrackSample> samples;

  std::size_t dim() const { return samples.empty() ? 0 : samples.front().position.size(); }
};

/// Frames [start_frame, end_frame) belong to the phase.
struct PhaseAnnotation {
  std::string phase_name;
  long start_frame = 0;
  long end_frame = 0;
};

struct OrdinalScale {
  int min = 1;
  int max = 5;

  int num_classes() const { return max - min + 1; }
  bool contains(int v) const { return v >= min && v <= max; }
};

struct ClipRecord {
  std::string clip_id;
  Mode mode = Mode::k2D;
  long num_frames = 0;
  std::string trajectories;  // CSV path as written in the clip file (relative to it)
  std::vector<InstrumentTrack> tracks;
  std::vector<PhaseAnnotation> phases;
  std::map<std::string, int> labels;
  std::optional<SkillClass> skill_class;
};

struct DatasetManifest {
  std::filesystem::path base_dir;        // directory holding the manifest file
  std::vector<std::string> clip_paths;   // as written, relative to base_dir, ordered by clip_id
  std::vector<ClipRecord> clips;         // ordered by clip_id
  OrdinalScale ordinal_scale;
  std::vector<std::string> categories;
  std::map<std::string, Split> split;

  const ClipRecord& clip(const std::string& id) const {
    for (const auto& c : clips)
      if (c.clip_id == id) return c;
    throw ValidationError("unknown clip '" + id + "'");
  }
};

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline const nlohmann::json& require(const nlohmann::json& j, const std::string& key,
                                     const std::string& path) {
  if (!j.is_object()) throw ValidationError("schema violation at " + path + ": expected object");
  auto it = j.find(key);
  if (it == j.end())
    throw ValidationError("schema violation at " + path + "." + key + ": missing field");
  return *it;
}

inline std::string require_string(const nlohmann::json& j, const std::string& key,
                                  const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_string())
    throw ValidationError("schema violation at " + path + "." + key + ": expected string");
  return v.get<std::string>();
}

inline long require_int(const nlohmann::json& j, const std::string& key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_number_integer())
    throw ValidationError("schema violation at " + path + "." + key + ": expected integer");
  return v.get<long>();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan" || s == "NaN" || s == "NAN") return std::nan("");
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ValidationError(where + ": not a number '" + s + "'");
  return v;
}

inline long parse_long(const std::string& s, const std::string& where) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ValidationError(where + ": not an integer '" + s + "'");
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------

/// Parses trajectory CSV text. One track per (clip_id, instrument_id), ordered by that key,
/// samples sorted by frame. Row order in the input does not matter.
inline std::vector<InstrumentTrack> parse_trajectories(const std::string& text,
                                                       const std::string& source = "<csv>") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(source + ": empty trajectory file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::size_t dim = 0;
  if (line == "clip_id,instrument_id,frame,t,x,y,visible")
    dim = 2;
  else if (line == "clip_id,instrument_id,frame,t,x,y,z,visible")
    dim = 3;
  else
    throw ValidationError(source + ": bad header '" + line + "'");

  std::map<std::pair<std::string, std::string>, InstrumentTrack> groups;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::string where = source + " row " + std::to_string(row);
    auto f = detail::split_csv_line(line);
    if (f.size() != dim + 5) throw ValidationError(where + ": expected " +
                                                   std::to_string(dim + 5) + " fields");
    TrackSample s;
    s.frame = detail::parse_long(f[2], where);
    s.t = detail::parse_double(f[3], where);
    s.position.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) s.position[d] = detail::parse_double(f[4 + d], where);
    const std::string& vis = f[4 + dim];
    if (vis == "1" || vis == "true")
      s.visible = true;
    else if (vis == "0" || vis == "false")
      s.visible = false;
    else
      throw ValidationError(where + ": bad visible flag '" + vis + "'");
    if (!std::isfinite(s.t)) throw ValidationError(where + ": non-finite t");
    if (s.visible && !all_finite(s.position))
      throw ValidationError(where + ": non-finite position on visible sample");
    auto& track = groups[{f[0], f[1]}];
    track.clip_id = f[0];
    track.instrument_id = f[1];
    track.samples.push_back(std::move(s));
  }

  std::vector<InstrumentTrack> tracks;
  for (auto& [key, track] : groups) {
    std::sort(track.samples.begin(), track.samples.end(),
              [](const TrackSample& a, const TrackSample& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < track.samples.size(); ++i) {
      const auto& prev = track.samples[i - 1];
      const auto& cur = track.samples[i];
      if (cur.frame == prev.frame)
        throw ValidationError(source + ": non-monotone frames in track " + key.first + "/" +
                              key.second + " (duplicate frame " + std::to_string(cur.frame) + ")");
      if (cur.t < prev.t)
        throw ValidationError(source + ": time decreases in track " + key.first + "/" +
                              key.second + " at frame " + std::to_string(cur.frame));
    }
    tracks.push_back(std::move(track));
  }
  return tracks;
}

inline std::vector<InstrumentTrack> load_trajectories(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw ValidationError("missing trajectory file: " + path.string());
  return parse_trajectories(read_text_file(path.string()), path.string());
}

inline std::string format_trajectories(const std::vector<InstrumentTrack>& tracks) {
  std::size_t dim = 2;
  for (const auto& t : tracks)
    if (t.dim() != 0) {
      dim = t.dim();
      break;
    }
  std::string out = dim == 3 ? "clip_id,instrument_id,frame,t,x,y,z,visible\n"
                             : "clip_id,instrument_id,frame,t,x,y,visible\n";
  for (const auto& track : tracks) {
    if (track.dim() != 0 && track.dim() != dim)
      throw ValidationError("format_trajectories: mixed dimensionality");
    for (const auto& s : track.samples) {
      out += track.clip_id;
      out += ',';
      out += track.instrument_id;
      out += ',';
      out += std::to_string(s.frame);
      out += ',';
      out += detail::fmt_double(s.t);
      for (double p : s.position) {
        out += ',';
        out += detail::fmt_double(s.visible ? p : std::nan(""));
      }
      out += s.visible ? ",1\n" : ",0\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Clip and manifest JSON
// ---------------------------------------------------------------------------

inline nlohmann::json clip_to_json(const ClipRecord& clip) {
  nlohmann::json j;
  j["clip_id"] = clip.clip_id;
  j["mode"] = to_string(clip.mode);
  j["num_frames"] = clip.num_frames;
  j["trajectories"] = clip.trajectories;
  j["phases"] = nlohmann::json::array();
  for (const auto& p : clip.phases)
    j["phases"].push_back(
        {{"name", p.phase_name}, {"start_frame", p.start_frame}, {"end_frame", p.end_frame}});
  j["labels"] = nlohmann::json::object();
  for (const auto& [k, v] : clip.labels) j["labels"][k] = v;
  if (clip.skill_class) j["skill_class"] = to_string(*clip.skill_class);
  return j;
}

/// Reads a clip file and its trajectory CSV. Tracks belonging to other clip ids are dropped.
inline ClipRecord load_clip(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("missing clip file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path.string()));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
  const std::string p = path.filename().string();
  ClipRecord clip;
  clip.clip_id = detail::require_string(j, "clip_id", p);
  clip.mode = parse_mode(detail::require_string(j, "mode", p));
  clip.num_frames = detail::require_int(j, "num_frames", p);
  clip.trajectories = detail::require_string(j, "trajectories", p);
  const auto& phases = detail::require(j, "phases", p);
  if (!phases.is_array()) throw ValidationError("schema violation at " + p + ".phases: expected array");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const std::string pp = p + ".phases[" + std::to_string(i) + "]";
    clip.phases.push_back({detail::require_string(phases[i], "name", pp),
                           detail::require_int(phases[i], "start_frame", pp),
                           detail::require_int(phases[i], "end_frame", pp)});
  }
  const auto& labels = detail::require(j, "labels", p);
  if (!labels.is_object())
    throw ValidationError("schema violation at " + p + ".labels: expected object");
  for (auto it = labels.begin(); it != labels.end(); ++it) {
    if (!it->is_number_integer())
      throw ValidationError("schema violation at " + p + ".labels." + it.key() +
                            ": expected integer");
    clip.labels[it.key()] = it->get<int>();
  }
  if (j.contains("skill_class"))
    clip.skill_class = parse_skill_class(detail::require_string(j, "skill_class", p));

  const auto csv = path.parent_path() / clip.trajectories;
  if (!std::filesystem::exists(csv))
    throw ValidationError("dangling trajectory reference in " + path.string() +
                          ": missing file " + csv.string());
  for (auto& t : load_trajectories(csv))
    if (t.clip_id == clip.clip_id) clip.tracks.push_back(std::move(t));
  return clip;
}

/// Fills in skill_class from empirical tertiles of the "Overall" score for clips that lack one.
inline void derive_skill_classes(DatasetManifest& m) {
  std::vector<int> scores;
  for (const auto& c : m.clips)
    if (auto it = c.labels.find("Overall"); it != c.labels.end()) scores.push_back(it->second);
  if (scores.empty()) return;
  std::sort(scores.begin(), scores.end());
  const int q1 = scores[scores.size() / 3];
  const int q2 = scores[(2 * scores.size()) / 3];
  for (auto& c : m.clips) {
    if (c.skill_class) continue;
    auto it = c.labels.find("Overall");
    if (it == c.labels.end()) continue;
    c.skill_class = it->second < q1   ? SkillClass::kNovice
                    : it->second < q2 ? SkillClass::kIntermediate
                                      : SkillClass::kExpert;
  }
}

inline DatasetManifest load_manifest(const std::filesystem::path& path_in) {
  std::filesystem::path path = path_in;
  if (std::filesystem::is_directory(path)) path /= "manifest.json";
  if (!std::filesystem::exists(path)) throw ValidationError("missing manifest file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path.string()));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
  DatasetManifest m;
  m.base_dir = path.parent_path();
  const std::string root = "manifest";

  if (j.contains("ordinal_scale")) {
    const auto& s = j["ordinal_scale"];
    m.ordinal_scale.min = static_cast<int>(detail::require_int(s, "min", root + ".ordinal_scale"));
    m.ordinal_scale.max = static_cast<int>(detail::require_int(s, "max", root + ".ordinal_scale"));
    if (m.ordinal_scale.min >= m.ordinal_scale.max)
      throw ValidationError("schema violation at manifest.ordinal_scale: min must be < max");
  }
  const auto& cats = detail::require(j, "categories", root);
  if (!cats.is_array() || cats.empty())
    throw ValidationError("schema violation at manifest.categories: expected non-empty array");
  for (std::size_t i = 0; i < cats.size(); ++i) {
    if (!cats[i].is_string())
      throw ValidationError("schema violation at manifest.categories[" + std::to_string(i) +
                            "]: expected string");
    m.categories.push_back(cats[i].get<std::string>());
  }

  const auto& clips = detail::require(j, "clips", root);
  if (!clips.is_array()) throw ValidationError("schema violation at manifest.clips: expected array");
  std::vector<std::pair<ClipRecord, std::string>> loaded;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (!clips[i].is_string())
      throw ValidationError("schema violation at manifest.clips[" + std::to_string(i) +
                            "]: expected string");
    const std::string rel = clips[i].get<std::string>();
    const auto clip_path = m.base_dir / rel;
    if (!std::filesystem::exists(clip_path))
      throw ValidationError("dangling clip reference manifest.clips[" + std::to_string(i) +
                            "]: missing file " + clip_path.string());
    loaded.emplace_back(load_clip(clip_path), rel);
  }
  std::sort(loaded.begin(), loaded.end(),
            [](const auto& a, const auto& b) { return a.first.clip_id < b.first.clip_id; });
  for (std::size_t i = 1; i < loaded.size(); ++i)
    if (loaded[i].first.clip_id == loaded[i - 1].first.clip_id)
      throw ValidationError("duplicate clip_id '" + loaded[i].first.clip_id + "'");

  const auto& split = detail::require(j, "split", root);
  if (!split.is_object()) throw ValidationError("schema violation at manifest.split: expected object");
  for (auto it = split.begin(); it != split.end(); ++it) {
    if (!it->is_string())
      throw ValidationError("schema violation at manifest.split." + it.key() + ": expected string");
    m.split[it.key()] = parse_split(it->get<std::string>());
  }

  for (auto& [clip, rel] : loaded) {
    if (!m.split.contains(clip.clip_id))
      throw ValidationError("manifest.split does not assign clip '" + clip.clip_id + "'");
    for (const auto& [cat, score] : clip.labels) {
      if (std::find(m.categories.begin(), m.categories.end(), cat) == m.categories.end())
        throw ValidationError("clip '" + clip.clip_id + "': unknown category '" + cat + "'");
      if (!m.ordinal_scale.contains(score))
        throw ValidationError("clip '" + clip.clip_id + "': label out of scale (" + cat + " = " +
                              std::to_string(score) + ", scale " +
                              std::to_string(m.ordinal_scale.min) + ".." +
                              std::to_string(m.ordinal_scale.max) + ")");
    }
    m.clip_paths.push_back(rel);
    m.clips.push_back(std::move(clip));
  }
  for (const auto& [id, s] : m.split) {
    bool found = false;
    for (const auto& c : m.clips) found = found || c.clip_id == id;
    if (!found) throw ValidationError("manifest.split names unknown clip '" + id + "'");
  }
  derive_skill_classes(m);
  return m;
}

/// Canonical (key-sorted, two-space indented) manifest JSON.
inline std::string write_manifest(const DatasetManifest& m) {
  nlohmann::json j;
  j["ordinal_scale"] = {{"min", m.ordinal_scale.min}, {"max", m.ordinal_scale.max}};
  j["categories"] = m.categories;
  j["clips"] = m.clip_paths;
  j["split"] = nlohmann::json::object();
  for (const auto& [id, s] : m.split) j["split"][id] = to_string(s);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  std::string clip_id;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool accepted() const { return violations.empty(); }

  std::string to_text() const {
    std::string out;
    for (const auto& v : violations) out += v.clip_id + ": " + v.message + "\n";
    return out;
  }
};

inline ValidationReport validate_dataset(const DatasetManifest& m) {
  ValidationReport r;
  auto add = [&](const std::string& id, std::string msg) { r.violations.push_back({id, std::move(msg)}); };
  for (const auto& c : m.clips) {
    if (c.tracks.empty()) add(c.clip_id, "no instrument tracks");
    if (c.phases.empty()) add(c.clip_id, "no phases");
    for (const auto& p : c.phases)
      if (p.start_frame >= p.end_frame) add(c.clip_id, "empty phase '" + p.phase_name + "'");
    for (std::size_t i = 1; i < c.phases.size(); ++i)
      if (c.phases[i].start_frame < c.phases[i - 1].end_frame)
        add(c.clip_id, "phases overlap ('" + c.phases[i - 1].phase_name + "', '" +
                           c.phases[i].phase_name + "')");
    const std::size_t want_dim = c.mode == Mode::k2D ? 2 : 3;
    for (const auto& t : c.tracks) {
      if (t.samples.empty()) {
        add(c.clip_id, "track '" + t.instrument_id + "' has no samples");
        continue;
      }
      for (const auto& s : t.samples) {
        if (s.position.size() != want_dim) {
          add(c.clip_id, "track '" + t.instrument_id + "' dimensionality does not match mode " +
                             to_string(c.mode));
          break;
        }
      }
      if (t.samples.front().frame < 0 || t.samples.back().frame >= c.num_frames)
        add(c.clip_id, "track '" + t.instrument_id + "' frames outside clip range");
      for (std::size_t i = 1; i < t.samples.size(); ++i)
        if (t.samples[i].frame <= t.samples[i - 1].frame || t.samples[i].t < t.samples[i - 1].t) {
          add(c.clip_id, "track '" + t.instrument_id + "' not monotone");
          break;
        }
    }
    for (const auto& [cat, score] : c.labels)
      if (!m.ordinal_scale.contains(score)) add(c.clip_id, "label out of scale (" + cat + ")");
    if (!m.split.contains(c.clip_id)) add(c.clip_id, "clip missing from split");
  }
  return r;
}

}  // namespace surgnn
