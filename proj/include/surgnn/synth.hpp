#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "surgnn/core.hpp"
#include "surgnn/dataio.hpp"
#include "surgnn/eval.hpp"

namespace surgnn {

struct SynthSpec {
  std::size_t n_clips = 300;
  std::array<double, 3> class_proportions = {1.0 / 3, 1.0 / 3, 1.0 / 3};  // novice, intermediate, expert
  std::size_t instruments = 2;
  std::vector<std::string> phases = {"calot", "dissection"};
  long frames_per_phase = 150;
  double sample_rate_hz = 25.0;
  double noise = 1e-4;        // white positional noise (units)
  double label_noise = 0.1;   // ordinal-score noise before rounding
  std::uint64_t seed = 0;
  Mode mode = Mode::k2D;
  std::vector<std::string> categories = {"Overall", "Economy of movements", "Time and Motion"};
  OrdinalScale ordinal_scale{1, 5};

  void validate() const {
    double sum = 0.0;
    for (double p : class_proportions) {
      if (p < 0.0) throw ValidationError("synth: negative class proportion");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("synth: class proportions must sum to 1");
    if (n_clips < 3) throw ValidationError("synth: n_clips must be >= 3");
    if (instruments < 1 || phases.empty() || frames_per_phase < 20 || !(sample_rate_hz > 0.0))
      throw ValidationError("synth: degenerate spec");
    if (!(noise >= 0.0) || !(label_noise >= 0.0)) throw ValidationError("synth: noise must be >= 0");
  }
};

/// Skill-dependent motion parameters, interpolated linearly in the latent skill s in [0, 1]
/// (0 = novice, 1 = expert).
struct MotionStyle {
  double lateral_fraction;  // lateral detour amplitude relative to the straight-line distance
  double tremor_amplitude;
  double tremor_hz;
  double idle_fraction;

  static MotionStyle for_skill(double s) {
    auto lerp = [s](double novice, double expert) { return novice + (expert - novice) * s; };
    return {lerp(0.5, 0.25), lerp(0.003, 0.001), lerp(7.0, 4.0), lerp(0.35, 0.10)};
  }
};

inline double skill_center(SkillClass c) {
  switch (c) {
    case SkillClass::kNovice: return 0.0;
    case SkillClass::kIntermediate: return 0.5;
    case SkillClass::kExpert: return 1.0;
  }
  return 0.0;
}

struct SyntheticClip {
  ClipRecord clip;
  double latent_skill = 0.0;
};

/// One synthetic clip. Each instrument travels between random waypoints once per phase along a
/// smooth detour, pausing for skill-dependent idle spells, with skill-dependent tremor on top.
inline SyntheticClip generate_clip(SkillClass skill, const SynthSpec& spec, std::mt19937_64& rng,
                                   const std::string& clip_id = "clip") {
  spec.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double s = std::clamp(skill_center(skill) + 0.1 * (unit(rng) - 0.5), 0.0, 1.0);
  const MotionStyle style = MotionStyle::for_skill(s);
  const std::size_t dim = spec.mode == Mode::k2D ? 2 : 3;
  const double two_pi = 2.0 * std::numbers::pi;

  SyntheticClip out;
  out.latent_skill = s;
  ClipRecord& clip = out.clip;
  clip.clip_id = clip_id;
  clip.mode = spec.mode;
  clip.num_frames = spec.frames_per_phase * static_cast<long>(spec.phases.size());
  clip.trajectories = clip_id + ".csv";
  clip.skill_class = skill;
  for (std::size_t p = 0; p < spec.phases.size(); ++p)
    clip.phases.push_back({spec.phases[p], static_cast<long>(p) * spec.frames_per_phase,
                           static_cast<long>(p + 1) * spec.frames_per_phase});

  const double T = static_cast<double>(spec.frames_per_phase) / spec.sample_rate_hz;
  for (std::size_t inst = 0; inst < spec.instruments; ++inst) {
    InstrumentTrack track;
    track.clip_id = clip_id;
    char name[16];
    std::snprintf(name, sizeof(name), "inst%zu", inst);
    track.instrument_id = name;
    std::vector<double> pos(dim);
    for (double& x : pos) x = 0.15 + 0.7 * unit(rng);

    for (std::size_t p = 0; p < spec.phases.size(); ++p) {
      std::vector<double> target(dim);
      double dist = 0.0;
      do {
        dist = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          target[d] = 0.15 + 0.7 * unit(rng);
          dist += (target[d] - pos[d]) * (target[d] - pos[d]);
        }
        dist = std::sqrt(dist);
      } while (dist < 0.25);
      std::vector<double> dir(dim), normal(dim, 0.0);
      for (std::size_t d = 0; d < dim; ++d) dir[d] = (target[d] - pos[d]) / dist;
      if (dim == 2) {
        normal = {-dir[1], dir[0]};
      } else {
        // Gram-Schmidt a random vector against dir.
        std::vector<double> r(3);
        double nn = 0.0;
        do {
          for (double& x : r) x = gauss(rng);
          const double proj = dot(r, dir);
          for (std::size_t d = 0; d < 3; ++d) normal[d] = r[d] - proj * dir[d];
          nn = std::sqrt(dot(normal, normal));
        } while (nn < 1e-6);
        for (double& x : normal) x /= nn;
      }
      const double bend2 = 0.6 * (unit(rng) - 0.5);
      const double lateral = style.lateral_fraction * dist * (unit(rng) < 0.5 ? 1.0 : -1.0);

      // Two idle spells of random placement covering idle_fraction of the phase.
      const double idle_total = style.idle_fraction * T;
      const double idle_a = idle_total * (0.3 + 0.4 * unit(rng));
      const double idle_b = idle_total - idle_a;
      const double move_total = T - idle_total;
      double cut1 = move_total * (0.1 + 0.35 * unit(rng));
      double cut2 = move_total * (0.55 + 0.35 * unit(rng));
      auto moving_time = [&](double t) {
        // Moving time elapsed by local time t (0..T), with pauses after cut1 and cut2.
        if (t < cut1) return t;
        if (t < cut1 + idle_a) return cut1;
        if (t < cut2 + idle_a) return t - idle_a;
        if (t < cut2 + idle_a + idle_b) return cut2;
        return t - idle_total;
      };
      auto is_idle = [&](double t) {
        return (t >= cut1 && t < cut1 + idle_a) || (t >= cut2 + idle_a && t < cut2 + idle_a + idle_b);
      };
      std::vector<double> phase_off(dim);
      std::vector<double> hz(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        phase_off[d] = two_pi * unit(rng);
        hz[d] = style.tremor_hz * (0.8 + 0.4 * unit(rng));
      }
      long gap_start = -1, gap_len = 0;
      if (unit(rng) < 0.3) {
        gap_len = 1 + static_cast<long>(unit(rng) * 4.0);
        gap_start = 5 + static_cast<long>(unit(rng) * static_cast<double>(spec.frames_per_phase - 10 - gap_len));
      }

      for (long f = 0; f < spec.frames_per_phase; ++f) {
        const double tl = static_cast<double>(f) / spec.sample_rate_hz;
        const double x = std::clamp(moving_time(tl) / move_total, 0.0, 1.0);
        const double u = x - std::sin(two_pi * x) / two_pi;
        const double detour = lateral * (std::sin(std::numbers::pi * u) + bend2 * std::sin(two_pi * u));
        const double tg = static_cast<double>(p * static_cast<std::size_t>(spec.frames_per_phase) + static_cast<std::size_t>(f)) /
                          spec.sample_rate_hz;
        TrackSample smp;
        smp.frame = static_cast<long>(p) * spec.frames_per_phase + f;
        smp.t = tg;
        smp.position.resize(dim);
        const bool idle = is_idle(tl);
        for (std::size_t d = 0; d < dim; ++d) {
          double v = pos[d] + u * (target[d] - pos[d]) + detour * normal[d];
          if (!idle) v += style.tremor_amplitude * std::sin(two_pi * hz[d] * tg + phase_off[d]);
          v += spec.noise * gauss(rng);
          smp.position[d] = v;
        }
        smp.visible = !(f >= gap_start && f < gap_start + gap_len);
        track.samples.push_back(std::move(smp));
      }
      pos = target;
    }
    clip.tracks.push_back(std::move(track));
  }

  std::normal_distribution<double> label_noise(0.0, spec.label_noise);
  const auto& sc = spec.ordinal_scale;
  for (const auto& cat : spec.categories) {
    const double raw = sc.min + (sc.max - sc.min) * s + (spec.label_noise > 0.0 ? label_noise(rng) : 0.0);
    clip.labels[cat] = std::clamp(static_cast<int>(std::lround(raw)), sc.min, sc.max);
  }
  return out;
}

struct SynthResult {
  DatasetManifest manifest;
  std::vector<double> latent_skill;  // parallel to manifest.clips
};

/// Writes manifest.json plus clips/<id>.json and clips/<id>.csv under out_dir. Splits are a
/// seeded 70/15/15 shuffle. Fails if any category's labels correlate with the latent skill below
/// 0.8 (Spearman).
inline SynthResult generate_dataset(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir / "clips");

  // Largest-remainder class counts.
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double exact = spec.class_proportions[c] * static_cast<double>(spec.n_clips);
    counts[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[c] = exact - static_cast<double>(counts[c]);
    assigned += counts[c];
  }
  while (assigned < spec.n_clips) {
    const auto c = static_cast<std::size_t>(std::max_element(rem.begin(), rem.end()) - rem.begin());
    ++counts[c];
    rem[c] = -1.0;
    ++assigned;
  }
  std::vector<SkillClass> classes;
  for (std::size_t c = 0; c < 3; ++c) classes.insert(classes.end(), counts[c], static_cast<SkillClass>(c));
  std::mt19937_64 master(spec.seed);
  std::shuffle(classes.begin(), classes.end(), master);

  SynthResult result;
  DatasetManifest& m = result.manifest;
  m.base_dir = out_dir;
  m.ordinal_scale = spec.ordinal_scale;
  m.categories = spec.categories;
  for (std::size_t i = 0; i < spec.n_clips; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "clip%04zu", i);
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(i), 0x5e7du};
    std::mt19937_64 rng(seq);
    auto gen = generate_clip(classes[i], spec, rng, id);
    write_text_file((out_dir / "clips" / (std::string(id) + ".json")).string(), clip_to_json(gen.clip).dump(2) + "\n");
    write_text_file((out_dir / "clips" / gen.clip.trajectories).string(), format_trajectories(gen.clip.tracks));
    m.clip_paths.push_back("clips/" + std::string(id) + ".json");
    result.latent_skill.push_back(gen.latent_skill);
    m.clips.push_back(std::move(gen.clip));
  }

  std::vector<std::size_t> order(spec.n_clips);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), master);
  const auto n_train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(spec.n_clips)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(spec.n_clips)));
  for (std::size_t r = 0; r < order.size(); ++r)
    m.split[m.clips[order[r]].clip_id] = r < n_train ? Split::kTrain : r < n_train + n_val ? Split::kVal : Split::kTest;

  for (const auto& cat : spec.categories) {
    std::vector<double> lab;
    for (const auto& c : m.clips) lab.push_back(c.labels.at(cat));
    double rho = 0.0;
    try {
      rho = spearman(result.latent_skill, lab);
    } catch (const DegenerateInput&) {
      rho = 0.0;
    }
    if (rho < 0.8)
      throw ValidationError("synth: label/latent-skill Spearman for '" + cat + "' is " + std::to_string(rho) +
                            " (< 0.8)");
  }
  write_text_file((out_dir / "manifest.json").string(), write_manifest(m));
  return result;
}

}  // namespace surgnn
