#include <gtest/gtest.h>

#include "oracles.hpp"
#include "surgnn/synth.hpp"

using namespace surgnn;
namespace fs = std::filesystem;

namespace {

double mean_curvature(const ClipRecord& clip) {
  const auto rows = extract_clip_features(clip);
  double s = 0.0;
  for (const auto& r : rows) s += r.features[12];
  return s / static_cast<double>(rows.size());
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_text_file(e.path().string());
  return out;
}

}  // namespace

TEST(GenerateClip, DeterministicForSameSeed) {
  SynthSpec spec;
  std::mt19937_64 a(5), b(5);
  const auto x = generate_clip(SkillClass::kIntermediate, spec, a, "c");
  const auto y = generate_clip(SkillClass::kIntermediate, spec, b, "c");
  EXPECT_EQ(format_trajectories(x.clip.tracks), format_trajectories(y.clip.tracks));
  EXPECT_EQ(clip_to_json(x.clip), clip_to_json(y.clip));
  EXPECT_EQ(x.latent_skill, y.latent_skill);
  EXPECT_EQ(x.clip.tracks.size(), 2u);
  EXPECT_EQ(x.clip.phases.size(), 2u);
}

TEST(GenerateClip, ThreeDimensionalMode) {
  SynthSpec spec;
  spec.mode = Mode::k3D;
  std::mt19937_64 rng(1);
  const auto c = generate_clip(SkillClass::kExpert, spec, rng, "c");
  for (const auto& t : c.clip.tracks) EXPECT_EQ(t.dim(), 3u);
  EXPECT_EQ(extract_clip_features(c.clip).size(), 4u);
}

TEST(GenerateClip, ExpertPathsAreStraighterThanNovice) {
  SynthSpec spec;
  spec.noise = 0.0;
  int holds = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 a(seed), b(seed);
    const double expert = mean_curvature(generate_clip(SkillClass::kExpert, spec, a, "e").clip);
    const double novice = mean_curvature(generate_clip(SkillClass::kNovice, spec, b, "n").clip);
    holds += expert < novice ? 1 : 0;
  }
  EXPECT_GE(holds, 95);
}

TEST(GenerateClip, DegenerateSpecRejected) {
  SynthSpec spec;
  std::mt19937_64 rng(1);
  spec.class_proportions = {0.5, 0.5, 0.5};
  EXPECT_THROW(generate_clip(SkillClass::kNovice, spec, rng), ValidationError);
  spec = SynthSpec{};
  spec.frames_per_phase = 3;
  EXPECT_THROW(generate_clip(SkillClass::kNovice, spec, rng), ValidationError);
  spec = SynthSpec{};
  spec.n_clips = 2;
  EXPECT_THROW(generate_dataset(spec, oracle::temp_dir("synth_bad")), ValidationError);
}

TEST(GenerateDataset, BalancedCountsSplitAndValidation) {
  const auto dir = oracle::temp_dir("synth_300");
  SynthSpec spec;
  spec.seed = 7;
  const auto res = generate_dataset(spec, dir);
  std::map<SkillClass, int> counts;
  for (const auto& c : res.manifest.clips) ++counts[*c.skill_class];
  for (auto [cls, n] : counts) EXPECT_NEAR(n, 100, 1);
  std::map<Split, int> split;
  for (const auto& [id, s] : res.manifest.split) ++split[s];
  EXPECT_EQ(split[Split::kTrain], 210);
  EXPECT_EQ(split[Split::kVal], 45);
  EXPECT_EQ(split[Split::kTest], 45);

  const auto loaded = load_manifest(dir);
  EXPECT_EQ(loaded.clips.size(), 300u);
  const auto report = validate_dataset(loaded);
  EXPECT_TRUE(report.accepted()) << report.to_text();
  for (const auto& cat : spec.categories) {
    std::vector<double> lab;
    for (const auto& c : loaded.clips) lab.push_back(c.labels.at(cat));
    EXPECT_GE(spearman(res.latent_skill, lab), 0.8);
  }
}

TEST(GenerateDataset, ImbalancedProportions) {
  SynthSpec spec;
  spec.n_clips = 60;
  spec.class_proportions = {0.6, 0.3, 0.1};
  const auto res = generate_dataset(spec, oracle::temp_dir("synth_imb"));
  std::map<SkillClass, int> counts;
  for (const auto& c : res.manifest.clips) ++counts[*c.skill_class];
  EXPECT_EQ(counts[SkillClass::kNovice], 36);
  EXPECT_EQ(counts[SkillClass::kIntermediate], 18);
  EXPECT_EQ(counts[SkillClass::kExpert], 6);
}

TEST(GenerateDataset, RegenerationIsByteIdentical) {
  SynthSpec spec;
  spec.n_clips = 12;
  spec.seed = 3;
  const auto a = oracle::temp_dir("synth_a"), b = oracle::temp_dir("synth_b");
  generate_dataset(spec, a);
  generate_dataset(spec, b);
  const auto ta = read_tree(a), tb = read_tree(b);
  EXPECT_EQ(ta.size(), 1u + 2u * 12u);
  EXPECT_EQ(ta, tb);
  spec.seed = 4;
  const auto c = oracle::temp_dir("synth_c");
  generate_dataset(spec, c);
  EXPECT_NE(read_tree(c), ta);
}
