#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "surgnn/cli.hpp"

using namespace surgnn;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// One small dataset shared by the tests in this file.
const fs::path& dataset() {
  static const fs::path dir = [] {
    auto d = oracle::temp_dir("cli_data");
    const auto r = call({"synth", "--n", "30", "--seed", "2", "--out", d.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(call({"extract", "--manifest", d.string()}).code, 0);
    EXPECT_EQ(call({"build-graphs", "--manifest", d.string()}).code, 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(call({}).code, 2);
  EXPECT_EQ(call({"frobnicate"}).code, 2);
  const auto r = call({"synth", "--out", "x", "--bogus-flag", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("synth"), std::string::npos);
  EXPECT_EQ(call({"train", "--graphs", "g"}).code, 2);  // --out is required
  EXPECT_EQ(call({"--help"}).code, 0);
}

TEST(Cli, ValidationErrorsExitOne) {
  const auto missing = oracle::temp_dir("cli_missing");
  auto r = call({"extract", "--manifest", (missing / "manifest.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing manifest file"), std::string::npos);
  r = call({"synth", "--out", missing.string(), "--proportions", "0.5,0.5,0.5"});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, ExtractReportsInvalidDataset) {
  const auto d = oracle::temp_dir("cli_invalid");
  fs::create_directories(d / "clips");
  write_text_file((d / "clips" / "a.json").string(),
                  R"({"clip_id":"a","mode":"2D","num_frames":10,"trajectories":"a.csv","phases":[{"name":"p","start_frame":0,"end_frame":10}],"labels":{"Overall":3}})");
  write_text_file((d / "clips" / "a.csv").string(), "clip_id,instrument_id,frame,t,x,y,visible\n");
  write_text_file((d / "manifest.json").string(),
                  R"({"categories":["Overall"],"clips":["clips/a.json"],"split":{"a":"train"}})");
  const auto r = call({"extract", "--manifest", d.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("no instrument tracks"), std::string::npos);
}

TEST(Cli, PipelineWritesOutputsAndRunManifests) {
  const auto& d = dataset();
  EXPECT_TRUE(fs::exists(d / "run.json"));
  EXPECT_TRUE(fs::exists(d / "features.csv.run.json"));
  EXPECT_TRUE(fs::exists(d / "graphs" / "run.json"));
  const auto out = oracle::temp_dir("cli_pipeline");
  const auto model = (out / "model.json").string();
  auto r = call({"train", "--graphs", (d / "graphs").string(), "--out", model, "--epochs", "5", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(model + ".history.csv"));
  const auto run = nlohmann::json::parse(read_text_file(model + ".run.json"));
  EXPECT_EQ(run["subcommand"], "train");
  EXPECT_EQ(run["seed"], 3);
  EXPECT_EQ(run["version"], "1.0.0");
  EXPECT_TRUE(run["flags"].contains("--epochs"));
  EXPECT_EQ(run["inputs"].size(), 1u);

  const auto report = (out / "report.json").string();
  r = call({"evaluate", "--graphs", (d / "graphs").string(), "--model", model, "--out", report});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(report_from_json(nlohmann::json::parse(read_text_file(report))).n, 4u);
  EXPECT_TRUE(fs::exists(report + ".txt"));

  const auto emb = (out / "emb.csv").string();
  ASSERT_EQ(call({"embed", "--graphs", (d / "graphs").string(), "--model", model, "--out", emb}).code, 0);
  const auto proj = (out / "proj.csv").string();
  ASSERT_EQ(call({"project", "--embeddings", emb, "--out", proj}).code, 0);
  EXPECT_EQ(parse_embeddings(read_text_file(emb)).size(), 30u * 5u);
  std::istringstream lines(read_text_file(proj));
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) ++count;
  EXPECT_EQ(count, 31u);

  const auto base = (out / "baseline.json").string();
  r = call({"baseline", "--manifest", d.string(), "--split", "all", "--runs", "10", "--seed", "1", "--out", base});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(report_from_json(nlohmann::json::parse(read_text_file(base))).n, 30u);

  const auto balanced = (out / "balanced").string();
  ASSERT_EQ(call({"balance", "--graphs", (d / "graphs").string(), "--out", balanced, "--k", "3"}).code, 0);
  EXPECT_TRUE(fs::exists(fs::path(balanced) / "index.json"));
  const auto encoder = (out / "enc.json").string();
  ASSERT_EQ(call({"pretrain", "--graphs", balanced, "--out", encoder, "--epochs", "3"}).code, 0);
  r = call({"train", "--graphs", balanced, "--out", (out / "probe.json").string(), "--init", encoder,
            "--freeze-encoder", "--epochs", "3"});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST(Cli, SchemaMismatchExitsOneAndNamesIds) {
  const auto& d = dataset();
  const auto out = oracle::temp_dir("cli_schema");
  const auto model = (out / "model.json").string();
  ASSERT_EQ(call({"train", "--graphs", (d / "graphs").string(), "--out", model, "--epochs", "1"}).code, 0);
  auto j = nlohmann::json::parse(read_text_file(model));
  j["feature_schema_id"] = "kinematic-v0";
  write_text_file(model, j.dump());
  const auto r = call({"evaluate", "--graphs", (d / "graphs").string(), "--model", model, "--out",
                       (out / "r.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("kinematic-v0"), std::string::npos);
  EXPECT_NE(r.err.find(kFeatureSchemaId), std::string::npos);
}

TEST(Cli, IdenticalInvocationsGiveIdenticalOutputs) {
  const auto& d = dataset();
  const auto out = oracle::temp_dir("cli_repeat");
  for (const char* name : {"a.json", "b.json"})
    ASSERT_EQ(call({"train", "--graphs", (d / "graphs").string(), "--out", (out / name).string(), "--epochs", "4",
                    "--seed", "9"})
                  .code,
              0);
  EXPECT_EQ(read_text_file((out / "a.json").string()), read_text_file((out / "b.json").string()));
  EXPECT_EQ(read_text_file((out / "a.json.history.csv").string()), read_text_file((out / "b.json.history.csv").string()));
}
