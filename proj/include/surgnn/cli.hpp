#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "surgnn/surgnn.hpp"

namespace surgnn::cli {

inline constexpr const char* kToolVersion = "1.0.0";

namespace fs = std::filesystem;

namespace detail {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Fingerprint of a file, or of every regular file below a directory (sorted by relative path).
inline std::string fingerprint(const fs::path& p) {
  if (fs::is_regular_file(p)) return hex64(fnv1a64(read_text_file(p.string())));
  if (!fs::is_directory(p)) return "missing";
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(p))
    if (e.is_regular_file() && e.path().filename() != "run.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) acc += fs::relative(f, p).string() + ":" + hex64(fnv1a64(read_text_file(f.string()))) + "\n";
  return hex64(fnv1a64(acc));
}

/// Records the invocation beside its outputs: `<file>.run.json` for a file, `<dir>/run.json` for a directory.
inline void write_run_manifest(const CLI::App& sub, const fs::path& output, std::uint64_t seed,
                               const std::vector<fs::path>& inputs) {
  nlohmann::json j;
  j["tool"] = "surgnn";
  j["version"] = kToolVersion;
  j["subcommand"] = sub.get_name();
  j["seed"] = seed;
  j["flags"] = nlohmann::json::object();
  for (const auto* opt : sub.get_options()) {
    if (opt->count() == 0 || opt->get_name() == "--help") continue;
    j["flags"][opt->get_name()] = opt->results();
  }
  j["inputs"] = nlohmann::json::object();
  for (const auto& in : inputs) j["inputs"][in.string()] = fingerprint(in);
  const fs::path target = fs::is_directory(output) ? output / "run.json" : fs::path(output.string() + ".run.json");
  write_text_file(target.string(), j.dump(2) + "\n");
}

inline void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

inline Split split_or_all(const std::string& s) { return parse_split(s); }

}  // namespace detail

/// Runs one subcommand. Returns 0 on success, 1 on validation failure, 2 on usage errors.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"surgnn: surgical skill assessment with graph attention networks"};
  app.require_subcommand(1, 1);
  std::uint64_t seed = 0;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic trajectory dataset");
  SynthSpec sspec;
  std::string synth_out, synth_mode = "2D", proportions;
  synth->add_option("--n", sspec.n_clips, "Number of clips")->check(CLI::PositiveNumber);
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--mode", synth_mode, "2D or 3D")->check(CLI::IsMember({"2D", "3D"}));
  synth->add_option("--proportions", proportions, "novice,intermediate,expert proportions");
  synth->add_option("--noise", sspec.noise, "Positional noise (units)");
  synth->add_option("--frames-per-phase", sspec.frames_per_phase, "Frames per phase");
  synth->add_option("--seed", seed, "Random seed");

  // extract
  auto* extract = app.add_subcommand("extract", "Instrument tracks to node feature table");
  std::string manifest_path, features_out, mode_filter;
  extract->add_option("--manifest", manifest_path, "Manifest file or dataset directory")->required();
  extract->add_option("--out", features_out, "Feature table CSV (default <dataset>/features.csv)");
  extract->add_option("--mode", mode_filter, "Only clips of this mode")->check(CLI::IsMember({"2D", "3D"}));
  extract->add_option("--seed", seed, "Random seed (unused)");

  // build-graphs
  auto* build = app.add_subcommand("build-graphs", "Feature table to standardized graph files");
  std::string features_in, graphs_out;
  EdgePolicy policy;
  build->add_option("--manifest", manifest_path, "Manifest file or dataset directory")->required();
  build->add_option("--features", features_in, "Feature table CSV (default <dataset>/features.csv)");
  build->add_option("--out", graphs_out, "Graph directory (default <dataset>/graphs)");
  build->add_option("--temporal-weight", policy.temporal_weight, "Weight of same-instrument phase edges");
  build->add_option("--cooccurrence-weight", policy.cooccurrence_weight, "Weight of same-phase edges");
  build->add_option("--seed", seed, "Random seed (unused)");

  // balance
  auto* balance = app.add_subcommand("balance", "ADASYN oversampling of the training graphs");
  std::string graphs_in, category = "Overall";
  std::size_t adasyn_k = 7;
  balance->add_option("--graphs", graphs_in, "Graph directory")->required();
  balance->add_option("--category", category, "Label category to balance");
  balance->add_option("--k", adasyn_k, "Neighbors")->check(CLI::PositiveNumber);
  balance->add_option("--out", graphs_out, "Output graph directory")->required();
  balance->add_option("--seed", seed, "Random seed");

  // pretrain / train share the config overrides.
  std::string config_path, model_out, history_out, init_path;
  int epochs = -1;
  double mask_fraction = -1.0, edge_mask = -1.0, joint_weight = -1.0;
  bool freeze = false;
  auto* pretrain = app.add_subcommand("pretrain", "Self-supervised spectral pretraining");
  pretrain->add_option("--graphs", graphs_in, "Graph directory")->required();
  pretrain->add_option("--out", model_out, "Encoder checkpoint JSON")->required();
  pretrain->add_option("--config", config_path, "Training config JSON");
  pretrain->add_option("--epochs", epochs, "Override epochs");
  pretrain->add_option("--mask-fraction", mask_fraction, "Override node mask fraction");
  pretrain->add_option("--edge-mask-fraction", edge_mask, "Override edge mask fraction");
  pretrain->add_option("--history", history_out, "History CSV (default <out>.history.csv)");
  pretrain->add_option("--seed", seed, "Random seed");

  auto* train = app.add_subcommand("train", "Supervised training for one category");
  train->add_option("--graphs", graphs_in, "Graph directory")->required();
  train->add_option("--category", category, "Label category");
  train->add_option("--out", model_out, "Model checkpoint JSON")->required();
  train->add_option("--init", init_path, "Warm-start encoder checkpoint");
  train->add_flag("--freeze-encoder", freeze, "Train only the linear head");
  train->add_option("--joint-weight", joint_weight, "Spectral loss weight added to cross-entropy");
  train->add_option("--config", config_path, "Training config JSON");
  train->add_option("--epochs", epochs, "Override epochs");
  train->add_option("--history", history_out, "History CSV (default <out>.history.csv)");
  train->add_option("--seed", seed, "Random seed");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Metrics report for a trained model");
  std::string split_name = "test", report_out;
  evaluate->add_option("--graphs", graphs_in, "Graph directory")->required();
  evaluate->add_option("--model", init_path, "Model checkpoint JSON")->required();
  evaluate->add_option("--split", split_name, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  evaluate->add_option("--out", report_out, "Report JSON (a .txt table is written beside it)")->required();
  evaluate->add_option("--seed", seed, "Random seed (unused)");

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Gaussian random baseline report");
  int runs = 10;
  baseline->add_option("--manifest", manifest_path, "Manifest file or dataset directory");
  baseline->add_option("--graphs", graphs_in, "Graph directory (alternative to --manifest)");
  baseline->add_option("--category", category, "Label category");
  baseline->add_option("--split", split_name, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  baseline->add_option("--runs", runs, "Number of runs")->check(CLI::PositiveNumber);
  baseline->add_option("--out", report_out, "Report JSON (default <dataset>/baseline.json)");
  baseline->add_option("--seed", seed, "Random seed");

  // embed
  auto* embed = app.add_subcommand("embed", "Export node and graph embeddings");
  std::string emb_out, label_category;
  embed->add_option("--graphs", graphs_in, "Graph directory")->required();
  embed->add_option("--model", init_path, "Checkpoint JSON")->required();
  embed->add_option("--out", emb_out, "Embedding CSV")->required();
  embed->add_option("--label-category", label_category, "Attach this label (default: model category)");
  embed->add_option("--seed", seed, "Random seed (unused)");

  // project
  auto* project = app.add_subcommand("project", "2D PCA projection of embeddings");
  std::string emb_in, proj_out, rows = "graph";
  std::size_t dim = 2;
  project->add_option("--embeddings", emb_in, "Embedding CSV")->required();
  project->add_option("--out", proj_out, "Projection CSV")->required();
  project->add_option("--rows", rows, "graph, node or all")->check(CLI::IsMember({"graph", "node", "all"}));
  project->add_option("--dim", dim, "Output dimensions")->check(CLI::PositiveNumber);
  project->add_option("--seed", seed, "Random seed (unused)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  auto dataset_dir = [](const std::string& p) {
    fs::path path(p);
    return fs::is_directory(path) ? path : path.parent_path();
  };
  auto load_config = [&]() {
    TrainConfig c;
    if (!config_path.empty()) c = config_from_json(nlohmann::json::parse(read_text_file(config_path)));
    c.seed = seed;
    if (epochs >= 0) c.epochs = epochs;
    if (mask_fraction >= 0.0) c.mask_fraction = mask_fraction;
    if (edge_mask >= 0.0) c.edge_mask_fraction = edge_mask;
    if (joint_weight >= 0.0) c.joint_spectral_weight = joint_weight;
    if (freeze) c.freeze_encoder = true;
    c.validate();
    return c;
  };

  try {
    if (*synth) {
      sspec.seed = seed;
      sspec.mode = parse_mode(synth_mode);
      if (!proportions.empty()) {
        auto parts = surgnn::detail::split_csv_line(proportions);
        if (parts.size() != 3) throw ValidationError("--proportions needs three comma-separated values");
        for (std::size_t c = 0; c < 3; ++c) sspec.class_proportions[c] = surgnn::detail::parse_double(parts[c], "--proportions");
      }
      const auto res = generate_dataset(sspec, synth_out);
      out << "wrote " << res.manifest.clips.size() << " clips to " << synth_out << "\n";
      detail::write_run_manifest(*synth, synth_out, seed, {});
    } else if (*extract) {
      auto m = load_manifest(manifest_path);
      const auto report = validate_dataset(m);
      if (!report.accepted()) {
        err << "dataset validation failed:\n" << report.to_text();
        return 1;
      }
      if (features_out.empty()) features_out = (dataset_dir(manifest_path) / "features.csv").string();
      std::vector<NodeFeatureVector> table;
      for (const auto& clip : m.clips) {
        if (!mode_filter.empty() && to_string(clip.mode) != mode_filter) continue;
        auto rows_ = extract_clip_features(clip);
        table.insert(table.end(), rows_.begin(), rows_.end());
      }
      detail::ensure_parent(features_out);
      write_text_file(features_out, format_feature_table(table));
      out << "wrote " << table.size() << " feature rows to " << features_out << "\n";
      detail::write_run_manifest(*extract, features_out, seed, {fs::path(manifest_path)});
    } else if (*build) {
      auto m = load_manifest(manifest_path);
      if (features_in.empty()) features_in = (dataset_dir(manifest_path) / "features.csv").string();
      if (graphs_out.empty()) graphs_out = (dataset_dir(manifest_path) / "graphs").string();
      const auto table = parse_feature_table(read_text_file(features_in), features_in);
      // Clips filtered out at extraction (mode filter) are dropped here too.
      std::set<std::string> present;
      for (const auto& r : table) present.insert(r.clip_id);
      std::erase_if(m.clips, [&](const ClipRecord& c) { return !present.contains(c.clip_id); });
      const auto gs = build_graphset(m, table, policy);
      save_graphset(gs, graphs_out);
      out << "wrote " << gs.entries.size() << " graphs to " << graphs_out << "\n";
      detail::write_run_manifest(*build, graphs_out, seed, {fs::path(manifest_path), fs::path(features_in)});
    } else if (*balance) {
      const auto gs = load_graphset(graphs_in);
      AdasynResult rep;
      const auto balanced = balance_graphs(gs, category, adasyn_k, seed, &rep);
      if (fs::exists(graphs_out) && fs::equivalent(graphs_out, graphs_in))
        throw ValidationError("balance: --out must differ from --graphs");
      save_graphset(balanced, graphs_out);
      out << "added " << rep.synthetic.size() << " synthetic graphs\n";
      detail::write_run_manifest(*balance, graphs_out, seed, {fs::path(graphs_in)});
    } else if (*pretrain) {
      const auto gs = load_graphset(graphs_in);
      const auto cfg = load_config();
      auto [model, history] = train_ssl(gs.graphs(Split::kTrain), cfg, gs.schema_id);
      detail::ensure_parent(model_out);
      save_checkpoint(model, model_out);
      if (history_out.empty()) history_out = model_out + ".history.csv";
      write_text_file(history_out, format_history(history));
      if (!history.empty()) out << "final loss " << history.back().loss << "\n";
      detail::write_run_manifest(*pretrain, model_out, seed, {fs::path(graphs_in)});
    } else if (*train) {
      const auto gs = load_graphset(graphs_in);
      const auto cfg = load_config();
      std::optional<GnnModel> init;
      if (!init_path.empty()) init = load_checkpoint(init_path);
      auto [model, history] =
          train_supervised(gs.graphs(Split::kTrain), cfg, category, gs.categories, gs.ordinal_scale, init, gs.schema_id);
      detail::ensure_parent(model_out);
      save_checkpoint(model, model_out);
      if (history_out.empty()) history_out = model_out + ".history.csv";
      write_text_file(history_out, format_history(history));
      if (!history.empty())
        out << "final loss " << history.back().loss << ", training accuracy " << history.back().accuracy << "\n";
      std::vector<fs::path> inputs{fs::path(graphs_in)};
      if (!init_path.empty()) inputs.emplace_back(init_path);
      detail::write_run_manifest(*train, model_out, seed, inputs);
    } else if (*evaluate) {
      const auto gs = load_graphset(graphs_in);
      const auto model = load_checkpoint(init_path);
      const auto report = evaluate_model(model, gs, parse_split(split_name));
      detail::ensure_parent(report_out);
      write_text_file(report_out, report_to_json(report).dump(2) + "\n");
      const auto table = format_table({report});
      write_text_file(report_out + ".txt", table);
      out << table;
      detail::write_run_manifest(*evaluate, report_out, seed, {fs::path(graphs_in), fs::path(init_path)});
    } else if (*baseline) {
      std::vector<int> truth;
      OrdinalScale scale;
      Mode mode = Mode::k2D;
      fs::path input;
      if (!graphs_in.empty()) {
        const auto gs = load_graphset(graphs_in);
        std::vector<const SurgicalGraph*> gl;
        for (const auto& e : gs.entries)
          if (!e.synthetic && (split_name == "all" || e.split == parse_split(split_name))) gl.push_back(&e.graph);
        truth = truth_scores(gl, category);
        scale = gs.ordinal_scale;
        mode = gs.mode;
        input = graphs_in;
      } else if (!manifest_path.empty()) {
        const auto m = load_manifest(manifest_path);
        if (std::find(m.categories.begin(), m.categories.end(), category) == m.categories.end())
          throw ValidationError("unknown category '" + category + "'");
        for (const auto& c : m.clips) {
          if (split_name != "all" && m.split.at(c.clip_id) != parse_split(split_name)) continue;
          auto it = c.labels.find(category);
          if (it == c.labels.end()) throw ValidationError("clip '" + c.clip_id + "' has no label for " + category);
          truth.push_back(it->second);
          mode = c.mode;
        }
        scale = m.ordinal_scale;
        input = manifest_path;
      } else {
        err << "error: baseline needs --manifest or --graphs\n";
        return 2;
      }
      auto report = gaussian_baseline(truth, runs, seed, scale);
      report.category = category;
      report.mode = mode;
      if (report_out.empty())
        report_out = ((fs::is_directory(input) ? input : input.parent_path()) / "baseline.json").string();
      detail::ensure_parent(report_out);
      write_text_file(report_out, report_to_json(report).dump(2) + "\n");
      const auto table = format_table({report});
      write_text_file(report_out + ".txt", table);
      out << table;
      detail::write_run_manifest(*baseline, report_out, seed, {input});
    } else if (*embed) {
      const auto gs = load_graphset(graphs_in);
      const auto model = load_checkpoint(init_path);
      const auto table = export_embeddings(model, gs, label_category.empty() ? model.category : label_category);
      detail::ensure_parent(emb_out);
      write_text_file(emb_out, format_embeddings(table));
      out << "wrote " << table.size() << " embedding rows to " << emb_out << "\n";
      detail::write_run_manifest(*embed, emb_out, seed, {fs::path(graphs_in), fs::path(init_path)});
    } else if (*project) {
      auto table = parse_embeddings(read_text_file(emb_in));
      if (rows == "graph") std::erase_if(table, [](const EmbeddingRow& r) { return r.node_id != kGraphRowId; });
      if (rows == "node") std::erase_if(table, [](const EmbeddingRow& r) { return r.node_id == kGraphRowId; });
      const auto proj = pca_project(table, dim);
      detail::ensure_parent(proj_out);
      write_text_file(proj_out, format_projection(proj));
      out << "explained variance:";
      for (std::size_t c = 0; c < dim; ++c) out << " " << proj.explained_variance_ratio[c];
      out << "\n";
      detail::write_run_manifest(*project, proj_out, seed, {fs::path(emb_in)});
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace surgnn::cli
