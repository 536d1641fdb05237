#pragma once

// `padbench` command line. stdout carries one JSON document per run; stderr
// carries diagnostics. Exit codes: 0 success, 1 domain / validation / I/O
// failure, 2 usage error.
//
// Every successful or failed command writes a run manifest (JSON, no
// timestamps) to --run-manifest, or next to its primary output.

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <opencv2/core/version.hpp>

#include "padbench/backbone.hpp"
#include "padbench/dataset.hpp"
#include "padbench/error.hpp"
#include "padbench/fixture.hpp"
#include "padbench/metrics.hpp"
#include "padbench/model.hpp"
#include "padbench/report.hpp"
#include "padbench/scores.hpp"
#include "padbench/tsne.hpp"
#include "padbench/version.hpp"
#include "padbench/viz.hpp"

namespace padbench::cli {

namespace fs = std::filesystem;
using nlohmann::json;

struct usage_error : error {
  using error::error;
};

inline json versions() {
  return {{"padbench", version},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"opencv", CV_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION}};
}

// Outcome of one subcommand.
struct Outcome {
  json result;
  json config = json::object();
  std::optional<std::uint64_t> seed;
  std::vector<std::string> outputs;
  int exit_code = 0;
};

inline void ensure_parent(const fs::path& p) {
  if (!p.has_parent_path()) return;
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  if (ec) throw io_error("cannot create directory '" + p.parent_path().string() + "'");
}

inline void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw io_error("cannot create directory '" + p.string() + "'");
}

inline void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

inline json read_json(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw io_error("cannot read '" + p.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw format_error("'" + p.string() + "' is not valid JSON: " + e.what());
  }
}

inline std::vector<ScoreLine> to_score_lines(const std::vector<ScoreRecord>& records) {
  std::vector<ScoreLine> out;
  for (const auto& r : records) out.push_back({r.sample_id, r.ground_truth, r.pais, r.score});
  return out;
}

// ---- subcommand options -----------------------------------------------------------

struct IngestOpts {
  std::string root, out, declared;
};
struct ValidateOpts {
  std::string manifest;
  bool skip_files = false;
};
struct SplitOpts {
  std::string manifest, mode = "subject", held_out, out_dir;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
};
struct FixtureOpts {
  std::string out;
  FixtureConfig config;
};
struct InitBackboneOpts {
  std::string out;
  std::uint64_t seed = 0;
  int calibration_images = 4;
};
struct TrainOpts {
  std::string config, manifest, backbone, out, variant, optimizer, normalization;
  std::optional<int> epochs, batch_size;
  std::optional<double> learning_rate, momentum;
  std::optional<std::uint64_t> seed;
};
struct EvaluateOpts {
  std::string scores, model, manifest, scores_out;
  double tau = default_tau;
};
struct ReportOpts {
  std::string scores, style = "error", out;
  double tau = default_tau;
};
struct AuditOpts {
  std::string apcer, hter;
  double tolerance = audit_tolerance;
};
struct VisualizeOpts {
  std::string manifest, model, backbone, method = "embed2d", out, coords_out;
  std::uint64_t seed = 0;
  double perplexity = 30.0;
  int iterations = 1000, epochs = 10;
};

// ---- handlers -------------------------------------------------------------------------

inline Outcome do_ingest(const IngestOpts& o) {
  auto m = build_manifest(o.root);
  if (!o.declared.empty()) {
    const auto j = read_json(o.declared);
    try {
      m.declared_totals = j.get<std::map<std::string, std::size_t>>();
    } catch (const json::exception& e) {
      throw format_error("declared totals must map representor names to counts: " + std::string(e.what()));
    }
  }
  ensure_parent(o.out);
  save_manifest(m, o.out);
  const auto c = m.counts();
  json skipped = json::array();
  for (const auto& s : m.skipped) skipped.push_back({{"path", s.path}, {"reason", s.reason}});
  Outcome out;
  out.config = {{"root", o.root}, {"declared_totals", o.declared}};
  out.outputs = {o.out};
  out.result = {{"manifest", o.out},
                {"samples", m.samples.size()},
                {"bona_fide", c.bona_fide},
                {"per_pais", c.per_pais},
                {"subjects", m.subjects().size()},
                {"skipped", skipped}};
  return out;
}

inline Outcome do_validate(const ValidateOpts& o) {
  const auto m = load_manifest(o.manifest);
  const auto findings = validate_manifest(m, {.check_files = !o.skip_files});
  Outcome out;
  out.config = {{"manifest", o.manifest}, {"check_files", !o.skip_files}};
  out.result = {{"valid", findings.empty()}, {"findings", findings}};
  out.exit_code = findings.empty() ? 0 : 1;
  return out;
}

inline Outcome do_split(const SplitOpts& o) {
  SplitSpec spec;
  if (o.mode == "subject") {
    if (!o.held_out.empty()) throw usage_error("--held-out is only valid with --mode loco");
    spec = RandomBySubject{o.test_fraction, o.seed};
  } else {
    if (o.held_out.empty()) throw usage_error("--mode loco requires --held-out PAIS");
    spec = LeaveOnePaisOut{o.held_out, o.test_fraction, o.seed};
  }
  const auto m = load_manifest(o.manifest);
  const auto r = split(m, spec);
  ensure_dir(o.out_dir);
  const auto train_path = (fs::path(o.out_dir) / "train.json").string();
  const auto test_path = (fs::path(o.out_dir) / "test.json").string();
  save_manifest(r.train, train_path);
  save_manifest(r.test, test_path);
  Outcome out;
  out.seed = o.seed;
  out.config = {{"manifest", o.manifest},
                {"mode", o.mode},
                {"held_out", o.held_out},
                {"test_fraction", o.test_fraction}};
  out.outputs = {train_path, test_path};
  out.result = {{"train", {{"path", train_path}, {"samples", r.train.samples.size()}, {"per_pais", r.train.counts().per_pais}}},
                {"test", {{"path", test_path}, {"samples", r.test.samples.size()}, {"per_pais", r.test.counts().per_pais}}}};
  return out;
}

inline Outcome do_fixture(const FixtureOpts& o) {
  const auto fx = synthesize_fixture(o.config, o.out);
  const auto c = fx.manifest.counts();
  Outcome out;
  out.seed = o.config.seed;
  out.config = {{"n_subjects", o.config.n_subjects},
                {"n_bonafide_per_subject", o.config.n_bonafide_per_subject},
                {"pais", o.config.pais_list},
                {"n_attack_per_pais", o.config.n_attack_per_pais},
                {"image_size", o.config.image_size},
                {"artifact_strength", o.config.artifact_strength}};
  out.outputs = {fx.image_dir.string(), fx.manifest_path.string()};
  out.result = {{"images", fx.image_dir.string()},
                {"manifest", fx.manifest_path.string()},
                {"samples", fx.manifest.samples.size()},
                {"bona_fide", c.bona_fide},
                {"per_pais", c.per_pais}};
  return out;
}

inline Outcome do_init_backbone(const InitBackboneOpts& o) {
  if (o.calibration_images < 1) throw domain_error("--calibration-images must be at least 1");
  const fs::path path = o.out.empty() ? default_backbone_path() : fs::path(o.out);
  ensure_parent(path);
  const auto b = init_backbone(o.seed, o.calibration_images);
  save_backbone(b, path);
  Outcome out;
  out.seed = o.seed;
  out.config = {{"calibration_images", o.calibration_images}, {"architecture", b.architecture}};
  out.outputs = {path.string()};
  out.result = {{"backbone", path.string()},
                {"architecture", b.architecture},
                {"layers", b.units.size()},
                {"output_width", b.output_width()},
                {"parameters", b.parameter_count()}};
  return out;
}

struct ResolvedTrain {
  PADNetSpec spec;
  std::string manifest, backbone, out;
};

// Config file first, then flags.
inline ResolvedTrain resolve_train(const TrainOpts& o) {
  json file = json::object();
  if (!o.config.empty()) {
    file = read_json(o.config);
    if (!file.is_object()) throw config_error("training config must be a JSON object");
    if (file.value("schema_version", 0) != 1)
      throw config_error("training config needs \"schema_version\": 1");
  }
  ResolvedTrain r;
  try {
    const auto variant_name = !o.variant.empty() ? o.variant : file.value("variant", std::string("padnet1"));
    if (variant_name != "padnet1" && variant_name != "padnet2")
      throw config_error("unknown variant '" + variant_name + "'");
    r.spec = padnet_spec(variant_name == "padnet1" ? Variant::padnet1 : Variant::padnet2);
    if (file.contains("train")) merge_json(file.at("train"), r.spec.train_config);
    r.manifest = !o.manifest.empty() ? o.manifest : file.value("manifest", std::string());
    r.backbone = !o.backbone.empty() ? o.backbone : file.value("backbone", std::string());
    r.out = !o.out.empty() ? o.out : file.value("out", std::string());
  } catch (const json::exception& e) {
    throw config_error(std::string("malformed training config: ") + e.what());
  } catch (const domain_error& e) {
    throw config_error(std::string("invalid training config: ") + e.what());
  }
  auto& c = r.spec.train_config;
  if (!o.optimizer.empty()) {
    if (o.optimizer == "adam")
      c.optimizer = OptimizerKind::adam;
    else if (o.optimizer == "sgd_momentum")
      c.optimizer = OptimizerKind::sgd_momentum;
    else
      throw usage_error("unknown optimizer '" + o.optimizer + "'");
  }
  if (!o.normalization.empty()) c.normalization = normalization_from_string(o.normalization);
  if (o.epochs) c.epochs = *o.epochs;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.learning_rate) c.learning_rate = *o.learning_rate;
  if (o.momentum) c.momentum = *o.momentum;
  if (o.seed) c.seed = *o.seed;
  if (r.manifest.empty()) throw usage_error("train needs a manifest (--manifest or config \"manifest\")");
  if (r.out.empty()) throw usage_error("train needs an output model path (--out or config \"out\")");
  if (r.backbone.empty()) r.backbone = default_backbone_path().string();
  c.validate();
  return r;
}

inline Outcome do_train(const TrainOpts& o) {
  const auto r = resolve_train(o);
  const auto m = load_manifest(r.manifest);
  auto model = build_padnet(r.spec, fs::path(r.backbone));
  const auto result = train(model, m, r.spec.train_config);
  ensure_parent(r.out);
  save_model(model, r.out);
  const auto p = model.parameters();
  json history = json::array();
  for (std::size_t e = 0; e < result.history.size(); ++e)
    history.push_back({{"epoch", e + 1}, {"loss", result.history[e].loss}, {"accuracy", result.history[e].accuracy}});
  Outcome out;
  out.seed = r.spec.train_config.seed;
  out.config = {{"spec", to_json(model.spec)}, {"manifest", r.manifest}, {"backbone", r.backbone}};
  out.outputs = {r.out};
  out.result = {{"model", r.out},
                {"parameters",
                 {{"backbone_trainable", p.backbone_trainable},
                  {"backbone_frozen", p.backbone_frozen},
                  {"backbone_buffers", p.backbone_buffers},
                  {"head_trainable", p.head_trainable},
                  {"trainable", p.trainable()}}},
                {"history", history},
                {"final_train", {{"loss", result.final.loss}, {"accuracy", result.final.accuracy}}}};
  return out;
}

inline Outcome do_evaluate(const EvaluateOpts& o) {
  check_tau(o.tau);
  std::vector<ScoreLine> scores;
  Outcome out;
  if (!o.scores.empty()) {
    if (!o.model.empty() || !o.manifest.empty()) throw usage_error("use either --scores or --model with --manifest");
    scores = read_scores(o.scores);
    out.config = {{"scores", o.scores}, {"tau", o.tau}};
  } else {
    if (o.model.empty() || o.manifest.empty()) throw usage_error("evaluate needs --scores, or --model and --manifest");
    const auto model = load_model(o.model);
    const auto m = load_manifest(o.manifest);
    scores = to_score_lines(predict(model, m));
    out.config = {{"model", o.model}, {"manifest", o.manifest}, {"tau", o.tau}};
  }
  if (!o.scores_out.empty()) {
    ensure_parent(o.scores_out);
    write_scores(o.scores_out, scores);
    out.outputs.push_back(o.scores_out);
  }
  const auto decisions = to_decisions(scores, o.tau);
  out.result = to_json(metrics_report(decisions, o.tau));
  return out;
}

inline Outcome do_report(const ReportOpts& o) {
  const auto style = table_style_from_string(o.style);
  const auto scores = read_scores(o.scores);
  const auto report = metrics_report(to_decisions(scores, o.tau), o.tau);
  const auto tables = render_tables(report, style);
  ensure_dir(o.out);
  const auto txt = (fs::path(o.out) / "tables.txt").string();
  const auto csv = (fs::path(o.out) / "tables.csv").string();
  const auto js = (fs::path(o.out) / "report.json").string();
  write_text(txt, tables.text);
  write_text(csv, tables.csv);
  write_json(js, to_json(report));
  Outcome out;
  out.config = {{"scores", o.scores}, {"tau", o.tau}, {"style", o.style}};
  out.outputs = {txt, csv, js};
  out.result = {{"report", to_json(report)}, {"files", out.outputs}};
  return out;
}

inline Outcome do_audit(const AuditOpts& o) {
  const auto acc = read_table_csv(o.apcer);
  const auto hter = read_table_csv(o.hter);
  std::set<std::string> va, vh;
  for (const auto& [v, rows] : acc) va.insert(v);
  for (const auto& [v, rows] : hter) vh.insert(v);
  if (va != vh) throw domain_error("APCER and HTER tables list different variants");
  bool all_pass = true;
  std::size_t rows = 0;
  json variants = json::object();
  for (const auto& [v, table] : acc) {
    json findings = json::array();
    for (const auto& f : audit_table_consistency(table, hter.at(v), o.tolerance)) {
      all_pass = all_pass && f.pass;
      ++rows;
      findings.push_back(to_json(f));
    }
    variants[v] = findings;
  }
  Outcome out;
  out.config = {{"apcer", o.apcer}, {"hter", o.hter}, {"tolerance", o.tolerance}};
  out.result = {{"pass", all_pass}, {"rows", rows}, {"variants", variants}};
  out.exit_code = all_pass ? 0 : 1;
  return out;
}

inline Outcome do_visualize(const VisualizeOpts& o) {
  const auto m = load_manifest(o.manifest);
  Backbone backbone;
  Normalization norm = Normalization::symmetric;
  if (!o.model.empty()) {
    const auto model = load_model(o.model);
    backbone = model.net.backbone;
    norm = model.net.normalization;
  } else {
    backbone = load_backbone(o.backbone.empty() ? default_backbone_path() : fs::path(o.backbone));
  }

  std::vector<EmbeddingPoint> points;
  if (o.method == "embed2d") {
    TrainConfig c = padnet_spec(Variant::padnet1).train_config;
    c.epochs = o.epochs;
    c.seed = o.seed;
    c.normalization = norm;
    points = embed_manifest(backbone, m, c);
  } else if (o.method == "tsne" || o.method == "pca") {
    TransferNet net;
    net.backbone = backbone;
    net.trainable_from = static_cast<int>(backbone.units.size());
    const auto inputs = load_inputs(m, m.samples, norm);
    const Eigen::MatrixXd feats = extract_features(net, inputs);
    const auto coords = o.method == "tsne"
                            ? tsne_project(feats, {.perplexity = o.perplexity, .iterations = o.iterations, .seed = o.seed})
                            : pca_project(feats);
    for (std::size_t i = 0; i < coords.size(); ++i)
      points.push_back({m.samples[i].path, coords[i], embedding_label(m.samples[i])});
  } else {
    throw usage_error("unknown method '" + o.method + "'");
  }

  scatter_plot(points, o.out, {.title = o.method});
  Outcome out;
  out.seed = o.seed;
  out.config = {{"manifest", o.manifest}, {"model", o.model}, {"backbone", o.backbone}, {"method", o.method},
                {"perplexity", o.perplexity}, {"iterations", o.iterations}, {"epochs", o.epochs}};
  out.outputs = {o.out};
  if (!o.coords_out.empty()) {
    std::string csv = "sample_id,label,x,y\n";
    for (const auto& p : points)
      csv += detail::csv_field(p.sample_id) + "," + detail::csv_field(p.label) + "," + detail::format_real(p.coords[0]) +
             "," + detail::format_real(p.coords[1]) + "\n";
    ensure_parent(o.coords_out);
    write_text(o.coords_out, csv);
    out.outputs.push_back(o.coords_out);
  }
  std::set<std::string> labels;
  for (const auto& p : points) labels.insert(p.label);
  out.result = {{"plot", o.out}, {"points", points.size()}, {"labels", labels.size()}, {"method", o.method}};
  return out;
}

// ---- entry point -------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"padbench: presentation attack detection benchmark toolkit", "padbench"};
  app.require_subcommand(1);
  std::string run_manifest;
  app.add_option("--run-manifest", run_manifest, "Where to write the run manifest (JSON)");

  IngestOpts ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Build a manifest from an image directory");
  c_ingest->add_option("--root", ingest.root, "Image directory")->required();
  c_ingest->add_option("--out", ingest.out, "Manifest path (JSON)")->required();
  c_ingest->add_option("--declared-totals", ingest.declared, "JSON map: representor -> claimed image total");

  ValidateOpts validate;
  auto* c_validate = app.add_subcommand("validate", "Check a manifest for consistency");
  c_validate->add_option("--manifest", validate.manifest)->required();
  c_validate->add_flag("--skip-file-check", validate.skip_files, "Do not open image files");

  SplitOpts sp;
  auto* c_split = app.add_subcommand("split", "Subject-disjoint or leave-one-PAIS-out split");
  c_split->add_option("--manifest", sp.manifest)->required();
  c_split->add_option("--mode", sp.mode)->check(CLI::IsMember({"subject", "loco"}));
  c_split->add_option("--held-out", sp.held_out, "PAIS abbreviation kept out of training (loco)");
  c_split->add_option("--seed", sp.seed);
  c_split->add_option("--test-fraction", sp.test_fraction);
  c_split->add_option("--out-dir", sp.out_dir, "Receives train.json and test.json")->required();

  FixtureOpts fx;
  auto* c_fixture = app.add_subcommand("fixture", "Write a synthetic, separable image corpus");
  c_fixture->add_option("--out", fx.out, "Output directory")->required();
  c_fixture->add_option("--subjects", fx.config.n_subjects);
  c_fixture->add_option("--bonafide-per-subject", fx.config.n_bonafide_per_subject);
  c_fixture->add_option("--pais", fx.config.pais_list, "PAIS abbreviations");
  c_fixture->add_option("--attacks-per-pais", fx.config.n_attack_per_pais);
  c_fixture->add_option("--size", fx.config.image_size, "Image side in pixels");
  c_fixture->add_option("--seed", fx.config.seed);
  c_fixture->add_option("--artifact-strength", fx.config.artifact_strength, "Attack artefact intensity in [0, 4]");

  InitBackboneOpts ib;
  auto* c_init = app.add_subcommand("init-backbone", "Write a calibrated surrogate backbone checkpoint");
  c_init->add_option("--out", ib.out, "Checkpoint path (default: $PADBENCH_CACHE or ~/.cache/padbench)");
  c_init->add_option("--seed", ib.seed);
  c_init->add_option("--calibration-images", ib.calibration_images);

  TrainOpts tr;
  auto* c_train = app.add_subcommand("train", "Train a PADNet model");
  c_train->add_option("--config", tr.config, "JSON training config (flags override it)");
  c_train->add_option("--variant", tr.variant)->check(CLI::IsMember({"padnet1", "padnet2"}));
  c_train->add_option("--manifest", tr.manifest);
  c_train->add_option("--backbone", tr.backbone, "Backbone checkpoint");
  c_train->add_option("--out", tr.out, "Model file");
  c_train->add_option("--optimizer", tr.optimizer)->check(CLI::IsMember({"adam", "sgd_momentum"}));
  c_train->add_option("--normalization", tr.normalization)->check(CLI::IsMember({"[-1,1]", "[0,1]"}));
  c_train->add_option("--epochs", tr.epochs);
  c_train->add_option("--batch-size", tr.batch_size);
  c_train->add_option("--learning-rate", tr.learning_rate);
  c_train->add_option("--momentum", tr.momentum);
  c_train->add_option("--seed", tr.seed);

  EvaluateOpts ev;
  auto* c_eval = app.add_subcommand("evaluate", "APCER / BPCER / HTER from scores or a model");
  c_eval->add_option("--scores", ev.scores, "Score file (CSV)");
  c_eval->add_option("--model", ev.model);
  c_eval->add_option("--manifest", ev.manifest);
  c_eval->add_option("--tau", ev.tau);
  c_eval->add_option("--scores-out", ev.scores_out, "Write the scores used");

  ReportOpts rp;
  auto* c_report = app.add_subcommand("report", "Render metric tables");
  c_report->add_option("--scores", rp.scores)->required();
  c_report->add_option("--tau", rp.tau);
  c_report->add_option("--style", rp.style)->check(CLI::IsMember({"error", "accuracy"}));
  c_report->add_option("--out", rp.out, "Output directory")->required();

  AuditOpts au;
  auto* c_audit = app.add_subcommand("audit", "Cross-check APCER-accuracy and HTER tables");
  c_audit->add_option("--apcer", au.apcer, "CSV pais,variant,value")->required();
  c_audit->add_option("--hter", au.hter, "CSV pais,variant,value")->required();
  c_audit->add_option("--tolerance", au.tolerance, "Percentage points");

  VisualizeOpts vz;
  auto* c_viz = app.add_subcommand("visualize", "2-D scatter of a manifest");
  c_viz->add_option("--manifest", vz.manifest)->required();
  c_viz->add_option("--model", vz.model, "Model file whose backbone is used");
  c_viz->add_option("--backbone", vz.backbone, "Backbone checkpoint when no model is given");
  c_viz->add_option("--method", vz.method)->check(CLI::IsMember({"embed2d", "tsne", "pca"}));
  c_viz->add_option("--out", vz.out, "PNG path")->required();
  c_viz->add_option("--coords-out", vz.coords_out, "CSV of plotted coordinates");
  c_viz->add_option("--seed", vz.seed);
  c_viz->add_option("--perplexity", vz.perplexity);
  c_viz->add_option("--iterations", vz.iterations, "t-SNE iterations");
  c_viz->add_option("--epochs", vz.epochs, "embed2d training epochs");

  std::vector<const char*> argv{"padbench"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    err << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    err << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  fs::path manifest_path = run_manifest;
  if (manifest_path.empty()) {
    if (name == "ingest") manifest_path = ingest.out + ".run.json";
    else if (name == "split") manifest_path = fs::path(sp.out_dir) / "run_manifest.json";
    else if (name == "fixture") manifest_path = fs::path(fx.out) / "run_manifest.json";
    else if (name == "init-backbone" && !ib.out.empty()) manifest_path = ib.out + ".run.json";
    else if (name == "train") manifest_path = tr.out.empty() ? "" : tr.out + ".run.json";  // may come from --config
    else if (name == "report") manifest_path = fs::path(rp.out) / "run_manifest.json";
    else if (name == "visualize") manifest_path = vz.out + ".run.json";
    else manifest_path = "padbench-" + name + ".run.json";
  }

  Outcome outcome;
  std::string failure;
  int code = 0;
  try {
    if (name == "ingest") outcome = do_ingest(ingest);
    else if (name == "validate") outcome = do_validate(validate);
    else if (name == "split") outcome = do_split(sp);
    else if (name == "fixture") outcome = do_fixture(fx);
    else if (name == "init-backbone") outcome = do_init_backbone(ib);
    else if (name == "train") outcome = do_train(tr);
    else if (name == "evaluate") outcome = do_evaluate(ev);
    else if (name == "report") outcome = do_report(rp);
    else if (name == "audit") outcome = do_audit(au);
    else outcome = do_visualize(vz);
    code = outcome.exit_code;
  } catch (const usage_error& e) {
    err << "usage error: " << e.what() << "\n\n" << sub->help();
    return 2;
  } catch (const config_error& e) {
    failure = e.what();
    err << "error: " << failure << "\n";
    if (failure.find("backbone checkpoint") != std::string::npos) err << "hint: create a backbone with `padbench init-backbone`\n";
    code = 1;
  } catch (const std::exception& e) {
    failure = e.what();
    err << "error: " << failure << "\n";
    code = 1;
  }

  if (manifest_path.empty())
    manifest_path = name == "train" && !outcome.outputs.empty() ? outcome.outputs.front() + ".run.json"
                                                                : "padbench-" + name + ".run.json";

  json record = {{"schema_version", 1},
                 {"tool", "padbench"},
                 {"command", name},
                 {"args", args},
                 {"seed", outcome.seed ? json(*outcome.seed) : json(nullptr)},
                 {"config", outcome.config},
                 {"versions", versions()},
                 {"outputs", outcome.outputs},
                 {"exit_code", code}};
  if (!failure.empty()) record["error"] = failure;
  else record["result"] = outcome.result;
  try {
    ensure_parent(manifest_path);
    write_json(manifest_path, record);
  } catch (const std::exception& e) {
    err << "warning: run manifest not written: " << e.what() << "\n";
    if (code == 0) code = 1;
  }
  if (failure.empty()) out << outcome.result.dump(2) << "\n";
  return code;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace padbench::cli
