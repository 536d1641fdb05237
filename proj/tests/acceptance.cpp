// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Each check uses an oracle that is independent of the code under test.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>

#include "padbench/dataset.hpp"
#include "padbench/fixture.hpp"
#include "padbench/metrics.hpp"
#include "padbench/model.hpp"
#include "padbench/report.hpp"
#include "padbench/tsne.hpp"
#include "padbench/viz.hpp"
#include "test_support.hpp"

using namespace padbench;
namespace pt = padbench::testing;

namespace {

const std::filesystem::path data_dir = PADBENCH_DATA_DIR;

struct Outcome {
  bool pass;
  std::string detail;
};

const Backbone& backbone() {
  static const Backbone b = init_backbone(0);
  return b;
}

// 32 images: 4 subjects x 4 bona fide, 16 display attacks.
const Fixture& fixture32() {
  static pt::TempDir dir("acc-fx32");
  static const Fixture fx = [] {
    FixtureConfig c;
    c.n_subjects = 4;
    c.n_bonafide_per_subject = 4;
    c.pais_list = {"Dell-GA7"};
    c.n_attack_per_pais = 16;
    return synthesize_fixture(c, dir.path());
  }();
  return fx;
}

Outcome metric_oracle() {
  pt::DecisionGen gen(1);
  int compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n_pais = gen.uniform_int(1, 5);
    const int size = gen.uniform_int(1, 200);
    const double tau = gen.uniform_int(1, 99) / 100.0;
    // random class mix; groups may be empty, in which case their rate is undefined
    std::vector<pt::RawDecision> raw;
    for (int i = 0; i < size; ++i) {
      pt::RawDecision d{"s" + std::to_string(i), gen.score(), gen.rng() % 2 == 0, ""};
      if (d.attack) d.pais = "P" + std::to_string(gen.uniform_int(0, n_pais - 1));
      raw.push_back(d);
    }
    std::vector<Decision> bf;
    std::map<std::string, std::vector<Decision>> by_pais;
    for (const auto& r : raw) {
      if (r.attack)
        by_pais[r.pais].emplace_back(r.id, r.score, GroundTruth::attack, r.pais, tau);
      else
        bf.emplace_back(r.id, r.score, GroundTruth::bona_fide, std::nullopt, tau);
    }
    std::optional<double> b;
    if (!bf.empty()) {
      b = bpcer(bf);
      if (*b != pt::oracle_bpcer(raw, tau)) return {false, "bpcer mismatch in trial " + std::to_string(trial)};
      ++compared;
    }
    for (const auto& [pais, ds] : by_pais) {
      const double a = apcer(ds);
      if (a != pt::oracle_apcer(raw, pais, tau)) return {false, "apcer mismatch in trial " + std::to_string(trial)};
      ++compared;
      if (b && hter(a, *b) != (pt::oracle_apcer(raw, pais, tau) + pt::oracle_bpcer(raw, tau)) / 2.0)
        return {false, "hter mismatch in trial " + std::to_string(trial)};
    }
  }
  return {true, std::to_string(compared) + " rates compared over 1000 sets"};
}

Outcome table_audit() {
  const auto acc = read_table_csv(data_dir / "padnet_apcer_accuracy.csv");
  const auto hter_tab = read_table_csv(data_dir / "padnet_hter.csv");
  int rows = 0;
  double worst = 0.0;
  for (const auto& [variant, table] : acc)
    for (const auto& f : audit_table_consistency(table, hter_tab.at(variant))) {
      ++rows;
      worst = std::max(worst, f.residual);
      if (!f.pass) return {false, variant + "/" + f.pais + " residual " + std::to_string(f.residual)};
    }
  const auto dell = audit_table_consistency({{"Dell-GA7", 76.74}}, {{"Dell-GA7", 11.63}})[0];
  if (std::abs(dell.implied_hter - 11.63) > 1e-9) return {false, "Dell-GA7 implied HTER is not 11.63"};
  return {rows == 14, std::to_string(rows) + " rows, worst residual " + std::to_string(worst)};
}

Outcome count_audit() {
  const std::map<std::string, std::size_t> counts{{"Dell-GA7", 2134}, {"Dell-GS9", 2827}, {"Dell-NL1020", 101},
                                                  {"S3D-GA7", 16},    {"S3D-GS9", 2026},  {"S3D-NL1020", 1369},
                                                  {"Print-GA7", 189}};
  Manifest m;
  m.root = "/stub";
  for (const auto& [abbr, n] : counts) {
    const auto pais = pais_from_abbreviation(abbr).pais;
    for (std::size_t i = 0; i < n; ++i) {
      SampleRecord r;
      r.path = abbr + "/" + std::to_string(i) + ".jpg";
      r.label = Label::attack;
      r.pais = pais;
      r.capture_device = pais.capture_device;
      m.samples.push_back(r);
    }
  }
  m.pais_catalog = derive_catalog(m.samples);
  m.declared_totals = {{"Dell UltraSharp 32 Ultra HD 4K Monitor", 2134 + 2827 + 101},
                       {"SAMSUNG C27JG50QQUX monitor", 16 + 2026 + 1369},
                       {"Brother MFC-9340CDW printer", 189}};
  const auto findings = validate_manifest(m, {.check_files = false});
  if (!findings.empty()) return {false, findings[0].kind + ": " + findings[0].message};
  // and a perturbed total must be caught
  m.declared_totals["Dell UltraSharp 32 Ultra HD 4K Monitor"] = 5063;
  const auto bad = validate_manifest(m, {.check_files = false});
  if (bad.size() != 1 || bad[0].kind != "count mismatch") return {false, "perturbed total not reported"};
  return {true, "5062 and 3411 confirmed, perturbed total rejected"};
}

Outcome freeze_invariance() {
  auto model = build_padnet(padnet_spec(Variant::padnet1), backbone());
  const auto before = model.net;
  TrainConfig c = model.spec.train_config;
  c.epochs = 3;
  train(model, fixture32().manifest, c);
  for (int u = 0; u < 26; ++u)
    if (!(model.net.backbone.units[u] == before.backbone.units[u]))
      return {false, "frozen layer " + std::to_string(u + 1) + " changed"};
  std::size_t changed = 0;
  for (std::size_t k = 0; k < model.net.head.size(); ++k)
    for (std::size_t i = 0; i < model.net.head[k].weight.size(); ++i)
      changed += model.net.head[k].weight[i] != before.head[k].weight[i];
  return {changed > 0, "layers 1-26 bit-identical, " + std::to_string(changed) + " head weights changed"};
}

Outcome learnability() {
  const auto& fx = fixture32();
  // separability oracle: nearest centroid on preprocessed pixels
  const auto inputs = load_inputs(fx.manifest, fx.manifest.samples, Normalization::symmetric);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(inputs.size()), static_cast<Eigen::Index>(inputs[0].data.size()));
  std::vector<int> y;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t k = 0; k < inputs[i].data.size(); ++k)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = inputs[i].data[k];
    y.push_back(fx.manifest.samples[i].label == Label::attack);
  }
  const double oracle = pt::nearest_centroid_accuracy(x, y);

  auto model = build_padnet(padnet_spec(Variant::padnet1), backbone());
  TrainConfig c = model.spec.train_config;
  c.epochs = 5;
  const auto r = train(model, fx.manifest, c);
  char buf[160];
  std::snprintf(buf, sizeof buf, "train accuracy %.4f after 5 epochs (last epoch running %.4f), nearest centroid %.4f",
                r.final.accuracy, r.history.back().accuracy, oracle);
  return {r.final.accuracy >= 0.95 && oracle >= 0.95, buf};
}

Outcome gradient_check() {
  auto model = build_padnet(padnet_spec(Variant::padnet1), backbone());
  auto& net = model.net;
  const auto& fx = fixture32();
  std::vector<SampleRecord> batch(fx.manifest.samples.begin(), fx.manifest.samples.begin() + 4);
  batch.push_back(fx.manifest.samples.back());
  const auto inputs = load_inputs(fx.manifest, batch, Normalization::symmetric);
  const auto targets = label_targets(batch);
  std::vector<nn::Tensor3> prefix;
  for (const auto& in : inputs) prefix.push_back(frozen_prefix(net, in));
  std::vector<std::size_t> rows(inputs.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  Gradients g(net);
  loss_and_gradients(net, prefix, rows, targets, g);

  // head-only loss from cached pooled features
  std::vector<std::vector<double>> feats;
  for (const auto& p : prefix) feats.push_back(features_from_prefix(net, p));
  const auto f = stack_rows(feats);
  auto loss = [&] { return nn::bce_with_logits(nn::dense_forward(net.head, f), targets); };

  // five parameters spread over the head: the largest gradient in each layer plus the output bias
  std::vector<std::pair<std::vector<double>*, std::pair<std::size_t, double>>> picks;
  for (std::size_t k = 0; k < net.head.size(); ++k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < g.head[k].weight.size(); ++i)
      if (std::abs(g.head[k].weight[i]) > std::abs(g.head[k].weight[best])) best = i;
    picks.push_back({&net.head[k].weight, {best, g.head[k].weight[best]}});
  }
  picks.push_back({&net.head.back().bias, {1, g.head.back().bias[1]}});

  double worst = 0.0;
  for (auto& [param, at] : picks) {
    const auto [i, analytic] = at;
    const double h = 1e-5, keep = (*param)[i];
    (*param)[i] = keep + h;
    const double up = loss();
    (*param)[i] = keep - h;
    const double down = loss();
    (*param)[i] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-12}));
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu head parameters, worst relative error %.2e", picks.size(), worst);
  return {worst <= 1e-3, buf};
}

Outcome leave_one_pais_out() {
  pt::TempDir dir("acc-loco");
  FixtureConfig c;
  c.n_subjects = 3;
  c.pais_list = {"Dell-GA7", "S3D-GS9", "Print-GA7", "S3D-NL1020"};
  c.n_attack_per_pais = 5;
  const auto fx = synthesize_fixture(c, dir.path());
  std::set<std::string> held;
  for (const auto& s : fx.manifest.samples)
    if (s.pais && s.pais->abbreviation == "Print-GA7") held.insert(s.path);
  const auto r = split(fx.manifest, LeaveOnePaisOut{"Print-GA7", 0.3, 5});
  for (const auto& s : r.train.samples)
    if (held.contains(s.path)) return {false, "held-out sample in train: " + s.path};
  std::size_t found = 0;
  for (const auto& s : r.test.samples) found += held.contains(s.path);
  if (found != held.size()) return {false, "test holds " + std::to_string(found) + " of " + std::to_string(held.size())};
  return {true, std::to_string(held.size()) + " held-out samples all in test, none in train"};
}

Outcome threshold_monotonicity() {
  pt::DecisionGen gen(8);
  const auto raw = gen.make(200, 5);
  std::vector<Decision> ds;
  for (const auto& r : raw)
    ds.emplace_back(r.id, r.score, r.attack ? GroundTruth::attack : GroundTruth::bona_fide,
                    r.attack ? std::optional<std::string>(r.pais) : std::nullopt);
  double last_b = 2.0;
  std::map<std::string, double> last_a;
  for (int t = 1; t <= 9; ++t) {
    const auto rep = metrics_report(ds, t / 10.0);
    if (rep.bpcer > last_b) return {false, "BPCER rose at tau " + std::to_string(t / 10.0)};
    last_b = rep.bpcer;
    for (const auto& [p, m] : rep.per_pais) {
      if (last_a.contains(p) && m.apcer < last_a[p]) return {false, p + " APCER fell at tau " + std::to_string(t / 10.0)};
      last_a[p] = m.apcer;
    }
  }
  return {true, "9 thresholds, 5 PAIS"};
}

Outcome tsne_purity() {
  std::vector<int> labels;
  const auto x = pt::gaussian_blobs(pt::three_blob_centers(50), 30, 0.1, 17, labels);
  double worst = 1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TsneOptions o;
    o.perplexity = 10;
    o.iterations = 500;
    o.seed = seed;
    worst = std::min(worst, pt::oracle_knn_purity(tsne_project(x, o), labels, 10));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "worst 10-NN purity %.4f over 5 seeds", worst);
  return {worst >= 0.9, buf};
}

Outcome round_trips() {
  const auto& fx = fixture32();
  if (!(build_manifest(fx.image_dir) == fx.manifest)) return {false, "rebuilt manifest differs from ground truth"};
  if (!(load_manifest(fx.manifest_path) == fx.manifest)) return {false, "saved manifest differs from ground truth"};
  auto model = build_padnet(padnet_spec(Variant::padnet1), backbone());
  TrainConfig c = model.spec.train_config;
  c.epochs = 1;
  train(model, fx.manifest, c);
  pt::TempDir dir("acc-model");
  save_model(model, dir / "m.pad");
  const auto loaded = load_model(dir / "m.pad");
  const auto a = predict(model, fx.manifest), b = predict(loaded, fx.manifest);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i].score - b[i].score));
  char buf[96];
  std::snprintf(buf, sizeof buf, "manifest identical, max score deviation %.3g", worst);
  return {a.size() == b.size() && worst <= 1e-6, buf};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric oracle equivalence", metric_oracle},
      {"published table audit", table_audit},
      {"published count audit", count_audit},
      {"freeze invariance", freeze_invariance},
      {"fixture learnability", learnability},
      {"gradient check", gradient_check},
      {"leave-one-PAIS-out split", leave_one_pais_out},
      {"threshold monotonicity", threshold_monotonicity},
      {"t-SNE neighbour purity", tsne_purity},
      {"round trips", round_trips},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("%s %2zu %-28s (%.2fs) %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
