// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//
//   acceptance            run everything
//   acceptance 3 7        run only the listed criteria (4, 5 and 6 share the
//                         matrix with 3, so any of them triggers it)

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fedprint/adversary.hpp"
#include "fedprint/aggregation.hpp"
#include "fedprint/config.hpp"
#include "fedprint/fingerprint.hpp"
#include "fedprint/harness.hpp"
#include "fedprint/mlp.hpp"
#include "support/oracles.hpp"

using namespace fedprint;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back((ok ? "ok   " : "MISS ") + what);
  }
};

int failures = 0;

void report(int id, const std::string& title, const Verdict& v) {
  std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << "\n";
  for (const auto& n : v.notes) std::cout << "        " << n << "\n";
  std::cout.flush();
  if (!v.pass) ++failures;
}

const std::string kConfigs = FEDPRINT_CONFIGS;

// ---- 1 and 2 ---------------------------------------------------------------

struct DeskRuns {
  double central_acc = 0, central_s = 0;
  double fed_acc = 0, fed_s = 0;
};

DeskRuns run_desk(bool federated) {
  const auto cfg = load_config(kConfigs + "/desk.json");
  DeskRuns d;

  auto t0 = Clock::now();
  const auto corpus = build_corpus(cfg.generator);
  const double corpus_s = seconds_since(t0);
  const auto central = run_centralized(corpus, cfg.centralized_options());
  d.central_acc = central.test.accuracy;
  d.central_s = seconds_since(t0);

  if (federated) {
    t0 = Clock::now();
    auto fed_cfg = cfg;
    fed_cfg.aggregation.kind = AggregatorKind::FedAvg;
    fed_cfg.attack = AttackConfig{};
    const auto run = run_federated_scenario(corpus, fed_cfg);
    d.fed_acc = run.final_test.accuracy;
    d.fed_s = seconds_since(t0) + corpus_s;
  }
  return d;
}

void criteria_1_2(bool want1, bool want2) {
  const auto d = run_desk(want2);
  if (want1) {
    Verdict v;
    v.check(d.central_acc >= 0.99, fmt("centralized test accuracy %.6f >= 0.99", d.central_acc));
    v.check(d.central_s < 60, fmt("runtime %.1f s < 60 s", d.central_s));
    report(1, "centralized baseline", v);
  }
  if (want2) {
    Verdict v;
    const double gap = std::abs(d.fed_acc - d.central_acc);
    v.check(gap <= 0.005, fmt("federated %.6f vs centralized %.6f, |gap| %.6f <= 0.005", d.fed_acc,
                              d.central_acc, gap));
    v.check(d.fed_s < 180, fmt("runtime %.1f s < 180 s", d.fed_s));
    report(2, "federated parity", v);
  }
}

// ---- 3 to 6: attack matrix -------------------------------------------------

struct Matrix {
  ScenarioConfig cfg;
  MatrixReport report;

  const MatrixCell& cell(AggregatorKind k, int n, double frac) const {
    for (const auto& c : report.cells)
      if (c.aggregator == k && c.n_malicious == n && (n == 0 || std::abs(c.fraction - frac) < 1e-12)) return c;
    throw std::runtime_error(fmt("missing cell %s/%d/%.2f", std::string(to_string(k)).c_str(), n, frac));
  }
  std::vector<const MatrixCell*> attacked(AggregatorKind k) const {
    std::vector<const MatrixCell*> out;
    for (const auto& c : report.cells)
      if (c.aggregator == k && c.n_malicious > 0) out.push_back(&c);
    return out;
  }
};

std::string cell_name(const MatrixCell& c) {
  return fmt("%s %d mal @ %.2f", std::string(to_string(c.aggregator)).c_str(), c.n_malicious, c.fraction);
}

void criterion_3(const Matrix& m) {
  Verdict v;
  for (const auto& c : m.report.cells) {
    if (c.aggregator != AggregatorKind::FedAvg) continue;
    if (!c.ok) v.check(false, cell_name(c) + " error: " + c.error);
    if (c.fraction <= 0.5) v.check(c.accuracy >= 0.85, cell_name(c) + fmt(": %.4f >= 0.85", c.accuracy));
  }
  for (double f : {0.75, 1.0}) {
    const auto& c = m.cell(AggregatorKind::FedAvg, 3, f);
    v.check(c.accuracy <= 0.35, cell_name(c) + fmt(": %.4f <= 0.35", c.accuracy));
  }
  report(3, "FedAvg degradation trend", v);
}

void criterion_4(const Matrix& m) {
  Verdict v;
  const auto& med = m.cell(AggregatorKind::CoordMedian, 1, 1.0);
  const auto& avg = m.cell(AggregatorKind::FedAvg, 1, 1.0);
  v.check(med.accuracy >= 0.85, cell_name(med) + fmt(": %.4f >= 0.85", med.accuracy));
  v.check(avg.accuracy <= 0.5, cell_name(avg) + fmt(": %.4f <= 0.5", avg.accuracy));
  report(4, "median robustness", v);
}

void criterion_5(const Matrix& m) {
  Verdict v;
  const auto cells = m.attacked(AggregatorKind::Krum);
  v.check(cells.size() == 12, fmt("%zu attack cells", cells.size()));
  double lo = 1, hi = 0;
  for (const auto* c : cells) lo = std::min(lo, c->accuracy), hi = std::max(hi, c->accuracy);
  v.check(hi - lo <= 1e-9, fmt("accuracy range [%.9f, %.9f], spread %.3g <= 1e-9", lo, hi, hi - lo));

  for (const auto* c : cells) {
    if (c->selected_orgs.empty() || c->selected_orgs.back().size() != 1) {
      v.check(false, cell_name(*c) + ": no single selected org in the last round");
      continue;
    }
    const int org = c->selected_orgs.back().front();
    std::set<int> present;
    for (const auto& [model, w] : m.cfg.partition.models_per_org.at(std::size_t(org)))
      if (w > 0) present.insert(class_index(model));
    std::set<int> predicted;
    for (std::size_t t = 0; t < kClassCount; ++t)
      for (std::size_t p = 0; p < kClassCount; ++p)
        if (c->confusion[t][p] != 0) predicted.insert(int(p));
    const bool subset = std::includes(present.begin(), present.end(), predicted.begin(), predicted.end());
    std::string cols;
    for (int p : predicted) cols += std::string(to_string(model_from_index(p))) + " ";
    v.check(subset, cell_name(*c) + fmt(": selected org %d, %.4f, predicted columns { ", org, c->accuracy) +
                        cols + "}");
  }
  report(5, "Krum constancy", v);
}

void criterion_6(const Matrix& m) {
  Verdict v;
  const auto& z = m.cell(AggregatorKind::Zeno, 3, 1.0);
  const auto& med = m.cell(AggregatorKind::CoordMedian, 3, 1.0);
  v.check(z.accuracy > med.accuracy, fmt("3 mal @ 1.00: zeno %.4f > median %.4f", z.accuracy, med.accuracy));
  for (double f : m.cfg.matrix.fractions) {
    const auto& c = m.cell(AggregatorKind::Zeno, 2, f);
    v.check(c.accuracy >= 0.5, cell_name(c) + fmt(": %.4f >= 0.5", c.accuracy));
  }
  report(6, "Zeno vs median crossover", v);
}

void criteria_3_to_6(const std::set<int>& want) {
  Matrix m;
  m.cfg = load_config(kConfigs + "/attack.json");
  const auto t0 = Clock::now();
  const auto corpus = build_corpus(m.cfg.generator);
  m.report = run_attack_matrix(corpus, m.cfg);
  std::cout << fmt("        (attack matrix: %zu cells in %.1f s)\n", m.report.cells.size(), seconds_since(t0));
  if (want.count(3)) criterion_3(m);
  if (want.count(4)) criterion_4(m);
  if (want.count(5)) criterion_5(m);
  if (want.count(6)) criterion_6(m);
}

// ---- 7: properties ---------------------------------------------------------

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = a.size() == b.size() ? 0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

RowMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1) {
  std::normal_distribution<double> n(0, scale);
  RowMatrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  return x;
}

MlpArchitecture random_arch(std::mt19937_64& rng, int max_width) {
  std::uniform_int_distribution<int> depth(1, 3), width(1, max_width), out(2, 5);
  MlpArchitecture a;
  a.layer_sizes = {width(rng)};
  for (int d = depth(rng); d > 0; --d) a.layer_sizes.push_back(width(rng));
  a.layer_sizes.push_back(out(rng));
  return a;
}

double gradient_check(std::mt19937_64& rng) {
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto arch = random_arch(rng, 7);
    // Random biases as well as weights: zero biases behind a dead layer put
    // pre-activations exactly on the ReLU kink, where central differences
    // see half the one-sided slope.
    Vector params(static_cast<Eigen::Index>(arch.parameter_count()));
    std::normal_distribution<double> g(0, 0.7);
    for (Eigen::Index i = 0; i < params.size(); ++i) params[i] = g(rng);
    const auto w = unflatten(arch, params);
    const std::size_t n = 1 + rng() % 10;
    const RowMatrix x = random_matrix(n, arch.input_size(), rng);
    std::vector<int> y(n);
    for (int& c : y) c = int(rng() % arch.output_size());
    const Dataset d{x, y};
    const auto analytic = loss_and_gradient(w, x, y);
    const Vector p = flatten(w);
    Vector numeric(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      Vector plus = p, minus = p;
      plus[i] += 1e-6;
      minus[i] -= 1e-6;
      numeric[i] = (cross_entropy(unflatten(arch, plus), d) - cross_entropy(unflatten(arch, minus), d)) / 2e-6;
    }
    const double denom = analytic.gradient.norm() + numeric.norm();
    if (denom > 0) worst = std::max(worst, (analytic.gradient - numeric).norm() / denom);
  }
  return worst;
}

double softmax_check(std::mt19937_64& rng) {
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto arch = trial % 5 ? random_arch(rng, 20) : MlpArchitecture{};
    const auto w = init_weights(arch, rng());
    const double scale = trial % 2 ? 1.0 : 1e3;  // large inputs stress the exponentials
    const RowMatrix p = forward(w, random_matrix(64, arch.input_size(), rng, scale));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      worst = std::max(worst, std::abs(p.row(r).sum() - 1.0));
      if (p.row(r).minCoeff() < 0 || !std::isfinite(p.row(r).sum())) worst = INFINITY;
    }
  }
  return worst;
}

bool flatten_check(std::mt19937_64& rng) {
  for (int trial = 0; trial < 50; ++trial) {
    const auto arch = trial ? random_arch(rng, 30) : MlpArchitecture{};
    const auto w = init_weights(arch, rng());
    const Vector flat = flatten(w);
    if (std::size_t(flat.size()) != arch.parameter_count()) return false;
    if (!(unflatten(arch, flat) == w)) return false;
    if (flatten(unflatten(arch, flat)) != flat) return false;
  }
  return true;
}

ClientUpdate make_update(int org, const std::vector<double>& v, std::int64_t n, const MlpArchitecture& arch) {
  return {org, unflatten(arch, Vector::Map(v.data(), Eigen::Index(v.size()))), n};
}

// Worst deviation from the oracles across random cases with K <= 5 and dim <= 10.
double aggregator_check(std::mt19937_64& rng, bool& selections_agree) {
  double worst = 0;
  selections_agree = true;
  std::normal_distribution<double> n01(0, 1);
  for (int trial = 0; trial < 500; ++trial) {
    const int hidden = 1 + int(rng() % 2);
    const MlpArchitecture arch{{2, hidden, 2}};
    const int k = 3 + int(rng() % 3);
    std::vector<ClientUpdate> updates;
    std::vector<oracle::Flat> flats;
    std::vector<double> counts;
    for (int i = 0; i < k; ++i) {
      std::vector<double> v(arch.parameter_count());
      for (double& x : v) x = n01(rng);
      const auto count = std::int64_t(1 + rng() % 50);
      updates.push_back(make_update(i, v, count, arch));
      flats.push_back(v);
      counts.push_back(double(count));
    }
    worst = std::max(worst, max_abs_diff(to_std(flatten(fed_avg(updates).weights)), oracle::fedavg(flats, counts)));
    worst = std::max(worst, max_abs_diff(to_std(flatten(coord_median(updates).weights)), oracle::median(flats)));

    const int f = int(rng() % std::size_t(k - 2));  // K - f - 2 >= 1
    const auto pick = oracle::krum(flats, f);
    const auto kr = krum(updates, f);
    selections_agree = selections_agree && kr.selected_orgs == std::vector<int>{int(pick)};
    worst = std::max(worst, max_abs_diff(to_std(flatten(kr.weights)), flats[pick]));

    AggregatorSpec spec;
    spec.zeno_rho = 0.01;
    spec.zeno_b = 1 + int(rng() % std::size_t(k - 1));
    std::vector<double> prev(arch.parameter_count());
    for (double& p : prev) p = 0.1 * n01(rng);
    Dataset val;
    val.x = random_matrix(12, 2, rng);
    for (int r = 0; r < 12; ++r) val.y.push_back(r % 2);
    std::vector<std::vector<double>> xs;
    for (Eigen::Index r = 0; r < val.x.rows(); ++r) xs.push_back({val.x(r, 0), val.x(r, 1)});
    std::vector<std::size_t> kept;
    const auto expect = oracle::zeno(flats, prev, spec.zeno_rho, spec.zeno_b, arch.layer_sizes, xs, val.y, &kept);
    const auto got = zeno(updates, make_update(0, prev, 1, arch).weights, spec, val);
    worst = std::max(worst, max_abs_diff(to_std(flatten(got.weights)), expect));
    std::vector<int> kept_ids(kept.begin(), kept.end());
    selections_agree = selections_agree && got.selected_orgs == kept_ids;
  }
  return worst;
}

double extractor_check(std::mt19937_64& rng) {
  const auto profiles = default_profiles();
  std::uniform_int_distribution<int> len(2, 300);
  double worst = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    auto g = generate_timing_group(profiles[std::size_t(trial % 4)], trial, rng(), std::size_t(len(rng)));
    if (trial % 3 == 0)  // coarse values force repeated modes and zero steps
      for (double& s : g.samples) s = std::round(s * 2) / 2;
    const auto got = extract_features(g);
    const auto o = oracle::features(g.samples);
    const std::vector<double> a = {got.min, got.max, got.mean, got.median, got.std_dev, got.mode, got.sum,
                                   got.min_decrease, got.max_decrease, got.decrease_sum, got.min_increase,
                                   got.max_increase, got.increase_sum};
    const std::vector<double> b = {o.min, o.max, o.mean, o.median, o.std_dev, o.mode, o.sum,
                                   o.min_decrease, o.max_decrease, o.decrease_sum, o.min_increase,
                                   o.max_increase, o.increase_sum};
    worst = std::max(worst, max_abs_diff(a, b));
  }
  return worst;
}

std::size_t label_flip_survivors(std::mt19937_64& rng) {
  std::size_t kept = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Organization o;
    o.org_id = trial;
    o.rng_stream = std::uint64_t(trial);
    for (int i = 0; i < 500; ++i) {
      FeatureVector r;
      r.model_label = kAllModels[rng() % kClassCount];
      r.device_id = i;
      o.train.push_back(r);
    }
    const auto f = flip_labels(o, 1.0, rng());
    for (std::size_t i = 0; i < o.train.size(); ++i) kept += f.train[i].model_label == o.train[i].model_label;
  }
  return kept;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool determinism_check() {
  ScenarioConfig c;
  c.seed = 11;
  c.generator.groups_per_device = 25;
  c.generator.group_size = 200;
  c.architecture = MlpArchitecture{{13, 32, 4}};
  c.rounds = 3;
  c.max_epochs = 5;
  c.server_validation_rows = 32;
  const auto dir = fs::temp_directory_path() / "fedprint_acceptance_det";
  fs::remove_all(dir);
  cmd_generate(c, dir / "corpus.csv");
  for (auto kind : {AggregatorKind::FedAvg, AggregatorKind::Zeno}) {
    c.aggregation.kind = kind;
    const auto a = cmd_train(dir / "corpus.csv", c, TrainMode::Federated, dir / "a");
    const auto b = cmd_train(dir / "corpus.csv", c, TrainMode::Federated, dir / "b");
    if (slurp(a.metrics_path) != slurp(b.metrics_path) || slurp(a.checkpoint_path) != slurp(b.checkpoint_path))
      return false;
  }
  const auto a = cmd_train(dir / "corpus.csv", c, TrainMode::Centralized, dir / "c1");
  const auto b = cmd_train(dir / "corpus.csv", c, TrainMode::Centralized, dir / "c2");
  return slurp(a.metrics_path) == slurp(b.metrics_path);
}

void criterion_7() {
  Verdict v;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240607);
  const double grad = gradient_check(rng);
  v.check(grad < 1e-4, fmt("gradient check worst relative error %.3g < 1e-4", grad));
  const double soft = softmax_check(rng);
  v.check(soft <= 1e-6, fmt("softmax rows sum to 1, worst deviation %.3g <= 1e-6", soft));
  v.check(flatten_check(rng), "flatten/unflatten round trip exact");
  bool agree = false;
  const double agg = aggregator_check(rng, agree);
  v.check(agg <= 1e-12 && agree, fmt("aggregators vs oracles, worst %.3g <= 1e-12, selections %s", agg,
                                     agree ? "agree" : "DISAGREE"));
  const double feat = extractor_check(rng);
  v.check(feat <= 1e-9, fmt("feature extractor vs oracle on 10^4 groups, worst %.3g <= 1e-9", feat));
  const auto kept = label_flip_survivors(rng);
  v.check(kept == 0, fmt("label flip at 1.0 preserved %zu of 10000 labels", kept));
  v.check(determinism_check(), "equal-seed runs give identical metrics JSON");
  const double s = seconds_since(t0);
  v.check(s < 120, fmt("runtime %.1f s < 120 s", s));
  report(7, "property suite", v);
}

// ---- 8 ---------------------------------------------------------------------

void criterion_8() {
  Verdict v;
  const std::string fixtures = FEDPRINT_FIXTURES;
  const auto out = fs::temp_directory_path() / "fedprint_acceptance_real";
  fs::remove_all(out);
  const std::string cmd = std::string("\"") + FEDPRINT_CLI + "\" train --mode centralized --config " + fixtures +
                          "/published_schema.json --dataset " + fixtures + "/published_schema_100.csv --out-dir " +
                          out.string() + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  const int rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  v.check(rc == 0, fmt("train --mode centralized exit code %d", rc));
  const auto metrics = out / "metrics.json";
  v.check(fs::exists(metrics), "metrics.json written");
  if (fs::exists(metrics)) {
    const auto doc = nlohmann::json::parse(slurp(metrics));
    const auto& rows = doc["rows"];
    const int total = rows["train"].get<int>() + rows["validation"].get<int>() + rows["test"].get<int>();
    v.check(total == 100, fmt("all %d fixture rows ingested", total));
    v.check(doc["final"]["test_rows"].get<int>() > 0, "test split evaluated");
  }
  report(8, "published-schema CSV path", v);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> want;
  for (int i = 1; i < argc; ++i) want.insert(std::atoi(argv[i]));
  if (want.empty()) want = {1, 2, 3, 4, 5, 6, 7, 8};

  const auto guarded = [](int id, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      Verdict v;
      v.check(false, std::string("exception: ") + e.what());
      report(id, "aborted", v);
    }
  };

  if (want.count(1) || want.count(2)) guarded(1, [&] { criteria_1_2(want.count(1), want.count(2)); });
  if (want.count(3) || want.count(4) || want.count(5) || want.count(6))
    guarded(3, [&] { criteria_3_to_6(want); });
  if (want.count(7)) guarded(7, criterion_7);
  if (want.count(8)) guarded(8, criterion_8);

  std::cout << (failures ? "FAIL" : "PASS") << "  acceptance: " << failures << " criteria failed\n";
  return failures ? 1 : 0;
}
