// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "../tests/oracles.hpp"

using namespace ticl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path g_dir;

std::string p(const std::string& name) { return (g_dir / name).string(); }

int cli(const std::string& args, std::string* out = nullptr) {
  const std::string cmd = std::string("\"") + TICL_CLI_PATH + "\" " + args + " >" + p("stdout.txt") + " 2>" +
                          p("stderr.txt");
  const int status = std::system(cmd.c_str());
  if (out) *out = slurp(p("stdout.txt"));
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

double csv_metric(const std::string& csv, const std::string& key) {
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(key + ",", 0) == 0) return std::stod(line.substr(key.size() + 1));
  return std::nan("");
}

void gradient_fidelity(Verdict& v) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int per_mode[2] = {0, 0};
  int configs = 0;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    const auto gc = oracle::random_grad_case(seed);
    worst = std::max(worst, oracle::max_grad_rel_error(gc));
    ++per_mode[gc.mode == LossMode::batch];
    ++configs;
  }
  const double secs = seconds_since(t0);
  v.detail << configs << " configs (" << per_mode[0] << " class, " << per_mode[1] << " batch), max rel err "
           << worst << ", " << secs << " s";
  v.require(configs >= 20 && per_mode[0] > 0 && per_mode[1] > 0, "coverage");
  v.require(worst < 1e-5, "rel err < 1e-5");
  v.require(secs < 10.0, "runtime < 10 s");
}

void loss_closed_forms(Verdict& v) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  auto unit_rows = [&](int b, int k) {
    Matrix m = Matrix::NullaryExpr(b, k, [&] { return n01(rng); });
    return normalize_rows(m);
  };
  const double single = infonce_loss(unit_rows(1, 8), unit_rows(1, 8), 0.07);
  v.require(single == 0.0, "B=1 gives exactly 0");
  double worst = 0.0;
  for (int b : {2, 3, 8, 64, 512}) {
    const Matrix img = unit_rows(b, 8);
    Matrix tgt(b, 8);
    for (int i = 0; i < b; ++i) tgt.row(i) = img.row(0);
    worst = std::max(worst, std::abs(infonce_loss(img, tgt, 0.07) - b * std::log(static_cast<double>(b))));
  }
  v.require(worst <= 1e-9, "uniform logits give B ln B");
  v.detail << "B=1 loss " << single << ", max |loss - B ln B| " << worst;
}

void synthetic_separability(Verdict& v) {
  const auto t0 = Clock::now();
  bool ok = cli("synth --suite separable --out-features " + p("sep.ticf") + " --out-meta " + p("sep.jsonl")) == 0;
  ok = ok && cli("curate split --features " + p("sep.ticf") + " --meta " + p("sep.jsonl") +
                 " --ratio 9:1 --train-features " + p("sep_tr.ticf") + " --train-meta " + p("sep_tr.jsonl") +
                 " --test-features " + p("sep_te.ticf") + " --test-meta " + p("sep_te.jsonl")) == 0;
  const double t_prep = seconds_since(t0);
  const auto t1 = Clock::now();
  ok = ok && cli("train --features " + p("sep_tr.ticf") + " --meta " + p("sep_tr.jsonl") + " --model " +
                 p("sep_model.json")) == 0;
  std::string report;
  ok = ok && cli("eval --model " + p("sep_model.json") + " --features " + p("sep_te.ticf") + " --meta " +
                     p("sep_te.jsonl"),
                 &report) == 0;
  const double t_run = seconds_since(t1);
  v.require(ok, "CLI pipeline exit codes");
  const double top1 = csv_metric(report, "top1"), mae = csv_metric(report, "time_mae_minutes");
  v.detail << "train+eval " << t_run << " s (synth+split " << t_prep << " s), held-out top1 " << top1 << ", MAE "
           << mae << " min";
  v.require(t_run < 60.0, "train+eval < 60 s");
  v.require(top1 >= 0.90, "top1 >= 0.90");
  v.require(mae <= 45.0, "MAE <= 45 min");
}

void midpoint_collapse(Verdict& v) {
  const std::vector<double> x{0.4, -1.2, 0.7, 2.0};
  const Dataset pair{4, {{"a", x, parse_clock("06:00")}, {"b", x, parse_clock("18:00")}}};
  const ClockTime sp = predict(fit_scalar(pair), x);
  v.require(circular_diff(sp, parse_clock("12:00")) <= 1, "scalar 06:00/18:00 -> 12:00");
  const Dataset wrap{4, {{"a", x, parse_clock("00:10")}, {"b", x, parse_clock("23:50")}}};
  const ClockTime cp = predict(fit_cyclic(wrap), x);
  v.require(circular_diff(cp, parse_clock("00:00")) <= 5, "cyclic 00:10/23:50 -> 00:00");
  v.detail << "scalar " << format_clock(sp) << ", cyclic " << format_clock(cp) << "; confuser MAE";

  const Dataset ds = generate(suite("confuser"));
  const TimeLabelSpace space(24);
  const auto split = stratified_split(ds, 0.1, 7, space);
  const Dataset tr = subset(ds, split.train), te = subset(ds, split.test);
  std::vector<ClockTime> gt;
  for (const auto& r : te.records) gt.push_back(r.time);
  const ScalarRegressor scalar = fit_scalar(tr);
  const CyclicRegressor cyclic = fit_cyclic(tr);
  std::vector<ClockTime> ps, pc;
  for (const auto& r : te.records) {
    ps.push_back(predict(scalar, r.features));
    pc.push_back(predict(cyclic, r.features));
  }
  const double mae_s = time_mae(ps, gt), mae_c = time_mae(pc, gt);
  v.detail << " scalar " << mae_s << ", cyclic " << mae_c << ", ticl";
  ModelConfig mc;
  mc.space = space;
  mc.feature_dim = ds.dim;
  mc.embed_dim = 64;
  mc.time_hidden = {64};
  mc.adaptor_hidden = {128};
  for (std::uint64_t seed : {0, 1, 2}) {
    TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 128;
    tc.lr0 = 2e-3;
    tc.halve_every = 10;
    tc.seed = seed;
    const auto res = train(tr, mc, tc);
    std::vector<ClockTime> pt;
    for (const auto& pr : classify_all(res.params, te, space, 1)) pt.push_back(pr.time);
    const double mae_t = time_mae(pt, gt);
    v.detail << " " << mae_t;
    v.require(mae_t < mae_s && mae_t < mae_c, "ticl beats both baselines at seed " + std::to_string(seed));
  }
}

ModelParams oracle_model() {
  ModelConfig cfg;
  cfg.space = TimeLabelSpace(24);
  cfg.feature_dim = 8;
  cfg.embed_dim = 8;
  cfg.time_hidden = {8};
  cfg.adaptor_hidden = {12};
  return init_params(21, cfg);
}

void oracle_equivalences(Verdict& v) {
  const ModelParams m = oracle_model();
  const Dataset gallery = oracle::random_dataset(1000, 8, 11);
  const Dataset queries = oracle::random_dataset(50, 8, 12);
  const GalleryIndex index = build_index(m, gallery);
  int query_mismatch = 0, knn_mismatch = 0;
  for (const auto& q : queries.records) {
    const auto want = oracle::exhaustive_ranking(index.embeddings(), image_embed(m, q.features));
    const auto hits = query(index, q.features, m, 1000);
    for (std::size_t i = 0; i < hits.size(); ++i) query_mismatch += hits[i].index != want[i];
    for (int c : {6, 24, 48}) {
      const TimeLabelSpace space(c);
      knn_mismatch += knn_predict(index, q.features, m, space, 5).ranked != oracle::knn_classes(want, gallery, space, 5);
    }
  }
  int dbscan_mismatch = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<std::vector<double>> pts;
    Matrix mat(100, 2);
    for (int i = 0; i < 100; ++i) {
      pts.push_back({u(rng), u(rng)});
      mat(i, 0) = pts.back()[0];
      mat(i, 1) = pts.back()[1];
    }
    const DbscanConfig cfg{1.0, 4};
    dbscan_mismatch += oracle::canonical_labels(dbscan(mat, cfg)) !=
                       oracle::canonical_labels(oracle::dbscan_reference(pts, cfg.epsilon, cfg.min_pts));
  }
  v.detail << "query rank mismatches " << query_mismatch << "/50000, knn mismatches " << knn_mismatch
           << "/150, dbscan partition mismatches " << dbscan_mismatch << "/20";
  v.require(query_mismatch == 0, "query");
  v.require(knn_mismatch == 0, "knn");
  v.require(dbscan_mismatch == 0, "dbscan");
}

void metric_exactness(Verdict& v) {
  v.require(circular_diff(parse_clock("23:59"), parse_clock("00:00")) == 1, "23:59 vs 00:00");
  v.require(circular_diff(parse_clock("00:00"), parse_clock("12:00")) == 720, "00:00 vs 12:00");
  v.require(circular_diff(parse_clock("23:00"), parse_clock("01:00")) == 120, "23:00 vs 01:00");
  std::vector<ClockTime> uniform;
  for (int m = 0; m < 1440; ++m) uniform.emplace_back(m);
  const double obs = observational_error(uniform, TimeLabelSpace(24));
  v.require(obs == 15.0, "observational error 15.0");
  std::mt19937_64 rng(3);
  bool monotone = true;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Prediction> preds;
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
      std::vector<int> ranked(24);
      std::iota(ranked.begin(), ranked.end(), 0);
      std::shuffle(ranked.begin(), ranked.end(), rng);
      preds.push_back({ranked, class_midpoint(ranked.front(), TimeLabelSpace(24))});
      labels.push_back(static_cast<int>(rng() % 24));
    }
    double prev = -1.0;
    for (int k = 1; k <= 24; ++k) {
      const double a = topk_accuracy(preds, labels, k);
      monotone = monotone && a >= prev;
      prev = a;
    }
    monotone = monotone && prev == 1.0;
  }
  v.require(monotone, "top-k monotone");
  const std::vector<ClockTime> pred{parse_clock("10:00")};
  const double hit = hour_accuracy(pred, std::vector<ClockTime>{parse_clock("10:29")});
  const double miss = hour_accuracy(pred, std::vector<ClockTime>{parse_clock("10:31")});
  v.require(hit == 1.0 && miss == 0.0, "hour accuracy 29 hit / 31 miss");
  v.detail << "wrap 23:59/00:00 = " << circular_diff(parse_clock("23:59"), parse_clock("00:00"))
           << ", observational error " << obs << ", top-k monotone " << (monotone ? "yes" : "no")
           << ", hour acc 29/31 min = " << hit << "/" << miss;
}

void snr_estimator(Verdict& v) {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double sigma = 6.0 + static_cast<double>(seed % 4);
    const GrayImage img = oracle::ramp_with_noise(512, 256, 40, 215, sigma, seed);
    worst = std::max(worst, std::abs(snr_estimate(img).snr_db - oracle::snr_direct_db(img, sigma)));
  }
  bool noiseless = false;
  try {
    snr_estimate(GrayImage(64, 64, std::vector<double>(64 * 64, 90.0)));
  } catch (const SnrError& e) {
    noiseless = e.kind() == SnrError::Kind::noiseless;
  }
  v.detail << "10 images, max |estimate - oracle| " << worst << " dB, constant image noiseless "
           << (noiseless ? "yes" : "no");
  v.require(worst <= 1.5, "within 1.5 dB");
  v.require(noiseless, "noiseless error");
}

bool rejects_with(const std::string& bytes, const std::string& fragment) {
  try {
    decode_features(bytes);
  } catch (const ValidationError& e) {
    return std::string(e.what()).find(fragment) != std::string::npos;
  }
  return false;
}

void serialization(Verdict& v) {
  const ModelParams m = oracle_model();
  save_model(m, p("ser_model.json"));
  const ModelParams back = load_model(p("ser_model.json"));
  const Dataset probes = oracle::random_dataset(100, 8, 5);
  const TimeLabelSpace space(24);
  const auto a = classify_all(m, probes, space, 24), b = classify_all(back, probes, space, 24);
  double worst = 0.0;
  bool same_rank = true;
  const Matrix ta = class_embedding_table(m), tb = class_embedding_table(back);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    same_rank = same_rank && a[i].ranked == b[i].ranked && a[i].time == b[i].time;
    const Vector la = similarity_logits(image_embed(m, probes.records[i].features), ta, m.tau());
    const Vector lb = similarity_logits(image_embed(back, probes.records[i].features), tb, back.tau());
    worst = std::max(worst, (la - lb).cwiseAbs().maxCoeff());
  }
  v.require(same_rank && worst <= 1e-6, "classify outputs preserved");

  Dataset ds = oracle::random_dataset(64, 16, 6);
  for (auto& r : ds.records)
    for (double& x : r.features) x = static_cast<float>(x);
  write_dataset(ds, p("ser.ticf"), p("ser.jsonl"));
  const Dataset rd = read_dataset(p("ser.ticf"), p("ser.jsonl"));
  bool exact = rd.size() == ds.size();
  for (std::size_t i = 0; exact && i < ds.size(); ++i) exact = rd.records[i].features == ds.records[i].features;
  exact = exact && encode_features(rd) == slurp(p("ser.ticf"));
  v.require(exact, "feature round trip bit-exact");

  const std::string bytes = slurp(p("ser.ticf"));
  std::string bad_magic = bytes, bad_version = bytes, nan_value = bytes;
  bad_magic[1] = 'X';
  bad_version[4] = 9;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan_value.data() + 20 + 4 * 17, &nan, 4);
  const bool rejected = rejects_with(bytes.substr(0, bytes.size() - 2), "actual " + std::to_string(bytes.size() - 2) + " bytes") &&
                        rejects_with(bad_magic, "at byte 0") && rejects_with(bad_version, "at byte 4") &&
                        rejects_with(nan_value, "at byte 88");
  v.require(rejected, "positioned errors");
  v.detail << "model reload max logit diff " << worst << " over 100 probes, feature round trip "
           << (exact ? "bit-exact" : "differs") << ", corrupt files " << (rejected ? "rejected" : "accepted");
}

void determinism(Verdict& v) {
  bool data = true, trace = true, report = true;
  for (int run = 0; run < 2; ++run) {
    const std::string s = std::to_string(run);
    data = data && cli("synth --suite skewed --samples-per-class 20 --out-features " + p("d" + s + ".ticf") +
                       " --out-meta " + p("d" + s + ".jsonl")) == 0;
    trace = trace && cli("train --features " + p("d" + s + ".ticf") + " --meta " + p("d" + s + ".jsonl") +
                         " --epochs 4 --batch-size 64 --embed-dim 16 --time-hidden 16 --adaptor-hidden 32 --seed 4" +
                         " --model " + p("m" + s + ".json") + " --loss-csv " + p("l" + s + ".csv")) == 0;
    report = report && cli("eval --model " + p("m" + s + ".json") + " --features " + p("d" + s + ".ticf") +
                           " --meta " + p("d" + s + ".jsonl") + " --report " + p("r" + s + ".csv") +
                           " --predictions " + p("pr" + s + ".csv") + " --confusion " + p("c" + s + ".csv")) == 0;
  }
  auto same = [](const std::string& a, const std::string& b) {
    const std::string x = slurp(p(a));
    return !x.empty() && x == slurp(p(b));
  };
  data = data && same("d0.ticf", "d1.ticf") && same("d0.jsonl", "d1.jsonl");
  trace = trace && same("l0.csv", "l1.csv") && same("m0.json", "m1.json");
  report = report && same("r0.csv", "r1.csv") && same("pr0.csv", "pr1.csv") && same("c0.csv", "c1.csv");

  // library path as well
  const Dataset ds = generate(suite("confuser"));
  bool lib = encode_features(ds) == encode_features(generate(suite("confuser")));
  ModelConfig mc;
  mc.feature_dim = ds.dim;
  mc.embed_dim = 16;
  mc.time_hidden = {16};
  mc.adaptor_hidden = {16};
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 11;
  const auto r1 = train(ds, mc, tc), r2 = train(ds, mc, tc);
  for (std::size_t i = 0; i < r1.trace.size(); ++i) lib = lib && r1.trace[i].mean_loss == r2.trace[i].mean_loss;
  lib = lib && encode_model(r1.params) == encode_model(r2.params);

  v.detail << "datasets " << (data ? "identical" : "differ") << ", traces+models " << (trace ? "identical" : "differ")
           << ", reports " << (report ? "identical" : "differ") << ", library rerun "
           << (lib ? "identical" : "differs");
  v.require(data && trace && report && lib, "bit-identical reruns");
}

}  // namespace

int main() {
  g_dir = fs::temp_directory_path() / ("ticl_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(g_dir);
  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> checks{
      {"gradient-fidelity", gradient_fidelity},
      {"loss-closed-forms", loss_closed_forms},
      {"synthetic-separability", synthetic_separability},
      {"midpoint-collapse", midpoint_collapse},
      {"oracle-equivalences", oracle_equivalences},
      {"metric-exactness", metric_exactness},
      {"snr-estimator", snr_estimator},
      {"serialization", serialization},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    Verdict v;
    try {
      fn(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << " [exception: " << e.what() << "]";
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail.str() << std::endl;
  }
  fs::remove_all(g_dir);
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
