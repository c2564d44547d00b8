// ticl: command-line front end for training, evaluation, retrieval and curation.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ticl/ticl.hpp"

namespace {

using namespace ticl;

constexpr int kExitValidation = 2;

const CLI::Validator kAtLeastOne(
    [](std::string& v) -> std::string {
      try {
        if (std::stoll(v) >= 1 && v.find_first_not_of("0123456789") == std::string::npos) return {};
      } catch (const std::exception&) {
      }
      return "must be an integer >= 1, got " + v;
    },
    "INT>=1");

void log(const std::string& msg) { std::cerr << "[ticl] " << msg << "\n"; }

std::vector<int> parse_hours(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    int h = -1;
    try {
      h = std::stoi(tok);
    } catch (const std::exception&) {
      throw ValidationError("--night-hours: '" + tok + "' is not an hour");
    }
    if (h < 0 || h > 23) throw ValidationError("--night-hours: " + tok + " outside 0..23");
    out.push_back(h);
  }
  return out;
}

TimeLabelSpace make_space(int classes, bool month_factor) {
  std::vector<LabelFactor> f;
  if (month_factor) f.push_back({"month", 12});
  return TimeLabelSpace(classes, f);
}

// --------------------------------------------------------------------------- synth

struct SynthArgs {
  std::string suite_name;
  std::string out_features, out_meta;
  std::optional<std::uint64_t> seed;
  std::optional<int> samples_per_class;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* cmd = app.add_subcommand("synth", "Write a synthetic feature/meta pair from a named suite");
  cmd->add_option("--suite", a.suite_name, "separable | confuser | skewed")
      ->required()
      ->check(CLI::IsMember({"separable", "confuser", "skewed"}));
  cmd->add_option("--out-features", a.out_features, "Output feature file (TICF)")->required();
  cmd->add_option("--out-meta", a.out_meta, "Output metadata file (JSON lines)")->required();
  cmd->add_option("--seed", a.seed, "Override the suite seed");
  cmd->add_option("--samples-per-class", a.samples_per_class, "Override samples per class")
      ->check(kAtLeastOne);
  cmd->callback([&a] {
    SynthSpec spec = suite(a.suite_name);
    if (a.seed) spec.seed = *a.seed;
    if (a.samples_per_class) spec.samples_per_class = *a.samples_per_class;
    const Dataset ds = generate(spec);
    write_dataset(ds, a.out_features, a.out_meta);
    log("synth: wrote " + std::to_string(ds.size()) + " records, dim " + std::to_string(ds.dim));
  });
}

// --------------------------------------------------------------------------- train

struct TrainArgs {
  std::string features, meta, model, loss_csv;
  int classes = 24;
  bool month_factor = false;
  TrainConfig tc;
  std::string loss_mode = "class";
  int embed_dim = 768;
  std::vector<int> time_hidden{512};
  std::vector<int> adaptor_hidden{1024};
  std::string activation = "gelu";
  std::string time_input = "one-hot";
  int rff_dim = 512;
  double rff_sigma = 1.0;
  int t2v_dim = 64;
  bool no_residual = false;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* cmd = app.add_subcommand("train", "Train a time encoder / adaptor pair on a feature file");
  cmd->add_option("--features", a.features, "Training feature file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--meta", a.meta, "Training metadata file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--model", a.model, "Output model file (JSON)")->required();
  cmd->add_option("--loss-csv", a.loss_csv, "Per-epoch loss trace; columns: epoch,lr,mean_loss");
  cmd->add_option("--classes", a.classes, "Time-of-day classes C (must divide 1440)")->check(CLI::Range(2, 1440));
  cmd->add_flag("--month-factor", a.month_factor, "Train on month x time-of-day classes");
  cmd->add_option("--epochs", a.tc.epochs, "Epochs")->check(kAtLeastOne);
  cmd->add_option("--batch-size", a.tc.batch_size, "Batch size B")->check(kAtLeastOne);
  cmd->add_option("--lr", a.tc.lr0, "Initial learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--weight-decay", a.tc.weight_decay, "Weight decay (coupled)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--halve-every", a.tc.halve_every, "Halve the learning rate every N epochs")
      ->check(kAtLeastOne);
  cmd->add_option("--loss-mode", a.loss_mode, "class | batch")->check(CLI::IsMember({"class", "batch"}));
  cmd->add_option("--embed-dim", a.embed_dim, "Shared embedding dim K")->check(kAtLeastOne);
  cmd->add_option("--time-hidden", a.time_hidden, "Time encoder hidden dims")->check(kAtLeastOne);
  cmd->add_option("--adaptor-hidden", a.adaptor_hidden, "Adaptor hidden dims")->check(kAtLeastOne);
  cmd->add_option("--activation", a.activation, "relu | gelu")->check(CLI::IsMember({"relu", "gelu"}));
  cmd->add_option("--time-input", a.time_input, "one-hot | cyclic | rff | t2v")
      ->check(CLI::IsMember({"one-hot", "cyclic", "rff", "t2v"}));
  cmd->add_option("--rff-dim", a.rff_dim, "RFF output dim")->check(kAtLeastOne);
  cmd->add_option("--rff-sigma", a.rff_sigma, "RFF bandwidth")->check(CLI::PositiveNumber);
  cmd->add_option("--t2v-dim", a.t2v_dim, "Time2Vec dim")->check(CLI::Range(2, 100000));
  cmd->add_flag("--no-residual", a.no_residual, "Disable the adaptor skip connection");
  cmd->add_option("--seed", a.tc.seed, "Seed for init and shuffling");
  cmd->callback([&a] {
    const Dataset ds = read_dataset(a.features, a.meta);
    ModelConfig mc;
    mc.space = make_space(a.classes, a.month_factor);
    mc.feature_dim = ds.dim;
    mc.embed_dim = a.embed_dim;
    mc.time_hidden = a.time_hidden;
    mc.adaptor_hidden = a.adaptor_hidden;
    mc.activation = parse_activation(a.activation);
    mc.adaptor_residual = !a.no_residual;
    mc.time_input = parse_time_input(a.time_input);
    mc.rff_dim = a.rff_dim;
    mc.rff_sigma = a.rff_sigma;
    mc.t2v_dim = a.t2v_dim;
    a.tc.loss_mode = parse_loss_mode(a.loss_mode);
    log("train: " + std::to_string(ds.size()) + " records, D=" + std::to_string(ds.dim) +
        ", C=" + std::to_string(mc.space.num_classes()) + ", K=" + std::to_string(mc.embed_dim));
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult res = train(ds, mc, a.tc);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CsvWriter csv({"epoch", "lr", "mean_loss"});
    for (const auto& e : res.trace) {
      csv.add(e.epoch, e.lr, e.mean_loss);
      log("epoch " + std::to_string(e.epoch) + " lr " + fmt_double(e.lr) + " loss " + fmt_double(e.mean_loss));
    }
    if (res.degenerate_batches > 0)
      log("warning: " + std::to_string(res.degenerate_batches) + " batches held a single class");
    save_model(res.params, a.model);
    if (!a.loss_csv.empty()) csv.save(a.loss_csv);
    log("train: done in " + fmt_double(secs) + " s, tau " + fmt_double(res.params.tau()));
  });
}

// --------------------------------------------------------------------------- eval

struct EvalArgs {
  std::string model, features, meta, mode = "classify";
  std::optional<int> classes;
  std::string gallery_features, gallery_meta;
  std::string report, confusion, predictions;
};

void write_confusion(const std::vector<std::vector<long long>>& m, const std::string& path) {
  std::vector<std::string> header{"gt"};
  for (std::size_t j = 0; j < m.size(); ++j) header.push_back("p" + std::to_string(j));
  CsvWriter csv(header);
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (long long v : m[i]) row.push_back(std::to_string(v));
    csv.row(row);
  }
  csv.save(path);
}

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* cmd = app.add_subcommand(
      "eval",
      "Evaluate a model. Report CSV columns: metric,value (samples, top1, top3, top5, "
      "time_mae_minutes, hour_accuracy). Confusion CSV: gt,p0..p{C-1}. Predictions CSV: "
      "index,id,gt_time,gt_class,pred_time,pred_class");
  cmd->add_option("--model", a.model, "Model file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--features", a.features, "Test feature file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--meta", a.meta, "Test metadata file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--mode", a.mode, "classify | knn")->check(CLI::IsMember({"classify", "knn"}));
  cmd->add_option("--classes", a.classes, "Evaluation class count C (default: model's)")
      ->check(CLI::Range(2, 1440));
  cmd->add_option("--gallery-features", a.gallery_features, "Gallery features (knn mode)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--gallery-meta", a.gallery_meta, "Gallery metadata (knn mode)")->check(CLI::ExistingFile);
  cmd->add_option("--report", a.report, "Output report CSV");
  cmd->add_option("--confusion", a.confusion, "Output confusion matrix CSV");
  cmd->add_option("--predictions", a.predictions, "Output per-sample predictions CSV");
  cmd->callback([&a] {
    const ModelParams p = load_model(a.model);
    const Dataset test = read_dataset(a.features, a.meta);
    if (test.empty()) throw ValidationError("--features: test set is empty");
    const TimeLabelSpace& ms = p.config.space;
    const int classes = a.classes.value_or(ms.time_classes());
    std::vector<Prediction> preds;
    TimeLabelSpace space(classes);
    if (a.mode == "classify") {
      if (p.config.time_input == TimeInput::one_hot && classes != ms.time_classes())
        throw ValidationError("--classes: one-hot model was trained with C=" + std::to_string(ms.time_classes()) +
                              ", got " + std::to_string(classes));
      space = TimeLabelSpace(classes, ms.factors());
      preds = classify_all(p, test, space, std::min(5, space.num_classes()));
    } else {
      if (a.gallery_features.empty() || a.gallery_meta.empty())
        throw ValidationError("--gallery-features/--gallery-meta: required with --mode knn");
      const Dataset gallery = read_dataset(a.gallery_features, a.gallery_meta);
      if (gallery.empty()) throw ValidationError("--gallery-features: gallery is empty");
      preds = knn_predict_all(build_index(p, gallery), test, p, space, 5);
    }
    const std::vector<int> labels = labels_of(test, space);
    std::vector<ClockTime> gt;
    for (const auto& r : test.records) gt.push_back(r.time);
    const EvalReport rep = evaluate(preds, labels, gt, space);
    CsvWriter csv({"metric", "value"});
    csv.add("samples", rep.samples);
    csv.add("top1", rep.top1);
    csv.add("top3", rep.top3);
    csv.add("top5", rep.top5);
    csv.add("time_mae_minutes", rep.time_mae_minutes);
    csv.add("hour_accuracy", rep.hour_accuracy);
    std::cout << csv.str();
    if (!a.report.empty()) csv.save(a.report);
    if (!a.confusion.empty()) write_confusion(rep.confusion, a.confusion);
    if (!a.predictions.empty()) {
      CsvWriter pc({"index", "id", "gt_time", "gt_class", "pred_time", "pred_class"});
      for (std::size_t i = 0; i < preds.size(); ++i)
        pc.add(i, test.records[i].id, format_clock(gt[i]), labels[i], format_clock(preds[i].time),
               preds[i].ranked.front());
      pc.save(a.predictions);
    }
  });
}

// --------------------------------------------------------------------------- retrieve

struct RetrieveArgs {
  std::string model, gallery_features, gallery_meta, query_features, query_meta;
  std::vector<std::size_t> ks{1, 5, 10, 20, 50, 100};
  std::size_t top_n = 100;
  bool exclude_self = false;
  std::string recall, time_hist, geo_hist;
};

void add_retrieve(CLI::App& app, RetrieveArgs& a) {
  auto* cmd = app.add_subcommand(
      "retrieve",
      "Time-based retrieval. Recall CSV: k,recall. Time histogram CSV: lo_min,hi_min,count. "
      "Geo histogram CSV: lo_deg,hi_deg,count (hi empty for the open bin). Summary on stdout: metric,value");
  cmd->add_option("--model", a.model, "Model file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--gallery-features", a.gallery_features, "Gallery features")->required()->check(CLI::ExistingFile);
  cmd->add_option("--gallery-meta", a.gallery_meta, "Gallery metadata")->required()->check(CLI::ExistingFile);
  cmd->add_option("--query-features", a.query_features, "Query features")->required()->check(CLI::ExistingFile);
  cmd->add_option("--query-meta", a.query_meta, "Query metadata")->required()->check(CLI::ExistingFile);
  cmd->add_option("--ks", a.ks, "Recall cut-offs")->check(kAtLeastOne)->delimiter(',');
  cmd->add_option("--top-n", a.top_n, "Retrieved items per query for the error histograms")
      ->check(kAtLeastOne);
  cmd->add_flag("--exclude-self", a.exclude_self, "Skip gallery items whose id equals the query id");
  cmd->add_option("--recall", a.recall, "Output recall CSV");
  cmd->add_option("--time-hist", a.time_hist, "Output time-error histogram CSV");
  cmd->add_option("--geo-hist", a.geo_hist, "Output geo-error histogram CSV");
  cmd->callback([&a] {
    const ModelParams p = load_model(a.model);
    const Dataset gallery = read_dataset(a.gallery_features, a.gallery_meta);
    const Dataset queries = read_dataset(a.query_features, a.query_meta);
    if (gallery.empty()) throw ValidationError("--gallery-features: gallery is empty");
    const GalleryIndex index = build_index(p, gallery);
    const RetrievalReport rep = evaluate_retrieval(index, queries, p, a.ks, a.top_n, a.exclude_self);
    CsvWriter rc({"k", "recall"});
    for (const auto& [k, r] : rep.recall_at_k) rc.add(k, r);
    CsvWriter th({"lo_min", "hi_min", "count"});
    for (int b = 0; b < TimeHistogram::kBins; ++b)
      th.add(b * TimeHistogram::kBinMinutes, (b + 1) * TimeHistogram::kBinMinutes,
             rep.errors.time.counts[static_cast<std::size_t>(b)]);
    CsvWriter gh({"lo_deg", "hi_deg", "count"});
    const auto& g = rep.errors.geo;
    for (std::size_t b = 0; b < g.counts.size(); ++b)
      gh.row({fmt_double(g.edges[b]), b + 1 < g.edges.size() ? fmt_double(g.edges[b + 1]) : "",
              std::to_string(g.counts[b])});
    CsvWriter summary({"metric", "value"});
    summary.add("queries", queries.size());
    summary.add("gallery", gallery.size());
    for (const auto& [k, r] : rep.recall_at_k) summary.add("recall@" + std::to_string(k), r);
    summary.add("joint_geo_time_hit", rep.joint_hit_rate);
    summary.add("geo_excluded", g.excluded);
    std::cout << summary.str();
    if (!a.recall.empty()) rc.save(a.recall);
    if (!a.time_hist.empty()) th.save(a.time_hist);
    if (!a.geo_hist.empty()) gh.save(a.geo_hist);
  });
}

// --------------------------------------------------------------------------- curate

struct CurateArgs {
  std::vector<std::string> images;
  double snr_threshold = kSnrDiscardDb;
  std::string features, meta, out;
  std::string night_hours = "22,23,0,1,2,3";
  double night_threshold = 100.0;
  double polar_lat = 75.0;
  double eps = 10.0;
  int min_pts = 100;
  std::string ratio = "9:1";
  std::uint64_t seed = 0;
  int classes = 24;
  bool month_factor = false;
  std::string train_features, train_meta, test_features, test_meta;
  std::string time, out_meta;
  std::optional<double> lon;
};

void add_curate(CLI::App& app, CurateArgs& a) {
  auto* cur = app.add_subcommand("curate", "Dataset curation operators");
  cur->require_subcommand(1);

  auto* snr = cur->add_subcommand("snr", "Block SNR per image. CSV: path,snr_db,noise_var,signal_var,total_var,"
                                         "blocks_used,decision,reason");
  snr->add_option("--images", a.images, "P5 graymaps")->required()->check(CLI::ExistingFile);
  snr->add_option("--threshold", a.snr_threshold, "Discard at or below this SNR (dB)");
  snr->add_option("--out", a.out, "Output CSV (default stdout)");
  snr->callback([&a] {
    CsvWriter csv({"path", "snr_db", "noise_var", "signal_var", "total_var", "blocks_used", "decision", "reason"});
    for (const auto& path : a.images) {
      const GrayImage img = read_pgm(path);
      try {
        const SnrReport r = snr_estimate(img);
        csv.add(path, r.snr_db, r.noise_var, r.signal_var, r.total_var, r.blocks_used,
                r.discard(a.snr_threshold) ? "discard" : "keep", "");
      } catch (const SnrError& e) {
        const char* reason = e.kind() == SnrError::Kind::noiseless ? "noiseless"
                             : e.kind() == SnrError::Kind::no_signal ? "no-signal"
                                                                    : "too-small";
        csv.row({path, "", "", "", "", "", "discard", reason});
      }
    }
    if (a.out.empty()) std::cout << csv.str();
    else csv.save(a.out);
  });

  auto* night = cur->add_subcommand("night", "Bright night-time review list. CSV: index,id,time,brightness,lat,flag");
  night->add_option("--meta", a.meta, "Metadata file")->required()->check(CLI::ExistingFile);
  night->add_option("--night-hours", a.night_hours, "Comma-separated local night hours");
  night->add_option("--threshold", a.night_threshold, "Brightness threshold")->check(CLI::Range(0.0, 255.0));
  night->add_option("--polar-lat", a.polar_lat, "|lat| at or above which records are kept")->check(CLI::Range(0.0, 90.0));
  night->add_option("--out", a.out, "Output CSV (default stdout)");
  night->callback([&a] {
    NightFilter f;
    f.night_hours = parse_hours(a.night_hours);
    f.brightness_threshold = a.night_threshold;
    f.polar_latitude = a.polar_lat;
    const auto meta = decode_meta(read_file(a.meta), a.meta);
    CsvWriter csv({"index", "id", "time", "brightness", "lat", "flag"});
    std::size_t review = 0;
    for (std::size_t i = 0; i < meta.size(); ++i) {
      const auto& r = meta[i];
      const std::string flag = r.brightness ? to_string(night_brightness_flag(r, f)) : "skipped";
      if (flag == "review") ++review;
      csv.row({std::to_string(i), r.id, format_clock(r.time), r.brightness ? fmt_double(*r.brightness) : "",
               r.lat ? fmt_double(*r.lat) : "", flag});
    }
    log("night: " + std::to_string(review) + " of " + std::to_string(meta.size()) + " records flagged for review");
    if (a.out.empty()) std::cout << csv.str();
    else csv.save(a.out);
  });

  auto* outl = cur->add_subcommand("outliers", "Per-hour DBSCAN outlier scan. CSV: index,id,hour,cluster,status");
  outl->add_option("--features", a.features, "Feature file")->required()->check(CLI::ExistingFile);
  outl->add_option("--meta", a.meta, "Metadata file")->required()->check(CLI::ExistingFile);
  outl->add_option("--eps", a.eps, "DBSCAN epsilon")->check(CLI::PositiveNumber);
  outl->add_option("--min-pts", a.min_pts, "DBSCAN minPts")->check(kAtLeastOne);
  outl->add_option("--out", a.out, "Output CSV (default stdout)");
  outl->callback([&a] {
    const Dataset ds = read_dataset(a.features, a.meta);
    const auto flags = hourly_outlier_scan(ds, {a.eps, a.min_pts});
    CsvWriter csv({"index", "id", "hour", "cluster", "status"});
    std::size_t n_out = 0;
    for (const auto& f : flags) {
      if (f.status == OutlierStatus::outlier) ++n_out;
      csv.add(f.record, ds.records[f.record].id, f.hour, f.cluster,
              f.status == OutlierStatus::majority ? "majority" : "outlier");
    }
    log("outliers: " + std::to_string(n_out) + " of " + std::to_string(flags.size()) + " records flagged");
    if (a.out.empty()) std::cout << csv.str();
    else csv.save(a.out);
  });

  auto* split = cur->add_subcommand("split", "Stratified train/test split into two file pairs");
  split->add_option("--features", a.features, "Feature file")->required()->check(CLI::ExistingFile);
  split->add_option("--meta", a.meta, "Metadata file")->required()->check(CLI::ExistingFile);
  split->add_option("--ratio", a.ratio, "TRAIN:TEST, e.g. 9:1");
  split->add_option("--seed", a.seed, "Shuffle seed");
  split->add_option("--classes", a.classes, "Strata: time-of-day classes")->check(CLI::Range(2, 1440));
  split->add_flag("--month-factor", a.month_factor, "Stratify on month x time-of-day");
  split->add_option("--train-features", a.train_features, "Output train features")->required();
  split->add_option("--train-meta", a.train_meta, "Output train metadata")->required();
  split->add_option("--test-features", a.test_features, "Output test features")->required();
  split->add_option("--test-meta", a.test_meta, "Output test metadata")->required();
  split->callback([&a] {
    double frac = 0.0;
    try {
      frac = parse_split_ratio(a.ratio);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("--ratio: ") + e.what());
    }
    const Dataset ds = read_dataset(a.features, a.meta);
    const auto idx = stratified_split(ds, frac, a.seed, make_space(a.classes, a.month_factor));
    write_dataset(subset(ds, idx.train), a.train_features, a.train_meta);
    write_dataset(subset(ds, idx.test), a.test_features, a.test_meta);
    log("split: " + std::to_string(idx.train.size()) + " train / " + std::to_string(idx.test.size()) + " test");
  });

  auto* bbh = cur->add_subcommand("brightness-by-hour", "Brightness statistics per hour. CSV: hour,count,mean,std");
  bbh->add_option("--meta", a.meta, "Metadata file")->required()->check(CLI::ExistingFile);
  bbh->add_option("--out", a.out, "Output CSV (default stdout)");
  bbh->callback([&a] {
    Dataset ds;
    ds.records = decode_meta(read_file(a.meta), a.meta);
    CsvWriter csv({"hour", "count", "mean", "std"});
    for (const auto& h : brightness_by_hour(ds)) {
      if (h.count == 0) csv.row({std::to_string(h.hour), "0", "", ""});
      else csv.add(h.hour, h.count, h.mean, h.stddev);
    }
    if (a.out.empty()) std::cout << csv.str();
    else csv.save(a.out);
  });

  auto* utc = cur->add_subcommand("utc-approx", "UTC to approximate local time (offset round(lon/15) hours)");
  utc->add_option("--time", a.time, "Single UTC time HH:MM (with --lon)");
  utc->add_option("--lon", a.lon, "Longitude in degrees")->check(CLI::Range(-180.0, 180.0));
  utc->add_option("--meta", a.meta, "Metadata file whose times are UTC")->check(CLI::ExistingFile);
  utc->add_option("--out-meta", a.out_meta, "Rewritten metadata file with local times");
  utc->callback([&a] {
    if (!a.time.empty()) {
      if (!a.lon) throw ValidationError("--lon: required with --time");
      std::cout << format_clock(utc_to_local_approx(parse_clock(a.time), *a.lon)) << "\n";
      return;
    }
    if (a.meta.empty() || a.out_meta.empty())
      throw ValidationError("--meta/--out-meta: required unless --time is given");
    Dataset ds;
    ds.records = decode_meta(read_file(a.meta), a.meta);
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      auto& r = ds.records[i];
      if (!r.lon) throw ValidationError("--meta: line " + std::to_string(i + 1) + " ('" + r.id + "') has no lon");
      r.time = utc_to_local_approx(r.time, *r.lon);
    }
    write_atomic(a.out_meta, encode_meta(ds));
  });
}

// --------------------------------------------------------------------------- guidance / affinity

struct GuidanceArgs {
  std::string model, features;
  std::size_t row = 0;
  int target = 0;
};

void add_guidance(CLI::App& app, GuidanceArgs& a) {
  auto* cmd = app.add_subcommand("guidance", "Cosine-distance guidance loss 1 - cos(image, target class)");
  cmd->add_option("--model", a.model, "Model file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--features", a.features, "Feature file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--row", a.row, "Row of the feature file");
  cmd->add_option("--target-class", a.target, "Target class index")->required()->check(CLI::NonNegativeNumber);
  cmd->callback([&a] {
    const ModelParams p = load_model(a.model);
    const FeatureBlock fb = decode_features(read_file(a.features), a.features);
    if (a.row >= fb.rows.size())
      throw ValidationError("--row: " + std::to_string(a.row) + " outside [0, " + std::to_string(fb.rows.size()) + ")");
    if (a.target >= p.config.space.num_classes())
      throw ValidationError("--target-class: must be < " + std::to_string(p.config.space.num_classes()));
    std::cout << fmt_double(time_guidance_loss(p, fb.rows[a.row], a.target, p.config.space)) << "\n";
  });
}

struct AffinityArgs {
  std::string model, embeddings, out;
  std::optional<int> classes;
};

void add_affinity(CLI::App& app, AffinityArgs& a) {
  auto* cmd = app.add_subcommand("affinity", "Class-affinity softmax of external K-dim embeddings. CSV: row,p0..p{C-1}");
  cmd->add_option("--model", a.model, "Model file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--embeddings", a.embeddings, "TICF file of K-dim embeddings")->required()->check(CLI::ExistingFile);
  cmd->add_option("--classes", a.classes, "Class count (continuous time inputs only)")->check(CLI::Range(2, 1440));
  cmd->add_option("--out", a.out, "Output CSV (default stdout)");
  cmd->callback([&a] {
    const ModelParams p = load_model(a.model);
    const TimeLabelSpace space = a.classes ? TimeLabelSpace(*a.classes) : p.config.space;
    const FeatureBlock fb = decode_features(read_file(a.embeddings), a.embeddings);
    std::vector<std::string> header{"row"};
    for (int c = 0; c < space.num_classes(); ++c) header.push_back("p" + std::to_string(c));
    CsvWriter csv(header);
    for (std::size_t i = 0; i < fb.rows.size(); ++i) {
      const Vector v = Eigen::Map<const Vector>(fb.rows[i].data(), static_cast<Eigen::Index>(fb.rows[i].size()));
      const Vector prob = class_affinity(p, v, space);
      std::vector<std::string> row{std::to_string(i)};
      for (Eigen::Index c = 0; c < prob.size(); ++c) row.push_back(fmt_double(prob(c)));
      csv.row(row);
    }
    if (a.out.empty()) std::cout << csv.str();
    else csv.save(a.out);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ticl: clock-time estimation from precomputed image features"};
  app.require_subcommand(1);
  SynthArgs synth_args;
  TrainArgs train_args;
  EvalArgs eval_args;
  RetrieveArgs retrieve_args;
  CurateArgs curate_args;
  GuidanceArgs guidance_args;
  AffinityArgs affinity_args;
  add_synth(app, synth_args);
  add_train(app, train_args);
  add_eval(app, eval_args);
  add_retrieve(app, retrieve_args);
  add_curate(app, curate_args);
  add_guidance(app, guidance_args);
  add_affinity(app, affinity_args);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  } catch (const ticl::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
