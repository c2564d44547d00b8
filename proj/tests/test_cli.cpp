#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"

using namespace ticl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("ticl_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    ASSERT_EQ(run("synth --suite separable --samples-per-class 15 --out-features " + p("all.ticf") +
                  " --out-meta " + p("all.jsonl"))
                  .code,
              0);
    ASSERT_EQ(run("curate split --features " + p("all.ticf") + " --meta " + p("all.jsonl") +
                  " --ratio 4:1 --seed 3 --train-features " + p("train.ticf") + " --train-meta " +
                  p("train.jsonl") + " --test-features " + p("test.ticf") + " --test-meta " + p("test.jsonl"))
                  .code,
              0);
    ASSERT_EQ(run("train --features " + p("train.ticf") + " --meta " + p("train.jsonl") + " --model " +
                  p("model.json") + " --epochs 3 --batch-size 32 --embed-dim 16 --time-hidden 16" +
                  " --adaptor-hidden 16 --seed 5 --loss-csv " + p("loss.csv"))
                  .code,
              0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string p(const std::string& name) { return (dir_ / name).string(); }

  static std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static Outcome run(const std::string& args) {
    const std::string out = p("stdout.txt"), err = p("stderr.txt");
    const std::string cmd = std::string("\"") + TICL_CLI_PATH + "\" " + args + " >" + out + " 2>" + err;
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  static inline fs::path dir_;
};

}  // namespace

TEST_F(Cli, SplitIsAStratifiedPartition) {
  const Dataset all = read_dataset(p("all.ticf"), p("all.jsonl"));
  const Dataset train = read_dataset(p("train.ticf"), p("train.jsonl"));
  const Dataset test = read_dataset(p("test.ticf"), p("test.jsonl"));
  EXPECT_EQ(train.size() + test.size(), all.size());
  EXPECT_EQ(test.size(), all.size() / 5);
  std::set<std::string> ids;
  for (const auto* ds : {&train, &test})
    for (const auto& r : ds->records) EXPECT_TRUE(ids.insert(r.id).second) << r.id;
  EXPECT_EQ(ids.size(), all.size());
  std::vector<int> per_class(24, 0);
  for (const auto& r : test.records) ++per_class[static_cast<std::size_t>(class_of(r.time, TimeLabelSpace(24)))];
  for (int n : per_class) EXPECT_EQ(n, 3);
}

TEST_F(Cli, TrainWritesLossTraceAndLoadableModel) {
  const ModelParams m = load_model(p("model.json"));
  EXPECT_EQ(m.config.embed_dim, 16);
  EXPECT_EQ(m.config.feature_dim, 32);
  const std::string trace = slurp(p("loss.csv"));
  EXPECT_EQ(trace.rfind("epoch,lr,mean_loss\n", 0), 0u);
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 4);
}

TEST_F(Cli, EvalReportMatchesLibrary) {
  const Outcome r = run("eval --model " + p("model.json") + " --features " + p("test.ticf") + " --meta " +
                    p("test.jsonl") + " --report " + p("report.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, slurp(p("report.csv")));
  const ModelParams m = load_model(p("model.json"));
  const Dataset test = read_dataset(p("test.ticf"), p("test.jsonl"));
  const TimeLabelSpace space(24);
  const auto preds = classify_all(m, test, space, 5);
  const auto labels = labels_of(test, space);
  EXPECT_NE(r.out.find("top1," + fmt_double(topk_accuracy(preds, labels, 1)) + "\n"), std::string::npos) << r.out;
}

TEST_F(Cli, KnnEvalMatchesLibrary) {
  const Outcome r = run("eval --mode knn --model " + p("model.json") + " --features " + p("test.ticf") + " --meta " +
                    p("test.jsonl") + " --gallery-features " + p("train.ticf") + " --gallery-meta " +
                    p("train.jsonl") + " --predictions " + p("knn.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const ModelParams m = load_model(p("model.json"));
  const Dataset train = read_dataset(p("train.ticf"), p("train.jsonl"));
  const Dataset test = read_dataset(p("test.ticf"), p("test.jsonl"));
  const auto preds = knn_predict_all(build_index(m, train), test, m, TimeLabelSpace(24), 5);
  std::istringstream csv(slurp(p("knn.csv")));
  std::string line;
  std::getline(csv, line);
  std::size_t i = 0;
  while (std::getline(csv, line)) {
    ASSERT_LT(i, preds.size());
    const std::string tail = format_clock(preds[i].time) + "," + std::to_string(preds[i].ranked.front());
    EXPECT_EQ(line.substr(line.size() - tail.size()), tail) << line;
    ++i;
  }
  EXPECT_EQ(i, test.size());
}

TEST_F(Cli, RetrieveWithSelfMatchFindsEveryQuery) {
  const Outcome r = run("retrieve --model " + p("model.json") + " --gallery-features " + p("all.ticf") +
                    " --gallery-meta " + p("all.jsonl") + " --query-features " + p("test.ticf") +
                    " --query-meta " + p("test.jsonl") + " --ks 1,5 --recall " + p("recall.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(p("recall.csv")), "k,recall\n1,1\n5,1\n");
}

TEST_F(Cli, OutputsAreByteDeterministic) {
  const std::string args = "train --features " + p("train.ticf") + " --meta " + p("train.jsonl") +
                           " --epochs 2 --batch-size 32 --embed-dim 8 --time-hidden 8 --adaptor-hidden 8 --seed 9";
  ASSERT_EQ(run(args + " --model " + p("d1.json")).code, 0);
  ASSERT_EQ(run(args + " --model " + p("d2.json")).code, 0);
  EXPECT_EQ(slurp(p("d1.json")), slurp(p("d2.json")));
  ASSERT_EQ(run("synth --suite confuser --samples-per-class 3 --out-features " + p("s1.ticf") + " --out-meta " +
                p("s1.jsonl"))
                .code,
            0);
  ASSERT_EQ(run("synth --suite confuser --samples-per-class 3 --out-features " + p("s2.ticf") + " --out-meta " +
                p("s2.jsonl"))
                .code,
            0);
  EXPECT_EQ(slurp(p("s1.ticf")), slurp(p("s2.ticf")));
  EXPECT_EQ(slurp(p("s1.jsonl")), slurp(p("s2.jsonl")));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("train --features " + p("train.ticf") + " --meta " + p("train.jsonl") + " --model " +
                p("x.json") + " --epochs 0")
                .code,
            2);
  EXPECT_EQ(run("eval --model " + p("model.json") + " --features " + p("test.ticf") + " --meta " +
                p("test.jsonl") + " --classes 12")
                .code,
            2);
  const std::string bytes = slurp(p("test.ticf"));
  std::ofstream(p("trunc.ticf"), std::ios::binary) << bytes.substr(0, bytes.size() - 1);
  const Outcome t = run("eval --model " + p("model.json") + " --features " + p("trunc.ticf") + " --meta " +
                    p("test.jsonl"));
  EXPECT_EQ(t.code, 2);
  EXPECT_NE(t.err.find("length mismatch"), std::string::npos) << t.err;
  EXPECT_EQ(run("curate split --features " + p("all.ticf") + " --meta " + p("all.jsonl") +
                " --ratio 9-1 --train-features a --train-meta b --test-features c --test-meta d")
                .code,
            2);
}

TEST_F(Cli, CurateUtilities) {
  Outcome r = run("curate utc-approx --time 12:00 --lon 150");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("22:00"), std::string::npos);
  r = run("curate brightness-by-hour --meta " + p("all.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("hour,count,mean,std\n", 0), 0u);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 25);
  r = run("curate night --meta " + p("all.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 24 * 15 + 1);
  r = run("curate outliers --features " + p("all.ticf") + " --meta " + p("all.jsonl") + " --eps 100 --min-pts 1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.find("outlier"), std::string::npos);

  const GrayImage img = oracle::ramp_with_noise(64, 64, 20, 230, 4, 1);
  std::ofstream(p("img.pgm"), std::ios::binary) << encode_pgm(img);
  std::ofstream(p("flat.pgm"), std::ios::binary) << encode_pgm(GrayImage(32, 32, std::vector<double>(1024, 7)));
  r = run("curate snr --images " + p("img.pgm") + " " + p("flat.pgm"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("noiseless"), std::string::npos) << r.out;
}
