#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace ticl;

namespace {

FeatureRecord night_record(const char* time, double brightness, std::optional<double> lat) {
  FeatureRecord r;
  r.id = "n";
  r.time = parse_clock(time);
  r.brightness = brightness;
  r.lat = lat;
  return r;
}

Matrix to_matrix(const std::vector<std::vector<double>>& pts) {
  Matrix m(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(pts[0].size()));
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pts[i][j];
  return m;
}

}  // namespace

TEST(MeanBrightness, Examples) {
  EXPECT_EQ(mean_brightness(GrayImage(4, 4, std::vector<double>(16, 128.0))), 128.0);
  std::vector<double> half(32, 0.0);
  std::fill(half.begin() + 16, half.end(), 255.0);
  EXPECT_EQ(mean_brightness(GrayImage(8, 4, half)), 127.5);
  std::mt19937_64 rng(1);
  std::vector<double> px(37 * 23);
  long long sum = 0;
  for (double& v : px) {
    const int x = static_cast<int>(rng() % 256);
    v = x;
    sum += x;
  }
  EXPECT_NEAR(mean_brightness(GrayImage(37, 23, px)), static_cast<double>(sum) / px.size(), 1e-12);
}

TEST(NightFlag, Examples) {
  EXPECT_EQ(night_brightness_flag(night_record("23:00", 128, 40.0)), CurationFlag::review);
  EXPECT_EQ(night_brightness_flag(night_record("23:00", 128, 80.0)), CurationFlag::keep);
  EXPECT_EQ(night_brightness_flag(night_record("23:00", 128, -80.0)), CurationFlag::keep);
  EXPECT_EQ(night_brightness_flag(night_record("12:00", 200, 40.0)), CurationFlag::keep);
  EXPECT_EQ(night_brightness_flag(night_record("02:59", 100, 10.0)), CurationFlag::review);
  EXPECT_EQ(night_brightness_flag(night_record("02:59", 99.9, 10.0)), CurationFlag::keep);
  EXPECT_EQ(night_brightness_flag(night_record("04:00", 150, 10.0)), CurationFlag::keep);
  EXPECT_EQ(night_brightness_flag(night_record("23:00", 128, std::nullopt)), CurationFlag::review);
  FeatureRecord no_b = night_record("23:00", 0, 1.0);
  no_b.brightness.reset();
  EXPECT_THROW(night_brightness_flag(no_b), ValidationError);
}

TEST(Snr, ConstantImageIsNoiseless) {
  try {
    snr_estimate(GrayImage(64, 64, std::vector<double>(64 * 64, 90.0)));
    FAIL();
  } catch (const SnrError& e) {
    EXPECT_EQ(e.kind(), SnrError::Kind::noiseless);
  }
  EXPECT_THROW(snr_estimate(GrayImage(15, 40, std::vector<double>(600, 1.0))), SnrError);
}

TEST(Snr, PureNoiseHasNoSignal) {
  // i.i.d. noise: the quietest blocks sit above the mean so signal <= 0 is plausible; when it is
  // not, the SNR is tiny. Either way the image is discarded.
  const GrayImage img = oracle::ramp_with_noise(128, 128, 120, 120, 10, 3);
  try {
    EXPECT_TRUE(snr_estimate(img).discard());
  } catch (const SnrError& e) {
    EXPECT_EQ(e.kind(), SnrError::Kind::no_signal);
  }
}

TEST(Snr, MatchesPixelStatisticsOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double sigma = 6.0 + static_cast<double>(seed % 4);
    const GrayImage img = oracle::ramp_with_noise(512, 256, 40, 215, sigma, seed);
    const SnrReport r = snr_estimate(img);
    EXPECT_NEAR(r.snr_db, oracle::snr_direct_db(img, sigma), 1.5) << "seed " << seed;
    EXPECT_NEAR(r.signal_var + r.noise_var, r.total_var, 1e-9 * r.total_var);
    EXPECT_EQ(r.blocks_total, 32 * 16);
    EXPECT_EQ(r.blocks_used, 52);
  }
}

TEST(Snr, ThresholdDecides) {
  SnrReport r;
  r.snr_db = 15.0;
  EXPECT_TRUE(r.discard());
  r.snr_db = 15.0001;
  EXPECT_FALSE(r.discard());
  // partial edge blocks are dropped: 40x40 has one full 16x16 block per axis pair -> 4 blocks
  const GrayImage img = oracle::ramp_with_noise(40, 40, 0, 200, 5, 1);
  EXPECT_EQ(snr_estimate(img).blocks_total, 4);
  EXPECT_EQ(snr_estimate(img).blocks_used, 1);
}

TEST(Dbscan, TwoBlobsAndAllNoise) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 120; ++i) pts.push_back({u(rng), u(rng)});
  for (int i = 0; i < 120; ++i) pts.push_back({100 + u(rng), 100 + u(rng)});
  const auto labels = dbscan(to_matrix(pts), {2.0, 100});
  std::set<int> ids(labels.begin(), labels.end());
  EXPECT_EQ(ids, (std::set<int>{0, 1}));
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 0), 120);

  std::vector<std::vector<double>> far;
  for (int i = 0; i < 30; ++i) far.push_back({10.0 * i, 0.0});
  for (int l : dbscan(to_matrix(far), {5.0, 2})) EXPECT_EQ(l, kNoise);
  // min_pts counts the point itself
  for (int l : dbscan(to_matrix(far), {5.0, 1})) EXPECT_NE(l, kNoise);
}

TEST(Dbscan, InclusiveEpsilon) {
  const auto labels = dbscan(to_matrix({{0.0, 0.0}, {3.0, 4.0}}), {5.0, 2});
  EXPECT_EQ(labels, (std::vector<int>{0, 0}));
  const auto apart = dbscan(to_matrix({{0.0, 0.0}, {3.0, 4.0}}), {4.999, 2});
  EXPECT_EQ(apart, (std::vector<int>{kNoise, kNoise}));
}

TEST(Dbscan, MatchesReferenceOnTwentySeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::normal_distribution<double> n01;
    std::vector<std::vector<double>> pts;
    // a few loose blobs plus background so clusters, borders and noise all appear
    for (int i = 0; i < 100; ++i) {
      if (i % 4 == 3) pts.push_back({u(rng), u(rng)});
      else {
        const double cx = 2.0 + 3.0 * (i % 3), cy = 2.0 + 2.5 * (i % 3);
        pts.push_back({cx + 0.7 * n01(rng), cy + 0.7 * n01(rng)});
      }
    }
    const DbscanConfig cfg{0.6 + 0.05 * static_cast<double>(seed % 5), 4};
    const auto got = dbscan(to_matrix(pts), cfg);
    const auto want = oracle::dbscan_reference(pts, cfg.epsilon, cfg.min_pts);
    EXPECT_EQ(oracle::canonical_labels(got), oracle::canonical_labels(want)) << "seed " << seed;
    EXPECT_EQ(dbscan(to_matrix(pts), cfg), got);
  }
}

TEST(HourlyOutliers, DenseClusterPlusThreeStragglers) {
  Dataset ds;
  ds.dim = 2;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 150; ++i) ds.records.push_back({"d" + std::to_string(i), {u(rng), u(rng)}, parse_clock("09:10")});
  for (int i = 0; i < 3; ++i)
    ds.records.push_back({"o" + std::to_string(i), {500.0 + 100 * i, -300.0}, parse_clock("09:40")});
  const auto flags = hourly_outlier_scan(ds, {10.0, 100});
  ASSERT_EQ(flags.size(), 153u);
  int outliers = 0;
  for (const auto& f : flags) {
    EXPECT_EQ(f.hour, 9);
    outliers += f.status == OutlierStatus::outlier;
  }
  EXPECT_EQ(outliers, 3);
  for (std::size_t i = 150; i < 153; ++i) EXPECT_EQ(flags[i].status, OutlierStatus::outlier);
}

TEST(HourlyOutliers, ComposesPerBucketReference) {
  const Dataset ds = oracle::random_dataset(400, 2, 77, false);
  const DbscanConfig cfg{0.8, 3};
  const auto flags = hourly_outlier_scan(ds, cfg);
  std::set<int> hours;
  for (const auto& r : ds.records) hours.insert(r.time.hour());
  std::size_t expected_outliers = 0;
  for (int h : hours) {
    std::vector<std::vector<double>> pts;
    for (const auto& r : ds.records)
      if (r.time.hour() == h) pts.push_back(r.features);
    const auto ref = oracle::dbscan_reference(pts, cfg.epsilon, cfg.min_pts);
    std::map<int, int> size;
    for (int l : ref)
      if (l >= 0) ++size[l];
    int best = -1, best_n = 0;
    for (auto [l, n] : size)
      if (n > best_n) best = l, best_n = n;
    for (int l : ref) expected_outliers += (best < 0 || l != best);
  }
  std::size_t got = 0;
  for (const auto& f : flags) got += f.status == OutlierStatus::outlier;
  EXPECT_EQ(got, expected_outliers);
  EXPECT_EQ(flags.size(), ds.size());
}

TEST(HourlyOutliers, EmptyHourProducesNothing) {
  Dataset ds{2, {{"a", {0, 0}, parse_clock("03:00")}}};
  const auto flags = hourly_outlier_scan(ds, {1.0, 1});
  ASSERT_EQ(flags.size(), 1u);
  EXPECT_EQ(flags[0].hour, 3);
  EXPECT_EQ(flags[0].status, OutlierStatus::majority);
}

TEST(Split, ClassOfTwentyAtNineToOne) {
  Dataset ds{1, {}};
  for (int i = 0; i < 20; ++i) ds.records.push_back({"x" + std::to_string(i), {0.0}, parse_clock("05:05")});
  const auto s = stratified_split(ds, parse_split_ratio("9:1"), 3, TimeLabelSpace(24));
  EXPECT_EQ(s.train.size(), 18u);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_THROW(parse_split_ratio("9-1"), ValidationError);
  EXPECT_THROW(parse_split_ratio("a:1"), ValidationError);
  EXPECT_THROW(parse_split_ratio("0:0"), ValidationError);
  EXPECT_DOUBLE_EQ(parse_split_ratio("3:1"), 0.25);
}

TEST(Split, PartitionProportionsAndDeterminism) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset ds = oracle::random_dataset(731, 2, 100 + seed);
    const TimeLabelSpace space(24);
    const auto s = stratified_split(ds, 0.1, seed, space);
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> want(ds.size());
    std::iota(want.begin(), want.end(), std::size_t{0});
    EXPECT_EQ(all, want);
    std::vector<int> n(24, 0), t(24, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) ++n[static_cast<std::size_t>(class_of(ds.records[i].time, space))];
    for (std::size_t i : s.test) ++t[static_cast<std::size_t>(class_of(ds.records[i].time, space))];
    for (int c = 0; c < 24; ++c) EXPECT_LE(std::abs(t[c] - 0.1 * n[c]), 1.0);
    EXPECT_EQ(s.test.size(), 73u);
    const auto again = stratified_split(ds, 0.1, seed, space);
    EXPECT_EQ(again.test, s.test);
  }
}

TEST(UtcApprox, Examples) {
  EXPECT_EQ(format_clock(utc_to_local_approx(parse_clock("12:00"), 0.0)), "12:00");
  EXPECT_EQ(format_clock(utc_to_local_approx(parse_clock("12:00"), 150.0)), "22:00");
  EXPECT_EQ(format_clock(utc_to_local_approx(parse_clock("02:00"), -75.0)), "21:00");
  EXPECT_EQ(format_clock(utc_to_local_approx(parse_clock("23:30"), 30.0)), "01:30");
  EXPECT_THROW(utc_to_local_approx(parse_clock("02:00"), 181.0), ValidationError);
}

TEST(BrightnessByHour, ExamplesAndGroupByOracle) {
  Dataset ds{1, {}};
  for (int h = 8; h <= 16; ++h)
    for (int i = 0; i < 5; ++i) {
      FeatureRecord r{"b", {0.0}, ClockTime(h * 60 + i)};
      r.brightness = 200.0;
      ds.records.push_back(r);
    }
  const auto rows = brightness_by_hour(ds);
  for (int h = 0; h < 24; ++h) {
    if (h >= 8 && h <= 16) {
      EXPECT_EQ(rows[h].count, 5u);
      EXPECT_EQ(rows[h].mean, 200.0);
      EXPECT_EQ(rows[h].stddev, 0.0);
    } else {
      EXPECT_EQ(rows[h].count, 0u);
    }
  }

  Dataset rnd = oracle::random_dataset(500, 1, 5);
  rnd.records[0].brightness.reset();
  const auto got = brightness_by_hour(rnd);
  for (int h = 0; h < 24; ++h) {
    std::vector<double> v;
    for (const auto& r : rnd.records)
      if (r.brightness && r.time.hour() == h) v.push_back(*r.brightness);
    ASSERT_EQ(got[h].count, v.size());
    if (v.empty()) continue;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    EXPECT_NEAR(got[h].mean, mean, 1e-9);
    EXPECT_NEAR(got[h].stddev, std::sqrt(var / static_cast<double>(v.size())), 1e-9);
  }
}
