#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"

using namespace ticl;

namespace {

ModelParams small_model() {
  ModelConfig cfg;
  cfg.space = TimeLabelSpace(24);
  cfg.feature_dim = 8;
  cfg.embed_dim = 8;
  cfg.time_hidden = {8};
  cfg.adaptor_hidden = {12};
  ModelParams p = init_params(21, cfg);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  for (auto& l : p.adaptor.layers) l.b = Vector::NullaryExpr(l.b.size(), [&] { return 0.1 * n01(rng); });
  return p;
}

FeatureRecord at_angle(const std::string& id, const char* time, double degrees, double lat = 0.0, double lon = 0.0) {
  const double a = degrees * std::numbers::pi / 180.0;
  FeatureRecord r;
  r.id = id;
  r.time = parse_clock(time);
  r.features = {std::cos(a), std::sin(a)};
  r.lat = lat;
  r.lon = lon;
  return r;
}

}  // namespace

TEST(Gallery, BuildMatchesImageEmbed) {
  const ModelParams p = small_model();
  const Dataset ds = oracle::random_dataset(50, 8, 1);
  const GalleryIndex a = build_index(p, ds), b = build_index(p, ds);
  ASSERT_EQ(a.size(), 50u);
  EXPECT_EQ(a.embeddings(), b.embeddings());
  for (std::size_t i = 0; i < ds.size(); ++i)
    EXPECT_LT((a.embeddings().row(static_cast<Eigen::Index>(i)).transpose() - image_embed(p, ds.records[i].features))
                  .norm(),
              1e-14);
  EXPECT_THROW(GalleryIndex(Matrix::Ones(2, 2), {{"a", ClockTime(0), {}, {}}, {"b", ClockTime(0), {}, {}}}),
               std::invalid_argument);
}

TEST(Query, ExhaustiveOracleOnThousandVectors) {
  const ModelParams p = small_model();
  const Dataset gallery = oracle::random_dataset(1000, 8, 11);
  const Dataset queries = oracle::random_dataset(40, 8, 12);
  const GalleryIndex index = build_index(p, gallery);
  for (const auto& q : queries.records) {
    const Vector e = image_embed(p, q.features);
    std::vector<long double> sims;
    const auto want = oracle::exhaustive_ranking(index.embeddings(), e, &sims);
    for (std::size_t k : {1u, 10u, 100u, 1000u, 1500u}) {
      const auto hits = query(index, q.features, p, k);
      ASSERT_EQ(hits.size(), std::min<std::size_t>(k, 1000));
      for (std::size_t i = 0; i < hits.size(); ++i) {
        ASSERT_EQ(hits[i].index, want[i]);
        ASSERT_NEAR(hits[i].similarity, static_cast<double>(sims[want[i]]), 1e-14);
      }
    }
  }
}

TEST(Query, SelfMatchAndTies) {
  const ModelParams p = small_model();
  const Dataset gallery = oracle::random_dataset(30, 8, 3);
  const GalleryIndex index = build_index(p, gallery);
  const auto hits = query(index, gallery.records[17].features, p, 3);
  EXPECT_EQ(hits[0].index, 17u);
  EXPECT_NEAR(hits[0].similarity, 1.0, 1e-12);

  Dataset dup = gallery;
  dup.records.push_back(gallery.records[4]);
  dup.records.back().id = "dup";
  const GalleryIndex di = build_index(p, dup);
  const auto th = query(di, gallery.records[4].features, p, 2);
  EXPECT_EQ(th[0].index, 4u);
  EXPECT_EQ(th[1].index, 30u);

  const std::string skip = gallery.records[17].id;
  const auto ex = search(index, image_embed(p, gallery.records[17].features), 3, &skip);
  for (const auto& h : ex) EXPECT_NE(h.index, 17u);
}

TEST(Query, RemovingUnretrievedItemKeepsTopK) {
  const ModelParams p = small_model();
  Dataset gallery = oracle::random_dataset(200, 8, 5);
  const auto& q = oracle::random_dataset(1, 8, 6).records[0];
  const auto before = query(build_index(p, gallery), q.features, p, 10);
  std::vector<bool> retrieved(200, false);
  for (const auto& h : before) retrieved[h.index] = true;
  std::size_t drop = 0;
  while (retrieved[drop]) ++drop;
  gallery.records.erase(gallery.records.begin() + static_cast<std::ptrdiff_t>(drop));
  const auto after = query(build_index(p, gallery), q.features, p, 10);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(after[i].index + (after[i].index >= drop ? 1 : 0), before[i].index);
}

TEST(Knn, ExhaustiveOracleOnThousandVectors) {
  const ModelParams p = small_model();
  const Dataset gallery = oracle::random_dataset(1000, 8, 21);
  const Dataset queries = oracle::random_dataset(60, 8, 22);
  const GalleryIndex index = build_index(p, gallery);
  for (int c : {6, 24, 48}) {
    const TimeLabelSpace space(c);
    const auto batched = knn_predict_all(index, queries, p, space, 5);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto ranking = oracle::exhaustive_ranking(index.embeddings(), image_embed(p, queries.records[i].features));
      const auto want = oracle::knn_classes(ranking, gallery, space, 5);
      const auto single = knn_predict(index, queries.records[i].features, p, space, 5);
      ASSERT_EQ(single.ranked, want);
      ASSERT_EQ(batched[i].ranked, want);
      ASSERT_EQ(single.time, class_midpoint(want.front(), space));
    }
  }
}

TEST(Knn, SingleItemGalleryAndEmpty) {
  const ModelParams p = small_model();
  const Dataset one = oracle::random_dataset(1, 8, 2);
  const GalleryIndex index = build_index(p, one);
  const TimeLabelSpace space(24);
  for (const auto& q : oracle::random_dataset(10, 8, 9).records)
    EXPECT_EQ(knn_predict(index, q.features, p, space, 3).ranked,
              std::vector<int>{class_of(one.records[0].time, space)});
  EXPECT_THROW(knn_predict(build_index(p, Dataset{8, {}}), one.records[0].features, p, space, 1), ValidationError);
}

TEST(Recall, FiveItemHandCase) {
  const ModelParams p = oracle::identity_model(2, 2);
  Dataset gallery{2, {}};
  gallery.records = {at_angle("g0", "00:00", 150), at_angle("g1", "05:00", 120), at_angle("g2", "11:50", 10),
                     at_angle("g3", "12:20", 90), at_angle("g4", "18:00", 20)};
  Dataset queries{2, {at_angle("q", "12:00", 0)}};
  const GalleryIndex index = build_index(p, gallery);
  const auto hits = query(index, queries.records[0].features, p, 2);
  EXPECT_EQ(hits[0].index, 2u);
  EXPECT_EQ(hits[1].index, 4u);
  EXPECT_EQ(recall_at_k(index, queries, p, 1), 1.0);

  // swap: the 18:00 item nearest, 11:50 second
  gallery.records[2].features.swap(gallery.records[4].features);
  const GalleryIndex swapped = build_index(p, gallery);
  EXPECT_EQ(recall_at_k(swapped, queries, p, 1), 0.0);
  EXPECT_EQ(recall_at_k(swapped, queries, p, 2), 1.0);
  EXPECT_EQ(recall_at_k(swapped, queries, p, 5), 1.0);
}

TEST(Recall, MonotoneAndFullDepth) {
  const ModelParams p = small_model();
  const Dataset gallery = oracle::random_dataset(300, 8, 31), queries = oracle::random_dataset(50, 8, 32);
  const GalleryIndex index = build_index(p, gallery);
  double prev = 0.0;
  for (std::size_t k : {1u, 5u, 10u, 50u, 100u, 300u}) {
    const double r = recall_at_k(index, queries, p, k);
    EXPECT_GE(r, prev);
    prev = r;
  }
  // every query has some positive among 300 uniform gallery times
  for (const auto& q : queries.records) {
    bool any = false;
    for (const auto& g : gallery.records) any |= circular_diff(g.time, q.time) <= 30;
    ASSERT_TRUE(any);
  }
  EXPECT_EQ(prev, 1.0);
}

TEST(ErrorDistributions, ExamplesAndTotals) {
  const ModelParams p = small_model();
  Dataset gallery = oracle::random_dataset(40, 8, 41);
  for (auto& r : gallery.records) r.time = parse_clock("10:00");
  Dataset queries = oracle::random_dataset(7, 8, 42);
  for (auto& r : queries.records) r.time = parse_clock("10:00");
  const GalleryIndex index = build_index(p, gallery);
  const auto d = error_distributions(index, queries, p, 100);
  EXPECT_EQ(d.time.counts[0], 7 * 40);
  EXPECT_EQ(d.time.total(), 7 * 40);
  EXPECT_EQ(d.geo.total() + d.geo.excluded, 7 * 40);

  const Dataset nogeo = oracle::random_dataset(40, 8, 43, false);
  const auto e = error_distributions(build_index(p, nogeo), queries, p, 25);
  EXPECT_EQ(e.geo.total(), 0);
  EXPECT_EQ(e.geo.excluded, 7 * 25);
  EXPECT_EQ(e.time.total(), 7 * 25);
}

TEST(ErrorDistributions, BinsMatchDirectCount) {
  const ModelParams p = small_model();
  const Dataset gallery = oracle::random_dataset(150, 8, 51), queries = oracle::random_dataset(20, 8, 52);
  const GalleryIndex index = build_index(p, gallery);
  const auto d = error_distributions(index, queries, p, 100);
  std::vector<long long> time_bins(24, 0), geo_bins(7, 0);
  const std::vector<double> edges{0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  for (const auto& q : queries.records) {
    const auto ranking = oracle::exhaustive_ranking(index.embeddings(), image_embed(p, q.features));
    for (std::size_t i = 0; i < 100; ++i) {
      const auto& g = gallery.records[ranking[i]];
      const int dt = oracle::circular_minutes(g.time.minute_of_day(), q.time.minute_of_day());
      ++time_bins[static_cast<std::size_t>(std::min(dt / 30, 23))];
      const double l1 = std::abs(*g.lat - *q.lat) + std::abs(*g.lon - *q.lon);
      std::size_t b = 0;
      while (b + 1 < edges.size() && l1 >= edges[b + 1]) ++b;
      ++geo_bins[b];
    }
  }
  EXPECT_EQ(d.time.counts, time_bins);
  EXPECT_EQ(d.geo.counts, geo_bins);
}

TEST(JointHit, ToyGalleryHalf) {
  const ModelParams p = oracle::identity_model(2, 2);
  Dataset gallery{2, {at_angle("a", "08:00", 0, 10.0, 20.0), at_angle("b", "14:00", 90, 30.0, 40.0),
                      at_angle("c", "20:00", 180, 50.0, 60.0)}};
  // q1 lands on "a" with matching place and time; q2 lands on "b" at the right place but 2 h off
  Dataset queries{2, {at_angle("q1", "08:20", 5, 10.004, 20.004), at_angle("q2", "16:00", 85, 30.0, 40.0)}};
  const GalleryIndex index = build_index(p, gallery);
  EXPECT_EQ(joint_geo_time_hit(index, queries, p), 0.5);
  queries.records[0].lat = 10.02;
  EXPECT_EQ(joint_geo_time_hit(index, queries, p), 0.0);
  // identical metadata is a hit
  Dataset same{2, {gallery.records[2]}};
  EXPECT_EQ(joint_geo_time_hit(index, same, p), 1.0);
}

TEST(EvaluateRetrieval, AgreesWithPieces) {
  const ModelParams p = small_model();
  const Dataset gallery = oracle::random_dataset(120, 8, 61), queries = oracle::random_dataset(15, 8, 62);
  const GalleryIndex index = build_index(p, gallery);
  const std::vector<std::size_t> ks{1, 5, 10, 200};
  const auto rep = evaluate_retrieval(index, queries, p, ks, 100);
  for (std::size_t k : ks) EXPECT_EQ(rep.recall_at_k.at(k), recall_at_k(index, queries, p, k));
  EXPECT_EQ(rep.errors.time.total(), 15 * 100);
  EXPECT_EQ(rep.joint_hit_rate, joint_geo_time_hit(index, queries, p));
}

TEST(EvaluateRetrieval, SelfExclusion) {
  const ModelParams p = small_model();
  const Dataset ds = oracle::random_dataset(60, 8, 71);
  const GalleryIndex index = build_index(p, ds);
  const auto with_self = retrieve_all(index, ds, p, 1, false);
  const auto without = retrieve_all(index, ds, p, 1, true);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(with_self[i][0].index, i);
    EXPECT_NE(without[i][0].index, i);
  }
}
