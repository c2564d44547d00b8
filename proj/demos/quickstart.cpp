// Train a small model on a synthetic suite and report held-out accuracy.

#include <iostream>

#include "ticl/ticl.hpp"

int main() {
  using namespace ticl;

  SynthSpec spec = suite("separable");
  spec.samples_per_class = 60;
  const Dataset ds = generate(spec);

  const TimeLabelSpace space(24);
  const SplitIndices split = stratified_split(ds, 0.1, 7, space);
  const Dataset train_set = subset(ds, split.train);
  const Dataset test_set = subset(ds, split.test);

  ModelConfig mc;
  mc.space = space;
  mc.feature_dim = ds.dim;
  mc.embed_dim = 64;
  mc.time_hidden = {64};
  mc.adaptor_hidden = {128};

  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 128;
  tc.lr0 = 2e-3;
  tc.halve_every = 10;

  const TrainResult res = train(train_set, mc, tc);
  std::cout << "final train loss " << res.trace.back().mean_loss << ", tau " << res.params.tau() << "\n";

  const auto preds = classify_all(res.params, test_set, space, 5);
  std::vector<ClockTime> gt;
  for (const auto& r : test_set.records) gt.push_back(r.time);
  const EvalReport rep = evaluate(preds, labels_of(test_set, space), gt, space);
  std::cout << "test samples " << rep.samples << "\n"
            << "top-1 " << rep.top1 << "  top-3 " << rep.top3 << "  top-5 " << rep.top5 << "\n"
            << "time MAE " << rep.time_mae_minutes << " min, hour accuracy " << rep.hour_accuracy << "\n";

  const FeatureRecord& probe = test_set.records.front();
  const Prediction p = classify(res.params, probe.features, space, 3);
  std::cout << probe.id << ": true " << format_clock(probe.time) << ", predicted " << format_clock(p.time) << "\n";
}
