/* Copyright (c) 2026 The beatnet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#include <algorithm>
#include <numeric>
#include <set>

#include "beatnet/config.hpp"
#include "beatnet/pipeline.hpp"
#include "support.hpp"

using namespace beatnet;

namespace {

using RC = RhythmClass;

nn::TrainConfig tiny_level1() {
  nn::TrainConfig c;
  c.hidden = 4;
  c.recurrent_layers = 1;
  c.dropout = 0;
  c.recurrent_dropout = 0;
  c.epochs = 2;
  return c;
}

// A small trained pipeline shared by the tests below: 32 level-1 records and
// 16 held-out blender records from the synthetic corpus.
struct Fixture {
  std::vector<PreparedRecord> train, valid;
  Pipeline pipeline;
  std::vector<EcgRecord> valid_records;

  Fixture() {
    std::vector<Segmented> seg;
    std::vector<RC> labels;
    for (std::size_t i = 0; i < 48; ++i) {
      const auto s = synthesize_ecg(corpus_config(3, i, 0.05));
      if (i >= 32) valid_records.push_back(s.record);
      seg.push_back(segment_record(s.record, {}));
      labels.push_back(corpus_config(3, i, 0.05).rhythm);
    }
    std::vector<Eigen::VectorXd> bi, ci;
    for (std::size_t i = 0; i < 32; ++i) {
      auto b = beat_inputs(seg[i].beats);
      auto c = coefficient_inputs(seg[i].beats);
      bi.insert(bi.end(), b.begin(), b.end());
      ci.insert(ci.end(), c.begin(), c.end());
    }
    SdaeConfig sc;
    sc.hidden = 16;
    sc.pretrain_epochs = 1;
    sc.finetune_epochs = 1;
    sc.max_inputs = 200;
    sc.seed = 1;
    pipeline.featurizer.sdae_beat = train_sdae(bi, sc, "beats").model;
    sc.seed = 2;
    pipeline.featurizer.sdae_coeff = train_sdae(ci, sc, "coeffs").model;
    for (std::size_t i = 0; i < 48; ++i) {
      auto p = prepare_record(seg[i], pipeline.featurizer, labels[i]);
      p.id = fmt::format("rec{:05d}", i);
      (i < 32 ? train : valid).push_back(std::move(p));
    }
    pipeline.ensemble = train_ensemble(train, default_ensemble_spec(tiny_level1(), 5), 1);
    BlenderConfig bc;
    bc.epochs = 20;
    bc.seed = 9;
    auto [vectors, ys, ids] = blender_inputs();
    pipeline.blender = train_blender(vectors, ys, ids, pipeline.ensemble.train_ids, bc).model;
  }

  std::tuple<std::vector<Eigen::VectorXd>, std::vector<RC>, std::vector<std::string>> blender_inputs() const {
    std::vector<Eigen::VectorXd> vectors;
    std::vector<RC> ys;
    std::vector<std::string> ids;
    for (const auto& r : valid) {
      vectors.push_back(assemble(pipeline.ensemble, r.features, r.record_feats).to_vector(false));
      ys.push_back(*r.label);
      ids.push_back(r.id);
    }
    return {vectors, ys, ids};
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

std::vector<double> blender_params(const BlenderModel& m) {
  std::vector<double> out;
  m.for_each_param([&](const auto& p) { out.insert(out.end(), p.value.data(), p.value.data() + p.size()); });
  return out;
}

}  // namespace

TEST_CASE("default ensemble spec") {
  const auto spec = default_ensemble_spec(tiny_level1(), 5);
  REQUIRE(spec.members.size() == 8);
  std::set<std::string> ids;
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& m = spec.members[i];
    ids.insert(m.id);
    seeds.insert(m.config.seed);
    REQUIRE(m.targets.size() == 1);
    CHECK(code(m.targets[0]) == static_cast<int>(i % 4));
    CHECK(m.config.attention == (i >= 4));
  }
  CHECK(ids.size() == 8);
  CHECK(seeds.size() == 8);
  CHECK(spec.members[0].id == "Normal-vs-rest");
  CHECK(spec.members[6].id == "Other-vs-rest-att");
  CHECK(binary_label(spec.members[1], RC::AF) == 1);
  CHECK(binary_label(spec.members[1], RC::Normal) == 0);
}

TEST_CASE("ensemble spec validation") {
  auto spec = default_ensemble_spec(tiny_level1(), 5);
  EnsembleSpec empty;
  CHECK_ERRC(empty.validate(), Errc::InvalidConfig);
  auto dup = spec;
  dup.members[1].id = dup.members[0].id;
  CHECK_ERRC(dup.validate(), Errc::InvalidConfig);
  auto all = spec;
  all.members[0].targets = {RC::Normal, RC::AF, RC::Other, RC::Noisy};
  CHECK_ERRC(all.validate(), Errc::InvalidConfig);
  auto none = spec;
  none.members[0].targets.clear();
  CHECK_ERRC(none.validate(), Errc::InvalidConfig);
  auto repeated = spec;
  repeated.members[0].targets = {RC::AF, RC::AF};
  CHECK_ERRC(repeated.validate(), Errc::InvalidConfig);
}

TEST_CASE("prediction vector dimensions") {
  CHECK(PredictionVector::dimension_for(8, false) == 24);
  CHECK(PredictionVector::dimension_for(15, true) == 42);
  const auto& f = fixture();
  const auto pv = assemble(f.pipeline.ensemble, f.valid[0].features, f.valid[0].record_feats);
  CHECK(pv.dimension() == 24);
  CHECK(pv.to_vector(false).size() == 24);
  const Eigen::VectorXd with_slots = pv.to_vector(true);
  REQUIRE(with_slots.size() == 28);
  CHECK(with_slots.segment(16, 4).isZero(0));
  CHECK(with_slots.tail(8) == pv.record_feats.to_vector());

  const auto ext = assemble(f.pipeline.ensemble, f.valid[0].features, f.valid[0].record_feats,
                            std::array<double, 4>{0.1, 0.2, 0.3, 0.4});
  CHECK(ext.dimension() == 28);
  CHECK(ext.to_vector(true)[18] == 0.3);
  CHECK_ERRC(ext.to_vector(false), Errc::ShapeMismatch);
}

TEST_CASE("prediction vectors round-trip through CSV") {
  const auto& f = fixture();
  for (bool external : {false, true}) {
    std::optional<std::array<double, 4>> ext;
    if (external) ext = std::array<double, 4>{-1.0 / 3, 0.0, 1e-300, 12345.678901234567};
    const auto pv = assemble(f.pipeline.ensemble, f.valid[2].features, f.valid[2].record_feats, ext);
    const auto line = format_prediction_vector("rec7", pv);
    const auto [id, back] = parse_prediction_vector(line);
    CHECK(id == "rec7");
    CHECK(back.level1_scores == pv.level1_scores);
    CHECK(back.external_scores.has_value() == external);
    CHECK(back.to_vector(true) == pv.to_vector(true));
    CHECK(format_prediction_vector(id, back) == line);
  }
  CHECK_ERRC(parse_prediction_vector("rec1,8,0,0.5"), Errc::ParseError);
  CHECK_ERRC(parse_prediction_vector("rec1"), Errc::ParseError);
  CHECK_ERRC(parse_prediction_vector("rec1,1,2,0,0,0,0,0,0,0,0,0,0"), Errc::ParseError);
  CHECK_ERRC(parse_prediction_vector("rec1,1,0,0,x,0,0,0,0,0,0,0,0"), Errc::ParseError);
}

TEST_CASE("permuting members permutes the score pairs only") {
  const auto& f = fixture();
  auto spec = f.pipeline.ensemble.spec;
  std::vector<std::size_t> perm{3, 7, 0, 5, 1, 6, 2, 4};
  EnsembleSpec permuted;
  for (auto i : perm) permuted.members.push_back(spec.members[i]);
  const auto other = train_ensemble(f.train, permuted, 1);
  for (const auto& r : f.valid) {
    const auto a = assemble(f.pipeline.ensemble, r.features, r.record_feats);
    const auto b = assemble(other, r.features, r.record_feats);
    for (std::size_t j = 0; j < perm.size(); ++j) {
      CHECK(b.level1_scores[2 * j] == a.level1_scores[2 * perm[j]]);
      CHECK(b.level1_scores[2 * j + 1] == a.level1_scores[2 * perm[j] + 1]);
    }
    CHECK(b.to_vector(false).tail(8) == a.to_vector(false).tail(8));
  }
}

TEST_CASE("ensemble training is deterministic and independent of worker count") {
  const auto& f = fixture();
  const auto again = train_ensemble(f.train, f.pipeline.ensemble.spec, 3);
  CHECK(again.loss_histories == f.pipeline.ensemble.loss_histories);
  for (const auto& r : f.valid) {
    CHECK(assemble(again, r.features, r.record_feats).to_vector(false) ==
          assemble(f.pipeline.ensemble, r.features, r.record_feats).to_vector(false));
  }
  CHECK(f.pipeline.ensemble.train_ids.size() == 32);
}

TEST_CASE("ensemble training errors") {
  const auto& f = fixture();
  std::vector<PreparedRecord> none;
  CHECK_ERRC(train_ensemble(none, f.pipeline.ensemble.spec, 1), Errc::EmptyDataset);
  std::vector<PreparedRecord> no_af;
  for (const auto& r : f.train)
    if (*r.label != RC::AF) no_af.push_back(r);
  CHECK_ERRC(train_ensemble(no_af, f.pipeline.ensemble.spec, 1), Errc::EmptyClass);
}

TEST_CASE("a single member learns a separable binary task") {
  const auto& f = fixture();
  auto cfg = tiny_level1();
  cfg.hidden = 8;
  cfg.epochs = 30;
  cfg.attention = true;
  EnsembleSpec spec;
  spec.members.push_back({"AF-vs-rest", {RC::AF}, cfg});
  const auto ens = train_ensemble(f.train, spec, 1);
  std::size_t hits = 0;
  for (const auto& r : f.train) {
    const auto out = run_members(ens, r.features)[0];
    hits += (out.probs[1] > 0.5) == (*r.label == RC::AF) ? 1 : 0;
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(f.train.size()) >= 0.95);
}

TEST_CASE("member decisions map to four classes") {
  const auto& f = fixture();
  const auto& ens = f.pipeline.ensemble;
  MemberOutput yes{Eigen::Vector2d(0.1, 0.9), {}};
  MemberOutput no{Eigen::Vector2d(0.9, 0.1), {}};
  CHECK(member_decision(ens, 2, yes) == RC::Other);
  const RC neg = member_decision(ens, 2, no);
  CHECK(neg == ens.negative_class[2]);
  CHECK(neg != RC::Other);
  CHECK_ERRC(member_decision(ens, 8, yes), Errc::InvalidArgument);
}

TEST_CASE("blender output lies on the simplex") {
  const auto& f = fixture();
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd x = testing::random_vector(24, rng, i % 2 == 0 ? 1.0 : 50.0);
    const Eigen::Vector4d p = f.pipeline.blender.predict(x);
    CHECK((p.array() >= 0).all());
    CHECK(std::abs(p.sum() - 1.0) < 1e-9);
  }
  CHECK_ERRC(f.pipeline.blender.predict(Eigen::VectorXd::Zero(23)), Errc::ShapeMismatch);
}

TEST_CASE("blender training is deterministic and checks its inputs") {
  const auto& f = fixture();
  auto [vectors, ys, ids] = f.blender_inputs();
  BlenderConfig bc;
  bc.epochs = 20;
  bc.seed = 9;
  const auto a = train_blender(vectors, ys, ids, f.pipeline.ensemble.train_ids, bc);
  CHECK(blender_params(a.model) == blender_params(f.pipeline.blender));
  CHECK(a.loss_history.size() == 20);

  std::vector<std::string> leaked = ids;
  leaked[3] = f.pipeline.ensemble.train_ids[0];
  CHECK_ERRC(train_blender(vectors, ys, leaked, f.pipeline.ensemble.train_ids, bc), Errc::LeakageDetected);
  std::vector<Eigen::VectorXd> none;
  std::vector<RC> no_labels;
  std::vector<std::string> no_ids;
  CHECK_ERRC(train_blender(none, no_labels, no_ids, f.pipeline.ensemble.train_ids, bc), Errc::EmptyDataset);
  std::vector<RC> short_labels(ys.begin(), ys.end() - 1);
  CHECK_ERRC(train_blender(vectors, short_labels, ids, f.pipeline.ensemble.train_ids, bc), Errc::LengthMismatch);
  auto ragged = vectors;
  ragged[1] = Eigen::VectorXd::Zero(23);
  CHECK_ERRC(train_blender(ragged, ys, ids, f.pipeline.ensemble.train_ids, bc), Errc::ShapeMismatch);
  bc.dropout = 1.5;
  CHECK_ERRC(train_blender(vectors, ys, ids, f.pipeline.ensemble.train_ids, bc), Errc::InvalidConfig);
}

TEST_CASE("blender files round-trip and reject corruption") {
  const auto& f = fixture();
  testing::TempDir dir;
  save_blender(f.pipeline.blender, dir / "b.blnd");
  const auto back = load_blender(dir / "b.blnd");
  CHECK(blender_params(back) == blender_params(f.pipeline.blender));
  CHECK(back.scaler.mean == f.pipeline.blender.scaler.mean);
  CHECK(back.epochs == f.pipeline.blender.epochs);
  const Eigen::VectorXd x = std::get<0>(f.blender_inputs())[0];
  CHECK(back.predict(x) == f.pipeline.blender.predict(x));

  std::string bytes = testing::read_text(dir / "b.blnd");
  testing::write_text(dir / "magic.blnd", "XLND" + bytes.substr(4));
  CHECK_ERRC(load_blender(dir / "magic.blnd"), Errc::InvalidModelFile);
  testing::write_text(dir / "short.blnd", bytes.substr(0, bytes.size() - 3));
  CHECK_ERRC(load_blender(dir / "short.blnd"), Errc::InvalidModelFile);
  testing::write_text(dir / "long.blnd", bytes + std::string(1, '\0'));
  CHECK_ERRC(load_blender(dir / "long.blnd"), Errc::InvalidModelFile);
  CHECK_ERRC(load_blender(dir / "absent.blnd"), Errc::MissingFile);
}

TEST_CASE("predict returns simplex scores and aligned attention") {
  const auto& f = fixture();
  for (std::size_t i = 0; i < 4; ++i) {
    const auto p = predict(f.valid_records[i], f.pipeline);
    const double total = std::accumulate(p.scores.begin(), p.scores.end(), 0.0);
    CHECK(std::abs(total - 1.0) < 1e-9);
    CHECK(!p.fallback);
    const auto best = std::max_element(p.scores.begin(), p.scores.end()) - p.scores.begin();
    CHECK(code(p.label) == best);
    CHECK(p.level1_scores.size() == 16);
    REQUIRE(p.attention.size() == 4);
    const auto beats = f.valid[i].beats.r_indices.size();
    for (const auto& a : p.attention) {
      CHECK(a.member_id.ends_with("-att"));
      CHECK(a.r_indices.size() == beats);
      CHECK(static_cast<std::size_t>(a.weights.size()) == beats);
      CHECK(std::abs(a.weights.sum() - 1.0) < 1e-9);
    }
    const auto again = predict(f.valid_records[i], f.pipeline);
    CHECK(again.scores == p.scores);
  }
}

TEST_CASE("flat and short records fall back to Noisy") {
  const auto& f = fixture();
  EcgRecord flat = f.valid_records[0];
  flat.samples.setConstant(0.25);
  const auto p = predict(flat, f.pipeline);
  CHECK(p.fallback);
  CHECK(p.label == RC::Noisy);
  CHECK(p.scores == std::array<double, 4>{0, 0, 0, 1});
  CHECK(p.attention.empty());

  EcgRecord tiny = f.valid_records[0];
  tiny.samples = tiny.samples.head(30).eval();
  const auto q = predict(tiny, f.pipeline);
  CHECK(q.fallback);
  CHECK(q.label == RC::Noisy);
}

TEST_CASE("F1 scoring") {
  SUBCASE("hand-counted confusion matrix") {
    const std::vector<RC> truth{RC::Normal, RC::AF, RC::Other, RC::Normal};
    const std::vector<RC> pred{RC::Normal, RC::AF, RC::Normal, RC::Normal};
    const auto r = evaluate_f1(pred, truth);
    CHECK(r.per_class[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(r.per_class[1] == 1.0);
    CHECK(r.per_class[2] == 0.0);
    CHECK(r.per_class[3] == 0.0);
    CHECK(r.average == doctest::Approx(0.6).epsilon(1e-15));
  }
  SUBCASE("class scores 0.90, 0.79 and 0.68 average to 0.79") {
    // Per class: TP/FN chosen so that 2TP/(2TP+FN) hits the target; every
    // miss is predicted Noisy so no class gains false positives.
    std::vector<RC> truth, pred;
    auto add = [&](RC c, int tp, int fn) {
      for (int i = 0; i < tp; ++i) truth.push_back(c), pred.push_back(c);
      for (int i = 0; i < fn; ++i) truth.push_back(c), pred.push_back(RC::Noisy);
    };
    add(RC::Normal, 9, 2);
    add(RC::AF, 79, 42);
    add(RC::Other, 34, 32);
    const auto r = evaluate_f1(pred, truth);
    CHECK(std::abs(r.per_class[0] - 0.90) < 1e-12);
    CHECK(std::abs(r.per_class[1] - 0.79) < 1e-12);
    CHECK(std::abs(r.per_class[2] - 0.68) < 1e-12);
    CHECK(std::abs(r.average - 0.79) < 1e-9);
  }
  SUBCASE("perfect predictions") {
    const std::vector<RC> truth{RC::Normal, RC::AF, RC::Other, RC::Noisy, RC::AF};
    const auto r = evaluate_f1(truth, truth);
    for (double v : r.per_class) CHECK(v == 1.0);
    CHECK(r.average == 1.0);
  }
  SUBCASE("joint shuffles leave the report bit-identical") {
    Rng rng(12);
    std::vector<RC> truth, pred;
    std::uniform_int_distribution<int> pick(0, 3);
    for (int i = 0; i < 97; ++i) {
      truth.push_back(rhythm_from_code(pick(rng)));
      pred.push_back(rhythm_from_code(pick(rng)));
    }
    const auto base = evaluate_f1(pred, truth);
    std::vector<std::size_t> order(truth.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int k = 0; k < 20; ++k) {
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<RC> t2, p2;
      for (auto i : order) t2.push_back(truth[i]), p2.push_back(pred[i]);
      const auto r = evaluate_f1(p2, t2);
      CHECK(r.per_class == base.per_class);
      CHECK(r.average == base.average);
    }
  }
  SUBCASE("errors") {
    const std::vector<RC> a{RC::Normal, RC::AF};
    const std::vector<RC> b{RC::Normal};
    const std::vector<RC> empty;
    CHECK_ERRC(evaluate_f1(a, b), Errc::LengthMismatch);
    CHECK_ERRC(evaluate_f1(empty, empty), Errc::EmptyDataset);
  }
}

TEST_CASE("feature scaler standardises and tolerates constant features") {
  std::vector<Eigen::MatrixXd> seqs{Eigen::MatrixXd(2, 2), Eigen::MatrixXd(2, 1)};
  seqs[0] << 1, 3, 5, 5;
  seqs[1] << 5, 5;
  const auto s = FeatureScaler::fit(seqs);
  CHECK(s.mean[0] == doctest::Approx(3.0));
  CHECK(s.mean[1] == 5.0);
  CHECK(s.scale[1] == 1.0);
  const Eigen::MatrixXd z = s.apply(seqs[0]);
  CHECK(z(1, 0) == 0.0);
  CHECK(z(0, 0) == doctest::Approx(-2.0 / std::sqrt(8.0 / 3.0)));
  CHECK_ERRC(s.apply(Eigen::MatrixXd::Zero(3, 1)), Errc::ShapeMismatch);
}

TEST_CASE("run config parsing") {
  const auto cfg = parse_config(nlohmann::json::parse(R"({
    "seed": 9, "threads": 2,
    "level1": {"hidden": 12, "recurrent_layers": 2, "epochs": 4,
               "members": [{"id": "af", "targets": ["AF"], "attention": true},
                           {"id": "no", "targets": ["Normal", "Other"], "epochs": 1}]},
    "blender": {"epochs": 7}
  })"));
  CHECK(cfg.seed == 9);
  CHECK(cfg.threads == 2);
  CHECK(cfg.level1.hidden == 12);
  CHECK(blender_config(cfg).epochs == 7);
  CHECK(blender_config(cfg).seed == derive_seed(9, "blender"));
  CHECK(sdae_config(cfg, "beats").seed == derive_seed(9, "sdae:beats"));
  const auto spec = ensemble_spec(cfg);
  REQUIRE(spec.members.size() == 2);
  CHECK(spec.members[0].config.attention);
  CHECK(spec.members[0].config.hidden == 12);
  CHECK(spec.members[1].config.epochs == 1);
  CHECK(spec.members[1].targets.size() == 2);
  CHECK(spec.members[0].config.seed != spec.members[1].config.seed);
  CHECK(parse_config(to_json(cfg)).level1.hidden == 12);

  CHECK_ERRC(parse_config(nlohmann::json::parse(R"({"sede": 1})")), Errc::InvalidConfig);
  CHECK_ERRC(parse_config(nlohmann::json::parse(R"({"level1": {"seed": 3}})")), Errc::InvalidConfig);
  CHECK_ERRC(parse_config(nlohmann::json::parse(R"({"level1": {"hidden": "many"}})")), Errc::InvalidConfig);
  CHECK_ERRC(parse_config(nlohmann::json::parse(R"({"level1": {"dropout": 1.0}})")), Errc::InvalidConfig);
  CHECK_ERRC(load_config("/nonexistent/beatnet.json"), Errc::MissingFile);
  testing::TempDir dir;
  testing::write_text(dir / "bad.json", "{ not json");
  CHECK_ERRC(load_config(dir / "bad.json"), Errc::ParseError);
}

TEST_CASE("saved ensembles reload to the same predictions") {
  const auto& f = fixture();
  testing::TempDir dir;
  DetectorConfig det;
  save_ensemble(f.pipeline.ensemble, det, dir.path());
  save_sdae(f.pipeline.featurizer.sdae_beat, dir / "sdae_beats.sdae");
  save_sdae(f.pipeline.featurizer.sdae_coeff, dir / "sdae_coeffs.sdae");
  save_blender(f.pipeline.blender, dir / "blender.blnd");
  const auto loaded = load_pipeline(dir.path());
  CHECK(loaded.ensemble.train_ids == f.pipeline.ensemble.train_ids);
  CHECK(loaded.ensemble.spec.members.size() == 8);
  const auto a = predict(f.valid_records[5], f.pipeline);
  const auto b = predict(f.valid_records[5], loaded);
  CHECK(a.scores == b.scores);
  CHECK(a.level1_scores == b.level1_scores);
}
