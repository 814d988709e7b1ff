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

#include <sstream>

#include "beatnet/cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

Outcome cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = beatnet::cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::size_t line_count(const std::string& text) { return count(text, "\n"); }

constexpr const char* kTinyConfig = R"({
  "seed": 4,
  "sdae": {"hidden": 16, "max_inputs": 200, "pretrain_epochs": 1, "finetune_epochs": 1},
  "level1": {"hidden": 4, "recurrent_layers": 1, "epochs": 2, "dropout": 0.1, "recurrent_dropout": 0.1},
  "blender": {"epochs": 10}
})";

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(cli({}).code == beatnet::cli::kUsage);
  CHECK(cli({"frobnicate"}).code == beatnet::cli::kUsage);
  const auto unknown = cli({"eval", "--predictions", "a.csv", "--labels", "b.csv", "--bogus"});
  CHECK(unknown.code == beatnet::cli::kUsage);
  CHECK(unknown.err.find("--bogus") != std::string::npos);
  CHECK(cli({"synth", "--out", "x"}).code == beatnet::cli::kUsage);
  CHECK(cli({"synth", "--n", "two", "--out", "x"}).code == beatnet::cli::kUsage);
  const auto help = cli({"--help"});
  CHECK(help.code == beatnet::cli::kOk);
  CHECK(help.out.find("attention") != std::string::npos);
}

TEST_CASE("eval prints the challenge average") {
  testing::TempDir dir;
  std::string labels = "record_id,label\n", preds = "record_id,label\n";
  int id = 0;
  auto add = [&](const char* cls, int tp, int fn) {
    for (int i = 0; i < tp + fn; ++i, ++id) {
      labels += fmt::format("r{},{}\n", id, cls);
      preds += fmt::format("r{},{}\n", id, i < tp ? cls : "Noisy");
    }
  };
  add("Normal", 9, 2);
  add("AF", 79, 42);
  add("Other", 34, 32);
  testing::write_text(dir / "labels.csv", labels);
  testing::write_text(dir / "pred.csv", preds);
  const auto r = cli({"eval", "--predictions", (dir / "pred.csv").string(), "--labels", (dir / "labels.csv").string(),
                      "--out", (dir / "metrics.json").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("F1 Normal 0.9\n") != std::string::npos);
  CHECK(r.out.find("F1 AF     0.79\n") != std::string::npos);
  CHECK(r.out.find("F1 Other  0.68\n") != std::string::npos);
  CHECK(r.out.find("average 0.79\n") != std::string::npos);
  CHECK(testing::read_text(dir / "metrics.json").find("\"average\"") != std::string::npos);
  CHECK(fs::exists(dir / "eval.manifest.json"));
}

TEST_CASE("data errors exit with 2 and name the line") {
  testing::TempDir dir;
  testing::write_text(dir / "labels.csv", "record_id,label\nr0,Normal\nr1,Sinus\n");
  testing::write_text(dir / "pred.csv", "record_id,label\nr0,Normal\n");
  const auto bad = cli({"eval", "--predictions", (dir / "pred.csv").string(), "--labels", (dir / "labels.csv").string()});
  CHECK(bad.code == beatnet::cli::kDataError);
  CHECK(bad.err.find("line 3") != std::string::npos);
  testing::write_text(dir / "good.csv", "record_id,label\nr0,Normal\n");
  const auto missing = cli({"eval", "--predictions", (dir / "none.csv").string(), "--labels",
                            (dir / "good.csv").string()});
  CHECK(missing.code == beatnet::cli::kDataError);
  CHECK(missing.err.find("MissingFile") != std::string::npos);
  const auto no_record = cli({"segment", "--record", (dir / "none.csv").string(), "--out", (dir / "s.csv").string()});
  CHECK(no_record.code == beatnet::cli::kDataError);
}

TEST_CASE("invalid configs exit with 1") {
  testing::TempDir dir;
  testing::write_text(dir / "bad.json", R"({"level1": {"hiden": 3}})");
  const auto r = cli({"synth", "--n", "2", "--out", (dir / "c").string(), "--config", (dir / "bad.json").string()});
  CHECK(r.code == beatnet::cli::kUsage);
  CHECK(r.err.find("hiden") != std::string::npos);
}

TEST_CASE("synth is reproducible byte for byte") {
  testing::TempDir dir;
  for (const char* name : {"a", "b"}) {
    REQUIRE(cli({"synth", "--n", "6", "--seed", "11", "--duration", "10", "--out", (dir / name).string()}).code == 0);
  }
  REQUIRE(cli({"synth", "--n", "6", "--seed", "12", "--duration", "10", "--out", (dir / "c").string()}).code == 0);
  const auto labels = testing::read_text(dir / "a" / "labels.csv");
  CHECK(labels == testing::read_text(dir / "b" / "labels.csv"));
  CHECK(line_count(labels) == 7);
  CHECK(labels.rfind("record_id,label,split\nrec00000,Normal,train\nrec00001,AF,train\n", 0) == 0);
  for (int i = 0; i < 6; ++i) {
    const auto rec = fmt::format("rec{:05d}.csv", i);
    CHECK(testing::read_text(dir / "a" / "records" / rec) == testing::read_text(dir / "b" / "records" / rec));
    CHECK(testing::read_text(dir / "a" / "truth" / rec) == testing::read_text(dir / "b" / "truth" / rec));
    CHECK(testing::read_text(dir / "a" / "records" / rec) != testing::read_text(dir / "c" / "records" / rec));
  }
}

TEST_CASE("the full command chain runs and reruns identically") {
  testing::TempDir dir;
  const auto cfg = (dir / "tiny.json").string();
  testing::write_text(cfg, kTinyConfig);
  const auto data = (dir / "data").string();
  const auto model = (dir / "model").string();
  REQUIRE(cli({"synth", "--n", "40", "--out", data, "--config", cfg}).code == 0);

  const auto rec = (dir / "data" / "records" / "rec00018.csv").string();
  REQUIRE(cli({"segment", "--record", rec, "--out", (dir / "beats.csv").string()}).code == 0);
  const auto beats = testing::read_text(dir / "beats.csv");
  CHECK(beats.rfind("beat_index,r_sample_index,delta_rr\n", 0) == 0);
  const std::size_t n_beats = line_count(beats) - 1;
  CHECK(n_beats > 20);

  REQUIRE(cli({"train-sdae", "--data", data, "--model", model, "--config", cfg}).code == 0);
  CHECK(fs::exists(dir / "model" / "sdae_beats.sdae"));
  CHECK(fs::exists(dir / "model" / "sdae_coeffs_loss.csv"));

  REQUIRE(cli({"features", "--record", rec, "--model", model, "--out", (dir / "feat.csv").string()}).code == 0);
  CHECK(line_count(testing::read_text(dir / "feat.csv")) == n_beats + 1);

  const auto trained = cli({"train", "--data", data, "--model", model, "--config", cfg});
  REQUIRE_MESSAGE(trained.code == 0, trained.err);
  CHECK(fs::exists(dir / "model" / "ensemble.json"));
  CHECK(fs::exists(dir / "model" / "member_07.sqmd"));
  const auto blended = cli({"blend", "--data", data, "--model", model, "--config", cfg});
  REQUIRE_MESSAGE(blended.code == 0, blended.err);
  CHECK(fs::exists(dir / "model" / "blender.blnd"));
  CHECK(line_count(testing::read_text(dir / "model" / "prediction_vectors_valid.csv")) == 9);  // header + 8

  const auto pred = (dir / "pred.csv").string();
  const auto pred2 = (dir / "pred2.csv").string();
  const auto att = (dir / "att.csv").string();
  REQUIRE(cli({"predict", "--model", model, "--data", data, "--out", pred, "--attention-out", att}).code == 0);
  REQUIRE(cli({"predict", "--model", model, "--data", data, "--out", pred2}).code == 0);
  const auto p = testing::read_text(pred);
  CHECK(p == testing::read_text(pred2));
  CHECK(p.rfind("record_id,Normal,AF,Other,Noisy,label\n", 0) == 0);
  CHECK(line_count(p) == 9);  // 8 test records
  CHECK(testing::read_text(att).rfind("record_id,member_id,beat_index,r_sample_index,a_t\n", 0) == 0);

  const auto ev = cli({"eval", "--predictions", pred, "--labels", (dir / "data" / "labels.csv").string()});
  CHECK(ev.code == 0);
  CHECK(ev.out.find("average ") != std::string::npos);

  const auto plots = (dir / "plots").string();
  REQUIRE(cli({"attention", "--model", model, "--record", rec, "--out", plots, "--member", "Other-vs-rest-att"}).code == 0);
  const auto svg = testing::read_text(dir / "plots" / "rec00018_Other-vs-rest-att.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(count(svg, "class=\"attention-bar\"") == n_beats);
  CHECK(line_count(testing::read_text(dir / "plots" / "rec00018_Other-vs-rest-att.csv")) == n_beats + 1);
  CHECK(!fs::exists(dir / "plots" / "rec00018_AF-vs-rest-att.svg"));
  REQUIRE(cli({"attention", "--model", model, "--record", rec, "--out", (dir / "plots2").string(), "--member",
               "Other-vs-rest-att"})
              .code == 0);
  CHECK(testing::read_text(dir / "plots2" / "rec00018_Other-vs-rest-att.svg") == svg);
  CHECK(cli({"attention", "--model", model, "--record", rec, "--out", plots, "--member", "nobody"}).code ==
        beatnet::cli::kDataError);

  // A flat record is scored, not rejected.
  std::string flat = "sample\n";
  for (int i = 0; i < 3000; ++i) flat += "0.5\n";
  testing::write_text(dir / "flat.csv", flat);
  REQUIRE(cli({"predict", "--model", model, "--record", (dir / "flat.csv").string(), "--out", pred}).code == 0);
  CHECK(testing::read_text(pred).find(",0,0,0,1,Noisy\n") != std::string::npos);
}
