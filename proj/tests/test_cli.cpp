// Copyright 2026 The lpskit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "lps/io.hpp"
#include "lps/serialize.hpp"
#include "support.hpp"

namespace lps {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using testing::run_command;
using testing::slurp;

std::string bin() { return std::string("'") + LPSKIT_BIN + "'"; }
std::string q(const fs::path& p) { return "'" + p.string() + "'"; }
std::string toy_map() { return q(testing::source_path("config/toy.json")); }

struct Outcome {
  int status;
  std::string out;
  std::string err;
};

Outcome lpskit(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const int status = run_command(bin() + " " + args, out.string(), err.string());
  return {status, slurp(out), slurp(err)};
}

// Last non-empty stderr line, parsed as the error object.
json error_json(const std::string& err) {
  const std::size_t end = err.find_last_not_of('\n');
  if (end == std::string::npos) return json();
  const std::size_t nl = err.rfind('\n', end);
  const std::size_t begin = nl == std::string::npos ? 0 : nl + 1;
  return json::parse(err.substr(begin, end + 1 - begin), nullptr, false);
}

void write_synthetic(const fs::path& dir, int count, std::uint64_t seed) {
  fs::create_directories(dir / "scans");
  fs::create_directories(dir / "labels");
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const auto s = testing::make_synthetic_scan({}, rng);
    char stem[16];
    std::snprintf(stem, sizeof(stem), "%06d", i);
    save_scan(dir / "scans" / (std::string(stem) + ".bin"), s.cloud);
    save_labels(dir / "labels" / (std::string(stem) + ".label"), s.labels);
  }
}

TEST(Cli, UnknownSubcommandExitsOne) {
  const fs::path dir = testing::scratch_dir("cli-unknown");
  const Outcome r = lpskit(dir, "bogus");
  EXPECT_EQ(r.status, 1);
  const json e = error_json(r.err);
  ASSERT_TRUE(e.is_object()) << r.err;
  EXPECT_NE(e["message"].get<std::string>().find("bogus"), std::string::npos);
}

TEST(Cli, HelpForEverySubcommand) {
  const fs::path dir = testing::scratch_dir("cli-help");
  for (const char* sub : {"project", "backproject", "fuse", "eval", "pseudo-label", "train-toy",
                          "gradcheck"}) {
    const Outcome r = lpskit(dir, std::string(sub) + " --help");
    EXPECT_EQ(r.status, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
}

TEST(Cli, MissingInputExitsTwoWithPath) {
  const fs::path dir = testing::scratch_dir("cli-missing");
  const fs::path missing = dir / "nope.bin";
  const Outcome r = lpskit(dir, "project --scan " + q(missing) + " --out " + q(dir / "x.json"));
  EXPECT_EQ(r.status, 2);
  const json e = error_json(r.err);
  ASSERT_TRUE(e.is_object()) << r.err;
  EXPECT_EQ(e["error"], "data");
  EXPECT_NE(e.dump().find(missing.string()), std::string::npos);
}

TEST(Cli, TruncatedScanExitsTwo) {
  const fs::path dir = testing::scratch_dir("cli-truncated");
  write_file(dir / "bad.bin", std::string(18, '\0'));
  const Outcome r = lpskit(dir, "project --scan " + q(dir / "bad.bin") + " --out " + q(dir / "x.json"));
  EXPECT_EQ(r.status, 2);
  EXPECT_EQ(error_json(r.err)["error"], "format");
}

TEST(Cli, BadConfigKeyNamesThePath) {
  const fs::path dir = testing::scratch_dir("cli-config");
  write_file(dir / "run.json", R"({"version": 1, "fusion": {"overlap": 0.5}})");
  const Outcome r = lpskit(dir, "--config " + q(dir / "run.json") + " gradcheck --op conv2d --seeds 1");
  EXPECT_EQ(r.status, 1);
  const json e = error_json(r.err);
  ASSERT_TRUE(e.is_object()) << r.err;
  EXPECT_EQ(e["details"]["key"], "fusion.overlap");
}

TEST(Cli, ExampleRunConfigLoads) {
  const fs::path dir = testing::scratch_dir("cli-run-config");
  const Outcome r = lpskit(dir, "--config " + q(testing::source_path("config/examples/run_toy.json")) +
                                " gradcheck --op separable_conv --seeds 1");
  EXPECT_EQ(r.status, 0) << r.err;
}

TEST(Cli, ProjectBackprojectRoundTrip) {
  const fs::path dir = testing::scratch_dir("cli-roundtrip");
  write_synthetic(dir, 2, 11);
  for (const char* stem : {"000000", "000001"}) {
    const fs::path scan = dir / "scans" / (std::string(stem) + ".bin");
    const fs::path labels = dir / "labels" / (std::string(stem) + ".label");
    const fs::path side = dir / (std::string(stem) + ".json");
    const fs::path back = dir / (std::string(stem) + ".back.label");
    Outcome r = lpskit(dir, "project --scan " + q(scan) + " --labels " + q(labels) + " --class-map " +
                            toy_map() + " --rows 16 --width 256 --out " + q(side));
    ASSERT_EQ(r.status, 0) << r.err;
    const json summary = json::parse(r.out);
    EXPECT_EQ(summary["format"], "lpskit-project");
    r = lpskit(dir, "backproject --pred2d " + q(side) + " --image " + q(side) + " --scan " +
                        q(scan) + " --class-map " + toy_map() + " --k 1 --window 3 --out " +
                        q(back));
    ASSERT_EQ(r.status, 0) << r.err;
    const LabelSet in = load_labels(labels);
    const LabelSet out = load_labels(back);
    ASSERT_EQ(in.size(), out.size());
    std::size_t same = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      same += in.semantic[i] == out.semantic[i] && in.instance[i] == out.instance[i];
    }
    EXPECT_EQ(same, in.size());
  }
}

TEST(Cli, EvalIdenticalDirectoriesScoresOne) {
  const fs::path dir = testing::scratch_dir("cli-eval");
  write_synthetic(dir, 3, 5);
  const std::string args = "eval --pred-dir " + q(dir / "labels") + " --gt-dir " +
                           q(dir / "labels") + " --class-map " + toy_map() + " --format json";
  const Outcome r = lpskit(dir, args);
  ASSERT_EQ(r.status, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_NEAR(j["pq"].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(j["miou"].get<double>(), 1.0, 1e-12);

  // Worker count does not change the report.
  const Outcome r4 = lpskit(dir, "--jobs 4 " + args);
  ASSERT_EQ(r4.status, 0) << r4.err;
  EXPECT_EQ(r4.out, r.out);

  const Outcome table = lpskit(dir, "eval --pred-dir " + q(dir / "labels") + " --gt-dir " +
                                    q(dir / "labels") + " --class-map " + toy_map());
  ASSERT_EQ(table.status, 0) << table.err;
  EXPECT_EQ(table.out.rfind("# lpskit", 0), 0u);
  EXPECT_NE(table.out.find("PQ"), std::string::npos);
}

TEST(Cli, EvalWithBorderIou) {
  const fs::path dir = testing::scratch_dir("cli-eval-border");
  write_synthetic(dir, 2, 9);
  const Outcome r = lpskit(dir, "eval --pred-dir " + q(dir / "labels") + " --gt-dir " +
                                q(dir / "labels") + " --scan-dir " + q(dir / "scans") +
                                " --class-map " + toy_map() +
                                " --border-width 1 --format json --json " + q(dir / "r.json"));
  ASSERT_EQ(r.status, 0) << r.err;
  const json j = json::parse(slurp(dir / "r.json"));
  EXPECT_EQ(j, json::parse(r.out));
  for (const auto& c : j["classes"]) {
    ASSERT_TRUE(c.contains("border_iou")) << c.dump();
    EXPECT_NEAR(c["border_iou"].get<double>(), 1.0, 1e-12);
  }
}

TEST(Cli, FuseExampleInstances) {
  const fs::path dir = testing::scratch_dir("cli-fuse");
  Tensor logits({5, 16, 64});
  for (int h = 0; h < 16; ++h) {
    for (int w = 0; w < 64; ++w) logits.at(h < 8 ? 1 : 0, h, w) = 2.0f;
  }
  write_file(dir / "logits.lpst", encode_tensors({{"logits", logits}}));
  const fs::path out = dir / "fused.lpst";
  const Outcome r = lpskit(dir, "fuse --semantic-logits " + q(dir / "logits.lpst") + " --instances " +
                                q(testing::source_path("config/examples/instances.json")) +
                                " --class-map " + toy_map() + " --min-stuff-area 0 --out " +
                                q(out));
  ASSERT_EQ(r.status, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["instances_in"], 2);
  // The person scores 0.41, below the default confidence threshold.
  EXPECT_EQ(j["instances_out"], 1);
  const auto rec = decode_tensors(slurp(out));
  ASSERT_EQ(rec.size(), 3u);
  EXPECT_EQ(rec[0].name, "semantic");
  const Tensor& sem = rec[0].tensor;
  EXPECT_EQ(sem.at(0, 12, 22), 3.0f);  // car mask interior
  EXPECT_EQ(sem.at(0, 3, 41), 1.0f);   // building under the dropped person
}

TEST(Cli, FuseRejectsBadInstances) {
  const fs::path dir = testing::scratch_dir("cli-fuse-bad");
  write_file(dir / "logits.lpst", encode_tensors({{"logits", Tensor({5, 4, 4})}}));
  write_file(dir / "inst.json", R"({"format": "lpskit-instances", "version": 1,
    "instances": [{"class_id": 3, "score": 0.9, "bbox": [0, 0, 2, 2],
                   "mask": "m.f32", "mask_shape": [2, 2]}]})");
  write_file(dir / "m.f32", std::string(12, '\0'));
  const Outcome r = lpskit(dir, "fuse --semantic-logits " + q(dir / "logits.lpst") + " --instances " +
                                q(dir / "inst.json") + " --class-map " + toy_map() + " --out " +
                                q(dir / "o.lpst"));
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(error_json(r.err).dump().find("m.f32"), std::string::npos);
}

TEST(Cli, GradcheckSingleOp) {
  const fs::path dir = testing::scratch_dir("cli-gradcheck");
  const Outcome r = lpskit(dir, "gradcheck --op conv2d --seeds 2");
  ASSERT_EQ(r.status, 0) << r.err;
  const json j = json::parse(r.out);
  ASSERT_EQ(j["ops"].size(), 1u);
  EXPECT_TRUE(j["ops"][0]["pass"].get<bool>());
  EXPECT_LT(j["ops"][0]["max_rel_error"].get<double>(), 1e-3);
}

TEST(Cli, TrainToyIsDeterministic) {
  const fs::path dir = testing::scratch_dir("cli-train");
  const std::string args = "--seed 3 train-toy --steps 4 --scenes 2 --height 32 --width 32";
  const Outcome a = lpskit(dir, args + " --checkpoint-out " + q(dir / "a.lpst"));
  const Outcome b = lpskit(dir, args + " --checkpoint-out " + q(dir / "b.lpst"));
  ASSERT_EQ(a.status, 0) << a.err;
  ASSERT_EQ(b.status, 0) << b.err;
  EXPECT_NE(a.out.find("step,loss,pixel,lovasz"), std::string::npos);
  // The header names the checkpoint path, so compare from the CSV header on.
  const auto body = [](const std::string& s) { return s.substr(s.find("step,")); };
  EXPECT_EQ(body(a.out), body(b.out));
  EXPECT_EQ(slurp(dir / "a.lpst"), slurp(dir / "b.lpst"));
}

TEST(Cli, PseudoLabelUnreachableCutoffIsInfeasible) {
  const fs::path dir = testing::scratch_dir("cli-pseudo");
  write_synthetic(dir, 2, 21);
  Outcome r = lpskit(dir, "--seed 1 train-toy --steps 2 --scenes 1 --height 32 --width 64 "
                      "--checkpoint-out " + q(dir / "net.lpst"));
  ASSERT_EQ(r.status, 0) << r.err;
  write_file(dir / "grid.json", R"({"grid": {"confidence_threshold": [0.3, 0.6]}})");
  r = lpskit(dir, "pseudo-label --scans " + q(dir / "scans") + " --checkpoint " +
                      q(dir / "net.lpst") + " --grid " + q(dir / "grid.json") +
                      " --pq-cutoff 1.0 --p-limit 4 --val-gt " + q(dir / "labels") + " --val-scans " +
                      q(dir / "scans") + " --class-map " + toy_map() + " --out-dir " +
                      q(dir / "out"));
  EXPECT_EQ(r.status, 1);
  const json e = error_json(r.err);
  ASSERT_TRUE(e.is_object()) << r.err;
  EXPECT_EQ(e["error"], "infeasible");
}

}  // namespace
}  // namespace lps
