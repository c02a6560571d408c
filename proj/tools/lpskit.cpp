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

// lpskit: command-line front end. Exit codes: 0 success, 1 validation error,
// 2 data error. Errors go to stderr as one JSON object per line.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lps/fusion.hpp"
#include "lps/grad_suite.hpp"
#include "lps/image_io.hpp"
#include "lps/io.hpp"
#include "lps/metrics.hpp"
#include "lps/parallel.hpp"
#include "lps/pipeline.hpp"
#include "lps/projection.hpp"
#include "lps/pseudo_label.hpp"
#include "lps/run_config.hpp"
#include "lps/serialize.hpp"
#include "lps/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lps {
namespace {

constexpr const char* kVersion = "0.1.0";

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
};

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::kData:
    case ErrorKind::kFormat:
      return 2;
    default:
      return 1;
  }
}

int report_error(ErrorKind kind, const std::string& message,
                 const std::map<std::string, std::string>& details = {}) {
  json j = {{"error", to_string(kind)}, {"message", message}, {"details", details}};
  std::cerr << j.dump() << std::endl;
  return exit_code(kind);
}

RunConfig run_config(const Globals& g) {
  RunConfig rc = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  if (g.seed_set) rc.seed = g.seed;
  return rc;
}

ClassMap class_map_for(const RunConfig& rc, const std::string& flag) {
  if (!flag.empty()) return load_class_map(flag);
  if (rc.class_map) return load_class_map(*rc.class_map);
  throw Error(ErrorKind::kValidation, "no class map given (--class-map or config class_map)",
              {{"key", "class_map"}});
}

// Raw label ids to learning ids; undersized instances are kept.
LabelSet to_learning(const LabelSet& raw, const ClassMap& map) {
  ClassMap plain = map;
  plain.set_min_instance_points(0);
  return remap_and_filter(raw, plain);
}

LabelSet to_raw(LabelSet labels, const ClassMap& map) {
  for (auto& s : labels.semantic) s = map.raw_id_of(s);
  return labels;
}

Tensor label_plane(const std::vector<std::uint32_t>& ids, int h, int w) {
  Tensor t({1, h, w});
  for (std::size_t i = 0; i < ids.size(); ++i) t[i] = static_cast<float>(ids[i]);
  return t;
}

const Tensor& find_record(const std::vector<NamedTensor>& recs, const std::string& name,
                          const std::string& path) {
  for (const auto& r : recs) {
    if (r.name == name) return r.tensor;
  }
  throw Error(ErrorKind::kData, path + " has no tensor named " + name,
              {{"path", path}, {"record", name}});
}

PanopticLabel2D plane_labels(const std::vector<NamedTensor>& recs, const std::string& path) {
  const Tensor& s = find_record(recs, "semantic", path);
  const Tensor& i = find_record(recs, "instance", path);
  if (s.rank() != 3 || s.dim(0) != 1 || s.shape() != i.shape()) {
    throw Error(ErrorKind::kData, path + ": semantic/instance must both be (1, H, W)",
                {{"path", path}, {"semantic", shape_str(s.shape())},
                 {"instance", shape_str(i.shape())}});
  }
  PanopticLabel2D out(s.dim(1), s.dim(2));
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (s[k] < 0.0f || i[k] < 0.0f) {
      throw Error(ErrorKind::kData, path + ": negative label at pixel " + std::to_string(k),
                  {{"path", path}, {"pixel", std::to_string(k)}});
    }
    out.semantic[k] = static_cast<std::uint32_t>(s[k]);
    out.instance[k] = static_cast<std::uint32_t>(i[k]);
  }
  return out;
}

// ---------------------------------------------------------------- project

struct ProjectArgs {
  std::string scan, labels, out, class_map;
  std::optional<int> width, rows;
  std::optional<double> threshold_deg;
};

int cmd_project(const Globals& g, const ProjectArgs& a) {
  const RunConfig rc = run_config(g);
  ProjectionConfig pc = rc.pipeline.projection;
  if (a.width) pc.width = *a.width;
  if (a.rows) pc.rows = *a.rows;
  if (a.threshold_deg) pc.yaw_jump_threshold_deg = *a.threshold_deg;
  pc.validate();
  const PointCloud cloud = load_scan(a.scan);
  const RangeImage img = project(cloud, pc);
  std::optional<PanopticLabel2D> planes;
  if (!a.labels.empty()) {
    const ClassMap map = class_map_for(rc, a.class_map);
    const LabelSet labels = to_learning(load_labels(a.labels), map);
    if (labels.size() != cloud.size()) {
      throw Error(ErrorKind::kData,
                  a.labels + " has " + std::to_string(labels.size()) + " labels for " +
                      std::to_string(cloud.size()) + " points",
                  {{"path", a.labels}});
    }
    planes = project_labels(img, labels, map.ignore_id());
  }
  save_range_image(a.out, img, planes ? &*planes : nullptr);
  std::size_t valid_px = 0;
  for (auto v : img.valid) valid_px += v;
  json j = {{"format", "lpskit-project"}, {"version", 1},       {"points", cloud.size()},
            {"height", img.height()},     {"width", img.width()}, {"valid_pixels", valid_px},
            {"labels", planes.has_value()}, {"out", a.out}};
  std::cout << j.dump(2) << std::endl;
  return 0;
}

// ------------------------------------------------------------ backproject

struct BackprojectArgs {
  std::string pred2d, image, scan, out, class_map;
  int k = 0, window = 0;
};

// A 2D prediction is either a tensor file with semantic/instance planes (as
// written by fuse) or a range-image sidecar carrying labels.
PanopticLabel2D load_pred2d(const std::string& path) {
  if (fs::path(path).extension() == ".json") {
    StoredImage s = load_range_image(path);
    if (!s.labels) {
      throw Error(ErrorKind::kData, path + " carries no label planes", {{"path", path}});
    }
    return std::move(*s.labels);
  }
  return plane_labels(decode_tensors(read_file(path)), path);
}

int cmd_backproject(const Globals& g, const BackprojectArgs& a) {
  const RunConfig rc = run_config(g);
  const ClassMap map = class_map_for(rc, a.class_map);
  KnnOptions knn = rc.pipeline.knn;
  if (a.k > 0) knn.k = a.k;
  if (a.window > 0) knn.window_h = knn.window_w = a.window;
  const PointCloud cloud = load_scan(a.scan);
  const RangeImage img = load_range_image(a.image).image;
  if (img.pixel_of_point.size() != cloud.size()) {
    throw Error(ErrorKind::kData,
                a.image + " maps " + std::to_string(img.pixel_of_point.size()) +
                    " points but the scan has " + std::to_string(cloud.size()),
                {{"path", a.image}});
  }
  const PanopticLabel2D pred = load_pred2d(a.pred2d);
  if (pred.height != img.height() || pred.width != img.width()) {
    throw Error(ErrorKind::kShape,
                a.pred2d + " is " + std::to_string(pred.height) + "x" +
                    std::to_string(pred.width) + " but the image is " +
                    std::to_string(img.height()) + "x" + std::to_string(img.width()),
                {{"path", a.pred2d}});
  }
  const LabelSet labels = backproject_knn(pred, img, cloud, knn, map.ignore_id());
  save_labels(a.out, to_raw(labels, map));
  json j = {{"format", "lpskit-backproject"}, {"version", 1}, {"points", cloud.size()},
            {"k", knn.k}, {"window", {knn.window_h, knn.window_w}}, {"out", a.out}};
  std::cout << j.dump(2) << std::endl;
  return 0;
}

// ------------------------------------------------------------------- fuse

struct FuseArgs {
  std::string logits, instances, out, class_map;
  std::optional<double> c_t, o_t;
  std::optional<int> min_sa;
};

std::vector<InstancePrediction> load_instances(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kFormat, path + ": " + e.what(), {{"path", path}});
  }
  const auto bad = [&](const std::string& key, const std::string& what) {
    return Error(ErrorKind::kValidation, path + ": " + key + ": " + what,
                 {{"path", path}, {"key", key}});
  };
  if (!j.is_object() || j.value("format", "") != "lpskit-instances") {
    throw bad("format", "expected \"lpskit-instances\"");
  }
  if (j.value("version", 0) != 1) throw bad("version", "expected 1");
  if (!j.contains("instances") || !j["instances"].is_array()) {
    throw bad("instances", "expected a list");
  }
  const fs::path dir = fs::path(path).parent_path();
  std::vector<InstancePrediction> out;
  for (std::size_t i = 0; i < j["instances"].size(); ++i) {
    const json& e = j["instances"][i];
    const std::string key = "instances[" + std::to_string(i) + "]";
    try {
      InstancePrediction p;
      p.class_id = e.at("class_id").get<std::uint32_t>();
      p.score = e.at("score").get<float>();
      const auto box = e.at("bbox").get<std::vector<int>>();
      if (box.size() != 4) throw bad(key + ".bbox", "expected [row0, col0, row1, col1]");
      p.bbox = {box[0], box[1], box[2], box[3]};
      const auto shape = e.at("mask_shape").get<std::vector<int>>();
      if (shape.size() != 2 || shape[0] <= 0 || shape[1] <= 0) {
        throw bad(key + ".mask_shape", "expected [h, w] with positive extents");
      }
      const fs::path mask_path = dir / e.at("mask").get<std::string>();
      const std::string bytes = read_file(mask_path);
      const std::size_t n = static_cast<std::size_t>(shape[0]) * shape[1];
      if (bytes.size() != 4 * n) {
        throw Error(ErrorKind::kFormat,
                    mask_path.string() + " holds " + std::to_string(bytes.size()) +
                        " bytes, expected " + std::to_string(4 * n),
                    {{"path", mask_path.string()}, {"offset", std::to_string(bytes.size())}});
      }
      p.mask_logits = Tensor({1, shape[0], shape[1]});
      for (std::size_t k = 0; k < n; ++k) p.mask_logits[k] = get_f32(bytes, 4 * k);
      out.push_back(std::move(p));
    } catch (const json::exception& ex) {
      throw bad(key, ex.what());
    }
  }
  return out;
}

int cmd_fuse(const Globals& g, const FuseArgs& a) {
  const RunConfig rc = run_config(g);
  const ClassMap map = class_map_for(rc, a.class_map);
  FusionConfig fc = rc.fusion;
  if (a.c_t) fc.confidence_threshold = *a.c_t;
  if (a.o_t) fc.overlap_threshold = *a.o_t;
  if (a.min_sa) fc.min_stuff_area = *a.min_sa;
  fc.validate();
  const Tensor logits = find_record(decode_tensors(read_file(a.logits)), "logits", a.logits);
  const std::vector<InstancePrediction> inst =
      a.instances.empty() ? std::vector<InstancePrediction>{} : load_instances(a.instances);
  const FusionResult res = panoptic_fusion(logits, inst, fc, map);
  const PanopticLabel2D& pan = res.panoptic;
  write_file(a.out, encode_tensors({{"semantic", label_plane(pan.semantic, pan.height, pan.width)},
                                    {"instance", label_plane(pan.instance, pan.height, pan.width)},
                                    {"fused_logits", res.logits}}));
  const std::uint32_t kept = pan.instance.empty()
                                 ? 0
                                 : *std::max_element(pan.instance.begin(), pan.instance.end());
  json j = {{"format", "lpskit-fuse"},
            {"version", 1},
            {"instances_in", inst.size()},
            {"instance_channels", res.logits.dim(0) - static_cast<int>(res.stuff_classes.size())},
            {"instances_out", kept},
            {"out", a.out}};
  std::cout << j.dump(2) << std::endl;
  return 0;
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred_dir, gt_dir, class_map, split = "all", scan_dir, json_out, format = "table";
  std::optional<int> border_width;
};

std::vector<fs::path> label_files(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorKind::kData, dir + " is not a directory", {{"path", dir}});
  }
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".label") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_eval(const Globals& g, const EvalArgs& a) {
  const RunConfig rc = run_config(g);
  const ClassMap map = class_map_for(rc, a.class_map);
  const Split split = a.split == "stuff" ? Split::kStuff
                      : a.split == "thing" ? Split::kThing
                                           : Split::kAll;
  const int width = a.border_width.value_or(rc.border_width);
  const std::vector<fs::path> gts = label_files(a.gt_dir);
  std::vector<SegmentMatch> matches(gts.size());
  std::vector<std::map<std::uint32_t, IouCounts>> borders(gts.size());
  parallel_for(gts.size(), g.jobs, [&](std::size_t i) {
    const fs::path pred_path = fs::path(a.pred_dir) / gts[i].filename();
    const LabelSet gt = remap_and_filter(load_labels(gts[i]), map);
    const LabelSet pred = to_learning(load_labels(pred_path), map);
    if (pred.size() != gt.size()) {
      throw Error(ErrorKind::kData,
                  pred_path.string() + " has " + std::to_string(pred.size()) +
                      " labels, ground truth " + std::to_string(gt.size()),
                  {{"path", pred_path.string()}});
    }
    matches[i] = match_segments(pred, gt, map);
    if (!a.scan_dir.empty()) {
      const fs::path scan_path =
          fs::path(a.scan_dir) / (gts[i].stem().string() + ".bin");
      const RangeImage img = project(load_scan(scan_path), rc.pipeline.projection);
      borders[i] = border_counts(project_labels(img, pred, map.ignore_id()),
                                 project_labels(img, gt, map.ignore_id()), width, map);
    }
  });
  SegmentMatch total;
  std::map<std::uint32_t, IouCounts> band;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    total.merge(matches[i]);
    for (const auto& [cls, c] : borders[i]) {
      band[cls].intersection += c.intersection;
      band[cls].union_count += c.union_count;
    }
  }
  EvalReport report = panoptic_scores(total, map);
  for (const auto& [cls, c] : band) {
    report.border_iou[cls] =
        static_cast<double>(c.intersection) / static_cast<double>(c.union_count);
  }
  const std::string js = report_json(report, map, split);
  if (!a.json_out.empty()) write_file(a.json_out, js);
  if (a.format == "json") {
    std::cout << js;
  } else {
    std::cout << "# lpskit " << kVersion << " eval, " << gts.size() << " scans, split "
              << a.split << "\n"
              << report_table(report, map, split);
  }
  return 0;
}

// ----------------------------------------------------------- pseudo-label

struct PseudoArgs {
  std::string scans, checkpoint, grid, val_scans, val_gt, out_dir, class_map;
  double pq_cutoff = 0.0;
  int p_limit = 0;
};

std::vector<fs::path> scan_files(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorKind::kData, dir + " is not a directory", {{"path", dir}});
  }
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".bin") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_pseudo(const Globals& g, const PseudoArgs& a) {
  const RunConfig rc = run_config(g);
  const ClassMap map = class_map_for(rc, a.class_map);
  PLGConfig plg{a.pq_cutoff, a.p_limit};
  plg.validate();
  HeadConfig hc;
  hc.num_classes = map.num_classes();
  SemanticNet<float> net(hc, rc.seed);
  load_params(net.params(), a.checkpoint);
  const ControlGrid grid = load_control_grid(a.grid);
  const PipelineConfig& pc = rc.pipeline;

  // Forward passes do not depend on the control parameters; run them once.
  const std::vector<fs::path> val =
      scan_files(a.val_scans.empty() ? a.val_gt : a.val_scans);
  std::vector<PointCloud> clouds(val.size());
  std::vector<ScanLogits> cached(val.size());
  std::vector<LabelSet> gts(val.size());
  parallel_for(val.size(), g.jobs, [&](std::size_t i) {
    clouds[i] = load_scan(val[i]);
    cached[i] = scan_logits(net, clouds[i], pc);
    gts[i] = remap_and_filter(
        load_labels(fs::path(a.val_gt) / (val[i].stem().string() + ".label")), map);
  });
  const auto evaluate = [&](const ControlParams& params) {
    SegmentMatch total;
    for (std::size_t i = 0; i < val.size(); ++i) {
      total.merge(match_segments(labels_from_logits(cached[i], clouds[i], map, params, pc),
                                 gts[i], map));
    }
    const EvalReport r = panoptic_scores(total, map);
    ControlEval e;
    e.pq = r.pq;
    for (const auto& [cls, s] : r.per_class) {
      if (!s.thing) continue;
      e.tp += s.tp;
      e.fp += s.fp;
    }
    return e;
  };
  const GridSearchResult best = grid_search_control(evaluate, grid, plg, g.jobs);

  const auto runner = [&](const PointCloud& cloud, const ControlParams& params) {
    return labels_from_logits(scan_logits(net, cloud, pc), cloud, map, params, pc);
  };
  const PseudoManifest manifest = generate_pseudo_labels(runner, scan_files(a.scans), best.params,
                                                         plg, map, a.out_dir, g.jobs);
  json evals = json::array();
  for (std::size_t i = 0; i < best.evaluations.size(); ++i) {
    const ControlEval& e = best.evaluations[i];
    evals.push_back({{"index", i}, {"tp", e.tp}, {"fp", e.fp}, {"pq", e.pq}});
  }
  std::size_t failed = 0;
  for (const auto& e : manifest.entries) failed += !e.error.empty();
  json j = {{"format", "lpskit-pseudo-label"},
            {"version", 1},
            {"best_index", best.index},
            {"best_params", json::parse(best.params.to_json())},
            {"fingerprint", manifest.fingerprint},
            {"ratio", best.ratio},
            {"evaluations", evals},
            {"scans", manifest.entries.size()},
            {"failed", failed},
            {"manifest", (fs::path(a.out_dir) / "manifest.json").string()}};
  std::cout << j.dump(2) << std::endl;
  return 0;
}

// -------------------------------------------------------------- train-toy

struct TrainArgs {
  int steps = 500, scenes = 5, height = 32, width = 64, pseudo_steps = 0;
  double lr = 0.01;
  std::uint64_t scene_seed = 7;
  std::string checkpoint;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  const RunConfig rc = run_config(g);
  require_divisible_by_32({a.height, a.width}, "toy scene extent");
  if (a.steps < 1 || a.scenes < 1 || !(a.lr > 0.0) || a.pseudo_steps < 0) {
    throw Error(ErrorKind::kValidation, "steps, scenes and lr must be positive",
                {{"key", "train-toy"}});
  }
  const std::vector<ToyScene> scenes = make_toy_scenes(a.scenes, a.height, a.width, a.scene_seed);
  std::vector<ToyScene> pseudo;
  if (a.pseudo_steps > 0) {
    pseudo = make_toy_scenes(a.scenes, a.height, a.width, a.scene_seed + 1);
  }
  SemanticNet<float> net(HeadConfig{}, rc.seed);
  TrainOptions opt;
  opt.steps = a.steps;
  opt.lr = a.lr;
  opt.pseudo_steps = a.pseudo_steps;
  std::printf("# lpskit %s train-toy seed=%llu scenes=%d size=%dx%d\n", kVersion,
              static_cast<unsigned long long>(rc.seed), a.scenes, a.height, a.width);
  std::printf("step,loss,pixel,lovasz\n");
  train_toy(
      net, scenes, opt,
      [](const TrainStep& s) {
        std::printf("%d,%.6f,%.6f,%.6f\n", s.step, s.loss, s.pixel, s.lovasz);
      },
      pseudo);
  std::printf("# accuracy,%.6f\n", toy_accuracy(net, scenes));
  if (!a.checkpoint.empty()) save_params(net.params(), a.checkpoint);
  std::fflush(stdout);
  return 0;
}

// --------------------------------------------------------------- gradcheck

struct GradArgs {
  int seeds = 20;
  double eps = 1e-4;
  double tolerance = 1e-3;
  std::vector<std::string> ops;
  bool timing = false;
};

int cmd_gradcheck(const Globals& g, const GradArgs& a) {
  const RunConfig rc = run_config(g);
  GradCheckOptions opt;
  opt.eps = a.eps;
  const auto reports = run_gradient_suite(a.seeds, rc.seed, a.ops, opt);
  json ops = json::array();
  bool ok = true;
  for (const auto& r : reports) {
    json o = {{"op", r.op},
              {"seeds", r.seeds},
              {"max_rel_error", r.max_rel_error},
              {"checked", r.checked},
              {"skipped", r.skipped},
              {"pass", r.max_rel_error < a.tolerance}};
    if (a.timing) o["seconds"] = r.seconds;
    ok = ok && r.max_rel_error < a.tolerance;
    ops.push_back(std::move(o));
  }
  json j = {{"format", "lpskit-gradcheck"}, {"version", 1},        {"eps", a.eps},
            {"tolerance", a.tolerance},     {"seed", rc.seed},      {"ops", ops}};
  std::cout << j.dump(2) << std::endl;
  if (!ok) {
    return report_error(ErrorKind::kNumeric, "gradient check above tolerance",
                        {{"tolerance", std::to_string(a.tolerance)}});
  }
  return 0;
}

// First token that is neither an option nor the value of a global option.
std::string first_word(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string t = argv[i];
    if (t == "--config" || t == "--seed" || t == "--jobs") {
      ++i;
    } else if (t.empty() || t[0] != '-') {
      return t;
    }
  }
  return {};
}

int run(int argc, char** argv) {
  CLI::App app{"lpskit " + std::string(kVersion) + ": LiDAR panoptic segmentation toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Run configuration JSON")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for every randomised component");
  app.add_option("--jobs", g.jobs, "Worker threads for per-scan work")
      ->check(CLI::PositiveNumber);

  ProjectArgs pa;
  auto* project = app.add_subcommand("project", "Project a .bin scan to a range image");
  project->add_option("--scan", pa.scan, "Input .bin scan")->required();
  project->add_option("--labels", pa.labels, "Optional .label file to project alongside");
  project->add_option("--class-map", pa.class_map, "Class map JSON (needed with --labels)");
  project->add_option("--width", pa.width, "Image width W (default 2048)");
  project->add_option("--rows", pa.rows, "Maximum number of rows (default 64)");
  project->add_option("--threshold-deg", pa.threshold_deg,
                      "Yaw drop that starts a new row, degrees (default 310)");
  project->add_option("--out", pa.out, "Output sidecar .json; planes are written next to it")
      ->required();

  BackprojectArgs ba;
  auto* backproject =
      app.add_subcommand("backproject", "Transfer 2D panoptic labels to points by kNN vote");
  backproject->add_option("--pred2d", ba.pred2d,
                          "2D prediction: tensor file from fuse, or a labelled image sidecar")
      ->required();
  backproject->add_option("--image", ba.image, "Range-image sidecar written by project")
      ->required();
  backproject->add_option("--scan", ba.scan, "The .bin scan the image was projected from")
      ->required();
  backproject->add_option("--class-map", ba.class_map, "Class map JSON");
  backproject->add_option("--k", ba.k, "Neighbours that vote (default 5)");
  backproject->add_option("--window", ba.window, "Odd search window side (default 5)");
  backproject->add_option("--out", ba.out, "Output .label file")->required();

  FuseArgs fa;
  auto* fuse = app.add_subcommand("fuse", "Fuse semantic logits with instance predictions");
  fuse->add_option("--semantic-logits", fa.logits, "Tensor file with a (C, H, W) 'logits'")
      ->required();
  fuse->add_option("--instances", fa.instances, "Instance list JSON (lpskit-instances v1)");
  fuse->add_option("--class-map", fa.class_map, "Class map JSON");
  fuse->add_option("--confidence-threshold", fa.c_t, "c_t (default 0.5)");
  fuse->add_option("--overlap-threshold", fa.o_t, "o_t (default 0.5)");
  fuse->add_option("--min-stuff-area", fa.min_sa, "min_sa in pixels (default 128)");
  fuse->add_option("--out", fa.out, "Output tensor file")->required();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "PQ/SQ/RQ/PQ-dagger/mIoU over .label directories");
  eval->add_option("--pred-dir", ea.pred_dir, "Predicted .label files")->required();
  eval->add_option("--gt-dir", ea.gt_dir, "Ground-truth .label files")->required();
  eval->add_option("--class-map", ea.class_map, "Class map JSON");
  eval->add_option("--split", ea.split, "Classes to report")
      ->check(CLI::IsMember({"all", "stuff", "thing"}));
  eval->add_option("--border-width", ea.border_width, "Border IoU band width in pixels");
  eval->add_option("--scan-dir", ea.scan_dir, ".bin scans, enables border IoU");
  eval->add_option("--json", ea.json_out, "Also write the JSON report here");
  eval->add_option("--format", ea.format, "stdout format")
      ->check(CLI::IsMember({"table", "json"}));

  PseudoArgs psa;
  auto* pseudo = app.add_subcommand("pseudo-label", "Grid search then pseudo-label scans");
  pseudo->add_option("--scans", psa.scans, "Directory of unlabeled .bin scans")->required();
  pseudo->add_option("--checkpoint", psa.checkpoint, "Network parameters from train-toy")
      ->required();
  pseudo->add_option("--grid", psa.grid, "Control-parameter grid JSON")->required();
  pseudo->add_option("--pq-cutoff", psa.pq_cutoff, "Minimum validation PQ")->required();
  pseudo->add_option("--p-limit", psa.p_limit, "Minimum points per kept instance")->required();
  pseudo->add_option("--val-gt", psa.val_gt, "Validation .label files for the grid search")
      ->required();
  pseudo->add_option("--val-scans", psa.val_scans,
                     "Validation .bin scans with the same stems (default: --val-gt)");
  pseudo->add_option("--class-map", psa.class_map, "Class map JSON");
  pseudo->add_option("--out-dir", psa.out_dir, "Output directory")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train-toy", "Train the semantic network on synthetic scenes");
  train->add_option("--steps", ta.steps, "SGD steps");
  train->add_option("--scenes", ta.scenes, "Number of synthetic scenes");
  train->add_option("--height", ta.height, "Scene height (multiple of 32)");
  train->add_option("--width", ta.width, "Scene width (multiple of 32)");
  train->add_option("--lr", ta.lr, "Learning rate");
  train->add_option("--scene-seed", ta.scene_seed, "Seed of the scene generator");
  train->add_option("--pseudo-steps", ta.pseudo_steps,
                    "Initial steps on a second scene set standing in for pseudo labels");
  train->add_option("--checkpoint-out,--checkpoint", ta.checkpoint, "Write parameters here");

  GradArgs ga;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference checks of every operator");
  grad->add_option("--seeds", ga.seeds, "Random cases per operator");
  grad->add_option("--eps", ga.eps, "Central-difference step in [1e-4, 1e-2]");
  grad->add_option("--tolerance", ga.tolerance, "Maximum relative error");
  grad->add_option("--op", ga.ops, "Restrict to these operators")
      ->check(CLI::IsMember(gradient_suite_ops()));
  grad->add_flag("--timing", ga.timing, "Include wall-clock seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    const std::string word = first_word(argc, argv);
    if (!word.empty() && app.get_subcommand_no_throw(word) == nullptr) {
      return report_error(ErrorKind::kValidation, "unknown subcommand " + word,
                          {{"subcommand", word}});
    }
    return report_error(ErrorKind::kValidation, e.what(), {{"cli", e.get_name()}});
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*project) return cmd_project(g, pa);
    if (*backproject) return cmd_backproject(g, ba);
    if (*fuse) return cmd_fuse(g, fa);
    if (*eval) return cmd_eval(g, ea);
    if (*pseudo) return cmd_pseudo(g, psa);
    if (*train) return cmd_train(g, ta);
    if (*grad) return cmd_gradcheck(g, ga);
  } catch (const Error& e) {
    return report_error(e.kind(), e.what(), e.details());
  } catch (const std::exception& e) {
    return report_error(ErrorKind::kData, e.what());
  }
  return 1;
}

}  // namespace
}  // namespace lps

int main(int argc, char** argv) { return lps::run(argc, argv); }
