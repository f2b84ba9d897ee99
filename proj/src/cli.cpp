#include "yoeo/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "yoeo/error.hpp"
#include "yoeo/metrics.hpp"
#include "yoeo/network.hpp"
#include "yoeo/pipeline.hpp"
#include "yoeo/random.hpp"
#include "yoeo/scene_io.hpp"

namespace fs = std::filesystem;

namespace yoeo {

namespace {

constexpr int kPredictionFormatVersion = 1;

struct OptionSpec {
  std::string key;
  Json default_value;  // null: no default (must be supplied)
  std::string help;
};

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::vector<OptionSpec> common_options() {
  return {{"seed", nullptr, "RNG seed (u64)"},
          {"out", "", "output directory (default: runs/<command>-<timestamp>)"},
          {"jobs", 1, "worker threads"}};
}

std::vector<OptionSpec> pipeline_options() {
  return {{"oracle", false, "use ground-truth oracle predictions"},
          {"weights", "", "model weights file"},
          {"neighbors", 16, "k of the k-NN feature"},
          {"offset_sigma", 0.0, "oracle offset noise (m)"},
          {"npcs_sigma", 0.0, "oracle NPCS noise (canonical units)"},
          {"flip_prob", 0.0, "oracle semantic flip probability"},
          {"bandwidth", 0.05, "vote clustering radius (m)"},
          {"min_points", 30, "smallest instance kept"},
          {"ransac_iterations", 128, "RANSAC hypotheses per instance"},
          {"inlier_threshold", 0.02, "RANSAC inlier distance (m)"},
          {"min_inlier_fraction", 0.25, "RANSAC consensus floor"}};
}

std::vector<OptionSpec> command_options(const std::string& cmd) {
  std::vector<OptionSpec> opts = common_options();
  auto add = [&opts](std::vector<OptionSpec> more) { opts.insert(opts.end(), more.begin(), more.end()); };
  if (cmd == "generate") {
    add({{"count", 10, "number of scenes"},
         {"points_per_scene", 4096, "points per scene"},
         {"objects_per_scene", 1, "objects per scene"},
         {"min_part_points", 48, "minimum sampled points per part"},
         {"drawers_min", 0, ""}, {"drawers_max", 2, ""},
         {"lids_min", 0, ""}, {"lids_max", 1, ""},
         {"handles_min", 0, ""}, {"handles_max", 2, ""},
         {"partial_view", false, "cull to a single-view z-buffer"},
         {"export_ply", false, "also write one PLY per scene"}});
  } else if (cmd == "train") {
    add({{"data", "", "dataset directory (from generate)"},
         {"epochs", 60, ""},
         {"lr", 0.01, "learning rate"},
         {"momentum", 0.9, ""},
         {"batch_scenes", 1, "scenes per SGD step"},
         {"hidden1", 64, ""},
         {"hidden2", 128, ""},
         {"neighbors", 16, "k of the k-NN feature"},
         {"train_points", 512, "points sampled per scene (0 = all)"},
         {"w_sem", 1.0, ""}, {"w_center", 1.0, ""}, {"w_npcs", 1.0, ""},
         {"focal_alpha", 0.25, ""}, {"focal_gamma", 2.0, ""},
         {"freeze", Json::array(), "head to freeze: sem, center or npcs (repeatable)"}});
  } else if (cmd == "infer") {
    add({{"data", "", "dataset directory"}});
    add(pipeline_options());
  } else if (cmd == "eval") {
    add({{"data", "", "dataset directory"}, {"pred", "", "predictions.json from infer"}});
  } else if (cmd == "bench") {
    add({{"data", "", "dataset directory"}, {"runs", 5, "timed passes (median reported)"}});
    add(pipeline_options());
  }
  return opts;
}

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, "config field '" + key + "': " + what);
}

// Converts `value` to the JSON type of `proto` (the option default).
Json coerce(const std::string& key, const Json& proto, const Json& value) {
  if (proto.is_null()) {  // seed
    if (value.is_number_unsigned()) return value;
    if (value.is_number_integer() && value.get<long long>() >= 0) return value.get<std::uint64_t>();
    if (value.is_string()) {
      try {
        std::size_t pos = 0;
        const std::string s = value.get<std::string>();
        const unsigned long long v = std::stoull(s, &pos);
        if (pos == s.size() && s.front() != '-') return static_cast<std::uint64_t>(v);
      } catch (const std::exception&) {
      }
    }
    config_error(key, "expected an unsigned 64-bit integer");
  }
  if (value.is_string() && !proto.is_string() && !proto.is_array()) {
    const std::string s = value.get<std::string>();
    try {
      std::size_t pos = 0;
      if (proto.is_boolean()) {
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        config_error(key, "expected true or false");
      }
      if (proto.is_number_integer()) {
        const long long v = std::stoll(s, &pos);
        if (pos == s.size()) return v;
      } else if (proto.is_number_float()) {
        const double v = std::stod(s, &pos);
        if (pos == s.size()) return v;
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
    }
    config_error(key, "cannot parse '" + s + "'");
  }
  if (proto.is_boolean() && value.is_boolean()) return value;
  if (proto.is_number_integer() && value.is_number_integer()) return value;
  if (proto.is_number_float() && value.is_number()) return value.get<double>();
  if (proto.is_string() && value.is_string()) return value;
  if (proto.is_array() && value.is_array()) {
    for (const auto& v : value) {
      if (!v.is_string()) config_error(key, "expected a list of strings");
    }
    return value;
  }
  config_error(key, std::string("expected ") + proto.type_name() + ", got " + value.type_name());
}

struct Parsed {
  std::string command;
  Json config;
};

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return os.str();
}

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs))));
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += workers) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run, w);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

fs::path prepare_out(const Json& cfg, const std::string& command) {
  fs::path out = cfg.at("out").get<std::string>();
  if (out.empty()) out = fs::path("runs") / (command + "-" + timestamp());
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw Error(ErrorCode::Io, "cannot create output directory " + out.string());
  return out;
}

void require_seed(const Json& cfg) {
  if (cfg.at("seed").is_null()) config_error("seed", "required (use --seed or the config file)");
}

std::uint64_t seed_of(const Json& cfg) { return cfg.at("seed").get<std::uint64_t>(); }

struct Dataset {
  fs::path dir;
  std::vector<std::string> files;
  std::vector<Scene> scenes;
};

Dataset load_dataset(const Json& cfg, int jobs) {
  Dataset ds;
  ds.dir = cfg.at("data").get<std::string>();
  if (ds.dir.empty()) config_error("data", "dataset directory is required");
  const fs::path manifest = ds.dir / "manifest.json";
  if (!fs::exists(manifest)) throw Error(ErrorCode::Io, "dataset not found: " + manifest.string() + " does not exist");
  const Json m = read_json_file(manifest);
  try {
    for (const auto& s : m.at("scenes")) ds.files.push_back(s.at("file").get<std::string>());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::FormatMismatch, manifest.string() + ": " + e.what());
  }
  if (ds.files.empty()) throw Error(ErrorCode::InvalidArgument, "dataset " + ds.dir.string() + " is empty");
  ds.scenes.resize(ds.files.size());
  parallel_for(ds.files.size(), jobs, [&](std::size_t i) { ds.scenes[i] = load_scene(ds.dir / ds.files[i]); });
  return ds;
}

std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// ------------------------------------------------------------------ generate

int cmd_generate(const Json& cfg, std::ostream& out) {
  require_seed(cfg);
  const long long count = cfg.at("count").get<long long>();
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "count must be ≥ 1");
  GenConfig gen;
  gen.rng_seed = seed_of(cfg);
  gen.points_per_scene = cfg.at("points_per_scene").get<int>();
  gen.objects_per_scene = cfg.at("objects_per_scene").get<int>();
  gen.min_part_points = cfg.at("min_part_points").get<int>();
  gen.drawers = {cfg.at("drawers_min").get<int>(), cfg.at("drawers_max").get<int>()};
  gen.lids = {cfg.at("lids_min").get<int>(), cfg.at("lids_max").get<int>()};
  gen.handles = {cfg.at("handles_min").get<int>(), cfg.at("handles_max").get<int>()};
  gen.partial_view = cfg.at("partial_view").get<bool>();
  gen.validate();

  const fs::path dir = prepare_out(cfg, "generate");
  const bool ply = cfg.at("export_ply").get<bool>();
  Json scenes = Json::array();
  std::vector<std::string> names(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::ostringstream name;
    name << "scene_" << std::setw(4) << std::setfill('0') << i;
    names[i] = name.str();
    scenes.push_back(Json{{"file", names[i] + ".json"}, {"index", i}, {"seed", derive_seed(gen.rng_seed, i)}});
  }
  parallel_for(names.size(), cfg.at("jobs").get<int>(), [&](std::size_t i) {
    const Scene scene = generate_scene(gen, i);
    save_scene(dir / (names[i] + ".json"), scene);
    if (ply) write_ply(dir / (names[i] + ".ply"), scene);
  });
  write_json_file(dir / "manifest.json", Json{{"version", kSceneFormatVersion}, {"seed", gen.rng_seed}, {"count", count}, {"scenes", scenes}});
  write_json_file(dir / "config.json", cfg);
  out << "wrote " << count << " scenes to " << dir.string() << '\n';
  return 0;
}

// ------------------------------------------------------------------ train

int cmd_train(const Json& cfg, std::ostream& out) {
  require_seed(cfg);
  const int jobs = cfg.at("jobs").get<int>();
  const Dataset ds = load_dataset(cfg, jobs);
  const std::uint64_t seed = seed_of(cfg);
  const int neighbors = cfg.at("neighbors").get<int>();
  const int train_points = cfg.at("train_points").get<int>();

  TrainConfig tc;
  tc.learning_rate = cfg.at("lr").get<double>();
  tc.momentum = cfg.at("momentum").get<double>();
  tc.epochs = cfg.at("epochs").get<int>();
  tc.batch_scenes = cfg.at("batch_scenes").get<int>();
  tc.weights = {cfg.at("w_sem").get<double>(), cfg.at("w_center").get<double>(), cfg.at("w_npcs").get<double>()};
  tc.focal = {cfg.at("focal_alpha").get<double>(), cfg.at("focal_gamma").get<double>()};
  tc.rng_seed = seed;
  for (const auto& f : cfg.at("freeze")) {
    const std::string head = f.get<std::string>();
    if (head == "sem") {
      tc.heads.semantic = false;
    } else if (head == "center") {
      tc.heads.center = false;
    } else if (head == "npcs") {
      tc.heads.npcs = false;
    } else {
      config_error("freeze", "unknown head '" + head + "' (expected sem, center or npcs)");
    }
  }
  tc.validate();

  std::vector<TrainingExample> examples(ds.scenes.size());
  parallel_for(examples.size(), jobs, [&](std::size_t i) {
    examples[i] = make_training_example(ds.scenes[i], neighbors, train_points, derive_seed(seed, i));
  });

  const fs::path dir = prepare_out(cfg, "train");
  write_json_file(dir / "config.json", cfg);
  const fs::path weights = dir / "weights.bin";
  std::ofstream csv(dir / "loss_curve.csv", std::ios::binary);
  if (!csv) throw Error(ErrorCode::Io, "cannot write loss_curve.csv");
  csv << "epoch,total,sem,center,npcs\n";

  const ModelParams init = ModelParams::random(seed, cfg.at("hidden1").get<int>(), cfg.at("hidden2").get<int>(), kNumClasses, neighbors);
  // The checkpoint is rewritten after every finished epoch, so an aborted
  // run leaves the last good weights behind.
  save_weights(weights, init);
  const TrainResult result = train(init, examples, tc, [&](int epoch, const LossBreakdown& l, const ModelParams& p) {
    csv << epoch + 1 << ',' << csv_number(l.total) << ',' << csv_number(l.semantic) << ',' << csv_number(l.center)
        << ',' << csv_number(l.npcs) << '\n';
    csv.flush();
    save_weights(weights, p);
  });
  out << "trained " << result.curve.size() << " epochs; loss " << result.curve.front().total << " -> "
      << result.curve.back().total << "; weights at " << weights.string() << '\n';
  return 0;
}

// ------------------------------------------------------------------ infer

struct Predictor {
  bool oracle = true;
  ModelParams model;
  OracleNoise noise;
  std::uint64_t seed = 0;

  PerPointPrediction predict(const Scene& scene, std::size_t index) const {
    if (oracle) {
      OracleNoise n = noise;
      n.rng_seed = derive_seed(seed, index);
      return oracle_predict(scene, n);
    }
    return forward(model, scene.points);
  }
};

Predictor make_predictor(const Json& cfg, std::uint64_t seed) {
  Predictor p;
  p.seed = seed;
  const std::string weights = cfg.at("weights").get<std::string>();
  p.oracle = cfg.at("oracle").get<bool>() || weights.empty();
  if (cfg.at("oracle").get<bool>() && !weights.empty()) {
    config_error("oracle", "--oracle and --weights are mutually exclusive");
  }
  if (!p.oracle) p.model = load_weights(weights, cfg.at("neighbors").get<int>());
  p.noise = {cfg.at("offset_sigma").get<double>(), cfg.at("npcs_sigma").get<double>(), cfg.at("flip_prob").get<double>(), 0};
  p.noise.validate();
  return p;
}

PipelineParams make_pipeline(const Json& cfg, std::uint64_t seed) {
  PipelineParams pp;
  pp.cluster.bandwidth = cfg.at("bandwidth").get<double>();
  pp.cluster.min_points = cfg.at("min_points").get<int>();
  pp.ransac.max_iterations = cfg.at("ransac_iterations").get<int>();
  pp.ransac.inlier_threshold = cfg.at("inlier_threshold").get<double>();
  pp.ransac.min_inlier_fraction = cfg.at("min_inlier_fraction").get<double>();
  pp.ransac.rng_seed = seed;
  pp.cluster.validate();
  pp.ransac.validate();
  return pp;
}

Json detection_to_json(const PartDetection& d) {
  Json j{{"class", d.instance.semantic_class},
         {"pose", sim3_to_json(d.pose.transform)},
         {"size", vec3_to_json(d.pose.size)},
         {"axis", d.pose.axis ? axis_to_json(*d.pose.axis) : Json(nullptr)},
         {"inliers", d.pose.inliers},
         {"points", d.instance.point_indices}};
  return j;
}

PartDetection detection_from_json(const Json& j) {
  PartDetection d;
  d.instance.semantic_class = j.at("class").get<int>();
  d.instance.point_indices = j.at("points").get<std::vector<std::size_t>>();
  d.pose.transform = sim3_from_json(j.at("pose"));
  d.pose.size = vec3_from_json(j.at("size"));
  if (!j.at("axis").is_null()) d.pose.axis = axis_from_json(j.at("axis"));
  d.pose.inliers = j.at("inliers").get<std::size_t>();
  return d;
}

int cmd_infer(const Json& cfg, std::ostream& out) {
  require_seed(cfg);
  const int jobs = cfg.at("jobs").get<int>();
  const std::uint64_t seed = seed_of(cfg);
  const Predictor predictor = make_predictor(cfg, seed);
  const PipelineParams pp = make_pipeline(cfg, seed);
  const Dataset ds = load_dataset(cfg, jobs);

  std::vector<Json> per_scene(ds.scenes.size());
  parallel_for(ds.scenes.size(), jobs, [&](std::size_t i) {
    const PerPointPrediction pred = predictor.predict(ds.scenes[i], i);
    PipelineParams scene_pp = pp;
    scene_pp.ransac.rng_seed = derive_seed(seed, i);
    Json parts = Json::array();
    for (const auto& d : estimate_parts(ds.scenes[i].points, pred, scene_pp)) parts.push_back(detection_to_json(d));
    per_scene[i] = Json{{"scene", ds.files[i]}, {"parts", parts}};
  });

  const fs::path dir = prepare_out(cfg, "infer");
  write_json_file(dir / "config.json", cfg);
  write_json_file(dir / "predictions.json",
                  Json{{"version", kPredictionFormatVersion},
                       {"source", predictor.oracle ? "oracle" : "weights"},
                       {"model_params", predictor.oracle ? 0 : predictor.model.parameter_count()},
                       {"scenes", per_scene}},
                  -1);
  out << "wrote predictions for " << per_scene.size() << " scenes to " << (dir / "predictions.json").string() << '\n';
  return 0;
}

// ------------------------------------------------------------------ eval

int cmd_eval(const Json& cfg, std::ostream& out) {
  require_seed(cfg);
  const Dataset ds = load_dataset(cfg, cfg.at("jobs").get<int>());
  const std::string pred_path = cfg.at("pred").get<std::string>();
  if (pred_path.empty()) config_error("pred", "predictions file is required");
  const Json preds = read_json_file(pred_path);

  std::map<std::string, const Json*> by_scene;
  double param_millions = 0.0;
  try {
    if (preds.at("version").get<int>() != kPredictionFormatVersion) {
      throw Error(ErrorCode::FormatMismatch, pred_path + ": unsupported predictions version");
    }
    param_millions = preds.at("model_params").get<double>() / 1e6;
    for (const auto& s : preds.at("scenes")) by_scene[s.at("scene").get<std::string>()] = &s;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::FormatMismatch, pred_path + ": " + e.what());
  }
  for (const auto& [name, _] : by_scene) {
    if (std::find(ds.files.begin(), ds.files.end(), name) == ds.files.end()) {
      throw Error(ErrorCode::SceneMismatch, "prediction for unknown scene " + name);
    }
  }

  std::vector<SceneEvaluation> evals(ds.scenes.size());
  parallel_for(ds.scenes.size(), cfg.at("jobs").get<int>(), [&](std::size_t i) {
    std::vector<PartDetection> dets;
    const auto it = by_scene.find(ds.files[i]);
    if (it != by_scene.end()) {
      try {
        for (const auto& p : it->second->at("parts")) dets.push_back(detection_from_json(p));
      } catch (const Json::exception& e) {
        throw Error(ErrorCode::FormatMismatch, pred_path + ": scene " + ds.files[i] + ": " + e.what());
      }
      for (const auto& d : dets) {
        for (std::size_t idx : d.instance.point_indices) {
          if (idx >= ds.scenes[i].size()) {
            throw Error(ErrorCode::SceneMismatch, "prediction point index out of range for " + ds.files[i]);
          }
        }
      }
    }
    evals[i] = evaluate_scene(dets, ds.scenes[i]);
  });
  EvalReport report = summarize(evals);
  report.param_millions = param_millions;

  const fs::path dir = prepare_out(cfg, "eval");
  write_json_file(dir / "config.json", cfg);
  write_json_file(dir / "report.json", report_to_json(report));
  const std::string table = report_table(report);
  std::ofstream txt(dir / "report.txt", std::ios::binary);
  txt << table;
  if (!txt) throw Error(ErrorCode::Io, "cannot write report.txt");
  out << table;
  return 0;
}

// ------------------------------------------------------------------ bench

int cmd_bench(const Json& cfg, std::ostream& out) {
  const std::uint64_t seed = cfg.at("seed").is_null() ? 0 : seed_of(cfg);
  const Predictor predictor = make_predictor(cfg, seed);
  const PipelineParams pp = make_pipeline(cfg, seed);
  const Dataset ds = load_dataset(cfg, cfg.at("jobs").get<int>());
  if (ds.scenes.size() < 10) throw Error(ErrorCode::InvalidArgument, "bench needs at least 10 scenes");

  // Oracle runs time the geometry back-end only; predictions are made up front.
  std::map<const Scene*, PerPointPrediction> cached;
  if (predictor.oracle) {
    for (std::size_t i = 0; i < ds.scenes.size(); ++i) cached[&ds.scenes[i]] = predictor.predict(ds.scenes[i], i);
  }
  auto run = [&](const Scene& scene) {
    if (predictor.oracle) {
      estimate_parts(scene.points, cached.at(&scene), pp);
    } else {
      estimate_parts(scene.points, forward(predictor.model, scene.points), pp);
    }
  };
  const int runs = cfg.at("runs").get<int>();
  const double hz = benchmark_throughput(run, ds.scenes, runs);

  const fs::path dir = prepare_out(cfg, "bench");
  write_json_file(dir / "config.json", cfg);
  write_json_file(dir / "bench.json", Json{{"scenes", ds.scenes.size()},
                                           {"runs", runs},
                                           {"mode", predictor.oracle ? "geometry" : "network+geometry"},
                                           {"throughput_hz", hz},
                                           {"ms_per_scene", 1000.0 / hz}});
  out << std::fixed << std::setprecision(1) << "throughput " << hz << " Hz (" << std::setprecision(3) << 1000.0 / hz
      << " ms/scene, " << (predictor.oracle ? "geometry only" : "network + geometry") << ")\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    CLI::App app{"Single-stage articulated part pose estimation toolkit"};
    app.require_subcommand(1);
    const std::vector<std::string> commands = {"generate", "train", "infer", "eval", "bench"};
    std::map<std::string, std::map<std::string, std::string>> raw;
    std::map<std::string, std::vector<std::string>> raw_lists;
    std::map<std::string, bool> raw_flags;
    std::map<std::string, std::string> config_paths;
    std::map<std::string, std::map<std::string, CLI::Option*>> handles;

    for (const auto& cmd : commands) {
      CLI::App* sub = app.add_subcommand(cmd);
      sub->add_option("--config", config_paths[cmd], "JSON config file; flags override it");
      for (const auto& spec : command_options(cmd)) {
        const std::string flag = "--" + dashed(spec.key);
        CLI::Option* opt;
        if (spec.default_value.is_boolean()) {
          opt = sub->add_flag(flag, raw_flags[cmd + "." + spec.key], spec.help);
        } else if (spec.default_value.is_array()) {
          opt = sub->add_option(flag, raw_lists[cmd + "." + spec.key], spec.help);
        } else {
          opt = sub->add_option(flag, raw[cmd][spec.key], spec.help);
        }
        handles[cmd][spec.key] = opt;
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      for (CLI::App* sub : app.get_subcommands()) {
        if (sub->get_help_ptr() && sub->get_help_ptr()->count() > 0) {
          out << sub->help();
          return 0;
        }
      }
      throw Error(ErrorCode::InvalidArgument, e.what());
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string cmd = sub->get_name();
    const std::vector<OptionSpec> specs = command_options(cmd);

    Json cfg = Json::object();
    for (const auto& spec : specs) cfg[spec.key] = spec.default_value;
    if (!config_paths[cmd].empty()) {
      const Json file = read_json_file(config_paths[cmd]);
      if (!file.is_object()) throw Error(ErrorCode::InvalidArgument, config_paths[cmd] + ": config must be a JSON object");
      for (const auto& [key, value] : file.items()) {
        const auto it = std::find_if(specs.begin(), specs.end(), [&](const OptionSpec& s) { return s.key == key; });
        if (it == specs.end()) config_error(key, "unknown for command '" + cmd + "'");
        cfg[key] = coerce(key, it->default_value, value);
      }
    }
    for (const auto& spec : specs) {
      CLI::Option* opt = handles[cmd][spec.key];
      if (opt->count() == 0) continue;
      if (spec.default_value.is_boolean()) {
        cfg[spec.key] = raw_flags[cmd + "." + spec.key];
      } else if (spec.default_value.is_array()) {
        cfg[spec.key] = raw_lists[cmd + "." + spec.key];
      } else {
        cfg[spec.key] = coerce(spec.key, spec.default_value, Json(raw[cmd][spec.key]));
      }
    }
    if (cfg.at("jobs").get<int>() < 1) config_error("jobs", "must be >= 1");

    if (cmd == "generate") return cmd_generate(cfg, out);
    if (cmd == "train") return cmd_train(cfg, out);
    if (cmd == "infer") return cmd_infer(cfg, out);
    if (cmd == "eval") return cmd_eval(cfg, out);
    return cmd_bench(cfg, out);
  } catch (const Error& e) {
    err << "YOEO-E" << static_cast<int>(e.code()) << ": " << error_name(e.code()) << ": " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << "YOEO-E" << static_cast<int>(ErrorCode::InvalidArgument) << ": InvalidArgument: " << e.what() << '\n';
    return static_cast<int>(ErrorCode::InvalidArgument);
  }
}

}  // namespace yoeo
