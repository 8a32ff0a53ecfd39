// ngdf_cli: dataset generation, field training, level-set evaluation,
// planning and ablation suites.
//
// Every subcommand takes --config (JSON) and --out (directory). Values from
// the config file are overridden by flags given on the command line. The
// resolved settings are written to <out>/config.json and can be passed back
// through --config to reproduce a run. Wall times go to <out>/timing.txt and
// nowhere else.
//
// Exit codes: 0 success, 2 usage or config error, 3 runtime failure.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ngdf/ngdf.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace ngdf;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A subcommand's settings: each one is a CLI flag and a config key.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& desc) : app_(parent.add_subcommand(name, desc)) {
    app_->add_option("--config", config_path_, "JSON config; flags override its values");
    app_->add_option("--out", out_dir_, "output directory")->capture_default_str();
  }

  template <class T>
  CLI::Option* add(const std::string& key, T& var, const std::string& desc) {
    CLI::Option* opt;
    if constexpr (std::is_same_v<T, bool>)
      opt = app_->add_flag("--" + key, var, desc);
    else
      opt = app_->add_option("--" + key, var, desc)->capture_default_str();
    settings_.push_back({key, opt, [&var, key](const json& j) {
                           try {
                             var = j.get<T>();
                           } catch (const json::exception&) {
                             throw UsageError("config key '" + key + "' has the wrong type");
                           }
                         },
                         [&var, key](json& j) { j[key] = var; }});
    return opt;
  }

  CLI::App* app() const { return app_; }
  const fs::path& out() const { return out_; }

  /// Applies the config file under the command line, then creates the output
  /// directory and records the resolved settings there.
  void resolve() {
    if (!config_path_.empty()) {
      std::ifstream in(config_path_);
      if (!in) throw UsageError("cannot open config file: " + config_path_);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw UsageError("config file is not valid JSON: " + std::string(e.what()));
      }
      if (j.contains(app_->get_name()) && j[app_->get_name()].is_object()) j = j[app_->get_name()];
      if (!j.is_object()) throw UsageError("config file must hold a JSON object");
      for (const auto& [k, v] : j.items()) {
        auto it = std::find_if(settings_.begin(), settings_.end(), [&](const Setting& s) { return s.key == k; });
        if (it == settings_.end()) throw UsageError("unknown config key '" + k + "'");
        if (it->opt->count() == 0) it->load(v);
      }
    }
    out_ = out_dir_;
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw UsageError("cannot create output directory " + out_dir_ + ": " + ec.message());
    json resolved;
    for (const auto& s : settings_) s.dump(resolved);
    std::ofstream(out_ / "config.json") << resolved.dump(2) << '\n';
  }

 private:
  struct Setting {
    std::string key;
    CLI::Option* opt;
    std::function<void(const json&)> load;
    std::function<void(json&)> dump;
  };

  CLI::App* app_;
  std::string config_path_;
  std::string out_dir_ = "out";
  fs::path out_;
  std::vector<Setting> settings_;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

void write_timing(const fs::path& out, double seconds) {
  std::ofstream(out / "timing.txt") << "wall_seconds " << seconds << '\n' << "threads " << thread_count() << '\n';
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw UsageError(msg);
}

void require_file(const std::string& path, const std::string& what) {
  require(!path.empty(), "--" + what + " is required");
  require(fs::is_regular_file(path), what + " file not found: " + path);
}

/// `ring`, `ring2d` or a comma-separated list, one manifold per object id.
std::vector<GraspManifold> parse_manifolds(const std::string& spec) {
  std::vector<GraspManifold> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "ring")
      out.push_back(GraspManifold::ring());
    else if (item == "ring2d")
      out.push_back(GraspManifold::ring2d());
    else
      throw UsageError("unknown manifold '" + item + "' (expected ring or ring2d)");
  }
  require(!out.empty(), "--manifold is empty");
  return out;
}

ControlPointSet gripper_points(const std::string& path) {
  if (path.empty()) return ControlPointSet::parallel_jaw();
  require_file(path, "gripper");
  return load_control_points(path);
}

KinematicChain chain_from(const std::string& path) {
  if (path.empty()) return default_chain();
  require_file(path, "chain");
  return load_chain(path);
}

StepMode parse_step_mode(const std::string& s) {
  if (s == "adam") return StepMode::adam;
  if (s == "fixed") return StepMode::fixed;
  throw UsageError("--step-mode must be adam or fixed");
}

InitMode parse_init_mode(const std::string& s) {
  if (s == "ik") return InitMode::ik;
  if (s == "constant") return InitMode::constant;
  throw UsageError("--init-mode must be ik or constant");
}

/// Field selection shared by levelset, plan and ablate.
struct FieldArgs {
  std::string model;
  bool oracle = false;
  std::string manifold = "ring";
  std::string gripper;
  int oracle_density = 100000;

  void add_to(Command& c) {
    c.add("model", model, "checkpoint written by train");
    c.add("oracle", oracle, "use the exact oracle in place of a learned field");
    c.add("manifold", manifold, "ring | ring2d | comma list, one per object id");
    c.add("gripper", gripper, "control point file (default: built-in parallel jaw)");
    c.add("oracle-density", oracle_density, "manifold samples for oracle scoring");
  }

  void check() const {
    require(oracle_density >= 1, "--oracle-density must be >= 1");
    if (!oracle) require_file(model, "model");
  }

  /// Calls fn with either the oracle field or the loaded network.
  template <class Fn>
  void with_field(const std::vector<GraspManifold>& manifolds, const ControlPointSet& cps, Fn&& fn) const {
    if (oracle) {
      fn(OracleField(manifolds, cps, oracle_density));
      return;
    }
    const FieldModel m = load_checkpoint(model);
    require(m.shape().outputs == static_cast<int>(cps.size()), "checkpoint output count does not match the gripper");
    fn(NeuralField(m));
  }
};

/// Planner settings shared by plan and ablate.
struct PlanArgs {
  PlannerConfig cfg;
  SuiteConfig suite;
  std::string chain;
  std::string step_mode = "adam";
  std::string init_mode = "ik";

  void add_to(Command& c, bool modes) {
    c.add("chain", chain, "chain file (default: built-in 7-joint arm)");
    c.add("iterations", cfg.iterations, "CHOMP iterations");
    c.add("lr", cfg.learning_rate, "step size");
    c.add("w-grasp", cfg.grasp_weight, "grasp cost weight");
    c.add("w-smooth", cfg.smooth_weight, "smoothness cost weight");
    c.add("w-obstacle", cfg.obstacle_weight, "obstacle cost weight");
    c.add("margin", cfg.margin, "obstacle margin (m)");
    c.add("waypoints", cfg.waypoints, "trajectory length");
    c.add("ik-radius", cfg.ik_radius, "IK initialization ball radius (m)");
    c.add("ik-iterations", cfg.ik_iterations, "IK iteration budget");
    if (modes) {
      c.add("step-mode", step_mode, "adam | fixed");
      c.add("init-mode", init_mode, "ik | constant");
    }
    c.add("scenes", suite.scenes, "suite size");
    c.add("seed", suite.seed, "suite master seed");
    c.add("threshold", suite.success_threshold, "success threshold on oracle distance (m)");
  }

  void check() {
    cfg.step_mode = parse_step_mode(step_mode);
    cfg.init_mode = parse_init_mode(init_mode);
    require(suite.scenes >= 1, "--scenes must be >= 1");
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Grasp distance fields and goal-set trajectory optimization");
  app.require_subcommand(1);

  // gen-data
  Command gen(app, "gen-data", "label random query poses against a grasp manifold");
  std::string gen_manifold = "ring", gen_gripper;
  int gen_n = 50000, gen_density = 10000, gen_object = 0;
  double gen_radius = 0.5;
  std::uint64_t gen_seed = 1;
  gen.add("manifold", gen_manifold, "ring | ring2d");
  gen.add("n", gen_n, "number of queries");
  gen.add("radius", gen_radius, "query ball radius around the manifold centroid (m)");
  gen.add("seed", gen_seed, "rng seed");
  gen.add("density", gen_density, "manifold samples used for labelling");
  gen.add("object-id", gen_object, "object id written into each record");
  gen.add("gripper", gen_gripper, "control point file");

  // train
  Command tr(app, "train", "fit the field to a dataset");
  std::string tr_data, tr_manifold = "ring", tr_gripper;
  TrainConfig tc;
  tr.add("data", tr_data, "dataset file written by gen-data");
  tr.add("manifold", tr_manifold, "manifold per object id, used to relabel augmented queries");
  tr.add("gripper", tr_gripper, "control point file");
  tr.add("hidden", tc.shape.hidden_layers, "hidden layers");
  tr.add("width", tc.shape.width, "hidden width");
  tr.add("latent", tc.shape.latent_dim, "latent code size");
  tr.add("epochs", tc.epochs, "epochs");
  tr.add("batch", tc.batch_size, "batch size");
  tr.add("lr", tc.learning_rate, "initial network learning rate");
  tr.add("final-lr-factor", tc.final_lr_factor, "cosine schedule floor as a fraction of --lr");
  tr.add("code-lr", tc.code_learning_rate, "initial latent code learning rate");
  tr.add("aug-p", tc.aug_probability, "rotation augmentation probability");
  tr.add("val-fraction", tc.val_fraction, "held-out fraction");
  tr.add("oracle-density", tc.oracle_density, "manifold samples for relabelling");
  tr.add("seed", tc.seed, "rng seed");

  // levelset
  Command ls(app, "levelset", "optimize free gripper poses onto the zero level set");
  FieldArgs ls_field;
  LevelSetConfig lc;
  int ls_trials = 50, ls_object = 0;
  bool ls_paths = false;
  ls_field.add_to(ls);
  ls.add("object-id", ls_object, "object id");
  ls.add("trials", ls_trials, "random starts");
  ls.add("steps", lc.steps, "Adam steps per start");
  ls.add("lr", lc.learning_rate, "Adam learning rate");
  ls.add("threshold", lc.success_threshold, "success threshold on oracle distance (m)");
  ls.add("start-radius", lc.start_radius, "start ball radius around the centroid (m)");
  ls.add("seed", lc.seed, "master seed; trial i uses derive_seed(seed, i)");
  ls.add("paths", ls_paths, "write every optimization path");

  // plan
  Command pl(app, "plan", "plan a single scene (--scene) or the randomized suite");
  FieldArgs pl_field;
  PlanArgs pl_args;
  std::string pl_scene;
  pl_field.add_to(pl);
  pl_args.add_to(pl, true);
  pl.add("scene", pl_scene, "scene file; omit to run the suite");

  // ablate
  Command ab(app, "ablate", "plan suite under {adam, fixed} x {ik, constant}");
  FieldArgs ab_field;
  PlanArgs ab_args;
  ab_field.add_to(ab);
  ab_args.add_to(ab, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const Stopwatch clock;
    if (*gen.app()) {
      require(gen_n >= 1, "--n must be >= 1");
      require(gen_density >= 1, "--density must be >= 1");
      require(gen_radius >= 0, "--radius must be >= 0");
      require(gen_object >= 0, "--object-id must be >= 0");
      const auto manifolds = parse_manifolds(gen_manifold);
      require(manifolds.size() == 1, "gen-data takes a single manifold");
      gen.resolve();
      const ControlPointSet cps = gripper_points(gen_gripper);
      const auto data = generate_dataset(manifolds[0], cps, gen_n, gen_radius, gen_seed, gen_density, gen_object);
      {
        auto f = open_out(gen.out() / "dataset.txt");
        write_dataset(f, data, cps.size());
      }
      Eigen::ArrayXd mean(static_cast<Eigen::Index>(data.size()));
      for (std::size_t i = 0; i < data.size(); ++i) mean[i] = data[i].target_distances.mean();
      const int bins = 10;
      const double lo = mean.minCoeff(), hi = mean.maxCoeff();
      std::vector<int> hist(bins, 0);
      for (double v : mean) hist[std::min(bins - 1, static_cast<int>((v - lo) / std::max(hi - lo, 1e-300) * bins))]++;
      auto rep = open_out(gen.out() / "gen_report.txt");
      rep << "records " << data.size() << "\nncp " << cps.size() << "\nmean_distance_min " << detail::num(lo)
          << "\nmean_distance_max " << detail::num(hi) << "\nmean_distance_mean " << detail::num(mean.mean())
          << "\n# histogram of mean distance: bin_lo bin_hi count\n";
      for (int b = 0; b < bins; ++b)
        rep << detail::num(lo + (hi - lo) * b / bins) << ' ' << detail::num(lo + (hi - lo) * (b + 1) / bins) << ' '
            << hist[b] << '\n';
      std::cout << "wrote " << data.size() << " records to " << (gen.out() / "dataset.txt").string() << '\n';
      write_timing(gen.out(), clock.seconds());
    } else if (*tr.app()) {
      require_file(tr_data, "data");
      try {
        tc.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      require(tc.shape.hidden_layers >= 1 && tc.shape.width >= 1 && tc.shape.latent_dim >= 0, "bad network shape");
      const auto manifolds = parse_manifolds(tr_manifold);
      tr.resolve();
      const ControlPointSet cps = gripper_points(tr_gripper);
      std::vector<DatasetRecord> data;
      try {
        data = load_dataset(tr_data);
      } catch (const std::runtime_error& e) {
        throw UsageError(e.what());
      }
      require(!data.empty(), "dataset is empty");
      const TrainResult r = train(std::move(data), manifolds, cps, tc);
      save_checkpoint((tr.out() / "model.bin").string(), r.model);
      {
        auto f = open_out(tr.out() / "metrics.txt");
        write_metrics(f, r.curve);
      }
      const EpochMetrics& last = r.curve.back();
      open_out(tr.out() / "train_summary.txt") << "epochs " << r.curve.size() << "\nfinal_val_l1 "
                                               << detail::num(last.val_l1) << "\nfinal_val_mae "
                                               << detail::num(last.val_mae) << '\n';
      std::printf("final validation L1 %.6f  mean-distance MAE %.6f\n", last.val_l1, last.val_mae);
      write_timing(tr.out(), clock.seconds());
    } else if (*ls.app()) {
      ls_field.check();
      require(ls_trials >= 1, "--trials must be >= 1");
      try {
        lc.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const auto manifolds = parse_manifolds(ls_field.manifold);
      require(ls_object >= 0 && ls_object < static_cast<int>(manifolds.size()), "--object-id has no manifold");
      ls.resolve();
      const ControlPointSet cps = gripper_points(ls_field.gripper);
      ls_field.with_field(manifolds, cps, [&](const auto& field) {
        const LevelSetMetrics m =
            evaluate_levelset(field, ls_object, manifolds[ls_object], cps, ls_trials, lc, ls_field.oracle_density);
        auto f = open_out(ls.out() / "levelset_metrics.txt");
        write_levelset_metrics(f, m);
        if (ls_paths) {
          fs::create_directories(ls.out() / "paths");
          for (int i = 0; i < ls_trials; ++i) {
            const PoseOptimization r = optimize_pose(field, ls_object, m.per_trial[i].start, lc);
            char name[32];
            std::snprintf(name, sizeof name, "trial_%03d.txt", i);
            auto pf = open_out(ls.out() / "paths" / name);
            write_path(pf, r.path);
          }
        }
        std::printf("level set: success %.3f  oracle distance %.4f +- %.4f  field<1e-3 %.3f\n", m.success_rate,
                    m.mean_oracle_distance, m.std_oracle_distance, m.field_below_1e3);
      });
      write_timing(ls.out(), clock.seconds());
    } else if (*pl.app()) {
      pl_field.check();
      pl_args.check();
      const auto manifolds = parse_manifolds(pl_field.manifold);
      if (!pl_scene.empty()) require_file(pl_scene, "scene");
      pl.resolve();
      const ControlPointSet cps = gripper_points(pl_field.gripper);
      const KinematicChain chain = chain_from(pl_args.chain);
      pl_field.with_field(manifolds, cps, [&](const auto& field) {
        if (!pl_scene.empty()) {
          SceneSpec scene;
          try {
            scene = load_scene(pl_scene);
          } catch (const std::exception& e) {
            throw UsageError(e.what());
          }
          require(scene.object_id < static_cast<int>(manifolds.size()), "scene object_id has no manifold");
          const PlanResult r = plan(chain, scene, field, pl_args.cfg);
          {
            auto f = open_out(pl.out() / "trajectory.txt");
            write_trajectory(f, r.trajectory);
          }
          {
            auto f = open_out(pl.out() / "cost_log.txt");
            write_cost_log(f, r.log);
          }
          const GraspOracle oracle(manifolds[scene.object_id], cps, pl_field.oracle_density);
          const double od =
              oracle.nearest(gripper_in_object(chain, r.trajectory.bottomRows(1).transpose(), scene)).mean();
          auto f = open_out(pl.out() / "plan_metrics.txt");
          write_plan_record(f, r, min_clearance(r.trajectory, chain, scene));
          f << "oracle_distance " << detail::num(od) << '\n';
          std::printf("plan: field distance %.5f  oracle distance %.5f  clearance %.4f\n", r.final_grasp_distance, od,
                      min_clearance(r.trajectory, chain, scene));
          return;
        }
        const SuiteReport rep = run_plan_suite(chain, field, manifolds[0], cps, pl_args.cfg, pl_args.suite);
        auto f = open_out(pl.out() / "plan_metrics.txt");
        write_suite_metrics(f, rep);
        fs::create_directories(pl.out() / "trajectories");
        for (std::size_t i = 0; i < rep.scenes.size(); ++i) {
          char name[32];
          std::snprintf(name, sizeof name, "scene_%02zu", i);
          auto tf = open_out(pl.out() / "trajectories" / (std::string(name) + ".txt"));
          write_trajectory(tf, rep.scenes[i].result.trajectory);
          auto sf = open_out(pl.out() / "trajectories" / (std::string(name) + ".scene"));
          write_scene(sf, rep.scenes[i].scene);
        }
        std::printf("plan suite: success %.3f over %zu scenes\n", rep.success_rate, rep.scenes.size());
      });
      write_timing(pl.out(), clock.seconds());
    } else if (*ab.app()) {
      ab_field.check();
      ab_args.check();
      const auto manifolds = parse_manifolds(ab_field.manifold);
      ab.resolve();
      const ControlPointSet cps = gripper_points(ab_field.gripper);
      const KinematicChain chain = chain_from(ab_args.chain);
      ab_field.with_field(manifolds, cps, [&](const auto& field) {
        const auto rows = run_ablation(chain, field, manifolds[0], cps, ab_args.cfg, ab_args.suite);
        auto f = open_out(ab.out() / "ablation.txt");
        write_ablation(f, rows);
        std::cout << "mode            success  oracle_distance\n";
        for (const auto& r : rows) std::printf("%-15s %.3f    %.4f\n", r.name.c_str(), r.success_rate, r.mean_oracle_distance);
      });
      write_timing(ab.out(), clock.seconds());
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
