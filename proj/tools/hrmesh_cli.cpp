// hrmesh command line: gen, train, eval, baseline, render, verify.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>

#include "hrmesh/baselines.hpp"
#include "hrmesh/error.hpp"
#include "hrmesh/features.hpp"
#include "hrmesh/harness.hpp"
#include "hrmesh/mesh_io.hpp"
#include "hrmesh/policy.hpp"
#include "hrmesh/ppo.hpp"

namespace fs = std::filesystem;
using namespace hrmesh;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

void fail_line(std::string_view code, const std::string& message) {
  std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << '\n';
}

int env_threads() {
  const char* s = std::getenv("HRMESH_THREADS");
  if (!s) return 1;
  const int n = std::atoi(s);
  return n > 0 ? n : 1;
}

// Flags that mirror ExperimentConfig. Values are only applied when given, so
// they override the JSON config file.
struct ExperimentFlags {
  std::string config_path;
  std::optional<std::string> kind, output_dir;
  std::optional<int> train_count, eval_count, target_elements, ref_depth, horizon, alpha_count, theta_count,
      uniform_levels, threads;
  std::optional<double> alpha_min, alpha_max;
  std::optional<std::uint64_t> seed;
  bool no_time = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON experiment config; flags override it");
    app->add_option("--kind", kind, "poisson or heat");
    app->add_option("--out", output_dir, "Output directory");
    app->add_option("--train-count", train_count);
    app->add_option("--eval-count", eval_count);
    app->add_option("--target-elements", target_elements);
    app->add_option("--ref-depth", ref_depth);
    app->add_option("--horizon", horizon);
    app->add_option("--alpha-count", alpha_count);
    app->add_option("--alpha-min", alpha_min);
    app->add_option("--alpha-max", alpha_max);
    app->add_option("--theta-count", theta_count);
    app->add_option("--uniform-levels", uniform_levels);
    app->add_option("--seed", seed);
    app->add_option("--threads", threads, "Worker threads (default: HRMESH_THREADS or 1)");
    app->add_flag("--no-time", no_time, "Write time_s = 0 for byte-stable CSVs");
  }

  harness::ExperimentConfig resolve() const {
    harness::ExperimentConfig c;
    c.threads = env_threads();
    if (!config_path.empty()) c = harness::config_from_json(read_file(config_path), c);
    if (kind) c.kind = fem::problem_kind_from_string(*kind);
    if (output_dir) c.output_dir = *output_dir;
    if (train_count) c.train_count = *train_count;
    if (eval_count) c.eval_count = *eval_count;
    if (target_elements) c.target_elements = *target_elements;
    if (ref_depth) c.ref_depth = *ref_depth;
    if (horizon) c.horizon = *horizon;
    if (alpha_count) c.alpha_count = *alpha_count;
    if (alpha_min) c.alpha_min = *alpha_min;
    if (alpha_max) c.alpha_max = *alpha_max;
    if (theta_count) c.theta_count = *theta_count;
    if (uniform_levels) c.uniform_levels = *uniform_levels;
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    if (no_time) c.record_time = false;
    harness::validate(c);
    return c;
  }
};

struct TrainFlags {
  ppo::TrainConfig train;
  std::string policy_config;
  int hidden = 64;

  void attach(CLI::App* app) {
    app->add_option("--iterations", train.iterations);
    app->add_option("--phase1", train.phase1_iters, "Iterations with frozen element heads and random flags");
    app->add_option("--transitions", train.transitions_per_iter);
    app->add_option("--epochs", train.epochs);
    app->add_option("--minibatch", train.minibatch);
    app->add_option("--lr", train.lr);
    app->add_option("--checkpoint-every", train.checkpoint_every);
    app->add_option("--policy-config", policy_config, "JSON policy config");
    app->add_option("--hidden", hidden, "Latent and head width when no policy config is given");
  }
};

void write_eval_outputs(const harness::ExperimentConfig& c, const std::string& stem,
                        const std::vector<harness::EvalRow>& rows) {
  const fs::path dir = fs::path(c.output_dir) / "eval";
  auto rows_out = open_out(dir / (stem + ".csv"));
  harness::write_rows(rows_out, rows);
  auto agg_out = open_out(dir / (stem + "_summary.csv"));
  harness::write_aggregates(agg_out, harness::aggregate(rows));
  std::cout << "wrote " << (dir / (stem + ".csv")).string() << " (" << rows.size() << " rows)\n";
}

std::vector<harness::EvalRow> baseline_rows(const harness::ExperimentConfig& c,
                                            std::span<const std::shared_ptr<const env::InstanceData>> data) {
  std::vector<harness::EvalRow> rows = harness::eval_reference_rows(c, data);
  for (auto kind : {baselines::HeuristicKind::Oracle, baselines::HeuristicKind::Zz}) {
    for (auto& r : harness::eval_heuristic(c, kind, data)) rows.push_back(std::move(r));
  }
  return rows;
}

int run(int argc, char** argv) {
  CLI::App app{"hr-adaptive mesh refinement experiments"};
  app.require_subcommand(1);

  ExperimentFlags gen_flags, train_exp, eval_flags, base_flags;
  TrainFlags train_flags;

  auto* gen = app.add_subcommand("gen", "Generate the train and eval datasets");
  gen_flags.attach(gen);

  auto* train = app.add_subcommand("train", "Train a policy on the train split");
  train_exp.attach(train);
  train_flags.attach(train);

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and all baselines on the eval split");
  eval_flags.attach(eval);
  eval->add_option("--checkpoint", checkpoint, "Policy checkpoint")->required();

  auto* base = app.add_subcommand("baseline", "Evaluate the heuristic baselines on the eval split");
  base_flags.attach(base);

  std::string mesh_path, field_path, svg_path;
  bool quality = false;
  auto* render = app.add_subcommand("render", "Render a mesh (and optional field) to SVG");
  render->add_option("--mesh", mesh_path)->required();
  render->add_option("--field", field_path);
  render->add_option("--svg", svg_path, "Output file (default: stdout)");
  render->add_flag("--quality", quality, "Shade elements by aspect ratio");

  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "Run the fast invariant suite");
  verify->add_option("--seed", verify_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    fail_line("usage", e.what());
    return 2;
  }

  if (*gen) {
    const auto c = gen_flags.resolve();
    harness::gen_dataset(c);
    std::cout << "wrote " << c.train_count << " train and " << c.eval_count << " eval instances under "
              << harness::split_dir(c, harness::Split::Train) << "/..\n";
  } else if (*train) {
    const auto c = train_exp.resolve();
    ppo::TrainConfig tc = train_flags.train;
    tc.seed = c.seed;
    tc.threads = c.threads;
    tc.env.horizon = c.horizon;
    tc.env.ref_depth = c.ref_depth;
    tc.env.alpha_min = c.alpha_min;
    tc.env.alpha_max = c.alpha_max;
    ppo::validate(tc);
    policy::PolicyConfig pc;
    if (!train_flags.policy_config.empty()) {
      pc = policy::config_from_json(read_file(train_flags.policy_config));
    } else {
      pc.hidden = pc.head_hidden = train_flags.hidden;
      pc.seed = c.seed;
    }
    pc.elem_dim = features::element_dim(c.kind);
    auto params = policy::init_params(pc);
    const auto data = harness::load_split(c, harness::Split::Train);
    const fs::path dir = fs::path(c.output_dir) / "train";
    auto metrics = open_out(dir / "metrics.csv");
    ppo::TrainCallbacks cb;
    cb.metrics_csv = &metrics;
    cb.checkpoint_dir = (dir / "checkpoints").string();
    cb.on_iteration = [](const ppo::IterationMetrics& m) {
      std::cout << "iter " << m.iteration << " phase " << m.phase << " err_rel " << m.err_rel << " elements "
                << m.elements_mean << " loss " << m.loss << " (" << m.seconds << " s)\n";
    };
    ppo::train(tc, data, params, cb);
    policy::save_policy((dir / "policy.json").string(), params);
    std::cout << "wrote " << (dir / "policy.json").string() << '\n';
  } else if (*eval) {
    const auto c = eval_flags.resolve();
    const auto params = policy::load_policy(checkpoint);
    const auto data = harness::load_split(c, harness::Split::Eval);
    auto rows = baseline_rows(c, data);
    for (auto& r : harness::eval_policy(c, params, data)) rows.push_back(std::move(r));
    write_eval_outputs(c, "pareto", rows);
  } else if (*base) {
    const auto c = base_flags.resolve();
    const auto data = harness::load_split(c, harness::Split::Eval);
    write_eval_outputs(c, "baselines", baseline_rows(c, data));
  } else if (*render) {
    const Mesh mesh = load_mesh(mesh_path);
    std::optional<fem::Field> field;
    if (!field_path.empty()) field = fem::make_field(mesh, load_field(field_path));
    harness::RenderOptions opt;
    opt.quality_fill = quality;
    const std::string svg = harness::render_svg(mesh, field, opt);
    if (svg_path.empty()) {
      std::cout << svg;
    } else {
      open_out(svg_path) << svg;
    }
  } else if (*verify) {
    bool ok = true;
    for (const auto& r : harness::run_verify(verify_seed)) {
      std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
      ok = ok && r.passed;
    }
    if (!ok) {
      fail_line("verify_failed", "one or more invariant checks failed");
      return 1;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    fail_line(to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    fail_line("internal", e.what());
  }
  return 1;
}
