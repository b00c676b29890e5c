#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "scfo/bench.hpp"
#include "scfo/bounds.hpp"
#include "scfo/certify.hpp"
#include "scfo/engine.hpp"
#include "scfo/io.hpp"

namespace fs = std::filesystem;
using namespace scfo;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("scfo");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("SCFO_LOG");
  const std::string level = env ? env : "info";
  if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

bool is_builtin(const std::string& arg) {
  for (const auto& n : builtin_names()) {
    if (n == arg) return true;
  }
  return false;
}

std::shared_ptr<PlantOracle> stdio_plant(std::size_t n_u, std::size_t n_gp) {
  auto channel = std::make_shared<StreamChannel>(std::cin, std::cout);
  return std::make_shared<ProtocolPlant>(channel, n_u, n_gp);
}

ProblemSpec problem_arg(const std::string& arg) {
  if (is_builtin(arg)) return builtin(arg);
  return load_problem(arg, stdio_plant);
}

struct Common {
  std::optional<std::size_t> budget;
  std::optional<int> max_halvings;
  std::optional<std::string> out;
  std::optional<std::string> target;
  std::string fj_mode = "fixed";
};

void apply_flags(RunConfig& cfg, const Common& c) {
  if (c.budget) cfg.budget = *c.budget;
  if (c.max_halvings) cfg.max_halvings = *c.max_halvings;
  if (c.target) cfg.target = parse_target(Json(*c.target), ".");
  if (c.out) {
    cfg.csv_path = (fs::path(*c.out) / "trajectory.csv").string();
    cfg.json_path = (fs::path(*c.out) / "trajectory.json").string();
  }
}

void log_record(const IterateRecord& r) {
  spdlog::debug("k={} phi={} level={} status={} K={}", r.k, format_real(r.measurement.phi), r.params_level,
                to_string(r.status), r.K ? format_real(*r.K) : std::string("-"));
}

Json fj_pair(const FjCertificate& fixed, const FjCertificate& sphere, const std::string& mode) {
  return Json{{"fixed_cost_multiplier", certificate_to_json(fixed)},
              {"unit_sphere", certificate_to_json(sphere)},
              {"reported", mode == "sphere" ? "unit_sphere" : "fixed_cost_multiplier"},
              {"error", mode == "sphere" ? sphere.error : fixed.error}};
}

Json summary_json(const Trajectory& traj, const ProblemSpec& spec, const std::optional<Vector>& reference,
                  const std::string& fj_mode) {
  const Summary s = summarize(traj, reference);
  const auto& last = traj.last();
  Json j{{"problem", spec.name},
         {"experiments", s.experiments},
         {"stepped", s.stepped},
         {"terminated", s.terminated},
         {"initial_cost", s.initial_cost},
         {"final_cost", s.final_cost},
         {"final_point", to_json(s.final_point)},
         {"final_level", last.params_level},
         {"max_halvings", traj.max_halvings}};
  j["max_g_p"] = last.measurement.g_p.size() > 0 ? Json(s.max_g_p) : Json();
  j["max_g"] = last.g_values.size() > 0 ? Json(s.max_g) : Json();
  if (reference) {
    j["reference"] = to_json(*reference);
    j["final_distance"] = s.distance.empty() ? Json() : Json(s.distance.back());
  }
  j["fj"] = fj_pair(certify_record(last, spec, traj.ceilings, FjNormalization::fixed_cost_multiplier),
                    certify_record(last, spec, traj.ceilings, FjNormalization::unit_sphere), fj_mode);
  return j;
}

std::string out_dir(const Common& c) { return c.out ? *c.out : std::string("."); }

Trajectory run_engine(const ProblemSpec& spec, const RunConfig& cfg) {
  Engine engine(spec, cfg);
  engine.on_record = log_record;
  try {
    Trajectory traj = engine.run();
    write_outputs(traj, cfg, spec.name);
    return traj;
  } catch (const RunAborted& e) {
    write_outputs(e.partial(), cfg, spec.name);
    spdlog::error("run aborted after {} records; partial trajectory written", e.partial().records.size());
    throw;
  }
}

int cmd_run(const std::string& problem_path, const std::string& run_path, const Common& c) {
  ProblemSpec spec = problem_arg(problem_path);
  RunConfig cfg = run_path.empty() ? RunConfig{} : load_run_config(run_path);
  apply_flags(cfg, c);
  if (!cfg.csv_path && !cfg.json_path) {
    cfg.csv_path = "trajectory.csv";
    cfg.json_path = "trajectory.json";
  }
  const Trajectory traj = run_engine(spec, cfg);
  const fs::path dir = cfg.csv_path ? fs::path(*cfg.csv_path).parent_path() : fs::path(*cfg.json_path).parent_path();
  atomic_write((dir / "summary.json").string(), summary_json(traj, spec, std::nullopt, c.fj_mode).dump(2) + "\n");
  spdlog::info("{} records, final cost {}", traj.records.size(), format_real(traj.last().measurement.phi));
  return 0;
}

int cmd_bench(const std::string& name, const Common& c, bool plot_data) {
  ProblemSpec spec = builtin(name);
  RunConfig cfg;
  cfg.budget = 5000;
  apply_flags(cfg, c);
  const std::string dir = out_dir(c);
  cfg.csv_path = (fs::path(dir) / "trajectory.csv").string();
  cfg.json_path = (fs::path(dir) / "trajectory.json").string();

  const Trajectory traj = run_engine(spec, cfg);
  const Vector reference = derived_optimum(spec);
  const Json summary = summary_json(traj, spec, reference, c.fj_mode);
  atomic_write((fs::path(dir) / "summary.json").string(), summary.dump(2) + "\n");

  if (plot_data) {
    Json path = Json::array();
    Json cost = Json::array();
    for (const auto& r : traj.records) {
      if (r.status != StepStatus::initial && r.status != StepStatus::stepped) continue;
      path.push_back(to_json(r.u));
      cost.push_back(Json{{"k", r.k}, {"phi", r.measurement.phi}});
    }
    const Json plot{{"problem", spec.name},
                    {"cost", cost},
                    {"path", path},
                    {"reference", to_json(reference)},
                    {"reference_cost", spec.oracle->measure(reference).phi}};
    atomic_write((fs::path(dir) / "plot_data.json").string(), plot.dump(1) + "\n");
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_certify_fj(const std::string& input, const std::string& problem, const Common& c) {
  ProblemSpec spec = problem_arg(problem);
  Json out;
  const bool literal = !input.empty() && input.front() == '[';
  const Json j = literal ? Json::parse(input) : Json::parse(read_file(input));
  if (j.is_object() && j.contains("records")) {
    const Trajectory traj = trajectory_from_json(j);
    const IterateRecord& rec = traj.last();
    out = fj_pair(certify_record(rec, spec, traj.ceilings, FjNormalization::fixed_cost_multiplier),
                  certify_record(rec, spec, traj.ceilings, FjNormalization::unit_sphere), c.fj_mode);
    out["terminated"] = traj.terminal.has_value();
  } else {
    const Vector u = vector_from_json(j.is_object() ? j.at("u") : j, "point");
    if (!spec.box.contains(u)) throw ValidationError("point lies outside the box");
    const Measurement m = spec.oracle->measure(u);
    out = fj_pair(fj_error(u, spec, m, FjNormalization::fixed_cost_multiplier),
                  fj_error(u, spec, m, FjNormalization::unit_sphere), c.fj_mode);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_certify_bounds(const std::string& problem, int max_halvings) {
  ProblemSpec spec = problem_arg(problem);
  Engine engine(spec, RunConfig{});
  const GrowthBounds& gb = engine.growth();
  const Measurement m0 = spec.oracle->measure(spec.u0);
  Json levels = Json::array();
  for (int level = 0; level <= max_halvings; ++level) {
    const ProjectionParams p = ProjectionParams::at_level(engine.ceilings(), level);
    const double floor = filter_gain_floor(p, gb, spec.lipschitz, m0.g_p);
    Json floors = Json::array();
    for (std::size_t j = 0; j < spec.n_gp(); ++j) floors.push_back(constraint_floor(spec.lipschitz, p, gb, m0.g_p, j));
    Json entry{{"level", level}, {"delta_phi", p.delta_phi}, {"gain_floor", floor}, {"constraint_floors", floors}};
    if (spec.phi_lower) {
      entry["max_feasible_iterations"] =
          max_feasible_iterations(floor, spec.lipschitz, gb, p.delta_phi, m0.phi, *spec.phi_lower);
    }
    levels.push_back(std::move(entry));
  }
  const Json out{{"problem", spec.name},
                 {"growth", growth_to_json(gb)},
                 {"ceilings", ceilings_to_json(engine.ceilings())},
                 {"phi_u0", m0.phi},
                 {"g_p_u0", to_json(m0.g_p)},
                 {"levels", levels}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_validate_lipschitz(const std::string& name, std::size_t samples, std::uint64_t seed, double scale) {
  ProblemSpec spec = problem_arg(name);
  if (scale != 1.0) spec.lipschitz = spec.lipschitz.scaled(scale);
  const LipschitzReport report = validate_lipschitz(spec, samples, seed);
  Json checks = Json::array();
  for (const auto& c : report.checks) {
    checks.push_back(Json{{"constant", c.constant}, {"worst_ratio", c.worst_ratio}, {"pass", c.pass}});
  }
  std::cout << Json{{"problem", spec.name}, {"samples", report.samples}, {"ok", report.ok}, {"checks", checks}}.dump(2)
            << "\n";
  return report.ok ? 0 : 1;
}

int cmd_serve_plant(const std::string& name) {
  ProblemSpec spec = builtin(name);
  StreamChannel channel(std::cin, std::cout);
  const std::size_t served = serve_plant(*spec.oracle, channel);
  spdlog::debug("served {} requests", served);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Feasible-side experimental optimization"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--budget", common.budget, "Experiments allowed after u0");
    sub->add_option("--max-halvings", common.max_halvings, "Parameter halvings before termination");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--target", common.target, "box_center, file:<path> or a JSON vector");
    sub->add_option("--fj-mode", common.fj_mode, "FJ normalization reported")
        ->check(CLI::IsMember({"sphere", "fixed"}));
  };

  std::string problem_path, run_path, name, input, problem_for_fj;
  bool plot_data = false;
  int bounds_levels = 10;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  double scale = 1.0;

  auto* run = app.add_subcommand("run", "Run a problem definition");
  run->add_option("problem", problem_path, "Problem JSON")->required();
  run->add_option("config", run_path, "Run config JSON");
  add_common(run);

  auto* bench = app.add_subcommand("bench", "Run a builtin benchmark end to end");
  bench->add_option("name", name, "constrained_quadratic or rosenbrock")->required();
  bench->add_flag("--plot-data", plot_data, "Also write plot_data.json");
  add_common(bench);

  auto* certify = app.add_subcommand("certify", "Certificates and diagnostics");
  certify->require_subcommand(1);
  auto* fj = certify->add_subcommand("fj", "FJ certificate at a point or a trajectory's last record");
  fj->add_option("input", input, "Point JSON, trajectory JSON, or an inline vector")->required();
  fj->add_option("--problem", problem_for_fj, "Problem JSON or builtin name")->required();
  fj->add_option("--fj-mode", common.fj_mode)->check(CLI::IsMember({"sphere", "fixed"}));
  auto* bounds = certify->add_subcommand("bounds", "Growth bounds, gain floors and the iteration bound");
  bounds->add_option("problem", problem_path, "Problem JSON or builtin name")->required();
  bounds->add_option("--max-halvings", bounds_levels, "Report levels 0..N");

  auto* validate = app.add_subcommand("validate-lipschitz", "Sample derivatives against the constants");
  validate->add_option("name", name, "Builtin name or problem JSON")->required();
  validate->add_option("--samples", samples);
  validate->add_option("--seed", seed);
  validate->add_option("--scale", scale, "Multiply every constant first");

  auto* serve = app.add_subcommand("serve-plant", "Answer plant requests on stdin/stdout");
  serve->add_option("name", name, "Builtin name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run) return cmd_run(problem_path, run_path, common);
    if (*bench) return cmd_bench(name, common, plot_data);
    if (*fj) return cmd_certify_fj(input, problem_for_fj, common);
    if (*bounds) return cmd_certify_bounds(problem_path, bounds_levels);
    if (*validate) return cmd_validate_lipschitz(name, samples, seed, scale);
    if (*serve) return cmd_serve_plant(name);
  } catch (const RunAborted& e) {
    spdlog::error("{}", e.what());
    return e.exit_code();
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const Json::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}
