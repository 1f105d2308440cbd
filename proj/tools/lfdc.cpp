#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lfdc/scenario.hpp"

namespace {

using lfdc::scenario::json;

int fail(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
  return 2;
}

json load_with_overrides(const std::string& name, const std::vector<std::string>& overrides,
                         const std::optional<std::uint64_t>& seed, const std::optional<std::size_t>& steps) {
  json cfg = lfdc::scenario::load_config(name);
  if (seed) cfg["seed"] = *seed;
  if (steps) cfg["steps"] = *steps;
  for (const auto& kv : overrides) lfdc::scenario::apply_override(cfg, kv);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Leader-follower density control on periodic domains"};
  app.require_subcommand(1);

  std::string target;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Run a built-in scenario or a JSON config file");
  run->add_option("scenario", target, "Scenario name or config path")->required();
  run->add_option("--out", out_dir, "Output directory (default $LFDC_OUT_DIR/<name> or lfdc_out/<name>)");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--steps", steps, "Number of time steps");
  run->add_option("--override", overrides, "key=value overrides (value parsed as JSON)")->take_all();

  bool as_json = false;
  auto* list = app.add_subcommand("list", "List built-in scenarios");
  list->add_flag("--json", as_json, "Machine-readable output");

  std::string feas_target;
  std::vector<std::string> feas_overrides;
  auto* feas = app.add_subcommand("feasibility", "Feasibility report for a scenario's target");
  feas->add_option("scenario", feas_target, "Scenario name or config path")->required();
  feas->add_option("--override", feas_overrides, "key=value overrides")->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("UsageError", e.what());
  }

  try {
    if (list->parsed()) {
      const auto& all = lfdc::scenario::builtins();
      if (as_json) {
        json arr = json::array();
        for (const auto& b : all) arr.push_back({{"name", b.name}, {"description", b.description}});
        std::cout << arr.dump(2) << '\n';
      } else {
        for (const auto& b : all) std::printf("%-24s %s\n", b.name.c_str(), b.description.c_str());
      }
      return 0;
    }

    if (feas->parsed()) {
      const json cfg = load_with_overrides(feas_target, feas_overrides, std::nullopt, std::nullopt);
      const auto plan = lfdc::scenario::make_plan(cfg);
      json reports = json::array();
      for (const auto& v : plan.pde) {
        json r = lfdc::scenario::feasibility_json(lfdc::scenario::plan_feasibility(v.sim));
        if (!v.label.empty()) r["label"] = v.label;
        reports.push_back(r);
      }
      for (const auto& v : plan.ensemble) {
        json r = lfdc::scenario::feasibility_json(lfdc::scenario::plan_feasibility(v.cfg.sim));
        r["N_L"] = v.N_L;
        reports.push_back(r);
      }
      if (reports.empty()) return fail("InvalidArgument", "sweep scenarios have no single target");
      std::cout << (reports.size() == 1 ? reports.front() : reports).dump(2) << '\n';
      return 0;
    }

    const json cfg = load_with_overrides(target, overrides, seed, steps);
    const auto plan = lfdc::scenario::make_plan(cfg);
    const auto dir = out_dir.empty() ? lfdc::scenario::default_out_dir(plan.name) : std::filesystem::path(out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    const auto outcome = lfdc::scenario::execute(plan, dir);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "%s: %.1f s, artifacts in %s\n", plan.name.c_str(), sec, dir.string().c_str());
    std::cout << outcome.summary.dump(2) << '\n';
    if (!outcome.ok) return fail("RunFailed", "at least one run stopped early; see summary.json");
    return 0;
  } catch (const lfdc::Error& e) {
    return fail(lfdc::to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return fail("InternalError", e.what());
  }
}
