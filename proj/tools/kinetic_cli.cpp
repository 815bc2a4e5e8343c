#include "CLI11.hpp"

#include "kinetic/cli.hpp"
#include "kinetic/errors.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>

using namespace kinetic;

namespace {

struct Args {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 1;
  std::string stage;
  bool strict = false;
};

RunConfig load(const Args& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : parse_config_file(a.config);
  if (a.seed_set) c.seed = a.seed;
  if (!a.out.empty()) {
    c.out_dir = a.out;
  } else if (c.out_dir.empty()) {
    const char* root = std::getenv("KINETIC_OUT");
    c.out_dir = (std::filesystem::path(root ? root : "kinetic-out") / c.name).string();
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layered moment hierarchies for linearized and quadratic kinetic models"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Args a;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("-c,--config", a.config, "YAML or JSON config file")->check(CLI::ExistingFile);
    if (needs_config) opt->required();
    sub->add_option("-o,--out", a.out, "output directory (default $KINETIC_OUT/<name>)");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { a.seed = s, a.seed_set = true; }, "override the config seed");
  };
  auto add_run = [&](CLI::App* sub) {
    add_common(sub, true);
    sub->add_option("-j,--workers", a.workers, "parallel combinations")->check(CLI::PositiveNumber);
    sub->add_flag("--strict", a.strict, "treat warnings as failures");
  };

  CLI::App* describe_cmd = app.add_subcommand("describe", "print the plan without running it");
  add_common(describe_cmd, false);
  CLI::App* run_cmd = app.add_subcommand("run", "run all stages");
  add_run(run_cmd);
  run_cmd->add_option("--stage", a.stage, "run a single stage")->check(CLI::IsMember(stage_names()));
  std::vector<std::pair<CLI::App*, std::string>> stage_cmds;
  for (const auto& s : stage_names()) {
    CLI::App* sub = app.add_subcommand(s, "run only the " + s + " stage");
    add_run(sub);
    stage_cmds.push_back({sub, s});
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg = load(a);
    if (*describe_cmd) {
      std::cout << describe(cfg);
      return 0;
    }
    RunOptions opt;
    opt.workers = a.workers;
    opt.strict = a.strict;
    opt.stage = a.stage;
    for (const auto& [sub, s] : stage_cmds)
      if (*sub) opt.stage = s;
    return run_pipeline(cfg, opt, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
