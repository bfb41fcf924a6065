#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "wglab/config.hpp"
#include "wglab/experiment.hpp"
#include "wglab/report.hpp"

using namespace wglab;

namespace {

constexpr int kExitPass = 0, kExitFail = 1, kExitError = 2;

struct RunFlags {
  std::string config;
  std::string out;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  bool extent_doubling = false;
};

void print_issues(const std::string& path, const std::vector<ConfigIssue>& issues) {
  for (const auto& i : issues) std::fprintf(stderr, "%s: %s: %s\n", path.c_str(), i.path.empty() ? "(root)" : i.path.c_str(), i.message.c_str());
}

void print_verdicts(const ResultBundle& b) {
  for (const auto& v : b.verdicts)
    std::printf("%-4s %-26s %-34s value %-12.6g threshold %-12.6g %s\n", v.pass ? "PASS" : "FAIL", v.label.c_str(),
                v.check.c_str(), v.value, v.threshold, v.detail.c_str());
  if (!b.error.empty()) std::printf("ERROR %s\n", b.error.c_str());
  if (!b.dir.empty()) std::printf("bundle %s (config %s, %.2f s)\n", b.dir.string().c_str(), b.hash.c_str(), b.wall_seconds);
}

int run(const std::string& sub, const RunFlags& f) {
  ConfigParse p = load_config(f.config);
  if (!p.ok()) {
    print_issues(f.config, p.issues);
    return kExitError;
  }
  ExperimentConfig c = p.config;
  static const std::map<std::string, std::vector<ExperimentKind>> owners = {
      {"audit", {ExperimentKind::DomainAudit}},
      {"norms", {ExperimentKind::Norms}},
      {"sweep", {ExperimentKind::ResolventSweep}},
      {"spectrum", {ExperimentKind::Spectrum}},
      {"evolve", {ExperimentKind::Evolve, ExperimentKind::Duhamel}},
      {"flat", {ExperimentKind::FlatDispersion}},
  };
  const auto& kinds = owners.at(sub);
  if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end()) {
    std::fprintf(stderr, "%s: kind: '%s' experiments are not run by '%s'\n", f.config.c_str(), kind_name(c.kind), sub.c_str());
    return kExitError;
  }
  if (f.jobs) c.jobs = *f.jobs;
  if (f.seed) c.seed = *f.seed;
  if (f.extent_doubling) c.extent_doubling = true;
  if (!f.out.empty()) c.out = f.out;
  if (c.out.empty()) c.out = "results/" + (c.name.empty() ? std::string(kind_name(c.kind)) : c.name);
  auto issues = check_config(c);
  if (!issues.empty()) {
    print_issues(f.config, issues);
    return kExitError;
  }
  ResultBundle b = run_experiment(c);
  print_verdicts(b);
  if (!b.error.empty()) return kExitError;
  return b.all_pass() ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for Dirichlet waveguides"};
  app.require_subcommand(1);

  std::map<std::string, RunFlags> flags;
  for (const char* name : {"audit", "norms", "sweep", "spectrum", "evolve", "flat"}) {
    RunFlags& f = flags[name];
    static const std::map<std::string, std::string> help = {
        {"audit", "domain audit: repulsivity, flat tail, mask"},
        {"norms", "norm inequality suite on random fields"},
        {"sweep", "resolvent uniformity sweep"},
        {"spectrum", "eigenvalue scan with localization and doubling filters"},
        {"evolve", "Schrodinger, wave or Duhamel evolution with smoothing traces"},
        {"flat", "dispersive decay on a flat product"},
    };
    CLI::App* s = app.add_subcommand(name, help.at(name));
    s->add_option("--config", f.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    s->add_option("--out", f.out, "bundle directory (overrides the config)");
    s->add_option("--jobs", f.jobs, "worker cap")->check(CLI::PositiveNumber);
    s->add_option("--seed", f.seed, "seed (overrides the config)");
    s->add_flag("--extent-doubling", f.extent_doubling, "rerun at twice the extent and compare");
  }

  std::vector<std::string> bundles;
  std::string report_out = "report";
  CLI::App* rep = app.add_subcommand("report", "render plots and a verdict summary from result bundles");
  rep->add_option("bundles", bundles, "bundle directories");
  rep->add_option("--out", report_out, "report directory");

  std::string validate_path;
  CLI::App* val = app.add_subcommand("validate", "check a config and print its full echo");
  val->add_option("--config", validate_path, "experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    for (auto& [name, f] : flags)
      if (app.got_subcommand(name)) return run(name, f);
    if (app.got_subcommand(rep)) {
      ReportFiles r = render_report({bundles.begin(), bundles.end()}, report_out);
      std::fputs(r.summary.c_str(), stdout);
      return kExitPass;
    }
    if (app.got_subcommand(val)) {
      ConfigParse p = load_config(validate_path);
      if (!p.ok()) {
        print_issues(validate_path, p.issues);
        return kExitError;
      }
      std::fputs(config_to_json(p.config).c_str(), stdout);
      return kExitPass;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
