#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "perflod/perflod.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

struct Overrides {
  std::string config;
  std::string h_fine;
  std::vector<std::string> eta;
  std::vector<std::string> H;
  std::vector<std::string> interp;
  std::string k;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string cache_dir;
  bool paper_scale = false;
  bool timing = false;
};

perflod::ExperimentConfig resolve(perflod::Command command, const Overrides& o) {
  using namespace perflod;
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = load_config(o.config, command);
  } else {
    cfg.command = command;
  }
  if (o.paper_scale) apply_paper_scale(cfg);
  if (!o.h_fine.empty()) cfg.h_fine = parse_length(o.h_fine);
  if (!o.eta.empty()) {
    cfg.eta_list.clear();
    for (const auto& e : o.eta) cfg.eta_list.push_back(parse_length(e));
    cfg.geometry.eta = cfg.eta_list.front();
  }
  if (!o.H.empty()) {
    cfg.H_list.clear();
    for (const auto& h : o.H) cfg.H_list.push_back(parse_length(h));
  }
  if (!o.interp.empty()) {
    cfg.interp.clear();
    for (const auto& s : o.interp) cfg.interp.push_back(parse_interp_kind(s));
  }
  if (!o.k.empty()) {
    if (o.k == "log") cfg.k_fixed.reset();
    else cfg.k_fixed = std::stoi(o.k);
  }
  if (!o.output.empty()) cfg.output = o.output;
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (!o.cache_dir.empty()) cfg.cache_dir = o.cache_dir;
  if (o.timing) cfg.record_timing = true;
  return cfg;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale solver and Poincare constant studies for perforated domains"};
  app.require_subcommand(1);
  Overrides o;
  const std::vector<std::pair<std::string, perflod::Command>> commands{
      {"convergence", perflod::Command::Convergence},
      {"decay", perflod::Command::Decay},
      {"poincare", perflod::Command::Poincare},
      {"solve", perflod::Command::SolveOnce}};
  for (const auto& [name, cmd] : commands) {
    auto* sub = app.add_subcommand(name, "run the " + name + " study");
    sub->add_option("--config", o.config, "JSON experiment description");
    sub->add_option("--h-fine", o.h_fine, "fine mesh size, e.g. 2^-7");
    sub->add_option("--eta", o.eta, "microstructure length(s)");
    sub->add_option("--H", o.H, "coarse mesh size(s)");
    sub->add_option("--k", o.k, "patch layers: integer or 'log'");
    sub->add_option("--interp", o.interp, "projective and/or clement");
    sub->add_option("--output", o.output, "CSV path (stdout when omitted)");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--threads", o.threads, "worker threads for corrector solves");
    sub->add_option("--cache-dir", o.cache_dir, "directory for cached reference solutions");
    sub->add_flag("--paper-scale", o.paper_scale, "h = 2^-8 and eta down to 2^-6");
    sub->add_flag("--timing", o.timing, "fill the wall_ms column");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_config;
  }

  perflod::Command command = perflod::Command::Convergence;
  for (const auto& [name, cmd] : commands)
    if (app.got_subcommand(name)) command = cmd;

  try {
    const auto cfg = resolve(command, o);
    const auto result = perflod::run_experiment(cfg);
    std::ostream* summary = &std::cout;
    if (cfg.output.empty()) {
      perflod::write_csv(std::cout, result.records);
      summary = &std::cerr;
    } else {
      std::ofstream out(cfg.output);
      if (!out) throw perflod::ConfigError("cannot write output file '" + cfg.output + "'");
      perflod::write_csv(out, result.records);
    }
    for (const auto& line : result.summary) *summary << line << '\n';
    if (result.any_failed()) {
      std::cerr << "some rows failed; see the status column\n";
      return exit_numerical;
    }
  } catch (const perflod::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return exit_config;
  } catch (const perflod::GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << '\n';
    return exit_config;
  } catch (const perflod::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return exit_config;
  }
  return 0;
}
