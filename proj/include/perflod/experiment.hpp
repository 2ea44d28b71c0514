#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "perflod/dyadic.hpp"
#include "perflod/errors.hpp"
#include "perflod/fem.hpp"
#include "perflod/geometry.hpp"
#include "perflod/interp.hpp"
#include "perflod/lod.hpp"
#include "perflod/mesh.hpp"
#include "perflod/poincare.hpp"

namespace perflod {

enum class Command { Convergence, Decay, Poincare, SolveOnce };
enum class Forcing { Step, Constant };

inline std::string to_string(Command c) {
  switch (c) {
  case Command::Convergence: return "convergence";
  case Command::Decay: return "decay";
  case Command::Poincare: return "poincare";
  case Command::SolveOnce: return "solve";
  }
  return "unknown";
}

inline Command parse_command(const std::string& s) {
  if (s == "convergence") return Command::Convergence;
  if (s == "decay") return Command::Decay;
  if (s == "poincare") return Command::Poincare;
  if (s == "solve" || s == "solve_once") return Command::SolveOnce;
  throw ConfigError("unknown command '" + s + "'");
}

inline std::string to_string(Forcing f) { return f == Forcing::Step ? "step" : "constant"; }

inline Forcing parse_forcing(const std::string& s) {
  if (s == "step") return Forcing::Step;
  if (s == "constant" || s == "unit") return Forcing::Constant;
  throw ConfigError("unknown forcing '" + s + "'");
}

inline ScalarField forcing_field(Forcing f) { return f == Forcing::Step ? ScalarField(step_forcing) : ScalarField(unit_forcing); }

struct ExperimentConfig {
  Command command = Command::Convergence;
  GeometrySpec geometry{GeometryKind::PeriodicSquares, 1.0 / 16.0, 1.0 / 16.0};
  double h_fine = 1.0 / 128.0;
  std::vector<double> H_list{0.25, 0.125, 0.0625, 0.03125};
  std::optional<int> k_fixed; // unset: k = ceil(log2(1/H)) + 1
  std::vector<int> k_list{1, 2, 3, 4, 5, 6};
  std::vector<double> eta_list; // empty: geometry.eta only
  std::vector<InterpKind> interp{InterpKind::ProjectiveL2};
  std::string output;
  std::uint64_t seed = 1;
  Forcing forcing = Forcing::Step;
  int threads = 1;
  std::string cache_dir;
  bool paper_scale = false;
  bool record_timing = false;
  double reference_tolerance = 1e-12;

  std::vector<double> etas() const { return eta_list.empty() ? std::vector<double>{geometry.eta} : eta_list; }
};

/// k = ceil(log2(1/H)) + 1.
inline int log_layers(double H) { return static_cast<int>(std::ceil(std::log2(1.0 / H) - 1e-12)) + 1; }

inline int layers_for(const ExperimentConfig& cfg, double H) { return cfg.k_fixed ? *cfg.k_fixed : log_layers(H); }

/// Switches a config to the full-size protocol: h = 2^-8, eta down to 2^-6.
inline void apply_paper_scale(ExperimentConfig& cfg) {
  cfg.paper_scale = true;
  cfg.h_fine = 1.0 / 256.0;
  if (cfg.command == Command::Decay) {
    cfg.geometry.eta = 1.0 / 64.0;
    cfg.eta_list.clear();
  } else if (cfg.command == Command::Convergence) {
    cfg.eta_list = {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0};
  }
}

inline void validate(const ExperimentConfig& cfg) {
  dyadic_exponent(cfg.h_fine);
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (cfg.interp.empty()) throw ConfigError("no interpolation operator selected");
  if (cfg.command != Command::Poincare) {
    if (cfg.H_list.empty()) throw ConfigError("H_list is empty");
    for (double H : cfg.H_list) {
      dyadic_exponent(H);
      if (H < cfg.h_fine) throw ConfigError("coarse size " + format_length(H) + " is below h_fine");
      if (H > 0.5) throw ConfigError("coarse size must be at most 2^-1");
    }
    if (cfg.k_fixed && *cfg.k_fixed < 0) throw ConfigError("fixed k must be nonnegative");
  }
  if (cfg.command == Command::Decay) {
    if (cfg.k_list.empty()) throw ConfigError("k_list is empty");
    for (std::size_t i = 0; i < cfg.k_list.size(); ++i)
      if (cfg.k_list[i] < 0 || (i > 0 && cfg.k_list[i] <= cfg.k_list[i - 1]))
        throw ConfigError("k_list must be nonnegative and strictly ascending");
  }
  for (double eta : cfg.etas()) {
    GeometrySpec g = cfg.geometry;
    g.eta = eta;
    validate(g);
  }
}

/// One CSV row. Unset optionals are written as empty cells.
struct ExperimentRecord {
  std::string command;
  std::string geometry;
  std::optional<double> eta;
  std::optional<double> H;
  std::optional<double> h;
  std::optional<int> k;
  std::string interp;
  std::optional<double> h1_error, h1_rel, l2_error, l2_rel;
  std::optional<double> value;
  std::string method;
  std::optional<int> s_max, r_max;
  std::optional<double> wall_ms;
  std::string status = "ok";
  int corrector_count = 0;
};

struct ExperimentResult {
  std::vector<ExperimentRecord> records;
  std::vector<std::string> summary;
  bool any_failed() const {
    for (const auto& r : records)
      if (r.status != "ok") return true;
    return false;
  }
};

inline constexpr const char* csv_header =
    "command,geometry,eta,H,h,k,interp,h1_error,h1_rel,l2_error,l2_rel,value,method,s_max,r_max,wall_ms,status";

namespace detail {

inline std::string csv_number(const std::optional<double>& v) {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10e", *v);
  return buf;
}

inline std::string csv_length(const std::optional<double>& v) { return v ? format_length(*v) : ""; }

inline std::string csv_int(const std::optional<int>& v) { return v ? std::to_string(*v) : ""; }

inline std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

} // namespace detail

inline void write_csv(std::ostream& out, const std::vector<ExperimentRecord>& rows) {
  out << csv_header << '\n';
  for (const auto& r : rows) {
    out << detail::csv_text(r.command) << ',' << detail::csv_text(r.geometry) << ',' << detail::csv_length(r.eta) << ','
        << detail::csv_length(r.H) << ',' << detail::csv_length(r.h) << ',' << detail::csv_int(r.k) << ','
        << detail::csv_text(r.interp) << ',' << detail::csv_number(r.h1_error) << ',' << detail::csv_number(r.h1_rel)
        << ',' << detail::csv_number(r.l2_error) << ',' << detail::csv_number(r.l2_rel) << ','
        << detail::csv_number(r.value) << ',' << detail::csv_text(r.method) << ',' << detail::csv_int(r.s_max) << ','
        << detail::csv_int(r.r_max) << ',';
    if (r.wall_ms) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1f", *r.wall_ms);
      out << buf;
    }
    out << ',' << detail::csv_text(r.status) << '\n';
  }
}

inline std::string csv_string(const std::vector<ExperimentRecord>& rows) {
  std::ostringstream s;
  write_csv(s, rows);
  return s.str();
}

struct LinearFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  int points = 0;
};

/// Least-squares line y = slope x + intercept with coefficient of determination.
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LinearFit f;
  f.points = static_cast<int>(x.size());
  if (x.size() < 2 || x.size() != y.size()) return f;
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    sse += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

/// Mean of log2(e(H) / e(H/2)) over consecutive entries of a halving sequence.
inline double observed_order(const std::vector<double>& errors) {
  if (errors.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) s += std::log2(errors[i] / errors[i + 1]);
  return s / static_cast<double>(errors.size() - 1);
}

/// FNV-1a, used for reference cache file names.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Fine Galerkin solution, optionally cached on disk as one value per line.
inline FineFunction reference_solution(const PerforatedMesh& pm, const SparseOperator& a, const FineFunction& load,
                                       const ExperimentConfig& cfg) {
  std::string path;
  if (!cfg.cache_dir.empty()) {
    char key[256];
    std::snprintf(key, sizeof key, "%s|%.17g|%.17g|%.17g|%s|%.3g|%d", to_string(pm.spec.kind).c_str(), pm.spec.eta,
                  pm.spec.fixed_period, pm.h(), to_string(cfg.forcing).c_str(), cfg.reference_tolerance,
                  pm.free_count());
    char name[64];
    std::snprintf(name, sizeof name, "ref_%016llx.txt", static_cast<unsigned long long>(fnv1a(key)));
    path = (std::filesystem::path(cfg.cache_dir) / name).string();
    std::ifstream in(path);
    if (in) {
      FineFunction u(pm.free_count());
      Eigen::Index i = 0;
      double v = 0.0;
      while (i < u.size() && in >> v) u[i++] = v;
      if (i == u.size() && relative_residual(a, u, load) <= cfg.reference_tolerance) return u;
    }
  }
  const FineFunction u = solve_spd(a, load, cfg.reference_tolerance);
  if (!path.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.cache_dir, ec);
    std::ofstream out(path);
    char buf[32];
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g\n", u[i]);
      out << buf;
    }
  }
  return u;
}

namespace detail {

struct FineProblem {
  PerforatedMesh pm;
  SparseOperator a;
  SparseOperator m;
  FineFunction load;
  FineFunction reference;
  double ref_h1 = 0.0;
  double ref_l2 = 0.0;
};

inline FineProblem fine_problem(const ExperimentConfig& cfg, double eta) {
  GeometrySpec g = cfg.geometry;
  g.eta = eta;
  FineProblem fp{perforate(build_structured_mesh(1 << dyadic_exponent(cfg.h_fine)), g), {}, {}, {}, {}, 0.0, 0.0};
  fp.a = assemble_stiffness(fp.pm);
  fp.m = assemble_mass(fp.pm);
  fp.load = assemble_load(fp.pm, forcing_field(cfg.forcing));
  fp.reference = reference_solution(fp.pm, fp.a, fp.load, cfg);
  fp.ref_h1 = h1_seminorm(fp.a, fp.reference);
  fp.ref_l2 = l2_norm(fp.m, fp.reference);
  return fp;
}

inline double safe_ratio(double a, double b) { return b > 0.0 ? a / b : a; }

inline void fill_errors(ExperimentRecord& r, const FineProblem& fp, const FineFunction& u) {
  const FineFunction e = fp.reference - u;
  r.h1_error = h1_seminorm(fp.a, e);
  r.l2_error = l2_norm(fp.m, e);
  r.h1_rel = safe_ratio(*r.h1_error, fp.ref_h1);
  r.l2_rel = safe_ratio(*r.l2_error, fp.ref_l2);
}

inline ExperimentRecord base_record(const ExperimentConfig& cfg, double eta) {
  ExperimentRecord r;
  r.command = to_string(cfg.command);
  r.geometry = to_string(cfg.geometry.kind);
  r.eta = eta;
  r.h = cfg.h_fine;
  return r;
}

inline std::string failure(const std::exception& e) { return std::string("failed: ") + e.what(); }

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

} // namespace detail

/// One multiscale solve per (eta, interp, H) against the same-mesh reference.
inline ExperimentResult run_convergence(const ExperimentConfig& cfg) {
  validate(cfg);
  ExperimentResult res;
  for (double eta : cfg.etas()) {
    const auto fp = detail::fine_problem(cfg, eta);
    for (InterpKind kind : cfg.interp) {
      std::vector<double> errs;
      bool complete = true;
      for (double H : cfg.H_list) {
        const auto t0 = std::chrono::steady_clock::now();
        auto r = detail::base_record(cfg, eta);
        r.H = H;
        r.k = layers_for(cfg, H);
        r.interp = to_string(kind);
        r.method = "localized";
        try {
          const auto cs = build_coarse_space(fp.pm, H);
          const auto op = build_interp(kind, fp.pm, cs);
          const auto basis = build_corrector_basis(cs, op, fp.a, *r.k, {cfg.threads, 32});
          const auto ms = multiscale_solve(fp.pm, cs, basis, fp.a, fp.load, kind);
          detail::fill_errors(r, fp, ms.fine);
          r.corrector_count = cs.node_count();
          errs.push_back(*r.h1_error);
        } catch (const NumericalError& e) {
          r.status = detail::failure(e);
          complete = false;
        }
        if (cfg.record_timing) r.wall_ms = detail::elapsed_ms(t0);
        res.records.push_back(r);
      }
      const std::string tag = to_string(cfg.geometry.kind) + " eta=" + format_length(eta) + " " + to_string(kind);
      if (complete && errs.size() >= 2)
        res.summary.push_back(tag + ": observed H1 order " + detail::fmt("%.3f", observed_order(errs)));
      else
        res.summary.push_back(tag + ": observed order unavailable");
    }
  }
  return res;
}

/// Largest H1 seminorm over columns of Q_a - Q_b.
inline double max_column_energy(const SparseOperator& a, const SparseOperator& qa, const SparseOperator& qb) {
  const SparseOperator d = qa - qb;
  double worst = 0.0;
  for (int j = 0; j < d.outerSize(); ++j) {
    const FineFunction c = d.col(j);
    worst = std::max(worst, h1_seminorm(a, c));
  }
  return worst;
}

/// Errors for increasing patch layers at one (eta, H), plus the saturated
/// and global-corrector solutions. `value` holds the corrector truncation
/// error max_y |Q(lambda_y) - Q_k(lambda_y)|_1.
inline ExperimentResult run_decay(const ExperimentConfig& cfg) {
  validate(cfg);
  ExperimentResult res;
  const double eta = cfg.etas().front();
  const double H = cfg.H_list.front();
  const auto fp = detail::fine_problem(cfg, eta);
  for (InterpKind kind : cfg.interp) {
    const std::string tag = to_string(cfg.geometry.kind) + " eta=" + format_length(eta) + " H=" + format_length(H) +
                            " " + to_string(kind);
    try {
      const auto cs = build_coarse_space(fp.pm, H);
      const auto op = build_interp(kind, fp.pm, cs);
      auto t0 = std::chrono::steady_clock::now();
      const auto ideal = ideal_corrector_basis(cs, op, fp.a);
      const auto ideal_sol = multiscale_solve(fp.pm, cs, ideal, fp.a, fp.load, kind);
      const double ideal_ms = detail::elapsed_ms(t0);
      const int k_sat = cs.hierarchy.saturation_layer();

      std::vector<int> ks = cfg.k_list;
      if (ks.back() < k_sat) ks.push_back(k_sat);
      std::vector<double> ref_err, trunc;
      for (int k : ks) {
        t0 = std::chrono::steady_clock::now();
        auto r = detail::base_record(cfg, eta);
        r.H = H;
        r.k = k;
        r.interp = to_string(kind);
        r.method = k == k_sat ? "saturated" : "localized";
        try {
          const auto basis = build_corrector_basis(cs, op, fp.a, k, {cfg.threads, 32});
          const auto ms = multiscale_solve(fp.pm, cs, basis, fp.a, fp.load, kind);
          detail::fill_errors(r, fp, ms.fine);
          r.value = max_column_energy(fp.a, ideal.Q, basis.Q);
          r.corrector_count = cs.node_count();
          ref_err.push_back(*r.h1_error);
          trunc.push_back(*r.value);
        } catch (const NumericalError& e) {
          r.status = detail::failure(e);
        }
        if (cfg.record_timing) r.wall_ms = detail::elapsed_ms(t0);
        res.records.push_back(r);
      }
      auto r = detail::base_record(cfg, eta);
      r.H = H;
      r.interp = to_string(kind);
      r.method = "ideal";
      detail::fill_errors(r, fp, ideal_sol.fine);
      r.value = 0.0;
      if (cfg.record_timing) r.wall_ms = ideal_ms;
      res.records.push_back(r);

      const double plateau = *r.h1_error;
      std::vector<double> xs, ys, xt, yt;
      for (std::size_t i = 0; i < ref_err.size() && i < ks.size(); ++i) {
        if (ref_err[i] > plateau * (1.0 + 1e-3)) {
          xs.push_back(ks[i]);
          ys.push_back(std::log(ref_err[i]));
        }
        if (trunc[i] > 1e-12 * trunc.front()) {
          xt.push_back(ks[i]);
          yt.push_back(std::log(trunc[i]));
        }
      }
      const auto fs = fit_line(xs, ys);
      const auto ft = fit_line(xt, yt);
      res.summary.push_back(tag + ": plateau H1 error " + detail::fmt("%.6e", plateau) + ", saturation k=" +
                            std::to_string(k_sat));
      res.summary.push_back(tag + ": pre-plateau fit of log e(k) slope " + detail::fmt("%.4f", fs.slope) +
                            " R^2 " + detail::fmt("%.4f", fs.r2) + " over " + std::to_string(fs.points) + " points");
      res.summary.push_back(tag + ": corrector truncation fit slope " + detail::fmt("%.4f", ft.slope) + " R^2 " +
                            detail::fmt("%.4f", ft.r2) + " over " + std::to_string(ft.points) + " points");
    } catch (const NumericalError& e) {
      auto r = detail::base_record(cfg, eta);
      r.H = H;
      r.interp = to_string(kind);
      r.method = "ideal";
      r.status = detail::failure(e);
      res.records.push_back(r);
      res.summary.push_back(tag + ": failed");
    }
  }
  return res;
}

/// Representative patch of size H for the Poincare study: a window of the
/// periodic lattice, or the unit filament/unperforated square scaled to H
/// (the normalized constants are scale invariant).
struct PoincarePatches {
  PatchMesh partition;
  PatchMesh oracle;
  int partition_cells = 0;
  int oracle_cells = 0;
};

inline PoincarePatches poincare_patches(const GeometrySpec& spec, double H, int min_oracle_cells = 64) {
  PoincarePatches p;
  switch (spec.kind) {
  case GeometryKind::PeriodicSquares: {
    if (spec.eta > H) throw ConfigError("poincare: eta must not exceed the patch size");
    p.partition_cells = static_cast<int>(std::lround(4.0 * H / spec.eta));
    p.oracle_cells = std::max(p.partition_cells, min_oracle_cells);
    p.partition = window_patch(spec, {H, H}, H, p.partition_cells);
    p.oracle = window_patch(spec, {H, H}, H, p.oracle_cells);
    return p;
  }
  case GeometryKind::Filament: {
    GeometrySpec unit = spec;
    unit.eta = spec.eta / H;
    validate(unit);
    p.partition_cells = static_cast<int>(std::lround(4.0 / unit.eta));
    p.oracle_cells = std::max(p.partition_cells, min_oracle_cells);
    p.partition = unit_patch(unit, p.partition_cells);
    p.oracle = unit_patch(unit, p.oracle_cells);
    return p;
  }
  case GeometryKind::Unperforated: {
    p.partition_cells = 16;
    p.oracle_cells = std::max(16, min_oracle_cells);
    p.partition = unit_patch(spec, p.partition_cells);
    p.oracle = unit_patch(spec, p.oracle_cells);
    return p;
  }
  case GeometryKind::Dumbbell: break;
  }
  throw ConfigError("poincare study supports periodic_squares, filament and unperforated geometries");
}

/// Oracle and the three path bounds on one patch per eta.
inline ExperimentResult run_poincare(const ExperimentConfig& cfg) {
  validate(cfg);
  ExperimentResult res;
  const double H = cfg.H_list.empty() ? 0.25 : cfg.H_list.front();
  std::vector<double> oracle_values, etas_used, l64_values;
  for (double eta : cfg.etas()) {
    GeometrySpec g = cfg.geometry;
    g.eta = eta;
    auto row = [&](const std::string& method) {
      auto r = detail::base_record(cfg, eta);
      r.H = H;
      r.h = std::nullopt;
      r.method = method;
      return r;
    };
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const auto patches = poincare_patches(g, H);
      const double h_part = H / patches.partition_cells;
      const auto graph = build_partition_graph(patches.partition);
      const auto oracle = rayleigh_oracle(patches.oracle);
      const std::array<PoincareEstimate, 4> est{oracle, bound_telescoped(graph), bound_lemma_6_4(graph),
                                                bound_lemma_6_6(graph)};
      for (const auto& e : est) {
        auto r = row(to_string(e.method));
        r.h = e.method == PoincareMethod::RayleighOracle ? H / patches.oracle_cells : h_part;
        r.value = e.method == PoincareMethod::PathLemma66 ? e.structural_factor : e.value;
        if (e.method != PoincareMethod::RayleighOracle) {
          r.s_max = e.s_max;
          r.r_max = e.r_max;
        }
        if (cfg.record_timing) r.wall_ms = detail::elapsed_ms(t0);
        res.records.push_back(r);
      }
      oracle_values.push_back(oracle.value);
      l64_values.push_back(est[2].value);
      etas_used.push_back(eta);
    } catch (const std::exception& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      auto r = row("rayleigh");
      r.status = detail::failure(e);
      res.records.push_back(r);
    }
  }
  if (!oracle_values.empty()) {
    const auto [lo, hi] = std::minmax_element(oracle_values.begin(), oracle_values.end());
    res.summary.push_back(to_string(cfg.geometry.kind) + ": oracle C_P max/min ratio " + detail::fmt("%.4f", *hi / *lo));
    std::vector<double> x, y;
    for (std::size_t i = 0; i < etas_used.size(); ++i) {
      x.push_back(std::log(H / etas_used[i]));
      y.push_back(std::log(oracle_values[i]));
    }
    if (x.size() >= 2) {
      const auto f = fit_line(x, y);
      res.summary.push_back(to_string(cfg.geometry.kind) + ": oracle C_P ~ (H/eta)^p with p = " +
                            detail::fmt("%.3f", f.slope));
      y.clear();
      for (double v : l64_values) y.push_back(std::log(v * v));
      const auto f2 = fit_line(x, y);
      res.summary.push_back(to_string(cfg.geometry.kind) + ": path bound C_P^2 ~ (H/eta)^p with p = " +
                            detail::fmt("%.3f", f2.slope));
    }
  }
  return res;
}

/// Single multiscale solve at H_list[0].
inline ExperimentResult run_solve(const ExperimentConfig& cfg) {
  validate(cfg);
  ExperimentResult res;
  const double eta = cfg.etas().front();
  const double H = cfg.H_list.front();
  const auto fp = detail::fine_problem(cfg, eta);
  for (InterpKind kind : cfg.interp) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = detail::base_record(cfg, eta);
    r.H = H;
    r.k = layers_for(cfg, H);
    r.interp = to_string(kind);
    r.method = "localized";
    try {
      const auto cs = build_coarse_space(fp.pm, H);
      const auto op = build_interp(kind, fp.pm, cs);
      const auto basis = build_corrector_basis(cs, op, fp.a, *r.k, {cfg.threads, 32});
      const auto ms = multiscale_solve(fp.pm, cs, basis, fp.a, fp.load, kind);
      detail::fill_errors(r, fp, ms.fine);
      r.corrector_count = cs.node_count();
      res.summary.push_back(to_string(kind) + ": relative H1 error " + detail::fmt("%.6e", *r.h1_rel));
    } catch (const NumericalError& e) {
      r.status = detail::failure(e);
      res.summary.push_back(to_string(kind) + ": failed");
    }
    if (cfg.record_timing) r.wall_ms = detail::elapsed_ms(t0);
    res.records.push_back(r);
  }
  return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.command) {
  case Command::Convergence: return run_convergence(cfg);
  case Command::Decay: return run_decay(cfg);
  case Command::Poincare: return run_poincare(cfg);
  case Command::SolveOnce: return run_solve(cfg);
  }
  throw ConfigError("unknown command");
}

} // namespace perflod
