#include "app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "poincare/error.hpp"
#include "poincare/io.hpp"
#include "poincare/langevin.hpp"
#include "poincare/metric_opt.hpp"
#include "poincare/stein.hpp"
#include "problem.hpp"
#include "run_config.hpp"

namespace poincare::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

json to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
json to_json(const Mat2& m) {
  return json::array({json::array({m(0, 0), m(0, 1)}), json::array({m(1, 0), m(1, 1)})});
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  return out;
}

fs::path prepare_out(const RunConfig& cfg) {
  const fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create output directory '" + cfg.out + "'");
  return dir;
}

void write_json(const fs::path& path, const json& doc) {
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
}

EigenSolveOptions eigen_options(const RunConfig& cfg) {
  EigenSolveOptions o;
  o.tol = cfg.eig_tol;
  o.seed += static_cast<unsigned>(cfg.seed);
  return o;
}

MetricField constant_field(const Problem& p, double scale) {
  return MetricField(p.mesh->element_count(), scale * Mat2::Identity());
}

// The metric a sampling or spectrum run works with, and a label for reports.
std::pair<MetricField, std::string> pick_metric(const RunConfig& cfg, const Problem& p) {
  if (cfg.identity) return {constant_field(p, 1.0), "identity"};
  if (cfg.constant) return {constant_field(p, 0.5 * p.field.trace_cov), "constant"};
  const fs::path path = cfg.metric_file.empty() ? fs::path(cfg.out) / "metric.csv" : fs::path(cfg.metric_file);
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, "missing metric: expected '" + path.string() +
                                    "' (run solve first, or pass --identity or --constant)");
  }
  return {read_metric_csv(in, p.mesh->element_count()), path.string()};
}

// --- solve -------------------------------------------------------------------

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Problem p = make_problem(cfg);
  const fs::path dir = prepare_out(cfg);
  err << "solve: " << p.name << ", " << p.mesh->element_count() << " elements, "
      << p.mesh->node_count() << " nodes, trace(Cov) = " << format_double(p.field.trace_cov) << '\n';

  MetricProblem problem(*p.mesh, p.field, eigen_options(cfg));
  OptimizerConfig oc;
  oc.rule = update_rule_from_string(cfg.rule);
  oc.rho = cfg.rho;
  oc.alpha = cfg.alpha;
  oc.iterations = cfg.iterations;
  oc.eig_k = cfg.eig_k;
  oc.early_stop = cfg.early_stop;
  oc.early_stop_tol = cfg.early_stop_tol;
  oc.early_stop_window = cfg.early_stop_window;
  oc.keep_best = cfg.keep_best;

  const auto t0 = std::chrono::steady_clock::now();
  const OptResult res = run(problem, oc, [&](const HistoryRow& row) {
    if (row.iteration % 10 == 0) {
      char line[128];
      std::snprintf(line, sizeof line, "  iteration %4d  lambda2 %.6f  gap32 %.3e\n", row.iteration,
                    row.objective, row.gap32);
      err << line;
    }
  });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    auto f = open_output(dir / "metric.csv");
    write_metric_csv(f, res.metric);
  }
  {
    auto f = open_output(dir / "history.csv");
    write_history_csv(f, res.history, cfg.eig_k);
  }
  if (cfg.dump_matrices) {
    auto fm = open_output(dir / "mass_coo.csv");
    write_coo(fm, problem.mass());
    auto fk = open_output(dir / "stiffness_coo.csv");
    write_coo(fk, problem.stiffness(res.metric));
  }

  const double t = p.field.trace_cov;
  json summary;
  summary["benchmark"] = p.name;
  summary["elements"] = p.mesh->element_count();
  summary["nodes"] = p.mesh->node_count();
  summary["rule"] = cfg.rule;
  summary["rho"] = cfg.rho;
  summary["alpha"] = cfg.alpha;
  summary["lambda2"] = res.lambda2;
  summary["C"] = res.poincare_constant;
  summary["iterations"] = res.iterations;
  summary["best_iteration"] = res.best_iteration;
  summary["lambda2_last"] = res.lambda2_last;
  summary["gap32_final"] = res.gap32;
  summary["trace_cov"] = t;
  summary["trace_constraint_residual"] =
      std::abs(metric_trace_integral(res.metric, p.field) - t) / t;
  write_json(dir / "summary.json", summary);

  char line[160];
  std::snprintf(line, sizeof line, "lambda2 %.6f  C %.6f  best iteration %d of %d  (%.1f s)\n",
                res.lambda2, res.poincare_constant, res.best_iteration, res.iterations, seconds);
  err << line;
  out << (dir / "summary.json").string() << '\n';
  return 0;
}

// --- sample ------------------------------------------------------------------

json report_json(const ChainReport& r) {
  json j;
  j["drift"] = r.drift;
  j["dt"] = r.dt;
  j["steps"] = r.steps;
  j["mean"] = to_json(r.mean);
  j["cov"] = to_json(r.cov);
  j["mean_ref"] = to_json(r.mean_ref);
  j["cov_ref"] = to_json(r.cov_ref);
  j["tau_int"] = r.tau_int;
  j["tau_window"] = r.tau_window;
  j["gap_est"] = r.gap_est;
  j["occupancy_tv"] = r.occupancy_tv;
  j["exited_fraction"] = r.exited_fraction;
  j["exit_flag"] = r.exit_flag;
  return j;
}

int cmd_sample(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Problem p = make_problem(cfg);
  const auto [metric, label] = pick_metric(cfg, p);
  const fs::path dir = prepare_out(cfg);

  SamplerConfig sc;
  sc.drift = drift_mode_from_string(cfg.drift);
  sc.dt = cfg.dt;
  sc.steps = cfg.steps;
  sc.x0 = cfg.x0.value_or(p.field.mean);
  sc.x0_spread = cfg.x0_spread;
  sc.seed = cfg.seed;
  sc.mean = p.field.mean;
  if (sc.drift != DriftMode::kStein) sc.grad_potential = p.grad_potential();

  const MeshMetric mesh_metric(*p.mesh, metric, p.field);
  err << "sample: " << p.name << ", metric " << label << ", drift " << cfg.drift << ", dt "
      << format_double(cfg.dt) << ", " << cfg.steps << " steps x " << cfg.chains << " chains\n";
  const auto traces = run_chains(sc, mesh_metric, cfg.chains, cfg.threads);

  MetricProblem problem(*p.mesh, p.field, eigen_options(cfg));
  const Eigen::VectorXd u2 = problem.spectrum(metric, 1).u2;

  json report;
  report["benchmark"] = p.name;
  report["metric"] = label;
  report["seed"] = cfg.seed;
  std::vector<ChainReport> reports;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    reports.push_back(diagnostics(traces[i], p.field, *p.mesh, u2));
    const std::string name = i == 0 ? "trace.csv" : "trace_" + std::to_string(i) + ".csv";
    auto f = open_output(dir / name);
    write_trace_csv(f, traces[i]);
  }
  const json first = report_json(reports.front());
  for (const auto& [key, value] : first.items()) report[key] = value;
  if (reports.size() > 1) {
    json all = json::array();
    for (const auto& r : reports) all.push_back(report_json(r));
    report["chains"] = all;
  }
  write_json(dir / "report.json", report);
  if (reports.front().exit_flag) {
    err << "warning: " << format_double(100.0 * reports.front().exited_fraction)
        << "% of steps ended outside the mesh\n";
  }
  out << (dir / "report.json").string() << '\n';
  return 0;
}

// --- stein1d / sum-kernel ----------------------------------------------------

std::vector<double> parse_grid(const std::string& grid) {
  std::vector<std::string> parts;
  std::stringstream s(grid);
  std::string cell;
  while (std::getline(s, cell, ':')) parts.push_back(cell);
  double a = 0.0, b = 0.0;
  long n = 0;
  try {
    if (parts.size() != 3) throw std::invalid_argument("parts");
    std::size_t used = 0;
    a = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("a");
    b = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("b");
    n = std::stol(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument("n");
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "grid must look like a:b:n, got '" + grid + "'");
  }
  if (n < 1 || n > 10000000 || !(a <= b) || (n == 1 && a != b)) {
    throw Error(ErrorCode::kInvalidArgument, "grid needs a <= b and n >= 1 (n = 1 only for a = b)");
  }
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    xs[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / (n - 1);
  }
  return xs;
}

int cmd_stein1d(const std::string& dist, const std::string& grid, std::ostream& out) {
  const Density1D d = density_from_token(dist);
  const auto xs = parse_grid(grid);
  out << "x,w\n";
  for (double x : xs) out << format_double(x) << ',' << format_double(kernel_1d(d, x)) << '\n';
  return 0;
}

struct SumKernelArgs {
  std::string dist = "laplace";
  int copies = 1;
  long long samples = 1000000;
  int bins = 30;
  double half_width = 3.0;
  int dims = 2;
};

int cmd_sum_kernel(const RunConfig& cfg, const SumKernelArgs& a, std::ostream& out) {
  if (a.dims != 1 && a.dims != 2) throw Error(ErrorCode::kInvalidArgument, "--dims must be 1 or 2");
  const Density1D d = density_from_token(a.dist, true);
  const KernelEval k1 = tabulated_kernel_1d(d, -20.0, 20.0, 8001);
  const std::vector<KernelEval> blocks(static_cast<std::size_t>(a.dims), k1);
  const std::vector<Density1D> factors(static_cast<std::size_t>(a.dims), d);
  const BinnedKernel b =
      sum_kernel_mc(product_kernel(blocks), product_sampler(factors), a.copies, a.samples,
                    BinSpec::symmetric(a.dims, a.half_width, a.bins), cfg.seed, cfg.threads);
  out << "bin_x,bin_y,w_est,count\n";
  for (int i = 0; i < b.bins.total(); ++i) {
    const Eigen::Vector2d c = b.bins.center(i);
    const auto idx = static_cast<std::size_t>(i);
    out << format_double(c.x()) << ',' << format_double(c.y()) << ','
        << (b.empty(i) ? std::string("nan") : format_double(b.w_est[idx])) << ',' << b.count[idx]
        << '\n';
  }
  return 0;
}

// --- spectrum / export-mesh --------------------------------------------------

int replay_history(const RunConfig& cfg, std::ostream& out) {
  const fs::path path = fs::path(cfg.out) / "history.csv";
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "missing history: expected '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) header.push_back(cell);
  }
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::kParse, "history has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_it = col("iteration"), c_l2 = col("lambda2"), c_gap = col("gap32");
  out << "iteration,lambda2,C,gap32\n";
  int best = -1;
  double best_l2 = -1.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw Error(ErrorCode::kParse, "ragged history row: " + line);
    const double l2 = std::stod(cells[c_l2]);
    out << cells[c_it] << ',' << cells[c_l2] << ',' << format_double(1.0 / l2) << ',' << cells[c_gap] << '\n';
    if (l2 > best_l2) {
      best_l2 = l2;
      best = std::stoi(cells[c_it]);
    }
  }
  if (best < 0) throw Error(ErrorCode::kParse, "history '" + path.string() + "' has no rows");
  out << "# best iteration " << best << " lambda2 " << format_double(best_l2) << '\n';
  return 0;
}

int cmd_spectrum(const RunConfig& cfg, int k, bool replay, std::ostream& out, std::ostream& err) {
  if (replay) return replay_history(cfg, out);
  const Problem p = make_problem(cfg);
  const auto [metric, label] = pick_metric(cfg, p);
  const fs::path dir = prepare_out(cfg);
  MetricProblem problem(*p.mesh, p.field, eigen_options(cfg));
  const Spectrum s = problem.spectrum(metric, k);
  err << "spectrum: " << p.name << ", metric " << label << '\n';
  auto f = open_output(dir / "spectrum.csv");
  f << "index,lambda\n";
  out << "index,lambda\n";
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
    const std::string row = std::to_string(i + 2) + ',' + format_double(s.eigenvalues[i]) + '\n';
    f << row;
    out << row;
  }
  return 0;
}

int cmd_export_mesh(const RunConfig& cfg, std::ostream& out) {
  const Problem p = make_problem(cfg);
  const fs::path dir = prepare_out(cfg);
  {
    auto f = open_output(dir / "mesh.json");
    save_mesh(f, *p.mesh);
  }
  auto f = open_output(dir / "elements.csv");
  f << "elem_id,cx,cy,area,mass\n";
  for (std::size_t m = 0; m < p.mesh->element_count(); ++m) {
    const auto& g = p.mesh->geom(m);
    f << m << ',' << format_double(g.centroid.x()) << ',' << format_double(g.centroid.y()) << ','
      << format_double(g.area) << ',' << format_double(p.field.element_mass[m]) << '\n';
  }
  out << (dir / "mesh.json").string() << '\n';
  return 0;
}

void report_error(std::ostream& err, std::string_view code, const std::string& message) {
  json j;
  j["error"] = code;
  j["message"] = message;
  err << j.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal metrics for Riemannian Poincare inequalities on triangulated domains",
               "poincare"};
  app.require_subcommand(1);
  app.fallthrough();

  // Options that override config keys; applied after the config file.
  std::vector<std::pair<CLI::Option*, std::string>> bound;
  std::vector<std::pair<CLI::Option*, std::string>> flags;
  std::map<std::string, std::string> values;
  auto bind = [&](CLI::App* on, const std::string& name, const std::string& key,
                  const std::string& help) {
    bound.emplace_back(on->add_option(name, values[key], help), key);
  };
  auto flag = [&](CLI::App* on, const std::string& name, const std::string& key,
                  const std::string& help) {
    flags.emplace_back(on->add_flag(name, help), key);
  };

  std::string config_path;
  app.add_option("--config", config_path, "key=value config file with [sections]");
  bind(&app, "--benchmark", "run.benchmark", "trimodal, ring, hshape, hshape-eps, uniform-square, custom");
  bind(&app, "--mesh", "mesh.file", "JSON mesh file (replaces the benchmark mesh)");
  bind(&app, "--masses", "density.masses", "elem_id,mass CSV for a tabulated measure");
  bind(&app, "--nx", "mesh.nx", "grid cells per axis (benchmark meshes)");
  bind(&app, "--out", "run.out", "output directory");
  bind(&app, "--seed", "run.seed", "random seed");
  bind(&app, "--threads", "run.threads", "worker threads");
  flag(&app, "--dump-matrices", "run.dump_matrices", "also write mass and stiffness in COO form");

  auto* solve = app.add_subcommand("solve", "optimize the metric, write metric.csv, history.csv, summary.json");
  bind(solve, "--rule", "optimizer.rule", "ga, momentum or nesterov");
  bind(solve, "--rho", "optimizer.rho", "step size");
  bind(solve, "--alpha", "optimizer.alpha", "momentum factor");
  bind(solve, "--iters", "optimizer.iterations", "iteration budget");
  bind(solve, "--eig-k", "optimizer.eig_k", "eigenvalues tracked per iteration");
  auto* no_early = solve->add_flag("--no-early-stop", "run the full iteration budget");
  auto* last = solve->add_flag("--last", "return the last iterate instead of the best one");

  auto* sample = app.add_subcommand("sample", "run the Langevin sampler, write trace.csv and report.json");
  bind(sample, "--dt", "sampler.dt", "time step");
  bind(sample, "--steps", "sampler.steps", "steps per chain");
  bind(sample, "--drift", "sampler.drift", "raw, smoothed or stein");
  bind(sample, "--chains", "sampler.chains", "independent chains");
  bind(sample, "--x0", "sampler.x0", "start point x,y (default: the mean)");
  bind(sample, "--metric", "sampler.metric", "metric CSV (default: <out>/metric.csv)");
  flag(sample, "--identity", "sampler.identity", "use W = I");
  flag(sample, "--constant", "sampler.constant", "use the trace-normalized constant metric");

  auto* stein = app.add_subcommand("stein1d", "tabulate a closed-form 1D Stein kernel as x,w");
  std::string dist, grid;
  stein->add_option("--dist", dist, "gauss, laplace or cauchy:<beta>")->required();
  stein->add_option("--grid", grid, "a:b:n")->required();

  auto* sumk = app.add_subcommand("sum-kernel", "Monte Carlo Stein kernel of a normalized sum");
  SumKernelArgs ska;
  sumk->add_option("--dist", ska.dist, "gauss, laplace or cauchy:<beta> (standardized)");
  sumk->add_option("--copies", ska.copies, "N, number of summed copies");
  sumk->add_option("--samples", ska.samples, "Monte Carlo draws of the sum");
  sumk->add_option("--bins", ska.bins, "bins per axis");
  sumk->add_option("--half-width", ska.half_width, "bins cover [-w, w] per axis");
  sumk->add_option("--dims", ska.dims, "1 or 2");

  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues for a stored metric, or replay history.csv");
  int k = 5;
  bool replay = false;
  spectrum->add_option("-k,--count", k, "number of nonzero eigenvalues");
  spectrum->add_flag("--replay", replay, "print <out>/history.csv with C = 1/lambda2");
  bind(spectrum, "--metric", "sampler.metric", "metric CSV (default: <out>/metric.csv)");
  flag(spectrum, "--identity", "sampler.identity", "use W = I");
  flag(spectrum, "--constant", "sampler.constant", "use the trace-normalized constant metric");

  auto* export_mesh = app.add_subcommand("export-mesh", "write mesh.json and elements.csv");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw Error(ErrorCode::kIo, "cannot open config '" + config_path + "'");
      load_config(in, cfg);
    }
    for (const auto& [opt, key] : bound) {
      if (opt->count() > 0) apply_key(cfg, key, values[key]);
    }
    for (const auto& [opt, key] : flags) {
      if (opt->count() > 0) apply_key(cfg, key, "true");
    }
    if (no_early->count() > 0) cfg.early_stop = false;
    if (last->count() > 0) cfg.keep_best = false;
    cfg.validate();

    if (solve->parsed()) return cmd_solve(cfg, out, err);
    if (sample->parsed()) return cmd_sample(cfg, out, err);
    if (stein->parsed()) return cmd_stein1d(dist, grid, out);
    if (sumk->parsed()) return cmd_sum_kernel(cfg, ska, out);
    if (spectrum->parsed()) return cmd_spectrum(cfg, k, replay, out, err);
    if (export_mesh->parsed()) return cmd_export_mesh(cfg, out);
  } catch (const Error& e) {
    report_error(err, to_string(e.code()), e.what());
    const bool usage = e.code() == ErrorCode::kInvalidArgument || e.code() == ErrorCode::kParse;
    return usage ? 2 : 1;
  } catch (const std::exception& e) {
    report_error(err, "internal", e.what());
    return 1;
  }
  return 2;
}

}  // namespace poincare::cli
