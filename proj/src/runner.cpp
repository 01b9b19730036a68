#include "stochflow/runner.hpp"

#include "stochflow/error.hpp"
#include "stochflow/flow.hpp"
#include "stochflow/inverse.hpp"
#include "stochflow/limits.hpp"
#include "stochflow/noise.hpp"
#include "stochflow/norms.hpp"
#include "stochflow/parallel.hpp"
#include "stochflow/spde.hpp"

#include <json.hpp>

#include <chrono>
#include <concepts>
#include <fstream>
#include <memory>

namespace stochflow {

CoefficientField build_field(const ExperimentConfig& config) {
  CoefficientField field = families::by_name(config.family.name, config.family.params, config.family.dim);
  if (config.jump) field = families::with_jump(field, families::jump_by_name(config.jump->name, config.jump->params));
  return field.with_regularity(config.regularity);
}

MarkMeasure build_measure(const ExperimentConfig& config) { return MarkMeasure(config.atoms); }

Box build_box(const ExperimentConfig& config) {
  const int d = config.family.dim;
  Box box = Box::cube(d, 1.0);
  for (int a = 0; a < d; ++a) {
    if (!config.lower.empty()) box.lower(a) = config.lower[static_cast<std::size_t>(a)];
    if (!config.upper.empty()) box.upper(a) = config.upper[static_cast<std::size_t>(a)];
  }
  return box;
}

namespace {

/// One CSV record; cells are joined by commas and the line ends with LF.
class Line {
 public:
  Line& operator<<(double v) { return cell(format_double(v)); }
  template <std::integral T>
  Line& operator<<(T v) {
    return cell(std::to_string(v));
  }
  Line& operator<<(const std::string& v) { return cell(v); }
  Line& operator<<(const char* v) { return cell(v); }
  Line& operator<<(const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) *this << v(i);
    return *this;
  }

  std::string str() const { return text_ + '\n'; }

 private:
  Line& cell(const std::string& s) {
    if (!first_) text_ += ',';
    text_ += s;
    first_ = false;
    return *this;
  }

  std::string text_;
  bool first_ = true;
};

std::string components(const std::string& prefix, int d) {
  std::string out;
  for (int i = 0; i < d; ++i) out += (i ? "," : "") + prefix + "_" + std::to_string(i);
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << content;
  if (!out) fail(ErrorKind::InvalidArgument, "failed writing " + path.string());
}

struct Context {
  const ExperimentConfig& config;
  CoefficientField field;
  MarkMeasure measure;
  Box box;
  SpatialGrid grid;
  Scheme scheme;
  double tol;
  int workers;

  std::shared_ptr<const NoiseRecord> noise(std::size_t path) const {
    return std::make_shared<const NoiseRecord>(generate_noise(measure, field.brownian_count(), config.s,
                                                              config.t_end, config.base_steps, config.seed, path));
  }
};

/// Runs `body` for every path in parallel and concatenates the per-path text in path order.
std::string per_path(const Context& ctx, const std::function<std::string(std::size_t)>& body) {
  std::vector<std::string> chunks(static_cast<std::size_t>(ctx.config.paths));
  parallel_for(chunks.size(), ctx.workers, [&](std::size_t path) { chunks[path] = body(path); });
  std::string out;
  for (const auto& c : chunks) out += c;
  return out;
}

std::string run_simulate(const Context& ctx) {
  const int d = ctx.field.dim();
  std::string csv = "path,time_index,time,point," + components("x0", d) + "," + components("x", d) + "\n";
  const auto nodes = ctx.grid.nodes();
  csv += per_path(ctx, [&](std::size_t path) {
    const FlowPath flow = integrate_flow(ctx.field, ctx.measure, ctx.noise(path), nodes, ctx.scheme);
    std::string out;
    for (std::size_t k = 0; k < flow.time_count(); ++k) {
      for (std::size_t i = 0; i < flow.point_count(); ++i) {
        out += (Line() << path << k << flow.grid().times[k] << i << nodes[i] << flow.state(k, i)).str();
      }
    }
    return out;
  });
  return csv;
}

std::string run_invert(const Context& ctx) {
  const int d = ctx.field.dim();
  std::string csv = "path,time,point," + components("y", d) + "," + components("x", d) + ",residual\n";
  const auto nodes = ctx.grid.nodes();
  csv += per_path(ctx, [&](std::size_t path) {
    const FlowPath flow = integrate_flow(ctx.field, ctx.measure, ctx.noise(path), nodes, ctx.scheme);
    const std::size_t last = flow.time_count() - 1;
    const InversePath inv = invert_flow(ctx.field, flow, nodes, ctx.tol, {last});
    std::string out;
    for (std::size_t i = 0; i < inv.point_count(); ++i) {
      out += (Line() << path << flow.grid().times[last] << i << nodes[i] << inv.value(0, i) << inv.residual(0, i)).str();
    }
    return out;
  });
  return csv;
}

std::string run_spde(const Context& ctx, bool bar) {
  const int d = ctx.field.dim();
  std::string csv = "path,time_index,time,node," + components("x", d) + "," + components("u", d) + "\n";
  csv += per_path(ctx, [&](std::size_t path) {
    const auto noise = ctx.noise(path);
    const SpdeSolution sol =
        bar ? solve_spde_bar(ctx.field, *noise, ctx.config.s, ctx.config.t_end, ctx.grid, ctx.tol, ctx.scheme)
            : solve_spde_characteristics(ctx.field, *noise, ctx.config.s, ctx.config.t_end, ctx.grid, ctx.tol,
                                         ctx.scheme);
    std::string out;
    for (std::size_t j = 0; j < sol.time_count(); ++j) {
      for (std::size_t n = 0; n < ctx.grid.size(); ++n) {
        out += (Line() << path << j << sol.time(j) << n << ctx.grid.node(n) << sol.value(j, n)).str();
      }
    }
    return out;
  });
  return csv;
}

std::string run_partition(const Context& ctx) {
  const int d = ctx.field.dim();
  Vec x = zeros(d);
  for (std::size_t a = 0; a < ctx.config.x.size(); ++a) x(static_cast<Eigen::Index>(a)) = ctx.config.x[a];
  PartitionOptions opt;
  opt.fd_step = ctx.config.fd_step;
  opt.quad_order = ctx.config.quad_order;
  opt.tol = ctx.config.tol;
  opt.scheme = ctx.scheme;
  std::string csv = "path,M,identity_residual,claim1_residual,claim2_residual,claim3_residual," +
                    components("lhs", d) + "," + components("sum_a", d) + "," + components("sum_c", d) + "," +
                    components("sum_d", d) + "\n";
  csv += per_path(ctx, [&](std::size_t path) {
    const auto noise = ctx.noise(path);
    const auto targets = partition_claim_targets(ctx.field, *noise, ctx.config.s, ctx.config.t_end, x, opt);
    std::string out;
    for (int M : ctx.config.partition_sizes) {
      const PartitionReport r =
          partition_expansion(ctx.field, *noise, ctx.config.s, ctx.config.t_end, x, M, opt, targets);
      out += (Line() << path << M << r.identity_residual << r.claim_residuals[0] << r.claim_residuals[1]
                     << r.claim_residuals[2] << r.lhs << r.sum_a << r.sum_c << r.sum_d)
                 .str();
    }
    return out;
  });
  return csv;
}

std::string run_limit(const Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  std::vector<CoefficientField> fields_n;
  for (int n : c.ns) {
    const double inv_n = 1.0 / n;
    fields_n.push_back(c.perturbation == "drift_shift"
                           ? families::shift_drift(ctx.field, Vec::Constant(ctx.field.dim(), inv_n))
                           : families::scale_diffusion(ctx.field, 1.0 + inv_n));
  }
  LimitOptions opt;
  opt.epsilon = c.epsilon;
  opt.beta_prime = c.beta_prime;
  opt.p = c.p;
  opt.paths = static_cast<std::size_t>(c.paths);
  opt.seed = c.seed;
  opt.box = ctx.box;
  opt.grid_step = c.grid_step;
  opt.s = c.s;
  opt.t_end = c.t_end;
  opt.base_steps = c.base_steps;
  opt.scheme = ctx.scheme;
  opt.tol = c.tol;
  opt.workers = ctx.workers;
  const ConvergenceReport rep = strong_limit_run(fields_n, c.ns, ctx.field, ctx.measure, opt);
  std::string csv =
      "n,coeff_distance,flow_distance_value,flow_ci95,inverse_distance_value,inverse_ci95,"
      "flow_distance_grad,flow_grad_ci95,inverse_distance_grad,inverse_grad_ci95,"
      "drift_value,drift_grad,sigma_value,sigma_grad,jump_k_squared\n";
  for (const auto& r : rep.records) {
    csv += (Line() << r.n << r.coeff.total() << r.flow_value << r.flow_value_ci95 << r.inverse_value
                   << r.inverse_value_ci95 << r.flow_grad << r.flow_grad_ci95 << r.inverse_grad
                   << r.inverse_grad_ci95 << r.coeff.drift_value << r.coeff.drift_grad << r.coeff.sigma_value
                   << r.coeff.sigma_grad << r.coeff.jump_k_squared)
               .str();
  }
  return csv;
}

std::string run_moments(const Context& ctx) {
  const std::size_t paths = static_cast<std::size_t>(ctx.config.paths);
  std::vector<WeightedHolderReport> flow_reports(paths);
  std::vector<WeightedHolderReport> inverse_reports(paths);
  const auto nodes = ctx.grid.nodes();
  parallel_for(paths, ctx.workers, [&](std::size_t path) {
    const FlowPath flow =
        integrate_jacobian(ctx.field, integrate_flow(ctx.field, ctx.measure, ctx.noise(path), nodes, ctx.scheme));
    flow_reports[path] = weighted_holder_report(flow, ctx.grid, ctx.config.epsilon, ctx.config.beta_prime, true);
    const InversePath inv = inverse_gradient(invert_flow(ctx.field, flow, nodes, ctx.tol));
    inverse_reports[path] = weighted_holder_report(inv, ctx.grid, ctx.config.epsilon, ctx.config.beta_prime, true);
  });
  std::string csv = "quantity,p,mean,ci95,paths\n";
  auto row = [&](const char* name, const std::vector<WeightedHolderReport>& reps, ReportQuantity q) {
    const MomentEstimate m = moment_estimate(reps, ctx.config.p, q);
    csv += (Line() << name << ctx.config.p << m.mean << m.ci95 << paths).str();
  };
  row("flow_value", flow_reports, ReportQuantity::Value);
  row("flow_grad", flow_reports, ReportQuantity::Gradient);
  row("inverse_value", inverse_reports, ReportQuantity::Value);
  row("inverse_grad", inverse_reports, ReportQuantity::Gradient);
  return csv;
}

std::string run_assumptions(const Context& ctx, bool& overall) {
  const std::vector<double> times{ctx.config.s, 0.5 * (ctx.config.s + ctx.config.t_end), ctx.config.t_end};
  const AssumptionReport rep = check_assumptions(ctx.field, ctx.measure, ctx.box, ctx.config.grid_step, times);
  overall = rep.overall;
  std::string csv = "name,grid_sup,bound,satisfied\n";
  for (const auto& r : rep.records) csv += (Line() << r.name << r.grid_sup << r.bound << (r.satisfied ? "true" : "false")).str();
  return csv;
}

nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = c.kind;
  j["family"] = {{"name", c.family.name}, {"params", c.family.params}, {"dim", c.family.dim}};
  if (c.jump) j["jump"] = {{"name", c.jump->name}, {"params", c.jump->params}};
  j["measure"] = nlohmann::ordered_json::array();
  for (const auto& a : c.atoms) j["measure"].push_back({a.mark, a.rate});
  j["window"] = {{"s", c.s}, {"t_end", c.t_end}};
  j["base_steps"] = c.base_steps;
  const Box box = build_box(c);
  j["space"] = {{"lower", std::vector<double>(box.lower.begin(), box.lower.end())},
                {"upper", std::vector<double>(box.upper.begin(), box.upper.end())},
                {"grid_step", c.grid_step}};
  j["norms"] = {{"epsilon", c.epsilon}, {"beta_prime", c.beta_prime}, {"p", c.p}};
  j["paths"] = c.paths;
  j["seed"] = c.seed;
  j["tolerance"] = c.tol;
  j["scheme"] = c.scheme;
  j["output"] = c.output;
  j["regularity"] = {{"beta", c.regularity.beta},
                     {"n0", c.regularity.n0},
                     {"eta", c.regularity.eta},
                     {"n_kappa", c.regularity.n_kappa}};
  j["limit"] = {{"perturbation", c.perturbation}, {"ns", c.ns}};
  j["partition"] = {{"x", c.x}, {"M", c.partition_sizes}, {"fd_step", c.fd_step}, {"quad_order", c.quad_order}};
  return j;
}

}  // namespace

std::vector<std::string> run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                        int workers) {
  const auto start = std::chrono::steady_clock::now();
  const Scheme scheme = scheme_from_string(config.scheme);
  Context ctx{config,
              build_field(config),
              build_measure(config),
              build_box(config),
              SpatialGrid(build_box(config), config.grid_step),
              scheme,
              config.tol > 0.0 ? config.tol : default_inverse_tol(scheme),
              workers};

  std::string file;
  std::string csv;
  bool overall = true;
  const std::string& kind = config.kind;
  if (kind == "simulate") {
    file = "trajectories.csv";
    csv = run_simulate(ctx);
  } else if (kind == "invert") {
    file = "inverse.csv";
    csv = run_invert(ctx);
  } else if (kind == "spde" || kind == "spde_bar") {
    file = "spde.csv";
    csv = run_spde(ctx, kind == "spde_bar");
  } else if (kind == "partition") {
    file = "partition.csv";
    csv = run_partition(ctx);
  } else if (kind == "limit") {
    file = "limit.csv";
    csv = run_limit(ctx);
  } else if (kind == "moments") {
    file = "moments.csv";
    csv = run_moments(ctx);
  } else if (kind == "assumptions") {
    file = "assumptions.csv";
    csv = run_assumptions(ctx, overall);
  } else {
    fail(ErrorKind::ConfigError, "kind: unknown experiment kind '" + kind + "'");
  }

  std::filesystem::create_directories(out_dir);
  write_file(out_dir / file, csv);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::ordered_json manifest;
  manifest["version"] = std::string(kVersion);
  manifest["kind"] = kind;
  manifest["seed"] = config.seed;
  manifest["workers"] = workers;
  manifest["wall_time_seconds"] = wall;
  manifest["files"] = {file};
  if (kind == "assumptions") manifest["assumptions_satisfied"] = overall;
  manifest["config"] = config_json(config);
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return {file, "manifest.json"};
}

}  // namespace stochflow
