#include "stochflow/config.hpp"

#include "stochflow/error.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace stochflow {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& reason) {
  fail(ErrorKind::ConfigError, path + ": " + reason);
}

void check_keys(const YAML::Node& node, const std::string& path, const std::set<std::string>& allowed) {
  if (!node.IsMap()) config_error(path.empty() ? "<root>" : path, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) config_error(path.empty() ? key : path + "." + key, "unknown key");
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

template <class T>
T scalar(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) config_error(path, "expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    config_error(path, "cannot parse value '" + node.Scalar() + "'");
  }
}

template <class T>
std::vector<T> sequence(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence()) config_error(path, "expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(scalar<T>(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

double finite(double v, const std::string& path) {
  if (!std::isfinite(v)) config_error(path, "must be finite");
  return v;
}

template <class T>
void optional_scalar(const YAML::Node& parent, const std::string& path, const std::string& key, T& out) {
  if (const YAML::Node n = parent[key]) out = scalar<T>(n, join(path, key));
}

const std::set<std::string> kKinds{"simulate", "invert", "spde", "spde_bar", "partition", "limit", "moments",
                                   "assumptions"};

void validate(const ExperimentConfig& c) {
  if (!kKinds.count(c.kind)) config_error("kind", "unknown experiment kind '" + c.kind + "'");
  if (c.family.dim < 1 || c.family.dim > kMaxDim) config_error("family.dim", "must lie in [1, 8]");
  try {
    families::by_name(c.family.name, c.family.params, c.family.dim);
  } catch (const Error& e) {
    config_error("family", e.what());
  }
  if (c.jump) {
    try {
      families::jump_by_name(c.jump->name, c.jump->params);
    } catch (const Error& e) {
      config_error("jump", e.what());
    }
  }
  for (std::size_t i = 0; i < c.atoms.size(); ++i) {
    const std::string path = "measure[" + std::to_string(i) + "]";
    if (!(c.atoms[i].rate > 0.0)) config_error(path, "rate must be positive");
    for (std::size_t j = 0; j < i; ++j)
      if (c.atoms[j].mark == c.atoms[i].mark) config_error(path, "duplicate mark");
  }
  if (!(c.t_end > c.s)) config_error("window.t_end", "must exceed window.s");
  if (c.base_steps < 1) config_error("base_steps", "must be at least 1");
  const auto d = static_cast<std::size_t>(c.family.dim);
  if (!c.lower.empty() && c.lower.size() != d) config_error("space.lower", "needs one entry per dimension");
  if (!c.upper.empty() && c.upper.size() != d) config_error("space.upper", "needs one entry per dimension");
  for (std::size_t a = 0; a < d; ++a) {
    const double lo = c.lower.empty() ? -1.0 : c.lower[a];
    const double hi = c.upper.empty() ? 1.0 : c.upper[a];
    if (!(hi >= lo)) config_error("space.upper", "must not lie below space.lower");
  }
  if (!(c.grid_step > 0.0)) config_error("space.grid_step", "must be positive");
  if (!(c.epsilon > 0.0)) config_error("norms.epsilon", "must be positive");
  if (!(c.beta_prime >= 1.0 && c.beta_prime <= 2.0)) config_error("norms.beta_prime", "must lie in [1, 2]");
  if (!(c.p >= 1.0)) config_error("norms.p", "must be at least 1");
  if (c.paths < 1) config_error("paths", "must be at least 1");
  if ((c.kind == "limit" || c.kind == "moments") && c.paths < 2) config_error("paths", "must be at least 2 for " + c.kind);
  if (!(c.tol >= 0.0)) config_error("tolerance", "must be nonnegative");
  if (c.scheme != "euler" && c.scheme != "exact") config_error("scheme", "must be 'euler' or 'exact'");
  if (c.output.empty()) config_error("output", "must not be empty");
  const Regularity& r = c.regularity;
  if (!(r.beta > 1.0 && r.beta <= 3.0)) config_error("regularity.beta", "must lie in (1, 3]");
  if (!(r.n0 > 0.0)) config_error("regularity.n0", "must be positive");
  if (!(r.eta > 0.0 && r.eta < 1.0)) config_error("regularity.eta", "must lie in (0, 1)");
  if (!(r.n_kappa > 0.0)) config_error("regularity.n_kappa", "must be positive");
  if (c.perturbation != "drift_shift" && c.perturbation != "sigma_scale") {
    config_error("limit.perturbation", "must be 'drift_shift' or 'sigma_scale'");
  }
  if (c.ns.empty()) config_error("limit.ns", "must not be empty");
  for (std::size_t i = 0; i < c.ns.size(); ++i) {
    if (c.ns[i] < 1 || (i > 0 && c.ns[i] <= c.ns[i - 1])) config_error("limit.ns", "must be positive and strictly increasing");
  }
  if (!c.x.empty() && c.x.size() != d) config_error("partition.x", "needs one entry per dimension");
  if (c.partition_sizes.empty()) config_error("partition.M", "must not be empty");
  for (int m : c.partition_sizes)
    if (m < 1) config_error("partition.M", "entries must be positive");
  if (!(c.fd_step > 0.0)) config_error("partition.fd_step", "must be positive");
  if (c.quad_order < 1 || c.quad_order > 64) config_error("partition.quad_order", "must lie in [1, 64]");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    config_error("<document>", std::string("malformed YAML: ") + e.what());
  }
  check_keys(root, "", {"kind", "family", "jump", "measure", "window", "base_steps", "space", "norms", "paths",
                        "seed", "tolerance", "scheme", "output", "regularity", "limit", "partition"});
  ExperimentConfig c;
  for (const char* key : {"kind", "family", "window", "seed"}) {
    if (!root[key]) config_error(key, "missing required key");
  }
  c.kind = scalar<std::string>(root["kind"], "kind");

  const YAML::Node fam = root["family"];
  check_keys(fam, "family", {"name", "params", "dim"});
  if (!fam["name"]) config_error("family.name", "missing required key");
  c.family.name = scalar<std::string>(fam["name"], "family.name");
  if (fam["params"]) c.family.params = sequence<double>(fam["params"], "family.params");
  optional_scalar(fam, "family", "dim", c.family.dim);

  if (const YAML::Node j = root["jump"]) {
    check_keys(j, "jump", {"name", "params"});
    if (!j["name"]) config_error("jump.name", "missing required key");
    JumpSpec js;
    js.name = scalar<std::string>(j["name"], "jump.name");
    if (j["params"]) js.params = sequence<double>(j["params"], "jump.params");
    c.jump = js;
  }
  if (const YAML::Node m = root["measure"]) {
    if (!m.IsSequence()) config_error("measure", "expected a list of [mark, rate] pairs");
    for (std::size_t i = 0; i < m.size(); ++i) {
      const std::string path = "measure[" + std::to_string(i) + "]";
      const auto pair = sequence<double>(m[i], path);
      if (pair.size() != 2) config_error(path, "expected [mark, rate]");
      c.atoms.push_back(MarkAtom{finite(pair[0], path), finite(pair[1], path)});
    }
  }

  const YAML::Node w = root["window"];
  check_keys(w, "window", {"s", "t_end"});
  optional_scalar(w, "window", "s", c.s);
  if (!w["t_end"]) config_error("window.t_end", "missing required key");
  c.t_end = scalar<double>(w["t_end"], "window.t_end");
  finite(c.s, "window.s");
  finite(c.t_end, "window.t_end");

  optional_scalar(root, "", "base_steps", c.base_steps);
  if (const YAML::Node sp = root["space"]) {
    check_keys(sp, "space", {"lower", "upper", "grid_step"});
    if (sp["lower"]) c.lower = sequence<double>(sp["lower"], "space.lower");
    if (sp["upper"]) c.upper = sequence<double>(sp["upper"], "space.upper");
    optional_scalar(sp, "space", "grid_step", c.grid_step);
  }
  if (const YAML::Node n = root["norms"]) {
    check_keys(n, "norms", {"epsilon", "beta_prime", "p"});
    optional_scalar(n, "norms", "epsilon", c.epsilon);
    optional_scalar(n, "norms", "beta_prime", c.beta_prime);
    optional_scalar(n, "norms", "p", c.p);
  }
  optional_scalar(root, "", "paths", c.paths);
  c.seed = scalar<std::uint64_t>(root["seed"], "seed");
  optional_scalar(root, "", "tolerance", c.tol);
  optional_scalar(root, "", "scheme", c.scheme);
  optional_scalar(root, "", "output", c.output);
  if (const YAML::Node r = root["regularity"]) {
    check_keys(r, "regularity", {"beta", "n0", "eta", "n_kappa"});
    optional_scalar(r, "regularity", "beta", c.regularity.beta);
    optional_scalar(r, "regularity", "n0", c.regularity.n0);
    optional_scalar(r, "regularity", "eta", c.regularity.eta);
    optional_scalar(r, "regularity", "n_kappa", c.regularity.n_kappa);
  }
  if (const YAML::Node l = root["limit"]) {
    check_keys(l, "limit", {"perturbation", "ns"});
    optional_scalar(l, "limit", "perturbation", c.perturbation);
    if (l["ns"]) c.ns = sequence<int>(l["ns"], "limit.ns");
  }
  if (const YAML::Node p = root["partition"]) {
    check_keys(p, "partition", {"x", "M", "fd_step", "quad_order"});
    if (p["x"]) c.x = sequence<double>(p["x"], "partition.x");
    if (p["M"]) c.partition_sizes = sequence<int>(p["M"], "partition.M");
    optional_scalar(p, "partition", "fd_step", c.fd_step);
    optional_scalar(p, "partition", "quad_order", c.quad_order);
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ConfigError, path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

YAML::Emitter& emit_doubles(YAML::Emitter& out, const std::vector<double>& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (double x : v) out << format_double(x);
  return out << YAML::EndSeq;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << c.kind;
  out << YAML::Key << "family" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << c.family.name;
  out << YAML::Key << "params" << YAML::Value;
  emit_doubles(out, c.family.params);
  out << YAML::Key << "dim" << YAML::Value << c.family.dim << YAML::EndMap;
  if (c.jump) {
    out << YAML::Key << "jump" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << c.jump->name;
    out << YAML::Key << "params" << YAML::Value;
    emit_doubles(out, c.jump->params);
    out << YAML::EndMap;
  }
  out << YAML::Key << "measure" << YAML::Value << YAML::BeginSeq;
  for (const auto& a : c.atoms) emit_doubles(out, {a.mark, a.rate});
  out << YAML::EndSeq;
  out << YAML::Key << "window" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "s" << YAML::Value << format_double(c.s);
  out << YAML::Key << "t_end" << YAML::Value << format_double(c.t_end) << YAML::EndMap;
  out << YAML::Key << "base_steps" << YAML::Value << c.base_steps;
  out << YAML::Key << "space" << YAML::Value << YAML::BeginMap;
  if (!c.lower.empty()) {
    out << YAML::Key << "lower" << YAML::Value;
    emit_doubles(out, c.lower);
  }
  if (!c.upper.empty()) {
    out << YAML::Key << "upper" << YAML::Value;
    emit_doubles(out, c.upper);
  }
  out << YAML::Key << "grid_step" << YAML::Value << format_double(c.grid_step) << YAML::EndMap;
  out << YAML::Key << "norms" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "epsilon" << YAML::Value << format_double(c.epsilon);
  out << YAML::Key << "beta_prime" << YAML::Value << format_double(c.beta_prime);
  out << YAML::Key << "p" << YAML::Value << format_double(c.p) << YAML::EndMap;
  out << YAML::Key << "paths" << YAML::Value << c.paths;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "tolerance" << YAML::Value << format_double(c.tol);
  out << YAML::Key << "scheme" << YAML::Value << c.scheme;
  out << YAML::Key << "output" << YAML::Value << YAML::DoubleQuoted << c.output;
  out << YAML::Key << "regularity" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "beta" << YAML::Value << format_double(c.regularity.beta);
  out << YAML::Key << "n0" << YAML::Value << format_double(c.regularity.n0);
  out << YAML::Key << "eta" << YAML::Value << format_double(c.regularity.eta);
  out << YAML::Key << "n_kappa" << YAML::Value << format_double(c.regularity.n_kappa) << YAML::EndMap;
  out << YAML::Key << "limit" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "perturbation" << YAML::Value << c.perturbation;
  out << YAML::Key << "ns" << YAML::Value << YAML::Flow << c.ns << YAML::EndMap;
  out << YAML::Key << "partition" << YAML::Value << YAML::BeginMap;
  if (!c.x.empty()) {
    out << YAML::Key << "x" << YAML::Value;
    emit_doubles(out, c.x);
  }
  out << YAML::Key << "M" << YAML::Value << YAML::Flow << c.partition_sizes;
  out << YAML::Key << "fd_step" << YAML::Value << format_double(c.fd_step);
  out << YAML::Key << "quad_order" << YAML::Value << c.quad_order << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace stochflow
