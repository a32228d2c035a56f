#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "poincare/error.hpp"

namespace poincare::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(out)) {
    throw Error(ErrorCode::kParse, key + ": expected a number, got '" + v + "'");
  }
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const char* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error(ErrorCode::kParse, key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

int to_int32(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < -2147483647LL || x > 2147483647LL) throw Error(ErrorCode::kParse, key + ": out of range");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::kParse, key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v, std::size_t n) {
  std::vector<double> out;
  std::stringstream s(v);
  std::string cell;
  while (std::getline(s, cell, ',')) out.push_back(to_double(key, trim(cell)));
  if (out.size() != n) {
    throw Error(ErrorCode::kParse, key + ": expected " + std::to_string(n) + " comma-separated numbers");
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"run.benchmark", [](RunConfig& c, auto&, auto& v) { c.benchmark = v; }},
      {"run.out", [](RunConfig& c, auto&, auto& v) { c.out = v; }},
      {"run.seed", [](RunConfig& c, auto& k, auto& v) {
         const long long s = to_int(k, v);
         if (s < 0) throw Error(ErrorCode::kParse, k + ": must be nonnegative");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"run.threads", [](RunConfig& c, auto& k, auto& v) { c.threads = to_int32(k, v); }},
      {"run.dump_matrices", [](RunConfig& c, auto& k, auto& v) { c.dump_matrices = to_bool(k, v); }},
      {"mesh.file", [](RunConfig& c, auto&, auto& v) { c.mesh_file = v; }},
      {"mesh.nx", [](RunConfig& c, auto& k, auto& v) { c.nx = to_int32(k, v); }},
      {"mesh.ny", [](RunConfig& c, auto& k, auto& v) { c.ny = to_int32(k, v); }},
      {"mesh.box", [](RunConfig& c, auto& k, auto& v) {
         const auto b = to_list(k, v, 4);
         c.box = BBox{Vec2(b[0], b[1]), Vec2(b[2], b[3])};
       }},
      {"density.masses", [](RunConfig& c, auto&, auto& v) { c.masses_file = v; }},
      {"density.sigma2", [](RunConfig& c, auto& k, auto& v) { c.sigma2 = to_double(k, v); }},
      {"density.radius", [](RunConfig& c, auto& k, auto& v) { c.radius = to_double(k, v); }},
      {"density.region", [](RunConfig& c, auto& k, auto& v) {
         // rectangles x0,y0,x1,y1 separated by '|'
         std::vector<BBox> rects;
         std::stringstream s(v);
         std::string part;
         while (std::getline(s, part, '|')) {
           const auto b = to_list(k, trim(part), 4);
           rects.push_back(BBox{Vec2(b[0], b[1]), Vec2(b[2], b[3])});
         }
         if (rects.empty()) throw Error(ErrorCode::kParse, k + ": no rectangles");
         c.region = std::move(rects);
       }},
      {"density.epsilon", [](RunConfig& c, auto& k, auto& v) { c.epsilon = to_double(k, v); }},
      {"optimizer.rule", [](RunConfig& c, auto&, auto& v) { c.rule = v; }},
      {"optimizer.rho", [](RunConfig& c, auto& k, auto& v) { c.rho = to_double(k, v); }},
      {"optimizer.alpha", [](RunConfig& c, auto& k, auto& v) { c.alpha = to_double(k, v); }},
      {"optimizer.iterations", [](RunConfig& c, auto& k, auto& v) { c.iterations = to_int32(k, v); }},
      {"optimizer.eig_k", [](RunConfig& c, auto& k, auto& v) { c.eig_k = to_int32(k, v); }},
      {"optimizer.early_stop", [](RunConfig& c, auto& k, auto& v) { c.early_stop = to_bool(k, v); }},
      {"optimizer.early_stop_tol", [](RunConfig& c, auto& k, auto& v) { c.early_stop_tol = to_double(k, v); }},
      {"optimizer.early_stop_window", [](RunConfig& c, auto& k, auto& v) { c.early_stop_window = to_int32(k, v); }},
      {"optimizer.keep_best", [](RunConfig& c, auto& k, auto& v) { c.keep_best = to_bool(k, v); }},
      {"optimizer.eig_tol", [](RunConfig& c, auto& k, auto& v) { c.eig_tol = to_double(k, v); }},
      {"sampler.drift", [](RunConfig& c, auto&, auto& v) { c.drift = v; }},
      {"sampler.dt", [](RunConfig& c, auto& k, auto& v) { c.dt = to_double(k, v); }},
      {"sampler.steps", [](RunConfig& c, auto& k, auto& v) { c.steps = to_int32(k, v); }},
      {"sampler.chains", [](RunConfig& c, auto& k, auto& v) { c.chains = to_int32(k, v); }},
      {"sampler.x0", [](RunConfig& c, auto& k, auto& v) {
         const auto p = to_list(k, v, 2);
         c.x0 = Vec2(p[0], p[1]);
       }},
      {"sampler.x0_spread", [](RunConfig& c, auto& k, auto& v) { c.x0_spread = to_double(k, v); }},
      {"sampler.identity", [](RunConfig& c, auto& k, auto& v) { c.identity = to_bool(k, v); }},
      {"sampler.constant", [](RunConfig& c, auto& k, auto& v) { c.constant = to_bool(k, v); }},
      {"sampler.metric", [](RunConfig& c, auto&, auto& v) { c.metric_file = v; }},
  };
  return table;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, "config: " + what);
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, setter] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_key(RunConfig& config, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw Error(ErrorCode::kParse, "unknown config key '" + key + "'");
  it->second(config, key, value);
}

void load_config(std::istream& in, RunConfig& config) {
  std::string section = "run";
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::kParse, where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kParse, where + "expected key = value");
    const std::string key = section + "." + trim(line.substr(0, eq));
    try {
      apply_key(config, key, trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
  }
}

void RunConfig::validate() const {
  require(threads >= 1 && threads <= 1024, "run.threads must be in [1, 1024]");
  require(nx >= 0 && nx <= 4096 && ny >= 0 && ny <= 4096, "mesh.nx/ny must be in [1, 4096] (0 = default)");
  if (box) require(box->lo.x() < box->hi.x() && box->lo.y() < box->hi.y(), "mesh.box must have lo < hi");
  if (sigma2) require(*sigma2 > 0.0, "density.sigma2 must be positive");
  if (radius) require(*radius > 0.0, "density.radius must be positive");
  if (epsilon) require(*epsilon >= 0.0, "density.epsilon must be nonnegative");
  if (region) {
    for (const BBox& r : *region) {
      require(r.lo.x() < r.hi.x() && r.lo.y() < r.hi.y(), "density.region rectangles must have lo < hi");
    }
  }
  require(rule == "ga" || rule == "momentum" || rule == "nesterov",
          "optimizer.rule must be ga, momentum or nesterov");
  require(rho >= 0.0, "optimizer.rho must be nonnegative");
  require(alpha >= 0.0 && alpha < 1.0, "optimizer.alpha must be in [0, 1)");
  require(iterations >= 0 && iterations <= 1000000, "optimizer.iterations must be in [0, 1e6]");
  require(eig_k >= 1 && eig_k <= 50, "optimizer.eig_k must be in [1, 50]");
  require(early_stop_tol >= 0.0, "optimizer.early_stop_tol must be nonnegative");
  require(early_stop_window >= 1, "optimizer.early_stop_window must be at least 1");
  require(eig_tol > 0.0 && eig_tol < 1.0, "optimizer.eig_tol must be in (0, 1)");
  require(drift == "raw" || drift == "smoothed" || drift == "stein",
          "sampler.drift must be raw, smoothed or stein");
  require(dt > 0.0, "sampler.dt must be positive");
  require(steps >= 1, "sampler.steps must be at least 1");
  require(chains >= 1 && chains <= 10000, "sampler.chains must be in [1, 10000]");
  require(x0_spread >= 0.0, "sampler.x0_spread must be nonnegative");
  require(!(identity && constant), "sampler.identity and sampler.constant exclude each other");
}

}  // namespace poincare::cli
