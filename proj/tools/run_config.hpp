#ifndef POINCARE_TOOLS_RUN_CONFIG_HPP_
#define POINCARE_TOOLS_RUN_CONFIG_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "poincare/types.hpp"

namespace poincare::cli {

// Everything a run needs. Fields left unset (nullopt / 0) fall back to the
// benchmark's defaults.
struct RunConfig {
  // [run]
  std::string benchmark = "trimodal";
  std::string out = "out";
  std::uint64_t seed = 0;
  int threads = 1;
  bool dump_matrices = false;

  // [mesh]
  std::string mesh_file;
  int nx = 0;
  int ny = 0;
  std::optional<BBox> box;

  // [density]
  std::string masses_file;  // tabulated element masses (custom measure)
  std::optional<double> sigma2;
  std::optional<double> radius;
  std::optional<double> epsilon;
  std::optional<std::vector<BBox>> region;  // H region override, union of rectangles

  // [optimizer]
  std::string rule = "nesterov";
  double rho = 0.01;
  double alpha = 0.5;
  int iterations = 100;
  int eig_k = 5;
  bool early_stop = true;
  double early_stop_tol = 1e-8;
  int early_stop_window = 5;
  bool keep_best = true;
  double eig_tol = 1e-10;

  // [sampler]
  std::string drift = "smoothed";
  double dt = 0.015;
  int steps = 5000;
  int chains = 1;
  std::optional<Vec2> x0;
  double x0_spread = 0.0;
  bool identity = false;   // W = I
  bool constant = false;   // W = trace(Cov) I / 2, the trace-normalized constant
  std::string metric_file;  // default: <out>/metric.csv

  // Throws kInvalidArgument when a value is outside its documented range.
  void validate() const;
};

// Names of all recognized keys, as "section.key".
const std::vector<std::string>& known_keys();

// Sets one key from its text value. Throws kParse for unknown keys or
// unreadable values.
void apply_key(RunConfig& config, const std::string& key, const std::string& value);

// Flat key=value text with [section] headers; '#' and ';' start comments.
// Keys before the first header belong to [run]. Throws kParse with the line
// number on any problem.
void load_config(std::istream& in, RunConfig& config);

}  // namespace poincare::cli

#endif  // POINCARE_TOOLS_RUN_CONFIG_HPP_
