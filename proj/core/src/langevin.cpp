#include "poincare/langevin.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

#include "parallel.hpp"
#include "poincare/error.hpp"
#include "poincare/rng.hpp"

namespace poincare {

std::string_view to_string(DriftMode mode) {
  switch (mode) {
    case DriftMode::kRaw: return "raw";
    case DriftMode::kSmoothed: return "smoothed";
    case DriftMode::kStein: return "stein";
  }
  return "unknown";
}

DriftMode drift_mode_from_string(std::string_view name) {
  for (auto mode : {DriftMode::kRaw, DriftMode::kSmoothed, DriftMode::kStein}) {
    if (to_string(mode) == name) return mode;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown drift mode '" + std::string(name) + "' (expected raw, smoothed or stein)");
}

Vec2 drift(DriftMode mode, const Mat2& w, const Vec2& div_w, const Vec2& grad_v, const Vec2& mean,
           const Vec2& x) {
  switch (mode) {
    case DriftMode::kRaw: return -(w * grad_v);
    case DriftMode::kSmoothed: return div_w - w * grad_v;
    case DriftMode::kStein: return -(x - mean);
  }
  return Vec2::Zero();
}

Mat2 psd_sqrt(const Mat2& w) {
  const Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (w + w.transpose()));
  const Vec2 root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

// --- MeshMetric --------------------------------------------------------------

MeshMetric MeshMetric::constant(const Mat2& w) {
  MeshMetric m;
  m.constant_ = w;
  return m;
}

MeshMetric::MeshMetric(const TriMesh& mesh, MetricField metric, const DensityField& field)
    : mesh_(&mesh),
      locator_(std::make_shared<PointLocator>(mesh)),
      element_(std::move(metric)) {
  if (element_.size() != mesh.element_count() || field.element_count() != mesh.element_count()) {
    throw Error(ErrorCode::kInvalidArgument, "metric, field and mesh sizes differ");
  }
  check_metric(element_);

  const std::size_t n = mesh.node_count();
  std::vector<Mat2> by_mass(n, Mat2::Zero()), by_area(n, Mat2::Zero());
  std::vector<double> mass(n, 0.0), area(n, 0.0);
  for (std::size_t m = 0; m < mesh.element_count(); ++m) {
    const double mu = field.element_mass[m];
    const double a = mesh.geom(m).area;
    for (int v : mesh.triangle(m)) {
      const auto i = static_cast<std::size_t>(v);
      by_mass[i] += mu * element_[m];
      mass[i] += mu;
      by_area[i] += a * element_[m];
      area[i] += a;
    }
  }
  nodal_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (mass[i] > 0.0) {
      nodal_[i] = by_mass[i] / mass[i];
    } else if (area[i] > 0.0) {
      nodal_[i] = by_area[i] / area[i];
    } else {
      nodal_[i] = Mat2::Zero();  // node used by no element
    }
  }

  // (div W)_i = sum_j d_j W_ij = sum_a (W_a grad(phi_a))_i for the P1 field.
  div_.resize(mesh.element_count());
  for (std::size_t m = 0; m < mesh.element_count(); ++m) {
    Vec2 d = Vec2::Zero();
    const auto& tri = mesh.triangle(m);
    for (std::size_t a = 0; a < 3; ++a) {
      d += nodal_[static_cast<std::size_t>(tri[a])] * mesh.geom(m).basis_grads[a];
    }
    div_[m] = d;
  }
}

LocalMetric MeshMetric::at(const Vec2& x, DriftMode mode) const {
  LocalMetric out;
  if (mesh_ == nullptr) {
    out.w = constant_;
    return out;
  }
  std::size_t m = 0;
  Vec2 p = x;
  if (auto hit = locator_->locate(x)) {
    m = *hit;
  } else {
    m = locator_->nearest_element(x);
    p = mesh_->geom(m).centroid;
    out.outside = true;
  }
  if (mode != DriftMode::kSmoothed) {
    out.w = element_[m];
    return out;
  }
  const auto bary = mesh_->barycentric(m, p);
  const auto& tri = mesh_->triangle(m);
  out.w = Mat2::Zero();
  for (std::size_t a = 0; a < 3; ++a) out.w += bary[a] * nodal_[static_cast<std::size_t>(tri[a])];
  out.w(1, 0) = out.w(0, 1);
  out.div = div_[m];
  return out;
}

// --- chains ------------------------------------------------------------------

void SamplerConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::kInvalidArgument, "dt must be positive");
  if (steps < 1) throw Error(ErrorCode::kInvalidArgument, "steps must be at least 1");
  if (!x0.allFinite()) throw Error(ErrorCode::kInvalidArgument, "start point is not finite");
  if (!(x0_spread >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "x0 spread must be nonnegative");
}

Vec2 ula_step(const Vec2& x, const MeshMetric& metric, const SamplerConfig& config,
              std::uint64_t step, bool* outside) {
  const LocalMetric local = metric.at(x, config.drift);
  if (outside != nullptr) *outside = local.outside;
  Vec2 grad_v = Vec2::Zero();
  if (config.drift != DriftMode::kStein && config.grad_potential) grad_v = config.grad_potential(x);
  const Vec2 b = drift(config.drift, local.w, local.div, grad_v, config.mean, x);
  const auto [z1, z2] = counter_normal_pair(config.seed, config.chain_id, step);
  return x + b * config.dt + std::sqrt(2.0 * config.dt) * (psd_sqrt(local.w) * Vec2(z1, z2));
}

ChainTrace run_chain(const SamplerConfig& config, const MeshMetric& metric) {
  config.validate();
  ChainTrace trace;
  trace.config = config;
  trace.positions.reserve(static_cast<std::size_t>(config.steps) + 1);
  Vec2 x = config.x0;
  if (config.x0_spread > 0.0) {
    // Counter value past every step index.
    const auto [z1, z2] = counter_normal_pair(config.seed, config.chain_id, ~std::uint64_t{0});
    x += config.x0_spread * Vec2(z1, z2);
  }
  trace.positions.push_back(x);
  for (int k = 0; k < config.steps; ++k) {
    bool outside = false;
    x = ula_step(x, metric, config, static_cast<std::uint64_t>(k), &outside);
    if (!x.allFinite()) {
      throw Error(ErrorCode::kDivergence,
                  "chain " + std::to_string(config.chain_id) + ": non-finite position at step " +
                      std::to_string(k + 1) + "; try a smaller dt");
    }
    trace.positions.push_back(x);
  }
  // Exits are counted on the recorded positions, not on the starting one.
  if (metric.on_mesh()) {
    for (std::size_t i = 1; i < trace.positions.size(); ++i) {
      if (metric.at(trace.positions[i], DriftMode::kRaw).outside) ++trace.exited_mesh_count;
    }
  }
  return trace;
}

std::vector<ChainTrace> run_chains(const SamplerConfig& config, const MeshMetric& metric, int count,
                                   int threads) {
  if (count < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one chain");
  std::vector<ChainTrace> out(static_cast<std::size_t>(count));
  detail::parallel_for(count, threads, [&](std::int64_t i) {
    SamplerConfig c = config;
    c.chain_id = config.chain_id + static_cast<std::uint64_t>(i);
    out[static_cast<std::size_t>(i)] = run_chain(c, metric);
  });
  return out;
}

// --- diagnostics -------------------------------------------------------------

AutocorrelationTime integrated_autocorrelation_time(const std::vector<double>& series, double c) {
  const std::size_t n = series.size();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "series too short for autocorrelation");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);

  std::size_t len = 1;
  while (len < 2 * n) len <<= 1;
  std::vector<double> padded(len, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = series[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& z : spec) z = std::norm(z);
  std::vector<double> acov;
  fft.inv(acov, spec);

  AutocorrelationTime out;
  if (!(acov[0] > 0.0)) {
    out.tau = 0.5;
    return out;
  }
  double tau = 0.5;
  std::size_t m = 1;
  for (; m < n; ++m) {
    tau += acov[m] / acov[0];
    if (static_cast<double>(m) >= c * tau) break;
  }
  out.tau = tau;
  out.window = static_cast<int>(std::min(m, n - 1));
  return out;
}

ChainReport diagnostics(const ChainTrace& trace, const DensityField& field, const TriMesh& mesh,
                        const Eigen::VectorXd& u2) {
  const std::size_t n = trace.positions.size();
  if (n < 100) {
    throw Error(ErrorCode::kInvalidArgument,
                "trace has " + std::to_string(n) + " positions; diagnostics need at least 100");
  }
  if (static_cast<std::size_t>(u2.size()) != mesh.node_count()) {
    throw Error(ErrorCode::kInvalidArgument, "observable does not match the mesh nodes");
  }
  if (field.element_count() != mesh.element_count()) {
    throw Error(ErrorCode::kInvalidArgument, "field and mesh sizes differ");
  }

  ChainReport r;
  r.drift = std::string(to_string(trace.config.drift));
  r.steps = static_cast<int>(n) - 1;
  r.dt = trace.config.dt;

  for (const auto& x : trace.positions) r.mean += x;
  r.mean /= static_cast<double>(n);
  for (const auto& x : trace.positions) r.cov += (x - r.mean) * (x - r.mean).transpose();
  r.cov /= static_cast<double>(n - 1);
  r.mean_ref = field.mean;
  r.cov_ref = field.covariance;

  const PointLocator locator(mesh);
  std::vector<double> occupancy(mesh.element_count(), 0.0);
  std::vector<double> values(n);
  double off_mesh = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& x = trace.positions[i];
    std::size_t m = 0;
    std::array<double, 3> w{};
    if (auto hit = locator.locate(x)) {
      m = *hit;
      w = mesh.barycentric(m, x);
      occupancy[m] += 1.0;
    } else {
      m = locator.nearest_element(x);
      w = mesh.barycentric(m, x);
      double s = 0.0;
      for (double& v : w) s += (v = std::max(v, 0.0));
      for (double& v : w) v = s > 0.0 ? v / s : 1.0 / 3.0;
      off_mesh += 1.0;
    }
    const auto& tri = mesh.triangle(m);
    double f = 0.0;
    for (std::size_t a = 0; a < 3; ++a) f += w[a] * u2[tri[a]];
    values[i] = f;
  }

  double tv = off_mesh / static_cast<double>(n);
  for (std::size_t m = 0; m < occupancy.size(); ++m) {
    tv += std::abs(occupancy[m] / static_cast<double>(n) - field.element_mass[m]);
  }
  r.occupancy_tv = 0.5 * tv;

  const AutocorrelationTime act = integrated_autocorrelation_time(values);
  r.tau_int = act.tau;
  r.tau_window = act.window;
  r.gap_est = 1.0 / (r.dt * r.tau_int);
  r.exited_fraction = static_cast<double>(trace.exited_mesh_count) / std::max(r.steps, 1);
  r.exit_flag = r.exited_fraction > 0.01;
  return r;
}

}  // namespace poincare
