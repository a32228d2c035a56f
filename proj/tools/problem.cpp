#include "problem.hpp"

#include <fstream>

#include "poincare/error.hpp"

namespace poincare::cli {

namespace {

struct Defaults {
  BBox box;
  int n;
};

Defaults defaults_for(const std::string& name) {
  if (name == "trimodal") return {{Vec2(-1.2, -1.2), Vec2(1.2, 1.2)}, 56};
  if (name == "ring") return {{Vec2(-1.0, -1.0), Vec2(1.0, 1.0)}, 72};
  if (name == "hshape" || name == "hshape-eps") return {{Vec2(-0.75, -0.75), Vec2(0.75, 0.75)}, 60};
  if (name == "uniform-square") return {{Vec2(0.0, 0.0), Vec2(1.0, 1.0)}, 64};
  return {{Vec2(-1.0, -1.0), Vec2(1.0, 1.0)}, 48};
}

std::ifstream open_input(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + what + " '" + path + "'");
  return in;
}

}  // namespace

const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names = {"trimodal", "ring", "hshape", "hshape-eps",
                                                 "uniform-square", "custom"};
  return names;
}

std::function<Vec2(const Vec2&)> Problem::grad_potential() const {
  if (!spec) {
    throw Error(ErrorCode::kInvalidArgument,
                "tabulated measure has no potential gradient; use --drift stein");
  }
  DensitySpec s = *spec;
  return [s](const Vec2& x) { return potential_gradient(s, x); };
}

Problem make_problem(const RunConfig& config) {
  const std::string& name = config.benchmark;
  bool known = false;
  for (const auto& n : benchmark_names()) known = known || n == name;
  if (!known) {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown benchmark '" + name +
                    "' (expected trimodal, ring, hshape, hshape-eps, uniform-square or custom)");
  }

  Problem p;
  p.name = name;
  const Defaults d = defaults_for(name);
  const BBox box = config.box.value_or(d.box);
  const int nx = config.nx > 0 ? config.nx : d.n;
  const int ny = config.ny > 0 ? config.ny : (config.nx > 0 ? config.nx : d.n);

  Region h = h_shape_region();
  if (config.region) {
    h.clear();
    for (const BBox& r : *config.region) h.push_back(rectangle(r));
  }

  if (name == "trimodal") {
    p.spec = DensitySpec::trimodal(config.sigma2.value_or(0.025));
  } else if (name == "ring") {
    p.spec = DensitySpec::ring(config.radius.value_or(0.65), config.sigma2.value_or(0.0032));
  } else if (name == "hshape") {
    p.spec = DensitySpec::uniform_region(h);
  } else if (name == "hshape-eps") {
    p.spec = DensitySpec::uniform_region_epsilon(h, {rectangle(box)},
                                                 config.epsilon.value_or(1e-7));
  } else if (name == "uniform-square") {
    p.spec = DensitySpec::uniform_region({rectangle(box)});
  }
  if (p.spec) p.spec->validate();

  if (!config.mesh_file.empty()) {
    auto in = open_input(config.mesh_file, "mesh file");
    p.mesh = std::make_unique<TriMesh>(load_mesh(in));
  } else if (name == "custom") {
    throw Error(ErrorCode::kInvalidArgument, "benchmark custom needs mesh.file (--mesh)");
  } else {
    TriMesh base = build_rect_mesh(box, nx, ny);
    p.mesh = std::make_unique<TriMesh>(name == "hshape" ? build_masked_mesh(base, h)
                                                        : std::move(base));
  }

  if (!config.masses_file.empty()) {
    auto in = open_input(config.masses_file, "masses file");
    p.field = field_from_masses(*p.mesh, load_masses_csv(in, p.mesh->element_count()));
    p.spec.reset();
  } else if (name == "custom") {
    throw Error(ErrorCode::kInvalidArgument, "benchmark custom needs density.masses");
  } else {
    p.field = element_masses(*p.mesh, *p.spec);
  }
  return p;
}

}  // namespace poincare::cli
