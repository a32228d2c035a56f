#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "poincare/error.hpp"
#include "poincare/mesh.hpp"

namespace poincare {

namespace {

using nlohmann::json;

Vec2 parse_point(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorCode::kParse, "expected a point [x, y], got " + j.dump());
  }
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

}  // namespace

TriMesh load_mesh(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed mesh document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("triangles") ||
      !doc["nodes"].is_array() || !doc["triangles"].is_array()) {
    throw Error(ErrorCode::kParse, "mesh document needs \"nodes\" and \"triangles\" arrays");
  }
  std::vector<Vec2> nodes;
  for (const auto& p : doc["nodes"]) nodes.push_back(parse_point(p));

  std::vector<Triangle> tris;
  for (const auto& t : doc["triangles"]) {
    if (!t.is_array() || t.size() != 3) {
      throw Error(ErrorCode::kParse, "expected a triangle [i, j, k], got " + t.dump());
    }
    Triangle tri{};
    for (std::size_t a = 0; a < 3; ++a) {
      if (!t[a].is_number_integer()) {
        throw Error(ErrorCode::kParse, "triangle indices must be integers: " + t.dump());
      }
      tri[a] = t[a].get<int>();
    }
    tris.push_back(tri);
  }

  Region region;
  if (doc.contains("region")) {
    if (!doc["region"].is_array()) throw Error(ErrorCode::kParse, "\"region\" must be an array");
    for (const auto& poly : doc["region"]) {
      if (!poly.is_array()) throw Error(ErrorCode::kParse, "region polygon must be an array");
      Polygon pg;
      for (const auto& p : poly) pg.vertices.push_back(parse_point(p));
      region.push_back(std::move(pg));
    }
  }
  return TriMesh(std::move(nodes), std::move(tris), std::move(region));
}

void save_mesh(std::ostream& out, const TriMesh& mesh) {
  json doc;
  json nodes = json::array();
  for (const auto& x : mesh.nodes()) nodes.push_back({x.x(), x.y()});
  json tris = json::array();
  for (const auto& t : mesh.triangles()) tris.push_back({t[0], t[1], t[2]});
  doc["nodes"] = std::move(nodes);
  doc["triangles"] = std::move(tris);
  if (!mesh.region().empty()) {
    json region = json::array();
    for (const auto& poly : mesh.region()) {
      json loop = json::array();
      for (const auto& v : poly.vertices) loop.push_back({v.x(), v.y()});
      region.push_back(std::move(loop));
    }
    doc["region"] = std::move(region);
  }
  out << doc.dump() << '\n';
}

}  // namespace poincare
