#ifndef POINCARE_TYPES_HPP_
#define POINCARE_TYPES_HPP_

#include <vector>

#include <Eigen/Core>

namespace poincare {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Piecewise-constant 2x2 matrix field, one entry per mesh element.
using MatField = std::vector<Mat2>;

struct BBox {
  Vec2 lo;
  Vec2 hi;

  double width() const { return hi.x() - lo.x(); }
  double height() const { return hi.y() - lo.y(); }
};

}  // namespace poincare

#endif  // POINCARE_TYPES_HPP_
