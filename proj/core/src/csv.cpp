#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "poincare/error.hpp"
#include "poincare/io.hpp"

namespace poincare {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_metric_csv(std::ostream& out, const MetricField& metric) {
  out << "elem_id,w11,w12,w22,eigmax,eigmin,angle\n";
  for (std::size_t m = 0; m < metric.size(); ++m) {
    const Mat2& w = metric[m];
    const Eigen::SelfAdjointEigenSolver<Mat2> es(w);
    Vec2 v = es.eigenvectors().col(1);
    if (v.x() < 0.0 || (v.x() == 0.0 && v.y() < 0.0)) v = -v;
    double angle = std::atan2(v.y(), v.x());
    if (angle <= -std::numbers::pi / 2) angle += std::numbers::pi;
    out << m << ',' << format_double(w(0, 0)) << ',' << format_double(w(0, 1)) << ','
        << format_double(w(1, 1)) << ',' << format_double(es.eigenvalues()[1]) << ','
        << format_double(es.eigenvalues()[0]) << ',' << format_double(angle) << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) out.push_back(cell);
  return out;
}

double parse_number(const std::string& cell, std::size_t line) {
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  const auto res = std::from_chars(cell.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": bad number '" + cell + "'");
  }
  return v;
}

}  // namespace

MetricField read_metric_csv(std::istream& in, std::size_t element_count) {
  MetricField metric(element_count, Mat2::Constant(std::nan("")));
  std::vector<bool> seen(element_count, false);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("elem_id", 0) == 0) continue;
    const auto cells = split(line);
    if (cells.size() < 4) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(lineno) + ": expected at least 4 columns");
    }
    const double id = parse_number(cells[0], lineno);
    if (id < 0 || id != std::floor(id) || id >= static_cast<double>(element_count)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "line " + std::to_string(lineno) + ": element id out of range for a mesh of " +
                      std::to_string(element_count) + " elements");
    }
    const auto m = static_cast<std::size_t>(id);
    if (seen[m]) throw Error(ErrorCode::kParse, "line " + std::to_string(lineno) + ": duplicate element");
    seen[m] = true;
    const double w12 = parse_number(cells[2], lineno);
    metric[m] << parse_number(cells[1], lineno), w12, w12, parse_number(cells[3], lineno);
  }
  for (std::size_t m = 0; m < element_count; ++m) {
    if (!seen[m]) {
      throw Error(ErrorCode::kInvalidArgument, "metric file has no row for element " + std::to_string(m));
    }
  }
  return metric;
}

void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history, int eig_k) {
  out << "iteration";
  for (int i = 0; i < eig_k; ++i) out << ",lambda" << i + 2;
  out << ",J,gap32\n";
  for (const auto& row : history) {
    out << row.iteration;
    for (int i = 0; i < eig_k; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      out << ',' << (idx < row.eigenvalues.size() ? format_double(row.eigenvalues[idx]) : "nan");
    }
    out << ',' << format_double(row.objective) << ',' << format_double(row.gap32) << '\n';
  }
}

void write_trace_csv(std::ostream& out, const ChainTrace& trace) {
  out << "step,x,y\n";
  for (std::size_t i = 0; i < trace.positions.size(); ++i) {
    out << i << ',' << format_double(trace.positions[i].x()) << ','
        << format_double(trace.positions[i].y()) << '\n';
  }
}

void write_coo(std::ostream& out, const SparseSym& a) {
  out << "row,col,value\n";
  for (Eigen::Index j = 0; j < a.outerSize(); ++j) {
    for (SparseSym::InnerIterator it(a, j); it; ++it) {
      out << it.row() << ',' << it.col() << ',' << format_double(it.value()) << '\n';
    }
  }
}

}  // namespace poincare
