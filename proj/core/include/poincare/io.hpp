#ifndef POINCARE_IO_HPP_
#define POINCARE_IO_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "poincare/assembly.hpp"
#include "poincare/langevin.hpp"
#include "poincare/metric_opt.hpp"

namespace poincare {

// Shortest-safe text for a double: 17 significant digits, '.' decimal point,
// independent of the global locale.
std::string format_double(double v);

// elem_id,w11,w12,w22,eigmax,eigmin,angle (angle of the principal
// eigenvector, radians in (-pi/2, pi/2]).
void write_metric_csv(std::ostream& out, const MetricField& metric);

// Reads the file written above (only elem_id, w11, w12, w22 are used).
// Throws kParse on malformed rows and kInvalidArgument on a size mismatch.
MetricField read_metric_csv(std::istream& in, std::size_t element_count);

// iteration,lambda2..lambda{1+eig_k},J,gap32
void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history, int eig_k);

// step,x,y
void write_trace_csv(std::ostream& out, const ChainTrace& trace);

// row,col,value for the stored entries, column-major.
void write_coo(std::ostream& out, const SparseSym& a);

}  // namespace poincare

#endif  // POINCARE_IO_HPP_
