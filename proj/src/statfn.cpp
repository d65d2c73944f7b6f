#include "cliq/statfn.hpp"

#include <cmath>
#include <stdexcept>

namespace cliq {

double normal_cdf(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("normal_cdf: non-finite input");
  return 0.5 * std::erfc(-v * M_SQRT1_2);
}

double normal_pdf(double v) {
  static const double kInvSqrt2Pi = 0.3989422804014326779;
  return kInvSqrt2Pi * std::exp(-0.5 * v * v);
}

}  // namespace cliq
