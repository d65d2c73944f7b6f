#pragma once

namespace cliq {

// Standard normal CDF, absolute error <= 1e-7. Input must be finite.
double normal_cdf(double v);

// Standard normal density.
double normal_pdf(double v);

}  // namespace cliq
