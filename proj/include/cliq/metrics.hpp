#pragma once

#include <string>
#include <vector>

#include "cliq/normbank.hpp"

namespace cliq::metrics {

// Spearman rank correlation with average ranks for ties. Throws
// std::domain_error for fewer than two points or zero rank variance.
// Identical inputs return exactly 1.0.
double srcc(const std::vector<double>& a, const std::vector<double>& b);
double srcc(const std::vector<float>& a, const std::vector<float>& b);

// Mean SRCC of the final model over all test sets.
double msrcc(const std::vector<double>& final_row);

// Mean plasticity index: average of the diagonal SRCC_tt.
double mpi(const std::vector<double>& diagonal);

struct StabilityResult {
  std::vector<double> si;  // SI_1 = 1; SI_t = mean_{k<t} srcc_hat[t][k]
  double msi = 0.0;
};
// cross[t] holds srcc_hat_{t,k} for k = 0..t-1 (so cross[0] is empty).
StabilityResult msi(const std::vector<std::vector<double>>& cross);

struct TradeoffResult {
  std::vector<double> psi;  // (PI_t + SI_t) / 2
  double mpsi = 0.0;
};
TradeoffResult mpsi(const std::vector<double>& pi, const std::vector<double>& si);

// Diagonal Gaussian summary of a bank: running mean/variance of its last
// normalization site.
struct BankGaussian {
  std::vector<double> mean;
  std::vector<double> var;
};
BankGaussian bank_gaussian(const TaskNormBank& bank);

// KL(p || q) for diagonal Gaussians, closed form. Asymmetric.
double bank_kl(const BankGaussian& p, const BankGaussian& q);

// SRCC between the off-diagonal entries of two square matrices (diagonals
// excluded: both are degenerate there).
double kl_vs_srcc_correlation(const std::vector<std::vector<double>>& kl_matrix,
                              const std::vector<std::vector<double>>& srcc_matrix);

// Everything a sequence run produces for one evaluation mode.
struct SequenceResults {
  std::vector<std::string> tasks;
  // srcc[t][k], k <= t: model after task t evaluated on test set k.
  std::vector<std::vector<double>> srcc;
  // srcc_hat[t][k], k < t: model t vs model k predictions on test set k.
  std::vector<std::vector<double>> srcc_hat;
  std::vector<double> pi;
  std::vector<double> si;
  std::vector<double> psi;
  double msrcc = 0.0;
  double mpi = 0.0;
  double msi = 0.0;
  double mpsi = 0.0;
};

// Fill the derived fields from the two matrices.
SequenceResults finalize_sequence(std::vector<std::string> tasks,
                                  std::vector<std::vector<double>> srcc_matrix,
                                  std::vector<std::vector<double>> srcc_hat_matrix);

}  // namespace cliq::metrics
