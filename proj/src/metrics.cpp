#include "cliq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cliq::metrics {

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    // Tied values share the mean of their rank span.
    const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of empty vector");
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double srcc(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("srcc: length mismatch");
  if (a.size() < 2) throw std::domain_error("srcc: needs at least two points");
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double ma = mean(ra);
  const double mb = mean(rb);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - ma;
    const double db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) throw std::domain_error("srcc: zero rank variance");
  // Single sqrt of the product: identical inputs give exactly 1.0.
  return cov / std::sqrt(va * vb);
}

double srcc(const std::vector<float>& a, const std::vector<float>& b) {
  return srcc(std::vector<double>(a.begin(), a.end()),
              std::vector<double>(b.begin(), b.end()));
}

double msrcc(const std::vector<double>& final_row) { return mean(final_row); }

double mpi(const std::vector<double>& diagonal) { return mean(diagonal); }

StabilityResult msi(const std::vector<std::vector<double>>& cross) {
  if (cross.empty()) throw std::invalid_argument("msi: empty cross matrix");
  StabilityResult r;
  r.si.reserve(cross.size());
  for (std::size_t t = 0; t < cross.size(); ++t) {
    if (cross[t].size() != t) {
      throw std::invalid_argument("msi: row " + std::to_string(t) + " must have " +
                                  std::to_string(t) + " entries");
    }
    r.si.push_back(t == 0 ? 1.0 : mean(cross[t]));
  }
  r.msi = mean(r.si);
  return r;
}

TradeoffResult mpsi(const std::vector<double>& pi, const std::vector<double>& si) {
  if (pi.size() != si.size()) throw std::invalid_argument("mpsi: length mismatch");
  TradeoffResult r;
  r.psi.reserve(pi.size());
  for (std::size_t t = 0; t < pi.size(); ++t) r.psi.push_back(0.5 * (pi[t] + si[t]));
  r.mpsi = mean(r.psi);
  return r;
}

BankGaussian bank_gaussian(const TaskNormBank& bank) {
  if (bank.site_count() == 0) throw std::invalid_argument("bank_gaussian: empty bank");
  const ops::NormSite& last = bank.site(bank.site_count() - 1);
  BankGaussian g;
  g.mean.assign(last.running_mean.begin(), last.running_mean.end());
  g.var.assign(last.running_var.begin(), last.running_var.end());
  return g;
}

double bank_kl(const BankGaussian& p, const BankGaussian& q) {
  if (p.mean.size() != q.mean.size() || p.var.size() != q.var.size() ||
      p.mean.size() != p.var.size()) {
    throw std::invalid_argument("bank_kl: dimension mismatch");
  }
  double kl = 0.0;
  for (std::size_t c = 0; c < p.mean.size(); ++c) {
    if (!(p.var[c] > 0.0) || !(q.var[c] > 0.0)) {
      throw std::invalid_argument("bank_kl: variances must be positive");
    }
    const double dm = p.mean[c] - q.mean[c];
    kl += 0.5 * std::log(q.var[c] / p.var[c]) +
          (p.var[c] + dm * dm) / (2.0 * q.var[c]) - 0.5;
  }
  return kl;
}

double kl_vs_srcc_correlation(const std::vector<std::vector<double>>& kl_matrix,
                              const std::vector<std::vector<double>>& srcc_matrix) {
  const std::size_t t = kl_matrix.size();
  if (srcc_matrix.size() != t) {
    throw std::invalid_argument("kl_vs_srcc_correlation: shape mismatch");
  }
  std::vector<double> kl_flat, srcc_flat;
  for (std::size_t i = 0; i < t; ++i) {
    if (kl_matrix[i].size() != t || srcc_matrix[i].size() != t) {
      throw std::invalid_argument("kl_vs_srcc_correlation: matrices must be square");
    }
    for (std::size_t j = 0; j < t; ++j) {
      if (i == j) continue;
      kl_flat.push_back(kl_matrix[i][j]);
      srcc_flat.push_back(srcc_matrix[i][j]);
    }
  }
  if (kl_flat.size() < 2) {
    throw std::domain_error("kl_vs_srcc_correlation: fewer than two off-diagonal pairs");
  }
  return srcc(kl_flat, srcc_flat);
}

SequenceResults finalize_sequence(std::vector<std::string> tasks,
                                  std::vector<std::vector<double>> srcc_matrix,
                                  std::vector<std::vector<double>> srcc_hat_matrix) {
  SequenceResults r;
  r.tasks = std::move(tasks);
  r.srcc = std::move(srcc_matrix);
  r.srcc_hat = std::move(srcc_hat_matrix);
  const std::size_t t_count = r.tasks.size();
  if (r.srcc.size() != t_count || r.srcc_hat.size() != t_count) {
    throw std::invalid_argument("finalize_sequence: matrix row count mismatch");
  }
  for (std::size_t t = 0; t < t_count; ++t) {
    if (r.srcc[t].size() != t + 1) {
      throw std::invalid_argument("finalize_sequence: srcc row length mismatch");
    }
    r.pi.push_back(r.srcc[t][t]);
  }
  const StabilityResult st = msi(r.srcc_hat);
  r.si = st.si;
  r.msi = st.msi;
  r.mpi = mpi(r.pi);
  const TradeoffResult tr = mpsi(r.pi, r.si);
  r.psi = tr.psi;
  r.mpsi = tr.mpsi;
  r.msrcc = msrcc(r.srcc.back());
  return r;
}

}  // namespace cliq::metrics
