#include "lsgd/spectral.hpp"

#include "lsgd/data.hpp"
#include "lsgd/errors.hpp"
#include "lsgd/fedsim.hpp"

#include <Eigen/Eigenvalues>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <string>

namespace lsgd {

namespace {

// Accepts a decomposition only if it meets the orthonormality and
// reconstruction tolerances; some BLAS builds return garbage silently.
bool acceptable(const EigenSystem& e, const Matrix& sym) {
  if (!e.values.allFinite() || !e.vectors.allFinite()) return false;
  const Eigen::Index n = sym.rows();
  const double scale = std::max(e.values.cwiseAbs().maxCoeff(), sym.cwiseAbs().maxCoeff());
  const double orth =
      (e.vectors.transpose() * e.vectors - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (!(orth <= 1e-8)) return false;
  const Matrix recon = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  return (recon - sym).cwiseAbs().maxCoeff() <= 1e-7 * std::max(scale, 1e-300);
}

}  // namespace

std::string_view to_string(EigenBackend b) {
  return b == EigenBackend::lapack ? "lapack-dsyevd" : "eigen-selfadjoint";
}

EigenSystem eig_sym(const Matrix& h) {
  if (h.rows() != h.cols()) throw DimensionError("eig_sym needs a square matrix");
  if (!h.allFinite()) throw ArgumentError("eig_sym: matrix has non-finite entries");
  EigenSystem out;
  const Eigen::Index n = h.rows();
  if (n == 0) return out;
  const Matrix sym = 0.5 * (h + h.transpose());
  out.vectors = sym;
  out.values.resize(n);
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', static_cast<lapack_int>(n),
                     out.vectors.data(), static_cast<lapack_int>(n), out.values.data());
  if (info == 0 && acceptable(out, sym)) {
    out.backend = EigenBackend::lapack;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) throw Error("symmetric eigensolver failed to converge");
  out.values = solver.eigenvalues();
  out.vectors = solver.eigenvectors();
  out.backend = EigenBackend::eigen_fallback;
  return out;
}

double zero_threshold(const Vector& eigenvalues) {
  const double lmax = eigenvalues.size() == 0 ? 0.0 : eigenvalues.cwiseAbs().maxCoeff();
  return 1e-10 * std::max(1.0, lmax);
}

Projection project(const Vector& y, const EigenSystem& eig) {
  require_length(static_cast<std::size_t>(y.size()), eig.dim(), "projected vector");
  Projection p;
  p.w = eig.vectors.transpose() * y;
  p.e = p.w.cwiseAbs2();
  return p;
}

double cpdf(const Vector& energy, const Vector& eigenvalues, double x) {
  require_length(static_cast<std::size_t>(energy.size()),
                 static_cast<std::size_t>(eigenvalues.size()), "energy vector");
  // Summing both sides separately makes the boundaries exactly 0 and 1.
  double below = 0.0;
  double above = 0.0;
  for (Eigen::Index l = 0; l < energy.size(); ++l) {
    (eigenvalues(l) <= x ? below : above) += energy(l);
  }
  const double total = below + above;
  if (!(total > 0.0)) throw ArgumentError("cpdf: total energy is zero");
  return below / total;
}

std::vector<double> cpdf_thresholds(const Vector& eigenvalues, std::size_t count) {
  std::vector<double> out(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
  if (eigenvalues.size() > 0 && count > 0) {
    const double hi = eigenvalues.maxCoeff();
    const double lo = std::max(eigenvalues.minCoeff(), 1e-12);
    if (hi > lo) {
      const std::vector<double> sweep = log_spaced(lo, hi, count);
      out.insert(out.end(), sweep.begin(), sweep.end());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

// 1 - (1 - eta*lambda)^n, accurate when eta*lambda is tiny.
double one_minus_power(double eta_lambda, double n) {
  const double base = 1.0 - eta_lambda;
  if (base > 0.0) return -std::expm1(n * std::log1p(-eta_lambda));
  return 1.0 - std::pow(base, n);
}

}  // namespace

double update_coefficient(double lambda, double eta, std::size_t k, double zero_tol) {
  if (std::abs(lambda) <= zero_tol || lambda == 0.0) return static_cast<double>(k) * eta;
  return one_minus_power(eta * lambda, static_cast<double>(k)) / lambda;
}

double predict_wl(double lambda, double eta, std::size_t k, double w_grad, double zero_tol) {
  return update_coefficient(lambda, eta, k, zero_tol) * w_grad;
}

Vector predict_update(const EigenSystem& eig, const Vector& grad, double eta, std::size_t k) {
  if (!(eta > 0.0) || k < 1) throw ArgumentError("predict_update needs eta > 0 and K >= 1");
  const Projection p = project(grad, eig);
  const double tol = zero_threshold(eig.values);
  Vector coeff(p.w.size());
  for (Eigen::Index l = 0; l < coeff.size(); ++l) {
    coeff(l) = predict_wl(eig.values(l), eta, k, p.w(l), tol);
  }
  return eig.vectors * coeff;
}

Vector newton_update(const EigenSystem& eig, const Vector& grad) {
  const Projection p = project(grad, eig);
  const double tol = zero_threshold(eig.values);
  Vector coeff = Vector::Zero(p.w.size());
  for (Eigen::Index l = 0; l < coeff.size(); ++l) {
    if (std::abs(eig.values(l)) > tol) coeff(l) = p.w(l) / eig.values(l);
  }
  return eig.vectors * coeff;
}

double soe_contribution(double e_grad, double lambda, double eta, std::size_t k, double zero_tol) {
  if (!(e_grad >= 0.0)) throw ArgumentError("soe_contribution needs e >= 0");
  if (std::abs(lambda) <= zero_tol || lambda == 0.0) {
    return -static_cast<double>(k) * eta * e_grad;
  }
  return -one_minus_power(lambda * eta, 2.0 * static_cast<double>(k)) * e_grad / (2.0 * lambda);
}

double u_soe(const Vector& displacement, const Vector& grad, const Matrix& h) {
  require_length(static_cast<std::size_t>(grad.size()),
                 static_cast<std::size_t>(displacement.size()), "gradient");
  if (h.rows() != displacement.size() || h.cols() != displacement.size()) {
    throw DimensionError("u_soe: Hessian shape does not match the displacement");
  }
  return displacement.dot(grad) + 0.5 * displacement.dot(h * displacement);
}

double variance_bound(double sigma1_sq, double lipschitz, std::size_t m) {
  if (m == 0) throw ArgumentError("variance_bound needs m >= 1");
  if (!(sigma1_sq >= 0.0) || !(lipschitz >= 0.0)) {
    throw ArgumentError("variance_bound needs nonnegative sigma^2 and L");
  }
  return lipschitz * sigma1_sq / static_cast<double>(m);
}

SpectralReport analyze_round(const Matrix& hessian, const RoundTrace& trace, double eta,
                             std::size_t local_steps, const SpectralOptions& options) {
  return analyze_round(hessian, eig_sym(hessian), trace, eta, local_steps, options);
}

SpectralReport analyze_round(const Matrix& hessian, const EigenSystem& eig,
                             const RoundTrace& trace, double eta, std::size_t local_steps,
                             const SpectralOptions& options) {
  SpectralReport r;
  r.round = trace.round;
  r.eigen_backend = eig.backend;
  r.eta = eta;
  r.local_steps = local_steps;
  r.eigenvalues = eig.values;
  r.eigen_min = eig.values.minCoeff();
  r.eigen_max = eig.values.maxCoeff();
  {
    std::vector<double> sorted(eig.values.data(), eig.values.data() + eig.values.size());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                     sorted.end());
    r.median_eigenvalue = sorted[sorted.size() / 2];
  }
  const Projection pg = project(trace.full_grad, eig);
  const Projection pu = project(trace.delta, eig);
  r.energy_grad = pg.e;
  r.energy_update = pu.e;

  r.cpdf.thresholds = cpdf_thresholds(eig.values, options.cpdf_points);
  const bool grad_energy = pg.e.sum() > 0.0;
  const bool update_energy = pu.e.sum() > 0.0;
  for (double x : r.cpdf.thresholds) {
    r.cpdf.gradient.push_back(grad_energy ? cpdf(pg.e, eig.values, x) : 0.0);
    r.cpdf.update.push_back(update_energy ? cpdf(pu.e, eig.values, x) : 0.0);
  }
  r.cpdf_gradient_at_median = grad_energy ? cpdf(pg.e, eig.values, r.median_eigenvalue) : 0.0;
  r.cpdf_update_at_median = update_energy ? cpdf(pu.e, eig.values, r.median_eigenvalue) : 0.0;

  r.predicted_update = predict_update(eig, trace.full_grad, eta, local_steps);
  r.predicted_newton = newton_update(eig, trace.full_grad);
  r.measured_update = trace.delta;
  r.update_relative_error = relative_error(trace.delta, r.predicted_update);

  const double tol = zero_threshold(eig.values);
  r.soe.resize(eig.values.size());
  for (Eigen::Index l = 0; l < r.soe.size(); ++l) {
    r.soe(l) = soe_contribution(pg.e(l), eig.values(l), eta, local_steps, tol);
  }
  r.predicted_u_soe = r.soe.sum();
  r.measured_u_soe = u_soe(-trace.delta, trace.full_grad, hessian);
  r.gap_eq3 = sgd_lsgd_gap(trace.full_grad, local_steps, eta, trace.delta);
  return r;
}

}  // namespace lsgd
