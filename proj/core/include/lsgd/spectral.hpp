#pragma once

#include "lsgd/linalg.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace lsgd {

class LossProblem;
struct RoundTrace;

enum class EigenBackend { lapack, eigen_fallback };

std::string_view to_string(EigenBackend b);

/// Eigenpairs of a symmetric matrix, eigenvalues ascending, eigenvectors as
/// orthonormal columns.
struct EigenSystem {
  Vector values;
  Matrix vectors;
  EigenBackend backend = EigenBackend::lapack;

  std::size_t dim() const { return static_cast<std::size_t>(values.size()); }
};

/// Symmetrizes (H + H^T)/2 and diagonalizes it with LAPACK dsyevd. A result
/// that fails ||V^T V - I||_max <= 1e-8 or ||V diag(l) V^T - H||_max <=
/// 1e-7 max|H| is recomputed with Eigen's self-adjoint solver. Throws
/// ArgumentError on non-finite entries, DimensionError on a non-square input.
EigenSystem eig_sym(const Matrix& h);

/// |lambda| at or below this is treated as an exact zero eigenvalue.
double zero_threshold(const Vector& eigenvalues);

struct Projection {
  /// w_l = v_l^T y
  Vector w;
  /// e_l = w_l^2
  Vector e;
};

Projection project(const Vector& y, const EigenSystem& eig);

/// Fraction of the total energy on directions with eigenvalue <= x.
/// Throws ArgumentError when all energy is zero.
double cpdf(const Vector& energy, const Vector& eigenvalues, double x);

/// Log-spaced sweep over [max(min lambda, 1e-12), max lambda] merged with
/// every eigenvalue, sorted and deduplicated.
std::vector<double> cpdf_thresholds(const Vector& eigenvalues, std::size_t count);

/// Coefficient c(lambda) = (1 - (1 - eta*lambda)^K) / lambda, or K*eta when
/// |lambda| <= zero_tol.
double update_coefficient(double lambda, double eta, std::size_t k, double zero_tol = 0.0);

/// Expected projection of the local update on one eigen-direction.
double predict_wl(double lambda, double eta, std::size_t k, double w_grad, double zero_tol = 0.0);

/// Residue-free expected local update, assembled in the eigenbasis so
/// singular Hessians need no inversion.
Vector predict_update(const EigenSystem& eig, const Vector& grad, double eta, std::size_t k);

/// Pseudo-inverse Newton step in the eigenbasis.
Vector newton_update(const EigenSystem& eig, const Vector& grad);

/// Loss contribution s_l of the update along one eigen-direction:
/// -(1 - (1 - lambda*eta)^{2K}) e / (2 lambda), or -K*eta*e for lambda = 0.
double soe_contribution(double e_grad, double lambda, double eta, std::size_t k,
                        double zero_tol = 0.0);

/// Second-order change estimate delta^T g + 1/2 delta^T H delta.
double u_soe(const Vector& displacement, const Vector& grad, const Matrix& h);

/// L * sigma1^2 / m.
double variance_bound(double sigma1_sq, double lipschitz, std::size_t m);

struct CpdfCurve {
  std::vector<double> thresholds;
  std::vector<double> gradient;
  std::vector<double> update;
};

/// Per-round spectral diagnostics of one recorded local-SGD round.
struct SpectralReport {
  std::size_t round = 0;
  EigenBackend eigen_backend = EigenBackend::lapack;
  double eta = 0.0;
  std::size_t local_steps = 0;
  Vector eigenvalues;
  double eigen_min = 0.0;
  double eigen_max = 0.0;
  double median_eigenvalue = 0.0;
  Vector energy_grad;
  Vector energy_update;
  CpdfCurve cpdf;
  double cpdf_gradient_at_median = 0.0;
  double cpdf_update_at_median = 0.0;
  Vector predicted_update;
  Vector predicted_newton;
  Vector measured_update;
  double update_relative_error = 0.0;
  Vector soe;
  double predicted_u_soe = 0.0;
  double measured_u_soe = 0.0;
  double gap_eq3 = 0.0;
};

struct SpectralOptions {
  std::size_t cpdf_points = 200;
};

SpectralReport analyze_round(const Matrix& hessian, const RoundTrace& trace, double eta,
                             std::size_t local_steps, const SpectralOptions& options = {});

/// Same as above, reusing a precomputed eigendecomposition of `hessian`.
SpectralReport analyze_round(const Matrix& hessian, const EigenSystem& eig,
                             const RoundTrace& trace, double eta, std::size_t local_steps,
                             const SpectralOptions& options = {});

}  // namespace lsgd
