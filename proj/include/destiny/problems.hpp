#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "destiny/types.hpp"

namespace destiny {

/// A local objective privately held by one agent: value and Euclidean
/// gradient of f_i on n x p matrices. The network objective is the
/// average (1/d) sum_i f_i.
class LocalObjective {
 public:
  virtual ~LocalObjective() = default;

  virtual double value(const RealMatrix& X) const = 0;
  virtual RealMatrix euclidean_grad(const RealMatrix& X) const = 0;

  virtual Eigen::Index dim_n() const = 0;
  virtual Eigen::Index dim_p() const = 0;
};

using ObjectiveList = std::vector<std::unique_ptr<LocalObjective>>;

/// f_i(X) = -(1/2) tr(X^T A_i A_i^T X) for a local sample block A_i (n x m_i).
/// The gradient -A_i (A_i^T X) is formed by two rectangular products;
/// A_i A_i^T is never materialized.
class PcaObjective final : public LocalObjective {
 public:
  PcaObjective(RealMatrix A, Eigen::Index p);

  double value(const RealMatrix& X) const override;
  RealMatrix euclidean_grad(const RealMatrix& X) const override;
  Eigen::Index dim_n() const override { return A_.rows(); }
  Eigen::Index dim_p() const override { return p_; }
  const RealMatrix& data() const { return A_; }

 private:
  RealMatrix A_;
  Eigen::Index p_;
};

/// f_i(X) = ||C_i^T X - D_i^T||_F^2 with samples C_i (n x m_i) and class
/// indicators D_i (p x m_i).
class OlsrObjective final : public LocalObjective {
 public:
  OlsrObjective(RealMatrix C, RealMatrix D);

  double value(const RealMatrix& X) const override;
  RealMatrix euclidean_grad(const RealMatrix& X) const override;
  Eigen::Index dim_n() const override { return C_.rows(); }
  Eigen::Index dim_p() const override { return D_.rows(); }

 private:
  RealMatrix C_;
  RealMatrix D_;
};

/// f_i(X) = -(1/4) ||X^T B_i||_4^4, the entrywise-quartic dictionary
/// learning objective.
class SdlObjective final : public LocalObjective {
 public:
  SdlObjective(RealMatrix B, Eigen::Index p);

  double value(const RealMatrix& X) const override;
  RealMatrix euclidean_grad(const RealMatrix& X) const override;
  Eigen::Index dim_n() const override { return B_.rows(); }
  Eigen::Index dim_p() const override { return p_; }

 private:
  RealMatrix B_;
  Eigen::Index p_;
};

/// Parameters of the synthetic data generator: A = U Sigma V^T with
/// Sigma_ii = xi^(i/2). Requires p <= n <= m and xi in (0, 1).
struct SyntheticSpec {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  Eigen::Index p = 0;
  double xi = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticPca {
  RealMatrix A;  // n x m
  RealMatrix U;  // n x n, orthogonal
  RealMatrix V;  // m x n, orthonormal columns
};

/// Generates A = U Sigma V^T where U and V are orthonormalized seeded
/// standard-normal matrices and Sigma_ii = xi^(i/2), i = 1..n. Bitwise
/// deterministic for a given spec.
SyntheticPca generate_synthetic_pca_full(const SyntheticSpec& spec);
RealMatrix generate_synthetic_pca(const SyntheticSpec& spec);

struct OlsrData {
  RealMatrix C;  // n x m
  RealMatrix D;  // p x m, one 1 per column
};

/// Synthetic stand-ins for the regression and dictionary-learning data:
/// seeded Gaussian sample matrices plus, for the regression problem, a
/// random 0/1 indicator with exactly one 1 per column. The Gaussian
/// standard deviations (1/m resp. 1/(2 sqrt(n))) keep the local gradient
/// norms of order one, so the default penalty beta = 1 sits inside the
/// stable regime, mirroring the synthetic PCA generator whose spectrum is
/// bounded by sqrt(xi) < 1.
OlsrData generate_synthetic_olsr(Eigen::Index n, Eigen::Index m,
                                 Eigen::Index p, std::uint64_t seed);
RealMatrix generate_synthetic_sdl(Eigen::Index n, Eigen::Index m,
                                  std::uint64_t seed);

/// Splits A into d contiguous column blocks whose sizes differ by at most
/// one; the first (m mod d) blocks receive the extra column. Requires
/// d <= m. Concatenating the blocks reproduces A exactly.
std::vector<RealMatrix> partition_columns(const RealMatrix& A, int d);

/// Per-agent objectives over the column partition of the global data.
ObjectiveList make_pca_agents(const RealMatrix& A, int d, Eigen::Index p);
ObjectiveList make_olsr_agents(const RealMatrix& C, const RealMatrix& D,
                               int d);
ObjectiveList make_sdl_agents(const RealMatrix& B, int d, Eigen::Index p);

/// Reads a rectangular headerless CSV of decimal numbers. Parse failures
/// report the 1-based row and column.
RealMatrix load_matrix_csv(const std::string& path);

/// Writes a matrix as CSV with enough digits to round-trip exactly.
void save_matrix_csv(const RealMatrix& M, const std::string& path);

/// Central finite-difference gradient with step 1e-6 * (1 + max|X|),
/// entry by entry. Test oracle; independent of euclidean_grad.
RealMatrix fd_gradient(const LocalObjective& objective, const RealMatrix& X);

}  // namespace destiny
