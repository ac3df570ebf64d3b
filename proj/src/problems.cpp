#include "destiny/problems.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "destiny/penalty.hpp"

namespace destiny {

namespace {

void check_input(const RealMatrix& X, Eigen::Index n, Eigen::Index p,
                 const char* who) {
  if (X.rows() != n || X.cols() != p) {
    throw std::invalid_argument(std::string(who) + ": expected " +
                                std::to_string(n) + "x" + std::to_string(p) +
                                " input, got " + std::to_string(X.rows()) +
                                "x" + std::to_string(X.cols()));
  }
}

RealMatrix seeded_gaussian(Eigen::Index rows, Eigen::Index cols,
                           std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> gauss(0.0, sd);
  RealMatrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      M(i, j) = gauss(rng);
    }
  }
  return M;
}

}  // namespace

PcaObjective::PcaObjective(RealMatrix A, Eigen::Index p)
    : A_(std::move(A)), p_(p) {
  if (A_.cols() < 1) throw std::invalid_argument("PcaObjective: empty block");
  if (p_ < 1 || p_ > A_.rows()) {
    throw std::invalid_argument("PcaObjective: need 1 <= p <= n");
  }
}

double PcaObjective::value(const RealMatrix& X) const {
  check_input(X, A_.rows(), p_, "PcaObjective::value");
  return -0.5 * (A_.transpose() * X).squaredNorm();
}

RealMatrix PcaObjective::euclidean_grad(const RealMatrix& X) const {
  check_input(X, A_.rows(), p_, "PcaObjective::euclidean_grad");
  return -(A_ * (A_.transpose() * X));
}

OlsrObjective::OlsrObjective(RealMatrix C, RealMatrix D)
    : C_(std::move(C)), D_(std::move(D)) {
  if (C_.cols() != D_.cols()) {
    throw std::invalid_argument("OlsrObjective: C and D must share m_i");
  }
  if (C_.cols() < 1) throw std::invalid_argument("OlsrObjective: empty block");
}

double OlsrObjective::value(const RealMatrix& X) const {
  check_input(X, C_.rows(), D_.rows(), "OlsrObjective::value");
  return (C_.transpose() * X - D_.transpose()).squaredNorm();
}

RealMatrix OlsrObjective::euclidean_grad(const RealMatrix& X) const {
  check_input(X, C_.rows(), D_.rows(), "OlsrObjective::euclidean_grad");
  return 2.0 * (C_ * (C_.transpose() * X - D_.transpose()));
}

SdlObjective::SdlObjective(RealMatrix B, Eigen::Index p)
    : B_(std::move(B)), p_(p) {
  if (B_.cols() < 1) throw std::invalid_argument("SdlObjective: empty block");
  if (p_ < 1 || p_ > B_.rows()) {
    throw std::invalid_argument("SdlObjective: need 1 <= p <= n");
  }
}

double SdlObjective::value(const RealMatrix& X) const {
  check_input(X, B_.rows(), p_, "SdlObjective::value");
  return -0.25 * (B_.transpose() * X).array().pow(4).sum();
}

RealMatrix SdlObjective::euclidean_grad(const RealMatrix& X) const {
  check_input(X, B_.rows(), p_, "SdlObjective::euclidean_grad");
  const RealMatrix T = B_.transpose() * X;  // m_i x p
  return -(B_ * T.array().cube().matrix());
}

void SyntheticSpec::validate() const {
  if (n < 1 || m < 1 || p < 1) {
    throw std::invalid_argument("SyntheticSpec: n, m, p must be positive");
  }
  if (!(p <= n && n <= m)) {
    throw std::invalid_argument("SyntheticSpec: need p <= n <= m");
  }
  if (!(xi > 0.0 && xi < 1.0)) {
    throw std::invalid_argument("SyntheticSpec: need 0 < xi < 1");
  }
}

SyntheticPca generate_synthetic_pca_full(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  SyntheticPca out;
  out.U = orthonormalize(seeded_gaussian(spec.n, spec.n, rng)).matrix();
  out.V = orthonormalize(seeded_gaussian(spec.m, spec.n, rng)).matrix();
  Eigen::VectorXd sv(spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    sv(i) = std::pow(spec.xi, static_cast<double>(i + 1) / 2.0);
  }
  out.A = out.U * sv.asDiagonal() * out.V.transpose();
  return out;
}

RealMatrix generate_synthetic_pca(const SyntheticSpec& spec) {
  return generate_synthetic_pca_full(spec).A;
}

OlsrData generate_synthetic_olsr(Eigen::Index n, Eigen::Index m,
                                 Eigen::Index p, std::uint64_t seed) {
  if (n < 1 || m < 1 || p < 1 || p > n) {
    throw std::invalid_argument("generate_synthetic_olsr: need 1 <= p <= n, m >= 1");
  }
  std::mt19937_64 rng(seed);
  OlsrData out;
  out.C = seeded_gaussian(n, m, rng, 1.0 / static_cast<double>(m));
  out.D = RealMatrix::Zero(p, m);
  std::uniform_int_distribution<Eigen::Index> pick(0, p - 1);
  for (Eigen::Index j = 0; j < m; ++j) {
    out.D(pick(rng), j) = 1.0;
  }
  return out;
}

RealMatrix generate_synthetic_sdl(Eigen::Index n, Eigen::Index m,
                                  std::uint64_t seed) {
  if (n < 1 || m < 1) {
    throw std::invalid_argument("generate_synthetic_sdl: need n, m >= 1");
  }
  std::mt19937_64 rng(seed);
  return seeded_gaussian(n, m, rng, 0.5 / std::sqrt(static_cast<double>(n)));
}

std::vector<RealMatrix> partition_columns(const RealMatrix& A, int d) {
  if (d < 1) throw std::invalid_argument("partition_columns: need d >= 1");
  if (d > A.cols()) {
    throw std::invalid_argument("partition_columns: d = " + std::to_string(d) +
                                " exceeds column count " +
                                std::to_string(A.cols()));
  }
  const Eigen::Index base = A.cols() / d;
  const Eigen::Index extra = A.cols() % d;
  std::vector<RealMatrix> blocks;
  blocks.reserve(d);
  Eigen::Index offset = 0;
  for (int i = 0; i < d; ++i) {
    const Eigen::Index width = base + (i < extra ? 1 : 0);
    blocks.emplace_back(A.middleCols(offset, width));
    offset += width;
  }
  return blocks;
}

ObjectiveList make_pca_agents(const RealMatrix& A, int d, Eigen::Index p) {
  ObjectiveList agents;
  for (auto& block : partition_columns(A, d)) {
    agents.push_back(std::make_unique<PcaObjective>(std::move(block), p));
  }
  return agents;
}

ObjectiveList make_olsr_agents(const RealMatrix& C, const RealMatrix& D,
                               int d) {
  if (C.cols() != D.cols()) {
    throw std::invalid_argument("make_olsr_agents: C and D must share m");
  }
  auto c_blocks = partition_columns(C, d);
  auto d_blocks = partition_columns(D, d);
  ObjectiveList agents;
  for (int i = 0; i < d; ++i) {
    agents.push_back(std::make_unique<OlsrObjective>(std::move(c_blocks[i]),
                                                     std::move(d_blocks[i])));
  }
  return agents;
}

ObjectiveList make_sdl_agents(const RealMatrix& B, int d, Eigen::Index p) {
  ObjectiveList agents;
  for (auto& block : partition_columns(B, d)) {
    agents.push_back(std::make_unique<SdlObjective>(std::move(block), p));
  }
  return agents;
}

RealMatrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_matrix_csv: cannot open " + path);
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<double> row;
    std::size_t start = 0;
    std::size_t col = 0;
    while (true) {
      ++col;
      const std::size_t comma = line.find(',', start);
      std::string_view cell(line.data() + start,
                            (comma == std::string::npos ? line.size() : comma) -
                                start);
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) {
        cell.remove_prefix(1);
      }
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) {
        cell.remove_suffix(1);
      }
      double v = 0.0;
      const auto* end = cell.data() + cell.size();
      const auto res = std::from_chars(cell.data(), end, v);
      if (res.ec != std::errc() || res.ptr != end) {
        throw std::runtime_error(path + ": row " + std::to_string(lineno) +
                                 ", column " + std::to_string(col) +
                                 ": not a number: '" + std::string(cell) + "'");
      }
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error(path + ": row " + std::to_string(lineno) +
                               " has " + std::to_string(row.size()) +
                               " fields, expected " +
                               std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw std::runtime_error("load_matrix_csv: " + path + " is empty");
  }
  RealMatrix M(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return M;
}

void save_matrix_csv(const RealMatrix& M, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_matrix_csv: cannot open " + path);
  }
  char buf[64];
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", M(i, j));
      out << buf << (j + 1 == M.cols() ? "" : ",");
    }
    out << '\n';
  }
  if (!out) {
    throw std::runtime_error("save_matrix_csv: write failed for " + path);
  }
}

RealMatrix fd_gradient(const LocalObjective& objective, const RealMatrix& X) {
  const double step = 1e-6 * (1.0 + X.cwiseAbs().maxCoeff());
  RealMatrix grad(X.rows(), X.cols());
  RealMatrix probe = X;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      probe(i, j) = X(i, j) + step;
      const double up = objective.value(probe);
      probe(i, j) = X(i, j) - step;
      const double down = objective.value(probe);
      probe(i, j) = X(i, j);
      grad(i, j) = (up - down) / (2.0 * step);
    }
  }
  return grad;
}

}  // namespace destiny
