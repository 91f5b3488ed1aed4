#pragma once

// Class-conditional Gaussians with one covariance shared by all classes.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "lsvos/errors.hpp"
#include "lsvos/log.hpp"
#include "lsvos/numerics.hpp"
#include "lsvos/rng.hpp"

namespace lsvos {

class SharedCovarianceGaussian {
 public:
  /// Fits per-class means and the pooled within-class covariance. Adds
  /// eps * I (eps = 1e-6 * trace / dim) when the covariance is singular or a
  /// class has fewer than dim + 2 samples.
  static SharedCovarianceGaussian fit(const Matrix& features, const std::vector<int>& classes,
                                      std::size_t num_classes) {
    if (features.rows() == 0) throw InvalidInput("gaussian fit: no samples");
    if (static_cast<std::size_t>(features.rows()) != classes.size()) {
      throw InvalidInput("gaussian fit: one class id per row required");
    }
    const auto dim = features.cols();
    SharedCovarianceGaussian g;
    g.means_ = Matrix::Zero(static_cast<Eigen::Index>(num_classes), dim);
    g.counts_.assign(num_classes, 0);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      const int c = classes[static_cast<std::size_t>(i)];
      if (c < 0 || static_cast<std::size_t>(c) >= num_classes) throw InvalidInput("gaussian fit: class out of range");
      g.means_.row(c) += features.row(i);
      g.counts_[static_cast<std::size_t>(c)] += 1;
    }
    bool small_class = false;
    for (std::size_t k = 0; k < num_classes; ++k) {
      if (g.counts_[k] == 0) throw InvalidInput("gaussian fit: class " + std::to_string(k) + " has no samples");
      g.means_.row(static_cast<Eigen::Index>(k)) /= static_cast<double>(g.counts_[k]);
      if (g.counts_[k] < static_cast<std::size_t>(dim) + 2) small_class = true;
    }
    Matrix centered(features.rows(), dim);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      centered.row(i) = features.row(i) - g.means_.row(classes[static_cast<std::size_t>(i)]);
    }
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(features.rows());
    g.regularized_ = small_class;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const double ridge = 1e-6 * cov.trace() / static_cast<double>(dim);
    if (!g.regularized_ && (llt.info() != Eigen::Success || !well_conditioned(llt))) g.regularized_ = true;
    if (g.regularized_) {
      warn("covariance singular or under-sampled; adding " + std::to_string(ridge) + " * I");
      cov.diagonal().array() += ridge > 0.0 ? ridge : 1e-12;
      llt.compute(cov);
      if (llt.info() != Eigen::Success) throw NumericalFailure("gaussian fit: covariance not positive definite");
    }
    g.covariance_ = std::move(cov);
    g.chol_ = llt.matrixL();
    g.log_det_ = 2.0 * g.chol_.diagonal().array().log().sum();
    return g;
  }

  std::size_t dim() const { return static_cast<std::size_t>(means_.cols()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(means_.rows()); }
  const Matrix& means() const { return means_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  bool regularized() const { return regularized_; }

  /// Squared Mahalanobis distance of each row to class `k`'s mean.
  Vector squared_distance(const Matrix& x, std::size_t k) const {
    if (static_cast<std::size_t>(x.cols()) != dim()) throw InvalidInput("mahalanobis: dimension mismatch");
    Eigen::MatrixXd diff = (x.rowwise() - means_.row(static_cast<Eigen::Index>(k))).transpose();
    chol_.triangularView<Eigen::Lower>().solveInPlace(diff);
    return diff.colwise().squaredNorm().transpose();
  }

  Vector log_likelihood(const Matrix& x, std::size_t k) const {
    const double c = -0.5 * (static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) + log_det_);
    return (c - 0.5 * squared_distance(x, k).array()).matrix();
  }

  /// n draws from class k's Gaussian.
  Matrix sample(std::size_t k, std::size_t n, Rng& rng) const {
    Eigen::MatrixXd z(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(n));
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = rng.normal();
    }
    Matrix out = (chol_.triangularView<Eigen::Lower>() * z).transpose();
    out.rowwise() += means_.row(static_cast<Eigen::Index>(k));
    return out;
  }

 private:
  static bool well_conditioned(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    const Eigen::VectorXd d = Eigen::MatrixXd(llt.matrixL()).diagonal();
    return d.minCoeff() > 1e-7 * d.maxCoeff();
  }

  Matrix means_;
  std::vector<std::size_t> counts_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd chol_;
  double log_det_ = 0.0;
  bool regularized_ = false;
};

}  // namespace lsvos
