#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace hetmed {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Link { identity, logistic, log };
enum class ExposureKind { binary, continuous };

// Observed data (Y, A, M, X). Column 0 of x is a mandatory constant 1; every
// nuisance design refers to columns of x by index.
struct Dataset {
  VectorXd y;
  VectorXd a;
  VectorXd m;
  MatrixXd x;

  Dataset() = default;
  Dataset(VectorXd y_, VectorXd a_, VectorXd m_, MatrixXd x_);

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return x.cols(); }

  // Checks lengths, finiteness, the constant column, full column rank and
  // n > p + 4. Throws InputError on violation.
  void validate() const;
};

// Target parameters of the partially linear outcome/mediator models. zeta is
// the exposure-mediator interaction coefficient and is present only when the
// interaction model was requested.
struct Theta {
  double theta1 = 0.0;  // mediator -> outcome
  double theta2 = 0.0;  // direct exposure -> outcome
  double theta3 = 0.0;  // exposure -> mediator
  std::optional<double> zeta;

  int dim() const { return zeta ? 4 : 3; }
};

// Declarative description of the four working nuisance models. Each design is
// a list of column indices into Dataset.x; column 0 (the intercept) is
// expected to be part of every design.
struct ModelSpec {
  std::vector<int> pi_design{0};
  std::vector<int> g_design{0};
  std::vector<int> rho_design{0};
  std::vector<int> h_design{0};
  Link pi_link = Link::logistic;
  Link rho_link = Link::log;
  ExposureKind exposure_kind = ExposureKind::binary;

  // All four designs spanning columns 0..p-1.
  static ModelSpec all_columns(Eigen::Index p);

  void validate(const Dataset& data) const;
};

// Fitted nuisance coefficients profiled at a fixed theta. rho_link_used
// records the link actually used for the rho block: a log-link spec falls
// back to the identity link when the mean residual product is non-positive,
// since exp() cannot match a non-positive level.
struct EtaParams {
  VectorXd eta1;  // pi
  VectorXd eta2;  // g*
  VectorXd eta3;  // rho
  VectorXd eta4;  // h*
  Theta profiled_at;
  Link rho_link_used = Link::log;
};

// Per-row evaluations of the four working models.
struct NuisanceValues {
  VectorXd pi;
  VectorXd g_star;
  VectorXd rho;
  VectorXd h_star;
  bool clamped = false;  // exp() argument hit the representable range
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

enum class EstimatorKind { MR, PS, BK, Hines, MRInteraction };

std::string estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string& name);

enum class VarianceSource { sandwich, bootstrap };

// Natural direct/indirect effect estimates for one contrast, with their
// standard errors and Wald intervals.
struct EffectReport {
  EstimatorKind estimator = EstimatorKind::MR;
  double contrast_from = 0.0;
  double contrast_to = 1.0;
  double nde = 0.0;
  double nie = 0.0;
  double se_nde = 0.0;
  double se_nie = 0.0;
  double ci_level = 0.95;
  Interval ci_nde;
  Interval ci_nie;
  VarianceSource variance_source = VarianceSource::sandwich;
};

}  // namespace hetmed
