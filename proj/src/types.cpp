#include "hetmed/types.hpp"

#include <cmath>

#include "hetmed/errors.hpp"

namespace hetmed {

Dataset::Dataset(VectorXd y_, VectorXd a_, VectorXd m_, MatrixXd x_)
    : y(std::move(y_)), a(std::move(a_)), m(std::move(m_)), x(std::move(x_)) {
  validate();
}

void Dataset::validate() const {
  const Eigen::Index nn = y.size();
  if (a.size() != nn || m.size() != nn || x.rows() != nn) {
    throw InputError("Dataset: y, a, m and x must have the same number of rows");
  }
  if (x.cols() < 1) {
    throw InputError("Dataset: x must have at least the constant column");
  }
  if (nn <= x.cols() + 4) {
    throw InputError("Dataset: need n > p + 4 rows (n=" + std::to_string(nn) +
                     ", p=" + std::to_string(x.cols()) + ")");
  }
  if (!y.allFinite() || !a.allFinite() || !m.allFinite() || !x.allFinite()) {
    throw InputError("Dataset: missing or non-finite values are not supported");
  }
  for (Eigen::Index i = 0; i < nn; ++i) {
    if (x(i, 0) != 1.0) {
      throw InputError("Dataset: column 0 of x must be the constant 1");
    }
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  if (qr.rank() < x.cols()) {
    throw InputError("Dataset: x does not have full column rank");
  }
}

ModelSpec ModelSpec::all_columns(Eigen::Index p) {
  ModelSpec spec;
  std::vector<int> cols;
  cols.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) cols.push_back(j);
  spec.pi_design = cols;
  spec.g_design = cols;
  spec.rho_design = cols;
  spec.h_design = cols;
  return spec;
}

void ModelSpec::validate(const Dataset& data) const {
  auto check = [&](const std::vector<int>& design, const char* name) {
    if (design.empty()) {
      throw InputError(std::string("ModelSpec: empty design for ") + name);
    }
    for (int j : design) {
      if (j < 0 || j >= data.p()) {
        throw InputError(std::string("ModelSpec: design column out of range for ") + name);
      }
    }
  };
  check(pi_design, "pi");
  check(g_design, "g");
  check(rho_design, "rho");
  check(h_design, "h");
  if (pi_link == Link::logistic && exposure_kind != ExposureKind::binary) {
    throw InputError("ModelSpec: logistic pi link requires a binary exposure");
  }
  if (pi_link == Link::log || rho_link == Link::logistic) {
    throw InputError("ModelSpec: unsupported link assignment");
  }
  if (exposure_kind == ExposureKind::binary) {
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      if (data.a(i) != 0.0 && data.a(i) != 1.0) {
        throw InputError("ModelSpec: exposure_kind is binary but a has values other than 0/1");
      }
    }
  }
}

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::MR: return "MR";
    case EstimatorKind::PS: return "PS";
    case EstimatorKind::BK: return "BK";
    case EstimatorKind::Hines: return "HINES";
    case EstimatorKind::MRInteraction: return "MR_INT";
  }
  return "?";
}

EstimatorKind estimator_from_name(const std::string& name) {
  if (name == "MR") return EstimatorKind::MR;
  if (name == "PS") return EstimatorKind::PS;
  if (name == "BK") return EstimatorKind::BK;
  if (name == "HINES") return EstimatorKind::Hines;
  if (name == "MR_INT") return EstimatorKind::MRInteraction;
  throw InputError("unknown estimator '" + name + "' (expected MR, PS, BK, HINES or MR_INT)");
}

}  // namespace hetmed
