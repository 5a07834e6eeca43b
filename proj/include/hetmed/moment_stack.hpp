#pragma once

#include "hetmed/types.hpp"

namespace hetmed {

// Exactly identified stacked moment system over beta = (theta | active eta
// blocks) for one estimator. Moment rows are ordered (phi block | gamma
// blocks of the active nuisances); BK has no phi block, its two least-squares
// score blocks take that place. One implementation serves the Newton solves,
// the post-hoc residual certificate and the sandwich pieces.
class MomentStack {
 public:
  // `d_weights` is the per-row scalar of the fourth interaction moment row;
  // required iff kind == MRInteraction.
  MomentStack(const Dataset& data, const ModelSpec& spec, EstimatorKind kind,
              Link rho_link_used, const VectorXd* d_weights = nullptr);

  int dim() const { return dim_; }
  int n_theta() const { return nt_; }
  EstimatorKind kind() const { return kind_; }

  // Mean moment vector, mean Jacobian and mean outer product m m^T over the
  // rows; any output pointer may be null.
  void eval(const VectorXd& beta, VectorXd* mean_m, MatrixXd* mean_jac,
            MatrixXd* mean_outer) const;

  VectorXd pack(const Theta& theta, const EtaParams& eta) const;
  void unpack(const VectorXd& beta, Theta* theta, EtaParams* eta) const;

  // Theta-block Schur complement of the mean Jacobian: the bread matrix
  // whose conditioning reflects how well the data identify theta.
  MatrixXd theta_bread(const MatrixXd& mean_jac) const;

  bool uses_eta1() const { return use1_; }
  bool uses_eta2() const { return use2_; }
  bool uses_eta3() const { return use3_; }
  bool uses_eta4() const { return use4_; }

 private:
  void eval_row_default(Eigen::Index i, const VectorXd& beta, VectorXd& m,
                        MatrixXd& jac) const;
  void eval_row_bk(Eigen::Index i, const VectorXd& beta, VectorXd& m,
                   MatrixXd& jac) const;

  const Dataset& data_;
  EstimatorKind kind_;
  Link pi_link_;
  Link rho_link_;
  MatrixXd xp_, xg_, xr_, xh_;
  VectorXd dw_;
  bool use1_ = false, use2_ = false, use3_ = false, use4_ = false;
  int nt_ = 3;
  int p1_ = 0, p2_ = 0, p3_ = 0, p4_ = 0;
  int o1_ = 0, o2_ = 0, o3_ = 0, o4_ = 0;  // parameter offsets of eta blocks
  int dim_ = 0;
};

}  // namespace hetmed
