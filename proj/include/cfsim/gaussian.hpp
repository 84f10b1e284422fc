// Copyright 2026 The cfsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CFSIM_GAUSSIAN_HPP
#define CFSIM_GAUSSIAN_HPP

// Exact reference distributions for linear-Gaussian models
//
//   V = b0 + B1 V + B2 U,   U ~ N(0, I),
//
// with B1 strictly lower triangular in topological order. Marginals,
// conditionals given V2 = c, and post-intervention laws all stay Gaussian
// and have closed forms; the particle sampler is validated against them.

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "cfsim/errors.hpp"
#include "cfsim/model.hpp"

namespace cfsim {

struct GaussianScm {
  Eigen::VectorXd b0;   // length J
  Eigen::MatrixXd B1;   // J x J, strictly lower triangular
  Eigen::MatrixXd B2;   // J x H onto independent standard normals
  std::vector<std::string> v_names;  // length J
  std::vector<std::string> u_names;  // length H

  Eigen::Index j() const { return b0.size(); }
  Eigen::Index h() const { return B2.cols(); }

  void validate() const {
    if (B1.rows() != j() || B1.cols() != j() || B2.rows() != j()) {
      throw ModelError("coefficient matrix dimensions disagree");
    }
    if (static_cast<Eigen::Index>(v_names.size()) != j() ||
        static_cast<Eigen::Index>(u_names.size()) != h()) {
      throw ModelError("label counts disagree with matrix dimensions");
    }
    for (Eigen::Index r = 0; r < j(); ++r) {
      for (Eigen::Index c = r; c < j(); ++c) {
        if (B1(r, c) != 0.0) {
          throw ModelError(
              "B1 must be strictly lower triangular in topological order");
        }
      }
    }
  }
};

struct GaussianDist {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::vector<std::string> labels;

  Eigen::Index index_of(const std::string& name) const {
    for (size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == name) return static_cast<Eigen::Index>(i);
    }
    throw ModelError("no component named '" + name + "'");
  }

  double mean_of(const std::string& name) const { return mean(index_of(name)); }
  double var_of(const std::string& name) const {
    auto i = index_of(name);
    return cov(i, i);
  }
  double cov_of(const std::string& a, const std::string& b) const {
    return cov(index_of(a), index_of(b));
  }
  double correlation_of(const std::string& a, const std::string& b) const {
    const double va = var_of(a);
    const double vb = var_of(b);
    if (!(va > 0.0) || !(vb > 0.0)) return kNa;
    return cov_of(a, b) / std::sqrt(va * vb);
  }
};

namespace detail {

/// Solve (I - B1) X = R by forward substitution; I - B1 is unit lower
/// triangular, so no pivoting or general inverse is needed.
inline Eigen::MatrixXd solve_structural(const Eigen::MatrixXd& B1,
                                        const Eigen::MatrixXd& rhs) {
  Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(B1.rows(), B1.cols());
  return (ident - B1).triangularView<Eigen::Lower>().solve(rhs);
}

}  // namespace detail

/// Joint law of (V, U): mean ((I-B1)^{-1} b0, 0) and covariance assembled
/// from A = (I-B1)^{-1} B2, namely [[A Aᵀ, A], [Aᵀ, I]].
inline GaussianDist marginal(const GaussianScm& g) {
  g.validate();
  const Eigen::Index jn = g.j();
  const Eigen::Index hn = g.h();
  const Eigen::VectorXd mu_v = detail::solve_structural(g.B1, g.b0);
  const Eigen::MatrixXd a = detail::solve_structural(g.B1, g.B2);

  GaussianDist out;
  out.mean = Eigen::VectorXd::Zero(jn + hn);
  out.mean.head(jn) = mu_v;
  out.cov = Eigen::MatrixXd::Zero(jn + hn, jn + hn);
  out.cov.topLeftCorner(jn, jn) = a * a.transpose();
  out.cov.topRightCorner(jn, hn) = a;
  out.cov.bottomLeftCorner(hn, jn) = a.transpose();
  out.cov.bottomRightCorner(hn, hn) =
      Eigen::MatrixXd::Identity(hn, hn);
  out.labels = g.v_names;
  out.labels.insert(out.labels.end(), g.u_names.begin(), g.u_names.end());
  return out;
}

/// Law of (V1, U) given V2 = c, by standard Gaussian conditioning on the
/// joint above. Labels keep the free variables first (in model order), then
/// all of U. Deterministically linked evidence makes the evidence covariance
/// singular and is reported as such.
inline GaussianDist condition(const GaussianScm& g,
                              const std::map<std::string, double>& fixed) {
  GaussianDist joint = marginal(g);
  if (fixed.empty()) return joint;

  std::vector<Eigen::Index> fixed_idx;
  Eigen::VectorXd c(static_cast<Eigen::Index>(fixed.size()));
  {
    Eigen::Index k = 0;
    for (const auto& [name, value] : fixed) {
      fixed_idx.push_back(joint.index_of(name));
      c(k++) = value;
    }
  }
  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index i = 0; i < joint.mean.size(); ++i) {
    if (std::find(fixed_idx.begin(), fixed_idx.end(), i) == fixed_idx.end()) {
      free_idx.push_back(i);
    }
  }

  const Eigen::Index nf = static_cast<Eigen::Index>(free_idx.size());
  const Eigen::Index nc = static_cast<Eigen::Index>(fixed_idx.size());
  Eigen::VectorXd mu1(nf), mu2(nc);
  Eigen::MatrixXd s11(nf, nf), s12(nf, nc), s22(nc, nc);
  for (Eigen::Index r = 0; r < nf; ++r) {
    mu1(r) = joint.mean(free_idx[static_cast<size_t>(r)]);
    for (Eigen::Index q = 0; q < nf; ++q) {
      s11(r, q) = joint.cov(free_idx[static_cast<size_t>(r)],
                            free_idx[static_cast<size_t>(q)]);
    }
    for (Eigen::Index q = 0; q < nc; ++q) {
      s12(r, q) = joint.cov(free_idx[static_cast<size_t>(r)],
                            fixed_idx[static_cast<size_t>(q)]);
    }
  }
  for (Eigen::Index r = 0; r < nc; ++r) {
    mu2(r) = joint.mean(fixed_idx[static_cast<size_t>(r)]);
    for (Eigen::Index q = 0; q < nc; ++q) {
      s22(r, q) = joint.cov(fixed_idx[static_cast<size_t>(r)],
                            fixed_idx[static_cast<size_t>(q)]);
    }
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt(s22);
  const double pivot_floor = 1e-10 * std::max(1.0, s22.diagonal().maxCoeff());
  if (ldlt.info() != Eigen::Success ||
      ldlt.vectorD().minCoeff() < pivot_floor) {
    throw ModelError(
        "evidence covariance is singular: the conditioned variables are "
        "deterministically linked");
  }
  const Eigen::MatrixXd gain = ldlt.solve(s12.transpose()).transpose();

  GaussianDist out;
  out.mean = mu1 + gain * (c - mu2);
  out.cov = s11 - gain * s12.transpose();
  // Clean up the tiny asymmetry that the subtraction leaves behind.
  out.cov = ((out.cov + out.cov.transpose()) / 2.0).eval();
  out.labels.reserve(static_cast<size_t>(nf));
  for (Eigen::Index i : free_idx) {
    out.labels.push_back(joint.labels[static_cast<size_t>(i)]);
  }
  return out;
}

/// Law of V after do(X = x) with the exogenous variables updated by the
/// evidence: intervened rows of B1/B2 are zeroed, their b0 entries set to x,
/// and the conditional law of U is pushed through the resulting affine map.
inline GaussianDist counterfactual(const GaussianScm& g,
                                   const std::map<std::string, double>& fixed,
                                   const Intervention& iv) {
  g.validate();
  GaussianDist cond = condition(g, fixed);

  // Conditional law of all of U, extracted by label.
  const Eigen::Index hn = g.h();
  Eigen::VectorXd mu_u(hn);
  Eigen::MatrixXd cov_u(hn, hn);
  for (Eigen::Index r = 0; r < hn; ++r) {
    const auto ir = cond.index_of(g.u_names[static_cast<size_t>(r)]);
    mu_u(r) = cond.mean(ir);
    for (Eigen::Index q = 0; q < hn; ++q) {
      cov_u(r, q) =
          cond.cov(ir, cond.index_of(g.u_names[static_cast<size_t>(q)]));
    }
  }

  Eigen::VectorXd b0 = g.b0;
  Eigen::MatrixXd b1 = g.B1;
  Eigen::MatrixXd b2 = g.B2;
  for (const auto& [name, value] : iv.assignments) {
    Eigen::Index row = -1;
    for (size_t i = 0; i < g.v_names.size(); ++i) {
      if (g.v_names[i] == name) row = static_cast<Eigen::Index>(i);
    }
    if (row < 0) throw ModelError("unknown variable '" + name + "'");
    b0(row) = value;
    b1.row(row).setZero();
    b2.row(row).setZero();
  }

  const Eigen::MatrixXd a = detail::solve_structural(b1, b2);
  GaussianDist out;
  out.mean = detail::solve_structural(b1, (b0 + b2 * mu_u).eval());
  out.cov = a * cov_u * a.transpose();
  out.cov = ((out.cov + out.cov.transpose()) / 2.0).eval();
  out.labels = g.v_names;
  return out;
}

/// Bridge to the simulation engine: an additive-noise model whose simulate()
/// law equals marginal(). Each variable needs one dedicated B2 column with
/// coefficient exactly 1 (its error term); every other B2 column becomes a
/// shared background variable.
inline Scm to_scm(const GaussianScm& g) {
  g.validate();
  const Eigen::Index jn = g.j();
  const Eigen::Index hn = g.h();

  std::vector<Eigen::Index> dedicated(static_cast<size_t>(jn), -1);
  std::vector<bool> is_dedicated(static_cast<size_t>(hn), false);
  for (Eigen::Index col = 0; col < hn; ++col) {
    Eigen::Index nonzero_row = -1;
    int nonzero_count = 0;
    for (Eigen::Index row = 0; row < jn; ++row) {
      if (g.B2(row, col) != 0.0) {
        ++nonzero_count;
        nonzero_row = row;
      }
    }
    if (nonzero_count == 1 && g.B2(nonzero_row, col) == 1.0 &&
        dedicated[static_cast<size_t>(nonzero_row)] < 0) {
      dedicated[static_cast<size_t>(nonzero_row)] = col;
      is_dedicated[static_cast<size_t>(col)] = true;
    }
  }
  for (Eigen::Index row = 0; row < jn; ++row) {
    if (dedicated[static_cast<size_t>(row)] < 0) {
      throw ModelError("variable '" + g.v_names[static_cast<size_t>(row)] +
                       "' has no dedicated unit column in B2");
    }
  }

  ModelSpec spec;
  for (Eigen::Index col = 0; col < hn; ++col) {
    if (!is_dedicated[static_cast<size_t>(col)]) {
      spec.background.push_back(
          {g.u_names[static_cast<size_t>(col)], ErrorDist::normal(0.0, 1.0)});
    }
  }
  for (Eigen::Index row = 0; row < jn; ++row) {
    ExprPtr e;
    auto add_term = [&e](ExprPtr term) {
      e = e ? Expr::binary(BinOp::kAdd, std::move(e), std::move(term))
            : std::move(term);
    };
    if (g.b0(row) != 0.0) add_term(Expr::literal(g.b0(row)));
    for (Eigen::Index c = 0; c < row; ++c) {
      if (g.B1(row, c) != 0.0) {
        add_term(Expr::binary(BinOp::kMul, Expr::literal(g.B1(row, c)),
                              Expr::var(g.v_names[static_cast<size_t>(c)])));
      }
    }
    for (Eigen::Index c = 0; c < hn; ++c) {
      if (is_dedicated[static_cast<size_t>(c)] ||
          g.B2(row, c) == 0.0 ||
          c == dedicated[static_cast<size_t>(row)]) {
        continue;
      }
      add_term(Expr::binary(BinOp::kMul, Expr::literal(g.B2(row, c)),
                            Expr::var(g.u_names[static_cast<size_t>(c)])));
    }
    if (!e) e = Expr::literal(0.0);
    // The dedicated error enters last so the expression has the g(pa) + u
    // shape the additive declaration requires.
    add_term(Expr::var("u"));
    spec.variables.push_back({g.v_names[static_cast<size_t>(row)],
                              VarKind::kContinuous,
                              ErrorDist::normal(0.0, 1.0), std::move(e),
                              Monotonicity::kAdditive});
  }
  return Scm::build(std::move(spec));
}

}  // namespace cfsim

#endif  // CFSIM_GAUSSIAN_HPP
