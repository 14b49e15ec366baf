#include "mfglab/riccati.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "mfglab/errors.hpp"

namespace mfglab {

namespace {

MatrixXd rhs(const RiccatiProblem& p, double t, const MatrixXd& Pi,
             const Eigen::LDLT<MatrixXd>& Rfac) {
  const MatrixXd At = p.A(t);
  const MatrixXd S = p.B.transpose() * Pi + p.N.transpose();
  return Pi * At + At.transpose() * Pi - S.transpose() * Rfac.solve(S) + p.Q;
}

}  // namespace

RiccatiSolution solve_backward(const RiccatiProblem& prob,
                               const TimeGrid& grid) {
  const double h = grid.dt();
  Eigen::LDLT<MatrixXd> Rfac(prob.R);
  if (Rfac.info() != Eigen::Success) {
    throw ConvexityViolation("riccati: R is not factorizable");
  }

  RiccatiSolution sol;
  sol.grid = grid;
  sol.Pi.assign(grid.nodes(), MatrixXd());
  sol.Pi[grid.steps] = symmetrize(prob.G);

  for (int i = grid.steps; i > 0; --i) {
    const double t = grid.t(i);
    const MatrixXd& Pi = sol.Pi[i];
    // Backward step of size h: integrate in tau = T - t, dPi/dtau = rhs.
    const MatrixXd k1 = rhs(prob, t, Pi, Rfac);
    const MatrixXd k2 = rhs(prob, t - 0.5 * h, Pi + 0.5 * h * k1, Rfac);
    const MatrixXd k3 = rhs(prob, t - 0.5 * h, Pi + 0.5 * h * k2, Rfac);
    const MatrixXd k4 = rhs(prob, t - h, Pi + h * k3, Rfac);
    MatrixXd next = Pi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    next = symmetrize(next);
    if (!next.allFinite() || max_abs(next) > kBlowUpThreshold) {
      throw BlowUp("riccati: solution escaped at t = " +
                   std::to_string(grid.t(i - 1)));
    }
    sol.Pi[i - 1] = std::move(next);
  }
  return sol;
}

RiccatiSolution solve_backward(const MatrixXd& A, const MatrixXd& B,
                               const MatrixXd& Q, const MatrixXd& N,
                               const MatrixXd& R, const MatrixXd& G,
                               const TimeGrid& grid) {
  RiccatiProblem p;
  p.A = [A](double) { return A; };
  p.B = B;
  p.Q = Q;
  p.N = N;
  p.R = R;
  p.G = G;
  return solve_backward(p, grid);
}

std::function<MatrixXd(double)> interpolant(const std::vector<MatrixXd>& nodes,
                                            const TimeGrid& grid) {
  if (static_cast<int>(nodes.size()) != grid.nodes()) {
    throw GridMismatch("interpolant: samples do not match the grid");
  }
  return [nodes, grid](double t) -> MatrixXd {
    const double x = std::clamp(t / grid.dt(), 0.0, double(grid.steps));
    const int lo = std::min(static_cast<int>(x), grid.steps - 1);
    const double w = x - lo;
    if (w == 0.0) return nodes[lo];
    return (1.0 - w) * nodes[lo] + w * nodes[lo + 1];
  };
}

double ode_residual(const RiccatiProblem& prob, const RiccatiSolution& sol) {
  const TimeGrid& grid = sol.grid;
  const double h = grid.dt();
  Eigen::LDLT<MatrixXd> Rfac(prob.R);
  double worst = 0.0;
  for (int i = 1; i < grid.steps; ++i) {
    const MatrixXd dPi = (sol.Pi[i + 1] - sol.Pi[i - 1]) / (2.0 * h);
    const MatrixXd res = dPi + rhs(prob, grid.t(i), sol.Pi[i], Rfac);
    worst = std::max(worst, max_abs(res));
  }
  return worst;
}

}  // namespace mfglab
