#pragma once

#include <functional>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/linalg.hpp"

namespace mfglab {

// Terminal-value problem
//   -dPi/dt = Pi A(t) + A(t)^T Pi - (B^T Pi + N^T)^T R^-1 (B^T Pi + N^T) + Q
//   Pi(T) = G
// integrated backward with classical RK4 on the grid; every accepted step is
// symmetrized. Entries above `blow_up_threshold` abort with the escape time.
struct RiccatiProblem {
  std::function<MatrixXd(double)> A;  // t -> dim x dim
  MatrixXd B;
  MatrixXd Q;
  MatrixXd N;
  MatrixXd R;
  MatrixXd G;
};

struct RiccatiSolution {
  TimeGrid grid;
  std::vector<MatrixXd> Pi;  // one per node, Pi[grid.steps] = G

  const MatrixXd& at(int node) const { return Pi[node]; }
};

constexpr double kBlowUpThreshold = 1e12;

RiccatiSolution solve_backward(const RiccatiProblem& prob, const TimeGrid& grid);

// Convenience overload for constant A.
RiccatiSolution solve_backward(const MatrixXd& A, const MatrixXd& B,
                               const MatrixXd& Q, const MatrixXd& N,
                               const MatrixXd& R, const MatrixXd& G,
                               const TimeGrid& grid);

// Wraps per-node samples as a piecewise-linear function of t, for feeding
// gain-dependent system matrices into the integrator's substage evaluations.
std::function<MatrixXd(double)> interpolant(const std::vector<MatrixXd>& nodes,
                                            const TimeGrid& grid);

// Max norm of the ODE residual at interior nodes, using a central difference
// for dPi/dt; scales as O(dt^2), so tests compare against C * dt^2.
double ode_residual(const RiccatiProblem& prob, const RiccatiSolution& sol);

}  // namespace mfglab
