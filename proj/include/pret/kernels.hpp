#pragma once

// Data-parallel inner loops, each with a serial reference implementation.
// The OpenMP variants partition independent output elements across threads
// and are bit-identical to their serial counterparts; the serial versions
// stay as test oracles and benchmark baselines.

#include "pret/model.hpp"
#include "pret/moment_inequalities.hpp"

#include <vector>

namespace pret::kernels {

// Raw (pre-drop) unconditional moment matrix, n x 4*(1+2*#excluded).
// medians must hold one entry per excluded column. saturated is set when an
// odds ratio hits the cap.
MatrixXd moment_matrix_serial(const PsiPoint& psi, const Sample& sample,
                              const std::vector<int>& instrument_columns,
                              const std::vector<double>& medians,
                              bool& saturated);
MatrixXd moment_matrix_omp(const PsiPoint& psi, const Sample& sample,
                           const std::vector<int>& instrument_columns,
                           const std::vector<double>& medians,
                           bool& saturated);

// Pooled mixture density over the support grid.
VectorXd pooled_density_serial(const ReturnsDistribution& rd,
                               const VectorXd& support);
VectorXd pooled_density_omp(const ReturnsDistribution& rd,
                            const VectorXd& support);

// Simulated criterion draws: for each row r of chi,
// sum_l binding_l * min((omega_sqrt * chi_r)_l, 0)^2.
VectorXd q_draws_serial(const MatrixXd& omega_sqrt, const MatrixXd& chi,
                        const std::vector<bool>& binding);
VectorXd q_draws_omp(const MatrixXd& omega_sqrt, const MatrixXd& chi,
                     const std::vector<bool>& binding);

}  // namespace pret::kernels
