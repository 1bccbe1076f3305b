#pragma once

#include "vesflow/kernels.hpp"

// Quadrature for the layer potentials of one closed curve.
//
// Self interactions: the single layer's log singularity is integrated with
// the spectral product rule for the periodic log kernel (weights below);
// the double layer and indicator kernels are smooth on the curve and use
// the plain trapezoid rule with their analytic diagonal limits.
//
// Cross interactions (targets off the source curve) use the trapezoid
// rule; accuracy for targets outside the near zone is the caller's
// responsibility (see nearsing.hpp).

namespace vesflow {

// Weights R such that sum_j R[(j - i) mod n] f(alpha_j) integrates
// log(4 sin^2((alpha - alpha_i)/2)) f(alpha) over the period exactly for
// trigonometric polynomials of degree < n/2. Cached per n.
const VectorXd& kress_log_weights(int n);

// Dense self-interaction matrices on stacked (x-then-y) node vectors.
// Rows/columns are ordered like the output/input of stack_xy.
MatrixXd stokes_slp_self_matrix(const Curve& c, const GeometryCache& g,
                                double mu0);
MatrixXd stokes_dlp_self_matrix(const Curve& c, const GeometryCache& g,
                                double nu, double normal_sign = 1.0);

// Single 2 x 2n block row of the self matrices, for on-curve values on
// upsampled grids where the full matrix would be wasteful.
MatrixXd stokes_slp_self_row(const Curve& c, const GeometryCache& g, int i,
                             double mu0);
MatrixXd stokes_dlp_self_row(const Curve& c, const GeometryCache& g, int i,
                             double nu, double normal_sign = 1.0);

// Principal value of the indicator potential on the curve itself; full
// matrix (n x n) and single row.
MatrixXd laplace_dlp_self_matrix(const Curve& c, const GeometryCache& g,
                                 double normal_sign = 1.0);
VectorXd laplace_dlp_self_row(const Curve& c, const GeometryCache& g, int i,
                              double normal_sign = 1.0);

// Trapezoid cross-interaction matrices; targets must not touch the curve.
// Output rows are stacked x-then-y over targets (Stokes) or one row per
// target (indicator); columns follow stack_xy of the source density.
MatrixXd stokes_slp_matrix(const Curve& c, const GeometryCache& g,
                           const Matrix2Xd& targets, double mu0);
MatrixXd stokes_dlp_matrix(const Curve& c, const GeometryCache& g,
                           const Matrix2Xd& targets, double nu,
                           double normal_sign = 1.0);
MatrixXd laplace_dlp_matrix(const Curve& c, const GeometryCache& g,
                            const Matrix2Xd& targets,
                            double normal_sign = 1.0);

// Convenience appliers used by tests and diagnostics.
Matrix2Xd apply_stokes_slp_self(const Curve& c, const GeometryCache& g,
                                const Matrix2Xd& density, double mu0);
Matrix2Xd apply_stokes_dlp_self(const Curve& c, const GeometryCache& g,
                                const Matrix2Xd& density, double nu,
                                double normal_sign = 1.0);

}  // namespace vesflow
