#pragma once

#include "lmg/bvpcont.hpp"

namespace lmg::detail {

inline const Mat3& parity_matrix() {
  static const Mat3 P = Eigen::Vector3d(-1.0, -1.0, 1.0).asDiagonal();
  return P;
}

/// One segment over a period (or half of it); scalars: period, then lambda_plus when free.
shooting::Layout periodic_layout(int intervals, bool symmetric, bool free_lambda);

/// Closing condition x_m = B x_0 and the phase condition f(ref) . (x_0 - ref) = 0.
shooting::Extra periodic_conditions(const ModelParams& p, const shooting::Layout& L, bool symmetric, const Vec3& ref);

VecX pack_orbit(const PeriodicOrbitSolution& po, const shooting::Layout& L);

/// Orbit data, STMs, multipliers and amplitude from a converged shooting vector.
PeriodicOrbitSolution make_orbit(const ModelParams& p, const shooting::Layout& L, const VecX& z,
                                 const std::vector<FlowJet>& jets, bool symmetric, double residual);

/// Multiplier crossing tests of an orbit: product over the non-trivial multipliers (or half-map
/// eigenvalues for symmetric orbits) of (m + 1) and (m - 1).
double pd_test(const PeriodicOrbitSolution& po);
double fold_test(const PeriodicOrbitSolution& po);
/// Non-trivial real multiplier closest to `target`, as (value, index); index -1 when none is real.
std::pair<cplx, int> multiplier_near(const PeriodicOrbitSolution& po, double target);

}  // namespace lmg::detail
