#pragma once

#include "dcpl/common.hpp"

namespace dcpl {

// Dense matrix exponential, scaling-and-squaring with a degree-13 Padé approximant.
Mat expm(const Mat& a);

// Largest eigenvalue modulus of a nonnegative matrix via power iteration.
double spectral_radius(const Mat& a, double tol = 1e-8, int max_iter = 10000);

// Stage response operators for y' = A y on one interval of length dt:
//   decay    = e^{A dt}
//   integral = ∫₀^dt e^{A s} ds
//   weighted = ∫₀^dt (dt − s) e^{A s} ds
// A must be nonsingular (guaranteed here by the branching-stability projection).
struct StageOperators {
    Mat decay;
    Mat integral;
    Mat weighted;
};

StageOperators stage_operators(const Mat& a, double dt);

}  // namespace dcpl
