#include "dcpl/linalg.hpp"

#include <cmath>

namespace dcpl {

Mat expm(const Mat& a) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() != n) throw ValidationError("expm: matrix must be square");
    if (n == 0) return a;

    static const double pade[] = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0,  129060195264000.0,   10559470521600.0,
        670442572800.0,      33522128640.0,       1323241920.0,
        40840800.0,          960960.0,            16380.0,
        182.0,               1.0};
    const double theta13 = 5.371920351148152;

    const double norm = a.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm
    int squarings = 0;
    Mat as = a;
    if (norm > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
        as /= std::ldexp(1.0, squarings);
    }

    const Mat ident = Mat::Identity(n, n);
    const Mat a2 = as * as;
    const Mat a4 = a2 * a2;
    const Mat a6 = a2 * a4;

    const Mat u = as * (a6 * (pade[13] * a6 + pade[11] * a4 + pade[9] * a2) +
                        pade[7] * a6 + pade[5] * a4 + pade[3] * a2 + pade[1] * ident);
    const Mat v = a6 * (pade[12] * a6 + pade[10] * a4 + pade[8] * a2) +
                  pade[6] * a6 + pade[4] * a4 + pade[2] * a2 + pade[0] * ident;

    Mat result = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < squarings; ++i) result = result * result;
    return result;
}

double spectral_radius(const Mat& a, double tol, int max_iter) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() != n) throw ValidationError("spectral_radius: matrix must be square");
    if (n == 0) return 0.0;

    Vec v = Vec::Ones(n) / std::sqrt(static_cast<double>(n));
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Vec w = a * v;
        const double norm = w.norm();
        if (norm < 1e-300) return 0.0;  // nilpotent direction collapsed
        w /= norm;
        const double next = std::abs(w.dot(a * w));
        if (std::abs(next - lambda) < tol * std::max(1.0, next)) return next;
        lambda = next;
        v = w;
    }
    return lambda;
}

StageOperators stage_operators(const Mat& a, double dt) {
    const int n = static_cast<int>(a.rows());
    StageOperators ops;
    ops.decay = expm(a * dt);
    Eigen::PartialPivLU<Mat> lu(a);
    const Mat ident = Mat::Identity(n, n);
    ops.integral = lu.solve(ops.decay - ident);
    ops.weighted = lu.solve(ops.integral - dt * ident);

    // A near singularity would poison the solves; verify and fall back to the
    // augmented block form which needs no inverse.
    const double residual = (a * ops.integral - (ops.decay - ident)).norm();
    if (!ops.integral.allFinite() || residual > 1e-6 * std::max(1.0, ops.decay.norm())) {
        Mat aug = Mat::Zero(3 * n, 3 * n);
        aug.topLeftCorner(n, n) = a;
        aug.block(n, 0, n, n) = ident;
        aug.block(2 * n, n, n, n) = ident;
        const Mat e = expm(aug * dt);
        ops.decay = e.topLeftCorner(n, n);
        ops.integral = e.block(n, 0, n, n);
        ops.weighted = e.block(2 * n, 0, n, n);
    }
    return ops;
}

}  // namespace dcpl
