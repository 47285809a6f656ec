// support.hpp — shared helpers for the test suites
#pragma once

#include "kl/liouville.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace kltest {

using kl::cplx;
using kl::Mat;
using kl::SpMat;

inline double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }
inline double max_abs(const SpMat& m) { return max_abs(Mat(m)); }

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// largest elementwise difference relative to the largest entry of b
inline double rel_elementwise(const Mat& a, const Mat& b)
{
    return max_abs(Mat(a - b)) / std::max(max_abs(b), 1e-300);
}

inline Mat random_matrix(std::mt19937& rng, int d)
{
    std::normal_distribution<double> n;
    Mat m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = cplx(n(rng), n(rng));
    return m;
}

inline Mat random_density(std::mt19937& rng, int d)
{
    Mat a = random_matrix(rng, d);
    Mat r = a * a.adjoint();
    return r / r.trace().real();
}

inline Mat random_hermitian(std::mt19937& rng, int d)
{
    Mat a = random_matrix(rng, d);
    return 0.5 * (a + a.adjoint());
}

// apply a column-stacked superoperator to a matrix
inline Mat act(const SpMat& L, const Mat& rho)
{
    const int d = int(rho.rows());
    return kl::unvectorize(L * kl::vectorize(rho), d);
}

}  // namespace kltest
