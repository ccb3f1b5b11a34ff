#ifndef ISAC_COMMON_HPP
#define ISAC_COMMON_HPP

#include <Eigen/Dense>
#include <complex>
#include <random>

namespace isac {

using Cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;
using Rng  = std::mt19937_64;

/// Circularly symmetric complex Gaussian sample with total variance `var`
/// (real and imaginary parts each carry var/2).
inline Cplx cgauss(Rng& rng, double var = 1.0) {
    std::normal_distribution<double> n(0.0, std::sqrt(var * 0.5));
    return {n(rng), n(rng)};
}

/// vec() of a matrix, column-major (matches the usual math convention).
inline VecC vec(const MatC& m) {
    return Eigen::Map<const VecC>(m.data(), m.size());
}

inline MatC unvec(const VecC& v, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const MatC>(v.data(), rows, cols);
}

/// Real embedding [Re; Im] of a complex vector.
inline VecR to_real(const VecC& v) {
    VecR out(2 * v.size());
    out.head(v.size()) = v.real();
    out.tail(v.size()) = v.imag();
    return out;
}

inline VecC to_complex(const VecR& v) {
    const Eigen::Index n = v.size() / 2;
    VecC out(n);
    out.real() = v.head(n);
    out.imag() = v.tail(n);
    return out;
}

/// Dense Kronecker product. Only used on small matrices (tiny-instance
/// detectors and test oracles); the main paths act through matrix forms.
inline MatC kron(const MatC& a, const MatC& b) {
    MatC out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

} // namespace isac

#endif
