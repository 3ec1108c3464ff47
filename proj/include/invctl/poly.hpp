#pragma once

// Real polynomial helpers. Coefficients are stored in descending powers of s,
// e.g. {1, 3, 2} is s^2 + 3s + 2.

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "errors.hpp"

namespace invctl::poly {

using Coeffs = std::vector<double>;
using Complex = std::complex<double>;

/// Strip leading (highest-power) coefficients that are exactly zero.
inline Coeffs trim(const Coeffs& p) {
    std::size_t i = 0;
    while (i + 1 < p.size() && p[i] == 0.0) ++i;
    return Coeffs(p.begin() + static_cast<std::ptrdiff_t>(i), p.end());
}

inline int degree(const Coeffs& p) {
    return static_cast<int>(trim(p).size()) - 1;
}

/// Horner evaluation at a complex point.
inline Complex eval(const Coeffs& p, Complex s) {
    Complex acc{0.0, 0.0};
    for (double c : p) acc = acc * s + c;
    return acc;
}

inline Coeffs mul(const Coeffs& a, const Coeffs& b) {
    Coeffs r(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

inline Coeffs add(const Coeffs& a, const Coeffs& b) {
    const std::size_t n = std::max(a.size(), b.size());
    Coeffs r(n, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) r[n - a.size() + i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) r[n - b.size() + i] += b[i];
    return r;
}

inline Coeffs scale(const Coeffs& a, double k) {
    Coeffs r = a;
    for (double& c : r) c *= k;
    return r;
}

/// Roots via the companion-matrix eigenvalues.
inline std::vector<Complex> roots(const Coeffs& p_in) {
    Coeffs p = trim(p_in);
    if (p.size() <= 1) return {};
    const int n = static_cast<int>(p.size()) - 1;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) companion(0, i) = -p[static_cast<std::size_t>(i) + 1] / p[0];
    companion.block(1, 0, n - 1, n - 1).setIdentity();
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion, /*computeEigenvectors=*/false);
    std::vector<Complex> r(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    return r;
}

/// Monic polynomial with the given roots; complex roots must come in
/// conjugate pairs (imaginary residue is dropped).
inline Coeffs from_roots(const std::vector<Complex>& rts) {
    std::vector<Complex> c{1.0};
    for (const Complex& r : rts) {
        std::vector<Complex> next(c.size() + 1, Complex{0.0, 0.0});
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i] += c[i];
            next[i + 1] -= c[i] * r;
        }
        c = next;
    }
    Coeffs out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
    return out;
}

} // namespace invctl::poly
