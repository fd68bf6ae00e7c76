#pragma once

#include <Eigen/Dense>
#include <utility>

#include "rpra/types.hpp"

namespace rpra {

// Single-level 2-D orthonormal Haar transform. For each 2x2 block
// [[a,b],[c,d]] the four coefficients are
//   LL = (a+b+c+d)/2   HL = (a-b+c-d)/2
//   LH = (a+b-c-d)/2   HH = (a-b-c+d)/2
// an orthonormal map, so energy is conserved and the inverse is the
// transpose of the analysis map.
template <typename Scalar>
struct SubbandSetT {
    using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    M ll, lh, hl, hh;
    std::pair<Eigen::Index, Eigen::Index> source_shape{0, 0};
};

using SubbandSet = SubbandSetT<double>;

template <typename Derived>
SubbandSetT<typename Derived::Scalar> dwt2(const Eigen::MatrixBase<Derived>& grid) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index h = grid.rows(), w = grid.cols();
    if (h % 2 != 0 || w % 2 != 0)
        throw InvalidInput("dwt2: grid dimensions must be even");

    SubbandSetT<Scalar> s;
    s.source_shape = {h, w};
    s.ll.resize(h / 2, w / 2);
    s.lh.resize(h / 2, w / 2);
    s.hl.resize(h / 2, w / 2);
    s.hh.resize(h / 2, w / 2);
    const Scalar half = Scalar(1) / Scalar(2);
    for (Eigen::Index i = 0; i < h / 2; ++i) {
        for (Eigen::Index j = 0; j < w / 2; ++j) {
            const Scalar a = grid(2 * i, 2 * j);
            const Scalar b = grid(2 * i, 2 * j + 1);
            const Scalar c = grid(2 * i + 1, 2 * j);
            const Scalar d = grid(2 * i + 1, 2 * j + 1);
            s.ll(i, j) = (a + b + c + d) * half;
            s.hl(i, j) = (a - b + c - d) * half;
            s.lh(i, j) = (a + b - c - d) * half;
            s.hh(i, j) = (a - b - c + d) * half;
        }
    }
    return s;
}

template <typename Scalar>
typename SubbandSetT<Scalar>::M idwt2(const SubbandSetT<Scalar>& s) {
    const Eigen::Index hs = s.ll.rows(), ws = s.ll.cols();
    if (s.lh.rows() != hs || s.lh.cols() != ws || s.hl.rows() != hs ||
        s.hl.cols() != ws || s.hh.rows() != hs || s.hh.cols() != ws)
        throw InvalidInput("idwt2: subband shapes differ");

    typename SubbandSetT<Scalar>::M g(2 * hs, 2 * ws);
    const Scalar half = Scalar(1) / Scalar(2);
    for (Eigen::Index i = 0; i < hs; ++i) {
        for (Eigen::Index j = 0; j < ws; ++j) {
            const Scalar ll = s.ll(i, j), hl = s.hl(i, j);
            const Scalar lh = s.lh(i, j), hh = s.hh(i, j);
            g(2 * i, 2 * j) = (ll + hl + lh + hh) * half;
            g(2 * i, 2 * j + 1) = (ll - hl + lh - hh) * half;
            g(2 * i + 1, 2 * j) = (ll + hl - lh - hh) * half;
            g(2 * i + 1, 2 * j + 1) = (ll - hl - lh + hh) * half;
        }
    }
    return g;
}

template <typename Scalar>
Scalar subband_energy(const SubbandSetT<Scalar>& s) {
    return s.ll.squaredNorm() + s.lh.squaredNorm() + s.hl.squaredNorm() + s.hh.squaredNorm();
}

}  // namespace rpra
