#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cvnn/core.hpp"
#include "cvnn/rng.hpp"

namespace cvnn::testing {

inline CVec random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
    CVec z(n);
    for (auto& v : z) v = {rng.uniform(-scale, scale), rng.uniform(-scale, scale)};
    return z;
}

inline ComplexAffineMap random_map(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    std::vector<Cplx> a(rows * cols);
    CVec b(rows);
    for (auto& v : a) v = rng.cnormal(scale);
    for (auto& v : b) v = rng.cnormal(scale);
    return {rows, cols, std::move(a), std::move(b)};
}

inline Cvnn random_net(Rng& rng, const std::vector<std::size_t>& dims, const Activation& act, double scale = 1.0) {
    std::vector<ComplexAffineMap> maps;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) maps.push_back(random_map(rng, dims[i + 1], dims[i], scale));
    return {std::move(maps), act};
}

inline double max_diff(const CVec& a, const CVec& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return a.size() == b.size() ? d : INFINITY;
}

}  // namespace cvnn::testing
