#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvnn/blocks.hpp"
#include "cvnn/core.hpp"
#include "cvnn/register.hpp"

namespace cvnn {

struct FitConfig {
    std::size_t num_features = 64;
    double weight_scale = 1.0;
    double ridge = 1e-10;
    std::optional<CompactBox> box;  // defaults to [-1,1]^2 in every coordinate
    GridSpec grid{21};
    std::uint64_t seed = 0;

    CompactBox box_for(std::size_t n) const;
    void validate() const;
};

struct FitResult {
    Cvnn net;
    double sup_error;  // max over the fit grid of the Euclidean output error
    std::vector<std::string> warnings;
};

// Rows of `a` are equations; returns x minimizing |a x - b|^2 + ridge |x|^2
// for every column of b, through the real system of twice the size.
std::vector<CVec> solve_complex_lstsq(const std::vector<CVec>& a, const std::vector<CVec>& b, double ridge);

double grid_sup_error(const VecFn& f, const VecFn& g, const std::vector<CVec>& points);

// Random Gaussian hidden layer, output layer by ridge least squares.
FitResult fit_shallow(const VecFn& target, const Activation& act, std::size_t n, std::size_t m, const FitConfig& cfg = {});

// Random hidden layers of the given widths, last layer by least squares.
FitResult fit_deep(const VecFn& target, const Activation& act, std::size_t n, std::size_t m,
                   const std::vector<std::size_t>& widths, const FitConfig& cfg = {});

struct PolyFit {
    std::vector<PolyZZbar> components;
    double sup_error;
};

PolyFit fit_poly(const VecFn& target, std::size_t n, std::size_t m, unsigned degree, const CompactBox& box,
                 const GridSpec& grid);

}  // namespace cvnn
