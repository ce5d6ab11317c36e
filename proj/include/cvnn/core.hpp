#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "cvnn/activation.hpp"
#include "cvnn/error.hpp"

namespace cvnn {

using CVec = std::vector<Cplx>;

// Dense complex affine map z -> A z + b, row-major storage.
class ComplexAffineMap {
public:
    ComplexAffineMap(std::size_t rows, std::size_t cols, std::vector<Cplx> matrix, CVec bias);

    static ComplexAffineMap identity(std::size_t n);
    static ComplexAffineMap zero(std::size_t rows, std::size_t cols);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    Cplx at(std::size_t r, std::size_t c) const { return a_[r * cols_ + c]; }
    const std::vector<Cplx>& matrix() const { return a_; }
    const CVec& bias() const { return b_; }

    CVec operator()(std::span<const Cplx> z) const;

    // Largest |entry| of the matrix part.
    double max_abs_coeff() const;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<Cplx> a_;
    CVec b_;
};

CVec eval_affine(const ComplexAffineMap& map, std::span<const Cplx> z);

// Returns a o b.
ComplexAffineMap fuse_affine(const ComplexAffineMap& a, const ComplexAffineMap& b);

// Strict network V_L o act o ... o act o V_1.
class Cvnn {
public:
    Cvnn(std::vector<ComplexAffineMap> maps, Activation act);

    std::size_t input_dim() const { return maps_.front().cols(); }
    std::size_t output_dim() const { return maps_.back().rows(); }
    std::size_t depth() const { return maps_.size(); }
    std::size_t width() const;
    std::vector<std::size_t> hidden_widths() const;

    const std::vector<ComplexAffineMap>& maps() const { return maps_; }
    const Activation& activation() const { return act_; }

    CVec operator()(std::span<const Cplx> z) const;

    double max_abs_coeff() const;

private:
    std::vector<ComplexAffineMap> maps_;
    Activation act_;
};

CVec eval_cvnn(const Cvnn& net, std::span<const Cplx> z);
std::size_t width_of(const Cvnn& net);
std::size_t depth_of(const Cvnn& net);

// Pads every hidden layer with zero neurons up to `width`.
Cvnn pad_to_width(const Cvnn& net, std::size_t width);

// Unfused alternating sequence; consecutive affine steps are allowed.
struct ActivationLayer {
    std::size_t width;
};

class Pipeline {
public:
    using Step = std::variant<ComplexAffineMap, ActivationLayer>;

    explicit Pipeline(Activation act) : act_(std::move(act)) {}

    void push(ComplexAffineMap map);
    void push_activation(std::size_t width);
    void append(const Cvnn& net);

    const std::vector<Step>& steps() const { return steps_; }
    const Activation& activation() const { return act_; }

    CVec operator()(std::span<const Cplx> z) const;

    // Collapses consecutive affine steps into single maps.
    Cvnn fuse() const;

private:
    Activation act_;
    std::vector<Step> steps_;
};

struct Interval {
    double lo;
    double hi;
};

class CompactBox {
public:
    CompactBox(std::vector<Interval> re, std::vector<Interval> im);
    // [lo,hi] + i[lo,hi] in every coordinate.
    static CompactBox square(std::size_t n, double lo, double hi);

    std::size_t dim() const { return re_.size(); }
    const std::vector<Interval>& re() const { return re_; }
    const std::vector<Interval>& im() const { return im_; }
    double volume() const;  // Lebesgue measure in R^{2n}

private:
    std::vector<Interval> re_;
    std::vector<Interval> im_;
};

enum class Sampling { UniformLattice, SeededRandom };

struct GridSpec {
    GridSpec(std::size_t points_per_axis, Sampling sampling = Sampling::UniformLattice);
    std::size_t points_per_axis;
    Sampling sampling;

    // The same box sampled at twice the resolution per axis.
    GridSpec refined() const { return GridSpec(2 * points_per_axis - 1, sampling); }
};

// Lattice mode enumerates points_per_axis^{2n} points with the first real axis
// varying slowest; random mode draws the same count uniformly.
std::vector<CVec> sample_box(const CompactBox& box, const GridSpec& spec, std::uint64_t seed = 0);

bool all_finite(std::span<const Cplx> v);
double norm2(std::span<const Cplx> v);

}  // namespace cvnn
