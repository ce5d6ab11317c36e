#include "cvnn/core.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "cvnn/rng.hpp"

namespace cvnn {

bool all_finite(std::span<const Cplx> v) {
    return std::all_of(v.begin(), v.end(), [](Cplx c) {
        return std::isfinite(c.real()) && std::isfinite(c.imag());
    });
}

double norm2(std::span<const Cplx> v) {
    double s = 0.0;
    for (Cplx c : v) s += std::norm(c);
    return std::sqrt(s);
}

ComplexAffineMap::ComplexAffineMap(std::size_t rows, std::size_t cols, std::vector<Cplx> matrix,
                                   CVec bias)
    : rows_(rows), cols_(cols), a_(std::move(matrix)), b_(std::move(bias)) {
    if (a_.size() != rows_ * cols_)
        throw DimensionError(fmt::format("matrix has {} entries, expected {}x{}", a_.size(), rows_, cols_));
    if (b_.size() != rows_)
        throw DimensionError(fmt::format("bias length {} differs from row count {}", b_.size(), rows_));
    if (!all_finite(a_) || !all_finite(b_)) throw InvalidArgument("affine map has non-finite entries");
}

ComplexAffineMap ComplexAffineMap::identity(std::size_t n) {
    std::vector<Cplx> a(n * n);
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] = 1.0;
    return {n, n, std::move(a), CVec(n)};
}

ComplexAffineMap ComplexAffineMap::zero(std::size_t rows, std::size_t cols) {
    return {rows, cols, std::vector<Cplx>(rows * cols), CVec(rows)};
}

CVec ComplexAffineMap::operator()(std::span<const Cplx> z) const {
    if (z.size() != cols_)
        throw DimensionError(fmt::format("input length {} but map expects {}", z.size(), cols_));
    CVec out(b_);
    for (std::size_t r = 0; r < rows_; ++r) {
        const Cplx* row = &a_[r * cols_];
        Cplx acc = 0.0;
        for (std::size_t c = 0; c < cols_; ++c) acc += row[c] * z[c];
        out[r] += acc;
    }
    return out;
}

double ComplexAffineMap::max_abs_coeff() const {
    double m = 0.0;
    for (Cplx c : a_) m = std::max(m, std::abs(c));
    return m;
}

CVec eval_affine(const ComplexAffineMap& map, std::span<const Cplx> z) { return map(z); }

ComplexAffineMap fuse_affine(const ComplexAffineMap& a, const ComplexAffineMap& b) {
    if (a.cols() != b.rows())
        throw DimensionError(fmt::format("cannot compose {}x{} after {}x{}", a.rows(), a.cols(), b.rows(), b.cols()));
    const std::size_t rows = a.rows(), mid = a.cols(), cols = b.cols();
    std::vector<Cplx> m(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < mid; ++k) {
            const Cplx ark = a.at(r, k);
            if (ark == Cplx{}) continue;
            for (std::size_t c = 0; c < cols; ++c) m[r * cols + c] += ark * b.at(k, c);
        }
    CVec bias = a(b.bias());
    return {rows, cols, std::move(m), std::move(bias)};
}

Cvnn::Cvnn(std::vector<ComplexAffineMap> maps, Activation act)
    : maps_(std::move(maps)), act_(std::move(act)) {
    if (maps_.size() < 2) throw InvalidArgument("a network needs at least two affine maps");
    for (std::size_t l = 0; l + 1 < maps_.size(); ++l)
        if (maps_[l].rows() != maps_[l + 1].cols())
            throw DimensionError(fmt::format("map {} outputs {} but map {} expects {}", l, maps_[l].rows(), l + 1,
                                             maps_[l + 1].cols()));
}

std::size_t Cvnn::width() const {
    std::size_t w = maps_.front().cols();
    for (const auto& m : maps_) w = std::max(w, m.rows());
    return w;
}

std::vector<std::size_t> Cvnn::hidden_widths() const {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l + 1 < maps_.size(); ++l) out.push_back(maps_[l].rows());
    return out;
}

CVec Cvnn::operator()(std::span<const Cplx> z) const {
    CVec x = maps_.front()(z);
    for (std::size_t l = 1; l < maps_.size(); ++l) {
        for (Cplx& v : x) v = act_(v);
        x = maps_[l](x);
    }
    if (!all_finite(x)) throw EvaluationError("network produced a non-finite value");
    return x;
}

double Cvnn::max_abs_coeff() const {
    double m = 0.0;
    for (const auto& map : maps_) m = std::max(m, map.max_abs_coeff());
    return m;
}

CVec eval_cvnn(const Cvnn& net, std::span<const Cplx> z) { return net(z); }
std::size_t width_of(const Cvnn& net) { return net.width(); }
std::size_t depth_of(const Cvnn& net) { return net.depth(); }

Cvnn pad_to_width(const Cvnn& net, std::size_t width) {
    if (width < net.width()) throw InvalidArgument("padding cannot shrink a network");
    std::vector<ComplexAffineMap> maps;
    const auto& src = net.maps();
    for (std::size_t l = 0; l < src.size(); ++l) {
        const auto& m = src[l];
        const std::size_t rows = (l + 1 < src.size()) ? width : m.rows();
        const std::size_t cols = (l > 0) ? width : m.cols();
        std::vector<Cplx> a(rows * cols);
        CVec b(rows);
        for (std::size_t r = 0; r < m.rows(); ++r) {
            for (std::size_t c = 0; c < m.cols(); ++c) a[r * cols + c] = m.at(r, c);
            b[r] = m.bias()[r];
        }
        maps.emplace_back(rows, cols, std::move(a), std::move(b));
    }
    return {std::move(maps), net.activation()};
}

void Pipeline::push(ComplexAffineMap map) {
    if (!steps_.empty()) {
        std::size_t prev = 0;
        if (auto* m = std::get_if<ComplexAffineMap>(&steps_.back())) prev = m->rows();
        else prev = std::get<ActivationLayer>(steps_.back()).width;
        if (prev != map.cols()) throw DimensionError("pipeline step dimensions do not chain");
    }
    steps_.emplace_back(std::move(map));
}

void Pipeline::push_activation(std::size_t width) {
    if (steps_.empty() || !std::holds_alternative<ComplexAffineMap>(steps_.back()))
        throw InvalidArgument("an activation layer must follow an affine step");
    if (std::get<ComplexAffineMap>(steps_.back()).rows() != width)
        throw DimensionError("activation width does not match the preceding map");
    steps_.emplace_back(ActivationLayer{width});
}

void Pipeline::append(const Cvnn& net) {
    const auto& maps = net.maps();
    for (std::size_t l = 0; l < maps.size(); ++l) {
        push(maps[l]);
        if (l + 1 < maps.size()) push_activation(maps[l].rows());
    }
}

CVec Pipeline::operator()(std::span<const Cplx> z) const {
    CVec x(z.begin(), z.end());
    for (const auto& s : steps_) {
        if (auto* m = std::get_if<ComplexAffineMap>(&s)) x = (*m)(x);
        else
            for (Cplx& v : x) v = act_(v);
    }
    if (!all_finite(x)) throw EvaluationError("pipeline produced a non-finite value");
    return x;
}

Cvnn Pipeline::fuse() const {
    std::vector<ComplexAffineMap> maps;
    bool pending = false;
    for (const auto& s : steps_) {
        if (auto* m = std::get_if<ComplexAffineMap>(&s)) {
            if (pending) maps.back() = fuse_affine(*m, maps.back());
            else maps.push_back(*m);
            pending = true;
        } else {
            pending = false;
        }
    }
    if (steps_.empty() || !std::holds_alternative<ComplexAffineMap>(steps_.back()))
        throw InvalidArgument("pipeline must end with an affine step");
    return {std::move(maps), act_};
}

CompactBox::CompactBox(std::vector<Interval> re, std::vector<Interval> im)
    : re_(std::move(re)), im_(std::move(im)) {
    if (re_.size() != im_.size()) throw DimensionError("box needs matching real and imaginary intervals");
    if (re_.empty()) throw InvalidArgument("box must have at least one coordinate");
    auto bad = [](const Interval& i) { return !(i.lo <= i.hi) || !std::isfinite(i.lo) || !std::isfinite(i.hi); };
    if (std::any_of(re_.begin(), re_.end(), bad) || std::any_of(im_.begin(), im_.end(), bad))
        throw InvalidArgument("box interval with lo > hi");
}

CompactBox CompactBox::square(std::size_t n, double lo, double hi) {
    return {std::vector<Interval>(n, {lo, hi}), std::vector<Interval>(n, {lo, hi})};
}

double CompactBox::volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < dim(); ++i) v *= (re_[i].hi - re_[i].lo) * (im_[i].hi - im_[i].lo);
    return v;
}

GridSpec::GridSpec(std::size_t ppa, Sampling s) : points_per_axis(ppa), sampling(s) {
    if (ppa < 2) throw InvalidArgument("grid needs at least 2 points per axis");
}

std::vector<CVec> sample_box(const CompactBox& box, const GridSpec& spec, std::uint64_t seed) {
    const std::size_t n = box.dim();
    const std::size_t axes = 2 * n;
    const std::size_t p = spec.points_per_axis;
    std::size_t total = 1;
    for (std::size_t a = 0; a < axes; ++a) total *= p;

    auto axis = [&](std::size_t a) -> const Interval& { return a % 2 == 0 ? box.re()[a / 2] : box.im()[a / 2]; };

    std::vector<CVec> pts;
    pts.reserve(total);
    if (spec.sampling == Sampling::UniformLattice) {
        std::vector<double> coord(axes);
        for (std::size_t idx = 0; idx < total; ++idx) {
            std::size_t rem = idx;
            for (std::size_t a = axes; a-- > 0;) {
                const std::size_t k = rem % p;
                rem /= p;
                const Interval& iv = axis(a);
                coord[a] = (k + 1 == p) ? iv.hi : iv.lo + (iv.hi - iv.lo) * static_cast<double>(k) / static_cast<double>(p - 1);
            }
            CVec z(n);
            for (std::size_t i = 0; i < n; ++i) z[i] = {coord[2 * i], coord[2 * i + 1]};
            pts.push_back(std::move(z));
        }
    } else {
        Rng rng(seed);
        for (std::size_t idx = 0; idx < total; ++idx) {
            CVec z(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double re = rng.uniform(box.re()[i].lo, box.re()[i].hi);
                const double im = rng.uniform(box.im()[i].lo, box.im()[i].hi);
                z[i] = {re, im};
            }
            pts.push_back(std::move(z));
        }
    }
    return pts;
}

}  // namespace cvnn
