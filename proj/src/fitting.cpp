#include "cvnn/fitting.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cvnn/rng.hpp"
#include "cvnn/wirtinger.hpp"

namespace cvnn {

CompactBox FitConfig::box_for(std::size_t n) const {
    if (!box) return CompactBox::square(n, -1.0, 1.0);
    if (box->dim() != n) throw DimensionError(fmt::format("fit box has dimension {}, expected {}", box->dim(), n));
    return *box;
}

void FitConfig::validate() const {
    if (num_features < 1) throw InvalidArgument("num_features must be at least 1");
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw InvalidArgument(fmt::format("ridge must be >= 0, got {}", ridge));
    if (!(weight_scale > 0.0) || !std::isfinite(weight_scale))
        throw InvalidArgument(fmt::format("weight_scale must be positive, got {}", weight_scale));
}

std::vector<CVec> solve_complex_lstsq(const std::vector<CVec>& a, const std::vector<CVec>& b, double ridge) {
    if (a.empty()) throw InvalidArgument("least squares needs at least one equation");
    if (a.size() != b.size()) throw DimensionError("equation and right-hand side counts differ");
    const std::size_t rows = a.size(), k = a.front().size(), m = b.front().size();
    const bool reg = ridge > 0.0;
    const Eigen::Index rr = static_cast<Eigen::Index>(2 * rows + (reg ? 2 * k : 0));
    Eigen::MatrixXd ar = Eigen::MatrixXd::Zero(rr, 2 * k);
    Eigen::MatrixXd br = Eigen::MatrixXd::Zero(rr, m);
    for (std::size_t p = 0; p < rows; ++p) {
        if (a[p].size() != k || b[p].size() != m) throw DimensionError("ragged least-squares system");
        for (std::size_t j = 0; j < k; ++j) {
            const Cplx v = a[p][j];
            ar(2 * p, j) = v.real();
            ar(2 * p, k + j) = -v.imag();
            ar(2 * p + 1, j) = v.imag();
            ar(2 * p + 1, k + j) = v.real();
        }
        for (std::size_t c = 0; c < m; ++c) {
            br(2 * p, c) = b[p][c].real();
            br(2 * p + 1, c) = b[p][c].imag();
        }
    }
    if (reg) {
        const double s = std::sqrt(ridge);
        for (std::size_t j = 0; j < 2 * k; ++j) ar(2 * rows + j, j) = s;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ar);
    if (qr.rank() < static_cast<Eigen::Index>(2 * k))
        throw SingularError(fmt::format("least-squares system has rank {} < {}; use ridge > 0", qr.rank(), 2 * k));
    const Eigen::MatrixXd x = qr.solve(br);
    std::vector<CVec> out(k, CVec(m));
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t c = 0; c < m; ++c) out[j][c] = {x(j, c), x(k + j, c)};
    return out;
}

double grid_sup_error(const VecFn& f, const VecFn& g, const std::vector<CVec>& points) {
    double worst = 0.0;
    for (const auto& z : points) {
        const CVec a = f(z), b = g(z);
        if (a.size() != b.size()) throw DimensionError("compared maps have different output dimensions");
        CVec d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
        const double e = norm2(d);
        if (!std::isfinite(e)) throw EvaluationError("non-finite value while measuring the error");
        worst = std::max(worst, e);
    }
    return worst;
}

namespace {

std::vector<CVec> targets_on(const VecFn& target, const std::vector<CVec>& pts, std::size_t m) {
    std::vector<CVec> y;
    y.reserve(pts.size());
    for (const auto& z : pts) {
        CVec v = target(z);
        if (v.size() != m) throw DimensionError(fmt::format("target yields {} outputs, expected {}", v.size(), m));
        if (!all_finite(v)) throw EvaluationError("target is non-finite on the fit grid");
        y.push_back(std::move(v));
    }
    return y;
}

ComplexAffineMap random_layer(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
    std::vector<Cplx> a;
    CVec b;
    // Row by row so that a wider layer extends a narrower one with the same seed.
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) a.push_back(rng.cnormal(scale));
        b.push_back(rng.cnormal(scale));
    }
    return ComplexAffineMap(rows, cols, std::move(a), std::move(b));
}

FitResult fit_last_layer(const VecFn& target, const Activation& act, std::vector<ComplexAffineMap> hidden,
                         std::size_t m, const FitConfig& cfg, const std::vector<CVec>& pts) {
    const std::vector<CVec> y = targets_on(target, pts, m);
    std::vector<CVec> feats;
    feats.reserve(pts.size());
    for (const auto& z : pts) {
        CVec x(z.begin(), z.end());
        for (const auto& map : hidden) {
            x = map(x);
            for (Cplx& v : x) v = act(v);
        }
        if (!all_finite(x)) throw EvaluationError("activation is non-finite on the fit grid");
        x.push_back(1.0);
        feats.push_back(std::move(x));
    }
    const std::vector<CVec> w = solve_complex_lstsq(feats, y, cfg.ridge);
    const std::size_t k = w.size() - 1;
    std::vector<Cplx> out(m * k);
    CVec bias(m);
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t j = 0; j < k; ++j) out[c * k + j] = w[j][c];
        bias[c] = w[k][c];
    }
    hidden.emplace_back(m, k, std::move(out), std::move(bias));
    Cvnn net(std::move(hidden), act);
    const double err = grid_sup_error(target, [&](std::span<const Cplx> z) { return net(z); }, pts);
    return {std::move(net), err, {}};
}

}  // namespace

FitResult fit_shallow(const VecFn& target, const Activation& act, std::size_t n, std::size_t m, const FitConfig& cfg) {
    return fit_deep(target, act, n, m, {cfg.num_features}, cfg);
}

FitResult fit_deep(const VecFn& target, const Activation& act, std::size_t n, std::size_t m,
                   const std::vector<std::size_t>& widths, const FitConfig& cfg) {
    cfg.validate();
    if (n == 0 || m == 0) throw InvalidArgument("input and output dimensions must be positive");
    if (widths.empty()) throw InvalidArgument("need at least one hidden layer");
    Rng rng(cfg.seed);
    std::vector<ComplexAffineMap> hidden;
    std::size_t prev = n;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (widths[i] == 0) throw InvalidArgument("hidden widths must be positive");
        const double scale = i == 0 ? cfg.weight_scale : cfg.weight_scale / std::sqrt(static_cast<double>(prev));
        hidden.push_back(random_layer(rng, widths[i], prev, scale));
        prev = widths[i];
    }
    const auto pts = sample_box(cfg.box_for(n), cfg.grid, cfg.seed);
    FitResult r = fit_last_layer(target, act, std::move(hidden), m, cfg, pts);
    if (act.poly_flag().kind == Polyharmonicity::Polyharmonic)
        r.warnings.push_back("activation is polyharmonic; shallow networks of it have an approximation floor");
    return r;
}

PolyFit fit_poly(const VecFn& target, std::size_t n, std::size_t m, unsigned degree, const CompactBox& box,
                 const GridSpec& grid) {
    if (box.dim() != n) throw DimensionError(fmt::format("fit box has dimension {}, expected {}", box.dim(), n));
    const auto basis = monomial_basis(n, degree);
    const auto pts = sample_box(box, grid);
    if (pts.size() < basis.size())
        throw InvalidArgument(fmt::format("grid has {} points but the degree-{} basis has {} monomials", pts.size(),
                                          degree, basis.size()));
    const std::vector<CVec> y = targets_on(target, pts, m);
    std::vector<CVec> rows;
    for (const auto& z : pts) {
        CVec row;
        for (const auto& e : basis) row.push_back(PolyZZbar(n, {{1.0, e}})(z));
        rows.push_back(std::move(row));
    }
    const std::vector<CVec> c = solve_complex_lstsq(rows, y, 0.0);
    std::vector<PolyZZbar> comps;
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<PolyTerm> terms;
        for (std::size_t k = 0; k < basis.size(); ++k) terms.push_back({c[k][j], basis[k]});
        comps.emplace_back(n, std::move(terms));
    }
    auto approx = [&](std::span<const Cplx> z) {
        CVec v;
        for (const auto& p : comps) v.push_back(p(z));
        return v;
    };
    const double err = grid_sup_error(target, approx, pts);
    return {std::move(comps), err};
}

}  // namespace cvnn
