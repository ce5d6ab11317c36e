#include "cvnn/blocks.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

namespace cvnn {

namespace {

constexpr Cplx I{0.0, 1.0};

void check_h(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("block step h must be positive");
}

Cplx value_at(const Activation& act, Cplx z) {
    const Cplx v = act(z);
    if (!all_finite(std::span<const Cplx>(&v, 1))) throw EvaluationError("activation not finite at block centre");
    return v;
}

ShallowBlock first_order_block(const Activation& act, Cplx z0, double h, Cplx deriv, BlockKind kind) {
    const Cplx rho0 = value_at(act, z0);
    const Cplx s = 1.0 / (h * deriv);
    ShallowBlock b{ComplexAffineMap(1, 1, {h}, {z0}), ComplexAffineMap(1, 1, {s}, {-rho0 * s}), kind, z0, h, act};
    b.coeff_scale = std::abs(s);
    return b;
}

// Sum of a square block over linear combinations u_j = alpha_j z + beta_j w
// weighted by gamma_j.
struct Combo {
    Cplx alpha, beta, gamma;
};

ShallowBlock combine_squares(const ShallowBlock& sq, const std::vector<Combo>& combos, BlockKind kind) {
    const std::size_t w = sq.width();
    const std::size_t width = w * combos.size();
    std::vector<Cplx> pa(width * 2), qa(width);
    CVec pb(width), qb(1);
    for (std::size_t j = 0; j < combos.size(); ++j) {
        for (std::size_t r = 0; r < w; ++r) {
            const std::size_t row = j * w + r;
            pa[row * 2 + 0] = sq.pre.at(r, 0) * combos[j].alpha;
            pa[row * 2 + 1] = sq.pre.at(r, 0) * combos[j].beta;
            pb[row] = sq.pre.bias()[r];
            qa[row] = combos[j].gamma * sq.post.at(0, r);
        }
        qb[0] += combos[j].gamma * sq.post.bias()[0];
    }
    ShallowBlock b{ComplexAffineMap(width, 2, std::move(pa), std::move(pb)), ComplexAffineMap(1, width, std::move(qa), std::move(qb)),
                   kind, sq.z0, sq.h, sq.act};
    double gmax = 0.0;
    for (const auto& c : combos) gmax = std::max(gmax, std::abs(c.gamma));
    b.coeff_scale = gmax * sq.coeff_scale;
    b.warnings = sq.warnings;
    return b;
}

}  // namespace

std::string to_string(BlockKind k) {
    switch (k) {
        case BlockKind::Identity: return "Identity";
        case BlockKind::Conjugation: return "Conjugation";
        case BlockKind::PairIdConj: return "PairIdConj";
        case BlockKind::SquareZZbar: return "SquareZZbar";
        case BlockKind::SquareZ2: return "SquareZ2";
        case BlockKind::SquareZbar2: return "SquareZbar2";
        case BlockKind::Mul1: return "Mul1";
        case BlockKind::Mul2: return "Mul2";
        case BlockKind::Mul3: return "Mul3";
        case BlockKind::IdConjPair: return "IdConjPair";
    }
    return "?";
}

std::string to_string(MulKind k) {
    switch (k) {
        case MulKind::Mul1: return "Mul1";
        case MulKind::Mul2: return "Mul2";
        case MulKind::Mul3: return "Mul3";
    }
    return "?";
}

BlockKind block_kind_from_string(const std::string& s) {
    for (auto k : {BlockKind::Identity, BlockKind::Conjugation, BlockKind::PairIdConj, BlockKind::SquareZZbar,
                   BlockKind::SquareZ2, BlockKind::SquareZbar2, BlockKind::Mul1, BlockKind::Mul2, BlockKind::Mul3,
                   BlockKind::IdConjPair})
        if (to_string(k) == s) return k;
    throw InvalidArgument(fmt::format("unknown block kind '{}'", s));
}

MulKind mul_kind_from_string(const std::string& s) {
    for (auto k : {MulKind::Mul1, MulKind::Mul2, MulKind::Mul3})
        if (to_string(k) == s) return k;
    throw InvalidArgument(fmt::format("unknown mul kind '{}'", s));
}

Cplx apply_mul(MulKind kind, Cplx a, Cplx b) {
    switch (kind) {
        case MulKind::Mul1: return a * b;
        case MulKind::Mul2: return a * std::conj(b);
        case MulKind::Mul3: return std::conj(a * b);
    }
    return {};
}

MulKind mul_kind_for(SecondWhich which) {
    switch (which) {
        case SecondWhich::ZZbar: return MulKind::Mul2;
        case SecondWhich::Z2: return MulKind::Mul1;
        case SecondWhich::Zbar2: return MulKind::Mul3;
    }
    return MulKind::Mul1;
}

CVec ShallowBlock::operator()(std::span<const Cplx> z) const {
    CVec x = pre(z);
    for (Cplx& v : x) v = act(v);
    return post(x);
}

Cvnn ShallowBlock::as_cvnn() const { return Cvnn({pre, post}, act); }

ShallowBlock identity_block(const Activation& act, Cplx z0, double h, const ToleranceProfile& prof) {
    check_h(h);
    const auto f = first_derivatives(act, z0, prof);
    if (!(std::abs(f.d) > prof.zero_tol) || std::abs(f.dbar) > prof.zero_tol)
        throw PreconditionError(fmt::format("identity block needs d != 0 = dbar at z0; got |d|={:.3g}, |dbar|={:.3g}",
                                            std::abs(f.d), std::abs(f.dbar)));
    return first_order_block(act, z0, h, f.d, BlockKind::Identity);
}

ShallowBlock conj_block(const Activation& act, Cplx z0, double h, const ToleranceProfile& prof) {
    check_h(h);
    const auto f = first_derivatives(act, z0, prof);
    if (!(std::abs(f.dbar) > prof.zero_tol) || std::abs(f.d) > prof.zero_tol)
        throw PreconditionError(fmt::format("conjugation block needs d = 0 != dbar at z0; got |d|={:.3g}, |dbar|={:.3g}",
                                            std::abs(f.d), std::abs(f.dbar)));
    return first_order_block(act, z0, h, f.dbar, BlockKind::Conjugation);
}

ShallowBlock pair_block(const Activation& act, Cplx z0, double h, const ToleranceProfile& prof) {
    check_h(h);
    const auto f = first_derivatives(act, z0, prof);
    if (!(std::abs(f.d) > prof.zero_tol) || !(std::abs(f.dbar) > prof.zero_tol))
        throw PreconditionError(fmt::format("pair block needs both derivatives nonzero; got |d|={:.3g}, |dbar|={:.3g}",
                                            std::abs(f.d), std::abs(f.dbar)));
    const Cplx rho0 = value_at(act, z0);
    const Cplx s1 = 1.0 / (2.0 * I * h * f.d);
    const Cplx s2 = 1.0 / (-2.0 * I * h * f.dbar);
    ComplexAffineMap pre(2, 1, {h, I * h}, {z0, z0});
    ComplexAffineMap post(2, 2, {I * s1, s1, -I * s2, s2}, {-(1.0 + I) * rho0 * s1, -(1.0 - I) * rho0 * s2});
    ShallowBlock b{std::move(pre), std::move(post), BlockKind::PairIdConj, z0, h, act};
    b.coeff_scale = std::max(std::abs(s1), std::abs(s2));
    b.route = "pair";
    return b;
}

ShallowBlock id_conj_pair_block(const Activation& act, const ToleranceProfile& prof, double h, double target_tol) {
    check_h(h);
    std::optional<Cplx> pair, id, cj;
    if (auto p = best_pair_point(act, prof)) {
        pair = p->z0;
    } else {
        if (auto q = best_identity_point(act, prof)) id = q->z0;
        if (auto q = best_conj_point(act, prof)) cj = q->z0;
    }
    return id_conj_pair_block(act, pair, id, cj, h, prof, target_tol);
}

ShallowBlock id_conj_pair_block(const Activation& act, std::optional<Cplx> pair, std::optional<Cplx> id,
                                std::optional<Cplx> cj, double h, const ToleranceProfile& prof, double target_tol) {
    check_h(h);
    if (pair) {
        ShallowBlock b = pair_block(act, *pair, h, prof);
        b.kind = BlockKind::IdConjPair;
        return b;
    }
    if (!id || !cj)
        throw InconclusiveError("no point pair realizes (z, conj z): need both derivatives nonzero somewhere, or an "
                                "identity point and a conjugation point");
    const auto f1 = first_derivatives(act, *id, prof);
    const auto f2 = first_derivatives(act, *cj, prof);
    const Cplx r1 = value_at(act, *id), r2 = value_at(act, *cj);
    const Cplx s1 = 1.0 / (h * f1.d), s2 = 1.0 / (h * f2.dbar);
    ComplexAffineMap pre(2, 1, {h, h}, {*id, *cj});
    ComplexAffineMap post(2, 2, {s1, 0.0, 0.0, s2}, {-r1 * s1, -r2 * s2});
    ShallowBlock b{std::move(pre), std::move(post), BlockKind::IdConjPair, *id, h, act};
    b.coeff_scale = std::max(std::abs(s1), std::abs(s2));
    b.route = "two_point";
    const double leak = std::max(std::abs(f1.dbar / f1.d), std::abs(f2.d / f2.dbar));
    if (leak > target_tol)
        b.warnings.push_back(fmt::format("leftover derivative ratio {:.3g} exceeds target tolerance {:.3g}", leak, target_tol));
    return b;
}

SquareResult square_block(const Activation& act, Cplx z0, double h, const ToleranceProfile& prof) {
    check_h(h);
    const auto s = second_derivatives(act, z0, prof);
    const double tol = prof.zero_tol;
    const Cplx rho0 = value_at(act, z0);
    const Cplx sqrt_i = std::polar(1.0, std::numbers::pi / 4.0);
    std::vector<std::string> warnings;
    if (std::abs(s.ddbar) > tol) {
        const Cplx c = 1.0 / (4.0 * h * h * s.ddbar);
        ComplexAffineMap pre(4, 1, {h, -h, I * h, -I * h}, {z0, z0, z0, z0});
        ComplexAffineMap post(1, 4, {c, c, c, c}, {-4.0 * rho0 * c});
        ShallowBlock b{std::move(pre), std::move(post), BlockKind::SquareZZbar, z0, h, act};
        b.coeff_scale = std::abs(c);
        return {std::move(b), SecondWhich::ZZbar};
    }
    if (std::abs(s.d2) > tol) {
        const Cplx c = 1.0 / (2.0 * h * h * s.d2);
        ComplexAffineMap pre(4, 1, {h, -h, sqrt_i * h, -sqrt_i * h}, {z0, z0, z0, z0});
        ComplexAffineMap post(1, 4, {c, c, -I * c, -I * c}, {2.0 * (-1.0 + I) * rho0 * c});
        ShallowBlock b{std::move(pre), std::move(post), BlockKind::SquareZ2, z0, h, act};
        b.coeff_scale = std::abs(c);
        if (s.ddbar != Cplx{}) b.warnings.push_back(fmt::format("residual ddbar {:.3g} treated as zero", std::abs(s.ddbar)));
        return {std::move(b), SecondWhich::Z2};
    }
    if (std::abs(s.dbar2) > tol) {
        const Cplx c = 1.0 / (h * h * s.dbar2);
        // Two live neurons plus two zero-weight neurons to keep width 4.
        ComplexAffineMap pre(4, 1, {h, -h, 0.0, 0.0}, {z0, z0, z0, z0});
        ComplexAffineMap post(1, 4, {c, c, 0.0, 0.0}, {-2.0 * rho0 * c});
        ShallowBlock b{std::move(pre), std::move(post), BlockKind::SquareZbar2, z0, h, act};
        b.coeff_scale = std::abs(c);
        if (s.ddbar != Cplx{} || s.d2 != Cplx{})
            b.warnings.push_back(fmt::format("residual d2/ddbar {:.3g} treated as zero", std::abs(s.d2) + std::abs(s.ddbar)));
        return {std::move(b), SecondWhich::Zbar2};
    }
    throw PreconditionError("all second Wirtinger derivatives vanish at z0");
}

MulResult mul_block(const Activation& act, Cplx z0, double h, const ToleranceProfile& prof) {
    auto [sq, which] = square_block(act, z0, h, prof);
    switch (which) {
        case SecondWhich::ZZbar:
            return {combine_squares(sq, {{1.0, 1.0, 0.25 + 0.25 * I}, {1.0, -1.0, -0.25 + 0.25 * I}, {1.0, -I, -0.5 * I}},
                                    BlockKind::Mul2),
                    MulKind::Mul2};
        case SecondWhich::Z2:
            return {combine_squares(sq, {{1.0, 1.0, 0.25}, {1.0, -1.0, -0.25}}, BlockKind::Mul1), MulKind::Mul1};
        case SecondWhich::Zbar2:
            return {combine_squares(sq, {{1.0, 1.0, 0.25}, {1.0, -1.0, -0.25}}, BlockKind::Mul3), MulKind::Mul3};
    }
    throw PreconditionError("unreachable square kind");
}

VecFn block_target(BlockKind kind) {
    switch (kind) {
        case BlockKind::Identity: return [](std::span<const Cplx> z) { return CVec{z[0]}; };
        case BlockKind::Conjugation: return [](std::span<const Cplx> z) { return CVec{std::conj(z[0])}; };
        case BlockKind::PairIdConj:
        case BlockKind::IdConjPair: return [](std::span<const Cplx> z) { return CVec{z[0], std::conj(z[0])}; };
        case BlockKind::SquareZZbar: return [](std::span<const Cplx> z) { return CVec{z[0] * std::conj(z[0])}; };
        case BlockKind::SquareZ2: return [](std::span<const Cplx> z) { return CVec{z[0] * z[0]}; };
        case BlockKind::SquareZbar2: return [](std::span<const Cplx> z) { return CVec{std::conj(z[0] * z[0])}; };
        case BlockKind::Mul1: return [](std::span<const Cplx> z) { return CVec{apply_mul(MulKind::Mul1, z[0], z[1])}; };
        case BlockKind::Mul2: return [](std::span<const Cplx> z) { return CVec{apply_mul(MulKind::Mul2, z[0], z[1])}; };
        case BlockKind::Mul3: return [](std::span<const Cplx> z) { return CVec{apply_mul(MulKind::Mul3, z[0], z[1])}; };
    }
    throw InvalidArgument("unknown block kind");
}

double block_error(const ShallowBlock& block, const VecFn& target, const CompactBox& box, const GridSpec& grid) {
    if (box.dim() != block.in_dim()) throw DimensionError("box dimension differs from block input dimension");
    double worst = 0.0;
    for (const auto& z : sample_box(box, grid)) {
        const CVec got = block(z);
        const CVec want = target(z);
        if (got.size() != want.size()) throw DimensionError("target output dimension differs from block");
        CVec diff(got.size());
        for (std::size_t i = 0; i < got.size(); ++i) diff[i] = got[i] - want[i];
        worst = std::max(worst, norm2(diff));
    }
    return worst;
}

std::vector<double> default_h_schedule() {
    std::vector<double> hs;
    for (double h = 0.1; h >= 1e-6; h *= 0.5) hs.push_back(h);
    return hs;
}

TunedH tune_h(const std::function<double(double)>& error_at, const std::vector<double>& schedule) {
    if (schedule.empty()) throw InvalidArgument("empty h schedule");
    TunedH t{schedule.front(), 0.0, {}};
    double best = std::numeric_limits<double>::infinity();
    for (double h : schedule) {
        double e;
        try {
            e = error_at(h);
        } catch (const EvaluationError&) {
            e = std::numeric_limits<double>::infinity();
        }
        if (!std::isfinite(e)) e = std::numeric_limits<double>::infinity();
        const bool worse = !t.errors.empty() && e > t.errors.back();
        t.errors.push_back(e);
        if (e < best) best = e, t.h = h;
        if (worse) break;
    }
    t.error = best;
    return t;
}

}  // namespace cvnn
