#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cvnn/verifier.hpp"
#include "support.hpp"

using namespace cvnn;
using namespace cvnn::testing;

namespace {

const Cplx I{0.0, 1.0};

VecFn scalar(Cplx (*f)(Cplx)) {
    return [f](std::span<const Cplx> z) { return CVec{f(z[0])}; };
}

const CompactBox kUnit = CompactBox::square(1, -1.0, 1.0);

}  // namespace

TEST_CASE("error measures") {
    auto id = scalar([](Cplx z) { return z; });
    auto shifted = scalar([](Cplx z) { return z + 0.1; });
    CHECK(sup_error(id, id, kUnit, GridSpec(11)) == 0.0);
    CHECK(sup_error(id, shifted, CompactBox({{3.0, 5.0}}, {{-9.0, 2.0}}), GridSpec(7)) == doctest::Approx(0.1));
    CHECK_THROWS_AS(sup_error(id, [](std::span<const Cplx>) { return CVec{0.0, 0.0}; }, kUnit, GridSpec(3)),
                    DimensionError);
}

TEST_CASE("monte carlo l1 of a ball indicator") {
    const double r = 0.1;
    auto zero = [](std::span<const Cplx>) { return CVec{0.0}; };
    auto ball = [r](std::span<const Cplx> z) {
        return CVec{std::norm(z[0]) + std::norm(z[1]) <= r * r ? 1.0 : 0.0};
    };
    const CompactBox box = CompactBox::square(2, -r, r);
    const McEstimate e = l1_error_mc(ball, zero, box, 1000000, 3);
    const double vol = std::numbers::pi * std::numbers::pi * std::pow(r, 4) / 2.0;
    CHECK(std::abs(e.value - vol) < 0.05 * vol);
    CHECK(e.std_error > 0.0);
    CHECK(e.samples == 1000000);
    const McEstimate again = l1_error_mc(ball, zero, box, 1000, 3);
    CHECK(again.value == l1_error_mc(ball, zero, box, 1000, 3).value);
}

TEST_CASE("sweeps") {
    const ToleranceProfile p;
    const GridSpec grid(21);
    const auto hs = default_h_schedule();
    SUBCASE("identity block converges") {
        const Activation card = get_activation("cardioid");
        const SweepReport rep = h_sweep([&](double h) { return identity_block(card, 1.0, h, p).as_cvnn(); },
                                        block_target(BlockKind::Identity), hs, kUnit, grid);
        REQUIRE(rep.rows.size() == hs.size());
        for (std::size_t i = 1; i < rep.rows.size(); ++i) {
            CHECK(rep.rows[i].h < rep.rows[i - 1].h);
            const double prev = rep.rows[i - 1].sup_error;
            // Strict decrease until the error is tiny or rounding takes over.
            if (prev > 1e-9 && prev > 1e3 * 1e-16 / rep.rows[i - 1].h) CHECK(rep.rows[i].sup_error < prev);
        }
        CHECK(rep.rows[rep.best()].sup_error < 1e-6);
        CHECK(rep.metadata.at("grid") == "21");
    }
    SUBCASE("quadratic square block is exact at every step") {
        const Activation rs = get_activation("re_square");
        const auto sq = square_block(rs, 0.0, 1.0, p);
        const SweepReport rep = h_sweep([&](double h) { return square_block(rs, 0.0, h, p).block.as_cvnn(); },
                                        block_target(sq.block.kind), hs, kUnit, grid);
        for (const auto& row : rep.rows) CHECK(row.sup_error < 1e-10 * (1.0 + 1.0 / (row.h * row.h)) + 1e-10);
    }
    SUBCASE("smooth square block halves its error") {
        const Activation er = get_activation("exp_re");
        const auto sq = square_block(er, 0.0, 0.1, p);
        const SweepReport rep = h_sweep([&](double h) { return square_block(er, 0.0, h, p).block.as_cvnn(); },
                                        block_target(sq.block.kind), {0.1, 0.05, 0.025, 0.0125}, kUnit, grid);
        for (std::size_t i = 1; i < rep.rows.size(); ++i) CHECK(rep.rows[i].sup_error <= 0.75 * rep.rows[i - 1].sup_error);
    }
    CHECK_THROWS_AS(h_sweep([](double) { return Cvnn({ComplexAffineMap::identity(1), ComplexAffineMap::identity(1)},
                                                     get_activation("cardioid")); },
                            scalar([](Cplx z) { return z; }), {0.1, 0.2}, kUnit, grid),
                    InvalidArgument);
}

TEST_CASE("sweep csv") {
    SweepReport r;
    r.rows = {{0.1, 0.5, 10.0, 2, 3}, {0.05, INFINITY, 20.0, 2, 3}};
    r.metadata["activation"] = "cardioid";
    const std::string csv = sweep_csv(r);
    CHECK(csv.rfind("h,sup_error,max_coeff,depth,width\n", 0) == 0);
    CHECK(csv.find("0.10000000000000001,0.5,10,2,3") != std::string::npos);
    CHECK(csv.find("inf") != std::string::npos);
    CHECK(r.best() == 0);
}

TEST_CASE("polynomial pipelines") {
    SUBCASE("conj squared plus identity with re_square") {
        const EndToEnd e = end_to_end_poly(scalar([](Cplx z) { return std::conj(z) * std::conj(z) + z; }),
                                           get_activation("re_square"), 1, 1, 2, LoweringStrategy::Poly_Narrow_2N2Mplus5);
        CHECK(e.total_error < 1e-2);
        CHECK(e.net.width() <= 9);
        CHECK(e.stage_error < 1e-10);
        CHECK(e.report.metadata.at("grid") == "41");
        // Triangle inequality through the compiled program.
        const double lowering = sup_error(as_fn(e.net), [&](std::span<const Cplx> z) { return eval_register(e.program, z); },
                                          kUnit, GridSpec(41));
        CHECK(e.total_error <= e.stage_error + lowering + 1e-9);
    }
    SUBCASE("identity target through every polynomial strategy") {
        const struct {
            const char* act;
            LoweringStrategy s;
        } cases[] = {{"re_square", LoweringStrategy::Poly_Wide_2N2Mplus12},
                     {"re_square", LoweringStrategy::Poly_Narrow_2N2Mplus5},
                     {"z_plus_zbar_sq", LoweringStrategy::Poly_NMplus4}};
        for (const auto& c : cases) {
            CAPTURE(to_string(c.s));
            const EndToEnd e = end_to_end_poly(scalar([](Cplx z) { return z; }), get_activation(c.act), 1, 1, 1, c.s);
            CHECK(e.total_error < 1e-3);
        }
    }
    SUBCASE("two inputs with abs_square") {
        EndToEndOptions opt;
        opt.box = CompactBox::square(2, -1.0, 1.0);
        opt.fit_grid = GridSpec(5);
        opt.hs = {1e-1, 1e-2, 1e-3};
        const EndToEnd e = end_to_end_poly([](std::span<const Cplx> z) { return CVec{z[0] * std::conj(z[1])}; },
                                           get_activation("abs_square"), 2, 1, 2, LoweringStrategy::Poly_Narrow_2N2Mplus5,
                                           opt);
        CHECK(e.net.width() <= 11);
        CHECK(e.total_error < 1e-2);
    }
    SUBCASE("mismatched activations are refused") {
        CHECK_THROWS_AS(end_to_end_poly(scalar([](Cplx z) { return z; }), get_activation("cardioid"), 1, 1, 1,
                                        LoweringStrategy::Poly_Narrow_2N2Mplus5),
                        IncompatibleError);
        CHECK_THROWS_AS(end_to_end_poly(scalar([](Cplx z) { return z; }), get_activation("re_square"), 1, 1, 1,
                                        LoweringStrategy::Poly_NMplus4),
                        IncompatibleError);
        CHECK_THROWS_AS(end_to_end_poly(scalar([](Cplx z) { return z; }), get_activation("re_square"), 1, 1, 1,
                                        LoweringStrategy::NonPoly_NMplus1),
                        InvalidArgument);
    }
}

TEST_CASE("non-polynomial pipelines") {
    auto f = scalar([](Cplx z) { return z * std::conj(z); });
    FitConfig cfg;
    cfg.num_features = 300;
    SUBCASE("cardioid") {
        const EndToEnd e = end_to_end_nonpoly(f, get_activation("cardioid"), 1, 1, cfg, LoweringStrategy::NonPoly_NMplus1);
        CHECK(e.net.width() <= 3);
        CHECK(e.total_error <= e.stage_error + 1e-2);
    }
    SUBCASE("modrelu") {
        const EndToEnd e =
            end_to_end_nonpoly(f, get_activation("modrelu", {{"b", -1.0}}), 1, 1, cfg, LoweringStrategy::NonPoly_2N2Mplus1);
        CHECK(e.net.width() <= 5);
        CHECK(std::isfinite(e.total_error));
    }
    CHECK_THROWS_AS(end_to_end_nonpoly(f, get_activation("exp"), 1, 1, cfg, LoweringStrategy::NonPoly_NMplus1),
                    IncompatibleError);
}

TEST_CASE("given polynomials lower directly") {
    const PolyZZbar p(1, {{1.0, {{0, 2}}}, {1.0, {{1, 0}}}});
    EndToEndOptions opt;
    opt.hs = {1e-1, 1e-2, 1e-3};
    const EndToEnd e = end_to_end_components({p}, get_activation("re_square"), LoweringStrategy::Poly_Narrow_2N2Mplus5, opt);
    CHECK(e.stage_error == 0.0);
    CHECK(e.total_error < 1e-2);
    CHECK(e.report.rows.size() == 3);
}

TEST_CASE("kernel invariance") {
    const KernelReport r = kernel_invariance_demo(get_activation("tanh_re"), 2, 3);
    REQUIRE(r.applicable);
    CHECK(r.residual < 1e-9);
    CHECK(r.threshold == doctest::Approx(0.8 * std::numbers::pi * std::numbers::pi * 1e-4 / 2.0));
    CHECK(r.threshold == doctest::Approx(3.948e-4).epsilon(1e-3));
    CHECK(r.l1.value >= r.threshold - 3.0 * r.l1.std_error);
    CHECK(r.invariance_ok);
    CHECK(r.bound_ok);
    double len = 0.0;
    for (double v : r.kernel) len += v * v;
    CHECK(std::abs(len - 1.0) < 1e-12);
    CHECK_FALSE(kernel_invariance_demo(get_activation("tanh_re"), 2, 4, 0, 1000).applicable);
    CHECK_THROWS(kernel_invariance_demo(get_activation("cardioid"), 2, 3, 0, 1000));
}

TEST_CASE("hyperplane floors") {
    CHECK(hyperplane_floor({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}}) >= 0.5 - 1e-3);
    CHECK(hyperplane_floor({{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}, {-3.0, -3.0}}) < 1e-3);
    CHECK(square_edge_path(-1.0) == Cplx(0.0));
    CHECK(std::abs(square_edge_path(1.0) - I) < 1e-15);
    const FloorReport rep = affine_subspace_floor_demo(2);
    CHECK(rep.floor >= 0.5 - 1e-3);
    CHECK(rep.min_net_error >= 0.45);
    CHECK(rep.net_errors.size() == 6);
}

TEST_CASE("closure") {
    const ClosureReport rep = closure_demos(1);
    CHECK(rep.affine_residual < 1e-9);
    CHECK(rep.holo_floor >= 0.5);
    CHECK(rep.antiholo_floor >= 0.5);
    CHECK_FALSE(rep.fits.empty());
    Rng rng(2);
    CHECK(affine_residual(random_net(rng, {2, 3, 1}, get_activation("cardioid"))) > 1e-3);
}

TEST_CASE("shifted identity block") {
    const ShallowBlock b = shifted_identity_block(get_activation("nowhere_diff"), 1e-3, 4);
    CHECK(b.width() == 1);
    CHECK(b.coeff_scale == doctest::Approx(1e3));
    CHECK_THROWS_AS(shifted_identity_block(get_activation("nowhere_diff"), 0.0, 1), InvalidArgument);
    const NowhereReport rep = nowhere_diff_demo(get_activation("nowhere_diff"), {1e-2, 1e-3, 1e-4}, 10, GridSpec(11));
    CHECK(rep.cells.size() == 33);
    REQUIRE(rep.best.has_value());
    CHECK(std::isfinite(rep.best->sup_error));
}
