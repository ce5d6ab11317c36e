#include "cvnn/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cvnn/rng.hpp"

namespace cvnn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string box_string(const CompactBox& box) {
    std::string s;
    for (std::size_t i = 0; i < box.dim(); ++i) {
        if (i) s += ';';
        s += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}", box.re()[i].lo, box.re()[i].hi, box.im()[i].lo, box.im()[i].hi);
    }
    return s;
}

CVec random_point(Rng& rng, const CompactBox& box) {
    CVec z(box.dim());
    for (std::size_t i = 0; i < box.dim(); ++i)
        z[i] = {rng.uniform(box.re()[i].lo, box.re()[i].hi), rng.uniform(box.im()[i].lo, box.im()[i].hi)};
    return z;
}

double diff_norm(const CVec& a, const CVec& b) {
    CVec d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return norm2(d);
}

}  // namespace

VecFn as_fn(const Cvnn& net) {
    return [net](std::span<const Cplx> z) { return net(z); };
}

double sup_error(const VecFn& f, const VecFn& g, const CompactBox& box, const GridSpec& grid) {
    return grid_sup_error(f, g, sample_box(box, grid));
}

McEstimate l1_error_mc(const VecFn& f, const VecFn& g, const CompactBox& box, std::size_t samples, std::uint64_t seed) {
    if (samples < 2) throw InvalidArgument("Monte Carlo needs at least two samples");
    Rng rng(seed);
    double sum = 0.0, sq = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const CVec z = random_point(rng, box);
        const double e = diff_norm(f(z), g(z));
        sum += e;
        sq += e * e;
    }
    const double nn = static_cast<double>(samples);
    const double mean = sum / nn;
    const double var = std::max(0.0, (sq / nn - mean * mean) * nn / (nn - 1.0));
    const double vol = box.volume();
    return {vol * mean, vol * std::sqrt(var / nn), samples};
}

std::size_t SweepReport::best() const {
    std::size_t idx = rows.size();
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (std::isfinite(rows[i].sup_error) && (idx == rows.size() || rows[i].sup_error < rows[idx].sup_error)) idx = i;
    if (idx == rows.size()) throw EvaluationError("no step in the sweep produced a finite network");
    return idx;
}

std::string sweep_csv(const SweepReport& r) {
    std::string out = "h,sup_error,max_coeff,depth,width\n";
    for (const auto& row : r.rows)
        out += fmt::format("{:.17g},{:.17g},{:.17g},{},{}\n", row.h, row.sup_error, row.max_coeff, row.depth, row.width);
    return out;
}

SweepReport h_sweep(const std::function<Cvnn(double)>& build, const VecFn& target, const std::vector<double>& hs,
                    const CompactBox& box, const GridSpec& grid) {
    if (hs.empty()) throw InvalidArgument("h schedule is empty");
    for (std::size_t i = 1; i < hs.size(); ++i)
        if (!(hs[i] < hs[i - 1])) throw InvalidArgument("h schedule must be strictly decreasing");
    const auto pts = sample_box(box, grid);
    SweepReport rep;
    for (double h : hs) {
        const Cvnn net = build(h);
        double err = kInf;
        try {
            err = grid_sup_error(target, as_fn(net), pts);
        } catch (const EvaluationError&) {
        }
        rep.rows.push_back({h, err, net.max_abs_coeff(), net.depth(), net.width()});
    }
    rep.metadata["box"] = box_string(box);
    rep.metadata["grid"] = std::to_string(grid.points_per_axis);
    return rep;
}

namespace {

bool poly_verdict(Verdict v) { return v == Verdict::UniversalPoly_NMplus4 || v == Verdict::UniversalPoly_2N2Mplus5; }
bool nonpoly_verdict(Verdict v) {
    return v == Verdict::UniversalNonPoly_NMplus1 || v == Verdict::UniversalNonPoly_2N2Mplus1;
}

void gate(const Activation& act, std::size_t n, std::size_t m, LoweringStrategy s, const EndToEndOptions& opt) {
    if (opt.skip_classification) return;
    const Classification c = classify_activation(act, n, m, opt.prof);
    const bool ok = is_poly_strategy(s)
                        ? poly_verdict(c.verdict) &&
                              (s != LoweringStrategy::Poly_NMplus4 || c.verdict == Verdict::UniversalPoly_NMplus4)
                        : nonpoly_verdict(c.verdict) && (s == LoweringStrategy::NonPoly_2N2Mplus1 ||
                                                         c.verdict == Verdict::UniversalNonPoly_NMplus1);
    if (!ok)
        throw IncompatibleError(fmt::format("activation '{}' is classified {}, which does not support {}", act.name(),
                                            to_string(c.verdict), to_string(s)));
}

void check_box(const CompactBox& box, std::size_t n) {
    if (box.dim() != n) throw DimensionError(fmt::format("box has dimension {}, expected {}", box.dim(), n));
}

EndToEnd sweep_program(const VecFn& f, const Activation& act, RegisterProgram prog, LoweringStrategy s,
                       const EndToEndOptions& opt, double stage_error) {
    LowerOptions lopt;
    lopt.prof = opt.prof;
    lopt.sites = find_block_sites(act, opt.prof);
    const GridSpec ver = opt.fit_grid.refined();
    SweepReport rep = h_sweep([&](double h) { return lower(prog, act, s, h, lopt); }, f, opt.hs, opt.box, ver);
    rep.metadata["activation"] = act.name();
    rep.metadata["strategy"] = to_string(s);
    const std::size_t b = rep.best();
    Lowered low = lower_detailed(prog, act, s, rep.rows[b].h, lopt);
    const double total = rep.rows[b].sup_error;
    const double h = rep.rows[b].h;
    return {std::move(low.net), h, std::move(rep), stage_error, total, std::move(prog), std::move(low.warnings)};
}

}  // namespace

EndToEnd end_to_end_poly(const VecFn& f, const Activation& act, std::size_t n, std::size_t m, unsigned degree,
                         LoweringStrategy s, const EndToEndOptions& opt) {
    if (!is_poly_strategy(s)) throw InvalidArgument(fmt::format("{} is not a polynomial strategy", to_string(s)));
    check_box(opt.box, n);
    gate(act, n, m, s, opt);
    const PolyFit fit = fit_poly(f, n, m, degree, opt.box, opt.fit_grid);
    LowerOptions lopt;
    lopt.prof = opt.prof;
    const MulKind kind = strategy_mul_kind(act, s, lopt);
    RegisterProgram prog = poly_to_register(fit.components, kind);
    auto poly = [&](std::span<const Cplx> z) {
        CVec v;
        for (const auto& p : fit.components) v.push_back(p(z));
        return v;
    };
    const double stage = sup_error(f, poly, opt.box, opt.fit_grid.refined());
    return sweep_program(f, act, std::move(prog), s, opt, stage);
}

EndToEnd end_to_end_nonpoly(const VecFn& f, const Activation& act, std::size_t n, std::size_t m, const FitConfig& cfg,
                            LoweringStrategy s, const EndToEndOptions& opt) {
    if (is_poly_strategy(s)) throw InvalidArgument(fmt::format("{} is a polynomial strategy", to_string(s)));
    check_box(opt.box, n);
    gate(act, n, m, s, opt);
    FitConfig c = cfg;
    c.box = opt.box;
    c.grid = opt.fit_grid;
    const FitResult fit = fit_shallow(f, program_activation(act, s), n, m, c);
    const double stage = sup_error(f, as_fn(fit.net), opt.box, opt.fit_grid.refined());
    EndToEnd r = sweep_program(f, act, shallow_to_register(fit.net), s, opt, stage);
    r.warnings.insert(r.warnings.end(), fit.warnings.begin(), fit.warnings.end());
    return r;
}

EndToEnd end_to_end_components(const std::vector<PolyZZbar>& components, const Activation& act, LoweringStrategy s,
                               const EndToEndOptions& opt) {
    if (!is_poly_strategy(s)) throw InvalidArgument(fmt::format("{} is not a polynomial strategy", to_string(s)));
    if (components.empty()) throw InvalidArgument("polynomial has no components");
    const std::size_t n = components.front().n(), m = components.size();
    check_box(opt.box, n);
    gate(act, n, m, s, opt);
    LowerOptions lopt;
    lopt.prof = opt.prof;
    RegisterProgram prog = poly_to_register(components, strategy_mul_kind(act, s, lopt));
    auto poly = [components](std::span<const Cplx> z) {
        CVec v;
        for (const auto& p : components) v.push_back(p(z));
        return v;
    };
    return sweep_program(poly, act, std::move(prog), s, opt, 0.0);
}

KernelReport kernel_invariance_check(const Cvnn& net, std::uint64_t seed, std::size_t mc_samples) {
    const Activation& act = net.activation();
    Rng probe(seed ^ 0x9e3779b97f4a7c15ULL);
    for (int i = 0; i < 32; ++i) {
        const Cplx z{probe.uniform(-3.0, 3.0), probe.uniform(-3.0, 3.0)};
        const Cplx a = act(z), b = act({z.real(), 0.0});
        if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(b)))
            throw PreconditionError(fmt::format("activation '{}' depends on the imaginary part", act.name()));
    }
    const auto& v1 = net.maps().front();
    const std::size_t n = v1.cols(), w = v1.rows();
    Eigen::MatrixXd r(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(2 * n));
    for (std::size_t i = 0; i < w; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            r(i, j) = v1.at(i, j).real();
            r(i, n + j) = -v1.at(i, j).imag();
        }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    const bool deficient = w < 2 * n || (sv.size() > 0 && sv(sv.size() - 1) <= 1e-12 * std::max(1.0, smax));

    KernelReport rep{};
    const double threshold = 0.8 * std::pow(std::numbers::pi, static_cast<double>(n)) *
                             std::pow(0.1, 2.0 * static_cast<double>(n)) / std::tgamma(static_cast<double>(n) + 1.0);
    rep.threshold = threshold;
    rep.applicable = deficient;
    if (!deficient) return rep;

    const Eigen::VectorXd v = svd.matrixV().col(static_cast<Eigen::Index>(2 * n - 1));
    rep.kernel.assign(v.data(), v.data() + v.size());
    CVec vc(n);
    for (std::size_t j = 0; j < n; ++j) vc[j] = {v(j), v(n + j)};

    const CompactBox box = CompactBox::square(n, -2.0, 2.0);
    Rng rng(seed);
    for (int i = 0; i < 1000; ++i) {
        const CVec z = random_point(rng, box);
        CVec zs(z);
        for (std::size_t j = 0; j < n; ++j) zs[j] += vc[j];
        rep.residual = std::max(rep.residual, diff_norm(net(zs), net(z)));
    }
    const std::size_t m = net.output_dim();
    auto target = [m](std::span<const Cplx> z) {
        CVec out(m, 0.0);
        out[0] = norm2(z);
        return out;
    };
    rep.l1 = l1_error_mc(target, as_fn(net), box, mc_samples, seed + 1);
    rep.invariance_ok = rep.residual < 1e-9;
    rep.bound_ok = rep.l1.value >= threshold - 3.0 * rep.l1.std_error;
    return rep;
}

KernelReport kernel_invariance_demo(const Activation& act, std::size_t n, std::size_t width, std::uint64_t seed,
                                    std::size_t mc_samples) {
    if (n == 0 || width == 0) throw InvalidArgument("dimension and width must be positive");
    const std::size_t m = 2;
    auto target = [m](std::span<const Cplx> z) {
        CVec out(m, 0.0);
        out[0] = norm2(z);
        return out;
    };
    FitConfig cfg;
    cfg.box = CompactBox::square(n, -2.0, 2.0);
    cfg.grid = GridSpec(n == 1 ? 21 : 5);
    cfg.seed = seed;
    cfg.ridge = 1e-8;
    const FitResult fit = fit_deep(target, act, n, m, {width, width}, cfg);
    return kernel_invariance_check(fit.net, seed, mc_samples);
}

double hyperplane_floor(const std::vector<std::pair<double, double>>& points, std::size_t angles, std::size_t offsets) {
    if (points.empty()) throw InvalidArgument("need at least one point");
    if (angles < 1 || offsets < 2) throw InvalidArgument("angle and offset grids are too small");
    double reach = 0.0;
    for (auto [x, y] : points) reach = std::max(reach, std::hypot(x, y));
    double best = kInf;
    for (std::size_t a = 0; a < angles; ++a) {
        const double th = std::numbers::pi * static_cast<double>(a) / static_cast<double>(angles);
        const double ux = std::cos(th), uy = std::sin(th);
        for (std::size_t o = 0; o < offsets; ++o) {
            const double c = -reach + 2.0 * reach * static_cast<double>(o) / static_cast<double>(offsets - 1);
            double worst = 0.0;
            for (auto [x, y] : points) worst = std::max(worst, std::abs(ux * x + uy * y - c));
            best = std::min(best, worst);
        }
    }
    return best;
}

Cplx square_edge_path(Cplx z) {
    const double t = std::clamp((z.real() + 1.0) / 2.0, 0.0, 1.0);
    const double s = 3.0 * t;
    if (s <= 1.0) return {s, 0.0};
    if (s <= 2.0) return {1.0, s - 1.0};
    return {3.0 - s, 1.0};
}

FloorReport affine_subspace_floor_demo(std::size_t seeds) {
    FloorReport rep{};
    rep.floor = hyperplane_floor({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}});
    const Activation act = get_activation("tanh_re");
    auto target = [](std::span<const Cplx> z) { return CVec{square_edge_path(z[0])}; };
    rep.min_net_error = kInf;
    for (std::size_t depth = 1; depth <= 3; ++depth) {
        for (std::size_t s = 0; s < seeds; ++s) {
            FitConfig cfg;
            cfg.grid = GridSpec(31);
            cfg.seed = s;
            cfg.weight_scale = 2.0;
            cfg.ridge = 1e-12;
            double err = kInf;
            try {
                err = fit_deep(target, act, 1, 1, std::vector<std::size_t>(depth, 1), cfg).sup_error;
            } catch (const Error&) {
            }
            rep.net_errors.push_back(err);
            rep.min_net_error = std::min(rep.min_net_error, err);
        }
    }
    return rep;
}

double affine_residual(const Cvnn& net, std::uint64_t seed, std::size_t probes) {
    Rng rng(seed);
    const std::size_t n = net.input_dim();
    const CompactBox box = CompactBox::square(n, -1.0, 1.0);
    const CVec zero(n, 0.0);
    const CVec g0 = net(zero);
    double worst = 0.0;
    for (std::size_t p = 0; p < probes; ++p) {
        const CVec x = random_point(rng, box), y = random_point(rng, box);
        const double t = rng.uniform(-2.0, 2.0);
        CVec xy(n), tx(n);
        for (std::size_t i = 0; i < n; ++i) {
            xy[i] = x[i] + y[i];
            tx[i] = t * x[i];
        }
        const CVec gx = net(x), gy = net(y), gxy = net(xy), gtx = net(tx);
        CVec r1(gx.size()), r2(gx.size());
        for (std::size_t i = 0; i < gx.size(); ++i) {
            r1[i] = gxy[i] - gx[i] - gy[i] + g0[i];
            r2[i] = gtx[i] - t * gx[i] - (1.0 - t) * g0[i];
        }
        worst = std::max({worst, norm2(r1), norm2(r2)});
    }
    return worst;
}

ClosureReport closure_demos(std::size_t seeds) {
    ClosureReport rep{};
    {
        Rng rng(7);
        ParamMap p;
        for (const char* k : {"a_re", "a_im", "b_re", "b_im", "c_re", "c_im"}) p[k] = rng.uniform(-1.0, 1.0);
        const Activation act = get_activation("r_affine", p);
        std::vector<ComplexAffineMap> maps;
        std::size_t prev = 2;
        for (std::size_t w : {8, 8, 8, 2}) {
            std::vector<Cplx> a(w * prev);
            CVec b(w);
            for (auto& v : a) v = rng.cnormal(0.5);
            for (auto& v : b) v = rng.cnormal(0.5);
            maps.emplace_back(w, prev, std::move(a), std::move(b));
            prev = w;
        }
        rep.affine_residual = affine_residual(Cvnn(std::move(maps), act));
    }
    rep.holo_floor = kInf;
    rep.antiholo_floor = kInf;
    const std::pair<const char*, bool> cases[] = {{"exp", true}, {"antiholo_exp", false}};
    for (auto [name, holo] : cases) {
        const Activation act = get_activation(name);
        const VecFn target = holo ? VecFn([](std::span<const Cplx> z) { return CVec{std::conj(z[0])}; })
                                  : VecFn([](std::span<const Cplx> z) { return CVec{z[0]}; });
        for (std::size_t width : {4, 16, 64}) {
            for (std::size_t depth = 2; depth <= 4; ++depth) {
                // Two antiholomorphic layers compose to a holomorphic map.
                if (!holo && depth % 2 == 1) continue;
                for (std::size_t s = 0; s < seeds; ++s) {
                    FitConfig cfg;
                    cfg.seed = s;
                    double err = kInf;
                    try {
                        err = fit_deep(target, act, 1, 1, std::vector<std::size_t>(depth - 1, width), cfg).sup_error;
                    } catch (const Error&) {
                    }
                    rep.fits.push_back({name, holo ? "conj" : "id", width, depth, s, err});
                    double& fl = holo ? rep.holo_floor : rep.antiholo_floor;
                    fl = std::min(fl, err);
                }
            }
        }
    }
    return rep;
}

ShallowBlock shifted_identity_block(const Activation& act, double h, int k) {
    if (!(h > 0.0)) throw InvalidArgument(fmt::format("step h must be positive, got {}", h));
    const Cplx shift = 2.0 * std::numbers::pi * static_cast<double>(k);
    ShallowBlock b{ComplexAffineMap(1, 1, {h}, {shift}), ComplexAffineMap(1, 1, {1.0 / h}, {0.0}), BlockKind::Identity,
                   shift, h, act};
    b.coeff_scale = 1.0 / h;
    return b;
}

NowhereReport nowhere_diff_demo(const Activation& act, const std::vector<double>& hs, int k_max, const GridSpec& grid) {
    if (k_max < 0) throw InvalidArgument("k_max must be nonnegative");
    NowhereReport rep;
    const CompactBox box = CompactBox::square(1, -1.0, 1.0);
    const VecFn id = block_target(BlockKind::Identity);
    for (double h : hs) {
        for (int k = 0; k <= k_max; ++k) {
            double err = kInf;
            try {
                err = block_error(shifted_identity_block(act, h, k), id, box, grid);
            } catch (const EvaluationError&) {
            }
            NowhereCell cell{h, k, err};
            rep.cells.push_back(cell);
            if (std::isfinite(err) && (!rep.best || err < rep.best->sup_error)) rep.best = cell;
        }
    }
    return rep;
}

}  // namespace cvnn
