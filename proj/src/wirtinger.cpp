#include "cvnn/wirtinger.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <fmt/format.h>

namespace cvnn {

namespace {

constexpr Cplx I{0.0, 1.0};
constexpr double kEps = std::numeric_limits<double>::epsilon();

Cplx eval_checked(const Activation& act, Cplx z) {
    const Cplx v = act(z);
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw EvaluationError(fmt::format("activation '{}' is not finite at ({}, {})", act.name(), z.real(), z.imag()));
    return v;
}

// Neville-style Richardson table for an estimate with error series in h^2.
// Returns (best, previous-level) so the caller can form an error estimate.
std::pair<Cplx, Cplx> richardson(const std::function<Cplx(double)>& est, double h, int levels) {
    std::vector<Cplx> row;
    row.reserve(levels + 1);
    for (int k = 0; k <= levels; ++k) row.push_back(est(h / std::pow(2.0, k)));
    Cplx prev = row.back();
    for (int level = 1; level <= levels; ++level) {
        const double f = std::pow(4.0, level);
        std::vector<Cplx> next;
        for (std::size_t k = 0; k + 1 < row.size(); ++k) next.push_back((f * row[k + 1] - row[k]) / (f - 1.0));
        prev = row.back();
        row = std::move(next);
    }
    return {row.front(), prev};
}

double scale_of(Cplx z0) { return std::max(1.0, std::abs(z0)); }

// Deterministic tie-break: larger score wins; near-ties go to the point closest to 1.
template <class Score>
std::optional<PointProbe> best_by(const std::vector<PointProbe>& probes, Score score) {
    std::optional<PointProbe> best;
    double best_s = 0.0;
    for (const auto& p : probes) {
        const std::optional<double> s = score(p);
        if (!s) continue;
        if (!best) {
            best = p, best_s = *s;
            continue;
        }
        const double slack = 1e-9 * std::max(1.0, std::abs(best_s));
        if (*s > best_s + slack ||
            (std::abs(*s - best_s) <= slack && std::abs(p.z0 - 1.0) < std::abs(best->z0 - 1.0))) {
            best = p, best_s = *s;
        }
    }
    return best;
}

}  // namespace

std::vector<Cplx> ToleranceProfile::points() const {
    if (!probe_points.empty()) return probe_points;
    std::vector<Cplx> out;
    for (const auto& v : sample_box(probe_box, probe_grid)) out.push_back(v.front());
    return out;
}

SecondWirtinger partials_to_wirtinger(Cplx fxx, Cplx fxy, Cplx fyy) {
    return {0.25 * (fxx - 2.0 * I * fxy - fyy), 0.25 * (fxx + fyy), 0.25 * (fxx + 2.0 * I * fxy - fyy)};
}

FirstResult wirt_first(const Activation& act, Cplx z0, const ToleranceProfile& prof) {
    const double h = prof.fd_step * scale_of(z0);
    auto dx = [&](double s) { return (eval_checked(act, z0 + s) - eval_checked(act, z0 - s)) / (2.0 * s); };
    auto dy = [&](double s) { return (eval_checked(act, z0 + I * s) - eval_checked(act, z0 - I * s)) / (2.0 * s); };
    const auto [fx, fx_prev] = richardson(dx, h, prof.richardson_levels);
    const auto [fy, fy_prev] = richardson(dy, h, prof.richardson_levels);
    const double err = std::abs(fx - fx_prev) + std::abs(fy - fy_prev);
    return {0.5 * (fx - I * fy), 0.5 * (fx + I * fy), err};
}

SecondResult wirt_second(const Activation& act, Cplx z0, const ToleranceProfile& prof) {
    // Second differences lose two digits per halving of the step, so they use
    // the square root of the first-order step.
    const double h = std::sqrt(prof.fd_step) * scale_of(z0);
    const Cplx f0 = eval_checked(act, z0);
    auto fxx = [&](double s) { return (eval_checked(act, z0 + s) - 2.0 * f0 + eval_checked(act, z0 - s)) / (s * s); };
    auto fyy = [&](double s) {
        return (eval_checked(act, z0 + I * s) - 2.0 * f0 + eval_checked(act, z0 - I * s)) / (s * s);
    };
    auto fxy = [&](double s) {
        return (eval_checked(act, z0 + s + I * s) - eval_checked(act, z0 + s - I * s) -
                eval_checked(act, z0 - s + I * s) + eval_checked(act, z0 - s - I * s)) /
               (4.0 * s * s);
    };
    const auto [xx, xx_p] = richardson(fxx, h, prof.richardson_levels);
    const auto [xy, xy_p] = richardson(fxy, h, prof.richardson_levels);
    const auto [yy, yy_p] = richardson(fyy, h, prof.richardson_levels);
    const SecondWirtinger w = partials_to_wirtinger(xx, xy, yy);
    const double err = std::abs(xx - xx_p) + std::abs(xy - xy_p) + std::abs(yy - yy_p);
    return {w.d2, w.ddbar, w.dbar2, err};
}

WirtingerProbe probe(const Activation& act, Cplx z0, const ToleranceProfile& prof) {
    WirtingerProbe p;
    p.z0 = z0;
    try {
        const auto f = wirt_first(act, z0, prof);
        const auto s = wirt_second(act, z0, prof);
        p.d = f.d, p.dbar = f.dbar;
        p.d2 = s.d2, p.ddbar = s.ddbar, p.dbar2 = s.dbar2;
        p.est_error = std::max(f.est_error, s.est_error);
    } catch (const EvaluationError&) {
        p.failed = true;
    }
    return p;
}

FirstWirtinger first_derivatives(const Activation& act, Cplx z0, const ToleranceProfile& prof) {
    if (prof.prefer_analytic)
        if (auto a = act.analytic_first(z0)) return *a;
    const auto f = wirt_first(act, z0, prof);
    return {f.d, f.dbar};
}

SecondWirtinger second_derivatives(const Activation& act, Cplx z0, const ToleranceProfile& prof) {
    if (prof.prefer_analytic)
        if (auto a = act.analytic_second(z0)) return *a;
    const auto s = wirt_second(act, z0, prof);
    return {s.d2, s.ddbar, s.dbar2};
}

LaplacianEstimate laplacian_iterate(const Activation& act, Cplx z0, int order, const ToleranceProfile& prof) {
    if (order < 1) throw InvalidArgument("Laplacian order must be at least 1");
    if (order > prof.polyharmonic_max_order)
        throw InvalidArgument(fmt::format("Laplacian order {} exceeds the maximum {}", order, prof.polyharmonic_max_order));
    static constexpr std::array<double, 6> steps{1e-3, 1e-2, 4e-2, 8e-2, 1.2e-1, 1.6e-1};
    const double h = steps[std::min<std::size_t>(order - 1, steps.size() - 1)] * scale_of(z0);
    double fmax = 0.0;
    std::function<Cplx(int, Cplx)> lap = [&](int k, Cplx z) -> Cplx {
        if (k == 0) {
            const Cplx v = eval_checked(act, z);
            fmax = std::max(fmax, std::abs(v));
            return v;
        }
        const Cplx c = lap(k - 1, z);
        return (lap(k - 1, z + h) + lap(k - 1, z - h) + lap(k - 1, z + I * h) + lap(k - 1, z - I * h) - 4.0 * c) /
               (h * h);
    };
    const Cplx v = lap(order, z0);
    const double noise = 4.0 * kEps * std::max(1.0, fmax) * std::pow(8.0, order) / std::pow(h, 2 * order);
    return {v, noise, noise < 1e-3 * std::max(1.0, std::abs(v))};
}

TaylorReport taylor_remainder_probe(const Activation& act, Cplx z0, int order, const ToleranceProfile& prof) {
    if (order != 1 && order != 2) throw InvalidArgument("Taylor probe order must be 1 or 2");
    TaylorReport rep;
    rep.order = order;
    rep.radii = order == 1 ? std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4} : std::vector<double>{1e-1, 1e-2, 1e-3};
    rep.pass = false;
    try {
        const Cplx f0 = eval_checked(act, z0);
        const FirstWirtinger f = first_derivatives(act, z0, prof);
        SecondWirtinger s{};
        if (order == 2) s = second_derivatives(act, z0, prof);
        constexpr int dirs = 16;
        for (double r : rep.radii) {
            double worst = 0.0;
            for (int j = 0; j < dirs; ++j) {
                const Cplx z = std::polar(r, 2.0 * std::numbers::pi * j / dirs);
                const Cplx zb = std::conj(z);
                Cplx t = f0 + f.d * z + f.dbar * zb;
                if (order == 2) t += 0.5 * s.d2 * z * z + s.ddbar * z * zb + 0.5 * s.dbar2 * zb * zb;
                worst = std::max(worst, std::abs(eval_checked(act, z0 + z) - t));
            }
            rep.ratios.push_back(worst / std::pow(r, order));
        }
    } catch (const EvaluationError&) {
        rep.ratios.clear();
        return rep;
    }
    const double floor = 1e-8 * std::max(1.0, std::abs(act(z0)));
    rep.pass = true;
    for (std::size_t j = 0; j + 1 < rep.ratios.size(); ++j)
        if (!(rep.ratios[j + 1] <= 0.5 * rep.ratios[j] || rep.ratios[j + 1] <= floor)) rep.pass = false;
    return rep;
}

std::vector<PointProbe> scan_first(const Activation& act, const ToleranceProfile& prof) {
    std::vector<PointProbe> out;
    for (Cplx z : prof.points()) {
        if (act.excluded(z)) continue;
        try {
            double err = 0.0;
            FirstWirtinger f;
            auto a = prof.prefer_analytic ? act.analytic_first(z) : std::nullopt;
            if (a) {
                f = *a;
            } else {
                const auto r = wirt_first(act, z, prof);
                f = {r.d, r.dbar};
                err = r.est_error;
            }
            if (!all_finite(std::array<Cplx, 2>{f.d, f.dbar})) continue;
            const bool pass = taylor_remainder_probe(act, z, 1, prof).pass;
            out.push_back({z, f.d, f.dbar, err, pass});
        } catch (const EvaluationError&) {
        }
    }
    return out;
}

std::optional<Cplx> find_active_point(const Activation& act, const ToleranceProfile& prof) {
    const auto probes = scan_first(act, prof);
    auto best = best_by(probes, [&](const PointProbe& p) -> std::optional<double> {
        const double s = std::max(std::abs(p.d), std::abs(p.dbar));
        if (!p.taylor_pass || s <= prof.zero_tol) return std::nullopt;
        return s;
    });
    if (!best) return std::nullopt;
    return best->z0;
}

std::optional<PointProbe> best_identity_point(const Activation& act, const ToleranceProfile& prof) {
    return best_by(scan_first(act, prof), [&](const PointProbe& p) -> std::optional<double> {
        if (!p.taylor_pass || std::abs(p.d) <= prof.zero_tol || std::abs(p.dbar) > prof.zero_tol) return std::nullopt;
        return std::abs(p.d);
    });
}

std::optional<PointProbe> best_conj_point(const Activation& act, const ToleranceProfile& prof) {
    return best_by(scan_first(act, prof), [&](const PointProbe& p) -> std::optional<double> {
        if (!p.taylor_pass || std::abs(p.dbar) <= prof.zero_tol || std::abs(p.d) > prof.zero_tol) return std::nullopt;
        return std::abs(p.dbar);
    });
}

std::optional<PointProbe> best_pair_point(const Activation& act, const ToleranceProfile& prof) {
    return best_by(scan_first(act, prof), [&](const PointProbe& p) -> std::optional<double> {
        const double s = std::min(std::abs(p.d), std::abs(p.dbar));
        if (!p.taylor_pass || s <= prof.zero_tol) return std::nullopt;
        return s;
    });
}

std::string to_string(SecondWhich w) {
    switch (w) {
        case SecondWhich::ZZbar: return "ZZbar";
        case SecondWhich::Z2: return "Z2";
        case SecondWhich::Zbar2: return "Zbar2";
    }
    return "?";
}

std::optional<SecondPoint> find_nonzero_second_point(const Activation& act, const ToleranceProfile& prof) {
    struct Entry {
        Cplx z0;
        SecondWirtinger s;
    };
    std::vector<Entry> entries;
    for (const auto& p : scan_first(act, prof)) {
        if (!p.taylor_pass) continue;
        try {
            entries.push_back({p.z0, second_derivatives(act, p.z0, prof)});
        } catch (const EvaluationError&) {
        }
    }
    const std::array<std::pair<SecondWhich, Cplx SecondWirtinger::*>, 3> order{
        {{SecondWhich::ZZbar, &SecondWirtinger::ddbar},
         {SecondWhich::Z2, &SecondWirtinger::d2},
         {SecondWhich::Zbar2, &SecondWirtinger::dbar2}}};
    for (const auto& [which, member] : order) {
        std::vector<PointProbe> cands;
        for (const auto& e : entries)
            if (std::abs(e.s.*member) > prof.zero_tol) cands.push_back({e.z0, e.s.*member, 0.0, 0.0, true});
        auto best = best_by(cands, [](const PointProbe& p) -> std::optional<double> { return std::abs(p.d); });
        if (best) return SecondPoint{best->z0, which};
    }
    return std::nullopt;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::NonUniversalHolomorphic: return "NonUniversalHolomorphic";
        case Verdict::NonUniversalAntiholomorphic: return "NonUniversalAntiholomorphic";
        case Verdict::NonUniversalRAffine: return "NonUniversalRAffine";
        case Verdict::Inconclusive: return "Inconclusive";
        case Verdict::UniversalNonPoly_NMplus1: return "UniversalNonPoly_NMplus1";
        case Verdict::UniversalNonPoly_2N2Mplus1: return "UniversalNonPoly_2N2Mplus1";
        case Verdict::UniversalPoly_NMplus4: return "UniversalPoly_NMplus4";
        case Verdict::UniversalPoly_2N2Mplus5: return "UniversalPoly_2N2Mplus5";
    }
    return "?";
}

bool is_universal(Verdict v) {
    return v == Verdict::UniversalNonPoly_NMplus1 || v == Verdict::UniversalNonPoly_2N2Mplus1 ||
           v == Verdict::UniversalPoly_NMplus4 || v == Verdict::UniversalPoly_2N2Mplus5;
}

std::size_t verdict_width(Verdict v, std::size_t n, std::size_t m) {
    switch (v) {
        case Verdict::UniversalNonPoly_NMplus1: return n + m + 1;
        case Verdict::UniversalNonPoly_2N2Mplus1: return 2 * n + 2 * m + 1;
        case Verdict::UniversalPoly_NMplus4: return n + m + 4;
        case Verdict::UniversalPoly_2N2Mplus5: return 2 * n + 2 * m + 5;
        default: return 0;
    }
}

bool is_polyharmonic(const Activation& act, const ToleranceProfile& prof) {
    const auto& flag = act.poly_flag();
    if (flag.kind != Polyharmonicity::Unknown) return flag.kind == Polyharmonicity::Polyharmonic;
    std::vector<Cplx> pts;
    const auto all = prof.points();
    const std::size_t stride = std::max<std::size_t>(1, all.size() / 5);
    for (std::size_t i = stride / 2; i < all.size() && pts.size() < 5; i += stride)
        if (!act.excluded(all[i])) pts.push_back(all[i]);
    for (int m = 1; m <= prof.polyharmonic_max_order; ++m) {
        bool vanishes = !pts.empty();
        for (Cplx z : pts) {
            try {
                const auto est = laplacian_iterate(act, z, m, prof);
                if (std::abs(est.value) > std::max(prof.zero_tol, 10.0 * est.noise)) vanishes = false;
            } catch (const EvaluationError&) {
                vanishes = false;
            }
            if (!vanishes) break;
        }
        if (vanishes) return true;
    }
    return false;
}

Classification classify_activation(const Activation& act, std::size_t n, std::size_t m,
                                   const ToleranceProfile& prof) {
    Classification c;
    c.tolerances = prof;
    c.probes = scan_first(act, prof);
    const double tol = prof.zero_tol;

    if (const auto& flags = act.class_flags()) {
        if (flags->holomorphic) c.verdict = Verdict::NonUniversalHolomorphic;
        else if (flags->antiholomorphic) c.verdict = Verdict::NonUniversalAntiholomorphic;
        else if (flags->r_affine) c.verdict = Verdict::NonUniversalRAffine;
        if (c.verdict != Verdict::Inconclusive) {
            c.evidence = "analytic class flag";
            return c;
        }
    } else if (!c.probes.empty()) {
        const bool holo = std::all_of(c.probes.begin(), c.probes.end(), [&](auto& p) { return std::abs(p.dbar) <= tol; });
        const bool anti = std::all_of(c.probes.begin(), c.probes.end(), [&](auto& p) { return std::abs(p.d) <= tol; });
        bool affine = true;
        for (const auto& p : c.probes) {
            try {
                const auto s = second_derivatives(act, p.z0, prof);
                if (std::abs(s.d2) > tol || std::abs(s.ddbar) > tol || std::abs(s.dbar2) > tol) affine = false;
            } catch (const EvaluationError&) {
                affine = false;
            }
            if (!affine) break;
        }
        if (holo) c.verdict = Verdict::NonUniversalHolomorphic;
        else if (anti) c.verdict = Verdict::NonUniversalAntiholomorphic;
        else if (affine) c.verdict = Verdict::NonUniversalRAffine;
        if (c.verdict != Verdict::Inconclusive) {
            c.evidence = "heuristic: derivative vanished on every probe point";
            return c;
        }
    }

    auto lone = best_by(c.probes, [&](const PointProbe& p) -> std::optional<double> {
        if (!p.taylor_pass) return std::nullopt;
        const bool dz = std::abs(p.d) > tol, bz = std::abs(p.dbar) > tol;
        if (dz == bz) return std::nullopt;
        return std::max(std::abs(p.d), std::abs(p.dbar));
    });
    auto pair = best_by(c.probes, [&](const PointProbe& p) -> std::optional<double> {
        const double s = std::min(std::abs(p.d), std::abs(p.dbar));
        if (!p.taylor_pass || s <= tol) return std::nullopt;
        return s;
    });
    if (!lone && !pair) {
        c.evidence = "no probe point with a nonvanishing derivative passed the Taylor check";
        return c;
    }
    c.polyharmonic = is_polyharmonic(act, prof);
    const std::string poly_src =
        act.poly_flag().kind == Polyharmonicity::Unknown ? "Laplacian heuristic" : "analytic flag";
    if (lone) {
        c.witness = lone->z0;
        c.verdict = c.polyharmonic ? Verdict::UniversalPoly_NMplus4 : Verdict::UniversalNonPoly_NMplus1;
        c.evidence = fmt::format("exactly one first derivative vanishes at the witness; polyharmonic={} ({})",
                                 c.polyharmonic, poly_src);
    } else {
        c.witness = pair->z0;
        c.verdict = c.polyharmonic ? Verdict::UniversalPoly_2N2Mplus5 : Verdict::UniversalNonPoly_2N2Mplus1;
        c.evidence = fmt::format("both first derivatives nonzero at the witness; polyharmonic={} ({})",
                                 c.polyharmonic, poly_src);
    }
    (void)n, (void)m;
    return c;
}

}  // namespace cvnn
