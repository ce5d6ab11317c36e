#include "cvnn/activation.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "cvnn/error.hpp"

namespace cvnn {

namespace {

constexpr Cplx I{0.0, 1.0};

double param(const ParamMap& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

Cplx cparam(const ParamMap& p, const std::string& key, Cplx fallback) {
    return {param(p, key + "_re", fallback.real()), param(p, key + "_im", fallback.imag())};
}

void check_known(const std::string& name, const ParamMap& p, std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : p) {
        bool ok = false;
        for (const char* key : keys) ok = ok || k == key;
        if (!ok) throw InvalidArgument(fmt::format("activation '{}' has no parameter '{}'", name, k));
        if (!std::isfinite(v)) throw InvalidArgument(fmt::format("parameter '{}' is not finite", k));
    }
}

Activation make_modrelu(const ParamMap& p) {
    check_known("modrelu", p, {"b"});
    const double b = param(p, "b", -1.0);
    if (!(b < 0.0)) throw InvalidArgument("modrelu requires b < 0");
    Activation::Parts parts;
    parts.name = "modrelu";
    parts.params = {{"b", b}};
    parts.eval = [b](Cplx z) -> Cplx {
        const double r = std::abs(z);
        if (r + b <= 0.0) return 0.0;
        return (r + b) * z / r;
    };
    parts.first = [b](Cplx z) -> FirstWirtinger {
        const double r = std::abs(z);
        if (r + b < 0.0) return {0.0, 0.0};
        return {1.0 + b / (2.0 * r), -b * z * z / (2.0 * r * r * r)};
    };
    parts.poly = {Polyharmonicity::NonPolyharmonic, 0};
    parts.flags = ClassFlags{};
    parts.excluded = [b](Cplx z) { return std::abs(std::abs(z) + b) < 1e-12; };
    return Activation(std::move(parts));
}

Activation make_cardioid(const ParamMap& p) {
    check_known("cardioid", p, {});
    Activation::Parts parts;
    parts.name = "cardioid";
    parts.eval = [](Cplx z) -> Cplx {
        const double r = std::abs(z);
        if (r == 0.0) return 0.0;
        return 0.5 * (1.0 + z.real() / r) * z;
    };
    parts.first = [](Cplx z) -> FirstWirtinger {
        const double r = std::abs(z);
        const Cplx u = z / r;
        return {0.5 + std::conj(u) / 8.0 + 3.0 * u / 8.0, -u * u * u / 8.0 + u / 8.0};
    };
    parts.poly = {Polyharmonicity::NonPolyharmonic, 0};
    parts.flags = ClassFlags{};
    parts.excluded = [](Cplx z) { return z == Cplx{}; };
    return Activation(std::move(parts));
}

Activation make_exp(const ParamMap& p) {
    check_known("exp", p, {});
    Activation::Parts parts;
    parts.name = "exp";
    parts.eval = [](Cplx z) { return std::exp(z); };
    parts.first = [](Cplx z) -> FirstWirtinger { return {std::exp(z), 0.0}; };
    parts.second = [](Cplx z) -> SecondWirtinger { return {std::exp(z), 0.0, 0.0}; };
    parts.poly = {Polyharmonicity::Polyharmonic, 1};
    parts.flags = ClassFlags{true, false, false};
    return Activation(std::move(parts));
}

Activation make_antiholo_exp(const ParamMap& p) {
    check_known("antiholo_exp", p, {});
    Activation::Parts parts;
    parts.name = "antiholo_exp";
    parts.eval = [](Cplx z) { return std::exp(std::conj(z)); };
    parts.first = [](Cplx z) -> FirstWirtinger { return {0.0, std::exp(std::conj(z))}; };
    parts.second = [](Cplx z) -> SecondWirtinger { return {0.0, 0.0, std::exp(std::conj(z))}; };
    parts.poly = {Polyharmonicity::Polyharmonic, 1};
    parts.flags = ClassFlags{false, true, false};
    return Activation(std::move(parts));
}

Activation make_r_affine(const ParamMap& p) {
    check_known("r_affine", p, {"a_re", "a_im", "b_re", "b_im", "c_re", "c_im"});
    const Cplx a = cparam(p, "a", 1.0), b = cparam(p, "b", 0.0), c = cparam(p, "c", 0.0);
    Activation::Parts parts;
    parts.name = "r_affine";
    parts.params = {{"a_re", a.real()}, {"a_im", a.imag()}, {"b_re", b.real()},
                    {"b_im", b.imag()}, {"c_re", c.real()}, {"c_im", c.imag()}};
    parts.eval = [a, b, c](Cplx z) { return a * z + b * std::conj(z) + c; };
    parts.first = [a, b](Cplx) -> FirstWirtinger { return {a, b}; };
    parts.second = [](Cplx) -> SecondWirtinger { return {0.0, 0.0, 0.0}; };
    parts.poly = {Polyharmonicity::Polyharmonic, 1};
    parts.flags = ClassFlags{b == Cplx{}, a == Cplx{}, true};
    return Activation(std::move(parts));
}

// a z^2 + b z zbar + c zbar^2 + d z + e zbar + f
struct Quadratic {
    Cplx a, b, c, d, e, f;
};

Activation make_quadratic_named(std::string name, ParamMap shown, const Quadratic& q) {
    Activation::Parts parts;
    parts.name = std::move(name);
    parts.params = std::move(shown);
    parts.eval = [q](Cplx z) {
        const Cplx w = std::conj(z);
        return q.a * z * z + q.b * z * w + q.c * w * w + q.d * z + q.e * w + q.f;
    };
    parts.first = [q](Cplx z) -> FirstWirtinger {
        const Cplx w = std::conj(z);
        return {2.0 * q.a * z + q.b * w + q.d, q.b * z + 2.0 * q.c * w + q.e};
    };
    parts.second = [q](Cplx) -> SecondWirtinger { return {2.0 * q.a, q.b, 2.0 * q.c}; };
    const bool affine = q.a == Cplx{} && q.b == Cplx{} && q.c == Cplx{};
    parts.poly = {Polyharmonicity::Polyharmonic, q.b == Cplx{} ? 1 : 2};
    parts.flags = ClassFlags{q.b == Cplx{} && q.c == Cplx{} && q.e == Cplx{},
                             q.a == Cplx{} && q.b == Cplx{} && q.d == Cplx{}, affine};
    const bool real = q.f.imag() == 0.0 && q.b.imag() == 0.0 && q.c == std::conj(q.a) && q.e == std::conj(q.d);
    parts.real_valued = real;
    return Activation(std::move(parts));
}

Activation make_quadratic(const ParamMap& p) {
    check_known("quadratic", p,
                {"a_re", "a_im", "b_re", "b_im", "c_re", "c_im", "d_re", "d_im", "e_re", "e_im", "f_re", "f_im"});
    Quadratic q{cparam(p, "a", 0.0), cparam(p, "b", 0.0), cparam(p, "c", 0.0),
                cparam(p, "d", 0.0), cparam(p, "e", 0.0), cparam(p, "f", 0.0)};
    ParamMap shown;
    auto put = [&](const char* k, Cplx v) {
        shown[std::string(k) + "_re"] = v.real();
        shown[std::string(k) + "_im"] = v.imag();
    };
    put("a", q.a), put("b", q.b), put("c", q.c), put("d", q.d), put("e", q.e), put("f", q.f);
    return make_quadratic_named("quadratic", std::move(shown), q);
}

template <class Phi, class D1, class D2>
Activation make_re_family(std::string name, Phi phi, D1 dphi, D2 ddphi) {
    Activation::Parts parts;
    parts.name = std::move(name);
    parts.eval = [phi](Cplx z) -> Cplx { return phi(z.real()); };
    parts.first = [dphi](Cplx z) -> FirstWirtinger {
        const double g = 0.5 * dphi(z.real());
        return {g, g};
    };
    parts.second = [ddphi](Cplx z) -> SecondWirtinger {
        const double g = 0.25 * ddphi(z.real());
        return {g, g, g};
    };
    parts.poly = {Polyharmonicity::NonPolyharmonic, 0};
    parts.flags = ClassFlags{};
    parts.real_valued = true;
    return Activation(std::move(parts));
}

Activation make_nowhere_diff(const ParamMap& p) {
    check_known("nowhere_diff", p, {"K"});
    const double kd = param(p, "K", 20.0);
    if (kd < 0.0 || kd != std::floor(kd) || kd > 40.0)
        throw InvalidArgument("nowhere_diff needs an integer K in [0,40]");
    const int k = static_cast<int>(kd);
    Activation::Parts parts;
    parts.name = "nowhere_diff";
    parts.params = {{"K", kd}};
    parts.eval = [k](Cplx z) {
        const Cplx w{weierstrass(z.real(), k), weierstrass(z.imag(), k)};
        return std::sin(z) + w * std::exp(-z);
    };
    parts.poly = {Polyharmonicity::NonPolyharmonic, 0};
    parts.flags = ClassFlags{};
    return Activation(std::move(parts));
}

}  // namespace

Activation::Activation(Parts parts) : p_(std::make_shared<const Parts>(std::move(parts))) {
    if (!p_->eval) throw InvalidArgument("activation needs an evaluation function");
}

std::optional<FirstWirtinger> Activation::analytic_first(Cplx z) const {
    if (!p_->first || excluded(z)) return std::nullopt;
    return p_->first(z);
}

std::optional<SecondWirtinger> Activation::analytic_second(Cplx z) const {
    if (!p_->second || excluded(z)) return std::nullopt;
    return p_->second(z);
}

double weierstrass(double x, int terms, double a, double b) {
    double s = 0.0, ak = 1.0, bk = 1.0;
    for (int k = 0; k <= terms; ++k) {
        s += ak * std::cos(bk * std::numbers::pi * x);
        ak *= a;
        bk *= b;
    }
    return s;
}

Activation get_activation(const std::string& name, const ParamMap& params) {
    if (name.rfind("conj:", 0) == 0) return conjugated(get_activation(name.substr(5), params));
    if (name == "modrelu") return make_modrelu(params);
    if (name == "cardioid") return make_cardioid(params);
    if (name == "exp" || name == "holo_exp") return make_exp(params);
    if (name == "antiholo_exp" || name == "exp_conj") return make_antiholo_exp(params);
    if (name == "r_affine") return make_r_affine(params);
    if (name == "quadratic") return make_quadratic(params);
    if (name == "re_square") {
        check_known(name, params, {});
        return make_quadratic_named(name, {}, {0.25, 0.5, 0.25, 0.0, 0.0, 0.0});
    }
    if (name == "abs_square") {
        check_known(name, params, {});
        return make_quadratic_named(name, {}, {0.0, 1.0, 0.0, 0.0, 0.0, 0.0});
    }
    if (name == "z_plus_zbar_sq") {
        check_known(name, params, {});
        return make_quadratic_named(name, {}, {0.0, 0.0, 1.0, 1.0, 0.0, 0.0});
    }
    if (name == "exp_re") {
        check_known(name, params, {});
        auto e = [](double x) { return std::exp(x); };
        return make_re_family(name, e, e, e);
    }
    if (name == "tanh_re") {
        check_known(name, params, {});
        return make_re_family(
            name, [](double x) { return std::tanh(x); },
            [](double x) {
                const double t = std::tanh(x);
                return 1.0 - t * t;
            },
            [](double x) {
                const double t = std::tanh(x);
                return -2.0 * t * (1.0 - t * t);
            });
    }
    if (name == "nowhere_diff") return make_nowhere_diff(params);
    throw Error("UNKNOWN_ACTIVATION", fmt::format("unknown activation '{}'", name));
}

Cplx eval_activation(const Activation& act, Cplx z) { return act(z); }

Activation conjugated(const Activation& act) {
    Activation::Parts parts;
    parts.name = "conj:" + act.name();
    parts.params = act.params();
    parts.eval = [act](Cplx z) { return std::conj(act(z)); };
    if (act.has_analytic_first())
        parts.first = [act](Cplx z) -> FirstWirtinger {
            auto f = act.analytic_first(z).value_or(FirstWirtinger{});
            return {std::conj(f.dbar), std::conj(f.d)};
        };
    if (act.has_analytic_second())
        parts.second = [act](Cplx z) -> SecondWirtinger {
            auto s = act.analytic_second(z).value_or(SecondWirtinger{});
            return {std::conj(s.dbar2), std::conj(s.ddbar), std::conj(s.d2)};
        };
    parts.poly = act.poly_flag();
    if (auto f = act.class_flags()) parts.flags = ClassFlags{f->antiholomorphic, f->holomorphic, f->r_affine};
    parts.excluded = [act](Cplx z) { return act.excluded(z); };
    parts.real_valued = act.real_valued();
    return Activation(std::move(parts));
}

Activation scaled(const Activation& act, Cplx c) {
    if (c == Cplx{}) throw InvalidArgument("scale factor must be nonzero");
    Activation::Parts parts;
    parts.name = fmt::format("{}*({},{})", act.name(), c.real(), c.imag());
    parts.params = act.params();
    parts.eval = [act, c](Cplx z) { return c * act(z); };
    if (act.has_analytic_first())
        parts.first = [act, c](Cplx z) -> FirstWirtinger {
            auto f = act.analytic_first(z).value_or(FirstWirtinger{});
            return {c * f.d, c * f.dbar};
        };
    if (act.has_analytic_second())
        parts.second = [act, c](Cplx z) -> SecondWirtinger {
            auto s = act.analytic_second(z).value_or(SecondWirtinger{});
            return {c * s.d2, c * s.ddbar, c * s.dbar2};
        };
    parts.poly = act.poly_flag();
    parts.flags = act.class_flags();
    parts.excluded = [act](Cplx z) { return act.excluded(z); };
    parts.real_valued = act.real_valued() && c.imag() == 0.0;
    return Activation(std::move(parts));
}

Activation custom_activation(std::string name, Activation::Fn fn) {
    Activation::Parts parts;
    parts.name = std::move(name);
    parts.eval = std::move(fn);
    return Activation(std::move(parts));
}

}  // namespace cvnn
