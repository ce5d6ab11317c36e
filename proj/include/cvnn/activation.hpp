#pragma once

#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>

namespace cvnn {

using Cplx = std::complex<double>;
using ParamMap = std::map<std::string, double>;

struct FirstWirtinger {
    Cplx d;
    Cplx dbar;
};

struct SecondWirtinger {
    Cplx d2;
    Cplx ddbar;
    Cplx dbar2;
};

enum class Polyharmonicity { Unknown, Polyharmonic, NonPolyharmonic };

struct PolyFlag {
    Polyharmonicity kind = Polyharmonicity::Unknown;
    int order = 0;  // only meaningful for Polyharmonic
};

struct ClassFlags {
    bool holomorphic = false;
    bool antiholomorphic = false;
    bool r_affine = false;
};

// A named activation with optional closed-form data. Cheap to copy; the
// callables are shared and immutable.
class Activation {
public:
    using Fn = std::function<Cplx(Cplx)>;
    using FirstFn = std::function<FirstWirtinger(Cplx)>;
    using SecondFn = std::function<SecondWirtinger(Cplx)>;
    using Region = std::function<bool(Cplx)>;

    struct Parts {
        std::string name;
        ParamMap params;
        Fn eval;
        FirstFn first;    // may be empty
        SecondFn second;  // may be empty
        PolyFlag poly;
        std::optional<ClassFlags> flags;
        Region excluded;  // may be empty
        bool real_valued = false;
    };

    explicit Activation(Parts parts);

    const std::string& name() const { return p_->name; }
    const ParamMap& params() const { return p_->params; }

    Cplx operator()(Cplx z) const { return p_->eval(z); }

    bool has_analytic_first() const { return static_cast<bool>(p_->first); }
    bool has_analytic_second() const { return static_cast<bool>(p_->second); }
    // Returns nullopt when no formula is known or z lies in the excluded set.
    std::optional<FirstWirtinger> analytic_first(Cplx z) const;
    std::optional<SecondWirtinger> analytic_second(Cplx z) const;

    const PolyFlag& poly_flag() const { return p_->poly; }
    const std::optional<ClassFlags>& class_flags() const { return p_->flags; }
    bool excluded(Cplx z) const { return p_->excluded && p_->excluded(z); }
    bool real_valued() const { return p_->real_valued; }

private:
    std::shared_ptr<const Parts> p_;
};

// Zoo lookup. Names: modrelu(b), cardioid, exp, antiholo_exp, r_affine,
// quadratic, re_square, abs_square, z_plus_zbar_sq, exp_re, tanh_re,
// nowhere_diff(K). A "conj:" prefix yields the conjugated activation.
Activation get_activation(const std::string& name, const ParamMap& params = {});

Cplx eval_activation(const Activation& act, Cplx z);

// z -> conj(act(z)), with analytic data carried over.
Activation conjugated(const Activation& act);

// z -> c * act(z), c != 0. Named "<name>*c" and not serializable.
Activation scaled(const Activation& act, Cplx c);

// Ad-hoc activation for experiments; carries no analytic data.
Activation custom_activation(std::string name, Activation::Fn fn);

// Truncated Weierstrass sum sum_{k<=terms} a^k cos(b^k pi x).
double weierstrass(double x, int terms, double a = 0.5, double b = 7.0);

}  // namespace cvnn
