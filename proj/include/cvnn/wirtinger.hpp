#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cvnn/activation.hpp"
#include "cvnn/core.hpp"

namespace cvnn {

struct ToleranceProfile {
    double zero_tol = 1e-6;
    double fd_step = 1e-5;  // relative to max(1,|z0|)
    int richardson_levels = 2;
    int polyharmonic_max_order = 4;
    CompactBox probe_box = CompactBox::square(1, -2.0, 2.0);
    GridSpec probe_grid{9};
    // When non-empty these points replace the probe grid.
    std::vector<Cplx> probe_points;
    // Use closed-form derivatives when the activation carries them.
    bool prefer_analytic = true;

    std::vector<Cplx> points() const;
};

struct WirtingerProbe {
    Cplx z0;
    Cplx d;
    Cplx dbar;
    Cplx d2;
    Cplx ddbar;
    Cplx dbar2;
    double est_error = 0.0;
    bool failed = false;
};

struct FirstResult {
    Cplx d;
    Cplx dbar;
    double est_error;
};

struct SecondResult {
    Cplx d2;
    Cplx ddbar;
    Cplx dbar2;
    double est_error;
};

// Second real partials (xx, xy, yy) to (d2, ddbar, dbar2).
SecondWirtinger partials_to_wirtinger(Cplx fxx, Cplx fxy, Cplx fyy);

// Central differences with Richardson extrapolation; throws EvaluationError when
// the activation is non-finite near z0.
FirstResult wirt_first(const Activation& act, Cplx z0, const ToleranceProfile& prof = {});
SecondResult wirt_second(const Activation& act, Cplx z0, const ToleranceProfile& prof = {});
WirtingerProbe probe(const Activation& act, Cplx z0, const ToleranceProfile& prof = {});

struct LaplacianEstimate {
    Cplx value;
    double noise;  // rounding-error bound of the stencil
    bool reliable;
};

LaplacianEstimate laplacian_iterate(const Activation& act, Cplx z0, int order, const ToleranceProfile& prof = {});

struct TaylorReport {
    int order;
    std::vector<double> radii;
    std::vector<double> ratios;  // max |remainder| / r^order per radius
    bool pass;
};

TaylorReport taylor_remainder_probe(const Activation& act, Cplx z0, int order, const ToleranceProfile& prof = {});

// First derivatives with preference for analytic data.
FirstWirtinger first_derivatives(const Activation& act, Cplx z0, const ToleranceProfile& prof);
SecondWirtinger second_derivatives(const Activation& act, Cplx z0, const ToleranceProfile& prof);

struct PointProbe {
    Cplx z0;
    Cplx d;
    Cplx dbar;
    double est_error;
    bool taylor_pass;
};

// First-order data on every probe point that is finite there.
std::vector<PointProbe> scan_first(const Activation& act, const ToleranceProfile& prof);

std::optional<Cplx> find_active_point(const Activation& act, const ToleranceProfile& prof = {});

enum class SecondWhich { ZZbar, Z2, Zbar2 };
std::string to_string(SecondWhich w);

struct SecondPoint {
    Cplx z0;
    SecondWhich which;
};

std::optional<SecondPoint> find_nonzero_second_point(const Activation& act, const ToleranceProfile& prof = {});

// Points where d != 0 == dbar, d == 0 != dbar, or both nonzero, best first.
std::optional<PointProbe> best_identity_point(const Activation& act, const ToleranceProfile& prof);
std::optional<PointProbe> best_conj_point(const Activation& act, const ToleranceProfile& prof);
std::optional<PointProbe> best_pair_point(const Activation& act, const ToleranceProfile& prof);

enum class Verdict {
    NonUniversalHolomorphic,
    NonUniversalAntiholomorphic,
    NonUniversalRAffine,
    Inconclusive,
    UniversalNonPoly_NMplus1,
    UniversalNonPoly_2N2Mplus1,
    UniversalPoly_NMplus4,
    UniversalPoly_2N2Mplus5,
};

std::string to_string(Verdict v);
bool is_universal(Verdict v);
// Width guaranteed by the verdict, 0 when not universal.
std::size_t verdict_width(Verdict v, std::size_t n, std::size_t m);

struct Classification {
    Verdict verdict = Verdict::Inconclusive;
    std::optional<Cplx> witness;
    std::vector<PointProbe> probes;
    bool polyharmonic = false;
    std::string evidence;
    ToleranceProfile tolerances;
};

// Polyharmonicity: analytic flag when present, else the Laplacian heuristic.
bool is_polyharmonic(const Activation& act, const ToleranceProfile& prof);

Classification classify_activation(const Activation& act, std::size_t n = 1, std::size_t m = 1,
                                   const ToleranceProfile& prof = {});

}  // namespace cvnn
