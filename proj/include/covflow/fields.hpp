#pragma once

#include "covflow/grid.hpp"

#include <array>
#include <cmath>
#include <string>

namespace covflow {

enum class PotentialKind { zero, pure_gauge, constant_field, block_field_3d, block_matrix_3d, aharonov_bohm_2d, custom };

inline const char* to_string(PotentialKind k) {
    switch (k) {
        case PotentialKind::zero: return "zero";
        case PotentialKind::pure_gauge: return "pure_gauge";
        case PotentialKind::constant_field: return "constant_field";
        case PotentialKind::block_field_3d: return "block_field_3d";
        case PotentialKind::block_matrix_3d: return "block_matrix_3d";
        case PotentialKind::aharonov_bohm_2d: return "aharonov_bohm_2d";
        case PotentialKind::custom: return "custom";
    }
    return "?";
}

inline PotentialKind potential_kind_from_string(const std::string& s) {
    for (auto k : {PotentialKind::zero, PotentialKind::pure_gauge, PotentialKind::constant_field,
                   PotentialKind::block_field_3d, PotentialKind::block_matrix_3d, PotentialKind::aharonov_bohm_2d,
                   PotentialKind::custom})
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown potential kind '" + s + "'");
}

struct PotentialSpec {
    PotentialKind kind = PotentialKind::zero;
    double strength = 1.0;        // B0 of constant_field
    double core_radius = 0.0;     // rho0 of the singular kinds; 0 selects 4h
    std::string generator = "x1x2";
    RealVectorField samples;      // custom only

    double rho0(const GridSpec& g) const { return core_radius > 0.0 ? core_radius : 4.0 * g.spacing(); }

    bool has_closed_form() const { return kind != PotentialKind::custom; }

    bool is_core_regularized() const {
        return kind == PotentialKind::block_field_3d || kind == PotentialKind::block_matrix_3d ||
               kind == PotentialKind::aharonov_bohm_2d;
    }

    void validate(const GridSpec& g) const {
        g.validate();
        if (!std::isfinite(strength)) throw std::invalid_argument("potential: strength must be finite");
        if (core_radius < 0.0 || !std::isfinite(core_radius))
            throw std::invalid_argument("potential: core_radius must be positive (or 0 for the default 4h)");
        if ((kind == PotentialKind::block_field_3d || kind == PotentialKind::block_matrix_3d) && g.dim != 3)
            throw std::invalid_argument(std::string(to_string(kind)) + " requires dim = 3");
        if (kind == PotentialKind::aharonov_bohm_2d && g.dim != 2)
            throw std::invalid_argument("aharonov_bohm_2d requires dim = 2");
        if (kind == PotentialKind::pure_gauge && generator != "x1x2")
            throw std::invalid_argument("pure_gauge: unknown generator '" + generator + "' (supported: x1x2)");
        if (kind == PotentialKind::custom) {
            if (!(samples.grid == g) || static_cast<int>(samples.components.size()) != g.dim)
                throw std::invalid_argument("custom potential: samples do not match the grid");
            for (const auto& c : samples.components)
                if (!all_finite(c)) throw std::invalid_argument("custom potential: non-finite sample");
        }
    }
};

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

// Gauge generator of pure_gauge, psi(x) = x1 x2.
inline double pure_gauge_generator(const double* x) { return x[0] * x[1]; }

namespace detail {

inline double block_matrix_profile(double rho, double rho0, double* dprofile) {
    if (rho <= rho0) {
        *dprofile = 0.0;
        return 0.5 / (rho0 * rho0);
    }
    const double l = std::log(rho / rho0);
    *dprofile = -2.0 * l / (rho * rho * rho);
    return (0.5 + l) / (rho * rho);
}

}  // namespace detail

// Closed-form A at an arbitrary point (custom: trigonometric interpolation).
inline Vec3 potential_at(const PotentialSpec& s, const GridSpec& g, const double* x) {
    Vec3 a{0.0, 0.0, 0.0};
    switch (s.kind) {
        case PotentialKind::zero: break;
        case PotentialKind::pure_gauge:
            a[0] = x[1];
            a[1] = x[0];
            break;
        case PotentialKind::constant_field:
            a[0] = -0.5 * s.strength * x[1];
            a[1] = 0.5 * s.strength * x[0];
            break;
        case PotentialKind::block_field_3d: {
            const double r0 = s.rho0(g);
            const double q = std::max(x[0] * x[0] + x[1] * x[1] + x[2] * x[2], r0 * r0);
            a[0] = x[0] * x[2] / q;
            a[1] = x[1] * x[2] / q;
            a[2] = -(x[0] * x[0] + x[1] * x[1]) / q;
            break;
        }
        case PotentialKind::block_matrix_3d: {
            double dc;
            const double c = detail::block_matrix_profile(std::hypot(x[0], x[1]), s.rho0(g), &dc);
            a[0] = -x[1] * c;
            a[1] = x[0] * c;
            break;
        }
        case PotentialKind::aharonov_bohm_2d: {
            const double r0 = s.rho0(g);
            const double q = std::max(x[0] * x[0] + x[1] * x[1], r0 * r0);
            a[0] = -x[1] / q;
            a[1] = x[0] / q;
            break;
        }
        case PotentialKind::custom:
            for (int d = 0; d < g.dim; ++d) a[d] = interpolate_point(g, s.samples.components[d], x);
            break;
    }
    return a;
}

// J[j][k] = d_j A^k in closed form.
inline Mat3 jacobian_at(const PotentialSpec& s, const GridSpec& g, const double* x) {
    Mat3 J{};
    switch (s.kind) {
        case PotentialKind::zero: break;
        case PotentialKind::pure_gauge:
            J[0][1] = 1.0;
            J[1][0] = 1.0;
            break;
        case PotentialKind::constant_field:
            J[0][1] = 0.5 * s.strength;
            J[1][0] = -0.5 * s.strength;
            break;
        case PotentialKind::block_field_3d: {
            const double r0 = s.rho0(g);
            const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            const bool core = r2 < r0 * r0;
            const double q = core ? r0 * r0 : r2;
            const double P[3] = {x[0] * x[2], x[1] * x[2], -(x[0] * x[0] + x[1] * x[1])};
            const double DP[3][3] = {{x[2], 0.0, -2.0 * x[0]}, {0.0, x[2], -2.0 * x[1]}, {x[0], x[1], 0.0}};
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k)
                    J[j][k] = DP[j][k] / q - (core ? 0.0 : 2.0 * x[j] * P[k] / (q * q));
            break;
        }
        case PotentialKind::block_matrix_3d: {
            const double rho = std::hypot(x[0], x[1]);
            double dc;
            const double c = detail::block_matrix_profile(rho, s.rho0(g), &dc);
            const double E[3] = {-x[1], x[0], 0.0};
            const double grad_c[3] = {rho > 0.0 ? dc * x[0] / rho : 0.0, rho > 0.0 ? dc * x[1] / rho : 0.0, 0.0};
            const double DE[3][3] = {{0.0, 1.0, 0.0}, {-1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) J[j][k] = DE[j][k] * c + E[k] * grad_c[j];
            break;
        }
        case PotentialKind::aharonov_bohm_2d: {
            const double r0 = s.rho0(g);
            const double r2 = x[0] * x[0] + x[1] * x[1];
            const bool core = r2 < r0 * r0;
            const double q = core ? r0 * r0 : r2;
            const double E[2] = {-x[1], x[0]};
            const double DE[2][2] = {{0.0, 1.0}, {-1.0, 0.0}};
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    J[j][k] = DE[j][k] / q - (core ? 0.0 : 2.0 * x[j] * E[k] / (q * q));
            break;
        }
        case PotentialKind::custom:
            throw std::invalid_argument("closed-form derivatives are not available for custom potentials");
    }
    return J;
}

// B_jk = d_j A^k - d_k A^j. For aharonov_bohm_2d this is the classical field of
// the unregularized potential away from the origin, i.e. zero: the flux is
// concentrated at the origin and only the regularized samples carry it.
inline Mat3 tensor_at(const PotentialSpec& s, const GridSpec& g, const double* x) {
    Mat3 B{};
    if (s.kind == PotentialKind::aharonov_bohm_2d || s.kind == PotentialKind::zero ||
        s.kind == PotentialKind::pure_gauge)
        return B;
    const Mat3 J = jacobian_at(s, g, x);
    for (int j = 0; j < g.dim; ++j)
        for (int k = 0; k < g.dim; ++k) B[j][k] = J[j][k] - J[k][j];
    return B;
}

// Psi^j = sum_k x_k B_jk.
inline Vec3 psi_from_tensor(const Mat3& B, const double* x, int dim) {
    Vec3 p{0.0, 0.0, 0.0};
    for (int j = 0; j < dim; ++j)
        for (int k = 0; k < dim; ++k) p[j] += x[k] * B[j][k];
    return p;
}

inline Vec3 psi_at(const PotentialSpec& s, const GridSpec& g, const double* x) {
    return psi_from_tensor(tensor_at(s, g, x), x, g.dim);
}

inline RealVectorField eval_potential(const PotentialSpec& s, const GridSpec& g) {
    s.validate(g);
    if (s.kind == PotentialKind::custom) return s.samples;
    RealVectorField A(g);
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        Vec3 a = potential_at(s, g, x.data());
        for (int d = 0; d < g.dim; ++d) A.components[d][i] = a[d];
    });
    return A;
}

// div A: closed form for the zoo kinds, spectral for custom samples.
inline rvec potential_divergence(const PotentialSpec& s, const GridSpec& g) {
    s.validate(g);
    rvec div(g.size(), 0.0);
    if (s.kind == PotentialKind::custom) {
        for (int d = 0; d < g.dim; ++d) {
            rvec p = spectral_partial(g, s.samples.components[d], d);
            for (std::size_t i = 0; i < div.size(); ++i) div[i] += p[i];
        }
        return div;
    }
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        Mat3 J = jacobian_at(s, g, x.data());
        double t = 0.0;
        for (int d = 0; d < g.dim; ++d) t += J[d][d];
        div[i] = t;
    });
    return div;
}

struct MagneticTensor {
    GridSpec grid;
    std::vector<rvec> entries;  // entries[j * dim + k] = B_jk

    double at(int j, int k, std::size_t i) const { return entries[static_cast<std::size_t>(j * grid.dim + k)][i]; }
};

enum class TensorMode { analytic, spectral };

inline MagneticTensor magnetic_tensor(const RealVectorField& A) {
    const GridSpec& g = A.grid;
    g.validate();
    const int n = g.dim;
    // D[j][k] = d_j A^k
    std::vector<std::vector<rvec>> D(n, std::vector<rvec>(n));
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) D[j][k] = spectral_partial(g, A.components[k], j);
    MagneticTensor B{g, std::vector<rvec>(static_cast<std::size_t>(n * n), rvec(g.size(), 0.0))};
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            if (j == k) continue;
            rvec& e = B.entries[static_cast<std::size_t>(j * n + k)];
            for (std::size_t i = 0; i < e.size(); ++i) e[i] = D[j][k][i] - D[k][j][i];
        }
    return B;
}

inline MagneticTensor magnetic_tensor(const PotentialSpec& s, const GridSpec& g, TensorMode mode) {
    s.validate(g);
    if (mode == TensorMode::spectral) return magnetic_tensor(eval_potential(s, g));
    if (!s.has_closed_form())
        throw std::invalid_argument("magnetic_tensor: analytic mode requested for a custom potential");
    const int n = g.dim;
    MagneticTensor B{g, std::vector<rvec>(static_cast<std::size_t>(n * n), rvec(g.size(), 0.0))};
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        Mat3 b = tensor_at(s, g, x.data());
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) B.entries[static_cast<std::size_t>(j * n + k)][i] = b[j][k];
    });
    return B;
}

inline double antisymmetry_defect(const MagneticTensor& B) {
    double m = 0.0;
    const int n = B.grid.dim;
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            for (std::size_t i = 0; i < B.grid.size(); ++i) m = std::max(m, std::abs(B.at(j, k, i) + B.at(k, j, i)));
    return m;
}

inline RealVectorField psi_field(const MagneticTensor& B) {
    const GridSpec& g = B.grid;
    RealVectorField P(g);
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        for (int j = 0; j < g.dim; ++j) {
            double s = 0.0;
            for (int k = 0; k < g.dim; ++k) s += x[k] * B.at(j, k, i);
            P.components[j][i] = s;
        }
    });
    return P;
}

inline double sup_norm(const RealVectorField& F) {
    double m = 0.0;
    for (std::size_t i = 0; i < F.grid.size(); ++i) {
        double s = 0.0;
        for (const auto& c : F.components) s += c[i] * c[i];
        m = std::max(m, std::sqrt(s));
    }
    return m;
}

// Time-independent scalar profiles used for V1, V2 and F.
struct ScalarSpec {
    enum class Kind { zero, constant, gaussian } kind = Kind::zero;
    cplx amplitude{0.0, 0.0};
    double width = 1.0;

    bool is_zero() const { return kind == Kind::zero || amplitude == cplx(0.0, 0.0); }

    cplx at(const double* x, int dim) const {
        switch (kind) {
            case Kind::zero: return 0.0;
            case Kind::constant: return amplitude;
            case Kind::gaussian: {
                double r2 = 0.0;
                for (int d = 0; d < dim; ++d) r2 += x[d] * x[d];
                return amplitude * std::exp(-r2 / (width * width));
            }
        }
        return 0.0;
    }

    cvec sample(const GridSpec& g) const {
        cvec v(g.size());
        for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) { v[i] = at(x.data(), g.dim); });
        return v;
    }

    double sup_abs(const GridSpec& g) const {
        double m = 0.0;
        for (const auto& z : sample(g)) m = std::max(m, std::abs(z));
        return m;
    }

    double sup_imag(const GridSpec& g) const {
        double m = 0.0;
        for (const auto& z : sample(g)) m = std::max(m, std::abs(z.imag()));
        return m;
    }

    void validate() const {
        if (!std::isfinite(amplitude.real()) || !std::isfinite(amplitude.imag()))
            throw std::invalid_argument("scalar: amplitude must be finite");
        if (kind == Kind::gaussian && !(width > 0.0)) throw std::invalid_argument("scalar: width must be positive");
    }
};

inline const char* to_string(ScalarSpec::Kind k) {
    switch (k) {
        case ScalarSpec::Kind::zero: return "zero";
        case ScalarSpec::Kind::constant: return "constant";
        case ScalarSpec::Kind::gaussian: return "gaussian";
    }
    return "?";
}

struct HypothesisReport {
    GridSpec grid;
    double sup_xtB = 0.0;
    double M_A = 0.0;
    double transversality_defect = 0.0;
    double kernel_defect = 0.0;
    double M1 = 0.0;
    double M2 = 0.0;
    double N1 = 1.0;
};

inline HypothesisReport hypothesis_report(const PotentialSpec& s, const GridSpec& g, const Vec3& v,
                                          const ScalarSpec& V1, const ScalarSpec& V2, double alpha, double beta) {
    s.validate(g);
    double vn = 0.0;
    for (int d = 0; d < g.dim; ++d) vn += v[d] * v[d];
    if (std::abs(std::sqrt(vn) - 1.0) > 1e-12) throw std::invalid_argument("hypothesis_report: v must be a unit vector");
    if (!(alpha > 0.0) || !(beta > 0.0)) throw std::invalid_argument("hypothesis_report: alpha, beta must be positive");

    HypothesisReport r;
    r.grid = g;
    const MagneticTensor B =
        magnetic_tensor(s, g, s.has_closed_form() ? TensorMode::analytic : TensorMode::spectral);
    const RealVectorField A = eval_potential(s, g);
    r.sup_xtB = sup_norm(psi_field(B));
    r.M_A = 4.0 * r.sup_xtB * r.sup_xtB;
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        double xa = 0.0;
        for (int d = 0; d < g.dim; ++d) xa += x[d] * A.components[d][i];
        r.transversality_defect = std::max(r.transversality_defect, std::abs(xa));
        double kn = 0.0;
        for (int k = 0; k < g.dim; ++k) {
            double c = 0.0;
            for (int j = 0; j < g.dim; ++j) c += v[j] * B.at(j, k, i);
            kn += c * c;
        }
        r.kernel_defect = std::max(r.kernel_defect, std::sqrt(kn));
    });
    r.M1 = V1.sup_abs(g);
    r.N1 = std::exp(V2.sup_imag(g));
    double m2 = 0.0;
    for (double t : {0.0, 0.5, 1.0}) {
        const double c = alpha * t + beta * (1.0 - t);
        for_each_point(g, [&](std::size_t, const std::array<double, 3>& x) {
            const double a = std::abs(V2.at(x.data(), g.dim));
            if (a == 0.0) return;
            double r2 = 0.0;
            for (int d = 0; d < g.dim; ++d) r2 += x[d] * x[d];
            m2 = std::max(m2, std::exp(r2 / (c * c) + std::log(a)));
        });
    }
    r.M2 = m2 * r.N1;
    return r;
}

}  // namespace covflow
