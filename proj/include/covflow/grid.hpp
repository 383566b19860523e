#pragma once

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace covflow {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using rvec = std::vector<double>;

inline constexpr cplx I{0.0, 1.0};

// Periodic box [-L, L)^dim with N points per axis, row-major, axis 0 slowest.
struct GridSpec {
    int dim = 2;
    double half_width = 8.0;
    int points = 64;

    double spacing() const { return 2.0 * half_width / points; }
    double cell_volume() const { return std::pow(spacing(), dim); }

    std::size_t size() const {
        std::size_t n = 1;
        for (int d = 0; d < dim; ++d) n *= static_cast<std::size_t>(points);
        return n;
    }

    double coord(int j) const { return -half_width + j * spacing(); }

    void validate() const {
        if (dim != 2 && dim != 3)
            throw std::invalid_argument("grid: dim must be 2 or 3, got " + std::to_string(dim));
        if (!(half_width > 0.0) || !std::isfinite(half_width))
            throw std::invalid_argument("grid: half_width must be positive");
        if (points < 2 || points % 2 != 0)
            throw std::invalid_argument("grid: points per axis must be a positive even integer, got " +
                                        std::to_string(points));
    }

    bool operator==(const GridSpec&) const = default;
};

struct ComplexField {
    GridSpec grid;
    cvec values;

    ComplexField() = default;
    explicit ComplexField(const GridSpec& g) : grid(g), values(g.size()) {}
    ComplexField(const GridSpec& g, cvec v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.size()) throw std::invalid_argument("field: sample count != N^dim");
    }
};

struct RealVectorField {
    GridSpec grid;
    std::vector<rvec> components;

    RealVectorField() = default;
    explicit RealVectorField(const GridSpec& g)
        : grid(g), components(static_cast<std::size_t>(g.dim), rvec(g.size(), 0.0)) {}
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
    if (!(a == b)) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

inline bool all_finite(const cvec& v) {
    return std::all_of(v.begin(), v.end(),
                       [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

inline bool all_finite(const rvec& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Calls fn(flat_index, x) for each grid point; x has dim valid entries.
template <class Fn>
void for_each_point(const GridSpec& g, Fn&& fn) {
    const int n = g.points;
    std::array<double, 3> x{0.0, 0.0, 0.0};
    std::size_t idx = 0;
    if (g.dim == 2) {
        for (int i = 0; i < n; ++i) {
            x[0] = g.coord(i);
            for (int j = 0; j < n; ++j, ++idx) {
                x[1] = g.coord(j);
                fn(idx, x);
            }
        }
    } else {
        for (int i = 0; i < n; ++i) {
            x[0] = g.coord(i);
            for (int j = 0; j < n; ++j) {
                x[1] = g.coord(j);
                for (int k = 0; k < n; ++k, ++idx) {
                    x[2] = g.coord(k);
                    fn(idx, x);
                }
            }
        }
    }
}

inline rvec coordinates(const GridSpec& g, int axis) {
    g.validate();
    if (axis < 0 || axis >= g.dim)
        throw std::out_of_range("coordinates: axis " + std::to_string(axis) + " out of range");
    rvec out(g.size());
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) { out[i] = x[axis]; });
    return out;
}

inline rvec radius_squared(const GridSpec& g) {
    rvec out(g.size());
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        double r2 = 0.0;
        for (int d = 0; d < g.dim; ++d) r2 += x[d] * x[d];
        out[i] = r2;
    });
    return out;
}

namespace detail {

// In-place, unaligned FFTW plans cached per (dim, N). Planning is serialized;
// execution through fftw_execute_dft on distinct buffers is thread safe.
class FftPlans {
public:
    static FftPlans& instance() {
        static FftPlans p;
        return p;
    }

    std::pair<fftw_plan, fftw_plan> get(int dim, int n) {
        std::lock_guard<std::mutex> lock(mu_);
        auto key = std::make_pair(dim, n);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::size_t total = 1;
        for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(n);
        auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total));
        int dims[3] = {n, n, n};
        unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fftw_plan fwd = fftw_plan_dft(dim, dims, buf, buf, FFTW_FORWARD, flags);
        fftw_plan inv = fftw_plan_dft(dim, dims, buf, buf, FFTW_BACKWARD, flags);
        fftw_free(buf);
        if (!fwd || !inv) throw std::runtime_error("fftw planning failed");
        plans_[key] = {fwd, inv};
        return {fwd, inv};
    }

    ~FftPlans() {
        for (auto& [k, p] : plans_) {
            fftw_destroy_plan(p.first);
            fftw_destroy_plan(p.second);
        }
    }

private:
    std::mutex mu_;
    std::map<std::pair<int, int>, std::pair<fftw_plan, fftw_plan>> plans_;
};

inline fftw_complex* as_fftw(cvec& v) { return reinterpret_cast<fftw_complex*>(v.data()); }

}  // namespace detail

// Unnormalized forward transform.
inline void fft_forward(const GridSpec& g, cvec& data) {
    auto p = detail::FftPlans::instance().get(g.dim, g.points);
    fftw_execute_dft(p.first, detail::as_fftw(data), detail::as_fftw(data));
}

// Inverse transform including the 1/N^dim factor.
inline void fft_inverse(const GridSpec& g, cvec& data) {
    auto p = detail::FftPlans::instance().get(g.dim, g.points);
    fftw_execute_dft(p.second, detail::as_fftw(data), detail::as_fftw(data));
    const double s = 1.0 / static_cast<double>(g.size());
    for (auto& z : data) z *= s;
}

// Angular wavenumbers in FFT order; odd=true zeroes the Nyquist entry.
inline rvec wavenumbers(const GridSpec& g, bool odd) {
    const int n = g.points;
    const double base = std::numbers::pi / g.half_width;
    rvec k(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        int m = i < n / 2 ? i : i - n;
        k[i] = m * base;
    }
    if (odd) k[n / 2] = 0.0;
    return k;
}

template <class Fn>
void for_each_mode(const GridSpec& g, Fn&& fn) {
    const int n = g.points;
    std::array<int, 3> m{0, 0, 0};
    std::size_t idx = 0;
    if (g.dim == 2) {
        for (m[0] = 0; m[0] < n; ++m[0])
            for (m[1] = 0; m[1] < n; ++m[1], ++idx) fn(idx, m);
    } else {
        for (m[0] = 0; m[0] < n; ++m[0])
            for (m[1] = 0; m[1] < n; ++m[1])
                for (m[2] = 0; m[2] < n; ++m[2], ++idx) fn(idx, m);
    }
}

// Raw spectral kernels on sample vectors. grad may be null when only the
// Laplacian is wanted and vice versa.
inline void spectral_derivatives(const GridSpec& g, const cvec& f, std::vector<cvec>* grad, cvec* lap) {
    cvec hat = f;
    fft_forward(g, hat);
    const rvec kodd = wavenumbers(g, true);
    const rvec keven = wavenumbers(g, false);
    if (grad) {
        grad->assign(static_cast<std::size_t>(g.dim), cvec(g.size()));
        for (int d = 0; d < g.dim; ++d) {
            cvec& out = (*grad)[d];
            for_each_mode(g, [&](std::size_t i, const std::array<int, 3>& m) {
                out[i] = I * kodd[m[d]] * hat[i];
            });
            fft_inverse(g, out);
        }
    }
    if (lap) {
        lap->resize(g.size());
        for_each_mode(g, [&](std::size_t i, const std::array<int, 3>& m) {
            double k2 = 0.0;
            for (int d = 0; d < g.dim; ++d) k2 += keven[m[d]] * keven[m[d]];
            (*lap)[i] = -k2 * hat[i];
        });
        fft_inverse(g, *lap);
    }
}

inline std::vector<ComplexField> spectral_gradient(const ComplexField& f) {
    f.grid.validate();
    if (!all_finite(f.values)) throw std::domain_error("spectral_gradient: non-finite input");
    std::vector<cvec> grad;
    spectral_derivatives(f.grid, f.values, &grad, nullptr);
    std::vector<ComplexField> out;
    for (auto& c : grad) out.emplace_back(f.grid, std::move(c));
    return out;
}

inline ComplexField spectral_laplacian(const ComplexField& f) {
    f.grid.validate();
    if (!all_finite(f.values)) throw std::domain_error("spectral_laplacian: non-finite input");
    cvec lap;
    spectral_derivatives(f.grid, f.values, nullptr, &lap);
    return ComplexField(f.grid, std::move(lap));
}

// d/dx_axis of real samples (spectral, Nyquist zeroed).
inline rvec spectral_partial(const GridSpec& g, const rvec& f, int axis) {
    cvec c(f.begin(), f.end());
    fft_forward(g, c);
    const rvec k = wavenumbers(g, true);
    for_each_mode(g, [&](std::size_t i, const std::array<int, 3>& m) { c[i] *= I * k[m[axis]]; });
    fft_inverse(g, c);
    rvec out(g.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c[i].real();
    return out;
}

inline double l2_norm(const GridSpec& g, const cvec& f) {
    double s = 0.0;
    for (const auto& z : f) s += std::norm(z);
    return std::sqrt(g.cell_volume() * s);
}

inline double l2_norm(const ComplexField& f) { return l2_norm(f.grid, f.values); }

inline double weighted_l2_norm(const ComplexField& f, const rvec& w) {
    if (w.size() != f.values.size()) throw std::invalid_argument("weighted_l2_norm: grid mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * w[i] * std::norm(f.values[i]);
    return std::sqrt(f.grid.cell_volume() * s);
}

inline cplx inner_product(const ComplexField& f, const ComplexField& g) {
    require_same_grid(f.grid, g.grid, "inner_product");
    cplx s = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) s += f.values[i] * std::conj(g.values[i]);
    return f.grid.cell_volume() * s;
}

// Norm evaluated from the DFT coefficients.
inline double transform_norm(const ComplexField& f) {
    cvec hat = f.values;
    fft_forward(f.grid, hat);
    double s = 0.0;
    for (const auto& z : hat) s += std::norm(z);
    return std::sqrt(f.grid.cell_volume() * s / static_cast<double>(f.grid.size()));
}

// Fraction of sum |f|^2 located where |x|_inf > frac * L.
inline double boundary_mass_fraction(const GridSpec& g, const cvec& f, double frac = 0.9) {
    const double cut = frac * g.half_width;
    double edge = 0.0, total = 0.0;
    for_each_point(g, [&](std::size_t i, const std::array<double, 3>& x) {
        double m = std::norm(f[i]);
        total += m;
        double xi = 0.0;
        for (int d = 0; d < g.dim; ++d) xi = std::max(xi, std::abs(x[d]));
        if (xi > cut) edge += m;
    });
    return total > 0.0 ? edge / total : 0.0;
}

// 1D band-limited interpolation weight of sample j at position y, with the
// Nyquist mode split symmetrically (cosine), so real data stays real.
inline double trig_weight(const GridSpec& g, double y, int j) {
    const double theta = std::numbers::pi * (y - g.coord(j)) / g.half_width;
    const double half = 0.5 * theta;
    const double sh = std::sin(half);
    if (std::abs(sh) < 1e-14) return 1.0;
    return std::sin(0.5 * g.points * theta) * std::cos(half) / (g.points * sh);
}

inline rvec trig_weights(const GridSpec& g, double y) {
    rvec w(static_cast<std::size_t>(g.points));
    for (int j = 0; j < g.points; ++j) w[j] = trig_weight(g, y, j);
    return w;
}

// Evaluates the trigonometric interpolant of f on the tensor product of
// target coordinates (one list per axis). Result is row-major over targets.
template <class T>
std::vector<T> interpolate_tensor(const GridSpec& g, const std::vector<T>& f,
                                  const std::vector<rvec>& targets) {
    if (static_cast<int>(targets.size()) != g.dim)
        throw std::invalid_argument("interpolate_tensor: need one target list per axis");
    const std::size_t n = static_cast<std::size_t>(g.points);
    std::vector<std::size_t> shape(static_cast<std::size_t>(g.dim), n);
    std::vector<T> cur = f;
    for (int ax = 0; ax < g.dim; ++ax) {
        const rvec& tg = targets[ax];
        const std::size_t m = tg.size();
        std::vector<rvec> w(m);
        for (std::size_t q = 0; q < m; ++q) w[q] = trig_weights(g, tg[q]);
        std::size_t outer = 1, inner = 1;
        for (int d = 0; d < ax; ++d) outer *= shape[d];
        for (int d = ax + 1; d < g.dim; ++d) inner *= shape[d];
        std::vector<T> next(outer * m * inner, T{});
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t q = 0; q < m; ++q) {
                T* dst = &next[(o * m + q) * inner];
                for (std::size_t j = 0; j < n; ++j) {
                    const double wj = w[q][j];
                    const T* src = &cur[(o * n + j) * inner];
                    for (std::size_t r = 0; r < inner; ++r) dst[r] += wj * src[r];
                }
            }
        shape[ax] = m;
        cur = std::move(next);
    }
    return cur;
}

// Interpolant at a single point y (dim entries).
template <class T>
T interpolate_point(const GridSpec& g, const std::vector<T>& f, const double* y) {
    const int n = g.points;
    rvec w0 = trig_weights(g, y[0]);
    rvec w1 = trig_weights(g, y[1]);
    T acc{};
    if (g.dim == 2) {
        for (int i = 0; i < n; ++i) {
            T row{};
            const T* src = &f[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) row += w1[j] * src[j];
            acc += w0[i] * row;
        }
        return acc;
    }
    rvec w2 = trig_weights(g, y[2]);
    for (int i = 0; i < n; ++i) {
        T plane{};
        for (int j = 0; j < n; ++j) {
            T row{};
            const T* src = &f[(static_cast<std::size_t>(i) * n + j) * n];
            for (int k = 0; k < n; ++k) row += w2[k] * src[k];
            plane += w1[j] * row;
        }
        acc += w0[i] * plane;
    }
    return acc;
}

}  // namespace covflow
