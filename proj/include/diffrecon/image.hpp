#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffrecon {

/// Row-major grid of real scalars. Ground-truth images live in [0,1];
/// intermediate diffusion states are unbounded.
struct RealImage {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    RealImage() = default;

    RealImage(int h, int w, double fill = 0.0) : height(h), width(w) {
        if (h < 1 || w < 1) throw std::invalid_argument("RealImage: dimensions must be positive");
        data.assign(static_cast<std::size_t>(h) * w, fill);
    }

    double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const RealImage& other) const {
        return height == other.height && width == other.width;
    }
};

/// Row-major grid of complex scalars; holds k-space fields and the
/// complex-valued intermediate states of the DC-enforced sampler.
struct ComplexImage {
    int height = 0;
    int width = 0;
    std::vector<std::complex<double>> data;

    ComplexImage() = default;

    ComplexImage(int h, int w, std::complex<double> fill = {0.0, 0.0}) : height(h), width(w) {
        if (h < 1 || w < 1) throw std::invalid_argument("ComplexImage: dimensions must be positive");
        data.assign(static_cast<std::size_t>(h) * w, fill);
    }

    std::complex<double>& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    const std::complex<double>& at(int y, int x) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }

    std::size_t size() const { return data.size(); }
    bool same_shape(const ComplexImage& other) const {
        return height == other.height && width == other.width;
    }
};

inline bool all_finite(const RealImage& img) {
    for (double v : img.data)
        if (!std::isfinite(v)) return false;
    return true;
}

inline bool all_finite(const ComplexImage& img) {
    for (const auto& v : img.data)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
}

inline ComplexImage to_complex(const RealImage& img) {
    ComplexImage out(img.height, img.width);
    for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = {img.data[i], 0.0};
    return out;
}

inline RealImage real_part(const ComplexImage& img) {
    RealImage out(img.height, img.width);
    for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i].real();
    return out;
}

inline RealImage imag_part(const ComplexImage& img) {
    RealImage out(img.height, img.width);
    for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i].imag();
    return out;
}

inline double l2_norm(const RealImage& img) {
    double s = 0.0;
    for (double v : img.data) s += v * v;
    return std::sqrt(s);
}

inline double l2_norm(const ComplexImage& img) {
    double s = 0.0;
    for (const auto& v : img.data) s += std::norm(v);
    return std::sqrt(s);
}

inline double max_abs_diff(const RealImage& a, const RealImage& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace diffrecon
