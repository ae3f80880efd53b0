#pragma once

#include "diffrecon/fft.hpp"
#include "diffrecon/masks.hpp"
#include "diffrecon/random.hpp"

namespace diffrecon {

/// Masked k-space measurement b = A y + e. Entries outside the mask are
/// exactly zero.
struct KSpaceMeasurement {
    ComplexImage kdata;
    SamplingMask mask;
    double noise_std = 0.0;
};

/// Single-coil measurement operator A = P F with unit sensitivity.
/// With the orthonormal centered DFT, A A* is the identity on the sampled
/// subspace and A* A is an orthogonal projection.
struct MeasurementOp {
    SamplingMask mask;

    explicit MeasurementOp(SamplingMask m) : mask(std::move(m)) {}

    int height() const { return mask.height; }
    int width() const { return mask.width; }
};

namespace detail {

inline void check_op_shape(const MeasurementOp& op, int h, int w, const char* what) {
    if (op.height() != h || op.width() != w)
        throw std::invalid_argument(std::string(what) + ": operator/image shape mismatch");
}

inline void zero_unsampled(const SamplingMask& mask, ComplexImage& k) {
    for (std::size_t i = 0; i < k.data.size(); ++i)
        if (!mask.keep[i]) k.data[i] = {0.0, 0.0};
}

}  // namespace detail

inline ComplexImage apply_A(const MeasurementOp& op, const ComplexImage& y) {
    detail::check_op_shape(op, y.height, y.width, "apply_A");
    ComplexImage k = dft2_centered(y);
    detail::zero_unsampled(op.mask, k);
    return k;
}

inline ComplexImage apply_A_star(const MeasurementOp& op, const ComplexImage& k) {
    detail::check_op_shape(op, k.height, k.width, "apply_A_star");
    ComplexImage masked = k;
    detail::zero_unsampled(op.mask, masked);
    return idft2_centered(masked);
}

/// Simulated acquisition b = A y + e. The noise e is circularly symmetric
/// complex Gaussian with per-entry standard deviation noise_std, applied to
/// sampled entries only.
inline KSpaceMeasurement undersample(const MeasurementOp& op, const RealImage& y_true,
                                     double noise_std, RandomSource& rng) {
    detail::check_op_shape(op, y_true.height, y_true.width, "undersample");
    if (noise_std < 0.0) throw std::invalid_argument("undersample: noise_std must be >= 0");

    KSpaceMeasurement b;
    b.kdata = apply_A(op, to_complex(y_true));
    b.mask = op.mask;
    b.noise_std = noise_std;
    if (noise_std > 0.0) {
        const double s = noise_std / std::sqrt(2.0);
        for (std::size_t i = 0; i < b.kdata.data.size(); ++i)
            if (op.mask.keep[i]) b.kdata.data[i] += std::complex<double>(s * rng.normal(), s * rng.normal());
    }
    return b;
}

/// Zero-filled reconstruction: Re A* b. This is the conditioning image the
/// denoiser sees and the weakest baseline.
inline RealImage zero_fill(const MeasurementOp& op, const KSpaceMeasurement& b) {
    return real_part(apply_A_star(op, b.kdata));
}

inline RealImage zero_fill(const KSpaceMeasurement& b) {
    return zero_fill(MeasurementOp(b.mask), b);
}

namespace detail {

inline void check_measurement(const MeasurementOp& op, const KSpaceMeasurement& b,
                              const char* what) {
    if (b.kdata.height != op.height() || b.kdata.width != op.width())
        throw std::invalid_argument(std::string(what) + ": measurement/operator shape mismatch");
}

}  // namespace detail

/// Data-consistency correction in the complex domain:
///   y' = y - step * A*(A y - b).
/// The k-space residual on sampled entries contracts by exactly (1 - step).
inline ComplexImage dc_update_complex(const MeasurementOp& op, const ComplexImage& y,
                                      const KSpaceMeasurement& b, double step) {
    detail::check_op_shape(op, y.height, y.width, "dc_update");
    detail::check_measurement(op, b, "dc_update");
    if (step < 0.0 || step > 1.0) throw std::invalid_argument("dc_update: step must be in [0,1]");

    ComplexImage k = apply_A(op, y);
    for (std::size_t i = 0; i < k.data.size(); ++i) k.data[i] -= b.kdata.data[i];
    const ComplexImage corr = apply_A_star(op, k);
    ComplexImage out = y;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= step * corr.data[i];
    return out;
}

/// Real-image data-consistency update y' = y - step * Re{A*(A y - b)}.
inline RealImage dc_update(const MeasurementOp& op, const RealImage& y,
                           const KSpaceMeasurement& b, double step) {
    return real_part(dc_update_complex(op, to_complex(y), b, step));
}

/// ||A y - b||_2 over sampled entries.
inline double residual_norm(const MeasurementOp& op, const ComplexImage& y,
                            const KSpaceMeasurement& b) {
    detail::check_op_shape(op, y.height, y.width, "residual_norm");
    detail::check_measurement(op, b, "residual_norm");
    ComplexImage k = apply_A(op, y);
    double s = 0.0;
    for (std::size_t i = 0; i < k.data.size(); ++i)
        if (op.mask.keep[i]) s += std::norm(k.data[i] - b.kdata.data[i]);
    return std::sqrt(s);
}

inline double residual_norm(const MeasurementOp& op, const RealImage& y,
                            const KSpaceMeasurement& b) {
    return residual_norm(op, to_complex(y), b);
}

}  // namespace diffrecon
