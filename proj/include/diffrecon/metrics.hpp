#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "diffrecon/image.hpp"

namespace diffrecon {

/// Peak signal-to-noise ratio in dB; +inf when the images are identical.
inline double psnr(const RealImage& ref, const RealImage& test, double data_range = 1.0) {
    if (!ref.same_shape(test)) throw std::invalid_argument("psnr: shape mismatch");
    if (!(data_range > 0.0)) throw std::invalid_argument("psnr: data_range must be positive");
    double mse = 0.0;
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
        const double d = ref.data[i] - test.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(ref.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

struct SsimOptions {
    int window = 7;          // uniform window side
    bool gaussian = false;   // 11x11 Gaussian window, sigma 1.5
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean local structural similarity over sliding windows that lie fully
/// inside the image. Symmetric in its arguments.
inline double ssim(const RealImage& ref, const RealImage& test, double data_range = 1.0,
                   const SsimOptions& opt = {}) {
    if (!ref.same_shape(test)) throw std::invalid_argument("ssim: shape mismatch");
    if (!(data_range > 0.0)) throw std::invalid_argument("ssim: data_range must be positive");

    const int win = opt.gaussian ? 11 : opt.window;
    if (ref.height < win || ref.width < win)
        throw std::invalid_argument("ssim: image smaller than window");

    std::vector<double> weights(static_cast<std::size_t>(win) * win,
                                1.0 / (static_cast<double>(win) * win));
    if (opt.gaussian) {
        const double sigma = 1.5;
        const int c = win / 2;
        double total = 0.0;
        for (int y = 0; y < win; ++y)
            for (int x = 0; x < win; ++x) {
                const double g = std::exp(-((y - c) * (y - c) + (x - c) * (x - c)) / (2 * sigma * sigma));
                weights[static_cast<std::size_t>(y) * win + x] = g;
                total += g;
            }
        for (double& v : weights) v /= total;
    }

    const double c1 = (opt.k1 * data_range) * (opt.k1 * data_range);
    const double c2 = (opt.k2 * data_range) * (opt.k2 * data_range);

    double acc = 0.0;
    std::size_t count = 0;
    for (int y0 = 0; y0 + win <= ref.height; ++y0)
        for (int x0 = 0; x0 + win <= ref.width; ++x0) {
            double mx = 0.0, my = 0.0;
            for (int dy = 0; dy < win; ++dy)
                for (int dx = 0; dx < win; ++dx) {
                    const double wgt = weights[static_cast<std::size_t>(dy) * win + dx];
                    mx += wgt * ref.at(y0 + dy, x0 + dx);
                    my += wgt * test.at(y0 + dy, x0 + dx);
                }
            double vx = 0.0, vy = 0.0, vxy = 0.0;
            for (int dy = 0; dy < win; ++dy)
                for (int dx = 0; dx < win; ++dx) {
                    const double wgt = weights[static_cast<std::size_t>(dy) * win + dx];
                    const double ax = ref.at(y0 + dy, x0 + dx) - mx;
                    const double ay = test.at(y0 + dy, x0 + dx) - my;
                    vx += wgt * ax * ax;
                    vy += wgt * ay * ay;
                    vxy += wgt * ax * ay;
                }
            acc += ((2.0 * mx * my + c1) * (2.0 * vxy + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return acc / static_cast<double>(count);
}

/// Batch metric summary in Table style: per-image values plus mean and
/// population standard deviation.
struct MetricReport {
    std::vector<double> psnr_values;
    std::vector<double> ssim_values;
    double psnr_mean = 0.0, psnr_std = 0.0;
    double ssim_mean = 0.0, ssim_std = 0.0;

    std::size_t count() const { return psnr_values.size(); }
};

namespace detail {

inline std::pair<double, double> mean_and_std(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    bool all_same = true;
    for (double x : v)
        if (x != v.front()) all_same = false;
    if (all_same) return {v.front(), 0.0};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / n)};
}

}  // namespace detail

inline MetricReport evaluate_batch(const std::vector<std::pair<RealImage, RealImage>>& pairs,
                                   double data_range = 1.0, const SsimOptions& opt = {}) {
    if (pairs.empty()) throw std::invalid_argument("evaluate_batch: empty input");
    MetricReport r;
    for (const auto& [ref, test] : pairs) {
        r.psnr_values.push_back(psnr(ref, test, data_range));
        r.ssim_values.push_back(ssim(ref, test, data_range, opt));
    }
    std::tie(r.psnr_mean, r.psnr_std) = detail::mean_and_std(r.psnr_values);
    std::tie(r.ssim_mean, r.ssim_std) = detail::mean_and_std(r.ssim_values);
    return r;
}

}  // namespace diffrecon
