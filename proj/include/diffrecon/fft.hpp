#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include "diffrecon/image.hpp"

namespace diffrecon {

namespace detail {

using cplx = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 transform, unnormalized.
/// sign = -1 gives the forward kernel exp(-2*pi*i*jk/n).
inline void fft_pow2(std::vector<cplx>& a, int sign) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * M_PI / static_cast<double>(len);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

/// Arbitrary-length transform via Bluestein's chirp-z identity,
/// built on power-of-two FFT convolution. Unnormalized.
inline void fft_bluestein(std::vector<cplx>& a, int sign) {
    const std::size_t n = a.size();
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;

    // chirp b[j] = exp(sign * i * pi * j^2 / n); j^2 taken mod 2n keeps
    // the phase argument small enough for full double precision.
    std::vector<cplx> chirp(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::uint64_t j2 = (static_cast<std::uint64_t>(j) * j) % (2 * n);
        const double ang = sign * M_PI * static_cast<double>(j2) / static_cast<double>(n);
        chirp[j] = cplx(std::cos(ang), std::sin(ang));
    }

    std::vector<cplx> fa(m, cplx(0.0, 0.0)), fb(m, cplx(0.0, 0.0));
    for (std::size_t j = 0; j < n; ++j) fa[j] = a[j] * chirp[j];
    fb[0] = std::conj(chirp[0]);
    for (std::size_t j = 1; j < n; ++j) fb[j] = fb[m - j] = std::conj(chirp[j]);

    fft_pow2(fa, -1);
    fft_pow2(fb, -1);
    for (std::size_t j = 0; j < m; ++j) fa[j] *= fb[j];
    fft_pow2(fa, +1);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t j = 0; j < n; ++j) a[j] = fa[j] * inv_m * chirp[j];
}

inline void fft_any(std::vector<cplx>& a, int sign) {
    if (is_pow2(a.size()))
        fft_pow2(a, sign);
    else
        fft_bluestein(a, sign);
}

/// Centered unitary 2-D transform shared by both directions.
/// Index remapping realizes ifftshift on input and fftshift on output,
/// which places the zero frequency at (H/2, W/2).
inline ComplexImage dft2_impl(const ComplexImage& img, int sign) {
    if (!all_finite(img)) throw std::invalid_argument("dft2: non-finite input");
    const int h = img.height, w = img.width;
    const int cy = h / 2, cx = w / 2;

    ComplexImage tmp(h, w);
    std::vector<cplx> row(w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) row[x] = img.at(y, (x + cx) % w);
        fft_any(row, sign);
        for (int x = 0; x < w; ++x) tmp.at(y, (x + cx) % w) = row[x];
    }

    ComplexImage out(h, w);
    const double scale = 1.0 / std::sqrt(static_cast<double>(h) * w);
    std::vector<cplx> col(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) col[y] = tmp.at((y + cy) % h, x);
        fft_any(col, sign);
        for (int y = 0; y < h; ++y) out.at((y + cy) % h, x) = col[y] * scale;
    }
    return out;
}

}  // namespace detail

/// Orthonormal 2-D DFT with the zero frequency at the grid center.
/// Energy-preserving: ||dft2_centered(x)|| == ||x||.
inline ComplexImage dft2_centered(const ComplexImage& img) { return detail::dft2_impl(img, -1); }

/// Exact inverse of dft2_centered.
inline ComplexImage idft2_centered(const ComplexImage& k) { return detail::dft2_impl(k, +1); }

}  // namespace diffrecon
