#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "diffrecon/image.hpp"
#include "diffrecon/masks.hpp"

namespace diffrecon {

/// DMT1 container errors, reported distinctly so callers can tell a foreign
/// file from a damaged one.
struct TensorIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TensorFormatError : TensorIoError {
    using TensorIoError::TensorIoError;
};
struct TensorTruncationError : TensorIoError {
    using TensorIoError::TensorIoError;
};
struct TensorShapeError : TensorIoError {
    using TensorIoError::TensorIoError;
};

enum class TensorDType : std::uint8_t { F32 = 0, F64 = 1, U8 = 2 };

/// In-memory tensor. Values are held as doubles regardless of on-disk dtype;
/// u8 and f32 payloads round-trip exactly through double.
struct Tensor {
    TensorDType dtype = TensorDType::F64;
    bool is_complex = false;  // complex: payload is the real block then the imaginary block
    std::vector<std::uint32_t> dims;
    std::vector<double> re;
    std::vector<double> im;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

namespace detail {

constexpr char kTensorMagic[4] = {'D', 'M', 'T', '1'};
constexpr std::uint8_t kComplexFlag = 0x80;

inline std::size_t dtype_size(TensorDType t) {
    switch (t) {
        case TensorDType::F32: return 4;
        case TensorDType::F64: return 8;
        case TensorDType::U8: return 1;
    }
    throw TensorFormatError("unknown dtype tag");
}

inline void append_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void append_values_le(std::string& out, TensorDType dtype, const std::vector<double>& v) {
    for (double x : v) {
        switch (dtype) {
            case TensorDType::F64: {
                std::uint64_t bits;
                std::memcpy(&bits, &x, 8);
                for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
                break;
            }
            case TensorDType::F32: {
                const float f = static_cast<float>(x);
                std::uint32_t bits;
                std::memcpy(&bits, &f, 4);
                for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
                break;
            }
            case TensorDType::U8:
                out.push_back(static_cast<char>(static_cast<std::uint8_t>(x)));
                break;
        }
    }
}

class ByteReader {
public:
    ByteReader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}

    void read(void* dst, std::size_t n, const char* what) {
        if (pos_ + n > n_)
            throw TensorTruncationError(std::string("truncated tensor file while reading ") + what);
        std::memcpy(dst, p_ + pos_, n);
        pos_ += n;
    }

    std::uint8_t u8(const char* what) {
        std::uint8_t v;
        read(&v, 1, what);
        return v;
    }

    std::uint32_t u32le(const char* what) {
        std::uint8_t b[4];
        read(b, 4, what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    std::size_t remaining() const { return n_ - pos_; }
    std::size_t position() const { return pos_; }

private:
    const std::uint8_t* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

inline std::vector<double> parse_values_le(ByteReader& rd, TensorDType dtype, std::size_t count) {
    std::vector<double> out(count);
    switch (dtype) {
        case TensorDType::F64:
            for (std::size_t i = 0; i < count; ++i) {
                std::uint8_t b[8];
                rd.read(b, 8, "f64 payload");
                std::uint64_t bits = 0;
                for (int j = 0; j < 8; ++j) bits |= static_cast<std::uint64_t>(b[j]) << (8 * j);
                double x;
                std::memcpy(&x, &bits, 8);
                out[i] = x;
            }
            break;
        case TensorDType::F32:
            for (std::size_t i = 0; i < count; ++i) {
                std::uint8_t b[4];
                rd.read(b, 4, "f32 payload");
                std::uint32_t bits = 0;
                for (int j = 0; j < 4; ++j) bits |= static_cast<std::uint32_t>(b[j]) << (8 * j);
                float f;
                std::memcpy(&f, &bits, 4);
                out[i] = static_cast<double>(f);
            }
            break;
        case TensorDType::U8:
            for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<double>(rd.u8("u8 payload"));
            break;
    }
    return out;
}

}  // namespace detail

/// Serializes a tensor to the DMT1 byte layout:
/// magic "DMT1", u8 dtype tag (bit 0x80 marks complex), u8 rank,
/// rank u32 little-endian dims, then the row-major little-endian payload
/// (for complex: real block followed by imaginary block).
inline std::string encode_tensor(const Tensor& t) {
    if (t.dims.empty() || t.dims.size() > 255)
        throw TensorShapeError("tensor rank must be in [1, 255]");
    std::size_t n = 1;
    for (auto d : t.dims) {
        if (d == 0) throw TensorShapeError("zero-sized tensor dimension");
        if (n > SIZE_MAX / d) throw TensorShapeError("tensor shape overflows size_t");
        n *= d;
    }
    if (t.re.size() != n || (t.is_complex ? t.im.size() != n : !t.im.empty()))
        throw TensorShapeError("tensor payload does not match its dims");

    std::string out(detail::kTensorMagic, 4);
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(t.dtype) |
                                    (t.is_complex ? detail::kComplexFlag : 0)));
    out.push_back(static_cast<char>(t.dims.size()));
    for (auto d : t.dims) detail::append_u32_le(out, d);
    detail::append_values_le(out, t.dtype, t.re);
    if (t.is_complex) detail::append_values_le(out, t.dtype, t.im);
    return out;
}

/// Decodes one tensor starting at bytes; trailing data is allowed and
/// consumed reports where the tensor ended (used by container formats that
/// concatenate tensor blocks).
inline Tensor decode_tensor_stream(const std::uint8_t* bytes, std::size_t size,
                                   std::size_t& consumed) {
    detail::ByteReader rd(bytes, size);
    char magic[4];
    rd.read(magic, 4, "magic");
    if (std::memcmp(magic, detail::kTensorMagic, 4) != 0)
        throw TensorFormatError("bad magic bytes (not a DMT1 tensor)");

    const std::uint8_t tag = rd.u8("dtype tag");
    Tensor t;
    t.is_complex = (tag & detail::kComplexFlag) != 0;
    const std::uint8_t dtype_tag = tag & ~detail::kComplexFlag;
    if (dtype_tag > 2) throw TensorFormatError("unknown dtype tag");
    t.dtype = static_cast<TensorDType>(dtype_tag);

    const std::uint8_t rank = rd.u8("rank");
    if (rank == 0) throw TensorShapeError("zero-rank tensor");
    t.dims.resize(rank);
    std::size_t n = 1;
    for (int i = 0; i < rank; ++i) {
        t.dims[i] = rd.u32le("dims");
        if (t.dims[i] == 0) throw TensorShapeError("zero-sized tensor dimension");
        if (n > SIZE_MAX / t.dims[i]) throw TensorShapeError("tensor shape overflows size_t");
        n *= t.dims[i];
    }
    const std::size_t payload = n * detail::dtype_size(t.dtype) * (t.is_complex ? 2 : 1);
    if (rd.remaining() < payload)
        throw TensorTruncationError("truncated tensor file: payload shorter than header dims");

    t.re = detail::parse_values_le(rd, t.dtype, n);
    if (t.is_complex) t.im = detail::parse_values_le(rd, t.dtype, n);
    consumed = rd.position();
    return t;
}

inline Tensor decode_tensor(const std::uint8_t* bytes, std::size_t size) {
    std::size_t consumed = 0;
    Tensor t = decode_tensor_stream(bytes, size, consumed);
    if (consumed != size) throw TensorFormatError("trailing bytes after tensor payload");
    return t;
}

inline void save_tensor(const std::string& path, const Tensor& t) {
    const std::string bytes = encode_tensor(t);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw TensorIoError("cannot open for writing: " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw TensorIoError("write failed: " + path);
}

inline Tensor load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw TensorIoError("cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_tensor(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size());
}

inline Tensor tensor_from_real(const RealImage& img) {
    Tensor t;
    t.dtype = TensorDType::F64;
    t.dims = {static_cast<std::uint32_t>(img.height), static_cast<std::uint32_t>(img.width)};
    t.re = img.data;
    return t;
}

inline RealImage real_from_tensor(const Tensor& t) {
    if (t.dims.size() != 2 || t.is_complex)
        throw TensorShapeError("expected a rank-2 real tensor");
    RealImage img(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    img.data = t.re;
    return img;
}

inline Tensor tensor_from_complex(const ComplexImage& img) {
    Tensor t;
    t.dtype = TensorDType::F64;
    t.is_complex = true;
    t.dims = {static_cast<std::uint32_t>(img.height), static_cast<std::uint32_t>(img.width)};
    t.re.resize(img.data.size());
    t.im.resize(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        t.re[i] = img.data[i].real();
        t.im[i] = img.data[i].imag();
    }
    return t;
}

inline ComplexImage complex_from_tensor(const Tensor& t) {
    if (t.dims.size() != 2 || !t.is_complex)
        throw TensorShapeError("expected a rank-2 complex tensor");
    ComplexImage img(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = {t.re[i], t.im[i]};
    return img;
}

inline Tensor tensor_from_mask(const SamplingMask& mask) {
    Tensor t;
    t.dtype = TensorDType::U8;
    t.dims = {static_cast<std::uint32_t>(mask.height), static_cast<std::uint32_t>(mask.width)};
    t.re.assign(mask.keep.begin(), mask.keep.end());
    return t;
}

/// Rebuilds a mask from a 0/1 grid. Pattern and acceleration metadata are not
/// stored in the grid; callers supply them (acceleration defaults to the
/// reciprocal of the sampled fraction).
inline SamplingMask mask_from_tensor(const Tensor& t, MaskPattern pattern = MaskPattern::G1D,
                                     double acceleration = 0.0, std::uint64_t seed = 0) {
    if (t.dims.size() != 2 || t.is_complex) throw TensorShapeError("expected a rank-2 mask tensor");
    SamplingMask m;
    m.height = static_cast<int>(t.dims[0]);
    m.width = static_cast<int>(t.dims[1]);
    m.keep.resize(t.re.size());
    for (std::size_t i = 0; i < t.re.size(); ++i) m.keep[i] = t.re[i] != 0.0 ? 1 : 0;
    m.pattern = pattern;
    m.seed = seed;
    m.acceleration = acceleration > 0.0
                         ? acceleration
                         : (m.count() ? static_cast<double>(m.keep.size()) / m.count() : 1.0);
    return m;
}

/// 8-bit binary PGM with per-image min-max normalization, for eyeballing.
inline void save_pgm(const std::string& path, const RealImage& img) {
    double lo = img.data.empty() ? 0.0 : img.data[0], hi = lo;
    for (double v : img.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw TensorIoError("cannot open for writing: " + path);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    for (double v : img.data)
        f.put(static_cast<char>(static_cast<int>(std::lround((v - lo) * scale))));
    if (!f) throw TensorIoError("write failed: " + path);
}

/// Reads a binary PGM back as reals in [0, 1].
inline RealImage load_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw TensorIoError("cannot open: " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw TensorFormatError("not a binary PGM (P5) file: " + path);
    int w = 0, h = 0, maxval = 0;
    f >> w >> h >> maxval;
    if (!f || w < 1 || h < 1 || maxval < 1 || maxval > 255)
        throw TensorFormatError("unsupported PGM header in " + path);
    f.get();  // single whitespace byte after maxval
    RealImage img(h, w);
    std::vector<char> buf(static_cast<std::size_t>(w) * h);
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(f.gcount()) != buf.size())
        throw TensorTruncationError("truncated PGM payload in " + path);
    for (std::size_t i = 0; i < buf.size(); ++i)
        img.data[i] = static_cast<double>(static_cast<std::uint8_t>(buf[i])) / maxval;
    return img;
}

}  // namespace diffrecon
