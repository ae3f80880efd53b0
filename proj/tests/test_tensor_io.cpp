#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "diffrecon/random.hpp"
#include "diffrecon/tensor_io.hpp"

using namespace diffrecon;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "diffrecon_io_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("f64 tensor round trip is bitwise exact") {
    RandomSource rng(1);
    const RealImage img = gaussian_image(rng, 64, 64);
    const auto path = temp_file("round_f64.dmt");
    save_tensor(path.string(), tensor_from_real(img));
    const RealImage back = real_from_tensor(load_tensor(path.string()));
    REQUIRE(back.height == 64);
    REQUIRE(back.width == 64);
    REQUIRE(back.data == img.data);

    // rewriting produces identical bytes
    const std::string first = read_bytes(path);
    save_tensor(path.string(), tensor_from_real(back));
    REQUIRE(read_bytes(path) == first);
}

TEST_CASE("complex tensor round trip is bitwise exact") {
    RandomSource rng(2);
    ComplexImage img(16, 16);
    for (auto& v : img.data) v = {rng.normal(), rng.normal()};
    const auto path = temp_file("round_c64.dmt");
    save_tensor(path.string(), tensor_from_complex(img));
    const ComplexImage back = complex_from_tensor(load_tensor(path.string()));
    REQUIRE(back.data == img.data);
}

TEST_CASE("mask u8 tensor round trip preserves the grid") {
    const SamplingMask mask = gen_g1d(32, 32, 4.0, 9);
    const auto path = temp_file("round_mask.dmt");
    save_tensor(path.string(), tensor_from_mask(mask));
    const SamplingMask back = mask_from_tensor(load_tensor(path.string()), MaskPattern::G1D,
                                               mask.acceleration, mask.seed);
    REQUIRE(back.keep == mask.keep);
}

TEST_CASE("wrong magic bytes raise the format error") {
    const auto path = temp_file("bad_magic.dmt");
    write_bytes(path, std::string("NOPE") + std::string(64, '\0'));
    REQUIRE_THROWS_AS(load_tensor(path.string()), TensorFormatError);
}

TEST_CASE("truncated payload raises the truncation error") {
    RandomSource rng(3);
    const RealImage img = gaussian_image(rng, 8, 8);
    const std::string full = encode_tensor(tensor_from_real(img));
    const auto path = temp_file("truncated.dmt");
    write_bytes(path, full.substr(0, full.size() - 17));
    REQUIRE_THROWS_AS(load_tensor(path.string()), TensorTruncationError);

    // header alone, payload missing entirely
    write_bytes(path, full.substr(0, 14));
    REQUIRE_THROWS_AS(load_tensor(path.string()), TensorTruncationError);
}

TEST_CASE("trailing bytes raise the format error") {
    RandomSource rng(4);
    const RealImage img = gaussian_image(rng, 8, 8);
    const auto path = temp_file("trailing.dmt");
    write_bytes(path, encode_tensor(tensor_from_real(img)) + "extra");
    REQUIRE_THROWS_AS(load_tensor(path.string()), TensorFormatError);
}

TEST_CASE("overflowing and zero-sized shapes raise the shape error") {
    // rank 3 with dims 0xFFFFFFFF each: product overflows size_t
    std::string bytes("DMT1", 4);
    bytes.push_back(static_cast<char>(1));  // f64
    bytes.push_back(static_cast<char>(3));  // rank 3
    for (int d = 0; d < 3; ++d)
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>(0xFF));
    const auto path = temp_file("overflow.dmt");
    write_bytes(path, bytes);
    REQUIRE_THROWS_AS(load_tensor(path.string()), TensorShapeError);

    std::string zero("DMT1", 4);
    zero.push_back(static_cast<char>(1));
    zero.push_back(static_cast<char>(1));
    for (int i = 0; i < 4; ++i) zero.push_back(static_cast<char>(0));
    write_bytes(path, zero);
    REQUIRE_THROWS_AS(load_tensor(path.string()), TensorShapeError);
}

TEST_CASE("the three error classes are distinct") {
    REQUIRE_FALSE((std::is_base_of_v<TensorFormatError, TensorTruncationError>));
    REQUIRE_FALSE((std::is_base_of_v<TensorTruncationError, TensorShapeError>));
    REQUIRE((std::is_base_of_v<TensorIoError, TensorFormatError>));
}

TEST_CASE("pgm export and ingestion round trip within quantization") {
    RandomSource rng(5);
    RealImage img = gaussian_image(rng, 24, 24);
    // normalize to [0,1] so min-max export does not rescale
    double lo = img.data[0], hi = img.data[0];
    for (double v : img.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double& v : img.data) v = (v - lo) / (hi - lo);

    const auto path = temp_file("img.pgm");
    save_pgm(path.string(), img);
    const RealImage back = load_pgm(path.string());
    REQUIRE(back.height == 24);
    REQUIRE(back.width == 24);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        REQUIRE_THAT(back.data[i], Catch::Matchers::WithinAbs(img.data[i], 0.51 / 255.0));
}

TEST_CASE("pgm loader rejects foreign and truncated files") {
    const auto path = temp_file("bad.pgm");
    write_bytes(path, "P6\n4 4\n255\n0123456789");
    REQUIRE_THROWS_AS(load_pgm(path.string()), TensorFormatError);
    write_bytes(path, "P5\n8 8\n255\nshort");
    REQUIRE_THROWS_AS(load_pgm(path.string()), TensorTruncationError);
}

TEST_CASE("f32 tensors load as exact doubles") {
    Tensor t;
    t.dtype = TensorDType::F32;
    t.dims = {4};
    t.re = {0.5, -1.25, 3.0, 0.0};  // exactly representable in f32
    const auto path = temp_file("f32.dmt");
    save_tensor(path.string(), t);
    const Tensor back = load_tensor(path.string());
    REQUIRE(back.dtype == TensorDType::F32);
    REQUIRE(back.re == t.re);
}
