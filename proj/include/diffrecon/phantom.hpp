#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffrecon/forward_model.hpp"
#include "diffrecon/tensor_io.hpp"

namespace diffrecon {

/// Synthetic phantom recipe: randomly placed rotated ellipses inside a
/// skull-like bounding ring, clipped to [0,1].
struct PhantomSpec {
    int size = 64;
    int min_ellipses = 4;
    int max_ellipses = 8;
    double min_intensity = -0.4;
    double max_intensity = 0.8;

    void validate() const {
        if (size < 16) throw std::invalid_argument("PhantomSpec: size must be >= 16");
        if (min_ellipses < 0 || max_ellipses < min_ellipses)
            throw std::invalid_argument("PhantomSpec: bad ellipse count range");
        if (max_intensity < min_intensity)
            throw std::invalid_argument("PhantomSpec: bad intensity range");
    }
};

inline RealImage gen_phantom(const PhantomSpec& spec, RandomSource& rng) {
    spec.validate();
    const int s = spec.size;
    const double c = (s - 1) / 2.0;

    struct Ellipse {
        double cy, cx, a, b, cos_t, sin_t, intensity;
    };
    std::vector<Ellipse> ellipses;
    const int count =
        spec.min_ellipses +
        static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.max_ellipses - spec.min_ellipses + 1)));
    for (int i = 0; i < count; ++i) {
        Ellipse e;
        e.cy = c + (rng.uniform() - 0.5) * 0.6 * s;
        e.cx = c + (rng.uniform() - 0.5) * 0.6 * s;
        e.a = (0.06 + 0.16 * rng.uniform()) * s;
        e.b = (0.06 + 0.16 * rng.uniform()) * s;
        const double theta = rng.uniform() * M_PI;
        e.cos_t = std::cos(theta);
        e.sin_t = std::sin(theta);
        e.intensity = spec.min_intensity + rng.uniform() * (spec.max_intensity - spec.min_intensity);
        ellipses.push_back(e);
    }

    const double ring_outer = 0.47 * s;
    const double ring_inner = 0.42 * s;

    RealImage img(s, s);
    // 2x2 subpixel sampling softens ellipse boundaries.
    const double sub[2] = {-0.25, 0.25};
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            double acc = 0.0;
            for (double oy : sub)
                for (double ox : sub) {
                    const double py = y + oy, px = x + ox;
                    double v = 0.0;
                    const double r = std::sqrt((py - c) * (py - c) + (px - c) * (px - c));
                    if (r <= ring_outer && r >= ring_inner) v += 0.9;
                    if (r < ring_inner) {
                        for (const Ellipse& e : ellipses) {
                            const double dy = py - e.cy, dx = px - e.cx;
                            const double u = (dx * e.cos_t + dy * e.sin_t) / e.a;
                            const double w = (-dx * e.sin_t + dy * e.cos_t) / e.b;
                            if (u * u + w * w <= 1.0) v += e.intensity;
                        }
                    }
                    acc += v;
                }
            img.at(y, x) = std::clamp(acc / 4.0, 0.0, 1.0);
        }
    return img;
}

/// Generation parameters shared by every item of a dataset.
struct DatasetParams {
    MaskPattern pattern = MaskPattern::G1D;
    double acceleration = 8.0;
    MaskConfig mask_config;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    bool shared_mask = false;  // one mask for all items instead of a fresh seed per item
};

struct DatasetItem {
    std::string truth;
    std::string condition;
    std::string mask;
    std::string kspace;
};

struct DatasetManifest {
    std::vector<DatasetItem> items;
    std::string pattern;
    double acceleration = 1.0;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    int size = 0;
    bool shared_mask = false;
};

inline void save_manifest(const std::string& path, const DatasetManifest& m) {
    nlohmann::json j;
    j["pattern"] = m.pattern;
    j["acceleration"] = m.acceleration;
    j["noise_std"] = m.noise_std;
    j["seed"] = m.seed;
    j["size"] = m.size;
    j["shared_mask"] = m.shared_mask;
    j["items"] = nlohmann::json::array();
    for (const auto& it : m.items)
        j["items"].push_back({{"truth", it.truth},
                              {"condition", it.condition},
                              {"mask", it.mask},
                              {"kspace", it.kspace}});
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw TensorIoError("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw TensorIoError("cannot open: " + path);
    nlohmann::json j;
    f >> j;
    DatasetManifest m;
    m.pattern = j.at("pattern").get<std::string>();
    m.acceleration = j.at("acceleration").get<double>();
    m.noise_std = j.at("noise_std").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.size = j.at("size").get<int>();
    m.shared_mask = j.value("shared_mask", false);
    for (const auto& it : j.at("items")) {
        m.items.push_back({it.at("truth").get<std::string>(), it.at("condition").get<std::string>(),
                           it.at("mask").get<std::string>(), it.at("kspace").get<std::string>()});
    }
    return m;
}

/// Generates n phantoms, acquires each through the measurement model, and
/// writes truth / zero-filled condition / mask / k-space tensors plus a
/// manifest. Fully reproducible from (spec, params).
inline DatasetManifest build_dataset(int n, const PhantomSpec& spec, const DatasetParams& params,
                                     const std::string& out_dir, RandomSource& rng) {
    if (n < 1) throw std::invalid_argument("build_dataset: n must be >= 1");
    spec.validate();
    std::filesystem::create_directories(out_dir);

    DatasetManifest manifest;
    manifest.pattern = mask_pattern_name(params.pattern);
    manifest.acceleration = params.acceleration;
    manifest.noise_std = params.noise_std;
    manifest.seed = rng.seed();
    manifest.size = spec.size;
    manifest.shared_mask = params.shared_mask;

    for (int i = 0; i < n; ++i) {
        RandomSource item_rng = rng.fork(static_cast<std::uint64_t>(i));
        const RealImage truth = gen_phantom(spec, item_rng);

        const std::uint64_t mask_seed =
            params.shared_mask ? params.seed : params.seed + static_cast<std::uint64_t>(i) + 1;
        const SamplingMask mask = generate_mask(params.pattern, spec.size, spec.size,
                                                params.acceleration, mask_seed, params.mask_config);
        const MeasurementOp op(mask);
        const KSpaceMeasurement b = undersample(op, truth, params.noise_std, item_rng);
        const RealImage condition = zero_fill(op, b);

        char tag[16];
        std::snprintf(tag, sizeof tag, "%04d", i);
        DatasetItem item;
        item.truth = std::string("truth_") + tag + ".dmt";
        item.condition = std::string("cond_") + tag + ".dmt";
        item.mask = std::string("mask_") + tag + ".dmt";
        item.kspace = std::string("kspace_") + tag + ".dmt";
        const auto dir = std::filesystem::path(out_dir);
        save_tensor((dir / item.truth).string(), tensor_from_real(truth));
        save_tensor((dir / item.condition).string(), tensor_from_real(condition));
        save_tensor((dir / item.mask).string(), tensor_from_mask(mask));
        save_tensor((dir / item.kspace).string(), tensor_from_complex(b.kdata));
        manifest.items.push_back(std::move(item));
    }

    save_manifest((std::filesystem::path(out_dir) / "manifest.json").string(), manifest);
    return manifest;
}

/// Checks every manifest entry: files exist and parse, per-pair shapes
/// agree, and each mask's sampled fraction is consistent with the declared
/// acceleration (the band allows for the always-sampled center block).
inline void validate_manifest(const DatasetManifest& manifest, const std::string& base_dir) {
    if (manifest.items.empty()) throw TensorShapeError("manifest lists no items");
    const auto dir = std::filesystem::path(base_dir);
    for (const auto& item : manifest.items) {
        const RealImage truth = real_from_tensor(load_tensor((dir / item.truth).string()));
        const RealImage cond = real_from_tensor(load_tensor((dir / item.condition).string()));
        const SamplingMask mask = mask_from_tensor(load_tensor((dir / item.mask).string()));
        const ComplexImage kdata = complex_from_tensor(load_tensor((dir / item.kspace).string()));
        if (!truth.same_shape(cond) || truth.height != mask.height || truth.width != mask.width ||
            truth.height != kdata.height || truth.width != kdata.width)
            throw TensorShapeError("manifest entry shapes disagree: " + item.truth);
        const double f = sampled_fraction(mask);
        const double target = 1.0 / manifest.acceleration;
        if (f < 0.8 * target || f > 1.2 * target + 0.05)
            throw TensorShapeError("mask fraction " + std::to_string(f) +
                                   " inconsistent with acceleration in " + item.mask);
    }
}

/// Loads (condition, truth) training pairs referenced by a manifest.
inline std::vector<std::pair<RealImage, RealImage>> load_training_pairs(
    const DatasetManifest& manifest, const std::string& base_dir) {
    std::vector<std::pair<RealImage, RealImage>> pairs;
    const auto dir = std::filesystem::path(base_dir);
    for (const auto& item : manifest.items) {
        RealImage cond = real_from_tensor(load_tensor((dir / item.condition).string()));
        RealImage truth = real_from_tensor(load_tensor((dir / item.truth).string()));
        if (!cond.same_shape(truth))
            throw TensorShapeError("manifest pair shapes disagree: " + item.truth);
        pairs.emplace_back(std::move(cond), std::move(truth));
    }
    return pairs;
}

}  // namespace diffrecon
