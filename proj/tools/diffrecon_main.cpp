// diffrecon: conditional-diffusion MRI reconstruction at desk scale.
//
// Subcommands: mask, simulate, train, reconstruct, evaluate.
// Exit codes: 0 success, 1 usage/config error, 2 runtime/data error.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "diffrecon/diffrecon.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace diffrecon;

namespace {

/// Thrown for problems that are configuration mistakes rather than runtime
/// failures; mapped to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Optional JSON config file. Command-line flags override config keys,
/// config keys override built-in defaults.
class ConfigFile {
public:
    ConfigFile() = default;

    explicit ConfigFile(const std::string& path) {
        if (path.empty()) return;
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file: " + path);
        try {
            f >> root_;
        } catch (const json::exception& e) {
            throw ConfigError(std::string("unparseable config file: ") + e.what());
        }
    }

    template <typename T>
    void apply(const std::string& section, const std::string& key, const CLI::Option* flag,
               T& value) const {
        if (flag && flag->count() > 0) return;  // explicit flag wins
        if (!root_.contains(section)) return;
        const json& s = root_.at(section);
        if (!s.contains(key)) return;
        try {
            value = s.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config key " + section + "." + key + ": " + e.what());
        }
    }

private:
    json root_;
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw TensorIoError("cannot open for writing: " + path);
    f << text;
    if (!f) throw TensorIoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// mask

struct MaskArgs {
    std::string pattern = "g1d";
    double accel = 8.0;
    int size = 64;
    int height = 0, width = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string config_path;
    double center_frac = MaskConfig{}.center_fraction;
    double g1d_sigma_frac = MaskConfig{}.g1d_sigma_frac;
    double g2d_sigma_frac = MaskConfig{}.g2d_sigma_frac;
};

int cmd_mask(const MaskArgs& a) {
    const int h = a.height > 0 ? a.height : a.size;
    const int w = a.width > 0 ? a.width : a.size;
    MaskPattern pattern;
    try {
        pattern = mask_pattern_from_name(a.pattern);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (h < 1 || w < 1) throw ConfigError("mask dimensions must be positive");
    if (a.accel < 1.0) throw ConfigError("acceleration must be >= 1");
    if (a.out.empty()) throw ConfigError("--out is required");

    MaskConfig cfg;
    cfg.center_fraction = a.center_frac;
    cfg.g1d_sigma_frac = a.g1d_sigma_frac;
    cfg.g2d_sigma_frac = a.g2d_sigma_frac;

    SamplingMask mask;
    try {
        mask = generate_mask(pattern, h, w, a.accel, a.seed, cfg);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    save_tensor(a.out, tensor_from_mask(mask));
    std::cout << "pattern=" << a.pattern << " accel=" << a.accel << " size=" << h << "x" << w
              << " seed=" << a.seed << " fraction=" << sampled_fraction(mask) << "\n";
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    int n = 1;
    int size = 64;
    std::string pattern = "g1d";
    double accel = 8.0;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool shared_mask = false;
    int min_ellipses = PhantomSpec{}.min_ellipses;
    int max_ellipses = PhantomSpec{}.max_ellipses;
    double min_intensity = PhantomSpec{}.min_intensity;
    double max_intensity = PhantomSpec{}.max_intensity;
    double center_frac = MaskConfig{}.center_fraction;
    std::string config_path;
};

int cmd_simulate(const SimulateArgs& a) {
    if (a.n < 1) throw ConfigError("--n must be >= 1");
    if (a.noise_std < 0.0) throw ConfigError("--noise-std must be >= 0");
    if (a.out_dir.empty()) throw ConfigError("--out-dir is required");

    PhantomSpec spec;
    spec.size = a.size;
    spec.min_ellipses = a.min_ellipses;
    spec.max_ellipses = a.max_ellipses;
    spec.min_intensity = a.min_intensity;
    spec.max_intensity = a.max_intensity;
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    DatasetParams params;
    try {
        params.pattern = mask_pattern_from_name(a.pattern);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (a.accel < 1.0) throw ConfigError("acceleration must be >= 1");
    params.acceleration = a.accel;
    params.noise_std = a.noise_std;
    params.seed = a.seed;
    params.shared_mask = a.shared_mask;
    params.mask_config.center_fraction = a.center_frac;

    RandomSource rng(a.seed);
    const DatasetManifest manifest = build_dataset(a.n, spec, params, a.out_dir, rng);
    const auto manifest_path = fs::path(a.out_dir) / "manifest.json";
    std::cout << "items=" << manifest.items.size() << "\n";
    std::cout << "manifest " << manifest_path.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string dataset;
    std::string out;
    std::string loss_log;
    int epochs = 20;
    int batch = 8;
    double lr = 1e-3;
    int depth = DenoiserConfig{}.depth;
    int width = DenoiserConfig{}.width;
    int kernel = DenoiserConfig{}.kernel;
    int p_norm = DenoiserConfig{}.p_norm;
    int embed_dim = DenoiserConfig{}.alpha_embed_dim;
    int T = 200;
    double beta_start = 1e-3;
    double beta_end = 0.2;
    std::uint64_t seed = 0;
    std::string config_path;
};

int cmd_train(const TrainArgs& a) {
    if (a.dataset.empty()) throw ConfigError("--dataset is required");
    if (a.out.empty()) throw ConfigError("--out is required");
    if (a.epochs < 0) throw ConfigError("--epochs must be >= 0");
    if (a.batch < 1) throw ConfigError("--batch must be >= 1");
    if (a.lr <= 0.0) throw ConfigError("--lr must be positive");

    DenoiserConfig cfg;
    cfg.depth = a.depth;
    cfg.width = a.width;
    cfg.kernel = a.kernel;
    cfg.p_norm = a.p_norm;
    cfg.alpha_embed_dim = a.embed_dim;
    NoiseSchedule schedule = [&] {
        try {
            cfg.validate();
            return linear_beta_schedule(a.T, a.beta_start, a.beta_end);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }();

    const DatasetManifest manifest = load_manifest(a.dataset);
    const std::string base_dir = fs::path(a.dataset).parent_path().string();
    const auto pairs = load_training_pairs(manifest, base_dir);

    TrainState state = init_train_state(cfg, a.seed, a.lr);
    TrainOptions opt;
    opt.epochs = a.epochs;
    opt.batch_size = a.batch;
    RandomSource rng(a.seed);
    const std::vector<double> losses = train(state, pairs, schedule, opt, rng);

    ScheduleMeta meta;
    meta.T = a.T;
    meta.beta_start = a.beta_start;
    meta.beta_end = a.beta_end;
    save_checkpoint(a.out, state.params, meta);

    json log;
    log["epoch_losses"] = losses;
    log["epochs"] = a.epochs;
    log["batch"] = a.batch;
    log["lr"] = a.lr;
    log["seed"] = a.seed;
    log["dataset"] = a.dataset;
    log["denoiser"] = {{"depth", cfg.depth},
                       {"width", cfg.width},
                       {"kernel", cfg.kernel},
                       {"p_norm", cfg.p_norm},
                       {"alpha_embed_dim", cfg.alpha_embed_dim}};
    log["schedule"] = {{"T", a.T}, {"beta_start", a.beta_start}, {"beta_end", a.beta_end}};
    const std::string log_path = a.loss_log.empty() ? a.out + ".loss.json" : a.loss_log;
    write_text(log_path, log.dump(2) + "\n");

    for (std::size_t e = 0; e < losses.size(); ++e)
        std::cout << "epoch " << (e + 1) << " loss " << losses[e] << "\n";
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// reconstruct

struct ReconstructArgs {
    std::string checkpoint;
    std::string kspace;
    std::string mask;
    std::string out;
    std::string pgm;
    std::string report;
    double dc_step = 1.0;
    bool no_dc = false;
    bool trace = false;
    std::uint64_t seed = 0;
    int T_override = 0;
    int jobs = 1;
    std::string config_path;
};

json report_to_json(const ReconReport& r, const std::string& kspace, const std::string& mask) {
    json j;
    j["effective_config"] = {{"schedule_T", r.schedule_T},
                             {"beta_start", r.beta_first},
                             {"beta_end", r.beta_last},
                             {"dc_step", r.dc_step},
                             {"enable_dc", r.dc_enabled},
                             {"seed", r.seed},
                             {"record_trajectory", r.record_trajectory}};
    j["inputs"] = {{"kspace", kspace}, {"mask", mask}};
    j["total_steps"] = r.total_steps;
    j["wall_seconds"] = r.wall_seconds;
    j["final_residual"] = r.final_residual;
    if (r.record_trajectory) {
        j["residual_before_dc"] = r.residual_before_dc;
        j["residual_after_dc"] = r.residual_after_dc;
    }
    return j;
}

void reconstruct_one(const Checkpoint& ckpt, const NoiseSchedule& schedule,
                     const ReconstructArgs& a, const std::string& kspace_path,
                     const std::string& mask_path, const std::string& out_path,
                     const std::string& pgm_path, const std::string& report_path) {
    const ComplexImage kdata = complex_from_tensor(load_tensor(kspace_path));
    const SamplingMask mask = mask_from_tensor(load_tensor(mask_path));
    if (mask.height != kdata.height || mask.width != kdata.width)
        throw TensorShapeError("mask and k-space dimensions disagree");

    KSpaceMeasurement b;
    b.kdata = kdata;
    b.mask = mask;

    SamplerConfig config{schedule};
    config.dc_step = a.dc_step;
    config.enable_dc = !a.no_dc;
    config.seed = a.seed;
    config.record_trajectory = a.trace;

    const ReconResult res = reconstruct(ckpt.params, b, config);
    save_tensor(out_path, tensor_from_real(res.image));
    if (!pgm_path.empty()) save_pgm(pgm_path, res.image);
    if (!report_path.empty())
        write_text(report_path, report_to_json(res.report, kspace_path, mask_path).dump(2) + "\n");
}

int cmd_reconstruct(const ReconstructArgs& a) {
    if (a.checkpoint.empty()) throw ConfigError("--checkpoint is required");
    if (a.kspace.empty()) throw ConfigError("--kspace is required");
    if (a.mask.empty()) throw ConfigError("--mask is required");
    if (a.out.empty()) throw ConfigError("--out is required");
    if (a.dc_step < 0.0 || a.dc_step > 1.0) throw ConfigError("--dc-step must be in [0,1]");
    if (a.T_override < 0) throw ConfigError("--T must be >= 1");
    if (a.jobs < 1) throw ConfigError("--jobs must be >= 1");

    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const int T = a.T_override > 0 ? a.T_override : ckpt.schedule.T;
    const NoiseSchedule schedule = [&] {
        try {
            return linear_beta_schedule(T, ckpt.schedule.beta_start, ckpt.schedule.beta_end);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }();

    if (!fs::is_directory(a.kspace)) {
        reconstruct_one(ckpt, schedule, a, a.kspace, a.mask, a.out, a.pgm, a.report);
        std::cout << "wrote " << a.out << "\n";
        return 0;
    }

    // Directory fan-out: every *.dmt under --kspace, masks either a single
    // file or a sibling directory with matching names, outputs under --out.
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(a.kspace))
        if (entry.path().extension() == ".dmt") names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw TensorIoError("no .dmt files under " + a.kspace);
    fs::create_directories(a.out);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;
    const int jobs = std::max(1, std::min<int>(a.jobs, static_cast<int>(names.size())));
    std::vector<std::thread> workers;
    for (int jw = 0; jw < jobs; ++jw)
        workers.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= names.size() || failed.load()) return;
                const std::string& name = names[i];
                try {
                    const std::string mask_path = fs::is_directory(a.mask)
                                                      ? (fs::path(a.mask) / name).string()
                                                      : a.mask;
                    const std::string out_path = (fs::path(a.out) / name).string();
                    const std::string pgm_path =
                        a.pgm.empty() ? "" : (fs::path(a.pgm) / (name + ".pgm")).string();
                    const std::string report_path =
                        a.report.empty() ? "" : (fs::path(a.report) / (name + ".json")).string();
                    if (!a.pgm.empty()) fs::create_directories(a.pgm);
                    if (!a.report.empty()) fs::create_directories(a.report);
                    reconstruct_one(ckpt, schedule, a, (fs::path(a.kspace) / name).string(),
                                    mask_path, out_path, pgm_path, report_path);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!failed.exchange(true)) first_error = e.what();
                }
            }
        });
    for (auto& w : workers) w.join();
    if (failed) throw TensorIoError(first_error);
    std::cout << "reconstructed " << names.size() << " files into " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
    std::string recon_dir;
    std::string truth_dir;
    std::string out;
    double data_range = 1.0;
    int jobs = 1;
    std::string config_path;
};

int cmd_evaluate(const EvaluateArgs& a) {
    if (a.recon_dir.empty() || a.truth_dir.empty())
        throw ConfigError("--recon-dir and --truth-dir are required");
    if (a.data_range <= 0.0) throw ConfigError("--data-range must be positive");
    if (a.jobs < 1) throw ConfigError("--jobs must be >= 1");

    const auto list_dmt = [](const std::string& dir) {
        std::vector<std::string> names;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.path().extension() == ".dmt") names.push_back(entry.path().filename().string());
        std::sort(names.begin(), names.end());
        return names;
    };
    const std::vector<std::string> recon_names = list_dmt(a.recon_dir);
    const std::vector<std::string> truth_names = list_dmt(a.truth_dir);

    std::vector<std::string> only_recon, only_truth, common;
    std::set_difference(recon_names.begin(), recon_names.end(), truth_names.begin(),
                        truth_names.end(), std::back_inserter(only_recon));
    std::set_difference(truth_names.begin(), truth_names.end(), recon_names.begin(),
                        recon_names.end(), std::back_inserter(only_truth));
    std::set_intersection(recon_names.begin(), recon_names.end(), truth_names.begin(),
                          truth_names.end(), std::back_inserter(common));
    if (!only_recon.empty() || !only_truth.empty()) {
        std::string msg = "mismatched file sets;";
        for (const auto& n : only_recon) msg += " only-in-recon:" + n;
        for (const auto& n : only_truth) msg += " only-in-truth:" + n;
        throw TensorIoError(msg);
    }
    if (common.empty()) throw TensorIoError("no .dmt files to evaluate");

    std::vector<std::pair<RealImage, RealImage>> pairs(common.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;
    const int jobs = std::max(1, std::min<int>(a.jobs, static_cast<int>(common.size())));
    std::vector<std::thread> workers;
    for (int jw = 0; jw < jobs; ++jw)
        workers.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= common.size() || failed.load()) return;
                try {
                    pairs[i] = {real_from_tensor(
                                    load_tensor((fs::path(a.truth_dir) / common[i]).string())),
                                real_from_tensor(
                                    load_tensor((fs::path(a.recon_dir) / common[i]).string()))};
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!failed.exchange(true)) first_error = e.what();
                }
            }
        });
    for (auto& w : workers) w.join();
    if (failed) throw TensorIoError(first_error);

    const MetricReport report = evaluate_batch(pairs, a.data_range);

    json j;
    j["count"] = report.count();
    j["data_range"] = a.data_range;
    j["psnr"] = {{"mean", report.psnr_mean}, {"std", report.psnr_std}};
    j["ssim"] = {{"mean", report.ssim_mean}, {"std", report.ssim_std}};
    json per_image = json::array();
    for (std::size_t i = 0; i < common.size(); ++i)
        per_image.push_back({{"name", common[i]},
                             {"psnr", report.psnr_values[i]},
                             {"ssim", report.ssim_values[i]}});
    j["images"] = per_image;

    std::cout << "count=" << report.count() << " psnr_mean=" << report.psnr_mean
              << " psnr_std=" << report.psnr_std << " ssim_mean=" << report.ssim_mean
              << " ssim_std=" << report.ssim_std << "\n";
    if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional-diffusion MRI reconstruction toolkit"};
    app.require_subcommand(1);

    MaskArgs mask_args;
    auto* mask_cmd = app.add_subcommand("mask", "generate a k-space sampling mask");
    auto* m_pattern = mask_cmd->add_option("--pattern", mask_args.pattern,
                                           "g1d | g2d | uniform1d | poisson");
    auto* m_accel = mask_cmd->add_option("--accel", mask_args.accel, "acceleration factor R");
    auto* m_size = mask_cmd->add_option("--size", mask_args.size, "square grid size");
    auto* m_height = mask_cmd->add_option("--height", mask_args.height, "grid height");
    auto* m_width = mask_cmd->add_option("--width", mask_args.width, "grid width");
    auto* m_seed = mask_cmd->add_option("--seed", mask_args.seed, "rng seed");
    auto* m_center = mask_cmd->add_option("--center-frac", mask_args.center_frac,
                                          "always-sampled central fraction");
    auto* m_g1s = mask_cmd->add_option("--g1d-sigma-frac", mask_args.g1d_sigma_frac,
                                       "G1D profile sigma as a fraction of width");
    auto* m_g2s = mask_cmd->add_option("--g2d-sigma-frac", mask_args.g2d_sigma_frac,
                                       "G2D profile sigma as a fraction of min(h,w)");
    mask_cmd->add_option("--out", mask_args.out, "output mask tensor (.dmt)");
    mask_cmd->add_option("--config", mask_args.config_path, "JSON config file");

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "generate a phantom dataset");
    auto* s_n = sim_cmd->add_option("--n", sim_args.n, "number of items");
    auto* s_size = sim_cmd->add_option("--size", sim_args.size, "phantom grid size");
    auto* s_pattern = sim_cmd->add_option("--pattern", sim_args.pattern, "mask pattern");
    auto* s_accel = sim_cmd->add_option("--accel", sim_args.accel, "acceleration factor R");
    auto* s_noise = sim_cmd->add_option("--noise-std", sim_args.noise_std,
                                        "complex noise std on sampled entries");
    auto* s_seed = sim_cmd->add_option("--seed", sim_args.seed, "rng seed");
    sim_cmd->add_option("--out-dir", sim_args.out_dir, "output directory");
    sim_cmd->add_flag("--shared-mask", sim_args.shared_mask, "one mask for every item");
    auto* s_minell = sim_cmd->add_option("--min-ellipses", sim_args.min_ellipses);
    auto* s_maxell = sim_cmd->add_option("--max-ellipses", sim_args.max_ellipses);
    auto* s_center = sim_cmd->add_option("--center-frac", sim_args.center_frac);
    sim_cmd->add_option("--config", sim_args.config_path, "JSON config file");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train the conditional denoiser");
    train_cmd->add_option("--dataset", train_args.dataset, "dataset manifest.json");
    train_cmd->add_option("--out", train_args.out, "output checkpoint (.dmc)");
    train_cmd->add_option("--loss-log", train_args.loss_log, "loss log path");
    auto* t_epochs = train_cmd->add_option("--epochs", train_args.epochs);
    auto* t_batch = train_cmd->add_option("--batch", train_args.batch);
    auto* t_lr = train_cmd->add_option("--lr", train_args.lr);
    auto* t_depth = train_cmd->add_option("--depth", train_args.depth);
    auto* t_width = train_cmd->add_option("--width", train_args.width);
    auto* t_kernel = train_cmd->add_option("--kernel", train_args.kernel);
    auto* t_p = train_cmd->add_option("--p-norm", train_args.p_norm);
    auto* t_embed = train_cmd->add_option("--embed-dim", train_args.embed_dim);
    auto* t_T = train_cmd->add_option("--T", train_args.T, "diffusion steps");
    auto* t_bs = train_cmd->add_option("--beta-start", train_args.beta_start);
    auto* t_be = train_cmd->add_option("--beta-end", train_args.beta_end);
    auto* t_seed = train_cmd->add_option("--seed", train_args.seed);
    train_cmd->add_option("--config", train_args.config_path, "JSON config file");

    ReconstructArgs rec_args;
    auto* rec_cmd = app.add_subcommand("reconstruct", "reconstruct from undersampled k-space");
    rec_cmd->add_option("--checkpoint", rec_args.checkpoint, "trained checkpoint");
    rec_cmd->add_option("--kspace", rec_args.kspace, "k-space tensor or directory");
    rec_cmd->add_option("--mask", rec_args.mask, "mask tensor or directory");
    rec_cmd->add_option("--out", rec_args.out, "output image tensor or directory");
    rec_cmd->add_option("--pgm", rec_args.pgm, "also write an 8-bit PGM");
    rec_cmd->add_option("--report", rec_args.report, "write a JSON run report");
    auto* r_dc = rec_cmd->add_option("--dc-step", rec_args.dc_step, "DC step size in [0,1]");
    rec_cmd->add_flag("--no-dc", rec_args.no_dc, "plain sampler (no data consistency)");
    rec_cmd->add_flag("--trace", rec_args.trace, "record per-step residuals");
    auto* r_seed = rec_cmd->add_option("--seed", rec_args.seed);
    auto* r_T = rec_cmd->add_option("--T", rec_args.T_override, "override inference steps");
    auto* r_jobs = rec_cmd->add_option("--jobs", rec_args.jobs, "parallel reconstructions");
    rec_cmd->add_option("--config", rec_args.config_path, "JSON config file");

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "PSNR/SSIM report over paired directories");
    eval_cmd->add_option("--recon-dir", eval_args.recon_dir, "reconstructed images");
    eval_cmd->add_option("--truth-dir", eval_args.truth_dir, "ground-truth images");
    eval_cmd->add_option("--out", eval_args.out, "write a JSON metric report");
    auto* e_range = eval_cmd->add_option("--data-range", eval_args.data_range);
    auto* e_jobs = eval_cmd->add_option("--jobs", eval_args.jobs);
    eval_cmd->add_option("--config", eval_args.config_path, "JSON config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*mask_cmd) {
            const ConfigFile cfg(mask_args.config_path);
            cfg.apply("mask", "pattern", m_pattern, mask_args.pattern);
            cfg.apply("mask", "acceleration", m_accel, mask_args.accel);
            cfg.apply("mask", "size", m_size, mask_args.size);
            cfg.apply("mask", "height", m_height, mask_args.height);
            cfg.apply("mask", "width", m_width, mask_args.width);
            cfg.apply("mask", "seed", m_seed, mask_args.seed);
            cfg.apply("mask", "center_fraction", m_center, mask_args.center_frac);
            cfg.apply("mask", "g1d_sigma_frac", m_g1s, mask_args.g1d_sigma_frac);
            cfg.apply("mask", "g2d_sigma_frac", m_g2s, mask_args.g2d_sigma_frac);
            return cmd_mask(mask_args);
        }
        if (*sim_cmd) {
            const ConfigFile cfg(sim_args.config_path);
            cfg.apply("simulate", "n", s_n, sim_args.n);
            cfg.apply("phantom", "size", s_size, sim_args.size);
            cfg.apply("phantom", "min_ellipses", s_minell, sim_args.min_ellipses);
            cfg.apply("phantom", "max_ellipses", s_maxell, sim_args.max_ellipses);
            cfg.apply("mask", "pattern", s_pattern, sim_args.pattern);
            cfg.apply("mask", "acceleration", s_accel, sim_args.accel);
            cfg.apply("mask", "center_fraction", s_center, sim_args.center_frac);
            cfg.apply("simulate", "noise_std", s_noise, sim_args.noise_std);
            cfg.apply("simulate", "seed", s_seed, sim_args.seed);
            return cmd_simulate(sim_args);
        }
        if (*train_cmd) {
            const ConfigFile cfg(train_args.config_path);
            cfg.apply("trainer", "epochs", t_epochs, train_args.epochs);
            cfg.apply("trainer", "batch", t_batch, train_args.batch);
            cfg.apply("trainer", "lr", t_lr, train_args.lr);
            cfg.apply("trainer", "seed", t_seed, train_args.seed);
            cfg.apply("denoiser", "depth", t_depth, train_args.depth);
            cfg.apply("denoiser", "width", t_width, train_args.width);
            cfg.apply("denoiser", "kernel", t_kernel, train_args.kernel);
            cfg.apply("denoiser", "p_norm", t_p, train_args.p_norm);
            cfg.apply("denoiser", "alpha_embed_dim", t_embed, train_args.embed_dim);
            cfg.apply("schedule", "T", t_T, train_args.T);
            cfg.apply("schedule", "beta_start", t_bs, train_args.beta_start);
            cfg.apply("schedule", "beta_end", t_be, train_args.beta_end);
            return cmd_train(train_args);
        }
        if (*rec_cmd) {
            const ConfigFile cfg(rec_args.config_path);
            cfg.apply("sampler", "dc_step", r_dc, rec_args.dc_step);
            cfg.apply("sampler", "seed", r_seed, rec_args.seed);
            cfg.apply("sampler", "T", r_T, rec_args.T_override);
            cfg.apply("sampler", "jobs", r_jobs, rec_args.jobs);
            return cmd_reconstruct(rec_args);
        }
        if (*eval_cmd) {
            const ConfigFile cfg(eval_args.config_path);
            cfg.apply("evaluate", "data_range", e_range, eval_args.data_range);
            cfg.apply("evaluate", "jobs", e_jobs, eval_args.jobs);
            return cmd_evaluate(eval_args);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
