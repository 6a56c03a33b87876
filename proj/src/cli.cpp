#include "pbir/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "pbir/io.hpp"
#include "pbir/metrics.hpp"
#include "pbir/pathseek.hpp"

namespace fs = std::filesystem;

namespace pbir {

namespace {

FileMeta meta_for(const ExperimentConfig& cfg, const std::string& command) {
    return {command, cfg.hash(), cfg.seed};
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    return (fs::path(cfg.output_dir) / name).string();
}

ImageVolume phantom_hu(const ExperimentConfig& cfg) {
    return rasterize(cfg.make_phantom(), cfg.grid);
}

Sinogram make_sinogram(const ExperimentConfig& cfg, std::uint64_t seed) {
    const ImageVolume mu = hu_to_mu(phantom_hu(cfg));
    const ScanGeometry geom = cfg.make_geometry();
    return cfg.noiseless ? simulate_noiseless(mu, geom, cfg.I0)
                         : simulate_counts(mu, geom, cfg.I0, seed);
}

Sinogram load_sinogram(const ExperimentConfig& cfg) {
    const std::string path = out_path(cfg, "sino.pbir");
    if (cfg.strict) check_config_hash(path, cfg.hash());
    return read_sinogram(path, cfg.make_geometry());
}

ImageVolume initial_image(const ExperimentConfig& cfg, const Sinogram& sino) {
    if (cfg.init == "zero") return ImageVolume(cfg.grid, PixelUnit::Mu, 0.0);
    ImageVolume img = fbp_reconstruct(sino, cfg.grid,
                                      cfg.fbp_filter == "hann" ? FbpFilter::Hann : FbpFilter::Ramp);
    for (auto& v : img.values) v = std::max(0.0, v);
    return img;
}

ImageVolume direct_solve(const ExperimentConfig& cfg, const PWLSProblem& prob,
                         const ImageVolume& init, std::vector<IterRecord>* trace = nullptr,
                         const ImageVolume* reference = nullptr) {
    SolveOptions so;
    so.n_iters = cfg.n_iters;
    so.n_subsets = cfg.n_subsets;
    so.rho = cfg.rho;
    so.n_inner = cfg.n_inner;
    so.trace = trace;
    so.reference = reference;
    const bool sqs = cfg.algorithm == "sqs";
    ImageVolume mu = sqs ? sqs_solve(prob, init, so) : admm_solve(prob, init, so);
    if (cfg.taper_iters > 0) {
        // second stage with fewer subsets: damps the ordered-subset limit
        // cycle that a long many-subset run never settles out of
        so.n_iters = cfg.taper_iters;
        so.n_subsets = cfg.taper_subsets;
        mu = sqs ? sqs_solve(prob, mu, so) : admm_solve(prob, mu, so);
    }
    return mu;
}

void write_iter_csv(const std::string& path, const std::vector<IterRecord>& trace,
                    bool with_ref) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << (with_ref ? "iteration,objective,rmsd_to_ref\n" : "iteration,objective\n");
    for (const auto& r : trace) {
        out << r.iteration << "," << format_num(r.objective);
        if (with_ref) out << "," << format_num(r.rmsd_to_ref);
        out << "\n";
    }
}

void maybe_pgm(const ExperimentConfig& cfg, const ImageVolume& img, const std::string& raw_path,
               bool force, CommandResult& res) {
    if (!cfg.pgm) return;
    const std::string path = fs::path(raw_path).replace_extension(".pgm").string();
    ensure_writable(path, force);
    write_pgm16(path, img, cfg.pgm_window, cfg.pgm_level);
    res.outputs.push_back(path);
}

struct ManifestRow {
    int frame = 0;
    double beta = 0.0;
    double dist = 0.0;
    std::int64_t updated = 0;
    std::string file;
};

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "frame,beta_assigned,dist_to_target_hu,pixels_updated,file\n";
    for (const auto& r : rows)
        out << r.frame << "," << format_num(r.beta) << "," << format_num(r.dist) << ","
            << r.updated << "," << r.file << "\n";
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    std::vector<ManifestRow> rows;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ManifestRow r;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        r.frame = std::stoi(field);
        std::getline(ss, field, ',');
        r.beta = std::stod(field);
        std::getline(ss, field, ',');
        r.dist = std::stod(field);
        std::getline(ss, field, ',');
        r.updated = std::stoll(field);
        std::getline(ss, r.file, ',');
        rows.push_back(r);
    }
    return rows;
}

ReconPath run_path_engine(const ExperimentConfig& cfg, const PWLSProblem& prob,
                          const Sinogram& sino) {
    // Endpoint reconstructions: direct solves unless the config points at
    // previously written images.
    PWLSProblem p1 = prob;
    p1.beta = cfg.path.beta1;
    const ImageVolume init = initial_image(cfg, sino);
    ImageVolume mu1 = cfg.raw.has("path.init_beta1")
                          ? hu_to_mu(read_image(cfg.raw.get("path.init_beta1")))
                          : direct_solve(cfg, p1, init);
    if (cfg.engine == "dog") return ps_dog(prob, mu1, cfg.path);

    PWLSProblem p2 = prob;
    p2.beta = cfg.path.beta2;
    ImageVolume mu2 = cfg.raw.has("path.init_beta2")
                          ? hu_to_mu(read_image(cfg.raw.get("path.init_beta2")))
                          : direct_solve(cfg, p2, init);
    if (cfg.path.direction == PathDirection::Decreasing) return ps_rog_reverse(prob, mu2, mu1, cfg.path);
    return ps_rog(prob, mu1, mu2, cfg.path);
}

} // namespace

CommandResult cmd_phantom(const ExperimentConfig& cfg, bool force) {
    CommandResult res;
    const ImageVolume img = phantom_hu(cfg);
    const std::string path = out_path(cfg, "phantom_hu.pbir");
    ensure_writable(path, force);
    write_image(path, img, meta_for(cfg, "phantom"));
    res.outputs.push_back(path);
    maybe_pgm(cfg, img, path, force, res);
    return res;
}

CommandResult cmd_simulate(const ExperimentConfig& cfg, bool force) {
    CommandResult res;
    const Sinogram sino = make_sinogram(cfg, cfg.seed);
    const std::string path = out_path(cfg, "sino.pbir");
    ensure_writable(path, force);
    write_sinogram(path, sino, meta_for(cfg, "simulate"));
    res.outputs.push_back(path);
    return res;
}

CommandResult cmd_recon(const ExperimentConfig& cfg, bool force) {
    CommandResult res;
    const Sinogram sino = load_sinogram(cfg);
    const std::string name = cfg.raw.get_or("recon.name", "recon_" + cfg.algorithm);
    const std::string img_path = out_path(cfg, name + ".pbir");
    ensure_writable(img_path, force);

    if (cfg.algorithm == "fbp") {
        const ImageVolume img = fbp_reconstruct(
            sino, cfg.grid, cfg.fbp_filter == "hann" ? FbpFilter::Hann : FbpFilter::Ramp);
        write_image(img_path, mu_to_hu(img), meta_for(cfg, "recon fbp"));
        res.outputs.push_back(img_path);
        maybe_pgm(cfg, img, img_path, force, res);
        return res;
    }

    PWLSProblem prob{sino.geom, sino, cfg.penalty, cfg.beta};
    ImageVolume reference;
    const ImageVolume* ref_ptr = nullptr;
    const std::string ref_path = cfg.raw.get_or("solver.reference", "");
    if (!ref_path.empty()) {
        reference = read_image(ref_path);
        ref_ptr = &reference;
    }
    std::vector<IterRecord> trace;
    const ImageVolume mu =
        direct_solve(cfg, prob, initial_image(cfg, sino), &trace, ref_ptr);

    write_image(img_path, mu_to_hu(mu), meta_for(cfg, "recon " + cfg.algorithm));
    res.outputs.push_back(img_path);
    const std::string csv_path = out_path(cfg, name + "_iters.csv");
    ensure_writable(csv_path, force);
    write_iter_csv(csv_path, trace, ref_ptr != nullptr);
    res.outputs.push_back(csv_path);
    maybe_pgm(cfg, mu, img_path, force, res);
    return res;
}

CommandResult cmd_path(const ExperimentConfig& cfg, bool force) {
    CommandResult res;
    const Sinogram sino = load_sinogram(cfg);
    PWLSProblem prob{sino.geom, sino, cfg.penalty, cfg.path.beta1};
    const ReconPath path = run_path_engine(cfg, prob, sino);

    const std::string dir = out_path(cfg, "path_" + cfg.engine);
    std::vector<ManifestRow> rows;
    for (const auto& frame : path.frames) {
        char name[64];
        std::snprintf(name, sizeof(name), "frame_%03d.pbir", frame.index);
        const std::string fpath = (fs::path(dir) / name).string();
        ensure_writable(fpath, force);
        write_image(fpath, mu_to_hu(frame.image), meta_for(cfg, "path " + cfg.engine));
        res.outputs.push_back(fpath);
        rows.push_back({frame.index, frame.beta_assigned, frame.dist_to_target_hu,
                        frame.pixels_updated, name});
    }
    const std::string manifest = (fs::path(dir) / "manifest.csv").string();
    ensure_writable(manifest, force);
    write_manifest(manifest, rows);
    res.outputs.push_back(manifest);

    const std::string info = (fs::path(dir) / "path_info.txt").string();
    ensure_writable(info, force);
    std::ofstream out(info);
    out << "engine=" << cfg.engine << "\n"
        << "provenance=" << path.provenance << "\n"
        << "termination=" << path.termination << "\n"
        << "frames=" << path.frames.size() << "\n";
    res.outputs.push_back(info);
    return res;
}

CommandResult cmd_metrics(const ExperimentConfig& cfg, bool force) {
    CommandResult res;
    if (cfg.references.empty())
        throw std::runtime_error("cmd_metrics: metrics.references lists no images");
    const std::string manifest_path =
        cfg.manifest.empty() ? out_path(cfg, "path_" + cfg.engine + "/manifest.csv") : cfg.manifest;
    const auto rows = read_manifest(manifest_path);
    if (rows.empty()) throw std::runtime_error("cmd_metrics: manifest is empty");
    const fs::path frame_dir = fs::path(manifest_path).parent_path();

    std::vector<ImageVolume> frames;
    frames.reserve(rows.size());
    for (const auto& r : rows) {
        const std::string fpath = (frame_dir / r.file).string();
        if (cfg.strict) check_config_hash(fpath, cfg.hash());
        frames.push_back(read_image(fpath));
    }
    std::vector<ImageVolume> refs;
    for (const auto& rp : cfg.references) refs.push_back(read_image(rp));

    const std::string per_frame = out_path(cfg, "metrics_per_frame.csv");
    ensure_writable(per_frame, force);
    {
        std::ofstream out(per_frame);
        out << "frame,beta_assigned";
        for (std::size_t r = 0; r < refs.size(); ++r) out << ",rmsd_ref" << r << ",mad_ref" << r;
        out << "\n";
        for (std::size_t k = 0; k < frames.size(); ++k) {
            out << rows[k].frame << "," << format_num(rows[k].beta);
            for (const auto& ref : refs)
                out << "," << format_num(rmsd(frames[k], ref)) << ","
                    << format_num(mad(frames[k], ref));
            out << "\n";
        }
    }
    res.outputs.push_back(per_frame);

    const std::string closest = out_path(cfg, "metrics_closest.csv");
    ensure_writable(closest, force);
    {
        std::ofstream out(closest);
        out << "reference,closest_frame,rmsd,mad\n";
        for (std::size_t r = 0; r < refs.size(); ++r) {
            int best = 0;
            double best_rmsd = rmsd(frames[0], refs[r]);
            for (std::size_t k = 1; k < frames.size(); ++k) {
                const double v = rmsd(frames[k], refs[r]);
                if (v < best_rmsd) {
                    best_rmsd = v;
                    best = static_cast<int>(k);
                }
            }
            out << cfg.references[r] << "," << rows[best].frame << "," << format_num(best_rmsd)
                << "," << format_num(mad(frames[best], refs[r])) << "\n";
        }
    }
    res.outputs.push_back(closest);
    return res;
}

CommandResult cmd_nps(const ExperimentConfig& cfg, bool force) {
    CommandResult res;
    std::vector<double> targets = cfg.nps_betas;
    if (targets.empty())
        targets = {cfg.path.beta1, std::sqrt(cfg.path.beta1 * cfg.path.beta2), cfg.path.beta2};

    const ScanGeometry geom = cfg.make_geometry();
    const ImageVolume mu_phantom = hu_to_mu(phantom_hu(cfg));

    std::vector<std::vector<ImageVolume>> realizations(targets.size());
    for (int s = 0; s < cfg.nps_seeds; ++s) {
        const Sinogram sino = simulate_counts(mu_phantom, geom, cfg.I0, cfg.seed + s);
        PWLSProblem prob{geom, sino, cfg.penalty, cfg.path.beta1};
        PWLSProblem p1 = prob;
        p1.beta = cfg.path.beta1;
        const ImageVolume mu1 = direct_solve(cfg, p1, initial_image(cfg, sino));
        ReconPath path;
        if (cfg.engine == "dog") {
            path = ps_dog(prob, mu1, cfg.path);
        } else {
            PWLSProblem p2 = prob;
            p2.beta = cfg.path.beta2;
            const ImageVolume mu2 = direct_solve(cfg, p2, initial_image(cfg, sino));
            path = ps_rog(prob, mu1, mu2, cfg.path);
        }
        // pick, per target beta, the last frame with the nearest assigned beta
        for (std::size_t t = 0; t < targets.size(); ++t) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < path.frames.size(); ++k) {
                const double b = std::max(path.frames[k].beta_assigned, 1e-300);
                const double d = std::abs(std::log(b / targets[t]));
                if (d <= best_d) {
                    best_d = d;
                    best = k;
                }
            }
            realizations[t].push_back(path.frames[best].image);
        }
    }

    const int side = std::max(4, (std::min(cfg.grid.nx, cfg.grid.ny) * cfg.nps_roi_frac_percent) / 100);
    const RoiRect roi{(cfg.grid.nx - side) / 2, (cfg.grid.ny - side) / 2, side, side};

    std::vector<NPSResult> seq;
    for (std::size_t t = 0; t < targets.size(); ++t) seq.push_back(nps(realizations[t], roi));

    for (std::size_t t = 0; t < targets.size(); ++t) {
        char name[64];
        std::snprintf(name, sizeof(name), "nps_%02zu.pbir", t);
        const std::string spath = out_path(cfg, name);
        ensure_writable(spath, force);
        ImageVolume spec;
        spec.grid = {seq[t].nx, seq[t].ny, seq[t].fx[1] - seq[t].fx[0], seq[t].fy[1] - seq[t].fy[0]};
        spec.unit = PixelUnit::HU; // power values; axes are spatial frequency
        spec.values = seq[t].spectrum;
        write_image(spath, spec, meta_for(cfg, "nps"));
        res.outputs.push_back(spath);
    }

    const std::string radial = out_path(cfg, "nps_radial.csv");
    ensure_writable(radial, force);
    {
        std::ofstream out(radial);
        out << "freq_per_mm";
        for (std::size_t t = 0; t < targets.size(); ++t)
            out << ",nps_beta" << format_num(targets[t]) << ",normalized_beta"
                << format_num(targets[t]);
        out << "\n";
        std::vector<double> total(targets.size(), 0.0);
        for (std::size_t t = 0; t < targets.size(); ++t)
            for (double v : seq[t].radial_profile) total[t] += v;
        for (std::size_t b = 0; b < seq[0].radial_profile.size(); ++b) {
            out << format_num(seq[0].radial_freq[b]);
            for (std::size_t t = 0; t < targets.size(); ++t)
                out << "," << format_num(seq[t].radial_profile[b]) << ","
                    << format_num(total[t] > 0 ? seq[t].radial_profile[b] / total[t] : 0.0);
            out << "\n";
        }
    }
    res.outputs.push_back(radial);

    const std::string peaks = out_path(cfg, "nps_peaks.csv");
    ensure_writable(peaks, force);
    {
        const PeakPath pp = nps_peak_path(seq);
        std::ofstream out(peaks);
        out << "target_beta,peak_freq_per_mm\n";
        for (std::size_t t = 0; t < targets.size(); ++t)
            out << format_num(targets[t]) << "," << format_num(pp.peaks[t]) << "\n";
    }
    res.outputs.push_back(peaks);
    return res;
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"pbir: penalized weighted least-squares CT reconstruction paths"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    bool force = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--override", overrides, "section.key=value overrides");
        sub->add_flag("--force", force, "overwrite existing outputs");
    };

    CLI::App* c_phantom = app.add_subcommand("phantom", "rasterize the phantom to an HU image");
    CLI::App* c_sim = app.add_subcommand("simulate", "simulate Poisson projection data");
    CLI::App* c_recon = app.add_subcommand("recon", "direct reconstruction (fbp, sqs, admm)");
    CLI::App* c_path = app.add_subcommand("path", "path-seeking reconstruction (rog, dog)");
    CLI::App* c_metrics = app.add_subcommand("metrics", "per-frame RMSD/MAD against references");
    CLI::App* c_nps = app.add_subcommand("nps", "noise power spectra along a path");
    for (CLI::App* sub : {c_phantom, c_sim, c_recon, c_path, c_metrics, c_nps}) add_common(sub);

    std::string algorithm, engine;
    double beta = -1.0;
    int n_opt = -1, n_seeds = -1;
    c_recon->add_option("--algorithm", algorithm, "fbp | sqs | admm");
    c_recon->add_option("--beta", beta, "tuning parameter");
    c_path->add_option("--engine", engine, "rog | dog");
    c_path->add_option("--n-opt", n_opt, "optimization iterations per frame");
    c_nps->add_option("--engine", engine, "rog | dog");
    c_nps->add_option("--n-seeds", n_seeds, "noise realizations");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (!algorithm.empty()) overrides.push_back("solver.algorithm=" + algorithm);
        if (beta >= 0.0) overrides.push_back("solver.beta=" + format_num(beta));
        if (!engine.empty()) overrides.push_back("path.engine=" + engine);
        if (n_opt >= 0) overrides.push_back("path.n_opt=" + std::to_string(n_opt));
        if (n_seeds > 0) overrides.push_back("nps.n_seeds=" + std::to_string(n_seeds));
        const ExperimentConfig cfg = ExperimentConfig::load(config_path, overrides);

        CommandResult res;
        if (c_phantom->parsed()) res = cmd_phantom(cfg, force);
        else if (c_sim->parsed()) res = cmd_simulate(cfg, force);
        else if (c_recon->parsed()) res = cmd_recon(cfg, force);
        else if (c_path->parsed()) res = cmd_path(cfg, force);
        else if (c_metrics->parsed()) res = cmd_metrics(cfg, force);
        else if (c_nps->parsed()) res = cmd_nps(cfg, force);
        for (const auto& o : res.outputs) std::cout << o << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "pbir: " << e.what() << "\n";
        return 1;
    }
}

} // namespace pbir
