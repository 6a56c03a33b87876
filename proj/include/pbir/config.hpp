#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pbir/metrics.hpp"
#include "pbir/pathseek.hpp"

namespace pbir {

/// Key/value configuration with [section] blocks. Keys are addressed as
/// "section.key" ("key" alone for the top level); '#' starts a comment.
class Config {
  public:
    static Config load(const std::string& path);
    static Config from_string(const std::string& text);

    /// Apply a "section.key=value" override (CLI --override).
    void set(const std::string& keyval);
    void set(const std::string& key, const std::string& value);

    bool has(const std::string& key) const;
    std::string get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& def) const;
    double num(const std::string& key) const;
    double num_or(const std::string& key, double def) const;
    int integer(const std::string& key) const;
    int integer_or(const std::string& key, int def) const;
    bool flag_or(const std::string& key, bool def) const;

    /// FNV-1a over the canonical sorted "key=value" listing, after overrides.
    std::uint64_t hash() const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
};

/// Typed experiment description assembled from a Config. Validation happens
/// here: referenced paths must exist and numeric ranges are checked by the
/// owning types.
struct ExperimentConfig {
    Config raw;
    std::string config_path;

    std::string output_dir = "out";
    bool strict = false;

    std::string phantom_file; // empty: built-in water cylinder
    std::string phantom_builtin = "water"; // water | abdomen

    ImageGrid grid{128, 128, 3.125, 3.125};
    BeamType beam = BeamType::Parallel;
    int n_views = 360;
    int n_dets = 0; // 0: defaults to 1.5 * nx
    double det_spacing = 0.0; // 0: defaults to dx
    double source_to_iso = 0.0, source_to_det = 0.0;

    double I0 = 2e5;
    std::uint64_t seed = 1;
    bool noiseless = false;

    HuberPenalty penalty;

    std::string algorithm = "admm"; // fbp | sqs | admm
    int n_iters = 50;
    int n_subsets = 20;
    int taper_iters = 0; // optional second stage with fewer subsets
    int taper_subsets = 4;
    double rho = 0.5;
    int n_inner = 2;
    std::string init = "fbp"; // fbp | zero
    double beta = 0.0;
    std::string fbp_filter = "ramp"; // ramp | hann

    std::string engine = "dog"; // rog | dog
    PathConfig path;

    std::vector<std::string> references; // image files for cmd_metrics
    std::string manifest;                // path manifest for cmd_metrics

    int nps_seeds = 8;
    std::vector<double> nps_betas; // target path betas for cmd_nps frames
    int nps_roi_frac_percent = 25;

    bool pgm = false;
    double pgm_window = 400.0;
    double pgm_level = 0.0;

    static ExperimentConfig load(const std::string& path,
                                 const std::vector<std::string>& overrides = {});
    static ExperimentConfig from_config(Config cfg, const std::string& origin);

    ScanGeometry make_geometry() const;
    EllipsePhantom make_phantom() const;
    std::uint64_t hash() const { return raw.hash(); }
};

} // namespace pbir
