#include "pbir/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pbir/io.hpp"

namespace pbir {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace

Config Config::from_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config: bad section header on line " +
                                         std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key = value on line " +
                                     std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::runtime_error("config: empty key on line " + std::to_string(lineno));
        cfg.kv_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str());
}

void Config::set(const std::string& keyval) {
    const auto eq = keyval.find('=');
    if (eq == std::string::npos)
        throw std::runtime_error("override must look like section.key=value: " + keyval);
    set(trim(keyval.substr(0, eq)), trim(keyval.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) { kv_[key] = value; }

bool Config::has(const std::string& key) const { return kv_.count(key) != 0; }

std::string Config::get(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw std::runtime_error("config: missing key " + key);
    return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& def) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
}

double Config::num(const std::string& key) const {
    const std::string v = get(key);
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("config: key " + key + " is not a number: " + v);
    }
    if (pos != v.size()) throw std::runtime_error("config: key " + key + " is not a number: " + v);
    return d;
}

double Config::num_or(const std::string& key, double def) const {
    return has(key) ? num(key) : def;
}

int Config::integer(const std::string& key) const {
    const double d = num(key);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d)
        throw std::runtime_error("config: key " + key + " is not an integer");
    return i;
}

int Config::integer_or(const std::string& key, int def) const {
    return has(key) ? integer(key) : def;
}

bool Config::flag_or(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const std::string v = get(key);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw std::runtime_error("config: key " + key + " is not a boolean: " + v);
}

std::uint64_t Config::hash() const {
    std::string canon;
    for (const auto& [k, v] : kv_) { // std::map iterates sorted
        canon += k;
        canon += '=';
        canon += v;
        canon += '\n';
    }
    return fnv1a64(canon);
}

ExperimentConfig ExperimentConfig::load(const std::string& path,
                                        const std::vector<std::string>& overrides) {
    Config cfg = Config::load(path);
    for (const auto& o : overrides) cfg.set(o);
    return from_config(std::move(cfg), path);
}

ExperimentConfig ExperimentConfig::from_config(Config cfg, const std::string& origin) {
    ExperimentConfig ec;
    ec.raw = std::move(cfg);
    ec.config_path = origin;
    const Config& c = ec.raw;

    ec.output_dir = c.get_or("output_dir", "out");
    ec.strict = c.flag_or("strict", false);

    ec.phantom_file = c.get_or("phantom.file", "");
    ec.phantom_builtin = c.get_or("phantom.builtin", "water");
    if (!ec.phantom_file.empty() && !std::filesystem::exists(ec.phantom_file))
        throw std::runtime_error("config: phantom.file does not exist: " + ec.phantom_file);
    if (ec.phantom_builtin != "water" && ec.phantom_builtin != "abdomen")
        throw std::runtime_error("config: phantom.builtin must be water or abdomen");

    ec.grid.nx = c.integer_or("grid.nx", 128);
    ec.grid.ny = c.integer_or("grid.ny", ec.grid.nx);
    ec.grid.dx = c.num_or("grid.dx", 400.0 / ec.grid.nx);
    ec.grid.dy = c.num_or("grid.dy", ec.grid.dx);
    ec.grid.validate();

    const std::string beam = c.get_or("geometry.beam", "parallel");
    if (beam == "parallel") ec.beam = BeamType::Parallel;
    else if (beam == "fan") ec.beam = BeamType::Fan;
    else throw std::runtime_error("config: geometry.beam must be parallel or fan");
    ec.n_views = c.integer_or("geometry.n_views", 360);
    ec.n_dets = c.integer_or("geometry.n_dets", (ec.grid.nx * 3) / 2);
    ec.det_spacing = c.num_or("geometry.det_spacing", ec.grid.dx);
    ec.source_to_iso = c.num_or("geometry.source_to_iso", 2.0 * ec.grid.nx * ec.grid.dx);
    ec.source_to_det = c.num_or("geometry.source_to_det", 2.0 * ec.source_to_iso);

    ec.I0 = c.num_or("simulation.I0", 2e5);
    ec.seed = static_cast<std::uint64_t>(c.num_or("simulation.seed", 1));
    ec.noiseless = c.flag_or("simulation.noiseless", false);

    ec.penalty.delta_hu = c.num_or("penalty.delta_hu", 5.0);
    const int neigh = c.integer_or("penalty.neighborhood", 4);
    if (neigh != 4 && neigh != 8)
        throw std::runtime_error("config: penalty.neighborhood must be 4 or 8");
    ec.penalty.eight_neighbor = neigh == 8;
    ec.penalty.validate();

    ec.algorithm = c.get_or("solver.algorithm", "admm");
    if (ec.algorithm != "fbp" && ec.algorithm != "sqs" && ec.algorithm != "admm")
        throw std::runtime_error("config: solver.algorithm must be fbp, sqs, or admm");
    ec.n_iters = c.integer_or("solver.n_iters", 50);
    ec.n_subsets = c.integer_or("solver.n_subsets", 20);
    ec.taper_iters = c.integer_or("solver.taper_iters", 0);
    ec.taper_subsets = c.integer_or("solver.taper_subsets", 4);
    if (ec.taper_iters < 0 || ec.taper_subsets < 1)
        throw std::runtime_error("config: bad solver taper block");
    ec.rho = c.num_or("solver.rho", 0.5);
    ec.n_inner = c.integer_or("solver.n_inner", 2);
    ec.init = c.get_or("solver.init", "fbp");
    if (ec.init != "fbp" && ec.init != "zero")
        throw std::runtime_error("config: solver.init must be fbp or zero");
    ec.beta = c.num_or("solver.beta", 0.0);
    ec.fbp_filter = c.get_or("solver.fbp_filter", "ramp");
    if (ec.fbp_filter != "ramp" && ec.fbp_filter != "hann")
        throw std::runtime_error("config: solver.fbp_filter must be ramp or hann");
    if (ec.n_iters < 0 || ec.n_subsets < 1 || !(ec.rho > 0.0) || ec.n_inner < 1)
        throw std::runtime_error("config: bad solver block");

    ec.engine = c.get_or("path.engine", "dog");
    if (ec.engine != "rog" && ec.engine != "dog")
        throw std::runtime_error("config: path.engine must be rog or dog");
    ec.path.beta1 = c.num_or("path.beta1", 5e3);
    ec.path.beta2 = c.num_or("path.beta2", 2e5);
    ec.path.n_frames = c.integer_or("path.n_frames", 40);
    ec.path.p = c.num_or("path.p", 0.2);
    ec.path.delta_v_hu = c.num_or("path.delta_v_hu", 1.0);
    ec.path.n_opt = c.integer_or("path.n_opt", 2);
    ec.path.beta_ratio = c.num_or("path.beta_ratio", 1.45);
    ec.path.n_subsets_ps = c.integer_or("path.n_subsets_ps", ec.engine == "rog" ? 5 : 10);
    ec.path.n_subsets_opt = c.integer_or("path.n_subsets_opt", ec.engine == "rog" ? 20 : 10);
    ec.path.rho = c.num_or("path.rho", ec.rho);
    ec.path.n_inner = c.integer_or("path.n_inner", ec.n_inner);
    ec.path.direction = c.get_or("path.direction", "increasing") == "decreasing"
                            ? PathDirection::Decreasing
                            : PathDirection::Increasing;
    ec.path.validate();

    for (const auto& f : split_list(c.get_or("metrics.references", ""))) {
        if (!std::filesystem::exists(f))
            throw std::runtime_error("config: metrics reference does not exist: " + f);
        ec.references.push_back(f);
    }
    ec.manifest = c.get_or("metrics.manifest", "");

    ec.nps_seeds = c.integer_or("nps.n_seeds", 8);
    for (const auto& b : split_list(c.get_or("nps.betas", ""))) ec.nps_betas.push_back(std::stod(b));
    ec.nps_roi_frac_percent = c.integer_or("nps.roi_percent", 25);
    if (ec.nps_seeds < 2 || ec.nps_roi_frac_percent < 1 || ec.nps_roi_frac_percent > 100)
        throw std::runtime_error("config: bad nps block");

    ec.pgm = c.flag_or("export.pgm", false);
    ec.pgm_window = c.num_or("export.window_hu", 400.0);
    ec.pgm_level = c.num_or("export.level_hu", 0.0);

    ec.make_geometry().validate();
    return ec;
}

ScanGeometry ExperimentConfig::make_geometry() const {
    if (beam == BeamType::Parallel)
        return make_parallel_geometry(grid, n_views, n_dets, det_spacing);
    return make_fan_geometry(grid, n_views, n_dets, det_spacing, source_to_iso, source_to_det);
}

EllipsePhantom ExperimentConfig::make_phantom() const {
    if (!phantom_file.empty()) return load_phantom(phantom_file);
    return phantom_builtin == "water" ? water_cylinder(grid) : abdomen_phantom(grid);
}

} // namespace pbir
