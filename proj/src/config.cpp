#include "wakerom/config.hpp"

#include <algorithm>
#include <sstream>

#include "wakerom/errors.hpp"
#include "wakerom/io.hpp"
#include "wakerom/lpv.hpp"

namespace wakerom {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        const size_t a = item.find_first_not_of(" \t");
        const size_t b = item.find_last_not_of(" \t");
        out.push_back(a == std::string::npos ? "" : item.substr(a, b - a + 1));
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse number '" + v + "'");
    }
}

int parse_int(const std::string& key, const std::string& v) {
    const double d = parse_double(key, v);
    const int i = static_cast<int>(d);
    if (d != i) throw ConfigError("config key '" + key + "': expected an integer, got " + v);
    return i;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got " + v);
}

std::vector<ObstacleSpec> parse_obstacles(const std::string& v) {
    std::vector<ObstacleSpec> specs;
    if (v == "none" || v.empty()) return specs;
    for (const std::string& part : split(v, ';')) {
        if (part.rfind("circle:", 0) != 0)
            throw ConfigError("obstacles: expected circle:cx,cy,r entries, got '" + part + "'");
        const auto nums = split(part.substr(7), ',');
        if (nums.size() != 3) throw ConfigError("obstacles: circle needs cx,cy,r");
        specs.push_back({parse_double("obstacles", nums[0]), parse_double("obstacles", nums[1]),
                         parse_double("obstacles", nums[2])});
    }
    return specs;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::string join_strings(const std::vector<std::string>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

std::string obstacles_to_string(const std::vector<ObstacleSpec>& specs) {
    if (specs.empty()) return "none";
    std::string s;
    for (size_t i = 0; i < specs.size(); ++i) {
        s += (i ? ";" : "");
        s += "circle:" + format_double(specs[i].cx) + "," + format_double(specs[i].cy) + "," +
             format_double(specs[i].radius);
    }
    return s;
}

} // namespace

GridSpec ExperimentConfig::make_grid() const {
    GridSpec g = make_channel_grid(nx, ny, domain_lx, domain_ly, periodic_x, false);
    for (const ObstacleSpec& o : obstacles) g.add_circle_obstacle(o.cx, o.cy, o.radius);
    if (!periodic_x) g.inflow_profile = parabolic_inflow(ny, domain_ly, inflow_peak);
    g.body_force_x = body_force_x;
    return g;
}

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch = batch;
    tc.learning_rate = learning_rate;
    tc.milestones = milestones;
    tc.decay = decay;
    tc.seed = seed;
    return tc;
}

std::string ExperimentConfig::dataset_id() const {
    return scenario + "-nx" + std::to_string(nx) + "-ny" + std::to_string(ny) + "-seed" +
           std::to_string(seed);
}

void ExperimentConfig::validate() const {
    if (scenario != "single" && scenario != "double" && scenario != "synthetic")
        throw ConfigError("scenario must be single, double or synthetic");
    if (nx < 4 || ny < 4) throw ConfigError("grid must be at least 4x4");
    if (train_snapshots < 2 || eval_snapshots < 2)
        throw ConfigError("need at least two snapshots per dataset");
    if (nrho_list.empty()) throw ConfigError("nrho_list must not be empty");
    for (int r : nrho_list)
        if (r < 1) throw ConfigError("nrho values must be positive");
    if (clusters < 1) throw ConfigError("clusters must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    for (const std::string& m : methods) method_from_name(m);  // throws on unknown
    train_config().validate();
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "scenario") cfg.scenario = value;
    else if (key == "nx") cfg.nx = parse_int(key, value);
    else if (key == "ny") cfg.ny = parse_int(key, value);
    else if (key == "domain_lx") cfg.domain_lx = parse_double(key, value);
    else if (key == "domain_ly") cfg.domain_ly = parse_double(key, value);
    else if (key == "periodic_x") cfg.periodic_x = parse_bool(key, value);
    else if (key == "reynolds") cfg.reynolds = parse_double(key, value);
    else if (key == "obstacles") cfg.obstacles = parse_obstacles(value);
    else if (key == "inflow_peak") cfg.inflow_peak = parse_double(key, value);
    else if (key == "body_force_x") cfg.body_force_x = parse_double(key, value);
    else if (key == "dt") cfg.dt = parse_double(key, value);
    else if (key == "t_transient") cfg.t_transient = parse_double(key, value);
    else if (key == "t_window") cfg.t_window = parse_double(key, value);
    else if (key == "train_snapshots") cfg.train_snapshots = parse_int(key, value);
    else if (key == "eval_snapshots") cfg.eval_snapshots = parse_int(key, value);
    else if (key == "synthetic_modes") cfg.synthetic_modes = parse_int(key, value);
    else if (key == "image_h") cfg.image_h = parse_int(key, value);
    else if (key == "image_w") cfg.image_w = parse_int(key, value);
    else if (key == "methods") cfg.methods = split(value, ',');
    else if (key == "nrho_list") {
        cfg.nrho_list.clear();
        for (const std::string& s : split(value, ',')) cfg.nrho_list.push_back(parse_int(key, s));
    } else if (key == "clusters") cfg.clusters = parse_int(key, value);
    else if (key == "pod_r") cfg.pod_r = parse_int(key, value);
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_double(key, value));
    else if (key == "epochs") cfg.epochs = parse_int(key, value);
    else if (key == "batch") cfg.batch = parse_int(key, value);
    else if (key == "learning_rate") cfg.learning_rate = parse_double(key, value);
    else if (key == "milestones") {
        cfg.milestones.clear();
        for (const std::string& s : split(value, ','))
            cfg.milestones.push_back(parse_double(key, s));
    } else if (key == "decay") cfg.decay = parse_double(key, value);
    else if (key == "kmeans_restarts") cfg.kmeans_restarts = parse_int(key, value);
    else if (key == "threads") cfg.threads = parse_int(key, value);
    else if (key == "outdir") cfg.outdir = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::to_kv() const {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("scenario", scenario);
    kv.emplace_back("nx", std::to_string(nx));
    kv.emplace_back("ny", std::to_string(ny));
    kv.emplace_back("domain_lx", format_double(domain_lx));
    kv.emplace_back("domain_ly", format_double(domain_ly));
    kv.emplace_back("periodic_x", periodic_x ? "true" : "false");
    kv.emplace_back("reynolds", format_double(reynolds));
    kv.emplace_back("obstacles", obstacles_to_string(obstacles));
    kv.emplace_back("inflow_peak", format_double(inflow_peak));
    kv.emplace_back("body_force_x", format_double(body_force_x));
    kv.emplace_back("dt", format_double(dt));
    kv.emplace_back("t_transient", format_double(t_transient));
    kv.emplace_back("t_window", format_double(t_window));
    kv.emplace_back("train_snapshots", std::to_string(train_snapshots));
    kv.emplace_back("eval_snapshots", std::to_string(eval_snapshots));
    kv.emplace_back("synthetic_modes", std::to_string(synthetic_modes));
    kv.emplace_back("image_h", std::to_string(image_h));
    kv.emplace_back("image_w", std::to_string(image_w));
    kv.emplace_back("methods", join_strings(methods));
    kv.emplace_back("nrho_list", join_ints(nrho_list));
    kv.emplace_back("clusters", std::to_string(clusters));
    kv.emplace_back("pod_r", std::to_string(pod_r));
    kv.emplace_back("seed", std::to_string(seed));
    kv.emplace_back("epochs", std::to_string(epochs));
    kv.emplace_back("batch", std::to_string(batch));
    kv.emplace_back("learning_rate", format_double(learning_rate));
    kv.emplace_back("milestones", join_doubles(milestones));
    kv.emplace_back("decay", format_double(decay));
    kv.emplace_back("kmeans_restarts", std::to_string(kmeans_restarts));
    kv.emplace_back("threads", std::to_string(threads));
    kv.emplace_back("outdir", outdir);
    return kv;
}

ExperimentConfig preset_config(const std::string& scenario) {
    ExperimentConfig cfg;
    cfg.scenario = scenario;
    if (scenario == "synthetic") {
        return cfg;  // struct defaults are the synthetic preset
    }
    if (scenario == "single") {
        cfg.nx = 64;
        cfg.ny = 32;
        cfg.domain_lx = 40.0;
        cfg.domain_ly = 16.0;
        cfg.periodic_x = true;
        cfg.reynolds = 40.0;
        cfg.obstacles = {{8.0, 7.75, 2.0}};
        cfg.body_force_x = 0.02;
        cfg.dt = 0.12;
        cfg.t_transient = 150.0;
        cfg.t_window = 60.0;
        cfg.train_snapshots = 400;
        cfg.eval_snapshots = 800;
        cfg.image_h = 16;
        cfg.image_w = 32;
        cfg.nrho_list = {2, 3, 5, 8, 12};
        cfg.clusters = 5;
        cfg.epochs = 150;
        return cfg;
    }
    if (scenario == "double") {
        cfg.nx = 128;
        cfg.ny = 48;
        cfg.domain_lx = 60.0;
        cfg.domain_ly = 18.0;
        cfg.periodic_x = true;
        cfg.reynolds = 50.0;
        cfg.obstacles = {{10.0, 6.6, 1.5}, {10.0, 11.4, 1.5}};
        cfg.body_force_x = 0.02;
        cfg.dt = 0.1;
        cfg.t_transient = 200.0;
        cfg.t_window = 120.0;
        cfg.train_snapshots = 800;
        cfg.eval_snapshots = 1600;
        cfg.image_h = 24;
        cfg.image_w = 48;
        cfg.nrho_list = {2, 3, 5, 8, 12};
        cfg.clusters = 5;
        cfg.epochs = 150;
        cfg.methods = {"pod", "cae", "cpod", "icae"};  // no cnn in the two-cylinder runs
        return cfg;
    }
    throw ConfigError("unknown scenario '" + scenario + "'");
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    auto kv = read_kv(path);
    std::string scenario = "synthetic";
    for (const auto& [k, v] : kv)
        if (k == "scenario") scenario = v;
    for (const std::string& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + ov + "' is not key=value");
        if (ov.substr(0, eq) == "scenario") scenario = ov.substr(eq + 1);
    }
    ExperimentConfig cfg = preset_config(scenario);
    for (const auto& [k, v] : kv) apply_key(cfg, k, v);
    for (const std::string& ov : overrides) {
        const size_t eq = ov.find('=');
        apply_key(cfg, ov.substr(0, eq), ov.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

} // namespace wakerom
