#include "wakerom/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "wakerom/autoencoder.hpp"
#include "wakerom/errors.hpp"
#include "wakerom/io.hpp"
#include "wakerom/lpv.hpp"
#include "wakerom/pod.hpp"
#include "wakerom/svg.hpp"

namespace wakerom {

namespace fs = std::filesystem;

namespace {

void apply_threads(const ExperimentConfig& cfg) {
    int threads = cfg.threads;
    if (const char* env = std::getenv("WAKEROM_THREADS")) {
        try {
            threads = std::max(1, std::stoi(env));
        } catch (const std::exception&) {
            throw ConfigError("WAKEROM_THREADS is not an integer");
        }
    }
#ifdef _OPENMP
    omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

std::string data_dir(const ExperimentConfig& cfg) { return cfg.outdir + "/data"; }
std::string models_dir(const ExperimentConfig& cfg) { return cfg.outdir + "/models"; }
std::string reports_dir(const ExperimentConfig& cfg) { return cfg.outdir + "/reports"; }
std::string plots_dir(const ExperimentConfig& cfg) { return cfg.outdir + "/plots"; }

void ensure_run_dir(const ExperimentConfig& cfg) {
    fs::create_directories(data_dir(cfg));
    fs::create_directories(models_dir(cfg));
    fs::create_directories(reports_dir(cfg));
    fs::create_directories(plots_dir(cfg));
    write_kv(cfg.outdir + "/config.resolved.cfg", cfg.to_kv());
}

void require_file(const std::string& path, const std::string& producer) {
    if (!file_exists(path))
        throw ConfigError("missing prerequisite " + path + " - run '" + producer + "' first");
}

std::string dataset_path(const ExperimentConfig& cfg, const std::string& which) {
    return data_dir(cfg) + "/" + which + ".mat";
}

std::string kmeans_path(const ExperimentConfig& cfg, const std::string& codes, int n_rho) {
    return models_dir(cfg) + "/kmeans_" + codes + "_nrho" + std::to_string(n_rho) + ".bundle";
}

ArchitectureSpec cae_arch() { return ArchitectureSpec{}; }
const std::vector<int> kCnnChannels = {4, 8, 10, 12};

// ---- model (de)serialization ------------------------------------------

void add_blobs(Bundle& b, const std::vector<std::pair<std::string, Eigen::VectorXd>>& blobs,
               const std::string& prefix = "") {
    for (const auto& [name, v] : blobs) b.add(prefix + name, v);
}

void assign_encoder(Encoder& enc, const Bundle& b, const std::string& prefix) {
    auto fetch = [&](const std::string& name, Eigen::VectorXd& dst) {
        const Eigen::MatrixXd& m = b.get(prefix + name);
        if (m.size() != dst.size())
            throw IoError("checkpoint blob '" + prefix + name + "' has the wrong size");
        dst = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    };
    for (size_t l = 0; l < enc.convs.size(); ++l) {
        fetch("encoder.conv" + std::to_string(l) + ".weights", enc.convs[l].weights);
        fetch("encoder.conv" + std::to_string(l) + ".bias", enc.convs[l].bias);
    }
    fetch("encoder.fc.weights", enc.fc.weights);
    fetch("encoder.fc.bias", enc.fc.bias);
}

void assign_decoder(CaeDecoder& dec, const Bundle& b, const std::string& prefix) {
    auto fetch = [&](const std::string& name, Eigen::VectorXd& dst) {
        const Eigen::MatrixXd& m = b.get(prefix + name);
        if (m.size() != dst.size())
            throw IoError("checkpoint blob '" + prefix + name + "' has the wrong size");
        dst = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    };
    fetch("decoder.fc.weights", dec.fc.weights);
    fetch("decoder.fc.bias", dec.fc.bias);
    for (size_t l = 0; l < dec.deconvs.size(); ++l) {
        fetch("decoder.deconv" + std::to_string(l) + ".weights", dec.deconvs[l].weights);
        fetch("decoder.deconv" + std::to_string(l) + ".bias", dec.deconvs[l].bias);
    }
    const Eigen::MatrixXd& vals = b.get(prefix + "decoder.interp.values");
    if (vals.size() != dec.interp.map.nnz())
        throw IoError("checkpoint blob '" + prefix + "decoder.interp.values' has the wrong size");
    for (int i = 0; i < vals.size(); ++i) dec.interp.map.values()[i] = vals.data()[i];
}

std::vector<std::pair<std::string, Eigen::VectorXd>> decoder_blobs(const CaeDecoder& dec) {
    std::vector<std::pair<std::string, Eigen::VectorXd>> blobs;
    blobs.emplace_back("decoder.fc.weights", dec.fc.weights);
    blobs.emplace_back("decoder.fc.bias", dec.fc.bias);
    for (size_t l = 0; l < dec.deconvs.size(); ++l) {
        blobs.emplace_back("decoder.deconv" + std::to_string(l) + ".weights",
                           dec.deconvs[l].weights);
        blobs.emplace_back("decoder.deconv" + std::to_string(l) + ".bias", dec.deconvs[l].bias);
    }
    blobs.emplace_back("decoder.interp.values",
                       Eigen::Map<const Eigen::VectorXd>(dec.interp.map.values().data(),
                                                         dec.interp.map.nnz()));
    return blobs;
}

void stamp_manifest(Bundle& b, const ExperimentConfig& cfg, const std::string& method,
                    int n_rho) {
    b.set("method", method);
    b.set("n_rho", std::to_string(n_rho));
    b.set("seed", std::to_string(cfg.seed));
    b.set("image_h", std::to_string(cfg.image_h));
    b.set("image_w", std::to_string(cfg.image_w));
}

void check_manifest(const Bundle& b, const std::string& path, const std::string& method,
                    int n_rho) {
    const std::string* m = b.find("method");
    const std::string* r = b.find("n_rho");
    if (!m || *m != method || !r || std::stoi(*r) != n_rho)
        throw IoError(path + " does not hold a " + method + " checkpoint for n_rho " +
                      std::to_string(n_rho));
}

CaeModel rebuild_cae(const ExperimentConfig& cfg, const GridSpec& grid, int n_rho,
                     uint64_t seed) {
    const InterpPair interp = build_interp(grid, cfg.image_h, cfg.image_w);
    return make_cae(grid, interp, n_rho, cae_arch(), seed);
}

KMeansModel kmeans_from_bundle(const Bundle& b) {
    KMeansModel km;
    km.centroids = b.get("centroids");
    km.k = static_cast<int>(km.centroids.rows());
    const Eigen::MatrixXd& lab = b.get("labels");
    km.labels.resize(lab.size());
    for (int i = 0; i < lab.size(); ++i) km.labels[i] = static_cast<int>(lab.data()[i]);
    if (const std::string* s = b.find("kmeans_seed")) km.seed = std::stoull(*s);
    if (const std::string* s = b.find("kmeans_iterations")) km.iterations = std::stoi(*s);
    if (const std::string* s = b.find("kmeans_inertia")) km.inertia = std::stod(*s);
    return km;
}

void kmeans_to_bundle(Bundle& b, const KMeansModel& km) {
    b.add("centroids", km.centroids);
    Eigen::VectorXd lab(km.labels.size());
    for (size_t i = 0; i < km.labels.size(); ++i) lab[i] = km.labels[i];
    b.add("labels", lab);
    b.set("k", std::to_string(km.k));
    b.set("kmeans_seed", std::to_string(km.seed));
    b.set("kmeans_iterations", std::to_string(km.iterations));
    b.set("kmeans_inertia", format_double(km.inertia));
}

void write_loss_curve(const ExperimentConfig& cfg, const std::string& tag,
                      const TrainResult& result) {
    std::vector<std::vector<std::string>> rows;
    for (size_t e = 0; e < result.loss_curve.size(); ++e)
        rows.push_back({std::to_string(e), format_double(result.loss_curve[e])});
    write_csv(models_dir(cfg) + "/loss_" + tag + ".csv", {"epoch", "loss"}, rows);
}

// ---- per-method training ------------------------------------------------

void train_pod_model(const ExperimentConfig& cfg, const SnapshotSet& train, int n_rho) {
    PodBasis basis = pod_fit(train.states, n_rho);
    Bundle b;
    stamp_manifest(b, cfg, "pod", n_rho);
    b.add("modes", basis.modes);
    b.add("singular_values", basis.singular_values);
    b.write(model_path(cfg, "pod", n_rho));
}

KMeansModel obtain_kmeans(const ExperimentConfig& cfg, const std::string& codes_tag,
                          const Eigen::MatrixXd& codes, int n_rho) {
    const std::string path = kmeans_path(cfg, codes_tag, n_rho);
    if (file_exists(path)) return kmeans_from_bundle(Bundle::read(path));
    KMeansModel km = kmeans_fit(codes, cfg.clusters, cfg.seed, cfg.kmeans_restarts);
    Bundle b;
    b.set("codes", codes_tag);
    b.set("n_rho", std::to_string(n_rho));
    kmeans_to_bundle(b, km);
    b.write(path);
    return km;
}

void train_cpod_model(const ExperimentConfig& cfg, const SnapshotSet& train, int n_rho) {
    PodBasis basis = pod_fit(train.states, n_rho);
    Eigen::MatrixXd codes = (basis.modes.transpose() * train.states).transpose();
    KMeansModel km = obtain_kmeans(cfg, "pod", codes, n_rho);
    ClusteredPodModel model = cpod_fit(train.states, n_rho, km);

    Bundle b;
    stamp_manifest(b, cfg, "cpod", n_rho);
    b.set("k", std::to_string(model.kmeans.k));
    b.add("modes", model.global.modes);
    b.add("singular_values", model.global.singular_values);
    kmeans_to_bundle(b, model.kmeans);
    for (int l = 0; l < model.kmeans.k; ++l) {
        b.add("cluster" + std::to_string(l) + ".modes", model.cluster_bases[l]);
        b.add("cluster" + std::to_string(l) + ".composed", model.composed_decoders[l]);
    }
    b.write(model_path(cfg, "cpod", n_rho));
}

void train_cae_model(const ExperimentConfig& cfg, const SnapshotSet& train, int n_rho) {
    const GridSpec grid = cfg.make_grid();
    const InterpPair interp = build_interp(grid, cfg.image_h, cfg.image_w);
    CaeModel model = make_cae(grid, interp, n_rho, cae_arch(), cfg.seed);
    TrainResult result = train_cae(model, train, interp, cfg.train_config());
    write_loss_curve(cfg, "cae_nrho" + std::to_string(n_rho), result);

    Bundle b;
    stamp_manifest(b, cfg, "cae", n_rho);
    b.set("unflatten", std::to_string(model.decoder.unflatten.c) + "x" +
                           std::to_string(model.decoder.unflatten.h) + "x" +
                           std::to_string(model.decoder.unflatten.w));
    b.set("final_loss", format_double(result.final_loss));
    add_blobs(b, parameter_blobs(model));
    b.write(model_path(cfg, "cae", n_rho));
}

void train_cnn_model(const ExperimentConfig& cfg, const SnapshotSet& train, int n_rho) {
    const GridSpec grid = cfg.make_grid();
    const InterpPair interp = build_interp(grid, cfg.image_h, cfg.image_w);
    PodBasis basis = pod_fit(train.states, cfg.pod_r);
    CnnModel model = make_cnn(interp, basis, n_rho, kCnnChannels, cfg.seed);
    TrainResult result = train_cnn(model, train, interp, cfg.train_config());
    write_loss_curve(cfg, "cnn_nrho" + std::to_string(n_rho), result);

    Bundle b;
    stamp_manifest(b, cfg, "cnn", n_rho);
    b.set("pod_r", std::to_string(cfg.pod_r));
    b.set("final_loss", format_double(result.final_loss));
    add_blobs(b, parameter_blobs(model.encoder));
    b.add("mix", Eigen::MatrixXd(model.mix));
    b.add("basis", model.basis);
    b.write(model_path(cfg, "cnn", n_rho));
}

CaeModel load_cae_model(const ExperimentConfig& cfg, int n_rho) {
    const std::string path = model_path(cfg, "cae", n_rho);
    require_file(path, "train --method cae");
    Bundle b = Bundle::read(path);
    check_manifest(b, path, "cae", n_rho);
    const GridSpec grid = cfg.make_grid();
    CaeModel model = rebuild_cae(cfg, grid, n_rho, cfg.seed);
    assign_encoder(model.encoder, b, "");
    assign_decoder(model.decoder, b, "");
    return model;
}

void train_icae_model(const ExperimentConfig& cfg, const SnapshotSet& train, int n_rho) {
    CaeModel cae = load_cae_model(cfg, n_rho);
    const GridSpec grid = cfg.make_grid();
    const InterpPair interp = build_interp(grid, cfg.image_h, cfg.image_w);

    Eigen::MatrixXd codes(train.count(), n_rho);
    for (int s = 0; s < train.count(); ++s)
        codes.row(s) = encode(cae, to_image(interp, train.states.col(s))).transpose();
    KMeansModel km = obtain_kmeans(cfg, "cae", codes, n_rho);

    std::vector<TrainResult> curves;
    IcaeModel model = train_icae(cae, km, train, interp, cfg.train_config(), &curves);
    for (size_t l = 0; l < curves.size(); ++l)
        write_loss_curve(cfg, "icae_nrho" + std::to_string(n_rho) + "_cluster" +
                                  std::to_string(l),
                         curves[l]);

    Bundle b;
    stamp_manifest(b, cfg, "icae", n_rho);
    b.set("k", std::to_string(model.kmeans.k));
    kmeans_to_bundle(b, model.kmeans);
    add_blobs(b, parameter_blobs(model.encoder));
    for (int l = 0; l < model.kmeans.k; ++l)
        add_blobs(b, decoder_blobs(model.decoders[l]), "cluster" + std::to_string(l) + ".");
    b.write(model_path(cfg, "icae", n_rho));
}

} // namespace

std::string model_path(const ExperimentConfig& cfg, const std::string& method, int n_rho) {
    return models_dir(cfg) + "/" + method + "_nrho" + std::to_string(n_rho) + ".bundle";
}

std::string report_path(const ExperimentConfig& cfg, const std::string& method, int n_rho,
                        const std::string& which) {
    return reports_dir(cfg) + "/" + method + "_nrho" + std::to_string(n_rho) + "_" + which +
           ".csv";
}

SnapshotSet generate_dataset(const ExperimentConfig& cfg, int snapshots) {
    const GridSpec grid = cfg.make_grid();
    if (cfg.scenario == "synthetic")
        return synthetic_wake(grid, cfg.synthetic_modes, snapshots, cfg.seed);

    DiscreteOperators ops = assemble_operators(grid, cfg.reynolds);
    SimulateOptions opts;
    const double sample_dt = cfg.t_window / snapshots;
    opts.sample_every = std::max(1, static_cast<int>(std::ceil(sample_dt / cfg.dt)));
    opts.dt = sample_dt / opts.sample_every;
    opts.t_end = cfg.t_transient + cfg.t_window;
    opts.t_sample_start = cfg.t_transient + 0.5 * sample_dt * opts.sample_every;
    SnapshotSet set = simulate_wake(ops, opts);
    if (set.count() > snapshots) {
        // drop the oldest extras so exactly `snapshots` remain
        const int extra = set.count() - snapshots;
        set.states = set.states.rightCols(snapshots).eval();
        set.times.erase(set.times.begin(), set.times.begin() + extra);
    }
    if (set.count() != snapshots)
        throw SolverError("dataset generation produced " + std::to_string(set.count()) +
                              " snapshots instead of " + std::to_string(snapshots),
                          0.0);
    return set;
}

namespace {

void write_dataset(const ExperimentConfig& cfg, const std::string& which,
                   const SnapshotSet& set) {
    write_matrix(dataset_path(cfg, which), set.states);
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("dataset", cfg.dataset_id() + "-" + which);
    kv.emplace_back("scenario", cfg.scenario);
    kv.emplace_back("nx", std::to_string(cfg.nx));
    kv.emplace_back("ny", std::to_string(cfg.ny));
    kv.emplace_back("reynolds", format_double(cfg.reynolds));
    kv.emplace_back("seed", std::to_string(cfg.seed));
    kv.emplace_back("count", std::to_string(set.count()));
    std::string times;
    for (size_t i = 0; i < set.times.size(); ++i)
        times += (i ? "," : "") + format_double(set.times[i]);
    kv.emplace_back("times", times);
    write_kv(data_dir(cfg) + "/" + which + ".meta", kv);
}

} // namespace

SnapshotSet load_dataset(const ExperimentConfig& cfg, const std::string& which) {
    const std::string path = dataset_path(cfg, which);
    require_file(path, "generate");
    SnapshotSet set;
    set.grid = cfg.make_grid();
    set.states = read_matrix(path);
    auto kv = read_kv(data_dir(cfg) + "/" + which + ".meta");
    for (const auto& [k, v] : kv) {
        if (k != "times") continue;
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) set.times.push_back(std::stod(item));
    }
    set.validate();
    return set;
}

void cmd_generate(const ExperimentConfig& cfg) {
    cfg.validate();
    apply_threads(cfg);
    ensure_run_dir(cfg);

    SnapshotSet train, eval;
    if (cfg.eval_snapshots % cfg.train_snapshots == 0) {
        // one trajectory, the training set as an equidistant subset
        eval = generate_dataset(cfg, cfg.eval_snapshots);
        const int stride = cfg.eval_snapshots / cfg.train_snapshots;
        train.grid = eval.grid;
        train.states.resize(eval.states.rows(), cfg.train_snapshots);
        for (int s = 0; s < cfg.train_snapshots; ++s) {
            train.states.col(s) = eval.states.col((s + 1) * stride - 1);
            train.times.push_back(eval.times[(s + 1) * stride - 1]);
        }
    } else {
        eval = generate_dataset(cfg, cfg.eval_snapshots);
        train = generate_dataset(cfg, cfg.train_snapshots);
    }
    write_dataset(cfg, "train", train);
    write_dataset(cfg, "eval", eval);

    // operator container
    const GridSpec grid = cfg.make_grid();
    if (cfg.scenario != "synthetic") {
        DiscreteOperators ops = assemble_operators(grid, cfg.reynolds);
        Bundle b;
        b.set("n_v", std::to_string(ops.n_v));
        b.set("n_p", std::to_string(ops.n_p));
        b.set("reynolds", format_double(cfg.reynolds));
        b.add("mass", ops.mass);
        b.add("forcing", ops.forcing);
        auto add_csr = [&](const std::string& name, const CsrMatrix& m) {
            Eigen::VectorXd off(m.offsets().size()), col(m.col_indices().size()),
                val(m.values().size());
            for (size_t i = 0; i < m.offsets().size(); ++i) off[i] = m.offsets()[i];
            for (size_t i = 0; i < m.col_indices().size(); ++i) col[i] = m.col_indices()[i];
            for (size_t i = 0; i < m.values().size(); ++i) val[i] = m.values()[i];
            b.add(name + ".offsets", off);
            b.add(name + ".cols", col);
            b.add(name + ".values", val);
            b.set(name + ".rows", std::to_string(m.rows()));
            b.set(name + ".cols", std::to_string(m.cols()));
        };
        add_csr("diffusion", ops.diffusion);
        add_csr("divergence", ops.divergence);
        b.write(data_dir(cfg) + "/operators.bundle");
    }
}

void cmd_train(const ExperimentConfig& cfg, const std::string& method) {
    cfg.validate();
    apply_threads(cfg);
    ensure_run_dir(cfg);
    SnapshotSet train = load_dataset(cfg, "train");

    std::vector<std::string> todo;
    if (method.empty()) {
        // dependency order: icae needs cae
        for (const char* m : {"pod", "cnn", "cae", "cpod", "icae"})
            if (std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end())
                todo.push_back(m);
    } else {
        method_from_name(method);
        todo.push_back(method);
    }

    for (const std::string& m : todo) {
        for (int n_rho : cfg.nrho_list) {
            if (m == "pod") train_pod_model(cfg, train, n_rho);
            else if (m == "cpod") train_cpod_model(cfg, train, n_rho);
            else if (m == "cae") train_cae_model(cfg, train, n_rho);
            else if (m == "cnn") train_cnn_model(cfg, train, n_rho);
            else if (m == "icae") train_icae_model(cfg, train, n_rho);
        }
    }
}

void cmd_cluster(const ExperimentConfig& cfg) {
    cfg.validate();
    apply_threads(cfg);
    ensure_run_dir(cfg);
    SnapshotSet train = load_dataset(cfg, "train");
    const GridSpec grid = cfg.make_grid();
    const InterpPair interp = build_interp(grid, cfg.image_h, cfg.image_w);

    const bool want_cpod =
        std::find(cfg.methods.begin(), cfg.methods.end(), "cpod") != cfg.methods.end();
    const bool want_icae =
        std::find(cfg.methods.begin(), cfg.methods.end(), "icae") != cfg.methods.end();

    for (int n_rho : cfg.nrho_list) {
        if (want_cpod) {
            PodBasis basis = pod_fit(train.states, n_rho);
            Eigen::MatrixXd codes = (basis.modes.transpose() * train.states).transpose();
            obtain_kmeans(cfg, "pod", codes, n_rho);
        }
        if (want_icae) {
            CaeModel cae = load_cae_model(cfg, n_rho);
            Eigen::MatrixXd codes(train.count(), n_rho);
            for (int s = 0; s < train.count(); ++s)
                codes.row(s) = encode(cae, to_image(interp, train.states.col(s))).transpose();
            obtain_kmeans(cfg, "cae", codes, n_rho);
        }
    }
}

Parametrization load_parametrization(const ExperimentConfig& cfg, const std::string& method,
                                     int n_rho) {
    const GridSpec grid = cfg.make_grid();
    Parametrization p;
    p.name = method;
    p.n_rho = n_rho;

    if (method == "pod") {
        const std::string path = model_path(cfg, "pod", n_rho);
        require_file(path, "train --method pod");
        Bundle b = Bundle::read(path);
        check_manifest(b, path, "pod", n_rho);
        auto basis = std::make_shared<PodBasis>();
        basis->modes = b.get("modes");
        basis->singular_values = b.get("singular_values");
        basis->n_rho = n_rho;
        p.encode = [basis](const VelocityState& v) { return pod_encode(*basis, v); };
        p.decode = [basis](const Eigen::VectorXd& c) { return pod_decode(*basis, c); };
        return p;
    }
    if (method == "cpod") {
        const std::string path = model_path(cfg, "cpod", n_rho);
        require_file(path, "train --method cpod");
        Bundle b = Bundle::read(path);
        check_manifest(b, path, "cpod", n_rho);
        auto model = std::make_shared<ClusteredPodModel>();
        model->global.modes = b.get("modes");
        model->global.singular_values = b.get("singular_values");
        model->global.n_rho = n_rho;
        model->kmeans = kmeans_from_bundle(b);
        for (int l = 0; l < model->kmeans.k; ++l) {
            model->cluster_bases.push_back(b.get("cluster" + std::to_string(l) + ".modes"));
            model->composed_decoders.push_back(
                b.get("cluster" + std::to_string(l) + ".composed"));
        }
        p.k = model->kmeans.k;
        p.encode = [model](const VelocityState& v) { return pod_encode(model->global, v); };
        p.decode = [model](const Eigen::VectorXd& c) { return cpod_decode(*model, c); };
        p.label = [model](const Eigen::VectorXd& c) { return cpod_label(*model, c); };
        return p;
    }
    if (method == "cnn") {
        const std::string path = model_path(cfg, "cnn", n_rho);
        require_file(path, "train --method cnn");
        Bundle b = Bundle::read(path);
        check_manifest(b, path, "cnn", n_rho);
        const InterpPair interp = build_interp(grid, cfg.image_h, cfg.image_w);
        PodBasis basis;
        basis.modes = b.get("basis");
        basis.n_rho = static_cast<int>(basis.modes.cols());
        auto model = std::make_shared<CnnModel>(
            make_cnn(interp, basis, n_rho, kCnnChannels, cfg.seed));
        assign_encoder(model->encoder, b, "");
        model->mix = b.get("mix");
        auto ip = std::make_shared<InterpPair>(interp);
        p.encode = [model, ip](const VelocityState& v) {
            return encode(*model, to_image(*ip, v));
        };
        p.decode = [model](const Eigen::VectorXd& c) { return decode_cnn(*model, c); };
        return p;
    }
    if (method == "cae") {
        auto model = std::make_shared<CaeModel>(load_cae_model(cfg, n_rho));
        auto ip = std::make_shared<InterpPair>(build_interp(grid, cfg.image_h, cfg.image_w));
        p.encode = [model, ip](const VelocityState& v) {
            return encode(*model, to_image(*ip, v));
        };
        p.decode = [model](const Eigen::VectorXd& c) { return decode_cae(*model, c); };
        return p;
    }
    if (method == "icae") {
        const std::string path = model_path(cfg, "icae", n_rho);
        require_file(path, "train --method icae");
        Bundle b = Bundle::read(path);
        check_manifest(b, path, "icae", n_rho);
        CaeModel shape = rebuild_cae(cfg, grid, n_rho, cfg.seed);
        auto model = std::make_shared<IcaeModel>();
        model->image_shape = shape.image_shape;
        model->encoder = shape.encoder;
        assign_encoder(model->encoder, b, "");
        model->kmeans = kmeans_from_bundle(b);
        for (int l = 0; l < model->kmeans.k; ++l) {
            CaeDecoder dec = shape.decoder;
            assign_decoder(dec, b, "cluster" + std::to_string(l) + ".");
            model->decoders.push_back(std::move(dec));
        }
        p.k = model->kmeans.k;
        auto ip = std::make_shared<InterpPair>(build_interp(grid, cfg.image_h, cfg.image_w));
        p.encode = [model, ip](const VelocityState& v) {
            return encode(*model, to_image(*ip, v));
        };
        p.decode = [model](const Eigen::VectorXd& c) { return decode_icae(*model, c); };
        p.label = [model](const Eigen::VectorXd& c) { return kmeans_assign(model->kmeans, c); };
        return p;
    }
    throw ArgumentError("unknown method '" + method + "'");
}

namespace {

std::string csv_value(double v) {
    return std::isnan(v) ? std::string("undefined") : format_double(v);
}

void write_report_csv(const ExperimentConfig& cfg, const MetricsReport& rep,
                      const std::vector<double>& times, const std::string& which) {
    std::vector<std::string> header = {"index",         "time",
                                       "reconstruction", "rel_reconstruction",
                                       "convection",     "rel_convection",
                                       "residual",       "rel_residual",
                                       "label"};
    std::vector<std::vector<std::string>> rows;
    const size_t t_count = rep.reconstruction.size();
    for (size_t s = 0; s < t_count; ++s) {
        rows.push_back({std::to_string(s), format_double(times[s]),
                        csv_value(rep.reconstruction[s]), csv_value(rep.rel_reconstruction[s]),
                        csv_value(rep.convection[s]), csv_value(rep.rel_convection[s]),
                        csv_value(rep.residual[s]), csv_value(rep.rel_residual[s]),
                        rep.labels.empty() ? "" : std::to_string(rep.labels[s] + 1)});
    }
    rows.push_back({"average", "", csv_value(rep.avg_reconstruction),
                    csv_value(rep.avg_rel_reconstruction), csv_value(rep.avg_convection),
                    csv_value(rep.avg_rel_convection), csv_value(rep.avg_residual),
                    csv_value(rep.avg_rel_residual), ""});
    write_csv(report_path(cfg, rep.method, rep.n_rho, which), header, rows);

    std::vector<std::pair<std::string, std::string>> meta;
    meta.emplace_back("method", rep.method);
    meta.emplace_back("n_rho", std::to_string(rep.n_rho));
    meta.emplace_back("k", std::to_string(rep.k));
    meta.emplace_back("dataset", rep.dataset_id);
    meta.emplace_back("seed", std::to_string(rep.seed));
    write_kv(reports_dir(cfg) + "/" + rep.method + "_nrho" + std::to_string(rep.n_rho) + "_" +
                 which + ".meta",
             meta);
}

} // namespace

void cmd_eval(const ExperimentConfig& cfg) {
    cfg.validate();
    apply_threads(cfg);
    ensure_run_dir(cfg);
    const GridSpec grid = cfg.make_grid();
    DiscreteOperators ops = assemble_operators(grid, cfg.reynolds);
    ProjectorContext ctx(ops);

    for (const std::string& which : {std::string("train"), std::string("eval")}) {
        SnapshotSet data = load_dataset(cfg, which);
        for (const std::string& method : cfg.methods) {
            for (int n_rho : cfg.nrho_list) {
                Parametrization p = load_parametrization(cfg, method, n_rho);
                MetricsReport rep = evaluate(ops, ctx, data, p);
                rep.dataset_id = cfg.dataset_id() + "-" + which;
                rep.seed = cfg.seed;
                write_report_csv(cfg, rep, data.times, which);
            }
        }
    }
}

namespace {

struct ParsedReport {
    std::string method;
    int n_rho = 0;
    std::vector<double> series[6];  // the six metric columns
    std::vector<int> labels;
    double averages[6] = {};
};

double parse_metric(const std::string& s) {
    if (s == "undefined" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::stod(s);
}

ParsedReport parse_report_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    ParsedReport rep;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        while (cells.size() < 9) cells.push_back("");
        if (cells[0] == "average") {
            for (int m = 0; m < 6; ++m) rep.averages[m] = parse_metric(cells[2 + m]);
        } else {
            for (int m = 0; m < 6; ++m) rep.series[m].push_back(parse_metric(cells[2 + m]));
            if (!cells[8].empty()) rep.labels.push_back(std::stoi(cells[8]));
        }
    }
    return rep;
}

const char* kMetricNames[6] = {"reconstruction", "rel_reconstruction", "convection",
                               "rel_convection", "residual",           "rel_residual"};

} // namespace

void cmd_report(const ExperimentConfig& cfg) {
    cfg.validate();
    ensure_run_dir(cfg);

    for (const std::string& which : {std::string("train"), std::string("eval")}) {
        // comparison table, ordered by averaged reconstruction error per n_rho
        std::vector<MetricsReport> reports;
        std::vector<ParsedReport> parsed;
        for (const std::string& method : cfg.methods) {
            for (int n_rho : cfg.nrho_list) {
                const std::string path = report_path(cfg, method, n_rho, which);
                require_file(path, "eval");
                ParsedReport pr = parse_report_csv(path);
                pr.method = method;
                pr.n_rho = n_rho;
                parsed.push_back(pr);
                MetricsReport rep;
                rep.method = method;
                rep.n_rho = n_rho;
                rep.dataset_id = cfg.dataset_id() + "-" + which;
                rep.avg_reconstruction = pr.averages[0];
                rep.avg_rel_reconstruction = pr.averages[1];
                rep.avg_convection = pr.averages[2];
                rep.avg_rel_convection = pr.averages[3];
                rep.avg_residual = pr.averages[4];
                rep.avg_rel_residual = pr.averages[5];
                reports.push_back(rep);
            }
        }
        auto rows = compare(reports);
        std::vector<std::vector<std::string>> cells;
        for (const auto& r : rows)
            cells.push_back({std::to_string(r.n_rho), r.method,
                             csv_value(r.avg_reconstruction), csv_value(r.avg_rel_reconstruction),
                             csv_value(r.avg_convection), csv_value(r.avg_rel_convection),
                             csv_value(r.avg_residual), csv_value(r.avg_rel_residual)});
        write_csv(reports_dir(cfg) + "/comparison_" + which + ".csv",
                  {"n_rho", "method", "avg_reconstruction", "avg_rel_reconstruction",
                   "avg_convection", "avg_rel_convection", "avg_residual", "avg_rel_residual"},
                  cells);

        // averaged error vs n_rho, one chart per metric
        for (int m = 0; m < 6; ++m) {
            std::vector<SvgSeries> series;
            for (const std::string& method : cfg.methods) {
                SvgSeries s;
                s.name = method;
                for (const auto& pr : parsed) {
                    if (pr.method != method) continue;
                    s.x.push_back(pr.n_rho);
                    s.y.push_back(pr.averages[m]);
                }
                series.push_back(std::move(s));
            }
            write_line_chart(plots_dir(cfg) + "/" + kMetricNames[m] + "_vs_nrho_" + which +
                                 ".svg",
                             std::string(kMetricNames[m]) + " (" + which + ")", "n_rho",
                             kMetricNames[m], series, /*log_y=*/true);
        }

        // error over snapshot index, one chart per n_rho
        for (int n_rho : cfg.nrho_list) {
            std::vector<SvgSeries> series;
            for (const auto& pr : parsed) {
                if (pr.n_rho != n_rho) continue;
                SvgSeries s;
                s.name = pr.method;
                for (size_t i = 0; i < pr.series[0].size(); ++i) {
                    s.x.push_back(static_cast<double>(i));
                    s.y.push_back(pr.series[0][i]);
                }
                series.push_back(std::move(s));
            }
            write_line_chart(plots_dir(cfg) + "/reconstruction_over_time_nrho" +
                                 std::to_string(n_rho) + "_" + which + ".svg",
                             "reconstruction error over snapshots, n_rho = " +
                                 std::to_string(n_rho) + " (" + which + ")",
                             "snapshot", "error", series, /*log_y=*/true);
        }

        // cluster label strips
        for (const auto& pr : parsed) {
            if (pr.labels.empty()) continue;
            write_label_strip(plots_dir(cfg) + "/labels_" + pr.method + "_nrho" +
                                  std::to_string(pr.n_rho) + "_" + which + ".svg",
                              pr.method + " cluster labels, n_rho = " +
                                  std::to_string(pr.n_rho) + " (" + which + ")",
                              pr.labels, cfg.clusters);
        }
    }
}

void cmd_all(const ExperimentConfig& cfg) {
    cmd_generate(cfg);
    cmd_train(cfg);
    cmd_eval(cfg);
    cmd_report(cfg);
}

} // namespace wakerom
