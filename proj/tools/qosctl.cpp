// qosctl: command-line driver for ingestion, prompts, features, training,
// evaluation, sweeps and reports. See README.md for the config schema.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qos/errors.hpp"
#include "qos/evaluation.hpp"
#include "qos/features.hpp"
#include "qos/prompts.hpp"
#include "qos/synthetic.hpp"
#include "qos/training.hpp"
#include "qos/wsdream.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qos;

namespace {

struct RunConfig {
    fs::path data_dir;
    fs::path out = "qos-out";
    fs::path prompts;
    fs::path user_features;
    fs::path service_features;
    QosKind dataset = QosKind::throughput;
    double density = 0.05;
    Variant variant = Variant::id_only;
    std::vector<std::uint64_t> seeds{0};
    ModelConfig model;
    TrainConfig train;
    bool max_epochs_set = false;
    std::uint32_t random_dim = 3072;
    std::string endpoint = "http://127.0.0.1:8000";
    std::string model_name;
    std::optional<Pooling> pooling;

    fs::path prompts_path() const { return prompts.empty() ? out / "prompts.tsv" : prompts; }
    fs::path features_dir() const { return out / "features" / std::string(to_string(variant)); }
    fs::path user_features_path() const { return user_features.empty() ? features_dir() / "users.qfv" : user_features; }
    fs::path service_features_path() const {
        return service_features.empty() ? features_dir() / "services.qfv" : service_features;
    }
    fs::path split_dir(std::uint64_t seed) const {
        return out / "splits" / (std::string(to_string(dataset)) + "-D" + format_value(density) + "-s" + std::to_string(seed));
    }
    fs::path reports_path() const { return out / "reports.jsonl"; }

    ExperimentConfig experiment() const {
        ExperimentConfig e;
        e.dataset = dataset;
        e.density = density;
        e.variant = variant;
        e.seeds = seeds;
        e.model = model;
        e.train = train;
        e.random_feature_dim = random_dim;
        return e;
    }
    fs::path run_dir(std::uint64_t seed) const {
        return out / "runs" /
               (std::string(to_string(dataset)) + "-D" + format_value(density) + "-" + std::string(to_string(variant)) +
                "-" + make_run_id(experiment(), seed));
    }
};

// Flag values; unset flags leave the config file's value in place.
struct Flags {
    std::string config;
    std::optional<std::string> data, out, prompts, user_features, service_features, dataset, variant, endpoint,
        model_name, pooling;
    std::optional<double> density, learning_rate, huber_delta, beta1, beta2, epsilon;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> batch_size, max_epochs, eval_every, embed_dim, proj_dim;
    std::optional<std::uint32_t> random_dim;
    std::vector<std::size_t> mlp_dims;
    bool serial = false;
};

void add_common_flags(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON run config; flags override its values");
    app->add_option("--data", f.data, "Directory with userlist.txt, wslist.txt, tpMatrix.txt, rtMatrix.txt");
    app->add_option("--out", f.out, "Output root (default qos-out)");
    app->add_option("--dataset", f.dataset, "throughput | response_time");
    app->add_option("--density", f.density, "Training density D in (0, 1]");
    app->add_option("--variant", f.variant, "phi3mini | roberta | id_only | random");
    app->add_option("--seed", f.seed, "Run seed");
    app->add_option("--prompts", f.prompts, "Prompt manifest path (default <out>/prompts.tsv)");
    app->add_option("--user-features", f.user_features, "User QFV1 file (default <out>/features/<variant>/users.qfv)");
    app->add_option("--service-features", f.service_features,
                    "Service QFV1 file (default <out>/features/<variant>/services.qfv)");
    app->add_option("--embed-dim", f.embed_dim, "ID embedding width");
    app->add_option("--proj-dim", f.proj_dim, "Projection output width");
    app->add_option("--mlp-dims", f.mlp_dims, "MLP widths, comma separated")->delimiter(',');
    app->add_option("--learning-rate", f.learning_rate, "Adam learning rate");
    app->add_option("--batch-size", f.batch_size, "Mini-batch size");
    app->add_option("--max-epochs", f.max_epochs, "Epochs (default 1500 throughput, 600 response_time)");
    app->add_option("--huber-delta", f.huber_delta, "Huber loss threshold");
    app->add_option("--adam-beta1", f.beta1, "Adam beta1");
    app->add_option("--adam-beta2", f.beta2, "Adam beta2");
    app->add_option("--adam-epsilon", f.epsilon, "Adam epsilon");
    app->add_option("--eval-every", f.eval_every, "Evaluate on the test split every N epochs");
    app->add_option("--random-dim", f.random_dim, "Width of random features");
    app->add_option("--endpoint", f.endpoint, "Extractor base URL (QOS_EMBED_ENDPOINT overrides the config file)");
    app->add_option("--model-name", f.model_name, "Extractor model identifier");
    app->add_option("--pooling", f.pooling, "first | last");
    app->add_flag("--serial", f.serial, "Use the serial reference kernels");
}

template <typename T>
T get_key(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config " + where + " must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) throw ConfigError("unknown config key '" + where + k + "'");
    }
}

void apply_json(RunConfig& c, const json& j) {
    reject_unknown(j,
                   {"data_dir", "out", "prompts", "user_features", "service_features", "dataset", "density", "variant",
                    "seeds", "model", "train", "random_dim", "endpoint", "model_name", "pooling"},
                   "");
    if (j.contains("data_dir")) c.data_dir = get_key<std::string>(j, "data_dir");
    if (j.contains("out")) c.out = get_key<std::string>(j, "out");
    if (j.contains("prompts")) c.prompts = get_key<std::string>(j, "prompts");
    if (j.contains("user_features")) c.user_features = get_key<std::string>(j, "user_features");
    if (j.contains("service_features")) c.service_features = get_key<std::string>(j, "service_features");
    if (j.contains("dataset")) c.dataset = parse_qos_kind(get_key<std::string>(j, "dataset"));
    if (j.contains("density")) c.density = get_key<double>(j, "density");
    if (j.contains("variant")) c.variant = parse_variant(get_key<std::string>(j, "variant"));
    if (j.contains("seeds")) c.seeds = get_key<std::vector<std::uint64_t>>(j, "seeds");
    if (j.contains("random_dim")) c.random_dim = get_key<std::uint32_t>(j, "random_dim");
    if (j.contains("endpoint")) c.endpoint = get_key<std::string>(j, "endpoint");
    if (j.contains("model_name")) c.model_name = get_key<std::string>(j, "model_name");
    if (j.contains("pooling")) c.pooling = parse_pooling(get_key<std::string>(j, "pooling"));
    if (j.contains("model")) {
        const auto& m = j["model"];
        reject_unknown(m, {"embed_dim", "proj_dim", "mlp_dims"}, "model.");
        if (m.contains("embed_dim")) c.model.embed_dim = get_key<std::size_t>(m, "embed_dim");
        if (m.contains("proj_dim")) c.model.proj_dim = get_key<std::size_t>(m, "proj_dim");
        if (m.contains("mlp_dims")) c.model.mlp_dims = get_key<std::vector<std::size_t>>(m, "mlp_dims");
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        reject_unknown(t,
                       {"huber_delta", "learning_rate", "batch_size", "max_epochs", "adam_beta1", "adam_beta2",
                        "adam_epsilon", "eval_every", "parallel"},
                       "train.");
        if (t.contains("huber_delta")) c.train.huber_delta = get_key<double>(t, "huber_delta");
        if (t.contains("learning_rate")) c.train.learning_rate = get_key<double>(t, "learning_rate");
        if (t.contains("batch_size")) c.train.batch_size = get_key<std::size_t>(t, "batch_size");
        if (t.contains("max_epochs")) {
            c.train.max_epochs = get_key<std::size_t>(t, "max_epochs");
            c.max_epochs_set = true;
        }
        if (t.contains("adam_beta1")) c.train.adam_beta1 = get_key<double>(t, "adam_beta1");
        if (t.contains("adam_beta2")) c.train.adam_beta2 = get_key<double>(t, "adam_beta2");
        if (t.contains("adam_epsilon")) c.train.adam_epsilon = get_key<double>(t, "adam_epsilon");
        if (t.contains("eval_every")) c.train.eval_every = get_key<std::size_t>(t, "eval_every");
        if (t.contains("parallel")) c.train.parallel = get_key<bool>(t, "parallel");
    }
}

RunConfig resolve_config(const Flags& f) {
    RunConfig c;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw ConfigError("cannot open config file " + f.config);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("config file " + f.config + ": " + e.what());
        }
        apply_json(c, j);
    }
    if (const char* env = std::getenv("QOS_EMBED_ENDPOINT"); env && *env) c.endpoint = env;

    if (f.data) c.data_dir = *f.data;
    if (f.out) c.out = *f.out;
    if (f.prompts) c.prompts = *f.prompts;
    if (f.user_features) c.user_features = *f.user_features;
    if (f.service_features) c.service_features = *f.service_features;
    if (f.dataset) c.dataset = parse_qos_kind(*f.dataset);
    if (f.density) c.density = *f.density;
    if (f.variant) c.variant = parse_variant(*f.variant);
    if (f.seed) c.seeds = {*f.seed};
    if (f.embed_dim) c.model.embed_dim = *f.embed_dim;
    if (f.proj_dim) c.model.proj_dim = *f.proj_dim;
    if (!f.mlp_dims.empty()) c.model.mlp_dims = f.mlp_dims;
    if (f.learning_rate) c.train.learning_rate = *f.learning_rate;
    if (f.batch_size) c.train.batch_size = *f.batch_size;
    if (f.max_epochs) {
        c.train.max_epochs = *f.max_epochs;
        c.max_epochs_set = true;
    }
    if (f.huber_delta) c.train.huber_delta = *f.huber_delta;
    if (f.beta1) c.train.adam_beta1 = *f.beta1;
    if (f.beta2) c.train.adam_beta2 = *f.beta2;
    if (f.epsilon) c.train.adam_epsilon = *f.epsilon;
    if (f.eval_every) c.train.eval_every = *f.eval_every;
    if (f.random_dim) c.random_dim = *f.random_dim;
    if (f.endpoint) c.endpoint = *f.endpoint;
    if (f.model_name) c.model_name = *f.model_name;
    if (f.pooling) c.pooling = parse_pooling(*f.pooling);
    if (f.serial) c.train.parallel = false;
    if (!c.max_epochs_set) c.train.max_epochs = TrainConfig::defaults_for(c.dataset).max_epochs;

    if (!(c.density > 0.0 && c.density <= 1.0)) throw ConfigError("density must be in (0, 1]");
    if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
    if (c.random_dim == 0) throw ConfigError("random_dim must be positive");
    c.train.validate();
    return c;
}

json effective_json(const RunConfig& c) {
    return json{{"data_dir", c.data_dir.string()},
                {"out", c.out.string()},
                {"prompts", c.prompts_path().string()},
                {"user_features", c.user_features_path().string()},
                {"service_features", c.service_features_path().string()},
                {"dataset", to_string(c.dataset)},
                {"density", c.density},
                {"variant", to_string(c.variant)},
                {"seeds", c.seeds},
                {"random_dim", c.random_dim},
                {"model", {{"embed_dim", c.model.embed_dim}, {"proj_dim", c.model.proj_dim}, {"mlp_dims", c.model.mlp_dims}}},
                {"train",
                 {{"huber_delta", c.train.huber_delta},
                  {"learning_rate", c.train.learning_rate},
                  {"batch_size", c.train.batch_size},
                  {"max_epochs", c.train.max_epochs},
                  {"adam_beta1", c.train.adam_beta1},
                  {"adam_beta2", c.train.adam_beta2},
                  {"adam_epsilon", c.train.adam_epsilon},
                  {"eval_every", c.train.eval_every},
                  {"parallel", c.train.parallel}}}};
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_effective_config(const RunConfig& c, const fs::path& path) { write_text(path, effective_json(c).dump(2) + "\n"); }

fs::path require_file(const fs::path& p, const std::string& hint) {
    if (!fs::exists(p)) throw ConfigError("missing " + p.string() + (hint.empty() ? "" : "; " + hint));
    return p;
}

fs::path data_file(const RunConfig& c, const std::string& name) {
    if (c.data_dir.empty()) throw ConfigError("data_dir is not set (use --data or the config key data_dir)");
    return require_file(c.data_dir / name, "");
}

struct Dataset {
    std::vector<UserRecord> users;
    std::vector<ServiceRecord> services;
    QosMatrix matrix;
};

Dataset load_dataset(const RunConfig& c) {
    Dataset d;
    d.users = ingest_users(data_file(c, "userlist.txt"));
    d.services = ingest_services(data_file(c, "wslist.txt"));
    const auto name = c.dataset == QosKind::throughput ? "tpMatrix.txt" : "rtMatrix.txt";
    d.matrix = ingest_matrix(data_file(c, name), c.dataset, d.users.size(), d.services.size());
    return d;
}

struct Shape {
    std::size_t n_users = 0;
    std::size_t n_services = 0;
};

Shape read_shape(const fs::path& split_dir) {
    std::ifstream in(require_file(split_dir / "shape.json", "run `qosctl ingest` first"));
    const auto j = json::parse(in);
    return {j.at("n_users").get<std::size_t>(), j.at("n_services").get<std::size_t>()};
}

VariantFeatures load_features(const RunConfig& c, const Shape& shape, std::uint64_t seed) {
    FeatureStore users, services;
    FeatureInputs inputs;
    if (c.variant == Variant::phi3mini || c.variant == Variant::roberta) {
        const std::string hint = "run `qosctl features fetch` first";
        users = read_feature_file(require_file(c.user_features_path(), hint));
        services = read_feature_file(require_file(c.service_features_path(), hint));
        inputs = {&users, &services};
    }
    return resolve_features(c.variant, shape.n_users, shape.n_services, inputs, c.random_dim,
                            RunSeeds::from(seed).features);
}

std::vector<std::uint32_t> iota_ids(std::size_t n) {
    std::vector<std::uint32_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::uint32_t>(i);
    return ids;
}

int cmd_ingest(const RunConfig& c) {
    const auto d = load_dataset(c);
    const auto observed = d.matrix.observed_count();
    for (auto seed : c.seeds) {
        const auto split = split_by_density(d.matrix, c.density, RunSeeds::from(seed).split);
        const auto dir = c.split_dir(seed);
        write_split(split, observed, dir);
        write_text(dir / "shape.json", json{{"dataset", to_string(c.dataset)},
                                            {"n_users", d.matrix.n_users},
                                            {"n_services", d.matrix.n_services}}
                                               .dump(2) +
                                           "\n");
        std::cout << dir.string() << ": observed " << observed << ", train " << split.train.size() << ", test "
                  << split.test.size() << '\n';
    }
    return 0;
}

int cmd_prompts(const RunConfig& c) {
    const auto users = ingest_users(data_file(c, "userlist.txt"));
    const auto services = ingest_services(data_file(c, "wslist.txt"));
    const auto manifest = build_prompt_manifest(users, services);
    const auto path = c.prompts_path();
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_prompt_manifest(manifest, path);
    std::cout << path.string() << ": " << users.size() << " users, " << services.size() << " services\n";
    return 0;
}

int cmd_features_fetch(const RunConfig& c) {
    if (c.variant != Variant::phi3mini && c.variant != Variant::roberta) {
        throw ConfigError("features fetch needs --variant phi3mini or roberta");
    }
    const auto manifest = read_prompt_manifest(require_file(c.prompts_path(), "run `qosctl prompts` first"));
    const Pooling pooling = c.pooling.value_or(c.variant == Variant::roberta ? Pooling::first_token : Pooling::last_token);
    const std::string model = !c.model_name.empty()              ? c.model_name
                              : c.variant == Variant::roberta ? "roberta-base"
                                                              : "microsoft/Phi-3-mini-4k-instruct";
    std::vector<PromptText> users, services;
    for (const auto& p : manifest.prompts) (p.entity_kind == EntityKind::user ? users : services).push_back(p);
    const auto u = fetch_embeddings(c.endpoint, users, model, pooling, manifest.template_hash);
    const auto s = fetch_embeddings(c.endpoint, services, model, pooling, manifest.template_hash);
    for (const auto& p : {c.user_features_path(), c.service_features_path()}) {
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
    }
    write_feature_file(u, c.user_features_path());
    write_feature_file(s, c.service_features_path());
    std::cout << c.user_features_path().string() << ", " << c.service_features_path().string() << ": dim " << u.dim << '\n';
    return 0;
}

int cmd_features_random(RunConfig c) {
    c.variant = Variant::random;
    const auto users = ingest_users(data_file(c, "userlist.txt"));
    const auto services = ingest_services(data_file(c, "wslist.txt"));
    for (auto seed : c.seeds) {
        const auto fseed = RunSeeds::from(seed).features;
        auto u = random_features(EntityKind::user, iota_ids(users.size()), c.random_dim, fseed);
        auto s = random_features(EntityKind::service, iota_ids(services.size()), c.random_dim, fseed);
        const auto dir = c.features_dir() / ("s" + std::to_string(seed));
        fs::create_directories(dir);
        write_feature_file(u, dir / "users.qfv");
        write_feature_file(s, dir / "services.qfv");
        std::cout << dir.string() << ": dim " << c.random_dim << '\n';
    }
    return 0;
}

int cmd_train(const RunConfig& c) {
    for (auto seed : c.seeds) {
        const auto split_dir = c.split_dir(seed);
        const auto shape = read_shape(split_dir);
        const auto split = read_split(split_dir);
        const auto features = load_features(c, shape, seed);
        const auto outcome = run_on_split(split, features, c.experiment(), shape.n_users, shape.n_services, seed);

        auto run = c;
        run.seeds = {seed};
        const auto dir = c.run_dir(seed);
        fs::create_directories(dir);
        write_effective_config(run, dir / "config.json");
        write_curve_csv(outcome.training.curve, dir / "curve.csv");
        save_checkpoint(outcome.training.best, dir / "model.qck");
        write_text(dir / "report.json", json(outcome.report).dump(2) + "\n");
        upsert_report(outcome.report, c.reports_path());
        std::cout << dir.string() << ": best epoch " << outcome.report.best_epoch << ", MAE "
                  << format_value(outcome.report.mae) << ", RMSE " << format_value(outcome.report.rmse) << '\n';
    }
    return 0;
}

int cmd_eval(const RunConfig& c, const std::string& checkpoint) {
    for (auto seed : c.seeds) {
        const auto split_dir = c.split_dir(seed);
        const auto shape = read_shape(split_dir);
        const auto split = read_split(split_dir);
        const auto dir = c.run_dir(seed);
        const fs::path ckpt = checkpoint.empty() ? dir / "model.qck" : fs::path(checkpoint);
        const auto params = load_checkpoint(require_file(ckpt, "run `qosctl train` first"));
        if (params.config.n_users != shape.n_users || params.config.n_services != shape.n_services) {
            throw ConfigError("checkpoint entity counts do not match the split's dataset");
        }
        const auto features = load_features(c, shape, seed);
        auto report = evaluate_checkpoint(params, split, features.view());
        report.run_id = make_run_id(c.experiment(), seed);
        report.dataset = c.dataset;
        report.density = c.density;
        report.variant = std::string(to_string(c.variant));
        report.seed = seed;
        if (fs::exists(dir / "curve.csv")) {
            const auto curve = read_curve_csv(dir / "curve.csv");
            if (!curve.empty()) report.best_epoch = select_best_epoch(curve);
        }
        write_text(dir / "eval.json", json(report).dump(2) + "\n");
        upsert_report(report, c.reports_path());
        std::cout << dir.string() << ": MAE " << format_value(report.mae) << ", RMSE " << format_value(report.rmse)
                  << " over " << report.count << " test pairs\n";
    }
    return 0;
}

int cmd_sweep(const RunConfig& c, const std::string& axis_name, const std::vector<double>& values) {
    const auto d = load_dataset(c);
    SweepSpec spec;
    spec.axis = parse_sweep_axis(axis_name);
    spec.values = values;
    spec.base = c.experiment();
    FeatureStore users, services;
    FeatureInputs inputs;
    if (c.variant == Variant::phi3mini || c.variant == Variant::roberta) {
        users = read_feature_file(require_file(c.user_features_path(), "run `qosctl features fetch` first"));
        services = read_feature_file(require_file(c.service_features_path(), "run `qosctl features fetch` first"));
        inputs = {&users, &services};
    }
    const auto result = run_sweep(spec, d.matrix, inputs);
    const auto base_id = make_run_id(spec.base, spec.base.seeds.front());
    const auto path = c.out / "sweeps" / (std::string(to_string(spec.axis)) + "-" + base_id + ".csv");
    fs::create_directories(path.parent_path());
    write_sweep_csv(result, spec.axis, path);
    upsert_report(result.base, c.reports_path());
    for (const auto& p : result.points) upsert_report(p.report, c.reports_path());
    write_effective_config(c, path.parent_path() / (std::string(to_string(spec.axis)) + "-" + base_id + ".json"));
    std::cout << path.string() << '\n';
    return 0;
}

int cmd_report(const RunConfig& c, bool no_published) {
    const auto reports = read_reports(require_file(c.reports_path(), "run `qosctl train` first"));
    const auto csv = render_summary_csv(reports, !no_published);
    write_text(c.out / "summary.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_synth(const fs::path& dir, const SyntheticSpec& spec) {
    write_synthetic_dataset(spec, dir);
    std::cout << dir.string() << ": " << spec.n_users << " users, " << spec.n_services << " services\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qosctl: QoS prediction with language-model entity features"};
    app.require_subcommand(1);

    Flags flags;
    auto* ingest = app.add_subcommand("ingest", "Parse the dataset and write the density split");
    auto* prompts = app.add_subcommand("prompts", "Build the prompt manifest from the entity tables");
    auto* features = app.add_subcommand("features", "Produce entity feature files");
    features->require_subcommand(1);
    auto* fetch = features->add_subcommand("fetch", "Fetch embeddings from the extractor service");
    auto* random = features->add_subcommand("random", "Write random feature files");
    auto* train_cmd = app.add_subcommand("train", "Train and keep the lowest-test-MAE epoch");
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
    auto* sweep = app.add_subcommand("sweep", "Hyper-parameter sweep on one axis");
    auto* report = app.add_subcommand("report", "Render the summary table from reports.jsonl");
    for (auto* cmd : {ingest, prompts, fetch, random, train_cmd, eval, sweep, report}) add_common_flags(cmd, flags);

    std::string checkpoint;
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file (default <run dir>/model.qck)");
    std::string axis;
    std::vector<double> values;
    sweep->add_option("--axis", axis, "mlp_depth | mlp_width_factor | batch_size | learning_rate")->required();
    sweep->add_option("--values", values, "Comma-separated axis values")->required()->delimiter(',');
    bool no_published = false;
    report->add_flag("--no-published", no_published, "Omit the published comparison rows");

    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset in the released layout");
    std::string synth_dir;
    SyntheticSpec spec;
    synth->add_option("--data", synth_dir, "Output directory")->required();
    synth->add_option("--users", spec.n_users, "Number of users");
    synth->add_option("--services", spec.n_services, "Number of services");
    synth->add_option("--rank", spec.rank, "Rank of the generating factors");
    synth->add_option("--noise", spec.noise_std, "Observation noise standard deviation");
    synth->add_option("--missing", spec.missing_fraction, "Fraction of cells left unobserved");
    synth->add_option("--seed", spec.seed, "Generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) return cmd_synth(synth_dir, spec);
        const auto config = resolve_config(flags);
        if (*ingest) return cmd_ingest(config);
        if (*prompts) return cmd_prompts(config);
        if (*fetch) return cmd_features_fetch(config);
        if (*random) return cmd_features_random(config);
        if (*train_cmd) return cmd_train(config);
        if (*eval) return cmd_eval(config, checkpoint);
        if (*sweep) return cmd_sweep(config, axis, values);
        if (*report) return cmd_report(config, no_published);
    } catch (const ParseError& e) {
        std::cerr << "qosctl: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "qosctl: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
