#include "driftnet/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "driftnet/errors.hpp"

namespace driftnet {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
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

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw ConfigError("config: bad numeric value for '" + key + "': " + value);
    }
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw ConfigError("config: bad integer value for '" + key + "': " + value);
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("config: bad boolean value for '" + key + "': " + value);
}

}  // namespace

ExperimentConfig ExperimentConfig::preset(const std::string& experiment) {
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    if (experiment == "simulation") {
        // Two-task regression protocol: per-epoch snapshots, grouping every
        // 10 epochs, 0-1 performance vectors at three noise deviations,
        // scalar-output variance for retrieval. Groups keep the full task
        // history (cap = epochs per task).
        cfg.strategies = {"driftnet", "stable"};
        cfg.sigmas = {3.0};
        cfg.repetitions = 10;
        cfg.noise = "gradient";
        cfg.relative_noise = false;
        cfg.learning_rate = 1e-3;
        cfg.snapshot_interval_epochs = 1;
        cfg.encode_interval_epochs = 10;
        cfg.buffer_batches = 20;
        cfg.dbscan_eps = 1.0;
        cfg.group_cap = 100;
        cfg.measure = "regression-variance";
        cfg.pv_mode = "thresholded";
        cfg.pv_threshold = 0.3;
    } else if (experiment == "blobs") {
        // Class-incremental stand-in sized for desk runs. The shared feature
        // layer of a small MLP is what makes sequential training actually
        // forget; absolute gradient noise drives exploration along each
        // task's free directions. Grouping runs on 0-1 loss indicators
        // (criterion values on overconfident heads span several orders of
        // magnitude and their shared cross-task structure would dominate the
        // cosine geometry); the tight eps cuts the links that snapshots
        // taken mid-forgetting would otherwise chain between task clusters,
        // at the cost of harmless splinter singletons.
        cfg.strategies = {"driftnet", "stable", "joint", "theoretical-limits"};
        cfg.sigmas = {0.02};
        cfg.repetitions = 5;
        cfg.noise = "gradient";
        cfg.relative_noise = false;
        cfg.learning_rate = 0.05;
        cfg.model = "mlp";
        cfg.mlp_hidden = 16;
        cfg.blob_epochs = 50;
        cfg.snapshot_interval_epochs = 5;
        cfg.encode_interval_epochs = 5;
        cfg.buffer_batches = 31;  // ~500 samples at batch size 16
        cfg.group_cap = 20;
        cfg.measure = "soft-label-variance";
        cfg.pv_mode = "thresholded";
        cfg.pv_threshold = 1.0;
        cfg.dbscan_eps = 0.05;
    } else {
        throw ConfigError("config: unknown experiment '" + experiment + "'");
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("config: cannot open " + file.string());

    // First pass just to find the experiment kind so preset defaults apply.
    std::string experiment = "simulation";
    {
        std::string line;
        while (std::getline(in, line)) {
            const std::string t = trim(line);
            if (t.rfind("kind", 0) == 0) {
                const auto eq = t.find('=');
                if (eq != std::string::npos) experiment = trim(t.substr(eq + 1));
                break;
            }
        }
        in.clear();
        in.seekg(0);
    }

    ExperimentConfig cfg = preset(experiment);

    using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;
    static const std::map<std::string, Setter> setters = {
        {"experiment/kind", [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.experiment = v; }},
        {"experiment/strategies", [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.strategies = split_list(v); }},
        {"experiment/sigmas",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) {
             c.sigmas.clear();
             for (const auto& s : split_list(v)) c.sigmas.push_back(parse_double(k, s));
         }},
        {"experiment/repetitions",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.repetitions = parse_int(k, v); }},
        {"experiment/seed",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.base_seed = static_cast<std::uint64_t>(parse_int(k, v)); }},
        {"experiment/output", [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.output_dir = v; }},
        {"experiment/workers", [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.workers = parse_int(k, v); }},
        {"driftnet/noise", [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.noise = v; }},
        {"driftnet/relative_noise",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.relative_noise = parse_bool(k, v); }},
        {"driftnet/learning_rate",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.learning_rate = parse_double(k, v); }},
        {"driftnet/snapshot_epochs",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.snapshot_interval_epochs = parse_int(k, v); }},
        {"driftnet/encode_epochs",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.encode_interval_epochs = parse_int(k, v); }},
        {"driftnet/buffer_batches",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.buffer_batches = parse_int(k, v); }},
        {"driftnet/dbscan_eps",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.dbscan_eps = parse_double(k, v); }},
        {"driftnet/dbscan_min_pts",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.dbscan_min_pts = parse_int(k, v); }},
        {"driftnet/group_cap", [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.group_cap = parse_int(k, v); }},
        {"driftnet/measure", [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.measure = v; }},
        {"driftnet/pv_mode", [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.pv_mode = v; }},
        {"driftnet/pv_threshold",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.pv_threshold = parse_double(k, v); }},
        {"driftnet/snapshot_gate",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.snapshot_gate = parse_double(k, v); }},
        {"driftnet/drift_probe_rows",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.drift_probe_rows = parse_int(k, v); }},
        {"baselines/stable_window",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.stable_window = parse_int(k, v); }},
        {"baselines/er_buffer_rows",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.er_buffer_rows = parse_int(k, v); }},
        {"blobs/tasks", [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.blob_tasks = parse_int(k, v); }},
        {"blobs/classes_per_task",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.blob_classes_per_task = parse_int(k, v); }},
        {"blobs/input_dim", [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.blob_input_dim = parse_int(k, v); }},
        {"blobs/separation",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.blob_separation = parse_double(k, v); }},
        {"blobs/train_per_class",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.blob_train_per_class = parse_int(k, v); }},
        {"blobs/test_per_class",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.blob_test_per_class = parse_int(k, v); }},
        {"blobs/epochs", [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.blob_epochs = parse_int(k, v); }},
        {"blobs/private_dims",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.blob_private_dims = parse_int(k, v); }},
        {"blobs/label_noise",
         [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.blob_label_noise = parse_double(k, v); }},
        {"blobs/model", [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.model = v; }},
        {"blobs/mlp_hidden", [](auto& c, [[maybe_unused]] auto& k, auto& v) { c.mlp_hidden = parse_int(k, v); }},
    };

    std::string section = "experiment";
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no) +
                              " is not 'key = value': " + t);
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const auto it = setters.find(section + "/" + key);
        if (it == setters.end())
            throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
        it->second(cfg, key, value);
    }

    cfg.validate();
    return cfg;
}

void ExperimentConfig::validate() const {
    if (experiment != "simulation" && experiment != "blobs")
        throw ConfigError("config: field 'kind' must be simulation or blobs");
    if (repetitions < 1) throw ConfigError("config: field 'repetitions' must be >= 1");
    for (double s : sigmas)
        if (s < 0.0) throw ConfigError("config: field 'sigmas' entries must be >= 0");
    if (strategies.empty()) throw ConfigError("config: field 'strategies' is empty");
    static const std::vector<std::string> known = {
        "fine-tune", "joint", "stable", "theoretical-limits", "er", "driftnet"};
    for (const auto& s : strategies)
        if (std::find(known.begin(), known.end(), s) == known.end())
            throw ConfigError("config: field 'strategies' has unknown entry '" + s + "'");
    if (learning_rate <= 0.0) throw ConfigError("config: field 'learning_rate' must be > 0");
    if (snapshot_interval_epochs < 1)
        throw ConfigError("config: field 'snapshot_epochs' must be >= 1");
    if (encode_interval_epochs < 1)
        throw ConfigError("config: field 'encode_epochs' must be >= 1");
    if (buffer_batches < 1) throw ConfigError("config: field 'buffer_batches' must be >= 1");
    if (dbscan_eps <= 0.0) throw ConfigError("config: field 'dbscan_eps' must be > 0");
    if (dbscan_min_pts < 1) throw ConfigError("config: field 'dbscan_min_pts' must be >= 1");
    if (noise != "none" && noise != "batch-only" && noise != "input" && noise != "gradient" &&
        noise != "dropout")
        throw ConfigError("config: field 'noise' has unknown value '" + noise + "'");
    if (pv_mode != "raw" && pv_mode != "thresholded")
        throw ConfigError("config: field 'pv_mode' must be raw or thresholded");
    if (measure != "entropy" && measure != "hard-label-variance" &&
        measure != "soft-label-variance" && measure != "regression-variance")
        throw ConfigError("config: field 'measure' has unknown value '" + measure + "'");
    if (model != "auto" && model != "softmax-linear" && model != "mlp")
        throw ConfigError("config: field 'model' has unknown value '" + model + "'");
    if (blob_tasks * blob_classes_per_task < 2)
        throw ConfigError("config: field 'tasks': need at least 2 classes overall");
    if (blob_separation <= 0.0) throw ConfigError("config: field 'separation' must be > 0");
    if (drift_probe_rows < 2) throw ConfigError("config: field 'drift_probe_rows' must be >= 2");
}

NoiseSpec ExperimentConfig::noise_spec(double sigma) const {
    if (noise == "none") return NoiseSpec::none();
    if (noise == "batch-only") return {NoiseSpec::Type::BatchOnly, 0.0, false, 0.0};
    if (noise == "input") return NoiseSpec::input(sigma);
    if (noise == "gradient") return NoiseSpec::gradient(sigma, relative_noise);
    if (noise == "dropout") return NoiseSpec::dropout(sigma);
    throw ConfigError("config: field 'noise' has unknown value '" + noise + "'");
}

Measure ExperimentConfig::measure_kind() const {
    if (measure == "entropy") return Measure::Entropy;
    if (measure == "hard-label-variance") return Measure::HardLabelVariance;
    if (measure == "soft-label-variance") return Measure::SoftLabelVariance;
    return Measure::RegressionVariance;
}

PvMode ExperimentConfig::pv_mode_kind() const {
    return pv_mode == "raw" ? PvMode::Raw : PvMode::Thresholded;
}

}  // namespace driftnet
