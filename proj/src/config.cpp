#include "hdrssl/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace hdrssl {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError("invalid value '" + text + "' for " + key);
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("invalid boolean '" + text + "' for " + key + " (use true/false)");
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename T>
ConfigField number_field(std::string section, std::string key, std::string help, T RunConfig::*member) {
    const std::string k = key;
    return {std::move(section), std::move(key), std::move(help),
            [member, k](RunConfig& c, const std::string& s) { c.*member = parse_number<T>(k, s); },
            [member](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
                else return std::to_string(c.*member);
            }};
}

ConfigField string_field(std::string section, std::string key, std::string help, std::string RunConfig::*member) {
    return {std::move(section), std::move(key), std::move(help),
            [member](RunConfig& c, const std::string& s) { c.*member = s; },
            [member](const RunConfig& c) { return c.*member; }};
}

ConfigField bool_field(std::string section, std::string key, std::string help, bool RunConfig::*member) {
    const std::string k = key;
    return {std::move(section), std::move(key), std::move(help),
            [member, k](RunConfig& c, const std::string& s) { c.*member = parse_bool(k, s); },
            [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

std::vector<ConfigField> build_fields() {
    using R = RunConfig;
    return {
        string_field("data", "data", "dataset root (one directory per scene)", &R::data),
        string_field("data", "val_data", "validation dataset root", &R::val_data),
        number_field("data", "n_labeled", "number of labeled scenes", &R::n_labeled),
        string_field("data", "split_policy", "first_n or random", &R::split_policy),
        string_field("run", "run_dir", "output directory", &R::run_dir),
        number_field("run", "seed", "global seed", &R::seed),
        number_field("run", "checkpoint_every", "checkpoint interval in epochs (0: final only)", &R::checkpoint_every),
        number_field("run", "val_every", "validation interval in epochs (0: final only)", &R::val_every),
        string_field("run", "eval_model", "student or teacher", &R::eval_model),
        number_field("photometric", "gamma", "gamma of the LDR response", &R::gamma),
        number_field("photometric", "mu", "mu-law compression", &R::mu),
        string_field("model", "architecture", "ref-attn or identity", &R::architecture),
        number_field("model", "width", "backbone feature channels", &R::width),
        bool_field("model", "judge_into_features", "judge gradient reaches the backbone", &R::judge_into_features),
        number_field("loss", "lambda_u", "unsupervised loss weight", &R::lambda_u),
        number_field("loss", "lambda_v", "perceptual loss weight", &R::lambda_v),
        number_field("mask", "tau_pa", "patch mask threshold", &R::tau_pa),
        number_field("mask", "tau_pi", "pixel mask threshold", &R::tau_pi),
        number_field("teacher", "alpha", "EMA decay", &R::alpha),
        number_field("optim", "lr", "Adam learning rate", &R::lr),
        number_field("optim", "adam_beta1", "Adam beta1", &R::adam_beta1),
        number_field("optim", "adam_beta2", "Adam beta2", &R::adam_beta2),
        number_field("optim", "adam_eps", "Adam epsilon", &R::adam_eps),
        string_field("optim", "lr_schedule", "constant or cosine", &R::lr_schedule),
        number_field("train", "epochs", "total epochs", &R::epochs),
        number_field("train", "warmup_epochs", "supervised warm-up epochs", &R::warmup_epochs),
        number_field("train", "batch_size", "patches per batch", &R::batch_size),
        number_field("train", "steps_per_epoch", "optimizer steps per epoch (0: one labeled pass)", &R::steps_per_epoch),
        number_field("train", "patch", "patch size", &R::patch),
        number_field("train", "stride", "patch stride", &R::stride),
        number_field("train", "pool_batch", "teacher batch size for pseudo labels", &R::pool_batch),
        number_field("augment", "p_flip", "flip probability", &R::p_flip),
        number_field("augment", "p_rotate", "rotation probability", &R::p_rotate),
        number_field("augment", "p_shuffle", "RGB shuffle probability", &R::p_shuffle),
        string_field("ablation", "ablation", "bl, mt, lk, pam, pim, both or full", &R::ablation),
        number_field("ablation", "ablate_epochs", "epochs per ablation row", &R::ablate_epochs),
        number_field("ablation", "ablate_warmup_epochs", "warm-up epochs per ablation row", &R::ablate_warmup_epochs),
    };
}

template <typename T>
void require_range(const char* key, T v, T lo, T hi) {
    if (!(v >= lo && v <= hi)) {
        std::ostringstream os;
        os << key << " = " << v << " is outside [" << lo << ", " << hi << "]";
        throw ConfigError(os.str());
    }
}

void require_positive(const char* key, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(key) + " must be positive and finite");
}

void require_choice(const char* key, const std::string& v, std::initializer_list<const char*> choices) {
    for (const char* c : choices)
        if (v == c) return;
    std::string msg = std::string(key) + " = '" + v + "' is not one of:";
    for (const char* c : choices) msg += std::string(" ") + c;
    throw ConfigError(msg);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

}  // namespace

std::string ConfigField::flag() const {
    std::string f = "--" + key;
    std::replace(f.begin(), f.end(), '_', '-');
    return f;
}

const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields = build_fields();
    return fields;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& f : config_fields())
        if (f.key == key) return f.set(cfg, value);
    throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::ostringstream cleaned;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (!t.empty() && t[0] == '#') continue;
        cleaned << line << '\n';
    }
    boost::property_tree::ptree tree;
    try {
        std::istringstream src(cleaned.str());
        boost::property_tree::ini_parser::read_ini(src, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) throw ConfigError(origin + ": key '" + section + "' must appear inside a [section]");
        const auto& all = config_fields();
        if (std::none_of(all.begin(), all.end(), [&](const ConfigField& f) { return f.section == section; }))
            throw ConfigError(origin + ": unknown section [" + section + "]");
        for (const auto& [key, value] : body) {
            const auto& fields = config_fields();
            auto it = std::find_if(fields.begin(), fields.end(), [&](const ConfigField& f) { return f.key == key; });
            if (it == fields.end()) throw ConfigError(origin + ": unknown key '" + key + "' in [" + section + "]");
            if (it->section != section)
                throw ConfigError(origin + ": key '" + key + "' belongs in [" + it->section + "], not [" + section + "]");
            try {
                it->set(cfg, unquote(trim(value.get_value<std::string>())));
            } catch (const ConfigError& e) {
                throw ConfigError(origin + ": " + e.what());
            }
        }
    }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::ostringstream text;
    text << in.rdbuf();
    apply_config_text(cfg, text.str(), file.string());
}

std::string dump_config(const RunConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const auto& f : config_fields()) {
        if (f.section != section) {
            if (!section.empty()) out << '\n';
            section = f.section;
            out << '[' << section << "]\n";
        }
        out << f.key << " = \"" << f.get(cfg) << "\"\n";
    }
    return out.str();
}

const std::vector<std::string>& ablation_rows() {
    static const std::vector<std::string> rows{"bl", "mt", "lk", "pam", "pim", "both", "full"};
    return rows;
}

AblationToggle toggles_for_row(const std::string& row) {
    AblationToggle t;
    t.enable_mt = row != "bl";
    t.enable_unc_loss = row != "bl" && row != "mt";
    t.enable_patch_mask = row == "pam" || row == "both" || row == "full";
    t.enable_pixel_mask = row == "pim" || row == "both" || row == "full";
    t.enable_strong_aug = row == "full";
    if (std::find(ablation_rows().begin(), ablation_rows().end(), row) == ablation_rows().end())
        throw ConfigError("unknown ablation row '" + row + "'");
    return t;
}

void RunConfig::validate() const {
    require_range("n_labeled", n_labeled, 1, 1 << 20);
    require_choice("split_policy", split_policy, {"first_n", "random"});
    if (run_dir.empty()) throw ConfigError("run_dir must not be empty");
    require_range("checkpoint_every", checkpoint_every, 0, 1 << 20);
    require_range("val_every", val_every, 0, 1 << 20);
    require_choice("eval_model", eval_model, {"student", "teacher"});
    require_positive("gamma", gamma);
    require_positive("mu", mu);
    require_choice("architecture", architecture, {"ref-attn", "identity"});
    require_range("width", width, 1, 1024);
    require_range("lambda_u", lambda_u, 0.0, 1e6);
    require_range("lambda_v", lambda_v, 0.0, 1e6);
    require_range("tau_pa", tau_pa, 0.0, 1.0);
    require_range("tau_pi", tau_pi, 0.0, 1.0);
    require_range("alpha", alpha, 0.0, 1.0);
    require_positive("lr", lr);
    require_range("adam_beta1", adam_beta1, 0.0, 0.999999999);
    require_range("adam_beta2", adam_beta2, 0.0, 0.999999999);
    require_positive("adam_eps", adam_eps);
    require_choice("lr_schedule", lr_schedule, {"constant", "cosine"});
    require_range("epochs", epochs, 1, 1 << 20);
    require_range("warmup_epochs", warmup_epochs, 0, epochs);
    require_range("batch_size", batch_size, 1, 1 << 16);
    require_range("steps_per_epoch", steps_per_epoch, 0, 1 << 24);
    require_range("patch", patch, 8, 1 << 14);  // smallest input of the perceptual pyramid
    require_range("stride", stride, 1, patch);
    require_range("pool_batch", pool_batch, 1, 1 << 16);
    require_range("p_flip", p_flip, 0.0, 1.0);
    require_range("p_rotate", p_rotate, 0.0, 1.0);
    require_range("p_shuffle", p_shuffle, 0.0, 1.0);
    toggles_for_row(ablation);
    require_range("ablate_epochs", ablate_epochs, 1, 1 << 20);
    require_range("ablate_warmup_epochs", ablate_warmup_epochs, 0, ablate_epochs);
}

PhotometricConfig RunConfig::photometric() const { return {gamma, mu}; }

ModelSpec RunConfig::model_spec() const { return {architecture, width, seed}; }

AdamConfig RunConfig::adam() const { return {lr, adam_beta1, adam_beta2, adam_eps}; }

double RunConfig::lr_at(int epoch) const {
    if (lr_schedule == "constant") return lr;
    return 0.5 * lr * (1.0 + std::cos(std::numbers::pi * epoch / epochs));
}

SplitSpec RunConfig::split() const {
    return {n_labeled, seed, split_policy == "random" ? SplitPolicy::Random : SplitPolicy::FirstN};
}

PatchGrid RunConfig::grid() const { return {patch, stride}; }

TileConfig RunConfig::tiles() const { return {patch, stride}; }

AblationToggle RunConfig::toggles() const { return toggles_for_row(ablation); }

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.photo = photometric();
    t.weights = {lambda_u, lambda_v};
    t.thresholds = {tau_pa, tau_pi};
    t.alpha = alpha;
    t.batch_size = batch_size;
    t.steps_per_epoch = steps_per_epoch;
    t.toggles = toggles();
    // The baseline row is a plain supervised run.
    if (!t.toggles.enable_mt) t.weights.lambda_u = 0.0;
    t.aug = {p_flip, p_rotate, p_shuffle};
    t.judge_into_features = judge_into_features;
    return t;
}

}  // namespace hdrssl
