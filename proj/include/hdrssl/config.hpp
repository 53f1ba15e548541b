#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdrssl/data.hpp"
#include "hdrssl/inference.hpp"
#include "hdrssl/losses.hpp"
#include "hdrssl/nn.hpp"
#include "hdrssl/semisup.hpp"

namespace hdrssl {

/// Bad config value, unknown key or malformed file. Maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    // [data]
    std::string data;
    std::string val_data;  ///< empty: score the hidden GT of the unlabeled scenes
    int n_labeled = 5;
    std::string split_policy = "first_n";

    // [run]
    std::string run_dir = "run";
    std::uint64_t seed = 0;
    int checkpoint_every = 10;  ///< 0: final checkpoint only
    int val_every = 1;          ///< 0: final epoch only
    std::string eval_model = "student";

    // [photometric]
    double gamma = 2.2;
    double mu = 5000.0;

    // [model]
    std::string architecture = "ref-attn";
    int width = 32;
    bool judge_into_features = true;

    // [loss]
    double lambda_u = 1.0;
    double lambda_v = 0.01;

    // [mask]
    double tau_pa = 0.4;
    double tau_pi = 0.4;

    // [teacher]
    double alpha = 0.999;

    // [optim]
    double lr = 2e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::string lr_schedule = "constant";  ///< constant or cosine (per epoch, to 0 at the last epoch)

    // [train]
    int epochs = 200;
    int warmup_epochs = 30;
    int batch_size = 64;
    int steps_per_epoch = 0;
    int patch = 64;
    int stride = 32;
    int pool_batch = 16;

    // [augment]
    double p_flip = 0.5;
    double p_rotate = 0.5;
    double p_shuffle = 0.5;

    // [ablation]
    std::string ablation = "full";  ///< bl, mt, lk, pam, pim, both, full
    int ablate_epochs = 40;
    int ablate_warmup_epochs = 8;

    /// Throws ConfigError naming the first out-of-range field.
    void validate() const;

    PhotometricConfig photometric() const;
    ModelSpec model_spec() const;
    AdamConfig adam() const;
    double lr_at(int epoch) const;
    SplitSpec split() const;
    PatchGrid grid() const;
    TileConfig tiles() const;
    AblationToggle toggles() const;
    TrainConfig train_config() const;
};

/// One settable config entry; its CLI flag is `--` + key with '_' replaced by '-'.
struct ConfigField {
    std::string section;
    std::string key;
    std::string help;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;

    std::string flag() const;
};

const std::vector<ConfigField>& config_fields();

/// Sets one field from its text form. Throws ConfigError for unknown keys or unparsable values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// `[section]` headers with `key = value` lines; '#' and ';' start comment lines, values may be
/// double-quoted. Unknown sections or keys are rejected. Does not validate ranges.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config");
void apply_config_file(RunConfig& cfg, const std::filesystem::path& file);

/// Every field in file syntax; parsing the result reproduces `cfg` exactly.
std::string dump_config(const RunConfig& cfg);

/// Row names accepted by `ablation`, in table order.
const std::vector<std::string>& ablation_rows();
AblationToggle toggles_for_row(const std::string& row);

}  // namespace hdrssl
