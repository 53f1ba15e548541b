#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "hdrssl/nn.hpp"
#include "hdrssl/tensor.hpp"

namespace hdrssl {

/// Intermediate activations recorded by a training-mode forward pass.
struct ForwardTape {
    std::vector<Tensor> slots;
};

struct BackboneOutput {
    Tensor prediction;  ///< N x 3 x H x W, values in [0,1]
    Tensor feature;     ///< N x C x H x W attention-fused feature
};

/// Reconstruction backbone: 18-channel network input -> (HDR prediction, attention feature).
/// Implementations are stateless over parameters: the same backbone drives teacher and
/// student parameter sets.
class Backbone {
public:
    virtual ~Backbone() = default;

    virtual std::string architecture() const = 0;
    virtual int feature_channels() const = 0;

    /// Appends this backbone's parameter tensors to `params`.
    virtual void declare(ParameterSet& params) = 0;
    virtual void initialize(ParameterSet& params, std::mt19937_64& rng) const = 0;

    virtual BackboneOutput forward(const ParameterSet& params, const Tensor& input, ForwardTape* tape) const = 0;

    /// Accumulates parameter gradients. `d_feature` may be null.
    virtual void backward(ParameterSet& params, const ForwardTape& tape, const Tensor& d_prediction,
                          const Tensor* d_feature) const = 0;
};

/// Small attention-fusion network: shared per-frame encoder, sigmoid spatial attention of
/// each non-reference frame against the reference, fusion conv (the attention-feature tap),
/// residual trunk, sigmoid reconstruction head.
class ReferenceBackbone final : public Backbone {
public:
    explicit ReferenceBackbone(int width);

    std::string architecture() const override { return "ref-attn"; }
    int feature_channels() const override { return width_; }
    void declare(ParameterSet& params) override;
    void initialize(ParameterSet& params, std::mt19937_64& rng) const override;
    BackboneOutput forward(const ParameterSet& params, const Tensor& input, ForwardTape* tape) const override;
    void backward(ParameterSet& params, const ForwardTape& tape, const Tensor& d_prediction,
                  const Tensor* d_feature) const override;

    /// Attention maps (frames 0 and 2) from a recorded tape, for inspection.
    static const Tensor& attention_map(const ForwardTape& tape, int frame);

private:
    int width_;
    Conv2d encoder_, attention0_, attention2_, fusion_, trunk1_, trunk2_, head_;
};

/// Parameter-free stand-in: predicts the clamped gamma-corrected reference frame and exposes
/// the raw input as its feature. Used for pipeline checks.
class IdentityBackbone final : public Backbone {
public:
    std::string architecture() const override { return "identity"; }
    int feature_channels() const override { return 18; }
    void declare(ParameterSet&) override {}
    void initialize(ParameterSet&, std::mt19937_64&) const override {}
    BackboneOutput forward(const ParameterSet& params, const Tensor& input, ForwardTape* tape) const override;
    void backward(ParameterSet&, const ForwardTape&, const Tensor&, const Tensor*) const override {}
};

/// Three 3x3 convolutions; the first layer's output is added to the input of the third.
/// Terminal sigmoid gives an uncertainty map in (0,1).
class JudgeHead {
public:
    JudgeHead() = default;
    JudgeHead(ParameterSet& params, int feature_channels);

    template <typename Rng>
    void initialize(ParameterSet& params, Rng& rng) const {
        conv1_.init(params, rng);
        conv2_.init(params, rng);
        conv3_.init(params, rng);
    }

    Tensor forward(const ParameterSet& params, const Tensor& feature, ForwardTape* tape) const;
    /// Returns the feature gradient.
    Tensor backward(ParameterSet& params, const Tensor& feature, const ForwardTape& tape,
                    const Tensor& d_uncertainty) const;

    std::size_t first_parameter() const { return conv1_.weight_index(); }

private:
    Conv2d conv1_, conv2_, conv3_;
};

struct ModelSpec {
    std::string architecture = "ref-attn";
    int width = 32;
    std::uint64_t seed = 0;
};

std::unique_ptr<Backbone> make_backbone(const ModelSpec& spec);

struct FullOutput {
    Tensor prediction;   ///< HDR prediction in [0,1]
    Tensor uncertainty;  ///< judge output in (0,1)
    Tensor feature;      ///< attention feature
};

struct NetworkTape {
    ForwardTape backbone;
    ForwardTape judge;
    Tensor feature;
};

/// Immutable architecture: backbone + judge head and the parameter layout they declare.
class Network {
public:
    explicit Network(ModelSpec spec);

    const ModelSpec& spec() const { return spec_; }
    const Backbone& backbone() const { return *backbone_; }
    const ParameterSet& layout() const { return layout_; }
    /// Index of the first judge-head parameter; earlier indices belong to the backbone.
    std::size_t judge_begin() const { return judge_begin_; }

    ParameterSet create_parameters(std::uint64_t seed) const;

    FullOutput forward(const ParameterSet& params, const Tensor& input, NetworkTape* tape = nullptr) const;

    struct BackwardOptions {
        /// When false the judge gradient stops at the attention feature.
        bool judge_into_features = true;
    };

    /// Accumulates gradients into `params`; either output gradient may be empty.
    void backward(ParameterSet& params, const NetworkTape& tape, const FullOutput& out, const Tensor& d_prediction,
                  const Tensor& d_uncertainty, BackwardOptions opts) const;

private:
    ModelSpec spec_;
    std::unique_ptr<Backbone> backbone_;
    JudgeHead judge_;
    ParameterSet layout_;
    std::size_t judge_begin_ = 0;
};

/// A network together with one parameter set. Copies are deep over parameters and share
/// the immutable architecture.
class HdrModel {
public:
    explicit HdrModel(ModelSpec spec);
    HdrModel(std::shared_ptr<const Network> net, ParameterSet params);

    const Network& network() const { return *net_; }
    std::shared_ptr<const Network> network_ptr() const { return net_; }
    const ModelSpec& spec() const { return net_->spec(); }
    ParameterSet& parameters() { return params_; }
    const ParameterSet& parameters() const { return params_; }

    FullOutput forward_full(const Tensor& input) const { return net_->forward(params_, input); }

private:
    std::shared_ptr<const Network> net_;
    ParameterSet params_;
};

/// Checkpoint directory: `manifest.txt` (key/value text) plus one little-endian float32 blob
/// per parameter tensor, in manifest order.
struct CheckpointInfo {
    ModelSpec spec;
    long long step = 0;
};

void save_checkpoint(const std::filesystem::path& dir, const HdrModel& model, long long step);
HdrModel load_checkpoint(const std::filesystem::path& dir, CheckpointInfo* info = nullptr);

/// Raw tensor blob helpers (little-endian float32).
void write_f32_blob(const std::filesystem::path& file, const std::vector<float>& values);
std::vector<float> read_f32_blob(const std::filesystem::path& file, std::size_t expected);

}  // namespace hdrssl
